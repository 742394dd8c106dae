fn main() {
    std::process::exit(fusebench::cli::execute(std::env::args_os()));
}
