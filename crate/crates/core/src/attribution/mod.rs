//! Shapley attribution of subset AUROCs to sources and modalities.

pub mod game;
pub mod shapley;

pub use game::{
    build_game, build_games_per_repeat, build_modality_game, CoalitionGame, ModalityPooling,
    EMPTY_VALUE, MAX_PLAYERS,
};
pub use shapley::{
    aggregate_modalities, efficiency_residual, modality_game_shapley, shapley_exact, waterfall_csv,
    ShapleyReport,
};
