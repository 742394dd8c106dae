use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use fusebench_ffi::*;

fn last_error() -> String {
    let p = fb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn default_catalog_handle() {
    let mut cat = ptr::null_mut();
    unsafe {
        assert_eq!(fb_catalog_default(&mut cat), FbStatus::Ok);
        assert_eq!(fb_catalog_len(cat), 11);
        assert_eq!(fb_catalog_total_dim(cat), 4845);
        fb_catalog_free(cat);
        assert_eq!(fb_catalog_len(ptr::null()), 0);
    }
    assert!(fb_last_error().is_null());
}

#[test]
fn catalog_load_reports_bad_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("catalog.json");
    std::fs::write(&path, r#"[{"id": "vd", "modality": "image", "dim": 0}]"#).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut cat = ptr::null_mut();
    let status = unsafe { fb_catalog_load(c.as_ptr(), &mut cat) };
    assert_eq!(status, FbStatus::Validation);
    assert!(cat.is_null());
    assert!(last_error().contains("vd"), "{}", last_error());
}

#[test]
fn shapley_through_handles() {
    let v = [0.5, 0.6, 0.55, 0.7, 0.5, 0.65, 0.6, 0.8];
    let mut game = ptr::null_mut();
    let mut phi = [0.0; 3];
    unsafe {
        assert_eq!(fb_game_new(3, v.as_ptr(), v.len(), &mut game), FbStatus::Ok);
        assert_eq!(fb_shapley_exact(game, phi.as_mut_ptr(), 3), FbStatus::Ok);
        assert_eq!(fb_shapley_exact(game, phi.as_mut_ptr(), 2), FbStatus::InvalidArgument);
        fb_game_free(game);
    }
    for (got, want) in phi.iter().zip([0.15, 0.10, 0.05]) {
        assert!((got - want).abs() < 1e-12);
    }
    let mut g2 = ptr::null_mut();
    let status = unsafe { fb_game_new(21, v.as_ptr(), v.len(), &mut g2) };
    assert_eq!(status, FbStatus::TooManyPlayers);
    let status = unsafe { fb_game_new(2, v.as_ptr(), v.len(), &mut g2) };
    assert_eq!(status, FbStatus::Validation);
}

#[test]
fn auroc_and_null_arguments() {
    let s = [0.1, 0.4, 0.35, 0.8];
    let l = [0u8, 0, 1, 1];
    let mut out = 0.0;
    unsafe {
        assert_eq!(fb_auroc(s.as_ptr(), l.as_ptr(), 4, &mut out), FbStatus::Ok);
        assert_eq!(out, 0.75);
        assert_eq!(fb_auroc(ptr::null(), l.as_ptr(), 4, &mut out), FbStatus::NullArgument);
        let one = [1u8; 4];
        assert_eq!(fb_auroc(s.as_ptr(), one.as_ptr(), 4, &mut out), FbStatus::Domain);
        let bad = [0u8, 2, 1, 1];
        assert_eq!(fb_auroc(s.as_ptr(), bad.as_ptr(), 4, &mut out), FbStatus::InvalidArgument);
    }
}

#[test]
fn signal_stats_hand_example() {
    let t = [0.0, 1.0, 2.0];
    let v = [1.0, 3.0, 2.0];
    let mut out = [0.0; FB_SIGNAL_FEATURES];
    unsafe {
        assert_eq!(fb_signal_stats(t.as_ptr(), v.as_ptr(), 3, out.as_mut_ptr()), FbStatus::Ok);
    }
    let want = [3.0, 3.0, 1.0, 2.0, 2.0, (2.0f64 / 3.0).sqrt(), 2.0 / 3.0, 1.0, 0.5, 0.5, 1.5];
    for (g, w) in out.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{out:?}");
    }
    let unsorted = [1.0, 0.0, 2.0];
    let status = unsafe { fb_signal_stats(unsorted.as_ptr(), v.as_ptr(), 3, out.as_mut_ptr()) };
    assert_eq!(status, FbStatus::Domain);
}

#[test]
fn model_round_trip() {
    use fusebench::learner::{train_gbdt, GbdtHyperparams};
    use fusebench::Matrix;
    let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
    let y = [0u8, 0, 1, 1];
    let model = train_gbdt(&x, &y, &GbdtHyperparams::new(1, 5, 0.3), 0).unwrap();
    let expected = model.predict_scores(&x).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, model.to_json()).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    let mut scores = [0.0; 4];
    unsafe {
        assert_eq!(fb_model_load(c.as_ptr(), &mut handle), FbStatus::Ok);
        assert_eq!(fb_model_n_features(handle), 1);
        let flat = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(fb_model_predict(handle, flat.as_ptr(), 4, 1, scores.as_mut_ptr()), FbStatus::Ok);
        assert_eq!(fb_model_predict(handle, flat.as_ptr(), 2, 2, scores.as_mut_ptr()), FbStatus::Validation);
        fb_model_free(handle);
    }
    assert_eq!(scores.to_vec(), expected);
}

#[test]
fn block_file_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cat_path = dir.path().join("catalog.json");
    std::fs::write(&cat_path, r#"[{"id": "a", "modality": "text", "dim": 2}]"#).unwrap();
    let blocks = dir.path().join("a.jsonl");
    std::fs::write(
        &blocks,
        "{\"sample_id\":\"s1\",\"source_id\":\"a\",\"vector\":[1.0,2.0]}\n{\"sample_id\":\"s2\",\"source_id\":\"a\",\"vector\":[1.0]}\n",
    )
    .unwrap();
    let cp = CString::new(cat_path.to_str().unwrap()).unwrap();
    let bp = CString::new(blocks.to_str().unwrap()).unwrap();
    let mut cat = ptr::null_mut();
    let mut n = 0usize;
    unsafe {
        assert_eq!(fb_catalog_load(cp.as_ptr(), &mut cat), FbStatus::Ok);
        assert_eq!(fb_blocks_validate(cat, bp.as_ptr(), &mut n), FbStatus::Validation);
        assert!(last_error().contains("s2"), "{}", last_error());
        fb_catalog_free(cat);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(fb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("fusebench.h");
    assert!(header.exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"fusebench.h\"\nint main(void) { FbCatalog *c = 0; FbStatus s = fb_catalog_default(&c); \
         double out[FB_SIGNAL_FEATURES]; (void)out; fb_catalog_free(c); return s == FB_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler found; skipping header check");
        return;
    };
    assert!(status.success());
}
