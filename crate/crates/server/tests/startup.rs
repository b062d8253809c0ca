mod support;

use std::path::Path;
use tkg_core::layout::io::{load_lay1, save_lay1};
use tkg_server::{pipeline, prepare, Catalog, StartupError, MAX_LISTED_OFFENDERS};

fn fresh_artifacts(root: &Path) -> std::path::PathBuf {
    support::small_pipeline(root).pipeline.data_dir
}

fn err(data: &Path) -> StartupError {
    Catalog::load(data).expect_err("startup should fail")
}

#[test]
fn startup_failures_name_the_offending_artifact() {
    let root = tempfile::tempdir().unwrap();
    let data = fresh_artifacts(root.path());
    assert!(Catalog::load(&data).is_ok());

    // Missing directory.
    let e = err(&root.path().join("nope"));
    assert!(e.to_string().contains("nope"), "{e}");

    // Each artifact in turn: missing, then corrupt.
    for file in [pipeline::SNAPSHOT_FILE, pipeline::LAYOUT_FILE, pipeline::RECOMMENDATIONS_FILE] {
        let path = data.join(file);
        let original = std::fs::read(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        match err(&data) {
            StartupError::Artifact { path: p, .. } => assert_eq!(p, path),
            other => panic!("{file}: {other}"),
        }
        let mut broken = original.clone();
        broken.truncate(original.len() / 2);
        if file == pipeline::RECOMMENDATIONS_FILE {
            broken.extend_from_slice(b"\n{\"kind\":");
        }
        std::fs::write(&path, &broken).unwrap();
        let e = err(&data);
        assert!(e.to_string().contains(file), "{file}: {e}");
        std::fs::write(&path, &original).unwrap();
    }
    assert!(Catalog::load(&data).is_ok());
}

#[test]
fn inconsistent_layout_lists_bounded_offenders() {
    let root = tempfile::tempdir().unwrap();
    let data = fresh_artifacts(root.path());
    let path = data.join(pipeline::LAYOUT_FILE);
    let mut records = load_lay1(&path).unwrap();
    for (i, r) in records.iter_mut().take(35).enumerate() {
        r.id = format!("ghost{i:03}");
    }
    save_lay1(&path, &records).unwrap();
    match err(&data) {
        StartupError::Inconsistent { total, shown } => {
            // Ghost nodes plus any recommendations that point at them.
            assert!(total >= 35, "{total}");
            assert_eq!(shown.len(), MAX_LISTED_OFFENDERS);
            assert!(shown[0].contains("ghost000"), "{shown:?}");
        }
        other => panic!("{other}"),
    }
}

#[test]
fn kind_mismatch_is_reported() {
    let root = tempfile::tempdir().unwrap();
    let data = fresh_artifacts(root.path());
    let path = data.join(pipeline::LAYOUT_FILE);
    let mut records = load_lay1(&path).unwrap();
    let d = records.iter_mut().find(|r| r.kind == tkg_core::NodeKind::Dataset).unwrap();
    d.kind = tkg_core::NodeKind::Talent;
    let id = d.id.clone();
    save_lay1(&path, &records).unwrap();
    let e = err(&data);
    assert!(matches!(e, StartupError::Inconsistent { .. }));
    assert!(e.to_string().contains(&id), "{e}");
}

#[test]
fn prepare_surfaces_startup_errors() {
    let root = tempfile::tempdir().unwrap();
    let mut config = tkg_server::AppConfig::default();
    config.provider.mock = true;
    config.pipeline.data_dir = root.path().join("missing");
    let Err(e) = prepare(&config) else {
        panic!("no artifacts");
    };
    assert!(format!("{e:#}").contains("missing"), "{e:#}");
}

#[test]
fn example_config_spells_out_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config.example.toml");
    let config = tkg_server::AppConfig::load(Some(&path)).unwrap();
    assert_eq!(config, tkg_server::AppConfig::default());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("app.toml");
    std::fs::write(&path, "[server]\nprot = 9000\n").unwrap();
    assert!(tkg_server::AppConfig::load(Some(&path)).is_err());
}
