//! The shipped experiment configs parse, resolve and fit their budgets.

use std::path::PathBuf;

use lpplab::harness::run::check_budget;
use lpplab::harness::{ExperimentConfig, Kind};

fn configs() -> Vec<(PathBuf, ExperimentConfig)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| {
            let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p, cfg)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn every_config_loads_and_fits_its_budget_on_one_worker() {
    let all = configs();
    assert!(all.len() >= 10);
    for (path, cfg) in &all {
        let est = check_budget(cfg, 1).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(est.peak_bytes < 1 << 30, "{}: {est:?}", path.display());
        assert!(!cfg.grid().is_empty());
    }
}

#[test]
fn only_the_pareto_probe_warns() {
    for (path, cfg) in configs() {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        assert_eq!(!cfg.warnings().is_empty(), name.contains("pareto"), "{name}");
    }
}

#[test]
fn grids_follow_the_configured_exponent() {
    for (path, cfg) in configs() {
        if cfg.kind == Kind::TransverseXi {
            let ks: Vec<u64> = cfg.grid().iter().map(|g| g.k).collect();
            assert_eq!(ks, vec![31, 56, 100, 177, 316], "{}", path.display());
        }
        if cfg.kind == Kind::Theorem1 {
            let ks: Vec<u64> = cfg.grid().iter().map(|g| g.k).collect();
            assert_eq!(ks, vec![7, 15, 31], "{}", path.display());
        }
    }
}
