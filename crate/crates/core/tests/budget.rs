//! The run estimator may overstate memory but must not understate the
//! measured heap peak by more than 20%.

mod common;

use lpplab::harness::run::estimate;
use lpplab::harness::{run_with, ExperimentConfig, RunOptions};

#[global_allocator]
static ALLOC: common::CountingAlloc = common::CountingAlloc;

fn config(dir: &std::path::Path, body: &str) -> ExperimentConfig {
    let fam = "[family]\nfamily = \"gaussian\"\nmean = 0.0\nstd = 1.0\n";
    ExperimentConfig::from_toml(&format!(
        "master_seed = 2\noutput = \"{}\"\n{body}\n{fam}",
        dir.join("b.csv").display()
    ))
    .unwrap()
}

// One test so that no other test allocates during a measurement window.
#[test]
fn estimate_covers_measured_peak() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "kind = \"theorem1\"\nreplicas = 300\na = 0.3\nn_grid = [1000, 10000, 100000]",
        "kind = \"transverse_xi\"\nreplicas = 20\na = 0.5\nn_grid = [1000, 10000, 100000]",
        "kind = \"diagonal\"\nreplicas = 200\nn_grid = [64, 256, 1024]",
        "kind = \"coupling\"\nreplicas = 10\na = 0.3\nn_grid = [1000, 10000]",
        "kind = \"shape_function\"\nreplicas = 10\nn_grid = [2000]\nx_grid = [0.5, 1.0]",
        "kind = \"gue_check\"\nreplicas = 500\nk_grid = [50, 500]",
        "kind = \"wishart_probe\"\nreplicas = 20\nn_grid = [500]\nk = 50",
    ];
    // warm the Tracy-Widom table outside the windows
    lpplab::tracy_widom::reference();
    for workers in [1, 3] {
        for body in cases {
            let cfg = config(dir.path(), body);
            let est = estimate(&cfg, workers);
            let opts = RunOptions {
                workers: Some(workers),
                ..RunOptions::default()
            };
            let base = common::reset_peak();
            run_with(&cfg, &opts).unwrap();
            let peak = common::peak_since(base);
            assert!(
                est.peak_bytes as f64 >= 0.8 * peak as f64,
                "{} with {workers} workers: estimate {} < 0.8 x peak {peak}",
                cfg.kind,
                est.peak_bytes
            );
        }
    }
}
