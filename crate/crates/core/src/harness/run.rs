//! Parallel replica execution with deterministic merge and checkpointing.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::Value;

use crate::brownian::gue_lambda_max;
use crate::coupling::{coupled_difference, refine_for_delta};
use crate::error::{LppError, Result};
use crate::harness::analyze::summarize;
use crate::harness::config::{ExperimentConfig, GridPoint, Kind};
use crate::harness::probes::wishart_lambda_max;
use crate::harness::record::{ExperimentRecord, ParsedRecord, Rows};
use crate::lattice::{midpoint_row, passage_time, passage_time_with_path, path_bits_bytes, LatticeInstance};
use crate::stats::ScalingRule;
use crate::weights::StreamKey;

pub const WORKERS_ENV: &str = "LPPLAB_WORKERS";
const CHECKPOINT_TAG: &str = "# lpplab checkpoint";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; falls back to `LPPLAB_WORKERS`, then to the core count.
    pub workers: Option<usize>,
    /// Stop after this many newly computed replicas, leaving the checkpoint
    /// behind as an interrupted run would.
    pub max_new_replicas: Option<usize>,
    /// Text for the `# created:` header line; defaults to Unix seconds.
    pub created: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record_path: PathBuf,
    pub summary_path: PathBuf,
    pub complete: bool,
    pub completed: usize,
    pub total: usize,
    pub resumed: usize,
    pub summary: Value,
}

pub fn checkpoint_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".ckpt");
    PathBuf::from(s)
}

pub fn summary_path(output: &Path) -> PathBuf {
    output.with_extension("summary.json")
}

pub fn resolve_workers(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Resource estimate for a whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub peak_bytes: u64,
    pub work_units: f64,
    pub seconds: f64,
}

/// Heap bytes one replica holds at its peak.
fn replica_bytes(cfg: &ExperimentConfig, gp: &GridPoint) -> u64 {
    let (n, k) = (gp.n, gp.k);
    let width = (n + 1) * 8;
    match cfg.kind {
        Kind::Theorem1 | Kind::ExponentChi | Kind::Universality | Kind::Diagonal | Kind::ShapeFunction => {
            // rolling row plus a block of four weight rows
            5 * width
        }
        Kind::TransverseXi => 5 * width + path_bits_bytes(n as usize, k as usize) + width,
        Kind::Coupling => {
            let refine = cfg.delta.and_then(|d| refine_for_delta(d).ok()).unwrap_or(1) as u64;
            // fine path, mesh DP, weights, lattice row
            (n + 1) * refine * 8 + n * refine * 8 + 2 * width + (2 * refine + 1) * 16
        }
        Kind::GueCheck => k * 16,
        Kind::WishartProbe => k * n * 8 + k * k * 8 + 2 * k * 8,
    }
}

/// Work units (roughly one per lattice cell or random draw) for one replica.
fn replica_work(cfg: &ExperimentConfig, gp: &GridPoint) -> f64 {
    let (n, k) = (gp.n as f64, gp.k as f64);
    match cfg.kind {
        Kind::Coupling => {
            let refine = cfg.delta.and_then(|d| refine_for_delta(d).ok()).unwrap_or(1) as f64;
            2.0 * k * (n + 1.0) * refine
        }
        Kind::GueCheck => k * 60.0,
        Kind::WishartProbe => k * n * (k + 1.0) + 2000.0 * k * k,
        _ => (n + 1.0) * k,
    }
}

/// Single-core throughput assumed by the time estimate.
const SECONDS_PER_UNIT: f64 = 12e-9;

pub fn estimate(cfg: &ExperimentConfig, workers: usize) -> Estimate {
    let grid = cfg.grid();
    let per_replica = grid.iter().map(|gp| replica_bytes(cfg, gp)).max().unwrap_or(0);
    let tasks = grid.len() as u64 * cfg.replicas;
    let cols = 6 + cfg.kind.stat_columns().len() as u64;
    // stored rows, the rendered CSV, and the parsed copy used for the summary
    let per_row = (64 + 8 * cols) + 24 * cols + (48 * cols + 24);
    let fixed = 2 << 20;
    let peak_bytes = workers.min(tasks.max(1) as usize) as u64 * per_replica + tasks * per_row + fixed;
    let work_units: f64 = grid.iter().map(|gp| replica_work(cfg, gp)).sum::<f64>() * cfg.replicas as f64;
    Estimate {
        peak_bytes,
        work_units,
        seconds: work_units * SECONDS_PER_UNIT / workers.max(1) as f64,
    }
}

/// Refuse a run whose estimate exceeds its budget.
pub fn check_budget(cfg: &ExperimentConfig, workers: usize) -> Result<Estimate> {
    let est = estimate(cfg, workers);
    if est.peak_bytes > cfg.budget.max_memory_bytes {
        return Err(LppError::BudgetRefused(format!(
            "estimated peak memory {} bytes exceeds max_memory_bytes = {}",
            est.peak_bytes, cfg.budget.max_memory_bytes
        )));
    }
    if est.seconds > cfg.budget.max_seconds {
        return Err(LppError::BudgetRefused(format!(
            "estimated runtime {:.0} s with {workers} workers exceeds max_seconds = {}",
            est.seconds, cfg.budget.max_seconds
        )));
    }
    Ok(est)
}

/// Statistics of replica `replica` at grid point `gp`.
pub fn replica_stats(cfg: &ExperimentConfig, gp: &GridPoint, replica: u64) -> Result<Vec<f64>> {
    let key = StreamKey::new(gp.seed, replica, 1);
    let spec = cfg.family;
    let (n, k) = (gp.n as usize, gp.k as usize);
    let scaled = |t: f64| -> Result<f64> {
        let rule = ScalingRule::new(gp.n, cfg.a.expect("resolved"), spec.mu(), spec.sigma())?;
        Ok(rule.apply(t))
    };
    Ok(match cfg.kind {
        Kind::Theorem1 | Kind::ExponentChi => {
            let t = passage_time(&LatticeInstance::streamed(n, k, spec, key)?);
            vec![t, scaled(t)?]
        }
        Kind::Universality => {
            // every path collects n + k weights, so this is (T − (n+k)μ)/σ of the raw law
            let std_spec = spec.standardize()?;
            let t = passage_time(&LatticeInstance::streamed(n, k, std_spec, key)?);
            let rule = ScalingRule::new(gp.n, cfg.a.expect("resolved"), 0.0, 1.0)?;
            vec![t, rule.apply(t)]
        }
        Kind::TransverseXi => {
            let res = passage_time_with_path(&LatticeInstance::streamed(n, k, spec, key)?)?;
            let mid = midpoint_row(&res, n)? as f64;
            vec![res.value, scaled(res.value)?, mid]
        }
        Kind::Diagonal => vec![passage_time(&LatticeInstance::streamed(n, k, spec, key)?)],
        Kind::ShapeFunction => {
            let t = passage_time(&LatticeInstance::streamed(n, k, spec, key)?);
            vec![gp.x.unwrap_or(f64::NAN), t, t / n as f64]
        }
        Kind::Coupling => {
            let std_spec = spec.standardize()?;
            let a = cfg.a.expect("resolved");
            let d = coupled_difference(&std_spec, n, a, key, cfg.delta.expect("resolved"))?;
            let scale = (n as f64).powf(0.5 - a / 6.0);
            vec![d.t_value, d.l_value, d.diff, d.diff / scale, d.v_max, d.w_max, d.clamp_count as f64]
        }
        Kind::GueCheck => {
            let lambda = gue_lambda_max(k, key)?;
            let kf = k as f64;
            vec![lambda, kf.powf(1.0 / 6.0) * (lambda - 2.0 * kf.sqrt())]
        }
        Kind::WishartProbe => vec![wishart_lambda_max(&spec, n, k, key)?],
    })
}

fn fingerprint(cfg: &ExperimentConfig) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in cfg.to_toml().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn format_ckpt_line(gi: usize, replica: u64, stats: &[f64]) -> String {
    let mut s = format!("{gi},{replica}");
    for v in stats {
        s.push(',');
        s.push_str(&v.to_string());
    }
    s
}

/// Completed replicas from an existing checkpoint. Lines that do not parse
/// (a write cut off by a kill) are ignored.
fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<Rows> {
    let mut rows = Rows::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(rows),
        Err(e) => return Err(LppError::io(path, e)),
    };
    let want = format!("{CHECKPOINT_TAG} {}", fingerprint(cfg));
    let ncols = cfg.kind.stat_columns().len();
    let grid_len = cfg.grid().len();
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(first)) if first == want => {}
        Some(Ok(_)) => {
            return Err(LppError::InvalidParameter(format!(
                "checkpoint {} belongs to a different configuration; remove it to start over",
                path.display()
            )))
        }
        _ => return Ok(rows),
    }
    for line in lines {
        let line = line.map_err(|e| LppError::io(path, e))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + ncols {
            continue;
        }
        let (Ok(gi), Ok(rep)) = (fields[0].parse::<usize>(), fields[1].parse::<u64>()) else {
            continue;
        };
        let stats: std::result::Result<Vec<f64>, _> = fields[2..].iter().map(|f| f.parse::<f64>()).collect();
        if let (Ok(stats), true) = (stats, gi < grid_len && rep < cfg.replicas) {
            rows.insert((gi, rep), stats);
        }
    }
    Ok(rows)
}

fn unix_seconds() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into())
}

fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, body).map_err(|e| LppError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| LppError::io(path, e))
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_with(cfg, &RunOptions::default())
}

pub fn run_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = cfg.clone().resolve()?;
    let workers = resolve_workers(opts.workers);
    check_budget(&cfg, workers)?;
    let started = Instant::now();
    let grid = cfg.grid();
    let output = cfg.output.clone();
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LppError::io(dir, e))?;
    }
    let ckpt = checkpoint_path(&output);
    let mut rows = load_checkpoint(&ckpt, &cfg)?;
    let resumed = rows.len();

    let mut pending: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|gi| (0..cfg.replicas).map(move |r| (gi, r)))
        .filter(|key| !rows.contains_key(key))
        .collect();
    let interrupted = opts.max_new_replicas.is_some_and(|m| m < pending.len());
    if let Some(m) = opts.max_new_replicas {
        pending.truncate(m);
    }

    let mut ckpt_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&ckpt)
        .map_err(|e| LppError::io(&ckpt, e))?;
    if resumed == 0 {
        ckpt_file.set_len(0).map_err(|e| LppError::io(&ckpt, e))?;
        writeln!(ckpt_file, "{CHECKPOINT_TAG} {}", fingerprint(&cfg)).map_err(|e| LppError::io(&ckpt, e))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LppError::InvalidParameter(format!("worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, u64, Vec<f64>)>();
    let ckpt_for_writer = ckpt.clone();
    let writer = std::thread::spawn(move || -> Result<BTreeMap<(usize, u64), Vec<f64>>> {
        let mut fresh = BTreeMap::new();
        let mut out = std::io::BufWriter::new(ckpt_file);
        for (gi, rep, stats) in rx {
            writeln!(out, "{}", format_ckpt_line(gi, rep, &stats))
                .and_then(|_| out.flush())
                .map_err(|e| LppError::io(&ckpt_for_writer, e))?;
            fresh.insert((gi, rep), stats);
        }
        Ok(fresh)
    });
    let work: Result<()> = pool.install(|| {
        pending.par_iter().try_for_each_with(tx, |tx, &(gi, rep)| {
            let stats = replica_stats(&cfg, &grid[gi], rep)?;
            // the writer only stops early on an io error, reported below
            let _ = tx.send((gi, rep, stats));
            Ok(())
        })
    });
    let fresh = writer.join().expect("writer thread")?;
    rows.extend(fresh);

    let record = ExperimentRecord {
        warnings: cfg.warnings(),
        config: cfg.clone(),
        grid,
        rows,
    };
    let created = opts.created.clone().unwrap_or_else(unix_seconds);
    let csv = record.to_csv(&created);
    write_atomic(&output, &csv)?;
    let parsed = ParsedRecord::parse(&output, &csv)?;
    let mut summary = summarize(&parsed)?;
    summary["runtime_seconds"] = serde_json::json!(started.elapsed().as_secs_f64());
    summary["workers"] = serde_json::json!(workers);
    summary["resumed_replicas"] = serde_json::json!(resumed);
    let spath = summary_path(&output);
    write_atomic(&spath, &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;

    work?;
    let complete = record.is_complete() && !interrupted;
    if complete {
        let _ = std::fs::remove_file(&ckpt);
    }
    Ok(RunOutcome {
        record_path: output,
        summary_path: spath,
        complete,
        completed: record.rows.len(),
        total: record.total(),
        resumed,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, kind: &str, extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
kind = "{kind}"
master_seed = 11
replicas = 6
output = "{}"
{extra}

[family]
family = "exponential"
rate = 1.0
"#,
            dir.join(format!("{kind}.csv")).display()
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    fn opts(workers: usize) -> RunOptions {
        RunOptions {
            workers: Some(workers),
            created: Some("fixed".into()),
            ..RunOptions::default()
        }
    }

    #[test]
    fn every_kind_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("theorem1", "a = 0.3\nn_grid = [100, 1000]"),
            ("universality", "a = 0.3\nn_grid = [100]"),
            ("exponent_chi", "a = 0.5\nn_grid = [100, 200, 400]"),
            ("transverse_xi", "a = 0.5\nn_grid = [100, 200, 400]"),
            ("diagonal", "n_grid = [16, 32, 64]"),
            ("coupling", "a = 0.3\nn_grid = [100]\ndelta = 0.5"),
            ("gue_check", "k_grid = [1, 10]"),
            ("shape_function", "n_grid = [50]\nx_grid = [0.1, 1.0]"),
            ("wishart_probe", "n_grid = [40]\nk = 5"),
        ];
        for (kind, extra) in cases {
            let cfg = config(dir.path(), kind, extra);
            let out = run_with(&cfg, &opts(2)).unwrap();
            assert!(out.complete, "{kind}");
            let text = std::fs::read_to_string(&out.record_path).unwrap();
            let parsed = ParsedRecord::parse(&out.record_path, &text).unwrap();
            assert_eq!(parsed.rows.len(), out.total, "{kind}");
            assert!(!checkpoint_path(&out.record_path).exists());
            assert!(out.summary_path.exists());
        }
    }

    #[test]
    fn universality_is_theorem1_on_the_standardized_law() {
        let dir = tempfile::tempdir().unwrap();
        let t1 = run_with(&config(dir.path(), "theorem1", "a = 0.3\nn_grid = [1000]"), &opts(1)).unwrap();
        let un = run_with(&config(dir.path(), "universality", "a = 0.3\nn_grid = [1000]"), &opts(1)).unwrap();
        let raw = ParsedRecord::read(&t1.record_path).unwrap().column_f64("T").unwrap();
        let std = ParsedRecord::read(&un.record_path).unwrap().column_f64("T").unwrap();
        // exponential(1): mu = sigma = 1, k = 7
        for (r, s) in raw.iter().zip(&std) {
            assert!((r - 1007.0 - s).abs() < 1e-9 * r, "{r} {s}");
        }
    }

    #[test]
    fn merge_order_does_not_change_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "theorem1", "a = 0.3\nn_grid = [200, 2000]");
        let one = run_with(&cfg, &opts(1)).unwrap();
        let a = std::fs::read(&one.record_path).unwrap();
        let four = run_with(&cfg, &opts(4)).unwrap();
        let b = std::fs::read(&four.record_path).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "transverse_xi", "a = 0.5\nn_grid = [100, 400]");
        let full = run_with(&cfg, &opts(2)).unwrap();
        let want = std::fs::read(&full.record_path).unwrap();
        std::fs::remove_file(&full.record_path).unwrap();

        let mut o = opts(2);
        o.max_new_replicas = Some(5);
        let part = run_with(&cfg, &o).unwrap();
        assert!(!part.complete);
        assert_eq!(part.completed, 5);
        let partial = std::fs::read_to_string(&part.record_path).unwrap();
        assert!(partial.contains("# status: incomplete 5/12"));
        assert!(checkpoint_path(&part.record_path).exists());

        // a torn final line is ignored
        let mut f = OpenOptions::new().append(true).open(checkpoint_path(&part.record_path)).unwrap();
        write!(f, "1,3,12.5").unwrap();

        let done = run_with(&cfg, &opts(3)).unwrap();
        assert!(done.complete);
        assert_eq!(done.resumed, 5);
        assert_eq!(std::fs::read(&done.record_path).unwrap(), want);
    }

    #[test]
    fn checkpoint_from_other_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "theorem1", "a = 0.3\nn_grid = [100]");
        let mut o = opts(1);
        o.max_new_replicas = Some(2);
        run_with(&cfg, &o).unwrap();
        let mut other = cfg.clone();
        other.master_seed = 12;
        assert!(matches!(run_with(&other, &opts(1)), Err(LppError::InvalidParameter(_))));
    }

    #[test]
    fn budget_refusal_carries_the_estimate() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), "transverse_xi", "a = 0.5\nn_grid = [1000000]");
        cfg.budget.max_memory_bytes = 1 << 20;
        match run_with(&cfg, &opts(1)) {
            Err(LppError::BudgetRefused(msg)) => assert!(msg.contains("estimated peak memory")),
            other => panic!("expected refusal, got {other:?}"),
        }
        cfg.budget.max_memory_bytes = 1 << 40;
        cfg.budget.max_seconds = 1.0;
        assert!(matches!(run_with(&cfg, &opts(1)), Err(LppError::BudgetRefused(_))));
    }
}
