//! Summaries of single records and comparisons across records.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{LppError, Result};
use crate::harness::config::Kind;
use crate::harness::record::{Group, ParsedRecord};
use crate::stats::{fit_exponent, ks_one_sample, ks_two_sample, moments, ExponentFit, SampleSet};
use crate::tracy_widom::reference;

/// Statistic whose spread is tracked across the grid.
fn primary_column(kind: Option<Kind>, rec: &ParsedRecord) -> &'static str {
    match kind {
        Some(Kind::GueCheck) | Some(Kind::WishartProbe) => "lambda_max",
        Some(Kind::Coupling) => "diff",
        Some(Kind::ShapeFunction) => "T_over_n",
        _ if rec.has_column("T") => "T",
        _ if rec.has_column("lambda_max") => "lambda_max",
        _ => "T",
    }
}

/// Exponent expected for the spread of the primary statistic, if any.
fn expected_chi(kind: Option<Kind>, a: Option<f64>) -> Option<f64> {
    match kind {
        Some(Kind::Diagonal) => Some(1.0 / 3.0),
        Some(Kind::Theorem1 | Kind::ExponentChi | Kind::TransverseXi | Kind::Universality) => a.map(|a| 0.5 - a / 6.0),
        _ => None,
    }
}

/// `(x − mean)/sd` of a sample.
fn standardized(values: &[f64]) -> Result<SampleSet> {
    let m = moments(values)?;
    let sd = m.variance.sqrt();
    if sd <= 0.0 {
        return Err(LppError::Degenerate("sample has zero spread".into()));
    }
    SampleSet::new(values.iter().map(|v| (v - m.mean) / sd).collect())
}

/// `F_TW` of the standardized variable.
fn tw_standardized_cdf() -> impl Fn(f64) -> f64 {
    let (mean, var) = reference().mean_variance();
    let sd = var.sqrt();
    move |z: f64| reference().cdf(mean + sd * z)
}

fn fit_json(fit: &ExponentFit, expected: Option<f64>) -> Value {
    let mut m = Map::new();
    m.insert("slope".into(), json!(fit.slope));
    m.insert("intercept".into(), json!(fit.intercept));
    m.insert("stderr".into(), json!(fit.stderr));
    if let Some(e) = expected {
        m.insert("expected".into(), json!(e));
        m.insert("deviation".into(), json!(fit.slope - e));
    }
    Value::Object(m)
}

fn distinct_n(points: &[(f64, f64)]) -> bool {
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    ns.len() == points.len() && ns.len() >= 3
}

/// Per-grid-point statistics and fitted exponents of one record.
pub fn summarize(rec: &ParsedRecord) -> Result<Value> {
    let kind = rec.kind();
    let cfg = rec.config.as_ref();
    let a = cfg.and_then(|c| c.a);
    let family = cfg.map(|c| c.family);
    let primary = primary_column(kind, rec);
    let values = rec.column_f64(primary)?;
    let scaled = if rec.has_column("scaled") {
        Some(rec.column_f64("scaled")?)
    } else {
        None
    };
    let groups = rec.groups()?;
    let mut points = Vec::new();
    let mut spread = Vec::new();
    let mut xi_points = Vec::new();
    let mut ks_trend = Vec::new();
    let mut diff_trend = Vec::new();
    for g in &groups {
        let mut p = Map::new();
        p.insert("n".into(), json!(g.n));
        p.insert("k".into(), json!(g.k));
        if let Some(x) = g.x {
            p.insert("x".into(), json!(x));
        }
        p.insert("count".into(), json!(g.rows.len()));
        let v = g.pick(&values);
        let set = SampleSet::new(v.clone())?;
        p.insert("statistic".into(), json!(primary));
        p.insert("median".into(), json!(set.median()));
        p.insert("iqr".into(), json!(set.iqr()));
        if v.len() >= 3 {
            let m = moments(&v)?;
            p.insert("mean".into(), json!(m.mean));
            p.insert("variance".into(), json!(m.variance));
            p.insert("std".into(), json!(m.variance.sqrt()));
            p.insert("skewness".into(), json!(m.skewness));
            if m.variance > 0.0 {
                spread.push((g.n, m.variance.sqrt()));
            }
            if matches!(kind, Some(Kind::Diagonal | Kind::WishartProbe)) && m.variance > 0.0 {
                let d = ks_one_sample(&standardized(&v)?, &tw_standardized_cdf())?;
                p.insert("ks_tw_standardized".into(), json!(d));
            }
        }
        if let (Some(sc), true) = (&scaled, g.rows.len() >= 2) {
            let s = g.pick(sc);
            let set = SampleSet::new(s.clone())?;
            let d = ks_one_sample(&set, reference())?;
            p.insert("ks_tw".into(), json!(d));
            ks_trend.push(d);
            if s.len() >= 3 {
                let m = moments(&s)?;
                p.insert("scaled_mean".into(), json!(m.mean));
                p.insert("scaled_variance".into(), json!(m.variance));
            }
        }
        if rec.has_column("v_mid") {
            let mid = g.pick(&rec.column_f64("v_mid")?);
            let half = g.n.powf(a.unwrap_or(0.0)) / 2.0;
            let msd = mid.iter().map(|v| (v - half).powi(2)).sum::<f64>() / mid.len() as f64;
            p.insert("v_mid_msd".into(), json!(msd));
            if msd > 0.0 {
                xi_points.push((g.n, msd));
            }
        }
        if kind == Some(Kind::Coupling) {
            let sd = SampleSet::new(g.pick(&rec.column_f64("scaled_diff")?))?;
            p.insert("median_scaled_diff".into(), json!(sd.median()));
            diff_trend.push(sd.median());
            let vmax = g.pick(&rec.column_f64("v_max")?);
            let p_index = family.map_or(f64::INFINITY, |f| f.p_index());
            let cnt = |x: f64| vmax.iter().filter(|&&v| v > x).count() as f64 / vmax.len() as f64;
            p.insert("v_tail_at_n_pow_inv_p".into(), json!(cnt(g.n.powf(1.0 / p_index))));
            p.insert("v_tail_at_sqrt_n".into(), json!(cnt(g.n.sqrt())));
            let wmax = SampleSet::new(g.pick(&rec.column_f64("w_max")?))?;
            p.insert("median_w_max".into(), json!(wmax.median()));
            let clamps: f64 = g.pick(&rec.column_f64("clamps")?).iter().sum();
            p.insert("clamps".into(), json!(clamps));
        }
        if kind == Some(Kind::ShapeFunction) && v.len() >= 2 {
            let m = moments(&v).ok();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            p.insert("gamma_hat".into(), json!(mean));
            if let Some(m) = m {
                p.insert("stderr".into(), json!((m.variance / v.len() as f64).sqrt()));
            }
            if let (Some(f), Some(x)) = (family, g.x) {
                p.insert("ratio".into(), json!((mean - f.mu()) / (2.0 * f.sigma() * x.sqrt())));
            }
        }
        points.push(Value::Object(p));
    }

    let mut fits = Map::new();
    if distinct_n(&spread) {
        let fit = fit_exponent(&spread)?;
        fits.insert("chi".into(), fit_json(&fit, expected_chi(kind, a)));
    }
    if distinct_n(&xi_points) {
        let fit = fit_exponent(&xi_points)?;
        let half = ExponentFit {
            slope: fit.slope / 2.0,
            intercept: fit.intercept / 2.0,
            stderr: fit.stderr / 2.0,
        };
        fits.insert("xi".into(), fit_json(&half, a.map(|a| 2.0 * a / 3.0)));
    }
    let mut trends = Map::new();
    if ks_trend.len() >= 2 {
        trends.insert("ks_tw".into(), json!(ks_trend));
        trends.insert("ks_tw_decreasing".into(), json!(ks_trend.windows(2).all(|w| w[1] < w[0])));
    }
    if diff_trend.len() >= 2 {
        trends.insert("median_scaled_diff".into(), json!(diff_trend));
        trends.insert(
            "median_scaled_diff_decreasing".into(),
            json!(diff_trend.windows(2).all(|w| w[1] < w[0])),
        );
    }

    Ok(json!({
        "file": rec.path.display().to_string(),
        "label": rec.label(),
        "kind": kind.map(|k| k.name()),
        "family": family.map(|f| f.to_string()),
        "a": a,
        "complete": rec.complete,
        "warnings": rec.warnings,
        "points": points,
        "fits": fits,
        "trends": trends,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniversalityRow {
    pub n: f64,
    pub k: f64,
    pub first: String,
    pub second: String,
    pub column: String,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentRow {
    pub record: String,
    pub exponent: String,
    pub slope: f64,
    pub stderr: f64,
    pub expected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub record: String,
    pub n: f64,
    pub k: f64,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub records: Vec<Value>,
    pub universality: Vec<UniversalityRow>,
    pub exponents: Vec<ExponentRow>,
    pub trend: Vec<TrendRow>,
    pub plot: Vec<PlotPoint>,
}

/// Statistic used to compare two records at a grid point.
fn comparison_sample(rec: &ParsedRecord, g: &Group) -> Result<(String, SampleSet)> {
    if rec.has_column("scaled") {
        return Ok(("scaled".into(), SampleSet::new(g.pick(&rec.column_f64("scaled")?))?));
    }
    let primary = primary_column(rec.kind(), rec);
    let v = g.pick(&rec.column_f64(primary)?);
    Ok((format!("{primary} (standardized)"), standardized(&v)?))
}

pub fn analyze(paths: &[PathBuf]) -> Result<Report> {
    if paths.is_empty() {
        return Err(LppError::InvalidParameter("analyze needs at least one record".into()));
    }
    let recs: Vec<ParsedRecord> = paths.iter().map(|p| ParsedRecord::read(p)).collect::<Result<_>>()?;
    analyze_parsed(&recs)
}

pub fn analyze_parsed(recs: &[ParsedRecord]) -> Result<Report> {
    let mut records = Vec::new();
    let mut exponents = Vec::new();
    let mut trend = Vec::new();
    let mut plot = Vec::new();
    for rec in recs {
        let s = summarize(rec)?;
        let label = rec.label();
        if let Some(fits) = s["fits"].as_object() {
            for (name, f) in fits {
                exponents.push(ExponentRow {
                    record: label.clone(),
                    exponent: name.clone(),
                    slope: f["slope"].as_f64().unwrap_or(f64::NAN),
                    stderr: f["stderr"].as_f64().unwrap_or(f64::NAN),
                    expected: f["expected"].as_f64(),
                });
            }
        }
        for p in s["points"].as_array().into_iter().flatten() {
            let (n, k) = (p["n"].as_f64().unwrap_or(0.0), p["k"].as_f64().unwrap_or(0.0));
            for stat in ["ks_tw", "ks_tw_standardized", "std", "mean", "v_mid_msd", "median_scaled_diff", "gamma_hat"] {
                if let Some(v) = p[stat].as_f64() {
                    trend.push(TrendRow {
                        record: label.clone(),
                        n,
                        k,
                        statistic: stat.into(),
                        value: v,
                    });
                    if stat != "mean" {
                        plot.push(PlotPoint {
                            x: p.get("x").and_then(Value::as_f64).unwrap_or(n),
                            y: v,
                            series: format!("{label}:{stat}"),
                        });
                    }
                }
            }
        }
        // Q-Q against F_TW at the largest grid point
        if rec.has_column("scaled") {
            let groups = rec.groups()?;
            if let Some(g) = groups.iter().max_by(|a, b| a.n.total_cmp(&b.n).then(a.k.total_cmp(&b.k))) {
                let set = SampleSet::new(g.pick(&rec.column_f64("scaled")?))?;
                for i in 1..100 {
                    let u = i as f64 / 100.0;
                    plot.push(PlotPoint {
                        x: reference().quantile(u)?,
                        y: set.quantile(u),
                        series: format!("{label}:qq_n{}", g.n),
                    });
                }
            }
        }
        records.push(s);
    }

    let mut universality = Vec::new();
    for i in 0..recs.len() {
        for j in i + 1..recs.len() {
            let (gi, gj) = (recs[i].groups()?, recs[j].groups()?);
            for a in &gi {
                if let Some(b) = gj.iter().find(|b| b.n == a.n && b.k == a.k && b.x == a.x) {
                    if a.rows.len() < 3 || b.rows.len() < 3 {
                        continue;
                    }
                    let (col, sa) = comparison_sample(&recs[i], a)?;
                    let (_, sb) = comparison_sample(&recs[j], b)?;
                    universality.push(UniversalityRow {
                        n: a.n,
                        k: a.k,
                        first: recs[i].label(),
                        second: recs[j].label(),
                        column: col,
                        ks: ks_two_sample(&sa, &sb)?,
                    });
                }
            }
        }
    }
    Ok(Report {
        records,
        universality,
        exponents,
        trend,
        plot,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn universality_csv(&self) -> String {
        let mut out = String::from("n,k,first,second,column,ks\n");
        for r in &self.universality {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                r.k,
                csv_field(&r.first),
                csv_field(&r.second),
                csv_field(&r.column),
                r.ks
            );
        }
        out
    }

    pub fn exponents_csv(&self) -> String {
        let mut out = String::from("record,exponent,slope,stderr,expected\n");
        for r in &self.exponents {
            let e = r.expected.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{e}", csv_field(&r.record), r.exponent, r.slope, r.stderr);
        }
        out
    }

    pub fn trend_csv(&self) -> String {
        let mut out = String::from("record,n,k,statistic,value\n");
        for r in &self.trend {
            let _ = writeln!(out, "{},{},{},{},{}", csv_field(&r.record), r.n, r.k, r.statistic, r.value);
        }
        out
    }

    pub fn plot_csv(&self) -> String {
        let mut out = String::from("x,y,series\n");
        for p in &self.plot {
            let _ = writeln!(out, "{},{},{}", p.x, p.y, csv_field(&p.series));
        }
        out
    }

    /// Write `report.json`, the three tables and `plot_data.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| LppError::io(dir, e))?;
        let files = [
            ("report.json", self.to_json()),
            ("universality.csv", self.universality_csv()),
            ("exponents.csv", self.exponents_csv()),
            ("trend.csv", self.trend_csv()),
            ("plot_data.csv", self.plot_csv()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| LppError::io(&p, e))?;
            written.push(p);
        }
        Ok(written)
    }
}
