//! Quantile coupling of lattice weights to Brownian driving noise.
//!
//! Each row is driven by one Brownian path sampled on a grid of `refine`
//! sub-steps per unit time. The unit increment `ΔB_i = B_{i+1} − B_i` is
//! standard normal, and the weight is `ω_i = Q(Φ(ΔB_i))`, so the field has
//! the right i.i.d. marginals while the walk `S_m = Σ_{i<m} ω_i` tracks `B_m`.

use std::collections::VecDeque;

use rand_distr::{Distribution, StandardNormal};

use crate::brownian::MeshPassage;
use crate::error::{LppError, Result};
use crate::lattice::{floor_pow, RollingPassage};
use crate::weights::{StreamKey, WeightSpec};

pub const MIN_REFINE: usize = 4;
pub const DEFAULT_REFINE: usize = 16;
/// Cap on `⌊n^a⌋ · n · refine` for [`coupled_difference`].
pub const DEFAULT_COUPLING_BUDGET: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRow {
    /// `S_m` for `m = 1..=n+1`.
    pub walk: Vec<f64>,
    /// `B_m` for `m = 1..=n+1`.
    pub bridge_values: Vec<f64>,
    /// `max_m |B_m − S_m|`.
    pub v_stat: f64,
    /// Largest `|B_s − B_t|` over refined grid points with `|s − t| ≤ 2`.
    pub w_stat: f64,
    /// Transforms whose `Φ` value had to be clamped into `[1e-16, 1 − 1e-16]`.
    pub clamp_count: u64,
    pub refine: usize,
}

impl CoupledRow {
    /// `ω_0, …, ω_n` recovered from the walk.
    pub fn weights(&self) -> Vec<f64> {
        let mut prev = 0.0f64;
        self.walk
            .iter()
            .map(|&s| {
                let w = s - prev;
                prev = s;
                w
            })
            .collect()
    }
}

/// Scratch for one driven row over `units` unit intervals.
struct DrivenRow {
    /// `B` at every refined grid point, `fine[0] = 0`.
    fine: Vec<f64>,
    /// `ω_i` for each unit interval.
    omega: Vec<f64>,
    v_stat: f64,
    clamp_count: u64,
}

impl DrivenRow {
    fn new(units: usize, refine: usize) -> Self {
        DrivenRow {
            fine: vec![0.0; units * refine + 1],
            omega: vec![0.0; units],
            v_stat: 0.0,
            clamp_count: 0,
        }
    }

    /// Integer-time values are accumulated from whole unit increments, so a
    /// Gaussian identity transform reproduces them bit for bit in the walk.
    fn drive(&mut self, spec: &WeightSpec, key: StreamKey, refine: usize) {
        let mut rng = key.rng();
        let sd = (1.0 / refine as f64).sqrt();
        let units = self.omega.len();
        let (mut b, mut s) = (0.0f64, 0.0f64);
        self.v_stat = 0.0;
        self.clamp_count = 0;
        self.fine[0] = 0.0;
        for i in 0..units {
            let base = i * refine;
            let mut part = 0.0;
            for j in 1..refine {
                let z: f64 = StandardNormal.sample(&mut rng);
                part += sd * z;
                self.fine[base + j] = b + part;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            let unit = part + sd * z;
            b += unit;
            self.fine[base + refine] = b;
            let (w, clamped) = spec.quantile_of_normal(unit);
            self.clamp_count += clamped as u64;
            self.omega[i] = w;
            s += w;
            self.v_stat = self.v_stat.max((b - s).abs());
        }
    }
}

/// Largest `max − min` over all windows of `window + 1` consecutive points.
fn sliding_range(values: &[f64], window: usize) -> f64 {
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best: f64 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        while maxq.back().is_some_and(|&j| values[j] <= v) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&j| values[j] >= v) {
            minq.pop_back();
        }
        minq.push_back(i);
        while maxq.front().is_some_and(|&j| j + window < i) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j + window < i) {
            minq.pop_front();
        }
        best = best.max(values[maxq[0]] - values[minq[0]]);
    }
    best
}

fn check_standardized(spec: &WeightSpec) -> Result<()> {
    if !spec.is_standardized() {
        return Err(LppError::InvalidParameter(format!(
            "coupling needs a standardized spec (mu = 0, sigma2 = 1), got mu = {}, sigma2 = {}",
            spec.mu(),
            spec.sigma2()
        )));
    }
    Ok(())
}

/// Couple one row of `n + 1` weights to a Brownian path on `[0, n + 1]`.
pub fn quantile_couple_row(
    spec: &WeightSpec,
    key: StreamKey,
    n: usize,
    refine: usize,
) -> Result<CoupledRow> {
    check_standardized(spec)?;
    if refine < MIN_REFINE {
        return Err(LppError::InvalidParameter(format!(
            "refine = {refine} must be at least {MIN_REFINE}"
        )));
    }
    let units = n + 1;
    let mut row = DrivenRow::new(units, refine);
    row.drive(spec, key, refine);
    let mut s = 0.0;
    let walk: Vec<f64> = row
        .omega
        .iter()
        .map(|w| {
            s += w;
            s
        })
        .collect();
    let bridge_values = (1..=units).map(|m| row.fine[m * refine]).collect();
    Ok(CoupledRow {
        walk,
        bridge_values,
        v_stat: row.v_stat,
        w_stat: sliding_range(&row.fine, 2 * refine),
        clamp_count: row.clamp_count,
        refine,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledDifference {
    pub rows: usize,
    /// `T(n, ⌊n^a⌋)` from the coupled weights.
    pub t_value: f64,
    /// Mesh estimate of `L(n, ⌊n^a⌋)` from the driving paths.
    pub l_value: f64,
    pub diff: f64,
    /// Largest per-row `V` and `W` statistics.
    pub v_max: f64,
    pub w_max: f64,
    pub clamp_count: u64,
}

/// Sub-steps per unit for a mesh step `delta`; `1/delta` must be an integer.
pub fn refine_for_delta(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(LppError::InvalidParameter(format!("delta = {delta} must lie in (0, 1]")));
    }
    let r = (1.0 / delta).round();
    if ((1.0 / delta) - r).abs() > 1e-9 * r {
        return Err(LppError::InvalidParameter(format!(
            "1/delta must be an integer, got delta = {delta}"
        )));
    }
    Ok(r as usize)
}

pub fn coupled_difference(
    spec: &WeightSpec,
    n: usize,
    a: f64,
    key: StreamKey,
    delta: f64,
) -> Result<CoupledDifference> {
    coupled_difference_budget(spec, n, a, key, delta, DEFAULT_COUPLING_BUDGET)
}

/// Build `⌊n^a⌋` coupled rows; `T` comes from the weights and `L` from the
/// breakpoint DP over the same paths on `[0, n]` at mesh step `delta`.
pub fn coupled_difference_budget(
    spec: &WeightSpec,
    n: usize,
    a: f64,
    key: StreamKey,
    delta: f64,
    max_cells: u64,
) -> Result<CoupledDifference> {
    check_standardized(spec)?;
    if !(a > 0.0 && a < 1.0) {
        return Err(LppError::OutOfDomain {
            name: "a",
            value: a,
            domain: "(0, 1)",
        });
    }
    if n == 0 {
        return Err(LppError::InvalidParameter("n must be positive".into()));
    }
    let refine = refine_for_delta(delta)?;
    let k = floor_pow(n as u64, a).max(1) as usize;
    let cells = (k as u64) * (n as u64) * refine as u64;
    if cells > max_cells {
        return Err(LppError::MemoryBudget {
            what: format!("coupled rows for n={n}, k={k}, refine={refine}"),
            required: cells,
            budget: max_cells,
        });
    }
    let units = n + 1;
    let mut row = DrivenRow::new(units, refine);
    let mut lattice = RollingPassage::new(n);
    let mut mesh = MeshPassage::new(n * refine + 1);
    let (mut v_max, mut w_max, mut clamps) = (0.0f64, 0.0f64, 0u64);
    for r in 1..=k {
        row.drive(spec, key.with_row(r as u64), refine);
        lattice.push_row(&row.omega);
        mesh.push_walk(&row.fine[..=n * refine]);
        v_max = v_max.max(row.v_stat);
        w_max = w_max.max(sliding_range(&row.fine, 2 * refine));
        clamps += row.clamp_count;
    }
    let (t_value, l_value) = (lattice.value(), mesh.value());
    Ok(CoupledDifference {
        rows: k,
        t_value,
        l_value,
        diff: (t_value - l_value).abs(),
        v_max,
        w_max,
        clamp_count: clamps,
    })
}
