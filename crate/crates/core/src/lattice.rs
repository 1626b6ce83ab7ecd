//! Lattice last-passage times `T(n, k)` over directed up/right paths from
//! `(0, 1)` to `(n, k)`.
//!
//! Columns are indexed `i = 0..=n` and rows `r = 1..=k`. The value-only DP
//! keeps a single rolling row; the path variant additionally stores one
//! backpointer bit per lattice point.

use std::fmt::Write as _;

use crate::error::{LppError, Result};
use crate::weights::{StreamKey, WeightSpec};

/// Default cap on backpointer storage.
pub const DEFAULT_PATH_BUDGET_BYTES: u64 = 1 << 30;

/// Paths enumerated by [`brute_force_passage_time`] are capped at this count.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone)]
pub enum LatticeWeights {
    /// Row-major, `k` rows of `n + 1` values, row 1 first.
    Grid(Vec<f64>),
    /// Row `r` is drawn on demand from `key.with_row(r)`.
    Stream { spec: WeightSpec, key: StreamKey },
}

#[derive(Debug, Clone)]
pub struct LatticeInstance {
    n: usize,
    k: usize,
    weights: LatticeWeights,
}

impl LatticeInstance {
    pub fn from_grid(n: usize, k: usize, weights: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(LppError::InvalidParameter("k must be at least 1".into()));
        }
        if weights.len() != (n + 1) * k {
            return Err(LppError::InvalidParameter(format!(
                "grid for n={n}, k={k} needs {} weights, got {}",
                (n + 1) * k,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(LppError::InvalidParameter("weights must be finite".into()));
        }
        Ok(LatticeInstance {
            n,
            k,
            weights: LatticeWeights::Grid(weights),
        })
    }

    /// Build from rows given bottom-up (`rows[0]` is row 1).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(LppError::InvalidParameter(
                "rows must be nonempty and of equal length".into(),
            ));
        }
        Self::from_grid(width - 1, k, rows.concat())
    }

    pub fn streamed(n: usize, k: usize, spec: WeightSpec, key: StreamKey) -> Result<Self> {
        if k == 0 {
            return Err(LppError::InvalidParameter("k must be at least 1".into()));
        }
        Ok(LatticeInstance {
            n,
            k,
            weights: LatticeWeights::Stream { spec, key },
        })
    }

    /// Materialize a streamed instance (or clone a grid one).
    pub fn materialize(&self) -> Self {
        let mut grid = vec![0.0; (self.n + 1) * self.k];
        for (r, row) in grid.chunks_exact_mut(self.n + 1).enumerate() {
            self.fill_row(r + 1, row);
        }
        LatticeInstance {
            n: self.n,
            k: self.k,
            weights: LatticeWeights::Grid(grid),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn weights(&self) -> &LatticeWeights {
        &self.weights
    }

    /// `ω_i^{(r)}`. Streamed instances regenerate the whole row.
    pub fn weight(&self, i: usize, r: usize) -> f64 {
        assert!(i <= self.n && (1..=self.k).contains(&r), "({i},{r}) off lattice");
        match &self.weights {
            LatticeWeights::Grid(g) => g[(r - 1) * (self.n + 1) + i],
            LatticeWeights::Stream { .. } => {
                let mut row = vec![0.0; self.n + 1];
                self.fill_row(r, &mut row);
                row[i]
            }
        }
    }

    /// Write row `r` (1-based) into `out`, which must hold `n + 1` values.
    pub fn fill_row(&self, r: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n + 1);
        match &self.weights {
            LatticeWeights::Grid(g) => {
                let w = self.n + 1;
                out.copy_from_slice(&g[(r - 1) * w..r * w]);
            }
            LatticeWeights::Stream { spec, key } => {
                spec.fill(&mut key.with_row(r as u64).rng(), out);
            }
        }
    }

    /// Plain-text grid: one line per row, bottom row first, whitespace separated.
    pub fn to_grid_text(&self) -> String {
        let mut row = vec![0.0; self.n + 1];
        let mut out = String::new();
        for r in 1..=self.k {
            self.fill_row(r, &mut row);
            let line: Vec<String> = row.iter().map(|w| format!("{w}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_grid_text(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| LppError::Parse(format!("bad weight `{t}`")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows)
    }

    /// Sub-lattice of columns `i0..=i1` and rows `r0..=r1`, re-indexed from `(0, 1)`.
    pub fn sub_instance(&self, i0: usize, i1: usize, r0: usize, r1: usize) -> Result<Self> {
        if i0 > i1 || i1 > self.n || r0 == 0 || r0 > r1 || r1 > self.k {
            return Err(LppError::InvalidParameter(format!(
                "sub-lattice [{i0},{i1}]x[{r0},{r1}] outside {}x{}",
                self.n, self.k
            )));
        }
        let mut row = vec![0.0; self.n + 1];
        let mut grid = Vec::with_capacity((i1 - i0 + 1) * (r1 - r0 + 1));
        for r in r0..=r1 {
            self.fill_row(r, &mut row);
            grid.extend_from_slice(&row[i0..=i1]);
        }
        Self::from_grid(i1 - i0, r1 - r0 + 1, grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassageResult {
    pub value: f64,
    /// `v_i` for `i = 0..=n`: the smallest row the selected path visits in column `i`.
    pub row_profile: Option<Vec<usize>>,
}

#[inline(always)]
fn fmax(a: f64, b: f64) -> f64 {
    if a >= b {
        a
    } else {
        b
    }
}

/// Rows swept together. Each row's left-to-right recurrence is a serial
/// dependency chain; interleaving a few rows lets them overlap in the pipeline.
/// The arithmetic per cell is unchanged, so results are bit-identical.
const BLOCK: usize = 4;

fn sweep_block<const B: usize>(row: &mut [f64], w: [&[f64]; B]) {
    let width = row.len();
    for wr in &w {
        assert_eq!(wr.len(), width, "weight row length");
    }
    let mut left = [f64::NEG_INFINITY; B];
    for i in 0..width {
        let mut below = row[i];
        for j in 0..B {
            let c = w[j][i] + fmax(left[j], below);
            left[j] = c;
            below = c;
        }
        row[i] = below;
    }
}

/// As [`sweep_block`], also writing backpointer words; `bits` holds `B`
/// rows of `stride` words each. A set bit means "from below" (ties included).
fn sweep_block_bits<const B: usize>(
    row: &mut [f64],
    w: [&[f64]; B],
    bits: &mut [u64],
    stride: usize,
) {
    let width = row.len();
    for wr in &w {
        assert_eq!(wr.len(), width, "weight row length");
    }
    assert!(bits.len() >= B * stride && stride * 64 >= width);
    let mut left = [f64::NEG_INFINITY; B];
    let mut acc = [0u64; B];
    for i in 0..width {
        let mut below = row[i];
        for j in 0..B {
            let up = below >= left[j];
            acc[j] |= (up as u64) << (i & 63);
            let c = w[j][i] + if up { below } else { left[j] };
            left[j] = c;
            below = c;
        }
        row[i] = below;
        if i & 63 == 63 || i + 1 == width {
            for j in 0..B {
                bits[j * stride + (i >> 6)] = acc[j];
                acc[j] = 0;
            }
        }
    }
}

/// Rolling-row DP state shared by every value-only caller.
///
/// Before row 1 the row holds a virtual predecessor `0` under `(0, 1)` and
/// `−∞` elsewhere, which makes the generic update produce `T(0,1) = ω_0^{(1)}`.
#[derive(Debug, Clone)]
pub struct RollingPassage {
    row: Vec<f64>,
    rows_done: usize,
}

impl RollingPassage {
    pub fn new(n: usize) -> Self {
        let mut row = vec![f64::NEG_INFINITY; n + 1];
        row[0] = 0.0;
        RollingPassage { row, rows_done: 0 }
    }

    /// `T(i, r) = ω_i^{(r)} + max(T(i−1, r), T(i, r−1))` across one row.
    pub fn push_row(&mut self, weights: &[f64]) {
        sweep_block(&mut self.row, [weights]);
        self.rows_done += 1;
    }

    /// Several consecutive rows, bottom first.
    pub fn push_rows(&mut self, rows: &[&[f64]]) {
        let mut chunks = rows.chunks_exact(BLOCK);
        for c in &mut chunks {
            sweep_block(&mut self.row, [c[0], c[1], c[2], c[3]]);
        }
        for r in chunks.remainder() {
            sweep_block(&mut self.row, [*r]);
        }
        self.rows_done += rows.len();
    }

    pub fn rows_done(&self) -> usize {
        self.rows_done
    }

    /// `T(n, r)` for the last completed row `r`.
    pub fn value(&self) -> f64 {
        *self.row.last().expect("row has n+1 >= 1 entries")
    }

    /// `T(i, r)` for every column of the last completed row.
    pub fn current_row(&self) -> &[f64] {
        &self.row
    }

    pub fn heap_bytes(&self) -> u64 {
        (self.row.capacity() * std::mem::size_of::<f64>()) as u64
    }
}

/// Row buffers for block-wise streaming.
struct RowBlock {
    bufs: Vec<Vec<f64>>,
}

impl RowBlock {
    fn new(width: usize) -> Self {
        RowBlock {
            bufs: vec![vec![0.0; width]; BLOCK],
        }
    }

    /// Fill rows `r0..r0+count` and return them as slices.
    fn fill(&mut self, inst: &LatticeInstance, r0: usize, count: usize) -> Vec<&[f64]> {
        for (j, b) in self.bufs.iter_mut().take(count).enumerate() {
            inst.fill_row(r0 + j, b);
        }
        self.bufs.iter().take(count).map(Vec::as_slice).collect()
    }
}

pub fn passage_time(inst: &LatticeInstance) -> f64 {
    let mut dp = RollingPassage::new(inst.n);
    let mut block = RowBlock::new(inst.n + 1);
    let mut r = 1;
    while r <= inst.k {
        let count = BLOCK.min(inst.k + 1 - r);
        let rows = block.fill(inst, r, count);
        dp.push_rows(&rows);
        r += count;
    }
    dp.value()
}

fn bit_stride(n: usize) -> usize {
    (n + 1).div_ceil(64)
}

/// Bytes of backpointer storage for an `(n+1) × k` lattice (rows padded to 64 bits).
pub fn path_bits_bytes(n: usize, k: usize) -> u64 {
    bit_stride(n) as u64 * k as u64 * 8
}

pub fn passage_time_with_path(inst: &LatticeInstance) -> Result<PassageResult> {
    passage_time_with_path_budget(inst, DEFAULT_PATH_BUDGET_BYTES)
}

/// Value plus row profile of the lowest maximizing path.
///
/// A set bit at `(i, r)` means the predecessor is `(i, r−1)`. Exact ties go
/// to the lower predecessor, so backtracking from `(n, k)` yields the
/// pointwise-lowest optimal path.
pub fn passage_time_with_path_budget(
    inst: &LatticeInstance,
    budget_bytes: u64,
) -> Result<PassageResult> {
    let (n, k) = (inst.n, inst.k);
    let need = path_bits_bytes(n, k);
    if need > budget_bytes {
        return Err(LppError::MemoryBudget {
            what: format!("backpointers for n={n}, k={k}"),
            required: need,
            budget: budget_bytes,
        });
    }
    let width = n + 1;
    let stride = bit_stride(n);
    let mut bits = vec![0u64; stride * k];
    let mut row = vec![f64::NEG_INFINITY; width];
    row[0] = 0.0;
    let mut block = RowBlock::new(width);
    let mut r = 1;
    while r <= k {
        let count = BLOCK.min(k + 1 - r);
        let rows = block.fill(inst, r, count);
        let out = &mut bits[(r - 1) * stride..];
        if count == BLOCK {
            sweep_block_bits(&mut row, [rows[0], rows[1], rows[2], rows[3]], out, stride);
        } else {
            for (j, w) in rows.iter().enumerate() {
                sweep_block_bits(&mut row, [*w], &mut out[j * stride..], stride);
            }
        }
        r += count;
    }
    let value = row[n];

    let mut profile = vec![0usize; width];
    let (mut i, mut r) = (n, k);
    loop {
        profile[i] = r;
        if i == 0 && r == 1 {
            break;
        }
        let from_below = bits[(r - 1) * stride + (i >> 6)] >> (i & 63) & 1 == 1;
        if from_below && r > 1 {
            r -= 1;
        } else {
            i -= 1;
        }
    }
    Ok(PassageResult {
        value,
        row_profile: Some(profile),
    })
}

/// Number of paths in `Π(n, k)`: `C(n + k − 1, n)`, saturating.
pub fn path_count(n: usize, k: usize) -> u128 {
    let (a, b) = (n as u128, (k - 1) as u128);
    let small = a.min(b);
    let mut c: u128 = 1;
    for j in 1..=small {
        c = match c.checked_mul(a + b - small + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    c
}

/// Maximum over an explicit enumeration of `Π(n, k)`.
pub fn brute_force_passage_time(inst: &LatticeInstance) -> Result<f64> {
    let paths = path_count(inst.n, inst.k);
    if paths > ENUMERATION_LIMIT {
        return Err(LppError::EnumerationGuard {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }
    let grid = inst.materialize();
    let mut best = f64::NEG_INFINITY;
    enumerate_paths(inst.n, inst.k, &mut |path| {
        let s: f64 = path.iter().map(|&(i, r)| grid.weight(i, r)).sum();
        if s > best {
            best = s;
        }
    });
    Ok(best)
}

/// Calls `visit` with the point sequence of every directed path in `Π(n, k)`.
pub fn enumerate_paths(n: usize, k: usize, visit: &mut dyn FnMut(&[(usize, usize)])) {
    fn rec(
        i: usize,
        r: usize,
        n: usize,
        k: usize,
        path: &mut Vec<(usize, usize)>,
        visit: &mut dyn FnMut(&[(usize, usize)]),
    ) {
        path.push((i, r));
        if i == n && r == k {
            visit(path);
        } else {
            if i < n {
                rec(i + 1, r, n, k, path, visit);
            }
            if r < k {
                rec(i, r + 1, n, k, path, visit);
            }
        }
        path.pop();
    }
    let mut path = Vec::with_capacity(n + k);
    rec(0, 1, n, k, &mut path, visit);
}

/// `v_{⌊n/2⌋}` of the selected path.
pub fn midpoint_row(result: &PassageResult, n: usize) -> Result<usize> {
    let profile = result.row_profile.as_ref().ok_or(LppError::MissingProfile)?;
    profile
        .get(n / 2)
        .copied()
        .ok_or_else(|| LppError::InvalidParameter(format!("profile shorter than n/2 = {}", n / 2)))
}

/// Weight sum along the path encoded by a row profile.
pub fn path_weight(inst: &LatticeInstance, profile: &[usize]) -> f64 {
    let grid = inst.materialize();
    let mut total = 0.0;
    for i in 0..=inst.n {
        let top = if i < inst.n { profile[i + 1] } else { inst.k };
        for r in profile[i]..=top {
            total += grid.weight(i, r);
        }
    }
    total
}

/// Walk-form passage time: the supremum over integer breakpoints
/// `0 = u_0 ≤ u_1 ≤ … ≤ u_k = n` of `Σ_r S^{(r)}_{u_r+1} − S^{(r)}_{u_{r−1}}`,
/// where `walks[r-1][m] = S^{(r)}_m` for `m = 0..=n+1`.
///
/// Independent of [`RollingPassage`]: it works on partial sums, not point
/// weights.
pub fn passage_time_walk_form(walks: &[Vec<f64>]) -> Result<f64> {
    let k = walks.len();
    let len = walks.first().map_or(0, Vec::len);
    if k == 0 || len < 2 || walks.iter().any(|w| w.len() != len) {
        return Err(LppError::InvalidParameter(
            "walk-form needs k >= 1 walks of equal length n + 2".into(),
        ));
    }
    let n = len - 2;
    // best[j]: optimum over rows 1..=r with u_r = j
    let s1 = &walks[0];
    let mut best: Vec<f64> = (0..=n).map(|j| s1[j + 1] - s1[0]).collect();
    for s in &walks[1..] {
        let mut running = f64::NEG_INFINITY;
        for j in 0..=n {
            running = fmax(running, best[j] - s[j]);
            best[j] = running + s[j + 1];
        }
    }
    Ok(best[n])
}

/// `⌊n^a⌋`, with values within a few ulps of an integer snapped to it so
/// that e.g. `(10^4)^{0.5}` is 100 regardless of rounding in `powf`.
pub fn floor_pow(n: u64, a: f64) -> u64 {
    let y = (n as f64).powf(a);
    let nearest = y.round();
    if (y - nearest).abs() <= 64.0 * f64::EPSILON * nearest.max(1.0) {
        nearest as u64
    } else {
        y.floor() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> LatticeInstance {
        LatticeInstance::from_rows(&[vec![1.0, 3.0, 2.0], vec![4.0, 0.0, 5.0]]).unwrap()
    }

    #[test]
    fn constant_weights_count_points() {
        for (n, k) in [(0, 1), (3, 1), (2, 2), (5, 4), (7, 3)] {
            let inst = LatticeInstance::from_grid(n, k, vec![1.0; (n + 1) * k]).unwrap();
            assert_eq!(passage_time(&inst), (n + k) as f64);
        }
    }

    #[test]
    fn single_row_is_the_sum() {
        let row = vec![0.5, -2.0, 3.25, 1.0];
        let inst = LatticeInstance::from_rows(&[row.clone()]).unwrap();
        assert_eq!(passage_time(&inst), row.iter().sum::<f64>());
        let res = passage_time_with_path(&inst).unwrap();
        assert_eq!(res.row_profile.unwrap(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn worked_example() {
        // paths: RRU = 1+3+2+5 = 11, RUR = 1+3+0+5 = 9, URR = 1+4+0+5 = 10
        let inst = example();
        assert_eq!(passage_time(&inst), 11.0);
        assert_eq!(brute_force_passage_time(&inst).unwrap(), 11.0);
        let res = passage_time_with_path(&inst).unwrap();
        assert_eq!(res.value, 11.0);
        assert_eq!(res.row_profile.as_deref(), Some(&[1, 1, 1][..]));
    }

    #[test]
    fn constant_field_tie_break_is_lowest_path() {
        let inst = LatticeInstance::from_grid(2, 2, vec![1.0; 6]).unwrap();
        let res = passage_time_with_path(&inst).unwrap();
        assert_eq!(res.value, 4.0);
        assert_eq!(res.row_profile.as_deref(), Some(&[1, 1, 1][..]));
        assert_eq!(midpoint_row(&res, 2).unwrap(), 1);
    }

    #[test]
    fn one_point_lattice() {
        let inst = LatticeInstance::from_grid(0, 1, vec![-0.75]).unwrap();
        assert_eq!(brute_force_passage_time(&inst).unwrap(), -0.75);
        assert_eq!(passage_time(&inst), -0.75);
    }

    #[test]
    fn midpoint_requires_profile() {
        let res = PassageResult {
            value: 1.0,
            row_profile: None,
        };
        assert!(matches!(midpoint_row(&res, 4), Err(LppError::MissingProfile)));
        let k1 = LatticeInstance::from_rows(&[vec![1.0; 9]]).unwrap();
        let res = passage_time_with_path(&k1).unwrap();
        assert_eq!(midpoint_row(&res, 8).unwrap(), 1);
    }

    #[test]
    fn enumeration_guard() {
        let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
        let inst = LatticeInstance::streamed(20, 12, spec, StreamKey::new(1, 0, 1)).unwrap();
        assert!(matches!(
            brute_force_passage_time(&inst),
            Err(LppError::EnumerationGuard { .. })
        ));
        assert_eq!(path_count(2, 2), 3);
        assert_eq!(path_count(5, 4), 56);
        assert_eq!(path_count(0, 7), 1);
    }

    #[test]
    fn path_memory_budget_error_names_bytes() {
        let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
        let inst = LatticeInstance::streamed(999, 64, spec, StreamKey::new(1, 0, 1)).unwrap();
        match passage_time_with_path_budget(&inst, 1000) {
            // 1000 columns pad to 1024 bits per row
            Err(LppError::MemoryBudget { required, .. }) => assert_eq!(required, 64 * 1024 / 8),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn streamed_matches_materialized() {
        let spec = WeightSpec::exponential(1.0).unwrap();
        let inst = LatticeInstance::streamed(50, 7, spec, StreamKey::new(3, 1, 1)).unwrap();
        let grid = inst.materialize();
        assert_eq!(passage_time(&inst), passage_time(&grid));
        assert_eq!(
            passage_time_with_path(&inst).unwrap(),
            passage_time_with_path(&grid).unwrap()
        );
    }

    #[test]
    fn grid_text_round_trip() {
        let inst = example();
        let text = inst.to_grid_text();
        assert_eq!(text, "1 3 2\n4 0 5\n");
        let back = LatticeInstance::from_grid_text(&text).unwrap();
        assert_eq!(passage_time(&back), 11.0);
        assert!(LatticeInstance::from_grid_text("1 2\n3\n").is_err());
        assert!(LatticeInstance::from_grid_text("1 x\n").is_err());
    }

    #[test]
    fn floor_pow_boundaries() {
        assert_eq!(floor_pow(10_000, 0.5), 100);
        assert_eq!(floor_pow(1000, 0.3), 7);
        assert_eq!(floor_pow(100_000, 0.3), 31);
        assert_eq!(floor_pow(100_000, 0.5), 316);
        assert_eq!(floor_pow(10_000_000_000, 0.3), 1000);
        assert_eq!(floor_pow(1, 0.7), 1);
        assert_eq!(floor_pow(8, 1.0 / 3.0), 2);
    }

    /// Every maximizing path by enumeration; returns the pointwise minimum
    /// of their row profiles.
    fn lowest_optimal_profile(inst: &LatticeInstance) -> (f64, Vec<usize>) {
        let best = brute_force_passage_time(inst).unwrap();
        let mut low = vec![usize::MAX; inst.n() + 1];
        enumerate_paths(inst.n(), inst.k(), &mut |path| {
            let s: f64 = path.iter().map(|&(i, r)| inst.weight(i, r)).sum();
            if s == best {
                let mut prof = vec![usize::MAX; inst.n() + 1];
                for &(i, r) in path {
                    prof[i] = prof[i].min(r);
                }
                for (l, p) in low.iter_mut().zip(prof) {
                    *l = (*l).min(p);
                }
            }
        });
        (best, low)
    }

    fn small_grid() -> impl Strategy<Value = LatticeInstance> {
        (0usize..6, 1usize..6).prop_flat_map(|(n, k)| {
            proptest::collection::vec(-5i32..6, (n + 1) * k).prop_map(move |w| {
                LatticeInstance::from_grid(n, k, w.into_iter().map(f64::from).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn dp_equals_enumeration_with_ties(inst in small_grid()) {
            // integer weights make ties common; sums are exact in f64
            let (best, low) = lowest_optimal_profile(&inst);
            prop_assert_eq!(passage_time(&inst), best);
            let res = passage_time_with_path(&inst).unwrap();
            prop_assert_eq!(res.value, best);
            prop_assert_eq!(res.row_profile.unwrap(), low);
        }

        #[test]
        fn profile_shape_and_reconstruction(seed in 0u64..10_000, n in 0usize..40, k in 1usize..12) {
            let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
            let inst = LatticeInstance::streamed(n, k, spec, StreamKey::new(seed, 0, 1)).unwrap();
            let res = passage_time_with_path(&inst).unwrap();
            let prof = res.row_profile.clone().unwrap();
            prop_assert_eq!(prof.len(), n + 1);
            prop_assert_eq!(prof[0], 1);
            prop_assert!(prof.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(prof.iter().all(|&v| (1..=k).contains(&v)));
            let mid = midpoint_row(&res, n).unwrap();
            prop_assert!((1..=k).contains(&mid));
            let recon = path_weight(&inst, &prof);
            prop_assert!((recon - res.value).abs() <= 1e-9 * res.value.abs().max(1.0));
        }

        #[test]
        fn raising_one_weight(inst in small_grid(), pick in 0usize..1000, delta in 0.01f64..5.0) {
            let LatticeWeights::Grid(mut g) = inst.weights().clone() else { unreachable!() };
            let idx = pick % g.len();
            g[idx] += delta;
            let bumped = LatticeInstance::from_grid(inst.n(), inst.k(), g).unwrap();
            let (before, after) = (passage_time(&inst), passage_time(&bumped));
            prop_assert!(after >= before);
            prop_assert!(after - before <= delta + 1e-12);
        }

        #[test]
        fn superadditive_over_column_split(inst in small_grid(), m_pick in 0usize..100, j_pick in 0usize..100) {
            let (n, k) = (inst.n(), inst.k());
            prop_assume!(n >= 1);
            let m = m_pick % n;          // left block columns 0..=m
            let j = 1 + j_pick % k;      // left block rows 1..=j, right block rows j..=k
            let left = inst.sub_instance(0, m, 1, j).unwrap();
            let right = inst.sub_instance(m + 1, n, j, k).unwrap();
            let whole = brute_force_passage_time(&inst).unwrap();
            let parts = brute_force_passage_time(&left).unwrap() + brute_force_passage_time(&right).unwrap();
            prop_assert!(whole >= parts);
        }

        #[test]
        fn walk_form_matches_lattice(seed in 0u64..10_000, n in 0usize..30, k in 1usize..8) {
            let spec = WeightSpec::exponential(1.0).unwrap();
            let inst = LatticeInstance::streamed(n, k, spec, StreamKey::new(seed, 2, 1)).unwrap();
            let mut walks = Vec::new();
            let mut row = vec![0.0; n + 1];
            for r in 1..=k {
                inst.fill_row(r, &mut row);
                let mut s = vec![0.0];
                for w in &row { s.push(s.last().unwrap() + w); }
                walks.push(s);
            }
            let t = passage_time(&inst);
            let w = passage_time_walk_form(&walks).unwrap();
            prop_assert!((t - w).abs() <= 1e-9 * t.abs().max(1.0), "{} vs {}", t, w);
        }
    }

    #[test]
    fn walk_form_against_breakpoint_enumeration() {
        // direct enumeration of integer breakpoints for k = 3
        let inst = LatticeInstance::from_rows(&[
            vec![0.3, -1.2, 2.0, 0.7],
            vec![1.1, 0.4, -0.6, 0.9],
            vec![-0.2, 1.5, 0.8, -1.0],
        ])
        .unwrap();
        let n = inst.n();
        let walks: Vec<Vec<f64>> = (1..=3)
            .map(|r| {
                let mut s = vec![0.0];
                for i in 0..=n {
                    s.push(s[i] + inst.weight(i, r));
                }
                s
            })
            .collect();
        let mut best = f64::NEG_INFINITY;
        for u1 in 0..=n {
            for u2 in u1..=n {
                let u = [0, u1, u2, n];
                let v: f64 = (0..3).map(|r| walks[r][u[r + 1] + 1] - walks[r][u[r]]).sum();
                best = best.max(v);
            }
        }
        let w = passage_time_walk_form(&walks).unwrap();
        assert!((w - best).abs() < 1e-12);
        assert!((passage_time(&inst) - best).abs() < 1e-12);
    }
}
