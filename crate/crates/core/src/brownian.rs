//! Brownian directed percolation `L(t, k)`: the supremum over ordered
//! breakpoints `0 = u_0 ≤ u_1 ≤ … ≤ u_k = t` of `Σ_r B^{(r)}_{u_r} − B^{(r)}_{u_{r−1}}`
//! for independent standard Brownian motions `B^{(1)}, …, B^{(k)}`.
//!
//! Two estimators: the GUE largest eigenvalue scaled by `√t`, and a
//! breakpoint DP over Brownian paths sampled on a uniform mesh.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{LppError, Result};
use crate::stats::{ks_two_sample, SampleSet};
use crate::weights::{derive_seed, StreamKey};

pub const EIGEN_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;
/// Mesh cells allowed per sample (`columns · k`).
pub const DEFAULT_MESH_BUDGET: u64 = 1 << 31;
pub const CROSS_CHECK_DELTA: f64 = 1e-4;
pub const CROSS_CHECK_SEED: u64 = 0x6c70_706c_6162;

/// Symmetric tridiagonal matrix given by its diagonal and squared off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off_sq: Vec<f64>,
}

impl Tridiagonal {
    /// β = 2 tridiagonal model: `d_i ~ N(0, 1)`, `e_i² ~ Gamma(k − i, 1)`.
    /// Its spectrum has the law of the `k × k` GUE with density ∝ `exp(−tr H²/2)`.
    pub fn sample_gue<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        assert!(k >= 1, "matrix order must be at least 1");
        let diag: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let off_sq = (1..k)
            .map(|i| {
                let shape = (k - i) as f64;
                Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
            })
            .collect();
        Tridiagonal { diag, off_sq }
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    /// Interval containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let k = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..k {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off_sq[i - 1].sqrt();
            }
            if i + 1 < k {
                radius += self.off_sq[i].sqrt();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence of LDLᵀ pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.diag.len() {
            if i > 0 {
                q = self.diag[i] - x - self.off_sq[i - 1] / q;
            }
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Largest eigenvalue by bisection on the Sturm count.
    pub fn largest_eigenvalue(&self) -> Result<f64> {
        let k = self.diag.len();
        let (lo0, hi0) = self.gershgorin();
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..BISECTION_MAX_ITER {
            if hi - lo <= EIGEN_TOL {
                return Ok(0.5 * (lo + hi));
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) == k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(LppError::NoConvergence {
            method: "Sturm bisection",
            iterations: BISECTION_MAX_ITER,
        })
    }
}

/// One GUE largest-eigenvalue draw, normalized so that `L(1, k)` has its law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GueSample {
    pub k: usize,
    pub lambda_max: f64,
}

pub fn gue_lambda_max(k: usize, key: StreamKey) -> Result<f64> {
    if k == 0 {
        return Err(LppError::InvalidParameter("k must be at least 1".into()));
    }
    let m = Tridiagonal::sample_gue(k, &mut key.rng());
    if k == 1 {
        return Ok(m.diag[0]);
    }
    m.largest_eigenvalue()
}

pub fn gue_sample(k: usize, key: StreamKey) -> Result<GueSample> {
    Ok(GueSample {
        k,
        lambda_max: gue_lambda_max(k, key)?,
    })
}

/// `√t · λ_max(GUE_k)`.
pub fn sample_l_gue(t: f64, k: usize, key: StreamKey) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(LppError::InvalidParameter(format!("t = {t} must be positive")));
    }
    Ok(t.sqrt() * gue_lambda_max(k, key)?)
}

/// Uniform mesh on `[0, t]` with `columns = ⌈t/δ⌉` cells of width `t/columns ≤ δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianMesh {
    pub t: f64,
    pub k: usize,
    pub delta: f64,
    pub columns: usize,
}

impl BrownianMesh {
    pub fn new(t: f64, k: usize, delta: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(LppError::InvalidParameter(format!("t = {t} must be positive")));
        }
        if !(delta > 0.0 && delta <= t) {
            return Err(LppError::InvalidParameter(format!(
                "mesh step {delta} must lie in (0, t]"
            )));
        }
        if k == 0 {
            return Err(LppError::InvalidParameter("k must be at least 1".into()));
        }
        let ratio = t / delta;
        let nearest = ratio.round();
        // 1/1e-4 is 10000.000000000002 in binary
        let columns = if (ratio - nearest).abs() <= 1e-9 * nearest {
            nearest
        } else {
            ratio.ceil()
        } as usize;
        Ok(BrownianMesh {
            t,
            k,
            delta,
            columns,
        })
    }

    /// Width of one mesh cell.
    pub fn step(&self) -> f64 {
        self.t / self.columns as f64
    }

    pub fn cells(&self) -> u64 {
        self.columns as u64 * self.k as u64
    }
}

/// Breakpoint DP for the mesh-restricted supremum, fed one path at a time.
///
/// After row `r`, `best[j]` is the maximum over breakpoints `u_1 ≤ … ≤ u_r = j`
/// of the summed increments; `best[j]` for the next row is
/// `B_j + max_{j' ≤ j} (best_prev[j'] − B_{j'})`.
#[derive(Debug, Clone)]
pub struct MeshPassage {
    best: Vec<f64>,
    rows_done: usize,
}

impl MeshPassage {
    /// `points` is the number of mesh points including 0.
    pub fn new(points: usize) -> Self {
        MeshPassage {
            best: vec![0.0; points],
            rows_done: 0,
        }
    }

    /// `walk[j]` is the path value at mesh point `j`, with `walk[0] = 0`.
    pub fn push_walk(&mut self, walk: &[f64]) {
        debug_assert_eq!(walk.len(), self.best.len());
        if self.rows_done == 0 {
            self.best.copy_from_slice(walk);
        } else {
            let mut run = f64::NEG_INFINITY;
            for (b, &w) in self.best.iter_mut().zip(walk) {
                let cand = *b - w;
                if cand > run {
                    run = cand;
                }
                *b = w + run;
            }
        }
        self.rows_done += 1;
    }

    pub fn rows_done(&self) -> usize {
        self.rows_done
    }

    pub fn value(&self) -> f64 {
        *self.best.last().expect("mesh has at least one point")
    }
}

/// Mesh supremum from explicit paths sampled at common mesh points.
pub fn mesh_value_from_walks(walks: &[Vec<f64>]) -> Result<f64> {
    let points = walks.first().map_or(0, Vec::len);
    if points == 0 || walks.iter().any(|w| w.len() != points) {
        return Err(LppError::InvalidParameter(
            "walks must be nonempty and of equal length".into(),
        ));
    }
    let mut dp = MeshPassage::new(points);
    for w in walks {
        dp.push_walk(w);
    }
    Ok(dp.value())
}

/// Fill `walk` with a Brownian path on a mesh of step `h`, starting at 0.
pub fn fill_brownian_walk<R: Rng + ?Sized>(rng: &mut R, h: f64, walk: &mut [f64]) {
    let sd = h.sqrt();
    let mut b = 0.0;
    walk[0] = 0.0;
    for w in walk.iter_mut().skip(1) {
        let z: f64 = StandardNormal.sample(rng);
        b += sd * z;
        *w = b;
    }
}

pub fn sample_l_mesh(mesh: &BrownianMesh, key: StreamKey) -> Result<f64> {
    sample_l_mesh_budget(mesh, key, DEFAULT_MESH_BUDGET)
}

/// Row `r` of the mesh draws its path from `key.with_row(r)`.
pub fn sample_l_mesh_budget(mesh: &BrownianMesh, key: StreamKey, max_cells: u64) -> Result<f64> {
    if mesh.cells() > max_cells {
        return Err(LppError::MemoryBudget {
            what: format!("mesh of {} columns × {} rows", mesh.columns, mesh.k),
            required: mesh.cells(),
            budget: max_cells,
        });
    }
    let points = mesh.columns + 1;
    let h = mesh.step();
    let mut walk = vec![0.0; points];
    let mut dp = MeshPassage::new(points);
    for r in 1..=mesh.k {
        fill_brownian_walk(&mut key.with_row(r as u64).rng(), h, &mut walk);
        dp.push_walk(&walk);
    }
    Ok(dp.value())
}

/// Two-sample KS distance between `N` GUE draws and `N` mesh draws of `L(1, k)`.
pub fn cross_check(k: usize, samples: usize) -> Result<f64> {
    cross_check_seeded(k, samples, CROSS_CHECK_SEED)
}

pub fn cross_check_seeded(k: usize, samples: usize, master_seed: u64) -> Result<f64> {
    if !(1..=8).contains(&k) {
        return Err(LppError::InvalidParameter(format!("cross check needs 1 <= k <= 8, got {k}")));
    }
    if samples < 1000 {
        return Err(LppError::InvalidParameter(format!(
            "cross check needs at least 1000 samples, got {samples}"
        )));
    }
    let gue_seed = derive_seed(master_seed, 1);
    let mesh_seed = derive_seed(master_seed, 2);
    let mesh = BrownianMesh::new(1.0, k, CROSS_CHECK_DELTA)?;
    let mut gue = Vec::with_capacity(samples);
    let mut grid = Vec::with_capacity(samples);
    for rep in 0..samples as u64 {
        gue.push(sample_l_gue(1.0, k, StreamKey::new(gue_seed, rep, 1))?);
        grid.push(sample_l_mesh(&mesh, StreamKey::new(mesh_seed, rep, 1))?);
    }
    ks_two_sample(&SampleSet::new(gue)?, &SampleSet::new(grid)?)
}
