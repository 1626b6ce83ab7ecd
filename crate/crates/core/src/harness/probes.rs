//! Probe experiments outside the main near-axis runs: the shape function
//! near the axis and the largest eigenvalue of `A Aᵀ` for general entries.

use crate::error::{LppError, Result};
use crate::lattice::{passage_time, LatticeInstance};
use crate::stats::SampleSet;
use crate::weights::{derive_seed, StreamKey, WeightSpec};

/// Largest lattice (`(n+1)·k` cells) a single shape estimate may use.
pub const SHAPE_MAX_CELLS: u64 = 1 << 34;
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapePoint {
    pub x: f64,
    pub k: u64,
    /// Monte Carlo mean of `T(n, ⌊xn⌋)/n`.
    pub mean: f64,
    pub stderr: f64,
}

/// `(x, mean T(n, ⌊xn⌋)/n)` with standard errors over `replicas` draws.
pub fn shape_function_estimate(
    family: &WeightSpec,
    x_grid: &[f64],
    n: u64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<ShapePoint>> {
    if replicas < 2 {
        return Err(LppError::InvalidParameter("shape estimate needs at least 2 replicas".into()));
    }
    let mut out = Vec::with_capacity(x_grid.len());
    for (xi, &x) in x_grid.iter().enumerate() {
        if !(x > 0.0 && x <= 1.0) {
            return Err(LppError::OutOfDomain {
                name: "x",
                value: x,
                domain: "(0, 1]",
            });
        }
        let k = ((x * n as f64 + 1e-9).floor() as u64).max(1);
        let cells = (n + 1) * k;
        if cells > SHAPE_MAX_CELLS {
            return Err(LppError::MemoryBudget {
                what: format!("shape lattice n={n}, k={k}"),
                required: cells,
                budget: SHAPE_MAX_CELLS,
            });
        }
        let s = derive_seed(seed, xi as u64 + 1);
        let vals: Vec<f64> = (0..replicas)
            .map(|r| {
                let inst = LatticeInstance::streamed(n as usize, k as usize, *family, StreamKey::new(s, r, 1))?;
                Ok(passage_time(&inst) / n as f64)
            })
            .collect::<Result<_>>()?;
        let m = crate::stats::moments(&vals)?;
        out.push(ShapePoint {
            x,
            k,
            mean: m.mean,
            stderr: (m.variance / replicas as f64).sqrt(),
        });
    }
    Ok(out)
}

/// Largest eigenvalue of `Y = A Aᵀ` for a `k × n` matrix with i.i.d.
/// entries, by power iteration stopped on the relative residual.
pub fn wishart_lambda_max(spec: &WeightSpec, n: usize, k: usize, key: StreamKey) -> Result<f64> {
    if k == 0 || n == 0 || k > 200 || n > 2000 {
        return Err(LppError::InvalidParameter(format!(
            "wishart probe needs 1 <= k <= 200 and 1 <= n <= 2000, got k={k}, n={n}"
        )));
    }
    let mut a = vec![0.0; k * n];
    for (r, row) in a.chunks_exact_mut(n).enumerate() {
        spec.fill(&mut key.with_row(r as u64 + 1).rng(), row);
    }
    let mut y = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let dot: f64 = a[i * n..(i + 1) * n]
                .iter()
                .zip(&a[j * n..(j + 1) * n])
                .map(|(p, q)| p * q)
                .sum();
            y[i * k + j] = dot;
            y[j * k + i] = dot;
        }
    }
    power_iteration(&y, k)
}

/// Dominant eigenvalue of a symmetric positive semidefinite matrix.
///
/// Stops when the eigen-residual is below `POWER_TOL` relative, or when the
/// remaining rise of the Rayleigh quotient is. The quotient increases
/// geometrically (ratio `(λ₂/λ₁)²`), so with `ρ` estimated from successive
/// increments the remaining rise is about `Δ·ρ/(1 − ρ)`. The second test
/// converges twice as fast as the first, which matters near the spectral edge
/// of `A Aᵀ` where the top two eigenvalues are close.
pub fn power_iteration(y: &[f64], k: usize) -> Result<f64> {
    if k == 1 {
        return Ok(y[0]);
    }
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut w = vec![0.0; k];
    let (mut prev, mut prev_delta) = (f64::NAN, f64::NAN);
    for it in 0..POWER_MAX_ITER {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = y[i * k..(i + 1) * k].iter().zip(&v).map(|(p, q)| p * q).sum();
        }
        let lambda: f64 = w.iter().zip(&v).map(|(p, q)| p * q).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let tol = POWER_TOL * lambda.abs();
        let resid = w
            .iter()
            .zip(&v)
            .map(|(p, q)| (p - lambda * q).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid <= tol {
            return Ok(lambda);
        }
        let delta = (lambda - prev).abs();
        if it >= 3 && delta <= tol {
            let rho = delta / prev_delta;
            if rho < 1.0 && delta * rho / (1.0 - rho) <= tol {
                return Ok(lambda);
            }
        }
        prev = lambda;
        prev_delta = delta;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    Err(LppError::NoConvergence {
        method: "power iteration",
        iterations: POWER_MAX_ITER,
    })
}

/// `replicas` largest eigenvalues of `A Aᵀ` with entries from `entry_spec`.
pub fn wishart_probe(
    entry_spec: &WeightSpec,
    n: usize,
    k: usize,
    replicas: u64,
    seed: u64,
) -> Result<SampleSet> {
    let vals: Vec<f64> = (0..replicas)
        .map(|r| wishart_lambda_max(entry_spec, n, k, StreamKey::new(seed, r, 1)))
        .collect::<Result<_>>()?;
    Ok(SampleSet::new(vals)?
        .with_meta("n", n)
        .with_meta("k", k)
        .with_meta("family", entry_spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_two_sample, moments};

    #[test]
    fn power_iteration_matches_dense_solver() {
        let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
        for rep in 0..5 {
            let (n, k) = (40, 12);
            let key = StreamKey::new(3, rep, 1);
            let got = wishart_lambda_max(&spec, n, k, key).unwrap();
            let mut a = nalgebra::DMatrix::<f64>::zeros(k, n);
            for r in 0..k {
                let row = crate::weights::sample_row(&spec, key.with_row(r as u64 + 1), n).unwrap();
                for c in 0..n {
                    a[(r, c)] = row[c];
                }
            }
            let y = &a * a.transpose();
            let want = y.symmetric_eigenvalues().max();
            assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
            assert!(got >= y.trace() / k as f64);
        }
    }

    #[test]
    fn close_top_eigenvalues_still_converge() {
        // eigenvalues 1, 1 − 1e-3, 0.5 in a rotated basis; the residual alone
        // would need ~11500 iterations here
        let q = nalgebra::Matrix3::new(2.0, -1.0, 2.0, 2.0, 2.0, -1.0, -1.0, 2.0, 2.0) / 3.0;
        let d = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0 - 1e-3, 0.5));
        let y = q * d * q.transpose();
        let flat: Vec<f64> = (0..9).map(|i| y[(i / 3, i % 3)]).collect();
        let got = power_iteration(&flat, 3).unwrap();
        assert!((got - 1.0).abs() < 1e-7, "{got}");
        assert!((power_iteration(&[1.0, 0.0, 0.0, 1.0], 2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_row_is_sum_of_squares() {
        let spec = WeightSpec::uniform(0.0, 1.0).unwrap();
        let n = 100;
        let draws: Vec<f64> = (0..10_000)
            .map(|r| wishart_lambda_max(&spec, n, 1, StreamKey::new(4, r, 1)).unwrap())
            .collect();
        let m = moments(&draws).unwrap();
        let want = n as f64 * (spec.mu().powi(2) + spec.sigma2());
        let se = (m.variance / draws.len() as f64).sqrt();
        assert!((m.mean - want).abs() < 3.0 * se, "{} vs {want}", m.mean);
    }

    #[test]
    fn rejects_oversized_probe() {
        let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
        assert!(wishart_lambda_max(&spec, 2001, 10, StreamKey::new(1, 0, 1)).is_err());
        assert!(wishart_lambda_max(&spec, 100, 201, StreamKey::new(1, 0, 1)).is_err());
    }

    #[test]
    fn standardized_entry_laws_look_alike() {
        // small version of the cross-law probe; reported, not gated, at full size
        let g = WeightSpec::gaussian(0.0, 1.0).unwrap();
        let u = WeightSpec::uniform(0.0, 1.0).unwrap().standardize().unwrap();
        let sg = wishart_probe(&g, 200, 20, 300, 1).unwrap();
        let su = wishart_probe(&u, 200, 20, 300, 2).unwrap();
        let d = ks_two_sample(&sg, &su).unwrap();
        assert!(d < 0.2, "{d}");
    }

    #[test]
    fn shape_shift_covariance() {
        let base = WeightSpec::uniform(0.0, 1.0).unwrap();
        let shifted = WeightSpec::with_affine(base.family(), 0.5, 1.0).unwrap();
        let n = 400;
        let a = shape_function_estimate(&base, &[0.25, 1.0], n, 5, 9).unwrap();
        let b = shape_function_estimate(&shifted, &[0.25, 1.0], n, 5, 9).unwrap();
        for (p, q) in a.iter().zip(&b) {
            // (n + 1 + k − 1) points per path, divided by n
            let want = 0.5 * (n + p.k) as f64 / n as f64;
            assert!((q.mean - p.mean - want).abs() < 1e-9, "x={}", p.x);
        }
        assert!(shape_function_estimate(&base, &[0.0], n, 5, 9).is_err());
    }
}
