//! Tracy-Widom GUE distribution `F(s) = det(I − K_Airy)` on `L²(s, ∞)`.
//!
//! The operator is discretized by a Nyström rule: Gauss-Legendre nodes on
//! (−1, 1) mapped to (s, ∞) by `x = s + L(1+ξ)/(1−ξ)`, symmetrized with
//! square-root weights, and the finite determinant is taken by LU.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::airy::airy_ai_unchecked;
use crate::error::{LppError, Result};
use crate::quadrature::GaussLegendre;

pub const TW_MIN_S: f64 = -10.0;
pub const TW_MAX_S: f64 = 6.0;
pub const MAP_SCALE: f64 = 10.0;
pub const MIN_ORDER: usize = 20;
pub const MAX_ORDER: usize = 400;
/// `tw_cdf` rejects orders whose doubled-order result differs by more.
pub const CONVERGENCE_TOL: f64 = 1e-6;
pub const DEFAULT_ORDER: usize = 80;
pub const DEFAULT_GRID_STEP: f64 = 0.02;

/// Below this determinant value the grid switches to the left-tail form
/// `log F = −|s|³/12 − (1/8) log|s| + c`, with `c` fitted at the switch
/// point; the LU determinant only has absolute accuracy there.
const LEFT_TAIL_SPLICE: f64 = 1e-9;

/// Near-diagonal gap below which the kernel uses its first-order expansion.
const DIAGONAL_GAP: f64 = 1e-8;

/// `K(x, y) = (Ai(x)Ai'(y) − Ai'(x)Ai(y))/(x − y)`, with the diagonal
/// limit `Ai'(x)² − x·Ai(x)²` and `∂_y K(x, y)|_{y=x} = −Ai(x)²/2`.
fn airy_kernel(x: f64, ax: (f64, f64), y: f64, ay: (f64, f64)) -> f64 {
    let gap = y - x;
    if gap.abs() < DIAGONAL_GAP {
        let diag = ax.1 * ax.1 - x * ax.0 * ax.0;
        diag - 0.5 * gap * ax.0 * ax.0
    } else {
        (ax.0 * ay.1 - ax.1 * ay.0) / (x - y)
    }
}

/// Raw order-`order` Nyström value of `det(I − K_Airy)` on `(s, ∞)`.
pub fn fredholm_determinant(s: f64, order: usize) -> f64 {
    let gl = GaussLegendre::new(order);
    fredholm_with_rule(s, &gl)
}

fn fredholm_with_rule(s: f64, gl: &GaussLegendre) -> f64 {
    let m = gl.nodes.len();
    let mut x = Vec::with_capacity(m);
    let mut sqrt_w = Vec::with_capacity(m);
    for (&xi, &w) in gl.nodes.iter().zip(&gl.weights) {
        let denom = 1.0 - xi;
        x.push(s + MAP_SCALE * (1.0 + xi) / denom);
        sqrt_w.push((w * 2.0 * MAP_SCALE / (denom * denom)).sqrt());
    }
    let ai: Vec<(f64, f64)> = x.iter().map(|&v| airy_ai_unchecked(v)).collect();
    let mat = DMatrix::from_fn(m, m, |i, j| {
        let k = airy_kernel(x[i], ai[i], x[j], ai[j]);
        let id = if i == j { 1.0 } else { 0.0 };
        id - sqrt_w[i] * k * sqrt_w[j]
    });
    mat.lu().determinant()
}

/// `F_TW(s)` at quadrature order `quad_order`, checked against order `2·quad_order`.
pub fn tw_cdf(s: f64, quad_order: usize) -> Result<f64> {
    if !(TW_MIN_S..=TW_MAX_S).contains(&s) {
        return Err(LppError::OutOfDomain {
            name: "s",
            value: s,
            domain: "[-10, 6]",
        });
    }
    if !(MIN_ORDER..=MAX_ORDER).contains(&quad_order) {
        return Err(LppError::InvalidParameter(format!(
            "quadrature order {quad_order} outside [{MIN_ORDER}, {MAX_ORDER}]"
        )));
    }
    let coarse = fredholm_determinant(s, quad_order);
    let fine = fredholm_determinant(s, 2 * quad_order);
    if (coarse - fine).abs() > CONVERGENCE_TOL {
        return Err(LppError::Quadrature {
            s,
            order: quad_order,
            fine_order: 2 * quad_order,
            coarse,
            fine,
        });
    }
    Ok(coarse.clamp(0.0, 1.0))
}

fn left_tail_log_shape(s: f64) -> f64 {
    let a = s.abs();
    -a * a * a / 12.0 - 0.125 * a.ln()
}

/// Tabulated `F_TW` on `[−10, 6]` with cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct TwReference {
    grid: Vec<(f64, f64)>,
    slopes: Vec<f64>,
    quad_order: usize,
    accuracy: f64,
    tail_constant: f64,
    step: f64,
}

impl TwReference {
    pub fn build(quad_order: usize, step: f64) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER / 2).contains(&quad_order) {
            return Err(LppError::InvalidParameter(format!(
                "reference order {quad_order} outside [{MIN_ORDER}, {}]",
                MAX_ORDER / 2
            )));
        }
        if !(step > 0.0 && step <= 0.1) {
            return Err(LppError::InvalidParameter(format!(
                "grid step {step} outside (0, 0.1]"
            )));
        }
        let count = ((TW_MAX_S - TW_MIN_S) / step).round() as usize;
        let step = (TW_MAX_S - TW_MIN_S) / count as f64;
        let rule = GaussLegendre::new(quad_order);
        let fine_rule = GaussLegendre::new(2 * quad_order);

        let s_at = |i: usize| TW_MIN_S + step * i as f64;
        let mut values: Vec<f64> = (0..=count)
            .map(|i| fredholm_with_rule(s_at(i), &rule))
            .collect();

        // accuracy estimate: order-m vs order-2m on every 25th node
        let mut accuracy: f64 = 0.0;
        for i in (0..=count).step_by(25) {
            let fine = fredholm_with_rule(s_at(i), &fine_rule);
            accuracy = accuracy.max((values[i] - fine).abs());
        }
        if accuracy > CONVERGENCE_TOL {
            return Err(LppError::Quadrature {
                s: f64::NAN,
                order: quad_order,
                fine_order: 2 * quad_order,
                coarse: accuracy,
                fine: 0.0,
            });
        }

        // the last node (from the right) still above the splice threshold
        let splice = (0..=count)
            .rev()
            .find(|&i| values[i] < LEFT_TAIL_SPLICE)
            .map_or(0, |i| i + 1);
        let tail_constant = if splice > 0 {
            values[splice].ln() - left_tail_log_shape(s_at(splice))
        } else {
            f64::NAN
        };
        for (i, v) in values.iter_mut().enumerate().take(splice) {
            *v = (left_tail_log_shape(s_at(i)) + tail_constant).exp();
        }
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }

        let grid: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &v)| (s_at(i), v)).collect();
        let slopes = finite_difference_slopes(&values, step);
        Ok(TwReference {
            grid,
            slopes,
            quad_order,
            accuracy,
            tail_constant,
            step,
        })
    }

    pub fn grid(&self) -> &[(f64, f64)] {
        &self.grid
    }
    pub fn quad_order(&self) -> usize {
        self.quad_order
    }
    /// Largest observed `|F_m − F_{2m}|` over the checked nodes.
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }
    /// Fitted constant of the left-tail form (NaN if no splice was needed).
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    pub fn cdf(&self, s: f64) -> f64 {
        let (lo, hi) = (self.grid[0].0, self.grid[self.grid.len() - 1].0);
        if s.is_nan() {
            return f64::NAN;
        }
        if s <= lo {
            return if s == lo { self.grid[0].1 } else { 0.0 };
        }
        if s >= hi {
            return 1.0;
        }
        let pos = (s - lo) / self.step;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let t = pos - i as f64;
        let (f0, f1) = (self.grid[i].1, self.grid[i + 1].1);
        let (d0, d1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * d1;
        v.clamp(0.0, 1.0)
    }

    /// Density from the interpolant's slopes at grid nodes, linearly blended.
    pub fn density(&self, s: f64) -> f64 {
        let lo = self.grid[0].0;
        let pos = (s - lo) / self.step;
        if !(0.0..=(self.grid.len() - 1) as f64).contains(&pos) {
            return 0.0;
        }
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let t = pos - i as f64;
        (1.0 - t) * self.slopes[i] + t * self.slopes[i + 1]
    }

    /// Inverse of the interpolated CDF by bisection.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(1e-6..=1.0 - 1e-9).contains(&u) {
            return Err(LppError::OutOfDomain {
                name: "u",
                value: u,
                domain: "[1e-6, 1 - 1e-9]",
            });
        }
        let (mut lo, mut hi) = (self.grid[0].0, self.grid[self.grid.len() - 1].0);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Mean and variance via `E g(X) = g(a) + ∫_a^b g'(s)(1 − F(s)) ds`
    /// with composite Simpson on the grid.
    pub fn mean_variance(&self) -> (f64, f64) {
        let a = self.grid[0].0;
        let survival: Vec<f64> = self.grid.iter().map(|&(_, f)| 1.0 - f).collect();
        let first = a + simpson(&survival, self.step);
        let weighted: Vec<f64> = self
            .grid
            .iter()
            .zip(&survival)
            .map(|(&(s, _), &sv)| 2.0 * s * sv)
            .collect();
        let second = a * a + simpson(&weighted, self.step);
        (first, second - first * first)
    }
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    if n % 2 == 1 {
        // trailing interval by trapezoid; grids built here have even counts
        let head = simpson(&values[..n], h);
        return head + 0.5 * h * (values[n - 1] + values[n]);
    }
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Fourth-order central differences, second-order one-sided at the ends.
fn finite_difference_slopes(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2])
                    / (12.0 * h)
            } else if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * values[i] - 4.0 * values[i - 1] + values[i - 2]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Shared default reference (order 80, step 0.02), built on first use.
pub fn reference() -> &'static TwReference {
    static REFERENCE: OnceLock<TwReference> = OnceLock::new();
    REFERENCE.get_or_init(|| {
        TwReference::build(DEFAULT_ORDER, DEFAULT_GRID_STEP)
            .expect("default Tracy-Widom reference converges")
    })
}

/// Quantile of `F_TW` from the shared reference.
pub fn tw_quantile(u: f64) -> Result<f64> {
    reference().quantile(u)
}
