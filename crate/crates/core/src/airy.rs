//! Airy function `Ai` and its derivative on the real line.
//!
//! For `|x| ≤ 8` the Maclaurin series is summed in double-double arithmetic:
//! its terms reach ~e^{(2/3)|x|^{3/2}} ≈ 3.5e6 at `|x| = 8` and cancel down
//! to `O(1)` (or to ~1e-7 for positive `x`), which plain `f64` cannot carry
//! to 1e-12 absolute. Beyond that the standard asymptotic expansions in
//! `ζ = (2/3)|x|^{3/2}` are used, truncated at their smallest term.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{LppError, Result};

pub const AIRY_MIN_X: f64 = -15.0;
pub const AIRY_MAX_X: f64 = 200.0;
const SERIES_RADIUS: f64 = 8.0;

/// Ai(0) = 3^{-2/3}/Γ(2/3) as an unevaluated sum hi + lo.
const AI0: Dd = Dd {
    hi: 0.3550280538878172,
    lo: 2.05233632436212e-17,
};
/// −Ai'(0) = 3^{-1/3}/Γ(1/3).
const NEG_AIP0: Dd = Dd {
    hi: 0.2588194037928068,
    lo: -2.522243111610832e-17,
};

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

impl Dd {

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        quick_two_sum(s, e + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let p = q1 * d;
        let pe = q1.mul_add(d, -p);
        let (s, e) = two_sum(self.hi, -p);
        let r = s + (e - pe + self.lo);
        quick_two_sum(q1, r / d)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `(Ai(x), Ai'(x))` for `x ∈ [−15, 200]`.
pub fn airy_ai(x: f64) -> Result<(f64, f64)> {
    if !(AIRY_MIN_X..=AIRY_MAX_X).contains(&x) {
        return Err(LppError::OutOfDomain {
            name: "x",
            value: x,
            domain: "[-15, 200]",
        });
    }
    Ok(airy_ai_unchecked(x))
}

/// As [`airy_ai`], but returns `(0, 0)` above the supported range, where
/// both values are below the smallest subnormal anyway.
pub(crate) fn airy_ai_unchecked(x: f64) -> (f64, f64) {
    if x > AIRY_MAX_X {
        (0.0, 0.0)
    } else if x > SERIES_RADIUS {
        asymptotic_positive(x)
    } else if x >= -SERIES_RADIUS {
        maclaurin(x)
    } else {
        asymptotic_negative(-x)
    }
}

/// Ai = Ai(0)·f − (−Ai'(0))·g with
/// f = Σ 3^k (1/3)_k x^{3k}/(3k)!, g = Σ 3^k (2/3)_k x^{3k+1}/(3k+1)!.
fn maclaurin(x: f64) -> (f64, f64) {
    let xd = Dd::from(x);
    let x2 = xd.mul(xd);
    let x3 = x2.mul(xd);

    let mut f_term = Dd::from(1.0);
    let mut g_term = xd;
    let mut fp_term = x2.div_f64(2.0);
    let mut gp_term = Dd::from(1.0);
    let (mut f, mut g) = (f_term, g_term);
    let (mut fp, mut gp) = (fp_term, gp_term);
    let mut peak = 1.0f64.max(x.abs());

    for k in 1..200 {
        let kf = k as f64;
        f_term = f_term.mul(x3).div_f64((3.0 * kf - 1.0) * (3.0 * kf));
        g_term = g_term.mul(x3).div_f64((3.0 * kf) * (3.0 * kf + 1.0));
        gp_term = gp_term.mul(x3).div_f64((3.0 * kf) * (3.0 * kf - 2.0));
        if k >= 2 {
            fp_term = fp_term.mul(x3).div_f64((3.0 * kf - 1.0) * (3.0 * kf - 3.0));
            fp = fp.add(fp_term);
        }
        f = f.add(f_term);
        g = g.add(g_term);
        gp = gp.add(gp_term);

        let biggest = f_term
            .hi
            .abs()
            .max(g_term.hi.abs())
            .max(fp_term.hi.abs())
            .max(gp_term.hi.abs());
        peak = peak.max(biggest);
        if k > 2 && biggest < 1e-33 * peak {
            break;
        }
    }
    let ai = AI0.mul(f).add(NEG_AIP0.mul(g).neg());
    let aip = AI0.mul(fp).add(NEG_AIP0.mul(gp).neg());
    (ai.to_f64(), aip.to_f64())
}

/// u_k and v_k of the large-argument expansions, as far as they are useful.
fn expansion_coefficients(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    u.push(1.0);
    v.push(1.0);
    for k in 1..count {
        let kf = k as f64;
        let next = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        u.push(next);
        v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * next);
    }
    (u, v)
}

/// Terms `c_j ζ^{-j}` up to (and excluding) the first one that grows.
fn truncated_terms(coef: &[f64], zeta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(coef.len());
    let mut pow = 1.0;
    let mut prev = f64::INFINITY;
    for &c in coef {
        let t = c * pow;
        if t.abs() > prev || t.abs() < 1e-18 {
            break;
        }
        out.push(t);
        prev = t.abs();
        pow /= zeta;
    }
    out
}

fn asymptotic_positive(x: f64) -> (f64, f64) {
    let (u, v) = expansion_coefficients(64);
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let alt = |terms: Vec<f64>| {
        terms
            .iter()
            .enumerate()
            .map(|(k, t)| if k % 2 == 0 { *t } else { -*t })
            .sum::<f64>()
    };
    let su = alt(truncated_terms(&u, zeta));
    let sv = alt(truncated_terms(&v, zeta));
    let q = x.powf(0.25);
    let pref = (-zeta).exp() / (2.0 * PI.sqrt());
    (pref / q * su, -pref * q * sv)
}

fn asymptotic_negative(z: f64) -> (f64, f64) {
    let (u, v) = expansion_coefficients(64);
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    // Σ (−1)^m c_{2m} ζ^{−2m} and Σ (−1)^m c_{2m+1} ζ^{−2m−1}
    let split = |terms: Vec<f64>| {
        let (mut even, mut odd) = (0.0, 0.0);
        for (j, t) in terms.iter().enumerate() {
            let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if j % 2 == 0 {
                even += sign * t;
            } else {
                odd += sign * t;
            }
        }
        (even, odd)
    };
    let (ue, uo) = split(truncated_terms(&u, zeta));
    let (ve, vo) = split(truncated_terms(&v, zeta));
    let theta = zeta - FRAC_PI_4;
    let (s, c) = theta.sin_cos();
    let q = z.powf(0.25);
    let rpi = PI.sqrt();
    let ai = (c * ue + s * uo) / (rpi * q);
    let aip = q / rpi * (s * ve - c * vo);
    (ai, aip)
}
