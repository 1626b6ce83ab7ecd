//! Empirical distributions, near-axis centering and scaling, KS distances,
//! and log-log exponent fits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{LppError, Result};
use crate::lattice::floor_pow;
use crate::tracy_widom::TwReference;

/// Sorted i.i.d. replica statistics plus free-form labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    values: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

impl SampleSet {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(LppError::InvalidParameter("sample contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(SampleSet {
            values,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_replicas(&self) -> usize {
        self.values.len()
    }

    /// Fraction of values `≤ x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// Fraction of values `< x`.
    pub fn ecdf_left(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v < x) as f64 / self.values.len() as f64
    }

    /// Linear-interpolation quantile between order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return f64::NAN;
        }
        let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        self.values[lo] + (h - lo as f64) * (self.values[hi] - self.values[lo])
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    /// `x ↦ (x − center)/scale`; requires `scale > 0` so order is kept.
    pub fn affine(&self, center: f64, scale: f64) -> Result<SampleSet> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(LppError::InvalidParameter(format!("scale {scale} must be positive")));
        }
        Ok(SampleSet {
            values: self.values.iter().map(|&x| (x - center) / scale).collect(),
            meta: self.meta.clone(),
        })
    }

    /// `# key: value` header lines, then one value per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str("value\n");
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.is_empty() || line == "value" {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| LppError::Parse(format!("line {}: bad value {line:?}", lineno + 1)))?;
            values.push(v);
        }
        let mut set = SampleSet::new(values)?;
        set.meta = meta;
        Ok(set)
    }
}

/// An evaluable distribution function. `cdf_left` is the left limit and
/// only differs from `cdf` at atoms.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

impl Cdf for SampleSet {
    fn cdf(&self, x: f64) -> f64 {
        self.ecdf(x)
    }
    fn cdf_left(&self, x: f64) -> f64 {
        self.ecdf_left(x)
    }
}

impl Cdf for TwReference {
    fn cdf(&self, x: f64) -> f64 {
        TwReference::cdf(self, x)
    }
}

/// Near-axis normalization of `T(n, ⌊n^a⌋)` towards the Tracy-Widom GUE law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRule {
    pub n: u64,
    pub a: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl ScalingRule {
    pub fn new(n: u64, a: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(LppError::OutOfDomain {
                name: "a",
                value: a,
                domain: "(0, 1)",
            });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LppError::InvalidParameter(format!("sigma {sigma} must be positive")));
        }
        if n == 0 {
            return Err(LppError::InvalidParameter("n must be positive".into()));
        }
        Ok(ScalingRule { n, a, mu, sigma })
    }

    /// Row count `⌊n^a⌋`, shared with every caller that builds the lattice.
    pub fn rows(&self) -> u64 {
        floor_pow(self.n, self.a).max(1)
    }

    /// `n·μ + 2σ·n^{(1+a)/2}`
    pub fn center(&self) -> f64 {
        let n = self.n as f64;
        n * self.mu + 2.0 * self.sigma * n.powf(0.5 * (1.0 + self.a))
    }

    /// `σ·n^{1/2 − a/6}`
    pub fn scale(&self) -> f64 {
        self.sigma * (self.n as f64).powf(0.5 - self.a / 6.0)
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center()) / self.scale()
    }
}

pub fn apply_scaling(raw: &SampleSet, rule: &ScalingRule) -> Result<SampleSet> {
    raw.affine(rule.center(), rule.scale())
}

/// `sup_x |ECDF(x) − F(x)|`, evaluated on both sides of every sample point.
pub fn ks_one_sample(s: &SampleSet, cdf: &impl Cdf) -> Result<f64> {
    let v = s.values();
    let n = v.len();
    if n < 2 {
        return Err(LppError::InvalidParameter("KS needs at least 2 values".into()));
    }
    let nf = n as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let x = v[i];
        let mut j = i;
        while j < n && v[j] == x {
            j += 1;
        }
        let below = i as f64 / nf;
        let at = j as f64 / nf;
        d = d.max((at - cdf.cdf(x)).abs()).max((cdf.cdf_left(x) - below).abs());
        i = j;
    }
    Ok(d)
}

/// `sup_x |ECDF₁(x) − ECDF₂(x)|` over the merged sample points.
pub fn ks_two_sample(s1: &SampleSet, s2: &SampleSet) -> Result<f64> {
    let (a, b) = (s1.values(), s2.values());
    if a.is_empty() || b.is_empty() {
        return Err(LppError::InvalidParameter("KS needs nonempty samples".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // once either side is exhausted the remaining gap only shrinks
    Ok(d)
}

/// KS critical value at the 1% level, `1.63/√N`.
pub fn ks_critical_one_sample(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Two-sample KS critical value at the 1% level, `1.63·√((n+m)/(nm))`.
pub fn ks_critical_two_sample(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.63 * ((n + m) / (n * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Least squares of `log y` on `log n`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(LppError::InvalidParameter("fit needs at least 3 points".into()));
    }
    if let Some(&(n, y)) = points.iter().find(|&&(n, y)| !(y > 0.0) || !(n > 0.0)) {
        return Err(LppError::InvalidParameter(format!(
            "fit needs positive n and y, got ({n}, {y})"
        )));
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(LppError::InvalidParameter("fit needs distinct n".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased (`N − 1`) variance.
    pub variance: f64,
    /// Moment skewness `m₃ / m₂^{3/2}`; 0 for constant samples.
    pub skewness: f64,
}

pub fn moments(values: &[f64]) -> Result<Moments> {
    let n = values.len();
    if n < 3 {
        return Err(LppError::InvalidParameter("moments need at least 3 values".into()));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3) = (m2 / nf, m3 / nf);
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    Ok(Moments {
        mean,
        variance,
        skewness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{normal_cdf, StreamKey, WeightSpec};

    fn set(v: &[f64]) -> SampleSet {
        SampleSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn scaling_example_values() {
        let rule = ScalingRule::new(10_000, 0.3, 0.0, 1.0).unwrap();
        assert!((rule.center() - 2.0 * 10f64.powf(2.6)).abs() < 1e-9);
        assert!((rule.center() - 796.214).abs() < 1e-3);
        // n^{0.45} at n = 10^4 is 10^{1.8}
        assert!((rule.scale() - 10f64.powf(1.8)).abs() < 1e-9);
        assert!((rule.scale() - 63.0957).abs() < 1e-4);
        assert_eq!(rule.apply(rule.center()), 0.0);
        assert_eq!(rule.rows(), 15);
    }

    #[test]
    fn identity_affine_leaves_set_unchanged() {
        let s = set(&[3.0, -1.0, 2.5]);
        assert_eq!(s.affine(0.0, 1.0).unwrap().values(), s.values());
    }

    #[test]
    fn scaling_is_equivariant_under_weight_affine_maps() {
        // T for weights σω + μ equals σT(ω) + (n + k)μ; the rule absorbs the
        // σ part, and the (n+k)μ versus nμ mismatch is the same for both
        let (n, a) = (1000u64, 0.3);
        let std_rule = ScalingRule::new(n, a, 0.0, 1.0).unwrap();
        let (mu, sigma) = (2.5, 3.0);
        let k = std_rule.rows() as f64;
        let rule = ScalingRule::new(n, a, mu, sigma).unwrap();
        let raw = set(&[900.0, 1000.0, 1100.5]);
        let mapped = set(&raw.values().iter().map(|t| sigma * t + mu * (n as f64 + k)).collect::<Vec<_>>());
        let a1 = apply_scaling(&raw, &std_rule).unwrap();
        let a2 = apply_scaling(&mapped, &rule).unwrap();
        for (x, y) in a1.values().iter().zip(a2.values()) {
            let shift = mu * k / rule.scale();
            assert!((x + shift - y).abs() < 1e-9);
        }
    }

    #[test]
    fn ks_at_midpoint_quantiles_is_half_step() {
        let n = 200;
        let vals: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let d = ks_one_sample(&set(&vals), &|x: f64| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_sample_below_support_is_one() {
        let d = ks_one_sample(&set(&[-5.0, -4.0, -3.0]), &|x: f64| x.clamp(0.0, 1.0)).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn ks_against_own_ecdf_is_zero() {
        let s = set(&[0.3, 1.0, 1.0, 2.0, 5.5]);
        assert_eq!(ks_one_sample(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn two_sample_identities() {
        let s = set(&[0.1, 0.5, 0.5, 0.9]);
        assert_eq!(ks_two_sample(&s, &s).unwrap(), 0.0);
        let t = set(&[2.0, 3.0]);
        assert_eq!(ks_two_sample(&s, &t).unwrap(), 1.0);
        assert!(ks_two_sample(&s, &SampleSet::default()).is_err());
    }

    fn normal_set(seed: u64, n: usize) -> SampleSet {
        let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
        set(&crate::weights::sample_row(&spec, StreamKey::new(seed, 0, 1), n).unwrap())
    }

    #[test]
    fn ks_calibration_over_seeds() {
        let n = 10_000;
        let crit = ks_critical_one_sample(n);
        let mut one = 0;
        let mut two = 0;
        for seed in 0..100 {
            let a = normal_set(seed, n);
            if ks_one_sample(&a, &normal_cdf).unwrap() < crit {
                one += 1;
            }
            let b = normal_set(seed + 1000, n);
            if ks_two_sample(&a, &b).unwrap() < ks_critical_two_sample(n, n) {
                two += 1;
            }
        }
        assert!(one >= 95, "one-sample passes {one}/100");
        assert!(two >= 95, "two-sample passes {two}/100");
    }

    #[test]
    fn exact_power_law_fits() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 1e4]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(0.45)))
            .collect();
        let fit = fit_exponent(&pts).unwrap();
        assert!((fit.slope - 0.45).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        let flat: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&n| (n, 7.0)).collect();
        assert!(fit_exponent(&flat).unwrap().slope.abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (1.0, 2.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn moments_examples() {
        let m = moments(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!((m.mean, m.variance, m.skewness), (0.0, 1.0, 0.0));
        let c = moments(&[2.0; 5]).unwrap();
        assert_eq!(c.variance, 0.0);
        assert!(moments(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn ks_invariant_under_common_scaling() {
        let a = normal_set(1, 500);
        let b = normal_set(2, 500);
        let rule = ScalingRule::new(5000, 0.4, 1.0, 2.0).unwrap();
        let d0 = ks_two_sample(&a, &b).unwrap();
        let d1 = ks_two_sample(&apply_scaling(&a, &rule).unwrap(), &apply_scaling(&b, &rule).unwrap()).unwrap();
        assert_eq!(d0, d1);
    }

    #[test]
    fn csv_round_trip() {
        let s = set(&[0.1, -2.75, 1e-300, 3.0]).with_meta("n", 1000).with_meta("family", "uniform");
        let back = SampleSet::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back, s);
        assert!(SampleSet::from_csv("value\nabc\n").is_err());
    }
}
