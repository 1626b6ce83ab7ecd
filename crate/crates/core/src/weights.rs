//! Weight distributions for the lattice field, their moments and quantile
//! functions, and the keyed random streams every sampler draws from.
//!
//! A [`WeightSpec`] is a base family plus an affine map `loc + scale * raw`,
//! which is how standardized specs `(ω − μ)/σ` are represented without
//! introducing new families.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{LppError, Result};

/// Probabilities fed to quantile transforms are clamped to this distance
/// from 0 and 1.
pub const QUANTILE_CLAMP: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Exponential { rate: f64 },
    /// Support {1, 2, ...}; `success` is the per-trial success probability.
    Geometric { success: f64 },
    /// Two-point law: `high` with probability `p`, else `low`.
    Bernoulli { low: f64, high: f64, p: f64 },
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std: f64 },
    Pareto { scale: f64, alpha: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Exponential { .. } => "exponential",
            Family::Geometric { .. } => "geometric",
            Family::Bernoulli { .. } => "bernoulli",
            Family::Uniform { .. } => "uniform",
            Family::Gaussian { .. } => "gaussian",
            Family::Pareto { .. } => "pareto",
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Family::Geometric { .. } | Family::Bernoulli { .. })
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Family::Exponential { rate } => vec![("rate", rate)],
            Family::Geometric { success } => vec![("success", success)],
            Family::Bernoulli { low, high, p } => vec![("low", low), ("high", high), ("p", p)],
            Family::Uniform { low, high } => vec![("low", low), ("high", high)],
            Family::Gaussian { mean, std } => vec![("mean", mean), ("std", std)],
            Family::Pareto { scale, alpha } => vec![("scale", scale), ("alpha", alpha)],
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LppError::InvalidParameter(msg));
        let finite = self.params().iter().all(|(_, v)| v.is_finite());
        if !finite {
            return bad(format!("{}: parameters must be finite", self.name()));
        }
        match *self {
            Family::Exponential { rate } if rate <= 0.0 => {
                bad(format!("exponential rate must be positive, got {rate}"))
            }
            Family::Geometric { success } if !(success > 0.0 && success < 1.0) => bad(format!(
                "geometric success probability must lie in (0,1), got {success}"
            )),
            Family::Bernoulli { low, high, p } if !(low < high && p > 0.0 && p < 1.0) => bad(
                format!("bernoulli needs low < high and p in (0,1), got {low}, {high}, {p}"),
            ),
            Family::Uniform { low, high } if low >= high => {
                bad(format!("uniform needs low < high, got {low}, {high}"))
            }
            Family::Gaussian { std, .. } if std <= 0.0 => {
                bad(format!("gaussian std must be positive, got {std}"))
            }
            Family::Pareto { scale, alpha } if scale <= 0.0 || alpha <= 2.0 => bad(format!(
                "pareto needs scale > 0 and alpha > 2 (finite variance), got {scale}, {alpha}"
            )),
            _ => Ok(()),
        }
    }

    fn raw_moments(&self) -> (f64, f64) {
        match *self {
            Family::Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
            Family::Geometric { success: q } => (1.0 / q, (1.0 - q) / (q * q)),
            Family::Bernoulli { low, high, p } => {
                let gap = high - low;
                (low + p * gap, p * (1.0 - p) * gap * gap)
            }
            Family::Uniform { low, high } => {
                let gap = high - low;
                (0.5 * (low + high), gap * gap / 12.0)
            }
            Family::Gaussian { mean, std } => (mean, std * std),
            Family::Pareto { scale, alpha } => {
                let am1 = alpha - 1.0;
                (
                    alpha * scale / am1,
                    scale * scale * alpha / (am1 * am1 * (alpha - 2.0)),
                )
            }
        }
    }

    fn raw_cdf(&self, x: f64) -> f64 {
        match *self {
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Family::Geometric { success } => {
                if x < 1.0 {
                    0.0
                } else {
                    let m = x.floor();
                    -(m * (-success).ln_1p()).exp_m1()
                }
            }
            Family::Bernoulli { low, high, p } => {
                if x < low {
                    0.0
                } else if x < high {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Family::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Family::Gaussian { mean, std } => normal_cdf((x - mean) / std),
            Family::Pareto { scale, alpha } => {
                if x <= scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(alpha)
                }
            }
        }
    }

    /// Quantile given both tails, `lower = u` and `upper = 1 − u`, so that
    /// whichever is small is carried at full relative precision.
    fn raw_quantile(&self, lower: f64, upper: f64) -> f64 {
        match *self {
            Family::Exponential { rate } => {
                if lower < 0.5 {
                    -(-lower).ln_1p() / rate
                } else {
                    -upper.ln() / rate
                }
            }
            Family::Geometric { success } => geometric_quantile(success, lower, upper),
            Family::Bernoulli { low, high, p } => {
                if lower <= 1.0 - p {
                    low
                } else {
                    high
                }
            }
            Family::Uniform { low, high } => low + lower * (high - low),
            Family::Gaussian { mean, std } => {
                let z = if lower < 0.5 {
                    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * lower)
                } else {
                    std::f64::consts::SQRT_2 * erfc_inv(2.0 * upper)
                };
                mean + std * z
            }
            Family::Pareto { scale, alpha } => {
                let tail = if lower < 0.5 { -(-lower).ln_1p() } else { -upper.ln() };
                scale * (tail / alpha).exp()
            }
        }
    }
}

/// Smallest m ≥ 1 with 1 − (1 − q)^m ≥ u.
fn geometric_quantile(q: f64, lower: f64, upper: f64) -> f64 {
    let log_fail = (-q).ln_1p();
    // survival after m trials is (1-q)^m; need (1-q)^m <= upper
    let mut m = (upper.ln() / log_fail).ceil().max(1.0);
    let survival = |m: f64| (m * log_fail).exp();
    let cdf = |m: f64| -(m * log_fail).exp_m1();
    while m > 1.0 && cdf(m - 1.0) >= lower && survival(m - 1.0) <= upper {
        m -= 1.0;
    }
    while cdf(m) < lower {
        m += 1.0;
    }
    m
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// A weight law: base family pushed through `x ↦ loc + scale·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    family: Family,
    loc: f64,
    scale: f64,
    mu: f64,
    sigma2: f64,
    p_index: f64,
}

impl WeightSpec {
    pub fn new(family: Family) -> Result<Self> {
        Self::with_affine(family, 0.0, 1.0)
    }

    pub fn with_affine(family: Family, loc: f64, scale: f64) -> Result<Self> {
        family.validate()?;
        if !(scale > 0.0 && scale.is_finite() && loc.is_finite()) {
            return Err(LppError::InvalidParameter(format!(
                "affine map needs finite loc and positive scale, got loc={loc}, scale={scale}"
            )));
        }
        let (raw_mu, raw_var) = family.raw_moments();
        let p_index = match family {
            // moments of every order below alpha are finite; alpha itself is not
            Family::Pareto { alpha, .. } => f64::from_bits(alpha.to_bits() - 1),
            _ => f64::INFINITY,
        };
        Ok(WeightSpec {
            family,
            loc,
            scale,
            mu: loc + scale * raw_mu,
            sigma2: scale * scale * raw_var,
            p_index,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate })
    }
    pub fn geometric(success: f64) -> Result<Self> {
        Self::new(Family::Geometric { success })
    }
    pub fn bernoulli(low: f64, high: f64, p: f64) -> Result<Self> {
        Self::new(Family::Bernoulli { low, high, p })
    }
    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        Self::new(Family::Uniform { low, high })
    }
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        Self::new(Family::Gaussian { mean, std })
    }
    pub fn pareto(scale: f64, alpha: f64) -> Result<Self> {
        Self::new(Family::Pareto { scale, alpha })
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn loc(&self) -> f64 {
        self.loc
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
    /// Largest finite absolute-moment order (∞ for light-tailed families).
    pub fn p_index(&self) -> f64 {
        self.p_index
    }

    pub fn is_standardized(&self) -> bool {
        self.mu.abs() < 1e-12 && (self.sigma2 - 1.0).abs() < 1e-12
    }

    /// Spec of `(ω − μ)/σ`.
    pub fn standardize(&self) -> Result<Self> {
        if !(self.sigma2 > 0.0) {
            return Err(LppError::Degenerate(format!(
                "cannot standardize {}: variance is {}",
                self, self.sigma2
            )));
        }
        let sigma = self.sigma();
        let mut out = Self::with_affine(
            self.family,
            (self.loc - self.mu) / sigma,
            self.scale / sigma,
        )?;
        // pin the target moments exactly; the affine algebra is exact up to rounding
        out.mu = 0.0;
        out.sigma2 = 1.0;
        Ok(out)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.family.raw_cdf((x - self.loc) / self.scale)
    }

    /// `inf{x : F(x) ≥ u}` for `u ∈ (0,1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(LppError::OutOfDomain {
                name: "u",
                value: u,
                domain: "(0, 1)",
            });
        }
        Ok(self.loc + self.scale * self.family.raw_quantile(u, 1.0 - u))
    }

    /// Transform a standard normal value `z` through `Q(Φ(z))`.
    ///
    /// Returns the weight and whether the probability had to be clamped.
    /// Gaussian families bypass `Φ` entirely so the transform is exact.
    pub fn quantile_of_normal(&self, z: f64) -> (f64, bool) {
        if let Family::Gaussian { mean, std } = self.family {
            return (self.loc + self.scale * (mean + std * z), false);
        }
        let mut lower = normal_cdf(z);
        let mut upper = normal_cdf(-z);
        let mut clamped = false;
        if lower < QUANTILE_CLAMP {
            lower = QUANTILE_CLAMP;
            upper = 1.0 - QUANTILE_CLAMP;
            clamped = true;
        } else if upper < QUANTILE_CLAMP {
            upper = QUANTILE_CLAMP;
            lower = 1.0 - QUANTILE_CLAMP;
            clamped = true;
        }
        (
            self.loc + self.scale * self.family.raw_quantile(lower, upper),
            clamped,
        )
    }

    /// Fill `out` with i.i.d. draws from this law using `rng`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let (loc, scale) = (self.loc, self.scale);
        match self.family {
            Family::Exponential { rate } => {
                let s = scale / rate;
                for x in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *x = loc + s * e;
                }
            }
            Family::Gaussian { mean, std } => {
                let (m, s) = (loc + scale * mean, scale * std);
                for x in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x = m + s * z;
                }
            }
            Family::Uniform { low, high } => {
                let (m, s) = (loc + scale * low, scale * (high - low));
                for x in out.iter_mut() {
                    *x = m + s * rng.random::<f64>();
                }
            }
            Family::Bernoulli { low, high, p } => {
                let (lo, hi) = (loc + scale * low, loc + scale * high);
                for x in out.iter_mut() {
                    *x = if rng.random::<f64>() < p { hi } else { lo };
                }
            }
            Family::Geometric { success } => {
                let log_fail = (-success).ln_1p();
                for x in out.iter_mut() {
                    // 1 - U lies in (0, 1]
                    let u = 1.0 - rng.random::<f64>();
                    let m = (u.ln() / log_fail).floor() + 1.0;
                    *x = loc + scale * m;
                }
            }
            Family::Pareto { scale: xm, alpha } => {
                for x in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *x = loc + scale * xm * (e / alpha).exp();
                }
            }
        }
    }

    fn to_pairs(self) -> Vec<(&'static str, f64)> {
        let mut pairs = self.family.params();
        if self.loc != 0.0 || self.scale != 1.0 {
            pairs.push(("loc", self.loc));
            pairs.push(("scale_by", self.scale));
        }
        pairs
    }

    fn from_pairs(family: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut seen: Vec<&str> = Vec::new();
        let mut get = |key: &'static str, default: Option<f64>| -> Result<f64> {
            seen.push(key);
            match (params.get(key), default) {
                (Some(v), _) => Ok(*v),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(LppError::Parse(format!(
                    "{family}: missing required parameter `{key}`"
                ))),
            }
        };
        let fam = match family {
            "exponential" => Family::Exponential {
                rate: get("rate", Some(1.0))?,
            },
            "geometric" => Family::Geometric {
                success: get("success", Some(0.5))?,
            },
            "bernoulli" => Family::Bernoulli {
                low: get("low", Some(-1.0))?,
                high: get("high", Some(1.0))?,
                p: get("p", Some(0.5))?,
            },
            "uniform" => Family::Uniform {
                low: get("low", Some(0.0))?,
                high: get("high", Some(1.0))?,
            },
            "gaussian" => Family::Gaussian {
                mean: get("mean", Some(0.0))?,
                std: get("std", Some(1.0))?,
            },
            "pareto" => Family::Pareto {
                scale: get("scale", Some(1.0))?,
                alpha: get("alpha", None)?,
            },
            other => return Err(LppError::Parse(format!("unknown weight family `{other}`"))),
        };
        let loc = get("loc", Some(0.0))?;
        let scale = get("scale_by", Some(1.0))?;
        if let Some(extra) = params.keys().find(|k| !seen.contains(&k.as_str())) {
            return Err(LppError::Parse(format!(
                "{family}: unknown parameter `{extra}`"
            )));
        }
        Self::with_affine(fam, loc, scale)
    }
}

/// `family=exponential, rate=1`
impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "family={}", self.family.name())?;
        for (k, v) in self.to_pairs() {
            write!(f, ", {k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for WeightSpec {
    type Err = LppError;

    fn from_str(s: &str) -> Result<Self> {
        let mut family = None;
        let mut params = BTreeMap::new();
        for part in s.split([',', ';']).map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| LppError::Parse(format!("expected key=value, got `{part}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "family" {
                family = Some(value.to_string());
            } else {
                let v: f64 = value.parse().map_err(|_| {
                    LppError::Parse(format!("parameter `{key}`: `{value}` is not a number"))
                })?;
                params.insert(key.to_string(), v);
            }
        }
        let family = family.ok_or_else(|| LppError::Parse(format!("no family in `{s}`")))?;
        WeightSpec::from_pairs(&family, &params)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightSpecRepr {
    family: String,
    #[serde(flatten)]
    params: BTreeMap<String, f64>,
}

impl Serialize for WeightSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        WeightSpecRepr {
            family: self.family.name().to_string(),
            params: self
                .to_pairs()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WeightSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = WeightSpecRepr::deserialize(deserializer)?;
        WeightSpec::from_pairs(&repr.family, &repr.params).map_err(serde::de::Error::custom)
    }
}

/// Address of one random stream: which experiment, which replica, which row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replica_index: u64,
    pub row_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, replica_index: u64, row_index: u64) -> Self {
        debug_assert!(row_index >= 1, "rows are numbered from 1");
        StreamKey {
            master_seed,
            replica_index,
            row_index,
        }
    }

    pub fn with_row(self, row_index: u64) -> Self {
        StreamKey { row_index, ..self }
    }

    /// ChaCha8 keyed by the master seed; (replica, row) selects the nonce.
    /// Each key addresses a disjoint counter space, so results never depend
    /// on the order in which streams are consumed.
    pub fn rng(&self) -> ChaCha8Rng {
        assert!(
            self.replica_index < (1 << 32) && self.row_index < (1 << 32),
            "replica and row indices must fit in 32 bits"
        );
        let mut seed = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream((self.replica_index << 32) | self.row_index);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Domain-separate a master seed, e.g. per grid point or per estimator.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    let mut t = tag;
    let mut state = master_seed ^ splitmix64(&mut t);
    splitmix64(&mut state)
}

/// `count` i.i.d. draws from `spec`, deterministic in `key`.
pub fn sample_row(spec: &WeightSpec, key: StreamKey, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(LppError::InvalidParameter("count must be at least 1".into()));
    }
    let mut out = vec![0.0; count];
    spec.fill(&mut key.rng(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<WeightSpec> {
        vec![
            WeightSpec::exponential(1.5).unwrap(),
            WeightSpec::geometric(0.3).unwrap(),
            WeightSpec::bernoulli(-1.0, 1.0, 0.5).unwrap(),
            WeightSpec::uniform(0.0, 1.0).unwrap(),
            WeightSpec::gaussian(0.5, 2.0).unwrap(),
            WeightSpec::pareto(1.0, 4.5).unwrap(),
        ]
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn bernoulli_support() {
        let spec = WeightSpec::bernoulli(-1.0, 1.0, 0.5).unwrap();
        let xs = sample_row(&spec, StreamKey::new(9, 3, 1), 4).unwrap();
        assert_eq!(xs.len(), 4);
        assert!(xs.iter().all(|&x| x == -1.0 || x == 1.0));
    }

    #[test]
    fn exponential_sample_mean() {
        let spec = WeightSpec::exponential(1.0).unwrap();
        let xs = sample_row(&spec, StreamKey::new(1, 0, 1), 1_000_000).unwrap();
        let (m, _) = mean_var(&xs);
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
    }

    #[test]
    fn sampling_is_deterministic_in_key() {
        let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
        let key = StreamKey::new(77, 5, 2);
        assert_eq!(
            sample_row(&spec, key, 100).unwrap(),
            sample_row(&spec, key, 100).unwrap()
        );
        assert_ne!(
            sample_row(&spec, key, 100).unwrap(),
            sample_row(&spec, key.with_row(3), 100).unwrap()
        );
    }

    #[test]
    fn zero_count_rejected() {
        let spec = WeightSpec::uniform(0.0, 1.0).unwrap();
        assert!(sample_row(&spec, StreamKey::new(1, 0, 1), 0).is_err());
    }

    #[test]
    fn invalid_params_rejected_at_construction() {
        assert!(WeightSpec::exponential(0.0).is_err());
        assert!(WeightSpec::exponential(-1.0).is_err());
        assert!(WeightSpec::geometric(1.0).is_err());
        assert!(WeightSpec::uniform(1.0, 1.0).is_err());
        assert!(WeightSpec::gaussian(0.0, 0.0).is_err());
        assert!(WeightSpec::pareto(1.0, 2.0).is_err());
        assert!(WeightSpec::bernoulli(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn analytic_moments() {
        let e = WeightSpec::exponential(2.0).unwrap();
        assert_eq!((e.mu(), e.sigma2()), (0.5, 0.25));
        let g = WeightSpec::geometric(0.5).unwrap();
        assert_eq!((g.mu(), g.sigma2()), (2.0, 2.0));
        let b = WeightSpec::bernoulli(-1.0, 1.0, 0.5).unwrap();
        assert_eq!((b.mu(), b.sigma2()), (0.0, 1.0));
        let u = WeightSpec::uniform(0.0, 1.0).unwrap();
        assert!((u.sigma2() - 1.0 / 12.0).abs() < 1e-15);
        let p = WeightSpec::pareto(1.0, 3.0).unwrap();
        assert!((p.mu() - 1.5).abs() < 1e-15);
        assert!((p.sigma2() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn p_index_per_family() {
        for spec in all_families() {
            match spec.family() {
                Family::Pareto { alpha, .. } => {
                    assert!(spec.p_index() < alpha);
                    assert!(spec.p_index() > alpha - 1e-12);
                }
                _ => assert_eq!(spec.p_index(), f64::INFINITY),
            }
        }
    }

    #[test]
    fn empirical_moments_within_five_standard_errors() {
        const N: usize = 1_000_000;
        for (i, spec) in all_families().into_iter().enumerate() {
            let xs = sample_row(&spec, StreamKey::new(2024, i as u64, 1), N).unwrap();
            let (m, v) = mean_var(&xs);
            let se_mean = (spec.sigma2() / N as f64).sqrt();
            assert!(
                (m - spec.mu()).abs() < 5.0 * se_mean,
                "{spec}: mean {m} vs {}",
                spec.mu()
            );
            // standard error of the sample variance from the sample fourth moment
            let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / N as f64;
            let se_var = ((m4 - v * v) / N as f64).sqrt();
            assert!(
                (v - spec.sigma2()).abs() < 5.0 * se_var,
                "{spec}: var {v} vs {}",
                spec.sigma2()
            );
        }
    }

    #[test]
    fn standardize_examples() {
        let e = WeightSpec::exponential(1.0).unwrap().standardize().unwrap();
        assert_eq!((e.mu(), e.sigma2()), (0.0, 1.0));
        assert!(matches!(e.family(), Family::Exponential { .. }));
        assert_eq!(e.p_index(), f64::INFINITY);

        let g = WeightSpec::gaussian(0.0, 1.0).unwrap();
        assert_eq!(g.standardize().unwrap(), g);

        let u = WeightSpec::uniform(0.0, 1.0).unwrap().standardize().unwrap();
        assert_eq!((u.mu(), u.sigma2()), (0.0, 1.0));
        let xs = sample_row(&u, StreamKey::new(5, 0, 1), 1_000_000).unwrap();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "var {v}");

        let p = WeightSpec::pareto(1.0, 5.0).unwrap();
        assert_eq!(p.standardize().unwrap().p_index(), p.p_index());
    }

    #[test]
    fn quantile_examples() {
        let e = WeightSpec::exponential(1.0).unwrap();
        let u = 1.0 - (-1.0f64).exp();
        assert!((e.quantile(u).unwrap() - 1.0).abs() < 1e-14);
        let g = WeightSpec::gaussian(0.0, 1.0).unwrap();
        assert!(g.quantile(0.5).unwrap().abs() < 1e-15);
        let geo = WeightSpec::geometric(0.5).unwrap();
        assert_eq!(geo.quantile(0.6).unwrap(), 2.0);
    }

    #[test]
    fn geometric_quantile_matches_cdf_enumeration() {
        // inf{m : F(m) >= u} from the explicit step CDF
        let q = 0.5;
        let geo = WeightSpec::geometric(q).unwrap();
        let steps: Vec<f64> = (1..=60).map(|m| 1.0 - (1.0 - q as f64).powi(m)).collect();
        for &u in &[0.01, 0.25, 0.5, 0.5000001, 0.6, 0.75, 0.76, 0.9, 0.99, 0.999] {
            let expected = steps.iter().position(|&f| f >= u).unwrap() as f64 + 1.0;
            assert_eq!(geo.quantile(u).unwrap(), expected, "u = {u}");
        }
    }

    #[test]
    fn quantile_domain_errors() {
        let e = WeightSpec::exponential(1.0).unwrap();
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(e.quantile(u).is_err(), "u = {u}");
        }
    }

    #[test]
    fn quantile_inverts_cdf_for_continuous_families() {
        for spec in all_families().into_iter().filter(|s| s.family().is_continuous()) {
            let lo = spec.quantile(1e-6).unwrap();
            let hi = spec.quantile(1.0 - 1e-6).unwrap();
            for i in 1..50 {
                let x = lo + (hi - lo) * i as f64 / 50.0;
                let u = spec.cdf(x);
                let back = spec.quantile(u).unwrap();
                assert!(
                    (back - x).abs() <= 1e-10 * x.abs().max(1.0),
                    "{spec}: x={x} back={back}"
                );
            }
        }
    }

    #[test]
    fn quantile_is_monotone() {
        for spec in all_families() {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..1000 {
                let x = spec.quantile(i as f64 / 1000.0).unwrap();
                assert!(x >= prev, "{spec}");
                prev = x;
            }
        }
    }

    #[test]
    fn quantile_of_normal_tails_are_finite() {
        let e = WeightSpec::exponential(1.0).unwrap();
        let (x, clamped) = e.quantile_of_normal(40.0);
        assert!(x.is_finite() && clamped);
        let (x, clamped) = e.quantile_of_normal(8.0);
        // upper tail carried through erfc, not 1 - Φ
        assert!(!clamped);
        let expected = -normal_cdf(-8.0).ln();
        assert!((x - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn adjacent_rows_are_uncorrelated() {
        let spec = WeightSpec::gaussian(0.0, 1.0).unwrap();
        let key = StreamKey::new(11, 4, 1);
        let a = sample_row(&spec, key, 100_000).unwrap();
        let b = sample_row(&spec, key.with_row(2), 100_000).unwrap();
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn fragment_round_trip() {
        for spec in all_families() {
            let text = spec.to_string();
            let back: WeightSpec = text.parse().unwrap();
            assert_eq!(back, spec, "{text}");
            let std = spec.standardize().unwrap();
            let back: WeightSpec = std.to_string().parse().unwrap();
            assert_eq!(back.family(), std.family());
            assert!((back.mu()).abs() < 1e-12);
        }
        let s: WeightSpec = "family=exponential, rate=1.0".parse().unwrap();
        assert_eq!(s, WeightSpec::exponential(1.0).unwrap());
        assert!("family=exponential, speed=1".parse::<WeightSpec>().is_err());
        assert!("family=cauchy".parse::<WeightSpec>().is_err());
        assert!("rate=1".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn toml_table_round_trip() {
        let spec = WeightSpec::bernoulli(-1.0, 1.0, 0.25).unwrap();
        let text = toml::to_string(&spec).unwrap();
        let back: WeightSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
