//! Experiment configuration: one experiment per TOML file.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LppError, Result};
use crate::lattice::floor_pow;
use crate::weights::{Family, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Theorem1,
    Diagonal,
    ExponentChi,
    TransverseXi,
    Coupling,
    /// The `theorem1` statistic on the affinely standardized law `(ω − μ)/σ`, so
    /// samples from different families are comparable at finite `n`.
    Universality,
    GueCheck,
    ShapeFunction,
    WishartProbe,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Theorem1 => "theorem1",
            Kind::Diagonal => "diagonal",
            Kind::ExponentChi => "exponent_chi",
            Kind::TransverseXi => "transverse_xi",
            Kind::Coupling => "coupling",
            Kind::Universality => "universality",
            Kind::GueCheck => "gue_check",
            Kind::ShapeFunction => "shape_function",
            Kind::WishartProbe => "wishart_probe",
        }
    }

    /// Kinds whose lattice has `⌊n^a⌋` rows.
    pub fn uses_a(self) -> bool {
        matches!(
            self,
            Kind::Theorem1 | Kind::ExponentChi | Kind::TransverseXi | Kind::Coupling | Kind::Universality
        )
    }

    /// Per-replica statistic columns, after the shared leading columns.
    pub fn stat_columns(self) -> &'static [&'static str] {
        match self {
            Kind::Theorem1 | Kind::ExponentChi | Kind::Universality => &["T", "scaled"],
            Kind::TransverseXi => &["T", "scaled", "v_mid"],
            Kind::Diagonal => &["T"],
            Kind::Coupling => &["T", "L", "diff", "scaled_diff", "v_max", "w_max", "clamps"],
            Kind::GueCheck => &["lambda_max", "scaled"],
            Kind::ShapeFunction => &["x", "T", "T_over_n"],
            Kind::WishartProbe => &["lambda_max"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_REPLICAS: u64 = 2000;
pub const DEFAULT_MAX_MEMORY: u64 = 4 << 30;
pub const DEFAULT_MAX_SECONDS: f64 = 24.0 * 3600.0;
pub const DEFAULT_COUPLING_DELTA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default = "default_max_memory")]
    pub max_memory_bytes: u64,
    #[serde(default = "default_max_seconds")]
    pub max_seconds: f64,
}

fn default_max_memory() -> u64 {
    DEFAULT_MAX_MEMORY
}
fn default_max_seconds() -> f64 {
    DEFAULT_MAX_SECONDS
}
fn default_replicas() -> u64 {
    DEFAULT_REPLICAS
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_memory_bytes: DEFAULT_MAX_MEMORY,
            max_seconds: DEFAULT_MAX_SECONDS,
        }
    }
}

/// Declarative run description. Fields that only some kinds use are optional
/// in the file; [`ExperimentConfig::resolve`] fills their defaults so the
/// written record echoes every value that influenced the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub master_seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<u64>,
    /// Matrix orders for `gue_check`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_grid: Vec<u64>,
    /// Aspect ratios `x` for `shape_function`, rows `⌊x·n⌋`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_grid: Vec<f64>,
    /// Row count of the `wishart_probe` matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    /// Brownian mesh step for `coupling`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub budget: Budget,
    pub family: WeightSpec,
}

/// One grid point of a run: the lattice (or matrix) size for a block of replicas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: u64,
    pub k: u64,
    /// Aspect ratio for shape runs.
    pub x: Option<f64>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LppError::Parse(format!("config: {e}")))?;
        cfg.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LppError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validate and fill kind-specific defaults.
    pub fn resolve(mut self) -> Result<Self> {
        if self.replicas == 0 {
            return Err(LppError::InvalidParameter("replicas must be at least 1".into()));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(LppError::InvalidParameter("master_seed must fit in 63 bits".into()));
        }
        if self.kind.uses_a() {
            match self.a {
                Some(a) if a > 0.0 && a < 1.0 => {}
                Some(a) => {
                    return Err(LppError::OutOfDomain {
                        name: "a",
                        value: a,
                        domain: "(0, 1)",
                    })
                }
                None => {
                    return Err(LppError::InvalidParameter(format!(
                        "kind {} needs `a`",
                        self.kind
                    )))
                }
            }
        } else if self.a.is_some() {
            return Err(LppError::InvalidParameter(format!("kind {} takes no `a`", self.kind)));
        }
        match self.kind {
            Kind::GueCheck => {
                if self.k_grid.is_empty() || self.k_grid.contains(&0) {
                    return Err(LppError::InvalidParameter("gue_check needs a k_grid of positive orders".into()));
                }
                if !self.n_grid.is_empty() {
                    return Err(LppError::InvalidParameter("gue_check uses k_grid, not n_grid".into()));
                }
            }
            _ => {
                if self.n_grid.is_empty() || self.n_grid.contains(&0) {
                    return Err(LppError::InvalidParameter("n_grid must list positive sizes".into()));
                }
            }
        }
        if self.kind == Kind::ShapeFunction {
            if self.x_grid.is_empty() || self.x_grid.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(LppError::InvalidParameter("x_grid must lie in (0, 1]".into()));
            }
        } else if !self.x_grid.is_empty() {
            return Err(LppError::InvalidParameter("x_grid is only used by shape_function".into()));
        }
        if self.kind == Kind::WishartProbe {
            let k = self.k.ok_or_else(|| LppError::InvalidParameter("wishart_probe needs `k`".into()))?;
            if k == 0 || k > 200 {
                return Err(LppError::InvalidParameter(format!("wishart k = {k} outside [1, 200]")));
            }
            if let Some(&n) = self.n_grid.iter().find(|&&n| n > 2000) {
                return Err(LppError::InvalidParameter(format!("wishart n = {n} above 2000")));
            }
        } else if self.k.is_some() {
            return Err(LppError::InvalidParameter("`k` is only used by wishart_probe".into()));
        }
        if self.kind == Kind::Coupling {
            let d = *self.delta.get_or_insert(DEFAULT_COUPLING_DELTA);
            crate::coupling::refine_for_delta(d)?;
            self.family.standardize()?;
        } else if self.delta.is_some() {
            return Err(LppError::InvalidParameter("`delta` is only used by coupling".into()));
        }
        Ok(self)
    }

    /// Grid points in run order. Seeds are separated by size and by family
    /// so runs that differ only in the weight law use independent streams.
    pub fn grid(&self) -> Vec<GridPoint> {
        let fam = family_tag(&self.family);
        let seed_for = |tag: u64| crate::weights::derive_seed(crate::weights::derive_seed(self.master_seed, tag), fam);
        match self.kind {
            Kind::GueCheck => self
                .k_grid
                .iter()
                .map(|&k| GridPoint {
                    n: 1,
                    k,
                    x: None,
                    seed: seed_for(k),
                })
                .collect(),
            Kind::ShapeFunction => self
                .n_grid
                .iter()
                .flat_map(|&n| {
                    self.x_grid.iter().enumerate().map(move |(xi, &x)| (n, xi, x))
                })
                .map(|(n, xi, x)| GridPoint {
                    n,
                    k: ((x * n as f64 + 1e-9).floor() as u64).max(1),
                    x: Some(x),
                    seed: crate::weights::derive_seed(seed_for(n), xi as u64 + 1),
                })
                .collect(),
            Kind::Diagonal => self
                .n_grid
                .iter()
                .map(|&n| GridPoint {
                    n,
                    k: n,
                    x: None,
                    seed: seed_for(n),
                })
                .collect(),
            Kind::WishartProbe => {
                let k = self.k.expect("resolved");
                self.n_grid
                    .iter()
                    .map(|&n| GridPoint {
                        n,
                        k,
                        x: None,
                        seed: seed_for(n),
                    })
                    .collect()
            }
            _ => {
                let a = self.a.expect("resolved");
                self.n_grid
                    .iter()
                    .map(|&n| GridPoint {
                        n,
                        k: floor_pow(n, a).max(1),
                        x: None,
                        seed: seed_for(n),
                    })
                    .collect()
            }
        }
    }

    /// Warnings recorded with the run (the run still proceeds).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if matches!(self.kind, Kind::Theorem1 | Kind::Universality) {
            if let (Family::Pareto { .. }, Some(a)) = (self.family.family(), self.a) {
                let p = self.family.p_index();
                let limit = 6.0 / 7.0 * (0.5 - 1.0 / p);
                if a >= limit {
                    out.push(format!(
                        "a = {a} is outside the proven range a < (6/7)(1/2 - 1/p) = {limit:.6} for p = {p}"
                    ));
                }
            }
        }
        if self.replicas < 2 && self.kind != Kind::ShapeFunction {
            out.push("fewer than 2 replicas: distribution summaries are skipped".into());
        }
        out
    }
}

/// FNV-1a of the family name, for seed separation.
fn family_tag(spec: &WeightSpec) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in spec.family().name().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
