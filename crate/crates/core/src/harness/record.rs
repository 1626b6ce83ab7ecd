//! Per-replica record files: a `#` header block (format tag, creation time,
//! resolved config, status, warnings), a column line, then one row per replica
//! ordered by grid point and replica index.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{LppError, Result};
use crate::harness::config::{ExperimentConfig, GridPoint, Kind};

pub const FORMAT_TAG: &str = "# lpplab record v1";
pub const CREATED_PREFIX: &str = "# created: ";
pub const CONFIG_PREFIX: &str = "# config: ";
pub const STATUS_PREFIX: &str = "# status: ";
pub const WARNING_PREFIX: &str = "# warning: ";
pub const BASE_COLUMNS: [&str; 6] = ["replica", "n", "k", "a", "family", "seed"];

/// Statistics of one replica at one grid point.
pub type Rows = BTreeMap<(usize, u64), Vec<f64>>;

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub grid: Vec<GridPoint>,
    pub rows: Rows,
    pub warnings: Vec<String>,
}

impl ExperimentRecord {
    pub fn total(&self) -> usize {
        self.grid.len() * self.config.replicas as usize
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.total()
    }

    pub fn columns(&self) -> Vec<&'static str> {
        BASE_COLUMNS
            .iter()
            .chain(self.config.kind.stat_columns())
            .copied()
            .collect()
    }

    /// Column line plus rows; this is the part that must be reproducible.
    pub fn body(&self) -> String {
        let mut out = self.columns().join(",");
        out.push('\n');
        let a = self.config.a.map(|a| a.to_string()).unwrap_or_default();
        let family = self.config.family.family().name();
        for (&(gi, replica), stats) in &self.rows {
            let gp = &self.grid[gi];
            let _ = write!(out, "{replica},{},{},{a},{family},{}", gp.n, gp.k, gp.seed);
            for v in stats {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn header(&self, created: &str) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_TAG);
        out.push('\n');
        let _ = writeln!(out, "{CREATED_PREFIX}{created}");
        for line in self.config.to_toml().lines() {
            let _ = writeln!(out, "{CONFIG_PREFIX}{line}");
        }
        if self.is_complete() {
            let _ = writeln!(out, "{STATUS_PREFIX}complete");
        } else {
            let _ = writeln!(out, "{STATUS_PREFIX}incomplete {}/{}", self.rows.len(), self.total());
        }
        for w in &self.warnings {
            let _ = writeln!(out, "{WARNING_PREFIX}{w}");
        }
        out
    }

    pub fn to_csv(&self, created: &str) -> String {
        self.header(created) + &self.body()
    }
}

/// A record file read back for analysis.
#[derive(Debug, Clone)]
pub struct ParsedRecord {
    pub path: PathBuf,
    pub config: Option<ExperimentConfig>,
    pub complete: bool,
    pub warnings: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedRecord {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LppError::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let schema = |column: &str, detail: String| LppError::Schema {
            file: path.to_path_buf(),
            column: column.to_string(),
            detail,
        };
        let mut config_text = String::new();
        let mut complete = false;
        let mut warnings = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix(CONFIG_PREFIX) {
                config_text.push_str(rest);
                config_text.push('\n');
            } else if let Some(rest) = line.strip_prefix(STATUS_PREFIX) {
                complete = rest.trim() == "complete";
            } else if let Some(rest) = line.strip_prefix(WARNING_PREFIX) {
                warnings.push(rest.to_string());
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else if let Some(cols) = &columns {
                let fields: Vec<String> = line.split(',').map(str::to_string).collect();
                if fields.len() != cols.len() {
                    return Err(schema(
                        "*",
                        format!("line {} has {} fields, expected {}", lineno + 1, fields.len(), cols.len()),
                    ));
                }
                rows.push(fields);
            } else {
                columns = Some(line.split(',').map(|c| c.trim().to_string()).collect());
            }
        }
        let columns = columns.ok_or_else(|| schema("*", "no column line".into()))?;
        for base in BASE_COLUMNS {
            if !columns.iter().any(|c| c == base) {
                return Err(schema(base, "required column missing".into()));
            }
        }
        let config = if config_text.is_empty() {
            None
        } else {
            let cfg: ExperimentConfig = toml::from_str(&config_text)
                .map_err(|e| schema("# config", format!("embedded config does not parse: {e}")))?;
            Some(cfg)
        };
        if let Some(cfg) = &config {
            for c in cfg.kind.stat_columns() {
                if !columns.iter().any(|x| x == c) {
                    return Err(schema(c, format!("required by kind {}", cfg.kind)));
                }
            }
        }
        Ok(ParsedRecord {
            path: path.to_path_buf(),
            config,
            complete,
            warnings,
            columns,
            rows,
        })
    }

    pub fn kind(&self) -> Option<Kind> {
        self.config.as_ref().map(|c| c.kind)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| LppError::Schema {
            file: self.path.clone(),
            column: name.to_string(),
            detail: "column missing".into(),
        })
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i].parse::<f64>().map_err(|_| LppError::Schema {
                    file: self.path.clone(),
                    column: name.to_string(),
                    detail: format!("row {} value {:?} is not a number", r + 1, row[i]),
                })
            })
            .collect()
    }

    pub fn column_str(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Short label: file stem plus family.
    pub fn label(&self) -> String {
        let stem = self
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match self.column_str("family").ok().and_then(|f| f.first().map(|s| s.to_string())) {
            Some(f) => format!("{stem}[{f}]"),
            None => stem,
        }
    }

    /// Rows grouped by grid point `(n, k, x)` in first-seen order.
    pub fn groups(&self) -> Result<Vec<Group>> {
        let n = self.column_f64("n")?;
        let k = self.column_f64("k")?;
        let x = if self.has_column("x") {
            Some(self.column_f64("x")?)
        } else {
            None
        };
        let mut out: Vec<Group> = Vec::new();
        for r in 0..self.rows.len() {
            let key = (n[r], k[r], x.as_ref().map(|x| x[r]));
            match out.iter_mut().find(|g| (g.n, g.k, g.x) == key) {
                Some(g) => g.rows.push(r),
                None => out.push(Group {
                    n: key.0,
                    k: key.1,
                    x: key.2,
                    rows: vec![r],
                }),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub n: f64,
    pub k: f64,
    pub x: Option<f64>,
    pub rows: Vec<usize>,
}

impl Group {
    pub fn pick(&self, column: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&r| column[r]).collect()
    }
}

/// Record bytes with the creation line removed, for reproducibility checks.
pub fn strip_created(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(CREATED_PREFIX))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}
