use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costs::Regime;
use crate::error::{Error, Result};
use crate::series::Source;

/// Largest `T` and restart count the cell-seed packing can hold.
pub const MAX_LENGTH: usize = (1 << 28) - 1;
pub const MAX_RESTARTS: usize = (1 << 28) - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problems: Vec<Source>,
    pub lengths: Vec<usize>,
    pub restarts: usize,
    pub regimes: Vec<Regime>,
    pub d_u: usize,
    pub eps: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub master_seed: u64,
    pub fir_path: Option<PathBuf>,
    /// Samples generated per problem before scaling; cells use a prefix.
    pub series_length: usize,
    /// Offset into the scaled laser recording.
    pub fir_window_start: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problems: vec![Source::MG17, Source::MG30, Source::Henon],
            lengths: (1..=10).map(|k| 10 * k).collect(),
            restarts: 20,
            regimes: Regime::ALL.to_vec(),
            d_u: 4,
            eps: 0.05,
            max_iters: 50,
            tol: 1e-6,
            master_seed: 0,
            fir_path: None,
            series_length: 1200,
            fir_window_start: 0,
        }
    }
}

fn list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot parse '{s}'")))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.problems.is_empty() || self.regimes.is_empty() || self.lengths.is_empty() {
            return bad("problems, regimes and lengths must be nonempty".into());
        }
        if self.problems.contains(&Source::Synthetic) {
            return bad("Synthetic is not an experiment problem".into());
        }
        if let Some(&t) = self.lengths.iter().find(|&&t| !(2..=MAX_LENGTH).contains(&t)) {
            return bad(format!("length {t} out of range"));
        }
        if self.restarts == 0 || self.restarts > MAX_RESTARTS {
            return bad(format!("restarts must be in 1..={MAX_RESTARTS}"));
        }
        if self.d_u == 0 || self.max_iters == 0 {
            return bad("d_u and max_iters must be positive".into());
        }
        if !(self.eps >= 0.0) || !(self.tol >= 0.0) {
            return bad("eps and tol must be nonnegative".into());
        }
        let longest = self.lengths.iter().max().copied().unwrap_or(0);
        if self.series_length < longest + 1 {
            return bad(format!(
                "series_length {} too short for T = {longest}",
                self.series_length
            ));
        }
        if self.problems.contains(&Source::FIRLaser) && self.fir_path.is_none() {
            return bad("FIRLaser selected but fir_path is not set".into());
        }
        Ok(())
    }

    /// Parses `key = value` lines. `#` starts a comment; lists are
    /// comma-separated. Unset keys keep their defaults.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let set = |cfg: &mut ExperimentConfig| -> Result<()> {
                match key {
                    "problems" => cfg.problems = list(value, str::parse)?,
                    "lengths" => cfg.lengths = list(value, number)?,
                    "restarts" => cfg.restarts = number(value)?,
                    "regimes" => cfg.regimes = list(value, str::parse)?,
                    "d_u" => cfg.d_u = number(value)?,
                    "eps" => cfg.eps = number(value)?,
                    "max_iters" => cfg.max_iters = number(value)?,
                    "tol" => cfg.tol = number(value)?,
                    "master_seed" => cfg.master_seed = number(value)?,
                    "fir_path" => cfg.fir_path = (!value.is_empty()).then(|| PathBuf::from(value)),
                    "series_length" => cfg.series_length = number(value)?,
                    "fir_window_start" => cfg.fir_window_start = number(value)?,
                    _ => return Err(Error::InvalidArgument(format!("unknown key '{key}'"))),
                }
                Ok(())
            };
            set(&mut cfg).map_err(|e| err(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Inverse of [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut s = String::new();
        let _ = writeln!(
            s,
            "problems = {}",
            join(self.problems.iter().map(|p| p.to_string()).collect())
        );
        let _ = writeln!(
            s,
            "lengths = {}",
            join(self.lengths.iter().map(|t| t.to_string()).collect())
        );
        let _ = writeln!(s, "restarts = {}", self.restarts);
        let _ = writeln!(
            s,
            "regimes = {}",
            join(self.regimes.iter().map(|r| r.to_string()).collect())
        );
        let _ = writeln!(s, "d_u = {}", self.d_u);
        let _ = writeln!(s, "eps = {:?}", self.eps);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        if let Some(p) = &self.fir_path {
            let _ = writeln!(s, "fir_path = {}", p.display());
        }
        let _ = writeln!(s, "series_length = {}", self.series_length);
        let _ = writeln!(s, "fir_window_start = {}", self.fir_window_start);
        s
    }
}
