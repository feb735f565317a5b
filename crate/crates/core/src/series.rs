//! Benchmark series: Mackey-Glass (fixed-step RK4 on a fine grid), the
//! Henon map, and the far-infrared laser recording loaded from disk.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    MG17,
    MG30,
    FIRLaser,
    Henon,
    Synthetic,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::MG17 => "MG17",
            Source::MG30 => "MG30",
            Source::FIRLaser => "FIRLaser",
            Source::Henon => "Henon",
            Source::Synthetic => "Synthetic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mg17" => Ok(Source::MG17),
            "mg30" => Ok(Source::MG30),
            "firlaser" | "fir" | "laser" => Ok(Source::FIRLaser),
            "henon" => Ok(Source::Henon),
            "synthetic" => Ok(Source::Synthetic),
            _ => Err(Error::InvalidArgument(format!("unknown series source '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    /// Sampling interval in seconds. Informational.
    pub dt: f64,
    pub source: Source,
    pub scaled: bool,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64, source: Source) -> Self {
        TimeSeries {
            values,
            dt,
            source,
            scaled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub tau: f64,
    pub sample_dt: f64,
    /// Internal RK4 step.
    pub h: f64,
    pub transient_discard: usize,
    pub length: usize,
    /// Value of the constant initial history on [−τ, 0].
    pub history: f64,
    /// Half-width of a uniform perturbation added to each history point.
    /// Zero gives a seed-independent series.
    pub history_jitter: f64,
}

impl MgConfig {
    pub fn with_tau(tau: f64, length: usize) -> Self {
        MgConfig {
            a: 0.2,
            b: 0.1,
            c: 10.0,
            tau,
            sample_dt: 6.0,
            h: 0.1,
            transient_discard: 1000,
            length,
            history: 1.2,
            history_jitter: 0.0,
        }
    }

    pub fn mg17(length: usize) -> Self {
        Self::with_tau(17.0, length)
    }

    pub fn mg30(length: usize) -> Self {
        Self::with_tau(30.0, length)
    }

    fn ratio(num: f64, den: f64, what: &str) -> Result<usize> {
        let r = num / den;
        let n = r.round();
        if !(den > 0.0) || !r.is_finite() || (r - n).abs() > 1e-9 * r.abs().max(1.0) || n < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{what} = {num}/{den} is not an integer"
            )));
        }
        Ok(n as usize)
    }

    /// Delay and sampling interval in internal steps.
    pub fn grid(&self) -> Result<(usize, usize)> {
        let lag = Self::ratio(self.tau, self.h, "tau/h")?;
        let stride = Self::ratio(self.sample_dt, self.h, "sample_dt/h")?;
        if stride == 0 {
            return Err(Error::InvalidArgument("sample_dt must be positive".into()));
        }
        Ok((lag, stride))
    }

    fn source(&self) -> Source {
        if self.tau == 17.0 {
            Source::MG17
        } else if self.tau == 30.0 {
            Source::MG30
        } else {
            Source::Synthetic
        }
    }
}

/// Integrates `ẋ = a x(t−τ)/(1 + x(t−τ)^c) − b x(t)` with RK4 on the
/// `h`-grid. The delayed argument at the half step is the mean of the two
/// neighbouring grid values. Returns samples taken every `sample_dt` after
/// dropping `transient_discard` of them; sample `j` sits at
/// `t = (transient_discard + j + 1)·sample_dt`.
pub fn gen_mackey_glass(cfg: &MgConfig, seed: u64) -> Result<TimeSeries> {
    let (lag, stride) = cfg.grid()?;
    let total = (cfg.transient_discard + cfg.length) * stride;
    let mut x = Vec::with_capacity(lag + total + 1);
    if cfg.history_jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = cfg.history_jitter;
        x.extend((0..=lag).map(|_| cfg.history + rng.random_range(-j..=j)));
    } else {
        x.resize(lag + 1, cfg.history);
    }

    let (a, b, c, h) = (cfg.a, cfg.b, cfg.c, cfg.h);
    let rhs = |x: f64, xd: f64| a * xd / (1.0 + xd.powf(c)) - b * x;
    let mut out = Vec::with_capacity(cfg.length);
    for step in 0..total {
        let k = lag + step;
        let now = x[k];
        let d0 = x[k - lag];
        let d2 = x[k - lag + 1];
        let d1 = 0.5 * (d0 + d2);
        let k1 = rhs(now, d0);
        let k2 = rhs(now + 0.5 * h * k1, d1);
        let k3 = rhs(now + 0.5 * h * k2, d1);
        let k4 = rhs(now + h * k3, d2);
        let next = now + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::NonFinite { step: step + 1 });
        }
        x.push(next);
        if (step + 1) % stride == 0 && (step + 1) / stride > cfg.transient_discard {
            out.push(next);
        }
    }
    Ok(TimeSeries::new(out, cfg.sample_dt, cfg.source()))
}

/// Iterates `x ← 1 − a x² + y`, `y ← b x` from `(x0, y0)`, drops
/// `transient` iterates and returns the next `n` values of `x`.
pub fn gen_henon(a: f64, b: f64, n: usize, transient: usize, x0: f64, y0: f64) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let (mut x, mut y) = (x0, y0);
    let mut out = Vec::with_capacity(n);
    for i in 0..transient + n {
        (x, y) = (1.0 - a * x * x + y, b * x);
        if !(x.abs() <= 1e6) {
            return Err(Error::Diverged { step: i + 1 });
        }
        if i >= transient {
            out.push(x);
        }
    }
    Ok(TimeSeries::new(out, 1.0, Source::Henon))
}

/// Standard parameters: a = 1.4, b = 0.3, seed (0, 0), 1000-step transient.
pub fn henon_default(n: usize) -> Result<TimeSeries> {
    gen_henon(1.4, 0.3, n, 1000, 0.0, 0.0)
}

/// One integer sample per line. Blank lines are skipped.
pub fn load_fir_laser(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v: i64 = s.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected an integer sample, found '{s}'"),
        })?;
        values.push(v as f64);
    }
    Ok(TimeSeries::new(values, 1.0, Source::FIRLaser))
}

/// Affine map onto [−1, 1]. Extremes land exactly on ±1.
pub fn scale_to_unit(series: &TimeSeries) -> Result<TimeSeries> {
    let (lo, hi) = (series.min(), series.max());
    if series.is_empty() || !(hi > lo) {
        return Err(Error::ConstantSeries);
    }
    let span = hi - lo;
    let values = series
        .values
        .iter()
        .map(|&v| {
            if v == lo {
                -1.0
            } else if v == hi {
                1.0
            } else {
                2.0 * (v - lo) / span - 1.0
            }
        })
        .collect();
    Ok(TimeSeries {
        values,
        scaled: true,
        ..series.clone()
    })
}

/// Writes `index,value` rows. Values use the shortest representation that
/// parses back to the same bits.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "value"])?;
    for (i, v) in series.values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:?}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads an `index,value` file, or a header-less single column.
pub fn read_csv(path: impl AsRef<Path>, source: Source) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = match rec.len() {
            0 => continue,
            1 => &rec[0],
            _ => &rec[1],
        };
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("not a number: '{field}'"),
                })
            }
        }
    }
    Ok(TimeSeries::new(values, 1.0, source))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn henon_zero_parameters() {
        let s = gen_henon(0.0, 0.0, 5, 0, 0.0, 0.0).unwrap();
        assert_eq!(s.values, vec![1.0; 5]);
    }

    #[test]
    fn henon_stays_on_attractor_and_replays() {
        let s = gen_henon(1.4, 0.3, 10_000, 0, 0.0, 0.0).unwrap();
        assert!(s.values.iter().all(|v| v.abs() <= 1.5));
        // y_t = b x_{t−1}, so x_{t+1} = 1 − a x_t² + b x_{t−1}
        for w in s.values.windows(3) {
            assert_eq!(w[2], 1.0 - 1.4 * w[1] * w[1] + 0.3 * w[0]);
        }
    }

    #[test]
    fn henon_off_attractor_diverges() {
        assert!(matches!(
            gen_henon(1.4, 0.3, 100, 0, 10.0, 0.0),
            Err(Error::Diverged { .. })
        ));
        assert!(gen_henon(1.4, 0.3, 0, 0, 0.0, 0.0).is_err());
    }

    #[test]
    fn mg_fixed_point() {
        let mut cfg = MgConfig::mg17(200);
        cfg.history = 1.0;
        cfg.transient_discard = 10;
        let s = gen_mackey_glass(&cfg, 0).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn mg_linear_decay() {
        let mut cfg = MgConfig::mg30(50);
        cfg.a = 0.0;
        cfg.transient_discard = 0;
        let s = gen_mackey_glass(&cfg, 0).unwrap();
        for (j, v) in s.values.iter().enumerate() {
            let t = (j + 1) as f64 * cfg.sample_dt;
            let exact = 1.2 * (-cfg.b * t).exp();
            assert!((v - exact).abs() <= 1e-6 * exact);
        }
    }

    #[test]
    fn mg_rejects_misaligned_grid() {
        let mut cfg = MgConfig::mg17(10);
        cfg.h = 0.3;
        assert!(gen_mackey_glass(&cfg, 0).is_err());
        let mut cfg = MgConfig::mg17(10);
        cfg.history = 1e300;
        cfg.b = 1e10;
        assert!(matches!(gen_mackey_glass(&cfg, 0), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn mg_jitter_depends_on_seed_only_when_enabled() {
        let cfg = MgConfig::mg17(30);
        assert_eq!(gen_mackey_glass(&cfg, 1).unwrap(), gen_mackey_glass(&cfg, 2).unwrap());
        let mut j = cfg;
        j.history_jitter = 0.05;
        assert_ne!(gen_mackey_glass(&j, 1).unwrap(), gen_mackey_glass(&j, 2).unwrap());
        assert_eq!(gen_mackey_glass(&j, 3).unwrap(), gen_mackey_glass(&j, 3).unwrap());
    }

    #[test]
    fn scaling() {
        let s = TimeSeries::new(vec![0.0, 10.0], 1.0, Source::Synthetic);
        assert_eq!(scale_to_unit(&s).unwrap().values, vec![-1.0, 1.0]);
        let s = TimeSeries::new(vec![-1.0, 0.25, 1.0, -0.5], 1.0, Source::Synthetic);
        assert_eq!(scale_to_unit(&s).unwrap().values, s.values);
        let c = TimeSeries::new(vec![3.0; 4], 1.0, Source::Synthetic);
        assert!(matches!(scale_to_unit(&c), Err(Error::ConstantSeries)));
    }

    #[test]
    fn source_names_round_trip() {
        for s in [
            Source::MG17,
            Source::MG30,
            Source::FIRLaser,
            Source::Henon,
            Source::Synthetic,
        ] {
            assert_eq!(s.name().parse::<Source>().unwrap(), s);
        }
        assert_eq!("mg-30".parse::<Source>().unwrap(), Source::MG30);
        assert!("lorenz".parse::<Source>().is_err());
    }
}
