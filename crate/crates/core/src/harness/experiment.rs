use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::costs::Regime;
use crate::error::{Error, Result};
use crate::lrnn::{predict_insample, train, LrnnModel, TrainOptions, TrainingProblem, TrainingState};
use crate::series::{self, MgConfig, Source, TimeSeries};
use crate::stats;

/// Magnitude below which an entry of F or U counts as zero.
pub const SPARSITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub final_cost: f64,
    /// Weighted ε-insensitive in-sample error.
    pub prediction_error: f64,
    pub nmrse: f64,
    pub iterations: usize,
    pub iters_to_1pct: usize,
    pub converged: bool,
    pub sparsity_f: f64,
    pub sparsity_u: f64,
    /// Full objective after every half-step.
    pub cost_trace: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub problem: Source,
    pub t: usize,
    pub regime: Regime,
    pub restart: usize,
    pub seed: u64,
    pub metrics: Option<CellMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub best: f64,
    pub worst: f64,
}

impl Summary {
    /// Population statistics; `best` is the minimum. `None` when empty.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let best = values.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // summation rounding can push the mean a hair outside [best, worst]
        let mean = (values.iter().sum::<f64>() / n).clamp(best, worst);
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Summary {
            mean,
            std: var.sqrt(),
            best,
            worst,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub problem: Source,
    pub t: usize,
    pub regime: Regime,
    pub runs: usize,
    pub failures: usize,
    pub final_cost: Option<Summary>,
    pub prediction_error: Option<Summary>,
    pub nmrse: Option<Summary>,
    pub iters_to_1pct: Option<Summary>,
    pub sparsity_f: Option<Summary>,
    pub sparsity_u: Option<Summary>,
}

impl Aggregate {
    pub fn from_records(problem: Source, t: usize, regime: Regime, records: &[&CellRecord]) -> Self {
        let ok: Vec<&CellMetrics> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let pick = |f: fn(&CellMetrics) -> f64| Summary::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        Aggregate {
            problem,
            t,
            regime,
            runs: records.len(),
            failures: records.len() - ok.len(),
            final_cost: pick(|m| m.final_cost),
            prediction_error: pick(|m| m.prediction_error),
            nmrse: pick(|m| m.nmrse),
            iters_to_1pct: pick(|m| m.iters_to_1pct as f64),
            sparsity_f: pick(|m| m.sparsity_f),
            sparsity_u: pick(|m| m.sparsity_u),
        }
    }
}

/// Scaled target window shared by all cells of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemTarget {
    pub problem: Source,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<CellRecord>,
    pub aggregates: Vec<Aggregate>,
    pub targets: Vec<ProblemTarget>,
}

impl ExperimentReport {
    /// Groups records by (problem, T, regime) in first-seen order.
    pub fn compute_aggregates(records: &[CellRecord]) -> Vec<Aggregate> {
        let mut keys: Vec<(Source, usize, Regime)> = Vec::new();
        for r in records {
            let k = (r.problem, r.t, r.regime);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(p, t, g)| {
                let group: Vec<&CellRecord> = records
                    .iter()
                    .filter(|r| r.problem == p && r.t == t && r.regime == g)
                    .collect();
                Aggregate::from_records(p, t, g, &group)
            })
            .collect()
    }

    pub fn aggregate(&self, problem: Source, t: usize, regime: Regime) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.problem == problem && a.t == t && a.regime == regime)
    }

    pub fn target(&self, problem: Source) -> Option<&[f64]> {
        self.targets
            .iter()
            .find(|p| p.problem == problem)
            .map(|p| p.values.as_slice())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn source_code(s: Source) -> u64 {
    match s {
        Source::MG17 => 0,
        Source::MG30 => 1,
        Source::FIRLaser => 2,
        Source::Henon => 3,
        Source::Synthetic => 4,
    }
}

/// Packs the cell key into disjoint bit fields and scrambles it with a
/// bijective mixer, so distinct cells never share a seed.
pub fn cell_seed(master: u64, problem: Source, t: usize, regime: Regime, restart: usize) -> u64 {
    let regime_code = match regime {
        Regime::Sparse => 0u64,
        Regime::Quadratic => 1,
    };
    let key = source_code(problem) << 60
        | regime_code << 56
        | ((t as u64) & 0xFFF_FFFF) << 28
        | (restart as u64) & 0xFFF_FFFF;
    splitmix64(key ^ master)
}

/// Scaled series for one problem, `cfg.series_length` samples long.
pub fn problem_series(cfg: &ExperimentConfig, problem: Source) -> Result<TimeSeries> {
    let n = cfg.series_length;
    let raw = match problem {
        Source::MG17 => series::gen_mackey_glass(&MgConfig::mg17(n), cfg.master_seed)?,
        Source::MG30 => series::gen_mackey_glass(&MgConfig::mg30(n), cfg.master_seed)?,
        Source::Henon => series::henon_default(n)?,
        Source::FIRLaser => {
            let path = cfg
                .fir_path
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("fir_path is not set".into()))?;
            let full = series::scale_to_unit(&series::load_fir_laser(path)?)?;
            let start = cfg.fir_window_start;
            if full.len() < start + cfg.lengths.iter().max().copied().unwrap_or(0) + 1 {
                return Err(Error::InvalidArgument(format!(
                    "laser file has {} samples, too few for window start {start}",
                    full.len()
                )));
            }
            let end = (start + n).min(full.len());
            return Ok(TimeSeries {
                values: full.values[start..end].to_vec(),
                ..full
            });
        }
        Source::Synthetic => return Err(Error::InvalidArgument("no generator for Synthetic".into())),
    };
    series::scale_to_unit(&raw)
}

/// First iteration (1-based) whose end-of-iteration cost is within 1% of
/// the final cost.
pub fn iterations_to_within(costs: &[f64], fraction: f64) -> usize {
    let Some(&last) = costs.last() else { return 0 };
    let bound = last + fraction * last.abs();
    costs.iter().position(|&c| c <= bound).map_or(costs.len(), |i| i + 1)
}

/// Trains one cell and measures it.
pub fn run_cell(
    cfg: &ExperimentConfig,
    values: &[f64],
    t: usize,
    regime: Regime,
    seed: u64,
) -> Result<(TrainingState, CellMetrics)> {
    let problem = TrainingProblem::from_series(values, t, cfg.d_u, cfg.eps, regime)?;
    let init = LrnnModel::random_init(cfg.d_u, 1, seed);
    let opts = TrainOptions {
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        optimize_g: false,
    };
    let state = train(&problem, &init, &opts)?;
    let predicted = predict_insample(&state, &problem)?.into_vec();
    let target = problem.zx.as_slice();
    let metrics = CellMetrics {
        final_cost: state.final_cost(),
        prediction_error: stats::eps_error_timeavg(&predicted, target, cfg.eps, problem.lambdas.appr)?,
        nmrse: stats::nmrse(&predicted, target)?,
        iterations: state.iterations(),
        iters_to_1pct: iterations_to_within(&state.iteration_costs(), 0.01),
        converged: state.converged_at.is_some(),
        sparsity_f: stats::sparsity_fraction(&state.model.f, SPARSITY_THRESHOLD),
        sparsity_u: stats::sparsity_fraction(&state.u, SPARSITY_THRESHOLD),
        cost_trace: state.cost_trace.iter().map(|e| e.cost).collect(),
        predicted,
    };
    Ok((state, metrics))
}

/// Runs every (problem, T, regime, restart) cell. Cells execute on the rayon
/// pool; records come back in loop order regardless of scheduling, so the
/// report depends only on the config.
pub fn run_experiments(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut targets = Vec::new();
    let mut data: Vec<(Source, std::result::Result<Vec<f64>, String>)> = Vec::new();
    for &p in &cfg.problems {
        match problem_series(cfg, p) {
            Ok(s) => {
                let longest = cfg.lengths.iter().max().copied().unwrap_or(0);
                targets.push(ProblemTarget {
                    problem: p,
                    values: s.values[..=longest].to_vec(),
                });
                data.push((p, Ok(s.values)));
            }
            Err(e) => data.push((p, Err(e.to_string()))),
        }
    }

    let mut cells = Vec::new();
    for (pi, &(p, _)) in data.iter().enumerate() {
        for &t in &cfg.lengths {
            for &regime in &cfg.regimes {
                for restart in 0..cfg.restarts {
                    cells.push((pi, p, t, regime, restart));
                }
            }
        }
    }

    let records: Vec<CellRecord> = cells
        .par_iter()
        .map(|&(pi, problem, t, regime, restart)| {
            let seed = cell_seed(cfg.master_seed, problem, t, regime, restart);
            let outcome = match &data[pi].1 {
                Ok(values) => run_cell(cfg, values, t, regime, seed)
                    .map(|(_, m)| m)
                    .map_err(|e| e.to_string()),
                Err(e) => Err(format!("series unavailable: {e}")),
            };
            let (metrics, error) = match outcome {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e)),
            };
            CellRecord {
                problem,
                t,
                regime,
                restart,
                seed,
                metrics,
                error,
            }
        })
        .collect();

    Ok(ExperimentReport {
        config: cfg.clone(),
        aggregates: ExperimentReport::compute_aggregates(&records),
        records,
        targets,
    })
}
