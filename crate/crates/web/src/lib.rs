//! wasm-bindgen front end for the static page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string so
//! the page needs no generated TypeScript types. The `*_json` functions hold
//! the logic and are what the native tests call.

use lrnn_core::costs::Regime;
use lrnn_core::harness::{cell_seed, problem_series, run_cell, ExperimentConfig};
use lrnn_core::series::{scale_to_unit, Source, TimeSeries};
use lrnn_core::stats;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Longest series the page may ask for; keeps a browser tab responsive.
pub const MAX_SERIES: usize = 20_000;
/// Largest training window; the sparse LP grows quadratically in `T`.
pub const MAX_T: usize = 120;

#[derive(Debug, Serialize)]
pub struct RegimeFit {
    pub regime: String,
    pub cost_trace: Vec<f64>,
    pub predicted: Vec<f64>,
    pub final_cost: f64,
    pub prediction_error: f64,
    pub nmrse: f64,
    pub iterations: usize,
    pub sparsity_f: f64,
    pub sparsity_u: f64,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub problem: String,
    pub t: usize,
    pub target: Vec<f64>,
    pub fits: Vec<RegimeFit>,
}

#[derive(Debug, Serialize)]
pub struct CrossingSummary {
    pub samples: usize,
    pub crossings: usize,
    /// Distance length → count, sorted by length.
    pub histogram: Vec<(usize, usize)>,
    pub kurtosis: Option<f64>,
    pub loglog_slope: Option<f64>,
    pub note: Option<String>,
}

fn parse_problem(name: &str) -> Result<Source, String> {
    let p: Source = name.parse().map_err(|e| format!("{e}"))?;
    match p {
        Source::MG17 | Source::MG30 | Source::Henon => Ok(p),
        other => Err(format!("{other} is not available in the browser")),
    }
}

fn series(problem: Source, length: usize, seed: u64) -> Result<TimeSeries, String> {
    if length == 0 || length > MAX_SERIES {
        return Err(format!("length must be in 1..={MAX_SERIES}"));
    }
    let cfg = ExperimentConfig {
        master_seed: seed,
        series_length: length,
        ..Default::default()
    };
    problem_series(&cfg, problem).map_err(|e| e.to_string())
}

pub fn generate_series_json(problem: &str, length: usize, seed: u64) -> Result<String, String> {
    let s = series(parse_problem(problem)?, length, seed)?;
    serde_json::to_string(&s.values).map_err(|e| e.to_string())
}

/// Trains one network per regime from the same series window.
pub fn compare_regimes_json(
    problem: &str,
    t: usize,
    d_u: usize,
    max_iters: usize,
    seed: u64,
) -> Result<String, String> {
    if !(2..=MAX_T).contains(&t) {
        return Err(format!("T must be in 2..={MAX_T}"));
    }
    let p = parse_problem(problem)?;
    let cfg = ExperimentConfig {
        problems: vec![p],
        lengths: vec![t],
        d_u,
        max_iters,
        master_seed: seed,
        series_length: ExperimentConfig::default().series_length.max(t + 1),
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let s = problem_series(&cfg, p).map_err(|e| e.to_string())?;
    let mut fits = Vec::new();
    for regime in Regime::ALL {
        let (_, m) =
            run_cell(&cfg, &s.values, t, regime, cell_seed(seed, p, t, regime, 0)).map_err(|e| e.to_string())?;
        fits.push(RegimeFit {
            regime: regime.to_string(),
            cost_trace: m.cost_trace,
            predicted: m.predicted,
            final_cost: m.final_cost,
            prediction_error: m.prediction_error,
            nmrse: m.nmrse,
            iterations: m.iterations,
            sparsity_f: m.sparsity_f,
            sparsity_u: m.sparsity_u,
        });
    }
    let out = Comparison {
        problem: p.to_string(),
        t,
        target: s.values[1..=t].to_vec(),
        fits,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// `values_json` is a JSON array of numbers; it is rescaled onto [-1, 1]
/// before the crossings are counted.
pub fn crossing_stats_json(values_json: &str) -> Result<String, String> {
    let values: Vec<f64> =
        serde_json::from_str(values_json).map_err(|e| format!("expected a JSON array of numbers: {e}"))?;
    let raw = TimeSeries::new(values, 1.0, Source::Synthetic);
    let s = scale_to_unit(&raw).map_err(|e| e.to_string())?;
    let d = stats::zero_crossing_distances(&s.values);
    let mut histogram: Vec<(usize, usize)> = Vec::new();
    let mut sorted = d.clone();
    sorted.sort_unstable();
    for x in sorted {
        match histogram.last_mut() {
            Some((len, n)) if *len == x => *n += 1,
            _ => histogram.push((x, 1)),
        }
    }
    let mut notes = Vec::new();
    let kurtosis = stats::kurtosis(&d.iter().map(|&x| x as f64).collect::<Vec<_>>())
        .map_err(|e| notes.push(format!("kurtosis: {e}")))
        .ok();
    let loglog_slope = stats::loglog_slope(&d)
        .map(|(slope, _)| slope)
        .map_err(|e| notes.push(format!("slope: {e}")))
        .ok();
    let out = CrossingSummary {
        samples: s.len(),
        crossings: d.len(),
        histogram,
        kurtosis,
        loglog_slope,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn generate_series(problem: &str, length: usize, seed: u64) -> Result<String, JsError> {
    generate_series_json(problem, length, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare_regimes(problem: &str, t: usize, d_u: usize, max_iters: usize, seed: u64) -> Result<String, JsError> {
    compare_regimes_json(problem, t, d_u, max_iters, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn crossing_stats(values_json: &str) -> Result<String, JsError> {
    crossing_stats_json(values_json).map_err(|e| JsError::new(&e))
}
