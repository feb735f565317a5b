use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{Aggregate, CellMetrics, CellRecord, ExperimentReport, ProblemTarget};
use crate::costs::Regime;
use crate::error::{Error, Result};
use crate::series::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 16] = [
    "problem",
    "T",
    "regime",
    "restart",
    "seed",
    "final_cost",
    "prediction_error",
    "nmrse",
    "iterations",
    "iters_to_1pct",
    "converged",
    "sparsity_f",
    "sparsity_u",
    "cost_trace",
    "predicted",
    "error",
];

// `{:?}` on f64 prints the shortest decimal that parses back to the same bits
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match format {
        ReportFormat::Csv => write_csv(&report.records, path),
        ReportFormat::Json => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &NestedReport::from(report))?;
            w.write_all(b"\n")
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))
        }
    }
}

fn write_csv(records: &[CellRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let mut row = vec![
            r.problem.to_string(),
            r.t.to_string(),
            r.regime.to_string(),
            r.restart.to_string(),
            r.seed.to_string(),
        ];
        match &r.metrics {
            Some(m) => row.extend([
                num(m.final_cost),
                num(m.prediction_error),
                num(m.nmrse),
                m.iterations.to_string(),
                m.iters_to_1pct.to_string(),
                m.converged.to_string(),
                num(m.sparsity_f),
                num(m.sparsity_u),
                join(&m.cost_trace),
                join(&m.predicted),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 10)),
        }
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads the per-record CSV back.
pub fn read_csv_records(path: impl AsRef<Path>) -> Result<Vec<CellRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: m,
        };
        fn field<T: FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("bad {name}: '{s}'"))
        }
        let list = |s: &str| -> std::result::Result<Vec<f64>, String> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';').map(|x| field(x, "list entry")).collect()
        };
        let parse = || -> std::result::Result<CellRecord, String> {
            let metrics = if row[5].is_empty() {
                None
            } else {
                Some(CellMetrics {
                    final_cost: field(&row[5], "final_cost")?,
                    prediction_error: field(&row[6], "prediction_error")?,
                    nmrse: field(&row[7], "nmrse")?,
                    iterations: field(&row[8], "iterations")?,
                    iters_to_1pct: field(&row[9], "iters_to_1pct")?,
                    converged: field(&row[10], "converged")?,
                    sparsity_f: field(&row[11], "sparsity_f")?,
                    sparsity_u: field(&row[12], "sparsity_u")?,
                    cost_trace: list(&row[13])?,
                    predicted: list(&row[14])?,
                })
            };
            Ok(CellRecord {
                problem: Source::from_str(&row[0]).map_err(|e| e.to_string())?,
                t: field(&row[1], "T")?,
                regime: Regime::from_str(&row[2]).map_err(|e| e.to_string())?,
                restart: field(&row[3], "restart")?,
                seed: field(&row[4], "seed")?,
                metrics,
                error: (!row[15].is_empty()).then(|| row[15].to_string()),
            })
        };
        out.push(parse().map_err(bad)?);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct RestartEntry {
    restart: usize,
    seed: u64,
    metrics: Option<CellMetrics>,
    error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegimeEntry {
    regime: Regime,
    aggregate: Aggregate,
    records: Vec<RestartEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LengthEntry {
    #[serde(rename = "T")]
    t: usize,
    regimes: Vec<RegimeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProblemEntry {
    problem: Source,
    target: Option<Vec<f64>>,
    lengths: Vec<LengthEntry>,
}

/// On-disk JSON layout: problem → T → regime, each with its aggregate.
#[derive(Debug, Serialize, Deserialize)]
struct NestedReport {
    config: ExperimentConfig,
    problems: Vec<ProblemEntry>,
}

impl From<&ExperimentReport> for NestedReport {
    fn from(rep: &ExperimentReport) -> Self {
        let mut problems: Vec<ProblemEntry> = Vec::new();
        for a in &rep.aggregates {
            let pos = match problems.iter().position(|p| p.problem == a.problem) {
                Some(i) => i,
                None => {
                    problems.push(ProblemEntry {
                        problem: a.problem,
                        target: rep.target(a.problem).map(<[f64]>::to_vec),
                        lengths: Vec::new(),
                    });
                    problems.len() - 1
                }
            };
            let lengths = &mut problems[pos].lengths;
            let li = match lengths.iter().position(|l| l.t == a.t) {
                Some(i) => i,
                None => {
                    lengths.push(LengthEntry {
                        t: a.t,
                        regimes: Vec::new(),
                    });
                    lengths.len() - 1
                }
            };
            let records = rep
                .records
                .iter()
                .filter(|r| r.problem == a.problem && r.t == a.t && r.regime == a.regime)
                .map(|r| RestartEntry {
                    restart: r.restart,
                    seed: r.seed,
                    metrics: r.metrics.clone(),
                    error: r.error.clone(),
                })
                .collect();
            lengths[li].regimes.push(RegimeEntry {
                regime: a.regime,
                aggregate: a.clone(),
                records,
            });
        }
        NestedReport {
            config: rep.config.clone(),
            problems,
        }
    }
}

impl From<NestedReport> for ExperimentReport {
    fn from(n: NestedReport) -> Self {
        let mut records = Vec::new();
        let mut aggregates = Vec::new();
        let mut targets = Vec::new();
        for p in n.problems {
            if let Some(values) = p.target {
                targets.push(ProblemTarget {
                    problem: p.problem,
                    values,
                });
            }
            for l in p.lengths {
                for g in l.regimes {
                    aggregates.push(g.aggregate);
                    records.extend(g.records.into_iter().map(|r| CellRecord {
                        problem: p.problem,
                        t: l.t,
                        regime: g.regime,
                        restart: r.restart,
                        seed: r.seed,
                        metrics: r.metrics,
                        error: r.error,
                    }));
                }
            }
        }
        ExperimentReport {
            config: n.config,
            records,
            aggregates,
            targets,
        }
    }
}

pub fn read_json_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let nested: NestedReport = serde_json::from_reader(std::io::BufReader::new(file))?;
    Ok(nested.into())
}
