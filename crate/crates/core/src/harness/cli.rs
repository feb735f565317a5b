use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::experiment::{cell_seed, problem_series, run_cell, run_experiments};
use super::plots::emit_plots;
use super::report::{emit_report, read_json_report, ReportFormat};
use crate::costs::Regime;
use crate::error::{Error, Result};
use crate::series::{self, Source};
use crate::stats;

#[derive(Debug, Parser)]
#[command(
    name = "lrnn",
    version,
    about = "Linear recurrent network identification on chaotic series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a benchmark series as `index,value` CSV.
    Generate {
        #[arg(long)]
        problem: Source,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Keep the raw values instead of scaling onto [-1, 1].
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        fir_path: Option<PathBuf>,
    },
    /// Train one network and print its cost trace.
    Train {
        #[arg(long)]
        problem: Source,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        regime: Regime,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        d_u: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        fir_path: Option<PathBuf>,
    },
    /// Run an experiment matrix; writes report.json, report.csv and plots.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Zero-crossing statistics of a series file.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Render plots from a JSON report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
    },
}

fn run(cmd: Command, out: &mut dyn Write) -> Result<()> {
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    match cmd {
        Command::Generate {
            problem,
            length,
            seed,
            out: path,
            raw,
            fir_path,
        } => {
            let cfg = ExperimentConfig {
                master_seed: seed,
                series_length: length,
                lengths: vec![],
                fir_path,
                ..Default::default()
            };
            let s = if raw {
                match problem {
                    Source::MG17 => series::gen_mackey_glass(&series::MgConfig::mg17(length), seed)?,
                    Source::MG30 => series::gen_mackey_glass(&series::MgConfig::mg30(length), seed)?,
                    Source::Henon => series::henon_default(length)?,
                    _ => problem_series(&cfg, problem)?,
                }
            } else {
                problem_series(&cfg, problem)?
            };
            series::write_csv(&s, &path)?;
            writeln!(out, "wrote {} samples to {}", s.len(), path.display()).map_err(w)?;
        }
        Command::Train {
            problem,
            length,
            regime,
            seed,
            d_u,
            eps,
            max_iters,
            tol,
            fir_path,
        } => {
            let cfg = ExperimentConfig {
                problems: vec![problem],
                lengths: vec![length],
                regimes: vec![regime],
                d_u,
                eps,
                max_iters,
                tol,
                master_seed: seed,
                fir_path,
                series_length: ExperimentConfig::default().series_length.max(length + 1),
                ..Default::default()
            };
            cfg.validate()?;
            let s = problem_series(&cfg, problem)?;
            let cseed = cell_seed(seed, problem, length, regime, 0);
            let (state, m) = run_cell(&cfg, &s.values, length, regime, cseed)?;
            writeln!(out, "iteration\thalf_step\tcost").map_err(w)?;
            for e in &state.cost_trace {
                writeln!(out, "{}\t{:?}\t{:e}", e.iteration, e.half_step, e.cost).map_err(w)?;
            }
            writeln!(
                out,
                "final_cost {:e}\nprediction_error {:e}\nnmrse {:.6}\niterations {}\nconverged {}\nsparsity_f {:.4}\nsparsity_u {:.4}",
                m.final_cost, m.prediction_error, m.nmrse, m.iterations, m.converged, m.sparsity_f, m.sparsity_u
            )
            .map_err(w)?;
        }
        Command::Experiment { config, out: dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiments(&cfg)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            emit_report(&report, ReportFormat::Json, dir.join("report.json"))?;
            emit_report(&report, ReportFormat::Csv, dir.join("report.csv"))?;
            let failed = report.records.iter().filter(|r| r.metrics.is_none()).count();
            let plots = emit_plots(&report, &dir)?;
            writeln!(
                out,
                "{} runs ({failed} failed), {} plots in {}",
                report.records.len(),
                plots.len(),
                dir.display()
            )
            .map_err(w)?;
        }
        Command::Stats { input } => {
            let s = series::scale_to_unit(&series::read_csv(&input, Source::Synthetic)?)?;
            let distances = stats::zero_crossing_distances(&s.values);
            let d: Vec<f64> = distances.iter().map(|&x| x as f64).collect();
            writeln!(out, "samples {}\ncrossing_distances {}", s.len(), distances.len()).map_err(w)?;
            writeln!(out, "kurtosis {:.4}", stats::kurtosis(&d)?).map_err(w)?;
            // too few distinct gap lengths is common for near-periodic series
            match stats::loglog_slope(&distances) {
                Ok((slope, r2)) => writeln!(out, "loglog_slope {slope:.4}\nslope_r2 {r2:.4}"),
                Err(e) => writeln!(out, "loglog_slope unavailable ({e})"),
            }
            .map_err(w)?;
        }
        Command::Plot { report, outdir } => {
            let rep = read_json_report(&report)?;
            for p in emit_plots(&rep, &outdir)? {
                writeln!(out, "{}", p.display()).map_err(w)?;
            }
        }
    }
    Ok(())
}

/// Entry point. Returns 0 on success, 1 on runtime failure, 2 on usage
/// errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
