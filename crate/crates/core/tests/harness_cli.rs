use std::path::Path;
use std::process::Command;

use lrnn_core::costs::Regime;
use lrnn_core::harness::*;
use lrnn_core::series::Source;

fn lrnn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lrnn"))
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        problems: vec![Source::MG30, Source::Henon],
        lengths: vec![8, 12],
        restarts: 3,
        master_seed: 5,
        ..Default::default()
    }
}

fn json_bytes(rep: &ExperimentReport, dir: &Path) -> Vec<u8> {
    let p = dir.join("r.json");
    emit_report(rep, ReportFormat::Json, &p).unwrap();
    std::fs::read(p).unwrap()
}

#[test]
fn generate_writes_header_plus_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let st = lrnn()
        .args([
            "generate",
            "--problem",
            "henon",
            "--length",
            "100",
            "--seed",
            "7",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 101);

    let o = lrnn().arg("stats").arg("--in").arg(&out).output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("kurtosis"));
}

#[test]
fn constant_series_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    std::fs::write(&p, "index,value\n0,2.5\n1,2.5\n2,2.5\n3,2.5\n").unwrap();
    let o = lrnn().arg("stats").arg("--in").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("constant series"));
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(lrnn().arg("frobnicate").status().unwrap().code(), Some(2));
    assert_eq!(lrnn().args(["generate", "--bogus"]).status().unwrap().code(), Some(2));
    assert_eq!(lrnn().status().unwrap().code(), Some(2));
    assert_eq!(lrnn().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(cli_main(["lrnn", "train", "--problem", "nowhere"]), 2);
}

#[test]
fn train_prints_cost_trace() {
    let o = lrnn()
        .args([
            "train",
            "--problem",
            "mg30",
            "--length",
            "20",
            "--regime",
            "sparse",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("iteration\thalf_step\tcost"));
    assert!(text.contains("\tU\t") && text.contains("\tF\t"));
    assert!(text.contains("nmrse"));
}

#[test]
fn experiment_command_writes_report_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "problems = henon\nlengths = 6, 9\nrestarts = 2\n").unwrap();
    let out = dir.path().join("out");
    let st = lrnn()
        .arg("experiment")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    for f in [
        "report.json",
        "report.csv",
        "fig1_henon.svg",
        "fig1_henon_shared.svg",
        "fig2_henon.svg",
        "fig3_henon.svg",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let replot = dir.path().join("replot");
    let st = lrnn()
        .arg("plot")
        .arg("--report")
        .arg(out.join("report.json"))
        .arg("--outdir")
        .arg(&replot)
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(
        std::fs::read(out.join("fig3_henon.svg")).unwrap(),
        std::fs::read(replot.join("fig3_henon.svg")).unwrap()
    );

    std::fs::write(&cfg, "problems = henon\nwhat = 3\n").unwrap();
    let o = lrnn().arg("experiment").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiments(&cfg).unwrap())
    };
    let one = json_bytes(&run(1), dir.path());
    let three = json_bytes(&run(3), dir.path());
    assert_eq!(one, three);
    let again = json_bytes(&run(2), dir.path());
    assert_eq!(one, again);
}

#[test]
fn reloaded_aggregates_match_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_experiments(&small_config()).unwrap();
    let p = dir.path().join("r.json");
    emit_report(&rep, ReportFormat::Json, &p).unwrap();
    let back = read_json_report(&p).unwrap();
    assert_eq!(back.aggregates, ExperimentReport::compute_aggregates(&back.records));
    let c = dir.path().join("r.csv");
    emit_report(&rep, ReportFormat::Csv, &c).unwrap();
    assert_eq!(
        ExperimentReport::compute_aggregates(&read_csv_records(&c).unwrap()),
        rep.aggregates
    );
    for a in &rep.aggregates {
        for s in [a.final_cost, a.nmrse, a.prediction_error, a.iters_to_1pct]
            .into_iter()
            .flatten()
        {
            assert!(s.best <= s.mean && s.mean <= s.worst && s.std >= 0.0);
        }
    }
    assert_eq!(rep.records.len(), 2 * 2 * 2 * 3);
}

#[test]
fn plots_are_well_formed_svg() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_experiments(&small_config()).unwrap();
    let files = emit_plots(&rep, dir.path()).unwrap();
    assert_eq!(files.len(), 2 * 4);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(text.contains("iteration") || text.contains("time step") || text.contains(">T<"));
    }
}

#[test]
fn single_cell_report_plots_one_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        problems: vec![Source::Henon],
        lengths: vec![10],
        restarts: 1,
        regimes: vec![Regime::Quadratic],
        ..Default::default()
    };
    let rep = run_experiments(&cfg).unwrap();
    emit_plots(&rep, dir.path()).unwrap();
    let svg = std::fs::read_to_string(dir.path().join("fig1_henon.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(!dir.path().join("fig1_henon_shared.svg").exists());
}

#[test]
fn laser_cells_use_the_supplied_file() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fir_laser_standin.txt");
    let cfg = ExperimentConfig {
        problems: vec![Source::FIRLaser],
        lengths: vec![10, 20],
        restarts: 2,
        fir_path: Some(path),
        fir_window_start: 5,
        ..Default::default()
    };
    let rep = run_experiments(&cfg).unwrap();
    assert!(
        rep.records.iter().all(|r| r.metrics.is_some()),
        "{:?}",
        rep.records[0].error
    );
    let target = rep.target(Source::FIRLaser).unwrap();
    assert_eq!(target.len(), 21);

    let too_far = ExperimentConfig {
        fir_window_start: 60,
        ..cfg
    };
    let rep = run_experiments(&too_far).unwrap();
    assert!(rep.records.iter().all(|r| r.error.is_some()));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let reference = ExperimentConfig::load(dir.join("reference.cfg")).unwrap();
    let defaults = ExperimentConfig::default();
    assert_eq!(reference.problems, defaults.problems);
    assert_eq!(reference.lengths, defaults.lengths);
    assert_eq!((reference.restarts, reference.d_u, reference.max_iters), (20, 4, 50));
    assert_eq!(reference.regimes, Regime::ALL.to_vec());
    let quick = ExperimentConfig::load(dir.join("quick.cfg")).unwrap();
    assert_eq!(quick.problems, vec![Source::MG30, Source::Henon]);
    assert_eq!(quick.lengths, vec![10, 20, 30]);
    assert_eq!(quick.restarts, 3);
}
