//! Static SVG line charts for experiment reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{Aggregate, ExperimentReport, Summary};
use crate::costs::Regime;
use crate::error::{Error, Result};
use crate::series::Source;

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 52.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct Band {
    pub lower: Vec<(f64, f64)>,
    pub upper: Vec<(f64, f64)>,
    pub color: String,
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub curves: Vec<Curve>,
    pub bands: Vec<Band>,
    /// Fixed y-range; auto-scaled from the data otherwise.
    pub y_range: Option<(f64, f64)>,
}

impl Panel {
    fn data_range(&self) -> ((f64, f64), (f64, f64)) {
        let pts = self
            .curves
            .iter()
            .flat_map(|c| c.points.iter())
            .chain(self.bands.iter().flat_map(|b| b.lower.iter().chain(&b.upper)))
            .filter(|(x, y)| x.is_finite() && y.is_finite());
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = xr;
        for &(x, y) in pts {
            xr = (xr.0.min(x), xr.1.max(x));
            yr = (yr.0.min(y), yr.1.max(y));
        }
        (widen(xr), widen(yr))
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1e-300) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn polyline(pts: &[(f64, f64)], map: &impl Fn(f64, f64) -> (f64, f64)) -> String {
    pts.iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|&(x, y)| {
            let (px, py) = map(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Panels side by side under a common title.
pub fn render_svg(title: &str, panels: &[Panel]) -> String {
    let cell_w = MARGIN_L + PANEL_W + MARGIN_R;
    let width = cell_w * panels.len().max(1) as f64;
    let height = MARGIN_T + PANEL_H + MARGIN_B + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        escape(title)
    );

    for (k, panel) in panels.iter().enumerate() {
        let ox = k as f64 * cell_w + MARGIN_L;
        let oy = MARGIN_T + 10.0;
        let ((x0, x1), auto_y) = panel.data_range();
        let (y0, y1) = panel.y_range.unwrap_or(auto_y);
        let map = move |x: f64, y: f64| {
            (
                ox + (x - x0) / (x1 - x0) * PANEL_W,
                oy + PANEL_H - (y.clamp(y0, y1) - y0) / (y1 - y0) * PANEL_H,
            )
        };

        let _ = writeln!(s, r#"<g>"#);
        let _ = writeln!(
            s,
            r##"<rect x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#333"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
            ox + PANEL_W / 2.0,
            oy - 8.0,
            escape(&panel.title)
        );
        for t in ticks(x0, x1) {
            let (px, _) = map(t, y0);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="#333"/><text x="{px:.2}" y="{ty}" text-anchor="middle">{}</text>"##,
                tick_label(t),
                b = oy + PANEL_H,
                b2 = oy + PANEL_H + 5.0,
                ty = oy + PANEL_H + 18.0
            );
        }
        for t in ticks(y0, y1) {
            let (_, py) = map(x0, t);
            let _ = writeln!(
                s,
                r##"<line x1="{l}" y1="{py:.2}" x2="{ox}" y2="{py:.2}" stroke="#333"/><line x1="{ox}" y1="{py:.2}" x2="{r}" y2="{py:.2}" stroke="#eee"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"##,
                tick_label(t),
                l = ox - 5.0,
                r = ox + PANEL_W,
                tx = ox - 8.0,
                ty = py + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            ox + PANEL_W / 2.0,
            oy + PANEL_H + 38.0,
            escape(&panel.x_label)
        );
        let (yx, yy) = (ox - 56.0, oy + PANEL_H / 2.0);
        let _ = writeln!(
            s,
            r#"<text x="{yx}" y="{yy}" text-anchor="middle" transform="rotate(-90 {yx} {yy})">{}</text>"#,
            escape(&panel.y_label)
        );

        for b in &panel.bands {
            let mut pts = b.upper.clone();
            pts.extend(b.lower.iter().rev());
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{}" fill-opacity="0.18" stroke="none"/>"#,
                polyline(&pts, &map),
                b.color
            );
        }
        for c in &panel.curves {
            let dash = if c.dashed { r#" stroke-dasharray="2,3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
                polyline(&c.points, &map),
                c.color
            );
        }

        let lx = ox + PANEL_W + 12.0;
        for (i, c) in panel.curves.iter().filter(|c| !c.label.is_empty()).enumerate() {
            let ly = oy + 12.0 + 16.0 * i as f64;
            let dash = if c.dashed { r#" stroke-dasharray="2,3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 22.0,
                c.color,
                lx + 28.0,
                ly + 4.0,
                escape(&c.label)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn regimes_in(report: &ExperimentReport, problem: Source) -> Vec<Regime> {
    Regime::ALL
        .into_iter()
        .filter(|g| report.records.iter().any(|r| r.problem == problem && r.regime == *g))
        .collect()
}

fn lengths_in(report: &ExperimentReport, problem: Source) -> Vec<usize> {
    let mut t: Vec<usize> = report
        .records
        .iter()
        .filter(|r| r.problem == problem)
        .map(|r| r.t)
        .collect();
    t.sort_unstable();
    t.dedup();
    t
}

/// Mean end-of-iteration cost across restarts; shorter runs are held at
/// their final value.
fn mean_iteration_curve(report: &ExperimentReport, problem: Source, t: usize, regime: Regime) -> Vec<(f64, f64)> {
    let runs: Vec<Vec<f64>> = report
        .records
        .iter()
        .filter(|r| r.problem == problem && r.t == t && r.regime == regime)
        .filter_map(|r| r.metrics.as_ref())
        .map(|m| m.cost_trace.iter().skip(1).step_by(2).copied().collect::<Vec<_>>())
        .filter(|v| !v.is_empty())
        .collect();
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let s: f64 = runs.iter().map(|r| r[i.min(r.len() - 1)]).sum();
            ((i + 1) as f64, s / runs.len() as f64)
        })
        .collect()
}

fn cost_panels(report: &ExperimentReport, problem: Source) -> Vec<Panel> {
    let lengths = lengths_in(report, problem);
    regimes_in(report, problem)
        .into_iter()
        .map(|g| Panel {
            title: format!("{problem}, {g} cost"),
            x_label: "iteration".into(),
            y_label: "mean cost".into(),
            curves: lengths
                .iter()
                .enumerate()
                .map(|(i, &t)| Curve {
                    label: format!("T = {t}"),
                    points: mean_iteration_curve(report, problem, t, g),
                    color: PALETTE[i % PALETTE.len()].into(),
                    dashed: false,
                })
                .filter(|c| !c.points.is_empty())
                .collect(),
            ..Default::default()
        })
        .collect()
}

fn prediction_panels(report: &ExperimentReport, problem: Source) -> Vec<Panel> {
    let Some(target) = report.target(problem) else {
        return Vec::new();
    };
    let Some(&t) = lengths_in(report, problem).last() else {
        return Vec::new();
    };
    regimes_in(report, problem)
        .into_iter()
        .filter_map(|g| {
            let best = report
                .records
                .iter()
                .filter(|r| r.problem == problem && r.t == t && r.regime == g)
                .filter_map(|r| r.metrics.as_ref())
                .min_by(|a, b| a.final_cost.total_cmp(&b.final_cost))?;
            let original = (1..=t).map(|i| (i as f64, target[i])).collect();
            let approx = best
                .predicted
                .iter()
                .enumerate()
                .map(|(i, &v)| ((i + 1) as f64, v))
                .collect();
            Some(Panel {
                title: format!("{problem}, {g}, T = {t}, best restart"),
                x_label: "time step".into(),
                y_label: "scaled value".into(),
                curves: vec![
                    Curve {
                        label: "original".into(),
                        points: original,
                        color: "#000000".into(),
                        dashed: false,
                    },
                    Curve {
                        label: "approximation".into(),
                        points: approx,
                        color: "#999999".into(),
                        dashed: false,
                    },
                ],
                ..Default::default()
            })
        })
        .collect()
}

fn error_panel(
    report: &ExperimentReport,
    problem: Source,
    title: &str,
    y_label: &str,
    pick: fn(&Aggregate) -> Option<Summary>,
) -> Panel {
    let mut panel = Panel {
        title: format!("{problem}, {title}"),
        x_label: "T".into(),
        y_label: y_label.into(),
        ..Default::default()
    };
    for (i, g) in regimes_in(report, problem).into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()].to_string();
        let rows: Vec<(f64, Summary)> = report
            .aggregates
            .iter()
            .filter(|a| a.problem == problem && a.regime == g)
            .filter_map(|a| pick(a).map(|s| (a.t as f64, s)))
            .collect();
        let line = |f: fn(&Summary) -> f64| rows.iter().map(|(t, s)| (*t, f(s))).collect::<Vec<_>>();
        panel.bands.push(Band {
            lower: line(|s| s.mean - s.std),
            upper: line(|s| s.mean + s.std),
            color: color.clone(),
        });
        panel.curves.push(Curve {
            label: format!("{g} mean"),
            points: line(|s| s.mean),
            color: color.clone(),
            dashed: false,
        });
        panel.curves.push(Curve {
            label: format!("{g} best/worst"),
            points: line(|s| s.best),
            color: color.clone(),
            dashed: true,
        });
        panel.curves.push(Curve {
            label: String::new(),
            points: line(|s| s.worst),
            color,
            dashed: true,
        });
    }
    panel
}

fn write(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Writes, per problem:
/// `fig1_<problem>.svg` cost against iteration for every T (each panel on
/// its own scale) and `fig1_<problem>_shared.svg` on one scale when several
/// regimes are present; `fig2_<problem>.svg` original against in-sample
/// approximation; `fig3_<problem>.svg` error against T with mean, ±1 std
/// band and best/worst.
pub fn emit_plots(report: &ExperimentReport, outdir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let outdir = outdir.as_ref();
    if report.records.iter().all(|r| r.metrics.is_none()) {
        return Err(Error::InvalidArgument("report has no successful runs to plot".into()));
    }
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut problems: Vec<Source> = Vec::new();
    for r in &report.records {
        if !problems.contains(&r.problem) {
            problems.push(r.problem);
        }
    }
    let mut written = Vec::new();
    for p in problems {
        let tag = p.name().to_ascii_lowercase();
        let panels = cost_panels(report, p);
        let path = outdir.join(format!("fig1_{tag}.svg"));
        write(&path, &render_svg(&format!("{p}: cost versus iteration"), &panels))?;
        written.push(path);
        if panels.len() > 1 {
            let mut shared = panels.clone();
            let range = shared
                .iter()
                .map(|q| q.data_range().1)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
            for q in &mut shared {
                q.y_range = Some(range);
            }
            let path = outdir.join(format!("fig1_{tag}_shared.svg"));
            write(
                &path,
                &render_svg(&format!("{p}: cost versus iteration (shared scale)"), &shared),
            )?;
            written.push(path);
        }

        let panels = prediction_panels(report, p);
        if !panels.is_empty() {
            let path = outdir.join(format!("fig2_{tag}.svg"));
            write(&path, &render_svg(&format!("{p}: original and approximation"), &panels))?;
            written.push(path);
        }

        let panels = [
            error_panel(report, p, "ε-insensitive error", "weighted ε-error", |a| {
                a.prediction_error
            }),
            error_panel(report, p, "NMRSE", "NMRSE", |a| a.nmrse),
        ];
        let path = outdir.join(format!("fig3_{tag}.svg"));
        write(&path, &render_svg(&format!("{p}: error versus T"), &panels))?;
        written.push(path);
    }
    Ok(written)
}
