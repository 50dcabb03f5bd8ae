//! Experiment drivers: run a resolved [`ExperimentConfig`] and write the
//! learning-curve CSV, the run manifest and an optional SVG plot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::anc::run_anc;
use crate::config::{ExperimentConfig, Mode};
use crate::dmlms::{run_estimation, NetworkSetup, StepSizes, Strategy};
use crate::error::{Error, Result};
use crate::metrics::{convergence_iteration, smooth, steady_state, to_db, MetricSeries, DEFAULT_DB_FLOOR};

pub const CURVE_FILE: &str = "learning_curve.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const PLOT_FILE: &str = "learning_curve.svg";

/// Level a sweep curve has to fall below to count as converged.
pub const CONVERGENCE_THRESHOLD_DB: f64 = -10.0;

/// A named dB curve, one value per high-rate instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub values: Vec<f64>,
}

impl Curve {
    fn from_series(name: &str, series: &MetricSeries) -> Self {
        Self {
            name: name.to_string(),
            values: series.to_db(DEFAULT_DB_FLOOR),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub mu1: f64,
    pub mu2: f64,
    pub steady_state_db: f64,
    pub convergence_iteration: Option<usize>,
    pub stable: bool,
}

impl SweepPoint {
    /// Stable means finite everywhere, crossing the threshold downward and
    /// staying below it. Crossings are read off the curve smoothed over one
    /// low-rate period (`period` samples), which removes the tick ripple.
    pub fn classify(mu1: f64, mu2: f64, linear: &[f64], period: usize) -> Self {
        let db = match smooth(linear, period.max(1)) {
            Ok(s) => to_db(&s, DEFAULT_DB_FLOOR),
            Err(_) => to_db(linear, DEFAULT_DB_FLOOR),
        };
        let finite = linear.iter().all(|v| v.is_finite());
        let crossing = if finite {
            convergence_iteration(&db, CONVERGENCE_THRESHOLD_DB)
        } else {
            None
        };
        let stable = crossing.is_some_and(|c| db[c..].iter().all(|&v| v < CONVERGENCE_THRESHOLD_DB));
        Self {
            mu1,
            mu2,
            steady_state_db: 10.0 * steady_state(linear).log10(),
            convergence_iteration: crossing,
            stable,
        }
    }
}

/// What a run produced, in memory and on disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub curves: Vec<Curve>,
    pub sweep: Vec<SweepPoint>,
    pub csv: PathBuf,
    pub summary: Option<PathBuf>,
    pub manifest: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Run the experiment selected by `config.mode`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let setup = config.network_setup()?;
    let (curves, sweep) = match config.mode {
        Mode::Estimate => {
            let series = run_estimation(&config.estimation_config()?, &setup, Strategy::Diffusion)?;
            check_finite("dmlms network EMSE", &series)?;
            (vec![Curve::from_series(Strategy::Diffusion.curve_name(), &series)], Vec::new())
        }
        Mode::Compare => (compare_curves(config, &setup)?, Vec::new()),
        Mode::Anc => {
            let outcome = run_anc(&config.anc_config()?, &setup)?;
            check_finite("fxdmlms noise reduction", &outcome.nr)?;
            let curves = vec![
                Curve::from_series("nr_db", &outcome.nr),
                Curve {
                    name: "attenuation_db".into(),
                    values: outcome.attenuation_db(),
                },
            ];
            (curves, Vec::new())
        }
        Mode::Sweep => sweep_curves(config, &setup)?,
    };
    write_outputs(config, &setup, curves, sweep)
}

/// DMLMS, centralized and non-cooperative learning curves on identical
/// seeded data.
pub fn compare(config: &ExperimentConfig) -> Result<RunOutput> {
    if !matches!(config.mode, Mode::Estimate | Mode::Compare) {
        return Err(Error::config("mode", format!("compare needs an estimate config, got `{}`", config.mode.as_str())));
    }
    let config = ExperimentConfig {
        mode: Mode::Compare,
        ..config.clone()
    };
    run(&config)
}

fn compare_curves(config: &ExperimentConfig, setup: &NetworkSetup) -> Result<Vec<Curve>> {
    let cfg = config.estimation_config()?;
    [Strategy::Centralized, Strategy::Diffusion, Strategy::NonCooperative]
        .into_iter()
        .map(|strategy| {
            let series = run_estimation(&cfg, setup, strategy)?;
            check_finite(strategy.curve_name(), &series)?;
            Ok(Curve::from_series(strategy.curve_name(), &series))
        })
        .collect()
}

fn sweep_curves(config: &ExperimentConfig, setup: &NetworkSetup) -> Result<(Vec<Curve>, Vec<SweepPoint>)> {
    let base = config.estimation_config()?;
    let mut curves = Vec::new();
    let mut points = Vec::new();
    for &mu1 in &config.mu1_grid {
        for &mu2 in &config.mu2_grid {
            let cfg = crate::dmlms::EstimationConfig {
                steps: StepSizes::new(mu1, mu2)?,
                ..base.clone()
            };
            let series = run_estimation(&cfg, setup, Strategy::Diffusion)?;
            curves.push(Curve::from_series(&format!("emse_db_mu1_{mu1}_mu2_{mu2}"), &series));
            points.push(SweepPoint::classify(mu1, mu2, &series.values, config.delta));
        }
    }
    Ok((curves, points))
}

fn check_finite(what: &str, series: &MetricSeries) -> Result<()> {
    match series.first_non_finite() {
        Some(iteration) => Err(Error::Diverged {
            what: what.to_string(),
            iteration,
        }),
        None => Ok(()),
    }
}

/// `n,<name>...` header then one row per instant.
pub fn render_csv(curves: &[Curve]) -> String {
    let len = curves.iter().map(|c| c.values.len()).max().unwrap_or(0);
    let mut out = String::from("n");
    for c in curves {
        out.push(',');
        out.push_str(&c.name);
    }
    out.push('\n');
    for n in 0..len {
        let _ = write!(out, "{n}");
        for c in curves {
            match c.values.get(n) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_summary(points: &[SweepPoint]) -> String {
    let mut out = String::from("mu1,mu2,steady_state_emse_db,convergence_iteration,stable\n");
    for p in points {
        let crossing = p.convergence_iteration.map_or("none".to_string(), |c| c.to_string());
        let _ = writeln!(out, "{},{},{},{},{}", p.mu1, p.mu2, p.steady_state_db, crossing, p.stable);
    }
    out
}

/// Resolved config followed by derived statistics as comments, so the
/// manifest parses back to the same config.
pub fn render_manifest(config: &ExperimentConfig, setup: &NetworkSetup, curves: &[Curve]) -> String {
    let mut out = String::from("# dmlms run manifest\n");
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(out, "# written_unix_time = {stamp}");
    out.push_str(&config.render());
    let t = &setup.topology;
    let _ = writeln!(out, "# edges = {}, mean_degree_realized = {}", t.edge_count(), t.mean_degree());
    for (k, p) in setup.profiles.iter().enumerate() {
        let _ = writeln!(
            out,
            "# node {}: degree = {}, input_variance = {}, snr_db = {}",
            k + 1,
            t.degree(k),
            p.input_variance,
            p.snr_db
        );
    }
    for c in curves {
        let linear: Vec<f64> = c.values.iter().map(|v| 10f64.powf(v / 10.0)).collect();
        let _ = writeln!(out, "# steady_state {} = {}", c.name, 10.0 * steady_state(&linear).log10());
    }
    out
}

const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Minimal static line chart of dB curves against `n`.
pub fn render_svg(title: &str, curves: &[Curve]) -> String {
    let (w, h) = (800.0, 480.0);
    let (left, right, top, bottom) = (70.0, 190.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let len = curves.iter().map(|c| c.values.len()).max().unwrap_or(0).max(2);
    let finite = curves.iter().flat_map(|c| c.values.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    lo = (lo / 10.0).floor() * 10.0;
    hi = ((hi / 10.0).ceil() * 10.0).max(lo + 10.0);
    let sx = |n: usize| left + pw * n as f64 / (len - 1) as f64;
    let sy = |v: f64| top + ph * (hi - v.clamp(lo, hi)) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title));
    let mut tick = hi;
    while tick >= lo - 1e-9 {
        let y = sy(tick);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#e0e0e0"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{tick}</text>"#, left - 6.0, y + 4.0);
        tick -= ((hi - lo) / 50.0).ceil().max(1.0) * 10.0;
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let n = (len - 1) * i / 4;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{n}</text>"#, sx(n), top + ph + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(s, r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">dB</text>"#, top + ph / 2.0, top + ph / 2.0);

    let stride = (len / 1000).max(1);
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = c
            .values
            .iter()
            .enumerate()
            .filter(|(n, v)| n % stride == 0 && v.is_finite())
            .map(|(n, &v)| format!("{:.2},{:.2}", sx(n), sy(v)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, points.join(" "));
        let ly = top + 14.0 + 16.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10">{}</text>"#, lx + 22.0, ly + 4.0, escape(&c.name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_outputs(config: &ExperimentConfig, setup: &NetworkSetup, curves: Vec<Curve>, sweep: Vec<SweepPoint>) -> Result<RunOutput> {
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(CURVE_FILE);
    write_file(&csv, &render_csv(&curves))?;
    let summary = if config.mode == Mode::Sweep {
        let path = dir.join(SUMMARY_FILE);
        write_file(&path, &render_summary(&sweep))?;
        Some(path)
    } else {
        None
    };
    let manifest = dir.join(MANIFEST_FILE);
    write_file(&manifest, &render_manifest(config, setup, &curves))?;
    let plot = if config.plot {
        let path = dir.join(PLOT_FILE);
        let title = format!("{} (N = {}, {} trials, seed {})", config.mode.as_str(), config.node_count, config.trials, config.master_seed);
        write_file(&path, &render_svg(&title, &curves))?;
        Some(path)
    } else {
        None
    };
    Ok(RunOutput {
        curves,
        sweep,
        csv,
        summary,
        manifest,
        plot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let curves = vec![
            Curve {
                name: "a".into(),
                values: vec![-1.5, -2.0],
            },
            Curve {
                name: "b".into(),
                values: vec![0.0, 3.25],
            },
        ];
        assert_eq!(render_csv(&curves), "n,a,b\n0,-1.5,0\n1,-2,3.25\n");
    }

    #[test]
    fn sweep_point_classification() {
        let db = |v: &[f64]| v.iter().map(|d| 10f64.powf(d / 10.0)).collect::<Vec<_>>();
        let p = SweepPoint::classify(0.1, 0.2, &db(&[-20.0, -5.0, -8.0, -12.0, -30.0]), 1);
        assert_eq!(p.convergence_iteration, Some(3));
        assert!(p.stable);
        let bursty = SweepPoint::classify(0.8, 0.8, &db(&[-5.0, -15.0, -3.0, -20.0, -20.0]), 1);
        assert_eq!(bursty.convergence_iteration, Some(1));
        assert!(!bursty.stable);
        let ripple = db(&[-5.0, -5.0, -9.0, -11.0, -9.5, -12.0, -14.0, -16.0, -20.0, -20.0]);
        assert!(!SweepPoint::classify(0.1, 0.1, &ripple, 1).stable);
        assert!(SweepPoint::classify(0.1, 0.1, &ripple, 2).stable);
        let diverged = SweepPoint::classify(0.8, 0.8, &[1.0, f64::INFINITY], 2);
        assert!(!diverged.stable);
        assert_eq!(diverged.convergence_iteration, None);
    }

    #[test]
    fn svg_is_self_contained() {
        let svg = render_svg(
            "t<1>",
            &[Curve {
                name: "c".into(),
                values: vec![0.0, -10.0, f64::NAN, -20.0],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t&lt;1&gt;"));
        assert!(!svg.contains("NaN"));
    }
}
