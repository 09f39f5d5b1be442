//! Static SVG plots.

use std::path::{Path, PathBuf};

use cathnav::environment::path::PlannedPath;
use cathnav::geometry::Vec3;
use cathnav::learner::IterationLog;
use cathnav::{Error, Result};
use plotters::prelude::*;

use crate::report::EvaluationReport;

fn plot_error(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

/// One line chart with any number of named series over a shared x axis.
fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> Result<()> {
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_error)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_error)?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_error)?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    if series.len() > 1 {
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_error)?;
    }
    root.present().map_err(plot_error)?;
    Ok(())
}

pub fn plot_log(rows: &[IterationLog], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let x = |f: fn(&IterationLog) -> f64| rows.iter().map(|r| (r.env_steps as f64, f(r))).collect::<Vec<_>>();
    let files = vec![out.join("success_rate.svg"), out.join("losses.svg"), out.join("theta_max.svg")];
    line_chart(&files[0], "Training success rate", "environment steps", "success rate", &[("success rate", x(|r| r.success_rate))])?;
    line_chart(
        &files[1],
        "Training losses",
        "environment steps",
        "loss",
        &[("L_PPO", x(|r| r.l_ppo)), ("L_GAIL", x(|r| r.l_gail)), ("L_BC", x(|r| r.l_bc)), ("L_curiosity", x(|r| r.l_curiosity))],
    )?;
    line_chart(&files[2], "Curriculum bend limit", "environment steps", "theta_max (rad)", &[("theta_max", x(|r| r.theta_max_current))])?;
    Ok(files)
}

/// Tracking error against time, one series per episode.
pub fn plot_report(report: &EvaluationReport, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let dt = report.metrics.episodes.iter().find(|e| e.t_s > 0).map_or(0.1, |e| e.t / e.t_s as f64);
    let mut series = Vec::new();
    let mut off = 0;
    for (i, e) in report.metrics.episodes.iter().enumerate().take(10) {
        // each trajectory holds the start point plus one point per step
        let n = e.t_s + 1;
        let Some(chunk) = report.metrics.t_r_series.get(off..off + n) else { break };
        series.push((i, chunk.iter().enumerate().map(|(k, v)| (k as f64 * dt, *v)).collect::<Vec<_>>()));
        off += n;
    }
    let names: Vec<String> = series.iter().map(|(i, _)| format!("episode {i}")).collect();
    let named: Vec<(&str, Vec<(f64, f64)>)> = names.iter().zip(series).map(|(n, (_, s))| (n.as_str(), s)).collect();
    let file = out.join("tracking_error.svg");
    line_chart(&file, "Tracking error", "time (s)", "T_r (mm)", &named)?;
    Ok(vec![file])
}

/// Planned path and centerline in the x-y and z-y projections.
pub fn plot_path(path: &PlannedPath, centerline: &[Vec3<f64>], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let pts = path.positions();
    let xy = |p: &[Vec3<f64>]| p.iter().map(|v| (v.x, v.y)).collect::<Vec<_>>();
    let zy = |p: &[Vec3<f64>]| p.iter().map(|v| (v.z, v.y)).collect::<Vec<_>>();
    let files = vec![out.join("path_xy.svg"), out.join("path_zy.svg")];
    line_chart(&files[0], "Planned path (x-y)", "x (mm)", "y (mm)", &[("centerline", xy(centerline)), ("planned", xy(&pts))])?;
    line_chart(&files[1], "Planned path (z-y)", "z (mm)", "y (mm)", &[("centerline", zy(centerline)), ("planned", zy(&pts))])?;
    Ok(files)
}
