//! SVG line charts of a scenario result.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::scenario::{ScenarioKind, ScenarioResult, CHARTS};
use crate::AC_COUNT;

const COLORS: [RGBColor; 5] = [BLUE, RED, GREEN, MAGENTA, BLACK];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// One chart with one line per series.
pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| Error::Plot(format!("{}: {e}", path.display()));
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Err(Error::Plot(format!("{}: no data", path.display())));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y1 = if y1 > 0.0 { y1 * 1.1 } else { 1.0 };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(|e| err(&e))?;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    if series.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(&e))?;
    }
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

pub(crate) fn write_charts(result: &ScenarioResult, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let x_label = match result.scenario.kind {
        ScenarioKind::CsthSweep => "association CSTH (dBm)",
        _ => "arrival rate (pkt/s)",
    };
    let line = |label: &str, f: &dyn Fn(usize) -> f64| Series {
        label: label.to_string(),
        points: result.points.iter().enumerate().map(|(i, p)| (p.value, f(i))).collect(),
    };
    let per_ac = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Series> {
        (0..AC_COUNT).map(|k| line(&format!("AC{k}"), &|i| f(i, k))).collect()
    };
    let pts = &result.points;
    let mut files = Vec::new();
    for name in CHARTS {
        let (y_label, series) = match name {
            "backoff" => ("mean backoff (us)", per_ac(&|i, k| pts[i].summary.backoff_us[k].mean)),
            "waiting" => ("mean waiting (us)", per_ac(&|i, k| pts[i].summary.waiting_us[k].mean)),
            "collisions" => ("collisions per second", vec![line("all", &|i| pts[i].summary.collisions.mean)]),
            "drop" => ("drop ratio", vec![line("all", &|i| pts[i].summary.drop_ratio.mean)]),
            "throughput" => ("throughput (Mbps)", vec![line("all", &|i| pts[i].summary.throughput_mbps.mean)]),
            _ => ("control / data airtime", vec![line("all", &|i| pts[i].summary.overhead_ratio.mean)]),
        };
        let path = dir.join(format!("{stem}-{name}.svg"));
        line_chart(&path, &format!("{} {name}", result.scenario.kind), x_label, y_label, &series)?;
        files.push(path);
    }
    Ok(files)
}
