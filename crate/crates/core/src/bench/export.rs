//! CSV tables and SVG figures.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::SweepTable;
use crate::error::{Error, Result};
use crate::metrics::beampattern_csv;

pub const CELL_COLUMNS: [&str; 13] = [
    "param",
    "value",
    "algorithm",
    "seed",
    "scenario_hash",
    "status",
    "crb",
    "crb_db",
    "crb_bound",
    "f_hz",
    "outer_iterations",
    "inner_iterations",
    "min_slack",
];

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "param",
    "value",
    "algorithm",
    "n_ok",
    "n_cells",
    "crb_mean",
    "crb_std",
    "crb_db_mean",
];

pub const TIMING_COLUMNS: [&str; 4] = ["value", "algorithm", "seed", "wall_s"];

pub const CONVERGENCE_COLUMNS: [&str; 4] = ["series", "iteration", "crb", "crb_db"];

/// Shortest round-trip form, in scientific notation for very small or large
/// magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-3..1e7).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub(super) fn cells_csv(t: &SweepTable) -> Result<String> {
    to_csv(
        &CELL_COLUMNS,
        t.cells.iter().map(|c| {
            vec![
                t.param.name().to_string(),
                fmt_num(c.value),
                c.algorithm.name().to_string(),
                c.seed.to_string(),
                c.scenario_hash.clone(),
                c.status.name().to_string(),
                opt(c.crb),
                opt(c.crb_db()),
                opt(c.crb_bound),
                opt(c.f_hz),
                c.outer_iterations.to_string(),
                c.inner_iterations.to_string(),
                opt(c.min_slack),
            ]
        }),
    )
}

pub(super) fn summary_csv(t: &SweepTable) -> Result<String> {
    to_csv(
        &SUMMARY_COLUMNS,
        t.summary().into_iter().map(|r| {
            vec![
                t.param.name().to_string(),
                fmt_num(r.value),
                r.algorithm.name().to_string(),
                r.n_ok.to_string(),
                r.n_cells.to_string(),
                opt(r.crb_mean),
                opt(r.crb_std),
                opt(r.crb_db_mean),
            ]
        }),
    )
}

pub(super) fn timings_csv(t: &SweepTable) -> Result<String> {
    to_csv(
        &TIMING_COLUMNS,
        t.cells.iter().map(|c| {
            vec![
                fmt_num(c.value),
                c.algorithm.name().to_string(),
                c.seed.to_string(),
                format!("{:.3}", c.wall_s),
            ]
        }),
    )
}

/// One objective trace, labelled.
#[derive(Debug, Clone)]
pub struct ConvergenceSeries {
    pub label: String,
    pub crb: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Convergence,
    Beampattern,
    Sweep,
}

pub enum PlotData<'a> {
    Convergence(&'a [ConvergenceSeries]),
    /// `(theta_rad, linear gain)` points and the target angle in radians.
    Beampattern { points: &'a [(f64, f64)], target: f64 },
    Sweep(&'a SweepTable),
}

impl PlotData<'_> {
    pub fn kind(&self) -> PlotKind {
        match self {
            PlotData::Convergence(_) => PlotKind::Convergence,
            PlotData::Beampattern { .. } => PlotKind::Beampattern,
            PlotData::Sweep(_) => PlotKind::Sweep,
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            PlotData::Convergence(s) => s.iter().all(|x| x.crb.is_empty()),
            PlotData::Beampattern { points, .. } => points.is_empty(),
            PlotData::Sweep(t) => t.cells.is_empty(),
        }
    }
}

/// Paths written by [`export_plot`].
#[derive(Debug, Clone)]
pub struct Exported {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

fn db(x: f64) -> f64 {
    10.0 * x.max(1e-300).log10()
}

fn draw_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() {
        padded(lo, hi)
    } else {
        (-1.0, 1.0)
    }
}

const PALETTE: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

/// `(label, points)` curves on one set of axes.
fn line_chart(path: &Path, title: &str, x_desc: &str, y_desc: &str, curves: &[(String, Vec<(f64, f64)>)], marker: Option<(f64, f64)>) -> Result<()> {
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(path, e))?;
    let (x0, x1) = bounds(curves.iter().flat_map(|c| c.1.iter().map(|p| p.0)));
    let (y0, y1) = bounds(curves.iter().flat_map(|c| c.1.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| draw_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(|e| draw_err(path, e))?;
    for (i, (label, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let finite: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1.is_finite()).collect();
        chart
            .draw_series(LineSeries::new(finite.clone(), color.stroke_width(2)))
            .map_err(|e| draw_err(path, e))?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(finite.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| draw_err(path, e))?;
    }
    if let Some(m) = marker {
        chart
            .draw_series(std::iter::once(TriangleMarker::new(m, 8, RED.filled())))
            .map_err(|e| draw_err(path, e))?;
    }
    if curves.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| draw_err(path, e))?;
    }
    root.present().map_err(|e| draw_err(path, e))?;
    Ok(())
}

fn convergence_csv(series: &[ConvergenceSeries]) -> Result<String> {
    to_csv(
        &CONVERGENCE_COLUMNS,
        series.iter().flat_map(|s| {
            s.crb
                .iter()
                .enumerate()
                .map(|(i, &v)| vec![s.label.clone(), i.to_string(), fmt_num(v), fmt_num(db(v))])
        }),
    )
}

/// Writes `<stem>.csv` and `<stem>.svg` into `dir`. Empty data is an error
/// and leaves no files behind.
pub fn export_plot(data: &PlotData, dir: &Path, stem: &str) -> Result<Exported> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let svg_path = dir.join(format!("{stem}.svg"));
    let (csv, title, x_desc, y_desc, curves, marker) = match data {
        PlotData::Convergence(series) => {
            let curves = series
                .iter()
                .map(|s| (s.label.clone(), s.crb.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, db(v))).collect()))
                .collect();
            (convergence_csv(series)?, "Convergence".to_string(), "outer iteration", "CRB (dB)", curves, None)
        }
        PlotData::Beampattern { points, target } => {
            let pts: Vec<(f64, f64)> = points.iter().map(|&(t, g)| (t.to_degrees(), db(g))).collect();
            let peak = pts.iter().copied().fold(None, |best: Option<(f64, f64)>, p| match best {
                Some(b) if b.1 >= p.1 => Some(b),
                _ => Some(p),
            });
            let title = format!("Beampattern (target at {:.1} deg)", target.to_degrees());
            (beampattern_csv(points), title, "angle (deg)", "gain (dB)", vec![("beampattern".to_string(), pts)], peak)
        }
        PlotData::Sweep(t) => {
            let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
            for r in t.summary() {
                let name = r.algorithm.name().to_string();
                let y = r.crb_db_mean.unwrap_or(f64::NAN);
                match curves.iter_mut().find(|c| c.0 == name) {
                    Some(c) => c.1.push((r.value, y)),
                    None => curves.push((name, vec![(r.value, y)])),
                }
            }
            let x_desc: &'static str = match t.param {
                super::SweepParam::NUsers => "number of users",
                super::SweepParam::PowerBudget => "power budget (W)",
                super::SweepParam::SinrThreshold => "SINR threshold (dB)",
                super::SweepParam::RateMin => "required process rate (bit/s)",
            };
            (t.summary_csv()?, "CRB sweep".to_string(), x_desc, "mean CRB (dB)", curves, None)
        }
    };
    let result = fs::write(&csv_path, csv)
        .map_err(|e| Error::io(&csv_path, e))
        .and_then(|_| line_chart(&svg_path, &title, x_desc, y_desc, &curves, marker));
    if let Err(e) = result {
        let _ = fs::remove_file(&csv_path);
        let _ = fs::remove_file(&svg_path);
        return Err(e);
    }
    Ok(Exported {
        csv: csv_path,
        svg: svg_path,
    })
}
