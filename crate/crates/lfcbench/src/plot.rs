//! Static SVG line charts of a step log, one file per figure.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use thiserror::Error;

use crate::output::{write_atomic, LogTable, OutputError};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("log has no `{0}` columns")]
    MissingColumns(&'static str),
    #[error("log has no rows")]
    Empty,
    #[error("drawing failed: {0}")]
    Draw(String),
}

/// Points kept per series; longer logs are reduced to per-bucket extremes.
pub const MAX_POINTS: usize = 2400;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Figure {
    pub name: &'static str,
    /// Column prefix of a per-area group, or a full column name.
    pub column: &'static str,
    pub per_area: bool,
    pub title: &'static str,
    pub unit: &'static str,
}

pub const FIGURES: [Figure; 8] = [
    Figure {
        name: "angle",
        column: "ddelta",
        per_area: true,
        title: "Angle deviation",
        unit: "deg",
    },
    Figure {
        name: "frequency",
        column: "df",
        per_area: true,
        title: "Frequency deviation",
        unit: "Hz",
    },
    Figure {
        name: "energy",
        column: "e",
        per_area: true,
        title: "Stored energy",
        unit: "GWh",
    },
    Figure {
        name: "dispatch",
        column: "udisp",
        per_area: true,
        title: "Dispatchable generation deviation",
        unit: "GW",
    },
    Figure {
        name: "charge",
        column: "uc",
        per_area: true,
        title: "Storage charging power",
        unit: "GW",
    },
    Figure {
        name: "discharge",
        column: "ud",
        per_area: true,
        title: "Storage discharging power",
        unit: "GW",
    },
    Figure {
        name: "tie",
        column: "tie",
        per_area: true,
        title: "Tie-line power",
        unit: "GW",
    },
    Figure {
        name: "cost",
        column: "cumulative_cost",
        per_area: false,
        title: "Cumulative stage cost",
        unit: "-",
    },
];

pub type Series = (String, Vec<(f64, f64)>);

/// Keeps the first and last point and, per bucket, the smallest and the
/// largest value in their original order.
pub fn decimate(ys: &[f64], max_points: usize) -> Vec<(f64, f64)> {
    let x = |k: usize| (k + 1) as f64;
    if ys.len() <= max_points.max(4) {
        return ys.iter().enumerate().map(|(k, &y)| (x(k), y)).collect();
    }
    let buckets = (max_points / 2).max(1);
    let width = ys.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(2 * buckets + 2);
    out.push((x(0), ys[0]));
    for start in (0..ys.len()).step_by(width) {
        let end = (start + width).min(ys.len());
        let (mut lo, mut hi) = (start, start);
        for k in start..end {
            if ys[k] < ys[lo] {
                lo = k;
            }
            if ys[k] > ys[hi] {
                hi = k;
            }
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push((x(a), ys[a]));
        if b != a {
            out.push((x(b), ys[b]));
        }
    }
    let last = ys.len() - 1;
    out.push((x(last), ys[last]));
    out.dedup_by(|p, q| p.0 == q.0);
    out
}

pub fn figure_series(table: &LogTable, fig: &Figure) -> Result<Vec<Series>, PlotError> {
    if table.is_empty() {
        return Err(PlotError::Empty);
    }
    let raw = if fig.per_area {
        table.group(fig.column)
    } else {
        table
            .column(fig.column)
            .map(|v| vec![(fig.column.to_string(), v)])
            .unwrap_or_default()
    };
    if raw.is_empty() {
        return Err(PlotError::MissingColumns(fig.column));
    }
    Ok(raw
        .into_iter()
        .map(|(code, ys)| (code, decimate(&ys, MAX_POINTS)))
        .collect())
}

fn draw_err<E: std::fmt::Display>(e: E) -> PlotError {
    PlotError::Draw(e.to_string())
}

/// Renders one chart to an SVG document.
pub fn render(fig: &Figure, series: &[Series]) -> Result<String, PlotError> {
    let points = || series.iter().flat_map(|(_, p)| p.iter());
    let x_max = points().map(|p| p.0).fold(1.0f64, f64::max);
    let (mut y_lo, mut y_hi) = points().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.1), hi.max(p.1))
    });
    if !(y_lo.is_finite() && y_hi.is_finite()) {
        (y_lo, y_hi) = (-1.0, 1.0);
    }
    let pad = if y_hi > y_lo {
        0.05 * (y_hi - y_lo)
    } else {
        y_lo.abs().max(1.0)
    };
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (1280, 720)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(fig.title, ("sans-serif", 22))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(80)
            .build_cartesian_2d(0.0..x_max, y_lo..y_hi)
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc("step")
            .y_desc(fig.unit)
            .draw()
            .map_err(draw_err)?;
        for (i, (label, pts)) in series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(1)))
                .map_err(draw_err)?
                .label(label.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 14, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::UpperRight)
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .label_font(("sans-serif", 11))
            .draw()
            .map_err(draw_err)?;
        root.present().map_err(draw_err)?;
    }
    Ok(svg)
}

/// Writes every figure of `log` into `out_dir` as `<stem>.<figure>.svg`.
pub fn plot_log(log: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let table = LogTable::read(log)?;
    let name = log
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name.strip_suffix(".csv").unwrap_or(&name).to_string();
    let mut written = Vec::new();
    for fig in &FIGURES {
        let series = figure_series(&table, fig)?;
        let svg = render(fig, &series)?;
        let path = out_dir.join(format!("{stem}.{}.svg", fig.name));
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
