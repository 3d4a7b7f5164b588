use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::run::{mean_sd, ResultRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// Mean brown cost against load, one curve per algorithm and υ_max.
    BrownCostVsLoad,
    /// Mean committed batches against load.
    MigrationsVsLoad,
    /// Mean brown cost against υ_max at each load.
    CostVsUmax,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::BrownCostVsLoad, Figure::MigrationsVsLoad, Figure::CostVsUmax];

    pub fn name(self) -> &'static str {
        match self {
            Figure::BrownCostVsLoad => "brown-cost-vs-load",
            Figure::MigrationsVsLoad => "migrations-vs-load",
            Figure::CostVsUmax => "cost-vs-umax",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = PlotError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| PlotError::UnknownFigure(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("unknown figure `{0}` (expected brown-cost-vs-load, migrations-vs-load or cost-vs-umax)")]
    UnknownFigure(String),
    #[error("no result rows in the requested slice")]
    Empty,
    #[error("missing cells (algorithm, umax, load): {}", .0.iter().map(|(a, u, l)| format!("({a}, {u}, {l})")).collect::<Vec<_>>().join(", "))]
    Missing(Vec<(String, f64, f64)>),
}

/// Restricts which cells a figure draws from. `None` means every value
/// present in the results.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Slice {
    pub algorithms: Option<Vec<String>>,
    pub umax: Option<Vec<f64>>,
    pub loads: Option<Vec<f64>>,
}

/// One point of one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub algorithm: String,
    /// The parameter held fixed along the curve (υ_max or load).
    pub fixed: f64,
    pub x: f64,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Series for `figure`: one curve per algorithm (and per value of the
/// fixed parameter), y = mean over replications.
pub fn emit_plot_data(rows: &[ResultRow], figure: Figure, slice: &Slice) -> Result<Vec<SeriesPoint>, PlotError> {
    let mut algorithms: Vec<String> = Vec::new();
    for r in rows {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm.clone());
        }
    }
    let algorithms = slice.algorithms.clone().unwrap_or(algorithms);
    let umaxes = slice.umax.clone().unwrap_or_else(|| distinct(rows.iter().map(|r| r.umax)));
    let loads = slice.loads.clone().unwrap_or_else(|| distinct(rows.iter().map(|r| r.load)));
    if rows.is_empty() || algorithms.is_empty() || umaxes.is_empty() || loads.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut missing = Vec::new();
    let mut points = Vec::new();
    for a in &algorithms {
        let cells: Vec<(f64, f64)> = match figure {
            Figure::CostVsUmax => loads.iter().flat_map(|&l| umaxes.iter().map(move |&u| (l, u))).collect(),
            _ => umaxes.iter().flat_map(|&u| loads.iter().map(move |&l| (u, l))).collect(),
        };
        for (fixed, x) in cells {
            let (umax, load) = if figure == Figure::CostVsUmax { (x, fixed) } else { (fixed, x) };
            let ys: Vec<f64> = rows
                .iter()
                .filter(|r| &r.algorithm == a && r.umax == umax && r.load == load)
                .map(|r| if figure == Figure::MigrationsVsLoad { r.migrations as f64 } else { r.obj2 })
                .collect();
            if ys.is_empty() {
                missing.push((a.clone(), umax, load));
                continue;
            }
            let (mean, sd) = mean_sd(&ys);
            points.push(SeriesPoint { algorithm: a.clone(), fixed, x, mean, sd, n: ys.len() });
        }
    }
    if !missing.is_empty() {
        return Err(PlotError::Missing(missing));
    }
    Ok(points)
}

/// Writes a series as CSV with columns named after the figure's axes.
pub fn write_series(points: &[SeriesPoint], figure: Figure, path: &FsPath) -> Result<(), csv::Error> {
    let (fixed, x, y) = match figure {
        Figure::BrownCostVsLoad => ("umax", "load", "brown_cost_mean"),
        Figure::MigrationsVsLoad => ("umax", "load", "migrations_mean"),
        Figure::CostVsUmax => ("load", "umax", "brown_cost_mean"),
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["algorithm", fixed, x, y, "sd", "n"])?;
    for p in points {
        w.write_record([p.algorithm.clone(), p.fixed.to_string(), p.x.to_string(), p.mean.to_string(), p.sd.to_string(), p.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
