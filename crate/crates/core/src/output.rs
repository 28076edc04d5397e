//! CSV archives of intensity grids and gnuplot scripts.
//!
//! A grid file starts with a `#` header: a title line, sorted metadata, the
//! full configuration snapshot between `# config:` and `# columns:`, then the
//! column line itself. Each data row lists the axis coordinates followed by
//! the intensity, with the first axis varying slowest.

use std::fmt::Write as _;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::scan::IntensityGrid;

const INTENSITY_COLUMN: &str = "intensity_arb";

pub fn columns(grid: &IntensityGrid) -> Vec<String> {
    grid.axes
        .iter()
        .map(|a| a.name.clone())
        .chain(std::iter::once(INTENSITY_COLUMN.to_string()))
        .collect()
}

/// Serializes `grid` with its header.
pub fn grid_csv(title: &str, grid: &IntensityGrid, cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# twistchan {title}");
    for (k, v) in &grid.metadata {
        let _ = writeln!(out, "# meta.{k} = {v}");
    }
    let _ = writeln!(out, "# config:");
    for line in cfg.to_text().lines() {
        let _ = writeln!(out, "# {line}");
    }
    let cols = columns(grid).join(",");
    let _ = writeln!(out, "# columns: {cols}");
    let _ = writeln!(out, "{cols}");
    let shape: Vec<usize> = grid.axes.iter().map(|a| a.len()).collect();
    for (flat, v) in grid.values.iter().enumerate() {
        let mut rem = flat;
        let mut idx = vec![0; shape.len()];
        for d in (0..shape.len()).rev() {
            idx[d] = rem % shape[d];
            rem /= shape[d];
        }
        for (axis, i) in grid.axes.iter().zip(&idx) {
            let _ = write!(out, "{},", axis.values[*i]);
        }
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Recovers the configuration snapshot from a grid file.
pub fn config_snapshot(csv: &str) -> Result<RunConfig> {
    let mut lines = csv.lines().skip_while(|l| *l != "# config:");
    if lines.next().is_none() {
        return Err(Error::Config {
            line: 0,
            msg: "file has no configuration snapshot".into(),
        });
    }
    let body: String = lines
        .take_while(|l| !l.starts_with("# columns:"))
        .map(|l| format!("{}\n", l.strip_prefix("# ").unwrap_or(l)))
        .collect();
    RunConfig::parse(&body)
}

/// Gnuplot script plotting each listed CSV file.
pub fn gnuplot_script(files: &[(String, usize)]) -> String {
    let mut out = String::from("set datafile separator ','\nset terminal pngcairo size 900,700\n");
    for (file, dims) in files {
        let stem = file.trim_end_matches(".csv");
        let _ = writeln!(out, "\nset output '{stem}.png'");
        let _ = writeln!(out, "set title '{stem}' noenhanced");
        if *dims == 2 {
            let _ = writeln!(out, "set view map\nset xlabel 'column 2'\nset ylabel 'column 1'");
            let _ = writeln!(out, "plot '{file}' every ::1 using 2:1:3 with image notitle");
        } else {
            let _ = writeln!(out, "set xlabel 'column 1'\nset ylabel 'intensity (arb.)'");
            let _ = writeln!(out, "plot '{file}' every ::1 using 1:2 with linespoints notitle");
        }
    }
    out
}
