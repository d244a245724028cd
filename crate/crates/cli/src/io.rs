//! File formats.
//!
//! Curves: a JSON array of `[x, y]` pairs, or a CSV file with header `x,y`;
//! the closing segment is implied. Patterns: a JSON object
//! `{"window": [xmin, xmax, ymin, ymax], "points": [{"x", "y", "curve"}, ...]}`.

use std::fs;
use std::path::{Path, PathBuf};

use markedshapes::curves::{curve_to_srv, Curve, Vec2};
use markedshapes::pointprocess::{MarkedPattern, Window};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> CliResult<T> {
    // serde_json reports "at line L column C"
    serde_json::from_str(text).map_err(|e| CliError::io(path, e))
}

fn parse_csv_coords(path: &Path, text: &str) -> CliResult<Vec<[f64; 2]>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| CliError::io(path, e))?;
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(CliError::io(path, "line 1: expected the header \"x,y\""));
    }
    reader
        .deserialize::<(f64, f64)>()
        .map(|row| row.map(|(x, y)| [x, y]).map_err(|e| CliError::io(path, e)))
        .collect()
}

pub fn read_coords(path: &Path) -> CliResult<Vec<[f64; 2]>> {
    let text = read_text(path)?;
    if is_csv(path) {
        parse_csv_coords(path, &text)
    } else {
        parse_json(path, &text)
    }
}

pub fn read_curve(path: &Path) -> CliResult<Curve> {
    Curve::from_outline(&read_coords(path)?).map_err(|e| CliError::io(path, e))
}

/// Curve files (`.json`, `.csv`) directly inside `dir`, sorted by name.
pub fn curve_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("json" | "csv")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::io(dir, "no curve files (.json or .csv) found"));
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub curve: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub window: [f64; 4],
    pub points: Vec<PointRecord>,
}

impl PatternFile {
    pub fn new(window: &Window, locations: &[Vec2], curves: &[Curve]) -> Self {
        Self {
            window: [window.xmin, window.xmax, window.ymin, window.ymax],
            points: locations
                .iter()
                .zip(curves)
                .map(|(p, c)| PointRecord {
                    x: p.x,
                    y: p.y,
                    curve: c.to_coords(),
                })
                .collect(),
        }
    }

    /// Marked pattern with every mark resampled to `n` points.
    pub fn to_pattern(&self, n: usize) -> markedshapes::Result<MarkedPattern> {
        let [xmin, xmax, ymin, ymax] = self.window;
        let window = Window::new(xmin, xmax, ymin, ymax)?;
        let locations = self.points.iter().map(|p| Vec2::new(p.x, p.y)).collect();
        let marks = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Curve::from_outline(&p.curve)
                    .and_then(|c| curve_to_srv(&c, n))
                    .map_err(|e| markedshapes::Error::InvalidPattern(format!("point {i}: {e}")))
            })
            .collect::<markedshapes::Result<_>>()?;
        MarkedPattern::new(window, locations, marks)
    }
}

pub fn read_pattern(path: &Path, n: usize) -> CliResult<MarkedPattern> {
    let file: PatternFile = parse_json(path, &read_text(path)?)?;
    file.to_pattern(n).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes a CSV with `header` and one record per row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
