//! JSON result documents and filter-response tables.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{filter_response, FilterCoefficients};
use crate::pipeline::{RunResult, SweepTable};

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_results(result: &RunResult, path: &Path) -> Result<()> {
    write_json(result, path)
}

pub fn read_results(path: &Path) -> Result<RunResult> {
    read_json(path)
}

pub fn write_sweep(table: &SweepTable, path: &Path) -> Result<()> {
    write_json(table, path)
}

pub fn read_sweep(path: &Path) -> Result<SweepTable> {
    read_json(path)
}

/// `points` evenly spaced values covering the normalized-Laplacian
/// spectrum `[0, 2]`, endpoints included.
pub fn response_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| 2.0 * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Writes `lambda<TAB>H(lambda)` lines.
pub fn write_filter_response(h: &FilterCoefficients, grid: &[f64], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (lambda, value) in grid.iter().zip(filter_response(h, grid)) {
        writeln!(out, "{lambda}\t{value}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_spectrum() {
        let g = response_grid(5);
        assert_eq!(g, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(response_grid(0).is_empty());
    }

    #[test]
    fn response_file_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.tsv");
        let h = FilterCoefficients::normalized(vec![1.0, -1.0]).unwrap();
        write_filter_response(&h, &response_grid(3), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let rows: Vec<(f64, f64)> = text
            .lines()
            .map(|l| {
                let (a, b) = l.split_once('\t').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 3);
        let c = std::f64::consts::FRAC_1_SQRT_2;
        for (lambda, value) in rows {
            assert!((value - c * (1.0 - lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_results(Path::new("/nonexistent/run.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.json"));
    }
}
