//! Field CSV encoding and deferred artifact writes.

use std::fs;
use std::path::{Path, PathBuf};

use nisakns_core::soliton::ScalarField;
use nisakns_core::{Grid, SquareMatrix};
use serde::Serialize;

use crate::error::CliError;

/// A file produced by a run. Nothing touches the disk until every
/// computation of the run has finished.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut contents = serde_json::to_string_pretty(value).expect("report serializes");
        contents.push('\n');
        Self {
            name: name.into(),
            contents,
        }
    }
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

fn number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Matrix fields sampled t-major on `grid`. Each field contributes the
/// columns `re_<name>_<i><j>` and `im_<name>_<i><j>` with 1-based indices.
pub fn matrix_csv(grid: &Grid, fields: &[(String, &[SquareMatrix])]) -> String {
    let dim = fields
        .first()
        .map_or(0, |(_, v)| v.first().map_or(0, SquareMatrix::dim));
    let mut out = String::from("x,t");
    for (name, values) in fields {
        assert_eq!(
            values.len(),
            grid.nx * grid.nt(),
            "field {name} does not match the grid"
        );
        for i in 1..=dim {
            for j in 1..=dim {
                out += &format!(",re_{name}_{i}{j},im_{name}_{i}{j}");
            }
        }
    }
    out.push('\n');
    for (ti, &t) in grid.t_samples.iter().enumerate() {
        for k in 0..grid.nx {
            out += &number(grid.x(k));
            out.push(',');
            out += &number(t);
            for (_, values) in fields {
                let m = &values[ti * grid.nx + k];
                for z in m.as_slice() {
                    out.push(',');
                    out += &number(z.re);
                    out.push(',');
                    out += &number(z.im);
                }
            }
            out.push('\n');
        }
    }
    out
}

/// `x,t,<name>` rows of a scalar field.
pub fn scalar_csv(field: &ScalarField, name: &str) -> String {
    let grid = &field.grid;
    let mut out = format!("x,t,{name}\n");
    for (ti, &t) in grid.t_samples.iter().enumerate() {
        for k in 0..grid.nx {
            out += &format!(
                "{},{},{}\n",
                number(grid.x(k)),
                number(t),
                number(field.at(ti, k))
            );
        }
    }
    out
}

/// Parsed numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("file is empty".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() < 3 || header[0] != "x" || header[1] != "t" {
        return Err(bad(
            "header must start with `x,t` and name at least one field column".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(bad(format!(
                "row {} has {} columns, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(bad("file has a header but no data rows".into()));
    }
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nisakns_core::C64;

    #[test]
    fn matrix_csv_layout() {
        let grid = Grid::new(0.0, 1.0, 11, vec![0.0, 0.5]).unwrap();
        let values: Vec<SquareMatrix> = (0..22)
            .map(|k| {
                SquareMatrix::from_diag(&[C64::new(k as f64, 0.5), C64::new(-(k as f64), 0.0)])
            })
            .collect();
        let csv = matrix_csv(&grid, &[("s".into(), &values)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "x,t,re_s_11,im_s_11,re_s_12,im_s_12,re_s_21,im_s_21,re_s_22,im_s_22"
        );
        assert_eq!(lines.len(), 23);
        assert!(lines[12].starts_with(
            "0.0000000000000000e0,5.0000000000000000e-1,1.1000000000000000e1,5.0000000000000000e-1"
        ));
        let first = lines[1].split(',').nth(2).unwrap();
        assert_eq!(first.parse::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [0.1, -2.0 / 3.0, 1e-300, std::f64::consts::PI] {
            assert_eq!(number(v).parse::<f64>().unwrap(), v);
        }
    }
}
