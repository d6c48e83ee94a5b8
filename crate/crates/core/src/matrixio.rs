//! CSV serialization for transition matrices: a header of state names, then
//! one row per source state. Floats use the shortest round-trip form so
//! checkpoints are deterministic and parse back exactly.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Hidden-state names under the block layout: `q<block>_s<state>`.
pub fn hidden_state_names(num_blocks: usize, n_mdp: usize) -> Vec<String> {
    (0..num_blocks * n_mdp)
        .map(|i| format!("q{}_s{}", i / n_mdp, i % n_mdp))
        .collect()
}

pub fn mdp_state_names(n: usize) -> Vec<String> {
    (0..n).map(|s| format!("s{s}")).collect()
}

pub fn matrix_to_csv(m: &Array2<f64>, row_names: &[String], col_names: &[String]) -> String {
    assert_eq!(m.nrows(), row_names.len());
    assert_eq!(m.ncols(), col_names.len());
    let mut out = String::new();
    out.push_str("state");
    for name in col_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, row) in m.rows().into_iter().enumerate() {
        out.push_str(&row_names[i]);
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str, path: &str) -> Result<(Array2<f64>, Vec<String>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 0, "empty matrix file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.is_empty() || cols[0] != "state" {
        return Err(Error::parse(path, 1, "header must start with `state`"));
    }
    let n_cols = cols.len() - 1;
    let mut row_names = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols + 1 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected {} fields, found {}", n_cols + 1, fields.len()),
            ));
        }
        row_names.push(fields[0].to_string());
        for f in &fields[1..] {
            values.push(f.parse::<f64>().map_err(|_| {
                Error::parse(path, lineno + 1, format!("bad number {f:?}"))
            })?);
        }
    }
    let n_rows = row_names.len();
    let m = Array2::from_shape_vec((n_rows, n_cols), values)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok((m, row_names))
}

pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    m: &Array2<f64>,
    row_names: &[String],
    col_names: &[String],
) -> Result<()> {
    crate::write_atomic(path, &matrix_to_csv(m, row_names, col_names))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<(Array2<f64>, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
    matrix_from_csv(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = array![[0.1, 0.9], [1.0 / 3.0, 2.0 / 3.0]];
        let names = mdp_state_names(2);
        let text = matrix_to_csv(&m, &names, &names);
        let (back, rows) = matrix_from_csv(&text, "mem").unwrap();
        assert_eq!(back, m);
        assert_eq!(rows, names);
    }

    #[test]
    fn bad_rows_are_line_numbered() {
        let text = "state,s0\ns0,0.5,0.5\n";
        let err = matrix_from_csv(text, "m.csv").unwrap_err();
        assert!(err.to_string().contains("m.csv:2"));
    }
}
