//! Numeric CSV tables with missing cells.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::Dataset;

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a rectangular table. The first row is a header when any of its
/// cells is neither numeric nor a missing-value token. Empty cells and `NA`
/// are missing. Line and column numbers in errors are 1-based.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let mut names = None;
    if let Some(&(_, first)) = lines.peek() {
        let cells: Vec<&str> = first.split(',').map(str::trim).collect();
        if cells.iter().any(|c| !is_missing(c) && parse_cell(c).is_none()) {
            names = Some(cells.iter().map(|c| c.to_string()).collect::<Vec<_>>());
            lines.next();
        }
    }

    let mut width = names.as_ref().map(Vec::len);
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut n_rows = 0;
    for (line, row) in lines {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    line,
                    column: cells.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", cells.len()),
                })
            }
            _ => {}
        }
        for (j, cell) in cells.iter().enumerate() {
            if is_missing(cell) {
                values.push(f64::NAN);
                mask.push(false);
            } else {
                let v = parse_cell(cell).ok_or_else(|| Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("`{cell}` is not a finite number"),
                })?;
                values.push(v);
                mask.push(true);
            }
        }
        n_rows += 1;
    }
    let d = width.unwrap_or(0);
    if n_rows == 0 || d == 0 {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let x = DMatrix::from_row_slice(n_rows, d, &values);
    let observed = DMatrix::from_row_slice(n_rows, d, &mask);
    Dataset::new(x, observed)?.with_column_names(names)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// Serialises a dataset; missing cells are written as `NA`.
pub fn to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    if let Some(names) = data.column_names() {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for n in 0..data.n_rows() {
        let row: Vec<String> = (0..data.n_dims())
            .map(|d| data.value(n, d).map_or_else(|| "NA".to_string(), format_value))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(data)).map_err(|e| Error::io(path, e))
}

/// Writes a matrix preceded by a `# rows,cols` shape line.
pub fn matrix_to_csv<T: std::fmt::Display>(rows: usize, cols: usize, get: impl Fn(usize, usize) -> T) -> String {
    let mut out = format!("# {rows},{cols}\n");
    for i in 0..rows {
        let row: Vec<String> = (0..cols).map(|j| get(i, j).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reads a matrix written by [`matrix_to_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate();
    let (rows, cols) = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix("# "))
        .and_then(|l| l.split_once(','))
        .and_then(|(r, c)| Some((r.trim().parse::<usize>().ok()?, c.trim().parse::<usize>().ok()?)))
        .ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "missing `# rows,cols` shape header".into(),
        })?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(Error::Parse {
                line: i + 1,
                column: 1,
                message: format!("expected {cols} fields, found {}", cells.len()),
            });
        }
        for (j, c) in cells.iter().enumerate() {
            values.push(c.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                column: j + 1,
                message: format!("`{c}` is not a number"),
            })?);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("header declares {rows} rows, found {seen}"),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}
