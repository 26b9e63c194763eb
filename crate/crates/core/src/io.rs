//! Plain-text file formats.
//!
//! Every format ignores blank lines and lines starting with `#`. Error
//! positions are 1-based line numbers and field numbers.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::Triplet;

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_field(tok: &str, path: &str, line: usize, column: usize, allow_missing: bool) -> Result<f64> {
    let tok = tok.trim();
    if allow_missing && (tok.is_empty() || tok.eq_ignore_ascii_case("na") || tok.eq_ignore_ascii_case("nan")) {
        return Ok(f64::NAN);
    }
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.into(),
            line,
            column,
            message: format!("expected a number, found `{tok}`"),
        }),
    }
}

fn parse_rows(text: &str, path: &str, allow_missing: bool) -> Result<DMatrix<f64>> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (line, l) in data_lines(text) {
        let fields: Vec<&str> = l.split(',').collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    column: fields.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            _ => {}
        }
        for (c, tok) in fields.iter().enumerate() {
            values.push(parse_field(tok, path, line, c + 1, allow_missing)?);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Parse {
        path: path.into(),
        line: 1,
        column: 1,
        message: "no data rows".into(),
    })?;
    Ok(DMatrix::from_row_slice(rows, width, &values))
}

/// Dense curves, one per row. Empty fields and `NA` become `NaN`.
pub fn parse_dense(text: &str, path: &str) -> Result<DMatrix<f64>> {
    parse_rows(text, path, true)
}

/// Numeric matrix with every entry present.
pub fn parse_matrix(text: &str, path: &str) -> Result<DMatrix<f64>> {
    parse_rows(text, path, false)
}

/// Rows `curve_id,t,y`, with an optional header line of exactly those names.
/// Curves are returned in order of first appearance.
pub fn parse_sparse(text: &str, path: &str) -> Result<Vec<Vec<Triplet>>> {
    let mut ids: Vec<String> = Vec::new();
    let mut curves: Vec<Vec<Triplet>> = Vec::new();
    let mut first = true;
    for (line, l) in data_lines(text) {
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if first && fields == ["curve_id", "t", "y"] {
            first = false;
            continue;
        }
        first = false;
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.into(),
                line,
                column: fields.len().min(3) + 1,
                message: format!("expected `curve_id,t,y`, found {} fields", fields.len()),
            });
        }
        let t = parse_field(fields[1], path, line, 2, false)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Parse {
                path: path.into(),
                line,
                column: 2,
                message: format!("time {t} outside [0, 1]"),
            });
        }
        let y = parse_field(fields[2], path, line, 3, false)?;
        let k = match ids.iter().position(|id| id == fields[0]) {
            Some(k) => k,
            None => {
                ids.push(fields[0].to_string());
                curves.push(Vec::new());
                ids.len() - 1
            }
        };
        curves[k].push((t, y));
    }
    Ok(curves)
}

/// Comma-separated rows with shortest round-trip float formatting.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_value(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

/// `# `-prefixed copy of every line in `header`.
pub fn comment_block(header: &str) -> String {
    header.lines().map(|l| format!("# {l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_with_missing() {
        let m = parse_dense("# curves\n1,2,3\n4,,NA\n", "x.csv").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 3));
        assert_eq!(m[(1, 0)], 4.0);
        assert!(m[(1, 1)].is_nan() && m[(1, 2)].is_nan());
    }

    #[test]
    fn errors_carry_positions() {
        match parse_matrix("1,2\n3,x\n", "m.csv").unwrap_err() {
            Error::Parse { line, column, path, .. } => assert_eq!((line, column, path.as_str()), (2, 2, "m.csv")),
            e => panic!("{e}"),
        }
        match parse_matrix("1,2\n3\n", "m.csv").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        assert!(parse_matrix("1,NA\n", "m.csv").is_err());
        assert!(parse_matrix("# only comments\n", "m.csv").is_err());
    }

    #[test]
    fn sparse_groups_by_first_appearance() {
        let text = "curve_id,t,y\nb,0.1,1\na,0.2,2\nb,0.3,3\n";
        let c = parse_sparse(text, "s.csv").unwrap();
        assert_eq!(c, vec![vec![(0.1, 1.0), (0.3, 3.0)], vec![(0.2, 2.0)]]);
        assert!(parse_sparse("a,1.5,1\n", "s.csv").is_err());
        assert!(parse_sparse("a,0.5\n", "s.csv").is_err());
    }

    #[test]
    fn matrix_text_round_trips_exactly() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, 2e-300, -7.5]);
        let text = format!("{}{}", comment_block("gpgraph estimate\nkappa = 1"), format_matrix(&m));
        assert_eq!(parse_matrix(&text, "m.csv").unwrap(), m);
    }
}
