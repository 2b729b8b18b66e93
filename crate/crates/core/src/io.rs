//! Plain-text numeric files: whitespace-separated matrices, one-value-per-line
//! vectors, and `i j` index-pair lists. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// One row per line, whitespace-separated decimals.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (line_no, line) in data_lines(&text) {
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("not a number: {tok:?}")))?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected {c} columns, found {width}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, 0, "empty matrix file"))?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// One value per line.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Array1<f64>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut data = Vec::new();
    for (line_no, line) in data_lines(&text) {
        for tok in line.split_whitespace() {
            data.push(
                tok.parse()
                    .map_err(|_| parse_err(path, line_no, format!("not a number: {tok:?}")))?,
            );
        }
    }
    Ok(Array1::from(data))
}

pub fn write_vector(path: impl AsRef<Path>, v: &Array1<f64>) -> Result<()> {
    let mut out = String::with_capacity(v.len() * 24);
    for x in v.iter() {
        // {:e} round-trips f64 exactly
        let _ = writeln!(out, "{x:e}");
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// One `i j` pair of zero-based indices per line.
pub fn read_index_pairs(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut pairs = Vec::new();
    for (line_no, line) in data_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, line_no, "expected two indices \"i j\""));
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| parse_err(path, line_no, format!("not an index: {t:?}")))
        };
        pairs.push((parse(toks[0])?, parse(toks[1])?));
    }
    Ok(pairs)
}

pub fn write_index_pairs(path: impl AsRef<Path>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<()> {
    let mut out = String::new();
    for (i, j) in pairs {
        let _ = writeln!(out, "{i} {j}");
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let m = array![[1.0, -2.5, 1e-17], [0.1, 3.0, std::f64::consts::PI]];
        write_matrix(&p, &m).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
    }

    #[test]
    fn ragged_matrix_is_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "# header\n1 2 3\n\n4 5\n").unwrap();
        match read_matrix(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn index_pairs_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mask.txt");
        fs::write(&p, "0 0\n2 1\n").unwrap();
        assert_eq!(read_index_pairs(&p).unwrap(), vec![(0, 0), (2, 1)]);
        fs::write(&p, "0 0 1\n").unwrap();
        assert!(read_index_pairs(&p).is_err());
    }
}
