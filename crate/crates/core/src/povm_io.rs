//! Plain-text serialization of matrix POVMs.
//!
//! Format: a `dim N` header, then one element per block as `N` rows of `N`
//! whitespace-separated `re,im` entries, blocks separated by a `---` line,
//! and an optional trailing `null: k` designating element `k` as the
//! no-detection outcome. Blank lines are ignored. Floats are written in
//! Rust's shortest round-trip form, so write-then-read is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::linalg::CMat;
use crate::operators::{MatrixPovm, Op};
use crate::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_entry(token: &str, line: usize) -> Result<Complex64> {
    let (re_s, im_s) = token
        .split_once(',')
        .ok_or_else(|| parse_err(line, format!("expected re,im entry, got `{token}`")))?;
    let re: f64 = re_s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad real part `{re_s}`")))?;
    let im: f64 = im_s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad imaginary part `{im_s}`")))?;
    Ok(Complex64::new(re, im))
}

/// Parses a POVM from the text format.
pub fn parse_povm(text: &str) -> Result<MatrixPovm> {
    // (1-based line number, trimmed content) with blank lines dropped.
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty input, expected `dim N` header"))?;
    let dim: usize = header
        .strip_prefix("dim")
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(hline, format!("expected `dim N` header, got `{header}`")))?;
    if dim == 0 {
        return Err(parse_err(hline, "dimension must be at least 1"));
    }

    let mut elements: Vec<Op> = Vec::new();
    let mut null_index: Option<usize> = None;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let mut last_line = hline;

    let finish_element = |rows: &mut Vec<Vec<Complex64>>, line: usize| -> Result<Op> {
        if rows.len() != dim {
            return Err(parse_err(
                line,
                format!("element has {} rows, expected {dim}", rows.len()),
            ));
        }
        let flat: Vec<Complex64> = rows.drain(..).flatten().collect();
        Op::new(CMat::from_row_slice(dim, dim, &flat))
    };

    for (lineno, line) in &mut lines {
        last_line = lineno;
        if line == "---" {
            elements.push(finish_element(&mut rows, lineno)?);
            continue;
        }
        if let Some(rest) = line.strip_prefix("null:") {
            let k: usize = rest
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad null index `{}`", rest.trim())))?;
            null_index = Some(k);
            if let Some((extra_line, extra)) = lines.next() {
                return Err(parse_err(
                    extra_line,
                    format!("unexpected content after null trailer: `{extra}`"),
                ));
            }
            break;
        }
        let entries: Vec<Complex64> = line
            .split_whitespace()
            .map(|tok| parse_entry(tok, lineno))
            .collect::<Result<_>>()?;
        if entries.len() != dim {
            return Err(parse_err(
                lineno,
                format!("row has {} entries, expected {dim}", entries.len()),
            ));
        }
        if rows.len() == dim {
            return Err(parse_err(
                lineno,
                format!("element has more than {dim} rows (missing `---`?)"),
            ));
        }
        rows.push(entries);
    }
    if !rows.is_empty() {
        elements.push(finish_element(&mut rows, last_line)?);
    } else if elements.is_empty() {
        return Err(parse_err(last_line, "no POVM elements found"));
    } else if null_index.is_none() {
        // Input ended on a bare `---` with no element after it.
        return Err(parse_err(last_line, "trailing `---` with no element"));
    }
    MatrixPovm::new(elements, null_index)
}

/// Renders a POVM in the text format.
pub fn format_povm(povm: &MatrixPovm) -> String {
    let dim = povm.dim();
    let mut out = String::new();
    writeln!(out, "dim {dim}").unwrap();
    for (i, e) in povm.elements().iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        let m = e.matrix();
        for r in 0..dim {
            for c in 0..dim {
                if c > 0 {
                    out.push(' ');
                }
                let v = m[(r, c)];
                write!(out, "{},{}", v.re, v.im).unwrap();
            }
            out.push('\n');
        }
    }
    if let Some(k) = povm.null_index() {
        writeln!(out, "null: {k}").unwrap();
    }
    out
}

/// Reads a POVM file.
pub fn read_povm(path: &Path) -> Result<MatrixPovm> {
    parse_povm(&std::fs::read_to_string(path)?)
}

/// Writes a POVM file.
pub fn write_povm(path: &Path, povm: &MatrixPovm) -> Result<()> {
    Ok(std::fs::write(path, format_povm(povm))?)
}
