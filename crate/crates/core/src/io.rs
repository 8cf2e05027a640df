//! Text formats for matrices and vectors.
//!
//! Everything here parses from and formats to strings; opening files is the
//! caller's business. Two input formats are spoken: comma-separated rows,
//! and the Matrix Market "array" format (general or symmetric, real or
//! integer fields). Output uses 17 significant digits, enough for `f64`
//! values to round-trip bit for bit.
//!
//! Line numbers in errors are 1-based and refer to the input text; row and
//! column indices in [`CcmError::NonFiniteEntry`] are 1-based matrix
//! coordinates.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::CcmError;
use crate::Real;

fn parse_token<F: Real>(token: &str, line: usize) -> Result<F, CcmError<F>> {
    F::from_str(token).map_err(|_| CcmError::Parse {
        line,
        message: format!("cannot parse {token:?} as a number"),
    })
}

/// Parses comma-separated rows. Blank lines are ignored; every data row must
/// have the same number of fields.
pub fn parse_matrix_csv<F: Real>(text: &str) -> Result<Array2<F>, CcmError<F>> {
    let mut rows: Vec<Vec<F>> = Vec::new();
    let mut width = 0usize;
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(width);
        for token in line.split(',') {
            row.push(parse_token(token.trim(), line_no)?);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(CcmError::Parse {
                line: line_no,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        return Err(CcmError::EmptyMatrix);
    }
    let mut m = Array2::zeros((rows.len(), width));
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(CcmError::NonFiniteEntry { row: r + 1, col: c + 1 });
            }
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

/// Parses the Matrix Market *array* format.
///
/// The header must declare `matrix array` with a `real` or `integer` field
/// and `general` or `symmetric` symmetry. Symmetric inputs store the lower
/// triangle (diagonal included) column by column and are expanded to the
/// full matrix.
pub fn parse_matrix_market<F: Real>(text: &str) -> Result<Array2<F>, CcmError<F>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or(CcmError::Parse { line: 1, message: "empty input".into() })?;
    let fields: Vec<String> =
        header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    let expect = |i: usize, allowed: &[&str]| -> Result<String, CcmError<F>> {
        match fields.get(i) {
            Some(f) if allowed.contains(&f.as_str()) => Ok(f.clone()),
            Some(f) => Err(CcmError::Parse {
                line: 1,
                message: format!("unsupported header field {f:?} (expected one of {allowed:?})"),
            }),
            None => Err(CcmError::Parse {
                line: 1,
                message: "header is missing fields".into(),
            }),
        }
    };
    expect(0, &["%%matrixmarket"])?;
    expect(1, &["matrix"])?;
    expect(2, &["array"])?;
    expect(3, &["real", "integer"])?;
    let symmetry = expect(4, &["general", "symmetric"])?;

    // Everything else: comments out, whitespace-separated tokens in.
    let mut tokens = lines
        .filter(|(_, l)| !l.trim_start().starts_with('%'))
        .flat_map(|(no, l)| l.split_whitespace().map(move |t| (no, t)));

    let mut next_token = |what: &str| -> Result<(usize, &str), CcmError<F>> {
        tokens.next().ok_or_else(|| CcmError::Parse {
            line: text.lines().count(),
            message: format!("unexpected end of input while reading {what}"),
        })
    };
    let parse_dim = |(line, t): (usize, &str)| -> Result<usize, CcmError<F>> {
        t.parse::<usize>().map_err(|_| CcmError::Parse {
            line,
            message: format!("cannot parse {t:?} as a dimension"),
        })
    };
    let nrows = parse_dim(next_token("the row count")?)?;
    let ncols = parse_dim(next_token("the column count")?)?;
    if nrows == 0 || ncols == 0 {
        return Err(CcmError::EmptyMatrix);
    }

    let mut m = Array2::zeros((nrows, ncols));
    let mut store = |r: usize, c: usize, v: F| -> Result<(), CcmError<F>> {
        if !v.is_finite() {
            return Err(CcmError::NonFiniteEntry { row: r + 1, col: c + 1 });
        }
        m[(r, c)] = v;
        Ok(())
    };
    match symmetry.as_str() {
        "general" => {
            // Column-major, one value per entry.
            for c in 0..ncols {
                for r in 0..nrows {
                    let (line, t) = next_token("a matrix entry")?;
                    store(r, c, parse_token(t, line)?)?;
                }
            }
        }
        _ => {
            if nrows != ncols {
                return Err(CcmError::Parse {
                    line: 1,
                    message: format!("symmetric matrix must be square, got {nrows} x {ncols}"),
                });
            }
            // Lower triangle, column-major, diagonal included.
            for c in 0..ncols {
                for r in c..nrows {
                    let (line, t) = next_token("a matrix entry")?;
                    let v = parse_token(t, line)?;
                    store(r, c, v)?;
                    store(c, r, v)?;
                }
            }
        }
    }
    if let Some((line, t)) = tokens.next() {
        return Err(CcmError::Parse {
            line,
            message: format!("trailing data {t:?} after the last expected entry"),
        });
    }
    Ok(m)
}

/// Parses a vector: numbers separated by commas, whitespace, or newlines.
pub fn parse_vector<F: Real>(text: &str) -> Result<Array1<F>, CcmError<F>> {
    let mut values = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        for token in raw.split(|ch: char| ch == ',' || ch.is_whitespace()) {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            let v: F = parse_token(token, line_no + 1)?;
            if !v.is_finite() {
                return Err(CcmError::NonFiniteEntry { row: values.len() + 1, col: 1 });
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(CcmError::Parse { line: 1, message: "no values found".into() });
    }
    Ok(Array1::from_vec(values))
}

/// Parses 1-based indices (comma/whitespace separated) into 0-based ones,
/// each required to lie in `1..=n`.
pub fn parse_index_list<F: Real>(text: &str, n: usize) -> Result<Vec<usize>, CcmError<F>> {
    let mut out = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        for token in raw.split(|ch: char| ch == ',' || ch.is_whitespace()) {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            let idx: usize = token.parse().map_err(|_| CcmError::Parse {
                line: line_no + 1,
                message: format!("cannot parse {token:?} as an index"),
            })?;
            if idx == 0 {
                return Err(CcmError::Parse {
                    line: line_no + 1,
                    message: "indices are 1-based; 0 is not a valid index".into(),
                });
            }
            if idx > n {
                return Err(CcmError::DimensionMismatch { expected: n, found: idx });
            }
            out.push(idx - 1);
        }
    }
    Ok(out)
}

/// One value per line, 17 significant digits.
pub fn format_vector<F: Real>(x: ArrayView1<F>) -> String {
    let mut out = String::new();
    for v in x.iter() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out
}

/// Comma-separated rows, 17 significant digits; inverse of
/// [`parse_matrix_csv`] down to the bit.
pub fn format_matrix<F: Real>(m: ArrayView2<F>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
            first = false;
        }
        out.push('\n');
    }
    out
}
