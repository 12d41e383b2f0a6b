use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Parses LIBSVM text: one `<label> (<index>:<value>)*` row per nonempty line,
/// 1-based strictly increasing indices.
///
/// The column count is the largest index seen, or `expected_d` when given
/// (an index beyond `expected_d` is then an error).
pub fn parse_libsvm(reader: impl BufRead, expected_d: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let err = |message: String| Error::Parse { line: line_no, message };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("label {label_tok:?} is not a number")))?;
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, got {tok:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| err(format!("index {i:?} is not a positive integer")))?;
            if i == 0 {
                return Err(err("indices are 1-based; found 0".into()));
            }
            let v: f64 = v.parse().map_err(|_| err(format!("value {v:?} is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("value {v} is not finite")));
            }
            if idx.last().is_some_and(|&last| i - 1 <= last) {
                return Err(err(format!("index {i} does not increase")));
            }
            if let Some(d) = expected_d {
                if i > d {
                    return Err(err(format!("index {i} exceeds declared dimension {d}")));
                }
            }
            max_index = max_index.max(i);
            idx.push(i - 1);
            val.push(v);
        }
        labels.push(label);
        rows.push((idx, val));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }
    let d = expected_d.unwrap_or(max_index);
    let matrix = SparseRowMatrix::from_rows(rows, d)?;
    Ok(Dataset::new(matrix, labels, "libsvm", "text".into()))
}

/// Reads a LIBSVM file, decompressing it if it starts with the gzip magic bytes.
pub fn read_libsvm(path: impl AsRef<Path>, expected_d: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let got = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ds = if got == 2 && magic == GZIP_MAGIC {
        parse_libsvm(BufReader::new(MultiGzDecoder::new(file)), expected_d)?
    } else {
        parse_libsvm(BufReader::new(file), expected_d)?
    };
    ds.meta.name = path
        .file_name()
        .map_or_else(|| "libsvm".into(), |s| s.to_string_lossy().into_owned());
    ds.meta.source = path.display().to_string();
    Ok(ds)
}

/// Writes LIBSVM text; values use the shortest representation that parses back exactly.
pub fn write_libsvm(ds: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    for (i, label) in ds.labels.iter().enumerate() {
        write!(out, "{label}")?;
        for (j, v) in ds.matrix.row(i).iter() {
            write!(out, " {}:{v}", j + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows_by_hand() {
        let ds = parse_libsvm("+1 1:0.5 3:-2\n-1 2:1".as_bytes(), None).unwrap();
        assert_eq!((ds.meta.n, ds.meta.d, ds.matrix.nnz()), (2, 3, 3));
        assert_eq!(ds.labels, vec![1.0, -1.0]);
        assert_eq!(ds.matrix.to_dense(), vec![vec![0.5, 0.0, -2.0], vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_libsvm("".as_bytes(), None), Err(Error::Parse { .. })));
        assert!(parse_libsvm("\n  \n".as_bytes(), None).is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_libsvm("1 2:1 1:1".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = parse_libsvm("1 1:1\n\n1 0:3".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_libsvm("1 1:x".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_libsvm("one 1:1".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_libsvm("1 1:1 1:2".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn declared_dimension_is_enforced() {
        let ds = parse_libsvm("1 2:1".as_bytes(), Some(5)).unwrap();
        assert_eq!(ds.meta.d, 5);
        assert!(parse_libsvm("1 6:1".as_bytes(), Some(5)).is_err());
    }

    #[test]
    fn blank_lines_are_skipped() {
        let ds = parse_libsvm("\n1 1:2\n\n-1\n".as_bytes(), None).unwrap();
        assert_eq!(ds.meta.n, 2);
        assert_eq!(ds.matrix.row(1).nnz(), 0);
    }
}
