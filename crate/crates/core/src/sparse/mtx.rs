//! Matrix Market coordinate format (`real general` and `real symmetric`).

use std::io::{BufRead, Write};

use super::{SparseMat, Symmetry};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn read_mtx<R: BufRead>(reader: R) -> Result<SparseMat> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty Matrix Market file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate ...' header"));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::SymmetricLower,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(parse_err(lineno, "size line needs 'rows cols nnz'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err(lineno, format!("bad integer '{s}'")));
                size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
            }
            Some((nr, nc, _)) => {
                let want = if pattern { 2 } else { 3 };
                if parts.len() < want {
                    return Err(parse_err(lineno, "entry line too short"));
                }
                let i: usize = parts[0].parse().map_err(|_| parse_err(lineno, "bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| parse_err(lineno, "bad column index"))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(parse_err(lineno, format!("index ({i}, {j}) out of range")));
                }
                let v = if pattern {
                    1.0
                } else {
                    parts[2].parse::<f64>().map_err(|_| parse_err(lineno, "bad value"))?
                };
                if symmetry == Symmetry::SymmetricLower && i < j {
                    return Err(parse_err(lineno, "symmetric file stores an upper-triangle entry"));
                }
                trip.push((i - 1, j - 1, v));
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if trip.len() != nnz {
        return Err(parse_err(1, format!("header declares {nnz} entries, found {}", trip.len())));
    }
    SparseMat::from_triplets(nr, nc, &trip, symmetry)
}

pub fn write_mtx<W: Write>(a: &SparseMat, mut w: W) -> Result<()> {
    let sym = if a.is_symmetric() { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate real {sym}")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_symmetric() {
        let a = SparseMat::from_triplets(3, 3, &[(0, 0, 2.5), (2, 0, -1e-20), (2, 2, 7.0)], Symmetry::SymmetricLower).unwrap();
        let mut buf = Vec::new();
        write_mtx(&a, &mut buf).unwrap();
        let b = read_mtx(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_count_mismatch() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(read_mtx(text.as_bytes()).is_err());
    }
}
