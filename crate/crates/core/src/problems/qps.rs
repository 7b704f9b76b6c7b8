//! Whitespace-delimited QPS reader and writer.
//!
//! Supported sections: `NAME`, `ROWS`, `COLUMNS`, `RHS`, `RANGES`,
//! `BOUNDS`, `QUADOBJ` (one triangle), `QMATRIX` (both triangles) and
//! `ENDATA`. Names may not contain spaces.
//!
//! Canonicalization into `A x = b`, `C x >= d`:
//!
//! * `E` rows go to `A`, `G` rows to `C`, `L` rows to `C` negated.
//! * A ranged row becomes the pair `a^T x >= lo`, `-a^T x >= -hi`.
//! * Finite lower/upper bounds become rows `e_j` / `-e_j` of `C`; a fixed
//!   variable becomes an equality row of `A`.
//! * The objective constant is minus the `RHS` entry of the objective row.
//!
//! `QMATRIX` lists both `(i, j)` and `(j, i)`, so its off-diagonal values
//! are halved and accumulated into the lower triangle.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ipm::QpProblem;
use crate::sparse::{SparseMat, Symmetry};

/// Field width of fixed-format names.
pub const NAME_WIDTH: usize = 8;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowType {
    N,
    E,
    L,
    G,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    QuadObj,
    QMatrix,
    End,
}

/// The raw content of a QPS file, before canonicalization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QpsFile {
    pub name: String,
    pub rows: Vec<(String, RowType)>,
    pub objective: Option<String>,
    pub columns: Vec<String>,
    /// `(row, col, value)` with row indices into `rows`.
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: HashMap<usize, f64>,
    pub ranges: HashMap<usize, f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Lower-triangle `(i, j, value)` with `i >= j`.
    pub quadratic: Vec<(usize, usize, f64)>,
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| perr(line, format!("invalid number '{tok}'")))?;
    if v.is_nan() {
        return Err(perr(line, "NaN is not allowed"));
    }
    Ok(v)
}

impl QpsFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut f = QpsFile::default();
        let mut row_index: HashMap<String, usize> = HashMap::new();
        let mut col_index: HashMap<String, usize> = HashMap::new();
        let mut quad_seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut section = Section::None;
        let mut seen_name = false;

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            if raw.trim().is_empty() || raw.starts_with('*') {
                continue;
            }
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if !raw.starts_with(char::is_whitespace) {
                if section == Section::End {
                    return Err(perr(line, "content after ENDATA"));
                }
                section = match toks[0] {
                    "NAME" => {
                        if seen_name {
                            return Err(perr(line, "duplicate NAME section"));
                        }
                        seen_name = true;
                        f.name = toks[1..].join(" ");
                        Section::None
                    }
                    "ROWS" => Section::Rows,
                    "COLUMNS" => Section::Columns,
                    "RHS" => Section::Rhs,
                    "RANGES" => Section::Ranges,
                    "BOUNDS" => Section::Bounds,
                    "QUADOBJ" | "QSECTION" => Section::QuadObj,
                    "QMATRIX" => Section::QMatrix,
                    "ENDATA" => Section::End,
                    other => return Err(perr(line, format!("unknown section '{other}'"))),
                };
                if section != Section::None && section != Section::End && toks.len() > 1 && toks[0] != "QSECTION" {
                    return Err(perr(line, format!("unexpected tokens after {}", toks[0])));
                }
                continue;
            }
            let row_of = |name: &str, idx: &HashMap<String, usize>| {
                idx.get(name).copied().ok_or_else(|| perr(line, format!("undeclared row '{name}'")))
            };
            let col_of = |name: &str, idx: &HashMap<String, usize>| {
                idx.get(name).copied().ok_or_else(|| perr(line, format!("undeclared column '{name}'")))
            };
            match section {
                Section::None | Section::End => return Err(perr(line, "data line outside of a section")),
                Section::Rows => {
                    if toks.len() != 2 {
                        return Err(perr(line, "ROWS entries have the form 'type name'"));
                    }
                    let ty = match toks[0] {
                        "N" => RowType::N,
                        "E" => RowType::E,
                        "L" => RowType::L,
                        "G" => RowType::G,
                        other => return Err(perr(line, format!("unknown row type '{other}'"))),
                    };
                    let name = toks[1].to_string();
                    if row_index.contains_key(&name) {
                        return Err(perr(line, format!("duplicate row '{name}'")));
                    }
                    if ty == RowType::N {
                        if f.objective.is_some() {
                            return Err(perr(line, "more than one objective row"));
                        }
                        f.objective = Some(name.clone());
                    }
                    row_index.insert(name.clone(), f.rows.len());
                    f.rows.push((name, ty));
                }
                Section::Columns => {
                    if toks.contains(&"'MARKER'") {
                        return Err(perr(line, "integer markers are not supported"));
                    }
                    if toks.len() != 3 && toks.len() != 5 {
                        return Err(perr(line, "COLUMNS entries have the form 'col row value [row value]'"));
                    }
                    let j = match col_index.get(toks[0]) {
                        Some(&j) if j + 1 == f.columns.len() => j,
                        Some(_) => return Err(perr(line, format!("column '{}' is not contiguous", toks[0]))),
                        None => {
                            col_index.insert(toks[0].to_string(), f.columns.len());
                            f.columns.push(toks[0].to_string());
                            f.lower.push(0.0);
                            f.upper.push(f64::INFINITY);
                            f.columns.len() - 1
                        }
                    };
                    for pair in toks[1..].chunks(2) {
                        let i = row_of(pair[0], &row_index)?;
                        f.entries.push((i, j, number(pair[1], line)?));
                    }
                }
                Section::Rhs | Section::Ranges => {
                    let body = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                    if body.is_empty() || body.len() > 4 {
                        return Err(perr(line, "expected '[set] row value [row value]'"));
                    }
                    for pair in body.chunks(2) {
                        let i = row_of(pair[0], &row_index)?;
                        let v = number(pair[1], line)?;
                        let target = if section == Section::Rhs { &mut f.rhs } else { &mut f.ranges };
                        if target.insert(i, v).is_some() {
                            return Err(perr(line, format!("duplicate value for row '{}'", pair[0])));
                        }
                    }
                }
                Section::Bounds => {
                    let kind = toks[0];
                    let needs_value = !matches!(kind, "FR" | "MI" | "PL");
                    let expected_with_set = if needs_value { 4 } else { 3 };
                    let rest = if toks.len() == expected_with_set {
                        &toks[2..]
                    } else if toks.len() == expected_with_set - 1 {
                        &toks[1..]
                    } else {
                        return Err(perr(line, format!("malformed {kind} bound")));
                    };
                    let j = col_of(rest[0], &col_index)?;
                    let v = if needs_value { number(rest[1], line)? } else { 0.0 };
                    match kind {
                        "UP" => {
                            f.upper[j] = v;
                            if v < 0.0 && f.lower[j] == 0.0 {
                                f.lower[j] = f64::NEG_INFINITY;
                            }
                        }
                        "LO" => f.lower[j] = v,
                        "FX" => {
                            f.lower[j] = v;
                            f.upper[j] = v;
                        }
                        "FR" => {
                            f.lower[j] = f64::NEG_INFINITY;
                            f.upper[j] = f64::INFINITY;
                        }
                        "MI" => f.lower[j] = f64::NEG_INFINITY,
                        "PL" => f.upper[j] = f64::INFINITY,
                        other => return Err(perr(line, format!("unsupported bound type '{other}'"))),
                    }
                }
                Section::QuadObj | Section::QMatrix => {
                    if toks.len() != 3 {
                        return Err(perr(line, "quadratic entries have the form 'col col value'"));
                    }
                    let a = col_of(toks[0], &col_index)?;
                    let b = col_of(toks[1], &col_index)?;
                    let v = number(toks[2], line)?;
                    let key = if section == Section::QuadObj { (a.max(b), a.min(b)) } else { (a, b) };
                    if let Some(prev) = quad_seen.insert(key, line) {
                        return Err(perr(line, format!("duplicate quadratic entry (first on line {prev})")));
                    }
                    let (i, j) = (a.max(b), a.min(b));
                    let v = if section == Section::QMatrix && i != j { 0.5 * v } else { v };
                    f.quadratic.push((i, j, v));
                }
            }
        }
        if section != Section::End {
            return Err(perr(text.lines().count().max(1), "missing ENDATA"));
        }
        if f.objective.is_none() {
            return Err(perr(1, "no objective (N) row"));
        }
        Ok(f)
    }

    /// Canonical `QpProblem`.
    pub fn to_problem(&self) -> Result<QpProblem> {
        let n = self.columns.len();
        let obj = self.objective.as_ref().map(|o| self.rows.iter().position(|(r, _)| r == o).expect("objective row"));
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.rows.len()];
        let mut c = vec![0.0; n];
        for &(i, j, v) in &self.entries {
            if Some(i) == obj {
                c[j] += v;
            } else {
                by_row[i].push((j, v));
            }
        }
        let mut a_trip = Vec::new();
        let mut b = Vec::new();
        let mut c_trip = Vec::new();
        let mut d = Vec::new();
        let push = |trip: &mut Vec<(usize, usize, f64)>, rhs: &mut Vec<f64>, coeffs: &[(usize, f64)], sign: f64, r: f64| {
            let k = rhs.len();
            trip.extend(coeffs.iter().map(|&(j, v)| (k, j, sign * v)));
            rhs.push(sign * r);
        };
        for (i, (_, ty)) in self.rows.iter().enumerate() {
            if Some(i) == obj {
                continue;
            }
            let r = self.rhs.get(&i).copied().unwrap_or(0.0);
            let coeffs = &by_row[i];
            match (ty, self.ranges.get(&i).copied()) {
                (RowType::N, _) => unreachable!("single objective row"),
                (RowType::E, None) => push(&mut a_trip, &mut b, coeffs, 1.0, r),
                (RowType::G, None) => push(&mut c_trip, &mut d, coeffs, 1.0, r),
                (RowType::L, None) => push(&mut c_trip, &mut d, coeffs, -1.0, r),
                (ty, Some(range)) => {
                    let (lo, hi) = match ty {
                        RowType::G => (r, r + range.abs()),
                        RowType::L => (r - range.abs(), r),
                        _ if range >= 0.0 => (r, r + range),
                        _ => (r + range, r),
                    };
                    push(&mut c_trip, &mut d, coeffs, 1.0, lo);
                    push(&mut c_trip, &mut d, coeffs, -1.0, hi);
                }
            }
        }
        for j in 0..n {
            let (lo, up) = (self.lower[j], self.upper[j]);
            if lo == up {
                push(&mut a_trip, &mut b, &[(j, 1.0)], 1.0, lo);
                continue;
            }
            if lo > up {
                return Err(Error::InvalidProblem(format!("column '{}' has lower bound above upper bound", self.columns[j])));
            }
            if lo.is_finite() {
                push(&mut c_trip, &mut d, &[(j, 1.0)], 1.0, lo);
            }
            if up.is_finite() {
                push(&mut c_trip, &mut d, &[(j, 1.0)], -1.0, up);
            }
        }
        let h = SparseMat::from_triplets(n, n, &self.quadratic, Symmetry::SymmetricLower)?;
        let a = SparseMat::from_triplets(b.len(), n, &a_trip, Symmetry::General)?;
        let cmat = SparseMat::from_triplets(d.len(), n, &c_trip, Symmetry::General)?;
        let mut p = QpProblem::new(self.name.clone(), h, c, a, b, cmat, d)?;
        p.obj_const = obj.and_then(|o| self.rhs.get(&o)).map_or(0.0, |v| -v);
        Ok(p)
    }
}

/// Parses QPS text into canonical form.
pub fn parse_qps(text: &str) -> Result<QpProblem> {
    QpsFile::parse(text)?.to_problem()
}

/// Truncates names to `width` characters. Collisions get a `~k` suffix that
/// replaces the tail, with `k` counting up until the name is unique.
pub fn fit_names(names: &[String], width: usize) -> Vec<String> {
    let mut used = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let base: String = name.chars().take(width).collect();
        let mut cand = base.clone();
        let mut k = 1;
        while used.contains(&cand) {
            let suffix = format!("~{k}");
            let keep = width.saturating_sub(suffix.len());
            cand = base.chars().take(keep).collect::<String>() + &suffix;
            k += 1;
        }
        used.insert(cand.clone());
        out.push(cand);
    }
    out
}

/// Writes `p` as QPS: equality rows `E`, inequality rows `G`, all columns
/// free, the Hessian as a lower-triangle `QUADOBJ`.
pub fn write_qps(p: &QpProblem) -> Result<String> {
    p.validate()?;
    let n = p.n();
    let cols = fit_names(&(0..n).map(|j| format!("x{j}")).collect::<Vec<_>>(), NAME_WIDTH);
    let erows = fit_names(&(0..p.m1()).map(|i| format!("e{i}")).collect::<Vec<_>>(), NAME_WIDTH);
    let grows = fit_names(&(0..p.m2()).map(|i| format!("g{i}")).collect::<Vec<_>>(), NAME_WIDTH);
    let obj = "obj";
    let mut s = String::new();
    let name = if p.name.is_empty() { "QP" } else { p.name.as_str() };
    writeln!(s, "NAME {name}").unwrap();
    writeln!(s, "ROWS").unwrap();
    writeln!(s, " N {obj}").unwrap();
    for r in &erows {
        writeln!(s, " E {r}").unwrap();
    }
    for r in &grows {
        writeln!(s, " G {r}").unwrap();
    }
    writeln!(s, "COLUMNS").unwrap();
    let a_cols: Vec<Vec<(usize, f64)>> = (0..n).map(|j| p.a.col(j).collect()).collect();
    let c_cols: Vec<Vec<(usize, f64)>> = (0..n).map(|j| p.cmat.col(j).collect()).collect();
    for j in 0..n {
        let mut wrote = false;
        if p.c[j] != 0.0 {
            writeln!(s, " {} {obj} {:e}", cols[j], p.c[j]).unwrap();
            wrote = true;
        }
        for &(i, v) in &a_cols[j] {
            writeln!(s, " {} {} {:e}", cols[j], erows[i], v).unwrap();
            wrote = true;
        }
        for &(i, v) in &c_cols[j] {
            writeln!(s, " {} {} {:e}", cols[j], grows[i], v).unwrap();
            wrote = true;
        }
        if !wrote {
            writeln!(s, " {} {obj} 0e0", cols[j]).unwrap();
        }
    }
    writeln!(s, "RHS").unwrap();
    if p.obj_const != 0.0 {
        writeln!(s, " rhs {obj} {:e}", -p.obj_const).unwrap();
    }
    for (i, v) in p.b.iter().enumerate() {
        if *v != 0.0 {
            writeln!(s, " rhs {} {:e}", erows[i], v).unwrap();
        }
    }
    for (i, v) in p.d.iter().enumerate() {
        if *v != 0.0 {
            writeln!(s, " rhs {} {:e}", grows[i], v).unwrap();
        }
    }
    writeln!(s, "BOUNDS").unwrap();
    for c in &cols {
        writeln!(s, " FR bnd {c}").unwrap();
    }
    if p.h.nnz() > 0 {
        writeln!(s, "QUADOBJ").unwrap();
        for (i, j, v) in p.h.triplets() {
            writeln!(s, " {} {} {:e}", cols[j], cols[i], v).unwrap();
        }
    }
    writeln!(s, "ENDATA").unwrap();
    Ok(s)
}
