//! File formats: MatrixMarket matrices, matrix-family directories, stored
//! reduced bases and parameter batch CSVs.
//!
//! Parsers never size allocations from header counts alone; dense
//! allocations are capped by an entry limit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offline::{CutoffSchedule, Method, ReducedBasis};
use crate::paramsys::{ParameterBox, ParameterVector, ParametricMatrix};

/// Default cap on `rows × cols` for matrices read from disk.
pub const MAX_DENSE_ENTRIES: usize = 1 << 26;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_header(line: &str, name: &str) -> Result<(Layout, Symmetry)> {
    let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(Error::parse(name, 1, "expected `%%MatrixMarket matrix <layout> real <symmetry>`"));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(Error::parse(name, 1, format!("unsupported layout {other:?}"))),
    };
    if words[3] != "real" && words[3] != "integer" {
        return Err(Error::parse(name, 1, format!("unsupported field {:?}", words[3])));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::parse(name, 1, format!("unsupported symmetry {other:?}"))),
    };
    Ok((layout, symmetry))
}

fn parse_usize(tok: Option<&str>, name: &str, line: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| Error::parse(name, line, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(name, line, format!("invalid {what}")))
}

fn parse_f64(tok: Option<&str>, name: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .ok_or_else(|| Error::parse(name, line, "missing value"))?
        .parse()
        .map_err(|_| Error::parse(name, line, "invalid value"))?;
    if !v.is_finite() {
        return Err(Error::parse(name, line, "non-finite value"));
    }
    Ok(v)
}

/// Parses a real MatrixMarket matrix in coordinate or array layout, with
/// general or symmetric (lower triangle stored) symmetry.
pub fn parse_mtx(text: &str, name: &str) -> Result<DMatrix<f64>> {
    parse_mtx_with_limit(text, name, MAX_DENSE_ENTRIES)
}

/// As [`parse_mtx`], rejecting matrices with more than `max_entries` entries.
pub fn parse_mtx_with_limit(text: &str, name: &str, max_entries: usize) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(name, 1, "empty file"))?;
    let (layout, symmetry) = parse_header(header, name)?;
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| Error::parse(name, 1, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let rows = parse_usize(toks.next(), name, size_line, "row count")?;
    let cols = parse_usize(toks.next(), name, size_line, "column count")?;
    let entries = rows
        .checked_mul(cols)
        .filter(|&e| e <= max_entries)
        .ok_or_else(|| Error::parse(name, size_line, format!("{rows}x{cols} exceeds the entry limit {max_entries}")))?;
    if symmetry == Symmetry::Symmetric && rows != cols {
        return Err(Error::parse(name, size_line, "symmetric matrix must be square"));
    }
    let mut m = DMatrix::zeros(rows, cols);
    match layout {
        Layout::Coordinate => {
            let nnz = parse_usize(toks.next(), name, size_line, "entry count")?;
            if toks.next().is_some() {
                return Err(Error::parse(name, size_line, "trailing tokens on size line"));
            }
            let mut seen = 0usize;
            for (ln, line) in body {
                if seen == nnz {
                    return Err(Error::parse(name, ln, format!("more than {nnz} entries")));
                }
                let mut t = line.split_whitespace();
                let i = parse_usize(t.next(), name, ln, "row index")?;
                let j = parse_usize(t.next(), name, ln, "column index")?;
                let v = parse_f64(t.next(), name, ln)?;
                if t.next().is_some() {
                    return Err(Error::parse(name, ln, "trailing tokens"));
                }
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::parse(name, ln, format!("index ({i}, {j}) out of range")));
                }
                let (i, j) = (i - 1, j - 1);
                match symmetry {
                    Symmetry::General => m[(i, j)] += v,
                    Symmetry::Symmetric => {
                        if j > i {
                            return Err(Error::parse(name, ln, "symmetric storage expects the lower triangle"));
                        }
                        m[(i, j)] += v;
                        if i != j {
                            m[(j, i)] += v;
                        }
                    }
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(Error::parse(name, size_line, format!("expected {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            if toks.next().is_some() {
                return Err(Error::parse(name, size_line, "trailing tokens on size line"));
            }
            // column-major; symmetric arrays store the lower triangle only
            let slots: Vec<(usize, usize)> = match symmetry {
                Symmetry::General => Vec::new(),
                Symmetry::Symmetric => (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect(),
            };
            let expected = if symmetry == Symmetry::General { entries } else { slots.len() };
            let mut seen = 0usize;
            for (ln, line) in body {
                for tok in line.split_whitespace() {
                    if seen == expected {
                        return Err(Error::parse(name, ln, format!("more than {expected} values")));
                    }
                    let v = parse_f64(Some(tok), name, ln)?;
                    let (i, j) = match symmetry {
                        Symmetry::General => (seen % rows, seen / rows),
                        Symmetry::Symmetric => slots[seen],
                    };
                    m[(i, j)] = v;
                    if symmetry == Symmetry::Symmetric {
                        m[(j, i)] = v;
                    }
                    seen += 1;
                }
            }
            if seen != expected {
                return Err(Error::parse(name, size_line, format!("expected {expected} values, found {seen}")));
            }
        }
    }
    Ok(m)
}

/// Coordinate format; symmetric matrices are written in symmetric storage.
pub fn format_mtx_coordinate(m: &DMatrix<f64>) -> String {
    let symmetric = m.is_square() && m == &m.transpose();
    let mut entries = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if (!symmetric || i >= j) && m[(i, j)] != 0.0 {
                entries.push((i, j, m[(i, j)]));
            }
        }
    }
    let mut out = String::new();
    let kind = if symmetric { "symmetric" } else { "general" };
    let _ = writeln!(out, "%%MatrixMarket matrix coordinate real {kind}");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

/// Dense array format, column-major.
pub fn format_mtx_array(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(24 * m.len() + 64);
    let _ = writeln!(out, "%%MatrixMarket matrix array real general");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

pub fn read_mtx(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    parse_mtx(&read_text(path)?, &path.display().to_string())
}

pub fn write_mtx_coordinate(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_text(path.as_ref(), &format_mtx_coordinate(m))
}

pub fn write_mtx_array(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_text(path.as_ref(), &format_mtx_array(m))
}

/// `meta.json` of a matrix-family directory. Bounds, when present, define
/// the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMeta {
    pub n: usize,
    pub s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

impl FamilyMeta {
    pub fn parameter_box(&self) -> Result<Option<ParameterBox>> {
        match (&self.lower, &self.upper) {
            (Some(lo), Some(hi)) => Ok(Some(ParameterBox::new(lo.clone(), hi.clone())?)),
            (None, None) => Ok(None),
            _ => Err(Error::InvalidArgument("family bounds need both `lower` and `upper`".into())),
        }
    }
}

/// A family read from disk with its optional right-hand side `b.mtx`.
#[derive(Debug, Clone)]
pub struct StoredFamily {
    pub family: ParametricMatrix,
    pub rhs: Option<DVector<f64>>,
    pub parameter_box: Option<ParameterBox>,
}

/// Writes `meta.json`, `A_1.mtx … A_s.mtx` and, when given, `b.mtx`.
pub fn save_family(
    dir: impl AsRef<Path>,
    family: &ParametricMatrix,
    rhs: Option<&DVector<f64>>,
    parameter_box: Option<&ParameterBox>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = FamilyMeta {
        n: family.n(),
        s: family.s(),
        lower: parameter_box.map(|b| b.lower().to_vec()),
        upper: parameter_box.map(|b| b.upper().to_vec()),
    };
    write_text(&dir.join("meta.json"), &serde_json::to_string_pretty(&meta)?)?;
    for (i, t) in family.terms().iter().enumerate() {
        write_mtx_coordinate(dir.join(format!("A_{}.mtx", i + 1)), t)?;
    }
    if let Some(b) = rhs {
        write_mtx_array(dir.join("b.mtx"), &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    }
    Ok(())
}

pub fn load_family(dir: impl AsRef<Path>) -> Result<StoredFamily> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: FamilyMeta = serde_json::from_str(&read_text(&meta_path)?)?;
    if meta.s == 0 {
        return Err(Error::InvalidArgument("family has no terms".into()));
    }
    let mut terms = Vec::new();
    for i in 1..=meta.s {
        let m = read_mtx(dir.join(format!("A_{i}.mtx")))?;
        if m.nrows() != meta.n || m.ncols() != meta.n {
            return Err(Error::DimensionMismatch {
                what: "family term size vs meta.json",
                expected: meta.n,
                got: m.nrows(),
            });
        }
        terms.push(m);
    }
    let b_path = dir.join("b.mtx");
    let rhs = if b_path.exists() {
        let b = read_mtx(&b_path)?;
        if b.ncols() != 1 || b.nrows() != meta.n {
            return Err(Error::DimensionMismatch {
                what: "right-hand side length",
                expected: meta.n,
                got: b.len(),
            });
        }
        Some(b.column(0).into_owned())
    } else {
        None
    };
    let parameter_box = meta.parameter_box()?;
    if let Some(pb) = &parameter_box {
        if pb.dim() != meta.s {
            return Err(Error::DimensionMismatch {
                what: "parameter box dimension",
                expected: meta.s,
                got: pb.dim(),
            });
        }
    }
    Ok(StoredFamily {
        family: ParametricMatrix::new(terms)?,
        rhs,
        parameter_box,
    })
}

/// `basis.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    pub method: Method,
    pub j: usize,
    /// `δ₁ … δ_{j−1}`; absent for exact bases.
    pub deltas: Option<Vec<f64>>,
    /// Columns added at steps `1 … j−1`.
    pub ranks: Vec<usize>,
    /// Columns of the initial block (one per right-hand side).
    #[serde(default = "one")]
    pub initial: usize,
    pub n: usize,
    pub m: usize,
}

fn one() -> usize {
    1
}

impl BasisMeta {
    pub fn of(basis: &ReducedBasis) -> Self {
        Self {
            method: basis.method(),
            j: basis.order(),
            deltas: basis.schedule().map(|s| s.deltas().to_vec()),
            ranks: basis.ranks().to_vec(),
            initial: basis.block_sizes()[0],
            n: basis.n(),
            m: basis.dim(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the basis around `q`, checking it against the metadata.
    pub fn into_basis(self, q: DMatrix<f64>) -> Result<ReducedBasis> {
        if q.nrows() != self.n || q.ncols() != self.m {
            return Err(Error::DimensionMismatch {
                what: "Q.mtx shape vs basis.meta.json",
                expected: self.n * self.m,
                got: q.len(),
            });
        }
        let schedule = self.deltas.map(CutoffSchedule::new).transpose()?;
        let mut block_sizes = Vec::with_capacity(self.ranks.len() + 1);
        block_sizes.push(self.initial);
        block_sizes.extend_from_slice(&self.ranks);
        ReducedBasis::from_parts(q, self.method, self.j, schedule, block_sizes)
    }
}

/// Writes `basis.meta.json` and `Q.mtx` into `dir`.
pub fn save_basis(dir: impl AsRef<Path>, basis: &ReducedBasis) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("basis.meta.json"), &serde_json::to_string_pretty(&BasisMeta::of(basis))?)?;
    write_mtx_array(dir.join("Q.mtx"), basis.q())
}

pub fn load_basis(dir: impl AsRef<Path>) -> Result<ReducedBasis> {
    let dir = dir.as_ref();
    let meta = BasisMeta::parse(&read_text(&dir.join("basis.meta.json"))?)?;
    let q = read_mtx(dir.join("Q.mtx"))?;
    meta.into_basis(q)
}

fn csv_error(name: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(name, line, e.to_string())
}

/// Parses a batch CSV with header `sigma_1,…,sigma_s`.
pub fn parse_sigma_csv(text: &str, name: &str) -> Result<Vec<ParameterVector>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_error(name, e))?.clone();
    if header.is_empty() {
        return Err(Error::parse(name, 1, "empty header"));
    }
    for (i, h) in header.iter().enumerate() {
        if h != format!("sigma_{}", i + 1) {
            return Err(Error::parse(name, 1, format!("column {} must be named sigma_{}, found {h:?}", i + 1, i + 1)));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(name, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = rec
            .iter()
            .map(|t| parse_f64(Some(t), name, line))
            .collect::<Result<Vec<_>>>()?;
        out.push(ParameterVector::new(row));
    }
    Ok(out)
}

pub fn read_sigma_csv(path: impl AsRef<Path>) -> Result<Vec<ParameterVector>> {
    let path = path.as_ref();
    parse_sigma_csv(&read_text(path)?, &path.display().to_string())
}

pub fn format_sigma_csv(sigmas: &[ParameterVector]) -> Result<String> {
    let s = sigmas.first().map_or(0, |v| v.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((1..=s).map(|i| format!("sigma_{i}")))
        .map_err(|e| csv_error("sigma csv", e))?;
    for v in sigmas {
        if v.len() != s {
            return Err(Error::DimensionMismatch {
                what: "parameter vector length",
                expected: s,
                got: v.len(),
            });
        }
        w.write_record(v.iter().map(|x| format!("{x:e}")))
            .map_err(|e| csv_error("sigma csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_round_trip_general_and_symmetric() {
        let g = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -2.5, 0.0, 1e-300, 3.0]);
        assert_eq!(parse_mtx(&format_mtx_coordinate(&g), "g").unwrap(), g);
        let s = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let text = format_mtx_coordinate(&s);
        assert!(text.contains("symmetric"));
        assert_eq!(parse_mtx(&text, "s").unwrap(), s);
    }

    #[test]
    fn array_round_trip_is_bitwise() {
        let m = DMatrix::from_fn(4, 3, |i, j| (i as f64 + 0.1).sqrt() / (j as f64 + 3.0));
        assert_eq!(parse_mtx(&format_mtx_array(&m), "m").unwrap(), m);
    }

    #[test]
    fn symmetric_array_fills_both_triangles() {
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n";
        let m = parse_mtx(text, "t").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn malformed_inputs_rejected() {
        let bad = [
            "",
            "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n",
            "%%MatrixMarket matrix array real general\n2 1\n1\n",
            "%%MatrixMarket matrix array real general\n1 1\nnan\n",
            "%%MatrixMarket matrix array real general\n100000000 100000000\n",
        ];
        for t in bad {
            assert!(parse_mtx(t, "bad").is_err(), "{t:?}");
        }
    }

    #[test]
    fn family_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a1 = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let a2 = DMatrix::identity(2, 2);
        let p = ParametricMatrix::new(vec![a1, a2]).unwrap();
        let b = DVector::from_vec(vec![1.0, 0.5]);
        let pb = ParameterBox::cube(2, 1.0, 3.0).unwrap();
        save_family(dir.path(), &p, Some(&b), Some(&pb)).unwrap();
        let back = load_family(dir.path()).unwrap();
        assert_eq!(back.family.terms(), p.terms());
        assert_eq!(back.rhs.unwrap(), b);
        assert_eq!(back.parameter_box.unwrap(), pb);
    }

    #[test]
    fn sigma_csv_round_trip() {
        let v = vec![ParameterVector::new(vec![1.0, 2.5]), ParameterVector::new(vec![0.1, 3.0])];
        let text = format_sigma_csv(&v).unwrap();
        assert!(text.starts_with("sigma_1,sigma_2\n"));
        assert_eq!(parse_sigma_csv(&text, "t").unwrap(), v);
        assert!(parse_sigma_csv("s1,s2\n1,2\n", "t").is_err());
        assert!(parse_sigma_csv("sigma_1,sigma_2\n1\n", "t").is_err());
    }
}
