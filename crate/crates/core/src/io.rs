//! Text formats: Matrix Market matrices and vectors, plain `index value` vectors and
//! edge lists.
//!
//! Matrix Market indices are 1-based on disk. Plain vectors and edge lists are 0-based.
//! An edge list has one arc `u v [w]` per line; `#` starts a comment, a `# undirected`
//! line adds the reverse of every arc and `# nodes N` fixes the node count.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::system::SparseSystem;
use crate::vector::SparseVector;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads a whole file; I/O failures come back as parse errors on line 0.
pub fn read_file(path: impl AsRef<Path>) -> Result<String> {
    let p = path.as_ref();
    std::fs::read_to_string(p).map_err(|e| perr(0, format!("{}: {e}", p.display())))
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| perr(line, format!("cannot parse {what} from {tok:?}")))
}

struct Header {
    array: bool,
    symmetric: bool,
}

fn header(first: &str) -> Result<Header> {
    let toks: Vec<String> = first.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if toks.len() < 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(perr(1, "expected a %%MatrixMarket matrix header"));
    }
    let array = match toks[2].as_str() {
        "coordinate" => false,
        "array" => true,
        f => return Err(perr(1, format!("unsupported format {f}"))),
    };
    if toks[3] != "real" && toks[3] != "integer" {
        return Err(perr(1, format!("unsupported field {}", toks[3])));
    }
    let symmetric = match toks[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(perr(1, format!("unsupported symmetry {s}"))),
    };
    Ok(Header { array, symmetric })
}

/// Numbered lines that are neither blank nor `%` comments, skipping the header.
fn body(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

/// Parses a square Matrix Market matrix (coordinate or array).
pub fn read_matrix_market(text: &str) -> Result<SparseSystem> {
    let h = header(text.lines().next().unwrap_or(""))?;
    let mut lines = body(text);
    let (ln, size) = lines.next().ok_or_else(|| perr(1, "missing size line"))?;
    let mut it = size.split_whitespace();
    let rows: usize = num(it.next(), ln, "row count")?;
    let cols: usize = num(it.next(), ln, "column count")?;
    if rows != cols {
        return Err(perr(ln, format!("matrix is {rows}x{cols}, not square")));
    }
    let mut trip = Vec::new();
    if h.array {
        // column-major, lower triangle only when symmetric
        let mut k = 0usize;
        for (ln, l) in lines {
            for tok in l.split_whitespace() {
                let v: f64 = num(Some(tok), ln, "value")?;
                let (i, j) = array_position(k, rows, h.symmetric).ok_or_else(|| perr(ln, "too many values"))?;
                trip.push((i, j, v));
                if h.symmetric && i != j {
                    trip.push((j, i, v));
                }
                k += 1;
            }
        }
    } else {
        let nnz: usize = num(it.next(), ln, "entry count")?;
        for (ln, l) in lines {
            let mut it = l.split_whitespace();
            let i: usize = num(it.next(), ln, "row index")?;
            let j: usize = num(it.next(), ln, "column index")?;
            let v: f64 = num(it.next(), ln, "value")?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(perr(ln, format!("index ({i},{j}) outside 1..={rows}")));
            }
            trip.push((i - 1, j - 1, v));
            if h.symmetric && i != j {
                trip.push((j - 1, i - 1, v));
            }
        }
        let stored = if h.symmetric { trip.iter().filter(|t| t.0 >= t.1).count() } else { trip.len() };
        if stored != nnz {
            return Err(perr(0, format!("header announces {nnz} entries, found {stored}")));
        }
    }
    SparseSystem::from_triplets(rows, trip)
}

fn array_position(k: usize, n: usize, symmetric: bool) -> Option<(usize, usize)> {
    if !symmetric {
        return (k < n * n).then_some((k % n, k / n));
    }
    let mut k = k;
    for j in 0..n {
        let len = n - j;
        if k < len {
            return Some((j + k, j));
        }
        k -= len;
    }
    None
}

/// Coordinate, general, 1-based.
pub fn write_matrix_market(m: &SparseSystem) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", m.dim(), m.dim(), m.nnz());
    for (j, k, v) in m.triplets() {
        let _ = writeln!(s, "{} {} {}", j + 1, k + 1, fmt_f64(v));
    }
    s
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Parses a vector: a Matrix Market array or coordinate file (an `n x 1` matrix), or
/// plain `index value` lines (0-based), which need the dimension `n`.
pub fn read_vector(text: &str, n: Option<usize>) -> Result<SparseVector> {
    let first = text.lines().next().unwrap_or("").trim_start();
    if first.to_ascii_lowercase().starts_with("%%matrixmarket") {
        return read_mm_vector(text, n);
    }
    let n = n.ok_or_else(|| perr(0, "plain vector files need the dimension"))?;
    let mut pairs = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with('%') {
            continue;
        }
        let mut it = l.split_whitespace();
        let k: usize = num(it.next(), i + 1, "index")?;
        let v: f64 = num(it.next(), i + 1, "value")?;
        if k >= n {
            return Err(perr(i + 1, format!("index {k} outside 0..{n}")));
        }
        pairs.push((k, v));
    }
    SparseVector::from_pairs(n, pairs)
}

fn read_mm_vector(text: &str, n: Option<usize>) -> Result<SparseVector> {
    let h = header(text.lines().next().unwrap_or(""))?;
    let mut lines = body(text);
    let (ln, size) = lines.next().ok_or_else(|| perr(1, "missing size line"))?;
    let mut it = size.split_whitespace();
    let rows: usize = num(it.next(), ln, "row count")?;
    let cols: usize = num(it.next(), ln, "column count")?;
    if cols != 1 {
        return Err(perr(ln, format!("vector file has {cols} columns")));
    }
    if let Some(n) = n {
        if n != rows {
            return Err(Error::DimensionMismatch { expected: n, found: rows });
        }
    }
    let mut pairs = Vec::new();
    if h.array {
        let mut k = 0;
        for (ln, l) in lines {
            for tok in l.split_whitespace() {
                if k >= rows {
                    return Err(perr(ln, "too many values"));
                }
                pairs.push((k, num::<f64>(Some(tok), ln, "value")?));
                k += 1;
            }
        }
        if k != rows {
            return Err(perr(0, format!("expected {rows} values, found {k}")));
        }
    } else {
        for (ln, l) in lines {
            let mut it = l.split_whitespace();
            let i: usize = num(it.next(), ln, "row index")?;
            let _j: usize = num(it.next(), ln, "column index")?;
            let v: f64 = num(it.next(), ln, "value")?;
            if i == 0 || i > rows {
                return Err(perr(ln, format!("row {i} outside 1..={rows}")));
            }
            pairs.push((i - 1, v));
        }
    }
    SparseVector::from_pairs(rows, pairs)
}

/// Matrix Market array (dense column).
pub fn write_vector(v: &SparseVector) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} 1", v.dim());
    for x in v.to_dense() {
        let _ = writeln!(s, "{}", fmt_f64(x));
    }
    s
}

/// Parses an edge list. The node count is `# nodes N` if given, else one past the
/// largest index.
pub fn read_edge_list(text: &str) -> Result<Graph> {
    let mut undirected = false;
    let mut nodes: Option<usize> = None;
    let mut arcs = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let ln = i + 1;
        let l = l.trim();
        if let Some(c) = l.strip_prefix('#') {
            let mut it = c.split_whitespace();
            match it.next().map(|s| s.to_ascii_lowercase()) {
                Some(k) if k == "undirected" => undirected = true,
                Some(k) if k == "nodes" => nodes = Some(num(it.next(), ln, "node count")?),
                _ => {}
            }
            continue;
        }
        if l.is_empty() || l.starts_with('%') {
            continue;
        }
        let mut it = l.split_whitespace();
        let u: usize = num(it.next(), ln, "source node")?;
        let v: usize = num(it.next(), ln, "target node")?;
        let w: f64 = match it.next() {
            Some(tok) => num(Some(tok), ln, "weight")?,
            None => 1.0,
        };
        arcs.push((u, v, w));
    }
    let n = nodes.unwrap_or_else(|| arcs.iter().map(|a| a.0.max(a.1) + 1).max().unwrap_or(0));
    if undirected {
        Graph::undirected(n, arcs)
    } else {
        Graph::from_arcs(n, arcs)
    }
}

/// Writes every arc, with a `# nodes` header.
pub fn write_edge_list(g: &Graph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# nodes {}", g.n());
    for (u, v, w) in g.arcs() {
        let _ = writeln!(s, "{u} {v} {}", fmt_f64(w));
    }
    s
}
