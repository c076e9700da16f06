//! Plain-text field dumps.
//!
//! ```text
//! # dim,n[,length]
//! index,x[,y],value
//! ```
//!
//! Values are printed with the shortest representation that parses back to
//! the same `f64`, so a dump round-trips bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};

pub fn field_to_csv(f: &ScalarField) -> String {
    let grid = f.grid();
    let mut out = String::with_capacity(32 * grid.len());
    if grid.length() == 1.0 {
        let _ = writeln!(out, "# {},{}", grid.dim(), grid.n());
    } else {
        let _ = writeln!(out, "# {},{},{:e}", grid.dim(), grid.n(), grid.length());
    }
    for (i, v) in f.values().iter().enumerate() {
        let x = grid.coords(i);
        if grid.dim() == 1 {
            let _ = writeln!(out, "{i},{:e},{v:e}", x[0]);
        } else {
            let _ = writeln!(out, "{i},{:e},{:e},{v:e}", x[0], x[1]);
        }
    }
    out
}

fn num<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {what} from `{s}`")))
}

pub fn field_from_csv(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let header = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("missing `# dim,n` header".into()))?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err(Error::Format(format!("header needs `dim,n[,length]`, got `{header}`")));
    }
    let dim: usize = num(parts[0], "dim", 1)?;
    let n: usize = num(parts[1], "n", 1)?;
    let length: f64 = if parts.len() == 3 { num(parts[2], "length", 1)? } else { 1.0 };
    let grid = TorusGrid::with_length(dim, n, length)?;
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != dim + 2 {
            return Err(Error::Format(format!("line {lineno}: expected {} columns", dim + 2)));
        }
        let idx: usize = num(cols[0], "index", lineno)?;
        if idx != values.len() {
            return Err(Error::Format(format!("line {lineno}: expected index {}, got {idx}", values.len())));
        }
        if idx >= grid.len() {
            return Err(Error::Format(format!("line {lineno}: more rows than nodes")));
        }
        let x = grid.coords(idx);
        for d in 0..dim {
            let c: f64 = num(cols[1 + d], "coordinate", lineno)?;
            if (c - x[d]).abs() > 1e-9 * length {
                return Err(Error::Format(format!("line {lineno}: coordinate {c} does not match node {idx}")));
            }
        }
        values.push(num::<f64>(cols[dim + 1], "value", lineno)?);
    }
    if values.len() != grid.len() {
        return Err(Error::Format(format!("expected {} rows, found {}", grid.len(), values.len())));
    }
    ScalarField::new(grid, values)
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    std::fs::write(path, field_to_csv(f))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)?;
    field_from_csv(&text).map_err(|e| e.context(format!("reading {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for (dim, n, l) in [(1, 16, 1.0), (2, 8, 1.0), (1, 10, 90.0)] {
            let g = TorusGrid::with_length(dim, n, l).unwrap();
            let f = ScalarField::from_fn(g, |x| (x[0] * 1.2345).sin() / 3.0 + x[1].exp() * 1e-300);
            let back = field_from_csv(&field_to_csv(&f)).unwrap();
            assert_eq!(back.grid(), f.grid());
            for (a, b) in f.values().iter().zip(back.values()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn header_and_rows() {
        let g = TorusGrid::new(1, 8).unwrap();
        let text = field_to_csv(&ScalarField::constant(g, 0.5));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# 1,8"));
        assert_eq!(lines.next(), Some("0,0e0,5e-1"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn malformed_inputs() {
        assert!(field_from_csv("").is_err());
        assert!(field_from_csv("1,8\n").is_err());
        assert!(field_from_csv("# 1,8\n0,0,1\n").is_err());
        let g = TorusGrid::new(1, 8).unwrap();
        let text = field_to_csv(&ScalarField::constant(g, 1.0)).replace("3,3.75e-1", "3,0.9");
        assert!(field_from_csv(&text).is_err());
    }
}
