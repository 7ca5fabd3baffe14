//! Text serialization of networks (`.relunet`).
//!
//! ```text
//! relunet 1
//! layers <L>
//! layer <rows> <cols>
//! <row-major weights, one row per line>
//! <bias on one line>
//! ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip rendering, so parsing restores
//! every bit.

use crate::error::{Error, Result};
use crate::network::{AffineLayer, ReluNetwork};
use std::fmt::Write as _;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "relunet";

pub fn to_string(net: &ReluNetwork) -> String {
    let mut s = String::with_capacity(net.num_params() * 12 + 64);
    writeln!(s, "{MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(s, "layers {}", net.depth()).unwrap();
    for l in net.layers() {
        writeln!(s, "layer {} {}", l.rows(), l.cols()).unwrap();
        for r in 0..l.rows() {
            write_row(&mut s, &l.weights()[r * l.cols()..(r + 1) * l.cols()]);
        }
        write_row(&mut s, l.bias());
    }
    s.push_str("end\n");
    s
}

fn write_row(s: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:e}").unwrap();
    }
    s.push('\n');
}

pub fn to_bytes(net: &ReluNetwork) -> Vec<u8> {
    to_string(net).into_bytes()
}

pub fn from_bytes(bytes: &[u8]) -> Result<ReluNetwork> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let upto = &bytes[..e.valid_up_to()];
        let line = upto.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = upto.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        Error::Parse {
            line,
            column,
            message: "invalid utf-8".into(),
        }
    })?;
    from_str(text)
}

pub fn save(net: &ReluNetwork, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ReluNetwork> {
    from_bytes(&std::fs::read(path)?)
}

struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, l)) => {
                self.last_line = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::Parse {
                line: self.last_line + 1,
                column: 1,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    }
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Splits on single spaces and yields (1-based column, token).
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut col = 0;
    line.split(' ').filter_map(move |t| {
        let c = col + 1;
        col += t.len() + 1;
        (!t.is_empty()).then_some((c, t))
    })
}

fn parse_header<'a>(cur: &mut Cursor<'a>, key: &str, what: &str) -> Result<(usize, Vec<(usize, &'a str)>)> {
    let (ln, line) = cur.next_line(what)?;
    let toks: Vec<_> = tokens(line).collect();
    match toks.first() {
        Some((_, k)) if *k == key => Ok((ln, toks[1..].to_vec())),
        Some((c, k)) => Err(perr(ln, *c, format!("expected `{key}`, found `{k}`"))),
        None => Err(perr(ln, 1, format!("expected `{key}`"))),
    }
}

fn parse_count(ln: usize, tok: Option<&(usize, &str)>, line_len: usize) -> Result<usize> {
    match tok {
        Some(&(c, t)) => t
            .parse::<usize>()
            .map_err(|e| perr(ln, c, format!("bad count `{t}`: {e}"))),
        None => Err(perr(ln, line_len + 1, "missing count")),
    }
}

fn parse_row(cur: &mut Cursor<'_>, n: usize, out: &mut Vec<f64>, what: &str) -> Result<()> {
    let (ln, line) = cur.next_line(what)?;
    let mut count = 0;
    for (c, t) in tokens(line) {
        if count == n {
            return Err(perr(ln, c, format!("too many values, expected {n}")));
        }
        let v: f64 = t
            .parse()
            .map_err(|e| perr(ln, c, format!("bad number `{t}`: {e}")))?;
        if !v.is_finite() {
            return Err(perr(ln, c, "non-finite value"));
        }
        out.push(v);
        count += 1;
    }
    if count < n {
        return Err(perr(ln, line.len() + 1, format!("expected {n} values, found {count}")));
    }
    Ok(())
}

pub fn from_str(text: &str) -> Result<ReluNetwork> {
    let mut cur = Cursor {
        lines: text.lines().enumerate(),
        last_line: 0,
    };
    let (ln, rest) = parse_header(&mut cur, MAGIC, "header")?;
    let version = parse_count(ln, rest.first(), MAGIC.len())?;
    if version != FORMAT_VERSION as usize {
        return Err(perr(ln, rest[0].0, format!("unsupported version {version}")));
    }
    let (ln, rest) = parse_header(&mut cur, "layers", "layer count")?;
    let depth = parse_count(ln, rest.first(), 6)?;
    if depth == 0 {
        return Err(perr(ln, rest[0].0, "network needs at least one layer"));
    }
    let mut layers = Vec::with_capacity(depth);
    let mut prev_rows: Option<usize> = None;
    for k in 0..depth {
        let (ln, rest) = parse_header(&mut cur, "layer", "layer header")?;
        let rows = parse_count(ln, rest.first(), 5)?;
        let cols = parse_count(ln, rest.get(1), 5)?;
        if rows == 0 || cols == 0 {
            return Err(perr(ln, 1, "layer dimensions must be positive"));
        }
        if let Some(p) = prev_rows {
            if p != cols {
                return Err(perr(ln, rest[1].0, format!("layer {k} has {cols} inputs, previous layer has {p} outputs")));
            }
        }
        let mut w = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            parse_row(&mut cur, cols, &mut w, "weight row")?;
        }
        let mut b = Vec::with_capacity(rows);
        parse_row(&mut cur, rows, &mut b, "bias row")?;
        layers.push(AffineLayer::new(rows, cols, w, b)?);
        prev_rows = Some(rows);
    }
    parse_header(&mut cur, "end", "end marker")?;
    for (i, l) in cur.lines {
        if !l.trim().is_empty() {
            return Err(perr(i + 1, 1, "trailing content after end marker"));
        }
    }
    ReluNetwork::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bounded_affine, p0, p1};

    #[test]
    fn round_trip_p0() {
        let n = p0();
        let back = from_str(&to_string(&n)).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn round_trip_awkward_floats() {
        let vals = vec![0.1, -1.0 / 3.0, 1e-300, 5e-324, 123456789.123456789, -0.0];
        let l = AffineLayer::new(1, 6, vals.clone(), vec![std::f64::consts::PI]).unwrap();
        let n = ReluNetwork::new(vec![l]).unwrap();
        let back = from_str(&to_string(&n)).unwrap();
        for (a, b) in back.layers()[0].weights().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_is_error() {
        let s = to_string(&bounded_affine(&[vec![100.0]], &[1.0]).unwrap());
        for cut in [5, s.len() / 2, s.len() - 3] {
            assert!(matches!(from_str(&s[..cut]), Err(Error::Parse { .. })), "cut {cut}");
        }
    }

    #[test]
    fn errors_carry_position() {
        let mut s = to_string(&p1());
        s = s.replacen("-1e0", "-1x0", 1);
        match from_str(&s) {
            Err(Error::Parse { line, column, .. }) => {
                assert!(line >= 4);
                assert!(column >= 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(from_str("relunet 7\n"), Err(Error::Parse { line: 1, column: 9, .. })));
        assert!(matches!(from_str("nonsense"), Err(Error::Parse { line: 1, .. })));
    }
}
