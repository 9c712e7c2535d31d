//! QSTATE / KRAUS / FLAGS text formats and instance digests.
//!
//! ```text
//! qstate 1 dim=2 dims=2
//! 5.0000000000000000e-1+0.0000000000000000e0j 5.0000000000000000e-1+0.0000000000000000e0j
//! 5.0000000000000000e-1+0.0000000000000000e0j 5.0000000000000000e-1+0.0000000000000000e0j
//! ```

use sha2::{Digest, Sha256};

use crate::channel::KrausChannel;
use crate::flags::FlagBasis;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::state::{DensityMatrix, PureState};
use crate::Theory;

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

/// `<re><sign><im>j` with 17 significant digits.
pub fn format_complex(z: C64) -> String {
    // normalise -0 so identical values always print identically
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    format!("{re:.16e}{im:+.16e}j")
}

pub fn parse_complex(s: &str) -> Option<C64> {
    let body = s.strip_suffix('j').or_else(|| s.strip_suffix('i'));
    let Some(body) = body else {
        return s.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re = body[..split].parse::<f64>().ok()?;
    let im = body[split..].parse::<f64>().ok()?;
    Some(C64::new(re, im))
}

fn join_dims(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_dims(s: &str, line: usize) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .or_else(|_| parse_err(line, format!("bad dimension list `{s}`")))
}

fn write_block(out: &mut String, m: &ComplexMatrix) {
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|z| format_complex(*z)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn read_block(lines: &[(usize, &str)], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if lines.len() != rows {
        let at = lines.last().map(|l| l.0).unwrap_or(0);
        return parse_err(at, format!("expected {rows} rows, found {}", lines.len()));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (no, text) in lines {
        let entries: Vec<&str> = text.split_whitespace().collect();
        if entries.len() != cols {
            return parse_err(*no, format!("expected {cols} entries, found {}", entries.len()));
        }
        for e in entries {
            match parse_complex(e) {
                Some(z) => data.push(z),
                None => return parse_err(*no, format!("bad complex entry `{e}`")),
            }
        }
    }
    ComplexMatrix::new(rows, cols, data)
}

struct Header<'a> {
    line: usize,
    keys: Vec<(&'a str, &'a str)>,
}

impl<'a> Header<'a> {
    fn parse(line: usize, text: &'a str, tag: &str) -> Result<Self> {
        let mut toks = text.split_whitespace();
        if toks.next() != Some(tag) {
            return parse_err(line, format!("expected `{tag}` header"));
        }
        if toks.next() != Some("1") {
            return parse_err(line, format!("unsupported {tag} version"));
        }
        let mut keys = Vec::new();
        for t in toks {
            match t.split_once('=') {
                Some(kv) => keys.push(kv),
                None => return parse_err(line, format!("bad header field `{t}`")),
            }
        }
        Ok(Self { line, keys })
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.keys.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        match self.get(key).map(str::parse::<usize>) {
            Some(Ok(v)) => Ok(v),
            _ => parse_err(self.line, format!("missing or bad `{key}`")),
        }
    }
}

fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'))
        .collect()
}

pub fn write_qstate(rho: &DensityMatrix) -> String {
    let mut out = format!("qstate 1 dim={} dims={}\n", rho.dim(), join_dims(rho.dims()));
    write_block(&mut out, rho.matrix());
    out
}

/// Parse a QSTATE document; the result satisfies every density-matrix invariant.
pub fn read_qstate(text: &str) -> Result<DensityMatrix> {
    let lines: Vec<(usize, &str)> = content_lines(text).into_iter().filter(|(_, l)| !l.is_empty()).collect();
    let Some(&(hline, htext)) = lines.first() else {
        return parse_err(1, "empty document");
    };
    let header = Header::parse(hline, htext, "qstate")?;
    let d = header.usize("dim")?;
    let dims = match header.get("dims") {
        Some(s) => parse_dims(s, hline)?,
        None => vec![d],
    };
    if dims.iter().product::<usize>() != d {
        return parse_err(hline, format!("dims {dims:?} do not multiply to {d}"));
    }
    let m = read_block(&lines[1..], d, d)?;
    DensityMatrix::new(m, dims)
}

pub fn write_kraus(ch: &KrausChannel) -> String {
    let mut out = format!(
        "kraus 1 n={} in={} out={}",
        ch.kraus().len(),
        ch.in_dim(),
        ch.out_dim()
    );
    if ch.in_dims().len() > 1 || ch.out_dims().len() > 1 {
        out.push_str(&format!(
            " in_dims={} out_dims={}",
            join_dims(ch.in_dims()),
            join_dims(ch.out_dims())
        ));
    }
    out.push('\n');
    for (i, k) in ch.kraus().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_block(&mut out, k);
    }
    out
}

/// Parse a KRAUS document; the channel must be trace preserving.
pub fn read_kraus(text: &str) -> Result<KrausChannel> {
    let lines = content_lines(text);
    let Some(start) = lines.iter().position(|(_, l)| !l.is_empty()) else {
        return parse_err(1, "empty document");
    };
    let (hline, htext) = lines[start];
    let header = Header::parse(hline, htext, "kraus")?;
    let n = header.usize("n")?;
    let din = header.usize("in")?;
    let dout = header.usize("out")?;
    let in_dims = match header.get("in_dims") {
        Some(s) => parse_dims(s, hline)?,
        None => vec![din],
    };
    let out_dims = match header.get("out_dims") {
        Some(s) => parse_dims(s, hline)?,
        None => vec![dout],
    };
    let mut blocks: Vec<Vec<(usize, &str)>> = Vec::new();
    let mut cur = Vec::new();
    for &(no, l) in &lines[start + 1..] {
        if l.is_empty() {
            if !cur.is_empty() {
                blocks.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push((no, l));
        }
    }
    if !cur.is_empty() {
        blocks.push(cur);
    }
    if blocks.len() != n {
        return parse_err(hline, format!("header declares {n} operators, found {}", blocks.len()));
    }
    let kraus = blocks
        .iter()
        .map(|b| read_block(b, dout, din))
        .collect::<Result<Vec<_>>>()?;
    KrausChannel::new(kraus, in_dims, out_dims)
}

pub fn write_flags(basis: &FlagBasis) -> String {
    let dim = basis.register_dim();
    let mut out = format!(
        "flags 1 n={} dim={dim} dims={} theory={}\n",
        basis.len(),
        join_dims(basis.register_dims()),
        basis.theory()
    );
    for v in basis.vectors() {
        let row: Vec<String> = v.amplitudes().iter().map(|z| format_complex(*z)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parse a FLAGS document, one basis vector per row; the basis is validated.
pub fn read_flags(text: &str) -> Result<FlagBasis> {
    let lines: Vec<(usize, &str)> = content_lines(text).into_iter().filter(|(_, l)| !l.is_empty()).collect();
    let Some(&(hline, htext)) = lines.first() else {
        return parse_err(1, "empty document");
    };
    let header = Header::parse(hline, htext, "flags")?;
    let n = header.usize("n")?;
    let d = header.usize("dim")?;
    let dims = match header.get("dims") {
        Some(s) => parse_dims(s, hline)?,
        None => vec![d],
    };
    if dims.iter().product::<usize>() != d {
        return parse_err(hline, format!("dims {dims:?} do not multiply to {d}"));
    }
    let theory = match header.get("theory") {
        Some("coherence") | None => Theory::Coherence,
        Some("entanglement") => Theory::Entanglement,
        Some(t) => return parse_err(hline, format!("unknown theory `{t}`")),
    };
    let m = read_block(&lines[1..], n, d)?;
    let vectors = (0..n)
        .map(|r| PureState::new(m.row(r).to_vec(), dims.clone()))
        .collect::<Result<Vec<_>>>()?;
    FlagBasis::new(vectors, theory)
}

/// Hex SHA-256 over the given text parts, each terminated by a NUL byte.
pub fn digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}
