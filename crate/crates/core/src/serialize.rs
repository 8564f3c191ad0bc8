//! Versioned text format for built expansions.
//!
//! ```text
//! KLGP1
//! dim 1
//! method smooth
//! domain -1e0 1e0
//! order 25
//! rank 10
//! spectrum
//! <one eigenvalue per line, all `order` (or nx·ny) of them>
//! coefficients
//! <one line per retained eigenfunction, space separated>
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip exponent form, so
//! reading a file back reproduces every bit. 2D files carry four domain
//! bounds (`x_lo x_hi y_lo y_hi`) and two orders, and each coefficient line
//! is the row-major `n_x × n_y` block.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::basis::Method;
use crate::error::{Error, Result};
use crate::kl1d::KlExpansion;
use crate::kl2d::{KlExpansion2d, Rectangle};
use crate::quadrature::Interval;

pub const MAGIC: &str = "KLGP1";

#[derive(Debug, Clone, PartialEq)]
pub enum StoredExpansion {
    OneD(KlExpansion),
    TwoD(KlExpansion2d),
}

impl From<KlExpansion> for StoredExpansion {
    fn from(e: KlExpansion) -> Self {
        StoredExpansion::OneD(e)
    }
}

impl From<KlExpansion2d> for StoredExpansion {
    fn from(e: KlExpansion2d) -> Self {
        StoredExpansion::TwoD(e)
    }
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:e}").unwrap();
    }
    out
}

pub fn write_expansion(expansion: &StoredExpansion) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    let (spectrum, rows): (&[f64], Vec<String>) = match expansion {
        StoredExpansion::OneD(e) => {
            let d = e.domain();
            writeln!(out, "dim 1").unwrap();
            writeln!(out, "method {}", e.method().tag()).unwrap();
            writeln!(out, "domain {}", join([d.lo(), d.hi()])).unwrap();
            writeln!(out, "order {}", e.order()).unwrap();
            let rows = e
                .coefficients()
                .column_iter()
                .map(|c| join(c.iter().copied()))
                .collect();
            (e.spectrum(), rows)
        }
        StoredExpansion::TwoD(e) => {
            let d = e.domain();
            let (nx, ny) = e.orders();
            writeln!(out, "dim 2").unwrap();
            writeln!(out, "method {}", e.method().tag()).unwrap();
            writeln!(
                out,
                "domain {}",
                join([d.x.lo(), d.x.hi(), d.y.lo(), d.y.hi()])
            )
            .unwrap();
            writeln!(out, "order {nx} {ny}").unwrap();
            let rows = (0..e.eigenvalues().len())
                .map(|l| join(e.coefficient_block(l).iter().copied()))
                .collect();
            (e.spectrum(), rows)
        }
    };
    writeln!(out, "rank {}", rows.len()).unwrap();
    writeln!(out, "spectrum").unwrap();
    for v in spectrum {
        writeln!(out, "{v:e}").unwrap();
    }
    writeln!(out, "coefficients").unwrap();
    for row in rows {
        writeln!(out, "{row}").unwrap();
    }
    writeln!(out, "end").unwrap();
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => Err(Error::format(self.line + 1, "unexpected end of file")),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::format(
                self.line,
                format!("expected `{key}`, found `{l}`"),
            ));
        }
        Ok(parts.collect())
    }

    fn exact(&mut self, token: &str) -> Result<()> {
        let l = self.next()?;
        if l.trim() != token {
            return Err(Error::format(
                self.line,
                format!("expected `{token}`, found `{l}`"),
            ));
        }
        Ok(())
    }

    fn floats(&self, parts: &[&str], count: usize) -> Result<Vec<f64>> {
        if parts.len() != count {
            return Err(Error::format(
                self.line,
                format!("expected {count} values, found {}", parts.len()),
            ));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(self.line, format!("bad number `{p}`")))
            })
            .collect()
    }

    fn counts(&self, parts: &[&str], count: usize) -> Result<Vec<usize>> {
        if parts.len() != count {
            return Err(Error::format(
                self.line,
                format!("expected {count} integers, found {}", parts.len()),
            ));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::format(self.line, format!("bad integer `{p}`")))
            })
            .collect()
    }
}

pub fn read_expansion(text: &str) -> Result<StoredExpansion> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next()?;
    if magic != MAGIC {
        return Err(Error::format(1, format!("missing `{MAGIC}` header")));
    }
    let dim = lines.keyed("dim")?;
    let dim = lines.counts(&dim, 1)?[0];
    if dim != 1 && dim != 2 {
        return Err(Error::format(
            lines.line,
            format!("unsupported dimension {dim}"),
        ));
    }
    let method = lines.keyed("method")?;
    let method = match method.as_slice() {
        [tag] => Method::from_tag(tag)
            .ok_or_else(|| Error::format(lines.line, format!("unknown method `{tag}`")))?,
        _ => return Err(Error::format(lines.line, "expected one method tag")),
    };
    let domain = lines.keyed("domain")?;
    let domain = lines.floats(&domain, 2 * dim)?;
    let order = lines.keyed("order")?;
    let order = lines.counts(&order, dim)?;
    let rank = lines.keyed("rank")?;
    let rank = lines.counts(&rank, 1)?[0];
    let size: usize = order.iter().product();
    if size == 0 || rank > size {
        return Err(Error::format(
            lines.line,
            "rank exceeds the discretization size",
        ));
    }

    lines.exact("spectrum")?;
    let mut spectrum = Vec::with_capacity(size);
    for _ in 0..size {
        let l = lines.next()?;
        spectrum.push(lines.floats(&[l.trim()], 1)?[0]);
    }
    lines.exact("coefficients")?;
    let mut rows = Vec::with_capacity(rank);
    for _ in 0..rank {
        let l = lines.next()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        rows.push(lines.floats(&parts, size)?);
    }
    lines.exact("end")?;

    let at_end = lines.line;
    let interval =
        |lo: f64, hi: f64| Interval::new(lo, hi).map_err(|e| Error::format(at_end, e.to_string()));
    let wrap = |e: Error| match e {
        Error::Contract(m) => Error::format(at_end, m),
        other => other,
    };
    if dim == 1 {
        if method == Method::Tensor {
            return Err(Error::format(at_end, "tensor method in a 1D file"));
        }
        let coefficients = DMatrix::from_fn(size, rank, |j, i| rows[i][j]);
        let domain = interval(domain[0], domain[1])?;
        KlExpansion::from_parts(domain, spectrum, coefficients, method)
            .map(StoredExpansion::OneD)
            .map_err(wrap)
    } else {
        if method != Method::Tensor {
            return Err(Error::format(at_end, "2D files must use the tensor method"));
        }
        let rect = Rectangle::new(
            interval(domain[0], domain[1])?,
            interval(domain[2], domain[3])?,
        );
        KlExpansion2d::from_parts(rect, (order[0], order[1]), spectrum, rows)
            .map(StoredExpansion::TwoD)
            .map_err(wrap)
    }
}
