//! Graph snapshots and versioned JSON output.
//!
//! A snapshot is plain text:
//!
//! ```text
//! N L_mean
//! 0110...        one character per vertex
//! u v            one line per edge
//! ```

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{OpinionGraph, Vertex};

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(g: &OpinionGraph, mut w: W) -> Result<()> {
    let mean = if g.n() == 0 {
        0.0
    } else {
        g.degree_sum() as f64 / g.n() as f64
    };
    writeln!(w, "{} {}", g.n(), mean)?;
    let line: String = g
        .opinions()
        .iter()
        .map(|&s| if s == 1 { '1' } else { '0' })
        .collect();
    writeln!(w, "{line}")?;
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<OpinionGraph> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let parse = |line: usize, msg: String| Error::Parse { line, msg };
    let (ln, header) = lines
        .next()
        .ok_or_else(|| parse(1, "missing header".into()))?;
    let header = header?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse(ln, format!("bad vertex count in {header:?}")))?;
    let l_mean: f64 = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse(ln, format!("bad mean degree in {header:?}")))?;
    let (ln, ops) = lines
        .next()
        .ok_or_else(|| parse(ln + 1, "missing opinion line".into()))?;
    let ops = ops?;
    let ops = ops.trim();
    if ops.len() != n {
        return Err(parse(
            ln,
            format!("{} opinions for {n} vertices", ops.len()),
        ));
    }
    let opinions = ops
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(parse(ln, format!("opinion {other:?} is not 0 or 1"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    let mut edges = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let mut it = line.split_whitespace();
        let mut vertex = || -> Result<Vertex> {
            it.next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse(ln, format!("bad edge line {line:?}")))
        };
        let (u, v) = (vertex()?, vertex()?);
        edges.push((u, v));
    }
    let g = OpinionGraph::from_edges(n, &edges, &opinions)?;
    if n > 0 && (g.degree_sum() as f64 / n as f64 - l_mean).abs() > 1e-6 * l_mean.max(1.0) {
        return Err(parse(
            1,
            format!("header mean degree {l_mean} disagrees with the edge list"),
        ));
    }
    Ok(g)
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON of `value` with a leading `schema_version` field.
pub fn to_versioned_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body: value,
    })?)
}
