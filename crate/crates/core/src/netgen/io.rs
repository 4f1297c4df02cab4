//! Plain-text edge lists.
//!
//! ```text
//! # newsdiff network v1
//! n 300
//! kind random
//! seed 42
//! edges 1806
//! 0 17
//! 0 93
//! ...
//! communities
//! 0 0
//! 1 0
//! ...
//! ```
//!
//! Header lines are `key value`. `edges <count>` is followed by exactly that
//! many `u v` lines with `u < v` in lexicographic order. The optional
//! `communities` block lists `node community` for every node. Lines starting
//! with `#` are comments.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{Network, NetworkKind};
use crate::error::{Error, Result};

pub fn write_edge_list<W: Write>(mut w: W, net: &Network) -> std::io::Result<()> {
    writeln!(w, "# newsdiff network v1")?;
    writeln!(w, "n {}", net.n())?;
    writeln!(w, "kind {}", net.kind.name())?;
    writeln!(w, "seed {}", net.gen_seed)?;
    writeln!(w, "edges {}", net.edge_count())?;
    for (u, v) in net.edges() {
        writeln!(w, "{u} {v}")?;
    }
    if let Some(c) = &net.communities {
        writeln!(w, "communities")?;
        for (v, c) in c.iter().enumerate() {
            writeln!(w, "{v} {c}")?;
        }
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R, path: &Path) -> Result<Network> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.starts_with('#')));

    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((no, Ok(l))) => Ok((no, l)),
            Some((_, Err(e))) => Err(Error::io(path.display().to_string(), e)),
            None => Err(perr(0, format!("unexpected end of file, expected {what}"))),
        }
    };
    fn pair(no: usize, line: &str, perr: &dyn Fn(usize, String) -> Error) -> Result<(usize, usize)> {
        let mut it = line.split_whitespace();
        let a = it.next().and_then(|s| s.parse().ok());
        let b = it.next().and_then(|s| s.parse().ok());
        match (a, b, it.next()) {
            (Some(a), Some(b), None) => Ok((a, b)),
            _ => Err(perr(no, format!("expected two integers, found `{line}`"))),
        }
    }
    let header = |key: &str, no: usize, line: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(|s| s.trim().to_string())
            .ok_or_else(|| perr(no, format!("expected `{key} <value>`, found `{line}`")))
    };

    let (no, l) = next("n")?;
    let n: usize = header("n", no, &l)?.parse().map_err(|_| perr(no, "bad node count".into()))?;
    let (no, l) = next("kind")?;
    let kind_s = header("kind", no, &l)?;
    let kind = NetworkKind::parse(&kind_s).ok_or_else(|| perr(no, format!("unknown kind `{kind_s}`")))?;
    let (no, l) = next("seed")?;
    let seed: u64 = header("seed", no, &l)?.parse().map_err(|_| perr(no, "bad seed".into()))?;
    let (no, l) = next("edges")?;
    let m: usize = header("edges", no, &l)?.parse().map_err(|_| perr(no, "bad edge count".into()))?;

    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (no, l) = next("an edge")?;
        edges.push(pair(no, &l, &perr)?);
    }
    let mut net = Network::from_edges(n, edges, kind, seed)
        .map_err(|e| perr(no, e.to_string()))?;

    if let Ok((no, l)) = next("communities") {
        if l.trim() != "communities" {
            return Err(perr(no, format!("unexpected trailing line `{l}`")));
        }
        let mut membership = vec![usize::MAX; n];
        for _ in 0..n {
            let (no, l) = next("a community assignment")?;
            let (v, c) = pair(no, &l, &perr)?;
            if v >= n {
                return Err(perr(no, format!("node {v} out of range")));
            }
            membership[v] = c;
        }
        if let Some(v) = membership.iter().position(|&c| c == usize::MAX) {
            return Err(perr(0, format!("node {v} has no community")));
        }
        net = net.with_communities(membership)?;
    }
    Ok(net)
}
