//! Static, undirected, unweighted social networks.

mod community;
mod io;
mod metrics;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use community::detect_communities;
pub use io::{read_edge_list, write_edge_list};
pub use metrics::{
    avg_clustering, avg_path_length, avg_path_length_with, bfs_layers, degree_stats, density,
    density_degree_sum, modularity, stats, stats_with, NetworkStats, PartitionSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Random,
    ScaleFree,
    HighBrokerage,
    /// Hand-built or imported graphs.
    Custom,
}

impl NetworkKind {
    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Random => "random",
            NetworkKind::ScaleFree => "scale_free",
            NetworkKind::HighBrokerage => "high_brokerage",
            NetworkKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Some(NetworkKind::Random),
            "scale_free" => Some(NetworkKind::ScaleFree),
            "high_brokerage" => Some(NetworkKind::HighBrokerage),
            "custom" => Some(NetworkKind::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Simple undirected graph on nodes `0..n` with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
    pub kind: NetworkKind,
    /// Ground-truth community of each node, when the generator planted one.
    pub communities: Option<Vec<usize>>,
    pub gen_seed: u64,
}

impl Network {
    /// Builds a graph from an edge list, rejecting self-loops, duplicate
    /// edges and out-of-range endpoints.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        kind: NetworkKind,
        gen_seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("a network needs at least one node".into()));
        }
        let mut adj = vec![Vec::new(); n];
        let mut edge_count = 0;
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Precondition(format!("edge ({u}, {v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::Precondition(format!("self-loop on node {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
            edge_count += 1;
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Precondition(format!("duplicate edge at node {u}")));
            }
        }
        Ok(Network {
            adj,
            edge_count,
            kind,
            communities: None,
            gen_seed,
        })
    }

    pub fn with_communities(mut self, membership: Vec<usize>) -> Result<Self> {
        if membership.len() != self.n() {
            return Err(Error::Precondition(format!(
                "community membership covers {} nodes, network has {}",
                membership.len(),
                self.n()
            )));
        }
        self.communities = Some(membership);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn is_connected(&self) -> bool {
        let layers = bfs_layers(self, 0);
        layers.iter().map(Vec::len).sum::<usize>() == self.n()
    }
}

/// Generator parameters, as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Random {
        #[serde(default = "defaults::random_nodes")]
        nodes: usize,
        /// Overrides `mean_degree` when set.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edge_prob: Option<f64>,
        #[serde(default = "defaults::random_mean_degree")]
        mean_degree: f64,
    },
    ScaleFree {
        #[serde(default = "defaults::scale_free_nodes")]
        nodes: usize,
        #[serde(default = "defaults::attach_m")]
        attach_m: usize,
    },
    HighBrokerage {
        #[serde(default = "defaults::random_nodes")]
        nodes: usize,
        #[serde(default = "defaults::community_size")]
        community_size: usize,
        #[serde(default = "defaults::bridge_p")]
        bridge_p: f64,
    },
}

pub mod defaults {
    pub fn random_nodes() -> usize {
        300
    }
    pub fn random_mean_degree() -> f64 {
        12.07
    }
    pub fn scale_free_nodes() -> usize {
        288
    }
    pub fn attach_m() -> usize {
        6
    }
    pub fn community_size() -> usize {
        10
    }
    pub fn bridge_p() -> f64 {
        0.30
    }
}

impl NetworkSpec {
    pub fn default_for(kind: NetworkKind) -> Option<Self> {
        match kind {
            NetworkKind::Random => Some(NetworkSpec::Random {
                nodes: defaults::random_nodes(),
                edge_prob: None,
                mean_degree: defaults::random_mean_degree(),
            }),
            NetworkKind::ScaleFree => Some(NetworkSpec::ScaleFree {
                nodes: defaults::scale_free_nodes(),
                attach_m: defaults::attach_m(),
            }),
            NetworkKind::HighBrokerage => Some(NetworkSpec::HighBrokerage {
                nodes: defaults::random_nodes(),
                community_size: defaults::community_size(),
                bridge_p: defaults::bridge_p(),
            }),
            NetworkKind::Custom => None,
        }
    }

    pub fn all_defaults() -> Vec<Self> {
        [NetworkKind::Random, NetworkKind::ScaleFree, NetworkKind::HighBrokerage]
            .into_iter()
            .filter_map(Self::default_for)
            .collect()
    }

    pub fn kind(&self) -> NetworkKind {
        match self {
            NetworkSpec::Random { .. } => NetworkKind::Random,
            NetworkSpec::ScaleFree { .. } => NetworkKind::ScaleFree,
            NetworkSpec::HighBrokerage { .. } => NetworkKind::HighBrokerage,
        }
    }

    pub fn nodes(&self) -> usize {
        match *self {
            NetworkSpec::Random { nodes, .. }
            | NetworkSpec::ScaleFree { nodes, .. }
            | NetworkSpec::HighBrokerage { nodes, .. } => nodes,
        }
    }

    /// Problems with these parameters, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match *self {
            NetworkSpec::Random { nodes, edge_prob, mean_degree } => {
                if nodes < 2 {
                    v.push(format!("network.nodes must be >= 2 for a random network, got {nodes}"));
                }
                let p = edge_prob.unwrap_or(mean_degree / (nodes.max(2) - 1) as f64);
                if !(p > 0.0 && p < 1.0) {
                    v.push(format!("random network edge probability must be in (0, 1), got {p}"));
                }
            }
            NetworkSpec::ScaleFree { nodes, attach_m } => {
                if attach_m < 1 || attach_m + 1 >= nodes {
                    v.push(format!(
                        "scale-free attach_m must satisfy 1 <= attach_m < nodes - 1, got attach_m={attach_m}, nodes={nodes}"
                    ));
                }
            }
            NetworkSpec::HighBrokerage { nodes, community_size, bridge_p } => {
                if community_size < 3 {
                    v.push(format!("community_size must be >= 3, got {community_size}"));
                } else if nodes < community_size {
                    v.push(format!("nodes ({nodes}) must be at least community_size ({community_size})"));
                } else if nodes / community_sizes(nodes, community_size).len() < 3 {
                    v.push("every community needs at least 3 nodes".into());
                }
                if !(0.0..=1.0).contains(&bridge_p) {
                    v.push(format!("bridge_p must be in [0, 1], got {bridge_p}"));
                }
            }
        }
        v
    }

    pub fn generate(&self, seed: u64) -> Result<Network> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(Error::Precondition(v.join("; ")));
        }
        match *self {
            NetworkSpec::Random { nodes, edge_prob, mean_degree } => {
                let p = edge_prob.unwrap_or(mean_degree / (nodes - 1) as f64);
                gen_random_connected(nodes, p, seed)
            }
            NetworkSpec::ScaleFree { nodes, attach_m } => gen_scale_free(nodes, attach_m, seed),
            NetworkSpec::HighBrokerage { nodes, community_size, bridge_p } => {
                gen_high_brokerage(nodes, community_size, bridge_p, seed)
            }
        }
    }
}

/// Maximum regenerations attempted when a generator yields a disconnected
/// graph. Attempt `k` uses seed `seed + k`.
pub const MAX_REGENERATIONS: u64 = 5;

/// Erdős–Rényi G(n, p): every unordered pair is an edge independently with
/// probability `edge_prob`. May be disconnected.
pub fn gen_random(n: usize, edge_prob: f64, seed: u64) -> Result<Network> {
    if n < 2 {
        return Err(Error::Precondition(format!("random network needs n >= 2, got {n}")));
    }
    if !(edge_prob > 0.0 && edge_prob < 1.0) {
        return Err(Error::Precondition(format!("edge_prob must be in (0, 1), got {edge_prob}")));
    }
    let mut rng = seed::rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(edge_prob) {
                edges.push((u, v));
            }
        }
    }
    Network::from_edges(n, edges, NetworkKind::Random, seed)
}

/// [`gen_random`], regenerated with perturbed seeds until connected.
pub fn gen_random_connected(n: usize, edge_prob: f64, seed: u64) -> Result<Network> {
    for attempt in 0..=MAX_REGENERATIONS {
        let net = gen_random(n, edge_prob, seed.wrapping_add(attempt))?;
        if net.is_connected() {
            return Ok(net);
        }
    }
    Err(Error::Disconnected(format!(
        "random network n={n}, p={edge_prob} still disconnected after {MAX_REGENERATIONS} regenerations from seed {seed}"
    )))
}

/// Preferential attachment. Starts from `attach_m` isolated nodes; each new
/// node links to `attach_m` distinct existing nodes chosen proportionally to
/// degree, so the graph has exactly `attach_m · (n − attach_m)` edges.
pub fn gen_scale_free(n: usize, attach_m: usize, seed: u64) -> Result<Network> {
    if attach_m < 1 || attach_m + 1 >= n {
        return Err(Error::Precondition(format!(
            "scale-free network needs 1 <= attach_m < n - 1, got attach_m={attach_m}, n={n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut edges = Vec::with_capacity(attach_m * (n - attach_m));
    // Each node appears once per incident edge end.
    let mut ends: Vec<usize> = Vec::with_capacity(2 * attach_m * n);
    let mut targets: Vec<usize> = (0..attach_m).collect();
    let mut chosen = vec![false; n];
    for v in attach_m..n {
        for &t in &targets {
            edges.push((t, v));
        }
        ends.extend_from_slice(&targets);
        ends.extend(std::iter::repeat_n(v, attach_m));

        for &t in &targets {
            chosen[t] = false;
        }
        targets.clear();
        while targets.len() < attach_m {
            let t = ends[rng.random_range(0..ends.len())];
            if !chosen[t] {
                chosen[t] = true;
                targets.push(t);
            }
        }
    }
    Network::from_edges(n, edges, NetworkKind::ScaleFree, seed)
}

/// Community sizes for `n` nodes split into `round(n / community_size)`
/// groups whose sizes differ by at most one.
pub(crate) fn community_sizes(n: usize, community_size: usize) -> Vec<usize> {
    let k = ((n as f64 / community_size as f64).round() as usize).max(1);
    let (base, extra) = (n / k, n % k);
    (0..k).map(|c| base + usize::from(c < extra)).collect()
}

/// Clustered network with brokers: disjoint cliques of about
/// `community_size` nodes, plus inter-community bridges. Every clique edge
/// independently spawns, with probability `bridge_p`, one bridge from one of
/// its endpoints to a uniformly chosen non-adjacent node of another
/// community. Ground-truth communities are the cliques.
pub fn gen_high_brokerage(n: usize, community_size: usize, bridge_p: f64, seed: u64) -> Result<Network> {
    let spec = NetworkSpec::HighBrokerage { nodes: n, community_size, bridge_p };
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::Precondition(v.join("; ")));
    }
    for attempt in 0..=MAX_REGENERATIONS {
        let attempt_seed = seed.wrapping_add(attempt);
        let net = build_high_brokerage(n, community_size, bridge_p, attempt_seed)?;
        if net.is_connected() {
            return Ok(net);
        }
    }
    Err(Error::Disconnected(format!(
        "high-brokerage network n={n}, community_size={community_size}, bridge_p={bridge_p} \
         still disconnected after {MAX_REGENERATIONS} regenerations from seed {seed}"
    )))
}

fn build_high_brokerage(n: usize, community_size: usize, bridge_p: f64, seed: u64) -> Result<Network> {
    let sizes = community_sizes(n, community_size);
    let mut membership = Vec::with_capacity(n);
    for (c, &s) in sizes.iter().enumerate() {
        membership.extend(std::iter::repeat_n(c, s));
    }
    let mut adj: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    let mut clique_edges = Vec::new();
    let mut start = 0;
    for &s in &sizes {
        for u in start..start + s {
            for v in (u + 1)..start + s {
                clique_edges.push((u, v));
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
        start += s;
    }

    let mut rng = seed::rng(seed);
    if sizes.len() > 1 {
        for &(u, v) in &clique_edges {
            if !rng.random_bool(bridge_p) {
                continue;
            }
            let a = if rng.random_bool(0.5) { u } else { v };
            let outside = n - sizes[membership[a]];
            // Saturated nodes (adjacent to everything outside) get no bridge.
            if adj[a].len() - (sizes[membership[a]] - 1) >= outside {
                continue;
            }
            loop {
                let w = rng.random_range(0..n);
                if membership[w] != membership[a] && !adj[a].contains(&w) {
                    adj[a].insert(w);
                    adj[w].insert(a);
                    break;
                }
            }
        }
    }

    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().filter(move |&&v| v > u).map(move |&v| (u, v)));
    Network::from_edges(n, edges, NetworkKind::HighBrokerage, seed)?.with_communities(membership)
}
