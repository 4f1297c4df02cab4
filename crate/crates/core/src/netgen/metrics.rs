use serde::{Deserialize, Serialize};

use super::{detect_communities, Network};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionSource {
    GroundTruth,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub edges: usize,
    /// `2E / (N(N-1))`.
    pub density: f64,
    /// `4E / (N(N-1))`, i.e. the degree sum over unordered pairs. Reported
    /// alongside `density` because some published tables use this form.
    pub density_degree_sum: f64,
    pub mean_degree: f64,
    pub sd_degree: f64,
    /// `None` when the graph is disconnected.
    pub avg_path_length: Option<f64>,
    pub avg_clustering: f64,
    pub modularity: f64,
    pub modularity_partition: PartitionSource,
    pub communities: usize,
}

pub fn density(net: &Network) -> Result<f64> {
    let n = net.n();
    if n < 2 {
        return Err(Error::Precondition("density needs at least 2 nodes".into()));
    }
    Ok(2.0 * net.edge_count() as f64 / (n * (n - 1)) as f64)
}

pub fn density_degree_sum(net: &Network) -> Result<f64> {
    Ok(2.0 * density(net)?)
}

/// Mean and population standard deviation of node degrees.
pub fn degree_stats(net: &Network) -> (f64, f64) {
    let n = net.n() as f64;
    let degs = net.degrees();
    let mean = degs.iter().sum::<usize>() as f64 / n;
    let var = degs.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Nodes grouped by BFS distance from `source`; `layers[d]` holds every
/// node at distance `d`, sorted. Unreachable nodes are absent.
pub fn bfs_layers(net: &Network, source: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; net.n()];
    seen[source] = true;
    let mut layers = vec![vec![source]];
    loop {
        let mut next = Vec::new();
        for &u in layers.last().unwrap() {
            for &v in net.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        layers.push(next);
    }
    layers
}

/// Distance sum from `source` and the number of nodes it reaches.
fn bfs_distance_sum(net: &Network, source: usize, dist: &mut [u32], queue: &mut Vec<usize>) -> (u64, usize) {
    dist.fill(u32::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push(source);
    let mut head = 0;
    let mut sum = 0u64;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        let du = dist[u];
        sum += du as u64;
        for &v in net.neighbors(u) {
            if dist[v] == u32::MAX {
                dist[v] = du + 1;
                queue.push(v);
            }
        }
    }
    (sum, queue.len())
}

pub fn avg_path_length(net: &Network) -> Result<f64> {
    avg_path_length_with(net, Parallelism::Parallel)
}

/// Exact mean shortest-path length over ordered pairs, by BFS from every
/// node. Errors on disconnected graphs.
pub fn avg_path_length_with(net: &Network, mode: Parallelism) -> Result<f64> {
    let n = net.n();
    if n < 2 {
        return Err(Error::Precondition("average path length needs at least 2 nodes".into()));
    }
    let per_source = par::map_range(mode, n, |s| {
        let mut dist = vec![0u32; n];
        let mut queue = Vec::with_capacity(n);
        bfs_distance_sum(net, s, &mut dist, &mut queue)
    });
    let mut total = 0u64;
    for (s, (sum, reached)) in per_source.into_iter().enumerate() {
        if reached != n {
            return Err(Error::Disconnected(format!(
                "node {s} reaches only {reached} of {n} nodes"
            )));
        }
        total += sum;
    }
    Ok(total as f64 / (n * (n - 1)) as f64)
}

/// Mean local clustering coefficient; nodes with degree < 2 count as 0.
pub fn avg_clustering(net: &Network) -> f64 {
    let n = net.n();
    let mut total = 0.0;
    for u in 0..n {
        let nb = net.neighbors(u);
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if net.has_edge(a, b) {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// Newman modularity of a partition given as a membership vector, evaluated
/// through per-community sums: `Σ_c [L_c/E − (D_c/2E)²]`. Zero for edgeless
/// graphs.
pub fn modularity(net: &Network, membership: &[usize]) -> Result<f64> {
    if membership.len() != net.n() {
        return Err(Error::Precondition(format!(
            "partition covers {} nodes, network has {}",
            membership.len(),
            net.n()
        )));
    }
    let m = net.edge_count();
    if m == 0 {
        return Ok(0.0);
    }
    let k = membership.iter().max().map_or(0, |&c| c + 1);
    let mut internal = vec![0u64; k];
    let mut degree_sum = vec![0u64; k];
    for u in 0..net.n() {
        degree_sum[membership[u]] += net.degree(u) as u64;
    }
    for (u, v) in net.edges() {
        if membership[u] == membership[v] {
            internal[membership[u]] += 1;
        }
    }
    let m = m as f64;
    Ok(internal
        .iter()
        .zip(&degree_sum)
        .map(|(&l, &d)| l as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum())
}

pub fn stats(net: &Network) -> Result<NetworkStats> {
    stats_with(net, Parallelism::Parallel)
}

/// All structural statistics. Modularity uses the planted communities when
/// present, otherwise a greedy partition.
pub fn stats_with(net: &Network, mode: Parallelism) -> Result<NetworkStats> {
    let (mean_degree, sd_degree) = degree_stats(net);
    let avg_path_length = match avg_path_length_with(net, mode) {
        Ok(v) => Some(v),
        Err(Error::Disconnected(_)) => None,
        Err(e) => return Err(e),
    };
    let (partition, source) = match &net.communities {
        Some(c) => (c.clone(), PartitionSource::GroundTruth),
        None => (detect_communities(net), PartitionSource::Greedy),
    };
    Ok(NetworkStats {
        nodes: net.n(),
        edges: net.edge_count(),
        density: density(net)?,
        density_degree_sum: density_degree_sum(net)?,
        mean_degree,
        sd_degree,
        avg_path_length,
        avg_clustering: avg_clustering(net),
        modularity: modularity(net, &partition)?,
        modularity_partition: source,
        communities: partition.iter().max().map_or(0, |&c| c + 1),
    })
}
