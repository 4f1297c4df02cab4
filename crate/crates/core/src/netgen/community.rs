//! Greedy agglomerative modularity maximisation (Clauset–Newman–Moore).
//!
//! Gains are evaluated in exact integer arithmetic: merging communities `i`
//! and `j` changes modularity by `(2E·c_ij − D_i·D_j) / (2E²)`, where `c_ij`
//! counts edges between them and `D` are degree sums, so the numerator alone
//! ranks candidate merges. Ties go to the lexicographically smallest
//! `(i, j)` pair of community labels.

use std::collections::BTreeMap;

use super::Network;

/// Membership vector; communities are numbered by their smallest node.
pub fn detect_communities(net: &Network) -> Vec<usize> {
    let n = net.n();
    let two_m = 2 * net.edge_count() as i128;
    let mut label: Vec<usize> = (0..n).collect();
    if two_m == 0 {
        return label;
    }

    let mut links: Vec<BTreeMap<usize, i128>> = vec![BTreeMap::new(); n];
    for (u, v) in net.edges() {
        *links[u].entry(v).or_default() += 1;
        *links[v].entry(u).or_default() += 1;
    }
    let mut dsum: Vec<i128> = net.degrees().into_iter().map(|d| d as i128).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();

    loop {
        let mut best: Option<(i128, usize, usize)> = None;
        for (i, row) in links.iter().enumerate() {
            for (&j, &c) in row.range(i + 1..) {
                let gain = two_m * c - dsum[i] * dsum[j];
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((gain, i, j)) = best else { break };
        if gain <= 0 {
            break;
        }

        let absorbed = std::mem::take(&mut links[j]);
        for (k, c) in absorbed {
            links[k].remove(&j);
            if k == i {
                continue;
            }
            *links[i].entry(k).or_default() += c;
            *links[k].entry(i).or_default() += c;
        }
        dsum[i] += dsum[j];
        dsum[j] = 0;
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
    }

    let mut groups: Vec<Vec<usize>> = members.into_iter().filter(|m| !m.is_empty()).collect();
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    for (c, g) in groups.iter().enumerate() {
        for &v in g {
            label[v] = c;
        }
    }
    label
}
