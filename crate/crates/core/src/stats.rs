//! Diffusion rates, Mann–Whitney rank-sum tests and per-group aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::RunRecord;
use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;

/// Largest combined sample size for which exact p-values are enumerated.
pub const EXACT_MAX_TOTAL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRate {
    pub days_to_threshold: Option<u32>,
    pub threshold: f64,
    pub censored: bool,
}

impl DiffusionRate {
    /// Value used for ranking: censored runs count as `days + 1`.
    pub fn rank_value(&self, days: u32) -> f64 {
        self.days_to_threshold.unwrap_or(days + 1) as f64
    }
}

/// First day on which `reached_prop ≥ threshold`.
pub fn diffusion_rate(reached_prop: &[f64], threshold: f64) -> DiffusionRate {
    let day = reached_prop.iter().position(|&p| p >= threshold).map(|d| d as u32);
    DiffusionRate { days_to_threshold: day, threshold, censored: day.is_none() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `U` for sample a: pairs (x in a, y in b) with x > y, ties counting ½.
    pub u: f64,
    pub p_value: f64,
    pub significant: bool,
    pub method: PMethod,
}

/// Midranks (1-based) of `values`, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of arrangements giving each value of `U` for sizes (m, n):
/// `counts[u]` for `u = 0..=m·n`.
pub fn u_distribution(m: usize, n: usize) -> Vec<u64> {
    // f[i][j][u]: arrangements of i a's and j b's with statistic u.
    let max = m * n;
    let mut prev: Vec<Vec<u64>> = vec![vec![0; max + 1]; n + 1];
    for row in prev.iter_mut() {
        row[0] = 1;
    }
    for i in 1..=m {
        let mut cur: Vec<Vec<u64>> = vec![vec![0; max + 1]; n + 1];
        cur[0][0] = 1;
        for j in 1..=n {
            for u in 0..=i * j {
                // Largest element is an a (beats all j b's) or a b.
                let from_a = if u >= j { prev[j][u - j] } else { 0 };
                cur[j][u] = from_a + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

fn exact_p(u: f64, m: usize, n: usize) -> f64 {
    let counts = u_distribution(m, n);
    let total: u64 = counts.iter().sum();
    let u = u.round() as usize;
    let lower: u64 = counts[..=u].iter().sum();
    let upper: u64 = counts[u..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

fn normal_p(u: f64, m: usize, n: usize, ties: &[usize]) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mf * nf / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    let phi = Normal::standard();
    (2.0 * phi.sf(z)).min(1.0)
}

/// Two-sided Mann–Whitney test of `a` against `b`.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<ComparisonResult> {
    compare_labeled("a", a, "b", b)
}

pub fn compare_labeled(label_a: &str, a: &[f64], label_b: &str, b: &[f64]) -> Result<ComparisonResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition("rank-sum test needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Precondition("rank-sum test samples contain NaN".into()));
    }
    let (m, n) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r_a: f64 = ranks[..m].iter().sum();
    let u = r_a - (m * (m + 1)) as f64 / 2.0;
    let (p, method) = if m + n <= EXACT_MAX_TOTAL && ties.is_empty() {
        (exact_p(u, m, n), PMethod::Exact)
    } else {
        (normal_p(u, m, n, &ties), PMethod::Normal)
    };
    let p = p.max(f64::MIN_POSITIVE);
    Ok(ComparisonResult {
        group_a: label_a.to_string(),
        group_b: label_b.to_string(),
        n_a: m,
        n_b: n,
        mean_a: mean(a),
        mean_b: mean(b),
        u,
        p_value: p,
        significant: p < ALPHA,
        method,
    })
}

/// Normal-approximation p-value regardless of sample size; for comparing
/// against the exact path.
pub fn rank_sum_normal_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let u = ranks[..a.len()].iter().sum::<f64>() - (a.len() * (a.len() + 1)) as f64 / 2.0;
    normal_p(u, a.len(), b.len(), &ties)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub runs: usize,
    pub excluded_non_effective: usize,
    pub tainted: usize,
    pub censored: usize,
    pub days: u32,
    pub reached_mean: Vec<f64>,
    pub reached_sd: Vec<f64>,
    pub forwarded_mean: Vec<f64>,
    pub forwarded_sd: Vec<f64>,
    pub final_reached: Vec<f64>,
    pub final_forwarded: Vec<f64>,
    /// Days to the rate threshold, censored runs as `days + 1`.
    pub rate: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ForwardedFinal,
    ReachedFinal,
    Rate,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::ForwardedFinal, Metric::ReachedFinal, Metric::Rate];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ForwardedFinal => "forwarded_final",
            Metric::ReachedFinal => "reached_final",
            Metric::Rate => "rate",
        }
    }

    fn values(self, g: &GroupSummary) -> &[f64] {
        match self {
            Metric::ForwardedFinal => &g.final_forwarded,
            Metric::ReachedFinal => &g.final_reached,
            Metric::Rate => &g.rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rate_threshold: f64,
    pub include_non_effective: bool,
    pub groups: Vec<GroupSummary>,
    pub comparisons: BTreeMap<Metric, Vec<ComparisonResult>>,
    pub notices: Vec<String>,
}

impl ExperimentSummary {
    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn comparison(&self, metric: Metric, a: &str, b: &str) -> Option<&ComparisonResult> {
        self.comparisons.get(&metric)?.iter().find(|c| c.group_a == a && c.group_b == b)
    }
}

/// Groups records by `group_of`, in order of first appearance.
pub fn aggregate_experiment<F>(
    records: &[RunRecord],
    group_of: F,
    rate_threshold: f64,
    include_non_effective: bool,
) -> Result<ExperimentSummary>
where
    F: Fn(&RunRecord) -> String,
{
    let mut order: Vec<String> = Vec::new();
    let mut buckets: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let g = group_of(r);
        if !buckets.contains_key(&g) {
            order.push(g.clone());
        }
        buckets.entry(g).or_default().push(r);
    }

    let mut notices = Vec::new();
    let mut groups = Vec::new();
    for name in order {
        let all = &buckets[&name];
        let days = all[0].days;
        if all.iter().any(|r| r.days != days) {
            return Err(Error::Precondition(format!("group `{name}` mixes runs of different lengths")));
        }
        let kept: Vec<&RunRecord> = all.iter().copied().filter(|r| include_non_effective || r.effective).collect();
        let excluded = all.len() - kept.len();
        if excluded > 0 {
            notices.push(format!("group `{name}`: excluded {excluded} non-effective run(s)"));
        }
        let len = days as usize + 1;
        let column = |day: usize, f: fn(&RunRecord) -> &Vec<f64>| -> Vec<f64> { kept.iter().map(|r| f(r)[day]).collect() };
        let mut g = GroupSummary {
            group: name.clone(),
            runs: kept.len(),
            excluded_non_effective: excluded,
            tainted: kept.iter().filter(|r| r.tainted).count(),
            censored: 0,
            days,
            reached_mean: Vec::with_capacity(len),
            reached_sd: Vec::with_capacity(len),
            forwarded_mean: Vec::with_capacity(len),
            forwarded_sd: Vec::with_capacity(len),
            final_reached: kept.iter().map(|r| r.final_reached()).collect(),
            final_forwarded: kept.iter().map(|r| r.final_forwarded()).collect(),
            rate: Vec::new(),
        };
        if !kept.is_empty() {
            for day in 0..len {
                let reached = column(day, |r| &r.reached_prop);
                let forwarded = column(day, |r| &r.forwarded_prop);
                g.reached_mean.push(mean(&reached));
                g.reached_sd.push(sd(&reached));
                g.forwarded_mean.push(mean(&forwarded));
                g.forwarded_sd.push(sd(&forwarded));
            }
        }
        for r in &kept {
            let rate = diffusion_rate(&r.reached_prop, rate_threshold);
            g.censored += rate.censored as usize;
            g.rate.push(rate.rank_value(days));
        }
        if g.tainted > 0 {
            notices.push(format!("group `{name}`: {} run(s) tainted by parse failures", g.tainted));
        }
        groups.push(g);
    }

    let mut comparisons: BTreeMap<Metric, Vec<ComparisonResult>> = Metric::ALL.iter().map(|&m| (m, Vec::new())).collect();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            if a.runs < 2 || b.runs < 2 {
                notices.push(format!(
                    "comparison `{}` vs `{}` skipped: fewer than 2 runs in a group",
                    a.group, b.group
                ));
                continue;
            }
            for m in Metric::ALL {
                let c = compare_labeled(&a.group, m.values(a), &b.group, m.values(b))?;
                comparisons.get_mut(&m).expect("metric present").push(c);
            }
        }
    }

    Ok(ExperimentSummary { rate_threshold, include_non_effective, groups, comparisons, notices })
}

/// `day  group  metric  mean  sd` rows for every group and day.
pub fn series_table(summary: &ExperimentSummary) -> String {
    let mut out = String::from("day\tgroup\treached_mean\treached_sd\tforwarded_mean\tforwarded_sd\n");
    for g in &summary.groups {
        for day in 0..g.reached_mean.len() {
            out.push_str(&format!(
                "{day}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                g.group, g.reached_mean[day], g.reached_sd[day], g.forwarded_mean[day], g.forwarded_sd[day]
            ));
        }
    }
    out
}

pub fn comparison_table(results: &[ComparisonResult]) -> String {
    let mut out = String::from("group_a\tgroup_b\tn_a\tn_b\tmean_a\tmean_b\tu\tp_value\tsignificant\tmethod\n");
    for c in results {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{:.6e}\t{}\t{}\n",
            c.group_a,
            c.group_b,
            c.n_a,
            c.n_b,
            c.mean_a,
            c.mean_b,
            c.u,
            c.p_value,
            c.significant,
            match c.method {
                PMethod::Exact => "exact",
                PMethod::Normal => "normal",
            }
        ));
    }
    out
}
