//! Seeded experiment plans and their result trees.
//!
//! A plan is the cross product of networks, interventions (or pinned
//! traits), replicates and news items. Each cell's randomness is derived
//! from its replicate seed alone:
//!
//! * network: `derive(replicate_seed, 0, "network")`, shared by every kind
//! * cohort: `derive(replicate_seed, 0, "persona")`
//! * decisions: `derive(replicate_seed, attempt, "decision/<news_id>")`
//!
//! so cells that differ only in intervention see the same graph, cohort and
//! decision draws, and adding cells never changes existing ones.
//!
//! Output layout:
//!
//! ```text
//! out/
//!   plan.json                     written before any cell runs
//!   INCOMPLETE                    removed once everything is written
//!   networks/<label>__r<rep>.edges
//!   cohorts/n<nodes>__r<rep>.tsv
//!   runs/<group>/<news_id>__r<rep>.json
//!   summary.json  series.tsv
//!   compare_forwarded_final.tsv  compare_reached_final.tsv  compare_rate.tsv
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, PolicyKind};
use crate::engine::{self, InterventionKind, InterventionSpec, Provenance, RunOptions, RunRecord};
use crate::error::{Error, Result};
use crate::netgen::{self, Network, NetworkSpec};
use crate::news::{self, NewsItem};
use crate::par;
use crate::persona::{self, AgentPersona, Level, Trait};
use crate::policy::{ChatTransport, DecisionPolicy, LlmPolicy, PromptTemplates, StubPolicy};
use crate::seed;
use crate::stats::{self, ExperimentSummary, Metric};

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Run,
    Compare,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub index: usize,
    pub group: String,
    pub network_label: String,
    pub network: NetworkSpec,
    pub intervention: InterventionSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pin: Option<Pin>,
    pub replicate: u32,
    pub replicate_seed: u64,
    pub network_seed: u64,
    pub persona_seed: u64,
    pub news_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub config_hash: String,
    pub policy: String,
    pub templates: String,
    pub config: ExperimentConfig,
    pub news: Vec<NewsItem>,
    pub cells: Vec<CellSpec>,
}

/// The news items a config selects, bodies truncated to budget.
pub fn select_news(cfg: &ExperimentConfig) -> Result<Vec<NewsItem>> {
    let mut items = match &cfg.news.path {
        Some(p) => news::load_news(p)?,
        None => vec![NewsItem::placeholder()],
    };
    if !cfg.news.ids.is_empty() {
        let missing: Vec<String> = cfg
            .news
            .ids
            .iter()
            .filter(|id| !items.iter().any(|n| &n.news_id == *id))
            .map(|id| format!("news id `{id}` not found"))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Validation(missing));
        }
        items.retain(|n| cfg.news.ids.contains(&n.news_id));
    }
    if let Some(limit) = cfg.news.limit {
        items.truncate(limit);
    }
    for n in &mut items {
        n.body = news::truncate_body(&n.body, cfg.news.body_char_budget);
    }
    Ok(items)
}

pub fn load_templates(cfg: &ExperimentConfig) -> Result<PromptTemplates> {
    PromptTemplates::load(cfg.policy.template_dir.as_deref(), &cfg.policy.refutation, cfg.policy.max_peer_comments)
}

/// A ready policy plus access to LLM bookkeeping when there is one.
pub enum PolicyHandle {
    Stub(StubPolicy),
    Llm(LlmPolicy),
    Custom(Box<dyn DecisionPolicy>),
}

impl PolicyHandle {
    pub fn as_policy(&self) -> &dyn DecisionPolicy {
        match self {
            PolicyHandle::Stub(p) => p,
            PolicyHandle::Llm(p) => p,
            PolicyHandle::Custom(p) => p.as_ref(),
        }
    }

    pub fn live_calls(&self) -> usize {
        match self {
            PolicyHandle::Llm(p) => p.live_calls(),
            _ => 0,
        }
    }

    pub fn cache_digest(&self) -> Option<String> {
        match self {
            PolicyHandle::Llm(p) => Some(p.cache().digest()),
            _ => None,
        }
    }
}

/// Builds the configured policy; the LLM variant talks HTTP.
pub fn build_policy(cfg: &ExperimentConfig) -> Result<PolicyHandle> {
    match cfg.policy.kind {
        PolicyKind::Stub => Ok(PolicyHandle::Stub(StubPolicy::new(cfg.policy.stub.clone(), cfg.personas.stats.clone()))),
        PolicyKind::Llm => {
            let p = LlmPolicy::http(cfg.policy.llm.clone(), load_templates(cfg)?).map_err(|e| Error::Config(e.to_string()))?;
            Ok(PolicyHandle::Llm(p))
        }
    }
}

/// LLM policy over a caller-supplied transport.
pub fn build_llm_policy(cfg: &ExperimentConfig, transport: Box<dyn ChatTransport>) -> Result<PolicyHandle> {
    let p = LlmPolicy::new(cfg.policy.llm.clone(), load_templates(cfg)?, transport).map_err(|e| Error::Config(e.to_string()))?;
    Ok(PolicyHandle::Llm(p))
}

fn network_labels(specs: &[NetworkSpec]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    specs
        .iter()
        .map(|s| {
            let name = s.kind().name();
            let k = seen.entry(name).or_insert(0);
            *k += 1;
            if *k == 1 {
                name.to_string()
            } else {
                format!("{name}#{k}")
            }
        })
        .collect()
}

struct Axis {
    group: String,
    network_label: String,
    network: NetworkSpec,
    intervention: InterventionSpec,
    pin: Option<Pin>,
}

fn expand(kind: PlanKind, cfg: &ExperimentConfig, policy: &dyn DecisionPolicy, axes: Vec<Axis>) -> Result<ExperimentPlan> {
    cfg.validate()?;
    let news = select_news(cfg)?;
    let templates = load_templates(cfg)?;
    let mut cells = Vec::new();
    for axis in &axes {
        for (r, &rep_seed) in cfg.replicate_seeds().iter().enumerate() {
            for item in &news {
                cells.push(CellSpec {
                    index: cells.len(),
                    group: axis.group.clone(),
                    network_label: axis.network_label.clone(),
                    network: axis.network.clone(),
                    intervention: axis.intervention.clone(),
                    pin: axis.pin,
                    replicate: r as u32,
                    replicate_seed: rep_seed,
                    network_seed: seed::derive(rep_seed, 0, "network"),
                    persona_seed: seed::derive(rep_seed, 0, "persona"),
                    news_id: item.news_id.clone(),
                });
            }
        }
    }
    Ok(ExperimentPlan {
        kind,
        config_hash: cfg.hash(),
        policy: policy.identity(),
        templates: templates.digest(),
        config: cfg.clone(),
        news,
        cells,
    })
}

/// The configured network and intervention, every replicate and news item.
pub fn build_run_plan(cfg: &ExperimentConfig, policy: &dyn DecisionPolicy) -> Result<ExperimentPlan> {
    let label = network_labels(std::slice::from_ref(&cfg.network)).remove(0);
    let axis = Axis {
        group: format!("{label}/{}", cfg.intervention.kind.name()),
        network_label: label,
        network: cfg.network.clone(),
        intervention: cfg.intervention.clone(),
        pin: None,
    };
    expand(PlanKind::Run, cfg, policy, vec![axis])
}

/// Every network × intervention pair from `[compare]`.
pub fn build_compare_plan(cfg: &ExperimentConfig, policy: &dyn DecisionPolicy) -> Result<ExperimentPlan> {
    let labels = network_labels(&cfg.compare.networks);
    let mut axes = Vec::new();
    for (net, label) in cfg.compare.networks.iter().zip(&labels) {
        for &kind in &cfg.compare.interventions {
            axes.push(Axis {
                group: format!("{label}/{}", kind.name()),
                network_label: label.clone(),
                network: net.clone(),
                intervention: InterventionSpec { kind, ..cfg.intervention.clone() },
                pin: None,
            });
        }
    }
    expand(PlanKind::Compare, cfg, policy, axes)
}

/// Each swept trait pinned high and low on the configured network.
pub fn build_sweep_plan(cfg: &ExperimentConfig, policy: &dyn DecisionPolicy) -> Result<ExperimentPlan> {
    let label = network_labels(std::slice::from_ref(&cfg.network)).remove(0);
    let mut axes = Vec::new();
    for t in cfg.sweep_traits()? {
        for level in [Level::High, Level::Low] {
            axes.push(Axis {
                group: format!("{}={}", t.name(), level.name()),
                network_label: label.clone(),
                network: cfg.network.clone(),
                intervention: cfg.intervention.clone(),
                pin: Some(Pin { trait_: t, level }),
            });
        }
    }
    expand(PlanKind::Sweep, cfg, policy, axes)
}

/// Provenance block written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputProvenance {
    pub plan: PlanKind,
    pub config_hash: String,
    pub policy: String,
    pub templates: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<String>,
    pub master_seed: u64,
    pub replicate_seeds: Vec<u64>,
}

impl OutputProvenance {
    fn header(&self) -> String {
        let mut s = format!(
            "# plan={:?} config_hash={} master_seed={}\n# policy={}\n# templates={}\n",
            self.plan, self.config_hash, self.master_seed, self.policy, self.templates
        )
        .to_lowercase();
        if let Some(c) = &self.cache {
            s.push_str(&format!("# cache={c}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub provenance: OutputProvenance,
    pub summary: ExperimentSummary,
}

pub struct ExecutionReport {
    pub records: Vec<RunRecord>,
    pub summary: ExperimentSummary,
    /// Runs that needed at least one extra attempt to become effective.
    pub retried_runs: usize,
    pub live_calls: usize,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn path_segment(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_=.#".contains(c) { c } else { '_' })
        .collect()
}

fn group_dir(group: &str) -> PathBuf {
    group.split('/').map(path_segment).collect()
}

pub fn run_file(out: &Path, cell: &CellSpec) -> PathBuf {
    out.join("runs")
        .join(group_dir(&cell.group))
        .join(format!("{}__r{:03}.json", path_segment(&cell.news_id), cell.replicate))
}

/// Runs every cell, writing per-cell records and the aggregate tables.
pub fn execute_plan(plan: &ExperimentPlan, policy: &PolicyHandle, out: &Path) -> Result<ExecutionReport> {
    let cfg = &plan.config;
    fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let marker = out.join(INCOMPLETE_MARKER);
    write_file(&marker, "execution started; outputs in this directory are partial until this file is removed\n")?;
    write_file(&out.join("plan.json"), json_pretty(plan)?)?;

    let threads = cfg.threads.unwrap_or(0);
    let mode = cfg.parallelism;
    let (records, retried) = par::with_threads(mode, threads, || -> Result<(Vec<RunRecord>, usize)> {
        let networks = materialize_networks(plan, out)?;
        let cohorts = materialize_cohorts(plan, &networks, out)?;
        let results = par::try_map(mode, &plan.cells, |cell| {
            let net = &networks[&(cell.network_label.clone(), cell.replicate)];
            let base = &cohorts[&(net.n(), cell.replicate)];
            let rec = run_cell(plan, cell, net, base, policy.as_policy())?;
            write_file(&run_file(out, cell), json_pretty(&rec)?)?;
            Ok::<_, Error>(rec)
        })?;
        let retried = results.iter().filter(|r| r.provenance.attempt > 0).count();
        Ok((results, retried))
    })?;

    let mut summary = stats::aggregate_experiment(
        &records,
        |r| r.provenance.group.clone(),
        cfg.rate_threshold,
        cfg.include_non_effective,
    )?;
    if retried > 0 {
        summary.notices.push(format!("{retried} run(s) re-drawn with fresh decision seeds until the source shared"));
    }
    let provenance = OutputProvenance {
        plan: plan.kind,
        config_hash: plan.config_hash.clone(),
        policy: plan.policy.clone(),
        templates: plan.templates.clone(),
        cache: policy.cache_digest(),
        master_seed: cfg.master_seed,
        replicate_seeds: cfg.replicate_seeds(),
    };
    let header = provenance.header();
    write_file(&out.join("series.tsv"), format!("{header}{}", stats::series_table(&summary)))?;
    for m in Metric::ALL {
        let table = stats::comparison_table(&summary.comparisons[&m]);
        write_file(&out.join(format!("compare_{}.tsv", m.name())), format!("{header}{table}"))?;
    }
    let file = SummaryFile { provenance, summary };
    write_file(&out.join("summary.json"), json_pretty(&file)?)?;
    fs::remove_file(&marker).map_err(|e| Error::io(marker.display().to_string(), e))?;

    Ok(ExecutionReport { records, summary: file.summary, retried_runs: retried, live_calls: policy.live_calls() })
}

type NetworkKey = (String, u32);

fn materialize_networks(plan: &ExperimentPlan, out: &Path) -> Result<BTreeMap<NetworkKey, Network>> {
    let mut wanted: BTreeMap<NetworkKey, (&NetworkSpec, u64)> = BTreeMap::new();
    for c in &plan.cells {
        wanted.entry((c.network_label.clone(), c.replicate)).or_insert((&c.network, c.network_seed));
    }
    let keys: Vec<(&NetworkKey, &(&NetworkSpec, u64))> = wanted.iter().collect();
    let nets = par::try_map(plan.config.parallelism, &keys, |(key, (spec, seed))| {
        let net = spec.generate(*seed)?;
        let path = out.join("networks").join(format!("{}__r{:03}.edges", path_segment(&key.0), key.1));
        let mut buf = Vec::new();
        netgen::write_edge_list(&mut buf, &net).map_err(|e| Error::io(path.display().to_string(), e))?;
        write_file(&path, buf)?;
        Ok::<_, Error>(net)
    })?;
    Ok(keys.into_iter().map(|(k, _)| k.clone()).zip(nets).collect())
}

fn materialize_cohorts(
    plan: &ExperimentPlan,
    networks: &BTreeMap<NetworkKey, Network>,
    out: &Path,
) -> Result<BTreeMap<(usize, u32), Vec<AgentPersona>>> {
    let cfg = &plan.config;
    let fixed = match &cfg.personas.path {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            Some(persona::read_personas_tsv(std::io::BufReader::new(f), p)?)
        }
        None => None,
    };
    let mut wanted: BTreeMap<(usize, u32), u64> = BTreeMap::new();
    for c in &plan.cells {
        let n = networks[&(c.network_label.clone(), c.replicate)].n();
        wanted.entry((n, c.replicate)).or_insert(c.persona_seed);
    }
    let keys: Vec<((usize, u32), u64)> = wanted.into_iter().collect();
    let cohorts = par::try_map(cfg.parallelism, &keys, |&((n, rep), seed)| {
        let cohort = match &fixed {
            Some(all) if all.len() == n => all.clone(),
            Some(all) => {
                return Err(Error::Precondition(format!(
                    "cohort file has {} personas but a network has {n} nodes",
                    all.len()
                )))
            }
            None => persona::sample_personas_with(n, &cfg.personas.stats, &cfg.personas.options, seed)?,
        };
        let path = out.join("cohorts").join(format!("n{n}__r{rep:03}.tsv"));
        let mut buf = Vec::new();
        persona::write_personas_tsv(BufWriter::new(&mut buf), &cohort).map_err(|e| Error::io(path.display().to_string(), e))?;
        write_file(&path, buf)?;
        Ok(cohort)
    })?;
    Ok(keys.into_iter().map(|(k, _)| k).zip(cohorts).collect())
}

/// Seed of the decision stream for one attempt at a cell.
pub fn decision_seed(replicate_seed: u64, news_id: &str, attempt: u32) -> u64 {
    seed::derive(replicate_seed, attempt as u64, &format!("decision/{news_id}"))
}

fn run_cell(
    plan: &ExperimentPlan,
    cell: &CellSpec,
    net: &Network,
    base: &[AgentPersona],
    policy: &dyn DecisionPolicy,
) -> Result<RunRecord> {
    let cfg = &plan.config;
    let news = plan
        .news
        .iter()
        .find(|n| n.news_id == cell.news_id)
        .ok_or_else(|| Error::Precondition(format!("plan has no news item `{}`", cell.news_id)))?;
    let pinned;
    let personas = match cell.pin {
        Some(pin) => {
            pinned = persona::pin_trait(base, &cfg.personas.stats, pin.trait_, pin.level, cfg.personas.pin_offset);
            &pinned[..]
        }
        None => base,
    };
    let attempts = if policy.is_stochastic() { cfg.retry_budget + 1 } else { 1 };
    let mut last = None;
    for attempt in 0..attempts {
        let opts = RunOptions {
            days: cfg.days,
            intervention: cell.intervention.clone(),
            decision_seed: decision_seed(cell.replicate_seed, &cell.news_id, attempt),
            parallelism: cfg.parallelism,
            provenance: Provenance {
                group: cell.group.clone(),
                config_hash: plan.config_hash.clone(),
                network: cell.network_label.clone(),
                network_seed: cell.network_seed,
                persona_seed: cell.persona_seed,
                replicate: cell.replicate,
                attempt,
                policy: plan.policy.clone(),
                templates: plan.templates.clone(),
                pinned: cell.pin.map(|p| format!("{}={}", p.trait_.name(), p.level.name())),
            },
        };
        let rec = engine::run(&opts, net, personas, news, policy)?;
        if rec.effective {
            if attempt > 0 {
                log::info!("cell {} ({}) became effective on attempt {attempt}", cell.index, cell.group);
            }
            return Ok(rec);
        }
        last = Some(rec);
    }
    if policy.is_stochastic() {
        log::warn!("cell {} ({}) never effective after {attempts} attempts", cell.index, cell.group);
    }
    Ok(last.expect("at least one attempt"))
}

/// Plot tables from one result directory, or from each immediate
/// subdirectory holding a `summary.json`. Returns the files written.
pub fn export_plot_data(results: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut sources: Vec<(Option<String>, SummaryFile)> = Vec::new();
    let top = results.join("summary.json");
    if top.is_file() {
        sources.push((None, read_summary(&top)?));
    } else if results.is_dir() {
        let mut dirs: Vec<PathBuf> = fs::read_dir(results)
            .map_err(|e| Error::io(results.display().to_string(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("summary.json").is_file())
            .collect();
        dirs.sort();
        for d in dirs {
            let name = d.file_name().map(|n| n.to_string_lossy().into_owned());
            sources.push((name, read_summary(&d.join("summary.json"))?));
        }
    }
    if sources.is_empty() {
        return Err(Error::Precondition(format!("no summary.json found in {}", results.display())));
    }

    let mut header = String::new();
    for (_, s) in &sources {
        header.push_str(&format!("# source config_hash={} policy={}\n", s.provenance.config_hash, s.provenance.policy));
    }
    let mut written = Vec::new();
    for (name, pick) in [
        ("fig_reached.tsv", (|g: &stats::GroupSummary| (&g.reached_mean, &g.reached_sd)) as fn(&stats::GroupSummary) -> (&Vec<f64>, &Vec<f64>)),
        ("fig_forwarded.tsv", |g| (&g.forwarded_mean, &g.forwarded_sd)),
    ] {
        let mut table = format!("{header}day\tgroup\tmean\tsd\n");
        for (prefix, s) in &sources {
            for g in &s.summary.groups {
                let label = match prefix {
                    Some(p) => format!("{p}:{}", g.group),
                    None => g.group.clone(),
                };
                let (means, sds) = pick(g);
                for (day, (m, sd)) in means.iter().zip(sds).enumerate() {
                    table.push_str(&format!("{day}\t{label}\t{m:.6}\t{sd:.6}\n"));
                }
            }
        }
        let path = out.join(name);
        write_file(&path, table)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_summary(path: &Path) -> Result<SummaryFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_run(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

impl ExperimentPlan {
    pub fn groups(&self) -> Vec<&str> {
        let mut g: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !g.contains(&c.group.as_str()) {
                g.push(&c.group);
            }
        }
        g
    }

    pub fn interventions(&self) -> Vec<InterventionKind> {
        let mut v = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.intervention.kind) {
                v.push(c.intervention.kind);
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::NetworkKind;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            network: NetworkSpec::Random { nodes: 60, edge_prob: None, mean_degree: 8.0 },
            replications: 3,
            ..ExperimentConfig::default()
        };
        cfg.compare.networks = vec![
            NetworkSpec::Random { nodes: 60, edge_prob: None, mean_degree: 8.0 },
            NetworkSpec::ScaleFree { nodes: 58, attach_m: 4 },
        ];
        cfg
    }

    fn two_news(dir: &Path) -> PathBuf {
        let p = dir.join("news.jsonl");
        fs::write(
            &p,
            "{\"id\":\"a\",\"title\":\"A\",\"body\":\"x\",\"veracity\":\"fake\",\"topic\":\"political\"}\n\
             {\"id\":\"b\",\"title\":\"B\",\"body\":\"y\",\"veracity\":\"fake\",\"topic\":\"political\"}\n",
        )
        .unwrap();
        p
    }

    #[test]
    fn plan_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg();
        cfg.news.path = Some(two_news(dir.path()));
        let policy = build_policy(&cfg).unwrap();
        let run = build_run_plan(&cfg, policy.as_policy()).unwrap();
        assert_eq!(run.cells.len(), 6);
        let cmp = build_compare_plan(&cfg, policy.as_policy()).unwrap();
        assert_eq!(cmp.groups().len(), 8);
        let sweep = build_sweep_plan(&cfg, policy.as_policy()).unwrap();
        assert_eq!(sweep.groups().len(), 10);
        assert_eq!(sweep.groups()[0], "extraversion=high");
        assert_eq!(cmp.interventions(), InterventionKind::ALL.to_vec());
    }

    #[test]
    fn adding_replicates_keeps_existing_cells() {
        let cfg = small_cfg();
        let policy = build_policy(&cfg).unwrap();
        let a = build_run_plan(&cfg, policy.as_policy()).unwrap();
        let more = ExperimentConfig { replications: 5, ..cfg };
        let b = build_run_plan(&more, policy.as_policy()).unwrap();
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert_eq!((x.replicate_seed, x.network_seed, x.persona_seed), (y.replicate_seed, y.network_seed, y.persona_seed));
        }
    }

    #[test]
    fn execution_writes_tree_and_removes_marker() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg();
        let policy = build_policy(&cfg).unwrap();
        let plan = build_run_plan(&cfg, policy.as_policy()).unwrap();
        let out = dir.path().join("out");
        let report = execute_plan(&plan, &policy, &out).unwrap();
        assert_eq!(report.records.len(), 3);
        assert!(!out.join(INCOMPLETE_MARKER).exists());
        for f in ["plan.json", "summary.json", "series.tsv", "compare_rate.tsv"] {
            assert!(out.join(f).is_file(), "{f}");
        }
        for c in &plan.cells {
            assert_eq!(read_run(&run_file(&out, c)).unwrap(), report.records[c.index]);
        }
        let net = netgen::read_edge_list(
            std::io::BufReader::new(fs::File::open(out.join("networks/random__r000.edges")).unwrap()),
            Path::new("x"),
        )
        .unwrap();
        assert_eq!(net.kind, NetworkKind::Random);
        let series = fs::read_to_string(out.join("series.tsv")).unwrap();
        assert!(series.starts_with("# plan=run config_hash="));

        let plots = export_plot_data(&out, &dir.path().join("plots")).unwrap();
        let text = fs::read_to_string(&plots[0]).unwrap();
        let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(rows, 8);
    }

    #[test]
    fn empty_results_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_plot_data(dir.path(), &dir.path().join("p")).is_err());
    }

    #[test]
    fn failing_cell_leaves_marker() {
        struct Broken;
        impl DecisionPolicy for Broken {
            fn identity(&self) -> String {
                "broken".into()
            }
            fn is_stochastic(&self) -> bool {
                false
            }
            fn decide(&self, _: &crate::policy::DecisionRequest<'_>) -> Result<crate::policy::DecisionOutcome, crate::policy::PolicyError> {
                Err(crate::policy::PolicyError::Network { attempts: 1, message: "down".into() })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg();
        let policy = PolicyHandle::Custom(Box::new(Broken));
        let plan = build_run_plan(&cfg, policy.as_policy()).unwrap();
        let Err(err) = execute_plan(&plan, &policy, dir.path()) else { panic!("expected failure") };
        assert!(err.to_string().contains("agent"), "{err}");
        assert!(dir.path().join(INCOMPLETE_MARKER).exists());
        assert!(dir.path().join("plan.json").exists());
    }
}
