use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use newsdiff_core::config::{load_config, ExperimentConfig, PolicyKind};
use newsdiff_core::experiment::{self, ExperimentPlan, PolicyHandle};
use newsdiff_core::netgen::{self, defaults, NetworkSpec};
use newsdiff_core::par::Parallelism;
use newsdiff_core::persona;
use newsdiff_core::policy::DecisionPolicy;

#[derive(Parser)]
#[command(name = "newsdiff", version, about = "Seeded multi-agent news diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network, write it as an edge list and report its statistics.
    GenNetwork(GenNetworkArgs),
    /// Sample a persona cohort to a TSV file.
    SamplePersonas(SamplePersonasArgs),
    /// Run the configured network and intervention over every replicate and news item.
    Run(ExperimentArgs),
    /// Pin each trait high and low in turn and compare forwarding curves.
    SweepPersonality(SweepArgs),
    /// Run every network × intervention cell and compare groups.
    Compare(CompareArgs),
    /// Flatten result summaries into per-figure (day, group, mean, sd) tables.
    ExportPlotData(ExportArgs),
    /// Print statistics of a network file or of a result directory.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Random,
    ScaleFree,
    HighBrokerage,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Stub,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParallelismArg {
    Sequential,
    Parallel,
}

#[derive(Args)]
struct GenNetworkArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    nodes: Option<usize>,
    /// Random: target mean degree (ignored when --edge-prob is given).
    #[arg(long)]
    mean_degree: Option<f64>,
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Scale-free: edges added per new node.
    #[arg(long)]
    attach_m: Option<usize>,
    /// High-brokerage: target community size.
    #[arg(long)]
    community_size: Option<usize>,
    /// High-brokerage: bridge probability per intra-community edge.
    #[arg(long)]
    bridge_p: Option<f64>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Edge-list output path.
    #[arg(long)]
    out: PathBuf,
    /// Statistics JSON path; defaults to `<out>.stats.json`.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct SamplePersonasArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Take persona statistics and options from this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// LLM response cache (JSONL); replays hit it before the network.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, value_enum)]
    parallelism: Option<ParallelismArg>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    replications: Option<u32>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: ExperimentArgs,
    /// Traits to sweep (repeatable); defaults to the config's list.
    #[arg(long = "trait")]
    traits: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// One or more configs; several write one subdirectory each.
    #[arg(long, num_args = 1..)]
    config: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, conflicts_with = "results", required_unless_present = "results")]
    network: Option<PathBuf>,
    #[arg(long)]
    results: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenNetwork(a) => gen_network(a),
        Command::SamplePersonas(a) => sample_personas(a),
        Command::Run(a) => {
            let cfg = experiment_config(a.config.as_deref(), &a.common)?;
            execute(&cfg, &a.out, experiment::build_run_plan)
        }
        Command::SweepPersonality(a) => {
            let mut cfg = experiment_config(a.base.config.as_deref(), &a.base.common)?;
            if !a.traits.is_empty() {
                cfg.sweep.traits = a.traits;
                cfg.validate()?;
            }
            execute(&cfg, &a.base.out, experiment::build_sweep_plan)
        }
        Command::Compare(a) => compare(a),
        Command::ExportPlotData(a) => {
            for p in experiment::export_plot_data(&a.results, &a.out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Stats(a) => stats(a),
    }
}

fn network_spec(a: &GenNetworkArgs) -> NetworkSpec {
    match a.kind {
        KindArg::Random => NetworkSpec::Random {
            nodes: a.nodes.unwrap_or_else(defaults::random_nodes),
            edge_prob: a.edge_prob,
            mean_degree: a.mean_degree.unwrap_or_else(defaults::random_mean_degree),
        },
        KindArg::ScaleFree => NetworkSpec::ScaleFree {
            nodes: a.nodes.unwrap_or_else(defaults::scale_free_nodes),
            attach_m: a.attach_m.unwrap_or_else(defaults::attach_m),
        },
        KindArg::HighBrokerage => NetworkSpec::HighBrokerage {
            nodes: a.nodes.unwrap_or_else(defaults::random_nodes),
            community_size: a.community_size.unwrap_or_else(defaults::community_size),
            bridge_p: a.bridge_p.unwrap_or_else(defaults::bridge_p),
        },
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn gen_network(a: GenNetworkArgs) -> Result<()> {
    let spec = network_spec(&a);
    let net = spec.generate(a.seed)?;
    let mut w = create(&a.out)?;
    netgen::write_edge_list(&mut w, &net)?;
    w.flush()?;
    let stats = netgen::stats(&net)?;
    let stats_path = a.stats.clone().unwrap_or_else(|| with_suffix(&a.out, ".stats.json"));
    let mut w = create(&stats_path)?;
    let report = serde_json::json!({ "spec": spec, "seed": a.seed, "stats": stats });
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    println!(
        "{} nodes, {} edges, mean degree {:.2}; wrote {} and {}",
        stats.nodes,
        stats.edges,
        stats.mean_degree,
        a.out.display(),
        stats_path.display()
    );
    Ok(())
}

fn sample_personas(a: SamplePersonasArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    let cohort = persona::sample_personas_with(a.n, &cfg.personas.stats, &cfg.personas.options, a.seed)?;
    let mut w = create(&a.out)?;
    persona::write_personas_tsv(&mut w, &cohort)?;
    w.flush()?;
    println!("wrote {} personas to {}", cohort.len(), a.out.display());
    Ok(())
}

fn experiment_config(path: Option<&Path>, common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(p) = common.policy {
        cfg.policy.kind = match p {
            PolicyArg::Stub => PolicyKind::Stub,
            PolicyArg::Llm => PolicyKind::Llm,
        };
    }
    if let Some(c) = &common.cache {
        cfg.policy.llm.cache_path = Some(c.clone());
    }
    if let Some(p) = common.parallelism {
        cfg.parallelism = match p {
            ParallelismArg::Sequential => Parallelism::Sequential,
            ParallelismArg::Parallel => Parallelism::Parallel,
        };
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    if let Some(r) = common.replications {
        cfg.replications = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

type PlanBuilder = fn(&ExperimentConfig, &dyn DecisionPolicy) -> newsdiff_core::Result<ExperimentPlan>;

fn execute(cfg: &ExperimentConfig, out: &Path, build: PlanBuilder) -> Result<()> {
    let policy: PolicyHandle = experiment::build_policy(cfg)?;
    let plan = build(cfg, policy.as_policy())?;
    log::info!("{} cells in {} group(s), policy {}", plan.cells.len(), plan.groups().len(), plan.policy);
    let report = experiment::execute_plan(&plan, &policy, out)?;
    for n in &report.summary.notices {
        log::warn!("{n}");
    }
    println!(
        "{} run record(s), {} retried, {} live LLM call(s); results in {}",
        report.records.len(),
        report.retried_runs,
        report.live_calls,
        out.display()
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    if a.config.len() <= 1 {
        let cfg = experiment_config(a.config.first().map(PathBuf::as_path), &a.common)?;
        return execute(&cfg, &a.out, experiment::build_compare_plan);
    }
    let mut names: Vec<String> = Vec::new();
    for p in &a.config {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "config".into());
        if names.contains(&stem) {
            bail!("two configs share the name `{stem}`; output subdirectories would collide");
        }
        names.push(stem);
    }
    for (p, name) in a.config.iter().zip(&names) {
        let cfg = experiment_config(Some(p), &a.common)?;
        execute(&cfg, &a.out.join(name), experiment::build_compare_plan)?;
    }
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    if let Some(path) = a.network {
        let f = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let net = netgen::read_edge_list(BufReader::new(f), &path)?;
        let stats = netgen::stats(&net)?;
        let report = serde_json::json!({ "kind": net.kind.name(), "seed": net.gen_seed, "stats": stats });
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let dir = a.results.expect("clap enforces one of --network/--results");
    let summary = experiment::read_summary(&dir.join("summary.json"))?;
    if dir.join(experiment::INCOMPLETE_MARKER).exists() {
        log::warn!("{} is marked incomplete", dir.display());
    }
    println!("# config_hash={} policy={}", summary.provenance.config_hash, summary.provenance.policy);
    println!("group\truns\texcluded\tfinal_reached\tfinal_forwarded\tdays_to_threshold\tcensored");
    for g in &summary.summary.groups {
        let m = newsdiff_core::stats::mean;
        println!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.2}\t{}",
            g.group,
            g.runs,
            g.excluded_non_effective,
            m(&g.final_reached),
            m(&g.final_forwarded),
            m(&g.rate),
            g.censored
        );
    }
    for n in &summary.summary.notices {
        println!("# {n}");
    }
    Ok(())
}
