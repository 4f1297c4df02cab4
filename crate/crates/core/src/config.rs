//! Experiment configuration (TOML).
//!
//! Every field has a default, so a file containing only
//! `[network]\nkind = "random"` is a complete configuration. Relative paths
//! are resolved against the directory holding the config file. See
//! `configs/example.toml` for an annotated file listing every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{InterventionKind, InterventionSpec};
use crate::error::{Error, Result};
use crate::netgen::NetworkSpec;
use crate::par::Parallelism;
use crate::persona::{BigFiveStats, PersonaOptions, Trait};
use crate::policy::{LlmSettings, StubParams, DEFAULT_REFUTATION};
use crate::seed::{self, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Stub,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Directory with `none.txt` / `commenting.txt` / `accuracy.txt`
    /// overriding the built-in prompt templates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    pub refutation: String,
    pub max_peer_comments: usize,
    pub stub: StubParams,
    pub llm: LlmSettings,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::Stub,
            template_dir: None,
            refutation: DEFAULT_REFUTATION.to_string(),
            max_peer_comments: 3,
            stub: StubParams::default(),
            llm: LlmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewsConfig {
    /// JSONL news file. Without it a single placeholder item is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Keep only these ids (file order is preserved).
    pub ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    pub body_char_budget: usize,
}

impl Default for NewsConfig {
    fn default() -> Self {
        NewsConfig { path: None, ids: Vec::new(), limit: None, body_char_budget: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonaConfig {
    pub stats: BigFiveStats,
    pub options: PersonaOptions,
    /// Pinned scores sit this many standard deviations from the mean.
    pub pin_offset: f64,
    /// Fixed cohort TSV used instead of sampling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        PersonaConfig {
            stats: BigFiveStats::reference(),
            options: PersonaOptions::default(),
            pin_offset: 1.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub networks: Vec<NetworkSpec>,
    pub interventions: Vec<InterventionKind>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { networks: NetworkSpec::all_defaults(), interventions: InterventionKind::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Trait names or abbreviations (`extraversion`, `E`, ...).
    pub traits: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { traits: Trait::ALL.iter().map(|t| t.name().to_string()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub days: u32,
    pub master_seed: u64,
    pub replications: u32,
    /// Explicit replicate seeds; overrides `master_seed` and `replications`.
    pub seeds: Vec<u64>,
    /// Extra attempts with fresh decision seeds when the source declines.
    pub retry_budget: u32,
    pub rate_threshold: f64,
    pub include_non_effective: bool,
    pub parallelism: Parallelism,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub network: NetworkSpec,
    pub intervention: InterventionSpec,
    pub policy: PolicyConfig,
    pub news: NewsConfig,
    pub personas: PersonaConfig,
    pub compare: CompareConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            days: 7,
            master_seed: 2024,
            replications: 20,
            seeds: Vec::new(),
            retry_budget: 20,
            rate_threshold: 0.5,
            include_non_effective: false,
            parallelism: Parallelism::Parallel,
            threads: None,
            network: NetworkSpec::default_for(crate::netgen::NetworkKind::Random).expect("random default"),
            intervention: InterventionSpec::default(),
            policy: PolicyConfig::default(),
            news: NewsConfig::default(),
            personas: PersonaConfig::default(),
            compare: CompareConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Every violated constraint, in a stable order.
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.days < 1 {
            v.push("days must be at least 1".to_string());
        }
        if self.seeds.is_empty() && self.replications < 1 {
            v.push("replications must be at least 1 (or list seeds)".to_string());
        }
        if !(self.rate_threshold > 0.0 && self.rate_threshold <= 1.0) {
            v.push(format!("rate_threshold must be in (0, 1], got {}", self.rate_threshold));
        }
        if self.threads == Some(0) {
            v.push("threads must be positive".to_string());
        }
        v.extend(self.network.violations().into_iter().map(|m| format!("network: {m}")));
        v.extend(self.intervention.violations());
        if self.policy.stub.accuracy_penalty > 0.0 {
            v.push(format!(
                "policy.stub.accuracy_penalty must be <= 0, got {}",
                self.policy.stub.accuracy_penalty
            ));
        }
        let stub = &self.policy.stub;
        if [stub.intercept, stub.weight_e, stub.weight_o, stub.accuracy_penalty, stub.comment_shift]
            .iter()
            .any(|x| !x.is_finite())
        {
            v.push("policy.stub parameters must be finite".to_string());
        }
        v.extend(self.policy.llm.violations().into_iter().map(|m| format!("policy.llm: {m}")));
        if self.news.body_char_budget == 0 {
            v.push("news.body_char_budget must be positive".to_string());
        }
        if self.news.limit == Some(0) {
            v.push("news.limit must be positive".to_string());
        }
        if let Err(e) = self.personas.stats.validate() {
            v.push(format!("personas.stats: {e}"));
        }
        let opts = &self.personas.options;
        if !(0.0..=1.0).contains(&opts.female_prob) {
            v.push(format!("personas.options.female_prob must be in [0, 1], got {}", opts.female_prob));
        }
        if !(opts.score_bounds.0 < opts.score_bounds.1) {
            v.push("personas.options.score_bounds must be increasing".to_string());
        }
        if !(opts.age.mean > 0.0 && opts.age.sd > 0.0) {
            v.push("personas.options.age mean and sd must be positive".to_string());
        }
        if !(self.personas.pin_offset >= 0.0) {
            v.push(format!("personas.pin_offset must be >= 0, got {}", self.personas.pin_offset));
        }
        for (i, net) in self.compare.networks.iter().enumerate() {
            v.extend(net.violations().into_iter().map(|m| format!("compare.networks[{i}]: {m}")));
        }
        if self.compare.networks.is_empty() {
            v.push("compare.networks must not be empty".to_string());
        }
        if self.compare.interventions.is_empty() {
            v.push("compare.interventions must not be empty".to_string());
        }
        for name in &self.sweep.traits {
            if name.parse::<Trait>().is_err() {
                v.push(format!("sweep.traits: unknown trait `{name}`"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Seeds of each replicate, in order.
    pub fn replicate_seeds(&self) -> Vec<u64> {
        if !self.seeds.is_empty() {
            return self.seeds.clone();
        }
        (0..self.replications as u64).map(|r| seed::derive(self.master_seed, r, "replicate")).collect()
    }

    pub fn sweep_traits(&self) -> Result<Vec<Trait>> {
        self.sweep.traits.iter().map(|t| t.parse()).collect()
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Hash of the canonical JSON form; recorded in every output file.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_vec(self).expect("config serializes"))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.news.path);
        fix(&mut self.personas.path);
        fix(&mut self.policy.template_dir);
        fix(&mut self.policy.llm.cache_path);
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(dir) = path.parent() {
        cfg.resolve_paths(dir);
    }
    cfg.validate()?;
    Ok(cfg)
}
