//! Agent personas: gender, age and Big Five trait scores.
//!
//! Scores are drawn jointly from a multivariate normal with the population
//! means, standard deviations and correlations in [`BigFiveStats`], clamped
//! to the instrument range, and labelled high/low against a per-trait
//! threshold (the distribution median, which equals the mean).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const TRAIT_COUNT: usize = 5;

/// Big Five dimensions, in the column order used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    Extraversion,
    Agreeableness,
    Conscientiousness,
    Neuroticism,
    Openness,
}

impl Trait {
    pub const ALL: [Trait; TRAIT_COUNT] = [
        Trait::Extraversion,
        Trait::Agreeableness,
        Trait::Conscientiousness,
        Trait::Neuroticism,
        Trait::Openness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Trait::Extraversion => "extraversion",
            Trait::Agreeableness => "agreeableness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Neuroticism => "neuroticism",
            Trait::Openness => "openness",
        }
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            Trait::Extraversion => "E",
            Trait::Agreeableness => "A",
            Trait::Conscientiousness => "C",
            Trait::Neuroticism => "N",
            Trait::Openness => "O",
        }
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Trait {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Trait::ALL
            .into_iter()
            .find(|t| t.name() == s || t.abbrev().eq_ignore_ascii_case(&s))
            .ok_or_else(|| Error::Config(format!("unknown Big Five trait `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    High,
    Low,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::High => "high",
            Level::Low => "low",
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(Level::High),
            "low" => Ok(Level::Low),
            other => Err(Error::Config(format!("unknown trait level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn name(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

/// Population statistics of the five trait scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BigFiveStats {
    pub means: [f64; TRAIT_COUNT],
    pub sds: [f64; TRAIT_COUNT],
    pub correlations: [[f64; TRAIT_COUNT]; TRAIT_COUNT],
}

impl Default for BigFiveStats {
    fn default() -> Self {
        Self::reference()
    }
}

impl BigFiveStats {
    /// Reference cohort statistics. Only the extraversion-agreeableness and
    /// extraversion-neuroticism correlations are non-zero.
    pub fn reference() -> Self {
        let mut correlations = [[0.0; TRAIT_COUNT]; TRAIT_COUNT];
        for (i, row) in correlations.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let e = Trait::Extraversion.index();
        let a = Trait::Agreeableness.index();
        let n = Trait::Neuroticism.index();
        correlations[e][a] = 0.184;
        correlations[a][e] = 0.184;
        correlations[e][n] = -0.236;
        correlations[n][e] = -0.236;
        BigFiveStats {
            means: [4.02, 3.81, 4.14, 3.43, 4.52],
            sds: [1.18, 0.89, 0.99, 1.12, 1.07],
            correlations,
        }
    }

    pub fn mean(&self, t: Trait) -> f64 {
        self.means[t.index()]
    }

    pub fn sd(&self, t: Trait) -> f64 {
        self.sds[t.index()]
    }

    /// Categorisation thresholds: the per-trait median of the normal model.
    pub fn thresholds(&self) -> [f64; TRAIT_COUNT] {
        self.means
    }

    pub fn z_score(&self, t: Trait, score: f64) -> f64 {
        (score - self.mean(t)) / self.sd(t)
    }

    #[allow(clippy::needless_range_loop)]
    pub fn validate(&self) -> Result<()> {
        for (i, (&m, &s)) in self.means.iter().zip(&self.sds).enumerate() {
            if !m.is_finite() {
                return Err(Error::Config(format!("trait {i}: mean must be finite")));
            }
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Config(format!(
                    "trait {i}: standard deviation must be strictly positive, got {s}"
                )));
            }
        }
        let c = &self.correlations;
        for i in 0..TRAIT_COUNT {
            if (c[i][i] - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("correlation diagonal [{i}][{i}] must be 1")));
            }
            for j in 0..TRAIT_COUNT {
                if !c[i][j].is_finite() || c[i][j].abs() > 1.0 {
                    return Err(Error::Config(format!("correlation [{i}][{j}] outside [-1, 1]")));
                }
                if (c[i][j] - c[j][i]).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "correlation matrix is not symmetric at [{i}][{j}]"
                    )));
                }
            }
        }
        cholesky(&self.covariance()).map(|_| ())
    }

    pub fn covariance(&self) -> [[f64; TRAIT_COUNT]; TRAIT_COUNT] {
        let mut cov = [[0.0; TRAIT_COUNT]; TRAIT_COUNT];
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.correlations[i][j] * self.sds[i] * self.sds[j];
            }
        }
        cov
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = m`. Semi-definite input is
/// accepted (zero pivots give zero columns); anything with a clearly
/// negative pivot is rejected.
#[allow(clippy::needless_range_loop)]
pub fn cholesky(m: &[[f64; TRAIT_COUNT]; TRAIT_COUNT]) -> Result<[[f64; TRAIT_COUNT]; TRAIT_COUNT]> {
    const TOL: f64 = 1e-10;
    let mut l = [[0.0; TRAIT_COUNT]; TRAIT_COUNT];
    for j in 0..TRAIT_COUNT {
        let mut d = m[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d < -TOL {
            return Err(Error::Config(
                "correlation matrix is not positive semi-definite".into(),
            ));
        }
        let pivot = d.max(0.0).sqrt();
        l[j][j] = pivot;
        for i in (j + 1)..TRAIT_COUNT {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if pivot > TOL {
                s / pivot
            } else if s.abs() > TOL {
                return Err(Error::Config(
                    "correlation matrix is not positive semi-definite".into(),
                ));
            } else {
                0.0
            };
        }
    }
    Ok(l)
}

/// Age model: a gamma distribution matched to a mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgeModel {
    pub mean: f64,
    pub sd: f64,
    /// Rounded ages below this are raised to it.
    pub min_age: u32,
}

impl Default for AgeModel {
    fn default() -> Self {
        AgeModel {
            mean: 28.5,
            sd: 9.54,
            min_age: 13,
        }
    }
}

impl AgeModel {
    pub fn shape(&self) -> f64 {
        (self.mean * self.mean) / (self.sd * self.sd)
    }

    pub fn scale(&self) -> f64 {
        (self.sd * self.sd) / self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonaOptions {
    pub age: AgeModel,
    pub female_prob: f64,
    /// Inclusive clamp applied to every sampled trait score.
    pub score_bounds: (f64, f64),
}

impl Default for PersonaOptions {
    fn default() -> Self {
        PersonaOptions {
            age: AgeModel::default(),
            female_prob: 0.5,
            score_bounds: (1.0, 7.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPersona {
    pub agent_id: usize,
    pub gender: Gender,
    pub age: u32,
    pub big_five_scores: [f64; TRAIT_COUNT],
    pub big_five_labels: [Level; TRAIT_COUNT],
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pinned_traits: BTreeMap<Trait, Level>,
}

impl AgentPersona {
    pub fn score(&self, t: Trait) -> f64 {
        self.big_five_scores[t.index()]
    }

    pub fn label(&self, t: Trait) -> Level {
        self.big_five_labels[t.index()]
    }
}

pub fn sample_personas(n: usize, stats: &BigFiveStats, rng_seed: u64) -> Result<Vec<AgentPersona>> {
    sample_personas_with(n, stats, &PersonaOptions::default(), rng_seed)
}

pub fn sample_personas_with(
    n: usize,
    stats: &BigFiveStats,
    opts: &PersonaOptions,
    rng_seed: u64,
) -> Result<Vec<AgentPersona>> {
    if n == 0 {
        return Err(Error::Precondition("cohort size must be at least 1".into()));
    }
    stats.validate()?;
    let chol = cholesky(&stats.covariance())?;
    let gamma = Gamma::new(opts.age.shape(), opts.age.scale())
        .map_err(|e| Error::Config(format!("age model: {e}")))?;
    let thresholds = stats.thresholds();
    let (lo, hi) = opts.score_bounds;

    let mut rng = seed::rng(rng_seed);
    let mut out = Vec::with_capacity(n);
    for agent_id in 0..n {
        let gender = if rng.random_bool(opts.female_prob) {
            Gender::Female
        } else {
            Gender::Male
        };
        let raw_age: f64 = gamma.sample(&mut rng);
        let age = (raw_age.round().max(0.0) as u32).max(opts.age.min_age);

        let mut z = [0.0; TRAIT_COUNT];
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let mut scores = stats.means;
        for (i, s) in scores.iter_mut().enumerate() {
            let mut dev = 0.0;
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                dev += chol[i][k] * zk;
            }
            *s = (*s + dev).clamp(lo, hi);
        }
        out.push(AgentPersona {
            agent_id,
            gender,
            age,
            big_five_labels: categorize_traits(&scores, &thresholds),
            big_five_scores: scores,
            pinned_traits: BTreeMap::new(),
        });
    }
    Ok(out)
}

/// `high` iff the score reaches the threshold (ties are high).
pub fn categorize_traits(scores: &[f64; TRAIT_COUNT], thresholds: &[f64; TRAIT_COUNT]) -> [Level; TRAIT_COUNT] {
    let mut labels = [Level::Low; TRAIT_COUNT];
    for i in 0..TRAIT_COUNT {
        if scores[i] >= thresholds[i] {
            labels[i] = Level::High;
        }
    }
    labels
}

/// Sets one trait to `mean ± offset·sd` for every persona and relabels it.
pub fn pin_trait(
    personas: &[AgentPersona],
    stats: &BigFiveStats,
    t: Trait,
    level: Level,
    offset: f64,
) -> Vec<AgentPersona> {
    let i = t.index();
    let shift = offset * stats.sds[i];
    let score = match level {
        Level::High => stats.means[i] + shift,
        Level::Low => stats.means[i] - shift,
    };
    let thresholds = stats.thresholds();
    personas
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.big_five_scores[i] = score;
            p.big_five_labels = categorize_traits(&p.big_five_scores, &thresholds);
            p.pinned_traits.insert(t, level);
            p
        })
        .collect()
}

/// Qualitative description used inside prompts. Scores are never shown,
/// only the high/low labels.
pub fn render_persona_text(p: &AgentPersona) -> String {
    let traits: Vec<String> = Trait::ALL
        .iter()
        .map(|&t| format!("{} {}", p.label(t).name(), t.name()))
        .collect();
    format!(
        "You are a {}-year-old {} social media user. Your personality traits are: {}.",
        p.age,
        p.gender.name(),
        traits.join(", ")
    )
}

/// Recovers the label vector from [`render_persona_text`] output.
pub fn parse_persona_labels(text: &str) -> Option<[Level; TRAIT_COUNT]> {
    let lower = text.to_ascii_lowercase();
    let mut labels = [Level::Low; TRAIT_COUNT];
    for t in Trait::ALL {
        let high = lower.matches(&format!("high {}", t.name())).count();
        let low = lower.matches(&format!("low {}", t.name())).count();
        labels[t.index()] = match (high, low) {
            (1, 0) => Level::High,
            (0, 1) => Level::Low,
            _ => return None,
        };
    }
    Some(labels)
}

const TSV_HEADER: &str = "agent_id\tgender\tage\tE\tA\tC\tN\tO\tE_label\tA_label\tC_label\tN_label\tO_label\tpinned";

/// Writes a cohort as tab-separated text: a header line, then one persona per
/// line. Scores use shortest round-trip formatting; `pinned` is `-` or a
/// `;`-separated list of `trait=level`.
pub fn write_personas_tsv<W: Write>(mut w: W, personas: &[AgentPersona]) -> std::io::Result<()> {
    writeln!(w, "{TSV_HEADER}")?;
    for p in personas {
        let scores: Vec<String> = p.big_five_scores.iter().map(|s| s.to_string()).collect();
        let labels: Vec<&str> = p.big_five_labels.iter().map(|l| l.name()).collect();
        let pinned = if p.pinned_traits.is_empty() {
            "-".to_string()
        } else {
            p.pinned_traits
                .iter()
                .map(|(t, l)| format!("{}={}", t.name(), l.name()))
                .collect::<Vec<_>>()
                .join(";")
        };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.agent_id,
            p.gender.name(),
            p.age,
            scores.join("\t"),
            labels.join("\t"),
            pinned
        )?;
    }
    Ok(())
}

pub fn read_personas_tsv<R: BufRead>(r: R, path: &Path) -> Result<Vec<AgentPersona>> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 1 {
            if line.trim_end() != TSV_HEADER {
                return Err(perr(lineno, "unexpected persona header".into()));
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 14 {
            return Err(perr(lineno, format!("expected 14 columns, found {}", cols.len())));
        }
        let agent_id = cols[0]
            .parse()
            .map_err(|_| perr(lineno, format!("bad agent id `{}`", cols[0])))?;
        let gender = match cols[1] {
            "female" => Gender::Female,
            "male" => Gender::Male,
            g => return Err(perr(lineno, format!("bad gender `{g}`"))),
        };
        let age = cols[2]
            .parse()
            .map_err(|_| perr(lineno, format!("bad age `{}`", cols[2])))?;
        let mut scores = [0.0; TRAIT_COUNT];
        let mut labels = [Level::Low; TRAIT_COUNT];
        for i in 0..TRAIT_COUNT {
            scores[i] = cols[3 + i]
                .parse()
                .map_err(|_| perr(lineno, format!("bad score `{}`", cols[3 + i])))?;
            labels[i] = cols[8 + i]
                .parse()
                .map_err(|e: Error| perr(lineno, e.to_string()))?;
        }
        let mut pinned_traits = BTreeMap::new();
        if cols[13] != "-" {
            for item in cols[13].split(';') {
                let (t, l) = item
                    .split_once('=')
                    .ok_or_else(|| perr(lineno, format!("bad pinned entry `{item}`")))?;
                let t: Trait = t.parse().map_err(|e: Error| perr(lineno, e.to_string()))?;
                let l: Level = l.parse().map_err(|e: Error| perr(lineno, e.to_string()))?;
                pinned_traits.insert(t, l);
            }
        }
        out.push(AgentPersona {
            agent_id,
            gender,
            age,
            big_five_scores: scores,
            big_five_labels: labels,
            pinned_traits,
        });
    }
    if out.is_empty() {
        return Err(perr(1, "no personas in file".into()));
    }
    Ok(out)
}
