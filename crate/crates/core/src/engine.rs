//! Day-stepped diffusion of one news item from one source agent.
//!
//! Day 0 seeds the source as reached and pending. On each following day,
//! every agent first reached the previous day decides once; sharers deliver
//! the item (plus their comment under the commenting intervention) to every
//! non-blocked neighbour; neighbours reached for the first time decide on
//! the next day. Decisions within a day only read start-of-day state, so
//! they are evaluated concurrently. Intervention triggers are checked at day
//! end and take effect from the next day.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgen::Network;
use crate::news::NewsItem;
use crate::par::{self, Parallelism};
use crate::persona::{AgentPersona, Level, Trait};
use crate::policy::{DecisionOutcome, DecisionPolicy, DecisionRequest, InterventionContext};
use crate::seed::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    None,
    Commenting,
    Accuracy,
    Blocking,
}

impl InterventionKind {
    pub const ALL: [InterventionKind; 4] = [
        InterventionKind::None,
        InterventionKind::Commenting,
        InterventionKind::Accuracy,
        InterventionKind::Blocking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterventionKind::None => "none",
            InterventionKind::Commenting => "commenting",
            InterventionKind::Accuracy => "accuracy",
            InterventionKind::Blocking => "blocking",
        }
    }
}

/// Denominator for the number of agents blocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockDenominator {
    /// `ceil(block_fraction · N)`, capped by the candidate pool.
    #[default]
    Population,
    /// `ceil(block_fraction · |candidates|)`.
    CandidatePool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterventionSpec {
    pub kind: InterventionKind,
    /// Reached fraction at which accuracy notices / blocking activate.
    pub trigger_threshold: f64,
    pub block_fraction: f64,
    pub block_denominator: BlockDenominator,
}

impl Default for InterventionSpec {
    fn default() -> Self {
        InterventionSpec {
            kind: InterventionKind::None,
            trigger_threshold: 0.10,
            block_fraction: 0.20,
            block_denominator: BlockDenominator::Population,
        }
    }
}

impl InterventionSpec {
    pub fn of(kind: InterventionKind) -> Self {
        InterventionSpec { kind, ..Self::default() }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.trigger_threshold > 0.0 && self.trigger_threshold <= 1.0) {
            v.push(format!("intervention.trigger_threshold must be in (0, 1], got {}", self.trigger_threshold));
        }
        if !(self.block_fraction > 0.0 && self.block_fraction < 1.0) {
            v.push(format!("intervention.block_fraction must be in (0, 1), got {}", self.block_fraction));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Unreached,
    PendingDecision,
    Spreader,
    DeadEnd,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub sender: usize,
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Decision {
        day: u32,
        agent: usize,
        share: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        comment: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        rationale: Option<String>,
        #[serde(skip_serializing_if = "Vec::is_empty", default)]
        transcript: Vec<String>,
        #[serde(skip_serializing_if = "std::ops::Not::not", default)]
        parse_failure: bool,
    },
    Delivery {
        day: u32,
        from: usize,
        to: usize,
        first_exposure: bool,
    },
    AccuracyNotice {
        day: u32,
    },
    Blocking {
        day: u32,
        agents: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub day: u32,
    pub n: usize,
    pub status: Vec<AgentStatus>,
    /// Ever received the item (`R_t`), including agents blocked later.
    pub reached: Vec<bool>,
    /// Ever shared the item (cumulative `S_t`).
    pub shared: Vec<bool>,
    pub reached_count: usize,
    pub spreader_count: usize,
    pub inbox: Vec<Vec<Delivery>>,
    pub accuracy_triggered: bool,
    pub blocking_applied: bool,
    pub events: Vec<Event>,
    pub parse_failures: usize,
    transcripts: Vec<(String, String)>,
}

impl DiffusionState {
    /// Day-0 state with `source` reached and awaiting its decision.
    pub fn seeded(n: usize, source: usize) -> Self {
        let mut s = DiffusionState {
            day: 0,
            n,
            status: vec![AgentStatus::Unreached; n],
            reached: vec![false; n],
            shared: vec![false; n],
            reached_count: 0,
            spreader_count: 0,
            inbox: vec![Vec::new(); n],
            accuracy_triggered: false,
            blocking_applied: false,
            events: Vec::new(),
            parse_failures: 0,
            transcripts: Vec::new(),
        };
        s.status[source] = AgentStatus::PendingDecision;
        s.reached[source] = true;
        s.reached_count = 1;
        s
    }

    pub fn reached_prop(&self) -> f64 {
        self.reached_count as f64 / self.n as f64
    }

    pub fn forwarded_prop(&self) -> f64 {
        self.spreader_count as f64 / self.n as f64
    }

    pub fn count(&self, status: AgentStatus) -> usize {
        self.status.iter().filter(|&&s| s == status).count()
    }

    fn context_for(&self, agent: usize, spec: &InterventionSpec) -> InterventionContext {
        match spec.kind {
            InterventionKind::Commenting => InterventionContext::Commenting {
                peer_comments: self.inbox[agent].iter().filter_map(|d| d.comment.clone()).collect(),
            },
            InterventionKind::Accuracy if self.accuracy_triggered => InterventionContext::AccuracyNotice,
            _ => InterventionContext::None,
        }
    }
}

/// Highest-degree node; ties go to the lowest id.
pub fn select_source(net: &Network) -> usize {
    (0..net.n())
        .max_by_key(|&v| (net.degree(v), std::cmp::Reverse(v)))
        .unwrap_or(0)
}

/// Inputs shared by every day of one run.
pub struct DayContext<'a> {
    pub net: &'a Network,
    pub personas: &'a [AgentPersona],
    pub news: &'a NewsItem,
    pub policy: &'a dyn DecisionPolicy,
    pub intervention: &'a InterventionSpec,
    pub decision_seed: u64,
    pub parallelism: Parallelism,
}

/// Advances the state by one day.
pub fn step_day(state: &mut DiffusionState, ctx: &DayContext<'_>) -> Result<()> {
    let day = state.day + 1;
    let pending: Vec<usize> = (0..state.n)
        .filter(|&v| state.status[v] == AgentStatus::PendingDecision)
        .collect();

    let requests: Vec<DecisionRequest<'_>> = pending
        .iter()
        .map(|&agent| DecisionRequest {
            agent_id: agent,
            persona: &ctx.personas[agent],
            news: ctx.news,
            day,
            context: state.context_for(agent, ctx.intervention),
            stream_seed: ctx.decision_seed,
        })
        .collect();
    let outcomes: Vec<DecisionOutcome> = par::try_map(ctx.parallelism, &requests, |req| {
        ctx.policy
            .decide(req)
            .map_err(|source| Error::Policy { agent: req.agent_id, day, source })
    })?;

    let mut sharers = Vec::new();
    for (&agent, outcome) in pending.iter().zip(outcomes) {
        if outcome.parse_failure {
            state.parse_failures += 1;
        }
        for key in &outcome.transcript_keys {
            state.transcripts.push((key.clone(), outcome.raw_response.clone()));
        }
        if outcome.share {
            state.status[agent] = AgentStatus::Spreader;
            state.shared[agent] = true;
            state.spreader_count += 1;
            sharers.push((agent, outcome.comment.clone()));
        } else {
            state.status[agent] = AgentStatus::DeadEnd;
        }
        state.events.push(Event::Decision {
            day,
            agent,
            share: outcome.share,
            comment: outcome.comment,
            rationale: outcome.rationale,
            transcript: outcome.transcript_keys,
            parse_failure: outcome.parse_failure,
        });
    }

    for (from, comment) in sharers {
        for &to in ctx.net.neighbors(from) {
            if state.status[to] == AgentStatus::Blocked {
                continue;
            }
            let first = !state.reached[to];
            state.inbox[to].push(Delivery { sender: from, comment: comment.clone() });
            state.events.push(Event::Delivery { day, from, to, first_exposure: first });
            if first {
                state.reached[to] = true;
                state.reached_count += 1;
                state.status[to] = AgentStatus::PendingDecision;
            }
        }
    }

    state.day = day;
    evaluate_triggers(state, ctx);
    Ok(())
}

fn evaluate_triggers(state: &mut DiffusionState, ctx: &DayContext<'_>) {
    let spec = ctx.intervention;
    if state.reached_prop() < spec.trigger_threshold {
        return;
    }
    match spec.kind {
        InterventionKind::Accuracy => apply_accuracy_intervention(state),
        InterventionKind::Blocking => apply_blocking_intervention(state, ctx.net, ctx.personas, spec),
        _ => {}
    }
}

/// Latches the accuracy notice on. Later decisions all see it.
pub fn apply_accuracy_intervention(state: &mut DiffusionState) {
    if !state.accuracy_triggered {
        state.accuracy_triggered = true;
        state.events.push(Event::AccuracyNotice { day: state.day });
    }
}

/// Agents blocked when the blocking intervention fires: high-openness or
/// high-extraversion agents ranked by degree (descending, ties by id).
pub fn blocking_targets(net: &Network, personas: &[AgentPersona], spec: &InterventionSpec) -> Vec<usize> {
    let mut candidates: Vec<usize> = personas
        .iter()
        .filter(|p| p.label(Trait::Openness) == Level::High || p.label(Trait::Extraversion) == Level::High)
        .map(|p| p.agent_id)
        .collect();
    candidates.sort_by_key(|&v| (std::cmp::Reverse(net.degree(v)), v));
    let base = match spec.block_denominator {
        BlockDenominator::Population => net.n(),
        BlockDenominator::CandidatePool => candidates.len(),
    };
    let quota = (spec.block_fraction * base as f64 - 1e-9).ceil().max(0.0) as usize;
    candidates.truncate(quota);
    candidates.sort_unstable();
    candidates
}

/// Blocks the targets once. Blocked agents never decide or receive again;
/// earlier shares keep counting.
pub fn apply_blocking_intervention(
    state: &mut DiffusionState,
    net: &Network,
    personas: &[AgentPersona],
    spec: &InterventionSpec,
) {
    if state.blocking_applied {
        return;
    }
    state.blocking_applied = true;
    let targets = blocking_targets(net, personas, spec);
    for &v in &targets {
        state.status[v] = AgentStatus::Blocked;
        state.inbox[v].clear();
    }
    state.events.push(Event::Blocking { day: state.day, agents: targets });
}

/// Identifies where a run came from; filled in by the experiment layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Provenance {
    pub group: String,
    pub config_hash: String,
    pub network: String,
    pub network_seed: u64,
    pub persona_seed: u64,
    pub replicate: u32,
    pub attempt: u32,
    pub policy: String,
    pub templates: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pinned: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub provenance: Provenance,
    pub news_id: String,
    pub days: u32,
    pub n: usize,
    pub source: usize,
    pub intervention: InterventionSpec,
    pub decision_seed: u64,
    /// `|R_t| / N` for `t = 0..=days`.
    pub reached_prop: Vec<f64>,
    /// Cumulative spreaders over `N` for `t = 0..=days`.
    pub forwarded_prop: Vec<f64>,
    /// The source shared the item.
    pub effective: bool,
    pub tainted: bool,
    pub parse_failures: usize,
    pub accuracy_day: Option<u32>,
    pub blocking_day: Option<u32>,
    pub blocked: Vec<usize>,
    /// SHA-256 over the (cache key, reply) pairs consumed, in event order.
    pub transcript_digest: Option<String>,
    pub events: Vec<Event>,
}

impl RunRecord {
    pub fn final_reached(&self) -> f64 {
        *self.reached_prop.last().unwrap_or(&0.0)
    }

    pub fn final_forwarded(&self) -> f64 {
        *self.forwarded_prop.last().unwrap_or(&0.0)
    }
}

pub struct RunOptions {
    pub days: u32,
    pub intervention: InterventionSpec,
    pub decision_seed: u64,
    pub parallelism: Parallelism,
    pub provenance: Provenance,
}

/// Runs `days` steps from the highest-degree source.
pub fn run(
    opts: &RunOptions,
    net: &Network,
    personas: &[AgentPersona],
    news: &NewsItem,
    policy: &dyn DecisionPolicy,
) -> Result<RunRecord> {
    if opts.days < 1 {
        return Err(Error::Precondition("a run needs at least one day".into()));
    }
    if personas.len() != net.n() {
        return Err(Error::Precondition(format!(
            "cohort has {} personas but the network has {} nodes",
            personas.len(),
            net.n()
        )));
    }
    if let Some(p) = personas.iter().enumerate().find(|(i, p)| p.agent_id != *i) {
        return Err(Error::Precondition(format!("persona at position {} has agent_id {}", p.0, p.1.agent_id)));
    }

    let source = select_source(net);
    let ctx = DayContext {
        net,
        personas,
        news,
        policy,
        intervention: &opts.intervention,
        decision_seed: opts.decision_seed,
        parallelism: opts.parallelism,
    };
    let mut state = DiffusionState::seeded(net.n(), source);
    let mut reached = vec![state.reached_prop()];
    let mut forwarded = vec![state.forwarded_prop()];
    evaluate_triggers(&mut state, &ctx);
    for _ in 0..opts.days {
        step_day(&mut state, &ctx)?;
        reached.push(state.reached_prop());
        forwarded.push(state.forwarded_prop());
    }

    let mut accuracy_day = None;
    let mut blocking_day = None;
    let mut blocked = Vec::new();
    for e in &state.events {
        match e {
            Event::AccuracyNotice { day } => accuracy_day = Some(*day),
            Event::Blocking { day, agents } => {
                blocking_day = Some(*day);
                blocked = agents.clone();
            }
            _ => {}
        }
    }
    let transcript_digest = (!state.transcripts.is_empty()).then(|| {
        let mut s = String::new();
        for (k, r) in &state.transcripts {
            s.push_str(k);
            s.push('\0');
            s.push_str(r);
            s.push('\0');
        }
        sha256_hex(s)
    });

    Ok(RunRecord {
        provenance: opts.provenance.clone(),
        news_id: news.news_id.clone(),
        days: opts.days,
        n: net.n(),
        source,
        intervention: opts.intervention.clone(),
        decision_seed: opts.decision_seed,
        reached_prop: reached,
        forwarded_prop: forwarded,
        effective: state.shared[source],
        tainted: state.parse_failures > 0,
        parse_failures: state.parse_failures,
        accuracy_day,
        blocking_day,
        blocked,
        transcript_digest,
        events: state.events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::NetworkKind;
    use crate::persona::{sample_personas, BigFiveStats, Gender};
    use crate::policy::{ConstantPolicy, StubPolicy};

    fn graph(n: usize, edges: &[(usize, usize)]) -> Network {
        Network::from_edges(n, edges.iter().copied(), NetworkKind::Custom, 0).unwrap()
    }

    fn star(n: usize) -> Network {
        let e: Vec<_> = (1..n).map(|v| (0, v)).collect();
        graph(n, &e)
    }

    fn cohort(n: usize) -> Vec<AgentPersona> {
        sample_personas(n, &BigFiveStats::reference(), 4).unwrap()
    }

    fn opts(days: u32, kind: InterventionKind) -> RunOptions {
        RunOptions {
            days,
            intervention: InterventionSpec::of(kind),
            decision_seed: 1,
            parallelism: Parallelism::Sequential,
            provenance: Provenance::default(),
        }
    }

    /// Shares only for the listed agents.
    struct ShareSet(Vec<usize>);

    impl DecisionPolicy for ShareSet {
        fn identity(&self) -> String {
            "share-set".into()
        }
        fn is_stochastic(&self) -> bool {
            false
        }
        fn decide(&self, req: &DecisionRequest<'_>) -> Result<DecisionOutcome, crate::policy::PolicyError> {
            ConstantPolicy(self.0.contains(&req.agent_id)).decide(req)
        }
    }

    #[test]
    fn source_selection() {
        assert_eq!(select_source(&star(5)), 0);
        let k4 = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(select_source(&k4), 0);
        // Nodes 3 and 7 both have degree 3.
        let g = graph(10, &[(3, 0), (3, 1), (3, 2), (7, 4), (7, 5), (7, 6)]);
        assert_eq!(select_source(&g), 3);
    }

    #[test]
    fn star_reaches_everyone_on_day_one() {
        let net = star(5);
        let r = run(&opts(7, InterventionKind::None), &net, &cohort(5), &NewsItem::placeholder(), &ConstantPolicy(true)).unwrap();
        assert_eq!(r.reached_prop.len(), 8);
        assert_eq!(r.reached_prop[0], 0.2);
        assert!(r.reached_prop[1..].iter().all(|&p| p == 1.0));
        assert!(r.effective);
    }

    #[test]
    fn declining_source_freezes_diffusion() {
        let net = star(6);
        let r = run(&opts(7, InterventionKind::None), &net, &cohort(6), &NewsItem::placeholder(), &ConstantPolicy(false)).unwrap();
        assert!(!r.effective);
        assert!(r.reached_prop.iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
        assert!(r.forwarded_prop.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn triangle_hand_trace() {
        let net = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let r = run(&opts(4, InterventionKind::None), &net, &cohort(3), &NewsItem::placeholder(), &ShareSet(vec![0])).unwrap();
        assert_eq!(r.reached_prop, vec![1.0 / 3.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(r.forwarded_prop[1..], [1.0 / 3.0; 4]);
        let decisions = r.events.iter().filter(|e| matches!(e, Event::Decision { .. })).count();
        assert_eq!(decisions, 3);
    }

    #[test]
    fn repeated_exposure_never_redecides() {
        // 0 and 1 both share to 2 on different days; 2 decides once.
        let net = graph(3, &[(0, 1), (0, 2), (1, 2)]);
        let r = run(&opts(5, InterventionKind::None), &net, &cohort(3), &NewsItem::placeholder(), &ConstantPolicy(true)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in &r.events {
            if let Event::Decision { agent, .. } = e {
                assert!(seen.insert(*agent));
            }
        }
    }

    fn trigger_state(n: usize, reached: usize) -> DiffusionState {
        let mut s = DiffusionState::seeded(n, 0);
        for v in 1..reached {
            s.reached[v] = true;
            s.status[v] = AgentStatus::DeadEnd;
        }
        s.reached_count = reached;
        s
    }

    #[test]
    fn accuracy_trigger_boundary_and_latch() {
        let net = star(1000);
        let personas = cohort(1000);
        let news = NewsItem::placeholder();
        let spec = InterventionSpec::of(InterventionKind::Accuracy);
        let ctx = DayContext {
            net: &net,
            personas: &personas,
            news: &news,
            policy: &ConstantPolicy(false),
            intervention: &spec,
            decision_seed: 0,
            parallelism: Parallelism::Sequential,
        };
        let mut s = trigger_state(1000, 99);
        evaluate_triggers(&mut s, &ctx);
        assert!(!s.accuracy_triggered);
        let mut s = trigger_state(1000, 100);
        evaluate_triggers(&mut s, &ctx);
        assert!(s.accuracy_triggered);
        step_day(&mut s, &ctx).unwrap();
        assert!(s.accuracy_triggered);
        assert_eq!(s.events.iter().filter(|e| matches!(e, Event::AccuracyNotice { .. })).count(), 1);
    }

    #[test]
    fn full_threshold_only_fires_at_full_reach() {
        let net = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let mut o = opts(7, InterventionKind::Accuracy);
        o.intervention.trigger_threshold = 1.0;
        let r = run(&o, &net, &cohort(4), &NewsItem::placeholder(), &ConstantPolicy(true)).unwrap();
        // Path from node 1 (degree 2, lowest id): full reach on day 2.
        assert_eq!(r.accuracy_day, Some(2));
    }

    #[test]
    fn accuracy_notice_reaches_later_requests() {
        struct Recorder(std::sync::Mutex<Vec<(u32, bool)>>);
        impl DecisionPolicy for Recorder {
            fn identity(&self) -> String {
                "rec".into()
            }
            fn is_stochastic(&self) -> bool {
                false
            }
            fn decide(&self, req: &DecisionRequest<'_>) -> Result<DecisionOutcome, crate::policy::PolicyError> {
                self.0.lock().unwrap().push((req.day, req.context.accuracy_notice()));
                ConstantPolicy(true).decide(req)
            }
        }
        let net = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let rec = Recorder(Default::default());
        let mut o = opts(5, InterventionKind::Accuracy);
        o.intervention.trigger_threshold = 0.5;
        run(&o, &net, &cohort(5), &NewsItem::placeholder(), &rec).unwrap();
        // Source 1: day 1 reach {0,1,2}=0.6 → notice from day 2 on.
        for (day, notice) in rec.0.into_inner().unwrap() {
            assert_eq!(notice, day >= 2, "day {day}");
        }
    }

    fn labelled(n: usize, high: &[usize]) -> Vec<AgentPersona> {
        (0..n)
            .map(|i| {
                let l = if high.contains(&i) { Level::High } else { Level::Low };
                AgentPersona {
                    agent_id: i,
                    gender: Gender::Male,
                    age: 30,
                    big_five_scores: [4.0; 5],
                    big_five_labels: [l, Level::Low, Level::Low, Level::Low, Level::Low],
                    pinned_traits: Default::default(),
                }
            })
            .collect()
    }

    #[test]
    fn blocking_quota_and_degenerate_pool() {
        let net = crate::netgen::gen_random(300, 0.04, 2).unwrap();
        let all_high = labelled(300, &(0..300).collect::<Vec<_>>());
        let spec = InterventionSpec::of(InterventionKind::Blocking);
        let targets = blocking_targets(&net, &all_high, &spec);
        assert_eq!(targets.len(), 60);
        let min_blocked = targets.iter().map(|&v| net.degree(v)).min().unwrap();
        let max_free = (0..300).filter(|v| !targets.contains(v)).map(|v| net.degree(v)).max().unwrap();
        assert!(min_blocked >= max_free);

        assert!(blocking_targets(&net, &labelled(300, &[]), &spec).is_empty());
        assert_eq!(blocking_targets(&net, &labelled(300, &[1, 2, 3]), &spec), vec![1, 2, 3]);
        let pool = InterventionSpec { block_denominator: BlockDenominator::CandidatePool, ..spec };
        assert_eq!(blocking_targets(&net, &labelled(300, &(0..100).collect::<Vec<_>>()), &pool).len(), 20);
    }

    #[test]
    fn blocked_agents_are_cut_off() {
        // Path 0-1-2-3-4-5 with source 1; agent 3 is a high-E candidate.
        let net = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let personas = labelled(6, &[3]);
        let mut o = opts(7, InterventionKind::Blocking);
        o.intervention.trigger_threshold = 0.5;
        let r = run(&o, &net, &personas, &NewsItem::placeholder(), &ConstantPolicy(true)).unwrap();
        assert_eq!(r.blocked, vec![3]);
        assert_eq!(r.blocking_day, Some(1));
        assert_eq!(r.final_reached(), 0.5);
        for e in &r.events {
            if let Event::Delivery { from, to, .. } = e {
                assert!(*from != 3 && *to != 3);
            }
        }
    }

    #[test]
    fn dead_end_can_be_blocked_without_effect() {
        let net = star(5);
        let personas = labelled(5, &[0, 1]);
        let mut o = opts(3, InterventionKind::Blocking);
        o.intervention.trigger_threshold = 0.2;
        // Day-0 trigger: source (0) and agent 1 blocked before anyone decides.
        let r = run(&o, &net, &personas, &NewsItem::placeholder(), &ConstantPolicy(true)).unwrap();
        assert_eq!(r.blocking_day, Some(0));
        assert_eq!(r.blocked.len(), 1);
        assert!(!r.effective);
    }

    #[test]
    fn commenting_forwards_comments() {
        let net = graph(3, &[(0, 1), (1, 2)]);
        let r = run(&opts(3, InterventionKind::Commenting), &net, &cohort(3), &NewsItem::placeholder(), &ConstantPolicy(true)).unwrap();
        let comments = r
            .events
            .iter()
            .filter(|e| matches!(e, Event::Decision { comment: Some(_), .. }))
            .count();
        assert_eq!(comments, 3);
    }

    #[test]
    fn invariants_hold_under_stub() {
        let net = crate::netgen::gen_scale_free(120, 3, 9).unwrap();
        let personas = cohort(120);
        for kind in InterventionKind::ALL {
            let policy = StubPolicy::default();
            let news = NewsItem::placeholder();
            let spec = InterventionSpec::of(kind);
            let ctx = DayContext {
                net: &net,
                personas: &personas,
                news: &news,
                policy: &policy,
                intervention: &spec,
                decision_seed: 5,
                parallelism: Parallelism::Parallel,
            };
            let mut s = DiffusionState::seeded(120, select_source(&net));
            let mut prev = (s.reached_count, s.spreader_count);
            for _ in 0..7 {
                step_day(&mut s, &ctx).unwrap();
                assert!(s.reached_count >= prev.0 && s.spreader_count >= prev.1);
                assert!(s.spreader_count <= s.reached_count);
                let blocked_unreached = (0..120).filter(|&v| s.status[v] == AgentStatus::Blocked && !s.reached[v]).count();
                let unreached = s.count(AgentStatus::Unreached);
                assert_eq!(unreached + s.reached_count + blocked_unreached, 120);
                let live = s.count(AgentStatus::Spreader) + s.count(AgentStatus::DeadEnd) + s.count(AgentStatus::PendingDecision);
                let blocked_reached = (0..120).filter(|&v| s.status[v] == AgentStatus::Blocked && s.reached[v]).count();
                assert_eq!(live + blocked_reached, s.reached_count);
                prev = (s.reached_count, s.spreader_count);
            }
        }
    }

    #[test]
    fn cohort_size_mismatch_rejected() {
        let err = run(&opts(7, InterventionKind::None), &star(5), &cohort(4), &NewsItem::placeholder(), &ConstantPolicy(true));
        assert!(err.is_err());
    }
}
