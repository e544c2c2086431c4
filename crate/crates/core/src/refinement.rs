//! Simulation-based refinement campaigns.
//!
//! A campaign generates clusters and input streams, runs the architecture,
//! and checks the requirement guarantees on every run whose inputs satisfy
//! the requirement assumptions (msg-bound 1 on every `return_i`, disjoint
//! schedules, identical cycle lengths). Runs that break an assumption are
//! counted as rejections and never as guarantee failures.
//!
//! This falsifies but cannot prove refinement.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{simulate, Collision, SimError, Trace};
use crate::monitor::{
    check_bus_conservation, check_frame_transmission, check_msg_bounds, check_self_exclusion,
};
use crate::protocol::{ClusterConfig, Frame, Message, NodeConfig};
use crate::stream::{mod_slot, msg_bound, Interval, TimedStreamPrefix};
use crate::verdict::{Verdict, Violation};

pub const EXHAUSTIVE_MAX_NODES: usize = 2;
pub const EXHAUSTIVE_MAX_CYCLE: u64 = 2;
pub const EXHAUSTIVE_HORIZON: u64 = 4;

/// Size of the random message universe.
const MESSAGE_UNIVERSE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignMode {
    #[default]
    Random,
    ExhaustiveSmall,
}

/// How generated frames fill their `slot` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FrameStyle {
    /// The slot of the current tick.
    #[default]
    Cooperative,
    /// Arbitrary slot numbers; the semantics must not care.
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub trials: u64,
    pub max_nodes: usize,
    pub max_cycle_length: u64,
    pub horizon: u64,
    pub seed: u64,
    #[serde(default)]
    pub mode: CampaignMode,
    /// Odd-numbered random trials get a shared slot injected.
    #[serde(default)]
    pub sabotage: bool,
    #[serde(default)]
    pub frames: FrameStyle,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            trials: 1000,
            max_nodes: 5,
            max_cycle_length: 10,
            horizon: 100,
            seed: 0,
            mode: CampaignMode::Random,
            sabotage: false,
            frames: FrameStyle::Cooperative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CampaignError {
    #[error("invalid campaign configuration: {0}")]
    InvalidConfig(String),
    #[error("trial {index} out of range (campaign has {count} trials)")]
    IndexOutOfRange { index: u64, count: u64 },
}

impl CampaignConfig {
    pub fn exhaustive_small() -> Self {
        CampaignConfig {
            trials: 1,
            max_nodes: EXHAUSTIVE_MAX_NODES,
            max_cycle_length: EXHAUSTIVE_MAX_CYCLE,
            horizon: EXHAUSTIVE_HORIZON,
            mode: CampaignMode::ExhaustiveSmall,
            ..CampaignConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::InvalidConfig(m.to_string()));
        if self.trials < 1 {
            return bad("trials must be at least 1");
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        if self.max_nodes < 1 {
            return bad("max_nodes must be at least 1");
        }
        if self.max_cycle_length < 1 {
            return bad("max_cycle_length must be at least 1");
        }
        if self.mode == CampaignMode::ExhaustiveSmall && self.sabotage {
            return bad("sabotage applies to random campaigns only");
        }
        Ok(())
    }

    pub fn trial_count(&self) -> u64 {
        match self.mode {
            CampaignMode::Random => self.trials,
            CampaignMode::ExhaustiveSmall => exhaustive_space().total,
        }
    }

    pub fn effective_horizon(&self) -> u64 {
        match self.mode {
            CampaignMode::Random => self.horizon,
            CampaignMode::ExhaustiveSmall => EXHAUSTIVE_HORIZON,
        }
    }

    /// The generated artifacts of trial `index`.
    pub fn trial(&self, index: u64) -> Result<TrialCase, CampaignError> {
        let count = self.trial_count();
        if index >= count {
            return Err(CampaignError::IndexOutOfRange { index, count });
        }
        Ok(match self.mode {
            CampaignMode::Random => self.random_trial(index),
            CampaignMode::ExhaustiveSmall => exhaustive_space().case(index),
        })
    }

    fn random_trial(&self, index: u64) -> TrialCase {
        let mut rng = trial_rng(self.seed, index);
        let sabotaged = self.sabotage && index % 2 == 1;
        let mut cluster = gen_valid_cluster(&mut rng, self.max_nodes, self.max_cycle_length);
        let mut shared = None;
        if sabotaged {
            let (c, s) = inject_shared_slot(&mut rng, cluster);
            cluster = c;
            shared = Some(s);
        }
        let mut inputs = gen_inputs_styled(&mut rng, &cluster, self.horizon, self.frames);
        if let Some(s) = shared {
            // Make both owners talk in the first occurrence of the shared slot.
            if s < self.horizon {
                let slot_frame = Interval::singleton(Frame::new(s, vec![Message::new(0, vec![])]));
                for stream in inputs.iter_mut().take(2) {
                    let mut ivs = stream.intervals().to_vec();
                    ivs[s as usize] = slot_frame.clone();
                    *stream = TimedStreamPrefix::new(ivs);
                }
            }
        }
        TrialCase {
            index,
            cluster,
            inputs,
            sabotaged,
        }
    }
}

/// Independent, reproducible random stream per trial.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws a cluster satisfying node validity, disjoint schedules and
/// identical cycle lengths. Each slot is given to one random node or left
/// unowned.
pub fn gen_valid_cluster<R: Rng + ?Sized>(
    rng: &mut R,
    max_nodes: usize,
    max_cycle_length: u64,
) -> ClusterConfig {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let cycle = rng.gen_range(1..=max_cycle_length.max(1));
    let mut schedules = vec![Vec::new(); n];
    for slot in 0..cycle {
        let pick = rng.gen_range(0..=n);
        if pick < n {
            schedules[pick].push(slot);
        }
    }
    let nodes = schedules
        .into_iter()
        .map(|s| NodeConfig::new(s, cycle))
        .collect();
    ClusterConfig::new(nodes).expect("n >= 1")
}

/// Gives one slot to the first two nodes simultaneously, adding a node if
/// necessary. Returns the shared slot.
fn inject_shared_slot<R: Rng + ?Sized>(
    rng: &mut R,
    cluster: ClusterConfig,
) -> (ClusterConfig, u64) {
    let mut nodes = cluster.nodes().to_vec();
    let cycle = nodes[0].cycle_length;
    if nodes.len() < 2 {
        nodes.push(NodeConfig::new(Vec::new(), cycle));
    }
    let slot = match nodes[0].schedule.first() {
        Some(&s) => s,
        None => {
            let s = rng.gen_range(0..cycle);
            for n in nodes.iter_mut() {
                n.schedule.retain(|&x| x != s);
            }
            nodes[0].schedule.push(s);
            s
        }
    };
    if !nodes[1].owns(slot) {
        nodes[1].schedule.push(slot);
    }
    (ClusterConfig::new(nodes).expect("n >= 2"), slot)
}

fn universe_message<R: Rng + ?Sized>(rng: &mut R) -> Message {
    let id = rng.gen_range(0..MESSAGE_UNIVERSE);
    Message::new(id, vec![0xa0 | id as u8])
}

/// One stream per node, at most one frame per tick, cooperative slot fields.
pub fn gen_inputs<R: Rng + ?Sized>(
    rng: &mut R,
    cluster: &ClusterConfig,
    horizon: u64,
) -> Vec<TimedStreamPrefix<Frame>> {
    gen_inputs_styled(rng, cluster, horizon, FrameStyle::Cooperative)
}

pub fn gen_inputs_styled<R: Rng + ?Sized>(
    rng: &mut R,
    cluster: &ClusterConfig,
    horizon: u64,
    style: FrameStyle,
) -> Vec<TimedStreamPrefix<Frame>> {
    cluster
        .nodes()
        .iter()
        .map(|c| {
            (0..horizon)
                .map(|t| {
                    if !rng.gen_bool(0.5) {
                        return Interval::empty();
                    }
                    let slot = match style {
                        FrameStyle::Cooperative => mod_slot(t, c.cycle_length).unwrap_or(0),
                        FrameStyle::Adversarial => rng.gen_range(0..64),
                    };
                    let len = rng.gen_range(0..=2);
                    let data = (0..len).map(|_| universe_message(rng)).collect();
                    Interval::singleton(Frame::new(slot, data))
                })
                .collect()
        })
        .collect()
}

/// Generated artifacts of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialCase {
    pub index: u64,
    pub cluster: ClusterConfig,
    pub inputs: Vec<TimedStreamPrefix<Frame>>,
    pub sabotaged: bool,
}

impl TrialCase {
    /// Why the trial is outside the requirement assumptions, if it is.
    pub fn assumption_failure(&self) -> Option<String> {
        for (name, v) in self.cluster.static_verdicts() {
            if let Some(x) = v.violation() {
                return Some(format!("{name}: {}", x.detail));
            }
        }
        self.inputs
            .iter()
            .position(|s| !msg_bound(1, s))
            .map(|i| format!("MsgBound: return_{i} carries more than one frame in a tick"))
    }

    pub fn inputs_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.inputs).expect("input serialisation is infallible");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// The guarantees checked on every admissible trial, in report order.
pub fn guarantee_verdicts(trace: &Trace, cluster: &ClusterConfig) -> Vec<(&'static str, Verdict)> {
    let run = |r: Result<Verdict, _>| r.unwrap_or_else(|e| Verdict::Refused(format!("{e}")));
    vec![
        (
            "FrameTransmission",
            run(check_frame_transmission(trace, cluster)),
        ),
        ("MsgBounds", run(check_msg_bounds(trace))),
        ("SelfExclusion", run(check_self_exclusion(trace))),
        ("BusConservation", run(check_bus_conservation(trace))),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub trial: u64,
    pub seed: u64,
    pub cluster: ClusterConfig,
    pub inputs_digest: String,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub trials_run: u64,
    /// Trials inside the assumptions, on which guarantees were checked.
    pub refinement_checks: u64,
    pub assumption_rejections: u64,
    pub collisions_observed: u64,
    /// Sorted by trial index.
    pub failures: Vec<FailureRecord>,
    /// Excluded from the serialised report so reports are byte-stable.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialisation is infallible")
    }
}

enum TrialOutcome {
    Checked(Vec<Violation>),
    Rejected { collided: bool },
}

/// Full reproduction of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub case: TrialCase,
    /// Truncated at the collision tick if one occurred.
    pub trace: Trace,
    pub collision: Option<Collision>,
    pub assumption_failure: Option<String>,
    pub verdicts: Vec<(&'static str, Verdict)>,
}

fn execute(case: TrialCase, horizon: u64) -> Replay {
    let assumption_failure = case.assumption_failure();
    let (trace, collision, engine_error) = match simulate(&case.cluster, &case.inputs, horizon) {
        Ok(trace) => (trace, None, None),
        Err(SimError::Collision { collision, partial }) => (partial, Some(collision), None),
        Err(e) => (Trace::default(), None, Some(e.to_string())),
    };
    let verdicts = if assumption_failure.is_some() {
        Vec::new()
    } else if let Some(c) = &collision {
        // The cable's assumption must follow from the architecture's.
        vec![(
            "BusExclusion",
            Verdict::at(
                "BusExclusion",
                c.t,
                c.senders.get(1).copied(),
                format!(
                    "collision between nodes {:?} under valid assumptions",
                    c.senders
                ),
            ),
        )]
    } else if let Some(e) = engine_error {
        vec![("Engine", Verdict::Refused(e))]
    } else {
        guarantee_verdicts(&trace, &case.cluster)
    };
    Replay {
        case,
        trace,
        collision,
        assumption_failure,
        verdicts,
    }
}

fn outcome(replay: &Replay) -> TrialOutcome {
    if replay.assumption_failure.is_some() {
        return TrialOutcome::Rejected {
            collided: replay.collision.is_some(),
        };
    }
    let violations = replay
        .verdicts
        .iter()
        .filter_map(|(name, v)| match v {
            Verdict::Holds => None,
            Verdict::Violated(x) => Some(x.clone()),
            Verdict::Refused(r) => Some(Violation {
                predicate: name.to_string(),
                t: None,
                node: None,
                detail: format!("refused: {r}"),
            }),
        })
        .collect();
    TrialOutcome::Checked(violations)
}

/// Reproduces trial `trial_index` of the campaign `cfg` run with `seed`.
pub fn replay(seed: u64, trial_index: u64, cfg: &CampaignConfig) -> Result<Replay, CampaignError> {
    let cfg = CampaignConfig {
        seed,
        ..cfg.clone()
    };
    cfg.validate()?;
    let case = cfg.trial(trial_index)?;
    Ok(execute(case, cfg.effective_horizon()))
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    run_campaign_with_jobs(cfg, 1)
}

/// Runs trials on `jobs` worker threads. The report does not depend on
/// `jobs`.
pub fn run_campaign_with_jobs(
    cfg: &CampaignConfig,
    jobs: usize,
) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    let start = Instant::now();
    let count = cfg.trial_count();
    let horizon = cfg.effective_horizon();

    let run_one = |index: u64| {
        let case = cfg.trial(index).expect("index below trial count");
        let cluster = case.cluster.clone();
        let digest = case.inputs_digest();
        let replay = execute(case, horizon);
        (index, cluster, digest, outcome(&replay))
    };

    let results: Vec<_> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
        pool.install(|| (0..count).into_par_iter().map(run_one).collect())
    } else {
        (0..count).map(run_one).collect()
    };

    let mut report = CampaignReport {
        config: cfg.clone(),
        trials_run: count,
        refinement_checks: 0,
        assumption_rejections: 0,
        collisions_observed: 0,
        failures: Vec::new(),
        wall_time: Duration::ZERO,
    };
    for (index, cluster, digest, outcome) in results {
        match outcome {
            TrialOutcome::Rejected { collided } => {
                report.assumption_rejections += 1;
                report.collisions_observed += collided as u64;
            }
            TrialOutcome::Checked(violations) => {
                report.refinement_checks += 1;
                report
                    .failures
                    .extend(violations.into_iter().map(|violation| FailureRecord {
                        trial: index,
                        seed: cfg.seed,
                        cluster: cluster.clone(),
                        inputs_digest: digest.clone(),
                        violation,
                    }));
            }
        }
    }
    report.failures.sort_by_key(|f| f.trial);
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Every valid cluster with `n <= 2`, `cycle_length <= 2`, crossed with
/// every msg-bound-1 input over a one-message universe up to horizon 4.
struct ExhaustiveSpace {
    clusters: Vec<ClusterConfig>,
    /// First trial index of each cluster.
    offsets: Vec<u64>,
    total: u64,
}

fn exhaustive_space() -> ExhaustiveSpace {
    let mut clusters = Vec::new();
    for n in 1..=EXHAUSTIVE_MAX_NODES {
        for cycle in 1..=EXHAUSTIVE_MAX_CYCLE {
            // Each slot is unowned (0) or owned by node `choice - 1`.
            let choices = (n + 1) as u64;
            for code in 0..choices.pow(cycle as u32) {
                let mut schedules = vec![Vec::new(); n];
                let mut rest = code;
                for slot in 0..cycle {
                    let choice = (rest % choices) as usize;
                    rest /= choices;
                    if choice > 0 {
                        schedules[choice - 1].push(slot);
                    }
                }
                let nodes = schedules
                    .into_iter()
                    .map(|s| NodeConfig::new(s, cycle))
                    .collect();
                clusters.push(ClusterConfig::new(nodes).expect("n >= 1"));
            }
        }
    }
    let mut offsets = Vec::with_capacity(clusters.len());
    let mut total = 0u64;
    for c in &clusters {
        offsets.push(total);
        total += 1u64 << (c.len() as u64 * EXHAUSTIVE_HORIZON);
    }
    ExhaustiveSpace {
        clusters,
        offsets,
        total,
    }
}

impl ExhaustiveSpace {
    fn case(&self, index: u64) -> TrialCase {
        let ci = self.offsets.partition_point(|&o| o <= index) - 1;
        let cluster = self.clusters[ci].clone();
        let mask = index - self.offsets[ci];
        let cycle = cluster.nodes()[0].cycle_length;
        let inputs = (0..cluster.len() as u64)
            .map(|k| {
                (0..EXHAUSTIVE_HORIZON)
                    .map(|t| {
                        if mask >> (k * EXHAUSTIVE_HORIZON + t) & 1 == 1 {
                            let slot = mod_slot(t, cycle).expect("cycle >= 1");
                            Interval::singleton(Frame::new(slot, vec![Message::new(0, vec![])]))
                        } else {
                            Interval::empty()
                        }
                    })
                    .collect()
            })
            .collect();
        TrialCase {
            index,
            cluster,
            inputs,
            sabotaged: false,
        }
    }
}
