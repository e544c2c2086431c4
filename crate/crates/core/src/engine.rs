//! The FlexRay architecture as synchronous per-tick transformers.
//!
//! Every component is pointwise in `t`. Within one tick the network is
//! evaluated in dependency order: scheduler, send half of the bus interface,
//! cable, receive half of the bus interface. Any output not fixed by a
//! component's formula is the empty interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{validate_node, ClusterConfig, Frame, NodeConfig};
use crate::stream::{mod_slot, Interval, TimeIndex, TimedStreamPrefix};
use crate::verdict::Verdict;

/// Two or more nodes drove the bus in the same tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collision {
    pub t: TimeIndex,
    pub senders: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("expected {expected} per-node channels, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("node {node} has an invalid configuration: {detail}")]
    InvalidNode { node: usize, detail: String },
    #[error("bus collision at t={} between nodes {:?}", .0.t, .0.senders)]
    Collision(Collision),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("expected {expected} input streams, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("input stream {node} has horizon {available}, {needed} ticks requested")]
    InputHorizon {
        node: usize,
        available: u64,
        needed: u64,
    },
    #[error("node {node} has an invalid configuration: {detail}")]
    InvalidNode { node: usize, detail: String },
    #[error("bus collision at t={} between nodes {:?}", .collision.t, .collision.senders)]
    Collision {
        collision: Collision,
        partial: Trace,
    },
}

/// What to do when the cable's disjointness assumption is violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionPolicy {
    /// Stop and return the trace up to (excluding) the colliding tick.
    #[default]
    Abort,
    /// Non-normative: forward the lowest-index sender and keep going.
    RecordAndContinue,
}

/// A controller is stateless between ticks apart from its configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerState {
    config: NodeConfig,
}

impl ControllerState {
    pub fn new(config: NodeConfig) -> Result<Self, String> {
        match validate_node(&config) {
            Verdict::Holds => Ok(ControllerState { config }),
            Verdict::Violated(v) => Err(v.detail),
            Verdict::Refused(r) => Err(r),
        }
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn tick(
        &self,
        t: TimeIndex,
        ret: &Interval<Frame>,
        recv: &Interval<Frame>,
    ) -> ControllerTick {
        controller_tick(&self.config, t, ret, recv)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickInputs {
    pub returns: Vec<Interval<Frame>>,
}

/// Values of every channel of the architecture at one tick.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRecord {
    pub t: TimeIndex,
    pub activation: Vec<Interval<u64>>,
    pub send: Vec<Interval<Frame>>,
    pub recv: Interval<Frame>,
    pub store: Vec<Interval<Frame>>,
    pub get: Vec<Interval<u64>>,
    pub returns: Vec<Interval<Frame>>,
}

impl TickRecord {
    pub fn node_count(&self) -> usize {
        self.returns.len()
    }

    /// All per-node channel lists have length `n`.
    pub fn is_well_shaped(&self, n: usize) -> bool {
        self.activation.len() == n
            && self.send.len() == n
            && self.store.len() == n
            && self.get.len() == n
            && self.returns.len() == n
    }
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: expected t={expected}, found t={found}")]
    Sequence {
        line: usize,
        expected: TimeIndex,
        found: TimeIndex,
    },
    #[error("line {line}: record is not shaped for {n} nodes")]
    Shape { line: usize, n: usize },
}

/// A finite run of the architecture: one record per tick, starting at t=0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Trace {
    records: Vec<TickRecord>,
}

impl Trace {
    pub fn new(records: Vec<TickRecord>) -> Self {
        Trace { records }
    }

    pub fn records(&self) -> &[TickRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [TickRecord] {
        &mut self.records
    }

    pub fn horizon(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `None` for the empty trace.
    pub fn node_count(&self) -> Option<usize> {
        self.records.first().map(TickRecord::node_count)
    }

    pub fn is_well_shaped(&self, n: usize) -> bool {
        self.records.iter().all(|r| r.is_well_shaped(n))
    }

    /// One JSON object per line, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialisation is infallible"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceParseError> {
        let mut records: Vec<TickRecord> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: TickRecord =
                serde_json::from_str(line).map_err(|source| TraceParseError::Json {
                    line: i + 1,
                    source,
                })?;
            let expected = records.len() as TimeIndex;
            if rec.t != expected {
                return Err(TraceParseError::Sequence {
                    line: i + 1,
                    expected,
                    found: rec.t,
                });
            }
            let n = records
                .first()
                .map_or(rec.returns.len(), |r| r.node_count());
            if !rec.is_well_shaped(n) {
                return Err(TraceParseError::Shape { line: i + 1, n });
            }
            records.push(rec);
        }
        Ok(Trace { records })
    }

    /// The input streams `return_1..return_n` recorded in the trace.
    pub fn input_streams(&self, n: usize) -> Vec<TimedStreamPrefix<Frame>> {
        (0..n)
            .map(|k| self.records.iter().map(|r| r.returns[k].clone()).collect())
            .collect()
    }
}

/// Result of a simulation that did not abort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    pub trace: Trace,
    /// Only populated under [`CollisionPolicy::RecordAndContinue`].
    pub collisions: Vec<Collision>,
}

/// Activates the node in its own slots: `⟨s⟩` with `s = t mod cycle_length`
/// when `s` is scheduled, `⟨⟩` otherwise.
pub fn scheduler_tick(c: &NodeConfig, t: TimeIndex) -> Interval<u64> {
    match mod_slot(t, c.cycle_length) {
        Ok(s) if c.owns(s) => Interval::singleton(s),
        _ => Interval::empty(),
    }
}

/// Send half of the bus interface. Returns `(send, get)`.
///
/// `get` follows the activation even when the environment returned nothing.
pub fn send_tick(
    activation: &Interval<u64>,
    ret: &Interval<Frame>,
) -> (Interval<Frame>, Interval<u64>) {
    if activation.is_empty() {
        (Interval::empty(), Interval::empty())
    } else {
        (ret.clone(), activation.clone())
    }
}

/// Receive half of the bus interface: an inactive node stores what is on
/// the bus, an active node stores nothing.
pub fn receive_tick(activation: &Interval<u64>, recv: &Interval<Frame>) -> Interval<Frame> {
    if activation.is_empty() {
        recv.clone()
    } else {
        Interval::empty()
    }
}

/// Forwards the unique nonempty sender. `Err` carries the indices of all
/// nonempty senders when there is more than one.
pub fn cable_tick(sends: &[Interval<Frame>]) -> Result<Interval<Frame>, Vec<usize>> {
    let mut active = sends
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(k, _)| k);
    match (active.next(), active.next()) {
        (None, _) => Ok(Interval::empty()),
        (Some(k), None) => Ok(sends[k].clone()),
        (Some(a), Some(b)) => {
            let mut all = vec![a, b];
            all.extend(active);
            Err(all)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerTick {
    pub store: Interval<Frame>,
    pub send: Interval<Frame>,
    pub get: Interval<u64>,
    pub activation: Interval<u64>,
}

/// Scheduler composed with the bus interface for one node.
pub fn controller_tick(
    c: &NodeConfig,
    t: TimeIndex,
    ret: &Interval<Frame>,
    recv: &Interval<Frame>,
) -> ControllerTick {
    let activation = scheduler_tick(c, t);
    let (send, get) = send_tick(&activation, ret);
    let store = receive_tick(&activation, recv);
    ControllerTick {
        store,
        send,
        get,
        activation,
    }
}

fn check_nodes(cluster: &ClusterConfig) -> Result<(), (usize, String)> {
    for (node, c) in cluster.nodes().iter().enumerate() {
        if let Verdict::Violated(v) = validate_node(c) {
            return Err((node, v.detail));
        }
    }
    Ok(())
}

fn step(
    cluster: &ClusterConfig,
    t: TimeIndex,
    returns: Vec<Interval<Frame>>,
    policy: CollisionPolicy,
) -> (TickRecord, Option<Collision>) {
    let nodes = cluster.nodes();
    let activation: Vec<Interval<u64>> = nodes.iter().map(|c| scheduler_tick(c, t)).collect();
    let (send, get): (Vec<_>, Vec<_>) = activation
        .iter()
        .zip(&returns)
        .map(|(a, r)| send_tick(a, r))
        .unzip();
    let (recv, collision) = match cable_tick(&send) {
        Ok(recv) => (recv, None),
        Err(senders) => {
            let recv = match policy {
                CollisionPolicy::Abort => Interval::empty(),
                CollisionPolicy::RecordAndContinue => send[senders[0]].clone(),
            };
            (recv, Some(Collision { t, senders }))
        }
    };
    let store = activation.iter().map(|a| receive_tick(a, &recv)).collect();
    let record = TickRecord {
        t,
        activation,
        send,
        recv,
        store,
        get,
        returns,
    };
    (record, collision)
}

/// One synchronous tick of the whole architecture.
pub fn arch_tick(
    cluster: &ClusterConfig,
    t: TimeIndex,
    inputs: &TickInputs,
) -> Result<TickRecord, EngineError> {
    if inputs.returns.len() != cluster.len() {
        return Err(EngineError::Shape {
            expected: cluster.len(),
            found: inputs.returns.len(),
        });
    }
    check_nodes(cluster).map_err(|(node, detail)| EngineError::InvalidNode { node, detail })?;
    match step(cluster, t, inputs.returns.clone(), CollisionPolicy::Abort) {
        (_, Some(c)) => Err(EngineError::Collision(c)),
        (record, None) => Ok(record),
    }
}

/// Unrolls the architecture for `horizon` ticks, aborting on collision.
pub fn simulate(
    cluster: &ClusterConfig,
    inputs: &[TimedStreamPrefix<Frame>],
    horizon: u64,
) -> Result<Trace, SimError> {
    simulate_with(cluster, inputs, horizon, CollisionPolicy::Abort).map(|s| s.trace)
}

pub fn simulate_with(
    cluster: &ClusterConfig,
    inputs: &[TimedStreamPrefix<Frame>],
    horizon: u64,
    policy: CollisionPolicy,
) -> Result<Simulation, SimError> {
    if inputs.len() != cluster.len() {
        return Err(SimError::Shape {
            expected: cluster.len(),
            found: inputs.len(),
        });
    }
    if let Some((node, s)) = inputs
        .iter()
        .enumerate()
        .find(|(_, s)| s.horizon() < horizon)
    {
        return Err(SimError::InputHorizon {
            node,
            available: s.horizon(),
            needed: horizon,
        });
    }
    check_nodes(cluster).map_err(|(node, detail)| SimError::InvalidNode { node, detail })?;

    let mut records = Vec::with_capacity(horizon as usize);
    let mut collisions = Vec::new();
    for t in 0..horizon {
        let i = t as usize;
        let returns = inputs.iter().map(|s| s.intervals()[i].clone()).collect();
        let (record, collision) = step(cluster, t, returns, policy);
        if let Some(c) = collision {
            if policy == CollisionPolicy::Abort {
                return Err(SimError::Collision {
                    collision: c,
                    partial: Trace::new(records),
                });
            }
            collisions.push(c);
        }
        records.push(record);
    }
    Ok(Simulation {
        trace: Trace::new(records),
        collisions,
    })
}
