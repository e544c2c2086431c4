//! Shared helpers for integration tests, including a brute-force oracle
//! that transcribes each predicate formula literally.

#![allow(dead_code, clippy::needless_range_loop)]

use flexray_core::engine::{simulate, TickRecord, Trace};
use flexray_core::protocol::{ClusterConfig, Frame, Message, NodeConfig};
use flexray_core::refinement::{gen_inputs, gen_valid_cluster};
use flexray_core::stream::{Interval, TimedStreamPrefix};
use flexray_core::verdict::Verdict;
use rand::Rng;

/// `(t, node)` of the first violation, `None` when the formula holds.
pub type OracleResult = Option<(u64, Option<usize>)>;

pub mod oracle {
    use super::*;

    /// ∀ i ≠ j, x ∈ rng schedule(c_i), y ∈ rng schedule(c_j): x ≠ y
    pub fn disjoint(cs: &[NodeConfig]) -> bool {
        for i in 0..cs.len() {
            for j in 0..cs.len() {
                if i == j {
                    continue;
                }
                for x in &cs[i].schedule {
                    for y in &cs[j].schedule {
                        if x == y {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// ∀ i, j: cycleLength(c_i) = cycleLength(c_j)
    pub fn identic(cs: &[NodeConfig]) -> bool {
        cs.iter()
            .all(|a| cs.iter().all(|b| a.cycle_length == b.cycle_length))
    }

    /// ∀ t, k: let s = t mod cycleLength(c_k) in s ∈ schedule(c_k) →
    ///   get_k(t) = ⟨s⟩ ∧ ∀ j ≠ k: store_j(t) = return_k(t)
    pub fn frame_transmission(trace: &Trace, cs: &[NodeConfig]) -> OracleResult {
        let n = cs.len();
        for r in trace.records() {
            let t = r.t;
            for k in 0..n {
                let s = t % cs[k].cycle_length;
                if !cs[k].schedule.contains(&s) {
                    continue;
                }
                if r.get[k].items() != [s] {
                    return Some((t, Some(k)));
                }
                for j in 0..n {
                    if j != k && r.store[j] != r.returns[k] {
                        return Some((t, Some(j)));
                    }
                }
            }
        }
        None
    }

    /// ∀ t: (∀ k: send_k(t) ≠ ⟨⟩ → recv(t) = send_k(t)) ∧
    ///      ((∀ k: send_k(t) = ⟨⟩) → recv(t) = ⟨⟩)
    pub fn broadcast(trace: &Trace) -> OracleResult {
        for r in trace.records() {
            for k in 0..r.send.len() {
                if !r.send[k].is_empty() && r.recv != r.send[k] {
                    return Some((r.t, Some(k)));
                }
            }
            if r.send.iter().all(|s| s.is_empty()) && !r.recv.is_empty() {
                return Some((r.t, None));
            }
        }
        None
    }

    /// ∀ t: activation(t) ≠ ⟨⟩ → get(t) = activation(t) ∧ send(t) = return(t),
    /// else get(t) = ⟨⟩ ∧ send(t) = ⟨⟩
    pub fn send(trace: &Trace, k: usize) -> OracleResult {
        for r in trace.records() {
            let ok = if !r.activation[k].is_empty() {
                r.get[k] == r.activation[k] && r.send[k] == r.returns[k]
            } else {
                r.get[k].is_empty() && r.send[k].is_empty()
            };
            if !ok {
                return Some((r.t, Some(k)));
            }
        }
        None
    }

    /// ∀ t: activation(t) = ⟨⟩ → store(t) = recv(t), else store(t) = ⟨⟩
    pub fn receive(trace: &Trace, k: usize) -> OracleResult {
        for r in trace.records() {
            let ok = if r.activation[k].is_empty() {
                r.store[k] == r.recv
            } else {
                r.store[k].is_empty()
            };
            if !ok {
                return Some((r.t, Some(k)));
            }
        }
        None
    }

    /// ∀ i, t: |get_i(t)| ≤ 1 ∧ |store_i(t)| ≤ 1
    pub fn msg_bounds(trace: &Trace) -> OracleResult {
        for r in trace.records() {
            for i in 0..r.get.len() {
                if r.get[i].len() > 1 || r.store[i].len() > 1 {
                    return Some((r.t, Some(i)));
                }
            }
        }
        None
    }
}

/// Projects a verdict onto what the oracle reports.
pub fn coords(v: &Verdict) -> OracleResult {
    v.violation()
        .map(|x| (x.t.expect("trace violation has t"), x.node))
}

pub fn frame(tag: u64) -> Frame {
    Frame::new(tag, vec![Message::new(tag, vec![tag as u8])])
}

pub fn node(schedule: &[u64], cycle: u64) -> NodeConfig {
    NodeConfig::new(schedule.to_vec(), cycle)
}

pub fn cluster(nodes: Vec<NodeConfig>) -> ClusterConfig {
    ClusterConfig::new(nodes).unwrap()
}

pub fn constant(iv: &Interval<Frame>, horizon: usize) -> TimedStreamPrefix<Frame> {
    TimedStreamPrefix::new(vec![iv.clone(); horizon])
}

/// Two-element frame universe used for corruptions.
fn random_frames<R: Rng>(rng: &mut R) -> Interval<Frame> {
    match rng.gen_range(0..5) {
        0 | 1 => Interval::empty(),
        2 => Interval::singleton(frame(0)),
        3 => Interval::singleton(frame(1)),
        _ => Interval::from_items(vec![frame(0), frame(1)]),
    }
}

fn random_slots<R: Rng>(rng: &mut R) -> Interval<u64> {
    match rng.gen_range(0..5) {
        0 | 1 => Interval::empty(),
        2 => Interval::singleton(0),
        3 => Interval::singleton(rng.gen_range(0..3)),
        _ => Interval::from_items(vec![0, 1]),
    }
}

/// Overwrites one channel value of one record with a random value.
pub fn corrupt<R: Rng>(rng: &mut R, record: &mut TickRecord) {
    let n = record.node_count();
    let k = rng.gen_range(0..n);
    match rng.gen_range(0..6) {
        0 => record.activation[k] = random_slots(rng),
        1 => record.get[k] = random_slots(rng),
        2 => record.send[k] = random_frames(rng),
        3 => record.store[k] = random_frames(rng),
        4 => record.returns[k] = random_frames(rng),
        _ => record.recv = random_frames(rng),
    }
}

/// A trace over `cluster`: simulated from random inputs when the cluster
/// admits it, then corrupted a random number of times.
pub fn random_trace<R: Rng>(rng: &mut R, cluster: &ClusterConfig, horizon: u64) -> Trace {
    let inputs = gen_inputs(rng, cluster, horizon);
    let mut trace = simulate(cluster, &inputs, horizon).unwrap_or_else(|_| {
        // Colliding cluster: synthesise a trace of the right shape.
        let n = cluster.len();
        Trace::new(
            (0..horizon)
                .map(|t| TickRecord {
                    t,
                    activation: (0..n).map(|_| random_slots(rng)).collect(),
                    send: (0..n).map(|_| random_frames(rng)).collect(),
                    recv: random_frames(rng),
                    store: (0..n).map(|_| random_frames(rng)).collect(),
                    get: (0..n).map(|_| random_slots(rng)).collect(),
                    returns: (0..n).map(|_| random_frames(rng)).collect(),
                })
                .collect(),
        )
    });
    if horizon > 0 {
        for _ in 0..rng.gen_range(0..3) {
            let t = rng.gen_range(0..horizon) as usize;
            corrupt(rng, &mut trace.records_mut()[t]);
        }
    }
    trace
}

/// Mostly valid clusters, sometimes with a stolen slot or a stretched cycle.
pub fn random_cluster<R: Rng>(rng: &mut R, max_nodes: usize, max_cycle: u64) -> ClusterConfig {
    let c = gen_valid_cluster(rng, max_nodes, max_cycle);
    let mut nodes = c.nodes().to_vec();
    match rng.gen_range(0..10) {
        0 if nodes.len() > 1 && !nodes[0].schedule.is_empty() => {
            let s = nodes[0].schedule[0];
            nodes[1].schedule.push(s);
        }
        1 if nodes.len() > 1 => nodes[1].cycle_length += 1,
        _ => {}
    }
    cluster(nodes)
}
