//! Predicate monitors over closed traces.
//!
//! Each monitor scans ticks in increasing order and reports the first
//! violation it meets, so the reported `t` is always the minimal one.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::Trace;
use crate::protocol::{disjoint_schedules, identic_cycle_length, ClusterConfig};
use crate::stream::{Interval, TimeIndex};
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("trace is shaped for {found} nodes, cluster has {expected}")]
    Shape { expected: usize, found: usize },
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
}

fn check_shape(trace: &Trace, n: usize) -> Result<(), MonitorError> {
    match trace.records().iter().find(|r| !r.is_well_shaped(n)) {
        Some(r) => Err(MonitorError::Shape {
            expected: n,
            found: r.node_count(),
        }),
        None => Ok(()),
    }
}

fn trace_nodes(trace: &Trace) -> Result<usize, MonitorError> {
    let n = trace.node_count().unwrap_or(0);
    check_shape(trace, n)?;
    Ok(n)
}

fn show<T: fmt::Debug>(iv: &Interval<T>) -> String {
    format!("{:?}", iv.items())
}

/// Only the slot owner may send in its slot: the owner `k` gets `⟨s⟩` and
/// every other node stores exactly what `k` returned.
///
/// Refused unless the schedules are disjoint and cycle lengths agree.
pub fn check_frame_transmission(
    trace: &Trace,
    cluster: &ClusterConfig,
) -> Result<Verdict, MonitorError> {
    const NAME: &str = "FrameTransmission";
    let nodes = cluster.nodes();
    check_shape(trace, nodes.len())?;
    if !disjoint_schedules(nodes) {
        return Ok(Verdict::Refused("schedules are not disjoint".into()));
    }
    if !identic_cycle_length(nodes) {
        return Ok(Verdict::Refused("cycle lengths differ".into()));
    }
    let cycle = nodes[0].cycle_length;
    if cycle == 0 {
        return Ok(Verdict::Refused("cycle length 0".into()));
    }

    // Slots at or beyond the cycle length are never reached.
    let mut owner = vec![None; cycle as usize];
    for (k, c) in nodes.iter().enumerate() {
        for &s in c.schedule.iter().filter(|&&s| s < cycle) {
            owner[s as usize] = Some(k);
        }
    }

    for r in trace.records() {
        let s = r.t % cycle;
        let Some(k) = owner[s as usize] else { continue };
        if r.get[k] != Interval::singleton(s) {
            return Ok(Verdict::at(
                NAME,
                r.t,
                Some(k),
                format!("get_{k} expected [{s}], found {}", show(&r.get[k])),
            ));
        }
        let sent = &r.returns[k];
        if let Some(j) = (0..nodes.len()).find(|&j| j != k && &r.store[j] != sent) {
            return Ok(Verdict::at(
                NAME,
                r.t,
                Some(j),
                format!(
                    "store_{j} expected return_{k} = {}, found {}",
                    show(sent),
                    show(&r.store[j])
                ),
            ));
        }
    }
    Ok(Verdict::Holds)
}

/// Every nonempty sender is what appears on the bus; an idle bus carries
/// nothing.
pub fn check_broadcast(trace: &Trace) -> Result<Verdict, MonitorError> {
    const NAME: &str = "Broadcast";
    trace_nodes(trace)?;
    for r in trace.records() {
        let mut any = false;
        for (k, s) in r.send.iter().enumerate() {
            if s.is_empty() {
                continue;
            }
            any = true;
            if *s != r.recv {
                return Ok(Verdict::at(
                    NAME,
                    r.t,
                    Some(k),
                    format!(
                        "recv expected send_{k} = {}, found {}",
                        show(s),
                        show(&r.recv)
                    ),
                ));
            }
        }
        if !any && !r.recv.is_empty() {
            return Ok(Verdict::at(
                NAME,
                r.t,
                None,
                format!("bus idle but recv = {}", show(&r.recv)),
            ));
        }
    }
    Ok(Verdict::Holds)
}

fn node_in_range(trace: &Trace, node: usize) -> Result<(), MonitorError> {
    let n = trace_nodes(trace)?;
    if !trace.is_empty() && node >= n {
        return Err(MonitorError::NodeOutOfRange { node, n });
    }
    Ok(())
}

/// Send for one node, including the else-case (inactive node is silent).
pub fn check_send(trace: &Trace, node: usize) -> Result<Verdict, MonitorError> {
    const NAME: &str = "Send";
    node_in_range(trace, node)?;
    for r in trace.records() {
        let (act, get, send, ret) = (
            &r.activation[node],
            &r.get[node],
            &r.send[node],
            &r.returns[node],
        );
        let detail = if !act.is_empty() {
            if get != act {
                Some(format!("get expected {}, found {}", show(act), show(get)))
            } else if send != ret {
                Some(format!(
                    "send expected return {}, found {}",
                    show(ret),
                    show(send)
                ))
            } else {
                None
            }
        } else if !get.is_empty() || !send.is_empty() {
            Some(format!(
                "inactive node emitted get {} send {}",
                show(get),
                show(send)
            ))
        } else {
            None
        };
        if let Some(d) = detail {
            return Ok(Verdict::at(NAME, r.t, Some(node), d));
        }
    }
    Ok(Verdict::Holds)
}

/// Receive for one node, including the else-case (active node stores nothing).
pub fn check_receive(trace: &Trace, node: usize) -> Result<Verdict, MonitorError> {
    const NAME: &str = "Receive";
    node_in_range(trace, node)?;
    for r in trace.records() {
        let (act, store) = (&r.activation[node], &r.store[node]);
        let detail = if act.is_empty() {
            (*store != r.recv).then(|| {
                format!(
                    "store expected recv {}, found {}",
                    show(&r.recv),
                    show(store)
                )
            })
        } else {
            (!store.is_empty()).then(|| format!("active node stored {}", show(store)))
        };
        if let Some(d) = detail {
            return Ok(Verdict::at(NAME, r.t, Some(node), d));
        }
    }
    Ok(Verdict::Holds)
}

/// At most one message per tick on every `get_i` and `store_i`.
pub fn check_msg_bounds(trace: &Trace) -> Result<Verdict, MonitorError> {
    const NAME: &str = "MsgBounds";
    trace_nodes(trace)?;
    for r in trace.records() {
        for i in 0..r.node_count() {
            if r.get[i].len() > 1 {
                return Ok(Verdict::at(
                    NAME,
                    r.t,
                    Some(i),
                    format!("get_{i} carries {} messages", r.get[i].len()),
                ));
            }
            if r.store[i].len() > 1 {
                return Ok(Verdict::at(
                    NAME,
                    r.t,
                    Some(i),
                    format!("store_{i} carries {} messages", r.store[i].len()),
                ));
            }
        }
    }
    Ok(Verdict::Holds)
}

/// An active node never stores in the same tick.
pub fn check_self_exclusion(trace: &Trace) -> Result<Verdict, MonitorError> {
    const NAME: &str = "SelfExclusion";
    trace_nodes(trace)?;
    for r in trace.records() {
        if let Some(k) =
            (0..r.node_count()).find(|&k| !r.activation[k].is_empty() && !r.store[k].is_empty())
        {
            return Ok(Verdict::at(
                NAME,
                r.t,
                Some(k),
                format!("active node stored {}", show(&r.store[k])),
            ));
        }
    }
    Ok(Verdict::Holds)
}

/// The bus is either idle or carries exactly one node's send.
pub fn check_bus_conservation(trace: &Trace) -> Result<Verdict, MonitorError> {
    const NAME: &str = "BusConservation";
    trace_nodes(trace)?;
    for r in trace.records() {
        if r.recv.is_empty() {
            continue;
        }
        let matching = r.send.iter().filter(|s| **s == r.recv).count();
        if matching != 1 {
            return Ok(Verdict::at(
                NAME,
                r.t,
                None,
                format!("recv {} equals {matching} sends", show(&r.recv)),
            ));
        }
    }
    Ok(Verdict::Holds)
}

fn earliest(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    verdicts
        .into_iter()
        .filter(|v| !v.holds())
        .min_by_key(|v| v.violation().and_then(|x| x.t).unwrap_or(TimeIndex::MAX))
        .unwrap_or(Verdict::Holds)
}

/// Monitors addressable by name from the command line and the C API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    FrameTransmission,
    Broadcast,
    Send,
    Receive,
    MsgBounds,
    SelfExclusion,
    BusConservation,
}

impl Predicate {
    pub const ALL: [Predicate; 7] = [
        Predicate::FrameTransmission,
        Predicate::Broadcast,
        Predicate::Send,
        Predicate::Receive,
        Predicate::MsgBounds,
        Predicate::SelfExclusion,
        Predicate::BusConservation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::FrameTransmission => "frame_transmission",
            Predicate::Broadcast => "broadcast",
            Predicate::Send => "send",
            Predicate::Receive => "receive",
            Predicate::MsgBounds => "msg_bounds",
            Predicate::SelfExclusion => "self_exclusion",
            Predicate::BusConservation => "bus_conservation",
        }
    }

    /// `Send` and `Receive` are checked for every node; the earliest
    /// violation wins.
    pub fn evaluate(self, trace: &Trace, cluster: &ClusterConfig) -> Result<Verdict, MonitorError> {
        check_shape(trace, cluster.len())?;
        let n = cluster.len();
        match self {
            Predicate::FrameTransmission => check_frame_transmission(trace, cluster),
            Predicate::Broadcast => check_broadcast(trace),
            Predicate::Send => Ok(earliest(
                (0..n)
                    .map(|k| check_send(trace, k))
                    .collect::<Result<Vec<_>, _>>()?,
            )),
            Predicate::Receive => Ok(earliest(
                (0..n)
                    .map(|k| check_receive(trace, k))
                    .collect::<Result<Vec<_>, _>>()?,
            )),
            Predicate::MsgBounds => check_msg_bounds(trace),
            Predicate::SelfExclusion => check_self_exclusion(trace),
            Predicate::BusConservation => check_bus_conservation(trace),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Predicate {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_lowercase();
        Predicate::ALL
            .into_iter()
            .find(|p| p.name().replace('_', "") == key)
            .ok_or_else(|| MonitorError::UnknownPredicate(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::protocol::{Frame, Message, NodeConfig};
    use crate::stream::TimedStreamPrefix;

    fn frame(tag: u64) -> Frame {
        Frame::new(tag, vec![Message::new(tag, vec![])])
    }

    fn cluster() -> ClusterConfig {
        ClusterConfig::new(vec![
            NodeConfig::new(vec![0], 2),
            NodeConfig::new(vec![1], 2),
        ])
        .unwrap()
    }

    fn example_trace() -> Trace {
        let f = Interval::singleton(frame(1));
        let g = Interval::singleton(frame(2));
        let inputs = vec![
            TimedStreamPrefix::new(vec![f.clone(), f]),
            TimedStreamPrefix::new(vec![g.clone(), g]),
        ];
        simulate(&cluster(), &inputs, 2).unwrap()
    }

    #[test]
    fn frame_transmission_examples() {
        let trace = example_trace();
        assert!(check_frame_transmission(&trace, &cluster())
            .unwrap()
            .holds());

        let mut bad = trace.clone();
        bad.records_mut()[0].store[1] = Interval::empty();
        let v = check_frame_transmission(&bad, &cluster()).unwrap();
        let violation = v.violation().unwrap();
        assert_eq!((violation.t, violation.node), (Some(0), Some(1)));

        assert!(check_frame_transmission(&Trace::default(), &cluster())
            .unwrap()
            .holds());
    }

    #[test]
    fn frame_transmission_refuses_bad_clusters() {
        let shared = ClusterConfig::new(vec![
            NodeConfig::new(vec![0], 2),
            NodeConfig::new(vec![0], 2),
        ])
        .unwrap();
        assert!(check_frame_transmission(&example_trace(), &shared)
            .unwrap()
            .is_refused());
        let mixed = ClusterConfig::new(vec![
            NodeConfig::new(vec![0], 2),
            NodeConfig::new(vec![1], 3),
        ])
        .unwrap();
        assert!(check_frame_transmission(&example_trace(), &mixed)
            .unwrap()
            .is_refused());
        let single = ClusterConfig::new(vec![NodeConfig::new(vec![0], 2)]).unwrap();
        assert_eq!(
            check_frame_transmission(&example_trace(), &single),
            Err(MonitorError::Shape {
                expected: 1,
                found: 2
            })
        );
    }

    #[test]
    fn broadcast_examples() {
        assert!(check_broadcast(&example_trace()).unwrap().holds());
        let mut bad = example_trace();
        bad.records_mut()[0].recv = Interval::empty();
        let v = check_broadcast(&bad).unwrap();
        assert_eq!(v.violation().unwrap().t, Some(0));

        let mut idle = example_trace();
        for r in idle.records_mut() {
            r.send = vec![Interval::empty(); 2];
            r.recv = Interval::empty();
        }
        assert!(check_broadcast(&idle).unwrap().holds());
        idle.records_mut()[1].recv = Interval::singleton(frame(9));
        assert_eq!(
            check_broadcast(&idle).unwrap().violation().unwrap().t,
            Some(1)
        );
    }

    #[test]
    fn send_receive_examples() {
        let trace = example_trace();
        for k in 0..2 {
            assert!(check_send(&trace, k).unwrap().holds());
            assert!(check_receive(&trace, k).unwrap().holds());
        }
        // node 1 is inactive at t=0 but sends
        let mut bad = trace.clone();
        bad.records_mut()[0].send[1] = Interval::singleton(frame(2));
        assert_eq!(check_send(&bad, 1).unwrap().violation().unwrap().t, Some(0));

        // node 0 is active at t=0 but stores
        let mut bad = trace.clone();
        bad.records_mut()[0].store[0] = Interval::singleton(frame(1));
        assert_eq!(
            check_receive(&bad, 0).unwrap().violation().unwrap().t,
            Some(0)
        );

        assert!(check_send(&Trace::default(), 0).unwrap().holds());
        assert_eq!(
            check_send(&trace, 2),
            Err(MonitorError::NodeOutOfRange { node: 2, n: 2 })
        );
    }

    #[test]
    fn msg_bound_examples() {
        assert!(check_msg_bounds(&example_trace()).unwrap().holds());
        let mut bad = example_trace();
        bad.records_mut()[0].store[0] = Interval::from_items(vec![frame(1), frame(2)]);
        let v = check_msg_bounds(&bad).unwrap();
        assert_eq!(v.violation().unwrap().node, Some(0));
        assert!(check_msg_bounds(&Trace::default()).unwrap().holds());
    }

    #[test]
    fn invariants_hold_on_generated_trace() {
        assert!(check_self_exclusion(&example_trace()).unwrap().holds());
        assert!(check_bus_conservation(&example_trace()).unwrap().holds());
    }

    #[test]
    fn predicate_names_parse() {
        for p in Predicate::ALL {
            assert_eq!(p.name().parse::<Predicate>().unwrap(), p);
        }
        assert_eq!(
            "FrameTransmission".parse::<Predicate>().unwrap(),
            Predicate::FrameTransmission
        );
        assert!("liveness".parse::<Predicate>().is_err());
    }

    #[test]
    fn earliest_violation_across_nodes() {
        let mut bad = example_trace();
        bad.records_mut()[1].send[0] = Interval::singleton(frame(5));
        bad.records_mut()[0].get[1] = Interval::singleton(0);
        let v = Predicate::Send.evaluate(&bad, &cluster()).unwrap();
        let x = v.violation().unwrap();
        assert_eq!((x.t, x.node), (Some(0), Some(1)));
    }
}
