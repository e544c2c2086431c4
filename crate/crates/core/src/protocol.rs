//! Messages, frames and schedule configurations.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::verdict::Verdict;

pub const NODE_VALIDITY: &str = "NodeValidity";
pub const DISJOINT_SCHEDULES: &str = "DisjointSchedules";
pub const IDENTIC_CYCLE_LENGTH: &str = "IdenticCycleLength";

/// Application message. The payload is opaque and serialised as hex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub msg_id: u64,
    #[serde(with = "hex::serde")]
    pub ftc_data: Vec<u8>,
}

impl Message {
    pub fn new(msg_id: u64, ftc_data: impl Into<Vec<u8>>) -> Self {
        Message {
            msg_id,
            ftc_data: ftc_data.into(),
        }
    }
}

/// A bus frame: the slot it claims to belong to and its message payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub slot: u64,
    pub data: Vec<Message>,
}

impl Frame {
    pub fn new(slot: u64, data: Vec<Message>) -> Self {
        Frame { slot, data }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame(slot={}, msgs=[", self.slot)?;
        for (i, m) in self.data.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", m.msg_id, hex::encode(&m.ftc_data))?;
        }
        f.write_str("])")
    }
}

/// Schedule table of one node plus the length of the communication round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub schedule: Vec<u64>,
    pub cycle_length: u64,
}

impl NodeConfig {
    pub fn new(schedule: Vec<u64>, cycle_length: u64) -> Self {
        NodeConfig {
            schedule,
            cycle_length,
        }
    }

    pub fn owns(&self, slot: u64) -> bool {
        self.schedule.contains(&slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("a cluster needs at least one node")]
    EmptyCluster,
    #[error("slot {slot} is owned by both node {first} and node {second}")]
    NotDisjoint {
        slot: u64,
        first: usize,
        second: usize,
    },
}

/// The configurations `c_1..c_n` of all nodes on the bus.
///
/// Only `n >= 1` is enforced here; the cluster-level assumptions are checked
/// separately so that invalid clusters remain representable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawCluster")]
pub struct ClusterConfig {
    nodes: Vec<NodeConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCluster {
    nodes: Vec<NodeConfig>,
}

impl TryFrom<RawCluster> for ClusterConfig {
    type Error = ProtocolError;

    fn try_from(raw: RawCluster) -> Result<Self, Self::Error> {
        ClusterConfig::new(raw.nodes)
    }
}

impl ClusterConfig {
    pub fn new(nodes: Vec<NodeConfig>) -> Result<Self, ProtocolError> {
        if nodes.is_empty() {
            return Err(ProtocolError::EmptyCluster);
        }
        Ok(ClusterConfig { nodes })
    }

    pub fn nodes(&self) -> &[NodeConfig] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cluster serialisation is infallible")
    }

    /// Per-node validity followed by the two static cluster assumptions.
    pub fn static_verdicts(&self) -> Vec<(&'static str, Verdict)> {
        let validity = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, c)| match validate_node(c) {
                Verdict::Violated(mut v) => {
                    v.node = Some(i);
                    Verdict::Violated(v)
                }
                other => other,
            })
            .find(|v| !v.holds())
            .unwrap_or(Verdict::Holds);

        let disjoint = match shared_slot(&self.nodes) {
            None => Verdict::Holds,
            Some(s) => Verdict::static_failure(
                DISJOINT_SCHEDULES,
                Some(s.second),
                format!(
                    "slot {} is scheduled by node {} and node {}",
                    s.slot, s.first, s.second
                ),
            ),
        };

        let cycle = match cycle_length_mismatch(&self.nodes) {
            None => Verdict::Holds,
            Some(m) => Verdict::static_failure(
                IDENTIC_CYCLE_LENGTH,
                Some(m.second),
                format!(
                    "node {} has cycle length {} but node {} has {}",
                    m.first, m.first_length, m.second, m.second_length
                ),
            ),
        };

        vec![
            (NODE_VALIDITY, validity),
            (DISJOINT_SCHEDULES, disjoint),
            (IDENTIC_CYCLE_LENGTH, cycle),
        ]
    }

    /// All nodes valid, schedules disjoint, cycle lengths identical.
    pub fn satisfies_static_assumptions(&self) -> bool {
        self.static_verdicts().iter().all(|(_, v)| v.holds())
    }
}

/// Checks cycle length, slot reachability and duplicate entries of one node.
pub fn validate_node(c: &NodeConfig) -> Verdict {
    if c.cycle_length == 0 {
        return Verdict::static_failure(NODE_VALIDITY, None, "cycle length 0");
    }
    let mut seen = HashSet::new();
    for &slot in &c.schedule {
        // mod(t, cycle_length) never reaches such a slot.
        if slot >= c.cycle_length {
            return Verdict::static_failure(
                NODE_VALIDITY,
                None,
                format!("unreachable slot {slot} (cycle length {})", c.cycle_length),
            );
        }
        if !seen.insert(slot) {
            return Verdict::static_failure(NODE_VALIDITY, None, format!("duplicate slot {slot}"));
        }
    }
    Verdict::Holds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedSlot {
    pub slot: u64,
    pub first: usize,
    pub second: usize,
}

/// The lowest slot scheduled by two different nodes, if any.
pub fn shared_slot(cs: &[NodeConfig]) -> Option<SharedSlot> {
    let mut owners: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, c) in cs.iter().enumerate() {
        for &slot in &c.schedule {
            let entry = owners.entry(slot).or_default();
            if !entry.contains(&i) {
                entry.push(i);
            }
        }
    }
    owners
        .into_iter()
        .find(|(_, nodes)| nodes.len() > 1)
        .map(|(slot, nodes)| SharedSlot {
            slot,
            first: nodes[0],
            second: nodes[1],
        })
}

pub fn disjoint_schedules(cs: &[NodeConfig]) -> bool {
    shared_slot(cs).is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleMismatch {
    pub first: usize,
    pub first_length: u64,
    pub second: usize,
    pub second_length: u64,
}

pub fn cycle_length_mismatch(cs: &[NodeConfig]) -> Option<CycleMismatch> {
    let first = cs.first()?;
    cs.iter()
        .enumerate()
        .find(|(_, c)| c.cycle_length != first.cycle_length)
        .map(|(j, c)| CycleMismatch {
            first: 0,
            first_length: first.cycle_length,
            second: j,
            second_length: c.cycle_length,
        })
}

pub fn identic_cycle_length(cs: &[NodeConfig]) -> bool {
    cycle_length_mismatch(cs).is_none()
}

/// The node whose schedule contains `slot`.
pub fn owner_of_slot(cs: &[NodeConfig], slot: u64) -> Result<Option<usize>, ProtocolError> {
    if let Some(s) = shared_slot(cs) {
        return Err(ProtocolError::NotDisjoint {
            slot: s.slot,
            first: s.first,
            second: s.second,
        });
    }
    Ok(cs.iter().position(|c| c.owns(slot)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::mod_slot;
    use proptest::prelude::*;

    fn node(schedule: &[u64], l: u64) -> NodeConfig {
        NodeConfig::new(schedule.to_vec(), l)
    }

    #[test]
    fn validate_node_examples() {
        assert!(validate_node(&node(&[1], 3)).holds());
        let v = validate_node(&node(&[3], 3));
        assert!(v
            .violation()
            .unwrap()
            .detail
            .starts_with("unreachable slot 3"));
        assert!(validate_node(&node(&[], 1)).holds());
    }

    #[test]
    fn validate_node_rejects_duplicates_and_zero_length() {
        let dup = validate_node(&node(&[1, 1], 3));
        assert_eq!(dup.violation().unwrap().detail, "duplicate slot 1");
        assert!(!validate_node(&node(&[], 0)).holds());
    }

    #[test]
    fn disjoint_examples() {
        assert!(disjoint_schedules(&[node(&[0], 2), node(&[1], 2)]));
        assert!(!disjoint_schedules(&[node(&[0], 2), node(&[0], 2)]));
        assert!(disjoint_schedules(&[node(&[0, 1], 4)]));
    }

    #[test]
    fn cycle_length_examples() {
        assert!(identic_cycle_length(&[node(&[0], 2), node(&[1], 2)]));
        assert!(!identic_cycle_length(&[node(&[0], 2), node(&[1], 3)]));
        assert!(identic_cycle_length(&[node(&[], 7)]));
    }

    #[test]
    fn owner_examples() {
        let cs = [node(&[0], 2), node(&[1], 2)];
        assert_eq!(owner_of_slot(&cs, 1), Ok(Some(1)));
        assert_eq!(owner_of_slot(&cs, 5), Ok(None));
        assert_eq!(
            owner_of_slot(&[node(&[0], 2), node(&[0], 2)], 0),
            Err(ProtocolError::NotDisjoint {
                slot: 0,
                first: 0,
                second: 1
            })
        );
    }

    #[test]
    fn cluster_json_shape() {
        let c = ClusterConfig::from_json(
            r#"{"nodes":[{"schedule":[0],"cycle_length":2},{"schedule":[1],"cycle_length":2}]}"#,
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(
            c.to_json(),
            r#"{"nodes":[{"schedule":[0],"cycle_length":2},{"schedule":[1],"cycle_length":2}]}"#
        );
        assert!(ClusterConfig::from_json(r#"{"nodes":[]}"#).is_err());
        assert!(ClusterConfig::from_json(
            r#"{"nodes":[{"schedule":[0],"cycle_length":2,"prio":1}]}"#
        )
        .is_err());
        assert!(ClusterConfig::from_json(r#"{"nodes":[],"extra":1}"#).is_err());
    }

    #[test]
    fn frame_json_uses_hex_payload() {
        let f = Frame::new(3, vec![Message::new(7, vec![0xde, 0xad])]);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"slot":3,"data":[{"msg_id":7,"ftc_data":"dead"}]}"#);
        assert_eq!(serde_json::from_str::<Frame>(&s).unwrap(), f);
    }

    #[test]
    fn static_verdicts_name_the_shared_slot() {
        let c = ClusterConfig::new(vec![node(&[1], 3), node(&[0, 1], 3)]).unwrap();
        let v = c.static_verdicts();
        assert!(v[0].1.holds());
        let detail = &v[1].1.violation().unwrap().detail;
        assert_eq!(detail, "slot 1 is scheduled by node 0 and node 1");
        assert!(v[2].1.holds());
    }

    fn arb_nodes() -> impl Strategy<Value = Vec<NodeConfig>> {
        prop::collection::vec(
            (prop::collection::vec(0u64..6, 0..4), 1u64..6)
                .prop_map(|(s, l)| NodeConfig::new(s, l)),
            1..5,
        )
    }

    proptest! {
        #[test]
        fn cluster_predicates_permutation_invariant(cs in arb_nodes(), rot in 0usize..5) {
            let mut p = cs.clone();
            p.rotate_left(rot % cs.len());
            p.reverse();
            prop_assert_eq!(disjoint_schedules(&cs), disjoint_schedules(&p));
            prop_assert_eq!(identic_cycle_length(&cs), identic_cycle_length(&p));
        }

        #[test]
        fn owner_is_partial_function(cs in arb_nodes()) {
            prop_assume!(disjoint_schedules(&cs));
            for slot in 0..6u64 {
                let owners = cs.iter().filter(|c| c.schedule.contains(&slot)).count();
                prop_assert!(owners <= 1);
                let o = owner_of_slot(&cs, slot).unwrap();
                prop_assert_eq!(o.is_some(), owners == 1);
            }
        }

        #[test]
        fn valid_slots_are_reached_each_round(s in prop::collection::vec(0u64..8, 0..5), l in 1u64..8) {
            let c = NodeConfig::new(s, l);
            if validate_node(&c).holds() {
                for &slot in &c.schedule {
                    prop_assert!((0..l).any(|t| mod_slot(t, l).unwrap() == slot));
                }
            }
        }
    }
}
