mod common;

use common::{frame, oracle};
use flexray_core::engine::{simulate, simulate_with, CollisionPolicy};
use flexray_core::monitor::{check_bus_conservation, check_msg_bounds, check_self_exclusion};
use flexray_core::protocol::{ClusterConfig, Frame, NodeConfig};
use flexray_core::refinement::{
    gen_inputs, gen_inputs_styled, gen_valid_cluster, trial_rng, FrameStyle,
};
use flexray_core::stream::{msg_bound, Interval, TimedStreamPrefix};
use proptest::prelude::*;

/// Valid cluster: every slot assigned to one node or none.
fn arb_cluster() -> impl Strategy<Value = ClusterConfig> {
    (1usize..5, 1u64..8).prop_flat_map(|(n, cycle)| {
        prop::collection::vec(0..=n, cycle as usize).prop_map(move |owners| {
            let mut schedules = vec![Vec::new(); n];
            for (slot, o) in owners.into_iter().enumerate() {
                if o < n {
                    schedules[o].push(slot as u64);
                }
            }
            ClusterConfig::new(
                schedules
                    .into_iter()
                    .map(|s| NodeConfig::new(s, cycle))
                    .collect(),
            )
            .unwrap()
        })
    })
}

fn arb_interval() -> impl Strategy<Value = Interval<Frame>> {
    prop_oneof![
        Just(Interval::empty()),
        (0u64..3).prop_map(|k| Interval::singleton(frame(k)))
    ]
}

fn arb_inputs(n: usize, horizon: usize) -> impl Strategy<Value = Vec<TimedStreamPrefix<Frame>>> {
    prop::collection::vec(
        prop::collection::vec(arb_interval(), horizon).prop_map(TimedStreamPrefix::new),
        n,
    )
}

fn arb_case() -> impl Strategy<Value = (ClusterConfig, Vec<TimedStreamPrefix<Frame>>)> {
    (arb_cluster(), 0usize..24).prop_flat_map(|(c, h)| {
        let n = c.len();
        (Just(c), arb_inputs(n, h))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn valid_assumptions_never_collide((cluster, inputs) in arb_case()) {
        let h = inputs[0].horizon();
        let trace = simulate(&cluster, &inputs, h);
        prop_assert!(trace.is_ok());
    }

    #[test]
    fn simulate_is_deterministic((cluster, inputs) in arb_case()) {
        let h = inputs[0].horizon();
        prop_assert_eq!(simulate(&cluster, &inputs, h), simulate(&cluster, &inputs, h));
    }

    #[test]
    fn self_exclusion_and_conservation((cluster, inputs) in arb_case()) {
        let trace = simulate(&cluster, &inputs, inputs[0].horizon()).unwrap();
        prop_assert!(check_self_exclusion(&trace).unwrap().holds());
        prop_assert!(check_bus_conservation(&trace).unwrap().holds());
    }

    #[test]
    fn msg_bound_propagates((cluster, inputs) in arb_case()) {
        prop_assert!(inputs.iter().all(|s| msg_bound(1, s)));
        let trace = simulate(&cluster, &inputs, inputs[0].horizon()).unwrap();
        prop_assert!(check_msg_bounds(&trace).unwrap().holds());
        let n = cluster.len();
        for r in trace.records() {
            prop_assert!(r.recv.len() <= 1);
            for k in 0..n {
                prop_assert!(r.send[k].len() <= 1 && r.activation[k].len() <= 1);
            }
        }
    }

    #[test]
    fn frame_transmission_oracle_holds((cluster, inputs) in arb_case()) {
        let trace = simulate(&cluster, &inputs, inputs[0].horizon()).unwrap();
        prop_assert_eq!(oracle::frame_transmission(&trace, cluster.nodes()), None);
        prop_assert_eq!(oracle::broadcast(&trace), None);
    }

    /// Inputs periodic in the cycle length give a trace periodic in it.
    #[test]
    fn periodic_inputs_give_periodic_trace(
        cluster in arb_cluster(),
        seed in any::<u64>(),
    ) {
        let cycle = cluster.nodes()[0].cycle_length as usize;
        let round = gen_inputs(&mut trial_rng(seed, 0), &cluster, cycle as u64);
        let inputs: Vec<_> = round
            .iter()
            .map(|s| (0..3 * cycle).map(|t| s.intervals()[t % cycle].clone()).collect())
            .collect();
        let trace = simulate(&cluster, &inputs, 3 * cycle as u64).unwrap();
        let rs = trace.records();
        for t in 0..2 * cycle {
            let mut later = rs[t + cycle].clone();
            later.t = rs[t].t;
            prop_assert_eq!(&rs[t], &later);
        }
    }

    /// The slot field of frames never influences the channel structure.
    #[test]
    fn slot_field_is_not_inspected(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 0);
        let cluster = gen_valid_cluster(&mut rng, 4, 6);
        let inputs = gen_inputs_styled(&mut rng, &cluster, 30, FrameStyle::Adversarial);
        let renumbered: Vec<TimedStreamPrefix<Frame>> = inputs
            .iter()
            .map(|s| {
                s.intervals()
                    .iter()
                    .map(|iv| iv.iter().map(|f| Frame::new(f.slot + 1000, f.data.clone())).collect())
                    .collect()
            })
            .collect();
        let a = simulate(&cluster, &inputs, 30).unwrap();
        let b = simulate(&cluster, &renumbered, 30).unwrap();
        for (x, y) in a.records().iter().zip(b.records()) {
            prop_assert_eq!(&x.activation, &y.activation);
            prop_assert_eq!(&x.get, &y.get);
            prop_assert_eq!(x.recv.len(), y.recv.len());
            prop_assert_eq!(
                x.store.iter().map(Interval::len).collect::<Vec<_>>(),
                y.store.iter().map(Interval::len).collect::<Vec<_>>()
            );
        }
    }
}

#[test]
fn continue_mode_only_differs_on_collisions() {
    let mut rng = trial_rng(11, 0);
    for _ in 0..200 {
        let cluster = gen_valid_cluster(&mut rng, 4, 6);
        let inputs = gen_inputs(&mut rng, &cluster, 20);
        let strict = simulate(&cluster, &inputs, 20).unwrap();
        let lenient =
            simulate_with(&cluster, &inputs, 20, CollisionPolicy::RecordAndContinue).unwrap();
        assert!(lenient.collisions.is_empty());
        assert_eq!(strict, lenient.trace);
    }
}
