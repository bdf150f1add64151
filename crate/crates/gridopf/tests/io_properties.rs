//! Property tests for the solution file formats: round-trip identity on
//! randomized states and byte-determinism of the writers.

use gridopf::acpf::OperatingPoint;
use gridopf::io::{
    read_base_solution, read_contingency_solutions, write_base_solution,
    write_contingency_solutions, ContingencyBlock,
};
use gridopf::model::Network;
use gridopf::samples;
use proptest::prelude::*;

fn state_strategy(net: &Network) -> impl Strategy<Value = OperatingPoint> {
    let n = net.buses().len();
    let g = net.generators().len();
    let ref_idx = net.ref_bus_index();
    (
        prop::collection::vec(0.5f64..1.5, n),
        prop::collection::vec(-1.0f64..1.0, n),
        prop::collection::vec(-0.3f64..0.3, n),
        prop::collection::vec(-2.0f64..2.0, g),
        prop::collection::vec(-2.0f64..2.0, g),
    )
        .prop_map(move |(v, mut theta, b, p_g, q_g)| {
            theta[ref_idx] = 0.0;
            OperatingPoint { v, theta, b, p_g, q_g }
        })
}

proptest! {
    #[test]
    fn base_solution_round_trip_is_identity(state in state_strategy(&samples::five_bus())) {
        let net = samples::five_bus();
        let text = write_base_solution(&net, &state).unwrap();
        let back = read_base_solution(&net, &text).unwrap();
        prop_assert_eq!(back, state);
    }

    #[test]
    fn writers_are_deterministic(state in state_strategy(&samples::five_bus())) {
        let net = samples::five_bus();
        let a = write_base_solution(&net, &state).unwrap();
        let b = write_base_solution(&net, &state).unwrap();
        prop_assert_eq!(a.into_bytes(), b.into_bytes());
    }

    #[test]
    fn contingency_round_trip_is_identity(
        states in prop::collection::vec(state_strategy(&samples::three_gen_ring()), 4),
        deltas in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let net = samples::three_gen_ring();
        let blocks: Vec<ContingencyBlock> = net
            .contingencies()
            .iter()
            .zip(states.into_iter().zip(deltas))
            .map(|(k, (point, delta))| ContingencyBlock {
                label: k.id.clone(),
                delta,
                point,
            })
            .collect();
        let text = write_contingency_solutions(&net, &blocks).unwrap();
        let back = read_contingency_solutions(&net, &text).unwrap();
        prop_assert_eq!(back, blocks);
    }
}
