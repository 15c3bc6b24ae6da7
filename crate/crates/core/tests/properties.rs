//! Property-based invariants, cross-checked against the brute-force
//! oracles in `common` on randomly generated logs, automata, and nets.

mod common;

use std::collections::BTreeSet;

use common::{
    net_language_bruteforce, random_free_choice_workflow_net, random_ts,
    spectral_radius_charpoly, short_circuit_matrix,
};
use fcrepair_core::conformance::{entropy, language_equal, spectral_radius_power};
use fcrepair_core::event_log::{parse_traces_text, serialize_traces_text, EventLog, Trace};
use fcrepair_core::region::is_region;
use fcrepair_core::transition_system::build_prefix_tree;
use fcrepair_core::{minimal_ts, EventLabel};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Traces over a tiny alphabet, letting collisions and shared prefixes
/// occur often.
fn arb_log() -> impl Strategy<Value = EventLog> {
    let trace = proptest::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..6);
    proptest::collection::vec((trace, 1u64..4), 0..8).prop_map(|traces| {
        EventLog::from_traces(traces.into_iter().map(|(names, count)| {
            let trace: Trace = names
                .into_iter()
                .map(|n| EventLabel::new(n).unwrap())
                .collect();
            (trace, count)
        }))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_serialization_round_trips(log in arb_log()) {
        let text = serialize_traces_text(&log);
        let parsed = parse_traces_text(text.as_bytes()).unwrap();
        prop_assert_eq!(parsed, log);
    }

    #[test]
    fn top_k_filter_is_idempotent_and_shrinking(log in arb_log(), k in 0usize..6) {
        let once = log.filter_top_k(k);
        prop_assert_eq!(once.distinct_count(), k.min(log.distinct_count()));
        prop_assert_eq!(once.filter_top_k(k), once.clone());
        for (trace, count) in once.traces() {
            prop_assert!(log.contains(trace));
            prop_assert_eq!(count, log.traces().find(|(t, _)| *t == trace).unwrap().1);
        }
    }

    #[test]
    fn minimization_preserves_the_log_language(log in arb_log()) {
        let tree = build_prefix_tree(&log);
        let min = tree.minimize().unwrap();
        prop_assert!(min.num_states() <= tree.num_states());
        prop_assert!(language_equal(&tree, &min).unwrap());
        for (trace, _) in log.traces() {
            prop_assert!(min.accepts(trace));
        }
    }

    #[test]
    fn region_complement_swaps_enter_and_exit(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ts = random_ts(&mut rng, 8);
        let all: BTreeSet<usize> = (0..ts.num_states()).collect();
        // scan a few subsets; complements of regions must be regions with
        // the crossing directions flipped
        for mask in 0u32..(1 << ts.num_states().min(8)) {
            let subset: BTreeSet<usize> =
                all.iter().copied().filter(|s| mask >> s & 1 == 1).collect();
            if let Ok(region) = is_region(&ts, &subset).unwrap() {
                let complement: BTreeSet<usize> =
                    all.difference(&subset).copied().collect();
                let co = is_region(&ts, &complement).unwrap();
                let co = co.expect("complement of a region is a region");
                prop_assert_eq!(region.entering_events(), co.exiting_events());
                prop_assert_eq!(region.exiting_events(), co.entering_events());
            }
        }
    }

    #[test]
    fn reachability_graph_language_matches_brute_force(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sys = random_free_choice_workflow_net(&mut rng, 2);
        let rg = sys.reachability_graph(100_000).unwrap();
        let dfa = rg.ts.tau_closure(100_000).unwrap();
        prop_assert_eq!(dfa.language_bounded(6), net_language_bruteforce(&sys, 6));
    }

    #[test]
    fn entropy_is_minimization_invariant_and_oracle_checked(log in arb_log()) {
        let tree = build_prefix_tree(&log);
        if tree.finals().is_empty() {
            return Ok(()); // empty language: entropy undefined by design
        }
        let min = minimal_ts(&log);
        let h_tree = entropy(&tree).unwrap();
        let h_min = entropy(&min).unwrap();
        prop_assert!((h_tree - h_min).abs() < 1e-7, "{} vs {}", h_tree, h_min);

        let matrix = short_circuit_matrix(&min.trim());
        let rho = spectral_radius_charpoly(&matrix);
        prop_assert!((h_min - rho.max(1.0).ln()).abs() < 1e-6);
        let rho_power = spectral_radius_power(&matrix).unwrap();
        prop_assert!((rho - rho_power).abs() < 1e-6, "{} vs {}", rho, rho_power);
    }

    #[test]
    fn simulated_traces_replay_on_their_own_net(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sys = random_free_choice_workflow_net(&mut rng, 2);
        let log = fcrepair_core::simulate(&sys, 10, seed, 10_000).unwrap();
        for (trace, _) in log.traces() {
            prop_assert!(sys.accepts(trace, 100_000).unwrap());
        }
    }
}
