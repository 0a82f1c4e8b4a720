//! Environment invariants checked through the public API.

use hetnet_core::env::{clamp_action, decode_action, EnvConfig, HetNetEnv};
use hetnet_core::topology::ScenarioKind;
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = ScenarioKind> {
    prop::sample::select(ScenarioKind::ALL.to_vec())
}

fn env(kind: ScenarioKind, n_users: usize, seed: u64) -> (HetNetEnv, Vec<f64>) {
    let mut env = HetNetEnv::new(EnvConfig::for_scenario(kind, n_users, 8, 0)).unwrap();
    let s = env.reset(seed);
    (env, s)
}

fn raw_action(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..1.5, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn out_of_box_actions_act_like_clamped(kind in scenario(), n in 1usize..25, seed in 0u64..1000, a in raw_action(200)) {
        let (mut e1, _) = env(kind, n, seed);
        let (mut e2, _) = env(kind, n, seed);
        let a = &a[..e1.action_len()];
        let o1 = e1.step(a).unwrap();
        let o2 = e2.step(&clamp_action(a)).unwrap();
        prop_assert_eq!(o1, o2);
    }

    #[test]
    fn states_stay_in_unit_box(kind in scenario(), n in 1usize..25, seed in 0u64..1000, a in raw_action(200)) {
        let (mut e, s0) = env(kind, n, seed);
        prop_assert!(s0.iter().all(|v| (0.0..=1.0).contains(v)));
        let o = e.step(&a[..e.action_len()]).unwrap();
        prop_assert!(o.next_state.iter().all(|v| (0.0..=1.0).contains(v)), "{:?}", o.next_state);
        prop_assert!(o.reward.is_finite());
        prop_assert!(o.info.fairness >= 1.0 / n as f64 - 1e-12 && o.info.fairness <= 1.0 + 1e-12);
    }

    #[test]
    fn decoded_allocation_respects_carriers(kind in scenario(), n in 1usize..25, seed in 0u64..1000, a in raw_action(200)) {
        let (e, _) = env(kind, n, seed);
        let topo = e.topology();
        let gains = e.current_gains().unwrap();
        let alloc = decode_action(&a[..e.action_len()], topo, gains).unwrap();
        let mut used = vec![0.0; topo.n_stations()];
        for (u, &b) in alloc.serving.iter().enumerate() {
            used[b] += alloc.user_bands[u];
            // Strongest received power serves the user.
            let rx = alloc.powers[b] * gains[[b, u]];
            prop_assert!((0..topo.n_stations()).all(|k| alloc.powers[k] * gains[[k, u]] <= rx));
        }
        for (b, st) in topo.stations.iter().enumerate() {
            prop_assert!(alloc.powers[b] >= st.p_min && alloc.powers[b] <= st.p_max);
            prop_assert!(used[b] <= alloc.band_fractions[b] * st.band_total * (1.0 + 1e-12));
        }
    }

    #[test]
    fn resets_are_pure_functions_of_the_seed(kind in scenario(), n in 1usize..25, seed in 0u64..1000) {
        let (mut e, s0) = env(kind, n, seed);
        e.step(&vec![0.3; e.action_len()]).unwrap();
        prop_assert_eq!(e.reset(seed), s0);
    }
}
