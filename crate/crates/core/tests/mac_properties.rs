mod common;

use common::small_instance;
use hetwlan::geometry::{build_topology, ShadowingMode};
use hetwlan::mac::run_simulation;
use hetwlan::params::{NavPolicy, TopologyMode};
use hetwlan::{default_config, AC_COUNT};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn packets_are_conserved_and_access_rules_hold(seed in any::<u64>()) {
        let (cfg, topo) = small_instance(seed);
        let out = run_simulation(&cfg, &topo, cfg.seed, false).unwrap();
        let c = &out.counters;
        for k in 0..AC_COUNT {
            let a = &c.ac[k];
            prop_assert_eq!(a.arrivals, a.delivered + a.dropped + a.queued, "ac {}", k);
        }
        prop_assert_eq!(c.access_violations, 0);
        prop_assert!(c.max_parallel_data <= cfg.phy.antennas as usize);
        prop_assert!(c.delivered_bits() == c.delivered() * cfg.mpdu_bits());
        if cfg.topology_mode == TopologyMode::CompleteGraph {
            prop_assert_eq!(c.data_collisions, 0);
            prop_assert_eq!(c.other_collisions, 0);
        }
    }

    #[test]
    fn same_seed_same_trace(seed in any::<u64>()) {
        let (cfg, topo) = small_instance(seed);
        let a = run_simulation(&cfg, &topo, cfg.seed, true).unwrap();
        let b = run_simulation(&cfg, &topo, cfg.seed, true).unwrap();
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.events, b.events);
    }

    #[test]
    fn nav_policy_irrelevant_in_single_bss(seed in any::<u64>()) {
        let (mut cfg, topo) = small_instance(seed);
        cfg.nav_policy = NavPolicy::Legacy;
        let legacy = run_simulation(&cfg, &topo, cfg.seed, true).unwrap();
        cfg.nav_policy = NavPolicy::IntraBssOnly;
        let intra = run_simulation(&cfg, &topo, cfg.seed, true).unwrap();
        prop_assert_eq!(legacy.trace, intra.trace);
    }

    #[test]
    fn hearing_grows_as_operational_csth_drops(
        seed in any::<u64>(),
        hi in -80.0f64..-60.0,
        gap in 0.0f64..15.0,
        lognormal in any::<bool>(),
        n in 1usize..=6,
    ) {
        let mut cfg = default_config();
        cfg.sta_count = n;
        cfg.pathloss.shadowing = if lognormal { ShadowingMode::Lognormal } else { ShadowingMode::Margin };
        cfg.placement_radius_m = 40.0;
        cfg.phy.csth_operational_dbm = hi;
        let strict = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        cfg.phy.csth_operational_dbm = hi - gap;
        let loose = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&strict.positions, &loose.positions);
        for a in 0..strict.node_count() {
            for b in 0..strict.node_count() {
                prop_assert!(!strict.hearing[a][b] || loose.hearing[a][b]);
            }
        }
        for s in 0..n {
            for k in 0..AC_COUNT {
                prop_assert!(loose.hidden_counts[s][k] <= strict.hidden_counts[s][k]);
            }
        }
    }
}
