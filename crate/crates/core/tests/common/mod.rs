#![allow(dead_code)]

use hetwlan::analytic::PerAc;
use hetwlan::geometry::{build_topology, Topology};
use hetwlan::params::{NavPolicy, TopologyMode};
use hetwlan::{default_config, SimConfig, AC_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small random instance: at most 6 STAs and 50 ms.
pub fn small_instance(seed: u64) -> (SimConfig, Topology) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = default_config();
    cfg.sta_count = rng.random_range(1..=6);
    cfg.run_duration_us = rng.random_range(5_000..=50_000);
    cfg.seed = rng.random();
    cfg.set_aggregate_rate(rng.random_range(100.0..3_000.0) * cfg.sta_count as f64);
    cfg.topology_mode = if rng.random_bool(0.3) {
        TopologyMode::CompleteGraph
    } else {
        TopologyMode::RandomWithHidden
    };
    cfg.placement_radius_m = rng.random_range(5.0..20.0);
    cfg.mac.mu_txop_sharing = rng.random_bool(0.7);
    cfg.mac.ap_triggers = rng.random_bool(0.7);
    cfg.mac.he_fraction = if rng.random_bool(0.3) { rng.random() } else { 0.0 };
    cfg.phy.ber = if rng.random_bool(0.5) { 2e-6 } else { rng.random_range(0.0..1e-5) };
    cfg.nav_policy = if rng.random_bool(0.5) { NavPolicy::Legacy } else { NavPolicy::IntraBssOnly };
    let topo = build_topology(&cfg, &mut rng).expect("small topology");
    (cfg, topo)
}

/// Slot-level estimate of the chance that none of the hidden nodes
/// transmits during a window of `window` slots. Node `i` belongs to class
/// `class_of[i]` and transmits in a slot with probability `tau[class]`.
pub fn quiet_window_frequency(tau: &PerAc, class_of: &[usize], window: u32, trials: u32, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quiet = 0u32;
    for _ in 0..trials {
        let mut hit = false;
        'slots: for _ in 0..window {
            for &k in class_of {
                if rng.random::<f64>() < tau[k] {
                    hit = true;
                    break 'slots;
                }
            }
        }
        quiet += u32::from(!hit);
    }
    f64::from(quiet) / f64::from(trials)
}

/// Round-robin class assignment of `n` hidden nodes and the per-class counts.
pub fn spread_hidden(n: usize) -> (Vec<usize>, PerAc) {
    let class_of: Vec<usize> = (0..n).map(|i| i % AC_COUNT).collect();
    let mut counts = [0.0; AC_COUNT];
    for &k in &class_of {
        counts[k] += 1.0;
    }
    (class_of, counts)
}

pub const ORACLE_TAUS: [f64; 3] = [0.005, 0.02, 0.05];
pub const ORACLE_HIDDEN: [usize; 3] = [1, 4, 8];
pub const ORACLE_TRIALS: u32 = 1_000_000;
pub const ORACLE_WINDOW: u32 = 12;

/// Per-class slot probabilities derived from one base value.
pub fn oracle_tau(base: f64) -> PerAc {
    [base, 1.5 * base, 2.0 * base, 0.5 * base]
}
