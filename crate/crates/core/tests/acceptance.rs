//! One PASS/FAIL line per acceptance criterion, with the measured values.
//! Runs the full-size experiments (10 runs of 1 s per point).

mod common;

use common::*;
use hetwlan::analytic::{
    hidden_quiet_prob, idle_probs, no_collision_prob, solve_fixed_point, window_size, ModelInputs,
};
use hetwlan::geometry::build_topology;
use hetwlan::mac::run_simulation;
use hetwlan::params::{HiddenForm, IdleCounts, TopologyMode};
use hetwlan::scenario::{metrics_csv, run_scenario, summary_csv, PointResult, RunOptions, Scenario, ScenarioKind};
use hetwlan::{default_config, SimConfig, AC_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OFFERED_4800_MBPS: f64 = 439.8;

struct Report {
    passed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        self.total += 1;
        self.passed += usize::from(ok);
        println!("criterion {id} {:<28} {}  {detail}", name, if ok { "PASS" } else { "FAIL" });
    }
}

fn point(kind: ScenarioKind, value: f64) -> PointResult {
    sweep(kind, vec![value]).remove(0)
}

fn sweep(kind: ScenarioKind, values: Vec<f64>) -> Vec<PointResult> {
    let sc = Scenario::new(kind).with_values(values);
    run_scenario(&default_config(), &sc, RunOptions::default()).expect("scenario").points
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn offered_load(rep: &mut Report, base: &PointResult) {
    let s = &base.summary;
    let thr = s.throughput_mbps.mean;
    let ok = within(thr, OFFERED_4800_MBPS, 0.03) && s.drop_ratio.mean < 0.01;
    rep.line(1, "offered-load identity", ok, format!("throughput {thr:.1} Mbps, drop {:.4}", s.drop_ratio.mean));
}

fn saturation(rep: &mut Report) {
    let p = point(ScenarioKind::NoHiddenSweep, 7200.0);
    let thr = p.summary.throughput_mbps.mean;
    rep.line(2, "saturation headroom", within(thr, 655.0, 0.05), format!("throughput {thr:.1} Mbps (target 655 +-5%)"));
}

fn hidden_degradation(rep: &mut Report, hidden: &PointResult) {
    let s = &hidden.summary;
    let thr = s.throughput_mbps.mean;
    let drop = s.drop_ratio.mean;
    let nh = s.hidden_per_sta.mean;
    let ok = within(thr, 357.0, 0.15) && (drop - 0.16).abs() <= 0.06 && (nh - 4.0).abs() <= 1.5;
    rep.line(
        3,
        "hidden-node degradation",
        ok,
        format!("throughput {thr:.1} Mbps, drop {drop:.4}, hidden/STA {nh:.2}"),
    );
}

fn backoff_blowup(rep: &mut Report, hidden: &PointResult, base: &PointResult) {
    let h = hidden.summary.backoff_all_us.mean;
    let b = base.summary.backoff_all_us.mean;
    let ratio = h / b;
    rep.line(4, "backoff blow-up", ratio >= 5.0, format!("backoff {h:.0} us vs {b:.0} us, ratio {ratio:.2}"));
}

fn csth_remedy(rep: &mut Report, base: &PointResult) {
    let pts = sweep(ScenarioKind::CsthSweep, hetwlan::scenario::default_csth());
    let coll: Vec<f64> = pts.iter().map(|p| p.summary.collisions.mean).collect();
    let drop: Vec<f64> = pts.iter().map(|p| p.summary.drop_ratio.mean).collect();
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let last = &pts.last().expect("points").summary;
    let base_thr = base.summary.throughput_mbps.mean;
    let ok = monotone(&coll)
        && monotone(&drop)
        && last.drop_ratio.mean < 0.01
        && within(last.throughput_mbps.mean, base_thr, 0.03)
        && last.hidden_per_sta.mean <= 0.5;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" ");
    rep.line(
        5,
        "csth remedy",
        ok,
        format!(
            "collisions/s [{}], drop [{}], at -73: throughput {:.1} vs {base_thr:.1}, hidden/STA {:.2}",
            fmt(&coll),
            drop.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "),
            last.throughput_mbps.mean,
            last.hidden_per_sta.mean
        ),
    );
}

fn analytic_oracle(rep: &mut Report) {
    let mut worst: f64 = 0.0;
    for (i, &base) in ORACLE_TAUS.iter().enumerate() {
        for (j, &n) in ORACLE_HIDDEN.iter().enumerate() {
            let tau = oracle_tau(base);
            let (class_of, counts) = spread_hidden(n);
            let f_h = hidden_quiet_prob(&tau, &counts, HiddenForm::Product).expect("f_h");
            let model = no_collision_prob(f_h, 0.0, f64::from(ORACLE_WINDOW), 0.0);
            let mc = quiet_window_frequency(&tau, &class_of, ORACLE_WINDOW, ORACLE_TRIALS, 0x5eed + (i * 3 + j) as u64);
            worst = worst.max((model - mc).abs());
        }
    }
    let cfg = default_config();
    let full = (cfg.sta_count - 1) as f64;
    let sol = solve_fixed_point(&ModelInputs::with_counts(&cfg, [full; AC_COUNT], [0.0; AC_COUNT])).expect("solve");
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut ordered = 0;
    for _ in 0..1000 {
        let tau: [f64; AC_COUNT] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let counts: [f64; AC_COUNT] = std::array::from_fn(|_| f64::from(rng.random_range(0u32..40)));
        let f = idle_probs(&tau, &counts, IdleCounts::PerClass);
        ordered += usize::from(f.windows(2).all(|w| w[0] <= w[1]));
    }
    let ok = worst <= 0.01 && sol.converged && sol.residual < 1e-9 && sol.iterations <= 10_000 && ordered == 1000;
    rep.line(
        6,
        "analytic oracle",
        ok,
        format!(
            "max |delta| {worst:.4}, residual {:.1e} after {} iterations, ordered {ordered}/1000",
            sol.residual, sol.iterations
        ),
    );
}

fn csv_pair(cfg: &SimConfig, threads: usize) -> (String, String) {
    let sc = Scenario::new(ScenarioKind::HiddenSweep).with_values(vec![2400.0, 4800.0]);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
    let r = pool.install(|| run_scenario(cfg, &sc, RunOptions::default())).expect("scenario");
    (metrics_csv(&r), summary_csv(&r))
}

fn determinism(rep: &mut Report) {
    let mut cfg = default_config();
    cfg.run_count = 4;
    cfg.run_duration_us = 200_000;
    let serial = csv_pair(&cfg, 1);
    let again = csv_pair(&cfg, 1);
    let parallel = csv_pair(&cfg, 4);
    let ok = serial == again && serial == parallel;
    rep.line(
        7,
        "determinism",
        ok,
        format!("{} metric bytes, repeat equal {}, 4-thread equal {}", serial.0.len(), serial == again, serial == parallel),
    );
}

fn invariants(rep: &mut Report) {
    let mut failures = Vec::new();
    for case in 0..100u64 {
        let (cfg, topo) = small_instance(case);
        let out = run_simulation(&cfg, &topo, cfg.seed, false).expect("sim");
        let c = &out.counters;
        if (0..AC_COUNT).any(|k| c.ac[k].arrivals != c.ac[k].delivered + c.ac[k].dropped + c.ac[k].queued) {
            failures.push(format!("case {case}: conservation"));
        }
        if c.access_violations != 0 {
            failures.push(format!("case {case}: {} access violations", c.access_violations));
        }
        if cfg.topology_mode == TopologyMode::CompleteGraph && c.data_collisions + c.other_collisions != 0 {
            failures.push(format!("case {case}: collision in complete graph"));
        }

        let mut geo = default_config();
        geo.sta_count = cfg.sta_count;
        geo.placement_radius_m = 40.0;
        geo.phy.csth_operational_dbm = -70.0;
        let strict = build_topology(&geo, &mut ChaCha8Rng::seed_from_u64(case)).expect("topology");
        geo.phy.csth_operational_dbm = -82.0;
        let loose = build_topology(&geo, &mut ChaCha8Rng::seed_from_u64(case)).expect("topology");
        let n = strict.node_count();
        if (0..n).any(|a| (0..n).any(|b| strict.hearing[a][b] && !loose.hearing[a][b])) {
            failures.push(format!("case {case}: hearing not monotone"));
        }
    }
    let cfg = default_config();
    for k in 0..AC_COUNT {
        let cap = (1u64 << cfg.ac[k].max_stage) * u64::from(cfg.w0(k));
        for stage in 0..=cfg.frames.retry_limit {
            if window_size(k, stage, &cfg).ok() != Some(cap.min(u64::from(cfg.w0(k)) << stage)) {
                failures.push(format!("window ac{k} stage {stage}"));
            }
        }
        if window_size(k, cfg.frames.retry_limit + 1, &cfg).is_ok() {
            failures.push(format!("window ac{k} beyond retry limit"));
        }
    }
    let detail = if failures.is_empty() { "100 instances clean".to_string() } else { failures.join("; ") };
    rep.line(8, "invariant suite", failures.is_empty(), detail);
}

fn main() {
    let mut rep = Report { passed: 0, total: 0 };
    let base = point(ScenarioKind::NoHiddenSweep, 4800.0);
    let hidden = point(ScenarioKind::HiddenSweep, 4800.0);
    offered_load(&mut rep, &base);
    saturation(&mut rep);
    hidden_degradation(&mut rep, &hidden);
    backoff_blowup(&mut rep, &hidden, &base);
    csth_remedy(&mut rep, &base);
    analytic_oracle(&mut rep);
    determinism(&mut rep);
    invariants(&mut rep);
    println!("{}/{} criteria pass", rep.passed, rep.total);
}
