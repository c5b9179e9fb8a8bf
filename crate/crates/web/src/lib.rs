//! Browser bindings. Every entry point takes plain numbers and returns a
//! JSON string; the `*_json` functions are the same operations without
//! the wasm wrapper so they can be exercised natively.

use hetwlan::analytic::{solve_fixed_point, ModelInputs};
use hetwlan::geometry::{mean_hidden_per_sta, Topology};
use hetwlan::mac::run_simulation;
use hetwlan::params::TopologyMode;
use hetwlan::scenario::run_topology;
use hetwlan::{default_config, SimConfig, AC_COUNT};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Longest simulated run the page may request.
pub const MAX_DURATION_MS: f64 = 1000.0;

fn config(seed: u64, csth_dbm: f64, rate_pps: f64, complete: bool) -> Result<SimConfig, String> {
    if !csth_dbm.is_finite() || !rate_pps.is_finite() || rate_pps < 0.0 {
        return Err(format!("bad input: csth {csth_dbm}, rate {rate_pps}"));
    }
    let mut cfg = default_config();
    cfg.seed = seed;
    cfg.phy.csth_association_dbm = csth_dbm;
    cfg.set_aggregate_rate(rate_pps);
    if complete {
        cfg.topology_mode = TopologyMode::CompleteGraph;
    }
    Ok(cfg)
}

fn draw(cfg: &SimConfig) -> Result<Topology, String> {
    run_topology(cfg, 0).map_err(|e| e.to_string())
}

/// Node positions, hearing graph and hidden counts of one drawn topology.
pub fn topology_json(seed: u64, csth_dbm: f64, complete: bool) -> Result<String, String> {
    let cfg = config(seed, csth_dbm, 4800.0, complete)?;
    let topo = draw(&cfg)?;
    let n = topo.node_count();
    let mut hidden_pairs = Vec::new();
    for a in 1..n {
        for b in (a + 1)..n {
            if !topo.hearing[a][b] {
                hidden_pairs.push([a, b]);
            }
        }
    }
    let hidden: Vec<usize> = (1..n).map(|s| topo.hidden_nodes_of(s)).collect();
    Ok(json!({
        "positions": topo.positions,
        "hidden_pairs": hidden_pairs,
        "hidden_per_node": hidden,
        "hidden_per_sta": mean_hidden_per_sta(&topo).map_err(|e| e.to_string())?,
    })
    .to_string())
}

/// Analytic model solved on the counts of the same topology.
pub fn analytic_json(seed: u64, csth_dbm: f64, rate_pps: f64) -> Result<String, String> {
    let cfg = config(seed, csth_dbm, rate_pps, false)?;
    let topo = draw(&cfg)?;
    let sol = solve_fixed_point(&ModelInputs::from_topology(&cfg, &topo)).map_err(|e| e.to_string())?;
    let st = &sol.state;
    Ok(json!({
        "tau": st.tau,
        "gamma": st.gamma,
        "gamma_h": st.gamma_h,
        "f_ncoll": st.f_ncoll,
        "f_h": st.f_h,
        "iterations": sol.iterations,
        "converged": sol.converged,
    })
    .to_string())
}

/// One simulated run on the topology of `topology_json`.
pub fn simulate_json(seed: u64, csth_dbm: f64, rate_pps: f64, duration_ms: f64, complete: bool) -> Result<String, String> {
    if !(duration_ms > 0.0 && duration_ms <= MAX_DURATION_MS) {
        return Err(format!("duration must be in (0, {MAX_DURATION_MS}] ms, got {duration_ms}"));
    }
    let mut cfg = config(seed, csth_dbm, rate_pps, complete)?;
    cfg.run_duration_us = (duration_ms * 1e3).round() as u64;
    let topo = draw(&cfg)?;
    let c = run_simulation(&cfg, &topo, seed, false).map_err(|e| e.to_string())?.counters;
    let backoff: Vec<f64> = (0..AC_COUNT).map(|k| c.ac[k].mean_backoff_us()).collect();
    Ok(json!({
        "throughput_mbps": c.throughput_mbps(),
        "drop_ratio": c.drop_ratio(),
        "collisions_per_s": c.collisions_per_s(),
        "backoff_us": backoff,
        "mean_backoff_us": c.mean_backoff_us(),
        "overhead_ratio": c.overhead_ratio(),
        "delivered": c.delivered(),
        "arrivals": c.arrivals(),
        "hidden_per_sta": c.hidden_per_sta,
        "su_exchanges": c.su_exchanges,
        "mu_exchanges": c.mu_exchanges,
        "trigger_exchanges": c.trigger_exchanges,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn topology(seed: u32, csth_dbm: f64, complete: bool) -> Result<String, JsValue> {
    topology_json(u64::from(seed), csth_dbm, complete).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn analytic(seed: u32, csth_dbm: f64, rate_pps: f64) -> Result<String, JsValue> {
    analytic_json(u64::from(seed), csth_dbm, rate_pps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(seed: u32, csth_dbm: f64, rate_pps: f64, duration_ms: f64, complete: bool) -> Result<String, JsValue> {
    simulate_json(u64::from(seed), csth_dbm, rate_pps, duration_ms, complete).map_err(|e| JsValue::from_str(&e))
}
