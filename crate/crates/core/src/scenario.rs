//! The three experiments and their artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytic::{solve_fixed_point, ModelInputs, Solution};
use crate::config_file::to_text;
use crate::error::{Error, Result};
use crate::geometry::{build_topology, Topology};
use crate::mac::{run_simulation, sub_seed};
use crate::metrics::{summarize, MetricsSummary, RunCounters};
use crate::params::{validate_config, SimConfig, TopologyMode};
use crate::AC_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScenarioKind {
    HiddenSweep,
    NoHiddenSweep,
    CsthSweep,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] =
        [ScenarioKind::HiddenSweep, ScenarioKind::NoHiddenSweep, ScenarioKind::CsthSweep];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::HiddenSweep => "hidden-sweep",
            ScenarioKind::NoHiddenSweep => "no-hidden-sweep",
            ScenarioKind::CsthSweep => "csth-sweep",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario `{s}`")))
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Arrival rates in pkt/s, or association CSTH values in dBm.
    pub values: Vec<f64>,
    /// Aggregate rate used by the CSTH sweep.
    pub fixed_rate_pps: f64,
}

pub const DEFAULT_FIXED_RATE_PPS: f64 = 4800.0;

pub fn default_rates() -> Vec<f64> {
    (0..=10).map(|i| 1200.0 + 600.0 * f64::from(i)).collect()
}

pub fn default_csth() -> Vec<f64> {
    (0..=9).map(|i| -82.0 + f64::from(i)).collect()
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        let values = match kind {
            ScenarioKind::CsthSweep => default_csth(),
            _ => default_rates(),
        };
        Scenario { kind, values, fixed_rate_pps: DEFAULT_FIXED_RATE_PPS }
    }

    pub fn with_values(mut self, values: Vec<f64>) -> Self {
        self.values = values;
        self
    }

    /// Configuration of one sweep point.
    pub fn point_config(&self, base: &SimConfig, value: f64) -> SimConfig {
        let mut cfg = base.clone();
        match self.kind {
            ScenarioKind::HiddenSweep => {
                cfg.topology_mode = TopologyMode::RandomWithHidden;
                cfg.set_aggregate_rate(value);
            }
            ScenarioKind::NoHiddenSweep => {
                cfg.topology_mode = TopologyMode::CompleteGraph;
                cfg.set_aggregate_rate(value);
            }
            ScenarioKind::CsthSweep => {
                cfg.topology_mode = TopologyMode::RandomWithHidden;
                cfg.phy.csth_association_dbm = value;
                cfg.set_aggregate_rate(self.fixed_rate_pps);
            }
        }
        cfg
    }
}

/// Analytic quantities reported next to the simulated ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticColumns {
    pub tau: [f64; AC_COUNT],
    pub gamma: [f64; AC_COUNT],
    pub gamma_h: [f64; AC_COUNT],
    pub f_ncoll: [f64; AC_COUNT],
    pub converged: bool,
}

impl From<&Solution> for AnalyticColumns {
    fn from(s: &Solution) -> Self {
        AnalyticColumns {
            tau: s.state.tau,
            gamma: s.state.gamma,
            gamma_h: s.state.gamma_h,
            f_ncoll: s.state.f_ncoll,
            converged: s.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    pub value: f64,
    pub arrival_rate_pps: f64,
    pub csth_assoc_dbm: f64,
    pub runs: Vec<RunCounters>,
    pub summary: MetricsSummary,
    pub analytic: Option<AnalyticColumns>,
    #[serde(skip)]
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub config_hash: String,
    pub points: Vec<PointResult>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep the event trace of run 0 at every point.
    pub trace: bool,
}

/// Topology for run `run` of a configuration.
pub fn run_topology(cfg: &SimConfig, run: usize) -> Result<Topology> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed.wrapping_add(run as u64), 0, 0x70_70));
    build_topology(cfg, &mut rng)
}

struct RunOut {
    counters: RunCounters,
    trace: Option<String>,
    counts: ([f64; AC_COUNT], [f64; AC_COUNT]),
}

fn one_run(cfg: &SimConfig, run: usize, trace: bool) -> Result<RunOut> {
    let topo = run_topology(cfg, run)?;
    let out = run_simulation(cfg, &topo, cfg.seed.wrapping_add(run as u64), trace)?;
    Ok(RunOut { counters: out.counters, trace: out.trace, counts: topo.mean_counts() })
}

/// Run every sweep point `run_count` times and attach the analytic model
/// evaluated on the mean per-class counts of the same topologies.
pub fn run_scenario(base: &SimConfig, scenario: &Scenario, opts: RunOptions) -> Result<ScenarioResult> {
    if scenario.values.is_empty() {
        return Err(Error::InvalidConfig("sweep has no points".into()));
    }
    let configs: Vec<SimConfig> = scenario.values.iter().map(|&v| scenario.point_config(base, v)).collect();
    for (i, cfg) in configs.iter().enumerate() {
        if let Some(v) = validate_config(cfg).into_iter().next() {
            return Err(Error::SweepPoint {
                point: scenario.values[i].to_string(),
                source: Box::new(Error::InvalidConfig(format!("{}: {}", v.field, v.message))),
            });
        }
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|p| (0..base.run_count).map(move |r| (p, r)))
        .collect();
    let job = |&(p, r): &(usize, usize)| one_run(&configs[p], r, opts.trace && r == 0);
    #[cfg(feature = "parallel")]
    let outs: Vec<Result<RunOut>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outs: Vec<Result<RunOut>> = jobs.iter().map(job).collect();

    let mut points = Vec::with_capacity(configs.len());
    let mut outs = outs.into_iter();
    for (p, cfg) in configs.iter().enumerate() {
        let value = scenario.values[p];
        let wrap = |e: Error| Error::SweepPoint { point: value.to_string(), source: Box::new(e) };
        let mut runs = Vec::with_capacity(base.run_count);
        let mut trace = None;
        let mut t = [0.0; AC_COUNT];
        let mut h = [0.0; AC_COUNT];
        for _ in 0..base.run_count {
            let out = outs.next().expect("one result per job").map_err(wrap)?;
            for k in 0..AC_COUNT {
                t[k] += out.counts.0[k] / base.run_count as f64;
                h[k] += out.counts.1[k] / base.run_count as f64;
            }
            if trace.is_none() {
                trace = out.trace;
            }
            runs.push(out.counters);
        }
        let summary = summarize(&runs).map_err(wrap)?;
        let analytic = solve_fixed_point(&ModelInputs::with_counts(cfg, t, h))
            .ok()
            .map(|s| AnalyticColumns::from(&s));
        points.push(PointResult {
            value,
            arrival_rate_pps: cfg.aggregate_rate(),
            csth_assoc_dbm: cfg.phy.csth_association_dbm,
            runs,
            summary,
            analytic,
            trace,
        });
    }
    Ok(ScenarioResult { scenario: scenario.clone(), config_hash: artifact_hash(base, scenario), points })
}

/// Digest of the configuration and the sweep definition.
pub fn artifact_hash(cfg: &SimConfig, scenario: &Scenario) -> String {
    let mut text = to_text(cfg);
    let _ = writeln!(text, "scenario={}", scenario.kind);
    let _ = writeln!(text, "values={:?}", scenario.values);
    let _ = writeln!(text, "fixed_rate_pps={}", scenario.fixed_rate_pps);
    let digest = Sha256::digest(text.as_bytes());
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

pub const METRICS_HEADER: &str = "scenario,arrival_rate_pps,csth_assoc_dbm,run,ac,backoff_us,waiting_us,collisions,drop_ratio,throughput_mbps,overhead_ratio,hidden_per_sta";

/// Per-run metrics: one row per (run, class) and one `ac=all` row per run.
/// Class rows leave the run-level columns (collisions, overhead) empty.
pub fn metrics_csv(result: &ScenarioResult) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    let name = result.scenario.kind.as_str();
    for p in &result.points {
        let lead = format!("{name},{},{}", p.arrival_rate_pps, p.csth_assoc_dbm);
        for (run, r) in p.runs.iter().enumerate() {
            for k in 0..AC_COUNT {
                let c = &r.ac[k];
                let _ = writeln!(
                    s,
                    "{lead},{run},{k},{:.3},{:.3},,{:.6},{:.3},,{:.4}",
                    c.mean_backoff_us(),
                    c.mean_waiting_us(),
                    c.drop_ratio(),
                    r.ac_throughput_mbps(k),
                    r.hidden_per_sta,
                );
            }
            let _ = writeln!(
                s,
                "{lead},{run},all,{:.3},{:.3},{:.3},{:.6},{:.3},{:.6},{:.4}",
                r.mean_backoff_us(),
                r.mean_waiting_us(),
                r.collisions_per_s(),
                r.drop_ratio(),
                r.throughput_mbps(),
                r.overhead_ratio().unwrap_or(0.0),
                r.hidden_per_sta,
            );
        }
    }
    s
}

/// Means and standard deviations per point, with the analytic columns.
pub fn summary_csv(result: &ScenarioResult) -> String {
    let mut s = String::from("scenario,value,arrival_rate_pps,csth_assoc_dbm,runs");
    for m in ["backoff_us", "waiting_us", "collisions", "drop_ratio", "throughput_mbps", "overhead_ratio", "hidden_per_sta"] {
        let _ = write!(s, ",{m}_mean,{m}_std");
    }
    for k in 0..AC_COUNT {
        let _ = write!(s, ",backoff_ac{k}_us,waiting_ac{k}_us");
    }
    for k in 0..AC_COUNT {
        let _ = write!(s, ",model_tau_ac{k},model_gamma_h_ac{k},model_f_ncoll_ac{k}");
    }
    s.push_str(",model_converged\n");
    for p in &result.points {
        let m = &p.summary;
        let _ = write!(
            s,
            "{},{},{},{},{}",
            result.scenario.kind, p.value, p.arrival_rate_pps, p.csth_assoc_dbm, m.runs
        );
        for st in [m.backoff_all_us, m.waiting_all_us, m.collisions, m.drop_ratio, m.throughput_mbps, m.overhead_ratio, m.hidden_per_sta] {
            let _ = write!(s, ",{:.6},{:.6}", st.mean, st.std);
        }
        for k in 0..AC_COUNT {
            let _ = write!(s, ",{:.3},{:.3}", m.backoff_us[k].mean, m.waiting_us[k].mean);
        }
        for k in 0..AC_COUNT {
            match &p.analytic {
                Some(a) => {
                    let _ = write!(s, ",{:.6},{:.6},{:.6}", a.tau[k], a.gamma_h[k], a.f_ncoll[k]);
                }
                None => s.push_str(",,,"),
            }
        }
        let _ = writeln!(s, ",{}", p.analytic.is_some_and(|a| a.converged));
    }
    s
}

/// Chart names written by [`emit_outputs`].
pub const CHARTS: [&str; 6] = ["backoff", "waiting", "collisions", "drop", "throughput", "overhead"];

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Write CSVs (and charts when `plot` is set). Returns the written paths.
pub fn emit_outputs(result: &ScenarioResult, out_dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    if result.points.is_empty() {
        return Err(Error::EmptyResults);
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|source| Error::Io { path: out_dir.to_path_buf(), source })?;
    let stem = format!("{}-{}", result.scenario.kind, result.config_hash);
    let mut files = Vec::new();
    let mut put = |name: String, text: &str| -> Result<()> {
        let path = out_dir.join(name);
        write_file(&path, text)?;
        files.push(path);
        Ok(())
    };
    put(format!("{stem}-metrics.csv"), &metrics_csv(result))?;
    put(format!("{stem}-summary.csv"), &summary_csv(result))?;
    for p in &result.points {
        if let Some(t) = &p.trace {
            put(format!("{stem}-trace-{}.tsv", p.value), t)?;
        }
    }
    if plot {
        #[cfg(feature = "plot")]
        files.extend(crate::plot::write_charts(result, out_dir, &stem)?);
        #[cfg(not(feature = "plot"))]
        return Err(Error::Plot("built without the `plot` feature".into()));
    }
    Ok(files)
}
