use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hetwlan::analytic::{solve_fixed_point, ModelInputs};
use hetwlan::config_file;
use hetwlan::geometry::mean_hidden_per_sta;
use hetwlan::scenario::{artifact_hash, emit_outputs, run_scenario, run_topology, RunOptions, Scenario, ScenarioKind};
use hetwlan::{default_config, Error, Result, SimConfig, AC_COUNT};

#[derive(Parser)]
#[command(name = "hetwlan", version, about = "802.11ax uplink simulator with hidden terminals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write CSV (and optionally SVG) outputs.
    Run(RunArgs),
    /// Solve the analytic model at every sweep point.
    Analytic(SweepArgs),
    /// Print one drawn topology as CSV.
    Topology(TopologyArgs),
    /// Print the effective configuration.
    Config(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key=value configuration file applied over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single key, e.g. --set phy.ber=0. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    runs: Option<usize>,
    /// Run length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: ScenarioKind,
    /// Comma-separated aggregate arrival rates (pkt/s).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rates: Option<Vec<f64>>,
    /// Comma-separated association CSTH values (dBm).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    csth: Option<Vec<f64>>,
    /// Aggregate rate of the CSTH sweep (pkt/s).
    #[arg(long)]
    fixed_rate: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Also write SVG charts.
    #[arg(long)]
    plot: bool,
    /// Write the event trace of run 0 at every sweep point.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct TopologyArgs {
    /// Run index whose topology is drawn.
    #[arg(long, default_value_t = 0)]
    run: usize,
    /// Association CSTH (dBm).
    #[arg(long, allow_hyphen_values = true)]
    csth: Option<f64>,
    /// Use the complete hearing graph.
    #[arg(long)]
    complete: bool,
    #[command(flatten)]
    common: CommonArgs,
}

fn load_config(args: &CommonArgs) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => config_file::load(path, default_config())?,
        None => default_config(),
    };
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config_file::set(&mut cfg, k.trim(), v.trim())?;
    }
    if let Some(n) = args.runs {
        cfg.run_count = n;
    }
    if let Some(s) = args.duration {
        if !(s > 0.0) {
            return Err(Error::InvalidConfig(format!("duration must be positive, got {s}")));
        }
        cfg.run_duration_us = (s * 1e6).round() as u64;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn scenario(args: &SweepArgs) -> Scenario {
    let mut sc = Scenario::new(args.scenario);
    let values = match args.scenario {
        ScenarioKind::CsthSweep => args.csth.clone(),
        _ => args.rates.clone(),
    };
    if let Some(v) = values {
        sc = sc.with_values(v);
    }
    if let Some(r) = args.fixed_rate {
        sc.fixed_rate_pps = r;
    }
    sc
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = load_config(&args.sweep.common)?;
    let sc = scenario(&args.sweep);
    let result = run_scenario(&cfg, &sc, RunOptions { trace: args.trace })?;
    for p in &result.points {
        let s = &p.summary;
        eprintln!(
            "{} {}: throughput {:.1} Mbps, drop {:.4}, collisions/s {:.1}, backoff {:.0} us, hidden/STA {:.2}",
            sc.kind,
            p.value,
            s.throughput_mbps.mean,
            s.drop_ratio.mean,
            s.collisions.mean,
            s.backoff_all_us.mean,
            s.hidden_per_sta.mean
        );
    }
    for f in emit_outputs(&result, &args.sweep.out, args.plot)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn analytic(args: &SweepArgs) -> Result<()> {
    let base = load_config(&args.common)?;
    let sc = scenario(args);
    if sc.values.is_empty() {
        return Err(Error::InvalidConfig("sweep has no points".into()));
    }
    let mut csv = String::from("scenario,value,arrival_rate_pps,csth_assoc_dbm");
    for k in 0..AC_COUNT {
        csv.push_str(&format!(",tau_ac{k},gamma_ac{k},gamma_h_ac{k},f_ncoll_ac{k}"));
    }
    csv.push_str(",iterations,residual,converged\n");
    for &value in &sc.values {
        let wrap = |e: Error| Error::SweepPoint { point: value.to_string(), source: Box::new(e) };
        let cfg = sc.point_config(&base, value);
        let runs = cfg.run_count.max(1);
        let mut t = [0.0; AC_COUNT];
        let mut h = [0.0; AC_COUNT];
        for r in 0..runs {
            let (ti, hi) = run_topology(&cfg, r).map_err(wrap)?.mean_counts();
            for k in 0..AC_COUNT {
                t[k] += ti[k] / runs as f64;
                h[k] += hi[k] / runs as f64;
            }
        }
        let sol = solve_fixed_point(&ModelInputs::with_counts(&cfg, t, h)).map_err(wrap)?;
        let st = &sol.state;
        csv.push_str(&format!(
            "{},{value},{},{}",
            sc.kind,
            cfg.aggregate_rate(),
            cfg.phy.csth_association_dbm
        ));
        for k in 0..AC_COUNT {
            csv.push_str(&format!(",{:.6},{:.6},{:.6},{:.6}", st.tau[k], st.gamma[k], st.gamma_h[k], st.f_ncoll[k]));
        }
        csv.push_str(&format!(",{},{:.3e},{}\n", sol.iterations, sol.residual, sol.converged));
    }
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io { path: args.out.clone(), source })?;
    let path = args.out.join(format!("{}-{}-analytic.csv", sc.kind, artifact_hash(&base, &sc)));
    std::fs::write(&path, csv).map_err(|source| Error::Io { path: path.clone(), source })?;
    println!("{}", path.display());
    Ok(())
}

fn topology(args: &TopologyArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(c) = args.csth {
        cfg.phy.csth_association_dbm = c;
    }
    if args.complete {
        cfg.topology_mode = hetwlan::params::TopologyMode::CompleteGraph;
    }
    let topo = run_topology(&cfg, args.run)?;
    print!("{}", topo.to_csv());
    eprintln!("hidden_per_sta={:.3}", mean_hidden_per_sta(&topo)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error\tusage\t{first}");
            return ExitCode::from(2);
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Analytic(a) => analytic(a),
        Command::Topology(a) => topology(a),
        Command::Config(a) => load_config(a).map(|cfg| print!("{}", config_file::to_text(&cfg))),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
