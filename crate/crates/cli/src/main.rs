//! Command-line front end: scenario runs, protocol comparisons, session
//! sweeps and the analytic reports.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime anomaly.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use leosim::engine::{self, MetricsReport};
use leosim::error::ConfigError;
use leosim::report;
use leosim::scenario::{Protocol, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "leosim", version, about = "Walker-star constellation routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Scenario TOML file; defaults come from the built-in preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset: `full` (reference tables) or `desk` (scaled down).
    #[arg(long, default_value = "full")]
    preset: String,
    /// Override the session count.
    #[arg(long)]
    sessions: Option<usize>,
    /// Override the simulation duration, seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Override the ground seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = match self.config.as_ref() {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                ScenarioConfig::from_toml(&text)?
            }
            None => match self.preset.as_str() {
                "full" => ScenarioConfig::full_scale(),
                "desk" => ScenarioConfig::desk(),
                other => {
                    return Err(ConfigError::field(
                        "preset",
                        format!("unknown preset {other:?} (expected full or desk)"),
                    ))
                }
            },
        };
        if let Some(n) = self.sessions {
            cfg.traffic.sessions = n;
        }
        if let Some(d) = self.duration {
            cfg.simulation.duration_s = d;
        }
        if let Some(s) = self.seed {
            cfg.ground.seed = s;
            cfg.traffic.seed = s.wrapping_add(1);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario under one protocol and export the metrics CSVs.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// idlb or sspf.
        #[arg(long, default_value = "idlb")]
        protocol: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run both protocols on the same scenario and compare.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Session-count sweep over both protocols.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated session counts.
        #[arg(long, value_delimiter = ',', default_value = "10000,15000,20000")]
        session_counts: Vec<usize>,
        /// Comma-separated ground seeds.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run the sweep points on this many threads.
        #[arg(long, default_value_t = 2)]
        jobs: usize,
    },
    /// Topology inspection.
    Topo {
        #[command(subcommand)]
        command: TopoCommand,
    },
    /// Signaling-cost analytics.
    Signaling {
        #[command(subcommand)]
        command: SignalingCommand,
    },
    /// Geographic addressing checks.
    Areas {
        #[command(subcommand)]
        command: AreasCommand,
    },
    /// Full analytic report (no traffic simulation).
    Analytics {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TopoCommand {
    /// CSV of the ISL graph: time, link, kind, active, delay_ms.
    Report {
        #[command(flatten)]
        config: ConfigArgs,
        /// Snapshot instant, seconds.
        #[arg(long, default_value_t = 0.0)]
        at: f64,
        /// Additional snapshots every `step` seconds until `until`.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        until: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SignalingCommand {
    /// Closed-form per-cluster and total signaling cost.
    Estimate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AreasCommand {
    /// Area count, bit width and a centroid round-trip check.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn timestamp() -> String {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default();
    format!("{}", now.as_secs())
}

/// Runtime anomaly check: anomalies become exit code 2, not a failed run.
fn anomaly(report: &MetricsReport) -> Option<String> {
    if !report.conservation_holds() {
        return Some("packet conservation violated".to_string());
    }
    if report.loop_violations > 0 {
        return Some(format!("{} routing loops detected", report.loop_violations));
    }
    if report.latency_identity_violations > 0 {
        return Some(format!(
            "{} latency identity violations",
            report.latency_identity_violations
        ));
    }
    None
}

fn run_one(
    cfg: &ScenarioConfig,
    protocol: Protocol,
    out: &PathBuf,
) -> Result<MetricsReport, ConfigError> {
    let scenario = Scenario::from_config(cfg.clone())?;
    let report = engine::run(&scenario, protocol);
    report::write_run_csvs(&report, out, &timestamp())?;
    Ok(report)
}

fn dispatch(cli: Cli) -> Result<ExitCode, ConfigError> {
    match cli.command {
        Command::Run {
            config,
            protocol,
            out,
        } => {
            let cfg = config.load()?;
            let protocol: Protocol = protocol.parse()?;
            let report = run_one(&cfg, protocol, &out)?;
            println!(
                "{}: generated {} delivered {} dropped {} (rate {}) mean session latency {} s",
                report.protocol,
                report.generated,
                report.delivered,
                report.dropped,
                report::fmt_f64(report.dropping_rate),
                report::fmt_f64(report.mean_session_latency_s),
            );
            println!("outputs in {}", out.display());
            if let Some(msg) = anomaly(&report) {
                eprintln!("runtime anomaly: {msg}");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { config, out } => {
            let cfg = config.load()?;
            let a = run_one(&cfg, Protocol::Idlb, &out.join("idlb"))?;
            let b = run_one(&cfg, Protocol::Sspf, &out.join("sspf"))?;
            let cmp = report::compare(&a, &b)?;
            report::write_comparison_csv(&cmp, &out)?;
            println!(
                "idlb drop rate {} vs sspf {} (ratio {}), histogram intersection {}",
                report::fmt_f64(cmp.drop_rate_a),
                report::fmt_f64(cmp.drop_rate_b),
                report::fmt_f64(cmp.drop_rate_ratio),
                report::fmt_f64(cmp.histogram_intersection),
            );
            if let Some(msg) = anomaly(&a).or_else(|| anomaly(&b)) {
                eprintln!("runtime anomaly: {msg}");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            session_counts,
            seeds,
            out,
            jobs,
        } => {
            let base = config.load()?;
            let mut points = Vec::new();
            for &sessions in &session_counts {
                for &seed in &seeds {
                    for protocol in [Protocol::Idlb, Protocol::Sspf] {
                        points.push((sessions, seed, protocol));
                    }
                }
            }
            let results = run_sweep(&base, &points, jobs.max(1))?;
            let mut csv = String::from(
                "sessions,seed,protocol,generated,delivered,dropped,dropping_rate,mean_session_latency_s\n",
            );
            let mut bad = None;
            for ((sessions, seed, protocol), r) in points.iter().zip(results.iter()) {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    sessions,
                    seed,
                    protocol.name(),
                    r.generated,
                    r.delivered,
                    r.dropped,
                    report::fmt_f64(r.dropping_rate),
                    report::fmt_f64(r.mean_session_latency_s),
                ));
                if bad.is_none() {
                    bad = anomaly(r);
                }
            }
            std::fs::create_dir_all(&out).map_err(|e| ConfigError::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            let path = out.join("sweep.csv");
            std::fs::write(&path, csv).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            println!("sweep results in {}", path.display());
            if let Some(msg) = bad {
                eprintln!("runtime anomaly: {msg}");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Topo {
            command: TopoCommand::Report {
                config,
                at,
                step,
                until,
                out,
            },
        } => {
            let cfg = config.load()?;
            let mut times = vec![at];
            if let (Some(step), Some(until)) = (step, until) {
                let mut t = at + step;
                while t <= until {
                    times.push(t);
                    t += step;
                }
            }
            let csv = report::topology_csv(&cfg, &times);
            emit(csv, out)
        }
        Command::Signaling {
            command: SignalingCommand::Estimate { config, out },
        } => {
            let cfg = config.load()?;
            let a = report::analytics(&cfg)?;
            let mut csv = String::from("metric,value\n");
            for (k, v) in [
                ("h_c", a.h_c),
                ("h_int_seamless", a.h_int_seamless),
                ("h_int_seam", a.h_int_seam),
                ("cost_per_cluster_seamless", a.cost_per_cluster_seamless),
                ("cost_per_cluster_seam", a.cost_per_cluster_seam),
                ("total_signaling", a.total_signaling),
            ] {
                csv.push_str(&format!("{k},{}\n", report::fmt_f64(v)));
            }
            emit(csv, out)
        }
        Command::Areas {
            command: AreasCommand::Check,
        } => {
            use leosim::geoaddr::{area_centroid, area_of, AreaId, AREA_BITS, AREA_COUNT};
            let mut round_trip_failures = 0usize;
            for id in 0..AREA_COUNT as u16 {
                let (lat, lon) = area_centroid(AreaId(id));
                if area_of(lat, lon) != AreaId(id) {
                    round_trip_failures += 1;
                }
            }
            println!("area_count,{AREA_COUNT}");
            println!("area_bits,{AREA_BITS}");
            println!("centroid_round_trip_failures,{round_trip_failures}");
            if round_trip_failures > 0 {
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analytics { config, out } => {
            let cfg = config.load()?;
            let a = report::analytics(&cfg)?;
            emit(report::analytics_csv(&a), out)
        }
    }
}

fn emit(content: String, out: Option<PathBuf>) -> Result<ExitCode, ConfigError> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| ConfigError::Io {
                        path: parent.display().to_string(),
                        source: e,
                    })?;
                }
            }
            std::fs::write(&path, content).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            println!("written {}", path.display());
        }
        None => print!("{content}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// Independent scenario runs on a small thread pool; each run is itself
/// single-threaded.
fn run_sweep(
    base: &ScenarioConfig,
    points: &[(usize, u64, Protocol)],
    jobs: usize,
) -> Result<Vec<MetricsReport>, ConfigError> {
    let mut scenarios = Vec::with_capacity(points.len());
    for &(sessions, seed, _) in points {
        let mut cfg = base.clone();
        cfg.traffic.sessions = sessions;
        cfg.ground.seed = seed;
        cfg.traffic.seed = seed.wrapping_add(1);
        scenarios.push(Scenario::from_config(cfg)?);
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<MetricsReport>>> =
        (0..points.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(points.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let report = engine::run(&scenarios[i], points[i].2);
                *results[i].lock().unwrap() = Some(report);
            });
        }
    });
    Ok(results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("sweep point finished"))
        .collect())
}
