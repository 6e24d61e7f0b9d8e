//! Command-line front end: `run`, `synth`, `sweep` and `presets`.
//!
//! Exit status is 0 on success, 1 for invalid input (bad flags, unreadable
//! or invalid configs) and 2 for failures while running.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::build_model;
use crate::fif::FilterBank;
use crate::scenario::{
    format_float, load_with_overrides, presets, run_scenario, write_outputs, RunReport,
    ScenarioConfig, ScenarioError,
};

/// Overrides the output directory when `--out` is not given.
pub const OUT_ENV: &str = "CONSENSUS_FDI_OUT";

#[derive(Debug, Parser)]
#[command(name = "consensus-fdi", version, about = "Fault detection and accommodation for consensus networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write traces plus report.json
    Run(RunArgs),
    /// Print the synthesized filter bank of the observer
    Synth(SynthArgs),
    /// Run a grid of overrides and collect one summary row per point
    Sweep(SweepArgs),
    /// List the built-in presets
    Presets(PresetsArgs),
}

#[derive(Debug, Args)]
struct Source {
    /// Scenario file (same as --config)
    #[arg(value_name = "CONFIG", conflicts_with_all = ["preset", "config"])]
    path: Option<PathBuf>,
    /// Built-in preset name
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. --set fault.k_d=12 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory (default: the config's output.dir)
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script for the CSVs
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    source: Source,
    /// Also dump the table as JSON to this file
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// Grid axis, e.g. --grid detection.kappa1=0.25,0.5,1.0 (repeatable)
    #[arg(long = "grid", value_name = "KEY=V1,V2,...")]
    grid: Vec<String>,
    /// Output directory (default: the config's output.dir)
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write a gnuplot script per grid point
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Debug, Args)]
struct PresetsArgs {
    /// Print the document of one preset
    #[arg(long, value_name = "NAME")]
    show: Option<String>,
}

/// Failure of a subcommand, mapped to an exit status.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

pub fn run_from_env() -> i32 {
    run_with_args(std::env::args_os())
}

/// Entry point with explicit arguments (the first item is the program name).
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Presets(a) => cmd_presets(&a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn base_text(src: &Source) -> Result<String, Failure> {
    if let Some(name) = &src.preset {
        return presets::preset(name).map(|p| p.text.to_string()).ok_or_else(|| {
            Failure::Invalid(format!(
                "unknown preset '{name}' (available: {})",
                presets::names().join(", ")
            ))
        });
    }
    let path = src
        .config
        .as_ref()
        .or(src.path.as_ref())
        .ok_or_else(|| Failure::Invalid("give a config file or --preset".into()))?;
    fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn all_overrides(src: &Source, extra: &[String]) -> Vec<String> {
    let mut ov = src.overrides.clone();
    if let Some(seed) = src.seed {
        ov.push(format!("seed={seed}"));
    }
    ov.extend_from_slice(extra);
    ov
}

fn load(src: &Source, extra: &[String]) -> Result<ScenarioConfig, Failure> {
    let text = base_text(src)?;
    Ok(load_with_overrides(&text, &all_overrides(src, extra))?)
}

fn out_dir(flag: &Option<PathBuf>, cfg: &ScenarioConfig) -> PathBuf {
    flag.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

/// One-line human summary of a run.
pub fn summary_line(report: &RunReport) -> String {
    let mut s = format!("{}: ", report.name);
    match &report.detection {
        Some(d) => {
            let _ = write!(
                s,
                "fault on agent {} detected at k={} (rho={}), delta_hat=({:.6}, {:.6})",
                d.faulty_agent, d.k_detect, d.rho, d.delta_hat[0], d.delta_hat[1]
            );
            if let Some(lat) = d.latency {
                let _ = write!(s, ", latency={lat}");
            }
        }
        None => s.push_str("no fault detected"),
    }
    match report.final_centroid_error {
        Some(e) => {
            let _ = write!(s, ", final centroid error={e:.3e}");
        }
        None => {
            let _ = write!(
                s,
                ", final centroid=({:.6}, {:.6})",
                report.final_centroid[0], report.final_centroid[1]
            );
        }
    }
    s
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load(&args.source, &[])?;
    let output = run_scenario(&cfg)?;
    for w in &output.report.warnings {
        eprintln!("warning: {w}");
    }
    let dir = out_dir(&args.out, &cfg);
    write_outputs(&output, &dir, args.emit_plots)?;
    println!("{}", summary_line(&output.report));
    Ok(())
}

#[derive(Debug, Serialize)]
struct SynthRow {
    target: usize,
    rho: usize,
    geodesic: usize,
    pi_d_error: f64,
    sigma_d_norm: f64,
    constraint_norm: f64,
    sigma_rank: usize,
    spectral_radius_obs: f64,
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let cfg = load(&args.source, &[])?;
    let graph = cfg.graph()?;
    let geo = graph.geodesics();
    let formation = cfg.formation_spec()?;
    let model = build_model(graph, cfg.eps, formation.as_ref()).map_err(ScenarioError::from)?;
    if let Some(w) = model.step_warning() {
        eprintln!("warning: step size {} exceeds 1/max degree = {}", w.eps, w.bound);
    }
    let observer = cfg.observer - 1;
    let bank = FilterBank::new(&model, observer, cfg.filter.policy())
        .map_err(|e| Failure::Runtime(e.to_string()))?;

    let rows: Vec<SynthRow> = bank
        .filters()
        .iter()
        .map(|f| {
            let (pd, sd, cl) = f.identity_residuals();
            SynthRow {
                target: f.target + 1,
                rho: f.rho,
                geodesic: geo.get(observer, f.target),
                pi_d_error: pd,
                sigma_d_norm: sd,
                constraint_norm: cl,
                sigma_rank: f.sigma_rank(),
                spectral_radius_obs: f.spectral_radius_obs,
            }
        })
        .collect();

    println!(
        "observer {} (m_o = {}), eps = {}",
        cfg.observer,
        model.graph().degree(observer),
        cfg.eps
    );
    println!(
        "{:>6} {:>4} {:>4} {:>11} {:>11} {:>11} {:>6} {:>10}",
        "target", "rho", "g", "|PiD-1|", "|SigmaD|", "|(A-KC)psi|", "rank", "radius"
    );
    for r in &rows {
        println!(
            "{:>6} {:>4} {:>4} {:>11.3e} {:>11.3e} {:>11.3e} {:>6} {:>10.6}",
            r.target,
            r.rho,
            r.geodesic,
            r.pi_d_error,
            r.sigma_d_norm,
            r.constraint_norm,
            r.sigma_rank,
            r.spectral_radius_obs
        );
    }
    if let Some(path) = &args.json {
        let body = serde_json::to_string_pretty(&rows).expect("rows serialize");
        fs::write(path, body + "\n")
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Splits `a,b,[1, 2]` on commas outside brackets.
fn split_values(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in raw.chars() {
        match ch {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            _ => {}
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out.retain(|v| !v.is_empty());
    out
}

/// Parses `--grid` axes and expands them into override lists (last axis
/// varies fastest).
fn expand_grid(axes: &[String]) -> Result<(Vec<String>, Vec<Vec<String>>), Failure> {
    let mut keys = Vec::new();
    let mut values = Vec::new();
    for axis in axes {
        let (key, raw) = axis
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("grid axis '{axis}' must look like key=v1,v2")))?;
        let vals = split_values(raw);
        if vals.is_empty() {
            return Err(Failure::Invalid(format!("grid axis '{key}' has no values")));
        }
        keys.push(key.trim().to_string());
        values.push(vals);
    }
    if keys.is_empty() {
        return Err(Failure::Invalid("empty grid: give at least one --grid axis".into()));
    }
    let mut points: Vec<Vec<String>> = vec![Vec::new()];
    for (key, vals) in keys.iter().zip(&values) {
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(format!("{key}={v}"));
                    q
                })
            })
            .collect();
    }
    Ok((keys, points))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let (keys, points) = expand_grid(&args.grid)?;
    let text = base_text(&args.source)?;
    let base = load_with_overrides(&text, &all_overrides(&args.source, &[]))?;
    let dir = out_dir(&args.out, &base);

    let run_point = |idx: usize, point: &Vec<String>| -> Result<RunReport, Failure> {
        let cfg = load_with_overrides(&text, &all_overrides(&args.source, point))?;
        let output = run_scenario(&cfg)?;
        write_outputs(&output, &sweep_point_dir(&dir, idx), args.emit_plots)?;
        Ok(output.report)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let results: Vec<Result<RunReport, Failure>> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_point(i, p))
            .collect()
    });

    let mut csv = String::from("point");
    for k in &keys {
        csv.push(',');
        csv.push_str(&csv_field(k));
    }
    csv.push_str(",status,detected_agent,delta_hat_x,delta_hat_y,k_detect,latency,final_centroid_error,outcome,error\n");
    let mut ok = 0usize;
    let mut invalid = 0usize;
    for (i, (point, res)) in points.iter().zip(&results).enumerate() {
        let _ = write!(csv, "{i}");
        for assignment in point {
            let v = assignment.split_once('=').map_or("", |(_, v)| v);
            let _ = write!(csv, ",{}", csv_field(v));
        }
        match res {
            Ok(r) => {
                ok += 1;
                let d = r.detection.as_ref();
                let opt = |v: Option<String>| v.unwrap_or_default();
                let _ = writeln!(
                    csv,
                    ",ok,{},{},{},{},{},{},{},",
                    opt(d.map(|d| d.faulty_agent.to_string())),
                    opt(d.map(|d| format_float(d.delta_hat[0]))),
                    opt(d.map(|d| format_float(d.delta_hat[1]))),
                    opt(d.map(|d| d.k_detect.to_string())),
                    opt(d.and_then(|d| d.latency).map(|l| l.to_string())),
                    opt(r.final_centroid_error.map(format_float)),
                    r.accommodation.outcome,
                );
            }
            Err(f) => {
                let msg = match f {
                    Failure::Invalid(m) => {
                        invalid += 1;
                        m
                    }
                    Failure::Runtime(m) => m,
                };
                let _ = writeln!(csv, ",failed,,,,,,,,{}", csv_field(msg));
            }
        }
    }

    fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let summary = dir.join("summary.csv");
    fs::write(&summary, csv).map_err(|e| Failure::Runtime(format!("{}: {e}", summary.display())))?;
    println!(
        "{} of {} grid points succeeded; summary in {}",
        ok,
        points.len(),
        summary.display()
    );
    match ok {
        0 if invalid == points.len() => Err(Failure::Invalid("every grid point was invalid".into())),
        0 => Err(Failure::Runtime("every grid point failed".into())),
        _ => Ok(()),
    }
}

fn cmd_presets(args: &PresetsArgs) -> Result<(), Failure> {
    match &args.show {
        Some(name) => {
            let p = presets::preset(name)
                .ok_or_else(|| Failure::Invalid(format!("unknown preset '{name}'")))?;
            print!("{}", p.text);
        }
        None => {
            for p in presets::PRESETS {
                println!("{:<26} {}", p.name, p.summary);
            }
        }
    }
    Ok(())
}

/// Path of the per-point output directory used by `sweep`.
pub fn sweep_point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point-{index:03}"))
}
