//! Operator entry point for the rsskit safety toolkit: safe-distance
//! queries, scenario simulation with responsibility reports, the
//! collision-freedom fuzzer, Monte Carlo checks of the statistical safety
//! lemmas, and a semantic-policy replanning demo.
//!
//! Exit codes: 0 = clean, 1 = operational error (I/O, malformed input
//! files), 2 = a safety property was violated, 64 = command-line usage
//! error. Every subcommand supports `--json`; JSON outputs keep a fixed key
//! set and are reproducible for a given seed.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsskit::config::Config;
use rsskit::policy::{self, SceneSample, WorldModel};
use rsskit::rss_core::{
    naive_prediction, safe_lat_distance, safe_lon_distance_opposite, safe_lon_distance_same_dir,
};
use rsskit::sensing::{
    exp_inequality_check, monte_carlo_fusion, validation_infeasibility, CorrelationModel,
};
use rsskit::sim::{self, EventKind, GeneratorConfig, Scenario, ScenarioFamily};
use serde::Deserialize;
use serde_json::json;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_UNSAFE: u8 = 2;
const EXIT_USAGE: u8 = 64;
/// Conventional status for a write cut short by the reader going away
/// (`SIGPIPE`), e.g. when output is piped into `head`.
const EXIT_PIPE_CLOSED: i32 = 141;

/// Writes one line to stdout, exiting quietly when the pipe is closed
/// instead of panicking like `println!` would.
macro_rules! outln {
    ($($arg:tt)*) => {
        emit_line(std::format_args!($($arg)*))
    };
}

fn emit_line(args: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{args}").is_err() {
        std::process::exit(EXIT_PIPE_CLOSED);
    }
}

#[derive(Parser)]
#[command(
    name = "rsskit",
    version,
    about = "Safety-envelope toolkit: safe distances, scenario runs, fuzzing, validation"
)]
struct Cli {
    /// Configuration file (JSON); defaults to $RSSKIT_CONFIG, then to the
    /// built-in defaults.
    #[arg(long, global = true, env = "RSSKIT_CONFIG")]
    config: Option<PathBuf>,
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for artifacts (traces, reports, failure reproductions).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for the parallel suites (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print minimum safe distances for velocity pairs (all three formulas).
    Check(CheckArgs),
    /// Simulate a scenario file and report events, collisions, and blame.
    Run(RunArgs),
    /// Generate and run all-compliant scenarios; any collision is a failure.
    FuzzUtopia(FuzzArgs),
    /// Monte Carlo checks of the statistical validation lemmas.
    ValidateSensing(SensingArgs),
    /// Replan a semantic action every period over a predicted scene stream.
    PolicyDemo(PolicyDemoArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Rear-car speed for the same-direction formula (m/s, >= 0).
    #[arg(long)]
    vr: Option<f64>,
    /// Front-car speed for the same-direction formula (m/s, >= 0).
    #[arg(long)]
    vf: Option<f64>,
    /// Correct-direction speed for the opposite-direction formula (m/s, >= 0).
    #[arg(long, allow_hyphen_values = true)]
    v1: Option<f64>,
    /// Wrong-direction speed for the opposite-direction formula (m/s, <= 0).
    #[arg(long, allow_hyphen_values = true)]
    v2: Option<f64>,
    /// Lateral speed of the left car (m/s, positive = rightward).
    #[arg(long, allow_hyphen_values = true)]
    lat1: Option<f64>,
    /// Lateral speed of the right car (m/s, positive = rightward).
    #[arg(long, allow_hyphen_values = true)]
    lat2: Option<f64>,
    /// Override: response time rho (s).
    #[arg(long)]
    rho: Option<f64>,
    /// Override: maximum longitudinal acceleration (m/s^2).
    #[arg(long)]
    max_accel: Option<f64>,
    /// Override: minimum guaranteed braking (m/s^2).
    #[arg(long)]
    min_brake: Option<f64>,
    /// Override: maximum braking assumed of others (m/s^2).
    #[arg(long)]
    max_brake: Option<f64>,
    /// Override: minimum braking of the correct-direction car (m/s^2).
    #[arg(long)]
    min_brake_correct: Option<f64>,
    /// Override: maximum lateral acceleration (m/s^2).
    #[arg(long)]
    lat_max_accel: Option<f64>,
    /// Override: minimum lateral braking (m/s^2).
    #[arg(long)]
    lat_min_brake: Option<f64>,
    /// Override: lateral fluctuation margin mu (m).
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Highway,
    Junction,
    Unstructured,
    OccludedMerge,
}

impl FamilyArg {
    fn to_family(self) -> ScenarioFamily {
        match self {
            FamilyArg::Highway => ScenarioFamily::Highway,
            FamilyArg::Junction => ScenarioFamily::Junction,
            FamilyArg::Unstructured => ScenarioFamily::Unstructured,
            FamilyArg::OccludedMerge => ScenarioFamily::OccludedMerge,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FamilyArg::Highway => "highway",
            FamilyArg::Junction => "junction",
            FamilyArg::Unstructured => "unstructured",
            FamilyArg::OccludedMerge => "occluded-merge",
        }
    }
}

const ALL_FAMILIES: [FamilyArg; 4] =
    [FamilyArg::Highway, FamilyArg::Junction, FamilyArg::Unstructured, FamilyArg::OccludedMerge];

#[derive(Args)]
struct FuzzArgs {
    /// Scenarios per family.
    #[arg(short = 'n', long = "runs", default_value_t = 100)]
    runs: usize,
    /// Restrict to one scenario family (default: all four).
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Base seed; scenario i depends only on (seed, i).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the generated scenarios' duration (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Override the generated scenarios' physics timestep (s).
    #[arg(long)]
    timestep: Option<f64>,
}

#[derive(Args)]
struct SensingArgs {
    /// Per-subsystem failure probability for the fusion Monte Carlo.
    #[arg(long, default_value_t = 0.01)]
    p: f64,
    /// One-sided approximate-independence factor (1 = independent).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Fusion Monte Carlo trials.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    /// Seed for all Monte Carlo draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Event probability for the validation-infeasibility check.
    #[arg(long, default_value_t = 0.01)]
    p1: f64,
    /// Trials for the validation-infeasibility check.
    #[arg(long, default_value_t = 100_000)]
    infeasibility_trials: u64,
    /// Grid resolution for the exponential-inequality check.
    #[arg(long, default_value_t = 1e-4)]
    resolution: f64,
}

#[derive(Args)]
struct PolicyDemoArgs {
    /// Demo file (JSON): initial scene plus a duration.
    #[arg(long)]
    scenario: PathBuf,
}

/// A policy-demo input: the world as first observed and for how long to
/// keep replanning against its constant-velocity evolution.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDemoSpec {
    scene: policy::Scene,
    duration: f64,
    /// Seconds between scene observations; defaults to the replan period.
    #[serde(default)]
    sample_period: Option<f64>,
}

enum CliError {
    Usage(String),
    Op(String),
}

fn usage(msg: impl Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn op(msg: impl Display) -> CliError {
    CliError::Op(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Op(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| op(format!("thread pool: {e}")))?;
    }
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| op(format!("{}: {e}", path.display())))?,
        None => Config::default(),
    };
    match &cli.cmd {
        Cmd::Check(args) => cmd_check(&config, args, cli.json),
        Cmd::Run(args) => cmd_run(args, cli.json, cli.out_dir.as_deref()),
        Cmd::FuzzUtopia(args) => cmd_fuzz(args, cli.json, cli.out_dir.as_deref()),
        Cmd::ValidateSensing(args) => cmd_validate_sensing(args, cli.json),
        Cmd::PolicyDemo(args) => cmd_policy_demo(&config, args, cli.json, cli.out_dir.as_deref()),
    }
}

/// Pulls a velocity pair out of two options that must be given together.
fn pair(a: Option<f64>, b: Option<f64>, what: &str) -> Result<Option<(f64, f64)>, CliError> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a, b))),
        (None, None) => Ok(None),
        _ => Err(usage(format!("{what} must be given together"))),
    }
}

fn cmd_check(config: &Config, args: &CheckArgs, json: bool) -> Result<u8, CliError> {
    let mut p = config.rss;
    if let Some(v) = args.rho {
        p.rho = v;
    }
    if let Some(v) = args.max_accel {
        p.a_max_accel = v;
    }
    if let Some(v) = args.min_brake {
        p.a_min_brake = v;
    }
    if let Some(v) = args.max_brake {
        p.a_max_brake = v;
    }
    if let Some(v) = args.min_brake_correct {
        p.a_min_brake_correct = v;
    }
    if let Some(v) = args.lat_max_accel {
        p.a_lat_max_accel = v;
    }
    if let Some(v) = args.lat_min_brake {
        p.a_lat_min_brake = v;
    }
    if let Some(v) = args.mu {
        p.mu = v;
    }
    let p = p.validated().map_err(usage)?;

    let same = pair(args.vr, args.vf, "--vr and --vf")?;
    let opposite = pair(args.v1, args.v2, "--v1 and --v2")?;
    let lateral = pair(args.lat1, args.lat2, "--lat1 and --lat2")?;
    if same.is_none() && opposite.is_none() && lateral.is_none() {
        return Err(usage(
            "give at least one velocity pair: --vr/--vf, --v1/--v2, or --lat1/--lat2",
        ));
    }

    let same = same
        .map(|(vr, vf)| safe_lon_distance_same_dir(vr, vf, &p).map(|d| (vr, vf, d)))
        .transpose()
        .map_err(usage)?;
    let opposite = opposite
        .map(|(v1, v2)| safe_lon_distance_opposite(v1, v2, &p).map(|d| (v1, v2, d)))
        .transpose()
        .map_err(usage)?;
    let lateral = lateral
        .map(|(l1, l2)| safe_lat_distance(l1, l2, &p).map(|d| (l1, l2, d)))
        .transpose()
        .map_err(usage)?;

    if json {
        let entry = |t: Option<(f64, f64, f64)>, a: &str, b: &str| match t {
            Some((x, y, d)) => json!({ a: x, b: y, "d_min": d }),
            None => serde_json::Value::Null,
        };
        print_json(&json!({
            "params": p,
            "same_direction": entry(same, "v_rear", "v_front"),
            "opposite_direction": entry(opposite, "v1", "v2"),
            "lateral": entry(lateral, "v1", "v2"),
        }));
    } else {
        if let Some((vr, vf, d)) = same {
            outln!("same-direction   d_min(v_rear={vr}, v_front={vf}) = {d:.3} m");
        }
        if let Some((v1, v2, d)) = opposite {
            outln!("opposite-direction d_min(v1={v1}, v2={v2}) = {d:.3} m");
        }
        if let Some((l1, l2, d)) = lateral {
            outln!("lateral          d_min(v1={l1}, v2={l2}) = {d:.3} m");
        }
    }
    Ok(0)
}

/// Scenario names become file-name stems; anything exotic becomes '_'.
fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn write_artifact(dir: &Path, file: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| op(format!("{}: {e}", dir.display())))?;
    let path = dir.join(file);
    std::fs::write(&path, contents).map_err(|e| op(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_run(args: &RunArgs, json: bool, out_dir: Option<&Path>) -> Result<u8, CliError> {
    let mut sc = Scenario::load(&args.scenario)
        .map_err(|e| op(format!("{}: {e}", args.scenario.display())))?;
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    let trace = sim::run(&sc).map_err(op)?;
    let report = sim::assign_responsibility(&sc, &trace);
    let collisions = trace.collisions();
    let violations =
        trace.events.iter().filter(|e| e.kind == EventKind::Violation).count();
    let safe = collisions.is_empty() && violations == 0;

    let mut artifacts = serde_json::Value::Null;
    if let Some(dir) = out_dir {
        let stem = sanitize(&sc.name);
        let t = write_artifact(dir, &format!("{stem}_trace.jsonl"), &trace.steps_jsonl())?;
        let e = write_artifact(dir, &format!("{stem}_events.json"), &trace.events_json())?;
        let r = write_artifact(
            dir,
            &format!("{stem}_responsibility.json"),
            &serde_json::to_string_pretty(&report).expect("report serializes"),
        )?;
        artifacts = json!({
            "trace": t.display().to_string(),
            "events": e.display().to_string(),
            "responsibility": r.display().to_string(),
        });
    }

    if json {
        print_json(&json!({
            "scenario": sc.name,
            "seed": sc.seed,
            "timestep": sc.timestep,
            "duration": sc.duration,
            "steps": trace.steps.len(),
            "digest": trace.digest(),
            "safe": safe,
            "collisions": collisions,
            "violations": violations,
            "events": trace.events,
            "responsibility": report,
            "artifacts": artifacts,
        }));
    } else {
        outln!("scenario  {}", sc.name);
        outln!("steps     {} ({} s at {} s)", trace.steps.len(), sc.duration, sc.timestep);
        outln!("digest    {}", trace.digest());
        outln!("events    {}", trace.events.len());
        for e in &trace.events {
            match e.b {
                Some(b) => outln!("  {:>8.3}s  {:?}  agents {} and {}", e.t, e.kind, e.a, b),
                None => outln!("  {:>8.3}s  {:?}  agent {}", e.t, e.kind, e.a),
            }
        }
        for incident in &report.incidents {
            let blamed: Vec<String> = incident
                .verdicts
                .iter()
                .filter(|v| !v.compliant)
                .map(|v| v.id.to_string())
                .collect();
            outln!(
                "blame     collision at {:.3}s between {} and {}: responsible agents [{}]",
                incident.t_collision,
                incident.a,
                incident.b,
                blamed.join(", ")
            );
            if !incident.contributing.is_empty() {
                let c: Vec<String> =
                    incident.contributing.iter().map(|id| id.to_string()).collect();
                outln!("          contributing non-party agents: [{}]", c.join(", "));
            }
        }
        outln!("result    {}", if safe { "SAFE" } else { "UNSAFE" });
    }
    Ok(if safe { 0 } else { EXIT_UNSAFE })
}

fn cmd_fuzz(args: &FuzzArgs, json: bool, out_dir: Option<&Path>) -> Result<u8, CliError> {
    if args.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let families: Vec<FamilyArg> = match args.family {
        Some(f) => vec![f],
        None => ALL_FAMILIES.to_vec(),
    };
    let mut sections = Vec::new();
    let mut clean = true;
    for fam in &families {
        let mut cfg = GeneratorConfig::for_family(fam.to_family());
        if let Some(d) = args.duration {
            if d <= 0.0 {
                return Err(usage("--duration must be positive"));
            }
            cfg.duration = d;
        }
        if let Some(ts) = args.timestep {
            cfg.timestep = ts;
        }
        let report = sim::utopia_fuzz(args.runs, &cfg, args.seed).map_err(op)?;
        clean &= report.clean();
        if let Some(dir) = out_dir {
            for failure in &report.failures {
                write_artifact(
                    dir,
                    &format!("{}_failure_{}.json", fam.name(), failure.index),
                    &failure.scenario.to_json_pretty(),
                )?;
            }
        }
        sections.push((fam.name(), report));
    }

    if json {
        let fams: Vec<serde_json::Value> = sections
            .iter()
            .map(|(name, r)| {
                json!({
                    "family": name,
                    "runs": r.runs,
                    "collision_free": r.collision_free,
                    "failures": r.failures,
                })
            })
            .collect();
        print_json(&json!({ "seed": args.seed, "families": fams, "clean": clean }));
    } else {
        for (name, r) in &sections {
            outln!("{name:>14}: {}/{} collision-free", r.collision_free, r.runs);
            for f in &r.failures {
                let c = &f.collisions[0];
                outln!(
                    "  failure #{}: '{}' agents {} and {} collide at {:.2}s",
                    f.index,
                    f.scenario.name,
                    c.a,
                    c.b.unwrap_or(c.a),
                    c.t
                );
            }
        }
        outln!("result: {}", if clean { "CLEAN" } else { "FAILURES" });
    }
    Ok(if clean { 0 } else { EXIT_UNSAFE })
}

fn cmd_validate_sensing(args: &SensingArgs, json: bool) -> Result<u8, CliError> {
    if args.c < 1.0 {
        return Err(usage("--c must be at least 1"));
    }
    let model = if args.c == 1.0 {
        CorrelationModel::Independent
    } else {
        CorrelationModel::Coupled { c: args.c }
    };
    let fusion =
        monte_carlo_fusion(args.p, args.p, model, args.trials, Some(args.seed)).map_err(usage)?;
    let infeasibility =
        validation_infeasibility(args.p1, args.infeasibility_trials, Some(args.seed))
            .map_err(usage)?;
    let exp = exp_inequality_check(args.resolution);

    let infeasibility_pass = infeasibility.empirical >= infeasibility.lower_bound;
    let exp_pass = exp.min_margin >= 0.0;
    let pass = fusion.within_bound && infeasibility_pass && exp_pass;

    if json {
        print_json(&json!({
            "empirical": fusion.either.rate,
            "bound": fusion.bound,
            "ci": [fusion.either.ci_low, fusion.either.ci_high],
            "pass": pass,
            "fusion": fusion,
            "infeasibility": { "report": infeasibility, "pass": infeasibility_pass },
            "exp_inequality": { "report": exp, "pass": exp_pass },
        }));
    } else {
        outln!(
            "fusion         miss {:.3e}  ghost {:.3e}  either {:.3e}  bound {:.3e}  {}",
            fusion.miss.rate,
            fusion.ghost.rate,
            fusion.either.rate,
            fusion.bound,
            verdict(fusion.within_bound)
        );
        outln!(
            "infeasibility  Pr[Z=0] = {:.4} (closed form {:.4}, floor e^-2 = {:.4})  {}",
            infeasibility.empirical,
            infeasibility.closed_form,
            infeasibility.lower_bound,
            verdict(infeasibility_pass)
        );
        outln!(
            "exp inequality min margin {:.3e} over {} points, f'(0.1) = {:.6}  {}",
            exp.min_margin,
            exp.grid_points,
            exp.derivative_at_tenth,
            verdict(exp_pass)
        );
        outln!("result: {}", verdict(pass));
    }
    Ok(if pass { 0 } else { EXIT_UNSAFE })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_policy_demo(
    config: &Config,
    args: &PolicyDemoArgs,
    json: bool,
    out_dir: Option<&Path>,
) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| op(format!("{}: {e}", args.scenario.display())))?;
    let spec: PolicyDemoSpec = serde_json::from_str(&text)
        .map_err(|e| op(format!("{}: {e}", args.scenario.display())))?;
    if !(spec.duration > 0.0) {
        return Err(op("demo duration must be positive".to_string()));
    }
    spec.scene.validate().map_err(op)?;

    // The observation stream: the initial scene evolved under constant
    // velocity (the planner's own prediction model), sampled densely enough
    // that every replan tick sees a fresh scene.
    let period = spec.sample_period.unwrap_or(config.policy.replan_period);
    if !(period > 0.0) {
        return Err(op("sample period must be positive".to_string()));
    }
    let world = WorldModel::from_scene(&spec.scene);
    let mut samples = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * period;
        if t > spec.duration + 1e-9 {
            break;
        }
        let mut scene = spec.scene.clone();
        scene.ego = naive_prediction(&spec.scene.ego, t);
        scene.agents = world.predict(t);
        samples.push(SceneSample { t, scene });
        k += 1;
    }

    let action_count = policy::action_count_formula(&spec.scene, &config.policy);
    let decisions =
        policy::replan_loop(&samples, spec.duration, &config.reward, &config.policy, &config.rss)
            .map_err(op)?;
    let fallbacks = decisions.iter().filter(|d| d.outcome.fallback).count();

    let ticks: Vec<serde_json::Value> = decisions
        .iter()
        .map(|d| {
            json!({
                "t": d.t,
                "index": d.outcome.index,
                "fallback": d.outcome.fallback,
                "q": d.outcome.q,
                "action": d.outcome.action,
            })
        })
        .collect();
    let summary = json!({
        "scene": args.scenario.display().to_string(),
        "duration": spec.duration,
        "action_count": action_count,
        "ticks": ticks.len(),
        "fallbacks": fallbacks,
        "decisions": ticks,
    });
    if let Some(dir) = out_dir {
        let stem = args
            .scenario
            .file_stem()
            .map(|s| sanitize(&s.to_string_lossy()))
            .unwrap_or_else(|| "policy_demo".into());
        write_artifact(
            dir,
            &format!("{stem}_decisions.json"),
            &serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )?;
    }
    if json {
        print_json(&summary);
    } else {
        outln!(
            "{} actions per tick, {} ticks, {} fallback engagements",
            action_count,
            decisions.len(),
            fallbacks
        );
        for d in &decisions {
            let kind = match &d.outcome.action.longitudinal {
                policy::LongitudinalGoal::Relative { agent, ahead, time_gap } => format!(
                    "hold {:.1}s gap {} agent {}",
                    time_gap,
                    if *ahead { "behind" } else { "ahead of" },
                    agent
                ),
                policy::LongitudinalGoal::SpeedTarget { fraction } => {
                    format!("cruise at {:.0}% of desired speed", fraction * 100.0)
                }
                policy::LongitudinalGoal::SpeedAtPosition { position, speed } => {
                    format!("reach {position:.1} m at <= {speed:.1} m/s")
                }
                policy::LongitudinalGoal::SpeedProfile { .. } => "follow speed profile".into(),
            };
            outln!(
                "  t={:>5.2}s  lane {} slot {}  {}  (q {:.3}{})",
                d.t,
                d.outcome.action.lateral.lane,
                d.outcome.action.lateral.slot,
                kind,
                d.outcome.q,
                if d.outcome.fallback { ", fallback" } else { "" }
            );
        }
    }
    Ok(0)
}

fn print_json(value: &serde_json::Value) {
    outln!("{}", serde_json::to_string_pretty(value).expect("JSON output serializes"));
}
