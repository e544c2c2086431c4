//! `flexray-sim` command line.
//!
//! Exit codes: 0 success, 1 property or assumption failure, 2 usage or
//! parse error, 3 internal error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::engine::{simulate_with, CollisionPolicy, SimError, Trace};
use crate::monitor::Predicate;
use crate::protocol::{ClusterConfig, Frame};
use crate::refinement::{
    gen_inputs, replay, run_campaign_with_jobs, trial_rng, CampaignConfig, CampaignMode, FrameStyle,
};
use crate::stream::{Interval, TimeIndex, TimedStreamPrefix};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const SEED_ENV: &str = "FLEXRAY_SIM_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "flexray-sim",
    version,
    about = "Simulate and check the FlexRay static segment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a cluster configuration against the static assumptions.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the architecture and write a JSONL trace.
    Simulate(SimulateArgs),
    /// Evaluate predicate monitors over a JSONL trace.
    Check {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Repeatable; defaults to the requirement predicates.
        #[arg(long = "predicate")]
        predicates: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a refinement campaign.
    Refine {
        #[command(flatten)]
        campaign: CampaignArgs,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce one campaign trial and write its trace.
    Replay {
        #[command(flatten)]
        campaign: CampaignArgs,
        #[arg(long)]
        trial: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub horizon: u64,
    /// JSONL input streams; one `{"t":..,"returns":[..]}` object per tick.
    #[arg(long, conflicts_with = "seed")]
    pub inputs: Option<PathBuf>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub continue_on_collision: bool,
    #[arg(long)]
    pub lint_slot_mismatch: bool,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 5)]
    pub max_nodes: usize,
    #[arg(long = "max-cycle", default_value_t = 10)]
    pub max_cycle: u64,
    #[arg(long, default_value_t = 100)]
    pub horizon: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub exhaustive_small: bool,
    #[arg(long)]
    pub sabotage: bool,
    /// Generate arbitrary frame slot fields.
    #[arg(long)]
    pub adversarial: bool,
}

impl CampaignArgs {
    pub fn to_config(&self) -> CampaignConfig {
        let frames = if self.adversarial {
            FrameStyle::Adversarial
        } else {
            FrameStyle::Cooperative
        };
        if self.exhaustive_small {
            CampaignConfig {
                seed: self.seed,
                sabotage: self.sabotage,
                frames,
                ..CampaignConfig::exhaustive_small()
            }
        } else {
            CampaignConfig {
                trials: self.trials,
                max_nodes: self.max_nodes,
                max_cycle_length: self.max_cycle,
                horizon: self.horizon,
                seed: self.seed,
                mode: CampaignMode::Random,
                sabotage: self.sabotage,
                frames,
            }
        }
    }
}

/// One line of an inputs file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputLine {
    pub t: TimeIndex,
    pub returns: Vec<Interval<Frame>>,
}

pub fn inputs_to_jsonl(inputs: &[TimedStreamPrefix<Frame>]) -> String {
    let horizon = inputs.first().map_or(0, |s| s.horizon());
    let mut out = String::new();
    for t in 0..horizon {
        let line = InputLine {
            t,
            returns: inputs
                .iter()
                .map(|s| s.intervals()[t as usize].clone())
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("serialisable"));
        out.push('\n');
    }
    out
}

pub fn inputs_from_jsonl(text: &str, n: usize) -> Result<Vec<TimedStreamPrefix<Frame>>, String> {
    let mut streams: Vec<TimedStreamPrefix<Frame>> = vec![TimedStreamPrefix::new(Vec::new()); n];
    let mut expected = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: InputLine =
            serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        if rec.t != expected {
            return Err(format!(
                "line {}: expected t={expected}, found t={}",
                i + 1,
                rec.t
            ));
        }
        if rec.returns.len() != n {
            return Err(format!(
                "line {}: {} return channels for {n} nodes",
                i + 1,
                rec.returns.len()
            ));
        }
        for (s, iv) in streams.iter_mut().zip(rec.returns) {
            s.push(iv);
        }
        expected += 1;
    }
    Ok(streams)
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_cluster(path: &Path) -> Result<ClusterConfig, Failure> {
    let text = read(path)?;
    ClusterConfig::from_json(&text)
        .map_err(|e| usage(format!("{}: parse error: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, body: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: format!("{}: {e}", p.display()),
        }),
        None => stdout.write_all(body.as_bytes()).map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        }),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Validate { config } => cmd_validate(&config, stdout),
        Command::Simulate(args) => cmd_simulate(&args, stdout, stderr),
        Command::Check {
            trace,
            config,
            predicates,
            out,
        } => cmd_check(&trace, &config, &predicates, &out, stdout),
        Command::Refine {
            campaign,
            jobs,
            out,
        } => cmd_refine(&campaign, jobs, &out, stdout, stderr),
        Command::Replay {
            campaign,
            trial,
            out,
        } => cmd_replay(&campaign, trial, &out, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn cmd_validate(config: &Path, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let cluster = load_cluster(config)?;
    let mut ok = true;
    let mut body = String::new();
    for (name, v) in cluster.static_verdicts() {
        match v.violation() {
            None => body.push_str(&format!("{name}: ok\n")),
            Some(x) => {
                ok = false;
                body.push_str(&format!("{name}: FAILED: {}\n", x.detail));
            }
        }
    }
    emit(&None, stdout, &body)?;
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_simulate(
    args: &SimulateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let cluster = load_cluster(&args.config)?;
    let inputs = match (&args.inputs, args.seed) {
        (Some(path), _) => {
            let text = read(path)?;
            inputs_from_jsonl(&text, cluster.len())
                .map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(seed)) => gen_inputs(&mut trial_rng(seed, 0), &cluster, args.horizon),
        (None, None) => {
            return Err(usage(format!(
                "simulate needs --inputs or --seed (or {SEED_ENV})"
            )))
        }
    };
    let policy = if args.continue_on_collision {
        CollisionPolicy::RecordAndContinue
    } else {
        CollisionPolicy::Abort
    };
    let (trace, code) = match simulate_with(&cluster, &inputs, args.horizon, policy) {
        Ok(sim) => {
            for c in &sim.collisions {
                let _ = writeln!(
                    stderr,
                    "warning: bus collision at t={} between nodes {:?}",
                    c.t, c.senders
                );
            }
            (sim.trace, EXIT_OK)
        }
        Err(SimError::Collision { collision, partial }) => {
            let _ = writeln!(
                stderr,
                "error: bus collision at t={} between nodes {:?}; trace truncated",
                collision.t, collision.senders
            );
            (partial, EXIT_FAILURE)
        }
        Err(e @ SimError::InvalidNode { .. }) => {
            return Err(Failure {
                code: EXIT_FAILURE,
                message: e.to_string(),
            })
        }
        Err(e) => return Err(usage(e.to_string())),
    };
    if args.lint_slot_mismatch {
        lint_slots(&trace, stderr);
    }
    emit(&args.out, stdout, &trace.to_jsonl())?;
    Ok(code)
}

fn lint_slots(trace: &Trace, stderr: &mut dyn Write) {
    for r in trace.records() {
        for (k, send) in r.send.iter().enumerate() {
            let Some(&active) = r.activation[k].single() else {
                continue;
            };
            for f in send.iter().filter(|f| f.slot != active) {
                let _ = writeln!(
                    stderr,
                    "lint: t={} node {k} sent a frame for slot {} in slot {active}",
                    r.t, f.slot
                );
            }
        }
    }
}

fn cmd_check(
    trace_path: &Path,
    config: &Path,
    predicates: &[String],
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<i32, Failure> {
    let selected: Vec<Predicate> = if predicates.is_empty() {
        vec![
            Predicate::FrameTransmission,
            Predicate::Broadcast,
            Predicate::Send,
            Predicate::Receive,
            Predicate::MsgBounds,
        ]
    } else {
        predicates
            .iter()
            .map(|p| p.parse::<Predicate>().map_err(|e| usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    let cluster = load_cluster(config)?;
    let text = read(trace_path)?;
    let trace =
        Trace::from_jsonl(&text).map_err(|e| usage(format!("{}: {e}", trace_path.display())))?;

    let mut reports = Vec::new();
    let mut code = EXIT_OK;
    for p in selected {
        let v = p
            .evaluate(&trace, &cluster)
            .map_err(|e| usage(e.to_string()))?;
        if !v.holds() {
            code = EXIT_FAILURE;
        }
        reports.push(v.report(p.name()));
    }
    let mut body = serde_json::to_string_pretty(&reports).expect("serialisable");
    body.push('\n');
    emit(out, stdout, &body)?;
    Ok(code)
}

fn cmd_refine(
    campaign: &CampaignArgs,
    jobs: usize,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let cfg = campaign.to_config();
    let report = run_campaign_with_jobs(&cfg, jobs.max(1)).map_err(|e| usage(e.to_string()))?;
    let _ = writeln!(
        stderr,
        "{} trials, {} checked, {} assumption rejections, {} failures in {:.2?}",
        report.trials_run,
        report.refinement_checks,
        report.assumption_rejections,
        report.failures.len(),
        report.wall_time
    );
    let mut body = report.to_json();
    body.push('\n');
    emit(out, stdout, &body)?;
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn cmd_replay(
    campaign: &CampaignArgs,
    trial: u64,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let cfg = campaign.to_config();
    let r = replay(cfg.seed, trial, &cfg).map_err(|e| usage(e.to_string()))?;
    let _ = writeln!(stderr, "cluster: {}", r.case.cluster.to_json());
    if let Some(a) = &r.assumption_failure {
        let _ = writeln!(stderr, "assumption rejected: {a}");
    }
    let mut failed = false;
    for (name, v) in &r.verdicts {
        failed |= !v.holds();
        let _ = writeln!(
            stderr,
            "{}",
            serde_json::to_string(&v.report(name)).expect("serialisable")
        );
    }
    emit(out, stdout, &r.trace.to_jsonl())?;
    Ok(if failed { EXIT_FAILURE } else { EXIT_OK })
}
