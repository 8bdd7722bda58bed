//! Command-line frontend: synthesis jobs over problem files with a JSON
//! report on stdout. Exit codes: 0 sat, 1 unsat, 2 error or timeout.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdpsynth::colored::ColoredMdp;
use mdpsynth::dt::{min_dt_sweep, render_dt_named, synth_dt, DecisionTree};
use mdpsynth::ingest::load_problem;
use mdpsynth::oracle::{brute_feasible, brute_robust};
use mdpsynth::params::{enumerate_space, ParamKind, PartialAssignment};
use mdpsynth::robust::{solve_robust, verify_assignment, RobustConfig};
use mdpsynth::solver::{solve, SearchProblem, SolverConfig, Verdict};
use mdpsynth::theory::{as_hook, Polarity, TheoryCache, TheorySettings};
use mdpsynth::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn as_bool(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Parser)]
#[command(name = "mdpsynth", about = "Policy synthesis for parameter-guarded MDPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Overrides the threshold from the problem file.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Value computation precision.
    #[arg(long, global = true, default_value_t = 1e-4)]
    precision: f64,
    /// Defer partial-assignment theory checks until one total has been seen.
    #[arg(long, global = true, value_enum, default_value_t = OnOff::On)]
    lazy_start: OnOff,
    /// Theory result caching.
    #[arg(long, global = true, value_enum, default_value_t = OnOff::On)]
    cache: OnOff,
    /// Wall-clock budget in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Enumeration cap for the oracle and witness re-verification.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_enum: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether any assignment meets the threshold.
    Check { model: PathBuf },
    /// Decide whether some controllable assignment withstands every
    /// uncontrollable completion.
    Robust { model: PathBuf },
    /// Synthesize a decision-tree shaped policy.
    Dt {
        model: PathBuf,
        /// Single tree size to try.
        #[arg(long, conflicts_with = "sweep")]
        nodes: Option<usize>,
        /// Comma-separated ascending odd sizes to sweep.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<usize>>,
        #[arg(long)]
        robust: bool,
    },
    /// Brute-force ground truth.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        robust: bool,
    },
    /// Evaluate one total assignment, given as name=value pairs.
    Value {
        model: PathBuf,
        #[arg(long, value_delimiter = ',')]
        assign: Vec<String>,
    },
}

#[derive(Serialize)]
struct ConfigEcho {
    command: String,
    model: String,
    threshold: f64,
    precision: f64,
    lazy_start: bool,
    cache: bool,
    timeout_secs: Option<f64>,
    max_enum: u64,
}

#[derive(Serialize, Default)]
struct StatsEcho {
    decisions: u64,
    conflicts: u64,
    theory_calls: u64,
    cache_hits: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<u64>,
}

#[derive(Serialize)]
struct SweepEntry {
    nodes: usize,
    verdict: Verdict,
}

#[derive(Serialize)]
struct OracleEcho {
    space_count: u64,
    viable_count: u64,
}

#[derive(Serialize)]
struct RunReport {
    verdict: String,
    config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<BTreeMap<String, i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tree: Option<DecisionTree>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tree_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<Vec<SweepEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<StatsEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    wall_time_secs: f64,
}

fn named(c: &ColoredMdp, k: &PartialAssignment) -> BTreeMap<String, i64> {
    k.iter().map(|(p, v)| (c.params.get(p).name.clone(), v)).collect()
}

/// Minimum value of the witness over all compatible completions, checking
/// each one passes. Errors if any fails (the report must never carry an
/// unverified witness).
fn reverify_robust(
    c: &ColoredMdp,
    nu: f64,
    precision: f64,
    theta_x: &PartialAssignment,
    max_enum: u64,
) -> Result<f64> {
    let mut worst: Option<f64> = None;
    let mut seen = 0u64;
    for theta in enumerate_space(&c.params, &c.tau) {
        seen += 1;
        if seen > max_enum {
            return Err(Error::Solver("witness re-verification exceeds the enumeration cap".into()));
        }
        let k = theta.as_partial();
        if !theta_x.subset_of(&k) {
            continue;
        }
        let (viable, value) = verify_assignment(c, nu, &k, precision)?;
        if !viable {
            return Err(Error::Solver("witness failed re-verification".into()));
        }
        worst = Some(worst.map_or(value, |w: f64| w.min(value)));
    }
    worst.ok_or_else(|| Error::Solver("witness has no compatible completion".into()))
}

struct Job {
    colored: ColoredMdp,
    nu: f64,
    config: RobustConfig,
    max_enum: u64,
}

impl Job {
    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            lazy_start: self.config.lazy_start,
            max_decisions: None,
            deadline: self.config.deadline,
        }
    }
}

enum Outcome {
    Sat,
    Unsat,
}

fn run_check(job: &Job, report: &mut RunReport) -> Result<Outcome> {
    let c = &job.colored;
    let problem = SearchProblem::over_all(&c.params, &c.tau);
    let mut cache = TheoryCache::new(job.config.use_cache);
    let settings = TheorySettings {
        nu: job.nu,
        precision: job.config.precision,
        deadline: job.config.deadline,
    };
    let mut hook = as_hook(c, settings, Polarity::Positive, Some(&mut cache));
    let out = solve(&problem, &mut hook, &job.solver_config())?;
    report.stats = Some(StatsEcho {
        decisions: out.stats.decisions,
        conflicts: out.stats.conflicts,
        theory_calls: out.stats.theory_calls,
        cache_hits: out.stats.cache_hits,
        iterations: None,
    });
    match (out.verdict, out.witness) {
        (Verdict::Sat, Some(w)) => {
            let (viable, value) = verify_assignment(c, job.nu, &w, job.config.precision)?;
            if !viable {
                return Err(Error::Solver("witness failed re-verification".into()));
            }
            report.witness = Some(named(c, &w));
            report.value = Some(value);
            Ok(Outcome::Sat)
        }
        _ => Ok(Outcome::Unsat),
    }
}

fn run_robust(job: &Job, report: &mut RunReport) -> Result<Outcome> {
    let c = &job.colored;
    let out = solve_robust(c, job.nu, &job.config)?;
    report.stats = Some(StatsEcho {
        decisions: out.stats.decisions,
        conflicts: out.stats.conflicts,
        theory_calls: out.stats.theory_calls,
        cache_hits: out.stats.cache_hits,
        iterations: Some(out.stats.iterations),
    });
    match (out.verdict, out.witness_x) {
        (Verdict::Sat, Some(w)) => {
            let value =
                reverify_robust(c, job.nu, job.config.precision, &w, job.max_enum)?;
            report.witness = Some(named(c, &w));
            report.value = Some(value);
            Ok(Outcome::Sat)
        }
        _ => Ok(Outcome::Unsat),
    }
}

fn action_namer(c: &ColoredMdp) -> impl Fn(i64) -> String + '_ {
    // Leaf actions index into per-state action choices; use the label from
    // the states when they all agree on it, else the bare index.
    move |a: i64| {
        let mut label: Option<&str> = None;
        for s in 0..c.mdp.num_states() {
            // Only states whose choice is driven by a controllable parameter
            // share the leaf's action indexing; sinks and environment states
            // reuse low indices under unrelated labels.
            let controlled = c.guards[s].iter().any(|g| {
                g.params().any(|p| c.params.get(p).kind == ParamKind::Controllable)
            });
            if !controlled {
                continue;
            }
            if let Some(act) = c.mdp.actions(s).get(a as usize) {
                match label {
                    None => label = Some(&act.label),
                    Some(seen) if seen == act.label => {}
                    Some(_) => return format!("action {a}"),
                }
            }
        }
        label.map_or_else(|| format!("action {a}"), str::to_owned)
    }
}

fn attach_tree(
    job: &Job,
    report: &mut RunReport,
    policy: &PartialAssignment,
    tree: DecisionTree,
    robust: bool,
) -> Result<()> {
    let c = &job.colored;
    // Semantic re-verification: the tree reproduces the policy on every
    // observation, and the policy itself withstands its completions.
    for (p, decl) in c.params.iter() {
        if decl.kind == ParamKind::Controllable {
            let features = decl.features.as_ref().ok_or_else(|| {
                Error::Solver("observation parameter lost its features".into())
            })?;
            if tree.eval(features)? != policy.get(p).unwrap_or(i64::MIN) {
                return Err(Error::Solver("tree disagrees with its policy".into()));
            }
        }
    }
    let value = if robust {
        reverify_robust(c, job.nu, job.config.precision, policy, job.max_enum)?
    } else {
        let mut best: Option<f64> = None;
        let mut seen = 0u64;
        for theta in enumerate_space(&c.params, &c.tau) {
            seen += 1;
            if seen > job.max_enum {
                break;
            }
            let k = theta.as_partial();
            if !policy.subset_of(&k) {
                continue;
            }
            let (viable, value) = verify_assignment(c, job.nu, &k, job.config.precision)?;
            if viable {
                best = Some(best.map_or(value, |b: f64| b.max(value)));
                break;
            }
        }
        best.ok_or_else(|| Error::Solver("tree policy failed re-verification".into()))?
    };
    report.witness = Some(named(c, policy));
    report.value = Some(value);
    report.tree_text = Some(render_dt_named(&tree, &action_namer(c)));
    report.tree = Some(tree);
    Ok(())
}

fn run_dt(
    job: &Job,
    report: &mut RunReport,
    nodes: Option<usize>,
    sweep: Option<Vec<usize>>,
    robust: bool,
) -> Result<Outcome> {
    let c = &job.colored;
    if let Some(sizes) = sweep {
        let out = min_dt_sweep(c, job.nu, &sizes, robust, &job.config)?;
        report.sweep = Some(
            out.per_size
                .iter()
                .map(|&(nodes, verdict)| SweepEntry { nodes, verdict })
                .collect(),
        );
        match out.best {
            Some((_, synth)) => {
                attach_tree(job, report, &synth.policy.unwrap(), synth.tree.unwrap(), robust)?;
                Ok(Outcome::Sat)
            }
            None => Ok(Outcome::Unsat),
        }
    } else {
        let n = nodes.ok_or_else(|| Error::Param("dt needs --nodes or --sweep".into()))?;
        let out = synth_dt(c, job.nu, n, robust, &job.config)?;
        report.stats = Some(StatsEcho {
            decisions: out.stats.decisions,
            conflicts: out.stats.conflicts,
            theory_calls: out.stats.theory_calls,
            cache_hits: out.stats.cache_hits,
            iterations: Some(out.stats.iterations),
        });
        match out.verdict {
            Verdict::Sat => {
                attach_tree(job, report, &out.policy.unwrap(), out.tree.unwrap(), robust)?;
                Ok(Outcome::Sat)
            }
            Verdict::Unsat => Ok(Outcome::Unsat),
        }
    }
}

fn run_oracle(job: &Job, report: &mut RunReport, robust: bool) -> Result<Outcome> {
    let c = &job.colored;
    let out = if robust {
        brute_robust(c, job.nu, job.config.precision, job.max_enum)?
    } else {
        brute_feasible(c, job.nu, job.config.precision, job.max_enum)?
    };
    report.oracle = Some(OracleEcho {
        space_count: out.space_count,
        viable_count: out.viable_count,
    });
    if let Some(first) = out.viable.first() {
        report.witness = Some(named(c, first));
    }
    match out.verdict {
        Verdict::Sat => Ok(Outcome::Sat),
        Verdict::Unsat => Ok(Outcome::Unsat),
    }
}

fn run_value(job: &Job, report: &mut RunReport, assign: &[String]) -> Result<Outcome> {
    let c = &job.colored;
    let mut theta = PartialAssignment::new();
    for pair in assign {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Param(format!("assignment {pair:?} is not name=value")))?;
        let p = c
            .params
            .lookup(name.trim())
            .ok_or_else(|| Error::Param(format!("unknown parameter {name}")))?;
        let v: i64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Param(format!("assignment {pair:?}: bad value")))?;
        theta.set(p, v);
    }
    let (viable, value) = verify_assignment(c, job.nu, &theta, job.config.precision)?;
    report.witness = Some(named(c, &theta));
    report.value = Some(value);
    Ok(if viable { Outcome::Sat } else { Outcome::Unsat })
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    let deadline = cli.timeout.map(|s| started + Duration::from_secs_f64(s));

    let (command, model_path) = match &cli.cmd {
        Cmd::Check { model } => ("check", model.clone()),
        Cmd::Robust { model } => ("robust", model.clone()),
        Cmd::Dt { model, .. } => ("dt", model.clone()),
        Cmd::Oracle { model, .. } => ("oracle", model.clone()),
        Cmd::Value { model, .. } => ("value", model.clone()),
    };

    let mut report = RunReport {
        verdict: "error".into(),
        config: ConfigEcho {
            command: command.into(),
            model: model_path.display().to_string(),
            threshold: f64::NAN,
            precision: cli.precision,
            lazy_start: cli.lazy_start.as_bool(),
            cache: cli.cache.as_bool(),
            timeout_secs: cli.timeout,
            max_enum: cli.max_enum,
        },
        witness: None,
        value: None,
        tree: None,
        tree_text: None,
        sweep: None,
        oracle: None,
        stats: None,
        error: None,
        wall_time_secs: 0.0,
    };

    let outcome = (|| -> Result<Outcome> {
        let text = std::fs::read_to_string(&model_path)?;
        let (colored, file_nu) = load_problem(&text)?;
        let nu = cli.threshold.unwrap_or(file_nu);
        report.config.threshold = nu;
        let job = Job {
            colored,
            nu,
            config: RobustConfig {
                precision: cli.precision,
                lazy_start: cli.lazy_start.as_bool(),
                use_cache: cli.cache.as_bool(),
                outer_prune: true,
                max_decisions: None,
                deadline,
            },
            max_enum: cli.max_enum,
        };
        match &cli.cmd {
            Cmd::Check { .. } => run_check(&job, &mut report),
            Cmd::Robust { .. } => run_robust(&job, &mut report),
            Cmd::Dt { nodes, sweep, robust, .. } => {
                run_dt(&job, &mut report, *nodes, sweep.clone(), *robust)
            }
            Cmd::Oracle { robust, .. } => run_oracle(&job, &mut report, *robust),
            Cmd::Value { assign, .. } => run_value(&job, &mut report, assign),
        }
    })();

    let code = match outcome {
        Ok(Outcome::Sat) => {
            report.verdict = "sat".into();
            0
        }
        Ok(Outcome::Unsat) => {
            report.verdict = "unsat".into();
            1
        }
        Err(e) => {
            report.verdict = "error".into();
            report.error = Some(format!("{e}"));
            eprintln!("error: {e}");
            2
        }
    };
    report.wall_time_secs = started.elapsed().as_secs_f64();
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    std::process::exit(code);
}
