//! Command-line surface: `gen`, `run`, `compare`, `bounds`, `report`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::acquisition::{AcquisitionKind, BetaSchedule};
use crate::config::{ExperimentConfig, MatrixSource, Task};
use crate::engine::{run, run_many, RunConfig, ThetaMode};
use crate::error::{Error, Result};
use crate::io::{fmt_num, read_score_vector, trace_to_csv, write_matrix, write_text};
use crate::landscape::{generate, GeneratorSpec};
use crate::regret::{corollary_sum, sum_of_squares, Schedule};
use crate::report::{aggregates_to_csv, SummaryTable, TaskResult};
use crate::strategies::StrategySpec;

#[derive(Debug, Parser)]
#[command(name = "mbtl", version, about = "Sequential source-task selection on transfer matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic transfer matrix from a generator spec.
    Gen {
        /// Generator spec (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV; a `.meta.json` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "generated")]
        name: String,
    },
    /// Run one strategy with one seed and write its trace.
    Run(RunArgs),
    /// Run every strategy and seed on every matrix, then summarize.
    Compare(RunArgs),
    /// Search-space elimination and bound trace for one run.
    Bounds(RunArgs),
    /// Merge summary tables, optionally attaching multitask scores.
    Report {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// `task,score` CSV.
        #[arg(long)]
        multitask: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "matrix")]
    pub config: Option<PathBuf>,
    /// Matrix CSV to use instead of a config.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `ucb` or `ei`.
    #[arg(long)]
    pub acquisition: Option<String>,
    /// `paper_log`, `decreasing`, or `constant:<value>`.
    #[arg(long)]
    pub beta: Option<String>,
    /// Fixed gap slope instead of fitting it.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub normalize: Option<bool>,
    /// Output file (`run`, `bounds`) or directory (`compare`); stdout when
    /// omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, &self.matrix) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(m)) => ExperimentConfig {
                matrices: vec![MatrixSource::file(m)],
                ..ExperimentConfig::default()
            },
            (None, None) => return Err(Error::Config("give --config or --matrix".into())),
        };
        if let Some(s) = &self.strategy {
            c.strategies = s
                .split(',')
                .map(|n| StrategySpec::parse(n.trim()))
                .collect::<Result<_>>()?;
        }
        if let Some(s) = self.seed {
            c.seeds = vec![s];
        }
        if let Some(k) = self.budget {
            c.budget = k;
        }
        if let Some(d) = self.delta {
            c.delta = d;
        }
        if self.epsilon.is_some() {
            c.epsilon = self.epsilon;
        }
        if let Some(a) = &self.acquisition {
            c.acquisition = Some(parse_acquisition(a)?);
        }
        if let Some(b) = &self.beta {
            c.beta = Some(parse_beta(b, c.delta)?);
        }
        if let Some(t) = self.theta {
            c.theta = ThetaMode::Fixed(t);
        }
        if let Some(n) = self.normalize {
            c.normalize = n;
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn parse_acquisition(s: &str) -> Result<AcquisitionKind> {
    match s.to_ascii_lowercase().as_str() {
        "ucb" => Ok(AcquisitionKind::Ucb),
        "ei" => Ok(AcquisitionKind::Ei),
        other => Err(Error::Config(format!("unknown acquisition '{other}' (ucb|ei)"))),
    }
}

pub fn parse_beta(s: &str, delta: f64) -> Result<BetaSchedule> {
    let schedule = match s.split_once(':') {
        Some(("constant", v)) => BetaSchedule::Constant {
            value: v
                .parse()
                .map_err(|_| Error::Config(format!("bad constant beta '{v}'")))?,
        },
        None if s == "paper_log" => BetaSchedule::PaperLog { delta },
        None if s == "decreasing" => BetaSchedule::Decreasing { delta },
        _ => {
            return Err(Error::Config(format!(
                "unknown beta '{s}' (paper_log|decreasing|constant:<value>)"
            )))
        }
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Parse `argv` and execute. Returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Gen {
            config,
            seed,
            out,
            name,
        } => {
            let mut spec: GeneratorSpec = serde_json::from_str(&std::fs::read_to_string(config)?)?;
            if let Some(s) = seed {
                spec.seed = *s;
            }
            let m = generate(&spec)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_matrix(&m, out, name)
        }
        Command::Run(args) => {
            let c = args.experiment()?;
            let task = first_task(&c)?;
            let trace = run(&task.matrix, &single_config(&c)?)?;
            emit(args.out.as_deref(), &trace_to_csv(&trace))
        }
        Command::Compare(args) => {
            let c = args.experiment()?;
            let results = compare(&c)?;
            let table = SummaryTable::from_results(&results)?;
            match &args.out {
                Some(dir) => {
                    write_text(&dir.join("aggregate.csv"), &aggregates_to_csv(&results)?)?;
                    write_text(&dir.join("summary.csv"), &table.to_csv())?;
                    print!("{}", table.render());
                    Ok(())
                }
                None => emit(None, &table.to_csv()),
            }
        }
        Command::Bounds(args) => {
            let mut c = args.experiment()?;
            if args.strategy.is_none() {
                c.strategies = vec![StrategySpec::Greedy];
            }
            let task = first_task(&c)?;
            let trace = run(&task.matrix, &single_config(&c)?)?;
            emit(args.out.as_deref(), &bounds_csv(&trace))
        }
        Command::Report {
            inputs,
            multitask,
            out,
        } => {
            let tables = inputs
                .iter()
                .map(|p| SummaryTable::from_csv(&std::fs::read_to_string(p)?))
                .collect::<Result<Vec<_>>>()?;
            let mut merged = SummaryTable::merge(&tables);
            if let Some(path) = multitask {
                for task in merged.attach_multitask(&read_score_vector(path)?) {
                    eprintln!("warning: multitask score for unknown task '{task}'");
                }
            }
            if out.is_some() {
                print!("{}", merged.render());
            }
            emit(out.as_deref(), &merged.to_csv())
        }
    }
}

fn first_task(c: &ExperimentConfig) -> Result<Task> {
    c.tasks()?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("no matrix".into()))
}

fn single_config(c: &ExperimentConfig) -> Result<RunConfig> {
    let strategy = c
        .resolved_strategies()
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("no strategy".into()))?;
    Ok(c.run_config(strategy, c.seeds[0]))
}

/// Every (task, strategy, seed) run of a config. Runs execute in parallel;
/// the result order follows the config.
pub fn compare(c: &ExperimentConfig) -> Result<Vec<TaskResult>> {
    let strategies = c.resolved_strategies();
    c.tasks()?
        .into_iter()
        .map(|task| {
            let configs: Vec<RunConfig> = strategies
                .iter()
                .flat_map(|s| c.seeds.iter().map(|&seed| c.run_config(s.clone(), seed)))
                .collect();
            let mut traces = run_many(&task.matrix, &configs)?.into_iter();
            let runs = strategies
                .iter()
                .map(|s| (s.display_name().to_string(), traces.by_ref().take(c.seeds.len()).collect()))
                .collect();
            Ok(TaskResult {
                context_variation: task.matrix.space().label().to_string(),
                oracle_value: task.matrix.oracle_value(),
                exhaustive_value: task.matrix.exhaustive_value(),
                multitask: task.multitask,
                task: task.name,
                runs,
            })
        })
        .collect()
}

pub const BOUNDS_COLUMNS: [&str; 16] = [
    "k",
    "chosen_context",
    "largest_segment_frac",
    "geometric_frac",
    "within_geometric",
    "reduced_space_frac",
    "r_k",
    "R_k",
    "beta_k",
    "gamma_k",
    "bound_thm1",
    "bound_thm2",
    "sum_sq_reduced",
    "sum_sq_geometric",
    "pi2_over_6",
    "geometric_sum_exceeds_pi2_over_6",
];

/// Elimination trace next to the geometric schedule, with both bounds and
/// the exact partial sums behind them.
pub fn bounds_csv(trace: &crate::engine::RunTrace) -> String {
    let mut out = BOUNDS_COLUMNS.join(",");
    out.push('\n');
    let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
    let mut reduced = Vec::new();
    for s in &trace.steps {
        let r = &s.regret;
        reduced.push(r.reduced_space_frac);
        let geo = Schedule::Geometric.fraction(s.k);
        let geo_sum = corollary_sum(Schedule::Geometric, s.k);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.k,
            fmt_num(s.chosen_context),
            fmt_num(r.largest_segment_frac),
            fmt_num(geo),
            r.largest_segment_frac <= geo,
            fmt_num(r.reduced_space_frac),
            fmt_num(r.r_k),
            fmt_num(r.cumulative),
            fmt_num(r.beta_k),
            fmt_num(r.gamma_k),
            fmt_num(r.bound_thm1),
            fmt_num(r.bound_thm2),
            fmt_num(sum_of_squares(&reduced)),
            fmt_num(geo_sum),
            fmt_num(pi2_6),
            geo_sum > pi2_6,
        );
    }
    out
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
