//! Command line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use transport_core::estimators::{estimate, Method};
use transport_core::sim::MetricsTable;
use transport_core::{crossfit_predictions, make_folds, wald_inference, Scenario};

use crate::config::{read_toml, RateFile, SchemaFile, SimulateFile};
use crate::error::{AppError, AppResult};
use crate::io::load_csv_resolved;
use crate::output::{atomic_write, render_estimate, render_metrics, EstimateContext, Format};
use crate::runner::{run_mc_experiment, run_rate_experiment};

#[derive(Debug, Parser)]
#[command(name = "transport", version, about = "Estimate target-population counterfactual means from a trial and a target sample")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate alpha, beta, their ratio and difference on a CSV dataset.
    Estimate(EstimateArgs),
    /// Run a model-robustness simulation grid.
    Simulate(SimArgs),
    /// Run a nuisance-rate simulation grid.
    RateSim(SimArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Column names and nuisance model overrides (TOML).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub scenario: u8,
    #[arg(long, default_value = "if", value_parser = ["if", "or", "ipw", "ipw_alt", "a4star", "trial_target"])]
    pub method: String,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output format; inferred from the `--out` extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn write_output(out: Option<&Path>, text: &str) -> AppResult<()> {
    match out {
        Some(p) => atomic_write(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| AppError::io(Path::new("<stdout>"), e)),
    }
}

pub fn run_estimate(args: &EstimateArgs) -> AppResult<String> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(AppError::config("level must lie in (0, 1)"));
    }
    if args.folds < 2 {
        return Err(AppError::config("folds must be at least 2"));
    }
    let method = Method::from_name(&args.method).ok_or_else(|| AppError::config(format!("unknown method {}", args.method)))?;
    let scenario = Scenario::from_number(args.scenario)?;
    let trial_target = method == Method::TrialTarget;
    if !trial_target && method != Method::If && scenario != Scenario::One {
        return Err(AppError::config(format!("method {method} is only available in scenario 1")));
    }
    let schema_file = match &args.schema {
        Some(p) => read_toml::<SchemaFile>(p)?,
        None => SchemaFile::default(),
    };
    let (data, resolved) = load_csv_resolved(&args.data, &schema_file.schema())?;
    // the trial-target method needs both target arms, like scenario 2
    let fit_scenario = if trial_target { Scenario::Two } else { scenario };
    let report = data.validate(fit_scenario)?;
    if !report.violations.is_empty() {
        let messages: Vec<&str> = report.violations.iter().map(|v| v.message).collect();
        return Err(AppError::new(
            report.violations[0].code,
            "data",
            transport_core::error::ErrorClass::Data,
            messages.join("; "),
        ));
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let spec = schema_file.nuisance_spec(&data, &resolved, fit_scenario, trial_target)?;
    spec.check(fit_scenario, trial_target)?;
    let folds = make_folds(&data, args.folds, args.seed)?;
    let preds = crossfit_predictions(&data, &spec, &folds, fit_scenario)?;
    let (points, ifs) = estimate(fit_scenario, method, &data, &preds)?;
    let record = ifs.map(|ifs| wald_inference(&points, &ifs, args.level)).transpose()?;
    let ctx = EstimateContext {
        n1: data.n1(),
        n0: data.n0(),
        folds: args.folds,
        seed: args.seed,
        level: args.level,
        warnings: report.warnings.clone(),
    };
    Ok(render_estimate(&points, record.as_ref(), &ctx, args.format))
}

fn sim_format(args: &SimArgs) -> Format {
    args.format.unwrap_or_else(|| match args.out.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    })
}

fn summary_lines(table: &MetricsTable) -> Vec<String> {
    let mut lines: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            let coverage = r.coverage.map_or(String::from("-"), |c| format!("{c:.3}"));
            format!(
                "{:<8} {:<18} n1={:<8} n0={:<8} reps={:<5} |bias|={:.5} sd={:.5} sqrt_n_rmse={:.4} coverage={coverage}",
                r.estimator, r.config, r.n1, r.n0, r.reps, r.abs_bias, r.sd, r.sqrt_n_rmse
            )
        })
        .collect();
    lines.extend(table.warnings.iter().map(|w| format!("warning: {w}")));
    lines
}

pub fn run_simulation(args: &SimArgs) -> AppResult<MetricsTable> {
    let file: SimulateFile = read_toml(&args.config)?;
    let cells = file.cells()?;
    run_mc_experiment(&cells, file.simulate.reps, file.simulate.base_seed, args.threads)
}

pub fn run_rate_simulation(args: &SimArgs) -> AppResult<MetricsTable> {
    let file: RateFile = read_toml(&args.config)?;
    let cells = file.cells()?;
    run_rate_experiment(&cells, file.rate.reps, file.rate.base_seed, args.threads)
}

pub fn run(cli: &Cli) -> AppResult<()> {
    match &cli.command {
        Command::Estimate(args) => {
            let text = run_estimate(args)?;
            write_output(args.out.as_deref(), &text)
        }
        Command::Simulate(args) | Command::RateSim(args) => {
            let table = match &cli.command {
                Command::Simulate(_) => run_simulation(args)?,
                _ => run_rate_simulation(args)?,
            };
            atomic_write(&args.out, render_metrics(&table, sim_format(args)).as_bytes())?;
            for line in summary_lines(&table) {
                println!("{line}");
            }
            Ok(())
        }
    }
}

/// Runs the CLI and returns the process exit code. Errors are reported on
/// standard error as a JSON object with `code`, `module` and `message`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
