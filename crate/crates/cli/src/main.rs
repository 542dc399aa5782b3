//! Command-line driver: check programs with the counterexample-guided
//! instrumentation search, apply instrumentations by hand, run programs,
//! export constrained Horn clauses, and validate operator definitions.
//!
//! Exit codes: 0 verified / ran to completion, 1 incorrect (an assertion can
//! fail), 2 inconclusive, 3 usage, parse, or type errors.

mod commands;
mod opset;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "instrumenta",
    version,
    about = "Ghost-code instrumentation for verifying quantified and aggregated array properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search the instrumentation space until the oracle verifies the
    /// program or refutes it.
    Check(CheckArgs),
    /// Apply an operator under an explicit selection, or list the space.
    Instrument(InstrumentArgs),
    /// Execute a program, printing its trace as JSON Lines.
    Run(RunArgs),
    /// Export a quantifier-free program as constrained Horn clauses.
    ExportChc(ExportArgs),
    /// Check the well-formedness conditions of an operator definition.
    CheckOperator(CheckOperatorArgs),
}

#[derive(Args)]
struct OperatorSelection {
    /// Builtin operator name (repeatable): forall, exists, max, min, sum,
    /// product, numof, square, exists-cancellative, product-cancellative.
    #[arg(long = "op")]
    ops: Vec<String>,
    /// Operator definition file(s) (.op.toml), composable with --op.
    #[arg(long = "op-file")]
    op_files: Vec<std::path::PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Verification back end.
    #[arg(long, default_value = "bounded", value_parser = ["bounded", "chc", "auto"])]
    oracle: String,
    /// Default interval lo:hi for nondet sites.
    #[arg(long = "nondet-range", default_value = "-3:3", allow_hyphen_values = true)]
    nondet_range: String,
    /// Per-site interval k=lo:hi, where k is the ordinal of the nondet
    /// statement in source order (repeatable).
    #[arg(long = "site-range", allow_hyphen_values = true)]
    site_ranges: Vec<String>,
    /// Interpreter step budget per bounded replay.
    #[arg(long = "step-budget", default_value_t = 50_000)]
    step_budget: u64,
    /// Cap on enumerated paths per bounded check.
    #[arg(long = "max-paths", default_value_t = 1_000_000)]
    max_paths: u64,
    /// External Horn solver command; falls back to $INSTRUMENTA_SOLVER.
    #[arg(long = "solver-cmd")]
    solver_cmd: Option<String>,
    /// Solver timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Program to verify (.cw).
    input: std::path::PathBuf,
    #[command(flatten)]
    operators: OperatorSelection,
    #[command(flatten)]
    oracle: OracleArgs,
    /// Output format.
    #[arg(long, default_value = "text", value_parser = ["text", "json"])]
    format: String,
    /// Seed for randomized components.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Concurrent oracle checks.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Candidate pick strategy.
    #[arg(long, default_value = "all-first", value_parser = ["all-first", "lex"])]
    strategy: String,
    /// Escalate up to this many composed operator instances.
    #[arg(long = "max-operators", default_value_t = 1)]
    max_operators: u32,
    /// Budget doublings granted on unknown verdicts.
    #[arg(long = "max-redoublings", default_value_t = 2)]
    max_redoublings: u32,
    /// Emit one JSON progress line per search iteration to stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct InstrumentArgs {
    /// Program to instrument (.cw).
    input: std::path::PathBuf,
    #[command(flatten)]
    operators: OperatorSelection,
    /// Selection file (JSON map: point id -> rule id or "bot"). Without it,
    /// every matchable point is rewritten.
    #[arg(long)]
    selection: Option<std::path::PathBuf>,
    /// Write the instrumented program here (default: stdout).
    #[arg(long, short)]
    output: Option<std::path::PathBuf>,
    /// Write the control-point map (JSON) here.
    #[arg(long = "point-map")]
    point_map: Option<std::path::PathBuf>,
    /// Print the instrumentation space (points, applicable rules, size)
    /// instead of instrumenting.
    #[arg(long = "list-space")]
    list_space: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Program to execute (.cw).
    input: std::path::PathBuf,
    /// Nondet script: either positional values `1,0,-2` or `name=value`
    /// pairs bound to declared nondet variables (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    script: Vec<String>,
    /// Seeded random draws in lo:hi when no script is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "nondet-range", default_value = "-3:3", allow_hyphen_values = true)]
    nondet_range: String,
    /// Step budget.
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
}

#[derive(Args)]
struct ExportArgs {
    /// Program to encode (.cw); must be free of quantifiers/aggregation.
    input: std::path::PathBuf,
    /// Write the HORN script here (default: stdout).
    #[arg(long, short)]
    output: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct CheckOperatorArgs {
    /// Operator definition (.op.toml), or a builtin operator name.
    operator: String,
    /// Samples per condition.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check(args) => commands::cmd_check(args),
        Command::Instrument(args) => commands::cmd_instrument(args),
        Command::Run(args) => commands::cmd_run(args),
        Command::ExportChc(args) => commands::cmd_export_chc(args),
        Command::CheckOperator(args) => commands::cmd_check_operator(args),
    };
    match code {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
