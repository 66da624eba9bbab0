//! `sdc`: run disclosure-checked queries against a persistent session.
//!
//! Exit codes: 0 when every check passed, 2 when the command completed but
//! something was suppressed or withheld, 1 on error.

mod lock;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sdc_core::config::{load_config_file, resolve_config_path, LoadedConfig};
use sdc_core::render;
use sdc_core::session::{Payload, TablePayload};
use sdc_core::{
    apply_checks, build_spec, crosstab, default_config, load_csv, new_session, parse_formula,
    pivot_table, regression, Clock, FinaliseFormat, ModelKind, RuleConfig, Session, Status,
};

use crate::lock::SessionLock;

const FROZEN_CLOCK_ENV: &str = "SDC_FROZEN_CLOCK";

#[derive(Debug, Parser)]
#[command(
    name = "sdc",
    version,
    about = "Disclosure-checked tables and regressions"
)]
struct Cli {
    /// Session directory, created on first use.
    #[arg(long, global = true, default_value = "sdc_session")]
    session: PathBuf,

    /// Disclosure parameters (YAML). Falls back to $SDC_CONFIG, then defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Stamp every new record with this RFC 3339 instant (or $SDC_FROZEN_CLOCK).
    #[arg(long, global = true)]
    frozen_clock: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross tabulation or pivot table with cell suppression.
    Tabulate(TabulateArgs),
    /// Fit an OLS, logit or probit model from a formula.
    Regress(RegressArgs),
    /// Print every recorded output.
    List,
    /// Remove an output from the session.
    Remove {
        #[arg(long)]
        id: String,
    },
    /// Write the review bundle for output checkers.
    #[command(alias = "finalize")]
    Finalise {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    CsvBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Crosstab,
    Pivot,
}

#[derive(Debug, Args)]
struct TabulateArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated row variables.
    #[arg(long, value_delimiter = ',', required = true)]
    index: Vec<String>,
    /// Comma-separated column variables (required for crosstab).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// Numeric column to aggregate (required unless --aggfunc count).
    #[arg(long)]
    values: Option<String>,
    /// count, sum, mean, median, std or var.
    #[arg(long, default_value = "count")]
    aggfunc: String,
    /// Append "All" totals to rows and columns.
    #[arg(long)]
    margins: bool,
    #[arg(long, value_enum, default_value_t = Mode::Crosstab)]
    mode: Mode,
}

#[derive(Debug, Args)]
struct RegressArgs {
    /// ols, logit or probit.
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// `y ~ a + b`; append `- 1` to drop the intercept.
    #[arg(long)]
    formula: String,
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    match &cli.command {
        Command::Tabulate(args) => {
            let _lock = SessionLock::acquire(&cli.session)?;
            let mut session = open_session(&cli)?;
            let status = tabulate(&mut session, args)?;
            session.save(&cli.session)?;
            Ok(status)
        }
        Command::Regress(args) => {
            let _lock = SessionLock::acquire(&cli.session)?;
            let mut session = open_session(&cli)?;
            let status = regress(&mut session, args)?;
            session.save(&cli.session)?;
            Ok(status)
        }
        Command::List => {
            let session = open_session(&cli)?;
            print!("{}", session.print_outputs());
            Ok(Status::Pass)
        }
        Command::Remove { id } => {
            let _lock = SessionLock::acquire(&cli.session)?;
            let mut session = existing_session(&cli.session)?;
            session.remove_output(id)?;
            session.save(&cli.session)?;
            println!("removed {id}");
            Ok(Status::Pass)
        }
        Command::Finalise { out, format } => {
            let session = existing_session(&cli.session)?;
            let format = match format {
                Format::Json => FinaliseFormat::Json,
                Format::CsvBundle => FinaliseFormat::CsvBundle,
            };
            session.finalise(out, format)?;
            println!("finalised {} outputs to {}", session.len(), out.display());
            Ok(Status::Pass)
        }
    }
}

fn resolve_config(flag: Option<&Path>) -> Result<RuleConfig> {
    match resolve_config_path(flag) {
        None => Ok(default_config()),
        Some(path) => {
            let LoadedConfig { config, warnings } = load_config_file(&path)
                .with_context(|| format!("loading config {}", path.display()))?;
            for warning in warnings {
                log::warn!("{}: {warning}", path.display());
            }
            Ok(config)
        }
    }
}

fn resolve_clock(flag: Option<&str>) -> Result<Clock> {
    let value = flag.map(str::to_string).or_else(|| {
        std::env::var(FROZEN_CLOCK_ENV)
            .ok()
            .filter(|v| !v.is_empty())
    });
    match value {
        None => Ok(Clock::System),
        Some(text) => Clock::parse_frozen(&text).map_err(anyhow::Error::msg),
    }
}

/// Loads the session, creating it with the resolved config on first use.
fn open_session(cli: &Cli) -> Result<Session> {
    let clock = resolve_clock(cli.frozen_clock.as_deref())?;
    let config = resolve_config(cli.config.as_deref())?;
    let mut session = match Session::load(&cli.session)? {
        Some(session) => {
            if *session.config() != config && resolve_config_path(cli.config.as_deref()).is_some() {
                log::warn!(
                    "session {} keeps the configuration it was created with; ignoring the new one",
                    cli.session.display()
                );
            }
            session
        }
        None => new_session(config),
    };
    session.set_clock(clock);
    Ok(session)
}

fn existing_session(dir: &Path) -> Result<Session> {
    match Session::load(dir)? {
        Some(session) => Ok(session),
        None => bail!("no session found in {}", dir.display()),
    }
}

fn tabulate(session: &mut Session, args: &TabulateArgs) -> Result<Status> {
    // spec first, so prohibited aggregations fail before any data is read
    let spec = build_spec(
        &args.index,
        &args.columns,
        args.values.as_deref(),
        &args.aggfunc,
        args.margins,
    )?;
    let ds = load_csv(&args.data, None)?;
    let raw = match args.mode {
        Mode::Crosstab => crosstab(&ds, &spec)?,
        Mode::Pivot => pivot_table(&ds, &spec)?,
    };
    let checked = apply_checks(&raw, session.config());
    let command = tabulate_command(args);
    let id = session.add_table(command, &checked);

    let payload = TablePayload::from_checked(&checked);
    let index_name = args.index.join(", ");
    println!("outcome_df:");
    print!(
        "{}",
        with_corner(render::outcome_panel(&payload), &index_name)
    );
    println!("get_summary(): {}", checked.summary);
    println!("add_output(): {id}");
    println!();
    let integral = !spec.aggfunc().is_magnitude();
    print!(
        "{}",
        with_corner(render::values_panel(&payload, integral), &index_name)
    );
    Ok(checked.summary.status)
}

/// Puts the row-variable name in the blank top-left corner of a grid.
fn with_corner(grid: String, name: &str) -> String {
    let Some((head, rest)) = grid.split_once('\n') else {
        return grid;
    };
    let pad = head.len() - head.trim_start().len();
    if name.len() + 2 > pad {
        return format!("{name}\n{head}\n{rest}");
    }
    format!("{name}{}\n{rest}", &head[name.len()..])
}

fn regress(session: &mut Session, args: &RegressArgs) -> Result<Status> {
    let ds = load_csv(&args.data, None)?;
    let dm = parse_formula(&args.formula, &ds)?;
    let result = regression::fit(args.model, &dm, session.config())?;
    if !result.converged {
        log::warn!(
            "{} fit did not reach the score tolerance after {} iterations",
            result.model,
            result.iterations
        );
    }
    let command = format!(
        "sdc regress --model {} --formula {:?} --data {}",
        args.model,
        args.formula,
        args.data.display()
    );
    let id = session.add_regression(command, &result);
    let record = session.get(&id).expect("just added");
    println!("{}", record.summary.text());
    println!("add_output(): {id}");
    println!();
    match &record.payload {
        Payload::Regression(reg) if result.safe => print!("{}", render::estimates_panel(reg)),
        _ => println!(
            "coefficients withheld: residual degrees of freedom {} below threshold {}",
            result.residual_dof,
            session.config().safe_dof_threshold
        ),
    }
    Ok(if result.safe {
        Status::Pass
    } else {
        Status::Fail
    })
}

fn tabulate_command(args: &TabulateArgs) -> String {
    let mut cmd = format!(
        "sdc tabulate --mode {} --data {} --index {}",
        match args.mode {
            Mode::Crosstab => "crosstab",
            Mode::Pivot => "pivot",
        },
        args.data.display(),
        args.index.join(",")
    );
    if !args.columns.is_empty() {
        cmd.push_str(&format!(" --columns {}", args.columns.join(",")));
    }
    if let Some(values) = &args.values {
        cmd.push_str(&format!(" --values {values}"));
    }
    cmd.push_str(&format!(" --aggfunc {}", args.aggfunc));
    if args.margins {
        cmd.push_str(" --margins");
    }
    cmd
}
