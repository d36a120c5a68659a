//! `omega-map`: scale matrices, exit identities, resolvents and dividend
//! values from a JSON model configuration.
//!
//! Exit status is 0 on success, 1 on invalid input and 2 on numerical
//! failure or a failed `verify` check. Errors go to stderr as one JSON
//! object with `error` and `message` fields.

mod output;
mod verbs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, ValueEnum};
use omega_map::model::{load_config, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    /// Classical scale matrix `W^(q)` on a grid.
    Scale,
    /// ω-scale matrix `𝒲^(ω+δ)(·, y)` with `y` the grid start.
    OmegaScale,
    /// Two-sided exit matrices and killing probability.
    Exit,
    /// Resolvent density on a `y` grid.
    Resolvent,
    /// Dividend value at a barrier, or a sweep of barriers over the grid.
    Dividends,
    /// ODE route for the affine band rate.
    OmegaModel,
    /// Monte Carlo estimate with its analytic counterpart.
    Simulate,
    /// Invariant checks for the configured model.
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "omega-map", version, about, allow_negative_numbers = true)]
pub struct Cli {
    #[arg(value_enum)]
    pub verb: Verb,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    /// `min:max:h`.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<GridSpec>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(short, long, action = ArgAction::Count)]
    pub verbose: u8,
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected min:max:h, got {s:?}"));
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    let g = GridSpec { x_min: v[0], x_max: v[1], h: v[2] };
    g.validate().map_err(|e| e.to_string())?;
    Ok(g)
}

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub status: u8,
}

impl CliError {
    pub fn usage(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), status: 1 }
    }
}

impl From<omega_map::Error> for CliError {
    fn from(e: omega_map::Error) -> Self {
        let status = if e.is_validation() { 1 } else { 2 };
        Self { code: e.code().into(), message: e.to_string(), status }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": e.code, "message": e.message }));
    ExitCode::from(e.status)
}

fn set_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("OMEGA_MAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::usage("invalid_threads", format!("OMEGA_MAP_THREADS = {raw:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError { code: "thread_pool".into(), message: e.to_string(), status: 2 })
}

fn run(cli: &Cli) -> Result<verbs::Output, CliError> {
    set_threads()?;
    let path = cli.config.as_ref().ok_or_else(|| CliError::usage("missing_argument", "--config is required"))?;
    let text = std::fs::read(path).map_err(|e| {
        let code = if e.kind() == std::io::ErrorKind::NotFound { "config_not_found" } else { "config_unreadable" };
        CliError::usage(code, format!("{}: {e}", path.display()))
    })?;
    let cfg = load_config(&text)?;
    if cli.verbose > 0 {
        eprintln!("loaded {} ({} states)", path.display(), cfg.model.n_states());
    }
    verbs::dispatch(cli, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            if matches!(e.kind(), DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let code = match e.kind() {
                InvalidValue if e.to_string().contains("<VERB>") => "unknown_verb",
                InvalidValue | ValueValidation => "invalid_argument",
                _ => "usage",
            };
            let msg = e.to_string();
            return fail(&CliError::usage(code, msg.lines().next().unwrap_or("").trim_start_matches("error: ")));
        }
    };
    match run(&cli) {
        Ok(out) => {
            if let Err(e) = output::write_out(cli.out.as_deref(), &out.text) {
                return fail(&CliError { code: "io".into(), message: e.to_string(), status: 1 });
            }
            ExitCode::from(out.status)
        }
        Err(e) => fail(&e),
    }
}
