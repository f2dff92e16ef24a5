//! Command-line harness around `wishart-core`.
//!
//! Subcommands: `transform` (value tables), `bench` (median timings),
//! `price` (bonds and calls) and `validate` (Monte Carlo against the closed
//! form). Exit codes: 0 ok, 2 input error, 3 domain error. Errors are
//! printed to stdout as a JSON object under `"error"`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use wishart_core::Error;

pub mod commands;
pub mod modelfile;
pub mod output;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
    pub details: Option<Value>,
}

impl CliError {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: kind.into(),
            message: message.into(),
            details: None,
        }
    }

    pub fn invalid_model(e: &Error) -> Self {
        Self {
            code: 2,
            kind: "invalid_model".into(),
            message: e.to_string(),
            details: Some(json!({ "cause": error_kind(e) })),
        }
    }

    /// Input error for bad configuration, domain error otherwise.
    pub fn from_core(e: &Error) -> Self {
        let details = match e {
            Error::DampingInvalid { damping, reason } => Some(json!({ "damping": damping, "reason": reason })),
            Error::BranchDiscontinuity { omega, jump } => Some(json!({ "omega": omega, "jump": jump })),
            _ => None,
        };
        Self {
            code: if matches!(e, Error::InvalidConfig(_)) { 2 } else { 3 },
            kind: error_kind(e).into(),
            message: e.to_string(),
            details,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.code
    }

    pub fn to_json(&self) -> Value {
        let mut err = json!({ "kind": self.kind, "message": self.message });
        if let Some(Value::Object(extra)) = &self.details {
            for (k, v) in extra {
                err[k] = v.clone();
            }
        }
        json!({ "error": err })
    }
}

/// Stable machine-readable name of a core error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Shape { .. } => "shape",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::NonFinite { .. } => "non_finite",
        Error::NotSymmetric { .. } => "not_symmetric",
        Error::Overflow { .. } => "overflow",
        Error::NotPositiveSemidefinite { .. } => "not_positive_semidefinite",
        Error::NotPositiveDefinite { .. } => "not_positive_definite",
        Error::Singular { .. } => "singular",
        Error::IllConditioned { .. } => "ill_conditioned",
        Error::CommutationUnsatisfiable { .. } => "commutation_unsatisfiable",
        Error::CommutationViolated { .. } => "commutation_violated",
        Error::Gindikin { .. } => "gindikin",
        Error::PreconditionFailed { .. } => "precondition_failed",
        Error::NoStabilizingSolution { .. } => "no_stabilizing_solution",
        Error::NumericalBreakdown { .. } => "numerical_breakdown",
        Error::DampingInvalid { .. } => "damping_invalid",
        Error::BranchDiscontinuity { .. } => "branch_discontinuity",
        Error::InvalidConfig(_) => "invalid_config",
    }
}

#[derive(Debug, Parser)]
#[command(name = "wishart", version, about = "Laplace transforms of the Wishart process and its time integral")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transform values on a time grid, one CSV row per t.
    Transform(TransformArgs),
    /// Median wall time per (method, t).
    Bench(BenchArgs),
    /// Zero-coupon bond or European call price as JSON.
    #[command(subcommand)]
    Price(PriceCommand),
    /// Monte Carlo estimate against the closed form.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Reference model, t = 0..3 step 0.1, all four methods.
    Table1,
    /// Reference model, t up to 100, lin/cm/rk4.
    Table2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AreChoice {
    Schur,
    ClosedForm,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Model JSON document.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub model: Option<PathBuf>,
    /// Built-in reference setup.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct QueryFlags {
    /// Terminal weight as "a,b;c,d"; overrides the query block.
    #[arg(long, allow_hyphen_values = true, value_parser = modelfile::parse_matrix)]
    pub w: Option<wishart_core::matfun::RMat>,
    /// Integral weight as "a,b;c,d"; overrides the query block.
    #[arg(long, allow_hyphen_values = true, value_parser = modelfile::parse_matrix)]
    pub v: Option<wishart_core::matfun::RMat>,
}

#[derive(Debug, Clone, Args)]
pub struct MethodFlags {
    /// Comma-separated methods: lin, cm, vc, rk4.
    #[arg(long)]
    pub method: Option<String>,
    /// "start:stop:step" or a comma-separated list.
    #[arg(long = "t-grid")]
    pub t_grid: Option<String>,
    /// Runge-Kutta step.
    #[arg(long, default_value_t = 1e-3)]
    pub rk4_step: f64,
    /// Simpson nodes per unit time for variation of constants.
    #[arg(long, default_value_t = 2000)]
    pub vc_points: usize,
    /// Algebraic Riccati solver used by variation of constants.
    #[arg(long, value_enum, default_value_t = AreChoice::Schur)]
    pub are_solver: AreChoice,
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub query: QueryFlags,
    #[command(flatten)]
    pub methods: MethodFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub query: QueryFlags,
    #[command(flatten)]
    pub methods: MethodFlags,
    /// Timed repetitions per cell after one discarded warmup; at least 11.
    #[arg(long, default_value_t = 11)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum PriceCommand {
    /// Zero-coupon bond under the Wishart short rate (needs a short_rate block).
    Zcb(ZcbArgs),
    /// European call by Fourier inversion (needs an sv block).
    #[command(allow_negative_numbers = true)]
    Call(CallArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ZcbArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Overrides contract.maturity.
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Also report the curve on this maturity grid.
    #[arg(long = "t-grid")]
    pub t_grid: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CallArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Overrides contract.strike.
    #[arg(long)]
    pub strike: Option<f64>,
    /// Overrides contract.maturity.
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Overrides contract.damping.
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Frequency grid size, a power of two.
    #[arg(long)]
    pub points: Option<usize>,
    /// Report the put instead of the call.
    #[arg(long)]
    pub put: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub query: QueryFlags,
    #[arg(long = "t-grid", default_value = "1")]
    pub t_grid: String,
    /// JSON document with any of paths, step, seed.
    #[arg(long)]
    pub mc_config: Option<PathBuf>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args`, run the subcommand and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Transform(a) => commands::transform(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Price(PriceCommand::Zcb(a)) => commands::price_zcb(&a),
        Command::Price(PriceCommand::Call(a)) => commands::price_call(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            println!("{}", e.to_json());
            e.exit_code()
        }
    }
}
