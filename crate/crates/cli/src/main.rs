mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Fit, check and simulate additive and multiplicative effects network models.
#[derive(Debug, Parser)]
#[command(name = "ame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write the posterior summaries to --out.
    Fit(FitArgs),
    /// Print goodness-of-fit statistics, optionally against a fit.
    Gof(GofArgs),
    /// Simulate sociomatrices from fixed parameters.
    Simulate(SimulateArgs),
    /// Write predictions for the missing cells of a sociomatrix.
    Predict(PredictArgs),
    /// Dyadic covariate x_i·z_j from two node columns.
    NodalProduct(NodalProductArgs),
    /// Dyadic indicator that two nodes share a category.
    SameCategory(SameCategoryArgs),
    /// Shift a longitudinal directory by one wave, adding the lagged outcome.
    Lag(LagArgs),
}

/// Model options shared by fit and simulate.
#[derive(Debug, Args)]
struct ModelArgs {
    /// nrm, bin, ord, cbin, frn or rrl.
    #[arg(long, default_value = "nrm")]
    model: String,
    /// Undirected model with node effects a_i + a_j and factors u_i'Λu_j.
    #[arg(long)]
    symmetric: bool,
    /// Nomination limit for frn and cbin: a number, or a node table file.
    #[arg(long)]
    odmax: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Sociomatrix (labeled square CSV or JSON).
    #[arg(long, required_unless_present = "longitudinal", conflicts_with = "longitudinal")]
    y: Option<PathBuf>,
    /// Dyadic covariates (long-form CSV or JSON); may be repeated.
    #[arg(long)]
    xd: Vec<PathBuf>,
    /// Row (sender) covariates as a node table.
    #[arg(long)]
    xr: Option<PathBuf>,
    /// Column (receiver) covariates as a node table.
    #[arg(long)]
    xc: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Rank of the multiplicative term.
    #[arg(long, default_value_t = 0)]
    rank: usize,
    #[arg(long)]
    no_rvar: bool,
    #[arg(long)]
    no_cvar: bool,
    #[arg(long)]
    no_dcor: bool,
    /// Defaults: 500 (1000 when symmetric).
    #[arg(long)]
    burn: Option<usize>,
    /// Defaults: 10000 (100000 when symmetric).
    #[arg(long)]
    nscan: Option<usize>,
    /// Defaults: 25 (100 when symmetric).
    #[arg(long)]
    odens: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent chains, run in parallel.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long)]
    out: PathBuf,
    /// Directory of time slices Y_1.csv, Y_2.csv, ... with optional
    /// Xd/Xr/Xc tables shared by all slices or suffixed _t for one.
    #[arg(long)]
    longitudinal: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GofArgs {
    #[arg(long)]
    y: PathBuf,
    /// A fit directory to compare against.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Where to write the comparison; defaults to the fit directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON parameters: n, intercept, va, cab, vb, rho, s2e and an optional
    /// `mean` matrix added to the latent mean.
    #[arg(long)]
    params: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Observed sociomatrix whose values ord and rrl draws rank-match.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Output directory for Y_1.csv, Y_2.csv, ...
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    fit: PathBuf,
    /// The sociomatrix the model was fit to; its missing cells are predicted.
    #[arg(long)]
    y: PathBuf,
    /// Fully observed sociomatrix to score the predictions against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Time point of a longitudinal fit (1-based).
    #[arg(long, default_value_t = 1)]
    time: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct NodalProductArgs {
    /// Node table.
    #[arg(long)]
    x: PathBuf,
    /// Column used for the sender.
    #[arg(long)]
    row: String,
    /// Column used for the receiver; defaults to --row.
    #[arg(long)]
    col: Option<String>,
    /// Covariate name; defaults to row.col.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SameCategoryArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    column: String,
    /// Covariate name; defaults to same_<column>.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LagArgs {
    #[arg(long)]
    longitudinal: PathBuf,
    #[arg(long, default_value = "Ylag")]
    name: String,
    /// Also add the transposed lag, named t<name>.
    #[arg(long)]
    transpose: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_target(false)
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Gof(a) => commands::gof(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Predict(a) => commands::predict(a),
        Command::NodalProduct(a) => commands::nodal_product(a),
        Command::SameCategory(a) => commands::same_category(a),
        Command::Lag(a) => commands::lag(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
