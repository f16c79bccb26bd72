//! Command-line front end: data ingestion, configuration, orchestration of
//! fits, bands, and simulations, with JSON summaries on stdout and CSV
//! artifacts for plotting.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tubeband_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "tubeband",
    version,
    about = "Simultaneous confidence bands for contrasts of regression curves via the volume-of-tube method"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tube tail approximation P(b) for given manifold parameters
    Tailprob {
        #[arg(long)]
        k: usize,
        #[arg(long = "gamma-length")]
        gamma_length: f64,
        #[arg(long)]
        euler: u32,
        /// Degrees of freedom of the variance estimate (studentized path)
        #[arg(long)]
        nu: Option<u64>,
        #[arg(long)]
        b: f64,
    },
    /// Critical value b solving P(b) = alpha
    Critical {
        #[arg(long)]
        k: usize,
        #[arg(long = "gamma-length")]
        gamma_length: f64,
        #[arg(long)]
        euler: u32,
        #[arg(long)]
        nu: Option<u64>,
        #[arg(long)]
        alpha: f64,
    },
    /// Curve geometry: arc length, Euler characteristic, curvature sweep,
    /// local and global critical radii
    Geometry {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long = "x-grid")]
        x_grid: Option<usize>,
        #[arg(long = "alpha-grid")]
        alpha_grid: Option<usize>,
        #[arg(long)]
        segments: Option<usize>,
    },
    /// Fit group curves and rank basis candidates by AIC/BIC
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simultaneous confidence band for one contrast
    Band {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Contrast coefficients, e.g. "1,-1,0"
        #[arg(long)]
        contrast: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "grid-n")]
        grid_n: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Chi-square scan statistic with its simultaneous threshold
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "grid-n")]
        grid_n: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo maxima of the chi-square process vs the tube formula
    SimMax {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "grid-n")]
        grid_n: Option<usize>,
    },
    /// Coverage simulation under model misspecification
    SimCoverage {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// model1 | model2 | model3 | in-basis
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        amplitude: Option<f64>,
        /// Assumed quadratic-spline basis size
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "grid-n")]
        grid_n: Option<usize>,
        /// spanning | half-open design grid
        #[arg(long = "design-rule")]
        design_rule: Option<String>,
    },
    /// Average band width for a range of basis sizes
    Widths {
        #[arg(long = "m-min", default_value_t = 3)]
        m_min: usize,
        #[arg(long = "m-max", default_value_t = 10)]
        m_max: usize,
        #[arg(long, default_value_t = 11)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long = "design-rule", default_value = "spanning")]
        design_rule: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("TUBEBAND_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tubeband: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Tailprob {
            k,
            gamma_length,
            euler,
            nu,
            b,
        } => commands::tailprob(k, gamma_length, euler, nu, b),
        Command::Critical {
            k,
            gamma_length,
            euler,
            nu,
            alpha,
        } => commands::critical(k, gamma_length, euler, nu, alpha),
        Command::Geometry {
            config,
            output,
            x_grid,
            alpha_grid,
            segments,
        } => commands::geometry(&config, output.as_deref(), x_grid, alpha_grid, segments),
        Command::Fit {
            config,
            data,
            output,
        } => commands::fit(&config, &data, output.as_deref()),
        Command::Band {
            config,
            data,
            contrast,
            alpha,
            grid_n,
            output,
        } => commands::band(&config, &data, &contrast, alpha, grid_n, output.as_deref()),
        Command::Scan {
            config,
            data,
            alpha,
            grid_n,
            output,
        } => commands::scan(&config, &data, alpha, grid_n, output.as_deref()),
        Command::SimMax {
            config,
            output,
            reps,
            seed,
            grid_n,
        } => commands::sim_max(&config, output.as_deref(), reps, seed, grid_n),
        Command::SimCoverage {
            config,
            output,
            model,
            amplitude,
            m,
            reps,
            seed,
            grid_n,
            design_rule,
        } => commands::sim_coverage(
            config.as_deref(),
            output.as_deref(),
            model,
            amplitude,
            m,
            reps,
            seed,
            grid_n,
            design_rule,
        ),
        Command::Widths {
            m_min,
            m_max,
            n,
            alpha,
            design_rule,
            output,
        } => commands::widths(m_min, m_max, n, alpha, &design_rule, output.as_deref()),
    }
}
