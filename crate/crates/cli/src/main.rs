//! `tetrafft`: run configurations, contrast sweeps, Green function analysis,
//! oracle checks and line profiles from the command line.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
//! 3 divergence, 4 no convergence (or a failed oracle check).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "tetrafft", version, about = "FFT-based homogenization with a tetrahedral finite-difference stencil")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Override the convergence tolerance of the config.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Override the iteration limit of the config.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    /// Worker threads for the FFTs (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for output files; created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration and write fields, convergence history and summary.
    Solve {
        config: PathBuf,
    },
    /// Iteration count against inclusion/matrix bulk-modulus contrast.
    SweepContrast {
        config: PathBuf,
        /// Comma-separated contrasts; `void` (or `inf`) for a pore.
        #[arg(long, value_delimiter = ',', required = true)]
        contrasts: Vec<String>,
    },
    /// Frequency slices, real-space field and decay fit of one strain Green component.
    GreenAnalyze {
        config: PathBuf,
        /// Two-digit Voigt pair, e.g. 24.
        #[arg(long)]
        pair: String,
        /// Fit window in voxels, `rmin,rmax` (default 4 to a quarter of the grid).
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
    },
    /// Compare the converged tetrahedral solution with the dense solver.
    OracleCheck {
        config: PathBuf,
        /// Largest accepted relative discrepancy.
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
    },
    /// Sample tensor components of a raw field dump along a grid line.
    Profile {
        /// Raw file written by `solve` (the sidecar sits next to it).
        field: PathBuf,
        /// Component prefix in the dump, `s` or `e`.
        #[arg(long, default_value = "s")]
        prefix: String,
        #[arg(long, default_value_t = 0)]
        axis: usize,
        /// Indices on the two other axes, e.g. `31,31`.
        #[arg(long, value_delimiter = ',', required = true)]
        at: Vec<usize>,
        /// Components, e.g. `s11,s33,vm`.
        #[arg(long, value_delimiter = ',', default_value = "11")]
        components: Vec<String>,
        /// Inclusive sample range `start,end` for the oscillation index.
        #[arg(long, value_delimiter = ',')]
        range: Option<Vec<usize>>,
    },
}

/// Two comma-separated values of `flag`.
fn two<T: Copy>(flag: &str, v: &[T]) -> tetrafft_core::Result<(T, T)> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => Err(tetrafft_core::Error::InvalidArgument(format!("{flag} takes two comma-separated values, got {}", v.len()))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cli.global.output_dir) {
        eprintln!("error: cannot create {}: {e}", cli.global.output_dir.display());
        return ExitCode::from(1);
    }
    let g = &cli.global;
    let result = match cli.command {
        Command::Solve { config } => commands::solve(g, &config),
        Command::SweepContrast { config, contrasts } => commands::sweep_contrast(g, &config, &contrasts),
        Command::GreenAnalyze { config, pair, window } => window
            .map(|w| two("--window", &w))
            .transpose()
            .and_then(|w| commands::green_analyze(g, &config, &pair, w)),
        Command::OracleCheck { config, threshold } => commands::oracle_check(g, &config, threshold),
        Command::Profile { field, prefix, axis, at, components, range } => two("--at", &at).and_then(|at| {
            let range = range.map(|r| two("--range", &r)).transpose()?;
            commands::profile(g, &field, &prefix, axis, [at.0, at.1], &components, range)
        }),
    };
    match result {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {e}");
            commands::exit_code(&e).into()
        }
    }
}
