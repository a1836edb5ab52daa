//! `ldp` — command-line driver for the thermodynamic-formalism and
//! large-deviation toolkit in `ldp-core`.
//!
//! The tool reads a single JSON model file (transition matrix, named
//! potentials with exact literals, suspension profiles, canned experiments)
//! and exposes one verb per pipeline stage:
//!
//! ```text
//! validate   structural report: irreducibility, period, potential tables
//! pressure   topological pressure of phi + xi psi, single tilt or grid
//! rate       rate function J at a target average, single value or grid
//! interval   certified window probability at one (n, p, delta)
//! lattice    lattice/non-lattice verdict for an observable
//! sweep      twisted spectral radius over a frequency band (CSV)
//! run        full shrinking-window schedule: DP brackets, slopes,
//!            smoothed functionals, Fourier cross-route, feasibility
//! rho        one smoothed window in depth, with the Fourier error budget
//! suspend    suspension profiles: induced observables, return identity
//! selftest   the bundled oracle corpus; exit 0 iff every check passes
//! ```
//!
//! Exit codes: `0` success, `1` error (bad input, failed validation,
//! corrupted cache under `--verify-cache`), `2` completed but flagged
//! infeasible (the schedule exponent exceeds the empirical spectral cap),
//! `3` resource budget exceeded (the suggested knob is printed).
//!
//! All output files are deterministic: byte-identical across reruns with
//! the same file, flags, and seed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cache;
mod commands;
mod emit;
mod modelfile;
mod snapshot;

/// Error with a process exit code: 1 for ordinary failures, 3 for
/// resource-budget failures (which carry a suggested adjustment).
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn msg(message: String) -> Self {
        CliError { message, code: 1 }
    }

    pub fn core(err: ldp_core::Error) -> Self {
        let code = match &err {
            ldp_core::Error::Resource { .. } => 3,
            _ => 1,
        };
        CliError { message: err.to_string(), code }
    }

    pub fn prefix(mut self, p: &str) -> Self {
        self.message = format!("{p}{}", self.message);
        self
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(
    name = "ldp",
    version,
    about = "Certified large-deviation measurements on subshifts of finite type"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Directory for result files (default: print to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cap the rayon worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for Monte Carlo sampling.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Budget for recoded states (memory guard for high-memory potentials).
    #[arg(long, global = true, default_value_t = 200_000)]
    budget_states: u64,

    /// Budget for DP clusters per state and exact-enumeration atoms.
    #[arg(long, global = true, default_value_t = 3_000_000)]
    budget_bins: u64,

    /// Recompute cached results and fail unless they match byte for byte.
    #[arg(long, global = true)]
    verify_cache: bool,

    /// Run only selftest checks whose name contains this substring.
    #[arg(long, global = true)]
    filter: Option<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Parse and structurally validate a model file.
    Validate { file: PathBuf },

    /// Topological pressure of phi + xi psi.
    Pressure {
        file: PathBuf,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        /// Single tilt (default 0 when no grid is given).
        #[arg(long)]
        xi: Option<f64>,
        /// Tilt grid lo:hi:count; emits CSV.
        #[arg(long)]
        xi_grid: Option<String>,
    },

    /// Rate function at a raw target average (the tool recenters).
    Rate {
        file: PathBuf,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        /// Target grid lo:hi:count; emits CSV.
        #[arg(long)]
        p_grid: Option<String>,
    },

    /// Certified window probability at one length.
    Interval {
        file: PathBuf,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
        /// Window half-width in average units.
        #[arg(long)]
        delta: f64,
        /// Also evaluate the smoothed functional for this cutoff.
        #[arg(long)]
        cutoff: Option<String>,
        /// Cross-check against the exact rational enumeration.
        #[arg(long)]
        exact: bool,
        /// Monte Carlo cross-check with this many samples.
        #[arg(long)]
        mc: Option<u64>,
    },

    /// Lattice / non-lattice verdict for an observable.
    Lattice {
        file: PathBuf,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long, default_value_t = 10)]
        max_period: usize,
        #[arg(long, default_value_t = 1e-6)]
        resolution: f64,
    },

    /// Twisted spectral radius over a frequency band.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        xi: f64,
        /// Band lo:hi:initial-points.
        #[arg(long, default_value = "0.5:50:200")]
        u: String,
    },

    /// Full shrinking-window schedule.
    Run {
        file: PathBuf,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        /// Named experiment from the file to take defaults from.
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        /// fixed:delta=… | poly:c=…,beta=… | subexp:c=…,gamma=… | exp:c=…,alpha=…
        #[arg(long)]
        schedule: Option<String>,
        /// Comma-separated strictly increasing lengths, e.g. 100,500,2000.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        cutoff: Option<String>,
        /// Frequency band lo:hi for the contraction sweep.
        #[arg(long)]
        band: Option<String>,
        /// Initial sweep points across the band.
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Also run the Fourier cross-route (needs a non-lattice observable
        /// to converge honestly).
        #[arg(long)]
        fourier: bool,
        /// Monte Carlo cross-check at the deepest length.
        #[arg(long)]
        mc: Option<u64>,
        /// Persist the deepest distribution as an LDPD binary snapshot.
        #[arg(long)]
        snapshot: bool,
    },

    /// One smoothed window in depth.
    Rho {
        file: PathBuf,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
        /// Window half-width in sum units.
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        cutoff: Option<String>,
        #[arg(long)]
        fourier: bool,
    },

    /// Suspension profiles over a roof function.
    Suspend {
        file: PathBuf,
        #[arg(long)]
        profile: String,
        /// Flow-average target; prints the deviation observable psi - p tau.
        #[arg(long)]
        p: Option<f64>,
    },

    /// Run the bundled oracle corpus.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        // ignore AlreadyInitialized: tests may drive main() repeatedly
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let globals = commands::Globals {
        out: cli.out.clone(),
        seed: cli.seed,
        budget_states: cli.budget_states,
        budget_bins: cli.budget_bins,
        verify_cache: cli.verify_cache,
        filter: cli.filter.clone(),
    };

    let result = match cli.verb {
        Verb::Validate { file } => commands::validate(&globals, &file),
        Verb::Pressure { file, phi, psi, xi, xi_grid } => {
            commands::pressure(&globals, &file, phi.as_deref(), psi.as_deref(), xi, xi_grid.as_deref())
        }
        Verb::Rate { file, phi, psi, p, p_grid } => {
            commands::rate(&globals, &file, phi.as_deref(), psi.as_deref(), p, p_grid.as_deref())
        }
        Verb::Interval { file, phi, psi, p, n, delta, cutoff, exact, mc } => commands::interval(
            &globals,
            &file,
            phi.as_deref(),
            psi.as_deref(),
            p,
            n,
            delta,
            cutoff.as_deref(),
            exact,
            mc,
        ),
        Verb::Lattice { file, psi, max_period, resolution } => {
            commands::lattice(&globals, &file, psi.as_deref(), max_period, resolution)
        }
        Verb::Sweep { file, phi, psi, xi, u } => {
            commands::sweep(&globals, &file, phi.as_deref(), psi.as_deref(), xi, &u)
        }
        Verb::Run {
            file,
            phi,
            psi,
            experiment,
            p,
            schedule,
            n,
            cutoff,
            band,
            points,
            fourier,
            mc,
            snapshot,
        } => commands::run(
            &globals,
            &file,
            commands::RunArgs {
                phi,
                psi,
                experiment,
                p,
                schedule,
                n,
                cutoff,
                band,
                points,
                fourier,
                mc,
                snapshot,
            },
        ),
        Verb::Rho { file, phi, psi, p, n, eps, cutoff, fourier } => commands::rho(
            &globals,
            &file,
            phi.as_deref(),
            psi.as_deref(),
            p,
            n,
            eps,
            cutoff.as_deref(),
            fourier,
        ),
        Verb::Suspend { file, profile, p } => commands::suspend(&globals, &file, &profile, p),
        Verb::Selftest => commands::selftest::run(&globals),
    };

    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}
