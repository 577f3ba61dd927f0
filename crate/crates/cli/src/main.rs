use clap::{Parser, Subcommand};
use torusdyn_cli::config::ExperimentConfig;
use torusdyn_cli::{resolve_threads, run_subcommand};

/// Deterministic experiments for hyperbolic torus maps: cone fields,
/// invariant foliations, anisotropic norms, and transfer-operator
/// spectra.  Science parameters come from the JSON config; flags only
/// control paths, threads, and verbosity.
#[derive(Parser)]
#[command(name = "torusdyn", version, about)]
struct Cli {
    /// JSON experiment configuration (defaults to the built-in config).
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// Worker threads (ANISOSPEC_THREADS as fallback); must not change outputs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replace the config's master seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Suppress progress lines.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check invariance of the unstable cone on a sampling grid.
    /// CSV: none; JSON: holds, measured contraction factor eta.
    VerifyCone,
    /// Estimate expansion/contraction constants from sampled orbits.
    /// JSON: lambda, nu, eta, closed-form errors for linear maps.
    Hyperbolicity,
    /// Pull the curvature test family back and find the generation
    /// meeting the halved regularity budget.
    /// CSV columns: generation, max_deriv_sup, max_hf_sup, half_budget_ok.
    EvolveFoliation,
    /// Holonomy Jacobian of the analytic shear family against its
    /// closed form.  CSV columns: to_y, jacobian_closed_form,
    /// image_error, jacobian_error.
    Holonomy,
    /// Iterate vertical-foliation pullback to the stable direction.
    /// CSV columns: generation, sup_change.
    StableLimit,
    /// Dictionary norm estimates at two dictionary sizes.
    /// CSV columns: label, norm_0q_small, norm_0q_large, norm_1q_small,
    /// norm_1q_large, disagreement_flagged.
    Norms,
    /// Leafwise mollifier contract: deviation and high-order norm vs
    /// width.  CSV columns: eps, deviation_low, norm_high, refit_tail.
    Mollify,
    /// Test-function pullback contraction over the dictionary batch.
    /// CSV columns: phi_id, n, measured, bound, sigma, a0, b0.
    Contraction,
    /// Assemble the partition transfer matrix and persist it as sparse
    /// text.  JSON: nnz, row/column sum defects.
    Ulam,
    /// Sparse eigenvalues at two resolutions with stability flagging.
    /// CSV columns: resolution_index, n_side, rank, re, im, abs,
    /// residual, essential_regime.
    Spectrum,
    /// Character-cutoff check and partition-level correlation decay.
    /// CSV columns: n, c_n.
    Correlations,
    /// Variance of Birkhoff averages vs horizon.
    /// CSV columns: n, variance, std_error.
    Birkhoff,
    /// Norm-inequality experiment for transfer-operator powers.
    /// CSV columns: label, n, strong_norm_lower, theta_fit, a_fit, b_fit.
    Ly,
    /// Block recursion vs leaf-pullback oracle (diagnostic).
    GraphOracle,
    /// Run every subcommand into per-step subdirectories and write a
    /// combined report plus timings.
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyCone => "verify-cone",
            Command::Hyperbolicity => "hyperbolicity",
            Command::EvolveFoliation => "evolve-foliation",
            Command::Holonomy => "holonomy",
            Command::StableLimit => "stable-limit",
            Command::Norms => "norms",
            Command::Mollify => "mollify",
            Command::Contraction => "contraction",
            Command::Ulam => "ulam",
            Command::Spectrum => "spectrum",
            Command::Correlations => "correlations",
            Command::Birkhoff => "birkhoff",
            Command::Ly => "ly",
            Command::GraphOracle => "graph-oracle",
            Command::All => "all",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::from_path(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("configuration error: {e}");
                return 1;
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed_override {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("configuration error: {e}");
        return 1;
    }
    if let Some(n) = resolve_threads(cli.threads) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("configuration error: thread pool: {e}");
            return 1;
        }
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| std::path::PathBuf::from(&cfg.out_dir));
    match run_subcommand(cli.command.name(), &cfg, &out, cli.quiet) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("{}: numeric checks failed (see report artifacts)", cli.command.name());
            2
        }
        Err(e) => {
            eprintln!("{}: {e}", cli.command.name());
            1
        }
    }
}
