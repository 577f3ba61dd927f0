//! Experiment orchestration for the torus-dynamics workspace: one
//! serializable configuration drives every subcommand, artifacts carry
//! the config hash, and outputs are byte-identical across reruns and
//! thread counts.

pub mod artifact;
pub mod commands;
pub mod config;

use torusdyn::Result;

/// Resolve the rayon thread count: `--threads` flag, then the
/// `ANISOSPEC_THREADS` environment variable, then the rayon default.
pub fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("ANISOSPEC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

/// Run one named subcommand with artifacts under `out_dir`.
pub fn run_subcommand(
    name: &str,
    cfg: &config::ExperimentConfig,
    out_dir: &std::path::Path,
    quiet: bool,
) -> Result<bool> {
    let w = artifact::ArtifactWriter::new(out_dir.to_path_buf(), cfg.hash(), quiet)?;
    match name {
        "all" => commands::all(cfg, &w),
        "graph-oracle" => commands::graph_oracle(cfg, &w),
        other => {
            let step = commands::STEPS
                .iter()
                .find(|(n, _)| *n == other)
                .ok_or_else(|| torusdyn::Error::BadParameter(format!("unknown subcommand {other}")))?;
            (step.1)(cfg, &w)
        }
    }
}
