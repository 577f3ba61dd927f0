use thiserror::Error;

/// Errors produced by map construction and the numerical pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("Newton iteration failed to converge at ({x}, {y}); residual {residual:e}")]
    NewtonDiverged { x: f64, y: f64, residual: f64 },

    #[error("cone field invariance violated: measured eta {eta} at witness ({x}, {y})")]
    ConeViolated { eta: f64, x: f64, y: f64 },

    #[error("point ({x}, {y}) outside chart window of half-width {half_width}")]
    OutOfWindow { x: f64, y: f64, half_width: f64 },

    #[error("singular foliation: d_x F = {value:e} at node ({x}, {y})")]
    SingularFoliation { value: f64, x: f64, y: f64 },

    #[error("holonomy integrator blow-up on the x-line x = {x}; |J| exceeded {bound:e}")]
    IntegratorBlowUp { x: f64, bound: f64 },

    #[error("image curve lost the graph property near u = {u}")]
    GraphPropertyLost { u: f64 },

    #[error("chart invariant violated: {0}")]
    ChartInvariant(String),

    #[error("pullback window overflow: |F^n| reached {value} (limit {limit}); shrink the window")]
    WindowOverflow { value: f64, limit: f64 },

    #[error("singular holonomy update: Lambda = {value:e} at ({u}, {s})")]
    SingularLambda { value: f64, u: f64, s: f64 },

    #[error("conditioning failure in stable/unstable split: 1 - |dF dG| = {margin:e}")]
    NearParallel { margin: f64 },

    #[error("foliation generation {generation} failed on chart {chart}: {source}")]
    ChartFailure {
        generation: u32,
        chart: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration did not converge within {max_generations} generations; last change {last_change:e}")]
    NoConvergence { max_generations: u32, last_change: f64 },

    #[error("spectral refit aliasing: coefficient tail holds {tail_fraction:e} of energy; increase the grid")]
    AliasedRefit { tail_fraction: f64 },

    #[error("zero-mass Ulam row {row}; the partition or map is misconfigured")]
    ZeroMassRow { row: usize },

    #[error("empty dictionary")]
    EmptyDictionary,

    #[error("parameter out of range: {0}")]
    BadParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
