//! Transfer-operator numerics: pointwise application on trigonometric
//! densities, Ulam discretization, spectral analysis, correlation decay,
//! Cesaro peripheral projectors, Birkhoff-average variance, and the
//! norm-decay experiment.

mod density;
mod spectral;
mod stats;
mod ulam;

pub use density::{apply_transfer, DensityField, TransferOperator};
pub use spectral::{peripheral_projector, spectrum, ProjectorDiagnostics, SpectralReport};
pub use stats::{
    birkhoff_experiment, character_correlation_support, correlations, lasota_yorke_experiment,
    ulam_correlations, BirkhoffCurve, CorrelationSeries, InvariantMeasure, LyRow,
};
pub use ulam::{build_ulam, UlamMatrix, UlamMethod};
