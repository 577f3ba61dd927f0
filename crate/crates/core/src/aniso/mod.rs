//! Anisotropic norm machinery: weighted C^rho norms, leafwise norms of
//! test functions, the certified (foliation, test function) dictionary
//! with the induced lower-bound norm estimators, mollification along
//! leaves, unstable-direction heat smoothing, the stable/unstable
//! decomposition of vector fields, and the contraction measurement for
//! test functions pulled through the dynamics.

mod cnorm;
mod contraction;
mod decompose;
mod dictionary;
mod smoothing;

pub use cnorm::{
    cheb_weighted_norm, leafwise_norm, leafwise_norm_family, leafwise_norm_vec, weighted_c_norm,
    weighted_c_norm_vec, LeafSampling, NormConfig, DEFAULT_A, DEFAULT_VARPI,
};
pub use contraction::{verify_test_contraction, ContractionFit, ContractionRow};
pub use decompose::{
    decompose_stable_unstable, divergence_identity_check, leafwise_divergence_check,
    unstable_graph_slope, Decomposition, DivergenceReport,
};
pub use dictionary::{
    estimate_norm_0q, estimate_norm_1q, Certificate, DictFoliation, Dictionary, DictionaryParams,
    NormReport, ScalarPair, VectorPair,
};
pub use smoothing::{heat_smooth_unstable, mollify_along_leaves, MollifyResult};
