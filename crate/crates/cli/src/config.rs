//! Experiment configuration: one serializable schema for every
//! subcommand, hashed so artifacts can be traced back to their inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use torusdyn::aniso::{DictionaryParams, NormConfig};
use torusdyn::dynamics::{AnosovMap, Component, TrigTerm};
use torusdyn::transfer::UlamMethod;
use torusdyn::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MapSpec {
    pub linear: [[i64; 2]; 2],
    #[serde(default)]
    pub perturbation: Vec<TrigTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DictSpec {
    pub k_max: i64,
    pub n_random: usize,
    pub random_band: i64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UlamSpec {
    /// Partition side; must be a power of two.
    pub n_side: usize,
    /// "exact" (polygon clipping, affine maps only) or "montecarlo".
    pub method: String,
    pub samples: usize,
}

/// Full experiment configuration.  Field order is the serialization
/// order, so the hash of a config is stable across runs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    pub seed: u64,
    pub out_dir: String,

    /// Chart window diameter for foliation work.
    pub delta0: f64,
    /// Chebyshev degree for chart fits.
    pub chart_degree: usize,
    /// Weighted-norm configuration (order q, weight base, scale a, order cap r).
    pub norm_q: usize,
    pub norm_varpi: f64,
    pub norm_a: f64,
    pub norm_r: usize,
    /// Regularity budget parameter L for the foliation-evolution check.
    pub regularity_l: f64,
    /// Generating slope field of the curvature test family.
    pub foliation_amplitude: f64,
    pub foliation_freq: [i64; 2],
    /// Largest horizon scanned for the half-budget generation.
    pub budget_max_n: u64,

    pub dictionary: DictSpec,
    pub ulam: UlamSpec,
    /// Number of eigenvalues requested from the sparse solver.
    pub spectrum_k: usize,

    /// Band limit and grid for the band-limited transfer operator.
    pub transfer_band: i64,
    pub transfer_m: usize,
    pub transfer_tail_tol: f64,

    pub n_list_ly: Vec<u32>,
    pub n_list_contraction: Vec<u64>,
    pub contraction_centers: usize,
    pub n_list_birkhoff: Vec<u64>,
    pub birkhoff_samples: usize,
    pub correlations_n_max: usize,
    pub mollify_eps: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map: MapSpec {
                linear: [[2, 1], [1, 1]],
                perturbation: vec![TrigTerm {
                    component: Component::Y,
                    amplitude: 0.05,
                    freq: [1, 1],
                    phase: 0.3,
                }],
            },
            seed: 11,
            out_dir: "out".into(),
            delta0: 0.1,
            chart_degree: 10,
            norm_q: 1,
            norm_varpi: torusdyn::aniso::DEFAULT_VARPI,
            norm_a: torusdyn::aniso::DEFAULT_A,
            norm_r: 4,
            regularity_l: 4.0,
            foliation_amplitude: 0.2,
            foliation_freq: [1, 0],
            budget_max_n: 12,
            dictionary: DictSpec {
                k_max: 8,
                n_random: 16,
                random_band: 4,
                seed: 7,
            },
            ulam: UlamSpec {
                n_side: 64,
                method: "montecarlo".into(),
                samples: 4096,
            },
            spectrum_k: 5,
            transfer_band: 96,
            transfer_m: 224,
            transfer_tail_tol: 0.05,
            n_list_ly: vec![1, 2, 3, 4],
            n_list_contraction: vec![1, 2, 3, 4, 5, 6, 7, 8],
            contraction_centers: 16,
            n_list_birkhoff: vec![16, 32, 64, 128, 256, 512, 1024, 2048, 4096],
            birkhoff_samples: 10_000,
            correlations_n_max: 14,
            mollify_eps: vec![0.04, 0.02, 0.01],
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::BadParameter(format!("config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::BadParameter(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Construct the configured map; the constructor rejects
    /// non-hyperbolic linear parts (|trace| <= 2).
    pub fn build_map(&self) -> Result<AnosovMap> {
        AnosovMap::new(self.map.linear, self.map.perturbation.clone())
    }

    /// The same map with the perturbation switched off.
    pub fn build_linear_map(&self) -> Result<AnosovMap> {
        AnosovMap::new(self.map.linear, Vec::new())
    }

    pub fn norm_config(&self) -> NormConfig {
        NormConfig {
            q: self.norm_q,
            varpi: self.norm_varpi,
            a: self.norm_a,
            r: self.norm_r,
        }
    }

    pub fn dictionary_params(&self, q: usize) -> DictionaryParams {
        let mut cfg = self.norm_config();
        cfg.q = q;
        DictionaryParams {
            k_max: self.dictionary.k_max,
            n_random: self.dictionary.n_random,
            random_band: self.dictionary.random_band,
            seed: self.dictionary.seed,
            delta0_half: self.delta0 / 2.0,
            cfg,
        }
    }

    pub fn ulam_method(&self) -> Result<UlamMethod> {
        match self.ulam.method.as_str() {
            "exact" => Ok(UlamMethod::ExactPolygon),
            "montecarlo" => Ok(UlamMethod::MonteCarlo),
            other => Err(Error::BadParameter(format!(
                "unknown assembly method {other:?}; use \"exact\" or \"montecarlo\""
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.build_map()?;
        self.norm_config().validate()?;
        self.ulam_method()?;
        if !self.ulam.n_side.is_power_of_two() {
            return Err(Error::BadParameter(format!(
                "partition side {} must be a power of two",
                self.ulam.n_side
            )));
        }
        if self.transfer_m < 2 * self.transfer_band as usize + 2 {
            return Err(Error::BadParameter(format!(
                "transfer grid {} too small for band {}",
                self.transfer_m, self.transfer_band
            )));
        }
        for &e in &self.mollify_eps {
            if !(e > 0.0 && e < self.delta0 / 2.0) {
                return Err(Error::BadParameter(format!(
                    "mollifier width {e} outside (0, {})",
                    self.delta0 / 2.0
                )));
            }
        }
        if self.n_list_ly.is_empty()
            || self.n_list_contraction.is_empty()
            || self.n_list_birkhoff.is_empty()
        {
            return Err(Error::BadParameter("empty horizon list".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}
