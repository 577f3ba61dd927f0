//! Weighted `C^rho` norms of band-limited fields and leafwise norms of
//! test functions along a foliation.
//!
//! The weighted norm is
//!
//! ```text
//! |phi|_{C^rho, varpi} = sum_{k=0..rho} varpi^{rho-k} max_{|alpha|=k} sup |d^alpha phi|
//! ```
//!
//! with the weight `varpi >= 2` damping the low-order terms so that the
//! norm is submultiplicative: |f g| <= |f| |g| (the binomial coefficients
//! of the Leibniz rule are absorbed by the weight).  The leafwise norm of
//! a test function takes, over every leaf of a foliation and every chart,
//! the one-dimensional weighted `C^q` norm of the restriction to the leaf
//! in the transverse parameter.

use crate::error::{Error, Result};
use crate::foliation::FoliationFamily;
use crate::numerics::chebyshev::Cheb1;
use crate::numerics::trig::TrigField;

pub const DEFAULT_VARPI: f64 = 4.0;
pub const DEFAULT_A: f64 = 1.0;

/// Parameters shared by the norm estimators.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NormConfig {
    /// Transverse smoothness order q of the test functions.
    pub q: usize,
    /// Weight in the weighted C-norms; must be >= 2 for submultiplicativity.
    pub varpi: f64,
    /// Coupling constant in the combined norm a |.|_0q + |.|*_1q.
    pub a: f64,
    /// Regularity budget order carried by the foliations.
    pub r: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            q: 1,
            varpi: DEFAULT_VARPI,
            a: DEFAULT_A,
            r: 4,
        }
    }
}

impl NormConfig {
    pub fn validate(&self) -> Result<()> {
        if self.varpi < 2.0 {
            return Err(Error::BadParameter(format!(
                "varpi = {} < 2 breaks submultiplicativity",
                self.varpi
            )));
        }
        if self.a <= 0.0 {
            return Err(Error::BadParameter("a must be positive".into()));
        }
        Ok(())
    }
}

/// Weighted C^rho norm of a scalar band-limited field; sups are taken on
/// an m x m synthesis grid (a lower bound that converges from below).
pub fn weighted_c_norm(phi: &TrigField, rho: usize, varpi: f64, m: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..=rho {
        let mut sup_k = 0.0f64;
        for j in 0..=k {
            let mut d = phi.clone();
            for _ in 0..(k - j) {
                d = d.dx();
            }
            for _ in 0..j {
                d = d.dy();
            }
            sup_k = sup_k.max(d.sup_estimate(m));
        }
        total += varpi.powi((rho - k) as i32) * sup_k;
    }
    total
}

/// Weighted C^rho norm of a 2-vector field.  The pointwise vector norm is
/// |v_1| + |v_2| (the operator norm of a column vector on sup-normed
/// spaces), so the C^0 sup of each derivative is taken on the sum of the
/// component magnitudes at matching grid points.
pub fn weighted_c_norm_vec(phi: &[TrigField; 2], rho: usize, varpi: f64, m: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..=rho {
        let mut sup_k = 0.0f64;
        for j in 0..=k {
            let mut comps = Vec::with_capacity(2);
            for c in phi.iter() {
                let mut d = c.clone();
                for _ in 0..(k - j) {
                    d = d.dx();
                }
                for _ in 0..j {
                    d = d.dy();
                }
                comps.push(d.values_on_grid(m));
            }
            for (a, b) in comps[0].iter().zip(comps[1].iter()) {
                sup_k = sup_k.max(a.abs() + b.abs());
            }
        }
        total += varpi.powi((rho - k) as i32) * sup_k;
    }
    total
}

/// One-dimensional weighted C^q norm of a Chebyshev-fitted restriction,
/// with sups sampled on a uniform refinement of the fit interval.
pub fn cheb_weighted_norm(f: &Cheb1, q: usize, varpi: f64) -> f64 {
    let samples = 4 * (f.degree() + 2);
    let mut total = 0.0;
    let mut d = f.clone();
    for k in 0..=q {
        let mut sup = 0.0f64;
        for i in 0..=samples {
            let x = f.lo() + (f.hi() - f.lo()) * i as f64 / samples as f64;
            sup = sup.max(d.eval(x).abs());
        }
        total += varpi.powi((q - k) as i32) * sup;
        if k < q {
            d = d.derivative();
        }
    }
    total
}

/// How densely the leafwise sup over (chart, leaf) is sampled.
#[derive(Debug, Clone)]
pub struct LeafSampling {
    /// Chart centers per torus direction (centers_n^2 charts).
    pub centers_n: usize,
    /// Leaf labels per chart window.
    pub x_nodes: usize,
    /// Chebyshev degree of the fitted restriction along the leaf.
    pub degree: usize,
}

impl Default for LeafSampling {
    fn default() -> Self {
        LeafSampling {
            centers_n: 5,
            x_nodes: 5,
            degree: 12,
        }
    }
}

/// Leafwise norm against an explicitly parametrized foliation: `leaf`
/// maps (chart grid cell (i, j), leaf label x in [-half, half], height y)
/// to the ambient point of the leaf.  Returns a lower bound that grows
/// monotonically with the sampling density.
pub fn leafwise_norm(
    phi: &TrigField,
    leaf: &impl Fn(usize, usize, f64, f64) -> (f64, f64),
    half: f64,
    q: usize,
    varpi: f64,
    s: &LeafSampling,
) -> f64 {
    let mut best = 0.0f64;
    for ci in 0..s.centers_n {
        for cj in 0..s.centers_n {
            for xi in 0..s.x_nodes {
                let x0 = -half + 2.0 * half * xi as f64 / (s.x_nodes - 1).max(1) as f64;
                let f = Cheb1::fit_fn(s.degree, 0.0, half, |y| {
                    let (px, py) = leaf(ci, cj, x0, y);
                    phi.eval(px, py)
                });
                best = best.max(cheb_weighted_norm(&f, q, varpi));
            }
        }
    }
    best
}

/// Leafwise norm of a 2-vector test function: the component restrictions
/// are fitted on the same leaf and their weighted C^q norms added before
/// taking the sup over leaves.
pub fn leafwise_norm_vec(
    phi: &[TrigField; 2],
    leaf: &impl Fn(usize, usize, f64, f64) -> (f64, f64),
    half: f64,
    q: usize,
    varpi: f64,
    s: &LeafSampling,
) -> f64 {
    let mut best = 0.0f64;
    for ci in 0..s.centers_n {
        for cj in 0..s.centers_n {
            for xi in 0..s.x_nodes {
                let x0 = -half + 2.0 * half * xi as f64 / (s.x_nodes - 1).max(1) as f64;
                let mut sum = 0.0;
                for c in phi.iter() {
                    let f = Cheb1::fit_fn(s.degree, 0.0, half, |y| {
                        let (px, py) = leaf(ci, cj, x0, y);
                        c.eval(px, py)
                    });
                    sum += cheb_weighted_norm(&f, q, varpi);
                }
                best = best.max(sum);
            }
        }
    }
    best
}

/// Leafwise norm over the charts of a fitted foliation family.
pub fn leafwise_norm_family(
    phi: &TrigField,
    family: &FoliationFamily,
    q: usize,
    varpi: f64,
    s: &LeafSampling,
) -> Result<f64> {
    let half = family.delta0 / 2.0;
    let mut best = 0.0f64;
    for ci in 0..s.centers_n {
        for cj in 0..s.centers_n {
            let center = crate::dynamics::TorusPoint::new(
                (ci as f64 + 0.5) / s.centers_n as f64,
                (cj as f64 + 0.5) / s.centers_n as f64,
            );
            let chart = family.chart_at(center, s.degree)?;
            for xi in 0..s.x_nodes {
                let x0 = -half + 2.0 * half * xi as f64 / (s.x_nodes - 1).max(1) as f64;
                let f = Cheb1::fit_fn(s.degree, 0.0, half, |y| {
                    let p = chart.leaf_point(x0, y);
                    phi.eval(p.x, p.y)
                });
                best = best.max(cheb_weighted_norm(&f, q, varpi));
            }
        }
    }
    Ok(best)
}
