//! Eigen-analysis of the Ulam matrix.
//!
//! Power iteration recovers the invariant density (left eigenvector at 1);
//! the remaining leading eigenvalues come from explicitly restarted Arnoldi
//! on the density action with the known peripheral eigenvector deflated.
//! Eigenvalues inside the reference essential radius `max(1/lambda, nu)` are
//! flagged: below that radius the discretization, not the operator, decides
//! where eigenvalues land.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::rng;
use crate::transfer::ulam::UlamMatrix;
use crate::{Error, Result};

const EIG_TOL: f64 = 1e-10;
const MAX_MATVECS: usize = 2000;

/// Leading spectral data of an Ulam matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Top eigenvalues by modulus, leading one first.
    pub eigenvalues: Vec<Complex64>,
    /// Arnoldi residual estimate per eigenvalue (0 for the leading one once
    /// power iteration converges).
    pub residuals: Vec<f64>,
    /// Invariant density on cells, normalized to mean 1.
    pub invariant_density: Vec<f64>,
    /// `1 - |lambda_2|`.
    pub gap: f64,
    /// Reference essential radius `max(1/lambda, nu)` of the continuous map.
    pub essential_radius: f64,
    /// Per-eigenvalue flag: inside the essential-regime disc, so the value is
    /// resolution-dependent and not a physical resonance.
    pub essential_regime: Vec<bool>,
    pub converged: bool,
}

/// Left-eigenvector power iteration at eigenvalue 1.
fn invariant_density(p: &UlamMatrix) -> (Vec<f64>, bool) {
    let dim = p.dim();
    let mut v = vec![1.0; dim];
    for _ in 0..MAX_MATVECS {
        let next = p.apply_density(&v);
        let diff = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if diff < EIG_TOL {
            // mass is preserved by the row-stochastic action, so the mean is
            // already 1; renormalize only to absorb rounding
            let mean = v.iter().sum::<f64>() / dim as f64;
            for x in v.iter_mut() {
                *x /= mean;
            }
            return (v, true);
        }
    }
    let mean = v.iter().sum::<f64>() / dim as f64;
    for x in v.iter_mut() {
        *x /= mean;
    }
    (v, false)
}

/// One Arnoldi factorization of length `m` for the deflated density action.
/// Returns the basis, the square Hessenberg block, and `h_{m+1,m}`.
fn arnoldi(
    p: &UlamMatrix,
    h_star: &[f64],
    start: &[f64],
    m: usize,
) -> (Vec<Vec<f64>>, DMatrix<f64>, f64) {
    let dim = p.dim();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let nrm = norm2(start);
    basis.push(start.iter().map(|x| x / nrm).collect());
    let mut h_last = 0.0;
    for j in 0..m {
        // deflated action: subtract the rank-one peripheral part mean(v) h*
        let mut w = p.apply_density(&basis[j]);
        let mean = basis[j].iter().sum::<f64>() / dim as f64;
        for (wi, hi) in w.iter_mut().zip(h_star) {
            *wi -= mean * hi;
        }
        // modified Gram-Schmidt with one reorthogonalization pass
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = dot(&w, b);
                if i <= j {
                    h[(i, j)] += c;
                }
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let nw = norm2(&w);
        h[(j + 1, j)] = nw;
        h_last = nw;
        if nw < 1e-14 {
            return (basis, h.view((0, 0), (j + 1, j + 1)).into_owned(), 0.0);
        }
        basis.push(w.iter().map(|x| x / nw).collect());
    }
    (basis, h.view((0, 0), (m, m)).into_owned(), h_last)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenvector of the small Hessenberg block by shifted inverse iteration.
fn hessenberg_eigvec(h: &DMatrix<f64>, theta: Complex64) -> DVector<Complex<f64>> {
    let m = h.nrows();
    let shift = Complex::new(theta.re, theta.im) + Complex::new(1e-12, 1e-12);
    let a = DMatrix::<Complex<f64>>::from_fn(m, m, |i, j| {
        Complex::new(h[(i, j)], 0.0) - if i == j { shift } else { Complex::new(0.0, 0.0) }
    });
    let lu = a.lu();
    let mut y = DVector::<Complex<f64>>::from_element(m, Complex::new(1.0, 0.0));
    for _ in 0..3 {
        if let Some(z) = lu.solve(&y) {
            let n = z.norm();
            if n > 0.0 {
                y = z / Complex::new(n, 0.0);
            }
        }
    }
    y
}

/// Top-`k` eigenvalues and the invariant density.
pub fn spectrum(p: &UlamMatrix, k: usize, essential_radius: f64) -> Result<SpectralReport> {
    if k == 0 || k > 32 {
        return Err(Error::BadParameter(format!("k = {k} out of range 1..=32")));
    }
    let dim = p.dim();
    let (h_star, power_ok) = invariant_density(p);
    let mut eigenvalues = vec![Complex64::new(1.0, 0.0)];
    let mut residuals = vec![if power_ok { 0.0 } else { EIG_TOL }];
    let mut converged = power_ok;

    if k > 1 && dim > 2 {
        let m = (3 * k).max(24).min(dim - 1);
        let mut start: Vec<f64> = (0..dim)
            .map(|i| rng::range_at(17, 0, i as u64, -1.0, 1.0))
            .collect();
        let mut best: Option<(Vec<(Complex64, f64)>, f64)> = None;
        let mut used = 0usize;
        while used + m <= MAX_MATVECS {
            used += m;
            let (basis, h, h_last) = arnoldi(p, &h_star, &start, m);
            let mm = h.nrows();
            let eigs = h.complex_eigenvalues();
            let mut order: Vec<usize> = (0..mm).collect();
            order.sort_by(|&a, &b| eigs[b].norm().partial_cmp(&eigs[a].norm()).unwrap());
            let take = (k - 1).min(mm);
            let mut ritz: Vec<(Complex64, f64)> = Vec::with_capacity(take);
            let mut restart = vec![0.0; dim];
            for &idx in order.iter().take(take) {
                let theta = Complex64::new(eigs[idx].re, eigs[idx].im);
                let y = hessenberg_eigvec(&h, theta);
                let res = h_last * y[mm - 1].norm();
                ritz.push((theta, res));
                for (i, b) in basis.iter().take(mm).enumerate() {
                    let w = y[i].re;
                    for (r, bi) in restart.iter_mut().zip(b) {
                        *r += w * bi;
                    }
                }
            }
            let worst = ritz.iter().map(|r| r.1).fold(0.0, f64::max);
            if best.as_ref().map_or(true, |b| worst < b.1) {
                best = Some((ritz, worst));
            }
            if best.as_ref().unwrap().1 < EIG_TOL {
                break;
            }
            if norm2(&restart) < 1e-14 {
                break;
            }
            start = restart;
        }
        if let Some((ritz, worst)) = best {
            converged = converged && worst < EIG_TOL;
            for (theta, res) in ritz {
                eigenvalues.push(theta);
                residuals.push(res);
            }
        }
    }

    let gap = if eigenvalues.len() > 1 {
        1.0 - eigenvalues[1].norm()
    } else {
        f64::NAN
    };
    let essential_regime: Vec<bool> = eigenvalues
        .iter()
        .map(|l| l.norm() < essential_radius)
        .collect();
    Ok(SpectralReport {
        eigenvalues,
        residuals,
        invariant_density: h_star,
        gap,
        essential_radius,
        essential_regime,
        converged,
    })
}

/// Diagnostics of the Cesaro average `(1/n) sum_j e^{-i theta j} P^j` applied
/// to a probe basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectorDiagnostics {
    pub theta: f64,
    pub n_terms: usize,
    /// 2-norm of each projected probe, relative to the probe's own norm.
    pub probe_norms: Vec<f64>,
    /// Numerical rank of the projected probe family.
    pub numerical_rank: usize,
    /// `max ||S(Sp) - Sp|| / ||Sp||` over probes with nonvanishing image.
    pub idempotency_defect: f64,
    /// Real part of the first projected probe, rescaled to mean 1 when its
    /// mean is nonzero (at theta = 0 this approximates the invariant density).
    pub aligned_density: Vec<f64>,
}

fn cesaro_apply(p: &UlamMatrix, theta: f64, n_terms: usize, v: &[Complex64]) -> Vec<Complex64> {
    let mut acc = v.to_vec();
    let mut cur = v.to_vec();
    for j in 1..n_terms {
        cur = p.apply_density_complex(&cur);
        let rot = Complex64::from_polar(1.0, -theta * j as f64);
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += rot * c;
        }
    }
    let s = 1.0 / n_terms as f64;
    acc.iter().map(|a| a * s).collect()
}

fn cnorm2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Cesaro peripheral projector probe study.
pub fn peripheral_projector(
    p: &UlamMatrix,
    theta: f64,
    n_terms: usize,
    n_probes: usize,
) -> Result<ProjectorDiagnostics> {
    if n_terms == 0 || n_terms > 10_000 {
        return Err(Error::BadParameter(format!(
            "n_terms = {n_terms} out of range 1..=10000"
        )));
    }
    let dim = p.dim();
    let n_probes = n_probes.clamp(1, 8);
    // density-like probes (positive mean): a mean-zero probe has almost no
    // peripheral component, which turns the idempotency ratio into noise
    let probes: Vec<Vec<Complex64>> = (0..n_probes)
        .map(|s| {
            (0..dim)
                .map(|i| {
                    let r = rng::range_at(23, s as u64, i as u64, -0.5, 0.5);
                    Complex64::new(1.0 + r, 0.0)
                })
                .collect()
        })
        .collect();
    let images: Vec<Vec<Complex64>> = probes
        .iter()
        .map(|q| cesaro_apply(p, theta, n_terms, q))
        .collect();
    let probe_norms: Vec<f64> = probes
        .iter()
        .zip(&images)
        .map(|(q, s)| cnorm2(s) / cnorm2(q))
        .collect();

    let mut defect = 0.0f64;
    for (q, s) in probes.iter().zip(&images) {
        let ns = cnorm2(s);
        if ns < 1e-9 * cnorm2(q) {
            continue;
        }
        let ss = cesaro_apply(p, theta, n_terms, s);
        let d: f64 = ss
            .iter()
            .zip(s)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        defect = defect.max(d / ns);
    }

    // rank threshold tied to the Cesaro convergence rate O(1/n)
    let mat = DMatrix::<Complex<f64>>::from_fn(dim, n_probes, |i, j| {
        Complex::new(images[j][i].re, images[j][i].im)
    });
    let sv = mat.svd(false, false).singular_values;
    let scale = probes.iter().map(|q| cnorm2(q)).fold(0.0, f64::max);
    let tol = scale * (20.0 / n_terms as f64).max(1e-10);
    let numerical_rank = sv.iter().filter(|&&s| s > tol).count();

    let mut aligned: Vec<f64> = images[0].iter().map(|c| c.re).collect();
    let mean = aligned.iter().sum::<f64>() / dim as f64;
    if mean.abs() > 1e-9 {
        for x in aligned.iter_mut() {
            *x /= mean;
        }
    }
    Ok(ProjectorDiagnostics {
        theta,
        n_terms,
        probe_norms,
        numerical_rank,
        idempotency_defect: defect,
        aligned_density: aligned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AnosovMap, Component, TrigTerm};
    use crate::transfer::ulam::{build_ulam, UlamMethod};

    const ESSENTIAL: f64 = 0.381_966_011_250_105;

    fn perturbed(eps: f64) -> AnosovMap {
        AnosovMap::new(
            [[2, 1], [1, 1]],
            vec![TrigTerm {
                component: Component::Y,
                amplitude: eps,
                freq: [1, 1],
                phase: 0.3,
            }],
        )
        .unwrap()
    }

    #[test]
    fn exact_cat_stationary_vector_is_uniform() {
        let p = build_ulam(&AnosovMap::cat(), 64, UlamMethod::ExactPolygon, 0, 0).unwrap();
        let rep = spectrum(&p, 1, ESSENTIAL).unwrap();
        assert!((rep.eigenvalues[0].norm() - 1.0).abs() < 1e-10);
        for v in &rep.invariant_density {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_leading_eigenvalue_and_density() {
        let p = build_ulam(&perturbed(0.05), 64, UlamMethod::MonteCarlo, 4096, 2).unwrap();
        let rep = spectrum(&p, 6, ESSENTIAL).unwrap();
        assert!((rep.eigenvalues[0].norm() - 1.0).abs() < 1e-10);
        for v in &rep.invariant_density {
            assert!(*v >= -1e-12);
        }
        let mean = rep.invariant_density.iter().sum::<f64>() / p.dim() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        // eigenvalues are sorted by modulus and bounded by the leading one
        for w in rep.eigenvalues.windows(2) {
            assert!(w[0].norm() >= w[1].norm() - 1e-9);
        }
    }

    #[test]
    fn subdominant_eigenvalues_match_dense_oracle() {
        // small matrix: compare Arnoldi against nalgebra's dense solver
        let p = build_ulam(&perturbed(0.05), 8, UlamMethod::MonteCarlo, 1024, 3).unwrap();
        let dim = p.dim();
        let mut dense = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                // transpose: density action is v -> v P
                dense[(p.col_idx[k], i)] = p.values[k];
            }
        }
        let mut all: Vec<Complex64> = dense
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect();
        all.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
        let rep = spectrum(&p, 4, ESSENTIAL).unwrap();
        for i in 1..4 {
            assert!(
                (rep.eigenvalues[i].norm() - all[i].norm()).abs() < 1e-7,
                "|lambda_{i}|: arnoldi {} dense {}",
                rep.eigenvalues[i].norm(),
                all[i].norm()
            );
        }
    }

    #[test]
    fn essential_regime_flagging() {
        let p = build_ulam(&perturbed(0.05), 32, UlamMethod::MonteCarlo, 1024, 4).unwrap();
        let rep = spectrum(&p, 8, ESSENTIAL).unwrap();
        for (l, flag) in rep.eigenvalues.iter().zip(&rep.essential_regime) {
            assert_eq!(*flag, l.norm() < ESSENTIAL);
        }
        assert!(!rep.essential_regime[0]);
    }

    #[test]
    fn cesaro_projector_is_rank_one_for_mixing_map() {
        let p = build_ulam(&perturbed(0.05), 32, UlamMethod::MonteCarlo, 4096, 5).unwrap();
        let rep = spectrum(&p, 2, ESSENTIAL).unwrap();
        let d = peripheral_projector(&p, 0.0, 1000, 4).unwrap();
        assert_eq!(d.numerical_rank, 1);
        assert!(d.idempotency_defect < 5e-3, "defect {}", d.idempotency_defect);
        // projected probe aligns with the invariant density
        let mut worst = 0.0f64;
        for (a, b) in d.aligned_density.iter().zip(&rep.invariant_density) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 0.02, "alignment deviation {worst}");
    }

    #[test]
    fn cesaro_average_vanishes_off_the_spectrum_angles() {
        let p = build_ulam(&perturbed(0.05), 32, UlamMethod::MonteCarlo, 4096, 5).unwrap();
        let d = peripheral_projector(&p, 2.0, 2000, 3).unwrap();
        assert_eq!(d.numerical_rank, 0);
        for r in &d.probe_norms {
            assert!(*r < 0.02, "probe survived: {r}");
        }
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let p = build_ulam(&AnosovMap::cat(), 4, UlamMethod::ExactPolygon, 0, 0).unwrap();
        assert!(spectrum(&p, 0, ESSENTIAL).is_err());
        assert!(spectrum(&p, 33, ESSENTIAL).is_err());
    }
}
