//! Pointwise transfer operator on trigonometric densities.
//!
//! `(Lh)(x) = h(T^{-1}x) / |det DT(T^{-1}x)|`: the operator pushes a density
//! forward under the map.  The preimage grid and Jacobian determinants depend
//! only on the map and the quadrature resolution, so they are computed once
//! and reused across repeated applications (power iterates `L^n h`).

use rayon::prelude::*;

use crate::dynamics::{AnosovMap, TorusPoint};
use crate::numerics::trig::TrigField;
use crate::{Error, Result};

/// A density in one of the two working representations.
#[derive(Debug, Clone)]
pub enum DensityField {
    /// Band-limited trigonometric coefficients.
    Trig(TrigField),
    /// Cell averages on the `n x n` uniform partition, row-major in `(ix, iy)`.
    Cells { n: usize, values: Vec<f64> },
}

impl DensityField {
    /// Mean of the density over the torus.
    pub fn integral(&self) -> f64 {
        match self {
            DensityField::Trig(f) => f.integral(),
            DensityField::Cells { values, .. } => {
                values.iter().sum::<f64>() / values.len() as f64
            }
        }
    }
}

/// Transfer operator with a cached preimage quadrature grid.
pub struct TransferOperator {
    map: AnosovMap,
    m: usize,
    band: i64,
    /// `T^{-1}` of each grid node, row-major in `(ix, iy)`.
    preimages: Vec<TorusPoint>,
    /// `1 / |det DT|` at each preimage.
    inv_det: Vec<f64>,
    /// Largest acceptable coefficient-tail fraction after the refit.
    pub tail_tol: f64,
}

impl TransferOperator {
    /// Precomputes the preimage grid for an `m x m` quadrature and refits at
    /// frequency cap `band`.
    pub fn new(map: AnosovMap, m: usize, band: i64) -> Result<Self> {
        if m < 2 * band as usize + 2 {
            return Err(Error::BadParameter(format!(
                "quadrature grid {m} cannot resolve band {band}"
            )));
        }
        let nodes: Vec<(usize, usize)> =
            (0..m).flat_map(|ix| (0..m).map(move |iy| (ix, iy))).collect();
        let pre: Result<Vec<(TorusPoint, f64)>> = nodes
            .par_iter()
            .map(|&(ix, iy)| {
                let p = TorusPoint::new(ix as f64 / m as f64, iy as f64 / m as f64);
                let q = map.apply(&p, -1)?;
                let det = map.jacobian(&q, 1)?.det();
                Ok((q, 1.0 / det.abs()))
            })
            .collect();
        let pre = pre?;
        Ok(TransferOperator {
            map,
            m,
            band,
            preimages: pre.iter().map(|t| t.0).collect(),
            inv_det: pre.iter().map(|t| t.1).collect(),
            tail_tol: 1e-6,
        })
    }

    pub fn map(&self) -> &AnosovMap {
        &self.map
    }

    /// Applies the operator once and refits; returns the new field and the
    /// refit tail fraction.  The mean is restored exactly afterwards, since
    /// the operator preserves total mass by the change of variables.
    pub fn apply(&self, h: &TrigField) -> Result<(TrigField, f64)> {
        let vals: Vec<f64> = self
            .preimages
            .par_iter()
            .zip(&self.inv_det)
            .map(|(q, w)| h.eval(q.x, q.y) * w)
            .collect();
        let (mut out, tail) = TrigField::fit_grid(&vals, self.m, self.band);
        if tail > self.tail_tol {
            return Err(Error::AliasedRefit { tail_fraction: tail });
        }
        let mass = h.integral();
        out.set_coeff(0, 0, num_complex::Complex64::new(mass, 0.0));
        Ok((out, tail))
    }

    /// `L^n h`, tracking the worst refit tail along the way.
    pub fn power(&self, h: &TrigField, n: u32) -> Result<(TrigField, f64)> {
        let mut f = h.clone();
        let mut worst = 0.0f64;
        for _ in 0..n {
            let (g, tail) = self.apply(&f)?;
            worst = worst.max(tail);
            f = g;
        }
        Ok((f, worst))
    }
}

/// One application of the transfer operator in either representation.
pub fn apply_transfer(map: &AnosovMap, h: &DensityField, m: usize) -> Result<DensityField> {
    match h {
        DensityField::Trig(f) => {
            let op = TransferOperator::new(map.clone(), m, f.band)?;
            Ok(DensityField::Trig(op.apply(f)?.0))
        }
        DensityField::Cells { n, values } => {
            // cell averages push forward as mass: evaluate the preimage of a
            // sub-grid inside each target cell and average the source values
            let n = *n;
            let sub = (m / n).max(2);
            let out: Result<Vec<f64>> = (0..n * n)
                .into_par_iter()
                .map(|cell| {
                    let (ix, iy) = (cell / n, cell % n);
                    let mut acc = 0.0;
                    for sx in 0..sub {
                        for sy in 0..sub {
                            let p = TorusPoint::new(
                                (ix as f64 + (sx as f64 + 0.5) / sub as f64) / n as f64,
                                (iy as f64 + (sy as f64 + 0.5) / sub as f64) / n as f64,
                            );
                            let q = map.apply(&p, -1)?;
                            let det = map.jacobian(&q, 1)?.det().abs();
                            let jx = ((q.x * n as f64).floor() as usize).min(n - 1);
                            let jy = ((q.y * n as f64).floor() as usize).min(n - 1);
                            acc += values[jx * n + jy] / det;
                        }
                    }
                    Ok(acc / (sub * sub) as f64)
                })
                .collect();
            Ok(DensityField::Cells { n, values: out? })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Component, TrigTerm};
    use crate::numerics::rng;

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

    fn random_field(band: i64, seed_stream: u64) -> TrigField {
        let mut f = TrigField::zero(band);
        let mut c = 0u64;
        for kx in 0..=band {
            for ky in -band..=band {
                if kx == 0 && ky <= 0 {
                    continue;
                }
                let re = rng::range_at(11, seed_stream, c, -1.0, 1.0);
                let im = rng::range_at(11, seed_stream, c + 1, -1.0, 1.0);
                c += 2;
                f.set_coeff(kx, ky, num_complex::Complex64::new(re, im) * 0.5);
                f.set_coeff(-kx, -ky, num_complex::Complex64::new(re, -im) * 0.5);
            }
        }
        f
    }

    #[test]
    fn volume_preserving_fixes_constants() {
        let op = TransferOperator::new(AnosovMap::cat(), 32, 4).unwrap();
        let one = TrigField::constant(4, 1.0);
        let (l1, tail) = op.apply(&one).unwrap();
        assert!(tail < 1e-12);
        for kx in -4..=4 {
            for ky in -4..=4 {
                let want = if kx == 0 && ky == 0 { 1.0 } else { 0.0 };
                assert!((l1.coeff(kx, ky).re - want).abs() < 1e-12);
                assert!(l1.coeff(kx, ky).im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_is_preserved() {
        let op = TransferOperator::new(perturbed(0.05), 64, 24).unwrap();
        let h = random_field(3, 0).add(&TrigField::constant(3, 1.0));
        let (lh, _) = op.apply(&h).unwrap();
        assert!((lh.integral() - h.integral()).abs() < 1e-12);
    }

    #[test]
    fn characters_push_forward_by_inverse_transpose() {
        // for the linear map A, h = e(k . x) maps to e((A^{-T}k) . x); with
        // A = [[2,1],[1,1]], A^{-T} = [[1,-1],[-1,2]]
        let op = TransferOperator::new(AnosovMap::cat(), 64, 8).unwrap();
        let h = TrigField::character(8, 1, 2, true);
        let (lh, tail) = op.apply(&h).unwrap();
        assert!(tail < 1e-10);
        // k = (1,2) -> A^{-T}k = (1-2, -1+4) = (-1, 3)
        assert!((lh.coeff(-1, 3).re - 0.5).abs() < 1e-10);
        assert!((lh.coeff(1, -3).re - 0.5).abs() < 1e-10);
        let mut energy_rest = 0.0;
        for kx in -8..=8 {
            for ky in -8..=8 {
                if (kx, ky) == (-1, 3) || (kx, ky) == (1, -3) {
                    continue;
                }
                energy_rest += lh.coeff(kx, ky).norm_sqr();
            }
        }
        assert!(energy_rest < 1e-18);
    }

    #[test]
    fn duality_holds_for_random_pairs() {
        // |int (Lh) phi - int h (phi o T)| small, checked by quadrature
        let map = perturbed(0.05);
        let op = TransferOperator::new(map.clone(), 96, 24).unwrap();
        let m = 192;
        for trial in 0..100 {
            let h = random_field(3, 2 * trial);
            let phi = random_field(3, 2 * trial + 1);
            let (lh, _) = op.apply(&h).unwrap();
            let lhs = lh.pair(&phi);
            let mut rhs = 0.0;
            for ix in 0..m {
                for iy in 0..m {
                    let p = TorusPoint::new(ix as f64 / m as f64, iy as f64 / m as f64);
                    let q = map.apply(&p, 1).unwrap();
                    rhs += h.eval(p.x, p.y) * phi.eval(q.x, q.y);
                }
            }
            rhs /= (m * m) as f64;
            assert!((lhs - rhs).abs() < 1e-8, "trial {trial}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn aliasing_is_detected() {
        // a coarse quadrature grid cannot resolve the pushforward of a
        // high-frequency character under the expanding map
        let op = TransferOperator::new(AnosovMap::cat(), 20, 8).unwrap();
        let h = TrigField::character(8, 5, -5, true);
        match op.apply(&h) {
            Err(Error::AliasedRefit { .. }) => {}
            other => panic!("expected aliasing error, got {other:?}"),
        }
    }

    #[test]
    fn cell_representation_preserves_mass() {
        let n = 16;
        let mut values = vec![0.0; n * n];
        for (i, v) in values.iter_mut().enumerate() {
            *v = 1.0 + 0.5 * ((i as f64) * 0.7).sin();
        }
        let h = DensityField::Cells { n, values };
        let mass = h.integral();
        let lh = apply_transfer(&AnosovMap::cat(), &h, 64).unwrap();
        assert!((lh.integral() - mass).abs() < 0.02);
    }
}
