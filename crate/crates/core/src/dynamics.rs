//! Hyperbolic toral maps: an integer linear part plus a trigonometric
//! perturbation, adapted linear frames, cone fields, and empirical
//! expansion/contraction constants.

use crate::error::{Error, Result};
use crate::numerics::mat2::Mat2;
use crate::numerics::rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 50;

/// A point on the 2-torus, coordinates reduced to [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        TorusPoint {
            x: x.rem_euclid(1.0),
            y: y.rem_euclid(1.0),
        }
    }

    /// Wraparound distance on the torus.
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        let dx = (self.x - other.x).rem_euclid(1.0);
        let dy = (self.y - other.y).rem_euclid(1.0);
        let dx = dx.min(1.0 - dx);
        let dy = dy.min(1.0 - dy);
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
}

/// One additive perturbation term: `amplitude * sin(2 pi freq.p + phase)`
/// added to the named component of the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub component: Component,
    pub amplitude: f64,
    pub freq: [i64; 2],
    #[serde(default)]
    pub phase: f64,
}

/// Uniform sampling grid on the torus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub nx: usize,
    pub ny: usize,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        SamplingGrid { nx: 32, ny: 32 }
    }
}

impl SamplingGrid {
    pub fn points(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        let (nx, ny) = (self.nx, self.ny);
        (0..nx).flat_map(move |i| {
            (0..ny).map(move |j| TorusPoint::new(i as f64 / nx as f64, j as f64 / ny as f64))
        })
    }
}

/// Cone `K_theta = {|x| <= theta |y|}` in the coordinates of `frame`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeField {
    pub theta: f64,
    pub frame: Mat2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeReport {
    pub holds: bool,
    pub measured_eta: f64,
    pub witness: Option<TorusPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbolicityEstimate {
    pub lambda: f64,
    pub nu: f64,
    pub c_zero: f64,
    pub eta: f64,
    pub lambda_plus: f64,
    pub sample_count: usize,
    pub horizon_n: usize,
}

/// An invertible toral map `T(p) = A p + g(p) mod 1` with hyperbolic
/// integer part `A` and trigonometric `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnosovMap {
    pub linear: [[i64; 2]; 2],
    pub perturbation: Vec<TrigTerm>,
    /// Sends the unstable eigendirection of `A` to the x-axis and the
    /// stable one to the y-axis.
    pub adapted_frame: Mat2,
    frame_inv: Mat2,
    linear_f: Mat2,
    linear_inv: Mat2,
    /// Unstable/stable eigenvalues of the linear part, |unstable| > 1.
    pub eig_unstable: f64,
    pub eig_stable: f64,
}

impl AnosovMap {
    pub fn new(linear: [[i64; 2]; 2], perturbation: Vec<TrigTerm>) -> Result<Self> {
        let det = linear[0][0] * linear[1][1] - linear[0][1] * linear[1][0];
        let trace = linear[0][0] + linear[1][1];
        if det.abs() != 1 || trace.abs() <= 2 {
            return Err(Error::InvalidMap(format!(
                "linear part must have det +-1 and |trace| > 2, got det {det}, trace {trace}"
            )));
        }
        let (t, d) = (trace as f64, det as f64);
        let disc = (t * t - 4.0 * d).sqrt();
        let e1 = 0.5 * (t + disc);
        let e2 = 0.5 * (t - disc);
        let (eu, es) = if e1.abs() > e2.abs() { (e1, e2) } else { (e2, e1) };
        let eigvec = |e: f64| -> [f64; 2] {
            let a = linear[0][0] as f64;
            let b = linear[0][1] as f64;
            let c = linear[1][0] as f64;
            let dd = linear[1][1] as f64;
            let v = if b.abs() > 1e-14 {
                [b, e - a]
            } else {
                [e - dd, c]
            };
            let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
            [v[0] / n, v[1] / n]
        };
        let vu = eigvec(eu);
        let vs = eigvec(es);
        let basis = Mat2::from_cols(vu, vs);
        if basis.det().abs() < 1e-12 {
            return Err(Error::InvalidMap("degenerate eigenbasis".into()));
        }
        let frame = basis.inverse();
        let linear_f = Mat2::new(
            linear[0][0] as f64,
            linear[0][1] as f64,
            linear[1][0] as f64,
            linear[1][1] as f64,
        );
        let map = AnosovMap {
            linear,
            perturbation,
            adapted_frame: frame,
            frame_inv: basis,
            linear_inv: linear_f.inverse(),
            linear_f,
            eig_unstable: eu,
            eig_stable: es,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn cat() -> Self {
        Self::new([[2, 1], [1, 1]], vec![]).expect("cat map is admissible")
    }

    pub fn frame(&self) -> Mat2 {
        self.adapted_frame
    }

    pub fn frame_inv(&self) -> Mat2 {
        self.frame_inv
    }

    /// Inverse of the linear part; for a unimodular integer matrix its
    /// entries are exact integers.
    pub fn linear_inverse(&self) -> Mat2 {
        self.linear_inv
    }

    pub fn is_linear(&self) -> bool {
        self.perturbation.is_empty()
    }

    /// Construction-time audit: inverse round trip, nonvanishing Jacobian
    /// determinant, and strict cone invariance on a 32x32 probe grid.
    fn validate(&self) -> Result<()> {
        let grid = SamplingGrid::default();
        for p in grid.points() {
            let q = self.inverse_step(&self.forward_step(&p))?;
            if p.dist(&q) > 1e-10 {
                return Err(Error::InvalidMap(format!(
                    "forward/inverse round trip off by {:.3e} at ({}, {})",
                    p.dist(&q),
                    p.x,
                    p.y
                )));
            }
            if self.jacobian_step(&p).det().abs() < 1e-6 {
                return Err(Error::InvalidMap(format!(
                    "Jacobian determinant vanishes near ({}, {})",
                    p.x, p.y
                )));
            }
        }
        let cone = ConeField {
            theta: 1.0,
            frame: self.adapted_frame,
        };
        let report = self.check_cone_invariance(&cone, &grid);
        if report.measured_eta >= 0.95 {
            let w = report.witness.unwrap_or(TorusPoint::new(0.0, 0.0));
            return Err(Error::ConeViolated {
                eta: report.measured_eta,
                x: w.x,
                y: w.y,
            });
        }
        Ok(())
    }

    fn perturbation_at(&self, x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for t in &self.perturbation {
            let arg = TAU * (t.freq[0] as f64 * x + t.freq[1] as f64 * y) + t.phase;
            let v = t.amplitude * arg.sin();
            match t.component {
                Component::X => g[0] += v,
                Component::Y => g[1] += v,
            }
        }
        g
    }

    fn perturbation_jac(&self, x: f64, y: f64) -> Mat2 {
        let mut j = Mat2::new(0.0, 0.0, 0.0, 0.0);
        for t in &self.perturbation {
            let arg = TAU * (t.freq[0] as f64 * x + t.freq[1] as f64 * y) + t.phase;
            let d = t.amplitude * TAU * arg.cos();
            let (dx, dy) = (d * t.freq[0] as f64, d * t.freq[1] as f64);
            match t.component {
                Component::X => {
                    j.m[0][0] += dx;
                    j.m[0][1] += dy;
                }
                Component::Y => {
                    j.m[1][0] += dx;
                    j.m[1][1] += dy;
                }
            }
        }
        j
    }

    /// One forward step in the plane (no mod-1 reduction).
    pub fn forward_step_lift(&self, x: f64, y: f64) -> [f64; 2] {
        let lin = self.linear_f.mul_vec([x, y]);
        let g = self.perturbation_at(x, y);
        [lin[0] + g[0], lin[1] + g[1]]
    }

    fn forward_step(&self, p: &TorusPoint) -> TorusPoint {
        let v = self.forward_step_lift(p.x, p.y);
        TorusPoint::new(v[0], v[1])
    }

    /// One inverse step in the plane: Newton from the linear-part inverse.
    pub fn inverse_step_lift(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        let mut q = self.linear_inv.mul_vec([x, y]);
        if self.perturbation.is_empty() {
            return Ok(q);
        }
        // large lift coordinates cannot reach an absolute residual below
        // their own ulp, so the tolerance is relative to the magnitude
        let tol = NEWTON_TOL * (1.0 + x.abs().max(y.abs()));
        for _ in 0..NEWTON_MAX_ITERS {
            let f = self.forward_step_lift(q[0], q[1]);
            let r = [f[0] - x, f[1] - y];
            let res = r[0].abs().max(r[1].abs());
            if res < tol {
                return Ok(q);
            }
            let j = self.jacobian_step_at(q[0], q[1]).inverse();
            let dq = j.mul_vec(r);
            q = [q[0] - dq[0], q[1] - dq[1]];
        }
        let f = self.forward_step_lift(q[0], q[1]);
        Err(Error::NewtonDiverged {
            x,
            y,
            residual: (f[0] - x).abs().max((f[1] - y).abs()),
        })
    }

    fn inverse_step(&self, p: &TorusPoint) -> Result<TorusPoint> {
        let v = self.inverse_step_lift(p.x, p.y)?;
        Ok(TorusPoint::new(v[0], v[1]))
    }

    pub fn jacobian_step_at(&self, x: f64, y: f64) -> Mat2 {
        self.linear_f.add(&self.perturbation_jac(x, y))
    }

    fn jacobian_step(&self, p: &TorusPoint) -> Mat2 {
        self.jacobian_step_at(p.x, p.y)
    }

    /// `T^n(p)` for signed `n`.
    pub fn apply(&self, p: &TorusPoint, n: i64) -> Result<TorusPoint> {
        let mut q = *p;
        for _ in 0..n.unsigned_abs() {
            q = if n >= 0 {
                self.forward_step(&q)
            } else {
                self.inverse_step(&q)?
            };
        }
        Ok(q)
    }

    /// `D_p T^n` by the chain rule along the orbit, signed `n`.
    pub fn jacobian(&self, p: &TorusPoint, n: i64) -> Result<Mat2> {
        let mut q = *p;
        let mut j = Mat2::IDENTITY;
        for _ in 0..n.unsigned_abs() {
            if n >= 0 {
                j = self.jacobian_step(&q).mul_mat(&j);
                q = self.forward_step(&q);
            } else {
                q = self.inverse_step(&q)?;
                j = self.jacobian_step(&q).inverse().mul_mat(&j);
            }
        }
        Ok(j)
    }

    /// Jacobian of `T^n` expressed in adapted-frame coordinates.
    pub fn frame_jacobian(&self, p: &TorusPoint, n: i64) -> Result<Mat2> {
        Ok(self
            .adapted_frame
            .mul_mat(&self.jacobian(p, n)?)
            .mul_mat(&self.frame_inv))
    }

    /// Worst slope-contraction ratio of `DT^{-n}` on the cone boundary
    /// over the grid. The cone is strictly invariant iff the ratio < 1.
    pub fn check_cone_invariance_iter(
        &self,
        cone: &ConeField,
        grid: &SamplingGrid,
        n: u64,
    ) -> ConeReport {
        let b = cone.frame.inverse();
        let mut eta = 0.0f64;
        let mut witness = None;
        for p in grid.points() {
            let j = match self.jacobian(&p, -(n as i64)) {
                Ok(j) => j,
                Err(_) => {
                    return ConeReport {
                        holds: false,
                        measured_eta: f64::INFINITY,
                        witness: Some(p),
                    }
                }
            };
            let m = cone.frame.mul_mat(&j).mul_mat(&b);
            for sign in [1.0, -1.0] {
                let v = [sign * cone.theta, 1.0];
                let w = m.mul_vec(v);
                let ratio = if w[1].abs() < 1e-300 {
                    f64::INFINITY
                } else {
                    w[0].abs() / (w[1].abs() * cone.theta)
                };
                if ratio > eta {
                    eta = ratio;
                    witness = Some(p);
                }
            }
        }
        ConeReport {
            holds: eta < 1.0,
            measured_eta: eta,
            witness: if eta < 1.0 { None } else { witness },
        }
    }

    pub fn check_cone_invariance(&self, cone: &ConeField, grid: &SamplingGrid) -> ConeReport {
        self.check_cone_invariance_iter(cone, grid, 1)
    }

    /// Empirical hyperbolicity constants from counter-seeded sampling.
    ///
    /// All norms are sup norms in adapted-frame coordinates, so for a
    /// linear map the estimates reproduce the eigenvalues exactly.
    pub fn estimate_hyperbolicity(
        &self,
        horizon: usize,
        samples: usize,
        seed: u64,
    ) -> Result<HyperbolicityEstimate> {
        let cone = ConeField {
            theta: 1.0,
            frame: self.adapted_frame,
        };
        let grid = SamplingGrid::default();
        let cone_report = self.check_cone_invariance(&cone, &grid);
        if !cone_report.holds {
            let w = cone_report.witness.unwrap_or(TorusPoint::new(0.0, 0.0));
            return Err(Error::ConeViolated {
                eta: cone_report.measured_eta,
                x: w.x,
                y: w.y,
            });
        }
        let sup = |v: [f64; 2]| v[0].abs().max(v[1].abs());
        let mut lambda = f64::INFINITY;
        let mut inv_expansion_min = f64::INFINITY;
        let mut growth: Vec<Vec<f64>> = Vec::with_capacity(samples);
        let mut lambda_plus = 0.0f64;
        for s in 0..samples as u64 {
            let p = TorusPoint::new(rng::f64_at(seed, 0, s), rng::f64_at(seed, 1, s));
            // direction strictly outside the cone (|vx| > |vy|)
            let v_out = [1.0, rng::range_at(seed, 2, s, -0.99, 0.99)];
            // direction inside the cone (|vy| >= |vx|)
            let v_in = [rng::range_at(seed, 3, s, -0.99, 0.99), 1.0];
            let mut ratios = Vec::with_capacity(horizon);
            let mut q = p;
            let mut j = Mat2::IDENTITY;
            for _ in 0..horizon {
                j = self.jacobian_step(&q).mul_mat(&j);
                q = self.forward_step(&q);
                let m = self.adapted_frame.mul_mat(&j).mul_mat(&self.frame_inv);
                ratios.push(sup(m.mul_vec(v_out)) / sup(v_out));
            }
            let n = horizon as f64;
            lambda = lambda.min(ratios[horizon - 1].powf(1.0 / n));
            growth.push(ratios);
            // backward orbit for the contraction rate
            let jb = self.frame_jacobian(&p, -(horizon as i64))?;
            let exp = (sup(jb.mul_vec(v_in)) / sup(v_in)).powf(1.0 / n);
            inv_expansion_min = inv_expansion_min.min(exp);
            let m1 = self.frame_jacobian(&p, 1)?;
            let m1i = self.frame_jacobian(&p, -1)?;
            lambda_plus = lambda_plus.max(m1.sup_norm()).max(m1i.sup_norm());
        }
        let nu = 1.0 / inv_expansion_min;
        // worst prefactor: ratio_k >= c0 lambda^k for all sampled orbits
        let mut c_zero = 1.0f64;
        for ratios in &growth {
            for (k, r) in ratios.iter().enumerate() {
                c_zero = c_zero.min(r / lambda.powi(k as i32 + 1));
            }
        }
        let est = HyperbolicityEstimate {
            lambda,
            nu,
            c_zero,
            eta: cone_report.measured_eta,
            lambda_plus,
            sample_count: samples,
            horizon_n: horizon,
        };
        if est.lambda <= 1.0 || est.nu >= 1.0 || est.nu <= 0.0 {
            return Err(Error::InvalidMap(format!(
                "sampled constants not hyperbolic: lambda {}, nu {}",
                est.lambda, est.nu
            )));
        }
        Ok(est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam() -> f64 {
        (3.0 + 5.0f64.sqrt()) / 2.0
    }

    #[test]
    fn cat_map_fixed_point_and_one_step() {
        let m = AnosovMap::cat();
        let o = TorusPoint::new(0.0, 0.0);
        assert_eq!(m.apply(&o, 5).unwrap(), o);
        let p = m.apply(&TorusPoint::new(0.1, 0.2), 1).unwrap();
        assert!((p.x - 0.4).abs() < 1e-14 && (p.y - 0.3).abs() < 1e-14);
    }

    #[test]
    fn cat_map_jacobians() {
        let m = AnosovMap::cat();
        let p = TorusPoint::new(0.37, 0.91);
        let j1 = m.jacobian(&p, 1).unwrap();
        assert_eq!(j1.m, [[2.0, 1.0], [1.0, 1.0]]);
        let j2 = m.jacobian(&p, 2).unwrap();
        assert_eq!(j2.m, [[5.0, 3.0], [3.0, 2.0]]);
    }

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
    fn perturbed_round_trip() {
        let m = perturbed(0.05);
        let p = TorusPoint::new(0.123, 0.456);
        let q = m.apply(&m.apply(&p, 3).unwrap(), -3).unwrap();
        assert!(p.dist(&q) < 1e-10);
    }

    #[test]
    fn composition_law() {
        let m = perturbed(0.05);
        let p = TorusPoint::new(0.71, 0.22);
        let a = m.apply(&m.apply(&p, 2).unwrap(), -5).unwrap();
        let b = m.apply(&p, -3).unwrap();
        assert!(a.dist(&b) < 1e-10);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let m = perturbed(0.05);
        let p = TorusPoint::new(0.3, 0.8);
        let j = m.jacobian(&p, 1).unwrap();
        let h = 1e-6;
        for (col, dv) in [(0, [h, 0.0]), (1, [0.0, h])] {
            let fp = m.forward_step_lift(p.x + dv[0], p.y + dv[1]);
            let fm = m.forward_step_lift(p.x - dv[0], p.y - dv[1]);
            let fd = [(fp[0] - fm[0]) / (2.0 * h), (fp[1] - fm[1]) / (2.0 * h)];
            assert!((fd[0] - j.m[0][col]).abs() < 1e-5);
            assert!((fd[1] - j.m[1][col]).abs() < 1e-5);
        }
    }

    #[test]
    fn jacobian_chain_rule() {
        let m = perturbed(0.05);
        let p = TorusPoint::new(0.17, 0.64);
        let full = m.jacobian(&p, 5).unwrap();
        let part1 = m.jacobian(&p, 2).unwrap();
        let mid = m.apply(&p, 2).unwrap();
        let part2 = m.jacobian(&mid, 3).unwrap();
        let chained = part2.mul_mat(&part1);
        for i in 0..2 {
            for j in 0..2 {
                assert!((full.m[i][j] - chained.m[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cat_map_cone_contraction_is_lambda_minus_two() {
        let m = AnosovMap::cat();
        let cone = ConeField {
            theta: 1.0,
            frame: m.frame(),
        };
        let rep = m.check_cone_invariance(&cone, &SamplingGrid::default());
        assert!(rep.holds);
        assert!((rep.measured_eta - lam().powi(-2)).abs() < 1e-10);
    }

    #[test]
    fn cone_contraction_monotone_in_iterates() {
        let m = perturbed(0.03);
        let cone = ConeField {
            theta: 1.0,
            frame: m.frame(),
        };
        let grid = SamplingGrid { nx: 8, ny: 8 };
        let mut prev = f64::INFINITY;
        for n in 1..=4 {
            let rep = m.check_cone_invariance_iter(&cone, &grid, n);
            assert!(rep.measured_eta <= prev + 1e-12);
            prev = rep.measured_eta;
        }
    }

    #[test]
    fn strong_perturbation_is_refused_with_witness() {
        let err = AnosovMap::new(
            [[2, 1], [1, 1]],
            vec![TrigTerm {
                component: Component::Y,
                amplitude: 0.5,
                freq: [5, 5],
                phase: 0.0,
            }],
        );
        assert!(matches!(err, Err(Error::ConeViolated { .. }) | Err(Error::InvalidMap(_))));
    }

    #[test]
    fn cat_map_constants_are_exact() {
        let m = AnosovMap::cat();
        let est = m.estimate_hyperbolicity(8, 64, 7).unwrap();
        assert!((est.lambda - lam()).abs() < 1e-10);
        assert!((est.nu - 1.0 / lam()).abs() < 1e-10);
        assert!((est.c_zero - 1.0).abs() < 1e-10);
        assert!((est.lambda_plus - lam()).abs() < 1e-10);
        assert!(est.lambda * est.nu <= est.lambda_plus.powi(2) + 1e-12);
    }

    #[test]
    fn estimates_monotone_in_sample_refinement() {
        let m = perturbed(0.05);
        let a = m.estimate_hyperbolicity(6, 32, 11).unwrap();
        let b = m.estimate_hyperbolicity(6, 64, 11).unwrap();
        assert!(b.lambda <= a.lambda + 1e-14);
        assert!(b.nu >= a.nu - 1e-14);
    }

    #[test]
    fn perturbed_constants_in_expected_range() {
        let m = perturbed(0.05);
        let est = m.estimate_hyperbolicity(8, 128, 3).unwrap();
        assert!(est.lambda > 2.2 && est.lambda < 3.0);
        assert!(est.nu > 0.3 && est.nu < 0.5);
        assert!(est.eta < 1.0);
    }

    #[test]
    fn rejects_non_hyperbolic_linear_part() {
        assert!(AnosovMap::new([[1, 1], [0, 1]], vec![]).is_err());
        assert!(AnosovMap::new([[2, 1], [2, 1]], vec![]).is_err());
    }
}
