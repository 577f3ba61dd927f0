//! Smoothing operators compatible with the anisotropic norms: a
//! compactly supported mollifier acting along the leaves of a foliation,
//! and the heat multiplier acting in the unstable coordinate only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::{ChartSource, FoliationFamily, SlopeField};
use crate::numerics::mat2::Mat2;
use crate::numerics::trig::TrigField;

use super::cnorm::{leafwise_norm_family, LeafSampling, NormConfig};

/// Unit-mass C^infinity bump supported on (-1, 1).
fn bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - z * z)).exp()
    }
}

/// One RK4 step of the leaf flow dp/dy = P^{-1} (sigma(p), 1).
fn flow_step(p: [f64; 2], dt: f64, sigma: &SlopeField, frame_inv: &Mat2) -> [f64; 2] {
    let dir = |q: [f64; 2]| -> [f64; 2] {
        let s = sigma.eval(&crate::dynamics::TorusPoint::new(q[0], q[1]));
        frame_inv.mul_vec([s, 1.0])
    };
    let k1 = dir(p);
    let k2 = dir([p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]]);
    let k3 = dir([p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]]);
    let k4 = dir([p[0] + dt * k3[0], p[1] + dt * k3[1]]);
    [
        p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifyResult {
    /// The mollified density, refitted as a band-limited field.
    pub field: TrigField,
    /// Aliasing energy fraction discarded by the refit.
    pub tail: f64,
    /// Measured leafwise norm of phi - phi_eps at order q - 1; scales
    /// like eps times the order-q norm of phi.
    pub deviation_low: f64,
    /// Measured leafwise norm of phi_eps at order q + 1; scales like
    /// 1/eps times the order-q norm of phi.
    pub norm_high: f64,
}

/// Convolve `phi` with a width-`eps` bump along the leaves of `family`
/// (which must carry a slope-field generating rule):
///
/// ```text
/// phi_eps(p) = int j(z) phi(flow_p(eps z)) dz,   supp j = [-1, 1],
/// ```
///
/// where `flow_p` moves p along its leaf.  Requires 0 < eps < delta0/2
/// so the averaging stays inside one chart window.
pub fn mollify_along_leaves(
    phi: &TrigField,
    family: &FoliationFamily,
    eps: f64,
    cfg: &NormConfig,
) -> Result<MollifyResult> {
    cfg.validate()?;
    if cfg.q == 0 {
        return Err(Error::BadParameter("mollifier deviation needs q >= 1".into()));
    }
    if !(eps > 0.0 && eps < family.delta0 / 2.0) {
        return Err(Error::BadParameter(format!(
            "mollifier width {eps} outside (0, {})",
            family.delta0 / 2.0
        )));
    }
    let sigma = match &family.source {
        ChartSource::Slope(s) => s.clone(),
        ChartSource::Frozen => {
            return Err(Error::BadParameter(
                "mollifier needs a slope-field generating rule".into(),
            ))
        }
    };
    let frame_inv = family.charts[0].window.frame_inv();

    // quadrature in the bump variable: the bump is flat to all orders at
    // the endpoints, so the trapezoid rule converges spectrally
    let nq = 48usize;
    let zs: Vec<f64> = (0..=nq).map(|i| -1.0 + 2.0 * i as f64 / nq as f64).collect();
    let raw: Vec<f64> = zs.iter().map(|&z| bump(z)).collect();
    let mass: f64 = raw.iter().sum::<f64>() - 0.5 * (raw[0] + raw[nq]);
    let weights: Vec<f64> = raw.iter().map(|w| w / mass).collect();

    let m = 48usize;
    let dz = 2.0 * eps / nq as f64;
    let mut values = vec![0.0; m * m];
    for ix in 0..m {
        for iy in 0..m {
            let base = [ix as f64 / m as f64, iy as f64 / m as f64];
            // walk to the -eps end of the leaf segment, then sweep it
            let mut p = base;
            for _ in 0..4 {
                p = flow_step(p, -eps / 4.0, &sigma, &frame_inv);
            }
            let mut acc = weights[0] * phi.eval(p[0], p[1]);
            for w in &weights[1..] {
                p = flow_step(p, dz, &sigma, &frame_inv);
                acc += w * phi.eval(p[0], p[1]);
            }
            values[ix * m + iy] = acc;
        }
    }
    let band = phi.band.min((m as i64 - 2) / 2);
    let (field, tail) = TrigField::fit_grid(&values, m, band);

    let s = LeafSampling::default();
    let deviation = phi.add(&field.scale(-1.0));
    let deviation_low = leafwise_norm_family(&deviation, family, cfg.q - 1, cfg.varpi, &s)?;
    let norm_high = leafwise_norm_family(&field, family, cfg.q + 1, cfg.varpi, &s)?;
    Ok(MollifyResult {
        field,
        tail,
        deviation_low,
        norm_high,
    })
}

/// Heat smoothing in the unstable (first) coordinate: the Fourier
/// multiplier e^{-4 pi^2 k_x^2 t}.  Commutes with d/dx and regularizes
/// the density only in the direction the dynamics expands, leaving the
/// transverse profile untouched.
pub fn heat_smooth_unstable(phi: &TrigField, t: f64) -> Result<TrigField> {
    if t < 0.0 {
        return Err(Error::BadParameter("heat time must be nonnegative".into()));
    }
    Ok(phi.heat_x(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::trig::TrigField;
    use std::f64::consts::TAU;

    fn vertical_family() -> FoliationFamily {
        FoliationFamily::from_slope_field(
            SlopeField::vertical(),
            Mat2::new(1.0, 0.0, 0.0, 1.0),
            0.1,
            8,
            10,
        )
        .unwrap()
    }

    #[test]
    fn mollifying_a_pure_mode_scales_it() {
        // vertical leaves: phi_eps(x, y) = int j(z) cos(2 pi (y + eps z)) dz
        //                               = jhat(2 pi eps) cos(2 pi y)
        let family = vertical_family();
        let phi = TrigField::character(2, 0, 1, true);
        let eps = 0.03;
        let r = mollify_along_leaves(&phi, &family, eps, &NormConfig::default()).unwrap();
        assert!(r.tail < 1e-10);
        // independent quadrature for the damping factor
        let n = 4000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=n {
            let z = -1.0 + 2.0 * i as f64 / n as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            num += w * bump(z) * (TAU * eps * z).cos();
            den += w * bump(z);
        }
        let damp = num / den;
        assert!(damp < 1.0);
        assert!((r.field.coeff(0, 1).re - 0.5 * damp).abs() < 1e-6);
        assert!(r.field.coeff(0, 1).im.abs() < 1e-8);
        assert!(r.field.coeff(1, 0).norm() < 1e-8);
        // a mollifier cannot increase the leafwise norm
        assert!((r.field.eval(0.3, 0.7) - damp * (TAU * 0.7).cos()).abs() < 1e-6);
    }

    #[test]
    fn mollifier_ignores_the_transverse_direction() {
        // phi depending only on x is constant along vertical leaves
        let family = vertical_family();
        let phi = TrigField::character(2, 1, 0, true);
        let r = mollify_along_leaves(&phi, &family, 0.02, &NormConfig::default()).unwrap();
        assert!((r.field.coeff(1, 0).re - 0.5).abs() < 1e-8);
        assert!(r.deviation_low < 1e-6);
    }

    #[test]
    fn mollifier_bounds_scale_with_eps() {
        // |phi - phi_eps|_{q-1} shrinks ~ eps while eps * |phi_eps|_{q+1}
        // stays bounded: the regularization trade of the bump
        let family = FoliationFamily::from_slope_field(
            SlopeField::Trig {
                amplitude: 0.25,
                freq: [1, 0],
                phase: 0.2,
            },
            Mat2::new(1.0, 0.0, 0.0, 1.0),
            0.1,
            8,
            10,
        )
        .unwrap();
        let phi = TrigField::character(3, 1, 2, true);
        let cfg = NormConfig::default();
        let base = super::super::cnorm::leafwise_norm_family(
            &phi,
            &family,
            cfg.q,
            cfg.varpi,
            &LeafSampling::default(),
        )
        .unwrap();
        let mut products = Vec::new();
        for eps in [0.03, 0.015, 0.0075] {
            let r = mollify_along_leaves(&phi, &family, eps, &cfg).unwrap();
            assert!(
                r.deviation_low <= 8.0 * eps * base,
                "eps {eps}: deviation {} vs base {base}",
                r.deviation_low
            );
            products.push(eps * r.norm_high);
        }
        let worst = products.iter().cloned().fold(0.0f64, f64::max);
        assert!(worst <= 40.0 * base, "eps * |phi_eps|_(q+1) = {worst}");
    }

    #[test]
    fn mollifier_rejects_bad_width() {
        let family = vertical_family();
        let phi = TrigField::constant(1, 1.0);
        for eps in [0.0, 0.05, -0.01] {
            assert!(mollify_along_leaves(&phi, &family, eps, &NormConfig::default()).is_err());
        }
    }

    #[test]
    fn heat_x_eigenfunctions_and_semigroup() {
        let t = 0.01;
        let f = TrigField::character(3, 2, 1, true);
        let ft = heat_smooth_unstable(&f, t).unwrap();
        let damp = (-t * TAU * TAU * 4.0).exp();
        assert!((ft.coeff(2, 1).re - 0.5 * damp).abs() < 1e-14);
        // a function of y alone is untouched
        let g = TrigField::character(3, 0, 2, false);
        let gt = heat_smooth_unstable(&g, 0.3).unwrap();
        assert!((gt.coeff(0, 2).im - g.coeff(0, 2).im).abs() < 1e-15);
        // semigroup property
        let two_step = heat_smooth_unstable(&ft, t).unwrap();
        let one_step = heat_smooth_unstable(&f, 2.0 * t).unwrap();
        assert!((two_step.coeff(2, 1) - one_step.coeff(2, 1)).norm() < 1e-15);
        assert!(heat_smooth_unstable(&f, -1.0).is_err());
    }

    #[test]
    fn heat_pairing_vanishes_like_sqrt_t_or_better() {
        // |int h phi - int h phi_t| <= C sqrt(t) |h|: fitted exponent of
        // the t-dependence must be at least 0.4 (it is ~1 for smooth h)
        let h = TrigField::character(3, 2, -1, true).add(&TrigField::character(3, 1, 1, false));
        let phi = TrigField::character(3, 2, -1, true).scale(0.7);
        let base = h.pair(&phi);
        let mut pts = Vec::new();
        for i in 0..6 {
            let t = 1e-4 * 2.0f64.powi(i);
            let d = (base - h.pair(&heat_smooth_unstable(&phi, t).unwrap())).abs();
            pts.push((t.ln(), d.ln()));
        }
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        assert!(slope >= 0.4, "fitted exponent {slope}");
    }
}
