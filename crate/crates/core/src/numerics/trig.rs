//! Real trigonometric polynomials on the 2-torus, stored as complex
//! Fourier coefficients on the square band |k_x|, |k_y| <= K.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrigField {
    /// Band limit: modes k with max(|k_x|, |k_y|) <= band.
    pub band: i64,
    /// Row-major, index `(kx + band) * (2 band + 1) + (ky + band)`.
    pub coeffs: Vec<Complex64>,
}

impl TrigField {
    pub fn zero(band: i64) -> Self {
        let side = (2 * band + 1) as usize;
        TrigField {
            band,
            coeffs: vec![Complex64::new(0.0, 0.0); side * side],
        }
    }

    pub fn side(&self) -> usize {
        (2 * self.band + 1) as usize
    }

    fn idx(&self, kx: i64, ky: i64) -> usize {
        ((kx + self.band) * (2 * self.band + 1) + (ky + self.band)) as usize
    }

    pub fn coeff(&self, kx: i64, ky: i64) -> Complex64 {
        if kx.abs() > self.band || ky.abs() > self.band {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[self.idx(kx, ky)]
        }
    }

    pub fn set_coeff(&mut self, kx: i64, ky: i64, v: Complex64) {
        let i = self.idx(kx, ky);
        self.coeffs[i] = v;
    }

    pub fn constant(band: i64, v: f64) -> Self {
        let mut f = Self::zero(band);
        f.set_coeff(0, 0, Complex64::new(v, 0.0));
        f
    }

    /// The real field cos/sin(2 pi k.p), normalized so sup = 1.
    pub fn character(band: i64, kx: i64, ky: i64, cosine: bool) -> Self {
        let mut f = Self::zero(band);
        if cosine {
            f.set_coeff(kx, ky, Complex64::new(0.5, 0.0));
            f.set_coeff(-kx, -ky, Complex64::new(0.5, 0.0));
        } else {
            f.set_coeff(kx, ky, Complex64::new(0.0, -0.5));
            f.set_coeff(-kx, -ky, Complex64::new(0.0, 0.5));
        }
        f
    }

    /// Fit from samples on the uniform m x m grid, `values[ix * m + iy]` at
    /// `(ix / m, iy / m)`. Modes outside the band are discarded; the
    /// returned flag reports the discarded (aliasing) energy fraction.
    pub fn fit_grid(values: &[f64], m: usize, band: i64) -> (Self, f64) {
        assert_eq!(values.len(), m * m);
        assert!(m as i64 >= 2 * band + 1, "grid too coarse for band");
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let mut data: Vec<Complex64> = values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        // rows (y-direction), then columns (x-direction)
        for row in data.chunks_exact_mut(m) {
            fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = data[i * m + j];
            }
            fft.process(&mut col);
            for i in 0..m {
                data[i * m + j] = col[i];
            }
        }
        let norm = 1.0 / (m * m) as f64;
        let mut f = Self::zero(band);
        let mut kept = 0.0;
        let mut total = 0.0;
        for fx in 0..m {
            let kx = if fx <= m / 2 { fx as i64 } else { fx as i64 - m as i64 };
            for fy in 0..m {
                let ky = if fy <= m / 2 { fy as i64 } else { fy as i64 - m as i64 };
                let c = data[fx * m + fy] * norm;
                let e = c.norm_sqr();
                total += e;
                if kx.abs() <= band && ky.abs() <= band {
                    f.set_coeff(kx, ky, c);
                    kept += e;
                }
            }
        }
        let tail_fraction = if total > 0.0 { (total - kept) / total } else { 0.0 };
        (f, tail_fraction)
    }

    pub fn fit_fn(m: usize, band: i64, f: impl Fn(f64, f64) -> f64) -> (Self, f64) {
        let mut values = vec![0.0; m * m];
        for ix in 0..m {
            for iy in 0..m {
                values[ix * m + iy] = f(ix as f64 / m as f64, iy as f64 / m as f64);
            }
        }
        Self::fit_grid(&values, m, band)
    }

    /// Synthesize values on the uniform m x m grid via inverse FFT.
    pub fn values_on_grid(&self, m: usize) -> Vec<f64> {
        assert!(m as i64 >= 2 * self.band + 1);
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(m);
        let mut data = vec![Complex64::new(0.0, 0.0); m * m];
        for kx in -self.band..=self.band {
            let fx = kx.rem_euclid(m as i64) as usize;
            for ky in -self.band..=self.band {
                let fy = ky.rem_euclid(m as i64) as usize;
                data[fx * m + fy] = self.coeff(kx, ky);
            }
        }
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = data[i * m + j];
            }
            ifft.process(&mut col);
            for i in 0..m {
                data[i * m + j] = col[i];
            }
        }
        for row in data.chunks_exact_mut(m) {
            ifft.process(row);
        }
        data.into_iter().map(|c| c.re).collect()
    }

    /// Direct evaluation at an arbitrary point (real part of the sum).
    /// Cost is O(band^2); use `values_on_grid` for bulk grid evaluation.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let side = self.side();
        // precompute e^{2 pi i k y} for ky in [-band, band]
        let wy = Complex64::from_polar(1.0, TAU * y);
        let mut ys = vec![Complex64::new(0.0, 0.0); side];
        let mut cur = Complex64::from_polar(1.0, -TAU * y * self.band as f64);
        for v in ys.iter_mut() {
            *v = cur;
            cur *= wy;
        }
        let wx = Complex64::from_polar(1.0, TAU * x);
        let mut ex = Complex64::from_polar(1.0, -TAU * x * self.band as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for row in self.coeffs.chunks_exact(side) {
            let mut rs = Complex64::new(0.0, 0.0);
            for (c, e) in row.iter().zip(ys.iter()) {
                rs += c * e;
            }
            acc += rs * ex;
            ex *= wx;
        }
        acc.re
    }

    /// Apply a Fourier multiplier m(k).
    pub fn multiplier(&self, m: impl Fn(i64, i64) -> Complex64) -> Self {
        let mut out = self.clone();
        for kx in -self.band..=self.band {
            for ky in -self.band..=self.band {
                let i = self.idx(kx, ky);
                out.coeffs[i] = self.coeffs[i] * m(kx, ky);
            }
        }
        out
    }

    pub fn dx(&self) -> Self {
        self.multiplier(|kx, _| Complex64::new(0.0, TAU * kx as f64))
    }

    pub fn dy(&self) -> Self {
        self.multiplier(|_, ky| Complex64::new(0.0, TAU * ky as f64))
    }

    /// Gaussian heat multiplier e^{-t (2 pi |k|)^2}.
    pub fn heat(&self, t: f64) -> Self {
        self.multiplier(|kx, ky| {
            let k2 = (kx * kx + ky * ky) as f64;
            Complex64::new((-t * TAU * TAU * k2).exp(), 0.0)
        })
    }

    /// Heat multiplier acting in the x direction only: e^{-t (2 pi k_x)^2}.
    pub fn heat_x(&self, t: f64) -> Self {
        self.multiplier(|kx, _| {
            let k2 = (kx * kx) as f64;
            Complex64::new((-t * TAU * TAU * k2).exp(), 0.0)
        })
    }

    /// Integral over the torus (mean value).
    pub fn integral(&self) -> f64 {
        self.coeff(0, 0).re
    }

    /// Exact pairing \int h g  = sum_k h_k g_{-k} for band-limited fields.
    pub fn pair(&self, other: &TrigField) -> f64 {
        let band = self.band.min(other.band);
        let mut acc = Complex64::new(0.0, 0.0);
        for kx in -band..=band {
            for ky in -band..=band {
                acc += self.coeff(kx, ky) * other.coeff(-kx, -ky);
            }
        }
        acc.re
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= s;
        }
        out
    }

    pub fn add(&self, other: &TrigField) -> Self {
        let band = self.band.max(other.band);
        let mut out = Self::zero(band);
        for kx in -band..=band {
            for ky in -band..=band {
                out.set_coeff(kx, ky, self.coeff(kx, ky) + other.coeff(kx, ky));
            }
        }
        out
    }

    /// Pointwise product, exact (band limits add).
    pub fn mul(&self, other: &TrigField) -> Self {
        let band = self.band + other.band;
        let mut out = Self::zero(band);
        for akx in -self.band..=self.band {
            for aky in -self.band..=self.band {
                let a = self.coeff(akx, aky);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for bkx in -other.band..=other.band {
                    for bky in -other.band..=other.band {
                        let b = other.coeff(bkx, bky);
                        if b.norm_sqr() == 0.0 {
                            continue;
                        }
                        let i = out.idx(akx + bkx, aky + bky);
                        out.coeffs[i] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Truncate (or zero-pad) to a new band limit.
    pub fn truncated(&self, band: i64) -> Self {
        let mut out = Self::zero(band);
        let b = band.min(self.band);
        for kx in -b..=b {
            for ky in -b..=b {
                out.set_coeff(kx, ky, self.coeff(kx, ky));
            }
        }
        out
    }

    /// Sup-norm estimate from a dense synthesis grid.
    pub fn sup_estimate(&self, m: usize) -> f64 {
        self.values_on_grid(m)
            .into_iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// l1 coefficient norm: a rigorous upper bound for the sup-norm.
    pub fn coeff_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_characters() {
        let (f, tail) = TrigField::fit_fn(32, 4, |x, y| {
            1.5 + (TAU * (2.0 * x - y)).cos() - 0.25 * (TAU * 3.0 * y).sin()
        });
        assert!(tail < 1e-14);
        assert!((f.coeff(0, 0).re - 1.5).abs() < 1e-12);
        assert!((f.coeff(2, -1).re - 0.5).abs() < 1e-12);
        assert!((f.coeff(0, 3).im - 0.125).abs() < 1e-12);
        // pointwise agreement off the grid
        let (x, y) = (0.137, 0.615);
        let exact = 1.5 + (TAU * (2.0 * x - y)).cos() - 0.25 * (TAU * 3.0 * y).sin();
        assert!((f.eval(x, y) - exact).abs() < 1e-12);
    }

    #[test]
    fn grid_synthesis_matches_direct_eval() {
        let (f, _) = TrigField::fit_fn(16, 3, |x, y| (TAU * x).cos() * (TAU * 2.0 * y).sin() + 0.3);
        let m = 8;
        let vals = f.values_on_grid(m);
        for ix in 0..m {
            for iy in 0..m {
                let d = f.eval(ix as f64 / m as f64, iy as f64 / m as f64);
                assert!((vals[ix * m + iy] - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_and_integral() {
        let f = TrigField::character(4, 1, 2, true); // cos(2pi(x+2y))
        let dx = f.dx();
        let (x, y) = (0.21, 0.43);
        assert!((dx.eval(x, y) + TAU * (TAU * (x + 2.0 * y)).sin()).abs() < 1e-12);
        assert!(f.integral().abs() < 1e-15);
        assert!((TrigField::constant(2, 2.5).integral() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn pairing_is_exact_integral() {
        let f = TrigField::character(3, 1, 0, true);
        let g = TrigField::character(3, 1, 0, true);
        // int cos^2(2 pi x) = 1/2
        assert!((f.pair(&g) - 0.5).abs() < 1e-15);
        let h = TrigField::character(3, 2, 1, false);
        assert!(f.pair(&h).abs() < 1e-15);
    }

    #[test]
    fn product_matches_pointwise() {
        let (f, _) = TrigField::fit_fn(16, 2, |x, _| 1.0 + 0.5 * (TAU * x).cos());
        let (g, _) = TrigField::fit_fn(16, 2, |_, y| (TAU * 2.0 * y).sin());
        let p = f.mul(&g);
        let (x, y) = (0.77, 0.31);
        assert!((p.eval(x, y) - f.eval(x, y) * g.eval(x, y)).abs() < 1e-12);
    }

    #[test]
    fn aliasing_is_reported() {
        // band-8 content fitted with band 2 must show tail energy
        let (_, tail) = TrigField::fit_fn(32, 2, |x, _| (TAU * 8.0 * x).cos());
        assert!(tail > 0.9);
    }
}
