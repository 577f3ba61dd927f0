//! Chebyshev interpolation on Gauss-Lobatto nodes, in one and two
//! dimensions, with differentiation by coefficient recurrence.

use serde::{Deserialize, Serialize};

/// Gauss-Lobatto nodes on [-1, 1], in descending order (t_0 = 1).
pub fn lobatto_nodes(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect()
}

/// Discrete Chebyshev transform: values at Lobatto nodes -> T_k coefficients.
pub fn transform(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    let mut coeffs = vec![0.0; n + 1];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut s = 0.5 * values[0];
        for (j, v) in values.iter().enumerate().take(n).skip(1) {
            s += v * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
        }
        s += 0.5 * values[n] * if k % 2 == 0 { 1.0 } else { -1.0 };
        *c = 2.0 * s / n as f64;
    }
    coeffs[0] *= 0.5;
    coeffs[n] *= 0.5;
    coeffs
}

/// Clenshaw evaluation of sum a_k T_k(t).
pub fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &a in coeffs.iter().rev() {
        let b0 = 2.0 * t * b1 - b2 + a;
        b2 = b1;
        b1 = b0;
    }
    b1 - t * b2
}

/// d/dt coefficient recurrence for a Chebyshev series.
pub fn diff_coeffs(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 1];
    // c_{k-1} = c_{k+1} + 2 k a_k
    for k in (1..=n).rev() {
        let next = if k + 1 <= n { d[k + 1] } else { 0.0 };
        d[k - 1] = next + 2.0 * k as f64 * coeffs[k];
    }
    d[0] *= 0.5;
    d.truncate(n);
    d
}

/// 1-D Chebyshev interpolant on [center - half, center + half].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cheb1 {
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub half: f64,
}

impl Cheb1 {
    pub fn nodes(degree: usize, center: f64, half: f64) -> Vec<f64> {
        lobatto_nodes(degree)
            .into_iter()
            .map(|t| center + half * t)
            .collect()
    }

    /// Interpolate values given at `Cheb1::nodes(degree, center, half)`.
    pub fn fit(values: &[f64], center: f64, half: f64) -> Self {
        Cheb1 {
            coeffs: transform(values),
            center,
            half,
        }
    }

    pub fn fit_fn(degree: usize, center: f64, half: f64, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = Self::nodes(degree, center, half).iter().map(|&x| f(x)).collect();
        Self::fit(&values, center, half)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, (x - self.center) / self.half)
    }

    pub fn derivative(&self) -> Cheb1 {
        let mut coeffs = diff_coeffs(&self.coeffs);
        for c in coeffs.iter_mut() {
            *c /= self.half;
        }
        Cheb1 {
            coeffs,
            center: self.center,
            half: self.half,
        }
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half
    }

    /// Invert a strictly monotone interpolant by bisection + Newton.
    pub fn invert_monotone(&self, target: f64) -> f64 {
        let (mut a, mut b) = (self.lo(), self.hi());
        let (fa, fb) = (self.eval(a), self.eval(b));
        let increasing = fb > fa;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = self.eval(m);
            if (fm > target) == increasing {
                b = m;
            } else {
                a = m;
            }
            if b - a < 1e-15 * self.half.max(1.0) {
                break;
            }
        }
        // polish with Newton
        let d = self.derivative();
        let mut x = 0.5 * (a + b);
        for _ in 0..8 {
            let fx = self.eval(x) - target;
            let dx = d.eval(x);
            if dx.abs() < 1e-300 {
                break;
            }
            x -= fx / dx;
            x = x.clamp(self.lo(), self.hi());
        }
        x
    }
}

/// Rectangular window for 2-D interpolants, centered at (cx, cy).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Window2 {
    pub cx: f64,
    pub cy: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Window2 {
    pub fn square(hw: f64) -> Self {
        Window2 {
            cx: 0.0,
            cy: 0.0,
            hx: hw,
            hy: hw,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol = 1e-12;
        (x - self.cx).abs() <= self.hx * (1.0 + tol) + tol
            && (y - self.cy).abs() <= self.hy * (1.0 + tol) + tol
    }
}

/// Tensor-product Chebyshev interpolant on a rectangular window.
///
/// Coefficients are stored row-major: `coeffs[i * (ny + 1) + j]` multiplies
/// `T_i(tx) T_j(ty)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cheb2 {
    pub coeffs: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub window: Window2,
}

impl Cheb2 {
    pub fn x_nodes(&self) -> Vec<f64> {
        Cheb1::nodes(self.nx, self.window.cx, self.window.hx)
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        Cheb1::nodes(self.ny, self.window.cy, self.window.hy)
    }

    /// Interpolate `f` on the tensor Lobatto grid.
    pub fn fit_fn(nx: usize, ny: usize, window: Window2, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = Cheb1::nodes(nx, window.cx, window.hx);
        let ys = Cheb1::nodes(ny, window.cy, window.hy);
        let mut values = vec![0.0; (nx + 1) * (ny + 1)];
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                values[i * (ny + 1) + j] = f(x, y);
            }
        }
        Self::fit_values(&values, nx, ny, window)
    }

    /// Interpolate node values laid out as `values[i * (ny + 1) + j]`.
    pub fn fit_values(values: &[f64], nx: usize, ny: usize, window: Window2) -> Self {
        // transform along y, then along x
        let mut half = vec![0.0; (nx + 1) * (ny + 1)];
        for i in 0..=nx {
            let row = &values[i * (ny + 1)..(i + 1) * (ny + 1)];
            let c = transform(row);
            half[i * (ny + 1)..(i + 1) * (ny + 1)].copy_from_slice(&c);
        }
        let mut coeffs = vec![0.0; (nx + 1) * (ny + 1)];
        let mut col = vec![0.0; nx + 1];
        for j in 0..=ny {
            for (i, c) in col.iter_mut().enumerate() {
                *c = half[i * (ny + 1) + j];
            }
            let t = transform(&col);
            for (i, &c) in t.iter().enumerate() {
                coeffs[i * (ny + 1) + j] = c;
            }
        }
        Cheb2 {
            coeffs,
            nx,
            ny,
            window,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let tx = (x - self.window.cx) / self.window.hx;
        let ty = (y - self.window.cy) / self.window.hy;
        let mut row_vals = vec![0.0; self.nx + 1];
        for (i, rv) in row_vals.iter_mut().enumerate() {
            *rv = clenshaw(&self.coeffs[i * (self.ny + 1)..(i + 1) * (self.ny + 1)], ty);
        }
        clenshaw(&row_vals, tx)
    }

    /// Partial derivative of given orders, as a new interpolant.
    pub fn derivative(&self, dx_order: usize, dy_order: usize) -> Cheb2 {
        let mut out = self.clone();
        for _ in 0..dx_order {
            out = out.diff_x();
        }
        for _ in 0..dy_order {
            out = out.diff_y();
        }
        out
    }

    fn diff_x(&self) -> Cheb2 {
        let nyp = self.ny + 1;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        let mut col = vec![0.0; self.nx + 1];
        for j in 0..nyp {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.coeffs[i * nyp + j];
            }
            let d = diff_coeffs(&col);
            for (i, &c) in d.iter().enumerate() {
                coeffs[i * nyp + j] = c / self.window.hx;
            }
        }
        Cheb2 {
            coeffs,
            nx: self.nx,
            ny: self.ny,
            window: self.window,
        }
    }

    fn diff_y(&self) -> Cheb2 {
        let nyp = self.ny + 1;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for i in 0..=self.nx {
            let row = &self.coeffs[i * nyp..(i + 1) * nyp];
            let d = diff_coeffs(row);
            for (j, &c) in d.iter().enumerate() {
                coeffs[i * nyp + j] = c / self.window.hy;
            }
        }
        Cheb2 {
            coeffs,
            nx: self.nx,
            ny: self.ny,
            window: self.window,
        }
    }

    /// Max |value| over the tensor node grid.
    pub fn sup_on_nodes(&self) -> f64 {
        let xs = self.x_nodes();
        let ys = self.y_nodes();
        let mut sup: f64 = 0.0;
        for &x in &xs {
            for &y in &ys {
                sup = sup.max(self.eval(x, y).abs());
            }
        }
        sup
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_polynomials_exactly() {
        let f = |x: f64| 3.0 - 2.0 * x + 0.5 * x.powi(3);
        let c = Cheb1::fit_fn(8, 0.3, 0.2, f);
        for k in 0..20 {
            let x = 0.1 + 0.4 * k as f64 / 19.0;
            assert!((c.eval(x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_analytic() {
        let c = Cheb1::fit_fn(16, 0.0, 0.5, |x| (3.0 * x).sin());
        let d = c.derivative();
        for k in 0..10 {
            let x = -0.45 + 0.9 * k as f64 / 9.0;
            assert!((d.eval(x) - 3.0 * (3.0 * x).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn tensor_fit_and_mixed_derivative() {
        let w = Window2::square(0.05);
        let f = |x: f64, y: f64| x + 0.1 * x * y;
        let c = Cheb2::fit_fn(8, 8, w, f);
        assert!((c.eval(0.02, 0.03) - f(0.02, 0.03)).abs() < 1e-14);
        let dxy = c.derivative(1, 1);
        assert!((dxy.eval(0.02, 0.03) - 0.1).abs() < 1e-10);
    }

    #[test]
    fn analytic_fit_spectrally_accurate_off_nodes() {
        let w = Window2::square(0.05);
        let f = |x: f64, y: f64| (2.0 * x + y).exp() * (5.0 * y).cos();
        let c = Cheb2::fit_fn(16, 16, w, f);
        for k in 0..7 {
            let x = -0.04 + 0.08 * k as f64 / 6.0;
            let y = 0.013 - 0.002 * k as f64;
            assert!((c.eval(x, y) - f(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_inversion() {
        let c = Cheb1::fit_fn(12, 0.0, 1.0, |x| x + 0.2 * x.powi(3));
        let x = c.invert_monotone(0.7);
        assert!((x + 0.2 * x.powi(3) - 0.7).abs() < 1e-12);
    }
}
