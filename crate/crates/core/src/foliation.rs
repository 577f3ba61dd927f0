//! Local-graph representation of adapted foliations.
//!
//! A chart centered at xi stores F(x, y) on a square window in
//! adapted-frame coordinates, with leaves x |-> (F(x, y), y) labelled by
//! their intersection x with the transversal {y = 0}. Globally consistent
//! foliations are generated from a slope field on the torus, so charts at
//! different centers describe the same family of curves.

use crate::dynamics::{AnosovMap, TorusPoint};
use crate::error::{Error, Result};
use crate::numerics::chebyshev::{Cheb1, Cheb2, Window2};
use crate::numerics::mat2::Mat2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const DEFAULT_DELTA0: f64 = 0.1;
pub const DEFAULT_DEGREE: usize = 12;

/// Leaf slope dx/dy in adapted-frame coordinates, as a field on the torus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SlopeField {
    Constant(f64),
    /// amplitude * sin(2 pi freq.p + phase)
    Trig {
        amplitude: f64,
        freq: [i64; 2],
        phase: f64,
    },
    Sum(Vec<SlopeField>),
    /// Slope field of the T^{-n} image of the base foliation: tangents are
    /// carried by DT^{-n} from the forward image point.
    Pullback {
        map: Box<AnosovMap>,
        base: Box<SlopeField>,
        n: i64,
    },
}

impl SlopeField {
    pub fn vertical() -> Self {
        SlopeField::Constant(0.0)
    }

    pub fn eval(&self, p: &TorusPoint) -> f64 {
        match self {
            SlopeField::Constant(c) => *c,
            SlopeField::Trig {
                amplitude,
                freq,
                phase,
            } => amplitude * (TAU * (freq[0] as f64 * p.x + freq[1] as f64 * p.y) + phase).sin(),
            SlopeField::Sum(terms) => terms.iter().map(|t| t.eval(p)).sum(),
            SlopeField::Pullback { map, base, n } => {
                let q = map.apply(p, *n).expect("forward orbit is total");
                let j = map
                    .jacobian(p, *n)
                    .expect("forward Jacobian is total")
                    .inverse();
                let w = map
                    .frame()
                    .mul_mat(&j.mul_mat(&map.frame_inv()))
                    .mul_vec([base.eval(&q), 1.0]);
                w[0] / w[1]
            }
        }
    }

    /// Upper bound on |slope|; exact for closed-form fields, a sampled
    /// estimate (32x32 grid) for pullback fields.
    pub fn sup_bound(&self) -> f64 {
        match self {
            SlopeField::Constant(c) => c.abs(),
            SlopeField::Trig { amplitude, .. } => amplitude.abs(),
            SlopeField::Sum(terms) => terms.iter().map(|t| t.sup_bound()).sum(),
            SlopeField::Pullback { .. } => {
                let mut sup = 0.0f64;
                for i in 0..32 {
                    for j in 0..32 {
                        let p = TorusPoint::new(i as f64 / 32.0, j as f64 / 32.0);
                        sup = sup.max(self.eval(&p).abs());
                    }
                }
                sup
            }
        }
    }
}

/// Square window [-delta0/2, delta0/2]^2 in frame coordinates around a
/// torus point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartWindow {
    pub center: TorusPoint,
    pub delta0_half: f64,
    pub frame: Mat2,
}

impl ChartWindow {
    pub fn new(center: TorusPoint, delta0_half: f64, frame: Mat2) -> Result<Self> {
        if !(delta0_half > 0.0) || 2.0 * delta0_half > 1.0 / 8.0 + 1e-12 {
            return Err(Error::BadParameter(format!(
                "window size {} out of range (0, 1/8]",
                2.0 * delta0_half
            )));
        }
        Ok(ChartWindow {
            center,
            delta0_half,
            frame,
        })
    }

    pub fn frame_inv(&self) -> Mat2 {
        self.frame.inverse()
    }

    /// Frame coordinates -> torus point.
    pub fn to_torus(&self, x: f64, y: f64) -> TorusPoint {
        let v = self.frame_inv().mul_vec([x, y]);
        TorusPoint::new(self.center.x + v[0], self.center.y + v[1])
    }

    pub fn square(&self) -> Window2 {
        Window2::square(self.delta0_half)
    }
}

/// One local graph chart of a foliation, as a tensor Chebyshev fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoliationChart {
    pub window: ChartWindow,
    pub f: Cheb2,
}

impl FoliationChart {
    /// Fit a chart from a closure in frame coordinates and validate the
    /// normalization F(x,0) = x, adaptedness |d_y F| <= 1 and the graph
    /// property d_x F > 0 on the nodes.
    pub fn fit(
        window: ChartWindow,
        nx: usize,
        ny: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut rect = window.square();
        rect.hx = window.delta0_half;
        rect.hy = window.delta0_half;
        let cheb = Cheb2::fit_fn(nx, ny, rect, f);
        let chart = FoliationChart { window, f: cheb };
        chart.validate()?;
        Ok(chart)
    }

    pub fn from_values(window: ChartWindow, f: Cheb2) -> Result<Self> {
        let chart = FoliationChart { window, f };
        chart.validate()?;
        Ok(chart)
    }

    /// Integrate leaves of a slope field through every x-node (classical
    /// 4th-order steps of size delta0/200) and fit the resulting graph.
    pub fn from_slope_field(
        window: ChartWindow,
        nx: usize,
        ny: usize,
        sigma: &SlopeField,
    ) -> Result<Self> {
        let h = window.delta0_half;
        let xs = Cheb1::nodes(nx, 0.0, h);
        let ys = Cheb1::nodes(ny, 0.0, h);
        let step = 2.0 * h / 200.0;
        let rhs = |x: f64, y: f64| sigma.eval(&window.to_torus(x, y));
        let mut values = vec![0.0; (nx + 1) * (ny + 1)];
        for (i, &x0) in xs.iter().enumerate() {
            // integrate upward to positive node heights, downward to
            // negative ones; node heights are hit exactly by substepping
            let mut targets: Vec<(usize, f64)> = ys.iter().cloned().enumerate().collect();
            targets.sort_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap());
            for dir in [1.0f64, -1.0] {
                let mut x = x0;
                let mut y = 0.0;
                for &(j, ty) in targets.iter().filter(|&&(_, t)| t * dir > 0.0 || t == 0.0) {
                    if ty == 0.0 {
                        values[i * (ny + 1) + j] = x0;
                        continue;
                    }
                    let span = ty - y;
                    let nsub = (span.abs() / step).ceil().max(1.0) as usize;
                    let dy = span / nsub as f64;
                    for _ in 0..nsub {
                        let k1 = rhs(x, y);
                        let k2 = rhs(x + 0.5 * dy * k1, y + 0.5 * dy);
                        let k3 = rhs(x + 0.5 * dy * k2, y + 0.5 * dy);
                        let k4 = rhs(x + dy * k3, y + dy);
                        x += dy / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                        y += dy;
                    }
                    values[i * (ny + 1) + j] = x;
                }
            }
        }
        let cheb = Cheb2::fit_values(&values, nx, ny, Window2::square(h));
        Self::from_values(window, cheb)
    }

    fn validate(&self) -> Result<()> {
        let xs = self.f.x_nodes();
        let ys = self.f.y_nodes();
        let dx = self.f.derivative(1, 0);
        let dy = self.f.derivative(0, 1);
        for &x in &xs {
            if (self.f.eval(x, 0.0) - x).abs() > 1e-10 {
                return Err(Error::ChartInvariant(format!(
                    "normalization F(x,0)=x violated at x={x}"
                )));
            }
            for &y in &ys {
                let d = dx.eval(x, y);
                if d <= 0.0 {
                    return Err(Error::SingularFoliation { value: d, x, y });
                }
                if dy.eval(x, y).abs() > 1.0 + 1e-9 {
                    return Err(Error::ChartInvariant(format!(
                        "|d_y F| = {} > 1 at ({x}, {y})",
                        dy.eval(x, y).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Value of d_x^a d_y^b F at a point of the window.
    pub fn eval_f(&self, x: f64, y: f64, orders: (usize, usize)) -> Result<f64> {
        if !self.f.window.contains(x, y) {
            return Err(Error::OutOfWindow {
                x,
                y,
                half_width: self.window.delta0_half,
            });
        }
        Ok(self.f.derivative(orders.0, orders.1).eval(x, y))
    }

    /// Torus point on the leaf labelled x0, at height y.
    pub fn leaf_point(&self, x0: f64, y: f64) -> TorusPoint {
        self.window.to_torus(self.f.eval(x0, y), y)
    }

    /// Holonomy generator H = (d_x d_y F) / (d_x F) on the window.
    pub fn compute_hf(&self) -> Result<Cheb2> {
        let dx = self.f.derivative(1, 0);
        let dxy = self.f.derivative(1, 1);
        let xs = self.f.x_nodes();
        let ys = self.f.y_nodes();
        for &x in &xs {
            for &y in &ys {
                let d = dx.eval(x, y);
                if d <= 1e-12 {
                    return Err(Error::SingularFoliation { value: d, x, y });
                }
            }
        }
        Ok(Cheb2::fit_fn(self.f.nx, self.f.ny, self.f.window, |x, y| {
            dxy.eval(x, y) / dx.eval(x, y)
        }))
    }

    /// Holonomy Jacobian by integrating d_y J = J * H(x, y) from J(x,0)=1
    /// along each x-node line.
    pub fn compute_jf(&self, hf: &Cheb2) -> Result<HolonomyJacobian> {
        let h = self.window.delta0_half;
        let step = 2.0 * h / 200.0;
        let xs = self.f.x_nodes();
        let ys = self.f.y_nodes();
        let mut values = vec![0.0; xs.len() * ys.len()];
        for (i, &x) in xs.iter().enumerate() {
            let mut targets: Vec<(usize, f64)> = ys.iter().cloned().enumerate().collect();
            targets.sort_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap());
            for dir in [1.0f64, -1.0] {
                let mut j = 1.0f64;
                let mut y = 0.0f64;
                for &(k, ty) in targets.iter().filter(|&&(_, t)| t * dir > 0.0 || t == 0.0) {
                    if ty == 0.0 {
                        values[i * ys.len() + k] = 1.0;
                        continue;
                    }
                    let span = ty - y;
                    let nsub = (span.abs() / step).ceil().max(1.0) as usize;
                    let dy = span / nsub as f64;
                    for _ in 0..nsub {
                        let k1 = j * hf.eval(x, y);
                        let k2 = (j + 0.5 * dy * k1) * hf.eval(x, y + 0.5 * dy);
                        let k3 = (j + 0.5 * dy * k2) * hf.eval(x, y + 0.5 * dy);
                        let k4 = (j + dy * k3) * hf.eval(x, y + dy);
                        j += dy / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                        y += dy;
                        if j.abs() > 1e6 {
                            return Err(Error::IntegratorBlowUp { x, bound: 1e6 });
                        }
                    }
                    values[i * ys.len() + k] = j;
                }
            }
        }
        for &v in &values {
            if v <= 0.0 {
                return Err(Error::IntegratorBlowUp { x: f64::NAN, bound: 1e6 });
            }
        }
        let field = Cheb2::fit_values(&values, self.f.nx, self.f.ny, self.f.window);
        Ok(HolonomyJacobian {
            values,
            step,
            order: 4,
            field,
        })
    }

    /// Map x-coordinates on the transversal {y = from_y} along leaves to
    /// {y = to_y}; returns (image, Jacobian of the displacement).
    pub fn holonomy_map(&self, from_y: f64, to_y: f64, xs: &[f64]) -> Result<Vec<(f64, f64)>> {
        let h = self.window.delta0_half;
        if from_y.abs() > h + 1e-12 || to_y.abs() > h + 1e-12 {
            return Err(Error::OutOfWindow {
                x: 0.0,
                y: from_y.abs().max(to_y.abs()),
                half_width: h,
            });
        }
        let hf = self.compute_hf()?;
        let jf = self.compute_jf(&hf)?;
        let dx = self.f.derivative(1, 0);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            // leaf label x0 with F(x0, from_y) = x
            let slice = Cheb1::fit_fn(self.f.nx.max(8), 0.0, h, |t| self.f.eval(t, from_y));
            let x0 = slice.invert_monotone(x);
            let image = self.f.eval(x0, to_y);
            if image.abs() > h + 1e-9 {
                return Err(Error::OutOfWindow {
                    x: image,
                    y: to_y,
                    half_width: h,
                });
            }
            // d(image)/dx = d_x F(x0,to_y) / d_x F(x0,from_y) = J ratio
            let jac = jf.field.eval(x0, to_y) / jf.field.eval(x0, from_y);
            debug_assert!(
                (jac - dx.eval(x0, to_y) / dx.eval(x0, from_y)).abs() < 1e-6 * jac.abs().max(1.0)
            );
            out.push((image, jac));
        }
        Ok(out)
    }
}

/// J^F on the chart nodes, with integrator metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolonomyJacobian {
    /// Row-major over (x-node, y-node), same layout as the chart fit.
    pub values: Vec<f64>,
    pub step: f64,
    pub order: usize,
    pub field: Cheb2,
}

/// Sup-norm audit of the derivative growth allowed for a regularity
/// parameter L: |d_y^k F| <= L^{(k-1)^2} (2 <= k <= r) and
/// |d_y^k H| <= L^{(k+1)^2} (0 <= k <= r-2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityBudget {
    pub l: f64,
    pub r: usize,
    /// deriv_sup[k] = sup |d_y^k F| for 2 <= k <= r (lower slots unused).
    pub deriv_sup: Vec<f64>,
    /// hf_sup[k] = sup |d_y^k H^F| for 0 <= k <= r-2.
    pub hf_sup: Vec<f64>,
    pub passes: bool,
}

/// How new charts of a family are produced at arbitrary centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChartSource {
    Slope(SlopeField),
    /// Charts are stored explicitly with no generating rule.
    Frozen,
}

/// A grid of charts covering the torus, all describing one foliation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoliationFamily {
    pub charts: Vec<FoliationChart>,
    pub generation: u64,
    pub delta0: f64,
    pub source: ChartSource,
}

impl FoliationFamily {
    /// Build charts at an n x n grid of centers (spacing delta0/4 when
    /// n = 4/delta0 per unit, so neighboring windows overlap by half).
    pub fn from_slope_field(
        sigma: SlopeField,
        frame: Mat2,
        delta0: f64,
        degree: usize,
        grid_n: usize,
    ) -> Result<Self> {
        if sigma.sup_bound() > 1.0 {
            return Err(Error::BadParameter(format!(
                "slope bound {} exceeds cone opening 1",
                sigma.sup_bound()
            )));
        }
        let mut charts = Vec::with_capacity(grid_n * grid_n);
        for i in 0..grid_n {
            for j in 0..grid_n {
                let center = TorusPoint::new(i as f64 / grid_n as f64, j as f64 / grid_n as f64);
                let window = ChartWindow::new(center, delta0 / 2.0, frame)?;
                charts.push(FoliationChart::from_slope_field(
                    window, degree, degree, &sigma,
                )?);
            }
        }
        Ok(FoliationFamily {
            charts,
            generation: 0,
            delta0,
            source: ChartSource::Slope(sigma),
        })
    }

    /// Default chart-center spacing delta0/4.
    pub fn default_grid_n(delta0: f64) -> usize {
        (4.0 / delta0).round() as usize
    }

    /// A chart at an arbitrary center, from the generating rule.
    pub fn chart_at(&self, center: TorusPoint, degree: usize) -> Result<FoliationChart> {
        match &self.source {
            ChartSource::Slope(sigma) => {
                let frame = self.charts[0].window.frame;
                let window = ChartWindow::new(center, self.delta0 / 2.0, frame)?;
                FoliationChart::from_slope_field(window, degree, degree, sigma)
            }
            ChartSource::Frozen => Err(Error::BadParameter(
                "family has no generating rule for new centers".into(),
            )),
        }
    }

    /// Worst re-centering mismatch
    /// max |F_{zeta}(u, y) - (F_{xi}(x + u, y) - x)| over sampled charts,
    /// x-offsets and window points, where zeta is the center shifted by x
    /// along the transversal.
    pub fn recentering_error(&self, chart_samples: usize, degree: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let n = self.charts.len();
        let stride = (n / chart_samples.max(1)).max(1);
        for chart in self.charts.iter().step_by(stride) {
            let h = chart.window.delta0_half;
            for &x in &[-0.5 * h, 0.3 * h] {
                let zeta = chart.window.to_torus(x, 0.0);
                let shifted = self.chart_at(zeta, degree)?;
                for &u in &[-0.4 * h, 0.0, 0.45 * h] {
                    for &y in &[-0.9 * h, 0.5 * h, 0.9 * h] {
                        if (x + u).abs() > h {
                            continue;
                        }
                        let lhs = shifted.f.eval(u, y);
                        let rhs = chart.f.eval(x + u, y) - x;
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Sup-norm audit over all charts and nodes.
    pub fn check_membership(&self, l: f64, r: usize) -> Result<RegularityBudget> {
        if r < 2 {
            return Err(Error::BadParameter("regularity order r must be >= 2".into()));
        }
        let mut deriv_sup = vec![0.0f64; r + 1];
        let mut hf_sup = vec![0.0f64; r - 1];
        for chart in &self.charts {
            for k in 2..=r {
                deriv_sup[k] = deriv_sup[k].max(chart.f.derivative(0, k).sup_on_nodes());
            }
            let hf = chart.compute_hf()?;
            for (k, s) in hf_sup.iter_mut().enumerate() {
                *s = s.max(hf.derivative(0, k).sup_on_nodes());
            }
        }
        let mut passes = true;
        for (k, &s) in deriv_sup.iter().enumerate().skip(2) {
            if s > l.powi(((k - 1) * (k - 1)) as i32) {
                passes = false;
            }
        }
        for (k, &s) in hf_sup.iter().enumerate() {
            if s > l.powi(((k + 1) * (k + 1)) as i32) {
                passes = false;
            }
        }
        Ok(RegularityBudget {
            l,
            r,
            deriv_sup,
            hf_sup,
            passes,
        })
    }
}
