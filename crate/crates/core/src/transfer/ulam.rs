//! Ulam discretization of the transfer operator.
//!
//! The `N x N` uniform partition of the torus turns the operator into the
//! row-stochastic matrix `P_ij ~ m(B_i intersect T^{-1} B_j) / m(B_i)`.  The
//! matrix acts on densities by left multiplication of row vectors (cell-mass
//! pushforward).  Two assemblies are provided: exact convex clipping of cell
//! images for affine maps, and stratified counter-seeded Monte Carlo for
//! perturbed maps.  The Monte Carlo stream is indexed by cell, so the result
//! is bit-identical for any thread count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AnosovMap, TorusPoint};
use crate::numerics::rng;
use crate::{Error, Result};

/// How the transition matrix was assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UlamMethod {
    /// Exact parallelogram clipping; affine maps only.
    ExactPolygon,
    /// Stratified per-cell sampling.
    MonteCarlo,
}

/// Sparse row-stochastic Ulam matrix on the `N x N` partition.
///
/// Cells are indexed row-major: cell `(ix, iy)` covers
/// `[ix/N, (ix+1)/N) x [iy/N, (iy+1)/N)` and has flat index `ix * N + iy`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UlamMatrix {
    pub n_side: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub method: UlamMethod,
    pub samples_per_cell: usize,
    pub seed: u64,
}

impl UlamMatrix {
    pub fn dim(&self) -> usize {
        self.n_side * self.n_side
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Density action: `(v P)_j = sum_i v_i P_ij`.  Total mass is preserved
    /// exactly because rows sum to 1.
    pub fn apply_density(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim());
        let mut out = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.col_idx[k]] += vi * self.values[k];
            }
        }
        out
    }

    /// Complex density action, for rotated Cesaro averages.
    pub fn apply_density_complex(
        &self,
        v: &[num_complex::Complex64],
    ) -> Vec<num_complex::Complex64> {
        assert_eq!(v.len(), self.dim());
        let mut out = vec![num_complex::Complex64::new(0.0, 0.0); self.dim()];
        for i in 0..self.dim() {
            let vi = v[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.col_idx[k]] += vi * self.values[k];
            }
        }
        out
    }

    /// Function action: `(P w)_i = sum_j P_ij w_j` (the Koopman side).
    pub fn apply_function(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim());
        (0..self.dim())
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * w[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let s: f64 = self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation of a column sum from 1 (zero for maps that preserve
    /// Lebesgue measure, up to assembly tolerance).
    pub fn column_sum_defect(&self) -> f64 {
        let mut col = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                col[self.col_idx[k]] += self.values[k];
            }
        }
        col.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Plain-text persistence: `ulam N nnz`, then the three CSR arrays, one
    /// per line, space-separated.
    pub fn write_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "ulam {} {}", self.n_side, self.nnz()).unwrap();
        for (name, line) in [
            ("row_ptr", join(&self.row_ptr)),
            ("col_idx", join(&self.col_idx)),
        ] {
            writeln!(s, "{name} {line}").unwrap();
        }
        let vals: Vec<String> = self.values.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(s, "values {}", vals.join(" ")).unwrap();
        writeln!(
            s,
            "meta {} {} {}",
            match self.method {
                UlamMethod::ExactPolygon => "exact-polygon",
                UlamMethod::MonteCarlo => "monte-carlo",
            },
            self.samples_per_cell,
            self.seed
        )
        .unwrap();
        s
    }

    pub fn read_text(text: &str) -> Result<UlamMatrix> {
        let bad = |m: &str| Error::BadParameter(format!("ulam text: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let mut hp = header.split_whitespace();
        if hp.next() != Some("ulam") {
            return Err(bad("missing header"));
        }
        let n_side: usize = hp
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad N"))?;
        let nnz: usize = hp
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad nnz"))?;
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(&format!("expected {name} line")));
            }
            Ok(parts.map(str::to_owned).collect())
        };
        let row_ptr: Vec<usize> = parse_all(&field("row_ptr")?).ok_or_else(|| bad("row_ptr"))?;
        let col_idx: Vec<usize> = parse_all(&field("col_idx")?).ok_or_else(|| bad("col_idx"))?;
        let values: Vec<f64> = parse_all(&field("values")?).ok_or_else(|| bad("values"))?;
        let meta = field("meta")?;
        if row_ptr.len() != n_side * n_side + 1 || col_idx.len() != nnz || values.len() != nnz {
            return Err(bad("length mismatch"));
        }
        let method = match meta.first().map(String::as_str) {
            Some("exact-polygon") => UlamMethod::ExactPolygon,
            Some("monte-carlo") => UlamMethod::MonteCarlo,
            _ => return Err(bad("method")),
        };
        Ok(UlamMatrix {
            n_side,
            row_ptr,
            col_idx,
            values,
            method,
            samples_per_cell: parse_one(meta.get(1)).ok_or_else(|| bad("samples"))?,
            seed: parse_one(meta.get(2)).ok_or_else(|| bad("seed"))?,
        })
    }
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

fn parse_all<T: std::str::FromStr>(tokens: &[String]) -> Option<Vec<T>> {
    tokens.iter().map(|t| t.parse().ok()).collect()
}

fn parse_one<T: std::str::FromStr>(token: Option<&String>) -> Option<T> {
    token.and_then(|t| t.parse().ok())
}

/// Assembles the Ulam matrix.  `n_side` must be a power of two.  The exact
/// method requires an affine (unperturbed) map; `samples` is the per-cell
/// budget for Monte Carlo and is rounded down to a square.
pub fn build_ulam(
    map: &AnosovMap,
    n_side: usize,
    method: UlamMethod,
    samples: usize,
    seed: u64,
) -> Result<UlamMatrix> {
    if !n_side.is_power_of_two() {
        return Err(Error::BadParameter(format!(
            "partition size {n_side} is not a power of two"
        )));
    }
    let rows: Result<Vec<Vec<(usize, f64)>>> = match method {
        UlamMethod::ExactPolygon => {
            if !map.is_linear() {
                return Err(Error::BadParameter(
                    "exact-polygon assembly requires an affine map".into(),
                ));
            }
            (0..n_side * n_side)
                .into_par_iter()
                .map(|cell| exact_row(map, n_side, cell))
                .collect()
        }
        UlamMethod::MonteCarlo => {
            let strata = (samples as f64).sqrt().floor() as usize;
            if strata < 2 {
                return Err(Error::BadParameter("need at least 4 samples per cell".into()));
            }
            (0..n_side * n_side)
                .into_par_iter()
                .map(|cell| monte_carlo_row(map, n_side, cell, strata, seed))
                .collect()
        }
    };
    let rows = rows?;
    let mut row_ptr = vec![0usize; n_side * n_side + 1];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::ZeroMassRow { row: i });
        }
        let mass: f64 = row.iter().map(|e| e.1).sum();
        if mass <= 0.0 {
            return Err(Error::ZeroMassRow { row: i });
        }
        for &(j, w) in row {
            col_idx.push(j);
            values.push(w / mass);
        }
        row_ptr[i + 1] = col_idx.len();
    }
    let strata = (samples as f64).sqrt().floor() as usize;
    Ok(UlamMatrix {
        n_side,
        row_ptr,
        col_idx,
        values,
        method,
        samples_per_cell: match method {
            UlamMethod::ExactPolygon => 0,
            UlamMethod::MonteCarlo => strata * strata,
        },
        seed,
    })
}

/// Row of transition areas for the affine map: the image of the source cell
/// is a parallelogram in the plane; clip it against every integer translate
/// of every target cell its bounding box touches.
fn exact_row(map: &AnosovMap, n: usize, cell: usize) -> Result<Vec<(usize, f64)>> {
    let (ix, iy) = (cell / n, cell % n);
    let h = 1.0 / n as f64;
    let corners = [
        (ix as f64 * h, iy as f64 * h),
        ((ix + 1) as f64 * h, iy as f64 * h),
        ((ix + 1) as f64 * h, (iy + 1) as f64 * h),
        (ix as f64 * h, (iy + 1) as f64 * h),
    ];
    let poly: Vec<[f64; 2]> = corners
        .iter()
        .map(|&(x, y)| map.forward_step_lift(x, y))
        .collect();
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &poly {
        lo_x = lo_x.min(v[0]);
        hi_x = hi_x.max(v[0]);
        lo_y = lo_y.min(v[1]);
        hi_y = hi_y.max(v[1]);
    }
    let mut acc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    let (cx0, cx1) = ((lo_x / h).floor() as i64, (hi_x / h).ceil() as i64);
    let (cy0, cy1) = ((lo_y / h).floor() as i64, (hi_y / h).ceil() as i64);
    for gx in cx0..cx1 {
        for gy in cy0..cy1 {
            let rect = [
                gx as f64 * h,
                gy as f64 * h,
                (gx + 1) as f64 * h,
                (gy + 1) as f64 * h,
            ];
            let area = clipped_area(&poly, rect);
            if area > 0.0 {
                let jx = gx.rem_euclid(n as i64) as usize;
                let jy = gy.rem_euclid(n as i64) as usize;
                *acc.entry(jx * n + jy).or_insert(0.0) += area;
            }
        }
    }
    Ok(acc.into_iter().collect())
}

/// Area of a convex polygon clipped to the axis-aligned rectangle
/// `[x0, y0, x1, y1]` (Sutherland-Hodgman, then the shoelace formula).
fn clipped_area(poly: &[[f64; 2]], rect: [f64; 4]) -> f64 {
    let mut cur = poly.to_vec();
    // each pass keeps the half-plane side(v) >= 0
    let sides: [Box<dyn Fn(&[f64; 2]) -> f64>; 4] = [
        Box::new(move |v| v[0] - rect[0]),
        Box::new(move |v| rect[2] - v[0]),
        Box::new(move |v| v[1] - rect[1]),
        Box::new(move |v| rect[3] - v[1]),
    ];
    for side in &sides {
        if cur.is_empty() {
            return 0.0;
        }
        let mut next = Vec::with_capacity(cur.len() + 4);
        for i in 0..cur.len() {
            let a = cur[i];
            let b = cur[(i + 1) % cur.len()];
            let (da, db) = (side(&a), side(&b));
            if da >= 0.0 {
                next.push(a);
            }
            if (da > 0.0) != (db > 0.0) && da != db {
                let t = da / (da - db);
                next.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        cur = next;
    }
    let mut twice = 0.0;
    for i in 0..cur.len() {
        let a = cur[i];
        let b = cur[(i + 1) % cur.len()];
        twice += a[0] * b[1] - b[0] * a[1];
    }
    twice.abs() * 0.5
}

/// Stratified sample counts for one source cell.  The stream index is the
/// cell, the counter enumerates strata, so assembly order does not matter.
fn monte_carlo_row(
    map: &AnosovMap,
    n: usize,
    cell: usize,
    strata: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let (ix, iy) = (cell / n, cell % n);
    let h = 1.0 / n as f64;
    let mut acc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for sx in 0..strata {
        for sy in 0..strata {
            let c = (sx * strata + sy) as u64;
            let ox = rng::f64_at(seed, cell as u64, 2 * c);
            let oy = rng::f64_at(seed, cell as u64, 2 * c + 1);
            let p = TorusPoint::new(
                (ix as f64 + (sx as f64 + ox) / strata as f64) * h,
                (iy as f64 + (sy as f64 + oy) / strata as f64) * h,
            );
            let q = map.apply(&p, 1)?;
            let jx = ((q.x * n as f64).floor() as usize).min(n - 1);
            let jy = ((q.y * n as f64).floor() as usize).min(n - 1);
            *acc.entry(jx * n + jy).or_insert(0.0) += 1.0;
        }
    }
    Ok(acc.into_iter().collect())
}
