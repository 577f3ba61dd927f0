use serde::{Deserialize, Serialize};

/// Row-major 2x2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn from_cols(u: [f64; 2], v: [f64; 2]) -> Self {
        Mat2 {
            m: [[u[0], v[0]], [u[1], v[1]]],
        }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Mat2 {
        let d = self.det();
        Mat2 {
            m: [
                [self.m[1][1] / d, -self.m[0][1] / d],
                [-self.m[1][0] / d, self.m[0][0] / d],
            ],
        }
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn mul_mat(&self, o: &Mat2) -> Mat2 {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        Mat2 { m: r }
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            m: [
                [self.m[0][0] + o.m[0][0], self.m[0][1] + o.m[0][1]],
                [self.m[1][0] + o.m[1][0], self.m[1][1] + o.m[1][1]],
            ],
        }
    }

    /// Operator norm induced by the sup norm on vectors (max row abs sum).
    pub fn sup_norm(&self) -> f64 {
        let r0 = self.m[0][0].abs() + self.m[0][1].abs();
        let r1 = self.m[1][0].abs() + self.m[1][1].abs();
        r0.max(r1)
    }
}
