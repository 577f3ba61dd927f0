//! Shared numerical kernels: Chebyshev interpolation, trigonometric fields
//! on the torus, 2x2 matrix helpers and counter-based random streams.

pub mod chebyshev;
pub mod mat2;
pub mod rng;
pub mod trig;

pub use chebyshev::{Cheb1, Cheb2};
pub use mat2::Mat2;
pub use trig::TrigField;
