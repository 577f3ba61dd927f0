//! Numerics for hyperbolic torus maps: transfer operators, invariant
//! foliations, holonomy Jacobians and anisotropic norm estimation.
//!
//! The crate is organized around five subsystems:
//!
//! * [`dynamics`] — torus Anosov maps (hyperbolic integer matrix plus a
//!   trigonometric perturbation), cone fields and hyperbolicity estimates.
//! * [`foliation`] — adapted foliations stored as local Chebyshev graphs,
//!   the holonomy generator `H^F` and the holonomy Jacobian `J^F`.
//! * [`graph_transform`] — pullback of a foliation under the inverse map,
//!   both through the implicit-solve recursion and through a direct
//!   leaf-pullback route used to cross-check it.
//! * [`aniso`] — weighted `C^rho` norms, leafwise test-function norms,
//!   dictionaries of certified foliation/test-function pairs and the
//!   dictionary estimators of the anisotropic norms.
//! * [`transfer`] — the pointwise transfer operator, Ulam discretization,
//!   sparse eigensolvers and the statistical experiments built on them.

pub mod aniso;
pub mod dynamics;
pub mod error;
pub mod foliation;
pub mod graph_transform;
pub mod numerics;
pub mod transfer;

pub use error::{Error, Result};
