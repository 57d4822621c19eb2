//! Numerical toolkit for diffeomorphisms in normal form near a normally
//! hyperbolic invariant manifold.
//!
//! Points near the manifold `M` are written in split coordinates `(s, u, x)`:
//! `s` contracts, `u` expands and `x` is a chart on `M`. A map in normal form
//! reads `f(s, u, x) = (A_s(x) s, A_u(x) u, g(x)) + r(s, u, x)` with a remainder
//! that vanishes on `M` and on the straightened stable/unstable manifolds.
//!
//! The crate provides
//!
//! - [`geometry`]: coordinate containers, the sup norm and the induced
//!   row-sum matrix norm;
//! - [`normalform`]: the [`MapSpec`] trait, Jacobians, numerical validation of
//!   the normal-form conditions and estimation of the constant budget;
//! - [`straighten`]: the graph-based change of variables that flattens the
//!   local stable and unstable manifolds;
//! - [`tangentflow`]: orbit and tangent-frame propagation, inclinations and
//!   their closed-form bounds;
//! - [`lambdalemma`]: transversal disk meshes, C¹ distance to the unstable
//!   manifold and the annulus experiment;
//! - [`models`]: closed-form test maps and a three degree of freedom
//!   Hamiltonian with a splitting integrator and its Poincaré map.
//!
//! The crate is `no_std` and only needs `alloc`. The `parallel` feature pulls
//! in `std` and `rayon` to fan mesh propagation out over threads.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

mod error;
mod math;
mod sampling;

pub mod geometry;
pub mod lambdalemma;
pub mod models;
pub mod normalform;
pub mod straighten;
pub mod tangentflow;

pub use error::{Error, Result};
pub use geometry::{ChartPoint, ChartTopology, CoordKind, Dimensions, TangentVector};
pub use normalform::{BoundSet, ConditionReport, MapSpec, Remainder};
