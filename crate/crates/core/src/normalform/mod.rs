//! Diffeomorphisms in normal form near `M = {s = u = 0}`:
//!
//! ```text
//! f(s, u, x) = (A_s(x) s, A_u(x) u, g(x)) + r(s, u, x)
//! ```
//!
//! A model implements [`MapSpec`]; analytic derivatives are optional and
//! every consumer falls back to finite differences when they are absent.

mod bounds;
mod conditions;
pub(crate) mod fd;

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ChartTopology, CoordKind, Dimensions};
use crate::math::TAU;

pub use bounds::{check_constants, estimate_bounds, BoundSet, ConstraintCheck};
pub use conditions::{validate_conditions, ConditionReport, ConditionResult};

/// Default step for first-order central differences.
pub const FD_STEP: f64 = 1e-6;
/// Default step for second-order central differences.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// Remainder `r = (r_s, r_u, r_x)` of the normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct Remainder {
    pub r_s: Vec<f64>,
    pub r_u: Vec<f64>,
    pub r_x: Vec<f64>,
}

impl Remainder {
    pub fn zero(dims: Dimensions) -> Self {
        Self {
            r_s: alloc::vec![0.0; dims.n_s],
            r_u: alloc::vec![0.0; dims.n_u],
            r_x: alloc::vec![0.0; dims.m],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = self.r_s.clone();
        z.extend_from_slice(&self.r_u);
        z.extend_from_slice(&self.r_x);
        z
    }
}

/// A diffeomorphism in normal form on `U = B_ρ × M`.
///
/// Implementors must be pure: every method returns the same value for the
/// same input. Derivative hooks return `None` when no closed form exists.
/// Derivatives with respect to `x` are returned as one matrix per manifold
/// coordinate (`d_a_s(x)[j] = ∂A_s/∂x_j`), Hessians as one `n×n` (resp.
/// `m×m`) matrix per output component.
pub trait MapSpec: Send + Sync {
    fn dims(&self) -> Dimensions;
    fn topology(&self) -> &ChartTopology;
    /// Radius of the ball `B_ρ`.
    fn rho(&self) -> f64;
    /// Hyperbolicity constant `λ ∈ (0, 1)`.
    fn lambda(&self) -> f64;

    fn a_s(&self, x: &[f64]) -> DMatrix<f64>;
    fn a_u(&self, x: &[f64]) -> DMatrix<f64>;
    /// Dynamics on `M`. Angle outputs need not be reduced mod 2π.
    fn g(&self, x: &[f64]) -> Vec<f64>;
    fn remainder(&self, p: &ChartPoint) -> Remainder;

    /// Box of manifold coordinates used for sampling sups.
    fn x_domain(&self) -> Vec<(f64, f64)> {
        self.topology()
            .kinds()
            .iter()
            .map(|k| match k {
                CoordKind::Angle => (0.0, TAU),
                CoordKind::Linear => (-1.0, 1.0),
            })
            .collect()
    }

    fn d_a_s(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        None
    }
    fn d_a_u(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        None
    }
    fn dg(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
    fn d2g(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        None
    }
    /// `Dr(p)`, an `n×n` matrix in `(s, u, x)` block layout.
    fn dr(&self, _p: &ChartPoint) -> Option<DMatrix<f64>> {
        None
    }
    fn d2r(&self, _p: &ChartPoint) -> Option<Vec<DMatrix<f64>>> {
        None
    }
}

macro_rules! forward_map_spec {
    ($($ptr:ty),*) => {$(
        impl<T: MapSpec + ?Sized> MapSpec for $ptr {
            fn dims(&self) -> Dimensions { (**self).dims() }
            fn topology(&self) -> &ChartTopology { (**self).topology() }
            fn rho(&self) -> f64 { (**self).rho() }
            fn lambda(&self) -> f64 { (**self).lambda() }
            fn a_s(&self, x: &[f64]) -> DMatrix<f64> { (**self).a_s(x) }
            fn a_u(&self, x: &[f64]) -> DMatrix<f64> { (**self).a_u(x) }
            fn g(&self, x: &[f64]) -> Vec<f64> { (**self).g(x) }
            fn remainder(&self, p: &ChartPoint) -> Remainder { (**self).remainder(p) }
            fn x_domain(&self) -> Vec<(f64, f64)> { (**self).x_domain() }
            fn d_a_s(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> { (**self).d_a_s(x) }
            fn d_a_u(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> { (**self).d_a_u(x) }
            fn dg(&self, x: &[f64]) -> Option<DMatrix<f64>> { (**self).dg(x) }
            fn d2g(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> { (**self).d2g(x) }
            fn dr(&self, p: &ChartPoint) -> Option<DMatrix<f64>> { (**self).dr(p) }
            fn d2r(&self, p: &ChartPoint) -> Option<Vec<DMatrix<f64>>> { (**self).d2r(p) }
        }
    )*};
}

forward_map_spec!(alloc::boxed::Box<T>, alloc::sync::Arc<T>, &T);

/// Evaluate the normal-form formula without the neighborhood check and
/// without reducing angles.
pub fn evaluate<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint) -> ChartPoint {
    let r = f.remainder(p);
    let s = &f.a_s(&p.x) * nalgebra::DVector::from_column_slice(&p.s);
    let u = &f.a_u(&p.x) * nalgebra::DVector::from_column_slice(&p.u);
    let g = f.g(&p.x);
    ChartPoint::new(
        s.iter().zip(&r.r_s).map(|(a, b)| a + b).collect(),
        u.iter().zip(&r.r_u).map(|(a, b)| a + b).collect(),
        g.iter().zip(&r.r_x).map(|(a, b)| a + b).collect(),
    )
}

pub(crate) fn check_point<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint) -> Result<()> {
    if !p.dims_match(f.dims()) {
        return Err(Error::contract(
            "chart point does not match the model dimensions",
        ));
    }
    if !p.in_ball(f.rho()) {
        return Err(Error::OutsideNeighborhood {
            norm: p.normal_norm(),
            rho: f.rho(),
        });
    }
    Ok(())
}

/// `f(p)` for `p ∈ U`, with angle coordinates reported in `[0, 2π)`.
pub fn apply_map<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint) -> Result<ChartPoint> {
    check_point(f, p)?;
    let mut image = evaluate(f, p);
    f.topology().canonicalize(&mut image.x);
    Ok(image)
}

/// Jacobian `Df_p` in `(s, u, x)` block layout.
///
/// Uses the analytic block formula when the model provides `dr`, `dg`,
/// `d_a_s` and `d_a_u`; otherwise central differences with step `h`,
/// switching to one-sided differences where a symmetric stencil would leave
/// `U`.
pub fn jacobian<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint, h: f64) -> Result<DMatrix<f64>> {
    check_point(f, p)?;
    if let Some(j) = analytic_jacobian(f, p) {
        return Ok(j);
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    Ok(fd_jacobian(f, p, h))
}

/// Block Jacobian assembled from the model's analytic derivatives, if all of
/// them are available.
pub fn analytic_jacobian<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint) -> Option<DMatrix<f64>> {
    let dims = f.dims();
    let dr = f.dr(p)?;
    let dg = f.dg(&p.x)?;
    let das = f.d_a_s(&p.x)?;
    let dau = f.d_a_u(&p.x)?;
    let (ns, nu) = (dims.n_s, dims.n_u);
    let (xs, xu, xx) = (
        dims.s_range().start,
        dims.u_range().start,
        dims.x_range().start,
    );

    let mut j = dr;
    let a_s = f.a_s(&p.x);
    let a_u = f.a_u(&p.x);
    for r in 0..ns {
        for c in 0..ns {
            j[(xs + r, xs + c)] += a_s[(r, c)];
        }
    }
    for r in 0..nu {
        for c in 0..nu {
            j[(xu + r, xu + c)] += a_u[(r, c)];
        }
    }
    for r in 0..dims.m {
        for c in 0..dims.m {
            j[(xx + r, xx + c)] += dg[(r, c)];
        }
    }
    // (∂_x A_s) s and (∂_x A_u) u in the x columns
    for (jx, (das_j, dau_j)) in das.iter().zip(&dau).enumerate() {
        for r in 0..ns {
            let v: f64 = (0..ns).map(|c| das_j[(r, c)] * p.s[c]).sum();
            j[(xs + r, xx + jx)] += v;
        }
        for r in 0..nu {
            let v: f64 = (0..nu).map(|c| dau_j[(r, c)] * p.u[c]).sum();
            j[(xu + r, xx + jx)] += v;
        }
    }
    Some(j)
}

/// Finite-difference Jacobian of the full map. Central where possible,
/// one-sided where the symmetric stencil would leave the ball.
pub fn fd_jacobian<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint, h: f64) -> DMatrix<f64> {
    let dims = f.dims();
    let rho = f.rho();
    let wrap: Vec<bool> = output_wrap(dims, f.topology());
    let z = p.to_vec();
    fd::jacobian(
        |w| evaluate(f, &ChartPoint::from_slice(dims, w)).to_vec(),
        &z,
        h,
        &wrap,
        |w| ChartPoint::from_slice(dims, w).in_ball(rho),
    )
}

/// `Dr(p)`, analytic when available.
pub fn remainder_jacobian<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint) -> DMatrix<f64> {
    if let Some(dr) = f.dr(p) {
        return dr;
    }
    let dims = f.dims();
    let z = p.to_vec();
    fd::jacobian(
        |w| f.remainder(&ChartPoint::from_slice(dims, w)).to_vec(),
        &z,
        FD_STEP,
        &alloc::vec![false; dims.total()],
        |_| true,
    )
}

/// Hessians of the remainder components, analytic when available.
pub fn remainder_hessians<F: MapSpec + ?Sized>(f: &F, p: &ChartPoint) -> Vec<DMatrix<f64>> {
    if let Some(h) = f.d2r(p) {
        return h;
    }
    let dims = f.dims();
    fd::hessians(
        |w| f.remainder(&ChartPoint::from_slice(dims, w)).to_vec(),
        &p.to_vec(),
        FD_STEP_SECOND,
        &alloc::vec![false; dims.total()],
    )
}

/// `Dg(x)`, analytic when available.
pub fn g_jacobian<F: MapSpec + ?Sized>(f: &F, x: &[f64]) -> DMatrix<f64> {
    if let Some(dg) = f.dg(x) {
        return dg;
    }
    let wrap = angle_flags(f.topology());
    fd::jacobian(|w| f.g(w), x, FD_STEP, &wrap, |_| true)
}

/// Hessians of the components of `g`, analytic when available.
pub fn g_hessians<F: MapSpec + ?Sized>(f: &F, x: &[f64]) -> Vec<DMatrix<f64>> {
    if let Some(h) = f.d2g(x) {
        return h;
    }
    let wrap = angle_flags(f.topology());
    fd::hessians(|w| f.g(w), x, FD_STEP_SECOND, &wrap)
}

/// `∂A_s/∂x_j` for every manifold coordinate `j`, analytic when available.
pub fn a_s_derivative<F: MapSpec + ?Sized>(f: &F, x: &[f64]) -> Vec<DMatrix<f64>> {
    f.d_a_s(x)
        .unwrap_or_else(|| fd::matrix_derivative(|w| f.a_s(w), x, FD_STEP))
}

/// `∂A_u/∂x_j` for every manifold coordinate `j`, analytic when available.
pub fn a_u_derivative<F: MapSpec + ?Sized>(f: &F, x: &[f64]) -> Vec<DMatrix<f64>> {
    f.d_a_u(x)
        .unwrap_or_else(|| fd::matrix_derivative(|w| f.a_u(w), x, FD_STEP))
}

fn angle_flags(topo: &ChartTopology) -> Vec<bool> {
    topo.kinds()
        .iter()
        .map(|k| *k == CoordKind::Angle)
        .collect()
}

fn output_wrap(dims: Dimensions, topo: &ChartTopology) -> Vec<bool> {
    let mut wrap = alloc::vec![false; dims.n_s + dims.n_u];
    wrap.extend(angle_flags(topo));
    wrap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_linear, make_poly};
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_model_acts_componentwise() {
        let f = make_linear(0.5, 2.0, 0.0).unwrap();
        let p = ChartPoint::new(vec![0.4], vec![0.1], vec![0.0]);
        let q = apply_map(&f, &p).unwrap();
        assert_abs_diff_eq!(q.s[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(q.u[0], 0.2, epsilon = 1e-15);
        assert_eq!(q.x[0], 0.0);
    }

    #[test]
    fn manifold_is_invariant() {
        let f = make_poly(0.05, 0.5, 2.0, 0.5).unwrap();
        for x in [0.0, 1.0, 4.0, 6.2] {
            let q = apply_map(&f, &ChartPoint::on_manifold(f.dims(), vec![x])).unwrap();
            assert_eq!(q.s[0], 0.0);
            assert_eq!(q.u[0], 0.0);
            assert_abs_diff_eq!(q.x[0], x, epsilon = 1e-15);
        }
    }

    #[test]
    fn outside_neighborhood_is_rejected() {
        let f = make_linear(0.5, 2.0, 0.0).unwrap();
        let p = ChartPoint::new(vec![0.1], vec![0.5], vec![0.0]);
        match apply_map(&f, &p) {
            Err(Error::OutsideNeighborhood { norm, rho }) => {
                assert_eq!(norm, 0.5);
                assert_eq!(rho, 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(jacobian(&f, &p, FD_STEP).is_err());
    }

    #[test]
    fn linear_jacobian_is_block_diagonal() {
        let f = make_linear(0.5, 2.0, 0.3).unwrap();
        let p = ChartPoint::new(vec![0.1], vec![-0.2], vec![3.0]);
        let j = jacobian(&f, &p, FD_STEP).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0, 1.0]));
        assert_eq!(j, expected);
        let jf = fd_jacobian(&f, &p, FD_STEP);
        assert!((jf - expected).abs().max() < 1e-9);
    }

    #[test]
    fn jacobian_on_manifold_has_no_remainder_part() {
        let f = make_poly(0.05, 0.5, 2.0, 0.5).unwrap();
        let p = ChartPoint::on_manifold(f.dims(), vec![1.7]);
        let j = jacobian(&f, &p, FD_STEP).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0, 1.0]));
        assert_eq!(j, expected);
    }

    #[test]
    fn fd_step_must_be_positive_without_analytic_derivatives() {
        let f = crate::straighten::conjugate_map(
            make_linear(0.5, 2.0, 0.0).unwrap(),
            crate::straighten::FnGraphPair::zero(Dimensions::new(1, 1, 1).unwrap()),
        )
        .unwrap();
        let p = ChartPoint::new(vec![0.1], vec![0.1], vec![0.0]);
        assert!(jacobian(&f, &p, 0.0).is_err());
        assert!(jacobian(&f, &p, FD_STEP).is_ok());
    }

    #[test]
    fn one_sided_differences_near_the_boundary() {
        let f = make_poly(0.05, 0.5, 2.0, 0.5).unwrap();
        let p = ChartPoint::new(vec![0.2], vec![0.5 - 1e-7], vec![0.0]);
        let analytic = analytic_jacobian(&f, &p).unwrap();
        let fd = fd_jacobian(&f, &p, FD_STEP);
        // one-sided stencil is first order: error O(h)
        assert!((fd - analytic).abs().max() < 1e-6);
    }
}
