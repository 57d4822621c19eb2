//! The straightening change of variables
//! `Φ(s, u, x) = (s − G^u(u, x), u − G^s(s, x), x)` built from graph
//! representations `u = G^s(s, x)` of `W^s(M)` and `s = G^u(u, x)` of
//! `W^u(M)`, and conjugation of maps by it.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{sup, ChartPoint, ChartTopology, Dimensions};
use crate::normalform::{evaluate, fd, MapSpec, Remainder, FD_STEP};
use crate::sampling::{linspace, Halton};

/// Graph functions of the local stable and unstable manifolds.
pub trait GraphPair: Send + Sync {
    fn dims(&self) -> Dimensions;
    /// Radius of the ball on which the graphs are given.
    fn rho(&self) -> f64;
    /// `G^s(s, x) ∈ ℝ^{n_u}`: `W^s(M) = {u = G^s(s, x)}`.
    fn g_s(&self, s: &[f64], x: &[f64]) -> Vec<f64>;
    /// `G^u(u, x) ∈ ℝ^{n_s}`: `W^u(M) = {s = G^u(u, x)}`.
    fn g_u(&self, u: &[f64], x: &[f64]) -> Vec<f64>;
}

/// Shared graph function `(normal coordinates, x) ↦ value`.
pub type GraphFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// A [`GraphPair`] from two closures.
#[derive(Clone)]
pub struct FnGraphPair {
    dims: Dimensions,
    rho: f64,
    g_s: GraphFn,
    g_u: GraphFn,
}

impl core::fmt::Debug for FnGraphPair {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnGraphPair")
            .field("dims", &self.dims)
            .field("rho", &self.rho)
            .finish_non_exhaustive()
    }
}

impl FnGraphPair {
    pub fn new(dims: Dimensions, rho: f64, g_s: GraphFn, g_u: GraphFn) -> Self {
        Self {
            dims,
            rho,
            g_s,
            g_u,
        }
    }

    /// `G^s = G^u = 0` on all of `ℝ^{n_s} × ℝ^{n_u}`, so `Φ = Id`.
    pub fn zero(dims: Dimensions) -> Self {
        Self::new(
            dims,
            f64::INFINITY,
            Arc::new(move |_, _| alloc::vec![0.0; dims.n_u]),
            Arc::new(move |_, _| alloc::vec![0.0; dims.n_s]),
        )
    }

    /// `G^s(s, x)_i = a_s·s̄²`, `G^u(u, x)_j = a_u·ū²` (bars are coordinate
    /// means), independent of `x`.
    pub fn quadratic(dims: Dimensions, rho: f64, a_s: f64, a_u: f64) -> Self {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Self::new(
            dims,
            rho,
            Arc::new(move |s, _| alloc::vec![a_s * mean(s) * mean(s); dims.n_u]),
            Arc::new(move |u, _| alloc::vec![a_u * mean(u) * mean(u); dims.n_s]),
        )
    }
}

impl GraphPair for FnGraphPair {
    fn dims(&self) -> Dimensions {
        self.dims
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn g_s(&self, s: &[f64], x: &[f64]) -> Vec<f64> {
        (self.g_s)(s, x)
    }
    fn g_u(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        (self.g_u)(u, x)
    }
}

impl<T: GraphPair + ?Sized> GraphPair for Arc<T> {
    fn dims(&self) -> Dimensions {
        (**self).dims()
    }
    fn rho(&self) -> f64 {
        (**self).rho()
    }
    fn g_s(&self, s: &[f64], x: &[f64]) -> Vec<f64> {
        (**self).g_s(s, x)
    }
    fn g_u(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        (**self).g_u(u, x)
    }
}

fn phi_raw<G: GraphPair + ?Sized>(gp: &G, p: &ChartPoint) -> ChartPoint {
    let gu = gp.g_u(&p.u, &p.x);
    let gs = gp.g_s(&p.s, &p.x);
    ChartPoint::new(
        p.s.iter().zip(&gu).map(|(a, b)| a - b).collect(),
        p.u.iter().zip(&gs).map(|(a, b)| a - b).collect(),
        p.x.clone(),
    )
}

fn check_in_domain<G: GraphPair + ?Sized>(gp: &G, p: &ChartPoint) -> Result<()> {
    if !p.dims_match(gp.dims()) {
        return Err(Error::contract(
            "chart point does not match the graph dimensions",
        ));
    }
    if !p.in_ball(gp.rho()) {
        return Err(Error::OutsideNeighborhood {
            norm: p.normal_norm(),
            rho: gp.rho(),
        });
    }
    Ok(())
}

/// `Φ(p) = (s − G^u(u, x), u − G^s(s, x), x)`.
pub fn straighten_point<G: GraphPair + ?Sized>(gp: &G, p: &ChartPoint) -> Result<ChartPoint> {
    check_in_domain(gp, p)?;
    Ok(phi_raw(gp, p))
}

fn inverse_raw<G: GraphPair + ?Sized>(
    gp: &G,
    q: &ChartPoint,
    tol: f64,
    max_iter: usize,
) -> Result<ChartPoint> {
    let residual = |p: &ChartPoint| {
        let img = phi_raw(gp, p);
        let ds: Vec<f64> = img.s.iter().zip(&q.s).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = img.u.iter().zip(&q.u).map(|(a, b)| a - b).collect();
        sup(&ds).max(sup(&du))
    };
    let mut p = q.clone();
    let mut res = residual(&p);
    for _ in 0..max_iter {
        if res <= tol {
            return Ok(p);
        }
        let gu = gp.g_u(&p.u, &q.x);
        let gs = gp.g_s(&p.s, &q.x);
        p = ChartPoint::new(
            q.s.iter().zip(&gu).map(|(a, b)| a + b).collect(),
            q.u.iter().zip(&gs).map(|(a, b)| a + b).collect(),
            q.x.clone(),
        );
        res = residual(&p);
        if !res.is_finite() {
            break;
        }
    }
    if res <= tol {
        return Ok(p);
    }
    Err(Error::Divergence {
        iterations: max_iter,
        residual: res,
    })
}

/// `Φ⁻¹(q)` by the fixed-point iteration
/// `p ← (q_s + G^u(u, x), q_u + G^s(s, x), q_x)`, stopped once
/// `|Φ(p) − q| ≤ tol`.
pub fn straighten_inverse<G: GraphPair + ?Sized>(
    gp: &G,
    q: &ChartPoint,
    tol: f64,
    max_iter: usize,
) -> Result<ChartPoint> {
    check_in_domain(gp, q)?;
    if !(tol > 0.0) {
        return Err(Error::contract("tolerance must be positive"));
    }
    inverse_raw(gp, q, tol, max_iter)
}

/// `DΦ(p)` by central differences.
pub fn straighten_jacobian<G: GraphPair + ?Sized>(gp: &G, p: &ChartPoint, h: f64) -> DMatrix<f64> {
    let dims = gp.dims();
    fd::jacobian(
        |z| phi_raw(gp, &ChartPoint::from_slice(dims, z)).to_vec(),
        &p.to_vec(),
        h,
        &[],
        |_| true,
    )
}

/// Largest of `|G^s(0, x)|`, `|G^u(0, x)|` and the sup norms of
/// `∂_{s,x} G^s(0, x)`, `∂_{u,x} G^u(0, x)` over the given manifold points.
pub fn tangency_violation<G: GraphPair + ?Sized>(gp: &G, xs: &[Vec<f64>]) -> f64 {
    let dims = gp.dims();
    let zero_s = alloc::vec![0.0; dims.n_s];
    let zero_u = alloc::vec![0.0; dims.n_u];
    let mut worst = 0.0_f64;
    for x in xs {
        worst = worst
            .max(sup(&gp.g_s(&zero_s, x)))
            .max(sup(&gp.g_u(&zero_u, x)));
        let mut z = zero_s.clone();
        z.extend_from_slice(x);
        let js = fd::jacobian(
            |w| gp.g_s(&w[..dims.n_s], &w[dims.n_s..]),
            &z,
            FD_STEP,
            &[],
            |_| true,
        );
        let mut z = zero_u.clone();
        z.extend_from_slice(x);
        let ju = fd::jacobian(
            |w| gp.g_u(&w[..dims.n_u], &w[dims.n_u..]),
            &z,
            FD_STEP,
            &[],
            |_| true,
        );
        worst = worst.max(js.abs().max()).max(ju.abs().max());
    }
    worst
}

const INVERSE_TOL: f64 = 1e-15;
const INVERSE_MAX_ITER: usize = 200;
const TANGENCY_TOL: f64 = 1e-8;
const BISECTION_STEPS: usize = 50;

fn manifold_samples(domain: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    let mut h = Halton::new(domain.len(), 0);
    (0..count)
        .map(|_| {
            h.next_point()
                .iter()
                .zip(domain)
                .map(|(t, (lo, hi))| lo + (hi - lo) * t)
                .collect()
        })
        .collect()
}

// Corners {±r}^{n_s+n_u} of the sup-norm sphere, times a few manifold points.
fn corner_samples(dims: Dimensions, r: f64, xs: &[Vec<f64>]) -> Vec<ChartPoint> {
    let k = dims.n_s + dims.n_u;
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << k) {
        let z: Vec<f64> = (0..k)
            .map(|b| if mask >> b & 1 == 1 { r } else { -r })
            .collect();
        for x in xs {
            out.push(ChartPoint::new(
                z[..dims.n_s].to_vec(),
                z[dims.n_s..].to_vec(),
                x.clone(),
            ));
        }
    }
    out
}

fn bisect_radius(rho: f64, ok: impl Fn(f64) -> bool) -> Result<f64> {
    if ok(rho) {
        return Ok(rho);
    }
    let (mut lo, mut hi) = (0.0, rho);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::Divergence {
            iterations: INVERSE_MAX_ITER,
            residual: f64::INFINITY,
        });
    }
    Ok(lo)
}

fn prepare<F: MapSpec + ?Sized, G: GraphPair + ?Sized>(f: &F, gp: &G) -> Result<Vec<Vec<f64>>> {
    if f.dims() != gp.dims() {
        return Err(Error::contract(
            "graph pair and map have different dimensions",
        ));
    }
    let xs = manifold_samples(&f.x_domain(), 32);
    let violation = tangency_violation(gp, &xs);
    if !(violation <= TANGENCY_TOL) {
        return Err(Error::invalid(format!(
            "graph functions are not tangent to E^s, E^u on M (violation {violation:e})"
        )));
    }
    let axes: Vec<Vec<f64>> = f
        .x_domain()
        .iter()
        .map(|(lo, hi)| linspace(*lo, *hi, 3))
        .collect();
    let mut probe = Vec::new();
    crate::sampling::for_each_grid_node(&axes, |x| probe.push(x.to_vec()));
    Ok(probe)
}

fn remainder_of<F: MapSpec + ?Sized>(
    f: &F,
    p: &ChartPoint,
    image: Option<ChartPoint>,
) -> Remainder {
    let dims = f.dims();
    let Some(img) = image else {
        return Remainder {
            r_s: alloc::vec![f64::NAN; dims.n_s],
            r_u: alloc::vec![f64::NAN; dims.n_u],
            r_x: alloc::vec![f64::NAN; dims.m],
        };
    };
    let lin_s = &f.a_s(&p.x) * nalgebra::DVector::from_column_slice(&p.s);
    let lin_u = &f.a_u(&p.x) * nalgebra::DVector::from_column_slice(&p.u);
    Remainder {
        r_s: img.s.iter().zip(lin_s.iter()).map(|(a, b)| a - b).collect(),
        r_u: img.u.iter().zip(lin_u.iter()).map(|(a, b)| a - b).collect(),
        r_x: f.topology().difference(&img.x, &f.g(&p.x)),
    }
}

/// `Φ ∘ f ∘ Φ⁻¹` in normal form on the sub-ball `B_ρ'`.
///
/// `A_s`, `A_u` and `g` are those of `f` (`DΦ = Id` on `M`); the remainder
/// is the difference between the conjugated map and that linear part. Where
/// `Φ⁻¹` fails to converge the remainder is NaN.
pub struct Conjugated<F, G> {
    f: F,
    gp: G,
    rho: f64,
}

impl<F: MapSpec, G: GraphPair> Conjugated<F, G> {
    /// Radius `ρ'` of the ball on which the conjugated map is defined.
    pub fn rho_prime(&self) -> f64 {
        self.rho
    }

    pub fn inner(&self) -> &F {
        &self.f
    }

    pub fn graphs(&self) -> &G {
        &self.gp
    }

    /// `Φ(f(Φ⁻¹(p)))` without reducing angles.
    pub fn image(&self, p: &ChartPoint) -> Option<ChartPoint> {
        let pre = inverse_raw(&self.gp, p, INVERSE_TOL, INVERSE_MAX_ITER).ok()?;
        Some(phi_raw(&self.gp, &evaluate(&self.f, &pre)))
    }
}

/// Conjugate `f` by the straightening map of `gp`.
///
/// `ρ'` is the largest radius (found by bisection) at which the inverse
/// iteration converges at all corners of the sup-norm sphere, over a small
/// grid of manifold points, to preimages inside `f`'s ball. Graphs that are
/// not tangent to `E^s`, `E^u` along `M` are rejected.
pub fn conjugate_map<F: MapSpec, G: GraphPair>(f: F, gp: G) -> Result<Conjugated<F, G>> {
    let probe = prepare(&f, &gp)?;
    let dims = f.dims();
    let limit = f.rho().min(gp.rho());
    let ok = |r: f64| {
        corner_samples(dims, r * (1.0 - 1e-12), &probe)
            .iter()
            .all(|q| {
                inverse_raw(&gp, q, INVERSE_TOL, INVERSE_MAX_ITER)
                    .map(|p| p.in_ball(limit))
                    .unwrap_or(false)
            })
    };
    let rho = bisect_radius(f.rho(), ok)?;
    Ok(Conjugated { f, gp, rho })
}

impl<F: MapSpec, G: GraphPair> MapSpec for Conjugated<F, G> {
    fn dims(&self) -> Dimensions {
        self.f.dims()
    }
    fn topology(&self) -> &ChartTopology {
        self.f.topology()
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn lambda(&self) -> f64 {
        self.f.lambda()
    }
    fn x_domain(&self) -> Vec<(f64, f64)> {
        self.f.x_domain()
    }
    fn a_s(&self, x: &[f64]) -> DMatrix<f64> {
        self.f.a_s(x)
    }
    fn a_u(&self, x: &[f64]) -> DMatrix<f64> {
        self.f.a_u(x)
    }
    fn g(&self, x: &[f64]) -> Vec<f64> {
        self.f.g(x)
    }
    fn remainder(&self, p: &ChartPoint) -> Remainder {
        remainder_of(&self.f, p, self.image(p))
    }
    fn d_a_s(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.f.d_a_s(x)
    }
    fn d_a_u(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.f.d_a_u(x)
    }
    fn dg(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.f.dg(x)
    }
    fn d2g(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.f.d2g(x)
    }
}

/// `Φ⁻¹ ∘ f ∘ Φ`: a map whose local stable and unstable manifolds are the
/// graphs of `gp` whenever `f` is already straightened. Conjugating it back
/// with [`conjugate_map`] recovers `f`.
pub struct PulledBack<F, G> {
    f: F,
    gp: G,
    rho: f64,
}

impl<F: MapSpec, G: GraphPair> PulledBack<F, G> {
    pub fn inner(&self) -> &F {
        &self.f
    }

    pub fn image(&self, p: &ChartPoint) -> Option<ChartPoint> {
        let straight = phi_raw(&self.gp, p);
        inverse_raw(
            &self.gp,
            &evaluate(&self.f, &straight),
            INVERSE_TOL,
            INVERSE_MAX_ITER,
        )
        .ok()
    }
}

/// Build `Φ⁻¹ ∘ f ∘ Φ` on the largest ball (by bisection over corner
/// samples) on which `Φ` stays inside `f`'s ball and the inverse converges
/// at the image.
pub fn pull_back<F: MapSpec, G: GraphPair>(f: F, gp: G) -> Result<PulledBack<F, G>> {
    let probe = prepare(&f, &gp)?;
    let dims = f.dims();
    let limit = f.rho().min(gp.rho());
    let ok = |r: f64| {
        corner_samples(dims, r * (1.0 - 1e-12), &probe)
            .iter()
            .all(|p| {
                let straight = phi_raw(&gp, p);
                straight.in_ball(limit)
                    && inverse_raw(&gp, &evaluate(&f, &straight), INVERSE_TOL, INVERSE_MAX_ITER)
                        .is_ok()
            })
    };
    let rho = bisect_radius(f.rho(), ok)?;
    Ok(PulledBack { f, gp, rho })
}

impl<F: MapSpec, G: GraphPair> MapSpec for PulledBack<F, G> {
    fn dims(&self) -> Dimensions {
        self.f.dims()
    }
    fn topology(&self) -> &ChartTopology {
        self.f.topology()
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn lambda(&self) -> f64 {
        self.f.lambda()
    }
    fn x_domain(&self) -> Vec<(f64, f64)> {
        self.f.x_domain()
    }
    fn a_s(&self, x: &[f64]) -> DMatrix<f64> {
        self.f.a_s(x)
    }
    fn a_u(&self, x: &[f64]) -> DMatrix<f64> {
        self.f.a_u(x)
    }
    fn g(&self, x: &[f64]) -> Vec<f64> {
        self.f.g(x)
    }
    fn remainder(&self, p: &ChartPoint) -> Remainder {
        remainder_of(&self.f, p, self.image(p))
    }
    fn d_a_s(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.f.d_a_s(x)
    }
    fn d_a_u(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.f.d_a_u(x)
    }
    fn dg(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.f.dg(x)
    }
    fn d2g(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.f.d2g(x)
    }
}
