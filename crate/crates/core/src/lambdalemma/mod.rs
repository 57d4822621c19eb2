//! Transversal disks pushed forward by `f` and their C¹ distance to the
//! unstable manifold `W^u(M) = {s = 0}`.
//!
//! A disk is a graph `s = σ(u, x)` over a box in `(u, x)`. It is discretized
//! by a tensor mesh; every node carries a frame spanning the disk tangent
//! space. Iterating the mesh and dropping the nodes that leave `U` realizes
//! `Δ_k = f^k(Δ) ∩ U`.

mod annulus;
mod domination;

pub use annulus::{
    annulus_experiment, AnnulusReport, BoundaryTrack, CircleRestriction, BOUNDARY_TOL,
};
pub use domination::{verify_bound_domination, DominationReport, DominationStep, STRETCH_SLACK};

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{row_sum_norm, sup, ChartPoint, Dimensions, TangentVector};
use crate::math::powi;
use crate::normalform::{check_point, BoundSet, MapSpec};
use crate::sampling::{for_each_grid_node, linspace};
use crate::tangentflow::{step_jet, JetState};

/// `σ(u, x)`, returning the `n_s` components of `s`.
pub type SigmaFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// `∂σ(u, x)`, an `n_s × (n_u + m)` matrix with the `u` columns first.
pub type SigmaJacobianFn = Arc<dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Step used for `∂σ` when no closed form is attached.
pub const SIGMA_FD_STEP: f64 = 1e-6;

/// A disk `Δ = {(σ(u, x), u, x) : u ∈ u_box, x ∈ x_box}` of dimension
/// `n_u + m`.
#[derive(Clone)]
pub struct DiskSpec {
    dims: Dimensions,
    sigma: SigmaFn,
    d_sigma: Option<SigmaJacobianFn>,
    u_box: Vec<(f64, f64)>,
    x_box: Vec<(f64, f64)>,
    mesh_per_axis: usize,
}

impl fmt::Debug for DiskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiskSpec")
            .field("dims", &self.dims)
            .field("u_box", &self.u_box)
            .field("x_box", &self.x_box)
            .field("mesh_per_axis", &self.mesh_per_axis)
            .field("analytic_derivative", &self.d_sigma.is_some())
            .finish()
    }
}

impl DiskSpec {
    /// `u_box` must contain 0 in its interior so that the disk meets
    /// `{u = 0}`; `x_box` lists one nonempty interval per manifold coordinate.
    pub fn new(
        dims: Dimensions,
        sigma: SigmaFn,
        u_box: Vec<(f64, f64)>,
        x_box: Vec<(f64, f64)>,
        mesh_per_axis: usize,
    ) -> Result<Self> {
        if u_box.len() != dims.n_u || x_box.len() != dims.m {
            return Err(Error::contract("disk boxes do not match the dimensions"));
        }
        if let Some((lo, hi)) = u_box.iter().find(|(lo, hi)| !(*lo < 0.0 && 0.0 < *hi)) {
            return Err(Error::invalid(alloc::format!(
                "u interval [{lo}, {hi}] must contain 0 in its interior"
            )));
        }
        if let Some((lo, hi)) = x_box
            .iter()
            .find(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite()))
        {
            return Err(Error::invalid(alloc::format!(
                "x interval [{lo}, {hi}] is empty or unbounded"
            )));
        }
        if mesh_per_axis < 2 {
            return Err(Error::invalid("mesh_per_axis must be at least 2"));
        }
        Ok(Self {
            dims,
            sigma,
            d_sigma: None,
            u_box,
            x_box,
            mesh_per_axis,
        })
    }

    /// Attach the closed-form `∂σ`, used instead of central differences.
    pub fn with_derivative(mut self, d_sigma: SigmaJacobianFn) -> Self {
        self.d_sigma = Some(d_sigma);
        self
    }

    /// `σ ≡ s0`.
    pub fn constant(
        dims: Dimensions,
        s0: Vec<f64>,
        u_box: Vec<(f64, f64)>,
        x_box: Vec<(f64, f64)>,
        mesh_per_axis: usize,
    ) -> Result<Self> {
        Self::affine(
            dims,
            s0,
            DMatrix::zeros(dims.n_s, dims.n_u),
            DMatrix::zeros(dims.n_s, dims.m),
            u_box,
            x_box,
            mesh_per_axis,
        )
    }

    /// `σ(u, x) = s0 + B_u u + B_x x`.
    pub fn affine(
        dims: Dimensions,
        s0: Vec<f64>,
        slope_u: DMatrix<f64>,
        slope_x: DMatrix<f64>,
        u_box: Vec<(f64, f64)>,
        x_box: Vec<(f64, f64)>,
        mesh_per_axis: usize,
    ) -> Result<Self> {
        if s0.len() != dims.n_s
            || slope_u.shape() != (dims.n_s, dims.n_u)
            || slope_x.shape() != (dims.n_s, dims.m)
        {
            return Err(Error::contract(
                "affine disk coefficients do not match the dimensions",
            ));
        }
        let mut jac = DMatrix::zeros(dims.n_s, dims.n_u + dims.m);
        jac.view_mut((0, 0), (dims.n_s, dims.n_u))
            .copy_from(&slope_u);
        jac.view_mut((0, dims.n_u), (dims.n_s, dims.m))
            .copy_from(&slope_x);
        let sigma: SigmaFn = Arc::new(move |u: &[f64], x: &[f64]| {
            (0..s0.len())
                .map(|i| {
                    s0[i]
                        + (0..u.len()).map(|j| slope_u[(i, j)] * u[j]).sum::<f64>()
                        + (0..x.len()).map(|j| slope_x[(i, j)] * x[j]).sum::<f64>()
                })
                .collect()
        });
        let d_sigma: SigmaJacobianFn = Arc::new(move |_: &[f64], _: &[f64]| jac.clone());
        Ok(Self::new(dims, sigma, u_box, x_box, mesh_per_axis)?.with_derivative(d_sigma))
    }

    /// Constant disk at `s = ρ/2` over `x_domain`, with `u` half-width
    /// `ρ(λ + k)^{n_target}`.
    pub fn default_for<F: MapSpec + ?Sized>(
        f: &F,
        b: &BoundSet,
        n_target: usize,
        mesh_per_axis: usize,
    ) -> Result<Self> {
        let dims = f.dims();
        let w = f.rho() * powi(b.contraction(), n_target as i32);
        Self::constant(
            dims,
            alloc::vec![0.5 * f.rho(); dims.n_s],
            alloc::vec![(-w, w); dims.n_u],
            f.x_domain(),
            mesh_per_axis,
        )
    }

    /// The sub-disk `{x_coord = value}` as a disk over the remaining `m − 1`
    /// manifold coordinates.
    pub fn slice(&self, coord: usize, value: f64) -> Result<Self> {
        if coord >= self.dims.m || self.dims.m < 2 {
            return Err(Error::contract(
                "slice needs a manifold coordinate to drop and one to keep",
            ));
        }
        let lift = move |x: &[f64]| -> Vec<f64> {
            let mut full = x.to_vec();
            full.insert(coord, value);
            full
        };
        let sigma = self.sigma.clone();
        let mut out = Self {
            dims: Dimensions {
                m: self.dims.m - 1,
                ..self.dims
            },
            sigma: Arc::new(move |u: &[f64], x: &[f64]| sigma(u, &lift(x))),
            d_sigma: None,
            u_box: self.u_box.clone(),
            x_box: self
                .x_box
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != coord)
                .map(|(_, b)| *b)
                .collect(),
            mesh_per_axis: self.mesh_per_axis,
        };
        if let Some(d) = self.d_sigma.clone() {
            let col = self.dims.n_u + coord;
            out.d_sigma = Some(Arc::new(move |u: &[f64], x: &[f64]| {
                d(u, &lift(x)).remove_column(col)
            }));
        }
        Ok(out)
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn u_box(&self) -> &[(f64, f64)] {
        &self.u_box
    }

    pub fn x_box(&self) -> &[(f64, f64)] {
        &self.x_box
    }

    pub fn mesh_per_axis(&self) -> usize {
        self.mesh_per_axis
    }

    pub fn sigma(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        (self.sigma)(u, x)
    }

    /// `∂σ(u, x)`, closed form when attached, central differences otherwise.
    pub fn sigma_jacobian(&self, u: &[f64], x: &[f64]) -> DMatrix<f64> {
        if let Some(d) = &self.d_sigma {
            return d(u, x);
        }
        let (n_u, m) = (self.dims.n_u, self.dims.m);
        let mut jac = DMatrix::zeros(self.dims.n_s, n_u + m);
        let mut z: Vec<f64> = u.iter().chain(x).copied().collect();
        for c in 0..n_u + m {
            let z0 = z[c];
            z[c] = z0 + SIGMA_FD_STEP;
            let plus = self.sigma(&z[..n_u], &z[n_u..]);
            z[c] = z0 - SIGMA_FD_STEP;
            let minus = self.sigma(&z[..n_u], &z[n_u..]);
            z[c] = z0;
            for r in 0..self.dims.n_s {
                jac[(r, c)] = (plus[r] - minus[r]) / (2.0 * SIGMA_FD_STEP);
            }
        }
        jac
    }

    /// Mesh axes: `mesh_per_axis` nodes per interval, with 0 added to every
    /// `u` axis that misses it.
    fn axes(&self) -> Vec<Vec<f64>> {
        let mut axes = Vec::with_capacity(self.dims.n_u + self.dims.m);
        for &(lo, hi) in &self.u_box {
            let mut a = linspace(lo, hi, self.mesh_per_axis);
            if !a.contains(&0.0) {
                a.push(0.0);
                a.sort_by(f64::total_cmp);
            }
            axes.push(a);
        }
        for &(lo, hi) in &self.x_box {
            axes.push(linspace(lo, hi, self.mesh_per_axis));
        }
        axes
    }

    /// Disk frame at a node: `(∂_{u_j}σ, e_j, 0)` for each `u_j`, and
    /// `(∂_{u_0}σ + ∂_{x_i}σ, e_0, e_i)` for each `x_i`. The `x` vectors are
    /// anchored on `e_0` so that every frame vector has `v^u ≠ 0`.
    fn frame(&self, u: &[f64], x: &[f64]) -> Vec<TangentVector> {
        let (n_u, m) = (self.dims.n_u, self.dims.m);
        let jac = self.sigma_jacobian(u, x);
        let mut frame = Vec::with_capacity(n_u + m);
        for j in 0..n_u {
            let mut v_u = alloc::vec![0.0; n_u];
            v_u[j] = 1.0;
            frame.push(TangentVector::new(
                jac.column(j).iter().copied().collect(),
                v_u,
                alloc::vec![0.0; m],
            ));
        }
        for i in 0..m {
            let mut v_u = alloc::vec![0.0; n_u];
            v_u[0] = 1.0;
            let mut v_x = alloc::vec![0.0; m];
            v_x[i] = 1.0;
            let v_s = (jac.column(0) + jac.column(n_u + i))
                .iter()
                .copied()
                .collect();
            frame.push(TangentVector::new(v_s, v_u, v_x));
        }
        frame
    }
}

/// A mesh node: its disk parameters `(u, x)`, its current jet and whether it
/// is still inside `U`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeshPoint {
    pub tag: Vec<f64>,
    pub jet: JetState,
    pub alive: bool,
}

impl MeshPoint {
    /// Whether the node was seeded on `{u = 0}`.
    pub fn on_stable_slice(&self) -> bool {
        self.tag[..self.jet.p.u.len()].iter().all(|u| *u == 0.0)
    }
}

/// The iterated mesh of a disk.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeshOrbit {
    pub points: Vec<MeshPoint>,
    pub n: usize,
}

impl MeshOrbit {
    pub fn alive(&self) -> impl Iterator<Item = &MeshPoint> {
        self.points.iter().filter(|p| p.alive)
    }

    pub fn alive_count(&self) -> usize {
        self.alive().count()
    }
}

/// Place the disk mesh with its tangent frames. Every node must lie in `U`.
pub fn seed_mesh<F: MapSpec + ?Sized>(d: &DiskSpec, f: &F) -> Result<MeshOrbit> {
    if d.dims != f.dims() {
        return Err(Error::contract("disk and map dimensions differ"));
    }
    let n_u = d.dims.n_u;
    let topo = f.topology();
    let mut points = Vec::new();
    let mut failure = None;
    for_each_grid_node(&d.axes(), |node| {
        if failure.is_some() {
            return;
        }
        let (u, x) = node.split_at(n_u);
        let mut xc = x.to_vec();
        topo.canonicalize(&mut xc);
        let p = ChartPoint::new(d.sigma(u, x), u.to_vec(), xc);
        let seeded = check_point(f, &p).and_then(|_| JetState::new(p, d.frame(u, x)));
        match seeded {
            Ok(jet) => points.push(MeshPoint {
                tag: node.to_vec(),
                jet,
                alive: true,
            }),
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(MeshOrbit { points, n: 0 }),
    }
}

fn step_point<F: MapSpec + ?Sized>(f: &F, point: &mut MeshPoint) -> Result<()> {
    if !point.alive {
        return Ok(());
    }
    match step_jet(f, &point.jet) {
        Ok(next) => point.jet = next,
        Err(Error::Escaped(_)) => point.alive = false,
        Err(e) => return Err(e),
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn step_all<F: MapSpec + ?Sized>(f: &F, points: &mut [MeshPoint]) -> Result<()> {
    use rayon::prelude::*;
    points.par_iter_mut().try_for_each(|p| step_point(f, p))
}

#[cfg(not(feature = "parallel"))]
fn step_all<F: MapSpec + ?Sized>(f: &F, points: &mut [MeshPoint]) -> Result<()> {
    points.iter_mut().try_for_each(|p| step_point(f, p))
}

/// Advance every alive node `steps` times; nodes leaving `U` are marked dead.
pub fn advance_mesh<F: MapSpec + ?Sized>(
    mut mo: MeshOrbit,
    f: &F,
    steps: usize,
) -> Result<MeshOrbit> {
    if steps == 0 {
        return Err(Error::contract("advance_mesh needs at least one step"));
    }
    for _ in 0..steps {
        step_all(f, &mut mo.points)?;
        mo.n += 1;
        if mo.alive_count() == 0 {
            return Err(Error::EmptyOrbit { n: mo.n });
        }
    }
    Ok(mo)
}

/// Distance of the alive part of an iterated disk to `W^u(M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct C1Distance {
    pub n: usize,
    /// `max |s|`.
    pub c0: f64,
    /// Max over nodes of the row-sum norm of `∂s/∂(u, x)` along the disk.
    pub c1: f64,
    /// Max over nodes and frame vectors of `|v^s|/|v^u|`.
    pub incl_s: f64,
    /// Max over nodes and frame vectors of `|v^x|/|v^u|`.
    pub incl_x: f64,
    pub alive: usize,
}

impl C1Distance {
    /// `max(c0, c1)`.
    pub fn value(&self) -> f64 {
        self.c0.max(self.c1)
    }
}

/// Row-sum norm of `V_s W⁻¹`, where `W` stacks the `u` rows and the selected
/// `x` rows of the frame vectors spanning `u` and the selected `x`
/// directions. Infinite when the frame does not project onto `(u, x)`.
pub(crate) fn graph_slope(jet: &JetState, x_coords: &[usize]) -> f64 {
    let n_s = jet.p.s.len();
    let n_u = jet.p.u.len();
    let cols: Vec<&TangentVector> = jet.frame[..n_u]
        .iter()
        .chain(x_coords.iter().map(|i| &jet.frame[n_u + i]))
        .collect();
    let d = cols.len();
    let v_s = DMatrix::from_fn(n_s, d, |r, c| cols[c].v_s[r]);
    let w = DMatrix::from_fn(d, d, |r, c| {
        if r < n_u {
            cols[c].v_u[r]
        } else {
            cols[c].v_x[x_coords[r - n_u]]
        }
    });
    match w.try_inverse() {
        Some(w_inv) => row_sum_norm(&(v_s * w_inv)),
        None => f64::INFINITY,
    }
}

pub(crate) fn distance_of<'a>(
    n: usize,
    points: impl Iterator<Item = &'a MeshPoint>,
    x_coords: &[usize],
    frame_index: impl Fn(usize) -> bool,
) -> Result<C1Distance> {
    let mut out = C1Distance {
        n,
        c0: 0.0,
        c1: 0.0,
        incl_s: 0.0,
        incl_x: 0.0,
        alive: 0,
    };
    for p in points {
        out.alive += 1;
        out.c0 = out.c0.max(sup(&p.jet.p.s));
        out.c1 = out.c1.max(graph_slope(&p.jet, x_coords));
        for (_, v) in p
            .jet
            .frame
            .iter()
            .enumerate()
            .filter(|(i, _)| frame_index(*i))
        {
            out.incl_s = out.incl_s.max(v.inclination_s().unwrap_or(f64::INFINITY));
            out.incl_x = out.incl_x.max(v.inclination_x().unwrap_or(f64::INFINITY));
        }
    }
    if out.alive == 0 {
        return Err(Error::EmptyOrbit { n });
    }
    Ok(out)
}

/// C¹ distance of the alive nodes to `W^u(M)`.
pub fn c1_distance(mo: &MeshOrbit) -> Result<C1Distance> {
    let m = match mo.points.first() {
        Some(p) => p.jet.p.x.len(),
        None => return Err(Error::EmptyOrbit { n: mo.n }),
    };
    let coords: Vec<usize> = (0..m).collect();
    distance_of(mo.n, mo.alive(), &coords, |_| true)
}

/// Outcome of [`find_k`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KSearch {
    pub eps: f64,
    pub n_max: usize,
    /// Smallest `K` with `max(c0, c1)(n) ≤ eps` for every `K ≤ n ≤ n_max`.
    pub k: Option<usize>,
    /// One entry per iterate `0..=n_max`.
    pub series: Vec<C1Distance>,
}

impl KSearch {
    /// Whether `max(c0, c1)` never increases from iterate `from` on.
    pub fn nonincreasing_from(&self, from: usize) -> bool {
        self.series
            .iter()
            .skip(from)
            .zip(self.series.iter().skip(from + 1))
            .all(|(a, b)| b.value() <= a.value())
    }
}

/// First index from which every value stays `≤ eps`.
pub(crate) fn first_settled(
    values: impl DoubleEndedIterator<Item = f64> + ExactSizeIterator,
    eps: f64,
) -> Option<usize> {
    let len = values.len();
    let tail = values.rev().take_while(|v| *v <= eps).count();
    if tail == 0 {
        None
    } else {
        Some(len - tail)
    }
}

/// Iterate the disk mesh up to `n_max` times and find the first iterate
/// after which the alive part stays C¹ `eps`-close to `W^u(M)`.
pub fn find_k<F: MapSpec + ?Sized>(d: &DiskSpec, f: &F, eps: f64, n_max: usize) -> Result<KSearch> {
    if !(eps > 0.0) {
        return Err(Error::contract("eps must be positive"));
    }
    let mut mo = seed_mesh(d, f)?;
    let mut series = alloc::vec![c1_distance(&mo)?];
    for _ in 0..n_max {
        mo = advance_mesh(mo, f, 1)?;
        series.push(c1_distance(&mo)?);
    }
    let k = first_settled(series.iter().map(C1Distance::value), eps);
    Ok(KSearch {
        eps,
        n_max,
        k,
        series,
    })
}

/// Human-readable summary of a search.
pub fn describe_k(search: &KSearch) -> String {
    match search.k {
        Some(k) => alloc::format!("K = {k} for eps = {:e}", search.eps),
        None => alloc::format!(
            "no K within {} iterates for eps = {:e}",
            search.n_max,
            search.eps
        ),
    }
}
