//! The annulus variant: a disk over `𝕋 × [y0, y1]` accumulating on the
//! unstable manifold of the annulus `A`, and its boundary sub-disks
//! accumulating on the unstable manifolds of the invariant circles
//! `C_i = {s = u = 0, y = y_i}`.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{
    c1_distance, distance_of, find_k, first_settled, seed_mesh, C1Distance, DiskSpec, KSearch,
};
use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ChartTopology, CoordKind, Dimensions};
use crate::math::TAU;
use crate::normalform::{MapSpec, Remainder};

/// Largest drift `|y − y_i|` of a boundary node before the model is declared
/// inconsistent.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// The restriction of a map on `B_ρ × (𝕋 × ℝ)` to the invariant cylinder
/// `B_ρ × (𝕋 × {y})`, as a map on `B_ρ × 𝕋`.
#[derive(Debug, Clone)]
pub struct CircleRestriction<F> {
    inner: F,
    y: f64,
    topo: ChartTopology,
}

impl<F: MapSpec> CircleRestriction<F> {
    /// `inner` must have `x = (θ, y)` with `θ` an angle.
    pub fn new(inner: F, y: f64) -> Result<Self> {
        check_cylinder(&inner)?;
        Ok(Self {
            inner,
            y,
            topo: ChartTopology::angles(1),
        })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    fn lift_x(&self, x: &[f64]) -> [f64; 2] {
        [x[0], self.y]
    }

    fn lift(&self, p: &ChartPoint) -> ChartPoint {
        ChartPoint::new(p.s.clone(), p.u.clone(), self.lift_x(&p.x).to_vec())
    }

    /// Index of `y` in the full `(s, u, x)` layout.
    fn y_index(&self) -> usize {
        let d = self.inner.dims();
        d.n_s + d.n_u + 1
    }
}

fn check_cylinder<F: MapSpec + ?Sized>(f: &F) -> Result<()> {
    if f.dims().m != 2 || f.topology().kinds() != [CoordKind::Angle, CoordKind::Linear] {
        return Err(Error::contract(
            "the annulus experiment needs a manifold 𝕋 × ℝ with x = (θ, y)",
        ));
    }
    Ok(())
}

impl<F: MapSpec> MapSpec for CircleRestriction<F> {
    fn dims(&self) -> Dimensions {
        Dimensions {
            m: 1,
            ..self.inner.dims()
        }
    }

    fn topology(&self) -> &ChartTopology {
        &self.topo
    }

    fn rho(&self) -> f64 {
        self.inner.rho()
    }

    fn lambda(&self) -> f64 {
        self.inner.lambda()
    }

    fn x_domain(&self) -> Vec<(f64, f64)> {
        alloc::vec![(0.0, TAU)]
    }

    fn a_s(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.a_s(&self.lift_x(x))
    }

    fn a_u(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.a_u(&self.lift_x(x))
    }

    fn g(&self, x: &[f64]) -> Vec<f64> {
        alloc::vec![self.inner.g(&self.lift_x(x))[0]]
    }

    fn remainder(&self, p: &ChartPoint) -> Remainder {
        let mut r = self.inner.remainder(&self.lift(p));
        r.r_x.truncate(1);
        r
    }

    fn d_a_s(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.inner.d_a_s(&self.lift_x(x)).map(|mut d| {
            d.truncate(1);
            d
        })
    }

    fn d_a_u(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.inner.d_a_u(&self.lift_x(x)).map(|mut d| {
            d.truncate(1);
            d
        })
    }

    fn dg(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.inner
            .dg(&self.lift_x(x))
            .map(|d| DMatrix::from_element(1, 1, d[(0, 0)]))
    }

    fn dr(&self, p: &ChartPoint) -> Option<DMatrix<f64>> {
        let y = self.y_index();
        self.inner
            .dr(&self.lift(p))
            .map(|d| d.remove_row(y).remove_column(y))
    }
}

/// One boundary circle `C_i` and the sub-disk of nodes seeded on it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryTrack {
    pub y: f64,
    /// Nodes seeded on `y = y_i`.
    pub points: usize,
    /// Per iterate: `max |s|`, slope of `s` over `(u, θ)` and the
    /// inclinations of the frame vectors tangent to the sub-disk.
    pub series: Vec<C1Distance>,
    /// Per iterate: `max |y − y_i|` over alive sub-disk nodes.
    pub residual: Vec<f64>,
    /// First iterate from which `max(c0, c1, |y − y_i|) ≤ eps` holds to the end.
    pub k_prime: Option<usize>,
    /// `K` of the same sub-disk iterated by the map restricted to the circle.
    pub standalone_k: Option<usize>,
}

/// Outcome of [`annulus_experiment`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnulusReport {
    pub y0: f64,
    pub y1: f64,
    /// Full-disk search against `W^u(A) = {s = 0, y ∈ [y0, y1]}`.
    pub full: KSearch,
    pub boundaries: [BoundaryTrack; 2],
    /// Largest distance of an alive node's `y` outside `[y0, y1]`.
    pub annulus_excursion: f64,
}

impl AnnulusReport {
    pub fn k(&self) -> Option<usize> {
        self.full.k
    }

    /// The larger boundary accumulation iterate, if both circles have one.
    pub fn k_prime(&self) -> Option<usize> {
        Some(self.boundaries[0].k_prime?.max(self.boundaries[1].k_prime?))
    }

    /// Largest boundary drift over all iterates.
    pub fn max_boundary_residual(&self) -> f64 {
        self.boundaries
            .iter()
            .flat_map(|b| b.residual.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Iterate a disk over `𝕋 × [y0, y1]` and measure its accumulation on
/// `W^u(A)` and, for the sub-disks seeded on `y = y0` and `y = y1`, on
/// `W^u(C_i)`.
///
/// A boundary node drifting off its circle by more than [`BOUNDARY_TOL`]
/// is a [`Error::ModelInconsistency`].
pub fn annulus_experiment<F: MapSpec + Clone>(
    f: &F,
    y0: f64,
    y1: f64,
    d: &DiskSpec,
    eps: f64,
    n_max: usize,
) -> Result<AnnulusReport> {
    check_cylinder(f)?;
    if !(y0 < y1) {
        return Err(Error::invalid("boundary actions must satisfy y0 < y1"));
    }
    if !(eps > 0.0) {
        return Err(Error::contract("eps must be positive"));
    }
    if d.x_box()[1] != (y0, y1) {
        return Err(Error::contract("the disk must span y ∈ [y0, y1]"));
    }
    let ys = [y0, y1];
    let mut mo = seed_mesh(d, f)?;
    let members: [Vec<usize>; 2] = core::array::from_fn(|i| {
        (0..mo.points.len())
            .filter(|&k| mo.points[k].jet.p.x[1] == ys[i])
            .collect()
    });

    let mut full = alloc::vec![c1_distance(&mo)?];
    let mut series: [Vec<C1Distance>; 2] = Default::default();
    let mut residual: [Vec<f64>; 2] = Default::default();
    let mut excursion = 0.0_f64;
    let n_u = d.dims().n_u;
    let tangent = |k: usize| k <= n_u;

    loop {
        for i in 0..2 {
            let alive = members[i]
                .iter()
                .map(|&k| &mo.points[k])
                .filter(|p| p.alive);
            let drift = alive
                .clone()
                .map(|p| (p.jet.p.x[1] - ys[i]).abs())
                .fold(0.0, f64::max);
            if drift > BOUNDARY_TOL {
                return Err(Error::ModelInconsistency {
                    what: String::from("boundary sub-disk left its circle"),
                    residual: drift,
                });
            }
            residual[i].push(drift);
            series[i].push(distance_of(mo.n, alive, &[0], tangent)?);
        }
        for p in mo.alive() {
            let y = p.jet.p.x[1];
            excursion = excursion.max(y0 - y).max(y - y1);
        }
        if mo.n == n_max {
            break;
        }
        mo = super::advance_mesh(mo, f, 1)?;
        full.push(c1_distance(&mo)?);
    }

    let mut tracks = Vec::with_capacity(2);
    for i in 0..2 {
        let values = series[i]
            .iter()
            .zip(&residual[i])
            .map(|(c, r)| c.value().max(*r));
        let k_prime = first_settled(values.collect::<Vec<_>>().into_iter(), eps);
        let circle = CircleRestriction::new(f.clone(), ys[i])?;
        let standalone = find_k(&d.slice(1, ys[i])?, &circle, eps, n_max)?;
        tracks.push(BoundaryTrack {
            y: ys[i],
            points: members[i].len(),
            series: core::mem::take(&mut series[i]),
            residual: core::mem::take(&mut residual[i]),
            k_prime,
            standalone_k: standalone.k,
        });
    }
    let k = first_settled(full.iter().map(C1Distance::value), eps);
    let boundaries: [BoundaryTrack; 2] = match tracks.try_into() {
        Ok(b) => b,
        Err(_) => unreachable!("two boundary circles"),
    };
    Ok(AnnulusReport {
        y0,
        y1,
        full: KSearch {
            eps,
            n_max,
            k,
            series: full,
        },
        boundaries,
        annulus_excursion: excursion.max(0.0),
    })
}
