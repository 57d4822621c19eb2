//! Split coordinates `(s, u, x)`, their tangent vectors and the two norms used
//! throughout: the sup norm on vectors and the maximum absolute row sum on
//! matrices (the operator norm induced by the sup norm).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math::{PI, TAU};

/// Stable, unstable and manifold dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dimensions {
    pub n_s: usize,
    pub n_u: usize,
    pub m: usize,
}

impl Dimensions {
    pub fn new(n_s: usize, n_u: usize, m: usize) -> Result<Self> {
        if n_s == 0 || n_u == 0 || m == 0 {
            return Err(Error::invalid("n_s, n_u and m must all be at least 1"));
        }
        Ok(Self { n_s, n_u, m })
    }

    /// Ambient dimension `n = n_s + n_u + m`.
    pub fn total(&self) -> usize {
        self.n_s + self.n_u + self.m
    }

    pub fn s_range(&self) -> core::ops::Range<usize> {
        0..self.n_s
    }

    pub fn u_range(&self) -> core::ops::Range<usize> {
        self.n_s..self.n_s + self.n_u
    }

    pub fn x_range(&self) -> core::ops::Range<usize> {
        self.n_s + self.n_u..self.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CoordKind {
    Linear,
    /// Coordinate on the circle `ℝ mod 2π`.
    Angle,
}

/// Per-coordinate kind of the manifold chart, realizing `M` as `ℝ^a × 𝕋^b`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChartTopology {
    kinds: Vec<CoordKind>,
}

impl ChartTopology {
    pub fn new(kinds: Vec<CoordKind>) -> Self {
        Self { kinds }
    }

    pub fn linear(m: usize) -> Self {
        Self::new(vec![CoordKind::Linear; m])
    }

    pub fn angles(m: usize) -> Self {
        Self::new(vec![CoordKind::Angle; m])
    }

    pub fn kinds(&self) -> &[CoordKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn is_angle(&self, i: usize) -> bool {
        matches!(self.kinds.get(i), Some(CoordKind::Angle))
    }

    /// Reduce every angle coordinate into `[0, 2π)`.
    pub fn canonicalize(&self, x: &mut [f64]) {
        for (xi, kind) in x.iter_mut().zip(&self.kinds) {
            if *kind == CoordKind::Angle {
                *xi = canonical_angle(*xi);
            }
        }
    }

    /// Difference `a - b` per coordinate, with angle differences wrapped into
    /// `(-π, π]`.
    pub fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.kinds)
            .map(|((ai, bi), kind)| match kind {
                CoordKind::Linear => ai - bi,
                CoordKind::Angle => wrap_difference(ai - bi),
            })
            .collect()
    }
}

/// Representative of `a mod 2π` in `[0, 2π)`.
pub fn canonical_angle(a: f64) -> f64 {
    crate::math::rem_euclid(a, TAU)
}

/// Representative of `d mod 2π` in `(-π, π]`.
pub fn wrap_difference(d: f64) -> f64 {
    let r = canonical_angle(d);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// A point `(s, u, x)` of the neighborhood `U = B_ρ × M`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChartPoint {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
}

impl ChartPoint {
    pub fn new(s: Vec<f64>, u: Vec<f64>, x: Vec<f64>) -> Self {
        Self { s, u, x }
    }

    /// The point `(0, 0, x)` of `M`.
    pub fn on_manifold(dims: Dimensions, x: Vec<f64>) -> Self {
        Self::new(vec![0.0; dims.n_s], vec![0.0; dims.n_u], x)
    }

    pub fn from_slice(dims: Dimensions, z: &[f64]) -> Self {
        Self::new(
            z[dims.s_range()].to_vec(),
            z[dims.u_range()].to_vec(),
            z[dims.x_range()].to_vec(),
        )
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.s.len() + self.u.len() + self.x.len());
        z.extend_from_slice(&self.s);
        z.extend_from_slice(&self.u);
        z.extend_from_slice(&self.x);
        z
    }

    pub fn dims_match(&self, dims: Dimensions) -> bool {
        self.s.len() == dims.n_s && self.u.len() == dims.n_u && self.x.len() == dims.m
    }

    /// Sup norm of the concatenated normal part `(s, u)`.
    pub fn normal_norm(&self) -> f64 {
        sup(&self.s).max(sup(&self.u))
    }

    /// Membership in `U`: `|(s, u)| < ρ`.
    pub fn in_ball(&self, rho: f64) -> bool {
        self.normal_norm() < rho
    }
}

/// Tangent vector `(v_s, v_u, v_x)` at a chart point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TangentVector {
    pub v_s: Vec<f64>,
    pub v_u: Vec<f64>,
    pub v_x: Vec<f64>,
}

impl TangentVector {
    pub fn new(v_s: Vec<f64>, v_u: Vec<f64>, v_x: Vec<f64>) -> Self {
        Self { v_s, v_u, v_x }
    }

    pub fn from_slice(dims: Dimensions, z: &[f64]) -> Self {
        Self::new(
            z[dims.s_range()].to_vec(),
            z[dims.u_range()].to_vec(),
            z[dims.x_range()].to_vec(),
        )
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.v_s.len() + self.v_u.len() + self.v_x.len());
        z.extend_from_slice(&self.v_s);
        z.extend_from_slice(&self.v_u);
        z.extend_from_slice(&self.v_x);
        z
    }

    /// Sup norm of the concatenated components.
    pub fn norm(&self) -> f64 {
        sup(&self.v_s).max(sup(&self.v_u)).max(sup(&self.v_x))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &[f64]| v.iter().map(|c| c * factor).collect::<Vec<_>>();
        Self::new(scale(&self.v_s), scale(&self.v_u), scale(&self.v_x))
    }

    /// `I^s = |v_s| / |v_u|`, `None` when `v_u` vanishes.
    pub fn inclination_s(&self) -> Option<f64> {
        let vu = sup(&self.v_u);
        (vu > 0.0).then(|| sup(&self.v_s) / vu)
    }

    /// `I^x = |v_x| / |v_u|`, `None` when `v_u` vanishes.
    pub fn inclination_x(&self) -> Option<f64> {
        let vu = sup(&self.v_u);
        (vu > 0.0).then(|| sup(&self.v_x) / vu)
    }
}

// Sup norm without the emptiness contract; empty blocks contribute 0.
pub(crate) fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()))
}

/// `max_i |v_i|`.
pub fn vec_sup_norm(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::contract("sup norm of an empty vector"));
    }
    Ok(sup(v))
}

/// `sup_i Σ_j |a_ij|`, the maximum absolute row sum.
pub fn mat_row_sup_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::contract("row-sum norm of an empty matrix"));
    }
    Ok(row_sum_norm(a))
}

pub(crate) fn row_sum_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|c| c.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Sup over coordinates of the coordinate distance, using the circle
/// distance `min(d, 2π - d)` on angle coordinates.
pub fn manifold_distance(x1: &[f64], x2: &[f64], topo: &ChartTopology) -> Result<f64> {
    if x1.len() != x2.len() || x1.len() != topo.len() {
        return Err(Error::contract("manifold coordinates of mismatched length"));
    }
    Ok(sup(&topo.difference(x1, x2)))
}
