// Hyperbolic normal directions over a near-integrable twist map of the
// cylinder 𝕋×ℝ whose restriction to the annulus 𝕋×[y0, y1] has invariant
// boundary circles.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ChartTopology, CoordKind, Dimensions};
use crate::math::{cos, sin, TAU};
use crate::normalform::{MapSpec, Remainder};
use crate::sampling::linspace;

/// Rotation number profile `ω(y)` of the twist map.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Frequency {
    /// `ω(y) = scale·y`.
    Linear { scale: f64 },
    /// `ω(y) = linear·y + quadratic·y²`.
    Quadratic { linear: f64, quadratic: f64 },
}

impl Default for Frequency {
    /// `ω(y) = 2πy`, the time-2π map of `θ̇ = I`.
    fn default() -> Self {
        Frequency::Linear { scale: TAU }
    }
}

impl Frequency {
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            Frequency::Linear { scale } => scale * y,
            Frequency::Quadratic { linear, quadratic } => linear * y + quadratic * y * y,
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match *self {
            Frequency::Linear { scale } => scale,
            Frequency::Quadratic { linear, quadratic } => linear + 2.0 * quadratic * y,
        }
    }

    pub fn second_derivative(&self, _y: f64) -> f64 {
        match *self {
            Frequency::Linear { .. } => 0.0,
            Frequency::Quadratic { quadratic, .. } => 2.0 * quadratic,
        }
    }
}

/// `f(s, u, θ, y) = (λ_s s, λ_u u, g(θ, y))` with
/// `g(θ, y) = (θ + ω(y), y) + ε b(y) (sin θ, cos θ)` and
/// `b(y) = (y − y0)(y1 − y)`, so the circles `y = y0`, `y = y1` are invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistAnnulus {
    eps_twist: f64,
    y0: f64,
    y1: f64,
    lambda_s: f64,
    lambda_u: f64,
    omega: Frequency,
    rho: f64,
    topo: ChartTopology,
}

impl TwistAnnulus {
    pub fn boundary(&self) -> (f64, f64) {
        (self.y0, self.y1)
    }

    pub fn eps_twist(&self) -> f64 {
        self.eps_twist
    }

    pub fn frequency(&self) -> Frequency {
        self.omega
    }

    /// Rotation angle `ω(y_i)` of the boundary circle `i ∈ {0, 1}`.
    pub fn boundary_rotation(&self, i: usize) -> f64 {
        self.omega.value(if i == 0 { self.y0 } else { self.y1 })
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid("rho must be positive"));
        }
        self.rho = rho;
        Ok(self)
    }

    fn b(&self, y: f64) -> f64 {
        (y - self.y0) * (self.y1 - y)
    }

    fn db(&self, y: f64) -> f64 {
        self.y1 + self.y0 - 2.0 * y
    }
}

impl MapSpec for TwistAnnulus {
    fn dims(&self) -> Dimensions {
        Dimensions {
            n_s: 1,
            n_u: 1,
            m: 2,
        }
    }

    fn topology(&self) -> &ChartTopology {
        &self.topo
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn lambda(&self) -> f64 {
        self.lambda_s.max(1.0 / self.lambda_u)
    }

    fn x_domain(&self) -> Vec<(f64, f64)> {
        alloc::vec![(0.0, TAU), (self.y0, self.y1)]
    }

    fn a_s(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.lambda_s)
    }

    fn a_u(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.lambda_u)
    }

    fn g(&self, x: &[f64]) -> Vec<f64> {
        let (theta, y) = (x[0], x[1]);
        let eb = self.eps_twist * self.b(y);
        alloc::vec![
            theta + self.omega.value(y) + eb * sin(theta),
            y + eb * cos(theta)
        ]
    }

    fn remainder(&self, _p: &ChartPoint) -> Remainder {
        Remainder::zero(self.dims())
    }

    fn d_a_s(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(alloc::vec![DMatrix::zeros(1, 1); 2])
    }

    fn d_a_u(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(alloc::vec![DMatrix::zeros(1, 1); 2])
    }

    fn dg(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let (theta, y) = (x[0], x[1]);
        let e = self.eps_twist;
        let (b, db) = (self.b(y), self.db(y));
        let (st, ct) = (sin(theta), cos(theta));
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0 + e * b * ct,
                self.omega.derivative(y) + e * db * st,
                -e * b * st,
                1.0 + e * db * ct,
            ],
        ))
    }

    fn d2g(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let (theta, y) = (x[0], x[1]);
        let e = self.eps_twist;
        let (b, db, d2b) = (self.b(y), self.db(y), -2.0);
        let (st, ct) = (sin(theta), cos(theta));
        let h0 = DMatrix::from_row_slice(
            2,
            2,
            &[
                -e * b * st,
                e * db * ct,
                e * db * ct,
                self.omega.second_derivative(y) + e * d2b * st,
            ],
        );
        let h1 = DMatrix::from_row_slice(
            2,
            2,
            &[-e * b * ct, -e * db * st, -e * db * st, e * d2b * ct],
        );
        Some(alloc::vec![h0, h1])
    }

    fn dr(&self, _p: &ChartPoint) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(4, 4))
    }

    fn d2r(&self, _p: &ChartPoint) -> Option<Vec<DMatrix<f64>>> {
        Some(alloc::vec![DMatrix::zeros(4, 4); 4])
    }
}

/// Build the twist-annulus model on `B_ρ × (𝕋 × ℝ)` with `ρ = 0.5`.
///
/// Requires `y0 < y1`, `|ε|(y1 − y0) < 1` (so the open annulus is mapped into
/// itself) and `ω'` of one strict sign on a grid of `[y0, y1]`.
pub fn make_twist_annulus(
    eps_twist: f64,
    y0: f64,
    y1: f64,
    lambda_s: f64,
    lambda_u: f64,
    omega: Frequency,
) -> Result<TwistAnnulus> {
    if !(y0 < y1) || !y0.is_finite() || !y1.is_finite() {
        return Err(Error::invalid(format!(
            "boundary actions must satisfy y0 < y1 (got {y0}, {y1})"
        )));
    }
    if !(lambda_s > 0.0 && lambda_s < 1.0) || !(lambda_u > 1.0 && lambda_u.is_finite()) {
        return Err(Error::invalid("need 0 < lambda_s < 1 < lambda_u"));
    }
    if !eps_twist.is_finite() || eps_twist.abs() * (y1 - y0) >= 1.0 {
        return Err(Error::invalid(format!(
            "|eps_twist|·(y1 − y0) = {} must be below 1",
            eps_twist.abs() * (y1 - y0)
        )));
    }
    let slopes: Vec<f64> = linspace(y0, y1, 257)
        .into_iter()
        .map(|y| omega.derivative(y))
        .collect();
    let positive = slopes.iter().all(|d| *d > 0.0);
    let negative = slopes.iter().all(|d| *d < 0.0);
    if !(positive || negative) {
        return Err(Error::invalid(
            "twist condition fails: ω' vanishes or changes sign on [y0, y1]",
        ));
    }
    Ok(TwistAnnulus {
        eps_twist,
        y0,
        y1,
        lambda_s,
        lambda_u,
        omega,
        rho: 0.5,
        topo: ChartTopology::new(alloc::vec![CoordKind::Angle, CoordKind::Linear]),
    })
}
