//! Orbits with tangent frames: exact propagation through the block Jacobian,
//! inclinations `I^x = |v^x|/|v^u|`, `I^s = |v^s|/|v^u|`, stretching of the
//! unstable component, and the closed-form bounds these quantities obey.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{sup, ChartPoint, TangentVector};
use crate::math::{powi, sqrt};
use crate::normalform::{
    a_s_derivative, apply_map, check_point, g_jacobian, jacobian, remainder_jacobian, BoundSet,
    MapSpec, FD_STEP,
};

/// Largest `|u|` tolerated after a step from `{u = 0}`.
pub const STABLE_SLICE_TOL: f64 = 1e-12;

/// A point with a frame of tangent vectors, each kept at unit sup norm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JetState {
    pub p: ChartPoint,
    pub frame: Vec<TangentVector>,
    /// Iterate index.
    pub n: usize,
    /// Per-vector `|v^u_n| / |v^u_{n−1}|` of the last step, before
    /// renormalization. Empty at `n = 0`.
    pub stretch: Vec<f64>,
}

fn normalized(v: &TangentVector, index: usize) -> Result<TangentVector> {
    let norm = v.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateVector { index });
    }
    Ok(v.scaled(1.0 / norm))
}

impl JetState {
    /// Frame vectors are rescaled to unit sup norm; a zero or non-finite
    /// vector is a [`Error::DegenerateVector`].
    pub fn new(p: ChartPoint, frame: Vec<TangentVector>) -> Result<Self> {
        if frame.is_empty() {
            return Err(Error::contract("a jet needs at least one tangent vector"));
        }
        let frame = frame
            .iter()
            .enumerate()
            .map(|(i, v)| normalized(v, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p,
            frame,
            n: 0,
            stretch: Vec::new(),
        })
    }

    /// `(max I^s, max I^x)` over the frame; infinite if some `v^u` vanishes.
    pub fn inclinations(&self) -> (f64, f64) {
        self.frame.iter().fold((0.0_f64, 0.0_f64), |(is, ix), v| {
            (
                is.max(v.inclination_s().unwrap_or(f64::INFINITY)),
                ix.max(v.inclination_x().unwrap_or(f64::INFINITY)),
            )
        })
    }

    pub fn record(&self) -> InclinationRecord {
        let (i_s, i_x) = self.inclinations();
        InclinationRecord {
            n: self.n,
            i_x,
            i_s,
            stretch: self.stretch.iter().copied().reduce(f64::min),
            s_norm: sup(&self.p.s),
            u_norm: sup(&self.p.u),
        }
    }

    fn check_transversal(&self) -> Result<()> {
        match self.frame.iter().position(|v| sup(&v.v_u) == 0.0) {
            Some(index) => Err(Error::DegenerateVector { index }),
            None => Ok(()),
        }
    }
}

/// Inclinations and stretching of a jet at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InclinationRecord {
    pub n: usize,
    /// Max over the frame of `|v^x| / |v^u|`.
    pub i_x: f64,
    /// Max over the frame of `|v^s| / |v^u|`.
    pub i_s: f64,
    /// Min over the frame of the last unnormalized `|v^u|` growth; `None` at
    /// `n = 0`.
    pub stretch: Option<f64>,
    pub s_norm: f64,
    pub u_norm: f64,
}

fn advance_frame(
    j: &JetState,
    image: ChartPoint,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<JetState> {
    let dims_s = j.p.s.len();
    let dims_u = j.p.u.len();
    let mut frame = Vec::with_capacity(j.frame.len());
    let mut stretch = Vec::with_capacity(j.frame.len());
    for (i, v) in j.frame.iter().enumerate() {
        let w = apply(&DVector::from_vec(v.to_vec()));
        let w = TangentVector::new(
            w.rows(0, dims_s).iter().copied().collect(),
            w.rows(dims_s, dims_u).iter().copied().collect(),
            w.rows(dims_s + dims_u, w.len() - dims_s - dims_u)
                .iter()
                .copied()
                .collect(),
        );
        stretch.push(sup(&w.v_u) / sup(&v.v_u));
        frame.push(normalized(&w, i)?);
    }
    Ok(JetState {
        p: image,
        frame,
        n: j.n + 1,
        stretch,
    })
}

fn escaped_if_outside<F: MapSpec + ?Sized>(f: &F, j: &JetState, image: &ChartPoint) -> Result<()> {
    if image.in_ball(f.rho()) {
        Ok(())
    } else {
        Err(Error::Escaped(Box::new(j.clone())))
    }
}

/// Advance the point by `f` and every frame vector by `Df_p`, renormalizing
/// afterwards. An image outside `U` yields [`Error::Escaped`] carrying the
/// last state inside.
pub fn step_jet<F: MapSpec + ?Sized>(f: &F, j: &JetState) -> Result<JetState> {
    check_point(f, &j.p)?;
    j.check_transversal()?;
    let image = apply_map(f, &j.p)?;
    escaped_if_outside(f, j, &image)?;
    let jac = jacobian(f, &j.p, FD_STEP)?;
    advance_frame(j, image, |v| &jac * v)
}

/// Step a jet based on `W^s(M) = {u = 0}` using the reduced Jacobian, whose
/// `u`-row is `(0, A_u + ∂_u r_u, 0)` and `x`-row `(0, ∂_u r_x, ∂_x g)`.
///
/// The image must again have `u = 0` (up to [`STABLE_SLICE_TOL`], then it is
/// reset to exactly zero); otherwise the model violates condition b).
pub fn stable_restricted_step<F: MapSpec + ?Sized>(f: &F, j: &JetState) -> Result<JetState> {
    if sup(&j.p.u) != 0.0 {
        return Err(Error::contract("restricted step needs a point with u = 0"));
    }
    check_point(f, &j.p)?;
    j.check_transversal()?;
    let dims = f.dims();
    let mut image = apply_map(f, &j.p)?;
    let drift = sup(&image.u);
    if drift > STABLE_SLICE_TOL {
        return Err(Error::ModelInconsistency {
            what: alloc::string::String::from("image of a point with u = 0 left the stable slice"),
            residual: drift,
        });
    }
    image.u.iter_mut().for_each(|v| *v = 0.0);
    escaped_if_outside(f, j, &image)?;

    let (rs, ru, rx) = (dims.s_range(), dims.u_range(), dims.x_range());
    let dr = remainder_jacobian(f, &j.p);
    let block = |r: core::ops::Range<usize>, c: core::ops::Range<usize>| -> DMatrix<f64> {
        dr.view((r.start, c.start), (r.len(), c.len())).into_owned()
    };
    let x = &j.p.x;
    let s = DVector::from_column_slice(&j.p.s);
    let ss = f.a_s(x) + block(rs.clone(), rs.clone());
    let su = block(rs.clone(), ru.clone());
    let mut sx = block(rs.clone(), rx.clone());
    for (col, das) in a_s_derivative(f, x).iter().enumerate() {
        let v = das * &s;
        for r in 0..dims.n_s {
            sx[(r, col)] += v[r];
        }
    }
    let uu = f.a_u(x) + block(ru.clone(), ru.clone());
    let xu = block(rx.clone(), ru.clone());
    let xx = g_jacobian(f, x);

    advance_frame(j, image, |v| {
        let vs = v.rows(0, dims.n_s).into_owned();
        let vu = v.rows(dims.n_s, dims.n_u).into_owned();
        let vx = v.rows(dims.n_s + dims.n_u, dims.m).into_owned();
        let ns = &ss * &vs + &su * &vu + &sx * &vx;
        let nu = &uu * &vu;
        let nx = &xu * &vu + &xx * &vx;
        let mut out = DVector::zeros(dims.total());
        out.rows_mut(0, dims.n_s).copy_from(&ns);
        out.rows_mut(dims.n_s, dims.n_u).copy_from(&nu);
        out.rows_mut(dims.n_s + dims.n_u, dims.m).copy_from(&nx);
        out
    })
}

/// Records of a propagated jet.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JetOrbit {
    /// One record per iterate, starting at `n = 0`.
    pub records: Vec<InclinationRecord>,
    /// The last state inside `U`.
    pub last: JetState,
    /// Whether the orbit left `U` before the requested number of steps.
    pub escaped: bool,
}

/// Iterate [`step_jet`] up to `steps` times. Leaving `U` ends the series
/// (censoring); other errors are returned.
pub fn propagate<F: MapSpec + ?Sized>(f: &F, start: JetState, steps: usize) -> Result<JetOrbit> {
    let mut records = alloc::vec![start.record()];
    let mut cur = start;
    for _ in 0..steps {
        match step_jet(f, &cur) {
            Ok(next) => {
                records.push(next.record());
                cur = next;
            }
            Err(Error::Escaped(_)) => {
                return Ok(JetOrbit {
                    records,
                    last: cur,
                    escaped: true,
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(JetOrbit {
        records,
        last: cur,
        escaped: false,
    })
}

/// Closed-form inclination bounds on `W^s(M)` after `n` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InclinationBounds {
    pub bound_x: f64,
    pub bound_s: f64,
    /// `n < 2`: `bound_s` is just `I^s_0`, not a proven bound.
    pub pre_asymptotic: bool,
}

fn require_lk(b: &BoundSet) -> Result<()> {
    if !(b.lk1_holds && b.lk2_holds) {
        return Err(Error::contract("bounds need 0 < λ + k < 1 and λ⁻¹ − k > 1"));
    }
    Ok(())
}

/// `bound_x = (k/(λ⁻¹−k))ⁿ I0_x + C s0 n (λ+k)ⁿ⁻¹` and, for `n ≥ 2`,
/// `bound_s = ((λ+k)/(λ⁻¹−k))ⁿ I0_s + (λ+k)ⁿ⁻² n (C s0 + I0_x)`. For
/// `n < 2`, `bound_s = I0_s` and the result is flagged pre-asymptotic.
pub fn theoretical_inclination_bounds(
    b: &BoundSet,
    n: usize,
    i0_x: f64,
    i0_s: f64,
    s0: f64,
) -> Result<InclinationBounds> {
    require_lk(b)?;
    let (lk, ex) = (b.contraction(), b.expansion());
    let nf = n as f64;
    let ni = n as i32;
    let tail_x = if n == 0 {
        0.0
    } else {
        b.c * s0 * nf * powi(lk, ni - 1)
    };
    let bound_x = powi(b.k / ex, ni) * i0_x + tail_x;
    let (bound_s, pre_asymptotic) = if n < 2 {
        (i0_s, true)
    } else {
        (
            powi(lk / ex, ni) * i0_s + powi(lk, ni - 2) * nf * (b.c * s0 + i0_x),
            false,
        )
    };
    Ok(InclinationBounds {
        bound_x,
        bound_s,
        pre_asymptotic,
    })
}

/// `(λ + k)ⁿ s0`.
pub fn sn_contraction_bound(b: &BoundSet, n: usize, s0: f64) -> f64 {
    powi(b.contraction(), n as i32) * s0
}

/// Lower bounds on the per-step growth of `|v^u|`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StretchBound {
    /// `λ⁻¹ − k − kε − (k + Cρ)ε`.
    pub bound: f64,
    /// `λ⁻¹ − 2k`.
    pub floor: f64,
}

pub fn stretch_lower_bound(b: &BoundSet, eps: f64) -> StretchBound {
    StretchBound {
        bound: b.expansion() - b.k * eps - (b.k + b.c * b.rho) * eps,
        floor: 1.0 / b.lambda - 2.0 * b.k,
    }
}

/// Both sides of
/// `√((|v'^s|² + |v'^u|² + |v'^x|²) / (|v^s|² + |v^u|² + |v^x|²))
///  = (|v'^u|/|v^u|) √((1 + I'^s² + I'^x²) / (1 + I^s² + I^x²))`,
/// with each block measured in the sup norm.
pub fn ratio_identity_check(v_prev: &TangentVector, v_next: &TangentVector) -> Result<(f64, f64)> {
    let parts = |v: &TangentVector, index: usize| -> Result<(f64, f64, f64)> {
        let u = sup(&v.v_u);
        if u == 0.0 {
            return Err(Error::DegenerateVector { index });
        }
        Ok((sup(&v.v_s), u, sup(&v.v_x)))
    };
    let (s0, u0, x0) = parts(v_prev, 0)?;
    let (s1, u1, x1) = parts(v_next, 1)?;
    let lhs = sqrt((s1 * s1 + u1 * u1 + x1 * x1) / (s0 * s0 + u0 * u0 + x0 * x0));
    let (is0, ix0) = (s0 / u0, x0 / u0);
    let (is1, ix1) = (s1 / u1, x1 / u1);
    let rhs = (u1 / u0) * sqrt((1.0 + is1 * is1 + ix1 * ix1) / (1.0 + is0 * is0 + ix0 * ix0));
    Ok((lhs, rhs))
}
