// The three degree of freedom near-integrable Hamiltonian
//   H = ½p² + ½I² + J + ε(cos q − 1) + ε f(θ, φ) + μ (sin q)^α g(θ, φ)
// with a symmetric kick-drift-kick splitting integrator.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{canonical_angle, wrap_difference};
use crate::math::{cos, floor, ln, log10, sin, sqrt, TAU};

/// One Fourier mode `a cos(k1 θ + k2 φ) + b sin(k1 θ + k2 φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(from = "(i32, i32, f64, f64)", into = "(i32, i32, f64, f64)")
)]
pub struct FourierTerm {
    pub k1: i32,
    pub k2: i32,
    pub cos: f64,
    pub sin: f64,
}

impl From<(i32, i32, f64, f64)> for FourierTerm {
    fn from((k1, k2, cos, sin): (i32, i32, f64, f64)) -> Self {
        Self { k1, k2, cos, sin }
    }
}

impl From<FourierTerm> for (i32, i32, f64, f64) {
    fn from(t: FourierTerm) -> Self {
        (t.k1, t.k2, t.cos, t.sin)
    }
}

/// A finite Fourier series in `(θ, φ)`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct FourierTable {
    pub terms: Vec<FourierTerm>,
}

impl FourierTable {
    pub fn new(terms: Vec<FourierTerm>) -> Self {
        Self { terms }
    }

    /// `cos θ + cos φ`.
    pub fn default_f() -> Self {
        Self::new(alloc::vec![
            (1, 0, 1.0, 0.0).into(),
            (0, 1, 1.0, 0.0).into()
        ])
    }

    /// `cos θ + cos(θ − φ)`.
    pub fn default_g() -> Self {
        Self::new(alloc::vec![
            (1, 0, 1.0, 0.0).into(),
            (1, -1, 1.0, 0.0).into()
        ])
    }

    /// `(value, ∂_θ, ∂_φ)` at `(θ, φ)`.
    pub fn eval(&self, theta: f64, phi: f64) -> (f64, f64, f64) {
        self.terms.iter().fold((0.0, 0.0, 0.0), |(v, dt, dp), t| {
            let arg = t.k1 as f64 * theta + t.k2 as f64 * phi;
            let (sa, ca) = (sin(arg), cos(arg));
            let slope = -t.cos * sa + t.sin * ca;
            (
                v + t.cos * ca + t.sin * sa,
                dt + t.k1 as f64 * slope,
                dp + t.k2 as f64 * slope,
            )
        })
    }
}

/// Logarithm used in the contact order `α(ν, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LogBase {
    #[default]
    Natural,
    /// Experimental.
    Ten,
}

/// `α(ν, σ) = 2⌊log(ν)/(4σ) + 1⌋` with the natural logarithm.
pub fn alpha(nu: u64, sigma: f64) -> Result<u32> {
    alpha_with_base(nu, sigma, LogBase::Natural)
}

/// [`alpha`] with a selectable logarithm. Every `ν ≥ 1` is admissible since
/// `α(1, σ) = 2` for all `σ > 0`.
pub fn alpha_with_base(nu: u64, sigma: f64, base: LogBase) -> Result<u32> {
    if nu == 0 {
        return Err(Error::invalid("nu must be at least 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma = {sigma} must be positive")));
    }
    let log = match base {
        LogBase::Natural => ln(nu as f64),
        LogBase::Ten => log10(nu as f64),
    };
    let half = floor(log / (4.0 * sigma) + 1.0);
    if !(1.0..1e6).contains(&half) {
        return Err(Error::invalid(format!(
            "contact order 2·{half} is out of range"
        )));
    }
    Ok(2 * half as u32)
}

/// Parameters of the Hamiltonian and of its integrator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HamiltonianSpec {
    eps: f64,
    mu: f64,
    nu: u64,
    sigma: f64,
    log_base: LogBase,
    alpha: u32,
    f: FourierTable,
    g: FourierTable,
    energy: f64,
}

impl HamiltonianSpec {
    /// Requires `0 ≤ μ ≤ ε`, `ν ≥ 1`, `σ > 0`. Default Fourier tables and
    /// natural logarithm.
    pub fn new(eps: f64, mu: f64, nu: u64, sigma: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps = {eps} must be nonnegative")));
        }
        if !(mu >= 0.0 && mu <= eps) {
            return Err(Error::invalid(format!(
                "mu = {mu} must lie in [0, eps = {eps}]"
            )));
        }
        Ok(Self {
            eps,
            mu,
            nu,
            sigma,
            log_base: LogBase::Natural,
            alpha: alpha(nu, sigma)?,
            f: FourierTable::default_f(),
            g: FourierTable::default_g(),
            energy: 0.0,
        })
    }

    pub fn with_log_base(mut self, base: LogBase) -> Result<Self> {
        self.alpha = alpha_with_base(self.nu, self.sigma, base)?;
        self.log_base = base;
        Ok(self)
    }

    pub fn with_tables(mut self, f: FourierTable, g: FourierTable) -> Self {
        self.f = f;
        self.g = g;
        self
    }

    /// Records the energy level `h` the experiment refers to.
    pub fn with_energy(mut self, h: f64) -> Self {
        self.energy = h;
        self
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn nu(&self) -> u64 {
        self.nu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn alpha(&self) -> u32 {
        self.alpha
    }
    pub fn log_base(&self) -> LogBase {
        self.log_base
    }
    pub fn f(&self) -> &FourierTable {
        &self.f
    }
    pub fn g(&self) -> &FourierTable {
        &self.g
    }
    pub fn energy_level(&self) -> f64 {
        self.energy
    }

    /// Soft diagnostics: `μ > ε/10` is allowed but far from `μ ≪ ε`.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.mu > self.eps / 10.0 {
            out.push(format!(
                "mu = {} exceeds eps/10 = {}",
                self.mu,
                self.eps / 10.0
            ));
        }
        if self.log_base == LogBase::Ten {
            out.push(String::from("base-10 logarithm in alpha is experimental"));
        }
        out
    }
}

/// Phase point `(p, q, I, θ, J, φ)`; `q`, `θ`, `φ` are angles.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowState {
    pub p: f64,
    pub q: f64,
    pub i: f64,
    pub theta: f64,
    pub j: f64,
    pub phi: f64,
}

impl FlowState {
    /// Angles are reduced to `[0, 2π)`.
    pub fn new(p: f64, q: f64, i: f64, theta: f64, j: f64, phi: f64) -> Self {
        Self {
            p,
            q: canonical_angle(q),
            i,
            theta: canonical_angle(theta),
            j,
            phi: canonical_angle(phi),
        }
    }

    /// `max(|p|, |q|)` with `q` measured in `(−π, π]`: the distance to the
    /// cylinder `p = q = 0`.
    pub fn cylinder_residual(&self) -> f64 {
        self.p.abs().max(wrap_difference(self.q).abs())
    }

    fn canonicalized(mut self) -> Self {
        self.q = canonical_angle(self.q);
        self.theta = canonical_angle(self.theta);
        self.phi = canonical_angle(self.phi);
        self
    }
}

fn int_pow(x: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * x)
}

/// `H(state)`.
pub fn energy(hs: &HamiltonianSpec, st: &FlowState) -> f64 {
    let (fv, _, _) = hs.f.eval(st.theta, st.phi);
    let (gv, _, _) = hs.g.eval(st.theta, st.phi);
    0.5 * st.p * st.p
        + 0.5 * st.i * st.i
        + st.j
        + hs.eps * (cos(st.q) - 1.0)
        + hs.eps * fv
        + hs.mu * int_pow(sin(st.q), hs.alpha) * gv
}

// Momentum rates −∂V/∂(q, θ, φ) of the potential part.
fn forces(hs: &HamiltonianSpec, st: &FlowState) -> (f64, f64, f64) {
    let (_, f_t, f_p) = hs.f.eval(st.theta, st.phi);
    let (gv, g_t, g_p) = hs.g.eval(st.theta, st.phi);
    let sq = sin(st.q);
    let pow_a1 = int_pow(sq, hs.alpha - 1);
    let pow_a = pow_a1 * sq;
    let dp = hs.eps * sq - hs.mu * hs.alpha as f64 * pow_a1 * cos(st.q) * gv;
    let di = -hs.eps * f_t - hs.mu * pow_a * g_t;
    let dj = -hs.eps * f_p - hs.mu * pow_a * g_p;
    (dp, di, dj)
}

/// Hamilton's equations. The returned value holds the time derivatives
/// `(ṗ, q̇, İ, θ̇, J̇, φ̇)` in the corresponding fields.
pub fn ham_vector_field(hs: &HamiltonianSpec, st: &FlowState) -> FlowState {
    let (dp, di, dj) = forces(hs, st);
    FlowState {
        p: dp,
        q: st.p,
        i: di,
        theta: st.i,
        j: dj,
        phi: 1.0,
    }
}

fn kick(hs: &HamiltonianSpec, st: &mut FlowState, h: f64) {
    let (dp, di, dj) = forces(hs, st);
    st.p += h * dp;
    st.i += h * di;
    st.j += h * dj;
}

/// One kick-drift-kick step of signed length `h`. Negative `h` runs the
/// integrator backwards and exactly inverts a forward step up to roundoff.
pub fn flow_step(hs: &HamiltonianSpec, st: &FlowState, h: f64) -> FlowState {
    let mut next = *st;
    kick(hs, &mut next, 0.5 * h);
    next.q += h * next.p;
    next.theta += h * next.i;
    next.phi += h;
    kick(hs, &mut next, 0.5 * h);
    next.canonicalized()
}

/// [`flow_step`] restricted to positive steps.
pub fn symplectic_step(hs: &HamiltonianSpec, st: &FlowState, h: f64) -> Result<FlowState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::contract("integration step must be positive"));
    }
    Ok(flow_step(hs, st, h))
}

/// Result of one return to the section `φ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoincareReturn {
    pub state: FlowState,
    /// `H(image) − H(start)`.
    pub energy_drift: f64,
    /// Number of integrator steps; their common length is `2π/steps`.
    pub steps: usize,
}

/// First return to `φ = 0`, which happens at time exactly `2π` since
/// `φ̇ = 1`. The step is the largest `2π/N ≤ h`.
pub fn poincare_map(hs: &HamiltonianSpec, st: &FlowState, h: f64) -> Result<PoincareReturn> {
    if st.phi != 0.0 {
        return Err(Error::contract(
            "Poincaré map needs a state on the section phi = 0",
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::contract("integration step must be positive"));
    }
    let steps = libm::ceil(TAU / h).max(1.0) as usize;
    let dt = TAU / steps as f64;
    let mut cur = *st;
    for _ in 0..steps {
        cur = flow_step(hs, &cur, dt);
    }
    cur.phi = 0.0;
    Ok(PoincareReturn {
        energy_drift: energy(hs, &cur) - energy(hs, st),
        state: cur,
        steps,
    })
}

/// Eigencoordinates `s = (q − p/√ε)/2`, `u = (q + p/√ε)/2` of the linearized
/// saddle at `p = q = 0`, with `q` taken in `(−π, π]`.
pub fn pendulum_local_coords(hs: &HamiltonianSpec, st: &FlowState) -> Result<(f64, f64)> {
    let root = saddle_rate(hs)?;
    let q = wrap_difference(st.q);
    Ok((0.5 * (q - st.p / root), 0.5 * (q + st.p / root)))
}

/// Inverse of [`pendulum_local_coords`]: `(p, q) = (√ε (u − s), s + u)`.
pub fn pendulum_from_local(hs: &HamiltonianSpec, s: f64, u: f64) -> Result<(f64, f64)> {
    let root = saddle_rate(hs)?;
    Ok((root * (u - s), s + u))
}

fn saddle_rate(hs: &HamiltonianSpec) -> Result<f64> {
    if hs.eps <= 0.0 {
        return Err(Error::invalid("local saddle coordinates need eps > 0"));
    }
    Ok(sqrt(hs.eps))
}

/// Least-squares growth rates of `ln|s|` and `ln|u|` along integrated orbits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SaddleFit {
    /// Fitted rate of `s`; close to `−√ε`.
    pub stable: f64,
    /// Fitted rate of `u`; close to `√ε`.
    pub unstable: f64,
    /// `√ε`.
    pub expected: f64,
}

impl SaddleFit {
    /// Largest relative deviation of the two fitted rates from `∓√ε`.
    pub fn relative_error(&self) -> f64 {
        let e = self.expected;
        ((self.stable + e).abs() / e).max((self.unstable - e).abs() / e)
    }
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let var: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    cov / var
}

/// Fit the saddle exponents: one orbit seeded at `s = amplitude, u = 0`,
/// one at `s = 0, u = amplitude`, both with `I = θ = J = φ = 0`, integrated
/// over `[0, t_max]` with step `h`.
pub fn fit_saddle_exponents(
    hs: &HamiltonianSpec,
    amplitude: f64,
    t_max: f64,
    h: f64,
) -> Result<SaddleFit> {
    let root = saddle_rate(hs)?;
    if !(amplitude > 0.0) || !(t_max > 0.0) || !(h > 0.0 && h < t_max) {
        return Err(Error::contract("need amplitude > 0 and 0 < h < t_max"));
    }
    let steps = libm::ceil(t_max / h) as usize;
    let dt = t_max / steps as f64;
    let run = |s0: f64, u0: f64, pick_u: bool| -> Result<f64> {
        let (p, q) = pendulum_from_local(hs, s0, u0)?;
        let mut st = FlowState::new(p, q, 0.0, 0.0, 0.0, 0.0);
        let mut ts = Vec::with_capacity(steps + 1);
        let mut ys = Vec::with_capacity(steps + 1);
        for n in 0..=steps {
            if n > 0 {
                st = flow_step(hs, &st, dt);
            }
            let (s, u) = pendulum_local_coords(hs, &st)?;
            let v = if pick_u { u } else { s };
            ts.push(n as f64 * dt);
            ys.push(ln(v.abs()));
        }
        Ok(slope(&ts, &ys))
    };
    Ok(SaddleFit {
        stable: run(amplitude, 0.0, false)?,
        unstable: run(0.0, amplitude, true)?,
        expected: root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec() -> HamiltonianSpec {
        HamiltonianSpec::new(0.01, 0.001, 60, 1.0).unwrap()
    }

    #[test]
    fn contact_order_examples() {
        assert_eq!(alpha(3, 1.0).unwrap(), 2);
        assert_eq!(alpha(3, 100.0).unwrap(), 2);
        assert_eq!(alpha(1, 1.0).unwrap(), 2);
        // e⁸ ≈ 2980.96 straddles the jump from 4 to 6
        assert_eq!(alpha(2981, 1.0).unwrap(), 6);
        assert_eq!(alpha(2980, 1.0).unwrap(), 4);
        assert_eq!(alpha(60, 1.0).unwrap(), 4);
        assert!(alpha(0, 1.0).is_err());
        assert!(alpha(3, 0.0).is_err());
        assert_eq!(alpha_with_base(10_000, 1.0, LogBase::Ten).unwrap(), 4);
    }

    #[test]
    fn spec_validation() {
        assert!(HamiltonianSpec::new(0.01, 0.02, 60, 1.0).is_err());
        assert!(HamiltonianSpec::new(-0.01, 0.0, 60, 1.0).is_err());
        assert!(spec().warnings().is_empty());
        assert_eq!(
            HamiltonianSpec::new(0.01, 0.005, 60, 1.0)
                .unwrap()
                .warnings()
                .len(),
            1
        );
    }

    #[test]
    fn cylinder_is_a_rest_set_of_the_normal_motion() {
        let st = FlowState::new(0.0, 0.0, 0.4, 1.0, 0.0, 2.0);
        let v = ham_vector_field(&spec(), &st);
        assert_eq!((v.p, v.q, v.phi), (0.0, 0.0, 1.0));
    }

    #[test]
    fn unperturbed_flow_is_free_rotation() {
        let hs = HamiltonianSpec::new(0.0, 0.0, 60, 1.0).unwrap();
        let st = FlowState::new(0.0, 0.0, 0.3, 1.0, 0.5, 0.0);
        let v = ham_vector_field(&hs, &st);
        assert_eq!((v.i, v.j, v.theta), (0.0, 0.0, 0.3));
        let next = symplectic_step(&hs, &st, 1e-3).unwrap();
        assert_eq!(next.i, 0.3);
        assert_eq!(next.j, 0.5);
        assert_abs_diff_eq!(next.theta, 1.0003, epsilon = 1e-15);
    }

    #[test]
    fn vector_field_matches_energy_gradient() {
        let hs = spec();
        let st = FlowState::new(0.2, 0.7, 0.3, 1.1, 0.0, 2.3);
        let v = ham_vector_field(&hs, &st);
        let h = 1e-6;
        let d = |shift: fn(&mut FlowState, f64)| {
            let (mut plus, mut minus) = (st, st);
            shift(&mut plus, h);
            shift(&mut minus, -h);
            (energy(&hs, &plus) - energy(&hs, &minus)) / (2.0 * h)
        };
        assert_abs_diff_eq!(v.p, -d(|s, h| s.q += h), epsilon = 1e-9);
        assert_abs_diff_eq!(v.q, d(|s, h| s.p += h), epsilon = 1e-9);
        assert_abs_diff_eq!(v.i, -d(|s, h| s.theta += h), epsilon = 1e-9);
        assert_abs_diff_eq!(v.theta, d(|s, h| s.i += h), epsilon = 1e-9);
        assert_abs_diff_eq!(v.j, -d(|s, h| s.phi += h), epsilon = 1e-9);
    }

    #[test]
    fn backward_step_inverts_forward_step() {
        let hs = spec();
        let st = FlowState::new(0.1, 0.4, 0.3, 2.0, 0.0, 1.0);
        let back = flow_step(&hs, &flow_step(&hs, &st, 1e-2), -1e-2);
        assert_abs_diff_eq!(back.p, st.p, epsilon = 1e-14);
        assert_abs_diff_eq!(back.q, st.q, epsilon = 1e-14);
        assert_abs_diff_eq!(back.i, st.i, epsilon = 1e-14);
        assert_abs_diff_eq!(back.theta, st.theta, epsilon = 1e-14);
        assert!(symplectic_step(&hs, &st, -1e-2).is_err());
    }

    #[test]
    fn local_coordinates_round_trip() {
        let hs = spec();
        let (s, u) =
            pendulum_local_coords(&hs, &FlowState::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u, 0.5, epsilon = 1e-15);
        let (p, q) = pendulum_from_local(&hs, s, u).unwrap();
        assert_abs_diff_eq!(p, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);
        let flat = HamiltonianSpec::new(0.0, 0.0, 60, 1.0).unwrap();
        assert!(
            pendulum_local_coords(&flat, &FlowState::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)).is_err()
        );
    }

    #[test]
    fn poincare_map_needs_the_section() {
        let hs = spec();
        let st = FlowState::new(0.0, 0.0, 0.3, 0.0, 0.0, 1.0);
        assert!(poincare_map(&hs, &st, 1e-2).is_err());
        let ret = poincare_map(&hs, &FlowState::new(0.0, 0.0, 0.3, 0.0, 0.0, 0.0), 1e-2).unwrap();
        assert_eq!(ret.state.phi, 0.0);
        assert_eq!(ret.steps, 629);
        assert_eq!(ret.state.cylinder_residual(), 0.0);
    }
}
