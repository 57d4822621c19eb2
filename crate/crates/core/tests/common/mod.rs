//! Extended-precision (double-double) replicas of the closed formulas and of
//! the scalar `1-1-1` models, used as independent references.

#![allow(dead_code)]

use twofloat::TwoFloat;

pub type T = TwoFloat;

pub fn t(x: f64) -> T {
    TwoFloat::from(x)
}

pub fn f(x: T) -> f64 {
    x.hi() + x.lo()
}

pub fn max(a: T, b: T) -> T {
    if a > b {
        a
    } else {
        b
    }
}

/// Scalar poly model `(λ_s s, λ_u u, x + ω) + c·s·u·(1, 1, 1)`.
#[derive(Clone, Copy)]
pub struct Poly {
    pub c: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub omega: f64,
}

impl Poly {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            lambda_s: 0.5,
            lambda_u: 2.0,
            omega: 0.0,
        }
    }

    pub fn map(&self, [s, u, x]: [T; 3]) -> [T; 3] {
        let r = t(self.c) * s * u;
        [
            t(self.lambda_s) * s + r,
            t(self.lambda_u) * u + r,
            x + t(self.omega) + r,
        ]
    }

    /// Rows `(s, u, x)`, columns `(s, u, x)`.
    pub fn jacobian(&self, [s, u, _]: [T; 3]) -> [[T; 3]; 3] {
        let c = t(self.c);
        let z = t(0.0);
        [
            [t(self.lambda_s) + c * u, c * s, z],
            [c * u, t(self.lambda_u) + c * s, z],
            [c * u, c * s, t(1.0)],
        ]
    }
}

pub fn mat_vec(a: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    core::array::from_fn(|r| a[r][0] * v[0] + a[r][1] * v[1] + a[r][2] * v[2])
}

/// A point with tangent vectors, advanced without renormalization.
#[derive(Clone)]
pub struct Jet {
    pub p: [T; 3],
    pub vs: Vec<[T; 3]>,
}

impl Jet {
    pub fn step(&self, m: &Poly) -> Jet {
        let j = m.jacobian(self.p);
        Jet {
            p: m.map(self.p),
            vs: self.vs.iter().map(|v| mat_vec(&j, *v)).collect(),
        }
    }
}

/// `(I^s, I^x)` of a scalar tangent vector.
pub fn inclinations(v: [T; 3]) -> (T, T) {
    (v[0].abs() / v[1].abs(), v[2].abs() / v[1].abs())
}

/// Slope `ds/d(u, x)` of the image of a 2-disk spanned by `a`, `b`, in the
/// row-sum norm.
pub fn slope(a: [T; 3], b: [T; 3]) -> T {
    let det = a[1] * b[2] - b[1] * a[2];
    let du = (a[0] * b[2] - b[0] * a[2]) / det;
    let dx = (b[0] * a[1] - a[0] * b[1]) / det;
    du.abs() + dx.abs()
}

pub fn mu_star(lambda: f64, k: f64, c: f64, rho: f64, eps: f64) -> T {
    let expand = t(1.0) / t(lambda) - t(k);
    let inv = t(1.0) - (t(2.0) * t(k) + t(c) * t(rho)) * t(eps) / expand;
    t(1.0) / inv
}

pub fn eps_s(lambda: f64, k: f64, c: f64, c_tilde: f64, rho: f64, eps: f64) -> T {
    let mu = mu_star(lambda, k, c, rho, eps);
    let expand = t(1.0) / t(lambda) - t(k);
    let (c, ct, e) = (t(c), t(c_tilde), t(eps));
    let one = t(1.0);
    let first = e * (expand / mu) * (one - t(k) * mu / expand) / (c + one + e * (ct + c + one));
    let second = e * (one - (t(lambda) + t(k)) / expand * mu) / (c + one + (t(2.0) * c + one) * e);
    let v = if first < second { first } else { second };
    max(v, t(0.0))
}

pub fn bound_x(lambda: f64, k: f64, c: f64, s0: f64, i0x: f64, n: i32) -> T {
    let expand = t(1.0) / t(lambda) - t(k);
    (t(k) / expand).powi(n) * t(i0x) + t(c) * t(s0) * t(n as f64) * (t(lambda) + t(k)).powi(n - 1)
}

pub fn bound_s(lambda: f64, k: f64, c: f64, s0: f64, i0x: f64, i0s: f64, n: i32) -> T {
    let expand = t(1.0) / t(lambda) - t(k);
    let lk = t(lambda) + t(k);
    (lk / expand).powi(n) * t(i0s) + lk.powi(n - 2) * t(n as f64) * (t(c) * t(s0) + t(i0x))
}

pub fn stretch(lambda: f64, k: f64, c: f64, rho: f64, eps: f64) -> T {
    t(1.0) / t(lambda) - t(k) - t(k) * t(eps) - (t(k) + t(c) * t(rho)) * t(eps)
}

/// Both sides of the norm-ratio identity for block norms `(|s|, |u|, |x|)`.
pub fn ratio_identity(prev: [f64; 3], next: [f64; 3]) -> (T, T) {
    let sq = |v: [f64; 3]| t(v[0]) * t(v[0]) + t(v[1]) * t(v[1]) + t(v[2]) * t(v[2]);
    let lhs = (sq(next) / sq(prev)).sqrt();
    let incl = |v: [f64; 3]| {
        let (a, b) = (t(v[0]) / t(v[1]), t(v[2]) / t(v[1]));
        t(1.0) + a * a + b * b
    };
    let rhs = t(next[1]) / t(prev[1]) * (incl(next) / incl(prev)).sqrt();
    (lhs, rhs)
}

/// One step of the twist map on the annulus.
pub fn twist_step(eps: f64, y0: f64, y1: f64, omega: impl Fn(T) -> T, theta: T, y: T) -> (T, T) {
    let b = t(eps) * (y - t(y0)) * (t(y1) - y);
    (theta + omega(y) + b * theta.sin(), y + b * theta.cos())
}

/// Hamiltonian restricted to the cylinder `p = q = 0` with `μ = 0` and the
/// default `f = cos θ + cos φ`: `H = I²/2 + J + ε(cos θ + cos φ)`.
/// Kick-drift-kick splitting with `n` steps of size `h`.
pub fn cylinder_flow(eps: f64, theta: T, i: T, phi: T, j: T, h: T, n: usize) -> [T; 4] {
    let (mut th, mut ii, mut ph, mut jj) = (theta, i, phi, j);
    let e = t(eps);
    let half = h / t(2.0);
    for _ in 0..n {
        ii += half * e * th.sin();
        jj += half * e * ph.sin();
        th += h * ii;
        ph += h;
        ii += half * e * th.sin();
        jj += half * e * ph.sin();
    }
    [th, ii, ph, jj]
}

/// Same flow by classical fourth-order Runge–Kutta, as a true-flow reference.
pub fn cylinder_flow_rk4(eps: f64, theta: T, i: T, h: T, n: usize) -> [T; 2] {
    let e = t(eps);
    let rhs = |th: T, ii: T| (ii, e * th.sin());
    let (mut th, mut ii) = (theta, i);
    let two = t(2.0);
    let six = t(6.0);
    for _ in 0..n {
        let (a1, b1) = rhs(th, ii);
        let (a2, b2) = rhs(th + h / two * a1, ii + h / two * b1);
        let (a3, b3) = rhs(th + h / two * a2, ii + h / two * b2);
        let (a4, b4) = rhs(th + h * a3, ii + h * b3);
        th += h / six * (a1 + two * a2 + two * a3 + a4);
        ii += h / six * (b1 + two * b2 + two * b3 + b4);
    }
    [th, ii]
}
