use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{a_s_derivative, g_hessians, remainder_hessians, remainder_jacobian, MapSpec};
use crate::error::{Error, Result};
use crate::geometry::{row_sum_norm, ChartPoint, Dimensions};
use crate::sampling::{for_each_grid_node, linspace};

/// The constant budget of the λ-lemma estimates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundSet {
    pub lambda: f64,
    /// Bound on `‖Dr‖` over `U`.
    pub k: f64,
    /// Bound on the second derivatives `∂²_{σσ'} r_i`, `σ' ∈ {u, x}`, `i ∈ {s, x}`.
    pub c: f64,
    /// Bound on `∂²_{σx} g`.
    pub c_tilde: f64,
    /// Bound on `∂_x A_s`.
    pub d: f64,
    pub rho: f64,
    /// Target inclination `ε` the slab quantities refer to.
    pub eps: f64,
    /// Half-width of the stable slab around `W^u(M)`; zero when no positive
    /// width satisfies the threshold.
    pub eps_s: f64,
    /// `(C + 1) ε_s`.
    pub delta: f64,
    /// Infinite when `1 − (2k + Cρ) ε / (λ⁻¹ − k) ≤ 0`.
    pub mu_star: f64,
    /// Largest `‖∂²_{ss} r_i‖`, `i ∈ {s, x}`. Reported only.
    pub c_stable_block: f64,
    pub lk1_holds: bool,
    pub lk2_holds: bool,
}

impl BoundSet {
    /// Derive `μ*`, `ε_s`, `δ` and the `lk` flags from the primary constants.
    pub fn from_constants(
        lambda: f64,
        k: f64,
        c: f64,
        c_tilde: f64,
        d: f64,
        rho: f64,
        eps: f64,
    ) -> Self {
        let expand = 1.0 / lambda - k;
        let mu_inv = 1.0 - (2.0 * k + c * rho) / expand * eps;
        let mu_star = if expand > 0.0 && mu_inv > 0.0 {
            1.0 / mu_inv
        } else {
            f64::INFINITY
        };
        let eps_s = eps_s_threshold(lambda, k, c, c_tilde, eps, mu_star).max(0.0);
        Self {
            lambda,
            k,
            c,
            c_tilde,
            d,
            rho,
            eps,
            eps_s,
            delta: (c + 1.0) * eps_s,
            mu_star,
            c_stable_block: 0.0,
            lk1_holds: lambda + k > 0.0 && lambda + k < 1.0,
            lk2_holds: expand > 1.0,
        }
    }

    /// `λ⁻¹ − k`.
    pub fn expansion(&self) -> f64 {
        1.0 / self.lambda - self.k
    }

    /// `λ + k`.
    pub fn contraction(&self) -> f64 {
        self.lambda + self.k
    }
}

/// The infimum of the two slab thresholds, possibly negative or NaN when the
/// contraction condition fails.
fn eps_s_threshold(lambda: f64, k: f64, c: f64, c_tilde: f64, eps: f64, mu_star: f64) -> f64 {
    let expand = 1.0 / lambda - k;
    if !mu_star.is_finite() || expand <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let first = eps * (expand / mu_star) * (1.0 - k * mu_star / expand)
        / (c + 1.0 + eps * (c_tilde + c + 1.0));
    let second = eps * (1.0 - (lambda + k) / expand * mu_star) / (c + 1.0 + (2.0 * c + 1.0) * eps);
    first.min(second)
}

/// One inequality of the constant budget with its margin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintCheck {
    pub name: String,
    pub holds: bool,
    /// Positive when the inequality holds, negative by the amount it fails.
    pub slack: f64,
}

/// Evaluate `λ + k < 1`, `λ⁻¹ − k > 1`, `k/(λ⁻¹ − k) < k + λ`, the contraction
/// condition `((λ + k)/(λ⁻¹ − k)) μ* < 1` and positivity of the `ε_s`
/// threshold.
pub fn check_constants(b: &BoundSet) -> Vec<ConstraintCheck> {
    let expand = b.expansion();
    let check = |name: &str, slack: f64| ConstraintCheck {
        name: name.to_string(),
        holds: slack > 0.0,
        slack,
    };
    let lk1 = if b.lambda + b.k > 0.0 {
        1.0 - (b.lambda + b.k)
    } else {
        b.lambda + b.k
    };
    let raw_eps_s = eps_s_threshold(b.lambda, b.k, b.c, b.c_tilde, b.eps, b.mu_star);
    alloc::vec![
        check("lk1", lk1),
        check("lk2", expand - 1.0),
        check("ratio", b.k + b.lambda - b.k / expand),
        check("contraction", 1.0 - b.contraction() / expand * b.mu_star),
        check(
            "eps_s",
            if raw_eps_s.is_nan() {
                f64::NEG_INFINITY
            } else {
                raw_eps_s
            }
        ),
    ]
}

/// Nodes per axis actually used for a requested density: the smallest
/// `2^L + 1 ≥ grid_density`, so successive densities give nested grids.
pub fn grid_nodes(grid_density: usize) -> usize {
    let mut nodes = 2;
    while nodes < grid_density {
        nodes = 2 * nodes - 1;
    }
    nodes
}

/// Max over output components of the absolute sum of a block of second
/// derivatives.
fn hessian_block_norm(
    hessians: &[DMatrix<f64>],
    outputs: core::ops::Range<usize>,
    rows: core::ops::Range<usize>,
    cols: core::ops::Range<usize>,
) -> f64 {
    outputs
        .map(|i| {
            let h = &hessians[i];
            rows.clone()
                .flat_map(|a| cols.clone().map(move |b| h[(a, b)].abs()))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn second_derivative_constants(dims: Dimensions, hessians: &[DMatrix<f64>]) -> (f64, f64) {
    let (rs, ru, rx) = (dims.s_range(), dims.u_range(), dims.x_range());
    let mut c = 0.0_f64;
    let mut stable = 0.0_f64;
    for out in [rs.clone(), rx.clone()] {
        for sigma in [rs.clone(), ru.clone(), rx.clone()] {
            for sigma_p in [ru.clone(), rx.clone()] {
                c = c.max(hessian_block_norm(
                    hessians,
                    out.clone(),
                    sigma.clone(),
                    sigma_p,
                ));
            }
        }
        stable = stable.max(hessian_block_norm(hessians, out, rs.clone(), rs.clone()));
    }
    (c, stable)
}

/// Sample the constants `k`, `C`, `C̃`, `D` on a closed tensor grid over
/// `[−ρ, ρ]^{n_s+n_u} × x_domain` and derive the rest of the budget for the
/// target inclination `target_eps`.
///
/// The grid has [`grid_nodes`]`(grid_density)` nodes per axis. Failing `lk1`
/// or `lk2` is reported through the flags, not as an error.
pub fn estimate_bounds<F: MapSpec + ?Sized>(
    f: &F,
    grid_density: usize,
    target_eps: f64,
) -> Result<BoundSet> {
    if grid_density < 2 {
        return Err(Error::contract("grid density must be at least 2 per axis"));
    }
    if !(target_eps > 0.0) {
        return Err(Error::contract("target inclination must be positive"));
    }
    let dims = f.dims();
    let rho = f.rho();
    let nodes = grid_nodes(grid_density);
    let x_axes: Vec<Vec<f64>> = f
        .x_domain()
        .iter()
        .map(|(lo, hi)| linspace(*lo, *hi, nodes))
        .collect();
    let mut axes: Vec<Vec<f64>> = (0..dims.n_s + dims.n_u)
        .map(|_| linspace(-rho, rho, nodes))
        .collect();
    axes.extend(x_axes.iter().cloned());

    let (mut k, mut c, mut stable) = (0.0_f64, 0.0_f64, 0.0_f64);
    for_each_grid_node(&axes, |z| {
        let p = ChartPoint::from_slice(dims, z);
        k = k.max(row_sum_norm(&remainder_jacobian(f, &p)));
        let (cp, sp) = second_derivative_constants(dims, &remainder_hessians(f, &p));
        c = c.max(cp);
        stable = stable.max(sp);
    });

    let (mut c_tilde, mut d) = (0.0_f64, 0.0_f64);
    let all = 0..dims.m;
    for_each_grid_node(&x_axes, |x| {
        c_tilde = c_tilde.max(hessian_block_norm(
            &g_hessians(f, x),
            all.clone(),
            all.clone(),
            all.clone(),
        ));
        let das = a_s_derivative(f, x);
        let row_max = (0..dims.n_s)
            .map(|i| {
                das.iter()
                    .map(|m| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        d = d.max(row_max);
    });

    let mut b = BoundSet::from_constants(f.lambda(), k, c, c_tilde, d, rho, target_eps);
    b.c_stable_block = stable;
    Ok(b)
}
