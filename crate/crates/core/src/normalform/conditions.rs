use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{fd, MapSpec, FD_STEP};
use crate::error::{Error, Result};
use crate::geometry::{row_sum_norm, sup, ChartPoint, Dimensions};
use crate::sampling::Halton;

/// Outcome of one normal-form condition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionResult {
    /// Short identifier: `a`..`e`, `implibc`, `implid`.
    pub id: String,
    pub name: String,
    pub max_violation: f64,
    pub passed: bool,
}

/// Numerical audit of conditions a)–e) and of their derivative consequences.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub sample_count: usize,
    pub tol: f64,
    pub seed: u64,
    /// Largest sampled `‖A_s(x)‖`.
    pub a_s_norm_max: f64,
    /// Largest sampled `‖A_u(x)⁻¹‖`, infinite if some `A_u(x)` is singular.
    pub a_u_inv_norm_max: f64,
    pub conditions: Vec<ConditionResult>,
    pub all_passed: bool,
}

impl ConditionReport {
    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionResult> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

struct Sampler {
    dims: Dimensions,
    rho: f64,
    domain: Vec<(f64, f64)>,
    halton: Halton,
}

impl Sampler {
    fn new<F: MapSpec + ?Sized>(f: &F, seed: u64) -> Self {
        let dims = f.dims();
        Self {
            dims,
            rho: f.rho(),
            domain: f.x_domain(),
            halton: Halton::new(dims.total(), seed),
        }
    }

    /// A quasi-random point of `U`.
    fn next(&mut self) -> ChartPoint {
        let t = self.halton.next_point();
        let ball = |v: &[f64]| {
            v.iter()
                .map(|ti| self.rho * (2.0 * ti - 1.0))
                .collect::<Vec<_>>()
        };
        let s = ball(&t[self.dims.s_range()]);
        let u = ball(&t[self.dims.u_range()]);
        let x = t[self.dims.x_range()]
            .iter()
            .zip(&self.domain)
            .map(|(ti, (lo, hi))| lo + (hi - lo) * ti)
            .collect();
        ChartPoint::new(s, u, x)
    }
}

fn block(m: &DMatrix<f64>, rows: core::ops::Range<usize>, cols: core::ops::Range<usize>) -> f64 {
    row_sum_norm(
        &m.view((rows.start, cols.start), (rows.len(), cols.len()))
            .into_owned(),
    )
}

/// Check conditions a)–e) on `sample_count` quasi-random points of `U` and of
/// the slices `{u = 0}`, `{s = 0}`, `{s = u = 0}`.
///
/// Also checks by finite differences that the remainder derivatives forced by
/// b), c) and d) vanish on the stable and unstable slices (`implibc`,
/// `implid`). A singular `A_u(x)` is a condition e) failure.
pub fn validate_conditions<F: MapSpec + ?Sized>(
    f: &F,
    sample_count: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport> {
    if sample_count == 0 {
        return Err(Error::contract("sample_count must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::contract("tolerance must be positive"));
    }
    let dims = f.dims();
    let lambda = f.lambda();
    let mut sampler = Sampler::new(f, seed);
    let zero_s = alloc::vec![0.0; dims.n_s];
    let zero_u = alloc::vec![0.0; dims.n_u];
    let (rs, ru, rx) = (dims.s_range(), dims.u_range(), dims.x_range());

    let (mut va, mut vb, mut vc, mut vd) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let (mut vbc, mut vid) = (0.0_f64, 0.0_f64);
    let (mut a_s_max, mut a_u_inv_max) = (0.0_f64, 0.0_f64);

    let fd_remainder = |p: &ChartPoint| {
        fd::jacobian(
            |w| f.remainder(&ChartPoint::from_slice(dims, w)).to_vec(),
            &p.to_vec(),
            FD_STEP,
            &[],
            |_| true,
        )
    };

    for _ in 0..sample_count {
        let p = sampler.next();

        let on_m = ChartPoint::new(zero_s.clone(), zero_u.clone(), p.x.clone());
        va = va.max(sup(&f.remainder(&on_m).to_vec()));

        let on_ws = ChartPoint::new(p.s.clone(), zero_u.clone(), p.x.clone());
        let r_ws = f.remainder(&on_ws);
        vb = vb.max(sup(&r_ws.r_u));
        vd = vd.max(sup(&r_ws.r_x));

        let on_wu = ChartPoint::new(zero_s.clone(), p.u.clone(), p.x.clone());
        let r_wu = f.remainder(&on_wu);
        vc = vc.max(sup(&r_wu.r_s));
        vd = vd.max(sup(&r_wu.r_x));

        let j_ws = fd_remainder(&on_ws);
        let j_wu = fd_remainder(&on_wu);
        vbc = vbc
            .max(block(&j_ws, ru.clone(), rs.clone()))
            .max(block(&j_ws, ru.clone(), rx.clone()))
            .max(block(&j_wu, rs.clone(), ru.clone()))
            .max(block(&j_wu, rs.clone(), rx.clone()));
        vid = vid
            .max(block(&j_ws, rx.clone(), rs.clone()))
            .max(block(&j_ws, rx.clone(), rx.clone()))
            .max(block(&j_wu, rx.clone(), ru.clone()))
            .max(block(&j_wu, rx.clone(), rx.clone()));

        a_s_max = a_s_max.max(row_sum_norm(&f.a_s(&p.x)));
        let inv_norm = f
            .a_u(&p.x)
            .try_inverse()
            .map(|inv| row_sum_norm(&inv))
            .unwrap_or(f64::INFINITY);
        a_u_inv_max = a_u_inv_max.max(inv_norm);
    }

    let mut ve = (a_s_max - lambda).max(a_u_inv_max - lambda).max(0.0);
    if !(lambda > 0.0 && lambda < 1.0) {
        ve = f64::INFINITY;
    }

    let entry = |id: &str, name: &str, v: f64| ConditionResult {
        id: id.to_string(),
        name: name.to_string(),
        max_violation: v,
        passed: v <= tol,
    };
    let conditions = alloc::vec![
        entry("a", "invariance of M", va),
        entry("b", "straightening of the stable manifold", vb),
        entry("c", "straightening of the unstable manifold", vc),
        entry("d", "conjugacy on the stable and unstable manifolds", vd),
        entry("e", "hyperbolicity", ve),
        entry("implibc", "remainder derivatives forced by b) and c)", vbc),
        entry("implid", "remainder derivatives forced by d)", vid),
    ];
    let all_passed = conditions.iter().all(|c| c.passed);
    Ok(ConditionReport {
        sample_count,
        tol,
        seed,
        a_s_norm_max: a_s_max,
        a_u_inv_norm_max: a_u_inv_max,
        conditions,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_defective, make_linear, make_poly, Defect};

    #[test]
    fn linear_model_passes_with_zero_violation() {
        let f = make_linear(0.5, 2.0, 0.0).unwrap();
        let report = validate_conditions(&f, 200, 1e-12, 0).unwrap();
        assert!(report.all_passed);
        for c in &report.conditions {
            assert_eq!(c.max_violation, 0.0, "{}", c.id);
        }
    }

    #[test]
    fn poly_model_passes_a_to_e() {
        let f = make_poly(0.05, 0.5, 2.0, 0.5).unwrap();
        let report = validate_conditions(&f, 500, 1e-10, 7).unwrap();
        for id in ["a", "b", "c", "d"] {
            assert_eq!(report.get(id).unwrap().max_violation, 0.0, "{id}");
        }
        assert!(report.get("e").unwrap().passed);
        assert_eq!(report.a_s_norm_max, 0.5);
        assert!(report.all_passed, "{report:?}");
    }

    #[test]
    fn broken_stable_straightening_is_detected() {
        let f = make_defective(Defect::StableStraightening, 0.05, 0.5, 2.0, 0.5).unwrap();
        let report = validate_conditions(&f, 2000, 1e-10, 0).unwrap();
        let b = report.get("b").unwrap();
        assert!(!b.passed);
        // analytic sup over the open ball is 0.05 * rho
        assert!(b.max_violation < 0.05 * 0.5);
        assert!(b.max_violation > 0.99 * 0.05 * 0.5, "{}", b.max_violation);
        assert!(report.get("a").unwrap().passed);
        assert!(report.get("c").unwrap().passed);
        assert!(!report.all_passed);
    }

    #[test]
    fn bad_arguments_are_contract_errors() {
        let f = make_linear(0.5, 2.0, 0.0).unwrap();
        assert!(validate_conditions(&f, 0, 1e-8, 0).is_err());
        assert!(validate_conditions(&f, 10, 0.0, 0).is_err());
    }

    #[test]
    fn reports_are_reproducible_for_a_seed() {
        let f = make_poly(0.05, 0.5, 2.0, 0.5).unwrap();
        let a = validate_conditions(&f, 50, 1e-8, 3).unwrap();
        let b = validate_conditions(&f, 50, 1e-8, 3).unwrap();
        assert_eq!(a, b);
    }
}
