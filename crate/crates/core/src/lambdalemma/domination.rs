//! Measured inclinations against their closed-form bounds.
//!
//! Two regimes are audited along one run of the disk mesh:
//!
//! - nodes seeded on `{u = 0}` stay on `W^s(M)`; the `u`-direction frame
//!   vectors (which start with `I^x = 0`) are compared with the inclination
//!   bounds, and `|s_n|` with `(λ + k)ⁿ |s_0|`;
//! - any alive node within `|s| ≤ ε_s` whose frame vector has both
//!   inclinations `≤ ε` must keep them `≤ ε` after one more step, with
//!   `|v^u|` growing by at least the stretch bound.

use alloc::vec::Vec;

use super::{seed_mesh, DiskSpec, MeshOrbit};
use crate::error::{Error, Result};
use crate::geometry::sup;
use crate::normalform::{BoundSet, MapSpec};
use crate::tangentflow::{
    sn_contraction_bound, stretch_lower_bound, theoretical_inclination_bounds, StretchBound,
};

/// Tolerance below the stretch bound still counted as compliant.
pub const STRETCH_SLACK: f64 = 1e-9;

/// Audit results at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DominationStep {
    pub n: usize,
    /// Alive nodes seeded on `{u = 0}`.
    pub slice_points: usize,
    /// Min over slice nodes of `bound_x − I^x`.
    pub margin_x: f64,
    /// Min over slice nodes of `bound_s − I^s`; `None` while pre-asymptotic.
    pub margin_s: Option<f64>,
    /// Min over slice nodes of `(λ + k)ⁿ |s_0| − |s_n|`.
    pub margin_contraction: f64,
    /// Frame vectors in the `ε`-regime at `n − 1` and followed to `n`.
    pub persistence_checked: usize,
    pub persistence_violations: usize,
    /// Min per-step `|v^u|` growth among those vectors.
    pub min_stretch: Option<f64>,
    pub stretch_violations: usize,
}

/// Per-iterate margins and violation counts of one audited run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DominationReport {
    pub eps: f64,
    pub eps_s: f64,
    pub stretch: StretchBound,
    pub steps: Vec<DominationStep>,
}

impl DominationReport {
    /// Number of negative inclination or contraction margins.
    pub fn negative_margins(&self) -> usize {
        self.steps
            .iter()
            .map(|s| {
                usize::from(s.margin_x < 0.0)
                    + usize::from(s.margin_s.is_some_and(|m| m < 0.0))
                    + usize::from(s.margin_contraction < 0.0)
            })
            .sum()
    }

    pub fn persistence_violations(&self) -> usize {
        self.steps.iter().map(|s| s.persistence_violations).sum()
    }

    pub fn persistence_checked(&self) -> usize {
        self.steps.iter().map(|s| s.persistence_checked).sum()
    }

    pub fn stretch_violations(&self) -> usize {
        self.steps.iter().map(|s| s.stretch_violations).sum()
    }

    /// Smallest stretch seen in the `ε`-regime.
    pub fn min_stretch(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.min_stretch)
            .reduce(f64::min)
    }

    /// Smallest of all inclination and contraction margins.
    pub fn min_margin(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| {
                [
                    s.margin_x,
                    s.margin_s.unwrap_or(f64::INFINITY),
                    s.margin_contraction,
                ]
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> bool {
        self.negative_margins() == 0
            && self.persistence_violations() == 0
            && self.stretch_violations() == 0
    }
}

/// Seed data of a slice node's `u`-direction vector.
struct SliceSeed {
    point: usize,
    vector: usize,
    s0: f64,
    i0_x: f64,
    i0_s: f64,
}

fn audit_slice(
    b: &BoundSet,
    mo: &MeshOrbit,
    seeds: &[SliceSeed],
    step: &mut DominationStep,
) -> Result<()> {
    let mut margin_x = f64::INFINITY;
    let mut margin_s: Option<f64> = None;
    let mut margin_c = f64::INFINITY;
    let mut count = 0;
    let mut last_point = usize::MAX;
    for seed in seeds {
        let p = &mo.points[seed.point];
        if !p.alive {
            continue;
        }
        if seed.point != last_point {
            count += 1;
            last_point = seed.point;
            margin_c = margin_c.min(sn_contraction_bound(b, mo.n, seed.s0) - sup(&p.jet.p.s));
        }
        let bounds = theoretical_inclination_bounds(b, mo.n, seed.i0_x, seed.i0_s, seed.s0)?;
        let v = &p.jet.frame[seed.vector];
        let inf = f64::INFINITY;
        margin_x = margin_x.min(bounds.bound_x - v.inclination_x().unwrap_or(inf));
        if !bounds.pre_asymptotic {
            let m = bounds.bound_s - v.inclination_s().unwrap_or(inf);
            margin_s = Some(margin_s.map_or(m, |old| old.min(m)));
        }
    }
    step.slice_points = count;
    step.margin_x = margin_x;
    step.margin_s = margin_s;
    step.margin_contraction = margin_c;
    Ok(())
}

/// Run the disk mesh for `n_max` steps and audit both regimes against `b`.
///
/// Violations are reported, not raised: they falsify the model or the
/// constants. Errors come only from contract failures (for instance a
/// [`BoundSet`] without `0 < λ + k < 1 < λ⁻¹ − k`) or from a mesh whose
/// nodes all leave `U`.
pub fn verify_bound_domination<F: MapSpec + ?Sized>(
    d: &DiskSpec,
    f: &F,
    b: &BoundSet,
    n_max: usize,
) -> Result<DominationReport> {
    if !(b.lk1_holds && b.lk2_holds) {
        return Err(Error::contract(
            "bound domination needs 0 < λ + k < 1 and λ⁻¹ − k > 1",
        ));
    }
    let eps = b.eps;
    let eps_s = b.eps_s;
    let stretch = stretch_lower_bound(b, eps);
    let mut mo = seed_mesh(d, f)?;
    let n_u = d.dims().n_u;

    let mut seeds = Vec::new();
    for (i, p) in mo
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.on_stable_slice())
    {
        for j in 0..n_u {
            let v = &p.jet.frame[j];
            seeds.push(SliceSeed {
                point: i,
                vector: j,
                s0: sup(&p.jet.p.s),
                i0_x: v.inclination_x().unwrap_or(f64::INFINITY),
                i0_s: v.inclination_s().unwrap_or(f64::INFINITY),
            });
        }
    }

    let in_regime = |mo: &MeshOrbit| -> Vec<Vec<bool>> {
        mo.points
            .iter()
            .map(|p| {
                let slab = p.alive && sup(&p.jet.p.s) <= eps_s;
                p.jet
                    .frame
                    .iter()
                    .map(|v| {
                        slab && v.inclination_s().is_some_and(|i| i <= eps)
                            && v.inclination_x().is_some_and(|i| i <= eps)
                    })
                    .collect()
            })
            .collect()
    };

    let blank = |n| DominationStep {
        n,
        slice_points: 0,
        margin_x: f64::INFINITY,
        margin_s: None,
        margin_contraction: f64::INFINITY,
        persistence_checked: 0,
        persistence_violations: 0,
        min_stretch: None,
        stretch_violations: 0,
    };

    let mut steps = Vec::with_capacity(n_max + 1);
    let mut first = blank(0);
    audit_slice(b, &mo, &seeds, &mut first)?;
    steps.push(first);
    let mut regime = in_regime(&mo);

    for _ in 0..n_max {
        mo = super::advance_mesh(mo, f, 1)?;
        let mut step = blank(mo.n);
        audit_slice(b, &mo, &seeds, &mut step)?;
        for (p, flags) in mo.points.iter().zip(&regime) {
            if !p.alive {
                continue;
            }
            for (k, v) in p.jet.frame.iter().enumerate().filter(|(k, _)| flags[*k]) {
                step.persistence_checked += 1;
                let keeps = v.inclination_s().is_some_and(|i| i <= eps)
                    && v.inclination_x().is_some_and(|i| i <= eps);
                step.persistence_violations += usize::from(!keeps);
                let grow = p.jet.stretch[k];
                step.min_stretch = Some(step.min_stretch.map_or(grow, |m| m.min(grow)));
                step.stretch_violations += usize::from(grow < stretch.bound - STRETCH_SLACK);
            }
        }
        regime = in_regime(&mo);
        steps.push(step);
    }
    Ok(DominationReport {
        eps,
        eps_s,
        stretch,
        steps,
    })
}
