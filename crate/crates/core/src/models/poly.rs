// Linear and polynomial-remainder models on a torus M = 𝕋^m.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ChartTopology, Dimensions};
use crate::normalform::{check_constants, BoundSet, MapSpec, Remainder};

/// A deliberately broken remainder term, used to exercise failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Defect {
    /// `r_u = c·s̄`: the stable manifold is no longer `{u = 0}`.
    StableStraightening,
    /// `r_x = c·s̄`: the dynamics on `W^s(M)` is no longer conjugate to `g`.
    Conjugacy,
}

/// Parameters of [`PolyModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyParams {
    pub dims: Dimensions,
    /// Coefficient `c` of the remainder `r_i = c·s̄·ū`.
    pub coupling: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    /// Rotation of every manifold angle.
    pub omega: f64,
    pub rho: f64,
}

impl Default for PolyParams {
    fn default() -> Self {
        Self {
            dims: Dimensions {
                n_s: 1,
                n_u: 1,
                m: 1,
            },
            coupling: 0.0,
            lambda_s: 0.5,
            lambda_u: 2.0,
            omega: 0.0,
            rho: 0.5,
        }
    }
}

/// `f(s, u, x) = (λ_s s, λ_u u, x + ω) + r(s, u, x)` on `B_ρ × 𝕋^m`, with
/// every remainder component equal to `c·s̄·ū` (`s̄`, `ū` the coordinate
/// means) plus an optional [`Defect`] term.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyModel {
    params: PolyParams,
    topo: ChartTopology,
    defect: Option<(Defect, f64)>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl PolyModel {
    pub fn params(&self) -> &PolyParams {
        &self.params
    }

    pub fn defect(&self) -> Option<(Defect, f64)> {
        self.defect
    }

    fn validate(p: &PolyParams) -> Result<()> {
        if !(p.lambda_s > 0.0 && p.lambda_s < 1.0) {
            return Err(Error::invalid(format!(
                "lambda_s = {} must lie in (0, 1)",
                p.lambda_s
            )));
        }
        if !(p.lambda_u > 1.0 && p.lambda_u.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_u = {} must exceed 1",
                p.lambda_u
            )));
        }
        if !(p.rho > 0.0 && p.rho.is_finite()) {
            return Err(Error::invalid(format!("rho = {} must be positive", p.rho)));
        }
        if !(p.coupling >= 0.0 && p.coupling.is_finite()) {
            return Err(Error::invalid(format!(
                "coupling = {} must be nonnegative",
                p.coupling
            )));
        }
        if !p.omega.is_finite() {
            return Err(Error::invalid("omega must be finite"));
        }
        Ok(())
    }

    /// Analytic `k = sup ‖Dr‖` over `B_ρ`.
    pub fn k(&self) -> f64 {
        let defect = self.defect.map_or(0.0, |(_, c)| c.abs());
        2.0 * self.params.coupling * self.params.rho + defect
    }

    /// Analytic `C`.
    pub fn c(&self) -> f64 {
        self.params.coupling
    }

    fn dr_coefficients(&self, p: &ChartPoint) -> (f64, f64) {
        let c = self.params.coupling;
        let d = self.params.dims;
        (c * mean(&p.u) / d.n_s as f64, c * mean(&p.s) / d.n_u as f64)
    }
}

impl MapSpec for PolyModel {
    fn dims(&self) -> Dimensions {
        self.params.dims
    }

    fn topology(&self) -> &ChartTopology {
        &self.topo
    }

    fn rho(&self) -> f64 {
        self.params.rho
    }

    fn lambda(&self) -> f64 {
        self.params.lambda_s.max(1.0 / self.params.lambda_u)
    }

    fn a_s(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.params.dims.n_s, self.params.dims.n_s) * self.params.lambda_s
    }

    fn a_u(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.params.dims.n_u, self.params.dims.n_u) * self.params.lambda_u
    }

    fn g(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|xi| xi + self.params.omega).collect()
    }

    fn remainder(&self, p: &ChartPoint) -> Remainder {
        let d = self.params.dims;
        let base = self.params.coupling * mean(&p.s) * mean(&p.u);
        let mut r = Remainder {
            r_s: alloc::vec![base; d.n_s],
            r_u: alloc::vec![base; d.n_u],
            r_x: alloc::vec![base; d.m],
        };
        if let Some((defect, c)) = self.defect {
            let term = c * mean(&p.s);
            let target = match defect {
                Defect::StableStraightening => &mut r.r_u,
                Defect::Conjugacy => &mut r.r_x,
            };
            target.iter_mut().for_each(|v| *v += term);
        }
        r
    }

    fn d_a_s(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let n = self.params.dims.n_s;
        Some(alloc::vec![DMatrix::zeros(n, n); self.params.dims.m])
    }

    fn d_a_u(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let n = self.params.dims.n_u;
        Some(alloc::vec![DMatrix::zeros(n, n); self.params.dims.m])
    }

    fn dg(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.params.dims.m, self.params.dims.m))
    }

    fn d2g(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let m = self.params.dims.m;
        Some(alloc::vec![DMatrix::zeros(m, m); m])
    }

    fn dr(&self, p: &ChartPoint) -> Option<DMatrix<f64>> {
        let d = self.params.dims;
        let n = d.total();
        let (ds, du) = self.dr_coefficients(p);
        let mut j = DMatrix::zeros(n, n);
        for row in 0..n {
            for col in d.s_range() {
                j[(row, col)] = ds;
            }
            for col in d.u_range() {
                j[(row, col)] = du;
            }
        }
        if let Some((defect, c)) = self.defect {
            let rows = match defect {
                Defect::StableStraightening => d.u_range(),
                Defect::Conjugacy => d.x_range(),
            };
            for row in rows {
                for col in d.s_range() {
                    j[(row, col)] += c / d.n_s as f64;
                }
            }
        }
        Some(j)
    }

    fn d2r(&self, _p: &ChartPoint) -> Option<Vec<DMatrix<f64>>> {
        let d = self.params.dims;
        let n = d.total();
        let v = self.params.coupling / (d.n_s * d.n_u) as f64;
        let mut h = DMatrix::zeros(n, n);
        for a in d.s_range() {
            for b in d.u_range() {
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        Some(alloc::vec![h; n])
    }
}

/// `A_s = λ_s·Id`, `A_u = λ_u·Id`, `g(x) = x + ω` on the circle, `r ≡ 0`,
/// with `ρ = 0.5`.
pub fn make_linear(lambda_s: f64, lambda_u: f64, omega: f64) -> Result<PolyModel> {
    make_poly_with(PolyParams {
        lambda_s,
        lambda_u,
        omega,
        ..PolyParams::default()
    })
}

/// The linear model plus `r_s = r_u = r_x = c·s·u`, on `B_ρ × 𝕋`.
///
/// Refuses constants for which `λ + k < 1`, `λ⁻¹ − k > 1` or
/// `k/(λ⁻¹ − k) < k + λ` fails, with `k = 2cρ`.
pub fn make_poly(c: f64, lambda_s: f64, lambda_u: f64, rho: f64) -> Result<PolyModel> {
    make_poly_with(PolyParams {
        coupling: c,
        lambda_s,
        lambda_u,
        rho,
        ..PolyParams::default()
    })
}

/// [`make_poly`] with every parameter exposed, including the dimensions.
pub fn make_poly_with(params: PolyParams) -> Result<PolyModel> {
    PolyModel::validate(&params)?;
    let model = PolyModel {
        params,
        topo: ChartTopology::angles(params.dims.m),
        defect: None,
    };
    refuse_failed_constants(&model)?;
    Ok(model)
}

/// A linear model with one broken normal-form condition of strength `c`.
pub fn make_defective(
    defect: Defect,
    c: f64,
    lambda_s: f64,
    lambda_u: f64,
    rho: f64,
) -> Result<PolyModel> {
    let params = PolyParams {
        lambda_s,
        lambda_u,
        rho,
        ..PolyParams::default()
    };
    PolyModel::validate(&params)?;
    if !c.is_finite() {
        return Err(Error::invalid("defect strength must be finite"));
    }
    let model = PolyModel {
        params,
        topo: ChartTopology::angles(1),
        defect: Some((defect, c)),
    };
    refuse_failed_constants(&model)?;
    Ok(model)
}

fn refuse_failed_constants(model: &PolyModel) -> Result<()> {
    let b = BoundSet::from_constants(
        model.lambda(),
        model.k(),
        model.c(),
        0.0,
        0.0,
        model.rho(),
        1e-2,
    );
    let failed: Vec<_> = check_constants(&b)
        .into_iter()
        .filter(|c| matches!(c.name.as_str(), "lk1" | "lk2" | "ratio") && !c.holds)
        .collect();
    if let Some(first) = failed.first() {
        return Err(Error::invalid(format!(
            "constants fail {} (λ = {}, k = {}, slack {})",
            first.name, b.lambda, b.k, first.slack
        )));
    }
    Ok(())
}
