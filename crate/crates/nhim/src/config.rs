//! The JSON experiment configuration and its resolution into core objects.
//!
//! Parsing is strict: unknown fields are rejected, and every parameter is
//! checked against the selected model before any experiment starts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use nalgebra::DMatrix;
use nhim_core::lambdalemma::DiskSpec;
use nhim_core::models::{
    make_defective, make_linear, make_poly_with, make_twist_annulus, Defect, FlowState,
    FourierTable, Frequency, HamiltonianSpec, LogBase, PolyModel, PolyParams, TwistAnnulus,
};
use nhim_core::{Dimensions, MapSpec};
use serde::{Deserialize, Serialize};

/// A configuration problem found before any computation. Exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Model selector, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Linear {
        lambda_s: f64,
        lambda_u: f64,
        #[serde(default)]
        omega: f64,
    },
    Poly {
        coupling: f64,
        lambda_s: f64,
        lambda_u: f64,
        rho: f64,
        #[serde(default)]
        omega: f64,
        #[serde(default = "one_one_one")]
        dims: Dimensions,
    },
    Defective {
        defect: Defect,
        strength: f64,
        lambda_s: f64,
        lambda_u: f64,
        rho: f64,
    },
    Twist {
        eps_twist: f64,
        y0: f64,
        y1: f64,
        lambda_s: f64,
        lambda_u: f64,
        #[serde(default)]
        frequency: Frequency,
        #[serde(default)]
        rho: Option<f64>,
    },
    Hamiltonian {
        #[serde(default = "default_ham_eps")]
        eps: f64,
        #[serde(default = "default_ham_mu")]
        mu: f64,
        #[serde(default = "default_nu")]
        nu: u64,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        log_base: LogBase,
        #[serde(default)]
        f: Option<FourierTable>,
        #[serde(default)]
        g: Option<FourierTable>,
        #[serde(default)]
        energy: f64,
    },
}

fn one_one_one() -> Dimensions {
    Dimensions {
        n_s: 1,
        n_u: 1,
        m: 1,
    }
}

fn default_ham_eps() -> f64 {
    0.01
}

fn default_ham_mu() -> f64 {
    0.001
}

fn default_nu() -> u64 {
    60
}

fn default_sigma() -> f64 {
    1.0
}

impl ModelConfig {
    /// Short name used in output file names.
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Linear { .. } => "linear",
            ModelConfig::Poly { .. } => "poly",
            ModelConfig::Defective { .. } => "defective",
            ModelConfig::Twist { .. } => "twist",
            ModelConfig::Hamiltonian { .. } => "hamiltonian",
        }
    }
}

/// A transversal disk `σ(u, x) = sigma + slope_u·u + slope_x·x` over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskConfig {
    /// `σ(0, 0)`, one entry per stable coordinate.
    pub sigma: Vec<f64>,
    /// Rows per stable coordinate, columns per unstable coordinate.
    #[serde(default)]
    pub slope_u: Option<Vec<Vec<f64>>>,
    /// Rows per stable coordinate, columns per manifold coordinate.
    #[serde(default)]
    pub slope_x: Option<Vec<Vec<f64>>>,
    pub u_box: Vec<(f64, f64)>,
    /// Defaults to the model's sampling domain.
    #[serde(default)]
    pub x_box: Option<Vec<(f64, f64)>>,
}

/// Tolerances of the pass/fail audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Normal-form condition violations.
    pub conditions: f64,
    /// `|H(Pʲ(z)) − H(z)|` over the audited returns.
    pub energy_drift: f64,
    /// `max(|p|, |q|)` along cylinder orbits.
    pub cylinder: f64,
    /// `θ` advance error per return in the integrable case.
    pub rotation: f64,
    /// Relative error of the fitted saddle exponents.
    pub exponent_fit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            conditions: 1e-8,
            energy_drift: 1e-8,
            cylinder: 1e-12,
            rotation: 1e-11,
            exponent_fit: 0.05,
        }
    }
}

/// A start point on the section `φ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub q: f64,
    pub i: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub j: f64,
}

impl SeedConfig {
    pub fn state(&self) -> FlowState {
        FlowState::new(self.p, self.q, self.i, self.theta, self.j, 0.0)
    }

    pub fn on_cylinder(&self) -> bool {
        self.p == 0.0 && self.q == 0.0
    }
}

/// Integration settings of the `ham` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HamRunConfig {
    /// Integrator step.
    pub h: f64,
    /// Returns audited for energy drift.
    pub returns: usize,
    /// Returns audited for cylinder invariance (and written to the orbit CSV).
    pub invariance_returns: usize,
    pub seeds: Vec<SeedConfig>,
    /// Fit the saddle exponents in local `(s, u)` coordinates; needs `ε > 0`.
    pub fit_exponents: bool,
    pub fit_amplitude: f64,
    pub fit_time: f64,
}

impl Default for HamRunConfig {
    fn default() -> Self {
        let seed = |i, theta, j| SeedConfig {
            p: 0.0,
            q: 0.0,
            i,
            theta,
            j,
        };
        Self {
            h: 1e-3,
            returns: 10,
            invariance_returns: 100,
            seeds: vec![
                seed(0.5, 0.0, 0.0),
                seed(1.2, 2.0, -0.3),
                seed(-0.7, 4.0, 0.4),
            ],
            fit_exponents: true,
            fit_amplitude: 1e-6,
            fit_time: 50.0,
        }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Defaults to a constant disk at `s = ρ/2` whose `u` half-width is
    /// `ρ(λ + k)^{n_max}`.
    #[serde(default)]
    pub disk: Option<DiskConfig>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Overrides the slab half-width derived from the bounds.
    #[serde(default)]
    pub eps_s: Option<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Mesh nodes per disk axis.
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    /// Nodes per axis of the bound-estimation grid.
    #[serde(default = "default_grid")]
    pub grid_density: usize,
    /// Low-discrepancy samples of the condition audit.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub ham: HamRunConfig,
}

fn default_eps() -> f64 {
    1e-2
}

fn default_n_max() -> usize {
    40
}

fn default_mesh() -> usize {
    11
}

fn default_grid() -> usize {
    9
}

fn default_samples() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    fn check_common(&self) -> anyhow::Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(bad(format!("eps = {} must be positive", self.eps)));
        }
        if let Some(e) = self.eps_s {
            if !(e > 0.0 && e.is_finite()) {
                return Err(bad(format!("eps_s = {e} must be positive")));
            }
        }
        if self.n_max == 0 {
            return Err(bad("n_max must be at least 1"));
        }
        if self.mesh < 2 {
            return Err(bad("mesh must be at least 2"));
        }
        if self.grid_density < 2 {
            return Err(bad("grid_density must be at least 2"));
        }
        if self.samples == 0 {
            return Err(bad("samples must be at least 1"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("conditions", t.conditions),
            ("energy_drift", t.energy_drift),
            ("cylinder", t.cylinder),
            ("rotation", t.rotation),
            ("exponent_fit", t.exponent_fit),
        ] {
            if !(v > 0.0) {
                return Err(bad(format!("tolerance {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Build the selected map, rejecting the Hamiltonian.
    pub fn map_model(&self) -> anyhow::Result<MapModel> {
        self.check_common()?;
        let model = match self.model {
            ModelConfig::Linear {
                lambda_s,
                lambda_u,
                omega,
            } => MapModel::Poly(make_linear(lambda_s, lambda_u, omega)?),
            ModelConfig::Poly {
                coupling,
                lambda_s,
                lambda_u,
                rho,
                omega,
                dims,
            } => {
                Dimensions::new(dims.n_s, dims.n_u, dims.m)?;
                MapModel::Poly(make_poly_with(PolyParams {
                    dims,
                    coupling,
                    lambda_s,
                    lambda_u,
                    omega,
                    rho,
                })?)
            }
            ModelConfig::Defective {
                defect,
                strength,
                lambda_s,
                lambda_u,
                rho,
            } => MapModel::Poly(make_defective(defect, strength, lambda_s, lambda_u, rho)?),
            ModelConfig::Twist {
                eps_twist,
                y0,
                y1,
                lambda_s,
                lambda_u,
                frequency,
                rho,
            } => {
                let t = make_twist_annulus(eps_twist, y0, y1, lambda_s, lambda_u, frequency)?;
                MapModel::Twist(match rho {
                    Some(r) => t.with_rho(r)?,
                    None => t,
                })
            }
            ModelConfig::Hamiltonian { .. } => {
                return Err(bad("this command needs a map model, not the Hamiltonian"))
            }
        };
        if let Some(d) = &self.disk {
            self.build_disk(d, model.as_map())?;
        }
        Ok(model)
    }

    /// The configured disk, or `None` when the default is to be derived
    /// from the bounds.
    pub fn disk(&self, f: &dyn MapSpec) -> anyhow::Result<Option<DiskSpec>> {
        self.disk
            .as_ref()
            .map(|d| self.build_disk(d, f))
            .transpose()
    }

    fn build_disk(&self, d: &DiskConfig, f: &dyn MapSpec) -> anyhow::Result<DiskSpec> {
        let dims = f.dims();
        let matrix = |rows: &Option<Vec<Vec<f64>>>,
                      cols: usize,
                      what: &str|
         -> anyhow::Result<DMatrix<f64>> {
            match rows {
                None => Ok(DMatrix::zeros(dims.n_s, cols)),
                Some(r) if r.len() == dims.n_s && r.iter().all(|row| row.len() == cols) => {
                    Ok(DMatrix::from_fn(dims.n_s, cols, |i, j| r[i][j]))
                }
                Some(_) => Err(bad(format!(
                    "disk.{what} must be a {} x {cols} matrix",
                    dims.n_s
                ))),
            }
        };
        if d.sigma.len() != dims.n_s {
            return Err(bad(format!("disk.sigma needs {} entries", dims.n_s)));
        }
        if d.u_box.len() != dims.n_u {
            return Err(bad(format!("disk.u_box needs {} intervals", dims.n_u)));
        }
        let x_box = d.x_box.clone().unwrap_or_else(|| f.x_domain());
        if x_box.len() != dims.m {
            return Err(bad(format!("disk.x_box needs {} intervals", dims.m)));
        }
        Ok(DiskSpec::affine(
            dims,
            d.sigma.clone(),
            matrix(&d.slope_u, dims.n_u, "slope_u")?,
            matrix(&d.slope_x, dims.m, "slope_x")?,
            d.u_box.clone(),
            x_box,
            self.mesh,
        )?)
    }

    /// Build the Hamiltonian and check the integration settings.
    pub fn hamiltonian(&self) -> anyhow::Result<HamiltonianSpec> {
        self.check_common()?;
        let ModelConfig::Hamiltonian {
            eps,
            mu,
            nu,
            sigma,
            log_base,
            ref f,
            ref g,
            energy,
        } = self.model
        else {
            return Err(bad("the ham command needs a hamiltonian model"));
        };
        let hs = HamiltonianSpec::new(eps, mu, nu, sigma)?
            .with_log_base(log_base)?
            .with_tables(
                f.clone().unwrap_or_else(FourierTable::default_f),
                g.clone().unwrap_or_else(FourierTable::default_g),
            )
            .with_energy(energy);
        let run = &self.ham;
        if !(run.h > 0.0 && run.h.is_finite()) {
            return Err(bad("ham.h must be positive"));
        }
        if run.seeds.is_empty() {
            return Err(bad("ham.seeds must not be empty"));
        }
        if run.fit_exponents {
            if eps == 0.0 {
                return Err(bad(
                    "local saddle coordinates need eps > 0; set ham.fit_exponents to false",
                ));
            }
            if !(run.fit_amplitude > 0.0) || !(run.fit_time > run.h) {
                return Err(bad(
                    "ham.fit_amplitude must be positive and ham.fit_time must exceed h",
                ));
            }
        }
        Ok(hs)
    }
}

/// A resolved map model.
pub enum MapModel {
    Poly(PolyModel),
    Twist(TwistAnnulus),
}

impl MapModel {
    pub fn as_map(&self) -> &dyn MapSpec {
        match self {
            MapModel::Poly(m) => m,
            MapModel::Twist(m) => m,
        }
    }
}
