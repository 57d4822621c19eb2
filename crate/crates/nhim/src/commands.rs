//! The four experiments behind the subcommands.

use std::path::Path;

use nhim_core::lambdalemma::{
    annulus_experiment, describe_k, find_k, verify_bound_domination, C1Distance, DiskSpec,
    DominationReport, KSearch,
};
use nhim_core::models::{
    fit_saddle_exponents, poincare_map, FlowState, HamiltonianSpec, SaddleFit,
};
use nhim_core::normalform::{
    check_constants, estimate_bounds, validate_conditions, ConstraintCheck,
};
use nhim_core::{BoundSet, ConditionReport, MapSpec};
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig, MapModel};
use crate::output::{Cell, RunFiles, Table};
use crate::Status;

const TAU: f64 = std::f64::consts::TAU;

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Validate,
    Lambda,
    Annulus,
    Ham,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Lambda => "lambda",
            Experiment::Annulus => "annulus",
            Experiment::Ham => "ham",
        }
    }
}

/// Result of a completed run.
#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    /// One-line human summary.
    pub message: String,
    /// Stem shared by the report files.
    pub stem: String,
}

/// Resolve the model, run the experiment and write its reports into `dir`.
///
/// Configuration problems are returned as errors before any file is
/// written. Failed properties and exhausted horizons are reported through
/// [`Outcome::status`] with the reports written.
pub fn run(
    experiment: Experiment,
    config: &ExperimentConfig,
    dir: &Path,
) -> anyhow::Result<Outcome> {
    match experiment {
        Experiment::Validate => validate(config, dir),
        Experiment::Lambda => lambda(config, dir),
        Experiment::Annulus => annulus(config, dir),
        Experiment::Ham => ham(config, dir),
    }
}

fn finish(
    mut files: RunFiles,
    experiment: Experiment,
    config: &ExperimentConfig,
    status: Status,
    summary: &impl Serialize,
    message: String,
) -> anyhow::Result<Outcome> {
    files.write_json(summary)?;
    files.write_manifest(
        experiment.name(),
        config.model.name(),
        status.code(),
        config,
    )?;
    Ok(Outcome {
        status,
        message,
        stem: files.stem().to_string(),
    })
}

#[derive(Debug, Serialize)]
struct Validation {
    passed: bool,
    /// Identifiers of failed conditions and constant checks.
    failures: Vec<String>,
    conditions: ConditionReport,
    bounds: BoundSet,
    constraints: Vec<ConstraintCheck>,
}

fn bounds(config: &ExperimentConfig, f: &dyn MapSpec) -> anyhow::Result<BoundSet> {
    let mut b = estimate_bounds(f, config.grid_density, config.eps)?;
    if let Some(e) = config.eps_s {
        b.eps_s = e;
        b.delta = (b.c + 1.0) * e;
    }
    Ok(b)
}

fn run_validation(config: &ExperimentConfig, f: &dyn MapSpec) -> anyhow::Result<Validation> {
    let conditions =
        validate_conditions(f, config.samples, config.tolerances.conditions, config.seed)?;
    let bounds = bounds(config, f)?;
    let constraints = check_constants(&bounds);
    let failures: Vec<String> = conditions
        .failures()
        .map(|c| c.id.clone())
        .chain(
            constraints
                .iter()
                .filter(|c| !c.holds)
                .map(|c| c.name.clone()),
        )
        .collect();
    Ok(Validation {
        passed: failures.is_empty(),
        failures,
        conditions,
        bounds,
        constraints,
    })
}

fn validate(config: &ExperimentConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let model = config.map_model()?;
    let v = run_validation(config, model.as_map())?;
    let files = RunFiles::create(dir, "validate", config.model.name())?;
    let (status, message) = if v.passed {
        (
            Status::Success,
            "all normal-form conditions and constant checks pass".to_string(),
        )
    } else {
        (
            Status::PropertyFailure,
            format!("failed: {}", v.failures.join(", ")),
        )
    };
    finish(files, Experiment::Validate, config, status, &v, message)
}

fn distance_cells(c: Option<&C1Distance>) -> Vec<Cell> {
    match c {
        Some(c) => vec![
            c.c0.into(),
            c.c1.into(),
            c.value().into(),
            c.incl_s.into(),
            c.incl_x.into(),
            c.alive.into(),
        ],
        None => vec![Cell::Missing; 6],
    }
}

#[derive(Debug, Serialize)]
struct DominationSummary {
    negative_margins: usize,
    min_margin: f64,
    persistence_checked: usize,
    persistence_violations: usize,
    stretch_violations: usize,
    min_stretch: Option<f64>,
    stretch_bound: f64,
    stretch_floor: f64,
    passed: bool,
}

impl From<&DominationReport> for DominationSummary {
    fn from(r: &DominationReport) -> Self {
        Self {
            negative_margins: r.negative_margins(),
            min_margin: r.min_margin(),
            persistence_checked: r.persistence_checked(),
            persistence_violations: r.persistence_violations(),
            stretch_violations: r.stretch_violations(),
            min_stretch: r.min_stretch(),
            stretch_bound: r.stretch.bound,
            stretch_floor: r.stretch.floor,
            passed: r.passed(),
        }
    }
}

#[derive(Debug, Serialize)]
struct LambdaSummary {
    eps: f64,
    eps_s: f64,
    n_max: usize,
    k: Option<usize>,
    description: String,
    validation: Validation,
    domination: Option<DominationSummary>,
    survivors: Vec<usize>,
    final_distance: Option<C1Distance>,
}

fn lambda_table(search: &KSearch, dom: &DominationReport) -> Table {
    let mut t = Table::new(vec![
        "n",
        "c0",
        "c1",
        "distance",
        "incl_s",
        "incl_x",
        "alive",
        "slice_points",
        "margin_x",
        "margin_s",
        "margin_contraction",
        "persistence_checked",
        "persistence_violations",
        "min_stretch",
        "stretch_violations",
    ]);
    for (c, d) in search.series.iter().zip(&dom.steps) {
        let mut row = vec![Cell::from(c.n)];
        row.extend(distance_cells(Some(c)));
        row.extend([
            d.slice_points.into(),
            d.margin_x.into(),
            d.margin_s.into(),
            d.margin_contraction.into(),
            d.persistence_checked.into(),
            d.persistence_violations.into(),
            d.min_stretch.into(),
            d.stretch_violations.into(),
        ]);
        t.push(row);
    }
    t
}

fn default_disk(
    config: &ExperimentConfig,
    f: &dyn MapSpec,
    b: &BoundSet,
) -> anyhow::Result<DiskSpec> {
    match config.disk(f)? {
        Some(d) => Ok(d),
        None => Ok(DiskSpec::default_for(f, b, config.n_max, config.mesh)?),
    }
}

fn lambda(config: &ExperimentConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let model = config.map_model()?;
    let f = model.as_map();
    let validation = run_validation(config, f)?;
    let mut files = RunFiles::create(dir, "lambda", config.model.name())?;
    if !validation.passed {
        let message = format!("model fails validation: {}", validation.failures.join(", "));
        let summary = LambdaSummary {
            eps: config.eps,
            eps_s: validation.bounds.eps_s,
            n_max: config.n_max,
            k: None,
            description: message.clone(),
            validation,
            domination: None,
            survivors: Vec::new(),
            final_distance: None,
        };
        return finish(
            files,
            Experiment::Lambda,
            config,
            Status::PropertyFailure,
            &summary,
            message,
        );
    }
    let b = validation.bounds.clone();
    let disk = default_disk(config, f, &b)?;
    let search = find_k(&disk, f, config.eps, config.n_max)?;
    let dom = verify_bound_domination(&disk, f, &b, config.n_max)?;
    files.write_csv(&lambda_table(&search, &dom))?;

    let domination = DominationSummary::from(&dom);
    let status = if !domination.passed {
        Status::PropertyFailure
    } else if search.k.is_none() {
        Status::HorizonExhausted
    } else {
        Status::Success
    };
    let mut message = describe_k(&search);
    if !domination.passed {
        message.push_str(&format!(
            "; bound domination failed ({} negative margins, {} persistence and {} stretch violations)",
            domination.negative_margins, domination.persistence_violations, domination.stretch_violations
        ));
    }
    let summary = LambdaSummary {
        eps: config.eps,
        eps_s: b.eps_s,
        n_max: config.n_max,
        k: search.k,
        description: describe_k(&search),
        validation,
        domination: Some(domination),
        survivors: search.series.iter().map(|c| c.alive).collect(),
        final_distance: search.series.last().copied(),
    };
    finish(files, Experiment::Lambda, config, status, &summary, message)
}

#[derive(Debug, Serialize)]
struct BoundarySummary {
    y: f64,
    points: usize,
    k_prime: Option<usize>,
    standalone_k: Option<usize>,
    max_residual: f64,
}

#[derive(Debug, Serialize)]
struct AnnulusSummary {
    eps: f64,
    n_max: usize,
    y0: f64,
    y1: f64,
    k: Option<usize>,
    k_prime: Option<usize>,
    max_boundary_residual: f64,
    annulus_excursion: f64,
    boundaries: Vec<BoundarySummary>,
    bounds: BoundSet,
}

fn annulus(config: &ExperimentConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let MapModel::Twist(f) = config.map_model()? else {
        return Err(ConfigError("the annulus command needs a twist model".into()).into());
    };
    let (y0, y1) = f.boundary();
    let b = bounds(config, &f)?;
    let disk = default_disk(config, &f, &b)?;
    let rep = annulus_experiment(&f, y0, y1, &disk, config.eps, config.n_max)?;
    let mut files = RunFiles::create(dir, "annulus", config.model.name())?;

    let mut header = vec!["n", "c0", "c1", "distance", "incl_s", "incl_x", "alive"];
    for names in [
        [
            "b0_c0",
            "b0_c1",
            "b0_distance",
            "b0_incl_s",
            "b0_incl_x",
            "b0_alive",
            "b0_residual",
        ],
        [
            "b1_c0",
            "b1_c1",
            "b1_distance",
            "b1_incl_s",
            "b1_incl_x",
            "b1_alive",
            "b1_residual",
        ],
    ] {
        header.extend(names);
    }
    let mut t = Table::new(header);
    for (n, c) in rep.full.series.iter().enumerate() {
        let mut row = vec![Cell::from(c.n)];
        row.extend(distance_cells(Some(c)));
        for track in &rep.boundaries {
            row.extend(distance_cells(track.series.get(n)));
            row.push(track.residual.get(n).copied().into());
        }
        t.push(row);
    }
    files.write_csv(&t)?;

    let status = if rep.k().is_some() && rep.k_prime().is_some() {
        Status::Success
    } else {
        Status::HorizonExhausted
    };
    let message = format!(
        "K = {:?}, K' = {:?}, boundary residual {:e}",
        rep.k(),
        rep.k_prime(),
        rep.max_boundary_residual()
    );
    let summary = AnnulusSummary {
        eps: config.eps,
        n_max: config.n_max,
        y0,
        y1,
        k: rep.k(),
        k_prime: rep.k_prime(),
        max_boundary_residual: rep.max_boundary_residual(),
        annulus_excursion: rep.annulus_excursion,
        boundaries: rep
            .boundaries
            .iter()
            .map(|t| BoundarySummary {
                y: t.y,
                points: t.points,
                k_prime: t.k_prime,
                standalone_k: t.standalone_k,
                max_residual: t.residual.iter().copied().fold(0.0, f64::max),
            })
            .collect(),
        bounds: b,
    };
    finish(
        files,
        Experiment::Annulus,
        config,
        status,
        &summary,
        message,
    )
}

#[derive(Debug, Serialize)]
struct Audit {
    value: f64,
    tolerance: f64,
    passed: bool,
}

impl Audit {
    fn new(value: f64, tolerance: f64) -> Self {
        Self {
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
struct HamSummary {
    spec: HamiltonianSpec,
    warnings: Vec<String>,
    h: f64,
    steps_per_return: usize,
    /// Max `|H(Pʲ(z)) − H(z)|` over the first `returns` returns of every seed.
    energy_drift: Audit,
    /// Max `max(|p|, |q|)` along the seeds on the cylinder.
    cylinder_residual: Option<Audit>,
    integrable: bool,
    /// Max per-return deviation of the `θ` advance from `2πI` (and of `I`
    /// from its start value); audited in the integrable case only.
    rotation_error: f64,
    rotation: Option<Audit>,
    saddle_fit: Option<SaddleFit>,
    saddle_fit_audit: Option<Audit>,
}

fn ham(config: &ExperimentConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let hs = config.hamiltonian()?;
    let run = &config.ham;
    let horizon = run.returns.max(run.invariance_returns);
    let mut t = Table::new(vec![
        "seed",
        "return",
        "p",
        "q",
        "i",
        "theta",
        "j",
        "phi",
        "energy",
        "energy_drift",
        "cylinder_residual",
        "theta_advance_error",
    ]);
    let mut drift = 0.0_f64;
    let mut residual: Option<f64> = None;
    let mut rotation = 0.0_f64;
    let mut steps_per_return = 0;
    for (k, seed) in run.seeds.iter().enumerate() {
        let start = seed.state();
        let e0 = nhim_core::models::energy(&hs, &start);
        let mut st = start;
        let mut prev: Option<FlowState> = None;
        for r in 0..=horizon {
            if r > 0 {
                let ret = poincare_map(&hs, &st, run.h)?;
                steps_per_return = ret.steps;
                prev = Some(st);
                st = ret.state;
            }
            let e = nhim_core::models::energy(&hs, &st);
            if r <= run.returns {
                drift = drift.max((e - e0).abs());
            }
            if seed.on_cylinder() && r <= run.invariance_returns {
                residual = Some(residual.unwrap_or(0.0).max(st.cylinder_residual()));
            }
            let advance = prev.map(|p| {
                let err =
                    nhim_core::geometry::wrap_difference(st.theta - p.theta - TAU * p.i).abs();
                rotation = rotation.max(err).max((st.i - p.i).abs());
                err
            });
            t.push(vec![
                k.into(),
                r.into(),
                st.p.into(),
                st.q.into(),
                st.i.into(),
                st.theta.into(),
                st.j.into(),
                st.phi.into(),
                e.into(),
                (e - e0).into(),
                st.cylinder_residual().into(),
                advance.into(),
            ]);
        }
    }
    let mut files = RunFiles::create(dir, "ham", config.model.name())?;
    files.write_csv(&t)?;

    let tol = &config.tolerances;
    let integrable = hs.eps() == 0.0 && hs.mu() == 0.0;
    let saddle_fit = if run.fit_exponents {
        Some(fit_saddle_exponents(
            &hs,
            run.fit_amplitude,
            run.fit_time,
            run.h,
        )?)
    } else {
        None
    };
    let summary = HamSummary {
        warnings: hs.warnings(),
        h: run.h,
        steps_per_return,
        energy_drift: Audit::new(drift, tol.energy_drift),
        cylinder_residual: residual.map(|r| Audit::new(r, tol.cylinder)),
        integrable,
        rotation_error: rotation,
        rotation: integrable.then(|| Audit::new(rotation, tol.rotation)),
        saddle_fit_audit: saddle_fit.map(|f| Audit::new(f.relative_error(), tol.exponent_fit)),
        saddle_fit,
        spec: hs,
    };
    let audits = [
        Some(&summary.energy_drift),
        summary.cylinder_residual.as_ref(),
        summary.rotation.as_ref(),
        summary.saddle_fit_audit.as_ref(),
    ];
    let failed: Vec<&str> = [
        "energy_drift",
        "cylinder_residual",
        "rotation",
        "saddle_fit",
    ]
    .into_iter()
    .zip(audits)
    .filter(|(_, a)| a.is_some_and(|a| !a.passed))
    .map(|(name, _)| name)
    .collect();
    let status = if failed.is_empty() {
        Status::Success
    } else {
        Status::PropertyFailure
    };
    let mut message = format!("energy drift {:e}", summary.energy_drift.value);
    if let Some(r) = &summary.cylinder_residual {
        message.push_str(&format!(", cylinder residual {:e}", r.value));
    }
    if integrable {
        message.push_str(&format!(", rotation error {rotation:e}"));
    }
    if let Some(f) = &summary.saddle_fit {
        message.push_str(&format!(
            ", saddle exponents {:.6} / {:.6}",
            f.stable, f.unstable
        ));
    }
    if !failed.is_empty() {
        message.push_str(&format!("; failed: {}", failed.join(", ")));
    }
    finish(files, Experiment::Ham, config, status, &summary, message)
}
