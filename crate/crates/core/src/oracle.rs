//! Brute-force cross-checks of the production solvers.
//!
//! The monodromy check integrates the Schrödinger equation with its own RK4
//! loop; it shares nothing with the Floquet matrix or the master-equation code
//! beyond the model definition.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::eels::{appendix_peaks_oracle, compute_i, compute_peaks, run_point, PeakOptions, PointResult};
use crate::error::{Error, Result};
use crate::floquet::{
    completeness_residual, orthogonality_residual, solve_floquet, sum_rule_residual, FloquetSolution,
};
use crate::lindblad::{steady_state_fourier, steady_state_time_domain, to_floquet_basis};
use crate::model::{AtomModel, DriveParams, NumericsConfig, RunConfig};

pub const MONODROMY_TOL: f64 = 1e-8;
pub const CROSS_METHOD_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const GAUGE_TOL: f64 = 1e-14;

/// Default oracle step count per drive period.
pub const MONODROMY_STEPS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            residual,
            tolerance,
            passed: residual.is_finite() && residual < tolerance,
            detail: None,
        }
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            residual: f64::NAN,
            tolerance: 0.0,
            passed: false,
            detail: Some(detail.into()),
        }
    }

    pub fn skipped(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            residual: 0.0,
            tolerance: 0.0,
            passed: true,
            detail: Some(detail.into()),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub label: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn new(label: impl Into<String>, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport {
            label: label.into(),
            checks,
            passed,
        }
    }

    /// Report for an input that could not even be turned into a model.
    pub fn input_failure(label: impl Into<String>, err: &Error) -> Self {
        Self::new(label, vec![Check::failed("model", err.to_string())])
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("validation: {}\n", self.label);
        out.push_str(&format!(
            "{:<28} {:>12} {:>10}  {}\n",
            "check", "residual", "tolerance", "status"
        ));
        for c in &self.checks {
            let status = if c.passed { "ok" } else { "FAIL" };
            out.push_str(&format!(
                "{:<28} {:>12.3e} {:>10.1e}  {}",
                c.name, c.residual, c.tolerance, status
            ));
            if let Some(d) = &c.detail {
                out.push_str(&format!("  ({d})"));
            }
            out.push('\n');
        }
        out.push_str(if self.passed { "overall: PASS\n" } else { "overall: FAIL\n" });
        out
    }
}

fn hamiltonian_apply(model: &AtomModel, omega_l: f64, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
    let n = psi.len();
    let drive = (omega_l * t).cos();
    let eps = model.energies();
    let rabi = model.rabi();
    for a in 0..n {
        let mut h = eps[a] * psi[a];
        for b in 0..n {
            h += drive * rabi[(a, b)] * psi[b];
        }
        // dψ/dt = -i H ψ
        out[a] = Complex64::new(h.im, -h.re);
    }
}

/// One drive period of i dψ/dt = H(t) ψ with classical RK4.
fn propagate_period(model: &AtomModel, omega_l: f64, psi0: &[Complex64], steps: usize) -> Vec<Complex64> {
    let n = psi0.len();
    let dt = 2.0 * std::f64::consts::PI / omega_l / steps as f64;
    let mut psi = psi0.to_vec();
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    for s in 0..steps {
        let t = s as f64 * dt;
        hamiltonian_apply(model, omega_l, t, &psi, &mut k1);
        for a in 0..n {
            tmp[a] = psi[a] + 0.5 * dt * k1[a];
        }
        hamiltonian_apply(model, omega_l, t + 0.5 * dt, &tmp, &mut k2);
        for a in 0..n {
            tmp[a] = psi[a] + 0.5 * dt * k2[a];
        }
        hamiltonian_apply(model, omega_l, t + 0.5 * dt, &tmp, &mut k3);
        for a in 0..n {
            tmp[a] = psi[a] + dt * k3[a];
        }
        hamiltonian_apply(model, omega_l, t + dt, &tmp, &mut k4);
        for a in 0..n {
            psi[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
    }
    psi
}

/// Propagates |F_j(0)⟩ over one period and compares with the Floquet phase
/// e^{-iω̃_j T}. `steps` must be at least 1000; unstable results (non-finite or
/// norm drift) are retried with halved steps up to three times.
pub fn monodromy_check(
    model: &AtomModel,
    drive: &DriveParams,
    fs: &FloquetSolution,
    steps: usize,
) -> Result<Check> {
    if steps < 1000 {
        return Err(Error::invalid("steps", "monodromy needs dt <= T/1000"));
    }
    if fs.n_levels() != model.n_levels() {
        return Err(Error::DimensionMismatch("Floquet solution and model differ".into()));
    }
    let period = drive.period();
    let mut steps = steps;
    for _ in 0..4 {
        let mut worst: f64 = 0.0;
        let mut unstable = false;
        for j in 0..fs.n_levels() {
            let start: Vec<Complex64> = fs
                .state_at_zero(j)
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect();
            let end = propagate_period(model, drive.omega_l, &start, steps);
            let norm0: f64 = start.iter().map(|z| z.norm_sqr()).sum();
            let norm1: f64 = end.iter().map(|z| z.norm_sqr()).sum();
            if !norm1.is_finite() || (norm1 - norm0).abs() > 1e-6 * norm0.max(1.0) {
                unstable = true;
                break;
            }
            let phase = Complex64::from_polar(1.0, -fs.omega_tilde()[j] * period);
            let diff: f64 = end
                .iter()
                .zip(&start)
                .map(|(e, s)| (e - phase * s).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff);
        }
        if !unstable {
            return Ok(Check::new("monodromy", worst, MONODROMY_TOL)
                .with_detail(format!("{steps} RK4 steps per period")));
        }
        steps *= 2;
    }
    Err(Error::NotConverged {
        stage: "monodromy integrator",
        residual: f64::INFINITY,
    })
}

/// Elementwise difference between the time-domain and Fourier steady states,
/// both at the truncation chosen by the Floquet solver.
pub fn cross_validate_steady(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
) -> Result<Check> {
    let fs = solve_floquet(model, drive, numerics)?;
    let a = steady_state_fourier(model, drive, numerics, fs.l_max())?;
    let b = steady_state_time_domain(model, drive, numerics, fs.l_max())?;
    Ok(Check::new("cross_method_steady", a.max_difference(&b)?, CROSS_METHOD_TOL))
}

/// Pairs coupled both by light and by the electron produce sidebands; without
/// any such pair none may appear.
fn sidebands_forbidden(model: &AtomModel) -> bool {
    let n = model.n_levels();
    (0..n).all(|a| (0..n).all(|b| model.rabi()[(a, b)] * model.dipole_ratio()[(a, b)] == 0.0))
}

/// Largest |P| over (j≠j', odd l) and (j=j', even l≠0) in a two-level atom.
pub fn parity_violation(point: &PointResult) -> f64 {
    let mut worst: f64 = 0.0;
    for p in &point.peaks.entries {
        let odd = p.l.rem_euclid(2) == 1;
        if (p.j != p.jp && odd) || (p.j == p.jp && !odd && p.l != 0) {
            worst = worst.max(p.prob.abs());
        }
    }
    worst
}

fn gauge_check(model: &AtomModel, point: &PointResult, opts: &PeakOptions) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for j in 0..point.floquet.n_levels() {
        let flipped = point.floquet.with_sign_flipped(j);
        let ss = to_floquet_basis(&point.steady, &flipped)?;
        let coupling = compute_i(&flipped, model)?;
        let other = compute_peaks(&coupling, &ss, &flipped, opts)?;
        if other.entries.len() != point.peaks.entries.len() {
            return Ok(Check::failed("gauge_invariance", "peak count changed"));
        }
        for p in &point.peaks.entries {
            let q = other.find(p.j, p.jp, p.l).map_or(f64::INFINITY, |q| q.prob);
            worst = worst.max((p.prob - q).abs());
        }
    }
    Ok(Check::new("gauge_invariance", worst, GAUGE_TOL))
}

fn appendix_check(model: &AtomModel, point: &PointResult) -> Result<Check> {
    let opts = PeakOptions::new(0.0);
    let main = compute_peaks(&point.coupling, &point.steady, &point.floquet, &opts)?;
    let alt = appendix_peaks_oracle(&point.floquet, &point.steady, model, &opts)?;
    let mut worst: f64 = 0.0;
    for p in &alt.entries {
        let q = main.find(p.j, p.jp, p.l).map_or(0.0, |q| q.prob);
        worst = worst.max((p.prob - q).abs());
    }
    Ok(Check::new("appendix_equivalence", worst, IDENTITY_TOL))
}

fn or_failed(name: &str, r: Result<Check>) -> Check {
    r.unwrap_or_else(|e| Check::failed(name, e.to_string()))
}

/// Every check applicable to one configuration.
pub fn run_full_validation(label: &str, cfg: &RunConfig) -> ValidationReport {
    let model = &cfg.model;
    let drive = &cfg.drive;
    let numerics = &cfg.numerics;
    // the raw peak list, before pruning, is needed for the selection rule
    let opts = PeakOptions::new(0.0);
    let point = match run_point(model, drive, numerics, &opts) {
        Ok(p) => p,
        Err(e) => return ValidationReport::new(label, vec![Check::failed("pipeline", e.to_string())]),
    };
    let interior = point.floquet.l_max() / 2;
    type Job<'a> = Box<dyn Fn() -> Vec<Check> + Send + Sync + 'a>;
    let point = &point;
    let jobs: Vec<Job> = vec![
        Box::new(move || {
            vec![or_failed(
                "monodromy",
                monodromy_check(model, drive, &point.floquet, MONODROMY_STEPS),
            )]
        }),
        Box::new(move || {
            let fs = &point.floquet;
            vec![
                Check::new("orthogonality", orthogonality_residual(fs), IDENTITY_TOL),
                Check::new("completeness", completeness_residual(fs, interior), IDENTITY_TOL)
                    .with_detail(format!("|l| <= {interior}")),
                Check::new("sum_rule", sum_rule_residual(fs, model), IDENTITY_TOL),
            ]
        }),
        Box::new(move || {
            let ss = &point.steady;
            vec![
                Check::new("hermiticity_level", ss.hermiticity_residual(), IDENTITY_TOL),
                or_failed(
                    "hermiticity_floquet",
                    ss.floquet_hermiticity_residual()
                        .map(|r| Check::new("hermiticity_floquet", r, IDENTITY_TOL)),
                ),
                Check::new("trace", ss.trace_residual(), IDENTITY_TOL),
                Check::new("population_range", ss.population_violation(), IDENTITY_TOL),
            ]
        }),
        Box::new(move || {
            if model.min_decay().is_none() {
                return vec![Check::skipped("cross_method_steady", "no decay channels")];
            }
            vec![or_failed(
                "cross_method_steady",
                cross_validate_steady(model, drive, numerics),
            )]
        }),
        Box::new(move || vec![or_failed("appendix_equivalence", appendix_check(model, point))]),
        Box::new(move || vec![or_failed("gauge_invariance", gauge_check(model, point, &opts))]),
        Box::new(move || {
            let mut out = Vec::new();
            if model.n_levels() == 2 {
                out.push(Check::new("parity_selection", parity_violation(point), IDENTITY_TOL));
            }
            if sidebands_forbidden(model) {
                let worst = point
                    .peaks
                    .entries
                    .iter()
                    .filter(|p| p.j == p.jp && p.l != 0)
                    .map(|p| p.prob.abs())
                    .fold(0.0, f64::max);
                out.push(Check::new("sideband_absence", worst, IDENTITY_TOL));
            }
            out
        }),
    ];
    let checks: Vec<Check> = jobs.par_iter().flat_map_iter(|job| job()).collect();
    ValidationReport::new(label, checks)
}
