use rayon::prelude::*;
use serde::Serialize;

use super::{broaden_spectrum, compute_i, compute_peaks, CouplingTensor, PeakOptions, PeakSet};
use crate::error::{Error, Result};
use crate::floquet::{solve_floquet, FloquetSolution};
use crate::lindblad::{steady_state_fourier, to_floquet_basis, SteadyState};
use crate::model::{AtomModel, DriveParams, NumericsConfig};

/// Everything computed for one drive setting.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub floquet: FloquetSolution,
    pub steady: SteadyState,
    pub coupling: CouplingTensor,
    pub peaks: PeakSet,
}

/// Floquet bands, steady state in both bases, coupling tensor and peaks.
pub fn run_point(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
    opts: &PeakOptions,
) -> Result<PointResult> {
    let floquet = solve_floquet(model, drive, numerics)?;
    let steady = steady_state_fourier(model, drive, numerics, floquet.l_max())?;
    let steady = to_floquet_basis(&steady, &floquet)?;
    let coupling = compute_i(&floquet, model)?;
    let peaks = compute_peaks(&coupling, &steady, &floquet, opts)?;
    Ok(PointResult {
        floquet,
        steady,
        coupling,
        peaks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Overall light-atom coupling strength, the pattern kept fixed.
    Rabi(Vec<f64>),
    OmegaL(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Rabi(_) => "rabi",
            SweepAxis::OmegaL(_) => "omega_l",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::Rabi(v) | SweepAxis::OmegaL(v) => v,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MapRow {
    pub value: f64,
    pub gamma: Option<Vec<f64>>,
    pub peaks: Option<PeakSet>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct MapResult {
    pub axis: SweepAxis,
    pub omega: Vec<f64>,
    pub rows: Vec<MapRow>,
}

impl MapResult {
    pub fn failed_rows(&self) -> impl Iterator<Item = (usize, &MapRow)> {
        self.rows.iter().enumerate().filter(|(_, r)| r.error.is_some())
    }
}

fn map_row(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
    opts: &PeakOptions,
    axis: &SweepAxis,
    value: f64,
    omega: &[f64],
) -> Result<(Vec<f64>, PeakSet)> {
    let (model, drive) = match axis {
        SweepAxis::Rabi(_) => (model.with_rabi_strength(value)?, *drive),
        SweepAxis::OmegaL(_) => (model.clone(), DriveParams::new(value)?),
    };
    let point = run_point(&model, &drive, numerics, opts)?;
    let spectrum = broaden_spectrum(&point.peaks, numerics.broadening_fwhm, omega)?;
    Ok((spectrum.gamma, point.peaks))
}

/// Runs the full pipeline for every value on the sweep axis in parallel.
/// Rows come back in axis order; a failing row carries its error message and
/// does not stop the others.
pub fn sweep_map(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
    opts: &PeakOptions,
    axis: SweepAxis,
    omega: &[f64],
) -> Result<MapResult> {
    if axis.values().len() < 2 {
        return Err(Error::invalid(
            "sweep",
            format!("{} range needs at least 2 points", axis.name()),
        ));
    }
    if omega.is_empty() {
        return Err(Error::invalid("omega axis", "must not be empty"));
    }
    numerics.validate()?;
    let rows = axis
        .values()
        .par_iter()
        .map(|&value| match map_row(model, drive, numerics, opts, &axis, value, omega) {
            Ok((gamma, peaks)) => MapRow {
                value,
                gamma: Some(gamma),
                peaks: Some(peaks),
                error: None,
            },
            Err(e) => MapRow {
                value,
                gamma: None,
                peaks: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(MapResult {
        axis,
        omega: omega.to_vec(),
        rows,
    })
}
