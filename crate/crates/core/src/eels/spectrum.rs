use serde::Serialize;

use super::PeakSet;
use crate::error::{Error, Result};

/// Broadened loss/gain spectrum, in units of the undriven peak area per ω₀.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumGrid {
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub fwhm: f64,
}

impl SpectrumGrid {
    /// Trapezoid integral of the spectrum over its axis.
    pub fn area(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.gamma.windows(2))
            .map(|(w, g)| 0.5 * (w[1] - w[0]) * (g[0] + g[1]))
            .sum()
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { hi } else { lo + k as f64 * step })
                .collect()
        }
    }
}

/// Sum of unit-area Gaussians of the given FWHM weighted by peak probability.
/// The zero-loss peak is not part of the peak set and so never appears.
pub fn broaden_spectrum(peaks: &PeakSet, fwhm: f64, omega_axis: &[f64]) -> Result<SpectrumGrid> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::invalid("broadening_fwhm", "must be finite and > 0"));
    }
    if omega_axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("omega axis", "must be strictly increasing"));
    }
    let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let gamma = omega_axis
        .iter()
        .map(|&w| {
            peaks
                .entries
                .iter()
                .map(|p| {
                    let z = (w - p.omega) / sigma;
                    p.prob * norm * (-0.5 * z * z).exp()
                })
                .sum()
        })
        .collect();
    Ok(SpectrumGrid {
        omega: omega_axis.to_vec(),
        gamma,
        fwhm,
    })
}
