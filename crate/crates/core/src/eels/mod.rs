//! Electron energy-loss and gain peaks of the illuminated atom.

pub mod appendix;
pub mod coupling;
pub mod spectrum;
pub mod sweep;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::FloquetSolution;
use crate::lindblad::SteadyState;
use crate::model::AtomModel;

pub use appendix::{appendix_n_tensor, appendix_peaks_oracle};
pub use coupling::{bessel_k1, coupling_factor, suppression, CouplingGeometry};
pub use spectrum::{broaden_spectrum, linspace, SpectrumGrid};
pub use sweep::{run_point, sweep_map, MapResult, MapRow, PointResult, SweepAxis};

/// Transition matrix elements between Floquet bands, I[j][j'][l] for
/// l in [-2L, 2L].
#[derive(Clone, Debug)]
pub struct CouplingTensor {
    n: usize,
    span: i64,
    data: Vec<f64>,
}

impl CouplingTensor {
    pub fn n_levels(&self) -> usize {
        self.n
    }

    /// Largest |l| stored.
    pub fn span(&self) -> i64 {
        self.span
    }

    pub fn get(&self, j: usize, jp: usize, l: i64) -> f64 {
        if l.abs() > self.span {
            return 0.0;
        }
        let width = (2 * self.span + 1) as usize;
        self.data[(j * self.n + jp) * width + (l + self.span) as usize]
    }

    /// max |I[j][j'][l] - I[j'][j][-l]|
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for jp in 0..self.n {
                for l in -self.span..=self.span {
                    worst = worst.max((self.get(j, jp, l) - self.get(jp, j, -l)).abs());
                }
            }
        }
        worst
    }
}

/// I_{jj'l} = Σ_{aa'l'} f_{jal'} f_{j'a',l'-l} d_{aa'}.
pub fn compute_i(fs: &FloquetSolution, model: &AtomModel) -> Result<CouplingTensor> {
    let n = model.n_levels();
    if fs.n_levels() != n {
        return Err(Error::DimensionMismatch(format!(
            "Floquet solution has {} levels, model has {n}",
            fs.n_levels()
        )));
    }
    let lm = fs.l_max() as i64;
    let span = 2 * lm;
    let width = (2 * span + 1) as usize;
    let d = model.dipole_ratio();
    // g[j'][a][l'] = Σ_{a'} d_{a a'} f_{j' a' l'}
    let g: Vec<Vec<f64>> = (0..n)
        .map(|jp| {
            let mut out = vec![0.0; n * (2 * lm + 1) as usize];
            for a in 0..n {
                for lp in -lm..=lm {
                    out[a * (2 * lm + 1) as usize + (lp + lm) as usize] =
                        (0..n).map(|ap| d[(a, ap)] * fs.coeff(jp, ap, lp)).sum();
                }
            }
            out
        })
        .collect();
    let mut data = vec![0.0; n * n * width];
    for j in 0..n {
        for jp in 0..n {
            for l in -span..=span {
                let mut acc = 0.0;
                for a in 0..n {
                    for lp in -lm..=lm {
                        let shifted = lp - l;
                        if shifted.abs() > lm {
                            continue;
                        }
                        acc += fs.coeff(j, a, lp)
                            * g[jp][a * (2 * lm + 1) as usize + (shifted + lm) as usize];
                    }
                }
                data[(j * n + jp) * width + (l + span) as usize] = acc;
            }
        }
    }
    Ok(CouplingTensor { n, span, data })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub j: usize,
    pub jp: usize,
    pub l: i64,
    pub omega: f64,
    pub prob: f64,
}

impl Peak {
    pub fn is_sideband(&self) -> bool {
        self.j == self.jp
    }
}

/// Loss and gain peaks, sorted by decreasing |prob|.
#[derive(Clone, Debug, Serialize)]
pub struct PeakSet {
    pub entries: Vec<Peak>,
    /// Largest |l| retained.
    pub window: i64,
    pub sum_prob: f64,
    /// Entries more negative than the pruning tolerance.
    pub negative: Vec<Peak>,
}

impl PeakSet {
    pub fn find(&self, j: usize, jp: usize, l: i64) -> Option<&Peak> {
        self.entries
            .iter()
            .find(|p| p.j == j && p.jp == jp && p.l == l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakOptions {
    pub peak_tol: f64,
    pub geometry: Option<CouplingGeometry>,
}

impl PeakOptions {
    pub fn new(peak_tol: f64) -> Self {
        PeakOptions {
            peak_tol,
            geometry: None,
        }
    }
}

pub(crate) fn peak_window(l_max: usize) -> i64 {
    (l_max as i64 - 2).max(0)
}

/// Sorts, prunes and totals raw (j, j', l, prob) values.
pub(crate) fn assemble_peaks(
    raw: Vec<(usize, usize, i64, f64)>,
    fs: &FloquetSolution,
    window: i64,
    opts: &PeakOptions,
) -> PeakSet {
    let w = fs.omega_tilde();
    let mut entries = Vec::new();
    let mut negative = Vec::new();
    for (j, jp, l, mut prob) in raw {
        let omega = w[j] - w[jp] + l as f64 * fs.omega_l();
        if let Some(geom) = &opts.geometry {
            let s = coupling_factor(omega, geom);
            prob *= s * s;
        }
        if prob.abs() < opts.peak_tol {
            continue;
        }
        let peak = Peak {
            j,
            jp,
            l,
            omega,
            prob,
        };
        if prob < -opts.peak_tol {
            negative.push(peak);
        }
        entries.push(peak);
    }
    entries.sort_by(|a, b| {
        b.prob
            .abs()
            .total_cmp(&a.prob.abs())
            .then((a.j, a.jp, a.l).cmp(&(b.j, b.jp, b.l)))
    });
    let sum_prob = entries.iter().map(|p| p.prob).sum();
    PeakSet {
        entries,
        window,
        sum_prob,
        negative,
    }
}

/// P_{jj'l} = I_{jj'l} Σ_{j''l'} I_{jj''l'} Re ρ̃_{j''j',l'-l}, normalized to
/// the undriven loss peak. The zero-loss combination j = j', l = 0 is skipped.
pub fn compute_peaks(
    coupling: &CouplingTensor,
    ss: &SteadyState,
    fs: &FloquetSolution,
    opts: &PeakOptions,
) -> Result<PeakSet> {
    let n = coupling.n;
    if ss.n_levels() != n || fs.n_levels() != n {
        return Err(Error::DimensionMismatch(format!(
            "coupling has {n} levels, steady state {}, Floquet solution {}",
            ss.n_levels(),
            fs.n_levels()
        )));
    }
    if !ss.has_floquet() {
        return Err(Error::MissingFloquetBasis);
    }
    if ss.l_max() != fs.l_max() || coupling.span != 2 * fs.l_max() as i64 {
        return Err(Error::DimensionMismatch(
            "coupling, steady state and Floquet truncations differ".into(),
        ));
    }
    let window = peak_window(fs.l_max());
    let lm = ss.l_max() as i64;
    let span = coupling.span;
    let mut raw = Vec::new();
    for j in 0..n {
        for jp in 0..n {
            for l in -window..=window {
                if j == jp && l == 0 {
                    continue;
                }
                let direct = coupling.get(j, jp, l);
                if direct == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for jpp in 0..n {
                    for lp in (l - lm).max(-span)..=(l + lm).min(span) {
                        acc += coupling.get(j, jpp, lp) * ss.rho_floquet(jpp, jp, lp - l)?.re;
                    }
                }
                raw.push((j, jp, l, direct * acc));
            }
        }
    }
    Ok(assemble_peaks(raw, fs, window, opts))
}
