//! Second route to the peak probabilities through the amplitude tensors N and
//! M of the close-approach limit, where the coupling vector is a constant that
//! cancels against the undriven normalization.

use num_complex::Complex64;

use super::{assemble_peaks, peak_window, PeakOptions, PeakSet};
use crate::error::{Error, Result};
use crate::floquet::FloquetSolution;
use crate::lindblad::SteadyState;
use crate::model::AtomModel;

/// N[j][j'][l] = Σ_{aa'l'} f_{jal'} f_{j'a',l+l'} d_{aa'} for l in [-2L, 2L],
/// flattened as ((j * n + j') * (4L + 1) + l + 2L).
pub fn appendix_n_tensor(fs: &FloquetSolution, model: &AtomModel) -> Vec<Complex64> {
    let n = fs.n_levels();
    let lm = fs.l_max() as i64;
    let span = 2 * lm;
    let width = (2 * span + 1) as usize;
    let d = model.dipole_ratio();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n * width];
    for j in 0..n {
        for jp in 0..n {
            for l in -span..=span {
                let mut acc = 0.0;
                for lp in -lm..=lm {
                    for a in 0..n {
                        let fa = fs.coeff(j, a, lp);
                        if fa == 0.0 {
                            continue;
                        }
                        for ap in 0..n {
                            acc += fa * fs.coeff(jp, ap, l + lp) * d[(a, ap)];
                        }
                    }
                }
                out[(j * n + jp) * width + (l + span) as usize] = Complex64::new(acc, 0.0);
            }
        }
    }
    out
}

/// Peak probabilities from P_{jj'l} = Re{conj(M_{jj',-l}) N_{jj',-l}} with
/// M_{jj'l} = Σ_{j''l'} ρ̃_{j''j',l-l'} N_{jj''l'}.
pub fn appendix_peaks_oracle(
    fs: &FloquetSolution,
    ss: &SteadyState,
    model: &AtomModel,
    opts: &PeakOptions,
) -> Result<PeakSet> {
    let n = fs.n_levels();
    if ss.n_levels() != n || model.n_levels() != n {
        return Err(Error::DimensionMismatch("level counts differ".into()));
    }
    let lm = fs.l_max() as i64;
    let span = 2 * lm;
    let width = (2 * span + 1) as usize;
    let big_n = appendix_n_tensor(fs, model);
    let n_at = |j: usize, jp: usize, l: i64| {
        if l.abs() > span {
            Complex64::new(0.0, 0.0)
        } else {
            big_n[(j * n + jp) * width + (l + span) as usize]
        }
    };
    let window = peak_window(fs.l_max());
    let mut raw = Vec::new();
    for j in 0..n {
        for jp in 0..n {
            for l in -window..=window {
                if j == jp && l == 0 {
                    continue;
                }
                let target = -l;
                let mut m = Complex64::new(0.0, 0.0);
                for jpp in 0..n {
                    for lp in -span..=span {
                        m += ss.rho_floquet(jpp, jp, target - lp)? * n_at(j, jpp, lp);
                    }
                }
                let prob = (m.conj() * n_at(j, jp, target)).re;
                raw.push((j, jp, l, prob));
            }
        }
    }
    Ok(assemble_peaks(raw, fs, window, opts))
}
