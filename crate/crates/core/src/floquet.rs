//! Floquet states of the driven atom.
//!
//! The Hamiltonian `Σ_a ε_a |a⟩⟨a| + cos(ω_L t) Σ_{aa'} Ω_{aa'} |a⟩⟨a'|` has
//! periodic solutions `e^{-iω̃_j t} Σ_{al} e^{-ilω_L t} f_{jal} |a⟩`. Matching
//! harmonics turns the Schrödinger equation into a real symmetric,
//! block-tridiagonal eigenproblem in the (l, a) index, truncated at
//! `|l| <= l_max`. Every eigenpair `(ω, f_{a,l})` comes with replicas
//! `(ω + mω_L, f_{a,l+m})`; [`solve_floquet`] keeps one replica per band.
//!
//! Band `j` is the band adiabatically connected to bare level `j`, and its
//! stored replica is the one where the level-`j` component peaks at `l = 0`.
//! In the undriven limit this gives `ω̃_j = ε_j` and `f_{jal} = δ_{aj} δ_{l0}`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{AtomModel, DriveParams, NumericsConfig};

/// Quasienergies and real Fourier coefficients of the N Floquet bands.
#[derive(Clone, Debug, PartialEq)]
pub struct FloquetSolution {
    n: usize,
    l_max: usize,
    omega_l: f64,
    omega_tilde: Vec<f64>,
    /// `coeffs[j * dim + (l + l_max) * n + a]`
    coeffs: Vec<f64>,
    converged: bool,
    residual: f64,
}

impl FloquetSolution {
    pub fn n_levels(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn omega_l(&self) -> f64 {
        self.omega_l
    }

    pub fn omega_tilde(&self) -> &[f64] {
        &self.omega_tilde
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Truncation-convergence residual when converged, otherwise the
    /// eigen-recursion residual at this truncation.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    fn dim(&self) -> usize {
        self.n * (2 * self.l_max + 1)
    }

    /// `f_{jal}`, zero outside the truncation window.
    pub fn coeff(&self, j: usize, a: usize, l: i64) -> f64 {
        let lm = self.l_max as i64;
        if l < -lm || l > lm {
            return 0.0;
        }
        self.coeffs[j * self.dim() + (l + lm) as usize * self.n + a]
    }

    /// Coefficient vector of band `j` in `(l, a)` order.
    pub fn band(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.coeffs[j * d..(j + 1) * d]
    }

    /// ω̃_j folded into `(-ω_L/2, ω_L/2]`.
    pub fn omega_folded(&self, j: usize) -> f64 {
        fold_quasienergy(self.omega_tilde[j], self.omega_l)
    }

    /// Copy with band `j` multiplied by -1. Observables must not change.
    pub fn with_sign_flipped(&self, j: usize) -> Self {
        let mut out = self.clone();
        let d = self.dim();
        for x in &mut out.coeffs[j * d..(j + 1) * d] {
            *x = -*x;
        }
        out
    }

    /// Copy with ω̃_j offset by `delta`. Used to check oracle sensitivity.
    pub fn with_shifted_quasienergy(&self, j: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.omega_tilde[j] += delta;
        out
    }

    /// Copy of band `j` replaced by its replica `f_{ja,l+m}` with quasienergy
    /// `ω̃_j + mω_L`.
    pub fn with_replica(&self, j: usize, m: i64) -> Self {
        let mut out = self.clone();
        let shifted = shift_vector(self.band(j), self.n, self.l_max, m);
        let d = self.dim();
        out.coeffs[j * d..(j + 1) * d].copy_from_slice(&shifted);
        out.omega_tilde[j] += m as f64 * self.omega_l;
        out
    }

    /// Zero-padded copy at a larger truncation order.
    pub fn embedded(&self, l_max: usize) -> Self {
        assert!(l_max >= self.l_max, "embedding must not shrink the truncation");
        let n = self.n;
        let d = n * (2 * l_max + 1);
        let lm = self.l_max as i64;
        let mut coeffs = vec![0.0; n * d];
        for j in 0..n {
            for l in -lm..=lm {
                for a in 0..n {
                    coeffs[j * d + index(n, l_max, a, l)] = self.coeff(j, a, l);
                }
            }
        }
        FloquetSolution {
            l_max,
            coeffs,
            ..self.clone()
        }
    }

    /// Time-independent amplitudes `Σ_l f_{jal}` of `|F_j(0)⟩`.
    pub fn state_at_zero(&self, j: usize) -> Vec<f64> {
        let lm = self.l_max as i64;
        (0..self.n)
            .map(|a| (-lm..=lm).map(|l| self.coeff(j, a, l)).sum())
            .collect()
    }
}

/// Folds a quasienergy into `(-ω_L/2, ω_L/2]`.
pub fn fold_quasienergy(omega: f64, omega_l: f64) -> f64 {
    let k = (omega / omega_l + 0.5).ceil() - 1.0;
    omega - k * omega_l
}

#[inline]
fn index(n: usize, l_max: usize, a: usize, l: i64) -> usize {
    (l + l_max as i64) as usize * n + a
}

/// Truncated Floquet matrix of dimension `N(2 l_max + 1)`: diagonal blocks
/// `diag(ε_a - lω_L)`, off-diagonal blocks `Ω/2` between `l` and `l ± 1`.
pub fn build_quasienergy_matrix(model: &AtomModel, drive: &DriveParams, l_max: usize) -> DMatrix<f64> {
    let n = model.n_levels();
    let dim = n * (2 * l_max + 1);
    let lm = l_max as i64;
    let eps = model.energies();
    let rabi = model.rabi();
    let mut h = DMatrix::zeros(dim, dim);
    for l in -lm..=lm {
        for a in 0..n {
            let i = index(n, l_max, a, l);
            h[(i, i)] = eps[a] - l as f64 * drive.omega_l;
        }
        if l == lm {
            continue;
        }
        for a in 0..n {
            for b in 0..n {
                let c = 0.5 * rabi[(a, b)];
                if c != 0.0 {
                    let i = index(n, l_max, a, l);
                    let k = index(n, l_max, b, l + 1);
                    h[(i, k)] = c;
                    h[(k, i)] = c;
                }
            }
        }
    }
    h
}

/// `g_{a,l} = f_{a,l+m}`, zero-padded.
fn shift_vector(f: &[f64], n: usize, l_max: usize, m: i64) -> Vec<f64> {
    let lm = l_max as i64;
    let mut out = vec![0.0; f.len()];
    for l in -lm..=lm {
        let src = l + m;
        if src < -lm || src > lm {
            continue;
        }
        let (dst, s) = (index(n, l_max, 0, l), index(n, l_max, 0, src));
        out[dst..dst + n].copy_from_slice(&f[s..s + n]);
    }
    out
}

/// `Σ_{al} f_{a,l+m} g_{a,l}`.
fn shifted_overlap(f: &[f64], g: &[f64], n: usize, l_max: usize, m: i64) -> f64 {
    let lm = l_max as i64;
    let lo = (-lm).max(-lm - m);
    let hi = lm.min(lm - m);
    let mut acc = 0.0;
    for l in lo..=hi {
        let gi = index(n, l_max, 0, l);
        let fi = index(n, l_max, 0, l + m);
        for a in 0..n {
            acc += f[fi + a] * g[gi + a];
        }
    }
    acc
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rayleigh(h: &DMatrix<f64>, v: &[f64]) -> f64 {
    let hv = h * nalgebra::DVector::from_column_slice(v);
    dot(hv.as_slice(), v)
}

fn recursion_residual_of(h: &DMatrix<f64>, v: &[f64], omega: f64) -> f64 {
    let hv = h * nalgebra::DVector::from_column_slice(v);
    hv.iter()
        .zip(v)
        .map(|(x, y)| (x - omega * y).abs())
        .fold(0.0, f64::max)
}

struct Band {
    omega: f64,
    coeffs: Vec<f64>,
}

/// Picks one eigenvector per band from the full spectrum of the truncated
/// matrix: candidates in order of how centered they are in `l`, rejecting
/// any candidate that is (a combination of) l-shifted replicas of bands
/// already taken.
fn extract_bands(h: &DMatrix<f64>, n: usize, l_max: usize) -> Result<Vec<Band>> {
    let eig = SymmetricEigen::new(h.clone());
    let dim = h.nrows();
    let lm = l_max as i64;

    let mut order: Vec<(f64, usize)> = (0..dim)
        .map(|k| {
            let col = eig.eigenvectors.column(k);
            let center: f64 = (-lm..=lm)
                .map(|l| {
                    let i = index(n, l_max, 0, l);
                    let w: f64 = (0..n).map(|a| col[i + a] * col[i + a]).sum();
                    l as f64 * w
                })
                .sum();
            (center.abs(), k)
        })
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut bands: Vec<Band> = Vec::with_capacity(n);
    let mut best_rejected = 0.0_f64;
    for &(_, k) in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        for b in &bands {
            for m in -2 * lm..=2 * lm {
                let ov = shifted_overlap(&b.coeffs, &v, n, l_max, m);
                if ov.abs() > 1e-14 {
                    let r = shift_vector(&b.coeffs, n, l_max, m);
                    for (x, y) in v.iter_mut().zip(&r) {
                        *x -= ov * y;
                    }
                }
            }
        }
        let norm2 = dot(&v, &v);
        if norm2 > 0.5 {
            let norm = norm2.sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let omega = rayleigh(h, &v);
            bands.push(Band { omega, coeffs: v });
            if bands.len() == n {
                return Ok(bands);
            }
        } else {
            best_rejected = best_rejected.max(norm2);
        }
    }
    let overlaps: Vec<String> = bands
        .iter()
        .map(|b| format!("{:.6}", b.omega))
        .collect();
    Err(Error::Degenerate {
        stage: "floquet band grouping",
        detail: format!(
            "found {} of {} bands (quasienergies [{}]); largest residual norm of a rejected candidate {:.3e}",
            bands.len(),
            n,
            overlaps.join(", "),
            best_rejected
        ),
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Assigns bands to bare levels by maximal total weight `Σ_l f_{jal}²`.
/// Returns `level_of[band]`. Ties go to the assignment that gives lower bare
/// levels to bands with lower folded quasienergy.
fn assign_levels(bands: &[Band], n: usize, l_max: usize, omega_l: f64) -> Vec<usize> {
    let lm = l_max as i64;
    let weight = |b: &Band, a: usize| -> f64 {
        (-lm..=lm)
            .map(|l| b.coeffs[index(n, l_max, a, l)].powi(2))
            .sum()
    };
    let w: Vec<Vec<f64>> = bands
        .iter()
        .map(|b| (0..n).map(|a| weight(b, a)).collect())
        .collect();

    let mut by_folded: Vec<usize> = (0..bands.len()).collect();
    by_folded.sort_by(|&x, &y| {
        fold_quasienergy(bands[x].omega, omega_l)
            .total_cmp(&fold_quasienergy(bands[y].omega, omega_l))
            .then(x.cmp(&y))
    });

    if n > 7 {
        // greedy: heaviest (band, level) pairs first
        let mut pairs: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|j| (0..n).map(move |a| (j, a)))
            .map(|(j, a)| (w[j][a], j, a))
            .collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut level_of = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        for (_, j, a) in pairs {
            if level_of[j] == usize::MAX && !taken[a] {
                level_of[j] = a;
                taken[a] = true;
            }
        }
        return level_of;
    }

    let perms = permutations(n);
    let scores: Vec<f64> = perms
        .iter()
        .map(|p| (0..n).map(|j| w[j][p[j]]).sum())
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    perms
        .into_iter()
        .zip(scores)
        .filter(|(_, s)| *s >= best - 1e-9)
        .map(|(p, _)| {
            let key: Vec<usize> = by_folded.iter().map(|&j| p[j]).collect();
            (key, p)
        })
        .min_by(|x, y| x.0.cmp(&y.0))
        .map(|(_, p)| p)
        .expect("at least one permutation")
}

/// Solves the eigenproblem at a fixed truncation and returns labeled,
/// gauge-fixed bands. `converged` is false; `residual` is the recursion
/// residual.
pub fn solve_at_truncation(
    model: &AtomModel,
    drive: &DriveParams,
    l_max: usize,
) -> Result<FloquetSolution> {
    drive.validate()?;
    if l_max < 1 {
        return Err(Error::invalid("l_max", "must be >= 1"));
    }
    let n = model.n_levels();
    let h = build_quasienergy_matrix(model, drive, l_max);
    let bands = extract_bands(&h, n, l_max)?;
    let level_of = assign_levels(&bands, n, l_max, drive.omega_l);

    let dim = h.nrows();
    let lm = l_max as i64;
    let mut omega_tilde = vec![0.0; n];
    let mut coeffs = vec![0.0; n * dim];
    let mut residual = 0.0_f64;
    for (band, &j) in bands.iter().zip(&level_of) {
        // replica whose own-level component peaks at l = 0
        let mut peak_l = 0_i64;
        let mut peak = -1.0;
        let mut ls: Vec<i64> = (-lm..=lm).collect();
        ls.sort_by_key(|l| (l.abs(), *l));
        for l in ls {
            let x = band.coeffs[index(n, l_max, j, l)].abs();
            if x > peak + 1e-12 {
                peak = x;
                peak_l = l;
            }
        }
        let mut f = shift_vector(&band.coeffs, n, l_max, peak_l);
        let omega = band.omega + peak_l as f64 * drive.omega_l;

        // sign gauge: largest-magnitude coefficient positive
        let (imax, _) = f
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if f[imax] < 0.0 {
            f.iter_mut().for_each(|x| *x = -*x);
        }
        residual = residual.max(recursion_residual_of(&h, &f, omega));
        omega_tilde[j] = omega;
        coeffs[j * dim..(j + 1) * dim].copy_from_slice(&f);
    }

    Ok(FloquetSolution {
        n,
        l_max,
        omega_l: drive.omega_l,
        omega_tilde,
        coeffs,
        converged: false,
        residual,
    })
}

/// Largest mismatch between matching bands of two solutions, comparing each
/// band of `a` with the best-overlapping replica of a band of `b`.
pub fn solution_difference(a: &FloquetSolution, b: &FloquetSolution) -> f64 {
    let n = a.n;
    let lm_b = b.l_max as i64;
    let mut worst = 0.0_f64;
    for j in 0..n {
        // embed band j of `a` into b's truncation
        let mut fa = vec![0.0; b.dim()];
        let la = a.l_max as i64;
        for l in -la.min(lm_b)..=la.min(lm_b) {
            for x in 0..n {
                fa[index(n, b.l_max, x, l)] = a.coeff(j, x, l);
            }
        }
        let mut best = (0.0_f64, 0usize, 0i64);
        for jb in 0..n {
            for m in -2 * lm_b..=2 * lm_b {
                let ov = shifted_overlap(&fa, b.band(jb), n, b.l_max, m);
                if ov.abs() > best.0.abs() {
                    best = (ov, jb, m);
                }
            }
        }
        let (ov, jb, m) = best;
        let shifted = shift_vector(&fa, n, b.l_max, m);
        let s = ov.signum();
        let df = shifted
            .iter()
            .zip(b.band(jb))
            .map(|(x, y)| (s * x - y).abs())
            .fold(0.0, f64::max);
        let dw = (a.omega_tilde[j] + m as f64 * a.omega_l - b.omega_tilde[jb]).abs();
        worst = worst.max(df).max(dw);
    }
    worst
}

/// Solves the Floquet problem, doubling the truncation from
/// `numerics.l_max_start` until the bands agree with a solution at twice the
/// truncation to within `eig_tol`. The returned truncation never exceeds
/// `numerics.l_max`.
pub fn solve_floquet(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
) -> Result<FloquetSolution> {
    numerics.validate()?;
    let cap = numerics.l_max;
    let mut l = numerics.l_max_start;
    let mut current = solve_at_truncation(model, drive, l)?;
    loop {
        let verify_l = 2 * l;
        let verify = solve_at_truncation(model, drive, verify_l)?;
        let diff = solution_difference(&current, &verify);
        if diff < numerics.eig_tol {
            current.converged = true;
            current.residual = diff;
            return Ok(current);
        }
        if l >= cap {
            return Err(Error::NotConverged {
                stage: "floquet truncation",
                residual: diff,
            });
        }
        let next = (2 * l).min(cap);
        current = if next == verify_l {
            verify
        } else {
            solve_at_truncation(model, drive, next)?
        };
        l = next;
    }
}

/// Dynamical Stark shift `|ω̃₁ - ω̃₀| - ω₀` of a two-level atom, using the
/// adiabatic replicas stored in the solution.
pub fn stark_shift(solution: &FloquetSolution, model: &AtomModel) -> Result<f64> {
    if solution.n != 2 || model.n_levels() != 2 {
        return Err(Error::invalid(
            "model",
            format!("stark shift needs a two-level atom, got N = {}", solution.n),
        ));
    }
    Ok((solution.omega_tilde[1] - solution.omega_tilde[0]).abs() - model.omega0())
}

/// Stark shift along increasing Rabi strengths, following the branch
/// continuously: at each point the replica offset `mω_L` is the one closest
/// to the previous value, starting from `Δω = 0` at vanishing drive.
pub fn stark_shift_curve(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
    rabi_values: &[f64],
) -> Result<Vec<f64>> {
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(rabi_values.len());
    for &r in rabi_values {
        let m = model.with_rabi_strength(r)?;
        let fs = solve_floquet(&m, drive, numerics)?;
        stark_shift(&fs, &m)?;
        let d = fs.omega_tilde[1] - fs.omega_tilde[0];
        let w = drive.omega_l;
        let k0 = ((prev + m.omega0() - d.abs()) / w).round() as i64;
        let best = (k0 - 2..=k0 + 2)
            .flat_map(|k| [(d + k as f64 * w).abs(), (d - k as f64 * w).abs()])
            .map(|x| x - m.omega0())
            .min_by(|x, y| (x - prev).abs().total_cmp(&(y - prev).abs()))
            .expect("nonempty");
        out.push(best);
        prev = best;
    }
    Ok(out)
}

/// `max |Σ_{al} f_{jal} f_{j'a,l+m} - δ_{jj'} δ_{m0}|` over all j, j', m.
pub fn orthogonality_residual(fs: &FloquetSolution) -> f64 {
    let lm = fs.l_max as i64;
    let mut worst = 0.0_f64;
    for j in 0..fs.n {
        for jp in 0..fs.n {
            for m in -2 * lm..=2 * lm {
                let s = shifted_overlap(fs.band(jp), fs.band(j), fs.n, fs.l_max, m);
                let expect = if j == jp && m == 0 { 1.0 } else { 0.0 };
                worst = worst.max((s - expect).abs());
            }
        }
    }
    worst
}

/// `max |Σ_{jm} f_{ja,l+m} f_{ja',l'+m} - δ_{aa'} δ_{ll'}|` for
/// `|l|, |l'| <= interior`.
pub fn completeness_residual(fs: &FloquetSolution, interior: usize) -> f64 {
    let lm = fs.l_max as i64;
    let li = interior.min(fs.l_max) as i64;
    let mut worst = 0.0_f64;
    for a in 0..fs.n {
        for ap in 0..fs.n {
            for l in -li..=li {
                for lp in -li..=li {
                    let mut s = 0.0;
                    for j in 0..fs.n {
                        for m in -2 * lm..=2 * lm {
                            s += fs.coeff(j, a, l + m) * fs.coeff(j, ap, lp + m);
                        }
                    }
                    let expect = if a == ap && l == lp { 1.0 } else { 0.0 };
                    worst = worst.max((s - expect).abs());
                }
            }
        }
    }
    worst
}

/// Distance of `Σ_j ω̃_j - Σ_a ε_a` from the nearest multiple of ω_L.
pub fn sum_rule_residual(fs: &FloquetSolution, model: &AtomModel) -> f64 {
    let d: f64 = fs.omega_tilde.iter().sum::<f64>() - model.energies().iter().sum::<f64>();
    let w = fs.omega_l;
    (d - (d / w).round() * w).abs()
}

/// Max-norm residual of the defining recursion for every band, evaluated at
/// the solution's own truncation.
pub fn recursion_residual(fs: &FloquetSolution, model: &AtomModel, drive: &DriveParams) -> f64 {
    let h = build_quasienergy_matrix(model, drive, fs.l_max);
    (0..fs.n)
        .map(|j| recursion_residual_of(&h, fs.band(j), fs.omega_tilde[j]))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scenario;

    fn two_level(rabi: f64) -> AtomModel {
        Scenario::TwoLevel.model(rabi).unwrap()
    }

    #[test]
    fn undriven_matrix_is_diagonal() {
        let h = build_quasienergy_matrix(&two_level(0.0), &DriveParams::new(0.8).unwrap(), 1);
        assert_eq!(h.nrows(), 6);
        let expected = [0.8, 1.8, 0.0, 1.0, -0.8, 0.2];
        for i in 0..6 {
            assert!((h[(i, i)] - expected[i]).abs() < 1e-15);
            for k in 0..6 {
                if k != i {
                    assert_eq!(h[(i, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn driven_matrix_has_half_rabi_couplings() {
        let h = build_quasienergy_matrix(&two_level(0.4), &DriveParams::new(1.2).unwrap(), 1);
        let mut offdiag = Vec::new();
        for i in 0..6 {
            for k in 0..6 {
                assert_eq!(h[(i, k)].to_bits(), h[(k, i)].to_bits());
                if i < k && h[(i, k)] != 0.0 {
                    offdiag.push(h[(i, k)]);
                }
            }
        }
        // (g,l)<->(e,l+1) and (e,l)<->(g,l+1) for l = -1, 0
        assert_eq!(offdiag.len(), 4);
        assert!(offdiag.iter().all(|&x| x == 0.2));
    }

    #[test]
    fn undriven_solution_is_bare() {
        let fs = solve_floquet(
            &two_level(0.0),
            &DriveParams::new(0.8).unwrap(),
            &NumericsConfig::default(),
        )
        .unwrap();
        assert!(fs.converged());
        assert_eq!(fs.omega_tilde(), &[0.0, 1.0]);
        assert!((fs.omega_folded(0) - 0.0).abs() < 1e-15);
        assert!((fs.omega_folded(1) - 0.2).abs() < 1e-12);
        for j in 0..2 {
            for a in 0..2 {
                for l in -3..=3 {
                    let expect = if a == j && l == 0 { 1.0 } else { 0.0 };
                    assert_eq!(fs.coeff(j, a, l), expect);
                }
            }
        }
    }

    #[test]
    fn folding_window_is_half_open() {
        assert_eq!(fold_quasienergy(0.5, 1.0), 0.5);
        assert_eq!(fold_quasienergy(-0.5, 1.0), 0.5);
        assert!((fold_quasienergy(1.0, 0.8) - 0.2).abs() < 1e-15);
        assert!((fold_quasienergy(-2.3, 1.0) - -0.3).abs() < 1e-12);
    }

    #[test]
    fn driven_two_level_satisfies_identities() {
        let model = two_level(0.4);
        let drive = DriveParams::new(1.2).unwrap();
        let fs = solve_floquet(&model, &drive, &NumericsConfig::default()).unwrap();
        assert!(fs.converged());
        assert!(orthogonality_residual(&fs) < 1e-10);
        assert!(completeness_residual(&fs, fs.l_max() / 2) < 1e-10);
        assert!(sum_rule_residual(&fs, &model) < 1e-10);
        assert!(recursion_residual(&fs, &model, &drive) < 1e-10);
    }

    #[test]
    fn replicas_satisfy_recursion() {
        let model = two_level(0.4);
        let drive = DriveParams::new(1.2).unwrap();
        let fs = solve_floquet(&model, &drive, &NumericsConfig::default()).unwrap();
        let wide = fs.embedded(fs.l_max() + 4);
        for m in [-2, -1, 1, 2] {
            for j in 0..2 {
                let r = wide.with_replica(j, m);
                assert!(recursion_residual(&r, &model, &drive) < 1e-10, "m = {m}");
            }
        }
    }

    #[test]
    fn interior_spectrum_is_truncation_independent() {
        // both truncations converged: folded central eigenvalues must agree
        let model = two_level(0.4);
        let drive = DriveParams::new(1.2).unwrap();
        let folded = |l_max: usize| {
            let h = build_quasienergy_matrix(&model, &drive, l_max);
            let eig = SymmetricEigen::new(h);
            let mut v: Vec<f64> = eig
                .eigenvalues
                .iter()
                .filter(|x| x.abs() < 0.6)
                .map(|&x| fold_quasienergy(x, drive.omega_l))
                .collect();
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
            v
        };
        let a = folded(16);
        let b = folded(17);
        assert_eq!(a.len(), 2);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn stark_shift_vanishes_without_drive() {
        let fs = solve_floquet(
            &two_level(0.0),
            &DriveParams::new(1.2).unwrap(),
            &NumericsConfig::default(),
        )
        .unwrap();
        assert_eq!(stark_shift(&fs, &two_level(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn stark_shift_sign_depends_on_drive_frequency() {
        let model = two_level(0.4);
        let num = NumericsConfig::default();
        let red = solve_floquet(&model, &DriveParams::new(0.9).unwrap(), &num).unwrap();
        let blue = solve_floquet(&model, &DriveParams::new(1.2).unwrap(), &num).unwrap();
        let s_red = stark_shift(&red, &model).unwrap();
        let s_blue = stark_shift(&blue, &model).unwrap();
        assert!(s_red > 0.0, "{s_red}");
        assert!(s_blue < 0.0, "{s_blue}");
    }

    #[test]
    fn stark_shift_rejects_three_levels() {
        let m = Scenario::LambdaA.model(0.3).unwrap();
        let fs = solve_floquet(&m, &DriveParams::new(0.45).unwrap(), &NumericsConfig::default())
            .unwrap();
        assert!(stark_shift(&fs, &m).is_err());
    }

    #[test]
    fn truncation_cap_reports_non_convergence() {
        let num = NumericsConfig {
            l_max: 1,
            l_max_start: 1,
            ..NumericsConfig::default()
        };
        let err = solve_floquet(&two_level(0.6), &DriveParams::new(0.3).unwrap(), &num).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
    }

    #[test]
    fn three_level_bands_are_labeled_by_bare_level() {
        for sc in [Scenario::LambdaA, Scenario::LambdaB, Scenario::LambdaC] {
            let m = sc.model(0.3).unwrap();
            let fs = solve_floquet(&m, &DriveParams::new(0.45).unwrap(), &NumericsConfig::default())
                .unwrap();
            for j in 0..3 {
                // the stored replica carries its own level at l = 0
                let own = fs.coeff(j, j, 0).abs();
                for l in -5..=5 {
                    assert!(fs.coeff(j, j, l).abs() <= own + 1e-12);
                }
            }
            assert!(orthogonality_residual(&fs) < 1e-10);
        }
    }
}
