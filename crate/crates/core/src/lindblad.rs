//! Driven-dissipative steady state.
//!
//! Both solvers return the Fourier coefficients of the drive-periodic density
//! matrix, `rho(t) = sum_l exp(-i l w t) rho_l`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::FloquetSolution;
use crate::model::{AtomModel, DriveParams, NumericsConfig};

type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Singular values below this mark a second null direction.
const NULLSPACE_GAP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    FourierNullspace,
    TimePropagation,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    n: usize,
    l_max: usize,
    rho_level: Vec<C64>,
    rho_floquet: Option<Vec<C64>>,
    method: SteadyMethod,
    residual: f64,
    gap: Option<f64>,
}

fn slot(n: usize, l_max: usize, a: usize, b: usize, l: i64) -> Option<usize> {
    let shifted = l + l_max as i64;
    if shifted < 0 || shifted > 2 * l_max as i64 {
        return None;
    }
    Some(shifted as usize * n * n + a * n + b)
}

impl SteadyState {
    pub fn n_levels(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn method(&self) -> SteadyMethod {
        self.method
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Second-smallest singular value of the Fourier superoperator, if computed.
    pub fn nullspace_gap(&self) -> Option<f64> {
        self.gap
    }

    /// Level-basis coefficient; zero outside the harmonic window.
    pub fn rho(&self, a: usize, b: usize, l: i64) -> C64 {
        slot(self.n, self.l_max, a, b, l).map_or(C64::new(0.0, 0.0), |i| self.rho_level[i])
    }

    pub fn has_floquet(&self) -> bool {
        self.rho_floquet.is_some()
    }

    pub fn rho_floquet(&self, j: usize, jp: usize, l: i64) -> Result<C64> {
        let data = self.rho_floquet.as_ref().ok_or(Error::MissingFloquetBasis)?;
        Ok(slot(self.n, self.l_max, j, jp, l).map_or(C64::new(0.0, 0.0), |i| data[i]))
    }

    /// Time-averaged level populations.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.rho(a, a, 0).re).collect()
    }

    /// Time-averaged Floquet-band populations.
    pub fn floquet_populations(&self) -> Result<Vec<f64>> {
        (0..self.n)
            .map(|j| self.rho_floquet(j, j, 0).map(|z| z.re))
            .collect()
    }

    fn pairing_residual(n: usize, l_max: usize, data: &[C64]) -> f64 {
        let lm = l_max as i64;
        let mut worst: f64 = 0.0;
        for l in -lm..=lm {
            for a in 0..n {
                for b in 0..n {
                    let x = data[slot(n, l_max, a, b, l).unwrap()];
                    let y = data[slot(n, l_max, b, a, -l).unwrap()];
                    worst = worst.max((x.conj() - y).norm());
                }
            }
        }
        worst
    }

    /// max |conj(rho_{ab,l}) - rho_{ba,-l}|
    pub fn hermiticity_residual(&self) -> f64 {
        Self::pairing_residual(self.n, self.l_max, &self.rho_level)
    }

    pub fn floquet_hermiticity_residual(&self) -> Result<f64> {
        let data = self.rho_floquet.as_ref().ok_or(Error::MissingFloquetBasis)?;
        Ok(Self::pairing_residual(self.n, self.l_max, data))
    }

    /// Deviation of the trace from 1 at l = 0 and from 0 elsewhere.
    pub fn trace_residual(&self) -> f64 {
        let lm = self.l_max as i64;
        let mut worst: f64 = 0.0;
        for l in -lm..=lm {
            let tr: C64 = (0..self.n).map(|a| self.rho(a, a, l)).sum();
            let target = if l == 0 { 1.0 } else { 0.0 };
            worst = worst.max((tr - target).norm());
        }
        worst
    }

    /// How far the averaged populations stray outside [0, 1].
    pub fn population_violation(&self) -> f64 {
        self.populations()
            .iter()
            .map(|&p| (-p).max(p - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest elementwise difference of the level-basis coefficients.
    pub fn max_difference(&self, other: &SteadyState) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} levels",
                self.n, other.n
            )));
        }
        let lm = self.l_max.max(other.l_max) as i64;
        let mut worst: f64 = 0.0;
        for l in -lm..=lm {
            for a in 0..self.n {
                for b in 0..self.n {
                    worst = worst.max((self.rho(a, b, l) - other.rho(a, b, l)).norm());
                }
            }
        }
        Ok(worst)
    }

    /// Density matrix at time t rebuilt from the Fourier series.
    pub fn matrix_at(&self, t: f64, omega_l: f64) -> DMatrix<C64> {
        let lm = self.l_max as i64;
        DMatrix::from_fn(self.n, self.n, |a, b| {
            (-lm..=lm)
                .map(|l| self.rho(a, b, l) * C64::from_polar(1.0, -(l as f64) * omega_l * t))
                .sum()
        })
    }
}

/// Right-hand side of the master equation on flat row-major N x N buffers.
struct Generator {
    n: usize,
    energies: Vec<f64>,
    rabi: Vec<f64>,
    gain: Vec<f64>,
    out_rate: Vec<f64>,
    omega_l: f64,
}

impl Generator {
    fn new(model: &AtomModel, drive: &DriveParams) -> Self {
        let n = model.n_levels();
        let decay = model.decay();
        Generator {
            n,
            energies: model.energies().to_vec(),
            rabi: (0..n * n).map(|k| model.rabi()[(k / n, k % n)]).collect(),
            // gain[c*n + a] = rate c -> a
            gain: (0..n * n).map(|k| decay[(k / n, k % n)]).collect(),
            out_rate: (0..n).map(|a| decay.row(a).sum()).collect(),
            omega_l: drive.omega_l,
        }
    }

    fn apply(&self, rho: &[C64], t: f64, out: &mut [C64]) {
        let n = self.n;
        let drive = (self.omega_l * t).cos();
        for a in 0..n {
            for b in 0..n {
                let mut comm = (self.energies[a] - self.energies[b]) * rho[a * n + b];
                let mut mix = C64::new(0.0, 0.0);
                for c in 0..n {
                    mix += self.rabi[a * n + c] * rho[c * n + b] - rho[a * n + c] * self.rabi[c * n + b];
                }
                comm += drive * mix;
                let mut value = -I * comm - 0.5 * (self.out_rate[a] + self.out_rate[b]) * rho[a * n + b];
                if a == b {
                    for c in 0..n {
                        value += self.gain[c * n + a] * rho[c * n + c];
                    }
                }
                out[a * n + b] = value;
            }
        }
    }
}

/// d(rho)/dt of the driven master equation at time t.
pub fn lindblad_rhs(
    rho: &DMatrix<C64>,
    t: f64,
    model: &AtomModel,
    drive: &DriveParams,
) -> DMatrix<C64> {
    let n = model.n_levels();
    let generator = Generator::new(model, drive);
    let flat: Vec<C64> = (0..n * n).map(|k| rho[(k / n, k % n)]).collect();
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    generator.apply(&flat, t, &mut out);
    DMatrix::from_fn(n, n, |a, b| out[a * n + b])
}

/// Superoperator acting on stacked coefficients, rows ordered like `slot`.
fn fourier_superoperator(model: &AtomModel, drive: &DriveParams, l_max: usize) -> DMatrix<C64> {
    let n = model.n_levels();
    let dim = n * n * (2 * l_max + 1);
    let eps = model.energies();
    let rabi = model.rabi();
    let decay = model.decay();
    let out_rate: Vec<f64> = (0..n).map(|a| decay.row(a).sum()).collect();
    let lm = l_max as i64;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for l in -lm..=lm {
        for a in 0..n {
            for b in 0..n {
                let row = slot(n, l_max, a, b, l).unwrap();
                m[(row, row)] += C64::new(
                    eps[a] - eps[b] - l as f64 * drive.omega_l,
                    -0.5 * (out_rate[a] + out_rate[b]),
                );
                if a == b {
                    for c in 0..n {
                        m[(row, slot(n, l_max, c, c, l).unwrap())] += I * decay[(c, a)];
                    }
                }
                for nb in [l - 1, l + 1] {
                    for c in 0..n {
                        if let Some(col) = slot(n, l_max, c, b, nb) {
                            m[(row, col)] += 0.5 * rabi[(a, c)];
                        }
                        if let Some(col) = slot(n, l_max, a, c, nb) {
                            m[(row, col)] -= 0.5 * rabi[(c, b)];
                        }
                    }
                }
            }
        }
    }
    m
}

/// Steady state as the null vector of the truncated Fourier superoperator.
pub fn steady_state_fourier(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
    l_max: usize,
) -> Result<SteadyState> {
    numerics.validate()?;
    drive.validate()?;
    let n = model.n_levels();
    let m = fourier_superoperator(model, drive, l_max);
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^H");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&x, &y| sv[x].total_cmp(&sv[y]));
    let gap = sv[order[1]];
    if gap < NULLSPACE_GAP {
        return Err(Error::Degenerate {
            stage: "steady_state_fourier",
            detail: format!(
                "nullspace is not one-dimensional (two smallest singular values {:.3e}, {:.3e})",
                sv[order[0]], gap
            ),
        });
    }
    let null = DVector::from_iterator(m.ncols(), v_t.row(order[0]).iter().map(|z| z.conj()));
    let trace: C64 = (0..n).map(|a| null[slot(n, l_max, a, a, 0).unwrap()]).sum();
    if trace.norm() < 1e-12 {
        return Err(Error::Degenerate {
            stage: "steady_state_fourier",
            detail: "null vector has zero trace".into(),
        });
    }
    let rho = null / trace;
    let residual = (&m * &rho).camax();
    Ok(SteadyState {
        n,
        l_max,
        rho_level: rho.iter().copied().collect(),
        rho_floquet: None,
        method: SteadyMethod::FourierNullspace,
        residual,
        gap: Some(gap),
    })
}

fn rk4_step(gen: &Generator, rho: &mut [C64], t: f64, dt: f64, scratch: &mut [Vec<C64>; 5]) {
    let len = rho.len();
    let [k1, k2, k3, k4, tmp] = scratch;
    gen.apply(rho, t, k1);
    for i in 0..len {
        tmp[i] = rho[i] + 0.5 * dt * k1[i];
    }
    gen.apply(tmp, t + 0.5 * dt, k2);
    for i in 0..len {
        tmp[i] = rho[i] + 0.5 * dt * k2[i];
    }
    gen.apply(tmp, t + 0.5 * dt, k3);
    for i in 0..len {
        tmp[i] = rho[i] + dt * k3[i];
    }
    gen.apply(tmp, t + dt, k4);
    for i in 0..len {
        rho[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Steady state by long-time RK4 propagation from the ground state.
///
/// The dynamics are linear and periodic, so one period of RK4 steps is
/// recorded once as a matrix acting on the state at the start of a period,
/// together with the map from that state to the Fourier coefficients of the
/// period. Repeated application reproduces step-by-step propagation.
pub fn steady_state_time_domain(
    model: &AtomModel,
    drive: &DriveParams,
    numerics: &NumericsConfig,
    l_max: usize,
) -> Result<SteadyState> {
    numerics.validate()?;
    drive.validate()?;
    let kappa_min = model
        .min_decay()
        .ok_or_else(|| Error::invalid("decay", "time propagation needs at least one positive rate"))?;
    let n = model.n_levels();
    let dim = n * n;
    let period = drive.period();
    let samples = 4 * l_max + 1;
    let dt_cap = numerics.propagate_dt.min(period / 200.0);
    let per_sample = (period / (dt_cap * samples as f64)).ceil() as usize;
    let steps = samples * per_sample;
    let dt = period / steps as f64;

    let t_min = 20.0 / kappa_min;
    let t_cap = numerics
        .propagate_t_end
        .unwrap_or(1000.0 / kappa_min)
        .max(t_min);
    let min_periods = (t_min / period).ceil() as usize;
    let max_periods = (t_cap / period).ceil() as usize;

    let generator = Generator::new(model, drive);
    let n_harm = 2 * l_max + 1;
    let mut period_map = DMatrix::<C64>::zeros(dim, dim);
    let mut coeff_map = DMatrix::<C64>::zeros(dim * n_harm, dim);
    let phase: Vec<C64> = (0..samples)
        .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / samples as f64))
        .collect();
    let mut scratch: [Vec<C64>; 5] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); dim]);
    for col in 0..dim {
        let mut state = vec![C64::new(0.0, 0.0); dim];
        state[col] = C64::new(1.0, 0.0);
        for k in 0..samples {
            for (h, l) in (-(l_max as i64)..=l_max as i64).enumerate() {
                let w = phase[(l.rem_euclid(samples as i64)) as usize * k % samples] / samples as f64;
                for e in 0..dim {
                    coeff_map[(h * dim + e, col)] += w * state[e];
                }
            }
            for s in 0..per_sample {
                let t = (k * per_sample + s) as f64 * dt;
                rk4_step(&generator, &mut state, t, dt, &mut scratch);
            }
        }
        for e in 0..dim {
            period_map[(e, col)] = state[e];
        }
    }

    let mut state = DVector::<C64>::zeros(dim);
    state[0] = C64::new(1.0, 0.0);
    let mut previous = &coeff_map * &state;
    let mut residual = f64::INFINITY;
    let mut periods = 0;
    while periods < max_periods {
        state = &period_map * &state;
        periods += 1;
        let current = &coeff_map * &state;
        residual = (&current - &previous).camax();
        previous = current;
        if periods >= min_periods && residual < numerics.steady_tol {
            break;
        }
    }
    if residual >= numerics.steady_tol {
        return Err(Error::NotConverged {
            stage: "steady_state_time_domain",
            residual,
        });
    }
    // coeff_map rows are ordered (harmonic, a, b), which matches `slot`.
    Ok(SteadyState {
        n,
        l_max,
        rho_level: previous.iter().copied().collect(),
        rho_floquet: None,
        method: SteadyMethod::TimePropagation,
        residual,
        gap: None,
    })
}

fn check_compatible(n: usize, l_max: usize, fs: &FloquetSolution) -> Result<()> {
    if fs.n_levels() != n || fs.l_max() != l_max {
        return Err(Error::DimensionMismatch(format!(
            "steady state has N = {n}, l_max = {l_max}; Floquet solution has N = {}, l_max = {}",
            fs.n_levels(),
            fs.l_max()
        )));
    }
    Ok(())
}

/// Fills the Floquet-basis coefficients.
pub fn to_floquet_basis(ss: &SteadyState, fs: &FloquetSolution) -> Result<SteadyState> {
    let (n, l_max) = (ss.n, ss.l_max);
    check_compatible(n, l_max, fs)?;
    let lm = l_max as i64;
    let wide = 2 * lm;
    // y[a][j'][k] = sum_{a', l'} rho_{a a', k - l'} f_{j' a' l'},  k in [-2L, 2L]
    let width = (2 * wide + 1) as usize;
    let mut y = vec![C64::new(0.0, 0.0); n * n * width];
    for a in 0..n {
        for jp in 0..n {
            for k in -wide..=wide {
                let mut acc = C64::new(0.0, 0.0);
                for ap in 0..n {
                    for lp in -lm..=lm {
                        let f = fs.coeff(jp, ap, lp);
                        if f != 0.0 {
                            acc += ss.rho(a, ap, k - lp) * f;
                        }
                    }
                }
                y[(a * n + jp) * width + (k + wide) as usize] = acc;
            }
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); ss.rho_level.len()];
    for l0 in -lm..=lm {
        for j in 0..n {
            for jp in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..n {
                    for l in -lm..=lm {
                        acc += fs.coeff(j, a, l) * y[(a * n + jp) * width + (l0 + l + wide) as usize];
                    }
                }
                out[slot(n, l_max, j, jp, l0).unwrap()] = acc;
            }
        }
    }
    Ok(SteadyState {
        rho_floquet: Some(out),
        ..ss.clone()
    })
}

/// Level-basis coefficients rebuilt from the Floquet-basis ones.
pub fn from_floquet_basis(ss: &SteadyState, fs: &FloquetSolution) -> Result<Vec<C64>> {
    let (n, l_max) = (ss.n, ss.l_max);
    check_compatible(n, l_max, fs)?;
    let tilde = ss.rho_floquet.as_ref().ok_or(Error::MissingFloquetBasis)?;
    let lm = l_max as i64;
    let wide = 2 * lm;
    let width = (2 * wide + 1) as usize;
    let get = |j: usize, jp: usize, l: i64| slot(n, l_max, j, jp, l).map_or(C64::new(0.0, 0.0), |i| tilde[i]);
    // z[j][a'][k] = sum_{j', l'} tilde_{j j', k + l'} f_{j' a' l'}
    let mut z = vec![C64::new(0.0, 0.0); n * n * width];
    for j in 0..n {
        for ap in 0..n {
            for k in -wide..=wide {
                let mut acc = C64::new(0.0, 0.0);
                for jp in 0..n {
                    for lp in -lm..=lm {
                        let f = fs.coeff(jp, ap, lp);
                        if f != 0.0 {
                            acc += get(j, jp, k + lp) * f;
                        }
                    }
                }
                z[(j * n + ap) * width + (k + wide) as usize] = acc;
            }
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); ss.rho_level.len()];
    for l0 in -lm..=lm {
        for a in 0..n {
            for ap in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    for l in -lm..=lm {
                        acc += fs.coeff(j, a, l) * z[(j * n + ap) * width + (l0 - l + wide) as usize];
                    }
                }
                out[slot(n, l_max, a, ap, l0).unwrap()] = acc;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::solve_floquet;
    use crate::model::Scenario;
    use proptest::prelude::*;

    fn two_level(rabi: f64) -> AtomModel {
        Scenario::TwoLevel.model(rabi).unwrap()
    }

    fn ground_state_coefficients(n: usize, l_max: usize) -> Vec<C64> {
        let mut rho = vec![C64::new(0.0, 0.0); n * n * (2 * l_max + 1)];
        rho[slot(n, l_max, 0, 0, 0).unwrap()] = C64::new(1.0, 0.0);
        rho
    }

    fn hermitian(n: usize, seed: &[f64]) -> DMatrix<C64> {
        let mut k = 0;
        let mut next = || {
            k += 1;
            seed[k % seed.len()] * (k as f64 * 0.37).sin()
        };
        let mut m = DMatrix::<C64>::zeros(n, n);
        for a in 0..n {
            m[(a, a)] = C64::new(next().abs() + 0.1, 0.0);
            for b in a + 1..n {
                let z = C64::new(next(), next());
                m[(a, b)] = z;
                m[(b, a)] = z.conj();
            }
        }
        let tr = m.trace();
        m / tr
    }

    #[test]
    fn undriven_ground_state_is_stationary() {
        let model = two_level(0.0);
        let drive = DriveParams::new(1.1).unwrap();
        let mut rho = DMatrix::<C64>::zeros(2, 2);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        let d = lindblad_rhs(&rho, 0.7, &model, &drive);
        assert!(d.camax() == 0.0);
    }

    #[test]
    fn excited_state_decays() {
        let model = two_level(0.0);
        let drive = DriveParams::new(1.1).unwrap();
        let mut rho = DMatrix::<C64>::zeros(2, 2);
        rho[(1, 1)] = C64::new(1.0, 0.0);
        let d = lindblad_rhs(&rho, 0.3, &model, &drive);
        assert!((d[(1, 1)].re + 0.01).abs() < 1e-15);
        assert!((d[(0, 0)].re - 0.01).abs() < 1e-15);
        assert_eq!(d[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn rhs_matches_commutator_form() {
        // Independent form: -i[H, rho] + sum_jumps (L rho L^+ - {L^+L, rho}/2)
        let model = Scenario::LambdaA.model(0.3).unwrap();
        let drive = DriveParams::new(0.45).unwrap();
        let rho = hermitian(3, &[0.3, -0.8, 0.5, 1.1, -0.2]);
        let t = 2.3;
        let n = 3;
        let h = DMatrix::from_fn(n, n, |a, b| {
            let e = if a == b { model.energies()[a] } else { 0.0 };
            C64::new(e + (drive.omega_l * t).cos() * model.rabi()[(a, b)], 0.0)
        });
        let mut expect = (&h * &rho - &rho * &h) * (-I);
        for from in 0..n {
            for to in 0..n {
                let k = model.decay()[(from, to)];
                if k == 0.0 {
                    continue;
                }
                let mut jump = DMatrix::<C64>::zeros(n, n);
                jump[(to, from)] = C64::new(k.sqrt(), 0.0);
                let jd = jump.adjoint();
                let jdj = &jd * &jump;
                expect += &jump * &rho * &jd - (&jdj * &rho + &rho * &jdj) * C64::new(0.5, 0.0);
            }
        }
        let got = lindblad_rhs(&rho, t, &model, &drive);
        assert!((got - expect).camax() < 1e-14);
    }

    proptest! {
        #[test]
        fn rhs_preserves_trace_and_hermiticity(
            seed in proptest::collection::vec(-1.0f64..1.0, 12),
            t in 0.0f64..50.0,
            rabi in 0.0f64..0.8,
        ) {
            let model = Scenario::LambdaA.model(rabi).unwrap();
            let drive = DriveParams::new(0.45).unwrap();
            let rho = hermitian(3, &seed);
            let d = lindblad_rhs(&rho, t, &model, &drive);
            prop_assert!(d.trace().norm() < 1e-14);
            prop_assert!((&d - d.adjoint()).camax() < 1e-14);
        }
    }

    #[test]
    fn undriven_solvers_give_ground_state() {
        let model = two_level(0.0);
        let drive = DriveParams::new(1.1).unwrap();
        let numerics = NumericsConfig::default();
        let expect = ground_state_coefficients(2, 4);
        for ss in [
            steady_state_fourier(&model, &drive, &numerics, 4).unwrap(),
            steady_state_time_domain(&model, &drive, &numerics, 4).unwrap(),
        ] {
            let worst = ss
                .rho_level
                .iter()
                .zip(&expect)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-10, "{:?}: {worst}", ss.method());
        }
    }

    #[test]
    fn driven_fourier_invariants() {
        let model = two_level(0.4);
        let drive = DriveParams::new(1.1).unwrap();
        let numerics = NumericsConfig::default();
        let ss = steady_state_fourier(&model, &drive, &numerics, 10).unwrap();
        assert!(ss.hermiticity_residual() < 1e-10);
        assert!(ss.trace_residual() < 1e-10);
        assert!(ss.population_violation() == 0.0);
        assert!(ss.residual() < 1e-12);
        assert!(ss.nullspace_gap().unwrap() > 1e-4);
        // rebuilt rho(t) is a density matrix at a few instants
        for t in [0.0, 1.0, 3.3] {
            let m = ss.matrix_at(t, 1.1);
            assert!((m.trace() - 1.0).norm() < 1e-10);
            assert!(m[(0, 0)].re >= 0.0 && m[(1, 1)].re >= 0.0);
        }
    }

    #[test]
    fn solvers_agree() {
        let model = two_level(0.4);
        let drive = DriveParams::new(1.1).unwrap();
        let numerics = NumericsConfig::default();
        let fs = solve_floquet(&model, &drive, &numerics).unwrap();
        let a = steady_state_fourier(&model, &drive, &numerics, fs.l_max()).unwrap();
        let b = steady_state_time_domain(&model, &drive, &numerics, fs.l_max()).unwrap();
        let diff = a.max_difference(&b).unwrap();
        assert!(diff < 1e-6, "difference {diff}");
    }

    #[test]
    fn time_domain_needs_decay() {
        let model = two_level(0.4).with_uniform_decay(0.0).unwrap();
        let drive = DriveParams::new(1.1).unwrap();
        let err = steady_state_time_domain(&model, &drive, &NumericsConfig::default(), 4).unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }));
    }

    #[test]
    fn closed_undriven_system_is_degenerate() {
        let model = two_level(0.0).with_uniform_decay(0.0).unwrap();
        let drive = DriveParams::new(1.1).unwrap();
        let err = steady_state_fourier(&model, &drive, &NumericsConfig::default(), 3).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }

    #[test]
    fn floquet_basis_of_ground_state() {
        let model = two_level(0.0);
        let drive = DriveParams::new(1.2).unwrap();
        let numerics = NumericsConfig::default();
        let fs = solve_floquet(&model, &drive, &numerics).unwrap();
        let ss = steady_state_fourier(&model, &drive, &numerics, fs.l_max()).unwrap();
        let ss = to_floquet_basis(&ss, &fs).unwrap();
        let lm = fs.l_max() as i64;
        for l in -lm..=lm {
            for j in 0..2 {
                for jp in 0..2 {
                    let expect = if (j, jp, l) == (0, 0, 0) { 1.0 } else { 0.0 };
                    assert!((ss.rho_floquet(j, jp, l).unwrap() - expect).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn floquet_basis_round_trip() {
        for (scenario, rabi, omega_l) in [
            (Scenario::TwoLevel, 0.4, 1.1),
            (Scenario::TwoLevel, 0.6, 0.35),
            (Scenario::LambdaA, 0.3, 0.45),
        ] {
            let model = scenario.model(rabi).unwrap();
            let drive = DriveParams::new(omega_l).unwrap();
            let numerics = NumericsConfig::default();
            let fs = solve_floquet(&model, &drive, &numerics).unwrap();
            let ss = steady_state_fourier(&model, &drive, &numerics, fs.l_max()).unwrap();
            let ss = to_floquet_basis(&ss, &fs).unwrap();
            let trace: C64 = (0..model.n_levels())
                .map(|j| ss.rho_floquet(j, j, 0).unwrap())
                .sum();
            assert!((trace - 1.0).norm() < 1e-10, "{scenario}: trace {trace}");
            assert!(ss.floquet_hermiticity_residual().unwrap() < 1e-10);
            let back = from_floquet_basis(&ss, &fs).unwrap();
            let n = model.n_levels();
            let interior = fs.l_max() as i64 / 2;
            let mut worst: f64 = 0.0;
            for l in -interior..=interior {
                for a in 0..n {
                    for b in 0..n {
                        let i = slot(n, fs.l_max(), a, b, l).unwrap();
                        worst = worst.max((back[i] - ss.rho(a, b, l)).norm());
                    }
                }
            }
            assert!(worst < 1e-10, "{scenario}: round trip {worst}");
        }
    }

    #[test]
    fn mismatched_truncation_rejected() {
        let model = two_level(0.4);
        let drive = DriveParams::new(1.1).unwrap();
        let numerics = NumericsConfig::default();
        let fs = solve_floquet(&model, &drive, &numerics).unwrap();
        let ss = steady_state_fourier(&model, &drive, &numerics, fs.l_max() + 1).unwrap();
        assert!(matches!(
            to_floquet_basis(&ss, &fs),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(ss.rho_floquet(0, 0, 0), Err(Error::MissingFloquetBasis)));
    }

    #[test]
    fn weak_drive_is_continuous() {
        let drive = DriveParams::new(1.1).unwrap();
        let numerics = NumericsConfig::default();
        let a = steady_state_fourier(&two_level(0.0), &drive, &numerics, 6).unwrap();
        let b = steady_state_fourier(&two_level(1e-4), &drive, &numerics, 6).unwrap();
        let d = a.max_difference(&b).unwrap();
        assert!(d > 0.0 && d < 1e-3, "{d}");
    }
}
