//! Physical system description and run configuration.
//!
//! All frequencies are angular frequencies in units of the reference
//! transition frequency ω₀ (ħ = 1). The JSON config schema is
//!
//! ```text
//! {"levels": [{"energy": 0.0}, {"energy": 1.0}],
//!  "rabi": [[0, 0.4], [0.4, 0]],
//!  "dipole_ratio": [[0, 1], [1, 0]],
//!  "decay": [[0, 0], [0.01, 0]],
//!  "drive": {"omega_l": 1.2},
//!  "numerics": {"l_max": 20, "broadening_fwhm": 0.01}}
//! ```
//!
//! `decay[a][b]` is the rate of the incoherent jump `a -> b`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Few-level atom: bare energies, optical Rabi couplings, electron-coupling
/// dipole ratios and decay rates.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomModel {
    energies: Vec<f64>,
    labels: Vec<String>,
    rabi: DMatrix<f64>,
    dipole_ratio: DMatrix<f64>,
    decay: DMatrix<f64>,
    reference: (usize, usize),
}

impl AtomModel {
    /// Builds a validated model. The reference transition defaults to
    /// `(N-1, 0)`, i.e. top level to ground.
    pub fn new(
        energies: Vec<f64>,
        rabi: DMatrix<f64>,
        dipole_ratio: DMatrix<f64>,
        decay: DMatrix<f64>,
    ) -> Result<Self> {
        let n = energies.len();
        let labels = default_labels(n);
        let reference = (n.saturating_sub(1), 0);
        Self::with_parts(energies, labels, rabi, dipole_ratio, decay, reference)
    }

    fn with_parts(
        energies: Vec<f64>,
        labels: Vec<String>,
        rabi: DMatrix<f64>,
        dipole_ratio: DMatrix<f64>,
        decay: DMatrix<f64>,
        reference: (usize, usize),
    ) -> Result<Self> {
        let model = AtomModel {
            energies,
            labels,
            rabi,
            dipole_ratio,
            decay,
            reference,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let n = self.energies.len();
        if n < 2 {
            return Err(Error::invalid("levels", format!("need at least 2 levels, got {n}")));
        }
        if self.labels.len() != n {
            return Err(Error::invalid("levels", "one label per level required"));
        }
        for (i, e) in self.energies.iter().enumerate() {
            if !e.is_finite() {
                return Err(Error::invalid(format!("levels[{i}].energy"), "not finite"));
            }
        }
        for (i, w) in self.energies.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::invalid(
                    format!("levels[{}].energy", i + 1),
                    "energies must be strictly ascending",
                ));
            }
        }
        check_square("rabi", &self.rabi, n)?;
        check_square("dipole_ratio", &self.dipole_ratio, n)?;
        check_square("decay", &self.decay, n)?;
        check_symmetric("rabi", &self.rabi)?;
        check_symmetric("dipole_ratio", &self.dipole_ratio)?;
        for a in 0..n {
            if self.decay[(a, a)] != 0.0 {
                return Err(Error::invalid(
                    format!("decay[{a}][{a}]"),
                    "diagonal entries must be zero (only a != a' jump channels)",
                ));
            }
            for b in 0..n {
                let k = self.decay[(a, b)];
                if k < 0.0 {
                    return Err(Error::invalid(format!("decay[{a}][{b}]"), "rates must be nonnegative"));
                }
            }
        }
        let (up, lo) = self.reference;
        if up >= n || lo >= n || self.energies[up] - self.energies[lo] <= 0.0 {
            return Err(Error::invalid(
                "reference",
                "reference transition must join an upper level to a lower level",
            ));
        }
        Ok(())
    }

    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rabi(&self) -> &DMatrix<f64> {
        &self.rabi
    }

    pub fn dipole_ratio(&self) -> &DMatrix<f64> {
        &self.dipole_ratio
    }

    pub fn decay(&self) -> &DMatrix<f64> {
        &self.decay
    }

    /// `(upper, lower)` levels of the transition used as frequency unit and
    /// probability normalization.
    pub fn reference(&self) -> (usize, usize) {
        self.reference
    }

    /// Bare reference transition frequency ω₀.
    pub fn omega0(&self) -> f64 {
        let (up, lo) = self.reference;
        self.energies[up] - self.energies[lo]
    }

    /// Largest |Ω_{aa'}|.
    pub fn rabi_strength(&self) -> f64 {
        self.rabi.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Smallest strictly positive decay rate, if any channel is enabled.
    pub fn min_decay(&self) -> Option<f64> {
        self.decay
            .iter()
            .copied()
            .filter(|&k| k > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Rescales the Rabi matrix so its largest entry equals `strength`,
    /// keeping the coupling pattern. Fails on an all-zero Rabi matrix, which
    /// carries no pattern.
    pub fn with_rabi_strength(&self, strength: f64) -> Result<Self> {
        if !strength.is_finite() || strength < 0.0 {
            return Err(Error::invalid("rabi", "strength must be finite and nonnegative"));
        }
        let current = self.rabi_strength();
        if current == 0.0 {
            return Err(Error::invalid(
                "rabi",
                "cannot rescale an all-zero Rabi matrix (no coupling pattern)",
            ));
        }
        let mut out = self.clone();
        out.rabi = self.rabi.map(|x| x / current * strength);
        Ok(out)
    }

    /// Replaces every enabled decay channel with the common rate `kappa`.
    pub fn with_uniform_decay(&self, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::invalid("decay", "rate must be finite and nonnegative"));
        }
        let mut out = self.clone();
        out.decay = self.decay.map(|k| if k > 0.0 { kappa } else { 0.0 });
        Ok(out)
    }

    /// Same model with the given Rabi matrix (validated).
    pub fn with_rabi(&self, rabi: DMatrix<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.rabi = rabi;
        out.validate()?;
        Ok(out)
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|a| a.to_string()).collect()
}

fn check_square(field: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::invalid(
            field,
            format!("expected {n}x{n} matrix, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    for i in 0..n {
        for j in 0..n {
            if !m[(i, j)].is_finite() {
                return Err(Error::invalid(format!("{field}[{i}][{j}]"), "not finite"));
            }
        }
    }
    Ok(())
}

fn check_symmetric(field: &str, m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        if m[(i, i)] != 0.0 {
            return Err(Error::invalid(format!("{field}[{i}][{i}]"), "diagonal must be zero"));
        }
        for j in (i + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::invalid(
                    format!("{field}[{i}][{j}]"),
                    format!("matrix must be symmetric ({} != {})", m[(i, j)], m[(j, i)]),
                ));
            }
        }
    }
    Ok(())
}

/// Monochromatic drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveParams {
    pub omega_l: f64,
}

impl DriveParams {
    pub fn new(omega_l: f64) -> Result<Self> {
        let d = DriveParams { omega_l };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega_l.is_finite() || self.omega_l <= 0.0 {
            return Err(Error::invalid("drive.omega_l", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Drive period 2π/ω_L.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_l
    }
}

/// Truncation orders, tolerances and solver controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Largest Fourier truncation order the Floquet convergence loop may use.
    pub l_max: usize,
    /// First truncation order tried by the convergence loop.
    pub l_max_start: usize,
    pub eig_tol: f64,
    pub steady_tol: f64,
    pub peak_tol: f64,
    /// Upper bound on the time-domain propagation length. `None` means
    /// `1000 / min(kappa)`.
    pub propagate_t_end: Option<f64>,
    /// Largest RK4 step of the time-domain steady-state solver.
    pub propagate_dt: f64,
    pub broadening_fwhm: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            l_max: 20,
            l_max_start: 8,
            eig_tol: 1e-11,
            steady_tol: 1e-10,
            peak_tol: 1e-8,
            propagate_t_end: None,
            propagate_dt: 0.005,
            broadening_fwhm: 0.01,
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_max < 1 {
            return Err(Error::invalid("numerics.l_max", "must be >= 1"));
        }
        if self.l_max_start < 1 || self.l_max_start > self.l_max {
            return Err(Error::invalid(
                "numerics.l_max_start",
                "must satisfy 1 <= l_max_start <= l_max",
            ));
        }
        for (name, v) in [
            ("numerics.eig_tol", self.eig_tol),
            ("numerics.steady_tol", self.steady_tol),
            ("numerics.peak_tol", self.peak_tol),
            ("numerics.propagate_dt", self.propagate_dt),
            ("numerics.broadening_fwhm", self.broadening_fwhm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if let Some(t) = self.propagate_t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid("numerics.propagate_t_end", "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: AtomModel,
    pub drive: DriveParams,
    pub numerics: NumericsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// On-disk JSON layout of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub levels: Vec<LevelSpec>,
    pub rabi: Vec<Vec<f64>>,
    pub dipole_ratio: Vec<Vec<f64>>,
    pub decay: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<[usize; 2]>,
    pub drive: DriveParams,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(field, format!("expected {n}x{n} nested array")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ConfigFile {
    pub fn into_run_config(self) -> Result<RunConfig> {
        let n = self.levels.len();
        let energies = self.levels.iter().map(|l| l.energy).collect();
        let labels = self
            .levels
            .iter()
            .enumerate()
            .map(|(a, l)| l.label.clone().unwrap_or_else(|| a.to_string()))
            .collect();
        let rabi = matrix_from_rows("rabi", &self.rabi, n)?;
        let dipole_ratio = matrix_from_rows("dipole_ratio", &self.dipole_ratio, n)?;
        let decay = matrix_from_rows("decay", &self.decay, n)?;
        let reference = match self.reference {
            Some([up, lo]) => (up, lo),
            None => (n.saturating_sub(1), 0),
        };
        let model = AtomModel::with_parts(energies, labels, rabi, dipole_ratio, decay, reference)?;
        self.drive.validate()?;
        self.numerics.validate()?;
        Ok(RunConfig {
            model,
            drive: self.drive,
            numerics: self.numerics,
        })
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_run_config()
    }

    pub fn to_config_file(&self) -> ConfigFile {
        let m = &self.model;
        let reference = if m.reference == (m.n_levels() - 1, 0) {
            None
        } else {
            Some([m.reference.0, m.reference.1])
        };
        ConfigFile {
            levels: m
                .energies
                .iter()
                .zip(&m.labels)
                .map(|(&energy, label)| LevelSpec {
                    energy,
                    label: Some(label.clone()),
                })
                .collect(),
            rabi: matrix_to_rows(&m.rabi),
            dipole_ratio: matrix_to_rows(&m.dipole_ratio),
            decay: matrix_to_rows(&m.decay),
            reference,
            drive: self.drive,
            numerics: self.numerics.clone(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_config_file()).expect("config serializes")
    }
}

/// Reads and validates a JSON run configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_json_str(&text)
}

/// Built-in systems: a two-level atom and three Λ-atom coupling layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    TwoLevel,
    /// Light and electron both couple g↔e and m↔e.
    LambdaA,
    /// Electron couples g↔e only, light couples m↔e only.
    LambdaB,
    /// Light couples g↔e only, electron couples m↔e only.
    LambdaC,
}

pub const DEFAULT_DECAY: f64 = 0.01;
pub const TWO_LEVEL_RABI: f64 = 0.4;
pub const LAMBDA_RABI: f64 = 0.3;
/// ε_m in the Λ atoms, so that ε_e - ε_m = 0.3.
pub const LAMBDA_MID_ENERGY: f64 = 0.7;

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::TwoLevel,
        Scenario::LambdaA,
        Scenario::LambdaB,
        Scenario::LambdaC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::TwoLevel => "two_level",
            Scenario::LambdaA => "lambda_a",
            Scenario::LambdaB => "lambda_b",
            Scenario::LambdaC => "lambda_c",
        }
    }

    pub fn default_rabi(self) -> f64 {
        match self {
            Scenario::TwoLevel => TWO_LEVEL_RABI,
            _ => LAMBDA_RABI,
        }
    }

    pub fn default_omega_l(self) -> f64 {
        match self {
            Scenario::TwoLevel => 1.2,
            _ => 0.45,
        }
    }

    /// The scenario's atom with coupling strength `rabi` on every
    /// light-coupled transition.
    pub fn model(self, rabi: f64) -> Result<AtomModel> {
        let k = DEFAULT_DECAY;
        match self {
            Scenario::TwoLevel => {
                let rabi_m = DMatrix::from_row_slice(2, 2, &[0.0, rabi, rabi, 0.0]);
                let dip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
                let decay = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, k, 0.0]);
                AtomModel::with_parts(
                    vec![0.0, 1.0],
                    vec!["g".into(), "e".into()],
                    rabi_m,
                    dip,
                    decay,
                    (1, 0),
                )
            }
            Scenario::LambdaA | Scenario::LambdaB | Scenario::LambdaC => {
                // levels: 0 = g, 1 = m, 2 = e
                let (light_eg, light_em, el_eg, el_em) = match self {
                    Scenario::LambdaA => (true, true, true, true),
                    Scenario::LambdaB => (false, true, true, false),
                    _ => (true, false, false, true),
                };
                let on = |b: bool, v: f64| if b { v } else { 0.0 };
                let mut rabi_m = DMatrix::zeros(3, 3);
                rabi_m[(2, 0)] = on(light_eg, rabi);
                rabi_m[(0, 2)] = on(light_eg, rabi);
                rabi_m[(2, 1)] = on(light_em, rabi);
                rabi_m[(1, 2)] = on(light_em, rabi);
                let mut dip = DMatrix::zeros(3, 3);
                dip[(2, 0)] = on(el_eg, 1.0);
                dip[(0, 2)] = on(el_eg, 1.0);
                dip[(2, 1)] = on(el_em, 1.0);
                dip[(1, 2)] = on(el_em, 1.0);
                let mut decay = DMatrix::zeros(3, 3);
                decay[(2, 0)] = k;
                decay[(2, 1)] = k;
                decay[(1, 0)] = k;
                AtomModel::with_parts(
                    vec![0.0, LAMBDA_MID_ENERGY, 1.0],
                    vec!["g".into(), "m".into(), "e".into()],
                    rabi_m,
                    dip,
                    decay,
                    (2, 0),
                )
            }
        }
    }

    pub fn run_config(self) -> RunConfig {
        RunConfig {
            model: self.model(self.default_rabi()).expect("built-in scenario is valid"),
            drive: DriveParams {
                omega_l: self.default_omega_l(),
            },
            numerics: NumericsConfig::default(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Resolves a built-in scenario by name.
pub fn builtin_scenario(name: &str) -> Result<RunConfig> {
    Ok(name.parse::<Scenario>()?.run_config())
}
