//! Beam-geometry suppression of the electron-atom coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Electron trajectory relative to the atom. The impact parameter is measured
/// in units of c/ω₀ and the speed as a fraction of c.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingGeometry {
    pub impact_parameter: f64,
    pub beta: f64,
}

impl CouplingGeometry {
    pub fn new(impact_parameter: f64, beta: f64) -> Result<Self> {
        let g = CouplingGeometry {
            impact_parameter,
            beta,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid("geometry.beta", "must lie in (0, 1)"));
        }
        if !(self.impact_parameter >= 0.0 && self.impact_parameter.is_finite()) {
            return Err(Error::invalid(
                "geometry.impact_parameter",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn lorentz_gamma(&self) -> f64 {
        1.0 / (1.0 - self.beta * self.beta).sqrt()
    }

    /// Dimensionless argument |ω| R / (β γ).
    pub fn argument(&self, omega: f64) -> f64 {
        omega.abs() * self.impact_parameter / (self.beta * self.lorentz_gamma())
    }
}

/// Power series around the origin, accurate for x <= 2.
fn k1_series(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut i1 = 0.0;
    let mut tail = 0.0;
    // term = (x²/4)^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // ψ(k+1)
    for k in 0..60 {
        let kf = k as f64;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0);
        i1 += term;
        tail += (psi_k1 + psi_k2) * term;
        if term < 1e-18 * i1 {
            break;
        }
        term *= y / ((kf + 1.0) * (kf + 2.0));
        psi_k1 = psi_k2;
    }
    let i1 = 0.5 * x * i1;
    1.0 / x + (0.5 * x).ln() * i1 - 0.25 * x * tail
}

/// Steed's continued fraction for K₀ and K₁ at order zero, for x >= 2.
fn k1_continued_fraction(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    k0 * (x + 0.5 - h) / x
}

/// Modified Bessel function of the second kind, order one.
pub fn bessel_k1(x: f64) -> f64 {
    if x.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x <= 2.0 {
        k1_series(x)
    } else {
        k1_continued_fraction(x)
    }
}

/// s(x) = x K₁(x), equal to 1 at the origin and decaying like e^{-x}.
pub fn suppression(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x * bessel_k1(x)
    }
}

/// Amplitude suppression of a peak at loss frequency `omega` relative to the
/// close-approach limit.
pub fn coupling_factor(omega: f64, geom: &CouplingGeometry) -> f64 {
    suppression(geom.argument(omega))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K₁(x) = ∫₀^∞ exp(-x cosh t) cosh t dt by trapezoid rule.
    fn k1_quadrature(x: f64) -> f64 {
        let h: f64 = 2e-3;
        let mut sum = 0.5 * (-x).exp();
        let mut t = h;
        loop {
            let c = t.cosh();
            let f = (-x * c).exp() * c;
            sum += f;
            if x * c > 745.0 {
                break;
            }
            t += h;
        }
        sum * h
    }

    #[test]
    fn matches_integral_representation() {
        for x in [1e-4, 0.01, 0.3, 1.0, 1.999, 2.0, 2.001, 3.5, 7.0, 15.0, 40.0] {
            let want = k1_quadrature(x);
            let got = bessel_k1(x);
            assert!((got / want - 1.0).abs() < 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn known_values() {
        // tabulated K₁(1) and K₁(2)
        assert!((bessel_k1(1.0) - 0.601_907_230_197_234_6).abs() < 1e-15);
        assert!((bessel_k1(2.0) - 0.139_865_881_816_522_4).abs() < 1e-15);
    }

    #[test]
    fn suppression_limits() {
        assert!((suppression(1e-4) - 1.0).abs() < 1e-6);
        assert_eq!(suppression(0.0), 1.0);
        for x in [5.0f64, 10.0, 30.0] {
            let asym = (std::f64::consts::PI * x / 2.0).sqrt() * (-x).exp();
            let ratio = suppression(x) / asym;
            // asymptotic series 1 + 3/(8x) - 15/(128x²) + ...
            let series = 1.0 + 3.0 / (8.0 * x) - 15.0 / (128.0 * x * x);
            assert!((ratio - series).abs() < 0.2 / (x * x * x), "x={x}");
        }
    }

    #[test]
    fn suppression_decreases() {
        let mut prev = suppression(0.01);
        let mut x = 0.01;
        while x < 10.0 {
            x += 0.01;
            let s = suppression(x);
            assert!(s < prev, "not decreasing at {x}");
            prev = s;
        }
    }

    #[test]
    fn factor_depends_on_magnitude_only() {
        let g = CouplingGeometry::new(2.0, 0.5).unwrap();
        assert_eq!(coupling_factor(0.7, &g), coupling_factor(-0.7, &g));
        assert!(coupling_factor(1.4, &g) < coupling_factor(0.7, &g));
        assert_eq!(coupling_factor(0.0, &g), 1.0);
        assert!(CouplingGeometry::new(1.0, 1.0).is_err());
        assert!(CouplingGeometry::new(-1.0, 0.5).is_err());
    }
}
