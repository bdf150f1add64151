//! Complex-arithmetic utilities for steady-state AC circuit quantities.
//!
//! A sinusoid `√2·A·cos(ωt + φ)` is represented by the complex number
//! `A·exp(iφ)`. Magnitudes are RMS throughout; the `√2` amplitude factor
//! never appears in stored values.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PhasorError {
    /// Element parameter (R, L, C) or frequency was not strictly positive.
    #[error("invalid element: {0}")]
    InvalidElement(String),
}

/// RMS magnitude and phase of a fixed-frequency sinusoid.
///
/// Phase is normalized to `(-π, π]`; a negative magnitude folds into a
/// half-turn phase shift so that `magnitude >= 0` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phasor {
    pub magnitude: f64,
    pub phase: f64,
}

impl Phasor {
    pub fn new(magnitude: f64, phase: f64) -> Self {
        if magnitude < 0.0 {
            Self {
                magnitude: -magnitude,
                phase: normalize_phase(phase + std::f64::consts::PI),
            }
        } else {
            Self {
                magnitude,
                phase: normalize_phase(phase),
            }
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z.norm(), z.arg())
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }
}

/// Wrap an angle to `(-π, π]`.
pub fn normalize_phase(phase: f64) -> f64 {
    use std::f64::consts::PI;
    let p = phase.rem_euclid(2.0 * PI);
    if p > PI {
        p - 2.0 * PI
    } else {
        p
    }
}

/// A passive one-port circuit element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementKind {
    /// Resistance in ohms.
    Resistor(f64),
    /// Inductance in henries.
    Inductor(f64),
    /// Capacitance in farads.
    Capacitor(f64),
}

/// Complex admittance Y = G + iB of an element at angular frequency `omega`
/// (rad/s): `Y_R = 1/R`, `Y_L = -i/(ωL)`, `Y_C = iωC`.
pub fn admittance(kind: ElementKind, omega: f64) -> Result<Complex64, PhasorError> {
    if omega <= 0.0 {
        return Err(PhasorError::InvalidElement(format!(
            "angular frequency must be positive, got {omega}"
        )));
    }
    match kind {
        ElementKind::Resistor(r) => {
            if r <= 0.0 {
                return Err(PhasorError::InvalidElement(format!(
                    "resistance must be positive, got {r}"
                )));
            }
            Ok(Complex64::new(1.0 / r, 0.0))
        }
        ElementKind::Inductor(l) => {
            if l <= 0.0 {
                return Err(PhasorError::InvalidElement(format!(
                    "inductance must be positive, got {l}"
                )));
            }
            Ok(Complex64::new(0.0, -1.0 / (omega * l)))
        }
        ElementKind::Capacitor(c) => {
            if c <= 0.0 {
                return Err(PhasorError::InvalidElement(format!(
                    "capacitance must be positive, got {c}"
                )));
            }
            Ok(Complex64::new(0.0, omega * c))
        }
    }
}

/// Complex power s = v·i*. Real part is active power p, imaginary part is
/// reactive power q.
pub fn complex_power(v: Complex64, i: Complex64) -> Complex64 {
    v * i.conj()
}

/// Active/reactive split of instantaneous power for RMS voltage `v_rms` at
/// phase `alpha` and RMS current `i_rms` at phase `beta`:
/// `p = V·I·cos(α−β)`, `q = V·I·sin(α−β)`.
pub fn instantaneous_power_components(
    v_rms: f64,
    i_rms: f64,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    let vi = v_rms * i_rms;
    (vi * (alpha - beta).cos(), vi * (alpha - beta).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn admittance_of_resistor() {
        let y = admittance(ElementKind::Resistor(2.5), 1.0).unwrap();
        assert_abs_diff_eq!(y.re, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(y.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn admittance_of_inductor() {
        let y = admittance(ElementKind::Inductor(1.3333), 1.0).unwrap();
        assert_abs_diff_eq!(y.re, 0.0, epsilon = 1e-15);
        // -1/1.3333 = -0.7500 to four significant digits
        assert_abs_diff_eq!(y.im, -0.75, epsilon = 5e-5);
    }

    #[test]
    fn admittance_of_capacitor() {
        let y = admittance(ElementKind::Capacitor(0.75), 1.0).unwrap();
        assert_abs_diff_eq!(y.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.im, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn admittance_rejects_nonpositive_parameters() {
        assert!(admittance(ElementKind::Resistor(0.0), 1.0).is_err());
        assert!(admittance(ElementKind::Inductor(-1.0), 1.0).is_err());
        assert!(admittance(ElementKind::Capacitor(1.0), 0.0).is_err());
    }

    #[test]
    fn complex_power_of_resistive_branch() {
        let v = Phasor::new(1.0, 0.0).to_complex();
        let i = Phasor::new(0.4, 0.0).to_complex();
        let s = complex_power(v, i);
        assert_abs_diff_eq!(s.re, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inductor_absorbs_reactive_power() {
        // Conjugation flips the current's phase sign, so lagging current
        // (phase -π/2) yields positive q.
        let v = Phasor::new(1.0, 0.0).to_complex();
        let i = Phasor::new(0.75, -PI / 2.0).to_complex();
        let s = complex_power(v, i);
        assert_abs_diff_eq!(s.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.im, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn complex_power_of_zero_voltage_is_zero() {
        let s = complex_power(Complex64::new(0.0, 0.0), Complex64::new(3.0, -2.0));
        assert_eq!(s, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn instantaneous_components_of_resistive_branch() {
        let (p, q) = instantaneous_power_components(1.0, 0.4, 0.0, 0.0);
        assert_abs_diff_eq!(p, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn instantaneous_components_of_capacitive_current() {
        let (p, q) = instantaneous_power_components(1.0, 1.0, 0.0, PI / 2.0);
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn instantaneous_components_match_complex_power() {
        let (v_rms, i_rms, alpha, beta) = (1.0, 0.85, 0.2, -0.3);
        let (p, q) = instantaneous_power_components(v_rms, i_rms, alpha, beta);
        let s = complex_power(
            Phasor::new(v_rms, alpha).to_complex(),
            Phasor::new(i_rms, beta).to_complex(),
        );
        assert_abs_diff_eq!(p, s.re, epsilon = 1e-14);
        assert_abs_diff_eq!(q, s.im, epsilon = 1e-14);
    }

    #[test]
    fn power_magnitude_is_product_of_magnitudes() {
        let v = Phasor::new(1.3, 0.7).to_complex();
        let i = Phasor::new(0.6, -1.1).to_complex();
        let s = complex_power(v, i);
        assert_abs_diff_eq!(s.norm(), 1.3 * 0.6, epsilon = 1e-14);
    }

    #[test]
    fn swapping_arguments_conjugates() {
        let v = Complex64::new(0.9, 0.3);
        let i = Complex64::new(-0.2, 0.5);
        assert_eq!(complex_power(v, i), complex_power(i, v).conj());
    }

    #[test]
    fn power_balance_follows_current_balance() {
        let v = Phasor::new(1.0, 0.2).to_complex();
        let branches = [
            Complex64::new(0.4, 0.0),
            Complex64::new(0.1, -0.75),
            Complex64::new(-0.05, 0.75),
        ];
        let total: Complex64 = branches.iter().sum();
        let lhs = complex_power(v, total);
        let rhs: Complex64 = branches.iter().map(|&i| complex_power(v, i)).sum();
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-14);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-14);
    }

    #[test]
    fn parallel_admittances_add() {
        let omega = 2.7;
        let (r, l, c) = (1.9, 0.6, 0.31);
        let total = admittance(ElementKind::Resistor(r), omega).unwrap()
            + admittance(ElementKind::Inductor(l), omega).unwrap()
            + admittance(ElementKind::Capacitor(c), omega).unwrap();
        let expected = Complex64::new(1.0 / r, omega * c - 1.0 / (omega * l));
        assert_abs_diff_eq!(total.re, expected.re, epsilon = 1e-14);
        assert_abs_diff_eq!(total.im, expected.im, epsilon = 1e-14);
    }

    #[test]
    fn phase_normalization_lands_in_half_open_interval() {
        for k in -6..=6 {
            let phi = 0.4 + k as f64 * 2.0 * PI;
            let n = normalize_phase(phi);
            assert!(n > -PI && n <= PI);
            assert_abs_diff_eq!(n, 0.4, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(normalize_phase(PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(normalize_phase(-PI), PI, epsilon = 1e-15);
    }

    #[test]
    fn negative_magnitude_folds_into_phase() {
        let p = Phasor::new(-2.0, 0.0);
        assert_eq!(p.magnitude, 2.0);
        assert_abs_diff_eq!(p.phase, PI, epsilon = 1e-15);
    }
}
