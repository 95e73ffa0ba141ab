//! Frequency function, problem parameters and the constants derived from them.
//!
//! Every frequency preset is stored as a truncated Fourier series
//! `a0 + Σ (a_k cos ky + b_k sin ky)`, which gives closed-form derivatives of
//! any order and a cheap certified lower bound `a0 - Σ (|a_k| + |b_k|)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `ω(y) = ω0`.
    Constant,
    /// `ω(y) = a + b sin y`.
    Sine,
    /// `a0 + Σ (a_k cos ky + b_k sin ky)` with coefficients `[a0, a1, b1, a2, b2, ...]`.
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Constant => "constant",
            Preset::Sine => "sine",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(Preset::Constant),
            "sine" => Ok(Preset::Sine),
            "custom" | "custom-coefficients" | "fourier" => Ok(Preset::Custom),
            other => Err(Error::InvalidFrequency(format!("unknown preset `{other}`"))),
        }
    }
}

/// `ω` and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaDerivs {
    pub w: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

/// `log ω` and its first three derivatives with respect to `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDerivatives {
    pub l: f64,
    pub dy_l: f64,
    pub dy2_l: f64,
    pub dy3_l: f64,
}

impl From<OmegaDerivs> for LogDerivatives {
    fn from(d: OmegaDerivs) -> Self {
        let r1 = d.w1 / d.w;
        let r2 = d.w2 / d.w;
        let r3 = d.w3 / d.w;
        LogDerivatives {
            l: d.w.ln(),
            dy_l: r1,
            dy2_l: r2 - r1 * r1,
            dy3_l: r3 - 3.0 * r1 * r2 + 2.0 * r1 * r1 * r1,
        }
    }
}

/// Smooth, uniformly positive frequency `ω(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyModel {
    preset: Preset,
    coefficients: Vec<f64>,
    mean: f64,
    // (k, a_k, b_k)
    harmonics: Vec<(f64, f64, f64)>,
    lower: f64,
    upper: f64,
}

/// Build a frequency model, rejecting coefficient sets whose certified lower
/// bound is not strictly positive.
pub fn make_frequency(preset: Preset, coefficients: &[f64]) -> Result<FrequencyModel> {
    if let Some(bad) = coefficients.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidFrequency(format!(
            "non-finite coefficient {bad}"
        )));
    }
    let (mean, harmonics) = match preset {
        Preset::Constant => match coefficients {
            [w0] => (*w0, Vec::new()),
            _ => {
                return Err(Error::InvalidFrequency(format!(
                    "constant preset takes one coefficient, got {}",
                    coefficients.len()
                )))
            }
        },
        Preset::Sine => match coefficients {
            [a, b] => (*a, vec![(1.0, 0.0, *b)]),
            _ => {
                return Err(Error::InvalidFrequency(format!(
                    "sine preset takes two coefficients (a, b), got {}",
                    coefficients.len()
                )))
            }
        },
        Preset::Custom => {
            if coefficients.is_empty() || coefficients.len().is_multiple_of(2) {
                return Err(Error::InvalidFrequency(format!(
                    "custom preset takes [a0, a1, b1, ...] (odd length), got {}",
                    coefficients.len()
                )));
            }
            let harmonics = coefficients[1..]
                .chunks_exact(2)
                .enumerate()
                .map(|(i, ab)| ((i + 1) as f64, ab[0], ab[1]))
                .collect();
            (coefficients[0], harmonics)
        }
    };
    let spread: f64 = harmonics.iter().map(|&(_, a, b)| a.abs() + b.abs()).sum();
    let lower = mean - spread;
    if lower <= 0.0 {
        return Err(Error::InvalidFrequency(format!(
            "lower bound {lower} of {preset} frequency is not positive"
        )));
    }
    Ok(FrequencyModel {
        preset,
        coefficients: coefficients.to_vec(),
        mean,
        harmonics,
        lower,
        upper: mean + spread,
    })
}

impl FrequencyModel {
    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Certified `ω*` with `ω(y) ≥ ω*` everywhere.
    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    /// Certified upper bound of `ω`, used for step-size selection.
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn is_constant(&self) -> bool {
        self.harmonics.iter().all(|&(_, a, b)| a == 0.0 && b == 0.0)
    }

    #[inline]
    pub fn omega(&self, y: f64) -> f64 {
        let mut w = self.mean;
        for &(k, a, b) in &self.harmonics {
            let (s, c) = (k * y).sin_cos();
            w += a * c + b * s;
        }
        debug_assert!(w >= self.lower * (1.0 - 1e-12), "ω({y}) = {w} below ω*");
        w
    }

    #[inline]
    pub fn derivs(&self, y: f64) -> OmegaDerivs {
        let mut d = OmegaDerivs {
            w: self.mean,
            w1: 0.0,
            w2: 0.0,
            w3: 0.0,
        };
        for &(k, a, b) in &self.harmonics {
            let (s, c) = (k * y).sin_cos();
            let even = a * c + b * s;
            let odd = b * c - a * s;
            d.w += even;
            d.w1 += k * odd;
            d.w2 -= k * k * even;
            d.w3 -= k * k * k * odd;
        }
        debug_assert!(
            d.w >= self.lower * (1.0 - 1e-12),
            "ω({y}) = {} below ω*",
            d.w
        );
        d
    }

    /// Upper bound on `|ω^(order)|`; used as the scale for derivative checks.
    pub fn derivative_scale(&self, order: i32) -> f64 {
        if order == 0 {
            return self.upper;
        }
        self.harmonics
            .iter()
            .map(|&(k, a, b)| k.powi(order) * (a.abs() + b.abs()))
            .sum()
    }
}

pub fn log_derivatives(fm: &FrequencyModel, y: f64) -> LogDerivatives {
    fm.derivs(y).into()
}

/// Outcome of comparing the hand-coded derivatives against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    /// Worst scaled error for ω′, ω″, ω‴.
    pub max_error: [f64; 3],
    pub points: usize,
    pub tolerance: f64,
}

impl DerivativeCheck {
    pub fn passed(&self) -> bool {
        self.max_error.iter().all(|&e| e <= self.tolerance)
    }
}

/// Compare each hand-coded derivative with the central difference (step
/// `1e-5`) of the next lower one at `points` seeded uniform samples in
/// `[-10, 10]`. Errors are relative to `max(|exact|, sup|ω^(j)|)` so that
/// zeros of a derivative do not blow up the ratio.
pub fn validate_derivatives(fm: &FrequencyModel, points: usize, seed: u64) -> DerivativeCheck {
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = [0.0f64; 3];
    for _ in 0..points {
        let y: f64 = rng.random_range(-10.0..=10.0);
        let lo = fm.derivs(y - STEP);
        let hi = fm.derivs(y + STEP);
        let at = fm.derivs(y);
        let fd = [
            (hi.w - lo.w) / (2.0 * STEP),
            (hi.w1 - lo.w1) / (2.0 * STEP),
            (hi.w2 - lo.w2) / (2.0 * STEP),
        ];
        let exact = [at.w1, at.w2, at.w3];
        for j in 0..3 {
            let scale = exact[j].abs().max(fm.derivative_scale(j as i32 + 1));
            let err = if scale == 0.0 {
                (fd[j] - exact[j]).abs()
            } else {
                (fd[j] - exact[j]).abs() / scale
            };
            max_error[j] = max_error[j].max(err);
        }
    }
    DerivativeCheck {
        max_error,
        points,
        tolerance: 1e-6,
    }
}

/// Initial data and horizon. `z(0) = 0` and `φ(0) = 0` are fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub y_star: f64,
    pub p_star: f64,
    pub u_star: f64,
    pub horizon: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("horizon", self.horizon)?;
        for (name, v) in [
            ("y_star", self.y_star),
            ("p_star", self.p_star),
            ("u_star", self.u_star),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// `u* = 0` leaves the fast oscillator at rest.
    pub fn is_degenerate(&self) -> bool {
        self.u_star == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Adiabatic invariant `θ* = u*² / 2ω(y*)`.
    pub theta_star: f64,
    /// Conserved total energy `E* = p*²/2 + u*²/2`.
    pub e_star: f64,
    /// Entropy constant, `-log θ*` so that the entropy starts at zero.
    pub entropy_constant: f64,
    /// Constant part of the closed-form second-order entropy.
    pub c_sbarbar2: f64,
    /// Set when `θ* = 0`.
    pub degenerate_fast: bool,
}

pub fn derived_constants(params: &SystemParams, fm: &FrequencyModel) -> DerivedConstants {
    let d = fm.derivs(params.y_star);
    let p = params.p_star;
    let theta_star = params.u_star * params.u_star / (2.0 * d.w);
    let e_star = 0.5 * p * p + 0.5 * params.u_star * params.u_star;
    let w2 = d.w * d.w;
    let w3 = w2 * d.w;
    let ratio = p * d.w1 / (2.0 * w2);
    let c_sbarbar2 = -0.5 * ratio * ratio - 5.0 * theta_star * d.w1 * d.w1 / (16.0 * w3)
        + p * p * d.w2 / (4.0 * w3)
        - p * p * d.w1 * d.w1 / (4.0 * w3 * d.w);
    DerivedConstants {
        theta_star,
        e_star,
        entropy_constant: -theta_star.ln(),
        c_sbarbar2,
        degenerate_fast: theta_star == 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sine() -> FrequencyModel {
        make_frequency(Preset::Sine, &[2.0, 1.0]).unwrap()
    }

    fn test_params() -> SystemParams {
        SystemParams {
            y_star: 0.0,
            p_star: 1.0,
            u_star: 1.0,
            horizon: 1.0,
        }
    }

    #[test]
    fn sine_preset_values() {
        let fm = sine();
        let d = fm.derivs(0.0);
        assert_eq!(d.w, 2.0);
        assert_eq!(d.w1, 1.0);
        assert_eq!(fm.lower_bound(), 1.0);
        assert_eq!(fm.upper_bound(), 3.0);
    }

    #[test]
    fn constant_preset_has_zero_derivatives() {
        let fm = make_frequency(Preset::Constant, &[3.0]).unwrap();
        for y in [-7.0, 0.0, 1.3, 42.0] {
            let d = fm.derivs(y);
            assert_eq!((d.w, d.w1, d.w2, d.w3), (3.0, 0.0, 0.0, 0.0));
        }
        assert!(fm.is_constant());
    }

    #[test]
    fn rejects_nonpositive_lower_bound() {
        assert!(make_frequency(Preset::Sine, &[1.0, 1.0]).is_err());
        assert!(make_frequency(Preset::Sine, &[1.0, -1.5]).is_err());
        assert!(make_frequency(Preset::Constant, &[0.0]).is_err());
        assert!(make_frequency(Preset::Custom, &[1.0, 0.5, 0.6]).is_err());
        assert!(make_frequency(Preset::Custom, &[1.0, 0.5]).is_err());
        assert!(make_frequency(Preset::Sine, &[2.0]).is_err());
    }

    #[test]
    fn custom_matches_sine() {
        let custom = make_frequency(Preset::Custom, &[2.0, 0.0, 1.0]).unwrap();
        let fm = sine();
        for y in [-3.0, -0.2, 0.0, 0.7, 5.5] {
            assert_eq!(custom.derivs(y), fm.derivs(y));
        }
    }

    #[test]
    fn log_derivatives_examples() {
        let fm = sine();
        let l = log_derivatives(&fm, 0.0);
        assert_relative_eq!(l.l, 2f64.ln());
        assert_eq!(l.dy_l, 0.5);
        assert_eq!(l.dy2_l, -0.25);
        let l = log_derivatives(&fm, std::f64::consts::FRAC_PI_2);
        assert!(l.dy_l.abs() < 1e-16);

        let c = make_frequency(Preset::Constant, &[3.0]).unwrap();
        let l = log_derivatives(&c, 1.7);
        assert_eq!((l.dy_l, l.dy2_l, l.dy3_l), (0.0, 0.0, 0.0));
    }

    #[test]
    fn log_derivatives_consistent_with_differences() {
        let fm = make_frequency(Preset::Custom, &[3.0, 0.4, -0.7, 0.2, 0.3]).unwrap();
        let h = 1e-5;
        for i in 0..50 {
            let y = -5.0 + 0.2 * i as f64;
            let l = log_derivatives(&fm, y);
            let d = fm.derivs(y);
            assert!((l.dy_l * d.w - d.w1).abs() <= 4.0 * f64::EPSILON * d.w1.abs());
            let lo = log_derivatives(&fm, y - h);
            let hi = log_derivatives(&fm, y + h);
            let fd2 = (hi.dy_l - lo.dy_l) / (2.0 * h);
            let fd3 = (hi.dy2_l - lo.dy2_l) / (2.0 * h);
            assert!((fd2 - l.dy2_l).abs() <= 1e-6 * l.dy2_l.abs().max(1.0));
            assert!((fd3 - l.dy3_l).abs() <= 1e-6 * l.dy3_l.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_validation_passes_for_presets() {
        for fm in [
            sine(),
            make_frequency(Preset::Constant, &[3.0]).unwrap(),
            make_frequency(Preset::Custom, &[4.0, 0.5, -0.3, 0.25, 0.8, -0.1, 0.2]).unwrap(),
        ] {
            let check = validate_derivatives(&fm, 100, 7);
            assert!(check.passed(), "{:?} {:?}", fm.preset(), check.max_error);
        }
    }

    #[test]
    fn derived_constants_for_test_configuration() {
        let c = derived_constants(&test_params(), &sine());
        assert_eq!(c.theta_star, 0.25);
        assert_eq!(c.e_star, 1.0);
        assert_eq!(c.entropy_constant, -(0.25f64.ln()));
        assert_relative_eq!(c.c_sbarbar2, -0.033203125, max_relative = 1e-15);
        assert!(!c.degenerate_fast);
    }

    #[test]
    fn degenerate_fast_subsystem_is_flagged() {
        let params = SystemParams {
            u_star: 0.0,
            ..test_params()
        };
        assert!(params.is_degenerate());
        let c = derived_constants(&params, &sine());
        assert_eq!(c.theta_star, 0.0);
        assert!(c.degenerate_fast);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in [Preset::Constant, Preset::Sine, Preset::Custom] {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("cosine".parse::<Preset>().is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn derivative_check_passes_for_fourier_models(h in proptest::collection::vec(-0.3..0.3f64, 2..8usize)) {
            let mut coeffs = vec![3.0];
            coeffs.extend(h.iter().copied());
            if coeffs.len() % 2 == 0 {
                coeffs.push(0.1);
            }
            let fm = make_frequency(Preset::Custom, &coeffs).unwrap();
            let check = validate_derivatives(&fm, 100, 1);
            proptest::prop_assert!(check.passed(), "{:?}", check.max_error);
        }
    }
}
