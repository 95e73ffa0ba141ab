//! Exact equations of motion in Cartesian and action-angle coordinates, the
//! symplectic transform between them, and the energy functions.

use crate::error::{check_positive, Error, Result};
use crate::model::{FrequencyModel, LogDerivatives};
use crate::phase::{fast_sin_cos, reduced_angle};

/// Canonical coordinates `(y, η, z, ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianState {
    pub y: f64,
    pub eta: f64,
    pub z: f64,
    pub zeta: f64,
}

/// Action-angle coordinates `(φ, θ, y, p)` of the fast oscillator together
/// with the slow position and transformed slow momentum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionAngleState {
    pub phi: f64,
    pub theta: f64,
    pub y: f64,
    pub p: f64,
}

impl CartesianState {
    pub fn to_array(self) -> [f64; 4] {
        [self.y, self.eta, self.z, self.zeta]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        CartesianState {
            y: a[0],
            eta: a[1],
            z: a[2],
            zeta: a[3],
        }
    }

    pub fn initial(y_star: f64, p_star: f64, u_star: f64) -> Self {
        CartesianState {
            y: y_star,
            eta: p_star,
            z: 0.0,
            zeta: u_star,
        }
    }
}

impl ActionAngleState {
    pub fn to_array(self) -> [f64; 4] {
        [self.phi, self.theta, self.y, self.p]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        ActionAngleState {
            phi: a[0],
            theta: a[1],
            y: a[2],
            p: a[3],
        }
    }
}

pub fn cartesian_rhs(s: &CartesianState, eps: f64, fm: &FrequencyModel) -> Result<CartesianState> {
    check_positive("epsilon", eps)?;
    Ok(cartesian_rhs_unchecked(s, eps, fm))
}

#[inline]
pub(crate) fn cartesian_rhs_unchecked(
    s: &CartesianState,
    eps: f64,
    fm: &FrequencyModel,
) -> CartesianState {
    let d = fm.derivs(s.y);
    let inv_eps2 = 1.0 / (eps * eps);
    CartesianState {
        y: s.eta,
        eta: -inv_eps2 * d.w * d.w1 * s.z * s.z,
        z: s.zeta,
        zeta: -inv_eps2 * d.w * d.w * s.z,
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("action must be non-negative, got {theta}"),
        })
    }
}

/// Right-hand side of the canonical equations generated by the transformed
/// energy, written with `ω` and its derivatives.
pub fn action_angle_rhs(
    s: &ActionAngleState,
    eps: f64,
    fm: &FrequencyModel,
) -> Result<ActionAngleState> {
    check_positive("epsilon", eps)?;
    check_theta(s.theta)?;
    Ok(action_angle_rhs_unchecked(s, eps, fm))
}

#[inline]
pub(crate) fn action_angle_rhs_unchecked(
    s: &ActionAngleState,
    eps: f64,
    fm: &FrequencyModel,
) -> ActionAngleState {
    let d = fm.derivs(s.y);
    let (s2, c2) = fast_sin_cos(s.phi, eps, 2.0);
    let (s4, _) = fast_sin_cos(s.phi, eps, 4.0);
    let w2 = d.w * d.w;
    let w3 = w2 * d.w;
    let w1sq = d.w1 * d.w1;
    let th = s.theta;
    let p = s.p;
    let sin2sq = s2 * s2;
    let eps2 = eps * eps;

    let phi_dot = d.w + eps * p * d.w1 / (2.0 * d.w) * s2 + eps2 * th * w1sq / (4.0 * w2) * sin2sq;
    let theta_dot = -th * p * d.w1 / d.w * c2 - eps * th * th * w1sq / (4.0 * w2) * s4;
    let y_dot = p + eps * th * d.w1 / (2.0 * d.w) * s2;
    let p_dot = -th * d.w1 + eps * th * p * w1sq / (2.0 * w2) * s2
        - eps * th * p * d.w2 / (2.0 * d.w) * s2
        + eps2 * th * th * w1sq * d.w1 / (4.0 * w3) * sin2sq
        - eps2 * th * th * d.w1 * d.w2 / (4.0 * w2) * sin2sq;
    ActionAngleState {
        phi: phi_dot,
        theta: theta_dot,
        y: y_dot,
        p: p_dot,
    }
}

/// Same vector field written with the log-derivatives `D_y^l log ω`.
pub fn action_angle_rhs_log_form(
    s: &ActionAngleState,
    eps: f64,
    fm: &FrequencyModel,
) -> Result<ActionAngleState> {
    check_positive("epsilon", eps)?;
    check_theta(s.theta)?;
    let w = fm.omega(s.y);
    let w1 = fm.derivs(s.y).w1;
    let l: LogDerivatives = fm.derivs(s.y).into();
    let (s2, c2) = fast_sin_cos(s.phi, eps, 2.0);
    let (s4, _) = fast_sin_cos(s.phi, eps, 4.0);
    let th = s.theta;
    let p = s.p;
    Ok(ActionAngleState {
        phi: w + 0.5 * eps * p * l.dy_l * s2 + 0.25 * eps * eps * th * l.dy_l * l.dy_l * s2 * s2,
        theta: -th * p * l.dy_l * c2 - 0.25 * eps * th * th * l.dy_l * l.dy_l * s4,
        y: p + 0.5 * eps * th * l.dy_l * s2,
        p: -th * w1
            - 0.5 * eps * th * p * l.dy2_l * s2
            - 0.25 * eps * eps * th * th * l.dy_l * l.dy2_l * s2 * s2,
    })
}

/// Same vector field after eliminating `p` in favour of `ẏ`, so that only the
/// time derivatives `D_t log ω = ẏ D_y log ω` and `D_t D_y log ω = ẏ D_y² log ω`
/// appear.
pub fn action_angle_rhs_velocity_form(
    s: &ActionAngleState,
    eps: f64,
    fm: &FrequencyModel,
) -> Result<ActionAngleState> {
    check_positive("epsilon", eps)?;
    check_theta(s.theta)?;
    let d = fm.derivs(s.y);
    let l: LogDerivatives = d.into();
    let (s2, c2) = fast_sin_cos(s.phi, eps, 2.0);
    let th = s.theta;
    let y_dot = s.p + 0.5 * eps * th * l.dy_l * s2;
    let dt_l = y_dot * l.dy_l;
    let dt_dy_l = y_dot * l.dy2_l;
    Ok(ActionAngleState {
        phi: d.w + 0.5 * eps * dt_l * s2,
        theta: -th * dt_l * c2,
        y: y_dot,
        p: -th * d.w1 - 0.5 * eps * th * dt_dy_l * s2,
    })
}

/// Result of the Cartesian → action-angle map. The angle is undefined when
/// the oscillator is at rest; `φ = 0` is returned with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transformed {
    pub state: ActionAngleState,
    pub degenerate: bool,
}

pub fn to_action_angle(s: &CartesianState, eps: f64, fm: &FrequencyModel) -> Result<Transformed> {
    to_action_angle_impl(s, eps, fm, None)
}

/// Like [`to_action_angle`], choosing the branch of `φ` closest to `phi_prev`.
pub fn to_action_angle_near(
    s: &CartesianState,
    eps: f64,
    fm: &FrequencyModel,
    phi_prev: f64,
) -> Result<Transformed> {
    to_action_angle_impl(s, eps, fm, Some(phi_prev))
}

fn to_action_angle_impl(
    s: &CartesianState,
    eps: f64,
    fm: &FrequencyModel,
    phi_prev: Option<f64>,
) -> Result<Transformed> {
    check_positive("epsilon", eps)?;
    let d = fm.derivs(s.y);
    let scaled_z = d.w * s.z / eps;
    let theta = (s.zeta * s.zeta + scaled_z * scaled_z) / (2.0 * d.w);
    if theta == 0.0 {
        return Ok(Transformed {
            state: ActionAngleState {
                phi: 0.0,
                theta: 0.0,
                y: s.y,
                p: s.eta,
            },
            degenerate: true,
        });
    }
    let alpha = scaled_z.atan2(s.zeta);
    let phi = match phi_prev {
        None => eps * alpha,
        Some(prev) => {
            let turns = ((prev / eps - alpha) / std::f64::consts::TAU).round();
            eps * (alpha + turns * std::f64::consts::TAU)
        }
    };
    // sin(2φ/ε) only depends on α, which avoids amplifying the branch offset
    let s2 = (2.0 * alpha).sin();
    let p = s.eta - eps * theta * d.w1 / (2.0 * d.w) * s2;
    Ok(Transformed {
        state: ActionAngleState {
            phi,
            theta,
            y: s.y,
            p,
        },
        degenerate: false,
    })
}

pub fn from_action_angle(
    s: &ActionAngleState,
    eps: f64,
    fm: &FrequencyModel,
) -> Result<CartesianState> {
    check_positive("epsilon", eps)?;
    check_theta(s.theta)?;
    let d = fm.derivs(s.y);
    let (s1, c1) = fast_sin_cos(s.phi, eps, 1.0);
    let (s2, _) = fast_sin_cos(s.phi, eps, 2.0);
    Ok(CartesianState {
        y: s.y,
        eta: s.p + eps * s.theta * d.w1 / (2.0 * d.w) * s2,
        z: eps * (2.0 * s.theta / d.w).sqrt() * s1,
        zeta: (2.0 * s.theta * d.w).sqrt() * c1,
    })
}

/// Convert a sampled Cartesian path, unwrapping `φ` so it is continuous.
pub fn cartesian_path_to_action_angle(
    path: &[CartesianState],
    eps: f64,
    fm: &FrequencyModel,
) -> Result<Vec<ActionAngleState>> {
    let mut out = Vec::with_capacity(path.len());
    let mut prev: Option<f64> = None;
    for s in path {
        let t = to_action_angle_impl(s, eps, fm, prev)?;
        if !t.degenerate {
            prev = Some(t.state.phi);
        }
        out.push(t.state);
    }
    Ok(out)
}

pub fn energy_cartesian(s: &CartesianState, eps: f64, fm: &FrequencyModel) -> f64 {
    let (e_perp, _) = split_energy_cartesian(s, eps, fm);
    0.5 * s.eta * s.eta + e_perp
}

/// The four-term transformed energy, including the `ε²` term.
pub fn energy_action_angle(s: &ActionAngleState, eps: f64, fm: &FrequencyModel) -> f64 {
    let d = fm.derivs(s.y);
    let (s2, _) = fast_sin_cos(s.phi, eps, 2.0);
    let q = s.theta * d.w1 / d.w * s2;
    0.5 * s.p * s.p + s.theta * d.w + 0.5 * eps * s.p * q + eps * eps / 8.0 * q * q
}

/// `(E⊥, E∥)` from Cartesian coordinates: `E⊥ = ζ²/2 + ω² z² / 2ε²`.
pub fn split_energy_cartesian(s: &CartesianState, eps: f64, fm: &FrequencyModel) -> (f64, f64) {
    let w = fm.omega(s.y);
    let scaled_z = w * s.z / eps;
    let e_perp = 0.5 * s.zeta * s.zeta + 0.5 * scaled_z * scaled_z;
    (e_perp, 0.5 * s.eta * s.eta)
}

/// `(E⊥, E∥)` from action-angle coordinates: `E⊥ = θ ω(y)`, `E∥ = E - E⊥`.
pub fn split_energy_action_angle(
    s: &ActionAngleState,
    eps: f64,
    fm: &FrequencyModel,
) -> (f64, f64) {
    let e = energy_action_angle(s, eps, fm);
    let e_perp = s.theta * fm.omega(s.y);
    (e_perp, e - e_perp)
}

/// Angle `φ/ε` reduced to `[-π, π]`, exposed for diagnostics.
pub fn fast_angle(phi: f64, eps: f64) -> f64 {
    reduced_angle(phi, eps, 1.0)
}
