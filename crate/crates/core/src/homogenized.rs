//! Leading-order dynamics: `φ̇₀ = ω(y₀)`, `ẏ₀ = p₀`, `ṗ₀ = -θ* ω′(y₀)`, with the
//! action frozen at `θ*`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::integrate::{dense_eval, integrate_controlled_with, ControlOptions, Trajectory};
use crate::model::{derived_constants, FrequencyModel, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HomogenizedState {
    pub phi0: f64,
    pub y0: f64,
    pub p0: f64,
    pub theta0: f64,
}

impl HomogenizedState {
    /// Build from the integrated components `(φ₀, y₀, p₀)`.
    pub fn from_slice(x: &[f64], theta_star: f64) -> Self {
        HomogenizedState {
            phi0: x[0],
            y0: x[1],
            p0: x[2],
            theta0: theta_star,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.phi0, self.y0, self.p0]
    }
}

/// Time derivative; `theta0` of the result is always zero.
pub fn homogenized_rhs(
    s: &HomogenizedState,
    fm: &FrequencyModel,
    theta_star: f64,
) -> HomogenizedState {
    let d = fm.derivs(s.y0);
    HomogenizedState {
        phi0: d.w,
        y0: s.p0,
        p0: -theta_star * d.w1,
        theta0: 0.0,
    }
}

/// Leading-order energy `½p₀² + θ* ω(y₀)`, a first integral.
pub fn homogenized_energy(s: &HomogenizedState, fm: &FrequencyModel) -> f64 {
    0.5 * s.p0 * s.p0 + s.theta0 * fm.omega(s.y0)
}

/// Largest step used for homogenized and averaged solves, so that dense
/// output stays far below the measured residuals.
pub(crate) fn smooth_h_max(horizon: f64) -> f64 {
    horizon / 2000.0
}

/// Solve from `(φ₀, y₀, p₀)(0) = (0, y*, p*)` over `[0, horizon]`.
pub fn solve_homogenized(
    params: &SystemParams,
    fm: &FrequencyModel,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory<3>> {
    solve_homogenized_to(params, fm, params.horizon, rtol, atol)
}

/// Like [`solve_homogenized`] with an explicit end time.
pub fn solve_homogenized_to(
    params: &SystemParams,
    fm: &FrequencyModel,
    horizon: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory<3>> {
    params.validate()?;
    let theta_star = derived_constants(params, fm).theta_star;
    let opts = ControlOptions::new(rtol, atol).with_h_max(smooth_h_max(params.horizon));
    integrate_controlled_with(
        |_, x: &[f64; 3]| {
            homogenized_rhs(&HomogenizedState::from_slice(x, theta_star), fm, theta_star).to_array()
        },
        [0.0, params.y_star, params.p_star],
        horizon,
        &opts,
    )
}

/// Time `t` with `φ₀(t) = π r`, where `φ₀` is component 0 of `traj`.
pub fn invert_phase<const N: usize>(traj: &Trajectory<N>, r: f64) -> Result<f64> {
    let target = PI * r;
    let phi_end = traj.final_state()[0];
    let phi_start = traj.states[0][0];
    if !(target >= phi_start && target <= phi_end) {
        return Err(Error::OutOfRange {
            what: "r",
            value: r,
            lo: phi_start / PI,
            hi: phi_end / PI,
        });
    }
    let i = traj.states.partition_point(|x| x[0] < target);
    if i < traj.len() && traj.states[i][0] == target {
        return Ok(traj.times[i]);
    }
    let (mut lo, mut hi) = (traj.times[i - 1], traj.times[i]);
    let tol = 1e-13 * target.abs().max(1.0);
    let mut best = (f64::INFINITY, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = dense_eval(traj, mid)?[0] - target;
        if f.abs() < best.0 {
            best = (f.abs(), mid);
        }
        if f.abs() <= tol || mid <= lo || mid >= hi {
            break;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}
