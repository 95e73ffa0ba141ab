//! Second-order asymptotic expansion: oscillatory correctors, the averaged
//! linear system for the non-oscillatory terms, reconstruction of the full
//! state, and residual norms against finite-`ε` reference solutions.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::averaging::estimate_order;
use crate::dynamics::{action_angle_rhs_unchecked, energy_action_angle, ActionAngleState};
use crate::error::{check_positive, Error, Result};
use crate::homogenized::{smooth_h_max, HomogenizedState};
use crate::integrate::{
    dense_eval, integrate_controlled_with, reference_solution, ControlOptions, Trajectory,
};
use crate::model::{derived_constants, FrequencyModel, SystemParams};
use crate::phase::fast_sin_cos;

/// Rapidly oscillating parts of the expansion at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrectorValues {
    pub theta1: f64,
    pub phi2: f64,
    pub y2: f64,
    pub p2: f64,
    pub theta2: f64,
}

/// Slowly varying second-order terms `(φ̄₂, θ̄₂, ȳ₂, p̄₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AveragedCorrection {
    pub phi2_bar: f64,
    pub theta2_bar: f64,
    pub y2_bar: f64,
    pub p2_bar: f64,
}

impl AveragedCorrection {
    pub fn to_array(self) -> [f64; 4] {
        [self.phi2_bar, self.theta2_bar, self.y2_bar, self.p2_bar]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        AveragedCorrection {
            phi2_bar: x[0],
            theta2_bar: x[1],
            y2_bar: x[2],
            p2_bar: x[3],
        }
    }
}

/// Frequency data and log-derivative combinations along the leading-order
/// solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseQuantities {
    pub w: f64,
    pub w1: f64,
    pub w2: f64,
    pub p0: f64,
    pub theta_star: f64,
    /// `D_y log ω(y₀)`.
    pub dy_l: f64,
    /// `D_y² log ω(y₀)`.
    pub dy2_l: f64,
    /// `D_t log ω(y₀) = p₀ D_y log ω`.
    pub dt_l: f64,
    /// `D_t² log ω(y₀) = -θ* ω′ D_y log ω + p₀² D_y² log ω`.
    pub dt2_l: f64,
    /// `D_t D_y log ω(y₀) = p₀ D_y² log ω`.
    pub dt_dy_l: f64,
}

pub fn base_quantities(
    base: &HomogenizedState,
    fm: &FrequencyModel,
    theta_star: f64,
) -> BaseQuantities {
    let d = fm.derivs(base.y0);
    let dy_l = d.w1 / d.w;
    let dy2_l = d.w2 / d.w - dy_l * dy_l;
    let p0 = base.p0;
    BaseQuantities {
        w: d.w,
        w1: d.w1,
        w2: d.w2,
        p0,
        theta_star,
        dy_l,
        dy2_l,
        dt_l: p0 * dy_l,
        dt2_l: -theta_star * d.w1 * dy_l + p0 * p0 * dy2_l,
        dt_dy_l: p0 * dy2_l,
    }
}

/// Correctors for given values of `sin(2α)`, `cos(2α)` and `cos(4α)`, where
/// `α` is the fast angle.
fn corrector_profile(
    q: &BaseQuantities,
    phi2_bar: f64,
    s2: f64,
    c2: f64,
    c4: f64,
) -> CorrectorValues {
    let ts = q.theta_star;
    let w = q.w;
    let theta1 = -ts * q.dt_l / (2.0 * w) * s2;
    let phi2 = -q.dt_l / (4.0 * w) * c2;
    let y2 = -ts * q.dy_l / (4.0 * w) * c2;
    // d/dt (θ* ω′ / 4ω²) along ẏ₀ = p₀
    let p2 = ts * q.p0 / 4.0 * (q.w2 / (w * w) - 2.0 * q.w1 * q.w1 / (w * w * w)) * c2;
    let theta2 = -ts * q.dy_l * y2 - q.p0 / w * p2 + ts * ts * q.dy_l * q.dy_l / (16.0 * w) * c4
        - ts * q.dt_l / w * phi2_bar * c2;
    CorrectorValues {
        theta1,
        phi2,
        y2,
        p2,
        theta2,
    }
}

/// Evaluate the five correctors at fast angle `φ₀/ε`.
pub fn correctors(
    base: &HomogenizedState,
    phi2_bar: f64,
    eps: f64,
    fm: &FrequencyModel,
    theta_star: f64,
) -> CorrectorValues {
    let q = base_quantities(base, fm, theta_star);
    let (s2, c2) = fast_sin_cos(base.phi0, eps, 2.0);
    let (_, c4) = fast_sin_cos(base.phi0, eps, 4.0);
    corrector_profile(&q, phi2_bar, s2, c2, c4)
}

/// Profiles with the fast angle `2φ₀/ε` replaced by `2πs`, `s ∈ [0, 1)`.
pub fn two_scale_limits(
    s: f64,
    base: &HomogenizedState,
    phi2_bar: f64,
    fm: &FrequencyModel,
    theta_star: f64,
) -> CorrectorValues {
    let q = base_quantities(base, fm, theta_star);
    let (s2, c2) = (TAU * s).sin_cos();
    let c4 = (2.0 * TAU * s).cos();
    corrector_profile(&q, phi2_bar, s2, c2, c4)
}

impl CorrectorValues {
    /// Amplitude bounds: the coefficient of each harmonic, in absolute value.
    pub fn envelopes(
        base: &HomogenizedState,
        phi2_bar: f64,
        fm: &FrequencyModel,
        theta_star: f64,
    ) -> Self {
        let q = base_quantities(base, fm, theta_star);
        let ts = theta_star;
        let w = q.w;
        let y2 = (ts * q.dy_l / (4.0 * w)).abs();
        let p2 = (ts * q.p0 / 4.0 * (q.w2 / (w * w) - 2.0 * q.w1 * q.w1 / (w * w * w))).abs();
        CorrectorValues {
            theta1: (ts * q.dt_l / (2.0 * w)).abs(),
            phi2: (q.dt_l / (4.0 * w)).abs(),
            y2,
            p2,
            theta2: (ts * q.dy_l).abs() * y2
                + (q.p0 / w).abs() * p2
                + ts * ts * q.dy_l * q.dy_l / (16.0 * w)
                + (ts * q.dt_l / w * phi2_bar).abs(),
        }
    }
}

/// Right-hand side of the averaged second-order system.
pub fn averaged_rhs(
    corr: &AveragedCorrection,
    base: &HomogenizedState,
    fm: &FrequencyModel,
    theta_star: f64,
) -> AveragedCorrection {
    let q = base_quantities(base, fm, theta_star);
    averaged_rhs_with(corr, &q)
}

fn averaged_rhs_with(corr: &AveragedCorrection, q: &BaseQuantities) -> AveragedCorrection {
    let ts = q.theta_star;
    let w = q.w;
    let g = q.dt_l;
    AveragedCorrection {
        phi2_bar: q.w1 * corr.y2_bar + ts * q.dy_l * q.dy_l / 8.0 - g * g / (8.0 * w),
        // d/dt of θ* g² / (8ω²), with ġ = D_t² log ω and ω̇ = ω′ p₀
        theta2_bar: ts / 8.0
            * (2.0 * g * q.dt2_l / (w * w) - 2.0 * g * g * q.w1 * q.p0 / (w * w * w)),
        y2_bar: corr.p2_bar - ts * q.dy_l * g / (4.0 * w),
        p2_bar: -q.w1 * corr.theta2_bar
            - ts * q.w2 * corr.y2_bar
            - ts * ts * q.dy_l * q.dy2_l / 8.0
            + ts * g * q.dt_dy_l / (4.0 * w),
    }
}

/// Initial values of the averaged terms: the negated correctors at `t = 0`,
/// where the fast angle vanishes.
pub fn initial_corrections(params: &SystemParams, fm: &FrequencyModel) -> AveragedCorrection {
    let theta_star = derived_constants(params, fm).theta_star;
    let base = HomogenizedState {
        phi0: 0.0,
        y0: params.y_star,
        p0: params.p_star,
        theta0: theta_star,
    };
    let q = base_quantities(&base, fm, theta_star);
    let first = corrector_profile(&q, 0.0, 0.0, 1.0, 1.0);
    let phi2_bar = -first.phi2;
    let cv = corrector_profile(&q, phi2_bar, 0.0, 1.0, 1.0);
    AveragedCorrection {
        phi2_bar,
        theta2_bar: -cv.theta2,
        y2_bar: -cv.y2,
        p2_bar: -cv.p2,
    }
}

/// Split a joint state `(φ₀, y₀, p₀, φ̄₂, θ̄₂, ȳ₂, p̄₂)`.
pub fn split_joint(x: &[f64; 7], theta_star: f64) -> (HomogenizedState, AveragedCorrection) {
    (
        HomogenizedState::from_slice(&x[..3], theta_star),
        AveragedCorrection::from_slice(&x[3..]),
    )
}

fn joint_rhs(x: &[f64; 7], fm: &FrequencyModel, theta_star: f64) -> [f64; 7] {
    let (base, corr) = split_joint(x, theta_star);
    let q = base_quantities(&base, fm, theta_star);
    let a = averaged_rhs_with(&corr, &q);
    [
        q.w,
        base.p0,
        -theta_star * q.w1,
        a.phi2_bar,
        a.theta2_bar,
        a.y2_bar,
        a.p2_bar,
    ]
}

/// Integrate the leading-order and averaged systems together over
/// `[0, horizon]`.
pub fn solve_expansion(
    params: &SystemParams,
    fm: &FrequencyModel,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory<7>> {
    solve_expansion_to(params, fm, params.horizon, rtol, atol)
}

/// Like [`solve_expansion`], ending at `end ≥ horizon`.
pub fn solve_expansion_to(
    params: &SystemParams,
    fm: &FrequencyModel,
    end: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory<7>> {
    params.validate()?;
    let theta_star = derived_constants(params, fm).theta_star;
    let c = initial_corrections(params, fm);
    let x0 = [
        0.0,
        params.y_star,
        params.p_star,
        c.phi2_bar,
        c.theta2_bar,
        c.y2_bar,
        c.p2_bar,
    ];
    let opts = ControlOptions::new(rtol, atol).with_h_max(smooth_h_max(params.horizon));
    integrate_controlled_with(|_, x| joint_rhs(x, fm, theta_star), x0, end, &opts)
}

/// Second-order prediction of the action-angle state.
pub fn reconstruct(
    eps: f64,
    base: &HomogenizedState,
    corr: &AveragedCorrection,
    cv: &CorrectorValues,
) -> ActionAngleState {
    let e2 = eps * eps;
    ActionAngleState {
        phi: base.phi0 + e2 * (corr.phi2_bar + cv.phi2),
        theta: base.theta0 + eps * cv.theta1 + e2 * (corr.theta2_bar + cv.theta2),
        y: base.y0 + e2 * (corr.y2_bar + cv.y2),
        p: base.p0 + e2 * (corr.p2_bar + cv.p2),
    }
}

/// `ω(y₀)[θ₁] + θ* p₀ ω′(y₀)/(2ω(y₀)) sin(2φ₀/ε)`, which vanishes identically.
pub fn first_order_energy_residual(
    cv: &CorrectorValues,
    base: &HomogenizedState,
    eps: f64,
    fm: &FrequencyModel,
    theta_star: f64,
) -> f64 {
    let d = fm.derivs(base.y0);
    let (s2, _) = fast_sin_cos(base.phi0, eps, 2.0);
    d.w * cv.theta1 + theta_star * base.p0 * d.w1 / (2.0 * d.w) * s2
}

/// Algebraic relation between the averaged terms and the leading order:
/// `θ̄₂ + (p₀/ω)p̄₂ + θ* D_yL ȳ₂ + θ*²(D_yL)²/(16ω) - θ*(D_tL)²/(4ω²)`.
pub fn averaged_identity_residual(
    corr: &AveragedCorrection,
    base: &HomogenizedState,
    fm: &FrequencyModel,
    theta_star: f64,
) -> f64 {
    let q = base_quantities(base, fm, theta_star);
    let ts = theta_star;
    corr.theta2_bar
        + q.p0 / q.w * corr.p2_bar
        + ts * q.dy_l * corr.y2_bar
        + ts * ts * q.dy_l * q.dy_l / (16.0 * q.w)
        - ts * q.dt_l * q.dt_l / (4.0 * q.w * q.w)
}

/// Antiderivative of the `θ̄₂` equation:
/// `θ̄₂(0) + θ*(D_tL)²/(8ω²)` evaluated between `initial` and `base`.
pub fn theta2_bar_antiderivative(
    theta2_bar0: f64,
    initial: &HomogenizedState,
    base: &HomogenizedState,
    fm: &FrequencyModel,
    theta_star: f64,
) -> f64 {
    let f = |b: &HomogenizedState| {
        let q = base_quantities(b, fm, theta_star);
        theta_star * q.dt_l * q.dt_l / (8.0 * q.w * q.w)
    };
    theta2_bar0 + f(base) - f(initial)
}

/// Settings shared by the finite-`ε` reference runs and the expansion solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Fixed steps per fast period of `φ/ε`, measured against `ω_max`.
    pub step_factor: f64,
    pub grid_points: usize,
    /// Largest accepted Richardson error estimate of a reference run.
    pub reference_cap: f64,
}

impl Default for ResidualSettings {
    fn default() -> Self {
        ResidualSettings {
            rtol: 1e-12,
            atol: 1e-13,
            step_factor: 80.0,
            grid_points: 2001,
            reference_cap: 1e-10,
        }
    }
}

/// Uniform grid of `n` points on `[0, horizon]`, ending exactly at `horizon`.
pub fn output_grid(horizon: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two points");
    let dt = horizon / (n - 1) as f64;
    (0..n)
        .map(|k| if k + 1 == n { horizon } else { k as f64 * dt })
        .collect()
}

/// RK4 step `2πε / (step_factor · ω_max)`, shrunk so that it divides `grid_dt`.
pub fn reference_step(eps: f64, fm: &FrequencyModel, step_factor: f64, grid_dt: f64) -> f64 {
    let nominal = TAU * eps / (step_factor * fm.upper_bound());
    let m = (grid_dt / nominal).ceil().max(1.0);
    grid_dt / m
}

/// Reference-quality solution of the exact action-angle system on
/// `[0, end]` from `(0, θ*, y*, p*)`.
pub fn solve_full_reference(
    params: &SystemParams,
    fm: &FrequencyModel,
    eps: f64,
    settings: &ResidualSettings,
    end: f64,
) -> Result<Trajectory<4>> {
    check_positive("epsilon", eps)?;
    params.validate()?;
    let theta_star = derived_constants(params, fm).theta_star;
    let grid_dt = params.horizon / (settings.grid_points - 1) as f64;
    let h = reference_step(eps, fm, settings.step_factor, grid_dt);
    reference_solution(
        |_, x: &[f64; 4]| {
            action_angle_rhs_unchecked(&ActionAngleState::from_array(*x), eps, fm).to_array()
        },
        [0.0, theta_star, params.y_star, params.p_star],
        end,
        2.0 * h,
        settings.reference_cap,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResidualVariable {
    YLeading,
    PLeading,
    PhiLeading,
    ThetaLeading,
    ThetaFirst,
    YSecond,
    PSecond,
    PhiSecond,
    ThetaSecond,
}

impl ResidualVariable {
    pub const ALL: [ResidualVariable; 9] = [
        ResidualVariable::YLeading,
        ResidualVariable::PLeading,
        ResidualVariable::PhiLeading,
        ResidualVariable::ThetaLeading,
        ResidualVariable::ThetaFirst,
        ResidualVariable::YSecond,
        ResidualVariable::PSecond,
        ResidualVariable::PhiSecond,
        ResidualVariable::ThetaSecond,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResidualVariable::YLeading => "y_leading",
            ResidualVariable::PLeading => "p_leading",
            ResidualVariable::PhiLeading => "phi_leading",
            ResidualVariable::ThetaLeading => "theta_leading",
            ResidualVariable::ThetaFirst => "theta_first",
            ResidualVariable::YSecond => "y_second",
            ResidualVariable::PSecond => "p_second",
            ResidualVariable::PhiSecond => "phi_second",
            ResidualVariable::ThetaSecond => "theta_second",
        }
    }

    /// Power of `ε` used to normalise the sup-norm.
    pub fn scale_power(self) -> i32 {
        match self {
            ResidualVariable::ThetaLeading => 1,
            _ => 2,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Residual sup-norms for one value of `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonResiduals {
    pub epsilon: f64,
    pub sup: [f64; 9],
    /// `sup |E(t) - E*|` of the reference run.
    pub energy_drift: f64,
    /// Richardson error estimate of the reference run.
    pub reference_error: f64,
    /// `sup |E₁|` of the first-order energy identity on the grid.
    pub first_order_identity: f64,
    pub steps: usize,
}

impl EpsilonResiduals {
    pub fn sup(&self, v: ResidualVariable) -> f64 {
        self.sup[v.index()]
    }

    pub fn normalized(&self, v: ResidualVariable) -> f64 {
        self.sup(v) / self.epsilon.powi(v.scale_power())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedOrder {
    pub variable: ResidualVariable,
    pub slope: f64,
    pub r_squared: f64,
}

impl FittedOrder {
    /// Fits with `R² < 0.98` are not trusted.
    pub fn reliable(&self) -> bool {
        self.r_squared >= 0.98
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Rows sorted by decreasing `ε`.
    pub rows: Vec<EpsilonResiduals>,
    /// Orders fitted over the three smallest `ε`; empty with fewer than three.
    pub orders: Vec<FittedOrder>,
}

impl ResidualReport {
    pub fn order(&self, v: ResidualVariable) -> Option<FittedOrder> {
        self.orders.iter().copied().find(|o| o.variable == v)
    }

    /// Whether `sup/ε^k` strictly decreases from each `ε` to the next.
    pub fn normalized_strictly_decreasing(&self, v: ResidualVariable) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].normalized(v) < w[0].normalized(v))
    }
}

pub(crate) fn validate_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() {
        return Err(Error::InsufficientData("empty epsilon list".into()));
    }
    for &e in epsilons {
        check_positive("epsilon", e)?;
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "epsilons",
            reason: "must be strictly decreasing".into(),
        });
    }
    Ok(())
}

/// Compare reference solutions at each `ε` with the leading-order, first-order
/// and second-order predictions on the output grid.
pub fn residual_norms(
    params: &SystemParams,
    fm: &FrequencyModel,
    epsilons: &[f64],
    settings: &ResidualSettings,
) -> Result<ResidualReport> {
    validate_epsilons(epsilons)?;
    let constants = derived_constants(params, fm);
    let ts = constants.theta_star;
    let expansion = solve_expansion(params, fm, settings.rtol, settings.atol)?;
    let grid = output_grid(params.horizon, settings.grid_points);
    let predicted: Vec<(HomogenizedState, AveragedCorrection)> = grid
        .iter()
        .map(|&t| dense_eval(&expansion, t).map(|x| split_joint(&x, ts)))
        .collect::<Result<_>>()?;

    let mut rows: Vec<EpsilonResiduals> = epsilons
        .par_iter()
        .map(|&eps| {
            let full = solve_full_reference(params, fm, eps, settings, params.horizon)?;
            let mut sup = [0.0f64; 9];
            let mut drift = 0.0f64;
            let mut e1 = 0.0f64;
            for (&t, (base, corr)) in grid.iter().zip(&predicted) {
                let x = ActionAngleState::from_array(dense_eval(&full, t)?);
                let cv = correctors(base, corr.phi2_bar, eps, fm, ts);
                let hat = reconstruct(eps, base, corr, &cv);
                let vals = [
                    x.y - base.y0,
                    x.p - base.p0,
                    x.phi - base.phi0,
                    x.theta - ts,
                    x.theta - ts - eps * cv.theta1,
                    x.y - hat.y,
                    x.p - hat.p,
                    x.phi - hat.phi,
                    x.theta - hat.theta,
                ];
                for (s, v) in sup.iter_mut().zip(vals) {
                    *s = s.max(v.abs());
                }
                drift = drift.max((energy_action_angle(&x, eps, fm) - constants.e_star).abs());
                e1 = e1.max(first_order_energy_residual(&cv, base, eps, fm, ts).abs());
            }
            Ok(EpsilonResiduals {
                epsilon: eps,
                sup,
                energy_drift: drift,
                reference_error: full.meta.error_estimate.unwrap_or(f64::NAN),
                first_order_identity: e1,
                steps: full.meta.accepted,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));

    let mut orders = Vec::new();
    if rows.len() >= 3 {
        let tail = &rows[rows.len() - 3..];
        let eps: Vec<f64> = tail.iter().map(|r| r.epsilon).collect();
        for v in ResidualVariable::ALL {
            let errs: Vec<f64> = tail.iter().map(|r| r.sup(v)).collect();
            if let Ok((slope, r_squared)) = estimate_order(&eps, &errs) {
                orders.push(FittedOrder {
                    variable: v,
                    slope,
                    r_squared,
                });
            }
        }
    }
    Ok(ResidualReport { rows, orders })
}

/// Safety margin beyond the horizon needed by the two-scale interpolation,
/// which looks up to two fast periods ahead.
pub fn two_scale_margin(eps: f64, fm: &FrequencyModel) -> f64 {
    3.0 * PI * eps / fm.lower_bound() + 0.05 * eps
}
