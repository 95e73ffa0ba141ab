//! Composite experiments shared by the command-line front-end and the
//! acceptance suite: thermodynamic series along the expansion, two-scale
//! errors, equipartition, cross-validation of the coordinate systems and the
//! analytic identity suite.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averaging::{nonlinear_two_scale_error, TwoScaleError, TwoScaleGrid};
use crate::dynamics::{
    action_angle_rhs, action_angle_rhs_log_form, action_angle_rhs_velocity_form,
    cartesian_path_to_action_angle, cartesian_rhs_unchecked, energy_action_angle, energy_cartesian,
    from_action_angle, to_action_angle_near, ActionAngleState, CartesianState,
};
use crate::error::{Error, Result};
use crate::expansion::{
    averaged_identity_residual, averaged_rhs, correctors, first_order_energy_residual, output_grid,
    solve_expansion_to, solve_full_reference, split_joint, two_scale_limits, two_scale_margin,
    AveragedCorrection, ResidualSettings,
};
use crate::homogenized::HomogenizedState;
use crate::integrate::{dense_eval, reference_solution, Trajectory};
use crate::model::{
    derived_constants, make_frequency, validate_derivatives, DerivedConstants, FrequencyModel,
    Preset, SystemParams,
};
use crate::thermo::{
    averaged_energy_form, check_first_law, energy_expansion, equipartition_check,
    EquipartitionCheck, FirstLawCheck, FirstLawSeries,
};

/// Everything an experiment needs besides the list of `ε`.
#[derive(Debug, Clone)]
pub struct Setup {
    pub params: SystemParams,
    pub fm: FrequencyModel,
    pub constants: DerivedConstants,
    pub settings: ResidualSettings,
    pub window_periods: usize,
}

impl Setup {
    pub fn new(
        params: SystemParams,
        fm: FrequencyModel,
        settings: ResidualSettings,
        window_periods: usize,
    ) -> Result<Self> {
        params.validate()?;
        let constants = derived_constants(&params, &fm);
        Ok(Setup {
            params,
            fm,
            constants,
            settings,
            window_periods,
        })
    }

    /// Sine frequency `2 + sin y`, `y* = 0`, `p* = u* = 1`, `T = 1`.
    pub fn test_config() -> Self {
        let params = SystemParams {
            y_star: 0.0,
            p_star: 1.0,
            u_star: 1.0,
            horizon: 1.0,
        };
        let fm = make_frequency(Preset::Sine, &[2.0, 1.0]).expect("valid preset");
        Setup::new(params, fm, ResidualSettings::default(), 8).expect("valid parameters")
    }

    pub fn theta_star(&self) -> f64 {
        self.constants.theta_star
    }

    pub fn grid(&self) -> Vec<f64> {
        output_grid(self.params.horizon, self.settings.grid_points)
    }

    pub fn grid_dt(&self) -> f64 {
        self.params.horizon / (self.settings.grid_points - 1) as f64
    }
}

/// Joint leading-order/averaged solution with its samples on the output grid.
#[derive(Debug, Clone)]
pub struct ExpansionGrid {
    pub traj: Trajectory<7>,
    pub times: Vec<f64>,
    pub samples: Vec<(HomogenizedState, AveragedCorrection)>,
}

pub fn expansion_on_grid(setup: &Setup, end: f64) -> Result<ExpansionGrid> {
    let s = &setup.settings;
    let traj = solve_expansion_to(
        &setup.params,
        &setup.fm,
        end.max(setup.params.horizon),
        s.rtol,
        s.atol,
    )?;
    let times = setup.grid();
    let samples = times
        .iter()
        .map(|&t| dense_eval(&traj, t).map(|x| split_joint(&x, setup.theta_star())))
        .collect::<Result<_>>()?;
    Ok(ExpansionGrid {
        traj,
        times,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoRow {
    pub t: f64,
    pub t0: f64,
    pub f0: f64,
    pub s0: f64,
    pub s2_doublebar: f64,
    pub e2_perp_bar: f64,
    pub e2_par_bar: f64,
    /// `Ē₂⊥ + Ē₂∥`.
    pub e2_bar: f64,
    /// `Ā + F₀ȳ₂ + T₀S̄̄₂(y₀, p₀)` with the closed-form entropy.
    pub e2_bar_closed: f64,
    pub averaged_identity: f64,
    /// `θ̄₂ - θ* S̄̄₂(y₀, p₀)`.
    pub theta2_closed_gap: f64,
    /// `dȳ₂/dt - ∂Ē₂/∂p₀`.
    pub hamilton_y: f64,
    /// `dp̄₂/dt + ∂Ē₂/∂y₀`.
    pub hamilton_p: f64,
    pub first_law_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ThermoSeries {
    pub rows: Vec<ThermoRow>,
    pub first_law_leading: FirstLawCheck,
    pub first_law_second: FirstLawCheck,
}

impl ThermoSeries {
    pub fn max_abs(&self, f: impl Fn(&ThermoRow) -> f64) -> f64 {
        self.rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max)
    }
}

/// Averaged thermodynamic quantities and their identities on the output grid.
pub fn thermo_series(setup: &Setup, exp: &ExpansionGrid) -> Result<ThermoSeries> {
    let fm = &setup.fm;
    let ts = setup.theta_star();
    let mut rows = Vec::with_capacity(exp.times.len());
    let mut leading = FirstLawSeries::default();
    let mut second = FirstLawSeries::default();
    for (&t, (base, corr)) in exp.times.iter().zip(&exp.samples) {
        let d = fm.derivs(base.y0);
        // the averaged energies do not depend on ε; any value serves for the call
        let cv = correctors(base, corr.phi2_bar, 1.0, fm, ts);
        let ee = energy_expansion(base, corr, &cv, 1.0, ts, fm);
        let form = averaged_energy_form(base, corr, fm, &setup.constants);
        let rate = averaged_rhs(corr, base, fm, ts);
        let t0 = ts * d.w;
        let f0 = ts * d.w1;
        let s2dd = corr.theta2_bar / ts;
        rows.push(ThermoRow {
            t,
            t0,
            f0,
            s0: 0.0,
            s2_doublebar: s2dd,
            e2_perp_bar: ee.e2_perp_bar,
            e2_par_bar: ee.e2_par_bar,
            e2_bar: ee.e2_bar,
            e2_bar_closed: form.e2_bar,
            averaged_identity: averaged_identity_residual(corr, base, fm, ts),
            theta2_closed_gap: corr.theta2_bar - ts * form.s2_doublebar_closed,
            hamilton_y: rate.y2_bar - form.de2_dp0,
            hamilton_p: rate.p2_bar + form.de2_dy0,
            first_law_residual: 0.0,
        });
        leading.energy.push(ee.e0_perp);
        leading.position.push(base.y0);
        leading.entropy.push(0.0);
        leading.force.push(f0);
        leading.temperature.push(t0);
        second.energy.push(ee.e2_perp_bar);
        second.position.push(corr.y2_bar);
        second.entropy.push(s2dd);
        second.force.push(f0);
        second.temperature.push(t0);
    }
    let dt = setup.grid_dt();
    let first_law_leading = check_first_law(&leading, dt)?;
    let first_law_second = check_first_law(&second, dt)?;
    for (row, r) in rows.iter_mut().zip(&first_law_second.residuals) {
        row.first_law_residual = *r;
    }
    Ok(ThermoSeries {
        rows,
        first_law_leading,
        first_law_second,
    })
}

pub const TWO_SCALE_VARIABLES: [&str; 5] = ["theta1", "phi2", "y2", "p2", "theta2"];

/// Nonlinear two-scale sup-errors of the scaled residual motions against
/// their oscillation profiles, in the order of [`TWO_SCALE_VARIABLES`].
pub fn two_scale_errors(
    setup: &Setup,
    eps: f64,
    grid_r: usize,
    grid_s: usize,
) -> Result<[TwoScaleError; 5]> {
    let fm = &setup.fm;
    let ts = setup.theta_star();
    let end = setup.params.horizon + two_scale_margin(eps, fm);
    let full = solve_full_reference(&setup.params, fm, eps, &setup.settings, end)?;
    let exp = solve_expansion_to(
        &setup.params,
        fm,
        end,
        setup.settings.rtol,
        setup.settings.atol,
    )?;
    let r_max = dense_eval(&exp, setup.params.horizon)?[0] / PI;
    let grid = TwoScaleGrid::uniform(r_max, grid_r, grid_s);
    let e2 = eps * eps;

    let at = |t: f64| {
        let x = ActionAngleState::from_array(dense_eval(&full, t).expect("inside reference"));
        let (b, c) = split_joint(&dense_eval(&exp, t).expect("inside expansion"), ts);
        (x, b, c)
    };
    let mut out = [TwoScaleError {
        sup_error: 0.0,
        clamped: false,
    }; 5];
    for (k, slot) in out.iter_mut().enumerate() {
        let u = |t: f64| {
            let (x, b, c) = at(t);
            match k {
                0 => (x.theta - ts) / eps,
                1 => (x.phi - b.phi0) / e2,
                2 => (x.y - b.y0) / e2,
                3 => (x.p - b.p0) / e2,
                _ => {
                    let cv = correctors(&b, c.phi2_bar, eps, fm, ts);
                    (x.theta - ts - eps * cv.theta1) / e2
                }
            }
        };
        let limit = |t: f64, s: f64| {
            let (b, c) = split_joint(&dense_eval(&exp, t).expect("inside expansion"), ts);
            let l = two_scale_limits(s, &b, c.phi2_bar, fm, ts);
            match k {
                0 => l.theta1,
                1 => c.phi2_bar + l.phi2,
                2 => c.y2_bar + l.y2,
                3 => c.p2_bar + l.p2,
                _ => c.theta2_bar + l.theta2,
            }
        };
        *slot = nonlinear_two_scale_error(&u, &limit, &exp, eps, &grid)?;
    }
    Ok(out)
}

/// Windowed `K⊥ - U⊥` and the virial at one `ε`, with windows centred on
/// `centres` evenly spaced points of `[0, T]`.
pub fn equipartition(setup: &Setup, eps: f64, centres: usize) -> Result<EquipartitionCheck> {
    let full = solve_full_reference(
        &setup.params,
        &setup.fm,
        eps,
        &setup.settings,
        setup.params.horizon,
    )?;
    let s = &setup.settings;
    let exp = solve_expansion_to(
        &setup.params,
        &setup.fm,
        setup.params.horizon,
        s.rtol,
        s.atol,
    )?;
    let times = output_grid(setup.params.horizon, centres);
    equipartition_check(&full, eps, &setup.fm, setup.window_periods, &exp, &times)
}

/// Initial steps per fast period for the Cartesian runs; the Cartesian form
/// carries the fast phase in `(z, ζ)` and needs a finer step for the same accuracy.
pub const CARTESIAN_STEP_FACTOR: f64 = 640.0;

/// Error cap for the Cartesian runs.
pub const CARTESIAN_CAP: f64 = 1e-9;

/// Reference solution of the Cartesian equations on `[0, T]`. The step factor
/// starts at [`CARTESIAN_STEP_FACTOR`] and doubles, at most four times, until
/// the Richardson estimate meets [`CARTESIAN_CAP`].
pub fn solve_cartesian_reference(setup: &Setup, eps: f64) -> Result<Trajectory<4>> {
    let fm = &setup.fm;
    let p = &setup.params;
    let s0 = CartesianState::initial(p.y_star, p.p_star, p.u_star).to_array();
    let mut factor = CARTESIAN_STEP_FACTOR;
    loop {
        let h = crate::expansion::reference_step(eps, fm, factor, setup.grid_dt());
        let run = reference_solution(
            |_, x: &[f64; 4]| {
                cartesian_rhs_unchecked(&CartesianState::from_array(*x), eps, fm).to_array()
            },
            s0,
            p.horizon,
            2.0 * h,
            CARTESIAN_CAP,
        );
        match run {
            Err(Error::ReferenceError { .. }) if factor < 16.0 * CARTESIAN_STEP_FACTOR => {
                factor *= 2.0
            }
            other => return other,
        }
    }
}

/// Sup-norm gaps `(φ, θ, y, p)` between the Cartesian run mapped to
/// action-angle coordinates and the direct action-angle run.
pub fn cross_validation(setup: &Setup, eps: f64) -> Result<[f64; 4]> {
    let cart = solve_cartesian_reference(setup, eps)?;
    let aa = solve_full_reference(
        &setup.params,
        &setup.fm,
        eps,
        &setup.settings,
        setup.params.horizon,
    )?;
    let grid = setup.grid();
    let path: Vec<CartesianState> = grid
        .iter()
        .map(|&t| dense_eval(&cart, t).map(CartesianState::from_array))
        .collect::<Result<_>>()?;
    let converted = cartesian_path_to_action_angle(&path, eps, &setup.fm)?;
    let mut gaps = [0.0f64; 4];
    for (&t, c) in grid.iter().zip(&converted) {
        let d = dense_eval(&aa, t)?;
        for (g, (a, b)) in gaps.iter_mut().zip(c.to_array().iter().zip(d)) {
            *g = g.max((a - b).abs());
        }
    }
    Ok(gaps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResult {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl IdentityResult {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Options for [`identity_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityOptions {
    /// Negative control: flip the sign of the first-order action corrector.
    pub flip_theta1: bool,
}

/// Analytic identities that must hold to rounding error.
pub fn identity_suite(
    setup: &Setup,
    epsilons: &[f64],
    opts: IdentityOptions,
) -> Result<Vec<IdentityResult>> {
    let fm = &setup.fm;
    let ts = setup.theta_star();
    let exp = expansion_on_grid(setup, setup.params.horizon)?;
    let mut e1 = 0.0f64;
    let mut e53 = 0.0f64;
    let mut e2 = 0.0f64;
    for (base, corr) in &exp.samples {
        for &eps in epsilons {
            let mut cv = correctors(base, corr.phi2_bar, eps, fm, ts);
            if opts.flip_theta1 {
                cv.theta1 = -cv.theta1;
            }
            e1 = e1.max(first_order_energy_residual(&cv, base, eps, fm, ts).abs());
        }
        e53 = e53.max(averaged_identity_residual(corr, base, fm, ts).abs());
        let cv = correctors(base, corr.phi2_bar, 1.0, fm, ts);
        let ee = energy_expansion(base, corr, &cv, 1.0, ts, fm);
        let form = averaged_energy_form(base, corr, fm, &setup.constants);
        e2 = e2.max(ee.e2_bar.abs()).max(form.e2_bar.abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut forms, mut round_trip, mut energy) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let s = ActionAngleState {
            phi: rng.random_range(0.0..5.0),
            theta: rng.random_range(1e-6..2.0),
            y: rng.random_range(-4.0..4.0),
            p: rng.random_range(-2.0..2.0),
        };
        let eps = rng.random_range(0.005..0.2);
        let a = action_angle_rhs(&s, eps, fm)?.to_array();
        let b = action_angle_rhs_log_form(&s, eps, fm)?.to_array();
        let c = action_angle_rhs_velocity_form(&s, eps, fm)?.to_array();
        for i in 0..4 {
            let scale = a[i].abs().max(1.0);
            forms = forms
                .max((a[i] - b[i]).abs() / scale)
                .max((a[i] - c[i]).abs() / scale);
        }
        let cart = from_action_angle(&s, eps, fm)?;
        let back = to_action_angle_near(&cart, eps, fm, s.phi)?.state;
        for (x, y) in s.to_array().iter().zip(back.to_array()) {
            round_trip = round_trip.max((x - y).abs());
        }
        let ea = energy_action_angle(&s, eps, fm);
        energy = energy.max((energy_cartesian(&cart, eps, fm) - ea).abs() / ea.abs().max(1.0));
    }
    let deriv = validate_derivatives(fm, 100, 7);
    let deriv_err = deriv.max_error.iter().copied().fold(0.0, f64::max);

    Ok(vec![
        IdentityResult {
            name: "first_order_energy",
            value: e1,
            tolerance: 1e-13,
        },
        IdentityResult {
            name: "averaged_relation",
            value: e53,
            tolerance: 1e-8,
        },
        IdentityResult {
            name: "averaged_energy_zero",
            value: e2,
            tolerance: 1e-8,
        },
        IdentityResult {
            name: "equation_forms",
            value: forms,
            tolerance: 1e-14,
        },
        IdentityResult {
            name: "transform_round_trip",
            value: round_trip,
            tolerance: 1e-12,
        },
        IdentityResult {
            name: "energy_agreement",
            value: energy,
            tolerance: 1e-13,
        },
        IdentityResult {
            name: "derivative_check",
            value: deriv_err,
            tolerance: deriv.tolerance,
        },
    ])
}
