//! Hertz temperature, entropy and force of the fast oscillator, their
//! asymptotic expansions, first-law checks and phase-space-volume oracles.

use std::f64::consts::TAU;

use crate::averaging::{simpson, windowed_average};
use crate::dynamics::{from_action_angle, ActionAngleState};
use crate::error::{Error, Result};
use crate::expansion::{base_quantities, AveragedCorrection, CorrectorValues};
use crate::homogenized::HomogenizedState;
use crate::integrate::{dense_eval, Trajectory};
use crate::model::{DerivedConstants, FrequencyModel};
use crate::phase::fast_sin_cos;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoState {
    pub temperature: f64,
    pub entropy: f64,
    pub force: f64,
}

/// `T = θω(y)`, `S = log θ + C`, `F = θω′(y)`.
pub fn thermo_state(
    theta: f64,
    y: f64,
    fm: &FrequencyModel,
    constants: &DerivedConstants,
) -> Result<ThermoState> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("entropy needs a positive action, got {theta}"),
        });
    }
    let d = fm.derivs(y);
    Ok(ThermoState {
        temperature: theta * d.w,
        entropy: theta.ln() + constants.entropy_constant,
        force: theta * d.w1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThermoExpansion {
    pub t0: f64,
    pub f0: f64,
    /// Zero under the convention `C = -log θ*`.
    pub s0: f64,
    /// `[θ₁]/θ*`.
    pub s1_osc: f64,
    /// `(θ̄₂ + [θ₂])/θ* - ½([θ₁]/θ*)²`.
    pub s2_full: f64,
    /// Weak* limit of `s2_full`: `θ̄₂/θ* - (D_tL/4ω)²`.
    pub s2_bar: f64,
    /// `θ̄₂/θ*`.
    pub s2_doublebar: f64,
}

pub fn expand_thermo(
    base: &HomogenizedState,
    corr: &AveragedCorrection,
    cv: &CorrectorValues,
    theta_star: f64,
    fm: &FrequencyModel,
) -> ThermoExpansion {
    let q = base_quantities(base, fm, theta_star);
    let s1 = cv.theta1 / theta_star;
    let r = q.dt_l / (4.0 * q.w);
    ThermoExpansion {
        t0: theta_star * q.w,
        f0: theta_star * q.w1,
        s0: 0.0,
        s1_osc: s1,
        s2_full: (corr.theta2_bar + cv.theta2) / theta_star - 0.5 * s1 * s1,
        s2_bar: corr.theta2_bar / theta_star - r * r,
        s2_doublebar: corr.theta2_bar / theta_star,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyExpansion {
    pub e0_perp: f64,
    pub e0_par: f64,
    pub e1_perp_osc: f64,
    pub e1_par_osc: f64,
    pub e2_perp_osc: f64,
    pub e2_par_osc: f64,
    /// `θ*ω′ȳ₂ + ωθ̄₂`.
    pub e2_perp_bar: f64,
    /// `p₀p̄₂ + (θ*D_yL/4)² - θ*(D_tL)²/(4ω)`.
    pub e2_par_bar: f64,
    pub a_bar: f64,
    /// `e2_perp_bar + e2_par_bar`.
    pub e2_bar: f64,
}

/// Expansion of the heat-bath energy `E⊥ = θω` and the environment energy
/// `E∥ = E - E⊥` to second order.
pub fn energy_expansion(
    base: &HomogenizedState,
    corr: &AveragedCorrection,
    cv: &CorrectorValues,
    eps: f64,
    theta_star: f64,
    fm: &FrequencyModel,
) -> EnergyExpansion {
    let q = base_quantities(base, fm, theta_star);
    let ts = theta_star;
    let (s2, c2) = fast_sin_cos(base.phi0, eps, 2.0);
    let p0 = base.p0;
    let e2_perp_bar = ts * q.w1 * corr.y2_bar + q.w * corr.theta2_bar;
    let e2_par_bar =
        p0 * corr.p2_bar + (ts * q.dy_l / 4.0).powi(2) - ts * q.dt_l * q.dt_l / (4.0 * q.w);
    EnergyExpansion {
        e0_perp: ts * q.w,
        e0_par: 0.5 * p0 * p0,
        e1_perp_osc: q.w * cv.theta1,
        e1_par_osc: 0.5 * ts * q.dt_l * s2,
        e2_perp_osc: ts * q.w1 * (corr.y2_bar + cv.y2) + q.w * (corr.theta2_bar + cv.theta2),
        e2_par_osc: p0 * (corr.p2_bar + cv.p2)
            + ts * ts * q.dy_l * q.dy_l / 8.0 * s2 * s2
            + ts * q.dt_l * (corr.phi2_bar + cv.phi2) * c2
            + 0.5 * cv.theta1 * q.dt_l * s2,
        e2_perp_bar,
        e2_par_bar,
        a_bar: a_bar(base, corr, fm, ts),
        e2_bar: e2_perp_bar + e2_par_bar,
    }
}

fn a_bar(base: &HomogenizedState, corr: &AveragedCorrection, fm: &FrequencyModel, ts: f64) -> f64 {
    let d = fm.derivs(base.y0);
    let p0 = base.p0;
    let k = p0 * d.w1 / (2.0 * d.w * d.w);
    p0 * corr.p2_bar + (ts * d.w1 / (4.0 * d.w)).powi(2) - ts * d.w * k * k
}

/// Quantities in the Hamilton-form reading of the averaged energy
/// `Ē₂ = Ā + F₀ȳ₂ + T₀S̄̄₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedEnergyForm {
    pub a_bar: f64,
    /// `½(p₀ω′/2ω²)² + C` with `C` the constant fixed by the initial data.
    pub s2_doublebar_closed: f64,
    /// `Ā + F₀ȳ₂ + T₀ S̄̄₂(y₀, p₀)`.
    pub e2_bar: f64,
    pub de2_dy0: f64,
    pub de2_dp0: f64,
}

/// Evaluate `Ā`, the closed-form `S̄̄₂`, `Ē₂` and its partial derivatives in
/// `y₀` and `p₀` with `ȳ₂`, `p̄₂` held fixed and `S̄̄₂` taken as the closed-form
/// function of `(y₀, p₀)`.
pub fn averaged_energy_form(
    base: &HomogenizedState,
    corr: &AveragedCorrection,
    fm: &FrequencyModel,
    constants: &DerivedConstants,
) -> AveragedEnergyForm {
    let ts = constants.theta_star;
    let c = constants.c_sbarbar2;
    let d = fm.derivs(base.y0);
    let (w, w1, w2) = (d.w, d.w1, d.w2);
    let p0 = base.p0;
    let k = p0 * w1 / (2.0 * w * w);
    let s2dd = 0.5 * k * k + c;
    let a = a_bar(base, corr, fm, ts);
    let e2 = a + ts * w1 * corr.y2_bar + ts * w * s2dd;
    let w3 = w * w * w;
    let de2_dp0 = corr.p2_bar - ts * p0 * w1 * w1 / (4.0 * w3);
    let de2_dy0 = ts * ts / 16.0 * (2.0 * w1 * w2 / (w * w) - 2.0 * w1 * w1 * w1 / w3)
        - ts * p0 * p0 / 8.0 * (2.0 * w1 * w2 / w3 - 3.0 * w1 * w1 * w1 / (w3 * w))
        + ts * w2 * corr.y2_bar
        + ts * c * w1;
    AveragedEnergyForm {
        a_bar: a,
        s2_doublebar_closed: s2dd,
        e2_bar: e2,
        de2_dy0,
        de2_dp0,
    }
}

/// First derivative on a uniform grid: fourth-order central differences in
/// the interior, fourth-order one-sided stencils at the two ends on each side.
pub fn derivative_4th(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 grid points, got {n}"
        )));
    }
    let f = values;
    let c = 1.0 / (12.0 * dt);
    let mut d = vec![0.0; n];
    d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for i in 2..n - 2 {
        d[i] = c * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
    }
    let m = n - 1;
    d[m] =
        -c * (-25.0 * f[m] + 48.0 * f[m - 1] - 36.0 * f[m - 2] + 16.0 * f[m - 3] - 3.0 * f[m - 4]);
    d[m - 1] = -c * (-3.0 * f[m] - 10.0 * f[m - 1] + 18.0 * f[m - 2] - 6.0 * f[m - 3] + f[m - 4]);
    Ok(d)
}

/// Time series entering a first-law balance `dU = F dX + T dS`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FirstLawSeries {
    pub energy: Vec<f64>,
    pub position: Vec<f64>,
    pub entropy: Vec<f64>,
    pub force: Vec<f64>,
    pub temperature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstLawCheck {
    /// `dU/dt - F dX/dt - T dS/dt` at each grid point.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Residual of `dU/dt = F dX/dt + T dS/dt` on a uniform grid with spacing `dt`.
pub fn check_first_law(series: &FirstLawSeries, dt: f64) -> Result<FirstLawCheck> {
    let n = series.energy.len();
    for len in [
        series.position.len(),
        series.entropy.len(),
        series.force.len(),
        series.temperature.len(),
    ] {
        if len != n {
            return Err(Error::InsufficientData("series of unequal length".into()));
        }
    }
    let du = derivative_4th(&series.energy, dt)?;
    let dx = derivative_4th(&series.position, dt)?;
    let ds = derivative_4th(&series.entropy, dt)?;
    let residuals: Vec<f64> = (0..n)
        .map(|i| du[i] - series.force[i] * dx[i] - series.temperature[i] * ds[i])
        .collect();
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(FirstLawCheck {
        residuals,
        max_residual,
    })
}

/// Time average of twice the kinetic energy `ζ₀² = 2E⊥cos²(ωt)` of the frozen
/// oscillator over one period, by composite Simpson with `samples` intervals.
pub fn hertz_temperature_oracle(e_perp: f64, y: f64, fm: &FrequencyModel, samples: usize) -> f64 {
    let w = fm.omega(y);
    let period = TAU / w;
    let zeta_sq = |t: f64| 2.0 * e_perp * (w * t).cos().powi(2);
    simpson(&zeta_sq, 0.0, period, samples) / period
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeMethod {
    ClosedForm,
    /// Midpoint rule on an `n × n` grid over the bounding box.
    AreaQuadrature(usize),
}

/// Area enclosed by `½ζ² + ½ω(y)²z²/ε² = E⊥` (or `ε = 1` when `eps` is `None`).
/// The closed form is `2πεE⊥/ω`, i.e. `2πεθ`.
pub fn phase_space_volume(
    e_perp: f64,
    y: f64,
    fm: &FrequencyModel,
    eps: Option<f64>,
    method: VolumeMethod,
) -> Result<f64> {
    if !(e_perp >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "e_perp",
            reason: format!("must be non-negative, got {e_perp}"),
        });
    }
    let scale = eps.unwrap_or(1.0);
    let w = fm.omega(y);
    match method {
        VolumeMethod::ClosedForm => Ok(TAU * scale * e_perp / w),
        VolumeMethod::AreaQuadrature(n) => {
            if e_perp == 0.0 {
                return Ok(0.0);
            }
            let z_max = scale * (2.0 * e_perp).sqrt() / w;
            let zeta_max = (2.0 * e_perp).sqrt();
            let (hz, hzeta) = (2.0 * z_max / n as f64, 2.0 * zeta_max / n as f64);
            let k = 0.5 * w * w / (scale * scale);
            let mut inside = 0usize;
            for i in 0..n {
                let z = -z_max + (i as f64 + 0.5) * hz;
                let pot = k * z * z;
                for j in 0..n {
                    let zeta = -zeta_max + (j as f64 + 0.5) * hzeta;
                    if 0.5 * zeta * zeta + pot <= e_perp {
                        inside += 1;
                    }
                }
            }
            Ok(inside as f64 * hz * hzeta)
        }
    }
}

/// Temperature, force and entropy from the phase-space volume
/// `Γ(E, y) = 2πE/ω(y)`: `T = Γ/∂_EΓ`, `F = -∂_yΓ/∂_EΓ`, `S = log Γ + c`.
/// Partials are taken by central differences with relative step `1e-6`.
pub fn hertz_from_volume(
    e_perp: f64,
    y: f64,
    fm: &FrequencyModel,
    entropy_offset: f64,
) -> Result<ThermoState> {
    let gamma = |e: f64, y: f64| TAU * e / fm.omega(y);
    let g = gamma(e_perp, y);
    if !(g > 0.0) {
        return Err(Error::InvalidParameter {
            name: "e_perp",
            reason: format!("volume must be positive, got {g}"),
        });
    }
    let he = 1e-6 * e_perp;
    let hy = 1e-6 * y.abs().max(1.0);
    let d_e = (gamma(e_perp + he, y) - gamma(e_perp - he, y)) / (2.0 * he);
    let d_y = (gamma(e_perp, y + hy) - gamma(e_perp, y - hy)) / (2.0 * hy);
    Ok(ThermoState {
        temperature: g / d_e,
        entropy: g.ln() + entropy_offset,
        force: -d_y / d_e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquipartitionCheck {
    /// `max_t |⟨K⊥ - U⊥⟩|` over the window centres.
    pub max_gap: f64,
    /// `sup_t |ζ z|` over the trajectory nodes.
    pub sup_xi: f64,
    /// Number of windows that had to be moved off-centre.
    pub one_sided_windows: usize,
}

/// Windowed kinetic-minus-potential energy of the fast oscillator and the
/// virial `Ξ = ż z`, from an action-angle trajectory.
pub fn equipartition_check<const N: usize>(
    full: &Trajectory<4>,
    eps: f64,
    fm: &FrequencyModel,
    m: usize,
    phase: &Trajectory<N>,
    centres: &[f64],
) -> Result<EquipartitionCheck> {
    let gap = |t: f64| -> f64 {
        let s = ActionAngleState::from_array(dense_eval(full, t).expect("time inside trajectory"));
        let c = from_action_angle(&s, eps, fm).expect("valid state");
        let w = fm.omega(c.y);
        0.5 * c.zeta * c.zeta - 0.5 * (w * c.z / eps).powi(2)
    };
    let mut max_gap = 0.0f64;
    let mut one_sided = 0;
    for &t in centres {
        let wm = windowed_average(&gap, t, m, eps, phase)?;
        if wm.end > full.horizon() {
            return Err(Error::OutOfRange {
                what: "window end",
                value: wm.end,
                lo: 0.0,
                hi: full.horizon(),
            });
        }
        max_gap = max_gap.max(wm.value.abs());
        one_sided += wm.one_sided as usize;
    }
    let mut sup_xi = 0.0f64;
    for x in &full.states {
        let c = from_action_angle(&ActionAngleState::from_array(*x), eps, fm)?;
        sup_xi = sup_xi.max((c.zeta * c.z).abs());
    }
    Ok(EquipartitionCheck {
        max_gap,
        sup_xi,
        one_sided_windows: one_sided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{correctors, initial_corrections, solve_expansion, split_joint};
    use crate::model::{derived_constants, make_frequency, Preset, SystemParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine() -> FrequencyModel {
        make_frequency(Preset::Sine, &[2.0, 1.0]).unwrap()
    }

    fn params() -> SystemParams {
        SystemParams {
            y_star: 0.0,
            p_star: 1.0,
            u_star: 1.0,
            horizon: 1.0,
        }
    }

    fn start() -> HomogenizedState {
        HomogenizedState {
            phi0: 0.0,
            y0: 0.0,
            p0: 1.0,
            theta0: 0.25,
        }
    }

    #[test]
    fn thermo_state_examples() {
        let fm = sine();
        let k = derived_constants(&params(), &fm);
        let s = thermo_state(0.25, 0.0, &fm, &k).unwrap();
        assert_eq!((s.temperature, s.entropy, s.force), (0.5, 0.0, 0.25));
        assert_eq!(thermo_state(0.25, 1.7, &fm, &k).unwrap().entropy, 0.0);
        assert!(thermo_state(0.0, 0.0, &fm, &k).is_err());
        let c = make_frequency(Preset::Constant, &[3.0]).unwrap();
        assert_eq!(thermo_state(0.7, 0.4, &c, &k).unwrap().force, 0.0);
    }

    #[test]
    fn thermo_expansion_at_start() {
        let fm = sine();
        let c = initial_corrections(&params(), &fm);
        let cv = correctors(&start(), c.phi2_bar, 0.02, &fm, 0.25);
        let te = expand_thermo(&start(), &c, &cv, 0.25, &fm);
        assert_eq!((te.t0, te.f0, te.s0, te.s1_osc), (0.5, 0.25, 0.0, 0.0));
        assert!((te.s2_doublebar + 0.025390625).abs() < 1e-16);
    }

    #[test]
    fn energy_expansion_identities() {
        let fm = sine();
        let c = initial_corrections(&params(), &fm);
        let cv = correctors(&start(), c.phi2_bar, 0.02, &fm, 0.25);
        let ee = energy_expansion(&start(), &c, &cv, 0.02, 0.25, &fm);
        assert_eq!(ee.e0_perp + ee.e0_par, 1.0);
        assert!(ee.e2_bar.abs() < 1e-16);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let base = HomogenizedState {
                phi0: rng.random_range(0.0..3.0),
                y0: rng.random_range(-2.0..2.0),
                p0: rng.random_range(-2.0..2.0),
                theta0: 0.25,
            };
            let eps = rng.random_range(0.001..0.1);
            let cv = correctors(&base, 0.01, eps, &fm, 0.25);
            let ee = energy_expansion(&base, &c, &cv, eps, 0.25, &fm);
            assert!((ee.e1_perp_osc + ee.e1_par_osc).abs() <= 1e-13);
        }
    }

    #[test]
    fn constant_frequency_thermo() {
        let fm = make_frequency(Preset::Constant, &[2.0]).unwrap();
        let k = derived_constants(&params(), &fm);
        assert_eq!(k.c_sbarbar2, 0.0);
        let corr = AveragedCorrection {
            p2_bar: 0.3,
            ..Default::default()
        };
        let b = averaged_energy_form(&start(), &corr, &fm, &k);
        assert_eq!(b.a_bar, 0.3);
        assert_eq!(b.s2_doublebar_closed, 0.0);
        assert_eq!(b.e2_bar, 0.3);
        let cv = correctors(&start(), 0.0, 0.01, &fm, 0.25);
        let te = expand_thermo(&start(), &corr, &cv, 0.25, &fm);
        assert_eq!((te.s1_osc, te.s2_bar), (0.0, 0.0));
    }

    #[test]
    fn closed_form_entropy_at_start() {
        let fm = sine();
        let k = derived_constants(&params(), &fm);
        let c = initial_corrections(&params(), &fm);
        let b = averaged_energy_form(&start(), &c, &fm, &k);
        assert!((b.s2_doublebar_closed + 0.025390625).abs() < 1e-17);
        assert!((0.25 * b.s2_doublebar_closed - c.theta2_bar).abs() < 1e-17);
    }

    #[test]
    fn constitutive_coefficients() {
        // Ē₂ is affine in (ȳ₂, S̄̄₂) with coefficients F₀ and T₀
        let fm = sine();
        let base = HomogenizedState {
            phi0: 0.3,
            y0: 0.6,
            p0: 0.9,
            theta0: 0.25,
        };
        let mut k = derived_constants(&params(), &fm);
        let corr = AveragedCorrection {
            phi2_bar: 0.0,
            theta2_bar: 0.0,
            y2_bar: 0.01,
            p2_bar: 0.02,
        };
        let e = |y2: f64, c: f64, k: &mut DerivedConstants| {
            k.c_sbarbar2 = c;
            averaged_energy_form(&base, &AveragedCorrection { y2_bar: y2, ..corr }, &fm, k).e2_bar
        };
        let d = fm.derivs(0.6);
        let dy = e(1.0, 0.0, &mut k) - e(0.0, 0.0, &mut k);
        let ds = e(0.0, 1.0, &mut k) - e(0.0, 0.0, &mut k);
        assert!((dy - 0.25 * d.w1).abs() < 1e-15);
        assert!((ds - 0.25 * d.w).abs() < 1e-15);
    }

    #[test]
    fn hamilton_form_along_solution() {
        let fm = sine();
        let k = derived_constants(&params(), &fm);
        let tr = solve_expansion(&params(), &fm, 1e-12, 1e-13).unwrap();
        let mut worst = [0.0f64; 4];
        for (x, dx) in tr.states.iter().zip(&tr.derivs) {
            let (b, c) = split_joint(x, 0.25);
            let form = averaged_energy_form(&b, &c, &fm, &k);
            worst[0] = worst[0].max((dx[5] - form.de2_dp0).abs());
            worst[1] = worst[1].max((dx[6] + form.de2_dy0).abs());
            worst[2] = worst[2].max(form.e2_bar.abs());
            worst[3] = worst[3].max((c.theta2_bar - 0.25 * form.s2_doublebar_closed).abs());
        }
        assert!(worst[0] <= 1e-7 && worst[1] <= 1e-7, "{worst:?}");
        assert!(worst[2] <= 1e-8 && worst[3] <= 1e-8, "{worst:?}");
    }

    #[test]
    fn y_partial_matches_finite_difference() {
        let fm = make_frequency(Preset::Custom, &[3.0, 0.5, 0.8, -0.2, 0.3]).unwrap();
        let k = derived_constants(&params(), &fm);
        let corr = AveragedCorrection {
            phi2_bar: 0.0,
            theta2_bar: 0.0,
            y2_bar: 0.03,
            p2_bar: -0.02,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let base = HomogenizedState {
                phi0: 0.0,
                y0: rng.random_range(-3.0..3.0),
                p0: rng.random_range(-2.0..2.0),
                theta0: k.theta_star,
            };
            let h = 1e-5;
            let at = |y: f64, p: f64| {
                averaged_energy_form(
                    &HomogenizedState {
                        y0: y,
                        p0: p,
                        ..base
                    },
                    &corr,
                    &fm,
                    &k,
                )
                .e2_bar
            };
            let fd_y = (at(base.y0 + h, base.p0) - at(base.y0 - h, base.p0)) / (2.0 * h);
            let fd_p = (at(base.y0, base.p0 + h) - at(base.y0, base.p0 - h)) / (2.0 * h);
            let b = averaged_energy_form(&base, &corr, &fm, &k);
            assert!((b.de2_dy0 - fd_y).abs() < 1e-8);
            assert!((b.de2_dp0 - fd_p).abs() < 1e-8);
        }
    }

    #[test]
    fn derivative_stencils_are_fourth_order() {
        let f = |t: f64| (3.0 * t).sin();
        let mut errs = Vec::new();
        for n in [41usize, 81] {
            let dt = 1.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| f(i as f64 * dt)).collect();
            let d = derivative_4th(&v, dt).unwrap();
            let e = (0..n)
                .map(|i| (d[i] - 3.0 * (3.0 * i as f64 * dt).cos()).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.7, "order {order}");
        assert!(derivative_4th(&[1.0, 2.0, 3.0, 4.0], 0.1).is_err());
        let quartic: Vec<f64> = (0..9).map(|i| (i as f64 * 0.1).powi(3)).collect();
        let d = derivative_4th(&quartic, 0.1).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!((v - 3.0 * (i as f64 * 0.1).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn first_law_with_constant_frequency_is_trivial() {
        let n = 11;
        let series = FirstLawSeries {
            energy: vec![0.5; n],
            position: (0..n).map(|i| i as f64 * 0.1).collect(),
            entropy: vec![0.0; n],
            force: vec![0.0; n],
            temperature: vec![0.5; n],
        };
        assert!(check_first_law(&series, 0.1).unwrap().max_residual < 1e-14);
        let short = FirstLawSeries {
            energy: vec![0.0; 3],
            position: vec![0.0; 3],
            entropy: vec![0.0; 3],
            force: vec![0.0; 3],
            temperature: vec![0.0; 3],
        };
        assert!(check_first_law(&short, 0.1).is_err());
    }

    #[test]
    fn hertz_oracles() {
        let fm = sine();
        assert!((hertz_temperature_oracle(0.5, 0.0, &fm, 256) - 0.5).abs() < 1e-10);
        assert_eq!(hertz_temperature_oracle(0.0, 0.0, &fm, 256), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let e = rng.random_range(0.05..3.0);
            let y = rng.random_range(-PI..PI);
            assert!((hertz_temperature_oracle(e, y, &fm, 256) - e).abs() < 1e-10 * e.max(1.0));
            let closed = phase_space_volume(e, y, &fm, None, VolumeMethod::ClosedForm).unwrap();
            let quad =
                phase_space_volume(e, y, &fm, None, VolumeMethod::AreaQuadrature(800)).unwrap();
            assert!((quad - closed).abs() <= 0.005 * closed);
        }
        let g = phase_space_volume(1.0, 0.0, &fm, None, VolumeMethod::ClosedForm).unwrap();
        assert!((g - PI).abs() < 1e-15);
        assert_eq!(
            phase_space_volume(0.0, 0.0, &fm, None, VolumeMethod::ClosedForm).unwrap(),
            0.0
        );
        assert_eq!(
            phase_space_volume(0.0, 0.0, &fm, None, VolumeMethod::AreaQuadrature(10)).unwrap(),
            0.0
        );
        assert!(phase_space_volume(-1.0, 0.0, &fm, None, VolumeMethod::ClosedForm).is_err());
    }

    #[test]
    fn scaled_volume_and_hertz_relations() {
        let fm = sine();
        let k = derived_constants(&params(), &fm);
        let eps = 0.01;
        let (theta, y) = (0.3, 0.8);
        let e = theta * fm.omega(y);
        let g = phase_space_volume(e, y, &fm, Some(eps), VolumeMethod::ClosedForm).unwrap();
        assert!((g - TAU * eps * theta).abs() < 1e-15);
        let q =
            phase_space_volume(e, y, &fm, Some(eps), VolumeMethod::AreaQuadrature(800)).unwrap();
        assert!((q - g).abs() < 0.005 * g);

        let hz = hertz_from_volume(e, y, &fm, -(TAU * k.theta_star).ln()).unwrap();
        let direct = thermo_state(theta, y, &fm, &k).unwrap();
        assert!((hz.temperature - direct.temperature).abs() < 1e-8);
        assert!((hz.force - direct.force).abs() < 1e-8);
        assert!((hz.entropy - direct.entropy).abs() < 1e-12);
    }

    fn any_base(
    ) -> impl proptest::strategy::Strategy<Value = (HomogenizedState, AveragedCorrection)> {
        use proptest::strategy::Strategy;
        (
            0.0..5.0f64,
            -4.0..4.0f64,
            -2.0..2.0f64,
            proptest::array::uniform4(-0.1..0.1f64),
        )
            .prop_map(|(phi0, y0, p0, c)| {
                (
                    HomogenizedState {
                        phi0,
                        y0,
                        p0,
                        theta0: 0.25,
                    },
                    AveragedCorrection::from_slice(&c),
                )
            })
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn averaged_energy_splits_and_reads_off_force_and_temperature((base, corr) in any_base(), c in -0.1..0.1f64) {
            let fm = sine();
            let mut k = derived_constants(&params(), &fm);
            let cv = correctors(&base, corr.phi2_bar, 0.01, &fm, k.theta_star);
            let ee = energy_expansion(&base, &corr, &cv, 0.01, k.theta_star, &fm);
            proptest::prop_assert!((ee.e2_perp_bar + ee.e2_par_bar - ee.e2_bar).abs() <= 1e-15);

            let d = fm.derivs(base.y0);
            let a = averaged_energy_form(&base, &corr, &fm, &k);
            let mut shifted = corr;
            shifted.y2_bar += 0.5;
            let b = averaged_energy_form(&base, &shifted, &fm, &k);
            proptest::prop_assert!(((b.e2_bar - a.e2_bar) / 0.5 - k.theta_star * d.w1).abs() <= 1e-12);
            k.c_sbarbar2 = c;
            let b = averaged_energy_form(&base, &corr, &fm, &k);
            let ds = b.s2_doublebar_closed - a.s2_doublebar_closed;
            if ds.abs() > 1e-6 {
                proptest::prop_assert!(((b.e2_bar - a.e2_bar) / ds - k.theta_star * d.w).abs() <= 1e-8);
            }
        }

        #[test]
        fn leading_entropy_is_constant((base, corr) in any_base()) {
            let fm = sine();
            let cv = correctors(&base, corr.phi2_bar, 0.02, &fm, 0.25);
            let first = expand_thermo(&start(), &corr, &cv, 0.25, &fm);
            let here = expand_thermo(&base, &corr, &cv, 0.25, &fm);
            proptest::prop_assert_eq!(first.s0, here.s0);
        }
    }
}
