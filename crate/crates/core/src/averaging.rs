//! Finite-`ε` stand-ins for weak* limits, the two-scale interpolation operator
//! and convergence-order fits.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{check_positive, Error, Result};
use crate::homogenized::invert_phase;
use crate::integrate::{dense_eval, Trajectory};

/// Split `x` into `floor(x)` and the fractional part in `[0, 1)`.
pub fn floor_frac(x: f64) -> (i64, f64) {
    let n = x.floor();
    let mut r = x - n;
    if r >= 1.0 {
        // tiny negative x: x - floor(x) rounds up to 1
        r = 1.0 - f64::EPSILON / 2.0;
    }
    (n as i64, r)
}

/// `h_ε(t, s) = ε⌊t/ε⌋ + εs`.
pub fn two_scale_compose(t: f64, s: f64, eps: f64) -> f64 {
    let (n, _) = floor_frac(t / eps);
    eps * n as f64 + eps * s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoScaleValue {
    pub value: f64,
    /// Set when a lattice point fell outside `[0, domain_end]` and was clamped.
    pub clamped: bool,
}

/// Values of the lattice interpolant at cell `n`, fraction `frac` and torus
/// point `s`, given the samples it needs:
/// `a = v(ε(n+s))`, `b = v(ε(n+1+s))`, `c0 = v(εn)`, `c1 = v(ε(n+1))`, `c2 = v(ε(n+2))`.
#[inline]
fn lattice_interpolant(frac: f64, s: f64, a: f64, b: f64, c0: f64, c1: f64, c2: f64) -> f64 {
    let inner = a + frac * (b - a);
    let at_zero = c0 + frac * (c1 - c0);
    let at_one = c1 + frac * (c2 - c1);
    inner - s * (at_one - at_zero)
}

/// The operator `L_ε v = J(I_ε(v ∘ h_ε))`: linear interpolation across
/// `ε`-cells in `t`, followed by removal of the jump in `s` so that the result
/// is periodic on the torus. `v` is sampled on `[0, domain_end]`; points
/// beyond are clamped and flagged.
pub fn interpolate_two_scale<F>(v: &F, domain_end: f64, eps: f64, t: f64, s: f64) -> TwoScaleValue
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let (n, frac) = floor_frac(t / eps);
    let mut clamped = false;
    let mut at = |k: f64| {
        let r = eps * (n as f64 + k);
        if r > domain_end || r < 0.0 {
            clamped = true;
            v(r.clamp(0.0, domain_end))
        } else {
            v(r)
        }
    };
    let a = at(s);
    let b = at(1.0 + s);
    let c0 = at(0.0);
    let c1 = at(1.0);
    let c2 = at(2.0);
    TwoScaleValue {
        value: lattice_interpolant(frac, s, a, b, c0, c1, c2),
        clamped,
    }
}

/// Uniform `(r, s)` grid: `r` on `[0, r_max]` inclusive, `s` on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleGrid {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

impl TwoScaleGrid {
    pub fn uniform(r_max: f64, nr: usize, ns: usize) -> Self {
        assert!(nr >= 2 && ns >= 1, "two-scale grid too small");
        TwoScaleGrid {
            r: (0..nr)
                .map(|i| {
                    if i + 1 == nr {
                        r_max
                    } else {
                        r_max * i as f64 / (nr - 1) as f64
                    }
                })
                .collect(),
            s: (0..ns).map(|j| j as f64 / ns as f64).collect(),
        }
    }

    /// Default resolution, 512 × 256.
    pub fn standard(r_max: f64) -> Self {
        Self::uniform(r_max, 512, 256)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoScaleError {
    pub sup_error: f64,
    pub clamped: bool,
}

/// Sup over the grid of `|L_ε(u_ε ∘ φ₀⁻¹ ∘ π)(r, s) - limit(φ₀⁻¹(πr), s)|`.
///
/// `phase` carries `φ₀` as component 0 and must extend far enough past
/// `π r_max` for the lattice look-ahead of two cells; otherwise samples are
/// clamped and the result is flagged.
pub fn nonlinear_two_scale_error<const N: usize, U, L>(
    u_eps: &U,
    limit: &L,
    phase: &Trajectory<N>,
    eps: f64,
    grid: &TwoScaleGrid,
) -> Result<TwoScaleError>
where
    U: Fn(f64) -> f64 + Sync,
    L: Fn(f64, f64) -> f64 + Sync,
{
    check_positive("epsilon", eps)?;
    let r_avail = (phase.final_state()[0] - phase.states[0][0]) / PI;
    let r_max = *grid.r.last().expect("non-empty r grid");
    if r_max > r_avail || grid.r[0] < 0.0 {
        return Err(Error::OutOfRange {
            what: "r",
            value: r_max,
            lo: 0.0,
            hi: r_avail,
        });
    }
    let ns = grid.s.len();
    let n_last = floor_frac(r_max / eps).0 as usize + 2;

    // v(ε(n + s_j)) for every cell n and torus node s_j
    let rows: Vec<(Vec<f64>, bool)> = (0..=n_last)
        .into_par_iter()
        .map(|n| -> Result<(Vec<f64>, bool)> {
            let mut clamped = false;
            let mut row = Vec::with_capacity(ns);
            for &s in &grid.s {
                let mut r = eps * (n as f64 + s);
                if r > r_avail {
                    clamped = true;
                    r = r_avail;
                }
                row.push(u_eps(invert_phase(phase, r)?));
            }
            Ok((row, clamped))
        })
        .collect::<Result<_>>()?;
    let clamped = rows.iter().any(|(_, c)| *c);

    let sup_error = grid
        .r
        .par_iter()
        .map(|&r| -> Result<f64> {
            let (n, frac) = floor_frac(r / eps);
            let n = n as usize;
            let t = invert_phase(phase, r)?;
            let (here, next, after) = (&rows[n].0, &rows[n + 1].0, &rows[n + 2].0);
            let mut worst = 0.0f64;
            for (j, &s) in grid.s.iter().enumerate() {
                let value =
                    lattice_interpolant(frac, s, here[j], next[j], here[0], next[0], after[0]);
                worst = worst.max((value - limit(t, s)).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(TwoScaleError { sup_error, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedMean {
    pub value: f64,
    /// The window was moved off-centre (or shortened) to stay inside `[0, T]`.
    pub one_sided: bool,
    /// Number of whole fast periods actually covered.
    pub periods: usize,
    pub start: f64,
    pub end: f64,
}

/// Time mean of `signal` over the interval in which `2φ₀/ε` advances by `2πm`,
/// centred in phase at `t`. Near the ends the window slides inwards; if even
/// that does not fit, it is cut down to the largest whole number of periods.
/// `phase` carries `φ₀` as component 0 and ends at the horizon.
pub fn windowed_average<const N: usize, F>(
    signal: &F,
    t: f64,
    m: usize,
    eps: f64,
    phase: &Trajectory<N>,
) -> Result<WindowedMean>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    check_positive("epsilon", eps)?;
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "window_periods",
            reason: "must be at least 1".into(),
        });
    }
    let phi_lo = phase.states[0][0];
    let phi_hi = phase.final_state()[0];
    let period = PI * eps;
    let available = ((phi_hi - phi_lo) / period * (1.0 + 1e-12)).floor() as usize;
    if available == 0 {
        return Err(Error::OutOfRange {
            what: "window length",
            value: period,
            lo: 0.0,
            hi: phi_hi - phi_lo,
        });
    }
    let periods = m.min(available);
    let width = periods as f64 * period;
    let centre = dense_eval(phase, t)?[0];
    let mut a = centre - 0.5 * width;
    let mut b = centre + 0.5 * width;
    let mut one_sided = periods < m;
    if a < phi_lo {
        a = phi_lo;
        b = (phi_lo + width).min(phi_hi);
        one_sided = true;
    } else if b > phi_hi {
        b = phi_hi;
        a = (phi_hi - width).max(phi_lo);
        one_sided = true;
    }
    let ta = invert_phase(phase, a / PI)?;
    let tb = invert_phase(phase, b / PI)?;
    let value = simpson(signal, ta, tb, 64 * periods) / (tb - ta);
    Ok(WindowedMean {
        value,
        one_sided,
        periods,
        start: ta,
        end: tb,
    })
}

/// Composite Simpson rule with `n` (rounded up to even) subintervals.
pub fn simpson<F>(f: &F, a: f64, b: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Least-squares slope of `log(error)` against `log(ε)` and its `R²`.
pub fn estimate_order(epsilons: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if epsilons.len() != errors.len() {
        return Err(Error::InsufficientData(format!(
            "{} epsilons but {} errors",
            epsilons.len(),
            errors.len()
        )));
    }
    if epsilons.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points, got {}",
            epsilons.len()
        )));
    }
    for (&e, &r) in epsilons.iter().zip(errors) {
        check_positive("epsilon", e)?;
        check_positive("error", r)?;
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter {
            name: "epsilons",
            reason: "duplicated value".into(),
        });
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok((slope, r_squared))
}

/// Whether every element is strictly smaller than its predecessor.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate_fixed;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn floor_frac_examples() {
        let (n, r) = floor_frac(2.7);
        assert_eq!(n, 2);
        assert!((r - 0.7).abs() < 1e-15);
        let (n, r) = floor_frac(-0.3);
        assert_eq!(n, -1);
        assert!((r - 0.7).abs() < 1e-15);
        assert_eq!(floor_frac(5.0), (5, 0.0));
        let (n, r) = floor_frac(-1e-20);
        assert_eq!(n, -1);
        assert!(r < 1.0);
    }

    #[test]
    fn compose_examples() {
        assert!((two_scale_compose(1.2, 0.3, 0.5) - 1.15).abs() < 1e-15);
        assert_eq!(two_scale_compose(7.0 * 0.25, 0.0, 0.25), 1.75);
    }

    proptest! {
        #[test]
        fn floor_frac_reassembles(x in -1e6f64..1e6) {
            let (n, r) = floor_frac(x);
            prop_assert!((0.0..1.0).contains(&r));
            prop_assert!((n as f64 + r - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0));
        }

        #[test]
        fn compose_stays_within_eps(t in 0.0f64..10.0, s in 0.0f64..1.0, eps in 1e-4f64..1.0) {
            prop_assert!((two_scale_compose(t, s, eps) - t).abs() <= eps * (1.0 + 1e-12));
        }

        #[test]
        fn interpolant_is_periodic_in_s(t in 0.0f64..0.9, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let eps = 0.03;
            let v = |x: f64| a * x * x + b * (7.0 * x).sin();
            let at0 = interpolate_two_scale(&v, 1.0, eps, t, 0.0).value;
            let near1 = interpolate_two_scale(&v, 1.0, eps, t, 1.0 - 1e-12).value;
            prop_assert!((at0 - near1).abs() < 1e-9);
        }

        #[test]
        fn interpolant_is_continuous_in_t(k in 1usize..25, s in 0.0f64..1.0) {
            let eps = 0.03;
            let v = |x: f64| (3.0 * x).cos() + x;
            let node = k as f64 * eps;
            let left = interpolate_two_scale(&v, 1.0, eps, node - 1e-12, s).value;
            let right = interpolate_two_scale(&v, 1.0, eps, node, s).value;
            prop_assert!((left - right).abs() < 1e-9);
        }

        #[test]
        fn windowed_average_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, t in 0.0f64..1.0) {
            let phase = linear_phase(2.0, 1.0);
            let f = |x: f64| (5.0 * x).sin();
            let g = |x: f64| x * x;
            let combo = |x: f64| c1 * f(x) + c2 * g(x);
            let mf = windowed_average(&f, t, 8, 0.02, &phase).unwrap().value;
            let mg = windowed_average(&g, t, 8, 0.02, &phase).unwrap().value;
            let mc = windowed_average(&combo, t, 8, 0.02, &phase).unwrap().value;
            prop_assert!((mc - c1 * mf - c2 * mg).abs() < 1e-12);
            let k = windowed_average(&|_| c1, t, 8, 0.02, &phase).unwrap().value;
            prop_assert!((k - c1).abs() < 1e-12);
        }
    }

    fn linear_phase(w: f64, horizon: f64) -> Trajectory<1> {
        integrate_fixed(move |_, _: &[f64; 1]| [w], [0.0], horizon, 1e-3).unwrap()
    }

    fn curved_phase() -> Trajectory<1> {
        integrate_fixed(|t, _: &[f64; 1]| [2.0 + t.sin()], [0.0], 1.2, 1e-4).unwrap()
    }

    #[test]
    fn interpolation_of_constant_and_linear() {
        let c = |_: f64| 4.5;
        let v = interpolate_two_scale(&c, 1.0, 0.1, 0.37, 0.6);
        assert_eq!(v.value, 4.5);
        assert!(!v.clamped);

        // v(t) = t: a + frac(b-a) = ε(n+s+frac); J removes sε
        let lin = |x: f64| x;
        let eps = 0.1;
        for &(t, s) in &[(0.37, 0.6), (0.5, 0.0), (0.05, 0.99)] {
            let got = interpolate_two_scale(&lin, 1.0, eps, t, s).value;
            assert!((got - t).abs() < 1e-14, "{got} vs {t}");
        }
        assert!(interpolate_two_scale(&lin, 0.4, eps, 0.37, 0.5).clamped);
    }

    #[test]
    fn interpolation_recovers_oscillation_profile() {
        let mut prev = f64::INFINITY;
        for eps in [0.04, 0.02, 0.01] {
            let v = |x: f64| (TAU * x / eps).sin() * (1.0 + x);
            let mut worst = 0.0f64;
            for i in 0..200 {
                let t = 0.8 * i as f64 / 199.0;
                for j in 0..64 {
                    let s = j as f64 / 64.0;
                    let got = interpolate_two_scale(&v, 1.0, eps, t, s).value;
                    worst = worst.max((got - (TAU * s).sin() * (1.0 + t)).abs());
                }
            }
            assert!(worst <= 3.0 * eps, "{worst}");
            assert!(worst < prev);
            prev = worst;
        }
    }

    #[test]
    fn nonlinear_error_of_canonical_oscillation() {
        let phase = curved_phase();
        let r_max = dense_eval(&phase, 1.0).unwrap()[0] / PI;
        let grid = TwoScaleGrid::uniform(r_max, 128, 64);
        let mut prev = f64::INFINITY;
        for eps in [0.04, 0.02, 0.01] {
            let u = |t: f64| {
                let phi = dense_eval(&phase, t).unwrap()[0];
                (2.0 * phi / eps).sin() * (1.0 + t)
            };
            let limit = |t: f64, s: f64| (TAU * s).sin() * (1.0 + t);
            let e = nonlinear_two_scale_error(&u, &limit, &phase, eps, &grid).unwrap();
            assert!(!e.clamped);
            assert!(e.sup_error < prev, "{} !< {prev}", e.sup_error);
            prev = e.sup_error;
        }
        let c = nonlinear_two_scale_error(&|_| 2.0, &|_, _| 2.0, &phase, 0.01, &grid).unwrap();
        assert_eq!(c.sup_error, 0.0);
        let too_far = TwoScaleGrid::uniform(10.0, 8, 4);
        assert!(nonlinear_two_scale_error(&|_| 2.0, &|_, _| 2.0, &phase, 0.01, &too_far).is_err());
    }

    #[test]
    fn windowed_average_of_harmonics() {
        let phase = curved_phase();
        let mut prev = f64::INFINITY;
        for eps in [0.04, 0.02, 0.01] {
            let sin = |t: f64| (2.0 * dense_eval(&phase, t).unwrap()[0] / eps).sin();
            let sin2 = |t: f64| sin(t).powi(2);
            let mut worst = 0.0f64;
            for k in 0..=20 {
                let t = k as f64 / 20.0;
                let m = windowed_average(&sin, t, 8, eps, &phase).unwrap();
                worst = worst.max(m.value.abs());
                let m2 = windowed_average(&sin2, t, 8, eps, &phase).unwrap();
                assert!((m2.value - 0.5).abs() <= eps);
            }
            assert!(worst <= eps, "{worst}");
            assert!(worst < prev);
            prev = worst;
        }
    }

    #[test]
    fn windowed_average_edges() {
        let phase = linear_phase(2.0, 1.0);
        let m = windowed_average(&|t: f64| t, 0.0, 8, 0.02, &phase).unwrap();
        assert!(m.one_sided);
        assert_eq!(m.start, 0.0);
        assert_eq!(m.periods, 8);
        let m = windowed_average(&|t: f64| t, 0.5, 8, 0.02, &phase).unwrap();
        assert!(!m.one_sided);
        assert!((m.value - 0.5).abs() < 1e-12);
        let m = windowed_average(&|t: f64| t, 1.0, 8, 0.02, &phase).unwrap();
        assert!(m.one_sided && (m.end - 1.0).abs() < 1e-12);
        // fewer whole periods than requested fit into [0, T]
        let m = windowed_average(&|t: f64| t, 0.5, 1000, 0.02, &phase).unwrap();
        assert!(m.one_sided && m.periods < 1000);
        assert!(windowed_average(&|t: f64| t, 0.5, 8, 10.0, &phase).is_err());
        assert!(windowed_average(&|t: f64| t, 0.5, 0, 0.02, &phase).is_err());
    }

    #[test]
    fn order_estimates() {
        let eps = [0.04, 0.02, 0.01];
        let sq: Vec<f64> = eps.iter().map(|e| e * e).collect();
        let (s, r2) = estimate_order(&eps, &sq).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        let e27: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(2.7)).collect();
        let (s, _) = estimate_order(&eps, &e27).unwrap();
        assert!((s - 2.7).abs() < 1e-12);
        assert!(estimate_order(&[0.04, 0.02, 0.02], &[1.0, 0.5, 0.4]).is_err());
        assert!(estimate_order(&eps, &[1.0, 0.0, 0.3]).is_err());
        assert!(estimate_order(&eps, &[1.0, -1.0, 0.3]).is_err());
        assert!(estimate_order(&eps[..2], &sq[..2]).is_err());
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 4);
        assert!((v - 0.0).abs() < 1e-14);
        assert!((simpson(&|x: f64| x * x, 0.0, 3.0, 3) - 9.0).abs() < 1e-13);
    }
}
