//! Fixed-step RK4, an adaptive Dormand–Prince 5(4) pair, cubic Hermite dense
//! output and step-halving reference solutions.

use crate::error::{check_positive, Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub integrator: &'static str,
    /// Nominal step for fixed-step runs.
    pub step: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// Richardson estimate of the global error, set by [`reference_solution`].
    pub error_estimate: Option<f64>,
}

/// Time grid with states and right-hand sides at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub derivs: Vec<[f64; N]>,
    pub meta: TrajectoryMeta,
}

impl<const N: usize> Trajectory<N> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one node")
    }

    pub fn final_state(&self) -> [f64; N] {
        *self
            .states
            .last()
            .expect("trajectory has at least one node")
    }

    fn push(&mut self, t: f64, x: [f64; N], dx: [f64; N]) {
        self.times.push(t);
        self.states.push(x);
        self.derivs.push(dx);
    }
}

fn check_finite<const N: usize>(t: f64, x: &[f64; N]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            t,
            state: x.to_vec(),
        })
    }
}

#[inline]
fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a.mul_add(k[i], x[i]))
}

fn rk4_step<const N: usize, F>(rhs: &mut F, t: f64, x: &[f64; N], k1: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let half = 0.5 * h;
    let k2 = rhs(t + half, &axpy(x, half, k1));
    let k3 = rhs(t + half, &axpy(x, half, &k2));
    let k4 = rhs(t + h, &axpy(x, h, &k3));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]))
}

/// Number of RK4 steps for a nominal step `h`, ignoring a final step shorter
/// than a relative `1e-9` of `h`.
fn step_count(horizon: f64, h: f64) -> usize {
    let q = horizon / h;
    let n = q.round();
    if (q - n).abs() <= 1e-9 * q.max(1.0) {
        n.max(1.0) as usize
    } else {
        q.ceil() as usize
    }
}

/// Classical RK4 with constant step. Node times are `k·h`; the last step is
/// shortened to land on `horizon`.
pub fn integrate_fixed<const N: usize, F>(
    mut rhs: F,
    s0: [f64; N],
    horizon: f64,
    h: f64,
) -> Result<Trajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    check_positive("horizon", horizon)?;
    check_positive("step", h)?;
    if h > horizon {
        return Err(Error::OutOfRange {
            what: "step",
            value: h,
            lo: 0.0,
            hi: horizon,
        });
    }
    check_finite(0.0, &s0)?;
    let n = step_count(horizon, h);
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        derivs: Vec::with_capacity(n + 1),
        meta: TrajectoryMeta {
            integrator: "rk4",
            step: Some(h),
            ..Default::default()
        },
    };
    let mut x = s0;
    let mut dx = rhs(0.0, &x);
    traj.push(0.0, x, dx);
    for k in 0..n {
        let t = k as f64 * h;
        let t_next = if k + 1 == n {
            horizon
        } else {
            (k + 1) as f64 * h
        };
        x = rk4_step(&mut rhs, t, &x, &dx, t_next - t);
        check_finite(t_next, &x)?;
        dx = rhs(t_next, &x);
        traj.push(t_next, x, dx);
    }
    traj.meta.accepted = n;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; keeps dense output accurate on smooth problems.
    pub h_max: f64,
    /// First trial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl ControlOptions {
    pub fn new(rtol: f64, atol: f64) -> Self {
        ControlOptions {
            rtol,
            atol,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 10_000_000,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Adaptive Dormand–Prince 5(4) with PI step control, tolerance
/// `atol + rtol·|x_i|` per component.
pub fn integrate_controlled<const N: usize, F>(
    rhs: F,
    s0: [f64; N],
    horizon: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    integrate_controlled_with(rhs, s0, horizon, &ControlOptions::new(rtol, atol))
}

pub fn integrate_controlled_with<const N: usize, F>(
    mut rhs: F,
    s0: [f64; N],
    horizon: f64,
    opts: &ControlOptions,
) -> Result<Trajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    check_positive("horizon", horizon)?;
    check_positive("rtol", opts.rtol)?;
    check_positive("atol", opts.atol)?;
    if !(opts.h_max > 0.0) {
        return Err(Error::InvalidParameter {
            name: "h_max",
            reason: format!("must be positive, got {}", opts.h_max),
        });
    }
    check_finite(0.0, &s0)?;

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        derivs: Vec::new(),
        meta: TrajectoryMeta {
            integrator: "dopri5",
            rtol: Some(opts.rtol),
            atol: Some(opts.atol),
            ..Default::default()
        },
    };
    let mut t = 0.0;
    let mut x = s0;
    let mut k1 = rhs(t, &x);
    traj.push(t, x, k1);

    let err_norm = |x: &[f64; N], xn: &[f64; N], e: &[f64; N]| -> f64 {
        let mut m = 0.0f64;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * x[i].abs().max(xn[i].abs());
            m = m.max((e[i] / sc).abs());
        }
        m
    };

    let mut h = match opts.h_init {
        Some(h0) => h0,
        None => {
            let d0 = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let d1 = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = opts.atol + opts.rtol * d0;
            if d1 <= 1e-300 {
                1e-3 * horizon
            } else {
                0.01 * scale.max(1e-12) / d1 * (1.0 / opts.rtol).powf(0.2).min(1e4)
            }
        }
    }
    .min(opts.h_max)
    .min(horizon);

    let mut err_prev = 1e-4f64;
    let mut last_rejected = false;
    let mut steps = 0usize;
    while t < horizon {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::TooManySteps(opts.max_steps));
        }
        let mut last = false;
        if t + h >= horizon || t + 1.01 * h >= horizon {
            h = horizon - t;
            last = true;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Err(Error::StepUnderflow { t, h });
        }
        let k2 = rhs(t + C2 * h, &std::array::from_fn(|i| x[i] + h * A21 * k1[i]));
        let k3 = rhs(
            t + C3 * h,
            &std::array::from_fn(|i| x[i] + h * (A31 * k1[i] + A32 * k2[i])),
        );
        let k4 = rhs(
            t + C4 * h,
            &std::array::from_fn(|i| x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])),
        );
        let k5 = rhs(
            t + C5 * h,
            &std::array::from_fn(|i| {
                x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            }),
        );
        let k6 = rhs(
            t + h,
            &std::array::from_fn(|i| {
                x[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            }),
        );
        let xn: [f64; N] = std::array::from_fn(|i| {
            x[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        });
        let t_new = if last { horizon } else { t + h };
        let k7 = rhs(t_new, &xn);
        let e: [f64; N] = std::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let err = err_norm(&x, &xn, &e);
        if !err.is_finite() && xn.iter().any(|v| !v.is_finite()) {
            // a blow-up inside the step; shrink and retry before giving up
            h *= FAC_MIN;
            traj.meta.rejected += 1;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            check_finite(t_new, &xn)?;
            t = t_new;
            x = xn;
            k1 = k7;
            traj.push(t, x, k1);
            traj.meta.accepted += 1;
            let mut fac = SAFETY * err.max(1e-10).powf(-ALPHA) * err_prev.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_prev = err.max(1e-4);
            last_rejected = false;
            h = (h * fac).min(opts.h_max);
        } else {
            traj.meta.rejected += 1;
            last_rejected = true;
            let fac = (SAFETY * err.powf(-ALPHA)).max(FAC_MIN);
            h *= fac;
        }
    }
    Ok(traj)
}

fn locate(times: &[f64], t: f64) -> usize {
    // index i with times[i] <= t < times[i+1], clamped to the last interval
    let i = times.partition_point(|&s| s <= t);
    i.saturating_sub(1).min(times.len().saturating_sub(2))
}

/// Cubic Hermite interpolation on the bracketing interval; exact at nodes.
pub fn dense_eval<const N: usize>(traj: &Trajectory<N>, t: f64) -> Result<[f64; N]> {
    let t0 = traj.times[0];
    let t1 = traj.horizon();
    if !(t >= t0 && t <= t1) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            lo: t0,
            hi: t1,
        });
    }
    if traj.len() == 1 {
        return Ok(traj.states[0]);
    }
    let i = locate(&traj.times, t);
    Ok(hermite(traj, i, t))
}

#[inline]
fn hermite<const N: usize>(traj: &Trajectory<N>, i: usize, t: f64) -> [f64; N] {
    let (ta, tb) = (traj.times[i], traj.times[i + 1]);
    if t == ta {
        return traj.states[i];
    }
    if t == tb {
        return traj.states[i + 1];
    }
    let h = tb - ta;
    let s = (t - ta) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let (xa, xb) = (&traj.states[i], &traj.states[i + 1]);
    let (da, db) = (&traj.derivs[i], &traj.derivs[i + 1]);
    std::array::from_fn(|k| h00 * xa[k] + h * h10 * da[k] + h01 * xb[k] + h * h11 * db[k])
}

/// Dense evaluation at every point of `grid`.
pub fn sample<const N: usize>(traj: &Trajectory<N>, grid: &[f64]) -> Result<Vec<[f64; N]>> {
    grid.iter().map(|&t| dense_eval(traj, t)).collect()
}

/// Integrate with `base_h` and `base_h / 2`, estimate the global error of the
/// finer run as `max |x_h - x_{h/2}| / 15` over the coarse nodes, and return
/// the finer trajectory tagged with that estimate.
pub fn reference_solution<const N: usize, F>(
    rhs: F,
    s0: [f64; N],
    horizon: f64,
    base_h: f64,
    cap: f64,
) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let coarse = integrate_fixed(&rhs, s0, horizon, base_h)?;
    let mut fine = integrate_fixed(&rhs, s0, horizon, 0.5 * base_h)?;
    let mut diff = 0.0f64;
    for (k, xc) in coarse.states.iter().enumerate() {
        let j = if k + 1 == coarse.len() {
            fine.len() - 1
        } else {
            2 * k
        };
        debug_assert_eq!(coarse.times[k], fine.times[j]);
        for (a, b) in xc.iter().zip(fine.states[j].iter()) {
            diff = diff.max((a - b).abs());
        }
    }
    let estimate = diff / 15.0;
    if !(estimate <= cap) {
        return Err(Error::ReferenceError { estimate, cap });
    }
    fine.meta.integrator = "rk4-richardson";
    fine.meta.error_estimate = Some(estimate);
    Ok(fine)
}
