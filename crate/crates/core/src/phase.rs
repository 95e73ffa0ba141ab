//! Reduction of the fast phase `k φ / ε` modulo 2π.
//!
//! For small ε the raw argument is large (`2φ/ε ≈ 4e4` at ε = 1e-3), and the
//! rounding of the quotient alone costs several digits. The quotient is
//! carried as a double-double and reduced against a two-word 2π.

use std::f64::consts::TAU;

const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `k φ / ε` reduced to `[-π, π]`. `k` should be a small power of two so that
/// `k φ` is exact.
#[inline]
pub fn reduced_angle(phi: f64, eps: f64, k: f64) -> f64 {
    let x = k * phi;
    let q = x / eps;
    if !q.is_finite() {
        return q;
    }
    // x - q ε exactly, so (q, lo) is x/ε to about twice working precision.
    let lo = (-q).mul_add(eps, x) / eps;
    let n = (q / TAU).round();
    let hi = (-n).mul_add(TAU, q);
    (-n).mul_add(TAU_LO, hi) + lo
}

/// `(sin, cos)` of `k φ / ε`.
#[inline]
pub fn fast_sin_cos(phi: f64, eps: f64, k: f64) -> (f64, f64) {
    reduced_angle(phi, eps, k).sin_cos()
}
