//! Fixtures shared by the benchmarks.

use fastslow_core::dynamics::ActionAngleState;
use fastslow_core::Setup;

/// The standard sine configuration with `T = 1`.
pub fn standard_setup() -> Setup {
    Setup::test_config()
}

/// Initial action-angle state of the standard configuration.
pub fn initial_state(setup: &Setup) -> [f64; 4] {
    let p = &setup.params;
    ActionAngleState {
        phi: 0.0,
        theta: setup.theta_star(),
        y: p.y_star,
        p: p.p_star,
    }
    .to_array()
}

/// Deterministic spread of `n` states for vector-field benchmarks.
pub fn state_sweep(n: usize) -> Vec<ActionAngleState> {
    (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            ActionAngleState {
                phi: 5.0 * x,
                theta: 0.05 + 1.5 * x,
                y: -3.0 + 6.0 * x,
                p: (7.0 * x).sin(),
            }
        })
        .collect()
}
