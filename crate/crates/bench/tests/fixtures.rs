use fastslow_bench::{initial_state, standard_setup, state_sweep};
use fastslow_core::dynamics::{action_angle_rhs, energy_action_angle, ActionAngleState};

#[test]
fn sweep_states_are_valid_inputs() {
    let setup = standard_setup();
    for s in state_sweep(500) {
        assert!(s.theta > 0.0);
        let d = action_angle_rhs(&s, 0.02, &setup.fm).unwrap();
        assert!(d.to_array().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn initial_state_has_unit_energy() {
    let setup = standard_setup();
    let s = ActionAngleState::from_array(initial_state(&setup));
    assert_eq!(energy_action_angle(&s, 0.02, &setup.fm), 1.0);
}
