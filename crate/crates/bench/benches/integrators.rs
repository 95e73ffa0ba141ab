use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fastslow_bench::{initial_state, standard_setup, state_sweep};
use fastslow_core::dynamics::{action_angle_rhs, action_angle_rhs_log_form, ActionAngleState};
use fastslow_core::expansion::{reference_step, solve_full_reference};
use fastslow_core::homogenized::solve_homogenized;
use fastslow_core::integrate::integrate_fixed;

const EPS: f64 = 0.02;

fn vector_fields(c: &mut Criterion) {
    let setup = standard_setup();
    let states = state_sweep(1000);
    c.bench_function("rhs_omega_form_1000", |b| {
        b.iter(|| {
            for s in &states {
                black_box(action_angle_rhs(black_box(s), EPS, &setup.fm).unwrap());
            }
        })
    });
    c.bench_function("rhs_log_form_1000", |b| {
        b.iter(|| {
            for s in &states {
                black_box(action_angle_rhs_log_form(black_box(s), EPS, &setup.fm).unwrap());
            }
        })
    });
}

fn integrators(c: &mut Criterion) {
    let setup = standard_setup();
    let fm = &setup.fm;
    let h = reference_step(EPS, fm, setup.settings.step_factor, setup.grid_dt());
    let s0 = initial_state(&setup);
    let mut g = c.benchmark_group("integrators");
    g.sample_size(20);
    g.bench_function("rk4_fixed_eps0.02", |b| {
        b.iter(|| {
            integrate_fixed(
                |_, x: &[f64; 4]| {
                    action_angle_rhs(&ActionAngleState::from_array(*x), EPS, fm)
                        .unwrap()
                        .to_array()
                },
                s0,
                1.0,
                h,
            )
            .unwrap()
        })
    });
    g.bench_function("reference_eps0.02", |b| {
        b.iter(|| solve_full_reference(&setup.params, fm, EPS, &setup.settings, 1.0).unwrap())
    });
    g.bench_function("dopri5_homogenized", |b| {
        b.iter(|| solve_homogenized(&setup.params, fm, 1e-12, 1e-13).unwrap())
    });
    g.finish();
}

criterion_group!(benches, vector_fields, integrators);
criterion_main!(benches);
