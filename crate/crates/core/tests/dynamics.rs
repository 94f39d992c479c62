mod common;

use approx::assert_relative_eq;
use dobsim::dynamics::{JointState, LinkParams, ManipulatorModel, Vector};
use dobsim::simulation::{integrator_step, Integrator};
use proptest::prelude::*;

fn two_link() -> ManipulatorModel {
    let links = vec![
        LinkParams::new(0.4, 2.0, 0.2, 0.026667).unwrap(),
        LinkParams::new(0.3, 1.2, 0.15, 0.009).unwrap(),
    ];
    ManipulatorModel::new(links, 9.81).unwrap()
}

#[test]
fn bench_arm_inertia_at_zero_matches_energy_hessian() {
    let model = ManipulatorModel::three_link_bench(0.0);
    let q = Vector::zeros(3);
    let oracle = common::inertia_from_energy(&common::bench_links(), &q);
    let m = model.mass_matrix(&q);
    for (a, b) in m.iter().zip(oracle.iter()) {
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }
}

#[test]
fn gravity_is_potential_gradient() {
    for model in [two_link(), ManipulatorModel::three_link_bench(9.81)] {
        let links = model.links().to_vec();
        for q in [vec![0.3, -1.1, 0.7], vec![-2.0, 0.4, 2.9], vec![1.0, 1.0, 1.0]] {
            let q = Vector::from_iterator(model.dof(), q.into_iter().take(model.dof()));
            let oracle = common::gradient(|x| common::potential_energy(&links, 9.81, x), &q, 1e-6);
            let g = model.gravity_vector(&q);
            assert!((g - &oracle).norm() < 1e-7 * oracle.norm().max(1e-3));
        }
    }
}

#[test]
fn equations_of_motion_satisfy_euler_lagrange() {
    for model in [two_link(), ManipulatorModel::three_link_bench(9.81)] {
        let n = model.dof();
        let links = model.links().to_vec();
        let q = Vector::from_fn(n, |i, _| 0.4 + 0.7 * i as f64);
        let qdot = Vector::from_fn(n, |i, _| 1.5 - 1.1 * i as f64);
        let tau = Vector::from_fn(n, |i, _| 0.02 * (i as f64 + 1.0));
        let state = JointState::new(q.clone(), qdot.clone()).unwrap();
        let qddot = model.forward_dynamics(&state, &tau, &Vector::zeros(n)).unwrap();
        let oracle = common::lagrange_torque(&links, 9.81, &q, &qdot, &qddot);
        let scale = tau.norm().max(model.gravity_vector(&q).norm());
        assert!((oracle - &tau).norm() < 1e-6 * scale);
    }
}

#[test]
fn coriolis_makes_inertia_rate_skew() {
    let model = ManipulatorModel::three_link_bench(0.0);
    let q = Vector::from_vec(vec![0.2, 1.3, -0.8]);
    let qdot = Vector::from_vec(vec![2.0, -3.0, 4.5]);
    let mdot = common::inertia_rate(|x| model.mass_matrix(x), &q, &qdot, 1e-6);
    let s = mdot - model.coriolis_matrix(&q, &qdot) * 2.0;
    let sym = &s + s.transpose();
    assert!(sym.amax() < 1e-8, "{sym}");
}

fn energy(model: &ManipulatorModel, x: &Vector) -> f64 {
    let n = model.dof();
    let state = JointState::new(x.rows(0, n).into_owned(), x.rows(n, n).into_owned()).unwrap();
    model.kinetic_energy(&state) + model.potential_energy(&state.q)
}

fn free_motion(model: &ManipulatorModel, x0: &Vector, dt: f64, steps: usize) -> Vec<Vector> {
    let n = model.dof();
    let zero = Vector::zeros(n);
    let mut x = x0.clone();
    let mut out = vec![x.clone()];
    for _ in 0..steps {
        x = integrator_step(
            Integrator::Rk4,
            |_, x: &Vector| {
                let state = JointState::new(x.rows(0, n).into_owned(), x.rows(n, n).into_owned())?;
                let qddot = model.forward_dynamics(&state, &zero, &zero)?;
                let mut dx = Vector::zeros(2 * n);
                dx.rows_mut(0, n).copy_from(&state.qdot);
                dx.rows_mut(n, n).copy_from(&qddot);
                Ok::<_, dobsim::Error>(dx)
            },
            0.0,
            &x,
            dt,
        )
        .unwrap();
        out.push(x.clone());
    }
    out
}

#[test]
fn frictionless_swing_conserves_energy() {
    let model = two_link();
    let x0 = Vector::from_vec(vec![0.3, 0.5, 1.0, -2.0]);
    let traj = free_motion(&model, &x0, 1e-3, 2000);
    let e0 = energy(&model, &x0);
    let drift = traj.iter().map(|x| (energy(&model, x) - e0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-8 * e0.abs().max(1.0), "drift {drift}");
}

#[test]
fn viscous_friction_dissipates() {
    let links = two_link().links().to_vec();
    let model =
        ManipulatorModel::with_friction(links, 9.81, Vector::from_vec(vec![0.2, 0.1]), Vector::zeros(2)).unwrap();
    let x0 = Vector::from_vec(vec![0.3, 0.5, 1.0, -2.0]);
    let traj = free_motion(&model, &x0, 1e-3, 2000);
    let energies: Vec<f64> = traj.iter().map(|x| energy(&model, x)).collect();
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(energies.last().unwrap() < &(energies[0] - 1e-3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inertia_is_symmetric_positive_definite(q in prop::collection::vec(-3.2f64..3.2, 3)) {
        let model = ManipulatorModel::three_link_bench(0.0);
        let m = model.mass_matrix(&Vector::from_vec(q));
        prop_assert!((&m - m.transpose()).amax() < 1e-15);
        prop_assert!(m.clone().cholesky().is_some());
    }

    #[test]
    fn inertia_matches_energy_oracle(q in prop::collection::vec(-3.2f64..3.2, 3)) {
        let model = ManipulatorModel::three_link_bench(0.0);
        let q = Vector::from_vec(q);
        let m = model.mass_matrix(&q);
        let oracle = common::inertia_from_energy(&common::bench_links(), &q);
        prop_assert!((m - &oracle).amax() < 1e-12 * oracle.amax());
    }

    #[test]
    fn forward_dynamics_inverts_the_equations(
        q in prop::collection::vec(-3.2f64..3.2, 2),
        qdot in prop::collection::vec(-5.0f64..5.0, 2),
        tau in prop::collection::vec(-10.0f64..10.0, 2),
    ) {
        let model = two_link();
        let state = JointState::new(Vector::from_vec(q), Vector::from_vec(qdot)).unwrap();
        let tau = Vector::from_vec(tau);
        let qddot = model.forward_dynamics(&state, &tau, &Vector::zeros(2)).unwrap();
        let back = model.mass_matrix(&state.q) * qddot
            + model.coriolis_matrix(&state.q, &state.qdot) * &state.qdot
            + model.gravity_vector(&state.q)
            + model.friction_torque(&state.qdot);
        prop_assert!((back - &tau).norm() < 1e-9 * tau.norm().max(1.0));
    }
}
