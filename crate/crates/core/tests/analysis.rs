mod common;

use dobsim::analysis::{consistent_integral, dynamic_error, Verdict};
use dobsim::cli::execute;
use dobsim::par::Exec;

#[test]
fn dynamic_error_definitions_agree() {
    for name in ["theorem3_regulation", "theorem2_circle"] {
        let r = common::run_preset(name);
        let cfg = &r.resolved.scenario.controller;
        let steps = &r.log.steps;
        let i0 = consistent_integral(&steps[0], &cfg.kd, &cfg.kp);
        let from_integral = dynamic_error(steps, &cfg.kd, &cfg.kp, &i0);
        let scale = steps.iter().map(|s| s.dynamic_error().norm()).fold(0.0, f64::max);
        let dt = r.log.log_interval;
        for (s, ed) in steps.iter().zip(&from_integral) {
            // trapezoid quadrature of ∫e: O(dt²) per unit time, amplified by K_P
            let tol = 1e-2 * scale.max(1.0) * (dt / 1e-3).powi(2);
            assert!((s.dynamic_error() - ed).norm() < tol, "{name} t = {}", s.t);
        }
    }
}

#[test]
fn lyapunov_rate_matches_differences_of_v() {
    for name in common::STABLE_PRESETS {
        let mut file = common::preset_file(name);
        // the finite-difference side needs a smooth, well-resolved V
        file.disturbances.measurement_noise = None;
        file.sim.dt /= 4.0;
        file.sim.duration = file.sim.duration.min(2.0);
        let r = execute(&file, Exec::Sequential).unwrap();
        let mismatch = r.summary.report.vdot_max_mismatch.unwrap();
        assert!(mismatch < 1e-4, "{name}: {mismatch}");
    }
}

#[test]
fn positive_margin_implies_decreasing_v_on_every_preset() {
    for name in common::ALL_PRESETS {
        let r = common::run_preset(name);
        assert_eq!(r.summary.report.margin_violations, 0, "{name}");
        for th in &r.analysis.trace.steps {
            if th.margin > 0.0 {
                assert!(th.vdot_analytic <= 0.0, "{name} t = {}", th.t);
            }
        }
    }
}

#[test]
fn regulation_passivity_integral_is_bounded_below() {
    let r = common::run_preset("theorem3_regulation");
    assert_eq!(r.summary.report.verdict, Verdict::Converged);
    let p = r.summary.report.passivity;
    assert!(p.bounded_below);
    assert!(p.infimum.is_finite());
    assert!(p.phi >= 0.0);
}

#[test]
fn lyapunov_function_is_non_negative() {
    for name in common::STABLE_PRESETS {
        let r = common::run_preset(name);
        assert!(r.analysis.trace.steps.iter().all(|s| s.v >= 0.0), "{name}");
    }
}
