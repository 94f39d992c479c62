use serde::{Deserialize, Serialize};

use crate::dynamics::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Classical fourth-order Runge–Kutta.
    #[default]
    Rk4,
    /// Explicit (forward) Euler.
    Euler,
}

/// Advances `ẋ = f(t, x)` by one fixed step.
pub fn integrator_step<F, E>(scheme: Integrator, mut rhs: F, t: f64, x: &Vector, dt: f64) -> Result<Vector, E>
where
    F: FnMut(f64, &Vector) -> Result<Vector, E>,
{
    match scheme {
        Integrator::Euler => Ok(x + rhs(t, x)? * dt),
        Integrator::Rk4 => {
            let half = 0.5 * dt;
            let k1 = rhs(t, x)?;
            let k2 = rhs(t + half, &(x + &k1 * half))?;
            let k3 = rhs(t + half, &(x + &k2 * half))?;
            let k4 = rhs(t + dt, &(x + &k3 * dt))?;
            Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn decay(_: f64, x: &Vector) -> Result<Vector, Infallible> {
        Ok(-x)
    }

    #[test]
    fn rk4_one_step_order() {
        for dt in [0.1, 0.05, 0.025] {
            let x = integrator_step(Integrator::Rk4, decay, 0.0, &Vector::from_element(1, 1.0), dt).unwrap();
            let err = (x[0] - (-dt).exp()).abs();
            // local error of RK4 on ẋ = −x is dt⁵/120 + O(dt⁶)
            assert!(err < dt.powi(5) / 100.0, "dt = {dt}: {err}");
            assert!(err > dt.powi(5) / 200.0, "dt = {dt}: {err}");
        }
    }

    #[test]
    fn euler_step() {
        let x = integrator_step(Integrator::Euler, decay, 0.0, &Vector::from_element(2, 2.0), 0.1).unwrap();
        assert_eq!(x, Vector::from_element(2, 1.8));
    }

    #[test]
    fn zero_rhs_is_identity() {
        let x0 = Vector::from_vec(vec![1.0, -2.0, 3.5]);
        for scheme in [Integrator::Rk4, Integrator::Euler] {
            let x = integrator_step(
                scheme,
                |_, x: &Vector| Ok::<_, Infallible>(Vector::zeros(x.len())),
                0.3,
                &x0,
                0.01,
            )
            .unwrap();
            assert_eq!(x, x0);
        }
    }

    #[test]
    fn propagates_errors() {
        let r: Result<Vector, &str> = integrator_step(Integrator::Rk4, |_, _| Err("boom"), 0.0, &Vector::zeros(1), 0.1);
        assert_eq!(r.unwrap_err(), "boom");
    }
}
