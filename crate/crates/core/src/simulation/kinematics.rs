//! Conversion of operational-space circles into joint references.

use nalgebra::{Matrix2, Vector2};

use super::reference::{Reference, SampledPath};
use crate::dynamics::{ManipulatorModel, Vector};
use crate::error::{Error, Result};

/// Damping of the differential inverse kinematics for the 3R arm.
pub const DLS_DAMPING: f64 = 1e-3;
/// Task-space tolerance of the iterative solver, m.
pub const IK_TOLERANCE: f64 = 1e-12;
const IK_MAX_ITERATIONS: usize = 500;
/// `|cos q_2|` above this is reported as close to the elbow singularity.
const NEAR_SINGULAR: f64 = 1.0 - 1e-6;

/// Operational-space circle `p(t) = c + r (cos(ωt + φ), sin(ωt + φ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationalCircle {
    pub center: Vector2<f64>,
    pub radius: f64,
    pub period: f64,
    /// Start angle `φ` on the circle, rad.
    pub start_angle: f64,
}

impl OperationalCircle {
    pub fn point(&self, t: f64) -> Vector2<f64> {
        let a = std::f64::consts::TAU / self.period * t + self.start_angle;
        self.center + Vector2::new(a.cos(), a.sin()) * self.radius
    }
}

/// Joint reference plus non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct JointPath {
    pub reference: Reference,
    pub warnings: Vec<String>,
}

/// Samples the circle every `spacing` seconds over `[0, duration]` and solves
/// the inverse kinematics sample by sample: analytic elbow-down solution for
/// two links, damped least squares seeded from the previous sample for three.
/// Velocities and accelerations come from finite differences of the samples.
pub fn operational_to_joint(
    model: &ManipulatorModel,
    circle: &OperationalCircle,
    duration: f64,
    spacing: f64,
) -> Result<JointPath> {
    if !(circle.radius >= 0.0 && circle.period > 0.0 && spacing > 0.0 && duration > 0.0) {
        return Err(Error::Config(
            "operational circle needs radius ≥ 0 and positive period, spacing and duration".into(),
        ));
    }
    // two extra samples on each side feed the difference stencils, and two
    // more past the end keep the last integration step inside the path
    let count = (duration / spacing).ceil() as usize + 7;
    let mut warnings = Vec::new();
    let mut samples: Vec<Vector> = Vec::with_capacity(count);
    let mut singular_reported = false;
    for k in 0..count {
        let t = (k as f64 - 2.0) * spacing;
        let target = circle.point(t);
        let (q, near_singular) = match model.dof() {
            2 => two_link_ik(model, &target).map_err(|reason| Error::Unreachable {
                index: k,
                time: t,
                reason,
            })?,
            _ => {
                let seed = match samples.last() {
                    Some(prev) => prev.clone(),
                    None => initial_seed(model, &target),
                };
                dls_ik(model, &target, seed).map_err(|reason| Error::Unreachable {
                    index: k,
                    time: t,
                    reason,
                })?
            }
        };
        if near_singular && !singular_reported {
            warnings.push(format!("sample {k} (t = {t:.4} s) is close to a kinematic singularity"));
            singular_reported = true;
        }
        let q = match samples.last() {
            Some(prev) => unwrap_angles(q, prev),
            None => q,
        };
        let tip = model.tip_position(&q);
        if (tip - target).norm() > 1e-6 {
            return Err(Error::Unreachable {
                index: k,
                time: t,
                reason: format!("inverse kinematics residual {:.3e} m", (tip - target).norm()),
            });
        }
        samples.push(q);
    }
    let path = SampledPath::from_positions(-2.0 * spacing, spacing, samples)?;
    Ok(JointPath {
        reference: Reference::Samples(path),
        warnings,
    })
}

/// Elbow-down (`q_2 ≥ 0`) solution of the two-link arm.
fn two_link_ik(model: &ManipulatorModel, target: &Vector2<f64>) -> std::result::Result<(Vector, bool), String> {
    let (l1, l2) = (model.links()[0].length, model.links()[1].length);
    let d = (target.norm_squared() - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if d.abs() > 1.0 + 1e-9 {
        return Err(format!(
            "target at distance {:.6} m is outside the reachable annulus",
            target.norm()
        ));
    }
    let d = d.clamp(-1.0, 1.0);
    let q2 = d.acos();
    let q1 = target.y.atan2(target.x) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    Ok((Vector::from_vec(vec![q1, q2]), d.abs() > NEAR_SINGULAR))
}

/// Two-link solution treating the last two links as one rigid segment.
fn initial_seed(model: &ManipulatorModel, target: &Vector2<f64>) -> Vector {
    let l = model.links();
    let (l1, l23) = (l[0].length, l[1].length + l[2].length);
    let d = ((target.norm_squared() - l1 * l1 - l23 * l23) / (2.0 * l1 * l23)).clamp(-1.0, 1.0);
    // keep a slight bend so the first Jacobian is well conditioned
    let q2 = d.acos().max(0.1);
    let q1 = target.y.atan2(target.x) - (l23 * q2.sin()).atan2(l1 + l23 * q2.cos());
    Vector::from_vec(vec![q1, q2, 0.0])
}

fn dls_ik(
    model: &ManipulatorModel,
    target: &Vector2<f64>,
    mut q: Vector,
) -> std::result::Result<(Vector, bool), String> {
    let lambda2 = DLS_DAMPING * DLS_DAMPING;
    for _ in 0..IK_MAX_ITERATIONS {
        let err = target - model.tip_position(&q);
        if err.norm() < IK_TOLERANCE {
            let jac = model.tip_jacobian(&q);
            let jjt = &jac * jac.transpose();
            // manipulability √det(J Jᵀ) relative to reach²
            let reach = model.reach();
            let near = jjt.determinant().max(0.0).sqrt() < 1e-6 * reach * reach;
            return Ok((q, near));
        }
        let jac = model.tip_jacobian(&q);
        let jjt = &jac * jac.transpose();
        let a = Matrix2::new(jjt[(0, 0)] + lambda2, jjt[(0, 1)], jjt[(1, 0)], jjt[(1, 1)] + lambda2);
        let y = a
            .try_inverse()
            .ok_or_else(|| "damped Jacobian is singular".to_string())?
            * err;
        q += jac.transpose() * Vector::from_vec(vec![y.x, y.y]);
    }
    Err(format!(
        "damped least squares did not converge (residual {:.3e} m)",
        (target - model.tip_position(&q)).norm()
    ))
}

/// Shifts each angle by a multiple of 2π to be closest to `prev`.
fn unwrap_angles(mut q: Vector, prev: &Vector) -> Vector {
    use std::f64::consts::TAU;
    for (qi, &pi) in q.iter_mut().zip(prev.iter()) {
        *qi -= TAU * ((*qi - pi) / TAU).round();
    }
    q
}
