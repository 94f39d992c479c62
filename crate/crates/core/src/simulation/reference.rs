//! Joint-space reference trajectories.

use crate::controller::ReferenceSample;
use crate::dynamics::Vector;
use crate::error::{check_dim, Error, Result};

/// Default time constant of each lag stage of a smoothed step, s.
pub const DEFAULT_SMOOTHING: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Raw step from `start` to `target` at `t_step`. Velocity and
    /// acceleration references are zero; the position jumps.
    Step { start: Vector, target: Vector, t_step: f64 },
    /// Step passed through three cascaded first-order lags of time constant
    /// `time_constant`, so position, velocity and acceleration are continuous.
    SmoothedStep {
        start: Vector,
        target: Vector,
        t_step: f64,
        time_constant: f64,
    },
    /// `q = center + amplitude ∘ sin(ω t + phase)` with `ω = 2π / period`.
    JointCircle {
        center: Vector,
        amplitude: Vector,
        period: f64,
        phase: Vector,
    },
    /// Uniformly spaced samples interpolated piecewise by quintic Hermite
    /// polynomials.
    Samples(SampledPath),
}

impl Reference {
    pub fn dof(&self) -> usize {
        match self {
            Reference::Step { start, .. } | Reference::SmoothedStep { start, .. } => start.len(),
            Reference::JointCircle { center, .. } => center.len(),
            Reference::Samples(path) => path.dof(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Reference::Step { start, target, t_step } => {
                check_dim("step target", start.len(), target.len())?;
                nonneg("step time", *t_step)
            }
            Reference::SmoothedStep {
                start,
                target,
                t_step,
                time_constant,
            } => {
                check_dim("step target", start.len(), target.len())?;
                nonneg("step time", *t_step)?;
                positive("smoothing time constant", *time_constant)
            }
            Reference::JointCircle {
                center,
                amplitude,
                period,
                phase,
            } => {
                check_dim("circle amplitude", center.len(), amplitude.len())?;
                check_dim("circle phase", center.len(), phase.len())?;
                positive("circle period", *period)
            }
            Reference::Samples(path) => {
                if path.q.len() < 2 {
                    return Err(Error::Config("sampled reference needs at least two samples".into()));
                }
                positive("sample spacing", path.h)
            }
        }
    }

    /// `false` only for the raw step, whose position is discontinuous.
    pub fn is_continuous(&self) -> bool {
        !matches!(self, Reference::Step { .. })
    }

    /// Reference at time `t`; derivatives are exact derivatives of the
    /// returned position.
    pub fn sample(&self, t: f64) -> ReferenceSample {
        match self {
            Reference::Step { start, target, t_step } => {
                ReferenceSample::hold(if t < *t_step { start.clone() } else { target.clone() })
            }
            Reference::SmoothedStep {
                start,
                target,
                t_step,
                time_constant,
            } => {
                if t <= *t_step {
                    return ReferenceSample::hold(start.clone());
                }
                let s = (t - t_step) / time_constant;
                let decay = (-s).exp();
                let delta = target - start;
                let pos = 1.0 - decay * (1.0 + s + 0.5 * s * s);
                let vel = decay * 0.5 * s * s / time_constant;
                let acc = decay * (s - 0.5 * s * s) / (time_constant * time_constant);
                ReferenceSample {
                    q: start + &delta * pos,
                    qdot: &delta * vel,
                    qddot: &delta * acc,
                }
            }
            Reference::JointCircle {
                center,
                amplitude,
                period,
                phase,
            } => {
                let w = std::f64::consts::TAU / period;
                let n = center.len();
                let arg = Vector::from_fn(n, |i, _| w * t + phase[i]);
                let sin = arg.map(f64::sin);
                let cos = arg.map(f64::cos);
                let offset = amplitude.component_mul(&sin);
                ReferenceSample {
                    q: center + &offset,
                    qdot: amplitude.component_mul(&cos) * w,
                    qddot: -offset * (w * w),
                }
            }
            Reference::Samples(path) => path.sample(t),
        }
    }
}

/// Convenience wrapper matching [`Reference::sample`].
pub fn reference_sample(reference: &Reference, t: f64) -> ReferenceSample {
    reference.sample(t)
}

fn nonneg(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be non-negative, got {v}")))
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

/// Joint samples at `t0 + k h` with node velocities and accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub t0: f64,
    pub h: f64,
    pub q: Vec<Vector>,
    pub qdot: Vec<Vector>,
    pub qddot: Vec<Vector>,
}

impl SampledPath {
    /// Builds node derivatives with fourth-order central differences. The
    /// first and last two samples only serve as stencil support, so the
    /// returned path starts at `t0 + 2h`.
    pub fn from_positions(t0: f64, h: f64, q: Vec<Vector>) -> Result<Self> {
        if q.len() < 5 {
            return Err(Error::Config("need at least five samples to differentiate".into()));
        }
        let n = q.len();
        let d1 = |i: usize| (&q[i - 2] - &q[i - 1] * 8.0 + &q[i + 1] * 8.0 - &q[i + 2]) / (12.0 * h);
        let d2 =
            |i: usize| (-&q[i - 2] + &q[i - 1] * 16.0 - &q[i] * 30.0 + &q[i + 1] * 16.0 - &q[i + 2]) / (12.0 * h * h);
        let qdot = (2..n - 2).map(d1).collect();
        let qddot = (2..n - 2).map(d2).collect();
        Ok(Self {
            t0: t0 + 2.0 * h,
            h,
            q: q[2..n - 2].to_vec(),
            qdot,
            qddot,
        })
    }

    pub fn dof(&self) -> usize {
        self.q.first().map_or(0, |v| v.len())
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h * (self.q.len() - 1) as f64
    }

    /// Quintic Hermite interpolation; holds the end samples outside the
    /// covered interval.
    pub fn sample(&self, t: f64) -> ReferenceSample {
        let last = self.q.len() - 1;
        if t <= self.t0 {
            return ReferenceSample {
                q: self.q[0].clone(),
                qdot: self.qdot[0].clone(),
                qddot: self.qddot[0].clone(),
            };
        }
        if t >= self.t_end() {
            return ReferenceSample::hold(self.q[last].clone());
        }
        let x = (t - self.t0) / self.h;
        let i = (x.floor() as usize).min(last - 1);
        let u = x - i as f64;
        let h = self.h;
        let (p0, p1) = (&self.q[i], &self.q[i + 1]);
        let (v0, v1) = (&self.qdot[i] * h, &self.qdot[i + 1] * h);
        let (a0, a1) = (&self.qddot[i] * (h * h), &self.qddot[i + 1] * (h * h));
        let dp = p1 - p0;
        let c2 = &a0 * 0.5;
        let c3 = &dp * 10.0 - &v0 * 6.0 - &v1 * 4.0 - (&a0 * 3.0 - &a1) * 0.5;
        let c4 = &dp * -15.0 + &v0 * 8.0 + &v1 * 7.0 + (&a0 * 3.0 - &a1 * 2.0) * 0.5;
        let c5 = &dp * 6.0 - (&v0 + &v1) * 3.0 - (&a0 - &a1) * 0.5;
        let (u2, u3, u4) = (u * u, u * u * u, u * u * u * u);
        let u5 = u4 * u;
        let q = p0 + &v0 * u + &c2 * u2 + &c3 * u3 + &c4 * u4 + &c5 * u5;
        let dq = &v0 + &c2 * (2.0 * u) + &c3 * (3.0 * u2) + &c4 * (4.0 * u3) + &c5 * (5.0 * u4);
        let ddq = &c2 * 2.0 + &c3 * (6.0 * u) + &c4 * (12.0 * u2) + &c5 * (20.0 * u3);
        ReferenceSample {
            q,
            qdot: dq / h,
            qddot: ddq / (h * h),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn settled_step_is_fixed_point() {
        let r = Reference::SmoothedStep {
            start: Vector::zeros(2),
            target: Vector::from_vec(vec![0.5, -0.3]),
            t_step: 0.25,
            time_constant: DEFAULT_SMOOTHING,
        };
        let s = r.sample(10.0);
        assert!((s.q - Vector::from_vec(vec![0.5, -0.3])).amax() < 1e-12);
        assert!(s.qdot.amax() < 1e-12);
        assert!(s.qddot.amax() < 1e-12);
        let before = r.sample(0.1);
        assert_eq!(before.q, Vector::zeros(2));
    }

    #[test]
    fn smoothed_step_is_continuous_at_onset() {
        let r = Reference::SmoothedStep {
            start: Vector::zeros(1),
            target: Vector::from_element(1, 1.0),
            t_step: 0.0,
            time_constant: 0.02,
        };
        let s = r.sample(1e-9);
        assert!(s.q[0].abs() < 1e-12);
        assert!(s.qdot[0].abs() < 1e-9);
        assert!(s.qddot[0].abs() < 1e-3);
    }

    #[test]
    fn smoothed_step_derivatives_match_differences() {
        let r = Reference::SmoothedStep {
            start: Vector::from_element(1, 0.2),
            target: Vector::from_element(1, 1.0),
            t_step: 0.1,
            time_constant: 0.02,
        };
        for &h in &[1e-3, 5e-4] {
            let mut worst: f64 = 0.0;
            for k in 0..200 {
                let t = 0.1 + 0.0013 * k as f64 + 0.01;
                let fd = (r.sample(t + h).q[0] - r.sample(t - h).q[0]) / (2.0 * h);
                worst = worst.max((fd - r.sample(t).qdot[0]).abs());
            }
            // O(h²) central-difference error with |q'''| ≲ 0.8/τ³
            assert!(worst < h * h * 0.8 / 0.02f64.powi(3), "h = {h}: {worst}");
        }
    }

    #[test]
    fn joint_circle_acceleration() {
        let center = Vector::from_vec(vec![0.3, -0.2]);
        let r = Reference::JointCircle {
            center: center.clone(),
            amplitude: Vector::from_vec(vec![0.1, 0.2]),
            period: 2.0,
            phase: Vector::from_vec(vec![0.0, 1.0]),
        };
        let w = std::f64::consts::PI;
        for t in [0.0, 0.3, 1.7] {
            let s = r.sample(t);
            let expected = -(&s.q - &center) * (w * w);
            assert!((s.qddot - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn quintic_interpolation_reproduces_quintic() {
        let f = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) - 0.3 * t.powi(4) + 0.1 * t.powi(5);
        let df = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t - 1.2 * t.powi(3) + 0.5 * t.powi(4);
        let ddf = |t: f64| -2.0 + 3.0 * t - 3.6 * t * t + 2.0 * t.powi(3);
        let h = 0.25;
        let nodes: Vec<f64> = (0..9).map(|k| k as f64 * h).collect();
        let path = SampledPath {
            t0: 0.0,
            h,
            q: nodes.iter().map(|&t| Vector::from_element(1, f(t))).collect(),
            qdot: nodes.iter().map(|&t| Vector::from_element(1, df(t))).collect(),
            qddot: nodes.iter().map(|&t| Vector::from_element(1, ddf(t))).collect(),
        };
        for k in 0..50 {
            let t = 0.037 * k as f64;
            let s = path.sample(t);
            assert_relative_eq!(s.q[0], f(t), epsilon = 1e-12);
            assert_relative_eq!(s.qdot[0], df(t), epsilon = 1e-11);
            assert_relative_eq!(s.qddot[0], ddf(t), epsilon = 1e-10);
        }
    }

    #[test]
    fn differentiated_samples() {
        let h = 1e-3;
        let q: Vec<Vector> = (0..2000)
            .map(|k| Vector::from_element(1, (k as f64 * h).sin()))
            .collect();
        let path = SampledPath::from_positions(0.0, h, q).unwrap();
        assert_relative_eq!(path.t0, 2e-3);
        let s = path.sample(1.0);
        assert_relative_eq!(s.q[0], 1f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(s.qdot[0], 1f64.cos(), epsilon = 1e-9);
        assert_relative_eq!(s.qddot[0], -1f64.sin(), epsilon = 1e-6);
    }
}
