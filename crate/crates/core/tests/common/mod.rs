//! Independent reference implementations used as test oracles.
//!
//! Everything here is written from the planar kinematics directly and shares
//! no code with the library.

#![allow(dead_code)]

use dobsim::cli::{execute, parse_scenario, presets, RunResult, ScenarioFile};
use dobsim::dynamics::{LinkParams, Matrix, Vector};
use dobsim::par::Exec;

/// Absolute link angles θ_k = q_0 + … + q_k.
fn angles(q: &Vector) -> Vec<f64> {
    q.iter()
        .scan(0.0, |acc, &qi| {
            *acc += qi;
            Some(*acc)
        })
        .collect()
}

/// Center-of-mass positions of every link.
pub fn com_positions(links: &[LinkParams], q: &Vector) -> Vec<[f64; 2]> {
    let th = angles(q);
    let mut base = [0.0, 0.0];
    let mut out = Vec::new();
    for (k, link) in links.iter().enumerate() {
        out.push([
            base[0] + link.com_offset * th[k].cos(),
            base[1] + link.com_offset * th[k].sin(),
        ]);
        base[0] += link.length * th[k].cos();
        base[1] += link.length * th[k].sin();
    }
    out
}

/// Kinetic energy from the center-of-mass velocities and link spin rates.
pub fn kinetic_energy(links: &[LinkParams], q: &Vector, qdot: &Vector) -> f64 {
    let th = angles(q);
    let om = angles(qdot);
    let mut base_v = [0.0, 0.0];
    let mut t = 0.0;
    for (k, link) in links.iter().enumerate() {
        let v = [
            base_v[0] - link.com_offset * om[k] * th[k].sin(),
            base_v[1] + link.com_offset * om[k] * th[k].cos(),
        ];
        t += 0.5 * link.mass * (v[0] * v[0] + v[1] * v[1]) + 0.5 * link.inertia_com * om[k] * om[k];
        base_v[0] -= link.length * om[k] * th[k].sin();
        base_v[1] += link.length * om[k] * th[k].cos();
    }
    t
}

pub fn potential_energy(links: &[LinkParams], gravity: f64, q: &Vector) -> f64 {
    com_positions(links, q)
        .iter()
        .zip(links)
        .map(|(p, l)| l.mass * gravity * p[1])
        .sum()
}

/// Inertia matrix recovered from the kinetic energy by polarization:
/// `M_ij = T(e_i + e_j) − T(e_i) − T(e_j)`, exact for a quadratic form.
pub fn inertia_from_energy(links: &[LinkParams], q: &Vector) -> Matrix {
    let n = q.len();
    let e = |i: usize| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * kinetic_energy(links, q, &e(i))
        } else {
            kinetic_energy(links, q, &(e(i) + e(j))) - kinetic_energy(links, q, &e(i)) - kinetic_energy(links, q, &e(j))
        }
    })
}

/// Central-difference gradient.
pub fn gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    Vector::from_fn(x.len(), |i, _| {
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

/// `dM/dt` along `q̇` by central differences of an inertia function.
pub fn inertia_rate(m: impl Fn(&Vector) -> Matrix, q: &Vector, qdot: &Vector, h: f64) -> Matrix {
    (m(&(q + qdot * h)) - m(&(q - qdot * h))) / (2.0 * h)
}

/// Joint torque required by the Euler–Lagrange equations for the given
/// motion, built only from the energy functions above.
pub fn lagrange_torque(links: &[LinkParams], gravity: f64, q: &Vector, qdot: &Vector, qddot: &Vector) -> Vector {
    let h = 1e-6;
    let m = inertia_from_energy(links, q);
    let mdot = inertia_rate(|x| inertia_from_energy(links, x), q, qdot, h);
    let dt_dq = gradient(|x| kinetic_energy(links, x, qdot), q, h);
    let dv_dq = gradient(|x| potential_energy(links, gravity, x), q, h);
    m * qddot + mdot * qdot - dt_dq + dv_dq
}

/// The three-link bench arm parameters, written out independently.
pub fn bench_links() -> Vec<LinkParams> {
    [(0.67, 624.0), (0.67, 624.0), (0.62, 622.0)]
        .iter()
        .map(|&(m, i_gcm2)| LinkParams {
            length: 0.06,
            mass: m,
            com_offset: 0.03,
            // 1 g·cm² = 1e-3 kg · 1e-4 m²
            inertia_com: i_gcm2 * 1e-7,
        })
        .collect()
}

pub fn preset_file(name: &str) -> ScenarioFile {
    let p = presets::find(name).unwrap_or_else(|| panic!("no preset {name}"));
    parse_scenario(p.json).unwrap()
}

pub fn run_preset(name: &str) -> RunResult {
    execute(&preset_file(name), Exec::Sequential).unwrap()
}

pub const STABLE_PRESETS: [&str; 5] = [
    "theorem3_regulation",
    "theorem2_circle",
    "fig6_diag_mn_sweep",
    "fig8_offdiag_mn",
    "fig9_bandwidth_x_inertia",
];

pub const ALL_PRESETS: [&str; 6] = [
    "theorem3_regulation",
    "theorem2_circle",
    "fig4a_unstable",
    "fig6_diag_mn_sweep",
    "fig8_offdiag_mn",
    "fig9_bandwidth_x_inertia",
];
