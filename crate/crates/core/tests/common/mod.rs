//! Independent reference computations for the integration tests. Nothing
//! here calls the library's integrator or derivative code.

#![allow(dead_code)]

use foodchain::{DimensionalParams, ParameterSet};
use rand::Rng;

/// The vector field written out directly from the model equations.
pub fn field(p: &ParameterSet, u: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *u;
    [
        x * (1.0 - x - y / (p.a1 + x)),
        y * (-p.d1 + p.m1 * x / (p.a1 + x) - z / (p.a2 + y)),
        z * (-p.d2 + p.m2 * y / (p.a2 + y)),
    ]
}

/// The dimensional model before rescaling.
pub fn dimensional_field(q: &DimensionalParams, u: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *u;
    let f1 = x * y / (q.a1 + x);
    let f2 = y * z / (q.a2 + y);
    [
        q.r * x * (1.0 - x / q.k) - q.m1 / q.c1 * f1,
        -q.d1 * y + q.m1 * f1 - q.m2 / q.c2 * f2,
        -q.d2 * z + q.m2 * f2,
    ]
}

pub fn rk4<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], u: &[f64; N], h: f64) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| std::array::from_fn::<f64, N, _>(|i| a[i] + s * b[i]);
    let k1 = f(u);
    let k2 = f(&add(u, &k1, h / 2.0));
    let k3 = f(&add(u, &k2, h / 2.0));
    let k4 = f(&add(u, &k3, h));
    std::array::from_fn(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Fixed-step RK4 from `u` over `[0, t]` with `n` steps.
pub fn rk4_flow<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], u: &[f64; N], t: f64, n: usize) -> [f64; N] {
    let h = t / n as f64;
    (0..n).fold(*u, |v, _| rk4(f, &v, h))
}

/// Central-difference Jacobian of the model field.
pub fn fd_jacobian(p: &ParameterSet, u: &[f64; 3]) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    for c in 0..3 {
        let h = 1e-6 * u[c].abs().max(1.0);
        let (mut up, mut dn) = (*u, *u);
        up[c] += h;
        dn[c] -= h;
        let (fp, fm) = (field(p, &up), field(p, &dn));
        for r in 0..3 {
            j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// Third column of the monodromy matrix by perturbing `z` at the cycle
/// start and flowing both trajectories over one period.
pub fn fd_monodromy_z_column(p: &ParameterSet, start: &[f64; 3], period: f64) -> [f64; 3] {
    let h = 1e-6;
    let n = 60_000;
    let f = |u: &[f64; 3]| field(p, u);
    let mut up = *start;
    let mut dn = *start;
    up[2] += h;
    dn[2] -= h;
    let a = rk4_flow(&f, &up, period, n);
    let b = rk4_flow(&f, &dn, period, n);
    [0, 1, 2].map(|i| (a[i] - b[i]) / (2.0 * h))
}

/// Period of the planar cycle through `start` from fixed-step RK4: the mean
/// spacing of upward crossings of `x = level`, each located by a cubic
/// Hermite interpolant on the step that brackets it.
pub fn rk4_period(p: &ParameterSet, start: [f64; 2], level: f64, dt: f64, periods: usize) -> f64 {
    let f = |u: &[f64; 2]| {
        let g = field(p, &[u[0], u[1], 0.0]);
        [g[0], g[1]]
    };
    let mut u = start;
    let mut t = 0.0;
    let mut crossings = Vec::new();
    // skip a possible crossing at t = 0
    u = rk4(&f, &u, dt);
    t += dt;
    while crossings.len() <= periods {
        let v = rk4(&f, &u, dt);
        if u[0] < level && v[0] >= level {
            let (f0, f1) = (f(&u)[0], f(&v)[0]);
            let hermite = |s: f64| {
                let (s2, s3) = (s * s, s * s * s);
                (2.0 * s3 - 3.0 * s2 + 1.0) * u[0]
                    + (s3 - 2.0 * s2 + s) * dt * f0
                    + (-2.0 * s3 + 3.0 * s2) * v[0]
                    + (s3 - s2) * dt * f1
                    - level
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if hermite(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(t + 0.5 * (lo + hi) * dt);
        }
        u = v;
        t += dt;
    }
    (crossings[periods] - crossings[0]) / periods as f64
}

/// Largest Lyapunov exponent from the separation of two nearby
/// trajectories, renormalised to `d0` every `tau`.
pub fn two_trajectory_lyapunov(p: &ParameterSet, s0: [f64; 3], dt: f64, tau: f64, t_discard: f64, t_average: f64) -> f64 {
    let f = |u: &[f64; 3]| field(p, u);
    let d0 = 1e-8;
    let per = (tau / dt).round() as usize;
    let mut a = rk4_flow(&f, &s0, t_discard, (t_discard / dt).round() as usize);
    let mut b = [a[0] + d0, a[1], a[2]];
    let n = (t_average / tau).round() as usize;
    let mut sum = 0.0;
    for _ in 0..n {
        for _ in 0..per {
            a = rk4(&f, &a, dt);
            b = rk4(&f, &b, dt);
        }
        let d = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
        sum += (d / d0).ln();
        b = [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * d0 / d);
    }
    sum / (n as f64 * tau)
}

/// A parameter set with `d_i < m_i <= 1`.
pub fn random_bounded_params(rng: &mut impl Rng) -> ParameterSet {
    let a1 = rng.gen_range(0.05..1.5);
    let a2 = rng.gen_range(0.05..1.5);
    let m1 = rng.gen_range(0.2..=1.0);
    let m2 = rng.gen_range(0.2..=1.0);
    let d1 = m1 * rng.gen_range(0.05..0.95);
    let d2 = m2 * rng.gen_range(0.05..0.95);
    ParameterSet::new(a1, a2, d1, d2, m1, m2).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
