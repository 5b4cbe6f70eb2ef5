//! The limit cycle of the predator-free plane `z = 0`, its monodromy matrix
//! in the full system, and the resulting Floquet data.

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CycleError, ModelError};
use crate::integrator::hermite;
use crate::model::{derived, jacobian_array, prey_isocline, rhs_array, ParameterSet, State};
use crate::ode::{rk4_step, Dopri5, FnSystem, OdeSystem, StepOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Successive section returns closer than this (in state) end the search.
    pub delta_cycle: f64,
    pub max_returns: usize,
    /// Points per period in the resampled cycle (rounded up to even).
    pub samples: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_step: 0.05, delta_cycle: 1e-9, max_returns: 20_000, samples: 8192 }
    }
}

impl CycleOptions {
    fn step_options(&self) -> StepOptions {
        StepOptions { rtol: self.rtol, atol: self.atol, max_step: self.max_step, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub coordinate: String,
    pub level: f64,
    pub direction: String,
}

/// One period of the planar cycle, starting on the section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycle {
    pub period: f64,
    pub section: Section,
    pub y_max: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub x_min: f64,
    /// Distance between the last two section returns.
    pub convergence_residual: f64,
    pub returns: usize,
    /// Distance between the first and last sample.
    pub closure: f64,
    /// `samples[k]` is the state at `times[k] = k T / n`, `k = 0..=n`.
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub samples: Vec<State>,
    #[serde(skip)]
    pub derivatives: Vec<[f64; 3]>,
}

impl LimitCycle {
    pub fn spacing(&self) -> f64 {
        self.period / (self.samples.len() - 1) as f64
    }

    /// The cycle at time `t` (taken modulo the period), by Hermite interpolation.
    pub fn at(&self, t: f64) -> [f64; 3] {
        let h = self.spacing();
        let t = t.rem_euclid(self.period);
        let k = ((t / h) as usize).min(self.samples.len() - 2);
        hermite(
            self.times[k],
            &self.samples[k].to_array(),
            &self.derivatives[k],
            self.times[k + 1],
            &self.samples[k + 1].to_array(),
            &self.derivatives[k + 1],
            t,
        )
    }

    pub fn start(&self) -> State {
        self.samples[0]
    }
}

fn planar_field(p: ParameterSet) -> FnSystem<impl Fn(f64, &[f64; 2]) -> [f64; 2]> {
    FnSystem(move |_t: f64, u: &[f64; 2]| {
        let f = rhs_array(&p, &[u[0], u[1], 0.0]);
        [f[0], f[1]]
    })
}

/// `lambda1` if the planar cycle exists, i.e. `a1 < 1` and
/// `0 < lambda1 < (1 - a1) / 2`.
pub fn cycle_predicted(p: &ParameterSet) -> Result<f64, CycleError> {
    let dp = derived(p);
    let Some(l1) = dp.lambda1() else {
        return Err(CycleError::NoCyclePredicted("lambda1 undefined (m1 <= d1)".into()));
    };
    if p.a1 >= 1.0 {
        return Err(CycleError::NoCyclePredicted(format!("a1 = {} >= 1", p.a1)));
    }
    if !(l1 > 0.0 && l1 < dp.hopf_threshold) {
        return Err(CycleError::NoCyclePredicted(format!(
            "lambda1 = {l1} is not below (1 - a1)/2 = {}",
            dp.hopf_threshold
        )));
    }
    Ok(l1)
}

/// Finds the planar cycle starting just right of the boundary equilibrium.
pub fn find_h2_cycle(p: &ParameterSet, opts: &CycleOptions) -> Result<LimitCycle, CycleError> {
    let l1 = cycle_predicted(p)?;
    find_h2_cycle_from(p, [l1 + 0.01 * (1.0 - l1), prey_isocline(p.a1, l1)], opts)
}

/// Finds the planar cycle from an arbitrary start `(x0, y0)` with `x0, y0 > 0`.
pub fn find_h2_cycle_from(p: &ParameterSet, start: [f64; 2], opts: &CycleOptions) -> Result<LimitCycle, CycleError> {
    let l1 = cycle_predicted(p)?;
    if !(start[0] > 0.0 && start[1] > 0.0) {
        return Err(ModelError::NegativeState { index: 0, value: start[0].min(start[1]) }.into());
    }
    let field = planar_field(*p);
    let mut solver = Dopri5::new(&field, 0.0, start, opts.step_options())?;

    let mut prev: Option<(f64, [f64; 2])> = None;
    let mut residual = f64::INFINITY;
    let mut returns = 0usize;
    let mut before = (solver.t(), *solver.y(), *solver.dy());
    loop {
        solver.step(f64::INFINITY)?;
        let now = (solver.t(), *solver.y());
        if before.1[0] < l1 && now.1[0] >= l1 {
            let crossing = locate_crossing(l1, before, &solver);
            returns += 1;
            if let Some((tp, yp)) = prev {
                residual = (crossing.1[1] - yp[1]).abs().hypot(crossing.1[0] - yp[0]);
                if residual < opts.delta_cycle {
                    return resample(p, crossing.1, crossing.0 - tp, residual, returns, opts);
                }
            }
            if returns >= opts.max_returns {
                return Err(CycleError::NotConverged { returns, residual });
            }
            prev = Some(crossing);
        }
        before = (solver.t(), *solver.y(), *solver.dy());
    }
}

/// Crossing of `x = level` inside the last accepted step. When `x` increases
/// at the step start, `x` becomes the independent variable (`dt/dx = 1/x'`)
/// and a few RK4 steps land exactly on the section; otherwise the dense
/// output is bisected.
fn locate_crossing<S: OdeSystem<2>>(
    level: f64,
    before: (f64, [f64; 2], [f64; 2]),
    solver: &Dopri5<2, S>,
) -> (f64, [f64; 2]) {
    let (t0, y0, f0) = before;
    let field = solver.system();
    if f0[0] > 0.0 {
        let swapped = FnSystem(|x: f64, u: &[f64; 2]| {
            let f = field.eval(u[0], &[x, u[1]]);
            [1.0 / f[0], f[1] / f[0]]
        });
        let dx = (level - y0[0]) / 4.0;
        let mut u = [t0, y0[1]];
        for i in 0..4 {
            u = rk4_step(&swapped, y0[0] + i as f64 * dx, &u, dx);
        }
        let end = field.eval(u[0], &[level, u[1]]);
        if u.iter().all(|v| v.is_finite()) && end[0] > 0.0 && u[0] >= t0 && u[0] <= solver.t() {
            return (u[0], [level, u[1]]);
        }
    }
    let seg = solver.dense().expect("accepted step");
    let (mut lo, mut hi) = (t0, seg.t1());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if seg.eval(mid)[0] < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, seg.eval(t))
}

fn resample(
    p: &ParameterSet,
    s0: [f64; 2],
    period: f64,
    residual: f64,
    returns: usize,
    opts: &CycleOptions,
) -> Result<LimitCycle, CycleError> {
    let n = opts.samples.max(16).next_multiple_of(2);
    let field = planar_field(*p);
    let mut solver = Dopri5::new(&field, 0.0, s0, opts.step_options())?;
    let times: Vec<f64> = (0..=n).map(|k| if k == n { period } else { period * k as f64 / n as f64 }).collect();
    let mut pts: Vec<[f64; 2]> = vec![s0];
    let mut k = 1;
    solver.run_to(period, |s| {
        let seg = s.dense().unwrap();
        while k <= n && times[k] <= seg.t1() {
            pts.push(if times[k] == seg.t1() { *s.y() } else { seg.eval(times[k]) });
            k += 1;
        }
    })?;
    let samples: Vec<State> = pts.iter().map(|u| State::new_unchecked(u[0], u[1], 0.0)).collect();
    let derivatives: Vec<[f64; 3]> = samples.iter().map(|s| rhs_array(p, &s.to_array())).collect();
    let (y_min, y_max) = refined_extrema(&samples, |s| s.y);
    let (x_min, x_max) = refined_extrema(&samples, |s| s.x);
    let closure = samples[0].distance(&samples[n]);
    Ok(LimitCycle {
        period,
        section: Section { coordinate: "x".into(), level: s0[0], direction: "increasing".into() },
        y_max,
        y_min,
        x_max,
        x_min,
        convergence_residual: residual,
        returns,
        closure,
        times,
        samples,
        derivatives,
    })
}

/// Extremes of a periodic sample sequence, refined by a parabola through the
/// extreme sample and its neighbours.
fn refined_extrema(samples: &[State], f: impl Fn(&State) -> f64) -> (f64, f64) {
    let n = samples.len() - 1;
    let v: Vec<f64> = samples[..n].iter().map(f).collect();
    let refine = |i: usize| {
        let (a, b, c) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
        let denom = a - 2.0 * b + c;
        if denom == 0.0 {
            b
        } else {
            b - (a - c).powi(2) / (8.0 * denom)
        }
    };
    let imin = (0..n).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
    let imax = (0..n).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
    (refine(imin), refine(imax))
}

fn variational_options(c: &LimitCycle, opts: &CycleOptions) -> Result<StepOptions, CycleError> {
    let spacing = c.spacing();
    if spacing > opts.max_step {
        return Err(CycleError::InterpolationGap { spacing, max_step: opts.max_step });
    }
    Ok(opts.step_options())
}

/// `M(T)` for `M' = DF(gamma(t)) M`, `M(0) = I`, with `gamma` interpolated
/// from the cycle samples.
pub fn monodromy(p: &ParameterSet, c: &LimitCycle, opts: &CycleOptions) -> Result<[[f64; 3]; 3], CycleError> {
    let step = variational_options(c, opts)?;
    let sys = FnSystem(|t: f64, m: &[f64; 9]| {
        let j = jacobian_array(p, &c.at(t));
        let mut out = [0.0; 9];
        for r in 0..3 {
            for col in 0..3 {
                out[3 * r + col] = (0..3).map(|k| j[r][k] * m[3 * k + col]).sum();
            }
        }
        out
    });
    let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut solver = Dopri5::new(sys, 0.0, id, step)?;
    solver.run_to(c.period, |_| {})?;
    let m = solver.y();
    Ok([[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]])
}

/// Monodromy of the planar subsystem, integrating the cycle and its
/// variational equations together (no interpolation).
pub fn planar_monodromy(p: &ParameterSet, c: &LimitCycle, opts: &CycleOptions) -> Result<[[f64; 2]; 2], CycleError> {
    let sys = FnSystem(|_t: f64, u: &[f64; 6]| {
        let s = [u[0], u[1], 0.0];
        let f = rhs_array(p, &s);
        let j = jacobian_array(p, &s);
        [
            f[0],
            f[1],
            j[0][0] * u[2] + j[0][1] * u[4],
            j[0][0] * u[3] + j[0][1] * u[5],
            j[1][0] * u[2] + j[1][1] * u[4],
            j[1][0] * u[3] + j[1][1] * u[5],
        ]
    });
    let s0 = c.start();
    let mut solver = Dopri5::new(sys, 0.0, [s0.x, s0.y, 1.0, 0.0, 0.0, 1.0], opts.step_options())?;
    solver.run_to(c.period, |_| {})?;
    let u = solver.y();
    Ok([[u[2], u[3]], [u[4], u[5]]])
}

/// `integral_0^T (-d2 + m2 y / (a2 + y)) dt` over the cycle by composite Simpson.
pub fn transversal_integral(p: &ParameterSet, c: &LimitCycle) -> f64 {
    let n = c.samples.len() - 1;
    let h = c.spacing();
    let g = |s: &State| -p.d2 + p.m2 * s.y / (p.a2 + s.y);
    let mut acc = g(&c.samples[0]) + g(&c.samples[n]);
    for (k, s) in c.samples.iter().enumerate().take(n).skip(1) {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(s);
    }
    acc * h / 3.0
}

/// Relative tolerance for the agreement of the two `M33` computations.
pub const M33_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetResult {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(serialize_with = "crate::complex_json::serialize")]
    pub multipliers: [Complex64; 3],
    pub m33: f64,
    pub m33_closed_form: f64,
    pub transversal_average: f64,
    #[serde(rename = "stable_in_R3")]
    pub stable_in_r3: bool,
    pub monodromy: [[f64; 3]; 3],
    /// `|mu - 1|` for the multiplier closest to one.
    pub trivial_multiplier_error: f64,
    /// The multiplier of the planar block that is not the trivial one.
    pub in_plane_multiplier: f64,
}

pub fn floquet(p: &ParameterSet, c: &LimitCycle, opts: &CycleOptions) -> Result<FloquetResult, CycleError> {
    let m = monodromy(p, c, opts)?;
    let integral = transversal_integral(p, c);
    let m33_closed_form = integral.exp();
    let rel = (m[2][2] - m33_closed_form).abs() / m33_closed_form;
    if !(rel <= M33_TOLERANCE) {
        return Err(CycleError::Inconsistent { ode: m[2][2], quadrature: m33_closed_form, rel });
    }

    let eig = Matrix3::from_fn(|r, col| m[r][col]).complex_eigenvalues();
    let mut multipliers = [0, 1, 2].map(|i| Complex64::new(eig[i].re, eig[i].im));
    multipliers.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let trivial_multiplier_error = multipliers.iter().map(|mu| (mu - 1.0).norm()).fold(f64::INFINITY, f64::min);

    let block = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]).complex_eigenvalues();
    let in_plane = if (block[0] - 1.0).norm() > (block[1] - 1.0).norm() { block[0] } else { block[1] };
    let transversal_average = integral / c.period;
    Ok(FloquetResult {
        period: c.period,
        multipliers,
        m33: m[2][2],
        m33_closed_form,
        transversal_average,
        stable_in_r3: transversal_average < 0.0 && in_plane.norm() < 1.0,
        monodromy: m,
        trivial_multiplier_error,
        in_plane_multiplier: in_plane.re,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FCondition {
    pub y_m: f64,
    /// `a2 lambda2 / (a2 + y_M)`.
    pub lhs: f64,
    /// `(1 + a1)^3 / (4 a1)`.
    pub rhs: f64,
    pub holds: bool,
}

/// The sufficient condition for global stability of the planar cycle; `y_m`
/// defaults to the eventual bound `1 + 1/(4 d1)`.
pub fn f_condition(p: &ParameterSet, y_m: Option<f64>) -> Result<FCondition, ModelError> {
    let y_m = y_m.unwrap_or(1.0 + 1.0 / (4.0 * p.d1));
    if !(y_m > 0.0 && y_m.is_finite()) {
        return Err(ModelError::NonPositive { field: "y_M", value: y_m });
    }
    let l2 = derived(p).lambda2().ok_or(ModelError::UndefinedBreakEven("lambda2"))?;
    let lhs = p.a2 * l2 / (p.a2 + y_m);
    let rhs = (1.0 + p.a1).powi(3) / (4.0 * p.a1);
    Ok(FCondition { y_m, lhs, rhs, holds: lhs > rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::boundary_equilibria;

    fn section4(m2: f64) -> ParameterSet {
        ParameterSet::new(0.3, 0.9, 0.4, 0.01, 5.0 / 3.0, m2).unwrap()
    }

    fn hsu() -> ParameterSet {
        ParameterSet::new(0.24, 0.4, 0.3, 0.39, 0.5, 0.4).unwrap()
    }

    #[test]
    fn finds_the_planar_cycle() {
        let c = find_h2_cycle(&section4(0.033), &CycleOptions::default()).unwrap();
        assert!(c.convergence_residual < 1e-9);
        assert!((c.period - 21.60607).abs() < 1e-4, "{}", c.period);
        assert!((c.y_max - 1.4619).abs() < 1e-3 && (c.y_min - 0.0123).abs() < 1e-3);
        assert!(c.closure < 1e-8, "{}", c.closure);
        assert!(c.samples.iter().all(|s| s.z.to_bits() == 0 && s.x > 0.0 && s.y > 0.0));
        assert_eq!(c.section.level, derived(&section4(0.033)).lambda1().unwrap());
    }

    #[test]
    fn no_cycle_for_large_half_saturation() {
        let p = ParameterSet::new(1.5, 0.9, 0.4, 0.01, 5.0 / 3.0, 0.033).unwrap();
        assert!(matches!(find_h2_cycle(&p, &CycleOptions::default()), Err(CycleError::NoCyclePredicted(_))));
        let stable_exy = ParameterSet::new(0.3, 0.9, 0.4, 0.01, 0.6, 0.033).unwrap();
        assert!(matches!(cycle_predicted(&stable_exy), Err(CycleError::NoCyclePredicted(_))));
    }

    #[test]
    fn floquet_structure_and_transversal_sign() {
        let opts = CycleOptions::default();
        let c = find_h2_cycle(&section4(0.033), &opts).unwrap();
        for (m2, sign) in [(0.033, -1.0), (0.065, 1.0)] {
            let p = section4(m2);
            let f = floquet(&p, &c, &opts).unwrap();
            assert!(f.monodromy[2][0].abs() < 1e-8 && f.monodromy[2][1].abs() < 1e-8);
            assert!(f.trivial_multiplier_error < 1e-4, "{}", f.trivial_multiplier_error);
            assert!(f.transversal_average * sign > 0.0, "{m2}: {}", f.transversal_average);
            assert_eq!(f.m33.ln().signum(), f.transversal_average.signum());
            assert!(f.in_plane_multiplier.abs() < 1.0);
            assert_eq!(f.stable_in_r3, sign < 0.0);
        }
    }

    #[test]
    fn planar_block_matches_joint_integration() {
        let opts = CycleOptions::default();
        let p = section4(0.042);
        let c = find_h2_cycle(&p, &opts).unwrap();
        let m = monodromy(&p, &c, &opts).unwrap();
        let q = planar_monodromy(&p, &c, &opts).unwrap();
        for r in 0..2 {
            for col in 0..2 {
                assert!((m[r][col] - q[r][col]).abs() < 1e-6, "{r}{col}: {} vs {}", m[r][col], q[r][col]);
            }
        }
    }

    #[test]
    fn sparse_samples_are_rejected() {
        let opts = CycleOptions { samples: 64, ..Default::default() };
        let p = section4(0.033);
        let c = find_h2_cycle(&p, &opts).unwrap();
        let tight = CycleOptions { max_step: 0.01, ..opts };
        assert!(matches!(monodromy(&p, &c, &tight), Err(CycleError::InterpolationGap { .. })));
    }

    #[test]
    fn hsu_cycle_is_transversally_stable() {
        let opts = CycleOptions::default();
        let c = find_h2_cycle(&hsu(), &opts).unwrap();
        let f = floquet(&hsu(), &c, &opts).unwrap();
        assert!(f.transversal_average < 0.0);
        assert!(f.stable_in_r3);
    }

    #[test]
    fn cycle_is_unique_across_starts() {
        let p = section4(0.033);
        let opts = CycleOptions::default();
        let reference = find_h2_cycle(&p, &opts).unwrap();
        for k in 0..10 {
            let start = [0.1 + 0.08 * k as f64, 0.05 + 0.12 * k as f64];
            let c = find_h2_cycle_from(&p, start, &opts).unwrap();
            assert!((c.period - reference.period).abs() < 1e-6 * reference.period);
            assert!((c.y_max - reference.y_max).abs() < 1e-6);
        }
    }

    #[test]
    fn period_approaches_linear_value_near_hopf_threshold() {
        // lambda1 = (1 - a1)/2 - 1e-3 with a1 = 0.3, d1 = 0.4
        let (a1, d1) = (0.3, 0.4);
        let l1: f64 = 0.35 - 1e-3;
        let m1 = d1 + a1 * d1 / l1;
        let p = ParameterSet::new(a1, 0.9, d1, 0.01, m1, 0.033).unwrap();
        let c = find_h2_cycle(&p, &CycleOptions::default()).unwrap();
        let exy = boundary_equilibria(&p).into_iter().find(|e| e.kind == crate::EquilibriumKind::Exy).unwrap();
        let omega = exy.eigenvalues[0].im.abs();
        let linear = 2.0 * std::f64::consts::PI / omega;
        assert!((c.period - linear).abs() < 0.05 * linear, "{} vs {}", c.period, linear);
        assert!(c.y_max - c.y_min < 0.1);
    }

    #[test]
    fn f_condition_sides() {
        let f = f_condition(&hsu(), Some(1.833)).unwrap();
        assert!((f.lhs - 2.794).abs() < 1e-3 && (f.rhs - 1.986).abs() < 1e-3 && f.holds);
        let g = f_condition(&section4(0.033), None).unwrap();
        assert_eq!(g.y_m, 1.625);
        assert!((g.lhs - 0.9 * 0.391304347826087 / 2.525).abs() < 1e-12 && !g.holds);
        assert!((g.rhs - 1.83).abs() < 1e-3);
        // a2 -> infinity with lambda2 fixed: lhs -> lambda2
        let big = ParameterSet::new(0.3, 1e9, 0.4, 0.01, 5.0 / 3.0, 0.01 + 1e9 * 0.01 / 0.4).unwrap();
        let h = f_condition(&big, None).unwrap();
        assert!((h.lhs - 0.4).abs() < 1e-6);
        let extinct = ParameterSet::new(0.3, 0.9, 0.4, 0.05, 5.0 / 3.0, 0.03).unwrap();
        assert!(f_condition(&extinct, None).is_err());
    }
}
