//! Adaptive integration of the food chain, trajectory storage and attractor
//! classification.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::equilibria::{Equilibrium, EquilibriumKind};
use crate::error::{Error, IntegrationError};
use crate::model::{rhs_array, ParameterSet, State, EPS_NEG};
use crate::ode::{Dopri5, OdeSystem, StepOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub t_end: f64,
    pub t_transient: f64,
    pub dense_output_dt: f64,
    pub seed: u64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: 1.0,
            t_end: 20_000.0,
            t_transient: 5_000.0,
            dense_output_dt: 0.05,
            seed: 0,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |m: String| Err(IntegrationError::InvalidConfig(m));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad(format!("rtol and atol must be positive (got {}, {})", self.rtol, self.atol));
        }
        if !(self.max_step > 0.0 && self.dense_output_dt > 0.0) {
            return bad("max_step and dense_output_dt must be positive".into());
        }
        if !(self.t_transient >= 0.0 && self.t_transient < self.t_end && self.t_end.is_finite()) {
            return bad(format!(
                "need 0 <= t_transient < t_end (got {} and {})",
                self.t_transient, self.t_end
            ));
        }
        Ok(())
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions { rtol: self.rtol, atol: self.atol, max_step: self.max_step, max_steps: self.max_steps }
    }
}

/// The food chain vector field with some coordinates frozen at zero.
///
/// Coordinates that start at zero are removed from the system, so the
/// invariant faces stay exactly (bitwise) zero.
#[derive(Debug, Clone, Copy)]
pub struct ModelField {
    pub p: ParameterSet,
    pub active: [bool; 3],
}

impl ModelField {
    pub fn new(p: ParameterSet, s0: &[f64; 3]) -> Self {
        Self { p, active: s0.map(|v| v > 0.0) }
    }
}

impl OdeSystem<3> for ModelField {
    fn eval(&self, _t: f64, y: &[f64; 3]) -> [f64; 3] {
        let mut f = rhs_array(&self.p, y);
        for i in 0..3 {
            if !self.active[i] {
                f[i] = 0.0;
            }
        }
        f
    }

    fn admissible(&self, y: &[f64; 3]) -> bool {
        y.iter().all(|v| *v >= -EPS_NEG)
    }

    // Negative overshoots and subnormal values are set to zero.
    fn project(&self, y: &mut [f64; 3]) {
        for i in 0..3 {
            if !self.active[i] || y[i] < f64::MIN_POSITIVE {
                y[i] = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTag {
    /// From here on every sample satisfies the attracting-set bounds.
    AttractingSetEntry,
    /// z first fell below the extinction threshold.
    ZBelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub tag: EventTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: ParameterSet,
    pub initial: State,
    pub config: IntegratorConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nfev: usize,
    pub naccept: usize,
    pub nreject: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub events: Vec<Event>,
    pub provenance: Provenance,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    /// Writes `#`-prefixed JSON provenance lines followed by `t,x,y,z` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&self.provenance).map_err(io::Error::other)?)?;
        writeln!(w, "# {}", serde_json::to_string(&self.stats).map_err(io::Error::other)?)?;
        writeln!(w, "t,x,y,z")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{t},{},{},{}", s.x, s.y, s.z)?;
        }
        Ok(())
    }
}

/// Integrates from `s0`, sampling every `dense_output_dt` (plus `t_end`).
pub fn integrate(p: &ParameterSet, s0: &State, cfg: &IntegratorConfig) -> Result<Trajectory, IntegrationError> {
    cfg.validate()?;
    let y0 = s0.to_array();
    if y0.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(IntegrationError::InvalidConfig(format!("initial state must be nonnegative, got {s0}")));
    }
    let field = ModelField::new(*p, &y0);
    let mut tr = Trajectory {
        times: vec![0.0],
        states: vec![*s0],
        events: Vec::new(),
        provenance: Provenance { params: *p, initial: *s0, config: *cfg },
        stats: SolverStats::default(),
    };
    let mut solver = Dopri5::new(field, 0.0, y0, cfg.step_options())?;
    tr.states[0] = State::new_unchecked(solver.y()[0], solver.y()[1], solver.y()[2]);

    let dt = cfg.dense_output_dt;
    let mut k = 1usize;
    let result = solver.run_to(cfg.t_end, |s| {
        let seg = s.dense().expect("dense output after an accepted step");
        loop {
            let t = (k as f64 * dt).min(cfg.t_end);
            if t > seg.t1() || t <= *tr.times.last().unwrap() {
                break;
            }
            let mut y = if t == seg.t1() { *s.y() } else { seg.eval(t) };
            s.system().project(&mut y);
            tr.times.push(t);
            tr.states.push(State::new_unchecked(y[0], y[1], y[2]));
            if t >= cfg.t_end {
                break;
            }
            k += 1;
        }
    });
    tr.stats = SolverStats { nfev: solver.nfev, naccept: solver.naccept, nreject: solver.nreject };
    tr.events = detect_events(&tr, p);
    match result {
        Ok(()) => Ok(tr),
        Err(f) => Err(IntegrationError::from(f).with_partial(tr)),
    }
}

fn detect_events(tr: &Trajectory, p: &ParameterSet) -> Vec<Event> {
    let mut events = Vec::new();
    let bounds = attracting_bounds(p);
    if let Some(i) = last_violation(&tr.states, &bounds, ATTRACTING_TOL).map_or(Some(0), |i| {
        (i + 1 < tr.len()).then_some(i + 1)
    }) {
        events.push(Event { t: tr.times[i], tag: EventTag::AttractingSetEntry });
    }
    let initially_positive = tr.states.first().is_some_and(|s| s.z >= DELTA_Z);
    if initially_positive {
        if let Some(i) = tr.states.iter().position(|s| s.z < DELTA_Z) {
            events.push(Event { t: tr.times[i], tag: EventTag::ZBelowThreshold });
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    events
}

/// Default equilibrium-distance threshold.
pub const DELTA_EQ: f64 = 1e-5;
/// Default z-extinction threshold.
pub const DELTA_Z: f64 = 1e-4;
/// Default oscillation-amplitude threshold.
pub const DELTA_OSC: f64 = 1e-3;
/// Default recurrence tolerance for section returns.
pub const DELTA_RECURRENCE: f64 = 1e-3;

const ATTRACTING_TOL: f64 = 1e-6;

/// Bounds on `x`, `x + y` and `x + y + z` that every trajectory eventually
/// satisfies.
pub fn attracting_bounds(p: &ParameterSet) -> [f64; 3] {
    let b2 = 1.0 + 1.0 / (4.0 * p.d1);
    [1.0, b2, b2 + 1.0 / (4.0 * p.d2)]
}

pub fn in_attracting_set(s: &State, bounds: &[f64; 3], tol: f64) -> bool {
    s.x <= bounds[0] + tol && s.x + s.y <= bounds[1] + tol && s.x + s.y + s.z <= bounds[2] + tol
}

fn last_violation(states: &[State], bounds: &[f64; 3], tol: f64) -> Option<usize> {
    states.iter().rposition(|s| !in_attracting_set(s, bounds, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttractingSetCheck {
    pub inside: bool,
    /// Time after which every sample lies in the set.
    pub first_entry_time: Option<f64>,
    pub bounds: [f64; 3],
    pub tol: f64,
}

/// Whether the tail (`t >= t_transient`) stays inside the attracting set.
pub fn attracting_set_check(tr: &Trajectory, p: &ParameterSet) -> AttractingSetCheck {
    let bounds = attracting_bounds(p);
    let tail = tr.index_at(tr.provenance.config.t_transient);
    let inside = tr.states[tail..].iter().all(|s| in_attracting_set(s, &bounds, ATTRACTING_TOL));
    let first_entry_time = match last_violation(&tr.states, &bounds, ATTRACTING_TOL) {
        None => tr.times.first().copied(),
        Some(i) => tr.times.get(i + 1).copied(),
    };
    AttractingSetCheck { inside, first_entry_time, bounds, tol: ATTRACTING_TOL }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub delta_eq: f64,
    pub delta_z: f64,
    pub delta_osc: f64,
    pub recurrence: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { delta_eq: DELTA_EQ, delta_z: DELTA_Z, delta_osc: DELTA_OSC, recurrence: DELTA_RECURRENCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorKind {
    Equilibrium,
    BoundaryCycle,
    InteriorCycle,
    ChaoticOrUndetermined,
    ZExtinctEquilibrium,
}

impl std::fmt::Display for AttractorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttractorKind::Equilibrium => "equilibrium",
            AttractorKind::BoundaryCycle => "boundary_cycle",
            AttractorKind::InteriorCycle => "interior_cycle",
            AttractorKind::ChaoticOrUndetermined => "chaotic_or_undetermined",
            AttractorKind::ZExtinctEquilibrium => "z_extinct_equilibrium",
        })
    }
}

/// A periodic orbit seen in the tail of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleRef {
    pub period: f64,
    /// Number of section crossings per period.
    pub returns_per_period: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub z_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttractorTarget {
    Equilibrium(Equilibrium),
    Cycle(CycleRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailDiagnostics {
    /// `max - min` of x, y, z over the tail.
    pub amplitude: [f64; 3],
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub mean: [f64; 3],
    pub z_mean: f64,
    pub final_state: State,
    pub section_returns: usize,
    /// Largest distance between corresponding section returns, when checked.
    pub recurrence_residual: Option<f64>,
    pub t_transient: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorVerdict {
    pub kind: AttractorKind,
    pub target: Option<AttractorTarget>,
    pub diagnostics: TailDiagnostics,
    pub thresholds: Thresholds,
}

impl AttractorVerdict {
    pub fn period(&self) -> Option<f64> {
        match &self.target {
            Some(AttractorTarget::Cycle(c)) => Some(c.period),
            _ => None,
        }
    }
}

/// Cubic Hermite interpolation between `(t0, y0, f0)` and `(t1, y1, f1)`.
pub fn hermite<const N: usize>(
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    t1: f64,
    y1: &[f64; N],
    f1: &[f64; N],
    t: f64,
) -> [f64; N] {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    std::array::from_fn(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
}

/// Upward crossings of `x = level` in samples `[from..]`, located on the
/// Hermite interpolant. Returns `(t, state)` pairs.
pub fn section_crossings(tr: &Trajectory, from: usize, level: f64) -> Vec<(f64, [f64; 3])> {
    let p = tr.provenance.params;
    let mut out = Vec::new();
    for i in from.max(1)..tr.len() {
        let (a, b) = (tr.states[i - 1].to_array(), tr.states[i].to_array());
        if !(a[0] < level && b[0] >= level) {
            continue;
        }
        let (t0, t1) = (tr.times[i - 1], tr.times[i]);
        let (fa, fb) = (rhs_array(&p, &a), rhs_array(&p, &b));
        let (mut lo, mut hi) = (t0, t1);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if hermite(t0, &a, &fa, t1, &b, &fb, mid)[0] < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * t1.abs().max(1.0) {
                break;
            }
        }
        let t = 0.5 * (lo + hi);
        out.push((t, hermite(t0, &a, &fa, t1, &b, &fb, t)));
    }
    out
}

const RECURRENCE_WINDOW: usize = 40;
const MAX_RETURNS_PER_PERIOD: usize = 4;

/// Classifies the tail (`t >= t_transient`) of a trajectory.
pub fn classify_attractor(tr: &Trajectory, eqs: &[Equilibrium], th: &Thresholds) -> Result<AttractorVerdict, Error> {
    let cfg = tr.provenance.config;
    let t_end = tr.times.last().copied().unwrap_or(0.0);
    let start = tr.index_at(cfg.t_transient);
    if t_end <= cfg.t_transient || tr.len() < start + 2 {
        return Err(Error::usage(format!(
            "trajectory ends at t = {t_end}, before the transient t_transient = {}",
            cfg.t_transient
        )));
    }
    let tail = &tr.states[start..];
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    let mut sum = [0.0; 3];
    for s in tail {
        for (i, v) in s.to_array().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
            sum[i] += v;
        }
    }
    let mean = sum.map(|v| v / tail.len() as f64);
    let amplitude: [f64; 3] = std::array::from_fn(|i| max[i] - min[i]);
    let final_state = *tail.last().unwrap();
    let mut diag = TailDiagnostics {
        amplitude,
        min,
        max,
        mean,
        z_mean: mean[2],
        final_state,
        section_returns: 0,
        recurrence_residual: None,
        t_transient: cfg.t_transient,
        t_end,
    };
    let verdict = |kind, target, diag| AttractorVerdict { kind, target, diagnostics: diag, thresholds: *th };

    let osc = amplitude.iter().cloned().fold(0.0, f64::max);
    if osc < th.delta_osc {
        let nearest = eqs
            .iter()
            .map(|e| (e.coords.distance(&final_state), e))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        return Ok(match nearest {
            Some((d, e)) if d < th.delta_eq => {
                let kind = if e.kind == EquilibriumKind::Interior {
                    AttractorKind::Equilibrium
                } else if e.coords.z == 0.0 {
                    AttractorKind::ZExtinctEquilibrium
                } else {
                    AttractorKind::Equilibrium
                };
                verdict(kind, Some(AttractorTarget::Equilibrium(e.clone())), diag)
            }
            _ => verdict(AttractorKind::ChaoticOrUndetermined, None, diag),
        });
    }

    let crossings = section_crossings(tr, start, mean[0]);
    diag.section_returns = crossings.len();
    let Some((k, residual)) = recurrence(&crossings, th.recurrence) else {
        diag.recurrence_residual = best_residual(&crossings);
        return Ok(verdict(AttractorKind::ChaoticOrUndetermined, None, diag));
    };
    diag.recurrence_residual = Some(residual);
    let n = crossings.len();
    let spans = (n - 1 - RECURRENCE_WINDOW.min(n - 1 - k)..n - k).map(|i| crossings[i + k].0 - crossings[i].0);
    let count = spans.len();
    let period = spans.sum::<f64>() / count as f64;
    let cycle = CycleRef { period, returns_per_period: k, y_min: min[1], y_max: max[1], z_mean: mean[2] };
    let kind = if max[2] < th.delta_z && amplitude[0].max(amplitude[1]) > th.delta_osc {
        AttractorKind::BoundaryCycle
    } else if min[2] > th.delta_z {
        AttractorKind::InteriorCycle
    } else {
        AttractorKind::ChaoticOrUndetermined
    };
    let target = (kind != AttractorKind::ChaoticOrUndetermined).then_some(AttractorTarget::Cycle(cycle));
    Ok(verdict(kind, target, diag))
}

/// Smallest `k <= 4` such that the last returns repeat with lag `k`.
fn recurrence(c: &[(f64, [f64; 3])], tol: f64) -> Option<(usize, f64)> {
    for k in 1..=MAX_RETURNS_PER_PERIOD {
        if c.len() < RECURRENCE_WINDOW / 2 + k {
            return None;
        }
        let r = lag_residual(c, k);
        if r < tol {
            return Some((k, r));
        }
    }
    None
}

fn lag_residual(c: &[(f64, [f64; 3])], k: usize) -> f64 {
    let n = c.len();
    let first = n.saturating_sub(RECURRENCE_WINDOW + k);
    (first..n - k)
        .map(|i| {
            let (a, b) = (c[i].1, c[i + k].1);
            ((a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        })
        .fold(0.0, f64::max)
}

fn best_residual(c: &[(f64, [f64; 3])]) -> Option<f64> {
    (1..=MAX_RETURNS_PER_PERIOD).filter(|&k| c.len() > k).map(|k| lag_residual(c, k)).min_by(f64::total_cmp)
}
