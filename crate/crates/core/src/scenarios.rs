//! Experiment drivers: the literature tables, the `m2` sweep, basin sampling
//! for bistability, largest Lyapunov exponents and global-stability probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycles::{f_condition, find_h2_cycle, floquet, CycleOptions, FCondition, FloquetResult, LimitCycle};
use crate::equilibria::{
    all_equilibria, classification_report, classify_with, CaseLabel, ClassificationReport, Equilibrium, EquilibriumKind,
};
use crate::error::{Error, IntegrationError};
use crate::integrator::{
    attracting_bounds, classify_attractor, integrate, AttractorKind, AttractorTarget, AttractorVerdict,
    IntegratorConfig, ModelField, Thresholds,
};
use crate::model::{derived, hp_convert, jacobian_array, LiteratureRow, ParamName, ParameterSet, State, DEFAULT_CLASS_EPS};
use crate::ode::{Dopri5, OdeSystem};

/// Version of the JSON report layout.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovOptions {
    pub renormalization_interval: f64,
    pub t_discard: f64,
    pub t_average: f64,
    /// Estimates with magnitude below this count as zero.
    pub near_zero_band: f64,
    /// Spacing of the recorded running estimate.
    pub history_interval: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            renormalization_interval: 0.5,
            t_discard: 2_000.0,
            t_average: 100_000.0,
            near_zero_band: 1e-3,
            history_interval: 100.0,
        }
    }
}

/// Settings shared by all experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub integrator: IntegratorConfig,
    pub thresholds: Thresholds,
    pub cycle: CycleOptions,
    pub lyapunov: LyapunovOptions,
    pub eps_class: f64,
    /// Start used for the attractor verdict of every sweep record.
    pub canonical_state: State,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            thresholds: Thresholds::default(),
            cycle: CycleOptions::default(),
            lyapunov: LyapunovOptions::default(),
            eps_class: DEFAULT_CLASS_EPS,
            canonical_state: State::new_unchecked(0.5, 0.5, 0.5),
        }
    }
}

/// Base parameters of the `m2` experiments: `a1 = 0.3, m1 = 5/3, d1 = 0.4,
/// a2 = 0.9, d2 = 0.01`.
pub fn table2_base(m2: f64) -> ParameterSet {
    ParameterSet::new(0.3, 0.9, 0.4, 0.01, 5.0 / 3.0, m2).expect("positive")
}

pub const TABLE2_M2: [f64; 3] = [0.033, 0.042, 0.065];

/// The parameter set with a globally stable planar cycle used throughout.
pub fn hsu_set() -> ParameterSet {
    ParameterSet::new(0.24, 0.4, 0.3, 0.39, 0.5, 0.4).expect("positive")
}

/// Seeds next to the equilibria for the point-cycle regime.
pub const SEEDS_M2_033: [[f64; 3]; 2] = [[0.5266, 0.3913, 0.8546], [0.1734, 0.3913, 0.2717]];
/// A seed next to the interior equilibrium and one next to the plane z = 0.
pub const SEEDS_M2_042: [[f64; 3]; 2] = [[0.7472, 0.2647, 0.9192], [0.75, 0.26, 0.01]];

/// `m2` at which `lambda2(m2) = target`, from `a2 d2 / (m2 - d2) = target`.
pub fn m2_crossing(p: &ParameterSet, target: f64) -> f64 {
    p.d2 + p.a2 * p.d2 / target
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossings {
    /// `lambda2 = (1 + a1)^2 / 4`.
    pub m2_at_p_max: f64,
    /// `lambda2 = p(lambda1)`.
    pub m2_at_p_lambda1: f64,
}

pub fn crossings(p: &ParameterSet) -> Option<Crossings> {
    let dp = derived(p);
    Some(Crossings { m2_at_p_max: m2_crossing(p, dp.p_max), m2_at_p_lambda1: m2_crossing(p, dp.p_of_lambda1?) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub m2: f64,
    pub params: ParameterSet,
    pub classification: ClassificationReport,
    pub floquet: Option<FloquetResult>,
    pub basin: BasinSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Report {
    pub schema: u32,
    pub cycle: Option<LimitCycle>,
    pub rows: Vec<Table2Row>,
    pub crossings: Crossings,
}

/// Seeds used for the basin of each `m2` row: the default grid plus the
/// seeds next to the equilibria and the plane z = 0.
pub fn table2_seeds(p: &ParameterSet) -> Vec<State> {
    let mut seeds = default_grid(p);
    let extra: &[[f64; 3]] = if p.m2 == 0.033 { &SEEDS_M2_033 } else { &SEEDS_M2_042 };
    seeds.extend(extra.iter().map(|s| State::new_unchecked(s[0], s[1], s[2])));
    seeds
}

pub fn run_table2(cfg: &ExperimentConfig) -> Result<Table2Report, Error> {
    let base = table2_base(TABLE2_M2[0]);
    let cycle = find_h2_cycle(&base, &cfg.cycle).ok();
    let mut rows = Vec::new();
    for m2 in TABLE2_M2 {
        let p = table2_base(m2);
        let classification = classification_report(&p, cfg.eps_class);
        let floquet = match &cycle {
            Some(c) => Some(floquet(&p, c, &cfg.cycle)?),
            None => None,
        };
        let basin = basin_sample(&p, &table2_seeds(&p), cfg)?;
        rows.push(Table2Row { m2, params: p, classification, floquet, basin: basin.summary() });
    }
    let crossings = crossings(&base).expect("lambda1 defined");
    Ok(Table2Report { schema: SCHEMA, cycle, rows, crossings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiteratureEntry {
    pub name: &'static str,
    pub row: LiteratureRow,
}

pub const LITERATURE_ROWS: [LiteratureEntry; 3] = [
    LiteratureEntry { name: "Hogeweg", row: LiteratureRow { a1: 1.81, b1: 4.5, a2: 0.181, b2: 0.45, d1: 0.16, d2: 0.08 } },
    LiteratureEntry { name: "Scheffer", row: LiteratureRow { a1: 8.0, b1: 6.66, a2: 2.88, b2: 2.4, d1: 0.87, d2: 0.25 } },
    LiteratureEntry { name: "Hastings", row: LiteratureRow { a1: 5.0, b1: 4.0, a2: 0.1, b2: 2.0, d1: 0.4, d2: 0.01 } },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3Row {
    pub name: &'static str,
    pub literature: LiteratureRow,
    pub params: ParameterSet,
    pub label: CaseLabel,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub p_lambda1: Option<f64>,
    pub p_max: f64,
    pub boundary_flags: Vec<crate::equilibria::BoundaryFlag>,
    /// Classification when the second half-saturation is scaled by the first
    /// level's conversion (`a2 = m1 / b2`), for comparison only.
    pub alternative_params: ParameterSet,
    pub alternative_label: CaseLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3Report {
    pub schema: u32,
    pub rows: Vec<Table3Row>,
}

pub fn run_table3(eps: f64) -> Result<Table3Report, Error> {
    let mut rows = Vec::new();
    for entry in LITERATURE_ROWS {
        let p = hp_convert(&entry.row)?;
        let case = classify_with(&p, eps);
        let dp = derived(&p);
        let alt = ParameterSet::new(p.a1, p.m1 / entry.row.b2, p.d1, p.d2, p.m1, p.m2)?;
        rows.push(Table3Row {
            name: entry.name,
            literature: entry.row,
            params: p,
            label: case.label,
            lambda1: dp.lambda1(),
            lambda2: dp.lambda2(),
            p_lambda1: dp.p_of_lambda1,
            p_max: dp.p_max,
            boundary_flags: case.boundary_flags,
            alternative_params: alt,
            alternative_label: classify_with(&alt, eps).label,
        });
    }
    Ok(Table3Report { schema: SCHEMA, rows })
}

/// `n` points from `lo` to `hi` spaced evenly in log scale.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| if i == n - 1 { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect()
}

/// 5 x 5 x 5 log-spaced starts in `[1e-3, 1] x [1e-3, 1.6] x [1e-3, 1]`
/// that lie in the attracting set.
pub fn default_grid(p: &ParameterSet) -> Vec<State> {
    log_grid(p, [(1e-3, 1.0), (1e-3, 1.6), (1e-3, 1.0)], 5)
}

pub fn log_grid(p: &ParameterSet, ranges: [(f64, f64); 3], n: usize) -> Vec<State> {
    let bounds = attracting_bounds(p);
    let axes = ranges.map(|(lo, hi)| logspace(lo, hi, n));
    let mut out = Vec::new();
    for &x in &axes[0] {
        for &y in &axes[1] {
            for &z in &axes[2] {
                let s = State::new_unchecked(x, y, z);
                if crate::integrator::in_attracting_set(&s, &bounds, 0.0) {
                    out.push(s);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BistabilityVerdict {
    Monostable,
    PointCycle,
    CycleCycle,
    Undetermined,
}

impl std::fmt::Display for BistabilityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BistabilityVerdict::Monostable => "monostable",
            BistabilityVerdict::PointCycle => "point_cycle",
            BistabilityVerdict::CycleCycle => "cycle_cycle",
            BistabilityVerdict::Undetermined => "undetermined",
        })
    }
}

/// A distinct attractor reached from some grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistryEntry {
    pub id: usize,
    pub kind: AttractorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<State>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_amplitude: Option<f64>,
    pub tail_z_max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinPoint {
    pub initial: State,
    pub attractor: usize,
    pub kind: AttractorKind,
    pub final_state: State,
    pub tail_z_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinMap {
    pub schema: u32,
    pub params: ParameterSet,
    pub points: Vec<BasinPoint>,
    pub registry: Vec<RegistryEntry>,
    pub verdict: BistabilityVerdict,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinSummary {
    pub verdict: BistabilityVerdict,
    pub points: usize,
    pub registry: Vec<RegistryEntry>,
    /// Attractor kind reached from each explicitly listed seed, in order.
    pub seed_outcomes: Vec<(State, AttractorKind)>,
}

impl BasinMap {
    pub fn summary(&self) -> BasinSummary {
        let seeds = if self.points.len() > 2 { &self.points[self.points.len() - 2..] } else { &self.points[..] };
        BasinSummary {
            verdict: self.verdict,
            points: self.points.len(),
            registry: self.registry.clone(),
            seed_outcomes: seeds.iter().map(|p| (p.initial, p.kind)).collect(),
        }
    }

    pub fn kind_of(&self, initial: &State) -> Option<AttractorKind> {
        self.points.iter().find(|p| p.initial == *initial).map(|p| p.kind)
    }

    /// `x0,y0,z0,label` rows with `label = kind:id`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x0,y0,z0,label")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}:{}", p.initial.x, p.initial.y, p.initial.z, p.kind, p.attractor)?;
        }
        Ok(())
    }
}

fn tail_z_max(v: &AttractorVerdict) -> f64 {
    v.diagnostics.max[2]
}

/// Integrates from every grid point, deduplicates the attractors and
/// decides whether the system is bistable.
pub fn basin_sample(p: &ParameterSet, grid: &[State], cfg: &ExperimentConfig) -> Result<BasinMap, Error> {
    if grid.is_empty() {
        return Err(Error::usage("basin grid is empty"));
    }
    if let Some(s) = grid.iter().find(|s| !(s.x > 0.0 && s.y > 0.0 && s.z > 0.0)) {
        return Err(Error::usage(format!("basin grid point {s} is not in the positive octant")));
    }
    let eqs = all_equilibria(p);
    let outcomes: Vec<Result<AttractorVerdict, String>> = grid
        .par_iter()
        .map(|s0| {
            let tr = integrate(p, s0, &cfg.integrator).map_err(|e| e.to_string())?;
            classify_attractor(&tr, &eqs, &cfg.thresholds).map_err(|e| e.to_string())
        })
        .collect();

    let th = cfg.thresholds;
    let mut registry: Vec<RegistryEntry> = Vec::new();
    let mut points = Vec::with_capacity(grid.len());
    for (s0, outcome) in grid.iter().zip(outcomes) {
        let (kind, eq, cyc, zmax, fin, error) = match &outcome {
            Ok(v) => {
                let (eq, cyc) = match &v.target {
                    Some(AttractorTarget::Equilibrium(e)) => (Some(e.coords), None),
                    Some(AttractorTarget::Cycle(c)) => (None, Some((c.period, c.y_max - c.y_min))),
                    None => (None, None),
                };
                (v.kind, eq, cyc, tail_z_max(v), v.diagnostics.final_state, None)
            }
            Err(msg) => (AttractorKind::ChaoticOrUndetermined, None, None, f64::NAN, *s0, Some(msg.clone())),
        };
        let same = |r: &RegistryEntry| {
            r.kind == kind
                && match (eq, cyc) {
                    (Some(a), _) => r.equilibrium.is_some_and(|b| a.distance(&b) < th.delta_eq),
                    (_, Some((t, amp))) => {
                        r.period.is_some_and(|rt| (rt - t).abs() <= 0.01 * rt)
                            && r.y_amplitude.is_some_and(|ra| (ra - amp).abs() <= 0.01 * ra)
                    }
                    _ => true,
                }
        };
        let id = match registry.iter().position(same) {
            Some(i) => {
                registry[i].count += 1;
                registry[i].tail_z_max = registry[i].tail_z_max.max(zmax);
                i
            }
            None => {
                registry.push(RegistryEntry {
                    id: registry.len(),
                    kind,
                    equilibrium: eq,
                    period: cyc.map(|c| c.0),
                    y_amplitude: cyc.map(|c| c.1),
                    tail_z_max: zmax,
                    count: 1,
                });
                registry.len() - 1
            }
        };
        points.push(BasinPoint { initial: *s0, attractor: id, kind, final_state: fin, tail_z_max: zmax, error });
    }
    let verdict = bistability_verdict(&registry);
    Ok(BasinMap { schema: SCHEMA, params: *p, points, registry, verdict, thresholds: th })
}

fn bistability_verdict(registry: &[RegistryEntry]) -> BistabilityVerdict {
    let has = |k| registry.iter().any(|r| r.kind == k);
    if has(AttractorKind::Equilibrium) && has(AttractorKind::BoundaryCycle) {
        return BistabilityVerdict::PointCycle;
    }
    if has(AttractorKind::InteriorCycle) && has(AttractorKind::BoundaryCycle) {
        return BistabilityVerdict::CycleCycle;
    }
    let undetermined = has(AttractorKind::ChaoticOrUndetermined);
    if registry.len() == 1 && !undetermined {
        BistabilityVerdict::Monostable
    } else {
        BistabilityVerdict::Undetermined
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub value: f64,
    pub params: ParameterSet,
    pub lambda2: Option<f64>,
    pub label: CaseLabel,
    pub interior: Vec<Equilibrium>,
    pub transversal_average: Option<f64>,
    pub attractor: AttractorKind,
    pub tail_y_min: f64,
    pub tail_y_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub schema: u32,
    pub parameter: ParamName,
    pub values: Vec<f64>,
    pub records: Vec<SweepRecord>,
    pub canonical_state: State,
}

impl SweepResult {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},lambda2,case,n_interior,n_stable_interior,transversal_average,attractor,y_tail_min,y_tail_max",
            self.parameter
        )?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.records {
            let stable = r.interior.iter().filter(|e| e.stability == crate::equilibria::Stability::Stable).count();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.value,
                opt(r.lambda2),
                r.label,
                r.interior.len(),
                stable,
                opt(r.transversal_average),
                r.attractor,
                r.tail_y_min,
                r.tail_y_max
            )?;
        }
        Ok(())
    }
}

/// `lo, lo + step, ...` up to and including `hi` (within a 1e-9 step slack).
pub fn sweep_values(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, Error> {
    if !(lo < hi && step > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(Error::usage(format!("sweep needs lo < hi and step > 0 (got {lo}, {hi}, {step})")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

/// Varies one parameter, recording the classification, interior equilibria,
/// the planar cycle's transversal average and the attractor reached from
/// the canonical start.
pub fn sweep(
    p: &ParameterSet,
    name: ParamName,
    lo: f64,
    hi: f64,
    step: f64,
    cfg: &ExperimentConfig,
) -> Result<SweepResult, Error> {
    let values = sweep_values(lo, hi, step)?;
    let params: Vec<ParameterSet> = values.iter().map(|&v| p.with(name, v)).collect::<Result<_, _>>()?;
    // the planar cycle does not involve a2, d2 or m2
    let shared_cycle = match name {
        ParamName::A2 | ParamName::D2 | ParamName::M2 => find_h2_cycle(p, &cfg.cycle).ok(),
        _ => None,
    };
    let records = values
        .par_iter()
        .zip(params.par_iter())
        .map(|(&value, q)| {
            let case = classify_with(q, cfg.eps_class);
            let own_cycle;
            let cycle = if shared_cycle.is_some() {
                shared_cycle.as_ref()
            } else {
                own_cycle = find_h2_cycle(q, &cfg.cycle).ok();
                own_cycle.as_ref()
            };
            let transversal_average = cycle.and_then(|c| floquet(q, c, &cfg.cycle).ok()).map(|f| f.transversal_average);
            let eqs = all_equilibria(q);
            let verdict = integrate(q, &cfg.canonical_state, &cfg.integrator)
                .map_err(Error::from)
                .and_then(|tr| classify_attractor(&tr, &eqs, &cfg.thresholds));
            let (attractor, tail_y_min, tail_y_max, error) = match verdict {
                Ok(v) => (v.kind, v.diagnostics.min[1], v.diagnostics.max[1], None),
                Err(e) => (AttractorKind::ChaoticOrUndetermined, f64::NAN, f64::NAN, Some(e.to_string())),
            };
            SweepRecord {
                value,
                params: *q,
                lambda2: derived(q).lambda2(),
                label: case.label,
                interior: eqs.into_iter().filter(|e| e.kind == EquilibriumKind::Interior).collect(),
                transversal_average,
                attractor,
                tail_y_min,
                tail_y_max,
                error,
            }
        })
        .collect();
    Ok(SweepResult { schema: SCHEMA, parameter: name, values, records, canonical_state: cfg.canonical_state })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovVerdict {
    Negative,
    NearZero,
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    pub renormalization_interval: f64,
    /// `(t, running estimate)` after the discarded transient.
    pub history: Vec<(f64, f64)>,
    /// Standard deviation of the running estimate over the second half of
    /// the history.
    pub sigma: f64,
    pub verdict: LyapunovVerdict,
    pub options: LyapunovOptions,
}

struct TangentSystem {
    field: ModelField,
}

impl OdeSystem<6> for TangentSystem {
    fn eval(&self, t: f64, u: &[f64; 6]) -> [f64; 6] {
        let s = [u[0], u[1], u[2]];
        let f = self.field.eval(t, &s);
        let j = jacobian_array(&self.field.p, &s);
        let mut out = [f[0], f[1], f[2], 0.0, 0.0, 0.0];
        for r in 0..3 {
            out[3 + r] = j[r][0] * u[3] + j[r][1] * u[4] + j[r][2] * u[5];
        }
        out
    }

    fn admissible(&self, u: &[f64; 6]) -> bool {
        u[..3].iter().all(|v| *v >= -crate::model::EPS_NEG)
    }

    fn project(&self, u: &mut [f64; 6]) {
        let mut s = [u[0], u[1], u[2]];
        self.field.project(&mut s);
        u[..3].copy_from_slice(&s);
    }
}

/// Largest Lyapunov exponent by tangent-vector renormalisation.
pub fn lyapunov_exponent(
    p: &ParameterSet,
    s0: &State,
    integ: &IntegratorConfig,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate, IntegrationError> {
    integ.validate()?;
    let tau = opts.renormalization_interval;
    if !(tau > 0.0 && opts.t_discard >= 0.0 && opts.t_average > 0.0) {
        return Err(IntegrationError::InvalidConfig("Lyapunov intervals must be positive".into()));
    }
    let y0 = s0.to_array();
    let field = ModelField::new(*p, &y0);
    let v0 = 1.0 / 3f64.sqrt();
    let mut solver = Dopri5::new(TangentSystem { field }, 0.0, [y0[0], y0[1], y0[2], v0, v0, v0], integ.step_options())?;

    let n_discard = (opts.t_discard / tau).round() as usize;
    let n_total = n_discard + (opts.t_average / tau).round() as usize;
    let every = ((opts.history_interval / tau).round() as usize).max(1);
    let mut sum = 0.0;
    let mut history = Vec::new();
    for k in 1..=n_total {
        let t = k as f64 * tau;
        solver.run_to(t, |_| {})?;
        let u = *solver.y();
        let norm = (u[3] * u[3] + u[4] * u[4] + u[5] * u[5]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(IntegrationError::NonFinite { t, partial: None });
        }
        if k > n_discard {
            sum += norm.ln();
            let m = k - n_discard;
            if m.is_multiple_of(every) {
                history.push((t, sum / (m as f64 * tau)));
            }
        }
        solver.reset_state([u[0], u[1], u[2], u[3] / norm, u[4] / norm, u[5] / norm]);
    }
    let lambda_max = sum / opts.t_average;
    let tail = &history[history.len() / 2..];
    let sigma = if tail.len() > 1 {
        let mean = tail.iter().map(|h| h.1).sum::<f64>() / tail.len() as f64;
        (tail.iter().map(|h| (h.1 - mean).powi(2)).sum::<f64>() / (tail.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let threshold = (3.0 * sigma).max(opts.near_zero_band);
    let verdict = if lambda_max > threshold {
        LyapunovVerdict::Positive
    } else if lambda_max < -threshold {
        LyapunovVerdict::Negative
    } else {
        LyapunovVerdict::NearZero
    };
    Ok(LyapunovEstimate { lambda_max, renormalization_interval: tau, history, sigma, verdict, options: *opts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub initial: State,
    pub kind: AttractorKind,
    pub final_state: State,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub schema: u32,
    pub label: CaseLabel,
    pub predicted: String,
    pub n: usize,
    pub converged: usize,
    pub fraction: f64,
    pub seed: u64,
    /// Largest tail value of z over all samples.
    pub max_tail_z: f64,
    pub counterexamples: Vec<Counterexample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_condition: Option<FCondition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transversal_average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_period: Option<f64>,
}

/// Uniform random starts with all coordinates positive inside the attracting set.
pub fn random_starts(p: &ParameterSet, n: usize, seed: u64) -> Vec<State> {
    let b = attracting_bounds(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = b[0] * (1.0 - rng.gen::<f64>());
            let y = (b[1] - x) * (1.0 - rng.gen::<f64>());
            let z = (b[2] - x - y) * (1.0 - rng.gen::<f64>());
            State::new_unchecked(x, y, z)
        })
        .collect()
}

enum Predicted {
    Equilibrium(EquilibriumKind, State),
    Cycle(f64),
}

/// Samples `n` random starts and checks that each reaches the attractor a
/// proved global result predicts. Only cases with such a result are accepted.
pub fn global_stability_probe(p: &ParameterSet, n: usize, cfg: &ExperimentConfig) -> Result<ProbeResult, Error> {
    let case = classify_with(p, cfg.eps_class);
    let eqs = all_equilibria(p);
    let find = |k: EquilibriumKind| eqs.iter().find(|e| e.kind == k).map(|e| e.coords);
    let (mut fcond, mut trans, mut period) = (None, None, None);
    let predicted = match case.label {
        CaseLabel::I => Predicted::Equilibrium(EquilibriumKind::Ex, find(EquilibriumKind::Ex).unwrap()),
        CaseLabel::II1a | CaseLabel::II2ai => match find(EquilibriumKind::Exy) {
            Some(s) => Predicted::Equilibrium(EquilibriumKind::Exy, s),
            None => return Err(Error::usage("boundary equilibrium Exy missing")),
        },
        CaseLabel::II2bi => {
            let fc = f_condition(p, None)?;
            let c = find_h2_cycle(p, &cfg.cycle)?;
            let fl = floquet(p, &c, &cfg.cycle)?;
            if !(fc.holds && fl.transversal_average < 0.0) {
                return Err(Error::usage(format!(
                    "case {} without a proved global result: f condition {} and transversal average {:e}",
                    case.label, fc.holds, fl.transversal_average
                )));
            }
            fcond = Some(fc);
            trans = Some(fl.transversal_average);
            period = Some(c.period);
            Predicted::Cycle(c.period)
        }
        other => {
            return Err(Error::usage(format!(
                "case {other} has no proved global stability result to probe"
            )))
        }
    };
    let starts = random_starts(p, n, cfg.integrator.seed);
    let verdicts: Vec<Result<AttractorVerdict, Error>> = starts
        .par_iter()
        .map(|s0| {
            let tr = integrate(p, s0, &cfg.integrator)?;
            classify_attractor(&tr, &eqs, &cfg.thresholds)
        })
        .collect();
    let mut counterexamples = Vec::new();
    let mut max_tail_z: f64 = 0.0;
    for (s0, v) in starts.iter().zip(verdicts) {
        let v = match v {
            Ok(v) => v,
            Err(e) => {
                counterexamples.push(Counterexample {
                    initial: *s0,
                    kind: AttractorKind::ChaoticOrUndetermined,
                    final_state: *s0,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        max_tail_z = max_tail_z.max(v.diagnostics.max[2]);
        let reason = match &predicted {
            Predicted::Equilibrium(kind, target) => {
                let d = v.diagnostics.final_state.distance(target);
                (!(v.kind == AttractorKind::ZExtinctEquilibrium && d < cfg.thresholds.delta_eq))
                    .then(|| format!("expected {kind:?}, got {} at distance {d:e}", v.kind))
            }
            Predicted::Cycle(t) => match v.period() {
                Some(tp) if v.kind == AttractorKind::BoundaryCycle && (tp - t).abs() <= 0.01 * t => None,
                _ => Some(format!("expected the planar cycle (T = {t}), got {}", v.kind)),
            },
        };
        if let Some(reason) = reason {
            counterexamples.push(Counterexample {
                initial: *s0,
                kind: v.kind,
                final_state: v.diagnostics.final_state,
                reason,
            });
        }
    }
    let converged = n - counterexamples.len();
    Ok(ProbeResult {
        schema: SCHEMA,
        label: case.label,
        predicted: match predicted {
            Predicted::Equilibrium(k, s) => format!("{k:?} at {s}"),
            Predicted::Cycle(t) => format!("planar cycle with period {t}"),
        },
        n,
        converged,
        fraction: if n == 0 { 1.0 } else { converged as f64 / n as f64 },
        seed: cfg.integrator.seed,
        max_tail_z,
        counterexamples,
        f_condition: fcond,
        transversal_average: trans,
        cycle_period: period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_values() {
        let c = crossings(&table2_base(0.033)).unwrap();
        assert!((c.m2_at_p_max - 0.0313).abs() < 5e-4);
        assert!((c.m2_at_p_lambda1 - 0.0351).abs() < 5e-4);
        assert!(c.m2_at_p_max < c.m2_at_p_lambda1);
    }

    #[test]
    fn sweep_value_counts() {
        assert_eq!(sweep_values(0.02, 0.15, 0.001).unwrap().len(), 131);
        let v = sweep_values(0.02, 0.15, 0.001).unwrap();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!((v[130] - 0.15).abs() < 1e-12);
        assert!(sweep_values(0.1, 0.1, 0.01).is_err());
        assert!(sweep_values(0.0, 1.0, 0.0).is_err());
        // both ends are included
        assert_eq!(sweep_values(0.14, 0.15, 0.01).unwrap().len(), 2);
    }

    #[test]
    fn lambda2_increases_with_d2() {
        let p = table2_base(0.065);
        let values = sweep_values(0.001, 0.06, 0.001).unwrap();
        let l2: Vec<f64> = values.iter().map(|&d| derived(&p.with(ParamName::D2, d).unwrap()).lambda2().unwrap()).collect();
        assert!(l2.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn table3_conversion() {
        let r = run_table3(DEFAULT_CLASS_EPS).unwrap();
        let hastings = &r.rows[2];
        assert_eq!((hastings.params.m1, hastings.params.a1, hastings.params.m2, hastings.params.a2), (1.25, 0.25, 0.05, 0.5));
        assert_eq!(hastings.label, CaseLabel::II2biv);
        assert_eq!(r.rows[1].label, CaseLabel::II2biv);
    }

    #[test]
    fn default_grid_respects_attracting_set() {
        let p = table2_base(0.033);
        let g = default_grid(&p);
        assert!(!g.is_empty() && g.len() < 125);
        let b = attracting_bounds(&p);
        assert!(g.iter().all(|s| crate::integrator::in_attracting_set(s, &b, 0.0)));
        assert_eq!(logspace(1e-3, 1.0, 5)[4], 1.0);
    }

    #[test]
    fn random_starts_are_reproducible_and_inside() {
        let p = hsu_set();
        let a = random_starts(&p, 50, 7);
        assert_eq!(a, random_starts(&p, 50, 7));
        assert_ne!(a, random_starts(&p, 50, 8));
        let b = attracting_bounds(&p);
        assert!(a.iter().all(|s| s.x > 0.0 && s.y > 0.0 && s.z > 0.0 && crate::integrator::in_attracting_set(s, &b, 0.0)));
    }

    #[test]
    fn probe_refuses_open_cases() {
        let err = global_stability_probe(&table2_base(0.042), 4, &ExperimentConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(err.to_string().contains("II.2.b.iv"));
    }

    #[test]
    fn basin_rejects_bad_grids() {
        let cfg = ExperimentConfig::default();
        assert!(basin_sample(&hsu_set(), &[], &cfg).is_err());
        assert!(basin_sample(&hsu_set(), &[State::new_unchecked(0.5, 0.0, 0.2)], &cfg).is_err());
    }

    #[test]
    fn lyapunov_negative_at_stable_equilibrium() {
        let p = table2_base(0.033);
        let opts = LyapunovOptions { t_average: 10_000.0, ..Default::default() };
        let s0 = State::new_unchecked(0.5266, 0.3913, 0.8546);
        let est = lyapunov_exponent(&p, &s0, &IntegratorConfig::default(), &opts).unwrap();
        assert_eq!(est.verdict, LyapunovVerdict::Negative);
        // slowest decay rate at the stable interior equilibrium
        assert!((est.lambda_max + 0.0073).abs() < 1e-3, "{}", est.lambda_max);
    }
}
