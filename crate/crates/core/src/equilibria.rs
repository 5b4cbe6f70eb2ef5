//! Equilibria in closed form, their local stability, and the classification
//! of a parameter set by the break-even densities.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::EquilibriaError;
use crate::model::{derived, jacobian, prey_isocline, rhs, DerivedParams, ParameterSet, State, DEFAULT_CLASS_EPS};
use crate::poly::{characteristic_coefficients, cubic_roots, quadratic_roots, real_quadratic_roots};

/// Real parts below this magnitude are not used to judge the Routh-Hurwitz
/// cross-check.
const RH_CROSSCHECK_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumKind {
    E0,
    Ex,
    Exy,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        })
    }
}

/// Any real part above `eps` makes the point unstable; otherwise a real part
/// within `eps` of zero makes it marginal.
pub fn stability_from_eigenvalues(eig: &[Complex64], eps: f64) -> Stability {
    if eig.iter().any(|l| l.re > eps) {
        Stability::Unstable
    } else if eig.iter().any(|l| l.re.abs() <= eps) {
        Stability::Marginal
    } else {
        Stability::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouthHurwitzRecord {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// `b2 b1 - b0`.
    pub hurwitz_margin: f64,
    /// `x* > (1 - a1) / 2`, necessary for stability.
    pub necessary_x_condition: bool,
    pub stable: bool,
    /// The verdict agrees with the signs of the eigenvalue real parts (always
    /// true when some real part is within 1e-8 of zero).
    pub consistent_with_eigenvalues: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub coords: State,
    #[serde(serialize_with = "crate::complex_json::serialize")]
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rh: Option<RouthHurwitzRecord>,
}

impl Equilibrium {
    fn new(kind: EquilibriumKind, coords: State, eigenvalues: [Complex64; 3], eps: f64) -> Self {
        let stability = stability_from_eigenvalues(&eigenvalues, eps);
        Self { kind, coords, eigenvalues, stability, rh: None }
    }

    pub fn residual(&self, p: &ParameterSet) -> f64 {
        rhs(p, &self.coords).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn real3(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    [Complex64::new(a, 0.0), Complex64::new(b, 0.0), Complex64::new(c, 0.0)]
}

/// Eigenvalues of a 3x3 matrix from its characteristic cubic, sorted by
/// decreasing real part.
pub fn eigenvalues3(j: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let (b2, b1, b0) = characteristic_coefficients(j);
    let mut r = cubic_roots(b2, b1, b0);
    r.sort_by(|u, v| v.re.total_cmp(&u.re).then(v.im.total_cmp(&u.im)));
    r
}

/// E0 and Ex always; Exy when `0 < lambda1 < 1`.
pub fn boundary_equilibria(p: &ParameterSet) -> Vec<Equilibrium> {
    boundary_equilibria_with(p, DEFAULT_CLASS_EPS)
}

pub fn boundary_equilibria_with(p: &ParameterSet, eps: f64) -> Vec<Equilibrium> {
    let mut out = vec![
        Equilibrium::new(EquilibriumKind::E0, State::new_unchecked(0.0, 0.0, 0.0), real3(1.0, -p.d1, -p.d2), eps),
        Equilibrium::new(
            EquilibriumKind::Ex,
            State::new_unchecked(1.0, 0.0, 0.0),
            real3(-1.0, p.m1 / (p.a1 + 1.0) - p.d1, -p.d2),
            eps,
        ),
    ];
    if let Some(l1) = derived(p).lambda1().filter(|l| *l > 0.0 && *l < 1.0) {
        let coords = State::new_unchecked(l1, prey_isocline(p.a1, l1), 0.0);
        let j = jacobian(p, &coords);
        // the (x, y) block decouples because z = 0
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let [e1, e2] = quadratic_roots(-tr, det);
        let e3 = Complex64::new(j[2][2], 0.0);
        out.push(Equilibrium::new(EquilibriumKind::Exy, coords, [e1, e2, e3], eps));
    }
    out
}

/// Why no interior equilibrium is returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsenceReason {
    /// `lambda1` undefined or not in (0, 1).
    A1Fails,
    /// `m2 <= d2`.
    A2Fails,
    /// `lambda2` exceeds the maximum of the prey isocline.
    AboveIsoclineMaximum,
    /// Roots of `p(x) = lambda2` exist but none lies in `(lambda1, 1)`.
    NoRootInRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorSolution {
    pub equilibria: Vec<Equilibrium>,
    pub absence: Option<AbsenceReason>,
    /// The discriminant vanished within tolerance: one double root at the
    /// vertex of the isocline.
    pub tangency: bool,
}

/// Interior equilibria (0, 1 or 2), ordered by increasing x.
pub fn interior_equilibria(p: &ParameterSet) -> Vec<Equilibrium> {
    interior_equilibria_with(p, DEFAULT_CLASS_EPS).equilibria
}

pub fn interior_equilibria_with(p: &ParameterSet, eps: f64) -> InteriorSolution {
    let dp = derived(p);
    let none = |reason| InteriorSolution { equilibria: Vec::new(), absence: Some(reason), tangency: false };
    let l1 = match dp.lambda1() {
        Some(l) if dp.a1_holds => l,
        _ => return none(AbsenceReason::A1Fails),
    };
    let l2 = match dp.lambda2() {
        Some(l) => l,
        None => return none(AbsenceReason::A2Fails),
    };

    // p(x) = lambda2  <=>  x^2 - (1 - a1) x + (lambda2 - a1) = 0
    let disc = (1.0 + p.a1).powi(2) - 4.0 * l2;
    let mut tangency = false;
    let roots: Vec<f64> = if disc.abs() <= eps {
        tangency = true;
        vec![dp.hopf_threshold]
    } else {
        match real_quadratic_roots(-(1.0 - p.a1), l2 - p.a1) {
            Some((r1, r2)) => vec![r1, r2],
            None => return none(AbsenceReason::AboveIsoclineMaximum),
        }
    };

    let mut equilibria = Vec::new();
    for x in roots.into_iter().filter(|&x| x > l1 && x < 1.0) {
        let z = (p.m1 * x / (p.a1 + x) - p.d1) * (p.a2 + l2);
        if z <= 0.0 {
            continue;
        }
        let coords = State::new_unchecked(x, l2, z);
        let eig = eigenvalues3(&jacobian(p, &coords));
        let mut e = Equilibrium::new(EquilibriumKind::Interior, coords, eig, eps);
        e.rh = Some(rh_record(p, &coords, &eig));
        equilibria.push(e);
    }
    let absence = equilibria.is_empty().then_some(AbsenceReason::NoRootInRange);
    InteriorSolution { equilibria, absence, tangency }
}

/// Routh-Hurwitz record for an interior equilibrium.
pub fn routh_hurwitz(p: &ParameterSet, e: &Equilibrium) -> Result<RouthHurwitzRecord, EquilibriaError> {
    if e.kind != EquilibriumKind::Interior {
        return Err(EquilibriaError::NotInterior(e.kind));
    }
    Ok(routh_hurwitz_at(p, &e.coords))
}

/// Routh-Hurwitz record at an arbitrary point assumed to be an interior
/// equilibrium.
pub fn routh_hurwitz_at(p: &ParameterSet, s: &State) -> RouthHurwitzRecord {
    let eig = eigenvalues3(&jacobian(p, s));
    rh_record(p, s, &eig)
}

fn rh_record(p: &ParameterSet, s: &State, eig: &[Complex64; 3]) -> RouthHurwitzRecord {
    let (x, y, z) = (s.x, s.y, s.z);
    let a = x / (p.a1 + x);
    let b = y / (p.a1 + x);
    let c = p.a1 * p.m1 / (p.a1 + x);
    let d = y / (p.a2 + y);
    let e = p.a2 * p.m2 / (p.a2 + y);
    let f = z / (p.a2 + y);

    let b2 = x - a * b - d * f;
    let b1 = (e - x) * d * f + a * b * d * f + a * b * c;
    let b0 = (x - a * b) * d * e * f;
    let hurwitz_margin = b2 * b1 - b0;
    let stable = b0 > 0.0 && b1 > 0.0 && b2 > 0.0 && hurwitz_margin > 0.0;

    let consistent_with_eigenvalues = if eig.iter().any(|l| l.re.abs() < RH_CROSSCHECK_EPS) {
        true
    } else {
        stable == eig.iter().all(|l| l.re < 0.0)
    };
    RouthHurwitzRecord {
        b0,
        b1,
        b2,
        hurwitz_margin,
        necessary_x_condition: x > (1.0 - p.a1) / 2.0,
        stable,
        consistent_with_eigenvalues,
    }
}

/// Row of the classification table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II.1.a")]
    II1a,
    #[serde(rename = "II.1.b")]
    II1b,
    #[serde(rename = "II.2.a.i")]
    II2ai,
    #[serde(rename = "II.2.a.ii")]
    II2aii,
    #[serde(rename = "II.2.b.i")]
    II2bi,
    #[serde(rename = "II.2.b.ii")]
    II2bii,
    #[serde(rename = "II.2.b.iii")]
    II2biii,
    #[serde(rename = "II.2.b.iv")]
    II2biv,
    /// `m2 <= d2`: the top predator dies out; reported before the table rows.
    #[serde(rename = "z-extinct")]
    ZExtinct,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::I => "I",
            CaseLabel::II1a => "II.1.a",
            CaseLabel::II1b => "II.1.b",
            CaseLabel::II2ai => "II.2.a.i",
            CaseLabel::II2aii => "II.2.a.ii",
            CaseLabel::II2bi => "II.2.b.i",
            CaseLabel::II2bii => "II.2.b.ii",
            CaseLabel::II2biii => "II.2.b.iii",
            CaseLabel::II2biv => "II.2.b.iv",
            CaseLabel::ZExtinct => "z-extinct",
        }
    }

    pub fn known_result(self) -> KnownResult {
        match self {
            CaseLabel::I => KnownResult::ExGas,
            CaseLabel::II1a | CaseLabel::II2ai => KnownResult::ExyGasR3,
            CaseLabel::II1b | CaseLabel::II2aii => KnownResult::Persistence,
            CaseLabel::II2bi => KnownResult::CycleGasConditional,
            CaseLabel::II2bii | CaseLabel::II2biii | CaseLabel::II2biv => KnownResult::Open,
            CaseLabel::ZExtinct => KnownResult::ZExtinct,
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnownResult {
    #[serde(rename = "Ex_GAS")]
    ExGas,
    #[serde(rename = "Exy_GAS_R3")]
    ExyGasR3,
    #[serde(rename = "persistence")]
    Persistence,
    #[serde(rename = "cycle_GAS_conditional")]
    CycleGasConditional,
    #[serde(rename = "open")]
    Open,
    /// Tail of z tends to zero; the (x, y) dynamics follow the planar subsystem.
    #[serde(rename = "z_extinct")]
    ZExtinct,
}

impl fmt::Display for KnownResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnownResult::ExGas => "Ex GAS",
            KnownResult::ExyGasR3 => "Exy GAS in R3+",
            KnownResult::Persistence => "uniform persistence",
            KnownResult::CycleGasConditional => "planar cycle GAS under the Floquet and f conditions",
            KnownResult::Open => "open",
            KnownResult::ZExtinct => "top predator extinct",
        })
    }
}

/// A decisive inequality that held with equality up to the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFlag {
    M1EqD1,
    Lambda1EqOne,
    M2EqD2,
    A1EqOne,
    Lambda1EqHopf,
    Lambda2EqPLambda1,
    Lambda2EqPMax,
}

impl fmt::Display for BoundaryFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryFlag::M1EqD1 => "m1 = d1",
            BoundaryFlag::Lambda1EqOne => "lambda1 = 1",
            BoundaryFlag::M2EqD2 => "m2 = d2",
            BoundaryFlag::A1EqOne => "a1 = 1",
            BoundaryFlag::Lambda1EqHopf => "lambda1 = (1-a1)/2",
            BoundaryFlag::Lambda2EqPLambda1 => "lambda2 = p(lambda1)",
            BoundaryFlag::Lambda2EqPMax => "lambda2 = (1+a1)^2/4",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Case {
    pub label: CaseLabel,
    pub known_result: KnownResult,
    pub boundary_flags: Vec<BoundaryFlag>,
}

pub fn classify(p: &ParameterSet) -> Table1Case {
    classify_with(p, DEFAULT_CLASS_EPS)
}

/// Classification with equality tolerance `eps`. Values within `eps` of a
/// threshold are treated as equal and flagged; equality goes to the row whose
/// inequality is non-strict (`>=` or `<=`).
pub fn classify_with(p: &ParameterSet, eps: f64) -> Table1Case {
    let dp = derived(p);
    let mut flags = Vec::new();
    let mut near = |a: f64, b: f64, flag: BoundaryFlag| {
        if (a - b).abs() <= eps {
            flags.push(flag);
        }
    };

    near(p.m1, p.d1, BoundaryFlag::M1EqD1);
    let label = 'case: {
        let Some(l1) = dp.lambda1().filter(|_| p.m1 - p.d1 > eps) else {
            break 'case CaseLabel::I;
        };
        near(l1, 1.0, BoundaryFlag::Lambda1EqOne);
        if l1 >= 1.0 - eps {
            break 'case CaseLabel::I;
        }
        near(p.m2, p.d2, BoundaryFlag::M2EqD2);
        let Some(l2) = dp.lambda2().filter(|_| p.m2 - p.d2 > eps) else {
            break 'case CaseLabel::ZExtinct;
        };
        let pl1 = prey_isocline(p.a1, l1);
        near(p.a1, 1.0, BoundaryFlag::A1EqOne);
        if p.a1 >= 1.0 - eps {
            near(l2, pl1, BoundaryFlag::Lambda2EqPLambda1);
            break 'case if l2 > pl1 + eps { CaseLabel::II1a } else { CaseLabel::II1b };
        }
        near(l1, dp.hopf_threshold, BoundaryFlag::Lambda1EqHopf);
        if l1 >= dp.hopf_threshold - eps {
            near(l2, pl1, BoundaryFlag::Lambda2EqPLambda1);
            break 'case if l2 > pl1 + eps { CaseLabel::II2ai } else { CaseLabel::II2aii };
        }
        near(l2, dp.p_max, BoundaryFlag::Lambda2EqPMax);
        if l2 > dp.p_max + eps {
            break 'case CaseLabel::II2bi;
        }
        if l2 >= dp.p_max - eps {
            break 'case CaseLabel::II2bii;
        }
        near(l2, pl1, BoundaryFlag::Lambda2EqPLambda1);
        if l2 > pl1 + eps {
            CaseLabel::II2biii
        } else {
            CaseLabel::II2biv
        }
    };
    Table1Case { label, known_result: label.known_result(), boundary_flags: flags }
}

/// Everything `classify` knows about a parameter set, in report form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub label: CaseLabel,
    pub known_result: KnownResult,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub p_lambda1: Option<f64>,
    pub p_max: f64,
    pub hopf_threshold: f64,
    pub boundary_flags: Vec<BoundaryFlag>,
    pub equilibria: Vec<Equilibrium>,
    pub eps_class: f64,
    #[serde(skip)]
    pub derived: DerivedParams,
    #[serde(skip)]
    pub interior_absence: Option<AbsenceReason>,
    #[serde(skip)]
    pub tangency: bool,
}

pub fn classification_report(p: &ParameterSet, eps: f64) -> ClassificationReport {
    let case = classify_with(p, eps);
    let dp = derived(p);
    let interior = interior_equilibria_with(p, eps);
    let mut equilibria = boundary_equilibria_with(p, eps);
    equilibria.extend(interior.equilibria);
    ClassificationReport {
        label: case.label,
        known_result: case.known_result,
        lambda1: dp.lambda1(),
        lambda2: dp.lambda2(),
        p_lambda1: dp.p_of_lambda1,
        p_max: dp.p_max,
        hopf_threshold: dp.hopf_threshold,
        boundary_flags: case.boundary_flags,
        equilibria,
        eps_class: eps,
        derived: dp,
        interior_absence: interior.absence,
        tangency: interior.tangency,
    }
}

/// All equilibria, boundary first.
pub fn all_equilibria(p: &ParameterSet) -> Vec<Equilibrium> {
    let mut v = boundary_equilibria(p);
    v.extend(interior_equilibria(p));
    v
}
