//! Model equations for the nondimensional Holling type II food chain
//!
//! ```text
//! x' = x (1 - x - y / (a1 + x))
//! y' = y (-d1 + m1 x / (a1 + x) - z / (a2 + y))
//! z' = z (-d2 + m2 y / (a2 + y))
//! ```
//!
//! together with the rescaling from the dimensional model, the break-even
//! densities `lambda1`, `lambda2` and the analytic Jacobian. Everything else in
//! the crate evaluates the vector field through this module.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Default tolerance used when comparing a derived quantity against a
/// classification threshold.
pub const DEFAULT_CLASS_EPS: f64 = 1e-12;

/// Negative overshoots down to this magnitude are clamped to zero.
pub const EPS_NEG: f64 = 1e-12;

/// Parameters of the dimensional model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Intrinsic growth rate of the prey.
    pub r: f64,
    /// Carrying capacity of the prey.
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub m1: f64,
    pub m2: f64,
    /// Half-saturation density of the intermediate predator's response.
    pub a1: f64,
    /// Half-saturation density of the top predator's response.
    pub a2: f64,
}

impl DimensionalParams {
    fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("R", self.r),
            ("K", self.k),
            ("C1", self.c1),
            ("C2", self.c2),
            ("D1", self.d1),
            ("D2", self.d2),
            ("M1", self.m1),
            ("M2", self.m2),
            ("A1", self.a1),
            ("A2", self.a2),
        ];
        for (name, value) in fields {
            check_positive(name, value)?;
        }
        Ok(())
    }

    /// Maps dimensional densities `(X, Y, Z)` to the nondimensional state.
    pub fn rescale_state(&self, big_x: f64, big_y: f64, big_z: f64) -> State {
        State {
            x: big_x / self.k,
            y: self.m1 * big_y / (self.c1 * self.k * self.r),
            z: self.m1 * self.m2 * big_z / (self.c1 * self.c2 * self.k * self.r * self.r),
        }
    }

    /// Nondimensional time corresponding to dimensional time `t`.
    pub fn rescale_time(&self, t: f64) -> f64 {
        self.r * t
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositive { field: name, value })
    }
}

/// The six nondimensional parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameterSet")]
pub struct ParameterSet {
    pub a1: f64,
    pub a2: f64,
    pub d1: f64,
    pub d2: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Deserialize)]
struct RawParameterSet {
    a1: f64,
    a2: f64,
    d1: f64,
    d2: f64,
    m1: f64,
    m2: f64,
}

impl TryFrom<RawParameterSet> for ParameterSet {
    type Error = ModelError;

    fn try_from(raw: RawParameterSet) -> Result<Self, Self::Error> {
        ParameterSet::new(raw.a1, raw.a2, raw.d1, raw.d2, raw.m1, raw.m2)
    }
}

/// Identifies one of the six parameters, e.g. for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    A1,
    A2,
    D1,
    D2,
    M1,
    M2,
}

impl ParamName {
    pub const ALL: [ParamName; 6] = [
        ParamName::A1,
        ParamName::A2,
        ParamName::D1,
        ParamName::D2,
        ParamName::M1,
        ParamName::M2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::A1 => "a1",
            ParamName::A2 => "a2",
            ParamName::D1 => "d1",
            ParamName::D2 => "d2",
            ParamName::M1 => "m1",
            ParamName::M2 => "m2",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParamName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ModelError::UnknownParameter(s.to_string()))
    }
}

impl ParameterSet {
    pub fn new(a1: f64, a2: f64, d1: f64, d2: f64, m1: f64, m2: f64) -> Result<Self, ModelError> {
        check_positive("a1", a1)?;
        check_positive("a2", a2)?;
        check_positive("d1", d1)?;
        check_positive("d2", d2)?;
        check_positive("m1", m1)?;
        check_positive("m2", m2)?;
        Ok(Self { a1, a2, d1, d2, m1, m2 })
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::A1 => self.a1,
            ParamName::A2 => self.a2,
            ParamName::D1 => self.d1,
            ParamName::D2 => self.d2,
            ParamName::M1 => self.m1,
            ParamName::M2 => self.m2,
        }
    }

    /// Returns a copy with one parameter replaced.
    pub fn with(&self, name: ParamName, value: f64) -> Result<Self, ModelError> {
        let mut p = *self;
        match name {
            ParamName::A1 => p.a1 = value,
            ParamName::A2 => p.a2 = value,
            ParamName::D1 => p.d1 = value,
            ParamName::D2 => p.d2 = value,
            ParamName::M1 => p.m1 = value,
            ParamName::M2 => p.m2 = value,
        }
        ParameterSet::new(p.a1, p.a2, p.d1, p.d2, p.m1, p.m2)
    }

    /// Prey isocline `p(x) = (1 - x)(a1 + x)`.
    pub fn isocline(&self, x: f64) -> f64 {
        prey_isocline(self.a1, x)
    }

    pub fn derived(&self) -> DerivedParams {
        derived(self)
    }
}

/// `p(x) = (1 - x)(a1 + x)`.
pub fn prey_isocline(a1: f64, x: f64) -> f64 {
    (1.0 - x) * (a1 + x)
}

/// A point of the nonnegative octant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State {
    pub const fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Builds a state, clamping overshoots in `[-EPS_NEG, 0)` to zero.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        Self::from_array([x, y, z])
    }

    pub fn from_array(a: [f64; 3]) -> Result<Self, ModelError> {
        let mut out = [0.0; 3];
        for (i, (&v, o)) in a.iter().zip(out.iter_mut()).enumerate() {
            if !v.is_finite() || v < -EPS_NEG {
                return Err(ModelError::NegativeState { index: i, value: v });
            }
            *o = if v < 0.0 { 0.0 } else { v };
        }
        Ok(Self { x: out[0], y: out[1], z: out[2] })
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &State) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Clamps components in `[-EPS_NEG, 0)` to `+0.0` in place.
pub fn clamp_small_negatives(v: &mut [f64]) {
    for c in v.iter_mut() {
        if *c < 0.0 && *c >= -EPS_NEG {
            *c = 0.0;
        }
    }
}

/// Right-hand side of the nondimensional model.
pub fn rhs(p: &ParameterSet, s: &State) -> [f64; 3] {
    rhs_array(p, &s.to_array())
}

#[inline]
pub fn rhs_array(p: &ParameterSet, s: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *s;
    [
        x * (1.0 - x - y / (p.a1 + x)),
        y * (-p.d1 + p.m1 * x / (p.a1 + x) - z / (p.a2 + y)),
        z * (-p.d2 + p.m2 * y / (p.a2 + y)),
    ]
}

/// Analytic Jacobian of [`rhs`]. Entries `(0, 2)` and `(2, 0)` are exactly zero.
pub fn jacobian(p: &ParameterSet, s: &State) -> [[f64; 3]; 3] {
    jacobian_array(p, &s.to_array())
}

#[inline]
pub fn jacobian_array(p: &ParameterSet, s: &[f64; 3]) -> [[f64; 3]; 3] {
    let [x, y, z] = *s;
    let ax = p.a1 + x;
    let ay = p.a2 + y;
    [
        [1.0 - 2.0 * x - p.a1 * y / (ax * ax), -x / ax, 0.0],
        [
            p.a1 * p.m1 * y / (ax * ax),
            -p.d1 + p.m1 * x / ax - p.a2 * z / (ay * ay),
            -y / ay,
        ],
        [0.0, p.a2 * p.m2 * z / (ay * ay), -p.d2 + p.m2 * y / ay],
    ]
}

/// Rescales a dimensional parameter set.
pub fn rescale(p: &DimensionalParams) -> Result<ParameterSet, ModelError> {
    p.validate()?;
    ParameterSet::new(
        p.a1 / p.k,
        p.m1 * p.a2 / (p.c1 * p.k * p.r),
        p.d1 / p.r,
        p.d2 / p.r,
        p.m1 / p.r,
        p.m2 / p.r,
    )
}

/// Why a break-even density is not defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedReason {
    /// `m1 <= d1`: the intermediate predator cannot outgrow its death rate.
    IntermediateCannotGrow,
    /// `m2 <= d2`: the top predator cannot outgrow its death rate.
    TopCannotGrow,
}

/// `lambda_i = a_i d_i / (m_i - d_i)`, or the reason it is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BreakEven {
    Defined { value: f64 },
    Undefined { reason: UndefinedReason },
}

impl BreakEven {
    fn compute(a: f64, d: f64, m: f64, reason: UndefinedReason) -> Self {
        if m > d {
            BreakEven::Defined { value: a * d / (m - d) }
        } else {
            BreakEven::Undefined { reason }
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            BreakEven::Defined { value } => Some(value),
            BreakEven::Undefined { .. } => None,
        }
    }
}

/// Quantities derived from a [`ParameterSet`] that drive the classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub lambda1: BreakEven,
    pub lambda2: BreakEven,
    /// `p(lambda1)`, present whenever `lambda1` is.
    pub p_of_lambda1: Option<f64>,
    /// `(1 - a1) / 2`, the vertex of the prey isocline.
    pub hopf_threshold: f64,
    /// `(1 + a1)^2 / 4`, the maximum of the prey isocline.
    pub p_max: f64,
    pub a1_ge_one: bool,
    /// `0 < lambda1 < 1`.
    pub a1_holds: bool,
    /// `d2 < m2`.
    pub a2_holds: bool,
}

impl DerivedParams {
    pub fn lambda1(&self) -> Option<f64> {
        self.lambda1.value()
    }

    pub fn lambda2(&self) -> Option<f64> {
        self.lambda2.value()
    }
}

pub fn derived(p: &ParameterSet) -> DerivedParams {
    let lambda1 = BreakEven::compute(p.a1, p.d1, p.m1, UndefinedReason::IntermediateCannotGrow);
    let lambda2 = BreakEven::compute(p.a2, p.d2, p.m2, UndefinedReason::TopCannotGrow);
    let hopf_threshold = (1.0 - p.a1) / 2.0;
    let p_of_lambda1 = lambda1.value().map(|l| prey_isocline(p.a1, l));
    let a1_holds = lambda1.value().is_some_and(|l| l > 0.0 && l < 1.0);
    DerivedParams {
        lambda1,
        lambda2,
        p_of_lambda1,
        hopf_threshold,
        p_max: prey_isocline(p.a1, hopf_threshold),
        a1_ge_one: p.a1 >= 1.0,
        a1_holds,
        a2_holds: p.d2 < p.m2,
    }
}

/// One row of a literature parameter table for the model written with
/// responses `a_i u / (1 + b_i u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiteratureRow {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Converts a literature row: `m_i = a_i / b_i`, `a_i = 1 / b_i`, death rates unchanged.
pub fn hp_convert(row: &LiteratureRow) -> Result<ParameterSet, ModelError> {
    check_positive("a1", row.a1)?;
    check_positive("b1", row.b1)?;
    check_positive("a2", row.a2)?;
    check_positive("b2", row.b2)?;
    check_positive("d1", row.d1)?;
    check_positive("d2", row.d2)?;
    ParameterSet::new(
        1.0 / row.b1,
        1.0 / row.b2,
        row.d1,
        row.d2,
        row.a1 / row.b1,
        row.a2 / row.b2,
    )
}
