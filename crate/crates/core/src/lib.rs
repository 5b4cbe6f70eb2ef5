//! Analysis of the nondimensional Holling type II three-species food chain:
//! equilibria and their classification, adaptive integration, the planar
//! limit cycle with its Floquet multipliers, and the numerical experiments
//! built on top of them.

pub mod complex_json;
pub mod cycles;
pub mod equilibria;
pub mod error;
pub mod integrator;
pub mod model;
pub mod ode;
pub mod poly;
pub mod scenarios;

pub use equilibria::{
    boundary_equilibria, classify, classify_with, interior_equilibria, routh_hurwitz, CaseLabel, Equilibrium,
    EquilibriumKind, KnownResult, RouthHurwitzRecord, Stability, Table1Case,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use model::{derived, hp_convert, jacobian, rescale, rhs, DerivedParams, DimensionalParams, ParamName, ParameterSet, State};
