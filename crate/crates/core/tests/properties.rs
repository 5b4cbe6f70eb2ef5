mod common;

use foodchain::equilibria::all_equilibria;
use foodchain::integrator::{attracting_set_check, classify_attractor, integrate, AttractorKind, IntegratorConfig};
use foodchain::model::EPS_NEG;
use foodchain::scenarios::{
    basin_sample, log_grid, lyapunov_exponent, sweep, table2_base, ExperimentConfig, LyapunovOptions, LyapunovVerdict,
};
use foodchain::{jacobian, ParamName, ParameterSet, State};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ParameterSet> {
    (0.05f64..2.0, 0.05f64..2.0, 0.05f64..1.0, 0.01f64..1.0, 0.1f64..4.0, 0.05f64..2.0)
        .prop_map(|(a1, a2, d1, d2, m1, m2)| ParameterSet::new(a1, a2, d1, d2, m1, m2).unwrap())
}

fn short() -> IntegratorConfig {
    IntegratorConfig { t_end: 200.0, t_transient: 100.0, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn trajectories_stay_nonnegative(p in params(), s in (0.0f64..2.0, 0.0f64..3.0, 0.0f64..3.0)) {
        let tr = integrate(&p, &State::new_unchecked(s.0, s.1, s.2), &short()).unwrap();
        for st in &tr.states {
            prop_assert!(st.x >= -EPS_NEG && st.y >= -EPS_NEG && st.z >= -EPS_NEG, "{}", st);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zero_coordinates_stay_exactly_zero(p in params(), s in (0.01f64..1.0, 0.01f64..2.0, 0.01f64..2.0), mask in 1u8..8) {
        let s0 = [s.0, s.1, s.2];
        let s0: [f64; 3] = std::array::from_fn(|i| if mask & (1 << i) != 0 { 0.0 } else { s0[i] });
        let tr = integrate(&p, &State::from_array(s0).unwrap(), &short()).unwrap();
        for st in &tr.states {
            for (v, v0) in st.to_array().iter().zip(s0) {
                if v0 == 0.0 {
                    prop_assert_eq!(v.to_bits(), 0u64);
                }
            }
        }
    }

    #[test]
    fn jacobian_has_food_chain_structure(p in params(), s in (0.0f64..2.0, 0.0f64..3.0, 0.0f64..3.0)) {
        let j = jacobian(&p, &State::new_unchecked(s.0, s.1, s.2));
        prop_assert_eq!(j[0][2], 0.0);
        prop_assert_eq!(j[2][0], 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // lambda1 >= 1, so every trajectory converges to the prey-only state
    #[test]
    fn halving_tolerances_moves_terminal_state_little(
        a1 in 0.1f64..2.0, m1 in 0.2f64..2.0, k in 1.05f64..3.0,
        a2 in 0.1f64..2.0, d2 in 0.05f64..1.0, m2 in 0.1f64..2.0,
        s in (0.01f64..1.0, 0.01f64..2.0, 0.01f64..2.0),
    ) {
        let d1 = k * m1 / (a1 + 1.0);
        let p = ParameterSet::new(a1, a2, d1, d2, m1, m2).unwrap();
        let s0 = State::new_unchecked(s.0, s.1, s.2);
        let coarse = IntegratorConfig { t_end: 300.0, t_transient: 0.0, ..Default::default() };
        let fine = IntegratorConfig { rtol: coarse.rtol / 2.0, atol: coarse.atol / 2.0, ..coarse };
        let a = *integrate(&p, &s0, &coarse).unwrap().last().unwrap();
        let b = *integrate(&p, &s0, &fine).unwrap().last().unwrap();
        for (u, v) in a.to_array().iter().zip(b.to_array()) {
            prop_assert!((u - v).abs() < 10.0 * (coarse.atol + coarse.rtol * u.abs()), "{} vs {}", a, b);
        }
    }
}

#[test]
fn attracting_set_bound_fails_for_large_conversion() {
    // m1 > 1: the planar cycle overshoots x + y <= 1 + 1/(4 d1)
    let p = ParameterSet::new(0.2, 0.9, 0.5, 0.5, 3.0, 0.6).unwrap();
    let cfg = IntegratorConfig { t_end: 3_000.0, t_transient: 2_000.0, ..Default::default() };
    let tr = integrate(&p, &State::new_unchecked(0.5, 0.1, 0.0), &cfg).unwrap();
    let check = attracting_set_check(&tr, &p);
    assert!(!check.inside);
    let peak = tr.states[tr.index_at(2_000.0)..].iter().map(|s| s.x + s.y).fold(0.0, f64::max);
    assert!(peak > 2.0 * check.bounds[1] - 1.0, "{peak}");
}

#[test]
fn lyapunov_sign_agrees_with_attractor() {
    let integ = IntegratorConfig::default();
    let opts = LyapunovOptions { t_average: 5_000.0, ..Default::default() };
    let cases = [
        (table2_base(0.033), [0.5266, 0.3913, 0.8546]),
        (ParameterSet::new(1.2, 1.0, 0.5, 0.5, 2.0, 0.9).unwrap(), [0.3, 0.5, 0.5]),
        (ParameterSet::new(1.0, 0.5, 0.3, 0.1, 0.5, 0.5).unwrap(), [0.2, 0.4, 0.7]),
        (table2_base(0.065), [0.86, 0.16, 0.89]),
    ];
    for (p, s0) in cases {
        let s0 = State::from_array(s0).unwrap();
        let v = classify_attractor(&integrate(&p, &s0, &integ).unwrap(), &all_equilibria(&p), &Default::default()).unwrap();
        let est = lyapunov_exponent(&p, &s0, &integ, &opts).unwrap();
        let at_equilibrium = matches!(v.kind, AttractorKind::Equilibrium | AttractorKind::ZExtinctEquilibrium);
        if at_equilibrium {
            assert_eq!(est.verdict, LyapunovVerdict::Negative, "{p:?}: {}", est.lambda_max);
        }
        assert!(!(at_equilibrium && est.verdict == LyapunovVerdict::Positive));
    }
}

#[test]
fn sweep_verdicts_respect_transversal_sign() {
    let cfg = ExperimentConfig::default();
    let res = sweep(&table2_base(0.033), ParamName::M2, 0.03, 0.07, 0.001, &cfg).unwrap();
    assert_eq!(res.records.len(), 41);
    for r in &res.records {
        let ta = r.transversal_average.expect("the planar cycle exists for every m2");
        if ta > 0.0 {
            assert_ne!(r.attractor, AttractorKind::BoundaryCycle, "m2 = {}: {ta:e}", r.value);
        }
    }
}

#[test]
fn basin_map_is_deterministic() {
    let p = table2_base(0.033);
    let cfg = ExperimentConfig {
        integrator: IntegratorConfig { t_end: 4_000.0, t_transient: 2_000.0, ..Default::default() },
        ..Default::default()
    };
    let grid = log_grid(&p, [(1e-2, 1.0), (1e-2, 1.0), (1e-2, 1.0)], 3);
    let a = basin_sample(&p, &grid, &cfg).unwrap();
    let b = basin_sample(&p, &grid, &cfg).unwrap();
    assert_eq!(a, b);
}
