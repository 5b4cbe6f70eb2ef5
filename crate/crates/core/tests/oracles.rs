mod common;

use foodchain::cycles::{find_h2_cycle, floquet, CycleOptions};
use foodchain::integrator::{integrate, IntegratorConfig};
use foodchain::scenarios::{lyapunov_exponent, table2_base, LyapunovOptions};
use foodchain::{rescale, DimensionalParams, State};

#[test]
fn rescaled_flow_matches_dimensional_flow() {
    let q = DimensionalParams { r: 2.0, k: 3.0, c1: 0.7, c2: 0.4, d1: 0.8, d2: 0.05, m1: 3.2, m2: 0.12, a1: 0.9, a2: 1.1 };
    let p = rescale(&q).unwrap();
    let big0 = [1.2, 0.8, 0.6];
    let big_t = 10.0;
    let big1 = common::rk4_flow(&|u: &[f64; 3]| common::dimensional_field(&q, u), &big0, big_t, 200_000);

    let s0 = q.rescale_state(big0[0], big0[1], big0[2]);
    let t = q.rescale_time(big_t);
    let cfg = IntegratorConfig { t_end: t, t_transient: 0.0, ..Default::default() };
    let tr = integrate(&p, &s0, &cfg).unwrap();
    let got = tr.states[tr.index_at(t)];
    assert!((tr.times[tr.index_at(t)] - t).abs() < 1e-12);
    let want = q.rescale_state(big1[0], big1[1], big1[2]);
    for (g, w) in got.to_array().iter().zip(want.to_array()) {
        assert!(common::rel_err(*g, w) < 1e-7, "{got} vs {want}");
    }
}

#[test]
fn m33_agrees_three_ways() {
    let opts = CycleOptions::default();
    let c = find_h2_cycle(&table2_base(0.033), &opts).unwrap();
    for m2 in [0.033, 0.042, 0.065] {
        let p = table2_base(m2);
        let f = floquet(&p, &c, &opts).unwrap();
        // one-sided perturbation of z by 1e-8, renormalised
        let mut u = c.start().to_array();
        u[2] = 1e-8;
        let end = common::rk4_flow(&|v: &[f64; 3]| common::field(&p, v), &u, c.period, 60_000);
        let fd = end[2] / 1e-8;
        assert!(common::rel_err(f.m33, fd) < 1e-6, "m2 = {m2}: {} vs {fd}", f.m33);
        assert!(common::rel_err(f.m33_closed_form, fd) < 1e-6, "m2 = {m2}: {} vs {fd}", f.m33_closed_form);
    }
}

#[test]
fn lyapunov_matches_two_trajectory_separation() {
    let p = table2_base(0.065);
    let s0 = [0.86, 0.16, 0.89];
    let opts = LyapunovOptions { t_average: 20_000.0, ..Default::default() };
    let est = lyapunov_exponent(&p, &State::from_array(s0).unwrap(), &IntegratorConfig::default(), &opts).unwrap();
    let oracle = common::two_trajectory_lyapunov(&p, s0, 0.01, 1.0, opts.t_discard, opts.t_average);
    assert!(est.lambda_max > 0.0 && oracle > 0.0, "{} vs {oracle}", est.lambda_max);
    assert!(common::rel_err(est.lambda_max, oracle) < 0.25, "{} vs {oracle}", est.lambda_max);
}
