mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use foodchain::cycles::{f_condition, find_h2_cycle, floquet};
use foodchain::equilibria::{all_equilibria, classification_report, Equilibrium};
use foodchain::integrator::{classify_attractor, integrate, AttractorTarget};
use foodchain::scenarios::{
    basin_sample, global_stability_probe, hsu_set, log_grid, run_table2, run_table3, sweep,
};
use foodchain::{CaseLabel, Complex64, ParamName, ParameterSet, State};
use serde::Serialize;

use config::{load_config, load_params, PartialParams, RunConfig, SweepSpec};
use output::{g, g_opt, table, Format, Sink};

#[derive(Parser)]
#[command(name = "foodchain", version, about = "Equilibria, cycles and attractors of a three-species food chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ParamArgs {
    /// Half-saturation density of the intermediate predator's response.
    #[arg(long)]
    a1: Option<f64>,
    /// Half-saturation density of the top predator's response.
    #[arg(long)]
    a2: Option<f64>,
    /// Death rate of the intermediate predator.
    #[arg(long)]
    d1: Option<f64>,
    /// Death rate of the top predator.
    #[arg(long)]
    d2: Option<f64>,
    /// Maximal growth rate of the intermediate predator.
    #[arg(long)]
    m1: Option<f64>,
    /// Maximal growth rate of the top predator.
    #[arg(long)]
    m2: Option<f64>,
    /// JSON file with any of a1, a2, d1, d2, m1, m2; inline flags win.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Run configuration (or an earlier report, whose embedded config is used).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Equality tolerance for the classification thresholds.
    #[arg(long, value_name = "EPS")]
    lambda_tolerance: Option<f64>,
    /// Directory for the report files.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Artifact format; without --out-dir, json or csv goes to stdout.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed for random initial states.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    /// Final integration time.
    #[arg(long)]
    t_end: Option<f64>,
    /// Start of the tail used for attractor verdicts.
    #[arg(long)]
    t_transient: Option<f64>,
    /// Spacing of the stored trajectory samples.
    #[arg(long)]
    dense_dt: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    /// Classification, Floquet data and basins for m2 = 0.033, 0.042, 0.065.
    Table2,
    /// Classification of three literature parameter sets.
    Table3,
    /// Global stability probe of the planar cycle for the Hsu set.
    HsuGas,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::HsuGas => "hsu-gas",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Break-even densities, classification case and equilibria.
    #[command(allow_negative_numbers = true)]
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// All equilibria with eigenvalues and Routh-Hurwitz data.
    #[command(allow_negative_numbers = true)]
    Equilibria {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Integrate from one initial state and classify the attractor.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long)]
        z0: Option<f64>,
    },
    /// Limit cycle of the predator-prey plane z = 0.
    #[command(allow_negative_numbers = true)]
    Cycle {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Floquet multipliers of the planar cycle in the full system.
    #[command(allow_negative_numbers = true)]
    Floquet {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Vary one parameter over an inclusive range.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        param: Option<ParamName>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Attractors reached from a log-spaced grid of initial states.
    #[command(allow_negative_numbers = true)]
    Basin {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Points per axis.
        #[arg(long)]
        grid_n: Option<usize>,
    },
    /// Run a named experiment into a report directory (default reproduce-<name>).
    #[command(allow_negative_numbers = true)]
    Reproduce {
        #[arg(value_enum)]
        experiment: Experiment,
        #[command(flatten)]
        run: RunArgs,
        /// Random starts for hsu-gas.
        #[arg(long)]
        starts: Option<usize>,
    },
}

fn lib<E: Into<foodchain::Error>>(e: E) -> anyhow::Error {
    anyhow::Error::new(e.into())
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    lib(foodchain::Error::usage(msg))
}

fn build_config(params: &ParamArgs, run: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(path) => load_config(path).map_err(|e| usage(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    if let Some(path) = &params.params {
        cfg.params.overlay(&load_params(path).map_err(|e| usage(format!("{e:#}")))?);
    }
    let inline = PartialParams { a1: params.a1, a2: params.a2, d1: params.d1, d2: params.d2, m1: params.m1, m2: params.m2 };
    cfg.params.overlay(&inline);

    let e = &mut cfg.experiment;
    let i = &mut e.integrator;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut e.eps_class, run.lambda_tolerance);
    set(&mut i.rtol, run.rtol);
    set(&mut i.atol, run.atol);
    set(&mut i.max_step, run.max_step);
    set(&mut i.t_end, run.t_end);
    set(&mut i.t_transient, run.t_transient);
    set(&mut i.dense_output_dt, run.dense_dt);
    if let Some(s) = run.seed {
        i.seed = s;
    }
    if !(cfg.experiment.eps_class >= 0.0) {
        return Err(usage("--lambda-tolerance must be nonnegative"));
    }
    cfg.experiment.integrator.validate().map_err(lib)?;
    Ok(cfg)
}

fn sink(command: &str, run: &RunArgs, config: RunConfig, default_dir: Option<PathBuf>) -> anyhow::Result<Sink> {
    let out_dir = run.out_dir.clone().or(default_dir);
    let format = match (run.format, &out_dir) {
        (Some(Format::Both), None) => return Err(usage("--format both needs --out-dir")),
        (Some(f), _) => f,
        (None, Some(_)) => Format::Both,
        (None, None) => Format::Text,
    };
    Ok(Sink { command: command.into(), config, out_dir, format })
}

fn complex(c: &Complex64) -> String {
    if c.im == 0.0 {
        g(c.re)
    } else {
        format!("{}{}{}i", g(c.re), if c.im < 0.0 { "-" } else { "+" }, g(c.im.abs()))
    }
}

fn state(s: &State) -> String {
    format!("({}, {}, {})", g(s.x), g(s.y), g(s.z))
}

fn params_line(p: &ParameterSet) -> String {
    format!("a1={} a2={} d1={} d2={} m1={} m2={}", g(p.a1), g(p.a2), g(p.d1), g(p.d2), g(p.m1), g(p.m2))
}

fn equilibria_table(eqs: &[Equilibrium], with_rh: bool) -> String {
    let mut header = vec!["kind", "x", "y", "z", "stability", "eigenvalues"];
    if with_rh {
        header.extend(["b2", "b1", "b0", "b2*b1-b0", "RH stable"]);
    }
    let rows: Vec<Vec<String>> = eqs
        .iter()
        .map(|e| {
            let mut r = vec![
                format!("{:?}", e.kind),
                g(e.coords.x),
                g(e.coords.y),
                g(e.coords.z),
                format!("{:?}", e.stability).to_lowercase(),
                e.eigenvalues.iter().map(complex).collect::<Vec<_>>().join(", "),
            ];
            if with_rh {
                match &e.rh {
                    Some(rh) => r.extend([g(rh.b2), g(rh.b1), g(rh.b0), g(rh.hurwitz_margin), rh.stable.to_string()]),
                    None => r.extend(std::iter::repeat_n("-".to_string(), 5)),
                }
            }
            r
        })
        .collect();
    table(&header, &rows)
}

fn cmd_classify(params: &ParamArgs, run: &RunArgs, with_rh: bool) -> anyhow::Result<()> {
    let cfg = build_config(params, run)?;
    let p = cfg.params.resolve()?;
    let report = classification_report(&p, cfg.experiment.eps_class);
    let out = sink(if with_rh { "equilibria" } else { "classify" }, run, cfg, None)?;
    if !report.boundary_flags.is_empty() {
        let flags: Vec<String> = report.boundary_flags.iter().map(|f| f.to_string()).collect();
        eprintln!(
            "warning: near-boundary classification (within eps_class = {}): {}",
            report.eps_class,
            flags.join(", ")
        );
    }
    if with_rh {
        out.json("equilibria", &report.equilibria)?;
    } else {
        out.json("classification", &report)?;
    }
    if out.human() {
        println!("parameters    {}", params_line(&p));
        println!("lambda1       {}", g_opt(report.lambda1));
        println!("lambda2       {}", g_opt(report.lambda2));
        println!("p(lambda1)    {}", g_opt(report.p_lambda1));
        println!("(1-a1)/2      {}", g(report.hopf_threshold));
        println!("(1+a1)^2/4    {}", g(report.p_max));
        println!("case          {}", report.label);
        println!("known result  {}", report.known_result);
        if report.label == CaseLabel::I {
            let why = if p.m1 <= p.d1 { "m1 <= d1" } else { "lambda1 >= 1" };
            println!("              y and z die out ({why})");
        }
        println!();
        print!("{}", equilibria_table(&report.equilibria, with_rh));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateResult<'a> {
    verdict: &'a foodchain::integrator::AttractorVerdict,
    events: &'a [foodchain::integrator::Event],
    stats: foodchain::integrator::SolverStats,
    samples: usize,
}

fn cmd_simulate(params: &ParamArgs, run: &RunArgs, x0: Option<f64>, y0: Option<f64>, z0: Option<f64>) -> anyhow::Result<()> {
    let mut cfg = build_config(params, run)?;
    let base = cfg.initial;
    let pick = |v: Option<f64>, i: usize, name: &str| {
        v.or(base.map(|b| b[i])).ok_or_else(|| usage(format!("missing initial state: pass --{name}")))
    };
    let s0 = [pick(x0, 0, "x0")?, pick(y0, 1, "y0")?, pick(z0, 2, "z0")?];
    cfg.initial = Some(s0);
    let p = cfg.params.resolve()?;
    let s0 = State::from_array(s0).map_err(lib)?;
    let integ = cfg.experiment.integrator;
    let th = cfg.experiment.thresholds;
    let out = sink("simulate", run, cfg, None)?;

    let tr = match integrate(&p, &s0, &integ) {
        Ok(tr) => tr,
        Err(e) => {
            if let Some(partial) = e.partial() {
                out.csv("trajectory_partial", |w| partial.write_csv(w))?;
            }
            return Err(lib(e));
        }
    };
    let verdict = classify_attractor(&tr, &all_equilibria(&p), &th).map_err(lib)?;
    out.csv("trajectory", |w| tr.write_csv(w))?;
    out.json("verdict", &SimulateResult { verdict: &verdict, events: &tr.events, stats: tr.stats, samples: tr.len() })?;
    if out.human() {
        let d = &verdict.diagnostics;
        println!("parameters   {}", params_line(&p));
        println!("initial      {}", state(&s0));
        println!("verdict      {}", verdict.kind);
        match &verdict.target {
            Some(AttractorTarget::Equilibrium(e)) => println!("target       {:?} at {}", e.kind, state(&e.coords)),
            Some(AttractorTarget::Cycle(c)) => println!(
                "target       cycle, period {}, y in [{}, {}], mean z {}",
                g(c.period),
                g(c.y_min),
                g(c.y_max),
                g(c.z_mean)
            ),
            None => {}
        }
        println!("final state  {}", state(&d.final_state));
        println!("tail         t in [{}, {}], amplitude ({}, {}, {})", g(d.t_transient), g(d.t_end), g(d.amplitude[0]), g(d.amplitude[1]), g(d.amplitude[2]));
        println!("section      {} returns, recurrence residual {}", d.section_returns, g_opt(d.recurrence_residual));
        println!("solver       {} evaluations, {} accepted, {} rejected steps", tr.stats.nfev, tr.stats.naccept, tr.stats.nreject);
    }
    Ok(())
}

fn cmd_cycle(params: &ParamArgs, run: &RunArgs, with_floquet: bool) -> anyhow::Result<()> {
    let cfg = build_config(params, run)?;
    let p = cfg.params.resolve()?;
    let opts = cfg.experiment.cycle;
    let out = sink(if with_floquet { "floquet" } else { "cycle" }, run, cfg, None)?;
    let c = find_h2_cycle(&p, &opts).map_err(lib)?;
    let write_samples = |out: &Sink| {
        out.csv("cycle", |w| {
            use std::io::Write;
            writeln!(w, "t,x,y")?;
            for (t, s) in c.times.iter().zip(&c.samples) {
                writeln!(w, "{t},{},{}", s.x, s.y)?;
            }
            Ok(())
        })
    };
    if !with_floquet {
        write_samples(&out)?;
        out.json("cycle", &c)?;
        if out.human() {
            println!("parameters   {}", params_line(&p));
            println!("period       {}", g(c.period));
            println!("section      {} = {} ({})", c.section.coordinate, g(c.section.level), c.section.direction);
            println!("x range      [{}, {}]", g(c.x_min), g(c.x_max));
            println!("y range      [{}, {}]", g(c.y_min), g(c.y_max));
            println!("residual     {} after {} returns", g(c.convergence_residual), c.returns);
        }
        return Ok(());
    }
    let f = floquet(&p, &c, &opts).map_err(lib)?;
    let fc = f_condition(&p, None).ok();
    #[derive(Serialize)]
    struct FloquetReport<'a> {
        cycle: &'a foodchain::cycles::LimitCycle,
        floquet: &'a foodchain::cycles::FloquetResult,
        #[serde(skip_serializing_if = "Option::is_none")]
        f_condition: Option<foodchain::cycles::FCondition>,
    }
    write_samples(&out)?;
    out.json("floquet", &FloquetReport { cycle: &c, floquet: &f, f_condition: fc })?;
    if out.human() {
        println!("parameters           {}", params_line(&p));
        println!("period               {}", g(f.period));
        println!("multipliers          {}", f.multipliers.iter().map(complex).collect::<Vec<_>>().join(", "));
        println!("|mu - 1| (trivial)   {}", g(f.trivial_multiplier_error));
        println!("in-plane multiplier  {}", g(f.in_plane_multiplier));
        println!("M33                  {} (quadrature {})", g(f.m33), g(f.m33_closed_form));
        println!("transversal average  {}", g(f.transversal_average));
        println!("stable in R3         {}", f.stable_in_r3);
        if let Some(fc) = fc {
            println!("f condition          {} > {}: {} (y_M = {})", g(fc.lhs), g(fc.rhs), fc.holds, g(fc.y_m));
        }
    }
    Ok(())
}

fn cmd_sweep(
    params: &ParamArgs,
    run: &RunArgs,
    param: Option<ParamName>,
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
) -> anyhow::Result<()> {
    let mut cfg = build_config(params, run)?;
    let prev = cfg.sweep.clone();
    let spec = SweepSpec {
        param: param.or(prev.as_ref().map(|s| s.param)).ok_or_else(|| usage("missing --param"))?,
        from: from.or(prev.as_ref().map(|s| s.from)).ok_or_else(|| usage("missing --from"))?,
        to: to.or(prev.as_ref().map(|s| s.to)).ok_or_else(|| usage("missing --to"))?,
        step: step.or(prev.as_ref().map(|s| s.step)).ok_or_else(|| usage("missing --step"))?,
    };
    cfg.params.set_default(spec.param, spec.from);
    cfg.sweep = Some(spec.clone());
    let p = cfg.params.resolve()?;
    let exp = cfg.experiment;
    let out = sink("sweep", run, cfg, None)?;
    let res = sweep(&p, spec.param, spec.from, spec.to, spec.step, &exp).map_err(lib)?;
    out.csv("sweep", |w| res.write_csv(w))?;
    out.json("sweep", &res)?;
    if out.human() {
        let rows: Vec<Vec<String>> = res
            .records
            .iter()
            .map(|r| {
                let stable = r.interior.iter().filter(|e| e.stability == foodchain::Stability::Stable).count();
                vec![
                    g(r.value),
                    g_opt(r.lambda2),
                    r.label.to_string(),
                    format!("{}/{}", stable, r.interior.len()),
                    g_opt(r.transversal_average),
                    r.attractor.to_string(),
                    format!("[{}, {}]", g(r.tail_y_min), g(r.tail_y_max)),
                ]
            })
            .collect();
        let name = spec.param.as_str();
        print!(
            "{}",
            table(&[name, "lambda2", "case", "stable/interior", "transversal avg", "attractor", "tail y"], &rows)
        );
        println!("{} records from {}", res.records.len(), state(&res.canonical_state));
    }
    Ok(())
}

fn registry_table(reg: &[foodchain::scenarios::RegistryEntry]) -> String {
    let rows: Vec<Vec<String>> = reg
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.kind.to_string(),
                r.equilibrium.map_or("-".into(), |s| state(&s)),
                g_opt(r.period),
                g_opt(r.y_amplitude),
                g(r.tail_z_max),
                r.count.to_string(),
            ]
        })
        .collect();
    table(&["id", "kind", "equilibrium", "period", "y amplitude", "tail z max", "count"], &rows)
}

fn cmd_basin(params: &ParamArgs, run: &RunArgs, grid_n: Option<usize>) -> anyhow::Result<()> {
    let mut cfg = build_config(params, run)?;
    let n = grid_n.or(cfg.grid_points).unwrap_or(5);
    if n == 0 {
        return Err(usage("--grid-n must be positive"));
    }
    cfg.grid_points = Some(n);
    let p = cfg.params.resolve()?;
    let exp = cfg.experiment;
    let out = sink("basin", run, cfg, None)?;
    let grid = log_grid(&p, [(1e-3, 1.0), (1e-3, 1.6), (1e-3, 1.0)], n);
    let map = basin_sample(&p, &grid, &exp).map_err(lib)?;
    out.csv("basin", |w| map.write_csv(w))?;
    out.json("basin", &map)?;
    if out.human() {
        println!("parameters  {}", params_line(&p));
        println!("grid        {} points ({n} per axis, inside the attracting set)", map.points.len());
        println!("verdict     {}", map.verdict);
        println!();
        print!("{}", registry_table(&map.registry));
    }
    Ok(())
}

fn cmd_reproduce(which: Experiment, run: &RunArgs, starts: Option<usize>) -> anyhow::Result<()> {
    let mut cfg = build_config(&ParamArgs::default(), run)?;
    let default_dir = Some(PathBuf::from(format!("reproduce-{}", which.name())));
    match which {
        Experiment::Table2 => {
            let exp = cfg.experiment;
            let out = sink("reproduce table2", run, cfg, default_dir)?;
            let rep = run_table2(&exp).map_err(lib)?;
            out.json("table2", &rep)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    let seeds: Vec<String> = r.basin.seed_outcomes.iter().map(|(s, k)| format!("{} -> {k}", state(s))).collect();
                    vec![
                        g(r.m2),
                        g_opt(r.classification.lambda2),
                        r.classification.label.to_string(),
                        g_opt(r.floquet.as_ref().map(|f| f.transversal_average)),
                        r.basin.verdict.to_string(),
                        seeds.join("; "),
                    ]
                })
                .collect();
            out.csv("table2", |w| {
                use std::io::Write;
                writeln!(w, "m2,lambda2,case,transversal_average,basin_verdict")?;
                for r in &rows {
                    writeln!(w, "{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4])?;
                }
                Ok(())
            })?;
            if out.human() {
                print!("{}", table(&["m2", "lambda2", "case", "transversal avg", "basin", "seeds"], &rows));
                println!(
                    "crossings: lambda2 = (1+a1)^2/4 at m2 = {}, lambda2 = p(lambda1) at m2 = {}",
                    g(rep.crossings.m2_at_p_max),
                    g(rep.crossings.m2_at_p_lambda1)
                );
                if let Some(c) = &rep.cycle {
                    println!("planar cycle period {}", g(c.period));
                }
            }
        }
        Experiment::Table3 => {
            let eps = cfg.experiment.eps_class;
            let out = sink("reproduce table3", run, cfg, default_dir)?;
            let rep = run_table3(eps).map_err(lib)?;
            out.json("table3", &rep)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.name.to_string(),
                        g(r.params.m1),
                        g(r.params.m2),
                        g(r.params.a1),
                        g(r.params.a2),
                        g(r.params.d1),
                        g(r.params.d2),
                        g_opt(r.lambda1),
                        g_opt(r.lambda2),
                        g_opt(r.p_lambda1),
                        g(r.p_max),
                        r.label.to_string(),
                    ]
                })
                .collect();
            let header = ["source", "m1", "m2", "a1", "a2", "d1", "d2", "lambda1", "lambda2", "p(lambda1)", "p_max", "case"];
            out.csv("table3", |w| {
                use std::io::Write;
                writeln!(w, "{}", header.join(","))?;
                for r in &rows {
                    writeln!(w, "{}", r.join(","))?;
                }
                Ok(())
            })?;
            if out.human() {
                print!("{}", table(&header, &rows));
            }
        }
        Experiment::HsuGas => {
            let n = starts.or(cfg.probe_starts).unwrap_or(125);
            cfg.probe_starts = Some(n);
            let exp = cfg.experiment;
            let out = sink("reproduce hsu-gas", run, cfg, default_dir)?;
            let p = hsu_set();
            let res = global_stability_probe(&p, n, &exp).map_err(lib)?;
            out.json("hsu_gas", &res)?;
            out.csv("counterexamples", |w| {
                use std::io::Write;
                writeln!(w, "x0,y0,z0,kind,reason")?;
                for c in &res.counterexamples {
                    writeln!(w, "{},{},{},{},\"{}\"", c.initial.x, c.initial.y, c.initial.z, c.kind, c.reason)?;
                }
                Ok(())
            })?;
            if out.human() {
                println!("parameters           {}", params_line(&p));
                println!("case                 {}", res.label);
                println!("predicted            {}", res.predicted);
                if let Some(fc) = res.f_condition {
                    println!("f condition          {} > {}: {}", g(fc.lhs), g(fc.rhs), fc.holds);
                }
                println!("transversal average  {}", g_opt(res.transversal_average));
                println!("converged            {}/{} (seed {})", res.converged, res.n, res.seed);
                println!("max tail z           {}", g(res.max_tail_z));
                for c in &res.counterexamples {
                    println!("counterexample       {} -> {}: {}", state(&c.initial), c.kind, c.reason);
                }
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Classify { params, run } => cmd_classify(params, run, false),
        Command::Equilibria { params, run } => cmd_classify(params, run, true),
        Command::Simulate { params, run, x0, y0, z0 } => cmd_simulate(params, run, *x0, *y0, *z0),
        Command::Cycle { params, run } => cmd_cycle(params, run, false),
        Command::Floquet { params, run } => cmd_cycle(params, run, true),
        Command::Sweep { params, run, param, from, to, step } => cmd_sweep(params, run, *param, *from, *to, *step),
        Command::Basin { params, run, grid_n } => cmd_basin(params, run, *grid_n),
        Command::Reproduce { experiment, run, starts } => cmd_reproduce(*experiment, run, *starts),
    }
}

/// 2 for bad input, 3 when the numerics fail.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<foodchain::Error>() {
        Some(fe) if fe.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
