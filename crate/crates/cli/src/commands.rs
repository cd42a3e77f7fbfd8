use std::fmt::Write as _;
use std::io::Write;

use econ_attractors::attractor::{AttractorRegistry, AttractorSignature, MatchOutcome};
use econ_attractors::basin::{
    run_signature, run_signature_fo, scan_lattice, BasinGrid, LatticeSpec, PointConfig,
};
use econ_attractors::cases::{
    build_registry, named_equilibria, run_pipeline, seed_mle, table1 as reference_cases, CaseReport, CaseStudy, Order,
    PipelineConfig,
};
use econ_attractors::lyapunov::{mle_fo, mle_io, MleResult};
use econ_attractors::rk::Trajectory;
use econ_attractors::stability::analyze_equilibria;
use econ_attractors::sweep::{sweep as run_sweep, SweepAxis, SweepSpec};
use econ_attractors::{eval_rhs, Error, State3, SystemParams};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{num, OutDir};
use crate::CliError;

fn is_integer(q: f64) -> bool {
    q == 1.0
}

fn need_ics(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.ics.is_empty() {
        return Err(CliError::Config("no initial conditions given".into()));
    }
    Ok(())
}

/// The reference case with exactly these coefficients and order.
fn reference_case(p: &SystemParams, q: f64) -> Option<CaseStudy> {
    reference_cases().into_iter().find(|c| c.params() == *p && c.order.q() == q)
}

fn state_cols(x: &State3) -> String {
    format!("{},{},{}", num(x.x1()), num(x.x2()), num(x.x3()))
}

pub fn equilibria(cfg: &RunConfig, single: bool) -> Result<(), CliError> {
    let q = cfg.order_q;
    let fractional = !is_integer(q);
    let grid: Vec<f64> = if single || cfg.equilibria.steps == 1 {
        vec![cfg.system.a]
    } else {
        let [lo, hi] = cfg.equilibria.a_range;
        let n = cfg.equilibria.steps;
        (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
    };
    let rows: Vec<Result<Vec<String>, Error>> = grid
        .iter()
        .map(|&a| {
            let p = cfg.system.with_a(a);
            let reports = analyze_equilibria(&p, fractional.then_some(q))?;
            reports
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let residual = eval_rhs(&p, r.equilibrium)?.norm_inf();
                    let mut row = format!("{},X{k},{},{}", num(a), state_cols(&r.equilibrium), num(residual));
                    for z in &r.eigenvalues {
                        write!(row, ",{},{}", num(z.re), num(z.im)).unwrap();
                    }
                    write!(row, ",{},{},{}", r.saddle_class.as_str(), r.hyperbolic, num(r.alpha_min)).unwrap();
                    if let Some(f) = r.fractional {
                        write!(row, ",{},{},{:?}", num(f.q), num(f.iota), f.verdict).unwrap();
                    }
                    Ok(row)
                })
                .collect()
        })
        .collect();
    let dir = OutDir::create(cfg)?;
    let mut header = "a,equilibrium,x1,x2,x3,rhs_residual".to_string();
    for k in 1..=3 {
        write!(header, ",lambda{k}_re,lambda{k}_im").unwrap();
    }
    header.push_str(",saddle_class,hyperbolic,alpha_min");
    if fractional {
        header.push_str(",q,iota,fo_stability");
    }
    let mut out = dir.file("equilibria.csv")?;
    writeln!(out, "{header}")?;
    for r in rows {
        for line in r? {
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn describe(sig: &AttractorSignature, registry: Option<&AttractorRegistry>) -> String {
    if sig.is_stationary() {
        return "equilibrium".into();
    }
    match registry.map(|r| r.match_signature(sig)) {
        None => sig.label.to_string(),
        Some(Ok(MatchOutcome::Known(l))) => l.to_string(),
        Some(Ok(MatchOutcome::NewAttractor)) => "new".into(),
        Some(Err(_)) => "ambiguous".into(),
    }
}

fn write_trajectory<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,x1,x2,x3")?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        writeln!(w, "{},{},{},{}", num(*t), num(x[0]), num(x[1]), num(x[2]))?;
    }
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    need_ics(cfg)?;
    let p = cfg.system;
    let q = cfg.order_q;
    let point = cfg.run.point;
    point.validate()?;
    let fo = cfg.fo_at_order();
    if !is_integer(q) {
        fo.validate()?;
    }
    let registry = match (cfg.run.label, reference_case(&p, q)) {
        (true, Some(case)) => Some(build_registry(&case)?.0),
        _ => None,
    };
    let results: Vec<_> = cfg
        .ics
        .par_iter()
        .map(|x0| {
            if is_integer(q) {
                run_signature(&p, *x0, &point)
            } else {
                run_signature_fo(&p, *x0, &fo, &point)
            }
        })
        .collect();
    let dir = OutDir::create(cfg)?;
    if let Some(r) = &registry {
        dir.write_text("registry.toml", &r.to_toml()?)?;
    }
    let mut table = dir.file("signatures.csv")?;
    writeln!(
        table,
        "ic_index,x1_0,x2_0,x3_0,status,label,regularity,mle,mean_x1,symmetry_sign,period,peak_count"
    )?;
    let mut failures = Vec::new();
    for (k, (x0, res)) in cfg.ics.iter().zip(results).enumerate() {
        match res {
            Ok((traj, sig)) => {
                dir.write_with(&format!("trajectory_{k}.csv"), |w| write_trajectory(&traj, w))?;
                writeln!(
                    table,
                    "{k},{},completed,{},{},{},{},{},{},{}",
                    state_cols(x0),
                    describe(&sig, registry.as_ref()),
                    sig.regularity.as_str(),
                    num(sig.mle),
                    num(sig.mean_x1),
                    sig.symmetry_sign,
                    sig.period_estimate.map_or("nan".into(), num),
                    sig.peak_set.len()
                )?;
            }
            Err(Error::Escaped { t, .. }) => {
                writeln!(table, "{k},{},escaped at {},,,,,,,", state_cols(x0), num(t))?;
            }
            Err(e) => {
                writeln!(table, "{k},{},failed,,,,,,,", state_cols(x0))?;
                failures.push(format!("initial condition {k}: {e}"));
            }
        }
    }
    table.flush()?;
    finish(failures)
}

fn finish(failures: Vec<String>) -> Result<(), CliError> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(failures.join("; ")))
    }
}

fn write_series<W: Write>(r: &MleResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,running_mean")?;
    for (t, m) in &r.series {
        writeln!(w, "{},{}", num(*t), num(*m))?;
    }
    Ok(())
}

pub fn mle(cfg: &RunConfig) -> Result<(), CliError> {
    need_ics(cfg)?;
    cfg.mle.validate()?;
    let p = cfg.system;
    let q = cfg.order_q;
    let results: Vec<Result<MleResult, Error>> = cfg
        .ics
        .par_iter()
        .map(|x0| {
            if is_integer(q) {
                mle_io(&p, *x0, &cfg.mle)
            } else {
                mle_fo(&p, q, *x0, &cfg.mle, &cfg.fo)
            }
        })
        .collect();
    let dir = OutDir::create(cfg)?;
    let mut table = dir.file("mle.csv")?;
    writeln!(table, "ic_index,x1_0,x2_0,x3_0,status,mle,mean,slope,regularity,elapsed")?;
    let mut failures = Vec::new();
    for (k, (x0, res)) in cfg.ics.iter().zip(results).enumerate() {
        match res {
            Ok(r) => {
                dir.write_with(&format!("mle_series_{k}.csv"), |w| write_series(&r, w))?;
                writeln!(
                    table,
                    "{k},{},completed,{},{},{},{},{}",
                    state_cols(x0),
                    num(r.mle),
                    num(r.mean),
                    num(r.slope),
                    r.verdict.as_str(),
                    num(r.elapsed)
                )?;
            }
            Err(Error::MleEscaped { partial_mle, elapsed, .. }) => {
                writeln!(table, "{k},{},escaped,{},,,,{}", state_cols(x0), num(partial_mle), num(elapsed))?;
            }
            Err(e) => {
                writeln!(table, "{k},{},failed,,,,,", state_cols(x0))?;
                failures.push(format!("initial condition {k}: {e}"));
            }
        }
    }
    table.flush()?;
    finish(failures)
}

/// Named sweep presets.
pub fn sweep_preset(name: &str) -> Result<SweepSpec, CliError> {
    Ok(match name {
        "a" => SweepSpec::param_a(),
        "a-zoom" => SweepSpec::param_a_zoom(),
        "a-zoom-d" => SweepSpec::param_a_zoom_d(),
        "q" => SweepSpec::order_q(),
        "q-0.985" => SweepSpec::order_q_near_0985(),
        other => return Err(CliError::Config(format!("unknown sweep preset {other:?}"))),
    })
}

pub fn sweep(cfg: &RunConfig, preset: Option<&str>) -> Result<(), CliError> {
    let mut spec = match preset {
        Some(name) => {
            let mut s = sweep_preset(name)?;
            s.ics = cfg.sweep.ics.clone();
            s
        }
        None => cfg.sweep.clone(),
    };
    spec.base = cfg.system;
    match spec.axis {
        SweepAxis::ParamA if !is_integer(cfg.order_q) => {
            return Err(CliError::Config("sweeps over a run at integer order; use a q sweep".into()))
        }
        SweepAxis::OrderQ => spec.fixed = cfg.system.a,
        SweepAxis::ParamA => {}
    }
    let resolved = RunConfig {
        sweep: spec.clone(),
        ..cfg.clone()
    };
    let d = run_sweep(&spec)?;
    let dir = OutDir::create(&resolved)?;
    dir.write_with("diagram.csv", |w| d.write_csv(w))?;
    dir.write_text("windows.txt", &d.report())?;
    Ok(())
}

fn basin_case(cfg: &RunConfig) -> Result<CaseStudy, CliError> {
    if !is_integer(cfg.order_q) {
        return Err(CliError::Config("basin scans are integer-order only".into()));
    }
    let mut case = match &cfg.basin.case {
        Some(name) => {
            CaseStudy::find(name).ok_or_else(|| CliError::Config(format!("no reference case named {name:?}")))?
        }
        None => match (reference_case(&cfg.system, 1.0), &cfg.basin.registry) {
            (Some(c), _) => c,
            (None, Some(_)) if cfg.system == SystemParams::preset(cfg.system.a) => CaseStudy {
                name: format!("a{}", cfg.system.a),
                a: cfg.system.a,
                order: Order::Integer,
                seeds: Vec::new(),
                alternative_seeds: Vec::new(),
                point: PointConfig::default(),
                tolerances: Default::default(),
            },
            _ => {
                return Err(CliError::Config(format!(
                    "no reference case for a = {}; set basin.case or basin.registry",
                    cfg.system.a
                )))
            }
        },
    };
    if let Some(point) = cfg.basin.point {
        case.point = point;
    }
    Ok(case)
}

fn pipeline_config(cfg: &RunConfig) -> PipelineConfig {
    PipelineConfig {
        sphere_radius: cfg.basin.sphere_radius,
        sphere_count: cfg.basin.sphere_count,
        seed: cfg.seed,
        lattice_n: cfg.basin.lattice_n,
    }
}

fn write_grid(dir: &OutDir, name: &str, grid: &BasinGrid) -> Result<(), CliError> {
    dir.write_with(&format!("{name}.csv"), |w| grid.write_csv(w))?;
    dir.write_with(&format!("{name}.ppm"), |w| grid.write_ppm(w))?;
    Ok(())
}

fn case_summary(report: &CaseReport, zooms: &[(String, BasinGrid)]) -> String {
    let mut s = format!("case {}\n", report.case.name);
    for o in &report.seeds {
        writeln!(
            s,
            "seed ({}, {}, {}) listed {} -> {} {} mle {:.4e}",
            o.seed.x0.x1(),
            o.seed.x0.x2(),
            o.seed.x0.x3(),
            o.seed.kind.as_str(),
            o.label,
            o.signature.regularity.as_str(),
            o.signature.mle
        )
        .unwrap();
    }
    for (name, scan) in &report.spheres {
        let counts: Vec<String> = scan.counts().iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(s, "sphere {name}: {}", counts.join(" ")).unwrap();
    }
    for (name, grid) in report.lattices.iter().chain(zooms) {
        let counts: Vec<String> = grid.counts().iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(
            s,
            "lattice {name} {}x{}: {} (unresolved or escaped {:.2}%)",
            grid.spec.n,
            grid.spec.n,
            counts.join(" "),
            100.0 * grid.failure_fraction()
        )
        .unwrap();
    }
    s.push_str(&report.verdict.report());
    s
}

fn basin_outputs(dir: &OutDir, cfg: &RunConfig, case: &CaseStudy, report: &CaseReport) -> Result<String, CliError> {
    dir.write_text("registry.toml", &report.registry.to_toml()?)?;
    for (name, scan) in &report.spheres {
        dir.write_with(&format!("sphere_{name}.csv"), |w| scan.write_csv(w))?;
    }
    for (name, grid) in &report.lattices {
        write_grid(dir, name, grid)?;
    }
    let mut zooms = Vec::new();
    if let Some(w) = cfg.basin.zoom_half_width {
        let eqs = named_equilibria(&case.params())?;
        for (k, (_, c)) in eqs.iter().take(2).enumerate() {
            let spec = LatticeSpec {
                x3: c.x3(),
                x1: [c.x1() - w, c.x1() + w],
                x2: [c.x2() - w, c.x2() + w],
                n: cfg.basin.lattice_n,
                zooms: Vec::new(),
            };
            let grid = scan_lattice(&case.params(), &spec, &report.registry, &case.point)?;
            let name = format!("Z{k}");
            write_grid(dir, &name, &grid)?;
            zooms.push((name, grid));
        }
    }
    let summary = case_summary(report, &zooms);
    dir.write_text("hiddenness.txt", &report.verdict.report())?;
    dir.write_text("summary.txt", &summary)?;
    Ok(summary)
}

pub fn basin(cfg: &RunConfig) -> Result<(), CliError> {
    let case = basin_case(cfg)?;
    let (registry, seeds) = match &cfg.basin.registry {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            (AttractorRegistry::from_toml(&text)?, Vec::new())
        }
        None => build_registry(&case)?,
    };
    let report = run_pipeline(&case, registry, seeds, &pipeline_config(cfg))?;
    let dir = OutDir::create(cfg)?;
    dir.write_with("seeds.csv", |w| {
        writeln!(w, "x1_0,x2_0,x3_0,kind,label,regularity,mle")?;
        for o in &report.seeds {
            writeln!(
                w,
                "{},{},{},{},{}",
                state_cols(&o.seed.x0),
                o.seed.kind.as_str(),
                o.label,
                o.signature.regularity.as_str(),
                num(o.signature.mle)
            )?;
        }
        Ok(())
    })?;
    basin_outputs(&dir, cfg, &case, &report)?;
    Ok(())
}

/// Every reference case: registry from its seeds, exponents of the seeds
/// over `mle.t_total`, and for integer order the spheres, verdict and
/// lattices.
pub fn table1(cfg: &RunConfig) -> Result<(), CliError> {
    let root = OutDir::create(cfg)?;
    let mut summary = String::new();
    let mut mles = root.file("mle.csv")?;
    writeln!(mles, "case,x1_0,x2_0,x3_0,kind,label,mle,regularity")?;
    for case in reference_cases() {
        let dir = root.sub(&case.name, cfg)?;
        let (registry, seeds) = build_registry(&case)?;
        let rates: Vec<Result<MleResult, Error>> =
            case.seeds.par_iter().map(|s| seed_mle(&case, s.x0, cfg.mle.t_total)).collect();
        for (o, r) in seeds.iter().zip(rates) {
            let r = r?;
            writeln!(
                mles,
                "{},{},{},{},{},{}",
                case.name,
                state_cols(&o.seed.x0),
                o.seed.kind.as_str(),
                o.label,
                num(r.mle),
                r.verdict.as_str()
            )?;
        }
        if case.order == Order::Integer {
            let report = run_pipeline(&case, registry, seeds, &pipeline_config(cfg))?;
            summary.push_str(&basin_outputs(&dir, cfg, &case, &report)?);
        } else {
            dir.write_text("registry.toml", &registry.to_toml()?)?;
            writeln!(summary, "case {}", case.name).unwrap();
            for o in &seeds {
                writeln!(summary, "seed {:?} -> {} {}", o.seed.x0.0, o.label, o.signature.regularity.as_str())
                    .unwrap();
            }
        }
        summary.push('\n');
    }
    mles.flush()?;
    root.write_text("table1.txt", &summary)?;
    Ok(())
}
