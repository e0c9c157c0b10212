//! Experiment orchestration: one runner per kind, each writing its CSV and
//! field artifacts and declaring its assertions.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{
    admissible_spec, bounds, build_domain, validate, Domain, ExperimentConfig, FamilySource, InflowKind, Kind,
    ProfileSpec, SweepProblem,
};
use crate::carleman::{
    build_weight, fit_constants, log_grid, regression_family, separation, write_ledger_csv, CarlemanLedger,
    LedgerSeries, SeparationInput,
};
use crate::error::{Error, Result};
use crate::fields::{check_admissible, ScalarField, VectorField};
use crate::geometry::classify_boundary;
use crate::inverse::{
    case_experiment, compatible_inflow, energy_check, nonuniqueness_demo, reconstruct_h, reconstruct_p,
    scaling_family, solve_rate_system, stability_sweep, sweep_pairs, CaseInstance, Coefficient, EnergyConfig,
    MeasurementSet, Perturbation, Problem, Profile, SweepConfig,
};
use crate::io::write_field_csv;
use crate::transport::{boundary_trace, solve_forward, solve_forward_fd, Inflow};

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub kind: String,
    pub config: ExperimentConfig,
    pub outputs: Value,
    pub artifacts: Vec<String>,
    pub timings: Vec<Timing>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    artifacts: Vec<String>,
    timings: Vec<Timing>,
    assertions: Vec<Assertion>,
    clock: Instant,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> std::path::PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(Timing {
            stage: stage.into(),
            seconds: (now - self.clock).as_secs_f64(),
        });
        self.clock = now;
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.into(),
            pass,
            detail,
        });
    }
}

/// Validate, then run `kind` and write its artifacts and `report.json` into
/// `out`. Invalid configurations come back as [`Error::Configuration`]
/// listing every violation.
pub fn run(cfg: &ExperimentConfig, kind: Kind, out: &Path) -> Result<RunReport> {
    let violations = validate(cfg, kind);
    if !violations.is_empty() {
        return Err(Error::Configuration(violations.join("; ")));
    }
    std::fs::create_dir_all(out)?;
    let mut cx = Ctx {
        cfg,
        out,
        artifacts: vec![],
        timings: vec![],
        assertions: vec![],
        clock: Instant::now(),
    };
    let outputs = match kind {
        Kind::Forward => forward(&mut cx)?,
        Kind::Subdomain => subdomain(&mut cx)?,
        Kind::CarlemanVerify => carleman_verify(&mut cx)?,
        Kind::ReconstructH => reconstruct(&mut cx, true)?,
        Kind::ReconstructP => reconstruct(&mut cx, false)?,
        Kind::StabilitySweep => sweep(&mut cx)?,
        Kind::EnergyCheck => energy(&mut cx)?,
        Kind::CaseExperiment => case(&mut cx)?,
        Kind::DemoNonuniqueness => demo(&mut cx)?,
    };
    cx.artifacts.push("report.json".into());
    let report = RunReport {
        kind: kind.name().into(),
        config: cfg.clone(),
        outputs,
        artifacts: cx.artifacts,
        timings: cx.timings,
        passed: cx.assertions.iter().all(|a| a.pass),
        assertions: cx.assertions,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("report.json"))?), &report)?;
    Ok(report)
}

struct Fields {
    dom: Domain,
    h: VectorField,
    p: ScalarField,
    family: Vec<ScalarField>,
}

fn fields(cfg: &ExperimentConfig) -> Result<Fields> {
    let dom = build_domain(cfg)?;
    let spec = cfg.bounds.as_ref().map(|_| admissible_spec(cfg, &dom)).transpose()?;
    let mut r = cfg.rng(0);
    let co = &cfg.coefficients;
    let h = co.h.build("coefficients.h", &dom.grid, spec.as_ref(), &mut r)?;
    let p = co.p.build("coefficients.p", &dom.grid, &mut r)?;
    let family = co
        .family
        .iter()
        .enumerate()
        .map(|(k, a)| a.build(&format!("coefficients.family[{k}]"), &dom.grid, &mut r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Fields { dom, h, p, family })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn forward(cx: &mut Ctx) -> Result<Value> {
    let cfg = cx.cfg;
    let Fields { h, p, family, .. } = fields(cfg)?;
    let a = &family[0];
    let inflow = match cfg.forward.inflow {
        InflowKind::Compatible => compatible_inflow(&h, &p, Some(a), None),
        InflowKind::Zero => Inflow::Zero,
        InflowKind::Absent => Inflow::Absent,
    };
    let d = &cfg.discretization;
    let u = solve_forward(&h, &p, a, &inflow, d.t_final, d.dt)?;
    cx.lap("solve");
    u.write_binary(&cx.path("solution.bin"))?;
    let last = u.n_times() - 1;
    write_field_csv(&cx.path("final.csv"), u.grid(), 1, u.slice(last).values())?;
    boundary_trace(&u, None).write_csv(&cx.path("trace.csv"))?;
    let determined = u.determined_mask().iter().filter(|b| **b).count() as f64 / u.determined_mask().len() as f64;
    let finite = u.values().iter().all(|v| v.is_finite());
    cx.check("solution finite", finite, format!("max |u| = {:.6e}", max_abs(u.values())));

    let mut out = json!({
        "steps": last,
        "dt": u.dt(),
        "max_abs": max_abs(u.values()),
        "final_l2": u.l2_at(last),
        "determined_fraction": determined,
    });
    if cfg.forward.finite_difference {
        let fd = solve_forward_fd(&h, &p, a, &inflow, d.t_final, d.dt)?;
        cx.lap("finite difference");
        let g = u.grid().clone();
        let n = g.len();
        // relative L2 deviation at T over cells both schemes determine
        let (mut num, mut den) = (0.0, 0.0);
        for i in g.active_nodes() {
            if u.determined(i, last) {
                let w = g.weights()[i];
                num += w * (u.value(i, last) - fd.value(i, last)).powi(2);
                den += w * u.value(i, last).powi(2);
            }
        }
        let dev = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
        write_field_csv(&cx.path("final_fd.csv"), &g, 1, &fd.values()[last * n..(last + 1) * n])?;
        cx.check(
            "upwind agrees with characteristics",
            dev <= cfg.forward.fd_tolerance,
            format!("relative L2 deviation at T {dev:.3e} (max {})", cfg.forward.fd_tolerance),
        );
        out["fd_deviation"] = json!(dev);
    }
    Ok(out)
}

fn subdomain(cx: &mut Ctx) -> Result<Value> {
    let cfg = cx.cfg;
    let Fields { dom, h, .. } = fields(cfg)?;
    cx.lap("build");
    let sub = dom
        .subdomain
        .clone()
        .ok_or_else(|| Error::Configuration("geometry: the subdomain experiment needs kind = \"subdomain\"".into()))?;
    let b = bounds(cfg)?;
    let d = &cfg.discretization;
    std::fs::write(cx.path("subdomain.json"), sub.to_json()?)?;
    sub.write_csv(&cx.path("boundary.csv"), Some(&h))?;
    let adm = check_admissible(&h, b.delta0, b.m, &dom.x0, &dom.nu0);
    let samples = match &cfg.geometry {
        super::config::GeometrySpec::Subdomain { samples, .. } => *samples,
        _ => 101,
    };
    let cls = classify_boundary(&sub, &h, samples)?;
    let w = build_weight(&h, d.beta)?;
    let sep = separation(
        &w,
        &SeparationInput {
            t_final: d.t_final,
            eps0: d.eps0(),
            eps: dom.eps,
            delta0: b.delta0,
            m: b.m,
            r: dom.r,
        },
    )?;
    cx.lap("classify");
    cx.check(
        "H admissible",
        adm.admissible,
        format!(
            "C1 norm {:.4} (M {}), min |H| {:.4} and flux {:.4} (delta0 {})",
            adm.c1_norm, b.m, adm.min_modulus, adm.flux_at_x0, b.delta0
        ),
    );
    cx.check(
        "observed sheet is outflow",
        cls.margin_plus > 0.0,
        format!("min H.nu on gamma1 = {:.4e}", cls.margin_plus),
    );
    cx.check(
        "inner sheet is inflow",
        cls.margin_minus <= 0.0,
        format!("max H.nu on gamma2 = {:.4e}", cls.margin_minus),
    );
    cx.check(
        "weight separation",
        sep.gap_holds == Some(true),
        format!("gap {:.4e}, beta T/4 = {:.4e}", sep.gap, sep.quarter_beta_t),
    );
    Ok(json!({
        "rho1": sub.rho1,
        "r": sub.r,
        "diameter": sub.diam,
        "eps": dom.eps,
        "nodes": dom.grid.active_nodes().count(),
        "admissibility": adm,
        "gamma_plus": cls.gamma_plus.len(),
        "gamma_minus": cls.gamma_minus.len(),
        "margin_plus": cls.margin_plus,
        "margin_minus": cls.margin_minus,
        "separation": sep,
    }))
}

fn carleman_verify(cx: &mut Ctx) -> Result<Value> {
    let cfg = cx.cfg;
    let c = &cfg.carleman;
    let s_grid = log_grid(c.s_min, c.s_max, c.s_count);
    let ledgers: Vec<Vec<CarlemanLedger>> = match c.family {
        FamilySource::Regression => {
            let fam = regression_family(cfg.seed, c.members, c.cells, c.steps)?;
            cx.lap("family");
            fam.ledgers(&s_grid)?
        }
        FamilySource::Forward => {
            let Fields { h, p, family, .. } = fields(cfg)?;
            let d = &cfg.discretization;
            let mut out = Vec::with_capacity(family.len());
            for a in &family {
                let inflow = compatible_inflow(&h, &p, Some(a), None);
                let u = solve_forward(&h, &p, a, &inflow, d.t_final, d.dt)?;
                out.push(LedgerSeries::new(&u, &h, &p, d.beta)?.over(&s_grid));
            }
            cx.lap("family");
            out
        }
    };
    cx.lap("ledgers");
    let fit = fit_constants(&ledgers, &c.fit)?;
    cx.lap("fit");
    for (k, l) in ledgers.iter().enumerate() {
        write_ledger_csv(&cx.path(&format!("ledger_{k:03}.csv")), l, fit.c)?;
    }
    let worst = ledgers
        .iter()
        .flat_map(|l| l.iter().filter(|e| e.s > fit.s0).map(|e| e.slack(fit.c)))
        .fold(f64::INFINITY, f64::min);
    cx.check(
        "inequality holds above s0",
        worst >= 0.0,
        format!("C = {:.4e}, s0 = {:.4e}, smallest slack {worst:.4e}", fit.c, fit.s0),
    );
    Ok(json!({ "members": ledgers.len(), "s_grid": s_grid, "fit": fit }))
}

fn reconstruct(cx: &mut Ctx, vector: bool) -> Result<Value> {
    let cfg = cx.cfg;
    let Fields { dom, h, p, family } = fields(cfg)?;
    let d = &cfg.discretization;
    let rc = &cfg.reconstruction;
    let used = if vector { &family[..dom.grid.dim()] } else { &family[..1] };
    let meas = MeasurementSet::synthesize(&h, &p, used, d.t_final, d.dt)?;
    let meas = if rc.noise > 0.0 {
        meas.perturb_rates(rc.noise, cfg.seed)?
    } else {
        meas
    };
    cx.lap("synthesize");
    let res = if vector {
        reconstruct_h(&meas, &p, rc.det_threshold, Some(&h))?
    } else {
        reconstruct_p(&meas, &h, rc.a_threshold, Some(&p))?
    };
    cx.lap("reconstruct");
    let g = dom.grid.clone();
    match (res.vector(), res.scalar()) {
        (Some(v), _) => write_field_csv(&cx.path("estimate.csv"), &g, g.dim(), v.values())?,
        (_, Some(s)) => write_field_csv(&cx.path("estimate.csv"), &g, 1, s.values())?,
        _ => {}
    }
    write_field_csv(&cx.path("residual.csv"), &g, 1, &res.residual)?;
    let rel = res.relative_error.unwrap_or(f64::NAN);
    cx.check(
        "relative error within tolerance",
        rel <= rc.tolerance,
        format!("relative L2 error {rel:.4e}, tolerance {:.1e}", rc.tolerance),
    );
    Ok(json!({ "noise": rc.noise, "summary": res.summary() }))
}

fn sweep(cx: &mut Ctx) -> Result<Value> {
    let cfg = cx.cfg;
    let Fields { dom, h, p, family } = fields(cfg)?;
    let s = &cfg.sweep;
    let d = &cfg.discretization;
    let mut r = cfg.rng(1);
    let (problem, truth, delta, admissible) = match s.problem {
        SweepProblem::H => {
            let spec = admissible_spec(cfg, &dom)?;
            let delta = s.direction_h.build("sweep.direction_h", &dom.grid, Some(&spec), &mut r)?;
            (
                Problem::H {
                    p,
                    family: family[..dom.grid.dim()].to_vec(),
                },
                Coefficient::H(h),
                Coefficient::H(delta),
                Some(spec),
            )
        }
        SweepProblem::P => {
            let delta = s.direction_p.build("sweep.direction_p", &dom.grid, &mut r)?;
            (
                Problem::P {
                    h,
                    a: family[0].clone(),
                },
                Coefficient::P(p),
                Coefficient::P(delta),
                None,
            )
        }
    };
    let sc = SweepConfig {
        t_final: d.t_final,
        dt: d.dt,
        admissible,
        p_bound: s.p_bound,
        m0_bound: s.m0_bound,
    };
    let result = stability_sweep(&problem, &truth, &scaling_family(&truth, &delta, &s.taus)?, &sc)?;
    cx.lap("sweep");
    let (lo, hi) = s
        .taus
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(*t), b.max(*t)));
    let held: Vec<Perturbation> = (0..s.held_out)
        .map(|k| {
            let tau = (r.random_range(lo.ln()..=hi.ln())).exp();
            Ok(Perturbation {
                id: 100 + k,
                tau,
                coefficient: truth.shifted(&delta, tau)?,
            })
        })
        .collect::<Result<_>>()?;
    let (held_pairs, _) = sweep_pairs(&problem, &truth, &held, &sc)?;
    cx.lap("held out");
    result.write_csv(&cx.path("sweep.csv"))?;
    let held_sweep = crate::inverse::StabilitySweep {
        pairs: held_pairs.clone(),
        ..result.clone()
    };
    held_sweep.write_csv(&cx.path("held_out.csv"))?;
    let above = result.pairs.iter().chain(&held_pairs).filter(|q| !result.holds(q)).count();
    cx.check(
        "theta in (0, 1]",
        result.theta_hat > 0.0 && result.theta_hat <= 1.0,
        format!("theta {:.4} (raw {:.4})", result.theta_hat, result.theta_raw),
    );
    cx.check(
        "fit quality",
        result.fit_quality >= s.min_fit_quality,
        format!("R^2 {:.4}, minimum {}", result.fit_quality, s.min_fit_quality),
    );
    cx.check(
        "pairs below the fitted bound",
        above == 0,
        format!("{above} of {} pairs above the bound", result.pairs.len() + held_pairs.len()),
    );
    Ok(json!({
        "theta_hat": result.theta_hat,
        "theta_raw": result.theta_raw,
        "fit_quality": result.fit_quality,
        "bound_c": result.bound_c,
        "fit_count": result.fit_count,
        "m0": result.m0,
        "pairs": result.pairs,
        "held_out": held_pairs,
    }))
}

fn energy(cx: &mut Ctx) -> Result<Value> {
    let cfg = cx.cfg;
    let Fields { dom, h, p, .. } = fields(cfg)?;
    let d = &cfg.discretization;
    let dim = dom.grid.dim();
    let co = &cfg.coefficients;
    let f = co.f.build("coefficients.f", &dom.grid, &mut cfg.rng(2))?;
    let r = co.r.build("coefficients.r", dim)?;
    let drdt = co.r.derivative("coefficients.r", dim)?;
    let (r0, ff) = (r.clone(), f.clone());
    let a = ScalarField::from_fn(dom.grid.clone(), move |x| r0.eval(x, 0.0) * ff.eval(x));
    let inflow = compatible_inflow(&h, &p, Some(&a), Some((drdt, f.clone())));
    let y1 = solve_rate_system(&h, &p, r.clone(), &f, &inflow, d.t_final, d.dt)?;
    cx.lap("solve");
    let tr = boundary_trace(&y1, None);
    let rep = energy_check(&y1, &h, &p, r, &f, &tr, &EnergyConfig::default())?;
    cx.lap("energy");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(cx.path("energy.csv"))?));
    w.write_record(["time", "energy"])?;
    for (t, e) in rep.times.iter().zip(&rep.energy) {
        w.write_record([format!("{t:.17e}"), format!("{e:.17e}")])?;
    }
    w.flush()?;
    tr.write_csv(&cx.path("trace.csv"))?;
    let emax = rep.energy.iter().fold(0.0, |m: f64, e| m.max(*e));
    cx.check(
        "energy below the Gronwall bound",
        rep.holds,
        format!(
            "sup E {emax:.4e}, bound {:.4e}, median residual {:.2e}",
            rep.rhs_bound, rep.residual_median
        ),
    );
    Ok(serde_json::to_value(&rep)?)
}

fn case(cx: &mut Ctx) -> Result<Value> {
    let cfg = cx.cfg;
    let Fields { dom, h, p, .. } = fields(cfg)?;
    let d = &cfg.discretization;
    let co = &cfg.coefficients;
    let inst = CaseInstance {
        h,
        p1: p,
        r: co.r.build("coefficients.r", dom.grid.dim())?,
        f: co.f.build("coefficients.f", &dom.grid, &mut cfg.rng(2))?,
        t_final: d.t_final,
        dt: d.dt,
        eps0: d.eps0(),
    };
    let rep = case_experiment(cfg.case.case, &inst)?;
    cx.lap("case");
    let v = serde_json::to_value(&rep)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(cx.path("case.csv"))?));
    w.write_record(["quantity", "value"])?;
    flatten("", &v, &mut |k, x| w.write_record([k, &format!("{x:.17e}")]))?;
    w.flush()?;
    let lc = rep.lipschitz_constant;
    cx.check(
        "Lipschitz constant finite",
        lc.is_none_or(|c| c.is_finite()),
        format!("lhs/rhs = {lc:?}, relative error of f {:.4e}", rep.f_relative_error),
    );
    Ok(v)
}

/// Numeric leaves of a JSON tree in document order.
fn flatten<E>(prefix: &str, v: &Value, out: &mut dyn FnMut(&str, f64) -> std::result::Result<(), E>) -> std::result::Result<(), E> {
    match v {
        Value::Number(n) => out(prefix, n.as_f64().unwrap_or(f64::NAN)),
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn demo(cx: &mut Ctx) -> Result<Value> {
    let cfg = cx.cfg;
    let profile = match cfg.demo.profile {
        ProfileSpec::SquaredRamp => Profile::squared_ramp(),
        ProfileSpec::Power { exponent } => Profile::new("power", move |e| (e - 1.0).max(0.0).powf(exponent)),
        ProfileSpec::Smooth => Profile::new("smooth", |e| if e > 1.0 { (-1.0 / (e - 1.0)).exp() } else { 0.0 }),
    };
    let cells = cfg.demo.cells;
    let rep = nonuniqueness_demo(&profile, cells)?;
    cx.lap("demo");
    let v = serde_json::to_value(&rep)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(cx.path("demo.csv"))?));
    w.write_record(["quantity", "value"])?;
    flatten("", &v, &mut |k, x| w.write_record([k, &format!("{x:.17e}")]))?;
    w.flush()?;
    let h = 1.0 / cells as f64;
    cx.check(
        "zero data",
        rep.initial_norm <= 1e-12 && rep.boundary_norm <= 1e-12,
        format!("initial {:.1e}, boundary {:.1e}", rep.initial_norm, rep.boundary_norm),
    );
    cx.check(
        "solves the equation",
        rep.residual <= 4.0 * h,
        format!("residual {:.3e}, 4h = {:.3e}", rep.residual, 4.0 * h),
    );
    cx.check("nonzero solution", rep.final_norm > 0.0, format!("final norm {:.4e}", rep.final_norm));
    Ok(v)
}
