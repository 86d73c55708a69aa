//! One function per leaf command. Each fills its defaults, computes, and
//! only then writes artifacts, so a rejected input leaves no files behind.

use crate::report::{Output, Report};
use crate::{
    AncientParams, BarrierParams, BuildParams, DensityParams, DistanceParams, EntropyParams, FParams, Failure, FlowParams, Leaf,
    SelftestParams, SpectralParams, SurfaceParams, TranslatorParams,
};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shrinkerlab::ancient::{
    exit_time, interior_decay_check, li_yau_monitor, one_sided_run, sandwich, search_epsilon0, spectral_dynamics, uniqueness_collapse,
    RunConfig, COLLAPSE_LEVELS,
};
use shrinkerlab::barriers::translator::{level_set_check, translator_area_check, translator_residual, translator_solve};
use shrinkerlab::barriers::{
    bisect_eta, compact_dirichlet_barrier, conical_barrier, long_cyl_barrier, resolvable_taus, search_conical_r, search_global,
    verify_super_sub, BarrierKind, BarrierReport, Sign,
};
use shrinkerlab::functionals::{
    entropy, f_functional, huisken_density, ilmanen_distance, ConformalDistanceQuery, DensityFlow, DensityQuery, EntropySearch,
};
use shrinkerlab::graphflow::{default_psi0, smooth_field, BoundaryData, EndCondition, GraphFlow, RunOptions, Scheme, Termination};
use shrinkerlab::persist::{read_trace, write_grid, write_series, write_trace};
use shrinkerlab::selftest;
use shrinkerlab::shrinker::{certify, make_model, Model, ModelParams, ShrinkerSurface};
use shrinkerlab::spectral::{dirichlet_ground_state, ground_state, spectrum, DirichletProblem};
use shrinkerlab::surface::ProfileGeometry;
use std::path::{Path, PathBuf};

type Outcome = Result<Report, Failure>;

/// Resolve configuration, run the command and emit its report.
pub fn leaf<P>(out: &Output, l: Leaf<P>, f: impl FnOnce(&Output, P) -> Outcome) -> Result<bool, Failure>
where
    P: Args + Serialize + DeserializeOwned,
{
    let params = crate::config::resolve(&l.params, l.config.as_deref())?;
    let report = f(out, params)?;
    out.emit(&report, l.report.as_deref())?;
    Ok(report.passed())
}

fn bad<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Validation(msg.into()))
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn ensure(ok: bool, msg: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        bad(msg)
    }
}

/// Model surface or certified profile, with defaults written back.
fn surface(s: &mut SurfaceParams, model: &str, nodes: usize) -> Result<ShrinkerSurface, Failure> {
    let base = match &s.profile {
        Some(path) => {
            if s.model.is_some() || s.nodes.is_some() {
                return bad("give either a profile or a model with nodes, not both");
            }
            certify(&ProfileGeometry::load(path)?)?
        }
        None => {
            crate::defaults!(s { model: model, nodes: nodes });
            let m: Model = s.model.as_deref().unwrap_or(model).parse()?;
            let params = ModelParams { radius: s.radius, half_length: s.half_length, cone_slope: s.cone_slope };
            make_model(m, params, s.nodes.unwrap_or(nodes))?
        }
    };
    crate::defaults!(s { flip: false });
    Ok(if s.flip == Some(true) { base.flipped() } else { base })
}

fn describe(r: &mut Report, s: &ShrinkerSurface) {
    r.grid("nodes", s.len());
    r.grid("model", s.model);
    r.tolerance("shrinker_residual", s.residual_report.tolerance);
}

pub fn shrinker_build(out: &Output, mut p: BuildParams) -> Outcome {
    let s = surface(&mut p.surface, "sphere", 512)?;
    crate::defaults!(p { out: "profile.json" });
    let dest = p.out.clone().unwrap_or_default();
    let mut r = Report::new("shrinker build", &p);
    describe(&mut r, &s);
    r.oracle("exact models: closed-form curvature; others: sixth-order residual certificate");
    r.results = json!({
        "model": s.model,
        "nodes": s.len(),
        "closed": s.is_closed(),
        "residual_report": s.residual_report,
        "end_classification": s.end_classification,
        "profile_ref": out.path(&dest),
    });
    r.flag("certified", s.residual_report.certified);
    s.profile.save(&out.prepare(&dest)?)?;
    Ok(r)
}

pub fn spectral_solve(out: &Output, mut p: SpectralParams) -> Outcome {
    let s = surface(&mut p.surface, "sphere", 512)?;
    crate::defaults!(p { mode: 0i64, count: 4usize, eigenfunction_out: "eigenfunctions.csv" });
    let (m, count) = (p.mode.unwrap_or(0), p.count.unwrap_or(4));
    ensure(count >= 1, "count must be at least 1")?;
    let pairs = match (p.dirichlet_lo, p.dirichlet_hi) {
        (Some(lo), Some(hi)) => {
            ensure(m == 0 && count == 1, "the Dirichlet subdomain solve returns the m = 0 ground state only (use --mode 0 --count 1)")?;
            vec![dirichlet_ground_state(&DirichletProblem::new(&s, lo, hi)?)?.pair]
        }
        (None, None) => spectrum(&s, m, count)?,
        _ => return bad("give both dirichlet_lo and dirichlet_hi or neither"),
    };
    let dest = p.eigenfunction_out.clone().unwrap_or_default();
    let mut r = Report::new("spectral solve", &p);
    describe(&mut r, &s);
    r.tolerance("eigen_residual", 1e-8);
    r.oracle("sphere mu = -1 and cylinder mu = -1 closed forms; torus ground state against an independent scipy solve");
    r.results = json!({
        "eigenpairs": pairs.iter().map(|x| json!({
            "mu": x.eigenvalue,
            "mode": x.fourier_mode,
            "residual": x.residual,
            "normalization": x.normalization,
            "boundary_condition": x.boundary_condition,
        })).collect::<Vec<_>>(),
        "eigenfunction_ref": out.path(&dest),
    });
    r.flag("residuals_within_tolerance", pairs.iter().all(|x| x.residual <= 1e-8));
    let idx: Vec<f64> = (0..s.len()).map(|i| i as f64).collect();
    let rr: Vec<f64> = s.profile.nodes.iter().map(|x| x[0]).collect();
    let zz: Vec<f64> = s.profile.nodes.iter().map(|x| x[1]).collect();
    let names: Vec<String> = (0..pairs.len()).map(|k| format!("phi_{k}")).collect();
    let mut header = vec!["node", "r", "z"];
    header.extend(names.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![&idx, &rr, &zz];
    cols.extend(pairs.iter().map(|x| x.eigenfunction.as_slice()));
    write_series(&out.prepare(&dest)?, &header, &cols)?;
    Ok(r)
}

fn end_condition(name: &str) -> Result<BoundaryData, Failure> {
    let c = match name {
        "dirichlet" => EndCondition::Dirichlet(0.0),
        "symmetric" => EndCondition::Symmetric,
        other => return bad(format!("unknown boundary '{other}' (dirichlet or symmetric)")),
    };
    Ok(BoundaryData { start: c, end: c })
}

fn scheme(name: &str) -> Result<Scheme, Failure> {
    serde_json::from_value(Value::String(name.into())).or_else(|_| bad(format!("unknown scheme '{name}' (imex or rk4)")))
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn flow_run(out: &Output, mut p: FlowParams) -> Outcome {
    let s = surface(&mut p.surface, "sphere", 256)?;
    crate::defaults!(p {
        init: "ground",
        amplitude: 0.01,
        seed: 0u64,
        tau_start: 0.0,
        tau_end: 1.0,
        psi0: default_psi0(&s),
        scheme: "imex",
        every: 10usize,
        boundary: "dirichlet",
        trace_out: "trace.csv",
    });
    let sch = scheme(p.scheme.as_deref().unwrap_or_default())?;
    let flow = GraphFlow::new(&s, end_condition(p.boundary.as_deref().unwrap_or_default())?);
    crate::defaults!(p { dt: flow.default_dt(sch) });
    let amp = p.amplitude.unwrap_or_default();
    let u0: Vec<f64> = match p.init.as_deref().unwrap_or_default() {
        "constant" => vec![amp; s.len()],
        "ground" => ground_state(&s)?.eigenfunction.iter().map(|v| amp * v).collect(),
        "smooth" => smooth_field(&flow, p.seed.unwrap_or_default(), 6, amp),
        other => return bad(format!("unknown init '{other}' (constant, ground or smooth)")),
    };
    let tau0 = p.tau_start.unwrap_or_default();
    let mut opts = RunOptions::new(p.tau_end.unwrap_or_default(), p.psi0.unwrap_or_default(), p.every.unwrap_or(1));
    opts.scheme = sch;
    opts.dt = p.dt;
    let trace = flow.run(tau0, &u0, &opts)?;
    let dest = p.trace_out.clone().unwrap_or_default();
    let mut r = Report::new("flow run", &p);
    describe(&mut r, &s);
    r.grid("dt", trace.dt).grid("snapshots", trace.snapshots.len());
    r.tolerance("psi0", opts.psi0);
    r.oracle("sphere and circle radius ODE; scaling statistic against the expansion path");
    let last = trace.snapshots.last();
    r.results = json!({
        "termination": trace.termination,
        "detail": trace.detail,
        "tau_final": last.map(|x| x.tau),
        "final_diagnostics": last.map(|x| &x.diagnostics),
        "trace_ref": out.path(&dest),
        "sidecar_ref": out.path(&sidecar(&dest)),
    });
    r.flag("graph_invariant_held", matches!(trace.termination, Termination::ReachedEndTime | Termination::HitPsi0));
    let csv = out.prepare(&dest)?;
    write_trace(&s, &trace, &csv, &sidecar(&csv))?;
    Ok(r)
}

/// Kind-specific parameter blocks for `barrier verify --params`.
#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GlobalArgs {
    m: Option<f64>,
    tau0: Option<f64>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CompactArgs {
    lo: Option<usize>,
    hi: Option<usize>,
    a: Option<f64>,
    m: Option<f64>,
    tau: Option<f64>,
    eta: Option<f64>,
    li_yau_r: Option<f64>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LongArgs {
    alpha: Option<f64>,
    h0: Option<f64>,
    samples: Option<usize>,
    eta: Option<f64>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConicalArgs {
    alpha: Option<f64>,
    r: Option<f64>,
    r_max: Option<f64>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TranslatorArgs {
    lambda: Option<f64>,
    delta: Option<f64>,
    nodes: Option<usize>,
    tol: Option<f64>,
}

fn kind_args<T: DeserializeOwned + Default>(v: &Option<Value>) -> Result<T, Failure> {
    match v {
        None | Some(Value::Null) => Ok(T::default()),
        Some(x) => serde_json::from_value(x.clone()).or_else(|e| bad(format!("barrier params: {e}"))),
    }
}

pub fn barrier_verify(out: &Output, mut p: BarrierParams) -> Outcome {
    let Some(kind_name) = p.kind.clone() else {
        return bad("barrier verify needs --kind");
    };
    let kind: BarrierKind = kind_name.parse()?;
    crate::defaults!(p { grid_out: "barrier_residual.csv" });
    let mut extra = Value::Null;
    let mut flags: Vec<(&str, bool)> = vec![];
    let mut tolerances: Vec<(&str, f64)> = vec![];
    let mut nodes = None;
    let report: BarrierReport = match kind {
        BarrierKind::GlobalPlus | BarrierKind::GlobalMinus => {
            let sign = if kind == BarrierKind::GlobalPlus { Sign::Plus } else { Sign::Minus };
            let mut a: GlobalArgs = kind_args(&p.params)?;
            let s = surface(&mut p.surface, "sphere", 256)?;
            nodes = Some(s.len());
            let pair = ground_state(&s)?;
            let found = if a.m.is_none() && a.tau0.is_none() {
                let f = search_global(&s, &pair, sign)?.ok_or_else(|| Failure::NonConvergence("no (M, tau0) on the search grid passes".into()))?;
                extra = json!({"searched": true, "m": f.m, "tau0": f.tau0});
                f.report
            } else {
                crate::defaults!(a { m: 4.0, tau0: -3.0 });
                let (m, tau0) = (a.m.unwrap_or_default(), a.tau0.unwrap_or_default());
                ensure(m * (-pair.eigenvalue * tau0).exp() <= 0.5, "hypothesis M e^(-mu tau0) <= 1/2 fails")?;
                let taus = resolvable_taus(&pair, m, tau0);
                ensure(!taus.is_empty(), "no resolvable tau below tau0")?;
                extra = json!({"searched": false});
                verify_super_sub(&s, &pair, m, &taus, sign)?
            };
            p.params = Some(to_value(&a));
            found
        }
        BarrierKind::CompactDirichlet => {
            let mut a: CompactArgs = kind_args(&p.params)?;
            if p.surface.profile.is_none() {
                let sp = &mut p.surface;
                crate::defaults!(sp { half_length: 2.0 });
            }
            let s = surface(&mut p.surface, "cylinder", 401)?;
            nodes = Some(s.len());
            crate::defaults!(a { lo: s.len() / 6, hi: s.len() - 1 - s.len() / 6, a: 0.01, m: 1.0, tau: 0.0, eta: 0.1, li_yau_r: 1.0 });
            let prob = DirichletProblem::new(&s, a.lo.unwrap_or_default(), a.hi.unwrap_or_default())?;
            let ground = dirichlet_ground_state(&prob)?;
            let (_, rep) = compact_dirichlet_barrier(
                &prob,
                &ground,
                a.a.unwrap_or_default(),
                a.m.unwrap_or_default(),
                a.tau.unwrap_or_default(),
                a.eta.unwrap_or_default(),
                a.li_yau_r.unwrap_or_default(),
            )?;
            flags.push(("collar_exceeds_li_yau", rep.collar_pass));
            extra = json!({
                "mu0": rep.mu0,
                "identity_error": rep.identity_error,
                "identity_error_relative": rep.identity_error_relative,
                "collar_nodes": rep.collar_nodes,
                "hopf_quantity": rep.hopf_quantity,
                "li_yau_constant": rep.li_yau_constant,
                "hopf": ground.hopf,
            });
            p.params = Some(to_value(&a));
            rep.interior
        }
        BarrierKind::LongCylindrical => {
            let mut a: LongArgs = kind_args(&p.params)?;
            ensure(p.surface.profile.is_none() && p.surface.model.is_none(), "the long barrier lives on the round cylinder; no surface flags")?;
            crate::defaults!(a { alpha: 4.0, h0: shrinkerlab::barriers::DEFAULT_H0, samples: 200usize });
            let (alpha, h0, samples) = (a.alpha.unwrap_or_default(), a.h0.unwrap_or_default(), a.samples.unwrap_or_default());
            let b = match a.eta {
                Some(eta) => long_cyl_barrier(eta, alpha, h0, samples)?,
                None => {
                    let e = bisect_eta(alpha, h0, samples)?;
                    extra = json!({"eta0": e.eta0, "whole_range": e.whole_range});
                    e.barrier
                }
            };
            extra = json!({"bisection": extra, "r_max": b.r_max, "linear": b.linear});
            p.params = Some(to_value(&a));
            b.report
        }
        BarrierKind::Conical => {
            let mut a: ConicalArgs = kind_args(&p.params)?;
            let s = surface(&mut p.surface, "conical", 512)?;
            nodes = Some(s.len());
            crate::defaults!(a { alpha: 0.05 });
            let alpha = a.alpha.unwrap_or_default();
            let b = match a.r {
                Some(r) => conical_barrier(&s, alpha, r)?,
                None => {
                    crate::defaults!(a { r_max: 20.0 });
                    search_conical_r(&s, alpha, a.r_max.unwrap_or_default())?
                        .ok_or_else(|| Failure::NonConvergence("no R on the search grid passes".into()))?
                }
            };
            extra = json!({"r": b.r, "beta": b.beta, "linear": b.linear});
            p.params = Some(to_value(&a));
            b.report
        }
        BarrierKind::Translator => {
            let mut a: TranslatorArgs = kind_args(&p.params)?;
            ensure(p.surface.profile.is_none() && p.surface.model.is_none(), "the translator barrier builds its own surface; no surface flags")?;
            crate::defaults!(a { lambda: 10.0, delta: 0.05, nodes: 512usize, tol: 1e-12 });
            let t = translator_solve(a.lambda.unwrap_or_default(), a.delta.unwrap_or_default(), a.nodes.unwrap_or_default(), a.tol.unwrap_or_default())?;
            nodes = Some(t.nodes.len());
            let res = translator_residual(&t.profile(), t.lambda, 6)?;
            let area = translator_area_check(&t, 0.0, t.height)?;
            flags.push(("weighted_area_bounds", area.pass));
            tolerances.push(("certificate", 1e-6));
            let cols = (0..res.len()).map(|i| i as f64).collect();
            extra = json!({"height": t.height, "r_delta": t.r_delta, "area": area});
            p.params = Some(to_value(&a));
            let cert = t.certificate;
            let mut rep = BarrierReport {
                kind,
                normal_convention: "nu = (-sin theta, cos theta) along the profile from the axis".into(),
                params: to_value(t.lambda),
                rows: vec![0.0],
                columns: cols,
                residual: vec![res.iter().map(|v| 1e-6 - v.abs()).collect()],
                expect: shrinkerlab::barriers::Expect::NonNegative,
                min_residual: 0.0,
                max_residual: 0.0,
                pass: false,
                extra: json!({"certificate": cert, "stored": "1e-6 - |residual|"}),
            };
            rep.params = p.params.clone().unwrap_or_default();
            rep.refresh();
            rep
        }
    };
    let dest = p.grid_out.clone().unwrap_or_default();
    let mut r = Report::new("barrier verify", &p);
    if let Some(n) = nodes {
        r.grid("nodes", n);
    }
    r.grid("rows", report.rows.len()).grid("columns", report.columns.len());
    r.tolerance("resolution_floor", shrinkerlab::barriers::RESOLUTION_FLOOR);
    for (k, v) in tolerances {
        r.tolerance(k, v);
    }
    r.oracle("sign condition recomputed from the stored residual grid");
    r.flag("sign_condition", report.pass);
    r.flag("pass_recomputed_agrees", report.pass == report.pass_recomputed());
    for (k, v) in flags {
        r.flag(k, v);
    }
    r.results = json!({"barrier": report, "details": extra, "grid_ref": out.path(&dest)});
    let row_name = if matches!(kind, BarrierKind::GlobalPlus | BarrierKind::GlobalMinus) { "tau" } else { "row" };
    write_grid(&out.prepare(&dest)?, row_name, "column", &report.rows, &report.columns, &report.residual)?;
    Ok(r)
}

pub fn translator_solve_cmd(out: &Output, mut p: TranslatorParams) -> Outcome {
    crate::defaults!(p { lambda: 10.0, delta: 0.05, nodes: 512usize, tol: 1e-12, out: "translator.json", residual_out: "translator_residual.csv" });
    let t = translator_solve(p.lambda.unwrap_or_default(), p.delta.unwrap_or_default(), p.nodes.unwrap_or_default(), p.tol.unwrap_or_default())?;
    crate::defaults!(p { band_lo: 0.0, band_hi: t.height });
    let area = translator_area_check(&t, p.band_lo.unwrap_or_default(), p.band_hi.unwrap_or_default())?;
    let res = translator_residual(&t.profile(), t.lambda, 6)?;
    let mut r = Report::new("translator solve", &p);
    r.grid("nodes", t.nodes.len());
    r.tolerance("certificate", 1e-6);
    r.oracle("weighted area inequalities of the translator; level-set speed against the rescaled circle flow");
    r.flag("certified", t.certificate <= 1e-6);
    r.flag("weighted_area_bounds", area.pass);
    let mut level = Value::Null;
    if t.lambda >= 50.0 {
        let l = level_set_check(&t, 0.25, 0.75)?;
        r.tolerance("level_set_relative", 0.05);
        r.flag("level_set_matches_circle_flow", l.max_relative_error <= 0.05);
        level = to_value(l);
    }
    let (dest, res_dest) = (p.out.clone().unwrap_or_default(), p.residual_out.clone().unwrap_or_default());
    r.results = json!({
        "lambda": t.lambda,
        "delta": t.delta,
        "r_delta": t.r_delta,
        "height": t.height,
        "arclength": t.arclength,
        "certificate": t.certificate,
        "area": area,
        "level_set": level,
        "profile_ref": out.path(&dest),
        "residual_ref": out.path(&res_dest),
    });
    std::fs::write(out.prepare(&dest)?, serde_json::to_string_pretty(&t).map_err(|e| Failure::Internal(e.to_string()))?)
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let idx: Vec<f64> = (0..res.len()).map(|i| i as f64).collect();
    let rr: Vec<f64> = t.nodes.iter().map(|x| x[0]).collect();
    let zz: Vec<f64> = t.nodes.iter().map(|x| x[1]).collect();
    write_series(&out.prepare(&res_dest)?, &["node", "r", "z", "residual"], &[&idx, &rr, &zz, &res])?;
    Ok(r)
}

pub fn ancient_run(out: &Output, mut p: AncientParams) -> Outcome {
    let s = surface(&mut p.surface, "torus", 256)?;
    crate::defaults!(p { eps: 1e-3, psi0: 0.12, dt: 1e-3, every: 5usize, tau_span: 20.0, second_mode: 0.0, li_yau_r: 10.0, trace_out: "ancient_trace.csv" });
    let eps = p.eps.unwrap_or_default();
    crate::defaults!(p { eps_compare: eps / 2.0 });
    let eps_b = p.eps_compare.unwrap_or_default();
    ensure(eps_b > 0.0 && eps_b < eps, "eps_compare must lie in (0, eps)")?;
    let pair = ground_state(&s)?;
    let second = p.second_mode.unwrap_or_default();
    let seed = if second != 0.0 {
        let modes = spectrum(&s, 0, 2)?;
        Some(modes[1].eigenfunction.iter().map(|v| second * v).collect())
    } else {
        None
    };
    let cfg = RunConfig {
        tau_span: p.tau_span.unwrap_or_default(),
        psi0: p.psi0,
        dt: p.dt,
        snapshot_every: p.every.unwrap_or(1),
        seed,
        ..Default::default()
    };
    let dirichlet = match (p.dirichlet_lo, p.dirichlet_hi) {
        (Some(lo), Some(hi)) => {
            let prob = DirichletProblem::new(&s, lo, hi)?;
            let g = dirichlet_ground_state(&prob)?;
            Some((prob, g))
        }
        (None, None) => None,
        _ => return bad("give both dirichlet_lo and dirichlet_hi or neither"),
    };
    let (run, other) = rayon::join(|| one_sided_run(&s, &pair, eps, &cfg), || one_sided_run(&s, &pair, eps_b, &cfg));
    let (run, other) = (run?, other?);
    let mu = pair.eigenvalue;
    let eps0 = search_epsilon0(&run);
    let sw = eps0.map(|e| sandwich(&run, e, 0.05));
    let min_speed = run.margins.iter().map(|m| m.min_speed).fold(f64::INFINITY, f64::min);
    let dynamics = spectral_dynamics(&s, &run)?;
    let li_yau = li_yau_monitor(&s, &run, p.li_yau_r.unwrap_or_default())?;
    let (ta, tb) = (exit_time(&run, 0.1)?, exit_time(&other, 0.1)?);
    let expected_shift = (eps / eps_b).ln() / mu.abs();
    let shift_error = ((tb - ta) - expected_shift).abs() / expected_shift;
    let collapse = uniqueness_collapse(&run, &other, &COLLAPSE_LEVELS)?;
    let interior = match &dirichlet {
        Some((prob, g)) => Some(interior_decay_check(&run, prob, g)?),
        None => None,
    };
    let dest = p.trace_out.clone().unwrap_or_default();
    let mut r = Report::new("ancient run", &p);
    describe(&mut r, &s);
    r.grid("snapshots", run.trace.snapshots.len()).grid("dt", run.trace.dt);
    r.tolerance("sandwich", 0.05).tolerance("exit_shift_relative", 0.05).tolerance("li_yau_excess", 0.0);
    r.oracle("sandwich 1/2 <= u e^(mu tau)/phi <= 2 and shrinker mean convexity from the source article");
    r.oracle("exit-time shift log(eps/eps_compare)/|mu| from the leading mode");
    r.flag("sandwich", sw.as_ref().map(|x| x.pass).unwrap_or(false));
    r.flag("mean_convex", min_speed >= 0.0);
    r.flag("li_yau", li_yau.pass);
    r.flag("exit_shift", shift_error <= 0.05);
    if let Some(i) = &interior {
        r.flag("interior_decay", i.bound_holds);
    }
    r.results = json!({
        "epsilon": eps,
        "mu": mu,
        "tau_start": run.tau_start,
        "termination": run.trace.termination,
        "note": run.note,
        "margins": run.margins,
        "epsilon0": eps0,
        "sandwich": sw,
        "min_speed": min_speed,
        "spectral_dynamics": dynamics,
        "li_yau": li_yau,
        "exit_times": {"eps": ta, "eps_compare": tb, "shift": tb - ta, "expected_shift": expected_shift, "relative_error": shift_error},
        "collapse": collapse,
        "interior_decay": interior,
        "trace_ref": out.path(&dest),
    });
    let csv = out.prepare(&dest)?;
    write_trace(&s, &run.trace, &csv, &sidecar(&csv))?;
    Ok(r)
}

pub fn functional_f(_out: &Output, mut p: FParams) -> Outcome {
    let s = surface(&mut p.surface, "sphere", 512)?;
    let v = f_functional(&s.profile)?;
    let mut r = Report::new("functional F", &p);
    describe(&mut r, &s);
    r.oracle("F(S^2(2)) = 4/e, F(plane) = 1, F(S^1(sqrt 2)) = sqrt(2 pi / e)");
    r.results = to_value(v);
    r.flag("certified", s.residual_report.certified);
    Ok(r)
}

pub fn functional_entropy(_out: &Output, mut p: EntropyParams) -> Outcome {
    let s = surface(&mut p.surface, "sphere", 512)?;
    let d = EntropySearch::default();
    crate::defaults!(p {
        center_min: d.center_range.0,
        center_max: d.center_range.1,
        center_step: d.center_step,
        scale_min: d.scale_range.0,
        scale_max: d.scale_range.1,
        scale_count: d.scale_count,
        refinement_levels: d.refinement_levels,
    });
    let search = EntropySearch {
        center_range: (p.center_min.unwrap_or_default(), p.center_max.unwrap_or_default()),
        center_step: p.center_step.unwrap_or_default(),
        scale_range: (p.scale_min.unwrap_or_default(), p.scale_max.unwrap_or_default()),
        scale_count: p.scale_count.unwrap_or_default(),
        refinement_levels: p.refinement_levels.unwrap_or_default(),
    };
    let e = entropy(&s, &search)?;
    let mut r = Report::new("functional entropy", &p);
    describe(&mut r, &s);
    r.grid("evaluations", e.evaluations);
    r.oracle("entropy of a shrinker equals F; round-sphere entropy 4/e at any radius");
    r.flag("interior_maximum", !e.on_boundary);
    r.results = to_value(e);
    Ok(r)
}

pub fn functional_density(_out: &Output, mut p: DensityParams) -> Outcome {
    let s = surface(&mut p.surface, "sphere", 512)?;
    crate::defaults!(p { center_z: 0.0, t0: 0.0, r: vec![1.0] });
    let trace = match &p.trace {
        Some(path) => {
            ensure(p.extinction.is_none(), "extinction applies to the self-similar flow, not to a trace")?;
            let t = read_trace(path, &sidecar(path))?;
            ensure(t.snapshots.iter().all(|x| x.u.len() == s.len()), "trace node count does not match the base surface")?;
            Some(t)
        }
        None => {
            crate::defaults!(p { extinction: 0.0 });
            None
        }
    };
    let flow = match &trace {
        Some(t) => DensityFlow::Trace { base: &s, trace: t },
        None => DensityFlow::SelfSimilar { shrinker: &s, extinction: p.extinction.unwrap_or_default() },
    };
    let scales = p.r.clone().unwrap_or_default();
    ensure(!scales.is_empty(), "need at least one scale r")?;
    let values = scales
        .iter()
        .map(|&radius| {
            huisken_density(&DensityQuery { center_z: p.center_z.unwrap_or_default(), t0: p.t0.unwrap_or_default(), r: radius, flow })
                .map(|d| json!({"r": radius, "value": d.value, "slice": d.slice, "interpolation_bound": d.interpolation_bound}))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut r = Report::new("functional density", &p);
    describe(&mut r, &s);
    r.grid("scales", scales.len());
    r.oracle("density of a self-similar flow at its singular point is F of the shrinker for every r");
    r.results = json!({"densities": values, "flow": if trace.is_some() { "trace" } else { "self_similar" }});
    Ok(r)
}

fn named_set(spec: &str) -> Result<ProfileGeometry, Failure> {
    match spec.strip_prefix("sphere:") {
        Some(radius) => {
            let radius: f64 = radius.parse().or_else(|_| bad(format!("bad sphere radius in '{spec}'")))?;
            Ok(make_model(Model::Sphere, ModelParams { radius: Some(radius), ..Default::default() }, 256)?.profile)
        }
        None => Ok(ProfileGeometry::load(Path::new(spec))?),
    }
}

pub fn functional_distance(_out: &Output, mut p: DistanceParams) -> Outcome {
    crate::defaults!(p { first: "sphere:1", second: "sphere:3", center_z: 0.0, t0: 0.0, radius: 10.0, t: 0.0, cells: 400usize });
    let (a, b) = (named_set(p.first.as_deref().unwrap_or_default())?, named_set(p.second.as_deref().unwrap_or_default())?);
    let q = ConformalDistanceQuery {
        center_z: p.center_z.unwrap_or_default(),
        t0: p.t0.unwrap_or_default(),
        radius: p.radius.unwrap_or_default(),
        t: p.t.unwrap_or_default(),
        first: &a,
        second: &b,
        cells: p.cells.unwrap_or_default(),
    };
    let d = ilmanen_distance(&q)?;
    let mut r = Report::new("functional ilmanen-distance", &p);
    r.grid("cells", q.cells).grid("grid", d.grid).grid("spacing", d.spacing);
    r.oracle("independent Dijkstra/scipy solve: 0.0209184 for spheres of radii 1 and 3 at R = 10");
    r.flag("sets_joined", d.distance.is_some());
    r.results = to_value(d);
    Ok(r)
}

pub fn selftest(_out: &Output, p: SelftestParams) -> Outcome {
    let ids: Vec<usize> = match p.criterion {
        Some(id) if (1..=12).contains(&id) => vec![id],
        Some(id) => return bad(format!("criterion ids run from 1 to 12, got {id}")),
        None => (1..=12).collect(),
    };
    use rayon::prelude::*;
    let outcomes: Vec<_> = ids.par_iter().map(|&id| selftest::run_criterion(id)).collect();
    for o in &outcomes {
        eprintln!("{}", selftest::summary_line(o));
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    eprintln!("{passed} of {} criteria passed", outcomes.len());
    let mut r = Report::new("selftest", &p);
    r.oracle("closed forms, quantitative bounds and independent scipy oracles, tagged per check");
    for o in &outcomes {
        r.flag(&format!("criterion_{:02}", o.id), o.pass);
        for c in &o.checks {
            r.tolerance(&format!("{:02}: {}", o.id, c.name), c.tolerance);
        }
    }
    r.results = to_value(&outcomes);
    Ok(r)
}
