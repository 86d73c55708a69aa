//! One-sided flows out of an unstable shrinker, started from εφ at the
//! calibrated time τ(ε) = log ε / |μ|, and their asymptotic diagnostics.
//!
//! All τ values in this module are absolute: a run from ε starts at τ(ε), so
//! its leading mode is e^{−μτ}φ regardless of ε.

use crate::error::{invalid, LabError, Result};
use crate::graphflow::{default_psi0, BoundaryData, FlowTrace, GraphFlow, RunOptions, Scheme, Snapshot, Termination};
use crate::numerics::fit::{line_fit, offset_exponential_fit};
use crate::shrinker::ShrinkerSurface;
use crate::spectral::{DirichletGroundState, DirichletProblem, SpectralPair};
use crate::surface::{weighted_inner, weighted_norm};
use serde::{Deserialize, Serialize};

/// Modeling assumption stated in every report.
pub const REGIME_NOTE: &str =
    "early-time segment of a forward run from eps*phi stands in for the tau -> -infinity regime";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub tau: f64,
    pub min: f64,
    pub max: f64,
    pub min_speed: f64,
    pub min_u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSidedRun {
    pub epsilon: f64,
    pub mu: f64,
    pub tau_start: f64,
    pub trace: FlowTrace,
    pub margins: Vec<Margin>,
    /// Eigenfunction the run was seeded with and measured against.
    pub phi: Vec<f64>,
    pub note: String,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Relative duration cap.
    pub tau_span: f64,
    pub psi0: Option<f64>,
    pub dt: Option<f64>,
    pub snapshot_every: usize,
    pub boundary: BoundaryData,
    /// Extra component added to εφ (already scaled by the caller, times ε here).
    pub seed: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { tau_span: 20.0, psi0: None, dt: Some(1e-3), snapshot_every: 10, boundary: BoundaryData::default(), seed: None }
    }
}

/// τ(ε) = log ε / |μ|.
pub fn start_time(epsilon: f64, mu: f64) -> f64 {
    epsilon.ln() / mu.abs()
}

/// Run from u₀ = ε(φ + seed) and record sandwich margins u / (e^{−μτ}φ).
pub fn one_sided_run(surface: &ShrinkerSurface, pair: &SpectralPair, epsilon: f64, cfg: &RunConfig) -> Result<OneSidedRun> {
    let mu = pair.eigenvalue;
    if !(mu < 0.0) {
        return invalid(format!("one-sided runs need an unstable ground state, got mu = {mu}"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let phi = &pair.eigenfunction;
    let mut u0: Vec<f64> = phi.iter().map(|p| epsilon * p).collect();
    if let Some(seed) = &cfg.seed {
        if seed.len() != u0.len() {
            return invalid("seed length does not match the surface");
        }
        u0.iter_mut().zip(seed).for_each(|(u, s)| *u += epsilon * s);
    }
    let flow = GraphFlow::new(surface, cfg.boundary);
    let tau_start = start_time(epsilon, mu);
    let mut opts = RunOptions::new(tau_start + cfg.tau_span, cfg.psi0.unwrap_or_else(|| default_psi0(surface)), cfg.snapshot_every);
    opts.scheme = Scheme::Imex;
    opts.dt = cfg.dt;
    opts.reference = Some(phi.clone());
    let trace = flow.run(tau_start, &u0, &opts)?;
    if trace.termination == Termination::GraphInvariantViolated || trace.termination == Termination::BoundaryFailure {
        return Err(LabError::NonConvergence(format!(
            "one-sided run stopped early: {}",
            trace.detail.clone().unwrap_or_default()
        )));
    }
    let active: Vec<usize> = (0..phi.len()).filter(|&i| phi[i] > 0.0).collect();
    let mut margins = Vec::with_capacity(trace.snapshots.len());
    for s in &trace.snapshots {
        let lead = (-mu * s.tau).exp();
        let min_u = active.iter().map(|&i| s.u[i]).fold(f64::INFINITY, f64::min);
        if !(min_u > 0.0) {
            return Err(LabError::NonConvergence(format!("positivity lost at tau = {:.4}", s.tau)));
        }
        let ratios = active.iter().map(|&i| s.u[i] / (lead * phi[i]));
        let (lo, hi) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        let min_speed = active.iter().map(|&i| s.speed[i]).fold(f64::INFINITY, f64::min);
        margins.push(Margin { tau: s.tau, min: lo, max: hi, min_speed, min_u });
    }
    Ok(OneSidedRun { epsilon, mu, tau_start, trace, margins, phi: phi.clone(), note: REGIME_NOTE.into() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub epsilon0: f64,
    /// Absolute τ interval [τ(ε), τ(ε₀)] checked.
    pub window: (f64, f64),
    pub min_margin: f64,
    pub max_margin: f64,
    pub min_speed: f64,
    pub pass: bool,
}

/// Sandwich ½ ≤ u/(e^{−μτ}φ) ≤ 2 (with tolerance) on τ ≤ τ(ε₀).
pub fn sandwich(run: &OneSidedRun, epsilon0: f64, tol: f64) -> SandwichReport {
    let end = start_time(epsilon0, run.mu);
    let inside: Vec<&Margin> = run.margins.iter().filter(|m| m.tau <= end + 1e-12).collect();
    let min_margin = inside.iter().map(|m| m.min).fold(f64::INFINITY, f64::min);
    let max_margin = inside.iter().map(|m| m.max).fold(f64::NEG_INFINITY, f64::max);
    let min_speed = run.margins.iter().map(|m| m.min_speed).fold(f64::INFINITY, f64::min);
    SandwichReport {
        epsilon0,
        window: (run.tau_start, end),
        min_margin,
        max_margin,
        min_speed,
        pass: !inside.is_empty() && min_margin >= 0.5 - tol && max_margin <= 2.0 + tol,
    }
}

pub const EPSILON0_GRID: [f64; 4] = [0.1, 0.05, 0.02, 0.01];

/// Largest ε₀ on the grid such that the reference run stays in the sandwich
/// (tolerance 0) up to τ(ε₀), is reached before the run stops, and keeps a
/// nonnegative speed. Returns None if no grid value qualifies.
pub fn search_epsilon0(run: &OneSidedRun) -> Option<f64> {
    let last = run.margins.last()?.tau;
    EPSILON0_GRID.iter().cloned().find(|&e0| {
        e0 > run.epsilon && start_time(e0, run.mu) <= last + 1e-12 && {
            let s = sandwich(run, e0, 0.0);
            s.pass && s.min_speed >= 0.0
        }
    })
}

/// Absolute τ at which sup u first reaches `level`, by linear interpolation
/// between snapshots, with the interpolation weight.
pub fn level_crossing(trace: &FlowTrace, level: f64) -> Option<(usize, f64, f64)> {
    let sup = |s: &Snapshot| s.diagnostics.sup_u;
    for (k, w) in trace.snapshots.windows(2).enumerate() {
        let (a, b) = (sup(&w[0]), sup(&w[1]));
        if a < level && b >= level {
            let t = (level - a) / (b - a);
            return Some((k, t, w[0].tau + t * (w[1].tau - w[0].tau)));
        }
    }
    None
}

/// Relative exit time from τ(ε) to sup u = `level`.
pub fn exit_time(run: &OneSidedRun, level: f64) -> Result<f64> {
    level_crossing(&run.trace, level)
        .map(|(_, _, t)| t - run.tau_start)
        .ok_or_else(|| LabError::Invalid(format!("run never reached sup u = {level}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDynamicsTrace {
    pub tau: Vec<f64>,
    pub a: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// Fit a(τ) ≈ a_∞ + C e^{kτ}: (k, a_∞, C).
    pub a_fit: (f64, f64, f64),
    /// Slope of −log(‖P₂u‖/‖P₁u‖) against τ over the linear regime, when P₂ is resolvable.
    pub ratio_decay: Option<f64>,
    pub ratio_window: (usize, usize),
    pub note: String,
}

/// Snapshots dropped at each end of a fit window.
pub const FIT_TRIM: f64 = 0.1;

/// a(τ) = e^{μτ}⟨u, φ⟩_W, P₁u = ⟨u, φ⟩φ, P₂u = u − P₁u.
pub fn spectral_dynamics(surface: &ShrinkerSurface, run: &OneSidedRun) -> Result<SpectralDynamicsTrace> {
    let snaps = &run.trace.snapshots;
    if snaps.len() < 10 {
        return invalid(format!("spectral dynamics needs at least 10 snapshots, got {}", snaps.len()));
    }
    let g = &surface.geom;
    let mut tr = SpectralDynamicsTrace {
        tau: vec![],
        a: vec![],
        p1: vec![],
        p2: vec![],
        a_fit: (0.0, 0.0, 0.0),
        ratio_decay: None,
        ratio_window: (0, 0),
        note: REGIME_NOTE.into(),
    };
    for s in snaps {
        let c = weighted_inner(&s.u, &run.phi, g)?;
        let rest: Vec<f64> = s.u.iter().zip(&run.phi).map(|(u, p)| u - c * p).collect();
        tr.tau.push(s.tau);
        tr.a.push((run.mu * s.tau).exp() * c);
        tr.p1.push(c.abs());
        tr.p2.push(weighted_norm(&rest, g));
    }
    let n = snaps.len();
    let (lo, hi) = ((FIT_TRIM * n as f64).ceil() as usize, n - (FIT_TRIM * n as f64).ceil() as usize);
    let mu = run.mu.abs();
    let (k, a0, c1, _) = offset_exponential_fit(&tr.tau[lo..hi], &tr.a[lo..hi], 0.05 * mu, 3.0 * mu);
    tr.a_fit = (k, a0, c1);
    // Linear regime: leading amplitude at most ten times its start value.
    let end = (lo..n).take_while(|&i| tr.p1[i] <= 10.0 * tr.p1[0]).last().unwrap_or(lo);
    tr.ratio_window = (lo, end);
    let resolvable = tr.p2[lo] > 1e-10 * tr.p1[lo];
    if end >= lo + 3 && resolvable {
        let y: Vec<f64> = (lo..=end).map(|i| -(tr.p2[i] / tr.p1[i]).ln()).collect();
        tr.ratio_decay = Some(line_fit(&tr.tau[lo..=end], &y).slope);
    }
    Ok(tr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorDecayReport {
    pub mu0: f64,
    /// Fitted k in sup_{Σ₀} u ≈ C' e^{kτ}.
    pub exponent: f64,
    /// Smallest C with sup_{Σ₀} u ≤ C e^{−μ₀τ} on the fit window.
    pub constant: f64,
    /// The nearly sharp bound requires k ≥ |μ₀| as τ → −∞.
    pub bound_holds: bool,
    pub note: String,
}

pub fn interior_decay_check(run: &OneSidedRun, problem: &DirichletProblem, ground: &DirichletGroundState) -> Result<InteriorDecayReport> {
    let snaps = &run.trace.snapshots;
    if snaps.len() < 5 {
        return invalid("interior decay fit needs at least 5 snapshots");
    }
    let mu0 = ground.pair.eigenvalue;
    let n = snaps.len();
    let (lo, hi) = ((FIT_TRIM * n as f64).ceil() as usize, n - (FIT_TRIM * n as f64).ceil() as usize);
    let sup: Vec<f64> = snaps
        .iter()
        .map(|s| (problem.lo..=problem.hi).map(|i| s.u[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let tau: Vec<f64> = snaps.iter().map(|s| s.tau).collect();
    let logs: Vec<f64> = sup[lo..hi].iter().map(|v| v.ln()).collect();
    let fit = line_fit(&tau[lo..hi], &logs);
    let constant = (lo..hi).map(|i| sup[i] * (mu0 * tau[i]).exp()).fold(0.0, f64::max);
    Ok(InteriorDecayReport {
        mu0,
        exponent: fit.slope,
        constant,
        bound_holds: fit.slope >= mu0.abs() * (1.0 - 0.1) || mu0 >= 0.0,
        note: REGIME_NOTE.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiYauReport {
    pub r: f64,
    pub constant: f64,
    /// max over nodes in B_R and snapshots of |∇log u|² − 2∂τ log u − 20nR².
    pub max_excess: f64,
    pub worst_tau: f64,
    pub worst_node: usize,
    pub nodes_checked: usize,
    pub pass: bool,
}

/// Li–Yau excess for one field with its τ-derivative.
pub fn li_yau_field(surface: &ShrinkerSurface, u: &[f64], dtau_u: &[f64], r: f64) -> Result<(f64, usize, usize)> {
    let flow = GraphFlow::new(surface, BoundaryData::default());
    let (du, _) = flow.derivatives(u);
    let c = 20.0 * surface.profile.n as f64 * r * r;
    let mut worst = (f64::NEG_INFINITY, 0usize);
    let mut count = 0;
    for i in 0..u.len() {
        if surface.geom.xnorm[i] > r {
            continue;
        }
        if !(u[i] > 0.0) {
            return Err(LabError::NonConvergence(format!("positivity lost at node {i}")));
        }
        let q = (du[i] / u[i]).powi(2) - 2.0 * dtau_u[i] / u[i] - c;
        count += 1;
        if q > worst.0 {
            worst = (q, i);
        }
    }
    Ok((worst.0, worst.1, count))
}

pub fn li_yau_monitor(surface: &ShrinkerSurface, run: &OneSidedRun, r: f64) -> Result<LiYauReport> {
    if !(r > 0.0) {
        return invalid("R must be positive");
    }
    let mut rep = LiYauReport {
        r,
        constant: 20.0 * surface.profile.n as f64 * r * r,
        max_excess: f64::NEG_INFINITY,
        worst_tau: 0.0,
        worst_node: 0,
        nodes_checked: 0,
        pass: false,
    };
    for s in &run.trace.snapshots {
        let (q, i, count) = li_yau_field(surface, &s.u, &s.speed, r)?;
        rep.nodes_checked = count;
        if q > rep.max_excess {
            rep.max_excess = q;
            rep.worst_tau = s.tau;
            rep.worst_node = i;
        }
    }
    rep.pass = rep.nodes_checked > 0 && rep.max_excess <= 0.0;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub levels: Vec<f64>,
    /// sup |u_A − u_B| at each matched level.
    pub differences: Vec<f64>,
    /// τ_B − τ_A at each level (zero for an exact collapse).
    pub shifts: Vec<f64>,
    pub nominal_shift: f64,
}

fn field_at_level(trace: &FlowTrace, level: f64) -> Option<(f64, Vec<f64>)> {
    let (k, t, tau) = level_crossing(trace, level)?;
    let (a, b) = (&trace.snapshots[k].u, &trace.snapshots[k + 1].u);
    Some((tau, a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()))
}

pub const COLLAPSE_LEVELS: [f64; 2] = [0.05, 0.1];

/// Compare two runs at matched sup-levels. On absolute τ the runs already
/// share the calibration log(ε_A/ε_B)/|μ|; the residual shift is reported.
pub fn uniqueness_collapse(a: &OneSidedRun, b: &OneSidedRun, levels: &[f64]) -> Result<CollapseReport> {
    if a.phi.len() != b.phi.len() {
        return invalid("runs live on different surfaces");
    }
    let mut rep = CollapseReport {
        levels: levels.to_vec(),
        differences: vec![],
        shifts: vec![],
        nominal_shift: (a.epsilon / b.epsilon).ln() / a.mu.abs(),
    };
    for &l in levels {
        let (ta, ua) = field_at_level(&a.trace, l).ok_or_else(|| LabError::Invalid(format!("run A never reaches level {l}")))?;
        let (tb, ub) = field_at_level(&b.trace, l).ok_or_else(|| LabError::Invalid(format!("run B never reaches level {l}")))?;
        rep.differences.push(ua.iter().zip(&ub).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        rep.shifts.push(tb - ta);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinker::{make_model, Model, ModelParams};
    use crate::spectral::{dirichlet_ground_state, ground_state, spectrum};

    fn setup(model: Model, n: usize) -> (ShrinkerSurface, SpectralPair) {
        let s = make_model(model, ModelParams::default(), n).unwrap();
        let p = ground_state(&s).unwrap();
        (s, p)
    }

    fn cfg(psi0: f64, every: usize) -> RunConfig {
        RunConfig { psi0: Some(psi0), snapshot_every: every, ..Default::default() }
    }

    #[test]
    fn sphere_run_matches_ode_and_sandwich() {
        let (s, p) = setup(Model::Sphere, 128);
        let run = one_sided_run(&s, &p, 1e-2, &cfg(0.12, 10)).unwrap();
        let mu = p.eigenvalue;
        let rho0 = 2.0 - 1e-2 * p.eigenfunction[0];
        for snap in &run.trace.snapshots {
            let dt = snap.tau - run.tau_start;
            // Inward graph: ρ² = 4 − (4 − ρ₀²)e^{τ}.
            let rho = (4.0 - (4.0 - rho0 * rho0) * dt.exp()).sqrt();
            assert!((snap.u[10] - (2.0 - rho)).abs() < 2e-5, "{}", snap.u[10] - (2.0 - rho));
        }
        let e0 = search_epsilon0(&run).unwrap();
        assert!(sandwich(&run, e0, 0.0).pass);
        assert!(mu < 0.0);
    }

    #[test]
    fn exit_time_shifts_by_log2() {
        let (s, p) = setup(Model::Sphere, 128);
        let a = one_sided_run(&s, &p, 1e-3, &cfg(0.12, 1)).unwrap();
        let b = one_sided_run(&s, &p, 5e-4, &cfg(0.12, 1)).unwrap();
        let d = exit_time(&b, 0.1).unwrap() - exit_time(&a, 0.1).unwrap();
        let target = 2f64.ln() / p.eigenvalue.abs();
        assert!((d / target - 1.0).abs() < 0.05, "{d}");
    }

    #[test]
    fn sphere_spectral_dynamics_is_pure_mode() {
        let (s, p) = setup(Model::Sphere, 128);
        let run = one_sided_run(&s, &p, 1e-3, &cfg(0.1, 10)).unwrap();
        let d = spectral_dynamics(&s, &run).unwrap();
        assert!(d.p2.iter().zip(&d.p1).all(|(a, b)| *a <= 1e-12 * b));
        assert!(d.a.iter().all(|a| *a > 0.0));
    }

    #[test]
    fn torus_one_sided_run() {
        let (s, p) = setup(Model::Torus, 256);
        let run = one_sided_run(&s, &p, 1e-3, &cfg(0.1, 5)).unwrap();
        assert!(run.margins.iter().all(|m| m.min_speed > 0.0 && m.min_u > 0.0));
        let e0 = search_epsilon0(&run).expect("no epsilon0");
        assert!(sandwich(&run, e0, 0.05).pass);
        let d = spectral_dynamics(&s, &run).unwrap();
        let mu = p.eigenvalue.abs();
        assert!((d.a_fit.0 / mu - 1.0).abs() < 0.15, "{:?}", d.a_fit);
        let ly = li_yau_monitor(&s, &run, 10.0).unwrap();
        assert!(ly.pass);
    }

    #[test]
    fn torus_second_mode_decays() {
        let (s, p) = setup(Model::Torus, 256);
        let modes = spectrum(&s, 0, 2).unwrap();
        let psi = &modes[1];
        let seed: Vec<f64> = psi.eigenfunction.iter().map(|v| 0.2 * v).collect();
        let c = RunConfig { seed: Some(seed), ..cfg(0.1, 5) };
        let run = one_sided_run(&s, &p, 1e-5, &c).unwrap();
        let d = spectral_dynamics(&s, &run).unwrap();
        let rate = d.ratio_decay.unwrap();
        assert!(rate >= (psi.eigenvalue - p.eigenvalue) - 0.1, "{rate}");
    }

    #[test]
    fn li_yau_detects_adversarial_field() {
        let s = make_model(Model::Torus, ModelParams::default(), 256).unwrap();
        let u: Vec<f64> = s.profile.nodes.iter().map(|x| (50.0 * x[0]).exp()).collect();
        let (q, _, count) = li_yau_field(&s, &u, &vec![0.0; u.len()], 1.0).unwrap();
        assert!(count > 0 && q > 0.0);
        let (s, p) = setup(Model::Sphere, 128);
        let run = one_sided_run(&s, &p, 1e-2, &cfg(0.1, 10)).unwrap();
        assert!(li_yau_monitor(&s, &run, 2.0).unwrap().pass);
    }

    #[test]
    fn sphere_uniqueness_collapse() {
        let (s, p) = setup(Model::Sphere, 128);
        let a = one_sided_run(&s, &p, 1e-2, &cfg(0.12, 1)).unwrap();
        let b = one_sided_run(&s, &p, 1e-3, &cfg(0.12, 1)).unwrap();
        let rep = uniqueness_collapse(&a, &b, &COLLAPSE_LEVELS).unwrap();
        assert!(rep.differences.iter().all(|d| *d <= 1e-5), "{:?}", rep.differences);
        let same = uniqueness_collapse(&a, &a, &COLLAPSE_LEVELS).unwrap();
        assert!(same.differences.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn sphere_interior_decay() {
        let (s, p) = setup(Model::Sphere, 129);
        let prob = DirichletProblem::new(&s, 20, 64).unwrap();
        let g = dirichlet_ground_state(&prob).unwrap();
        let run = one_sided_run(&s, &p, 1e-3, &cfg(0.1, 10)).unwrap();
        let rep = interior_decay_check(&run, &prob, &g).unwrap();
        assert!(g.pair.eigenvalue >= p.eigenvalue);
        assert!((rep.exponent - 1.0).abs() < 0.1 && rep.bound_holds, "{rep:?}");
    }
}
