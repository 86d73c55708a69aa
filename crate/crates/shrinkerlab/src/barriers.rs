//! Barrier families for graphical rescaled flows and pointwise checks of
//! their differential inequalities.
//!
//! Residuals are always ∂τv − G(v) for the graphical speed G of the
//! graphflow module, in the base surface's normal convention. A
//! supersolution has residual ≥ 0, a subsolution ≤ 0.

pub mod translator;

use crate::error::{invalid, LabError, Result};
use crate::graphflow::{point_speed, BoundaryData, Frame, GraphFlow};
use crate::shrinker::{EndClass, ShrinkerSurface};
use crate::spectral::{DirichletGroundState, DirichletProblem, SpectralPair};
use crate::surface::Side;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::{PI, SQRT_2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    GlobalPlus,
    GlobalMinus,
    CompactDirichlet,
    LongCylindrical,
    Conical,
    Translator,
}

impl std::str::FromStr for BarrierKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.replace('-', "_")))
            .map_err(|_| LabError::Invalid(format!("unknown barrier kind '{s}'")))
    }
}

/// Which side of zero the residual must lie on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    NonNegative,
    NonPositive,
    Positive,
}

impl Expect {
    fn holds(self, v: f64) -> bool {
        match self {
            Expect::NonNegative => v >= 0.0,
            Expect::NonPositive => v <= 0.0,
            Expect::Positive => v > 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub kind: BarrierKind,
    pub normal_convention: String,
    pub params: Value,
    /// Row labels of the residual grid (τ values or a single 0 for static fields).
    pub rows: Vec<f64>,
    /// Column labels (node index or abscissa).
    pub columns: Vec<f64>,
    pub residual: Vec<Vec<f64>>,
    pub expect: Expect,
    pub min_residual: f64,
    pub max_residual: f64,
    pub pass: bool,
    #[serde(default)]
    pub extra: Value,
}

impl BarrierReport {
    fn new(kind: BarrierKind, params: Value, rows: Vec<f64>, columns: Vec<f64>, residual: Vec<Vec<f64>>, expect: Expect) -> Self {
        let mut r = BarrierReport {
            kind,
            normal_convention: "nu = orientation * J T; positive u moves along nu".into(),
            params,
            rows,
            columns,
            residual,
            expect,
            min_residual: 0.0,
            max_residual: 0.0,
            pass: false,
            extra: Value::Null,
        };
        r.refresh();
        r
    }

    /// Recompute min, max and the pass flag from the stored grid.
    pub fn refresh(&mut self) {
        let flat = self.residual.iter().flatten();
        self.min_residual = flat.clone().cloned().fold(f64::INFINITY, f64::min);
        self.max_residual = flat.clone().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.pass = !self.residual.is_empty() && flat.clone().all(|v| v.is_finite() && self.expect.holds(*v));
    }

    pub fn pass_recomputed(&self) -> bool {
        let mut c = self.clone();
        c.refresh();
        c.pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Linear-part magnitude below which a residual sample is not resolvable in
/// double precision against the O(1) terms inside G.
pub const RESOLUTION_FLOOR: f64 = 1e-10;

/// v_± = (e^{−μτ} ± M e^{−2μτ})φ; requires M e^{−μτ} ≤ ½.
pub fn global_barrier(pair: &SpectralPair, m: f64, tau: f64, sign: Sign) -> Result<Vec<f64>> {
    let mu = pair.eigenvalue;
    if !(m >= 0.0) {
        return invalid("M must be non-negative");
    }
    if m * (-mu * tau).exp() > 0.5 {
        return invalid(format!("hypothesis M e^(-mu tau) <= 1/2 fails: {:.4}", m * (-mu * tau).exp()));
    }
    Ok(global_field(pair, m, tau, sign))
}

fn global_field(pair: &SpectralPair, m: f64, tau: f64, sign: Sign) -> Vec<f64> {
    let e = (-pair.eigenvalue * tau).exp();
    let c = e + sign.value() * m * e * e;
    pair.eigenfunction.iter().map(|p| c * p).collect()
}

/// Nonlinear remainder measured from the base: G(v) − G(0) − Lv with the
/// pointwise L. Subtracting G(0) removes the base certificate residual, which
/// would otherwise swamp a quadratic quantity.
fn remainder(flow: &GraphFlow, v: &[f64]) -> Result<Vec<f64>> {
    let g0 = flow.speed(&vec![0.0; v.len()])?;
    let n = flow.nonlinearity(v)?;
    Ok(n.iter().zip(&g0).map(|(a, b)| a - b).collect())
}

/// ∂τv_± − G(v_±) at one τ. The linear part uses Lφ = −μφ for the discrete
/// eigenpair, so (∂τ − L)v_± = ∓μM e^{−2μτ}φ without cancellation.
pub fn global_residual(surface: &ShrinkerSurface, pair: &SpectralPair, m: f64, tau: f64, sign: Sign) -> Result<Vec<f64>> {
    let flow = GraphFlow::new(surface, BoundaryData::default());
    global_residual_with(&flow, pair, m, tau, sign)
}

fn global_residual_with(flow: &GraphFlow, pair: &SpectralPair, m: f64, tau: f64, sign: Sign) -> Result<Vec<f64>> {
    let mu = pair.eigenvalue;
    let v = global_field(pair, m, tau, sign);
    let n = remainder(flow, &v)?;
    let lin = -sign.value() * mu * m * (-2.0 * mu * tau).exp();
    Ok(pair.eigenfunction.iter().zip(&n).map(|(p, nv)| lin * p - nv).collect())
}

/// Evaluate the global barrier residual on a τ grid.
pub fn verify_super_sub(surface: &ShrinkerSurface, pair: &SpectralPair, m: f64, taus: &[f64], sign: Sign) -> Result<BarrierReport> {
    if taus.is_empty() {
        return invalid("empty tau grid");
    }
    let flow = GraphFlow::new(surface, BoundaryData::default());
    let mut grid = Vec::with_capacity(taus.len());
    for &t in taus {
        grid.push(global_residual_with(&flow, pair, m, t, sign)?);
    }
    let (kind, expect) = match sign {
        Sign::Plus => (BarrierKind::GlobalPlus, Expect::NonNegative),
        Sign::Minus => (BarrierKind::GlobalMinus, Expect::NonPositive),
    };
    let tmax = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mu = pair.eigenvalue;
    let mut rep = BarrierReport::new(
        kind,
        json!({"M": m, "mu": mu, "sign": sign}),
        taus.to_vec(),
        (0..surface.len()).map(|i| i as f64).collect(),
        grid,
        expect,
    );
    rep.extra = json!({
        "hypothesis_holds": m * (-mu * tmax).exp() <= 0.5,
        "eigen_residual": pair.residual,
    });
    Ok(rep)
}

/// τ grid below `tau0`: steps of ¼ over four units, stopping where the
/// linear part M|μ|e^{−2μτ}·min φ drops under the resolution floor.
pub fn resolvable_taus(pair: &SpectralPair, m: f64, tau0: f64) -> Vec<f64> {
    let mu = pair.eigenvalue;
    let phi_min = pair.eigenfunction.iter().cloned().filter(|p| *p > 0.0).fold(f64::INFINITY, f64::min);
    (0..=16)
        .map(|k| tau0 - 0.25 * k as f64)
        .take_while(|t| m * mu.abs() * (-2.0 * mu * t).exp() * phi_min >= RESOLUTION_FLOOR)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalSearch {
    pub m: f64,
    pub tau0: f64,
    pub report: BarrierReport,
}

pub const SEARCH_M: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// Smallest M, then largest τ₀ ∈ {−1, …, −8}, for which the hypothesis holds
/// at τ₀ and the sign condition holds on the resolvable grid below τ₀.
pub fn search_global(surface: &ShrinkerSurface, pair: &SpectralPair, sign: Sign) -> Result<Option<GlobalSearch>> {
    for m in SEARCH_M {
        for k in 1..=8 {
            let tau0 = -(k as f64);
            if m * (-pair.eigenvalue * tau0).exp() > 0.5 {
                continue;
            }
            let taus = resolvable_taus(pair, m, tau0);
            if taus.is_empty() {
                continue;
            }
            let report = verify_super_sub(surface, pair, m, &taus, sign)?;
            if report.pass {
                return Ok(Some(GlobalSearch { m, tau0, report }));
            }
        }
    }
    Ok(None)
}

/// Ratio of the residual to M|μ|e^{−2μτ}φ, node by node, at one τ.
pub fn leading_coefficient_ratio(surface: &ShrinkerSurface, pair: &SpectralPair, m: f64, tau: f64) -> Result<Vec<f64>> {
    let r = global_residual(surface, pair, m, tau, Sign::Plus)?;
    let scale = m * pair.eigenvalue.abs() * (-2.0 * pair.eigenvalue * tau).exp();
    Ok(r.iter().zip(&pair.eigenfunction).map(|(x, p)| x / (scale * p)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactReport {
    pub mu0: f64,
    /// max |(∂τ − L_h)v − a²Mμ₀e^{−2μ₀τ}φ₀| over interior nodes, pointwise stencil L_h.
    pub identity_error: f64,
    /// Same, divided by a e^{−μ₀τ} max φ₀.
    pub identity_error_relative: f64,
    pub interior: BarrierReport,
    pub collar_nodes: Vec<usize>,
    /// |∇ log v|² − 2∂τ log v on the collar.
    pub hopf_quantity: Vec<f64>,
    pub li_yau_constant: f64,
    pub collar_pass: bool,
}

/// Fraction of the subdomain length treated as boundary collar.
pub const COLLAR_FRACTION: f64 = 0.05;

/// v = a e^{−μ₀τ}(1 − aM e^{−μ₀τ})φ₀ on a compact Dirichlet domain, with the
/// identity check, the interior subsolution sign and the boundary collar
/// comparison against the Li–Yau constant 20nR².
pub fn compact_dirichlet_barrier(
    problem: &DirichletProblem,
    ground: &DirichletGroundState,
    a: f64,
    m: f64,
    tau: f64,
    eta: f64,
    li_yau_r: f64,
) -> Result<(Vec<f64>, CompactReport)> {
    let mu0 = ground.pair.eigenvalue;
    let e = (-mu0 * tau).exp();
    if !(a > 0.0 && m >= 0.0) {
        return invalid("need a > 0 and M >= 0");
    }
    if a * m * e > eta {
        return invalid(format!("hypothesis a M e^(-mu0 tau) <= eta fails: {:.4} > {eta}", a * m * e));
    }
    let phi = &ground.pair.eigenfunction;
    let base = &problem.parent;
    let coef = a * e * (1.0 - a * m * e);
    let v: Vec<f64> = phi.iter().map(|p| coef * p).collect();
    let dt_coef = -mu0 * a * e + 2.0 * mu0 * a * a * m * e * e;
    let flow = GraphFlow::new(base, BoundaryData::default());
    let lv = flow.l_pointwise(&v);
    let target = a * a * m * mu0 * e * e;
    let boundary = problem.boundary_nodes();
    let interior: Vec<usize> = (problem.lo..=problem.hi).filter(|i| !boundary.contains(i)).collect();
    let mut id_err = 0.0f64;
    for &i in &interior {
        id_err = id_err.max((dt_coef * phi[i] - lv[i] - target * phi[i]).abs());
    }
    let phi_max = phi.iter().cloned().fold(0.0, f64::max);

    let (t, _) = base.profile.chord_parameter();
    let (t_lo, t_hi) = (t[problem.lo], t[problem.hi]);
    let width = COLLAR_FRACTION * (t_hi - t_lo);
    let in_collar = |i: usize| {
        boundary.iter().any(|&b| (t[i] - t[b]).abs() <= width) && !boundary.contains(&i)
    };
    let collar: Vec<usize> = interior.iter().cloned().filter(|&i| in_collar(i)).collect();
    let core: Vec<usize> = interior.iter().cloned().filter(|&i| !in_collar(i)).collect();

    let n = remainder(&flow, &v)?;
    let res: Vec<f64> = core.iter().map(|&i| target * phi[i] - n[i]).collect();
    let mut interior_rep = BarrierReport::new(
        BarrierKind::CompactDirichlet,
        json!({"a": a, "M": m, "tau": tau, "eta": eta}),
        vec![tau],
        core.iter().map(|&i| i as f64).collect(),
        vec![res],
        Expect::NonPositive,
    );
    interior_rep.extra = json!({"zone": "interior minus collar"});

    let (d1, _) = flow.derivatives(phi);
    let dtau_log = -mu0 + a * m * mu0 * e / (1.0 - a * m * e);
    let hopf: Vec<f64> = collar.iter().map(|&i| (d1[i] / phi[i]).powi(2) - 2.0 * dtau_log).collect();
    let li_yau = 20.0 * base.profile.n as f64 * li_yau_r * li_yau_r;
    let collar_pass = !hopf.is_empty() && hopf.iter().all(|h| *h > li_yau);
    Ok((
        v,
        CompactReport {
            mu0,
            identity_error: id_err,
            identity_error_relative: id_err / (a * e * phi_max),
            interior: interior_rep,
            collar_nodes: collar,
            hopf_quantity: hopf,
            li_yau_constant: li_yau,
            collar_pass,
        },
    ))
}

/// Ground-state value of the round circle S¹(√2) normalized in its own
/// Gaussian weight.
pub fn circle_ground_value() -> f64 {
    let mass = 2.0 * PI * SQRT_2 * (-0.5f64).exp() / (4.0 * PI).sqrt();
    mass.powf(-0.5)
}

/// α/2 − α(α−1)z^{−2} − |μ̂|: −L U / U for U = η z^α φ̂ on a round cylinder.
pub fn long_linear_coefficient(alpha: f64, z: f64, mu_hat_abs: f64) -> f64 {
    alpha / 2.0 - alpha * (alpha - 1.0) / (z * z) - mu_hat_abs
}

pub const DEFAULT_H0: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongBarrier {
    pub eta: f64,
    pub alpha: f64,
    pub h0: f64,
    /// Upper end of the validity interval, η R^α = h₀.
    pub r_max: f64,
    pub z: Vec<f64>,
    pub field: Vec<f64>,
    /// −L U (linear supersolution residual).
    pub linear: Vec<f64>,
    pub report: BarrierReport,
}

/// Frame of the round cylinder of radius √2 at height z, inward normal.
fn cylinder_frame(z: f64) -> Frame {
    Frame {
        n: 2,
        r: SQRT_2,
        cap: false,
        tangent: [0.0, 1.0],
        normal: [-1.0, 0.0],
        k1: 0.0,
        dk1: 0.0,
        x_dot_t: z,
        x_dot_nu: -SQRT_2,
    }
}

/// U = η z^α φ̂ over the round cylinder on z ∈ [α, R]; the residual is the
/// full nonlinear −G(U) with exact derivatives of U.
pub fn long_cyl_barrier(eta: f64, alpha: f64, h0: f64, samples: usize) -> Result<LongBarrier> {
    let mu_hat = 1.0;
    if !(alpha > 2.0 * mu_hat) {
        return invalid(format!("need alpha > 2|mu_hat| = 2, got {alpha}"));
    }
    let eta_max = alpha.powf(-alpha) * h0;
    if !(eta > 0.0 && eta < eta_max) {
        return invalid(format!("eta must lie in (0, {eta_max:e}), got {eta}"));
    }
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let c = circle_ground_value();
    let r_max = (h0 / eta).powf(1.0 / alpha);
    let z: Vec<f64> = (0..samples).map(|k| alpha + (r_max - alpha) * k as f64 / (samples - 1) as f64).collect();
    let mut field = vec![];
    let mut linear = vec![];
    let mut res = vec![];
    for &zk in &z {
        let u = eta * c * zk.powf(alpha);
        let u1 = eta * c * alpha * zk.powf(alpha - 1.0);
        let u2 = eta * c * alpha * (alpha - 1.0) * zk.powf(alpha - 2.0);
        field.push(u);
        linear.push(long_linear_coefficient(alpha, zk, mu_hat) * u);
        res.push(-point_speed(&cylinder_frame(zk), u, u1, u2)?.g);
    }
    let report = BarrierReport::new(
        BarrierKind::LongCylindrical,
        json!({"eta": eta, "alpha": alpha, "h0": h0, "R": r_max, "phi_hat": c}),
        vec![0.0],
        z.clone(),
        vec![res],
        Expect::Positive,
    );
    Ok(LongBarrier { eta, alpha, h0, r_max, z, field, linear, report })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSearch {
    pub eta0: f64,
    /// True when every admissible η passes, so η₀ is the upper end of the range.
    pub whole_range: bool,
    pub barrier: LongBarrier,
}

/// Largest η for which the long barrier residual is positive on [α, R(η)].
pub fn bisect_eta(alpha: f64, h0: f64, samples: usize) -> Result<EtaSearch> {
    let hi_bound = alpha.powf(-alpha) * h0;
    let ok = |eta: f64| -> Result<bool> { Ok(long_cyl_barrier(eta, alpha, h0, samples)?.report.pass) };
    let top = hi_bound * (1.0 - 1e-9);
    if ok(top)? {
        return Ok(EtaSearch { eta0: top, whole_range: true, barrier: long_cyl_barrier(top, alpha, h0, samples)? });
    }
    let mut lo = hi_bound * 1e-6;
    if !ok(lo)? {
        return Err(LabError::NonConvergence("long barrier fails even for tiny eta".into()));
    }
    let mut hi = top;
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    Ok(EtaSearch { eta0: lo, whole_range: false, barrier: long_cyl_barrier(lo, alpha, h0, samples)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicalBarrier {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub field: Vec<f64>,
    /// Pointwise Lφ on the region.
    pub linear: Vec<f64>,
    pub report: BarrierReport,
}

fn conical_end(surface: &ShrinkerSurface) -> Result<Side> {
    surface
        .end_classification
        .iter()
        .find(|e| matches!(e.class, EndClass::Conical { .. }))
        .map(|e| e.side)
        .ok_or_else(|| LabError::Invalid("surface has no end classified conical".into()))
}

/// φ = α|x| − β with β = α(R − 1); the residual is G(φ) on nodes with
/// |x| ≥ R (nonpositive for a barrier). Nodes within three of a truncated
/// end are left out because the one-sided stencils there are not centered.
pub fn conical_barrier(surface: &ShrinkerSurface, alpha: f64, r: f64) -> Result<ConicalBarrier> {
    conical_end(surface)?;
    if !(alpha >= 0.0 && r > 1.0) {
        return invalid("need alpha >= 0 and R > 1");
    }
    let beta = alpha * (r - 1.0);
    let g = &surface.geom;
    let field: Vec<f64> = g.xnorm.iter().map(|x| alpha * x - beta).collect();
    let flow = GraphFlow::new(surface, BoundaryData::default());
    let speed = flow.speed(&field)?;
    let lin = flow.l_pointwise(&field);
    let n = surface.len();
    let region: Vec<usize> = (3..n.saturating_sub(3)).filter(|&i| g.xnorm[i] >= r).collect();
    if region.is_empty() {
        return invalid(format!("no nodes with |x| >= {r}"));
    }
    let report = BarrierReport::new(
        BarrierKind::Conical,
        json!({"alpha": alpha, "beta": beta, "R": r}),
        vec![0.0],
        region.iter().map(|&i| g.xnorm[i]).collect(),
        vec![region.iter().map(|&i| speed[i]).collect()],
        Expect::NonPositive,
    );
    Ok(ConicalBarrier { alpha, beta, r, field, linear: region.iter().map(|&i| lin[i]).collect(), report })
}

/// Smallest R on the grid 2, 2.25, … ≤ `r_max` for which the conical barrier passes.
pub fn search_conical_r(surface: &ShrinkerSurface, alpha: f64, r_max: f64) -> Result<Option<ConicalBarrier>> {
    let mut r = 2.0;
    while r <= r_max {
        match conical_barrier(surface, alpha, r) {
            Ok(b) if b.report.pass => return Ok(Some(b)),
            Ok(_) => {}
            Err(LabError::Invalid(_)) => break,
            Err(e) => return Err(e),
        }
        r += 0.25;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinker::{make_model, Model, ModelParams};
    use crate::spectral::ground_state;

    fn sphere() -> (ShrinkerSurface, SpectralPair) {
        let s = make_model(Model::Sphere, ModelParams::default(), 256).unwrap();
        let p = ground_state(&s).unwrap();
        (s, p)
    }

    #[test]
    fn sphere_global_barrier_values() {
        let (_, p) = sphere();
        let vp = global_barrier(&p, 4.0, -3.0, Sign::Plus).unwrap();
        let vm = global_barrier(&p, 4.0, -3.0, Sign::Minus).unwrap();
        // Exact arithmetic with μ = −1, φ = (e/4)^{1/2}: 0.0492160 and 0.0328690.
        assert!((vp[50] - 0.0492160).abs() < 1e-5, "{}", vp[50]);
        assert!((vm[50] - 0.0328690).abs() < 1e-5, "{}", vm[50]);
        let v0 = global_barrier(&p, 0.0, -3.0, Sign::Plus).unwrap();
        let pure = (p.eigenvalue * 3.0).exp();
        assert!(v0.iter().zip(&p.eigenfunction).all(|(v, f)| (v - pure * f).abs() < 1e-15));
        assert!(global_barrier(&p, 16.0, -1.0, Sign::Plus).is_err());
    }

    #[test]
    fn sphere_supersolution_and_leading_term() {
        let (s, p) = sphere();
        let taus: Vec<f64> = (0..=24).map(|k| -2.0 - 0.25 * k as f64).collect();
        let plus = verify_super_sub(&s, &p, 4.0, &taus, Sign::Plus).unwrap();
        let minus = verify_super_sub(&s, &p, 4.0, &taus, Sign::Minus).unwrap();
        assert!(plus.pass && minus.pass);
        assert_eq!(plus.pass, plus.pass_recomputed());
        let ratio = leading_coefficient_ratio(&s, &p, 4.0, -8.0).unwrap();
        assert!(ratio.iter().all(|r| (r - 1.0).abs() < 0.1), "{}", ratio[0]);
        let found = search_global(&s, &p, Sign::Plus).unwrap().unwrap();
        assert_eq!(found.m, 1.0);
    }

    #[test]
    fn torus_global_search_finds_pairs() {
        let s = make_model(Model::Torus, ModelParams::default(), 256).unwrap();
        let p = ground_state(&s).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let found = search_global(&s, &p, sign).unwrap().expect("no (M, tau0) found");
            assert!(found.report.pass && found.report.rows.len() > 1);
        }
    }

    #[test]
    fn long_barrier_coefficient_and_bisection() {
        assert!((long_linear_coefficient(4.0, 4.0, 1.0) - 0.25).abs() < 1e-15);
        let a = long_cyl_barrier(1e-5, 4.0, DEFAULT_H0, 50).unwrap();
        let b = long_cyl_barrier(2e-5, 4.0, DEFAULT_H0, 50).unwrap();
        let z = 5.0;
        let lin = |eta: f64| long_linear_coefficient(4.0, z, 1.0) * eta * circle_ground_value() * z.powi(4);
        assert!((lin(2e-5) / lin(1e-5) - 2.0).abs() < 1e-12);
        assert!(a.report.pass && b.report.pass);
        let s = bisect_eta(4.0, DEFAULT_H0, 200).unwrap();
        assert!(s.barrier.report.pass && s.barrier.report.min_residual > 0.0);
        assert!(long_cyl_barrier(1.0, 4.0, DEFAULT_H0, 10).is_err());
        assert!(long_cyl_barrier(1e-5, 1.5, DEFAULT_H0, 10).is_err());
    }

    #[test]
    fn plane_conical_barrier() {
        let s = make_model(Model::Plane, ModelParams::default(), 512).unwrap();
        let b = conical_barrier(&s, 0.05, 2.0).unwrap();
        assert!(b.report.pass);
        for (x, l) in b.report.columns.iter().zip(&b.linear) {
            assert!((l - (0.05 / x - b.beta / 2.0)).abs() < 1e-4, "{x} {l}");
        }
        for (x, g) in b.report.columns.iter().zip(&b.report.residual[0]) {
            assert!((g - (0.05 / x - b.beta / 2.0)).abs() < 1e-4);
        }
        let flat = conical_barrier(&s, 0.0, 3.0).unwrap();
        assert!(flat.report.pass);
        let sphere = make_model(Model::Sphere, ModelParams::default(), 128).unwrap();
        assert!(conical_barrier(&sphere, 0.05, 2.0).is_err());
    }

    #[test]
    fn shot_cone_conical_barrier() {
        let s = make_model(Model::Conical, ModelParams::default(), 512).unwrap();
        let b = search_conical_r(&s, 0.05, 20.0).unwrap().expect("no R found");
        assert!(b.r <= 20.0 && b.report.pass);
    }

    #[test]
    fn compact_dirichlet_identity_is_second_order() {
        let err = |n: usize| {
            let s = make_model(Model::Cylinder, ModelParams { half_length: Some(6.0), ..Default::default() }, n).unwrap();
            let lo = n / 6;
            let prob = DirichletProblem::new(&s, lo, n - 1 - lo).unwrap();
            let g = crate::spectral::dirichlet_ground_state(&prob).unwrap();
            let (_, rep) = compact_dirichlet_barrier(&prob, &g, 0.01, 1.0, 0.0, 0.1, 1.0).unwrap();
            assert!(rep.interior.pass);
            rep.identity_error_relative
        };
        let (e1, e2) = (err(257), err(513));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn compact_dirichlet_collar_exceeds_li_yau() {
        let s = make_model(Model::Cylinder, ModelParams { half_length: Some(2.0), ..Default::default() }, 401).unwrap();
        let prob = DirichletProblem::new(&s, 100, 300).unwrap();
        let g = crate::spectral::dirichlet_ground_state(&prob).unwrap();
        let (_, rep) = compact_dirichlet_barrier(&prob, &g, 0.01, 1.0, 0.0, 0.1, 1.0).unwrap();
        assert!(rep.collar_pass, "{:?}", rep.hopf_quantity.iter().cloned().fold(f64::INFINITY, f64::min));
        let (_, small) = compact_dirichlet_barrier(&prob, &g, 1e-4, 1.0, 0.0, 0.1, 1.0).unwrap();
        let (_, big) = compact_dirichlet_barrier(&prob, &g, 1e-3, 1.0, 0.0, 0.1, 1.0).unwrap();
        let ratio = big.interior.min_residual / small.interior.min_residual;
        assert!((ratio - 100.0).abs() < 5.0, "{ratio}");
    }
}
