//! Graphical rescaled mean curvature flow Γ_τ = {x + u(x,τ)ν(x)} over a
//! rotational shrinker, ∂τu = G(u) with G = v(H_Γ + ½X·ν_Γ).
//!
//! G is evaluated two ways. The closed form uses the base frame and the
//! profile derivatives of u. With a = 1 − uκ₁ and b = ∂_s u the pushed
//! tangent is aT + bν, and
//!
//! ```text
//! ν_Γ   = (aν − bT)/√(a²+b²)            v = √(a²+b²)/a
//! κ₁^Γ  = [a(aκ₁ + b') − b(a' − bκ₁)]/(a²+b²)^{3/2}
//! κ₂^Γ  = −ν_Γ·e_r / (r + uν_r)
//! X·ν_Γ = (a x·ν − b x·T + ua)/√(a²+b²)
//! ```
//!
//! The geometric path pushes the nodes and measures the new profile with the
//! surface module. The two agree to discretization error.

use crate::error::{invalid, LabError, Result};
use crate::numerics::fd::{DiffOp, EndRule, Topology};
use crate::numerics::linalg::Tridiag;
use crate::shrinker::ShrinkerSurface;
use crate::spectral::WeightedOperator;
use crate::surface::{compute_geometry, gaussian_area, weighted_inner, weighted_norm, GeometryFields, ProfileGeometry, Side};
use serde::{Deserialize, Serialize};

/// Fold threshold on ν_Σ·ν_Γ.
pub const FOLD_LIMIT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCondition {
    /// Prescribed value of u at the end node.
    Dirichlet(f64),
    /// Even reflection: zero flux through the end (z-independent reduction).
    Symmetric,
}

/// Conditions on the open, non-cap ends of the base profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub start: EndCondition,
    pub end: EndCondition,
}

impl Default for BoundaryData {
    fn default() -> Self {
        BoundaryData { start: EndCondition::Dirichlet(0.0), end: EndCondition::Dirichlet(0.0) }
    }
}

#[derive(Clone, Debug)]
pub struct GraphState<'a> {
    pub base: &'a ShrinkerSurface,
    pub u: Vec<f64>,
    pub tau: f64,
    pub boundary: BoundaryData,
}

impl<'a> GraphState<'a> {
    pub fn new(base: &'a ShrinkerSurface, u: Vec<f64>) -> Self {
        GraphState { base, u, tau: 0.0, boundary: BoundaryData::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Imex,
    Rk4,
}

/// Explicit RK4 stability constant: dt ≤ RK4_CFL · h_min².
pub const RK4_CFL: f64 = 0.5;

/// Precomputed operators for one base surface and boundary policy.
pub struct GraphFlow<'a> {
    pub base: &'a ShrinkerSurface,
    pub boundary: BoundaryData,
    diff: DiffOp,
    fv: WeightedOperator,
    /// (node, value) pairs held fixed.
    pinned: Vec<(usize, f64)>,
    pub h_min: f64,
}

/// Closed-form pieces at one node.
#[derive(Clone, Copy, Debug)]
pub struct PointSpeed {
    pub g: f64,
    pub v: f64,
    pub nu: [f64; 2],
}

/// Base-surface data at one point of the profile.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub n: usize,
    pub r: f64,
    /// Point on the rotation axis (κ₂ is taken equal to κ₁ there).
    pub cap: bool,
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub k1: f64,
    pub dk1: f64,
    pub x_dot_t: f64,
    pub x_dot_nu: f64,
}

/// G at one point from u and its profile derivatives.
pub fn point_speed(f: &Frame, u: f64, u1: f64, u2: f64) -> Result<PointSpeed> {
    let (t, nu) = (f.tangent, f.normal);
    let a = 1.0 - u * f.k1;
    let b = u1;
    let da = -u1 * f.k1 - u * f.dk1;
    let s = a * a + b * b;
    let root = s.sqrt();
    if a / root < FOLD_LIMIT {
        return Err(LabError::NonConvergence(format!("graph folds (ν_Σ·ν_Γ = {:.3})", a / root)));
    }
    let kg1 = (a * (a * f.k1 + u2) - b * (da - b * f.k1)) / (s * root);
    let nug = [(a * nu[0] - b * t[0]) / root, (a * nu[1] - b * t[1]) / root];
    let kg2 = if f.n == 1 {
        0.0
    } else if f.cap {
        kg1
    } else {
        -nug[0] / (f.r + u * nu[0])
    };
    let x_nu = (a * f.x_dot_nu - b * f.x_dot_t + u * a) / root;
    let v = root / a;
    Ok(PointSpeed { g: v * (kg1 + kg2 + 0.5 * x_nu), v, nu: nug })
}

impl<'a> GraphFlow<'a> {
    pub fn new(base: &'a ShrinkerSurface, boundary: BoundaryData) -> Self {
        let p = &base.profile;
        let (t, period) = p.chord_parameter();
        let n = p.len();
        let mut pinned = vec![];
        let topo = match period {
            Some(per) => Topology::Periodic { period: per },
            None => {
                let mut rule = |side: Side, cond: EndCondition, idx: usize| {
                    if p.is_cap(side) {
                        return EndRule::Mirror;
                    }
                    match cond {
                        EndCondition::Symmetric => EndRule::Mirror,
                        EndCondition::Dirichlet(val) => {
                            pinned.push((idx, val));
                            EndRule::OneSided
                        }
                    }
                };
                let left = rule(Side::Start, boundary.start, 0);
                let right = rule(Side::End, boundary.end, n - 1);
                Topology::Arc { left, right }
            }
        };
        let h_min = p.segment_lengths().into_iter().fold(f64::INFINITY, f64::min);
        GraphFlow {
            base,
            boundary,
            diff: DiffOp::new(&t, topo, 2),
            fv: WeightedOperator::free(p, &base.geom),
            pinned,
            h_min,
        }
    }

    fn geom(&self) -> &GeometryFields {
        &self.base.geom
    }

    fn is_cap_node(&self, i: usize) -> bool {
        let p = &self.base.profile;
        !p.is_periodic() && ((i == 0 && p.is_cap(Side::Start)) || (i + 1 == p.len() && p.is_cap(Side::End)))
    }

    pub fn apply_pins(&self, u: &mut [f64]) {
        for &(i, v) in &self.pinned {
            u[i] = v;
        }
    }

    /// Profile derivatives ∂_s u, ∂²_s u.
    pub fn derivatives(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.diff.d12(u, 1.0)
    }

    /// Graph invariant |u||A| < 1.
    pub fn check_invariant(&self, u: &[f64]) -> Result<()> {
        let g = self.geom();
        for (i, ui) in u.iter().enumerate() {
            if !ui.is_finite() || ui.abs() * g.a2[i].sqrt() >= 1.0 {
                return Err(LabError::NonConvergence(format!("graph invariant |u||A| < 1 violated at node {i}")));
            }
        }
        Ok(())
    }

    /// Closed-form speed at every node.
    pub fn closed_form(&self, u: &[f64]) -> Result<Vec<PointSpeed>> {
        if u.len() != self.base.len() {
            return invalid(format!("field has {} values for {} nodes", u.len(), self.base.len()));
        }
        if !u.iter().all(|v| v.is_finite()) {
            return invalid("field has non-finite entries");
        }
        let g = self.geom();
        let p = &self.base.profile;
        let (u1, u2) = self.derivatives(u);
        (0..u.len())
            .map(|i| {
                let frame = Frame {
                    n: p.n,
                    r: p.nodes[i][0],
                    cap: self.is_cap_node(i),
                    tangent: g.tangent[i],
                    normal: g.normal[i],
                    k1: g.k1[i],
                    dk1: g.dk1[i],
                    x_dot_t: g.x_dot_t[i],
                    x_dot_nu: g.x_dot_nu[i],
                };
                point_speed(&frame, u[i], u1[i], u2[i]).map_err(|e| match e {
                    LabError::NonConvergence(m) => LabError::NonConvergence(format!("{m} at node {i}")),
                    other => other,
                })
            })
            .collect()
    }

    /// G(u) from the closed form, with pinned nodes frozen.
    pub fn speed(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut g: Vec<f64> = self.closed_form(u)?.iter().map(|p| p.g).collect();
        for &(i, _) in &self.pinned {
            g[i] = 0.0;
        }
        Ok(g)
    }

    /// Finite-volume L u (the operator whose eigenpairs the spectral module
    /// computes).
    pub fn l_discrete(&self, u: &[f64]) -> Vec<f64> {
        let g = self.geom();
        (0..u.len()).map(|i| self.fv.principal_at(u, i) + (g.a2[i] + 0.5) * u[i]).collect()
    }

    /// Speed used by the imex scheme: L_fv u + N(u). It linearizes to the
    /// finite-volume L, so discrete eigenmodes evolve exactly as e^{−μτ}.
    pub fn speed_discrete(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.nonlinearity(u)?;
        let l = self.l_discrete(u);
        let mut g: Vec<f64> = l.iter().zip(&n).map(|(a, b)| a + b).collect();
        for &(i, _) in &self.pinned {
            g[i] = 0.0;
        }
        Ok(g)
    }

    /// Pointwise L u = Δu − ½x·∇u + (|A|² + ½)u from profile derivatives.
    pub fn l_pointwise(&self, u: &[f64]) -> Vec<f64> {
        let g = self.geom();
        let p = &self.base.profile;
        let (u1, u2) = self.derivatives(u);
        (0..u.len())
            .map(|i| {
                let lap = if p.n == 2 {
                    if self.is_cap_node(i) {
                        2.0 * u2[i]
                    } else {
                        u2[i] + g.tangent[i][0] / p.nodes[i][0] * u1[i]
                    }
                } else {
                    u2[i]
                };
                lap - 0.5 * g.x_dot_t[i] * u1[i] + (g.a2[i] + 0.5) * u[i]
            })
            .collect()
    }

    /// N(u) = G(u) − L u.
    pub fn nonlinearity(&self, u: &[f64]) -> Result<Vec<f64>> {
        let g = self.closed_form(u)?;
        let l = self.l_pointwise(u);
        Ok(g.iter().zip(&l).map(|(a, b)| a.g - b).collect())
    }

    /// Pushed profile x + uν.
    pub fn push(&self, u: &[f64]) -> Result<ProfileGeometry> {
        if u.len() != self.base.len() {
            return invalid(format!("field has {} values for {} nodes", u.len(), self.base.len()));
        }
        if !u.iter().all(|v| v.is_finite()) {
            return invalid("field has non-finite entries");
        }
        let p = &self.base.profile;
        let g = self.geom();
        let mut q = p.clone();
        for (i, x) in q.nodes.iter_mut().enumerate() {
            x[0] += u[i] * g.normal[i][0];
            x[1] += u[i] * g.normal[i][1];
            if self.is_cap_node(i) {
                x[0] = 0.0;
            }
        }
        q.validate()?;
        Ok(q)
    }

    /// G(u) measured on the pushed profile: v(H_Γ + ½X·ν_Γ) with v = 1/(ν_Σ·ν_Γ).
    pub fn speed_geometric(&self, u: &[f64]) -> Result<Vec<f64>> {
        let q = self.push(u)?;
        let gq = compute_geometry(&q)?;
        let g = self.geom();
        let mut out = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let dot = g.normal[i][0] * gq.normal[i][0] + g.normal[i][1] * gq.normal[i][1];
            if dot < FOLD_LIMIT {
                return Err(LabError::NonConvergence(format!("graph folds at node {i}")));
            }
            out.push((gq.h[i] + 0.5 * gq.x_dot_nu[i]) / dot);
        }
        for &(i, _) in &self.pinned {
            out[i] = 0.0;
        }
        Ok(out)
    }

    /// One step of the chosen scheme.
    pub fn step(&self, u: &[f64], dt: f64, scheme: Scheme) -> Result<Vec<f64>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        self.check_invariant(u)?;
        let mut out = match scheme {
            Scheme::Imex => self.step_imex(u, dt)?,
            Scheme::Rk4 => {
                let limit = RK4_CFL * self.h_min * self.h_min;
                if dt > limit {
                    return invalid(format!("rk4 step {dt} exceeds the stability bound {limit:e}"));
                }
                self.step_rk4(u, dt)?
            }
        };
        self.apply_pins(&mut out);
        self.check_invariant(&out)?;
        Ok(out)
    }

    fn step_rk4(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let axpy = |a: f64, x: &[f64]| -> Vec<f64> {
            let mut w: Vec<f64> = u.iter().zip(x).map(|(ui, xi)| ui + a * xi).collect();
            self.apply_pins(&mut w);
            w
        };
        let k1 = self.speed_geometric(u)?;
        let k2 = self.speed_geometric(&axpy(0.5 * dt, &k1))?;
        let k3 = self.speed_geometric(&axpy(0.5 * dt, &k2))?;
        let k4 = self.speed_geometric(&axpy(dt, &k3))?;
        Ok((0..u.len()).map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    /// Frozen linear part A = q·D + V where D is the finite-volume drift
    /// Laplacian, V = |A|² + ½ and q = 1/((1 − uκ₁)² + u'²) is the principal
    /// coefficient of G at the start of the step.
    fn frozen(&self, u: &[f64]) -> Vec<f64> {
        let g = self.geom();
        let (u1, _) = self.derivatives(u);
        (0..u.len()).map(|i| 1.0 / ((1.0 - u[i] * g.k1[i]).powi(2) + u1[i] * u1[i])).collect()
    }

    fn apply_frozen(&self, q: &[f64], u: &[f64]) -> Vec<f64> {
        let g = self.geom();
        (0..u.len()).map(|i| q[i] * self.fv.principal_at(u, i) + (g.a2[i] + 0.5) * u[i]).collect()
    }

    /// Solve (I − c A) x = y with pinned rows replaced by the identity.
    fn solve_frozen(&self, q: &[f64], c: f64, y: &[f64]) -> Result<Vec<f64>> {
        let n = y.len();
        let g = self.geom();
        let mut lower = vec![0.0; n - 1];
        let mut upper = vec![0.0; n - 1];
        let mut diag = vec![1.0; n];
        let mut corner = if self.fv.periodic { Some((0.0, 0.0)) } else { None };
        let pinned: Vec<usize> = self.pinned.iter().map(|p| p.0).collect();
        for i in 0..n {
            if pinned.contains(&i) {
                continue;
            }
            let (f, b) = (self.fv.fwd[i], self.fv.bwd[i]);
            let mut d = -(g.a2[i] + 0.5);
            if let Some(j) = self.fv.next(i) {
                d += q[i] * f;
                let w = -c * q[i] * f;
                if j == i + 1 {
                    upper[i] = w;
                } else if let Some(cr) = corner.as_mut() {
                    cr.0 = w;
                }
            }
            if let Some(j) = self.fv.prev(i) {
                d += q[i] * b;
                let w = -c * q[i] * b;
                if j + 1 == i {
                    lower[i - 1] = w;
                } else if let Some(cr) = corner.as_mut() {
                    cr.1 = w;
                }
            }
            diag[i] = 1.0 + c * d;
        }
        let m = Tridiag { lower, diag, upper, corner };
        let x = m.factor(0.0).solve(y);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(LabError::NonConvergence("implicit solve failed".into()));
        }
        Ok(x)
    }

    /// ARS(2,2,2): A-stable, stiffly accurate, second order.
    fn step_imex(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let gamma = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let delta = 1.0 - 1.0 / (2.0 * gamma);
        let q = self.frozen(u);
        let explicit = |w: &[f64]| -> Result<Vec<f64>> {
            let g = self.speed_discrete(w)?;
            let a = self.apply_frozen(&q, w);
            Ok(g.iter().zip(&a).map(|(x, y)| x - y).collect())
        };
        let pin = |mut w: Vec<f64>| {
            self.apply_pins(&mut w);
            w
        };
        let e1 = explicit(u)?;
        let rhs2 = pin((0..u.len()).map(|i| u[i] + dt * gamma * e1[i]).collect());
        let u2 = self.solve_frozen(&q, gamma * dt, &rhs2)?;
        let e2 = explicit(&u2)?;
        let a2 = self.apply_frozen(&q, &u2);
        let rhs3 = pin(
            (0..u.len())
                .map(|i| u[i] + dt * (delta * e1[i] + (1.0 - delta) * e2[i] + (1.0 - gamma) * a2[i]))
                .collect(),
        );
        self.solve_frozen(&q, gamma * dt, &rhs3)
    }

    /// Sup over nodes of Σ_{k≤4}|∂_s^k u| and, adding Σ_{k≤2}|∂_s^k ∂τu|, σ₁.
    pub fn sigma_norms(&self, u: &[f64], speed: &[f64]) -> (f64, f64) {
        let mut derivs = vec![u.to_vec()];
        for k in 0..4 {
            let next = self.diff.d1(&derivs[k], if k % 2 == 0 { 1.0 } else { -1.0 });
            derivs.push(next);
        }
        let mut tder = vec![speed.to_vec()];
        for k in 0..2 {
            let next = self.diff.d1(&tder[k], if k % 2 == 0 { 1.0 } else { -1.0 });
            tder.push(next);
        }
        let (mut s0, mut s1) = (0.0f64, 0.0f64);
        for i in 0..u.len() {
            let a: f64 = derivs.iter().map(|d| d[i].abs()).sum();
            let b: f64 = tder.iter().map(|d| d[i].abs()).sum();
            s0 = s0.max(a);
            s1 = s1.max(a + b);
        }
        (s0, s1)
    }
}

/// Pushed profile x + uν over the base.
pub fn graph_push(base: &ShrinkerSurface, u: &[f64]) -> Result<ProfileGeometry> {
    GraphFlow::new(base, BoundaryData::default()).push(u)
}

/// Geometric G(u) for a state.
pub fn normal_speed(state: &GraphState) -> Result<Vec<f64>> {
    GraphFlow::new(state.base, state.boundary).speed_geometric(&state.u)
}

/// Expansion-path speed L u + N(u).
pub fn normal_speed_expansion(state: &GraphState) -> Result<Vec<f64>> {
    let f = GraphFlow::new(state.base, state.boundary);
    let n = f.nonlinearity(&state.u)?;
    let l = f.l_pointwise(&state.u);
    Ok(l.iter().zip(&n).map(|(a, b)| a + b).collect())
}

pub fn step<'a>(state: &GraphState<'a>, dt: f64, scheme: Scheme) -> Result<GraphState<'a>> {
    let f = GraphFlow::new(state.base, state.boundary);
    let u = f.step(&state.u, dt, scheme)?;
    Ok(GraphState { u, tau: state.tau + dt, ..state.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub sup_u: f64,
    pub sup_grad_u: f64,
    pub f_value: f64,
    pub min_speed: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    /// ⟨u, φ⟩_W when a reference eigenfunction was supplied.
    pub projection: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tau: f64,
    pub u: Vec<f64>,
    /// G(u) at the snapshot.
    pub speed: Vec<f64>,
    pub diagnostics: FlowDiagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedEndTime,
    HitPsi0,
    GraphInvariantViolated,
    BoundaryFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub dt: f64,
    pub scheme: Scheme,
    pub detail: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub tau_end: f64,
    pub psi0: f64,
    pub snapshot_every: usize,
    pub scheme: Scheme,
    /// Defaults to min(1e-3, h) for imex and the stability bound for rk4.
    pub dt: Option<f64>,
    pub reference: Option<Vec<f64>>,
}

impl RunOptions {
    pub fn new(tau_end: f64, psi0: f64, snapshot_every: usize) -> Self {
        RunOptions { tau_end, psi0, snapshot_every, scheme: Scheme::Imex, dt: None, reference: None }
    }
}

/// Default ψ₀ = 0.1·min(1, 1/max|A|).
pub fn default_psi0(base: &ShrinkerSurface) -> f64 {
    let amax = base.geom.a2.iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
    0.1 * (1.0f64).min(1.0 / amax.max(1e-300))
}

impl<'a> GraphFlow<'a> {
    pub fn diagnostics(&self, u: &[f64], speed: &[f64], reference: Option<&[f64]>) -> Result<FlowDiagnostics> {
        let (u1, _) = self.derivatives(u);
        let q = self.push(u)?;
        let gq = compute_geometry(&q)?;
        let (sigma0, sigma1) = self.sigma_norms(u, speed);
        let projection = match reference {
            Some(phi) => Some(weighted_inner(u, phi, self.geom())?),
            None => None,
        };
        Ok(FlowDiagnostics {
            sup_u: u.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            sup_grad_u: u1.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            f_value: gaussian_area(&gq),
            min_speed: speed.iter().cloned().fold(f64::INFINITY, f64::min),
            sigma0,
            sigma1,
            projection,
        })
    }

    fn snapshot(&self, tau: f64, u: &[f64], reference: Option<&[f64]>) -> Result<Snapshot> {
        let speed = self.speed_discrete(u)?;
        let diagnostics = self.diagnostics(u, &speed, reference)?;
        Ok(Snapshot { tau, u: u.to_vec(), speed, diagnostics })
    }

    pub fn default_dt(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Imex => 1e-3f64.min(self.h_min),
            Scheme::Rk4 => RK4_CFL * self.h_min * self.h_min,
        }
    }

    /// Integrate from (tau0, u0) until `tau_end` or sup|u| ≥ ψ₀.
    pub fn run(&self, tau0: f64, u0: &[f64], opts: &RunOptions) -> Result<FlowTrace> {
        if !(opts.psi0 > 0.0) {
            return invalid("psi0 must be positive");
        }
        if opts.snapshot_every == 0 {
            return invalid("snapshot_every must be at least 1");
        }
        let dt = opts.dt.unwrap_or_else(|| self.default_dt(opts.scheme));
        if !(dt > 0.0) {
            return invalid("time step must be positive");
        }
        let reference = opts.reference.as_deref();
        let mut u = u0.to_vec();
        self.apply_pins(&mut u);
        let mut tau = tau0;
        let mut snapshots = vec![self.snapshot(tau, &u, reference)?];
        let mut k = 0usize;
        let finish = |snapshots, termination, detail| FlowTrace { snapshots, termination, dt, scheme: opts.scheme, detail };
        loop {
            let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if sup >= opts.psi0 {
                return Ok(finish(snapshots, Termination::HitPsi0, None));
            }
            if tau >= opts.tau_end - 1e-12 * dt {
                return Ok(finish(snapshots, Termination::ReachedEndTime, None));
            }
            let h = dt.min(opts.tau_end - tau);
            let next = match self.step(&u, h, opts.scheme) {
                Ok(v) => v,
                Err(LabError::NonConvergence(msg)) => {
                    let reason = if msg.contains("implicit") {
                        Termination::BoundaryFailure
                    } else {
                        Termination::GraphInvariantViolated
                    };
                    return Ok(finish(snapshots, reason, Some(msg)));
                }
                Err(e) => return Err(e),
            };
            u = next;
            tau += h;
            k += 1;
            let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let last = tau >= opts.tau_end - 1e-12 * dt || sup >= opts.psi0;
            if k.is_multiple_of(opts.snapshot_every) || last {
                match self.snapshot(tau, &u, reference) {
                    Ok(s) => snapshots.push(s),
                    Err(LabError::NonConvergence(msg)) => {
                        return Ok(finish(snapshots, Termination::GraphInvariantViolated, Some(msg)))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
}

pub fn run(state: &GraphState, tau_end: f64, psi0: f64, snapshot_every: usize) -> Result<FlowTrace> {
    GraphFlow::new(state.base, state.boundary).run(state.tau, &state.u, &RunOptions::new(tau_end, psi0, snapshot_every))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// ‖N(u)‖_W per snapshot.
    pub n_norm: Vec<f64>,
    /// ‖N(u/2)‖_W / ‖N(u)‖_W per snapshot (NaN when N(u) vanishes).
    pub scaling: Vec<f64>,
}

/// Quadratic-scaling statistic of N(u) = G(u) − Lu on a single field.
pub fn scaling_statistic(flow: &GraphFlow, u: &[f64]) -> Result<(f64, f64)> {
    let g = flow.geom();
    let full = weighted_norm(&flow.nonlinearity(u)?, g);
    let half: Vec<f64> = u.iter().map(|v| 0.5 * v).collect();
    let h = weighted_norm(&flow.nonlinearity(&half)?, g);
    Ok((full, if full > 0.0 { h / full } else { f64::NAN }))
}

pub fn expansion_residual(base: &ShrinkerSurface, boundary: BoundaryData, trace: &FlowTrace) -> Result<ExpansionReport> {
    let flow = GraphFlow::new(base, boundary);
    let mut rep = ExpansionReport { n_norm: vec![], scaling: vec![] };
    for s in &trace.snapshots {
        let (n, r) = scaling_statistic(&flow, &s.u)?;
        rep.n_norm.push(n);
        rep.scaling.push(r);
    }
    Ok(rep)
}

/// Largest angle (radians) between the pushed profile's discrete normal and
/// the closed-form ν_Γ.
pub fn normal_mismatch(flow: &GraphFlow, u: &[f64]) -> Result<f64> {
    let q = flow.push(u)?;
    let gq = compute_geometry(&q)?;
    let cf = flow.closed_form(u)?;
    Ok(cf
        .iter()
        .zip(&gq.normal)
        .map(|(c, n)| (c.nu[0] * n[1] - c.nu[1] * n[0]).atan2(c.nu[0] * n[0] + c.nu[1] * n[1]).abs())
        .fold(0.0, f64::max))
}

/// Deterministic smooth field Σ c_k cos(2πk s/P + φ_k), rescaled so that
/// max(|u|, |u'|, |u''|) equals `c2`. For open profiles the argument uses the
/// total length and the field is made even at caps via cos.
pub fn smooth_field(flow: &GraphFlow, seed: u64, modes: usize, c2: f64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = &flow.base.profile;
    let (t, period) = p.chord_parameter();
    let len = period.unwrap_or(*t.last().unwrap());
    let coeffs: Vec<(f64, f64)> = (1..=modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
    let open = period.is_none();
    let mut u: Vec<f64> = t
        .iter()
        .map(|&s| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (c, ph))| {
                    let w = if open { std::f64::consts::PI * (k + 1) as f64 / len } else { std::f64::consts::TAU * (k + 1) as f64 / len };
                    let phase = if open { 0.0 } else { *ph };
                    c * (w * s + phase).cos()
                })
                .sum()
        })
        .collect();
    let (u1, u2) = flow.derivatives(&u);
    let c2_now = u.iter().chain(&u1).chain(&u2).fold(0.0f64, |m, v| m.max(v.abs()));
    u.iter_mut().for_each(|v| *v *= c2 / c2_now);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinker::{make_model, Model, ModelParams};

    fn model(m: Model, n: usize) -> ShrinkerSurface {
        make_model(m, ModelParams::default(), n).unwrap()
    }

    #[test]
    fn zero_field_is_identity_and_equilibrium() {
        let s = model(Model::Torus, 256);
        let f = GraphFlow::new(&s, BoundaryData::default());
        let zero = vec![0.0; s.len()];
        assert_eq!(f.push(&zero).unwrap().nodes, s.profile.nodes);
        assert!(f.speed(&zero).unwrap().iter().all(|g| g.abs() < 1e-6));
        assert!(f.nonlinearity(&zero).unwrap().iter().all(|g| g.abs() < 1e-6));
        let u = f.step(&zero, 1e-3, Scheme::Imex).unwrap();
        assert!(u.iter().all(|v| v.abs() < 1e-8));
        assert!(f.step(&zero, 0.0, Scheme::Imex).is_err());
    }

    #[test]
    fn concentric_spheres() {
        let s = model(Model::Sphere, 256);
        let f = GraphFlow::new(&s, BoundaryData::default());
        let q = f.push(&vec![0.3; s.len()]).unwrap();
        assert!(q.nodes.iter().all(|x| (x[0].hypot(x[1]) - 1.7).abs() < 1e-12));
        let out = s.flipped();
        let f = GraphFlow::new(&out, BoundaryData::default());
        let g = f.speed(&vec![2.0; s.len()]).unwrap();
        assert!(g.iter().all(|v| (v - 1.5).abs() < 1e-6));
        let e = f.nonlinearity(&vec![0.1; s.len()]).unwrap();
        assert!(e.iter().all(|v| (v + 0.0023810).abs() < 1e-7), "{}", e[10]);
    }

    #[test]
    fn closed_form_normal_matches_pushed_profile() {
        let s = model(Model::Torus, 512);
        let f = GraphFlow::new(&s, BoundaryData::default());
        for seed in 0..3 {
            let u = smooth_field(&f, seed, 4, 0.05);
            assert!(normal_mismatch(&f, &u).unwrap() < 1e-3);
        }
    }

    #[test]
    fn fold_and_invariant_detection() {
        let s = model(Model::Sphere, 128);
        let f = GraphFlow::new(&s, BoundaryData::default());
        assert!(f.closed_form(&vec![2.5; s.len()]).is_err());
        assert!(f.step(&vec![1.5; s.len()], 1e-3, Scheme::Imex).is_err());
        assert!(f.closed_form(&[0.0; 3]).is_err());
    }

    fn sup_err_vs(trace: &FlowTrace, exact: impl Fn(f64) -> f64) -> f64 {
        trace
            .snapshots
            .iter()
            .flat_map(|s| { let e = exact(s.tau); s.u.iter().map(move |u| (u - e).abs()) })
            .fold(0.0, f64::max)
    }

    #[test]
    fn outward_sphere_follows_scalar_ode() {
        let s = model(Model::Sphere, 256).flipped();
        let f = GraphFlow::new(&s, BoundaryData::default());
        let mut opts = RunOptions::new(10.0, 0.3, 50);
        opts.dt = Some(1e-3);
        let tr = f.run(0.0, &vec![0.01; s.len()], &opts).unwrap();
        assert_eq!(tr.termination, Termination::HitPsi0);
        let rho = |t: f64| (4.0 + (2.01f64.powi(2) - 4.0) * t.exp()).sqrt() - 2.0;
        let err = sup_err_vs(&tr, rho);
        assert!(err <= 1e-5, "{err}");
        assert!(tr.snapshots.windows(2).all(|w| w[1].tau > w[0].tau));
    }

    #[test]
    fn outward_circle_follows_scalar_ode() {
        let s = model(Model::Circle, 256).flipped();
        let f = GraphFlow::new(&s, BoundaryData::default());
        let mut opts = RunOptions::new(10.0, 0.3, 50);
        opts.dt = Some(1e-3);
        let r0 = 2f64.sqrt() + 0.01;
        let tr = f.run(0.0, &vec![0.01; s.len()], &opts).unwrap();
        assert_eq!(tr.termination, Termination::HitPsi0);
        let rho = |t: f64| (2.0 + (r0 * r0 - 2.0) * t.exp()).sqrt() - 2f64.sqrt();
        assert!(sup_err_vs(&tr, rho) <= 1e-5);
    }

    #[test]
    fn single_imex_step_is_second_order() {
        let s = model(Model::Sphere, 128).flipped();
        let f = GraphFlow::new(&s, BoundaryData::default());
        let exact = |dt: f64| (4.0 + (2.2f64.powi(2) - 4.0) * dt.exp()).sqrt() - 2.0;
        let err = |dt: f64| (f.step(&vec![0.2; s.len()], dt, Scheme::Imex).unwrap()[40] - exact(dt)).abs();
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = model(Model::Sphere, 128);
        let st = GraphState::new(&s, vec![0.0; s.len()]);
        let tr = run(&st, 0.05, 0.1, 10).unwrap();
        assert_eq!(tr.termination, Termination::ReachedEndTime);
        assert!(tr.snapshots.iter().all(|s| s.u.iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn nonlinearity_scales_quadratically_on_torus() {
        let s = model(Model::Torus, 512);
        let f = GraphFlow::new(&s, BoundaryData::default());
        for seed in 0..10 {
            let u = smooth_field(&f, 100 + seed, 5, 0.05);
            let (_, ratio) = scaling_statistic(&f, &u).unwrap();
            assert!((0.2..=0.3).contains(&ratio), "seed {seed}: {ratio}");
        }
    }

    #[test]
    fn geometric_and_expansion_paths_converge() {
        let gap = |n: usize| {
            let s = model(Model::Torus, n);
            
            let (t, per) = s.profile.chord_parameter();
            let per = per.unwrap();
            let u: Vec<f64> = t.iter().map(|x| 0.02 * (std::f64::consts::TAU * x / per).cos()).collect();
            let st = GraphState::new(&s, u);
            let a = normal_speed(&st).unwrap();
            let b = normal_speed_expansion(&st).unwrap();
            a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(256), gap(512));
        assert!(g1 / g2 >= 3.0, "{g1} {g2}");
    }

    #[test]
    fn f_decreases_and_order_is_preserved() {
        let s = model(Model::Torus, 256);
        let f = GraphFlow::new(&s, BoundaryData::default());
        let u = smooth_field(&f, 7, 3, 0.02);
        let h2 = f.h_min * f.h_min;
        let w: Vec<f64> = u.iter().map(|v| v + 0.005 + 10.0 * h2).collect();
        let mut opts = RunOptions::new(0.2, 1.0, 10);
        opts.dt = Some(1e-3);
        let a = f.run(0.0, &u, &opts).unwrap();
        let b = f.run(0.0, &w, &opts).unwrap();
        for tr in [&a, &b] {
            for p in tr.snapshots.windows(2) {
                let dt = p[1].tau - p[0].tau;
                assert!(p[1].diagnostics.f_value <= p[0].diagnostics.f_value + 1e-6 * dt);
            }
        }
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert!(x.u.iter().zip(&y.u).all(|(p, q)| p <= q));
        }
    }
}
