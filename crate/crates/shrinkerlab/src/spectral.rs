//! Gaussian-weighted eigenproblem for the stability operator
//! L = Δ − ½x·∇ + |A|² + ½ on rotational profiles, Fourier mode by mode.
//!
//! The discretization is a finite-volume one: node i owns the dual cell of
//! weighted mass M_i = dμ_i e^{-|x_i|²/4}, and each segment carries the flux
//! coefficient c = ρ̄ ḡ / h with ρ the rotational density (2πr or 1). The
//! generalized problem (K − MV)φ = λMφ is reduced to the symmetric tridiagonal
//! matrix M^{-1/2}(K − MV)M^{-1/2}, so self-adjointness holds at stencil level.

use crate::error::{invalid, LabError, Result};
use crate::numerics::fd::fornberg;
use crate::numerics::fit::line_fit;
use crate::numerics::linalg::{lowest_eigenpairs, Tridiag};
use crate::shrinker::{EndClass, ShrinkerSurface};
use crate::surface::{weighted_inner, weighted_norm, GeometryFields, ProfileGeometry, Side};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    None,
    Dirichlet,
    DecayTruncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    /// Lφ = −eigenvalue·φ.
    pub eigenvalue: f64,
    pub eigenfunction: Vec<f64>,
    pub fourier_mode: usize,
    pub normalization: f64,
    pub residual: f64,
    pub boundary_condition: Boundary,
}

/// Discrete L for one Fourier mode, restricted to the active nodes.
#[derive(Clone, Debug)]
pub struct WeightedOperator {
    pub mode: usize,
    pub len: usize,
    /// Unknowns; the remaining nodes carry homogeneous Dirichlet data.
    pub active: Vec<usize>,
    pub periodic: bool,
    /// Coupling a_ij = c_ij / M_i to the next node (index i) and the previous node.
    pub(crate) fwd: Vec<f64>,
    pub(crate) bwd: Vec<f64>,
    /// Symmetric off-diagonal c_ij / √(M_i M_j) for the segment starting at i.
    sym: Vec<f64>,
    pub potential: Vec<f64>,
    pub boundary: Boundary,
}

fn rot_density(p: &ProfileGeometry, i: usize) -> f64 {
    if p.n == 2 {
        2.0 * PI * p.nodes[i][0]
    } else {
        1.0
    }
}

impl WeightedOperator {
    fn build(p: &ProfileGeometry, g: &GeometryFields, mode: usize, dirichlet: &[bool], boundary: Boundary) -> Self {
        let n = p.len();
        let periodic = p.is_periodic();
        let segs = if periodic { n } else { n - 1 };
        let h = p.segment_lengths();
        let q: Vec<f64> = g.xnorm.iter().map(|x| x * x / 4.0).collect();
        let mut fwd = vec![0.0; n];
        let mut bwd = vec![0.0; n];
        let mut sym = vec![0.0; n];
        for s in 0..segs {
            let (i, j) = (s, (s + 1) % n);
            let (ri, rj) = (rot_density(p, i), rot_density(p, j));
            // c / M_i with the Gaussian factor taken relative to node i
            fwd[i] = 0.5 * (ri + rj * (q[i] - q[j]).exp()) / (h[s] * g.mass[i]);
            bwd[j] = 0.5 * (ri * (q[j] - q[i]).exp() + rj) / (h[s] * g.mass[j]);
            let half = 0.5 * (q[j] - q[i]);
            sym[s] = 0.5 * (ri * half.exp() + rj * (-half).exp()) / (h[s] * (g.mass[i] * g.mass[j]).sqrt());
        }
        let m2 = (mode * mode) as f64;
        let potential = (0..n)
            .map(|i| {
                let base = g.a2[i] + 0.5;
                if mode > 0 && !dirichlet[i] {
                    base - m2 / p.nodes[i][0].powi(2)
                } else {
                    base
                }
            })
            .collect();
        let active = (0..n).filter(|&i| !dirichlet[i]).collect();
        WeightedOperator { mode, len: n, active, periodic, fwd, bwd, sym, potential, boundary }
    }

    pub(crate) fn prev(&self, i: usize) -> Option<usize> {
        if i > 0 {
            Some(i - 1)
        } else if self.periodic {
            Some(self.len - 1)
        } else {
            None
        }
    }

    pub(crate) fn next(&self, i: usize) -> Option<usize> {
        if i + 1 < self.len {
            Some(i + 1)
        } else if self.periodic {
            Some(0)
        } else {
            None
        }
    }

    /// Operator with every node active and no mode potential, for flows.
    pub(crate) fn free(p: &ProfileGeometry, g: &GeometryFields) -> Self {
        WeightedOperator::build(p, g, 0, &vec![false; p.len()], Boundary::None)
    }

    /// The drift Laplacian part of L (no potential) at node i.
    pub(crate) fn principal_at(&self, u: &[f64], i: usize) -> f64 {
        let mut v = 0.0;
        if let Some(j) = self.next(i) {
            v += self.fwd[i] * (u[j] - u[i]);
        }
        if let Some(j) = self.prev(i) {
            v += self.bwd[i] * (u[j] - u[i]);
        }
        v
    }

    /// L u at every node (values at Dirichlet nodes enter as data).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len)
            .map(|i| {
                let mut v = self.potential[i] * u[i];
                if let Some(j) = self.next(i) {
                    v += self.fwd[i] * (u[j] - u[i]);
                }
                if let Some(j) = self.prev(i) {
                    v += self.bwd[i] * (u[j] - u[i]);
                }
                v
            })
            .collect()
    }

    /// Symmetric matrix of −L on the active nodes in M^{1/2}-scaled unknowns.
    pub fn reduced(&self) -> Tridiag {
        let k = self.active.len();
        let diag: Vec<f64> = self
            .active
            .iter()
            .map(|&i| {
                let mut d = -self.potential[i];
                if self.next(i).is_some() {
                    d += self.fwd[i];
                }
                if self.prev(i).is_some() {
                    d += self.bwd[i];
                }
                d
            })
            .collect();
        let off: Vec<f64> = (0..k.saturating_sub(1))
            .map(|a| {
                let (i, j) = (self.active[a], self.active[a + 1]);
                if j == i + 1 {
                    -self.sym[i]
                } else {
                    0.0
                }
            })
            .collect();
        let corner = if self.periodic && k == self.len { Some(-self.sym[self.len - 1]) } else { None };
        Tridiag::symmetric(diag, off, corner)
    }

    /// Lowest `k` eigenpairs; eigenfunctions are W-normalized, zero at Dirichlet nodes.
    pub fn eigenpairs(&self, geom: &GeometryFields, k: usize) -> Result<Vec<SpectralPair>> {
        if k == 0 {
            return invalid("k must be at least 1");
        }
        if self.active.len() < k {
            return invalid("fewer active nodes than requested eigenpairs");
        }
        let a = self.reduced();
        let pairs = lowest_eigenpairs(&a, k)?;
        let mut out = Vec::with_capacity(k);
        for (lam, psi) in pairs {
            let mut phi = vec![0.0; self.len];
            let q_ref = geom.xnorm.iter().map(|x| x * x / 4.0).fold(f64::INFINITY, f64::min);
            for (a, &i) in self.active.iter().enumerate() {
                // M^{-1/2} with the Gaussian factor relative to the smallest |x|
                let q = geom.xnorm[i].powi(2) / 4.0 - q_ref;
                phi[i] = psi[a] * (0.5 * q).exp() / geom.mass[i].sqrt();
            }
            let nrm = weighted_norm(&phi, geom);
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(LabError::NonConvergence("eigenvector normalization failed".into()));
            }
            let sign = if phi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            phi.iter_mut().for_each(|v| *v *= sign / nrm);
            let residual = self.residual(geom, &phi, lam);
            out.push(SpectralPair {
                eigenvalue: lam,
                normalization: weighted_norm(&phi, geom),
                eigenfunction: phi,
                fourier_mode: self.mode,
                residual,
                boundary_condition: self.boundary,
            });
        }
        Ok(out)
    }

    /// ‖Lφ + λφ‖_W over the active nodes.
    pub fn residual(&self, geom: &GeometryFields, phi: &[f64], lam: f64) -> f64 {
        let lphi = self.apply(phi);
        let mut r = vec![0.0; self.len];
        for &i in &self.active {
            r[i] = lphi[i] + lam * phi[i];
        }
        weighted_norm(&r, geom)
    }
}

fn open_end_dirichlet(p: &ProfileGeometry, mode: usize) -> (Vec<bool>, Boundary) {
    let n = p.len();
    let mut d = vec![false; n];
    let mut boundary = Boundary::None;
    if p.is_periodic() {
        return (d, boundary);
    }
    for (side, i) in [(Side::Start, 0), (Side::End, n - 1)] {
        if p.is_cap(side) {
            d[i] = mode > 0;
        } else {
            d[i] = true;
            boundary = Boundary::DecayTruncated;
        }
    }
    (d, boundary)
}

/// Discrete L in Fourier mode `m`. Truncated ends and, for m ≥ 1, axis caps
/// carry homogeneous Dirichlet conditions.
pub fn assemble_l(surface: &ShrinkerSurface, m: i64) -> Result<WeightedOperator> {
    if m < 0 {
        return invalid(format!("Fourier mode must be non-negative, got {m}"));
    }
    let m = m as usize;
    if m > 0 && surface.profile.n == 1 {
        return invalid("Fourier modes m ≥ 1 need a rotational (n = 2) profile");
    }
    let (d, b) = open_end_dirichlet(&surface.profile, m);
    Ok(WeightedOperator::build(&surface.profile, &surface.geom, m, &d, b))
}

/// The `k` lowest eigenpairs in mode `m`.
pub fn spectrum(surface: &ShrinkerSurface, m: i64, k: usize) -> Result<Vec<SpectralPair>> {
    if k < 1 {
        return invalid("k must be at least 1");
    }
    assemble_l(surface, m)?.eigenpairs(&surface.geom, k)
}

fn check_positive(pair: &SpectralPair, active: &[usize]) -> Result<()> {
    if active.iter().any(|&i| pair.eigenfunction[i] <= 0.0) {
        return Err(LabError::NonConvergence(format!(
            "ground state candidate at {} changes sign",
            pair.eigenvalue
        )));
    }
    Ok(())
}

/// First eigenvalue μ and positive eigenfunction with ‖φ‖_W = 1.
pub fn ground_state(surface: &ShrinkerSurface) -> Result<SpectralPair> {
    let op = assemble_l(surface, 0)?;
    let pair = op.eigenpairs(&surface.geom, 1)?.remove(0);
    check_positive(&pair, &op.active)?;
    Ok(pair)
}

/// Two-grid Richardson value for a second-order quantity: (4·fine − coarse)/3,
/// with |fine − coarse|/3 as error estimate.
pub fn richardson(coarse: f64, fine: f64) -> (f64, f64) {
    ((4.0 * fine - coarse) / 3.0, (fine - coarse).abs() / 3.0)
}

/// Compact subdomain given by a node range; the endpoints carry φ₀ = 0.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub parent: ShrinkerSurface,
    pub lo: usize,
    pub hi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletGroundState {
    pub pair: SpectralPair,
    /// inf over the two boundary points of |∂_s φ₀|.
    pub hopf: f64,
}

impl DirichletProblem {
    pub fn new(parent: &ShrinkerSurface, lo: usize, hi: usize) -> Result<Self> {
        let n = parent.len();
        if !(lo < hi && hi < n) {
            return invalid(format!("node range [{lo}, {hi}] outside 0..{n}"));
        }
        if hi - lo + 1 < 32 {
            return invalid(format!("subdomain has {} nodes, needs at least 32", hi - lo + 1));
        }
        let p = &parent.profile;
        if !p.is_periodic() && (lo == 0 || hi == n - 1) && !(p.is_cap(Side::Start) && lo == 0) && !(p.is_cap(Side::End) && hi == n - 1) {
            return invalid("subdomain must be strictly interior to the profile");
        }
        Ok(DirichletProblem { parent: parent.clone(), lo, hi })
    }

    /// Boundary nodes of the subdomain (caps inside the range are not boundary).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let p = &self.parent.profile;
        let mut b = vec![];
        if !(self.lo == 0 && p.is_cap(Side::Start)) {
            b.push(self.lo);
        }
        if !(self.hi == p.len() - 1 && p.is_cap(Side::End)) {
            b.push(self.hi);
        }
        b
    }

    pub fn operator(&self) -> WeightedOperator {
        let n = self.parent.len();
        let mut d: Vec<bool> = (0..n).map(|i| i < self.lo || i > self.hi).collect();
        for i in self.boundary_nodes() {
            d[i] = true;
        }
        WeightedOperator::build(&self.parent.profile, &self.parent.geom, 0, &d, Boundary::Dirichlet)
    }

    /// Surface restricted to the subdomain's node range.
    pub fn contains(&self, i: usize) -> bool {
        i >= self.lo && i <= self.hi
    }
}

/// One-sided second-order |∂_s u| at node `i` looking toward `dir` (±1).
fn one_sided_slope(p: &ProfileGeometry, u: &[f64], i: usize, dir: isize) -> f64 {
    let idx: Vec<usize> = (0..3).map(|k| (i as isize + dir * k) as usize).collect();
    let mut t = vec![0.0];
    for k in 1..3 {
        let (a, b) = (p.nodes[idx[k - 1]], p.nodes[idx[k]]);
        t.push(t[k - 1] + (b[0] - a[0]).hypot(b[1] - a[1]));
    }
    let w = fornberg(0.0, &t, 1);
    (0..3).map(|k| w[1][k] * u[idx[k]]).sum::<f64>().abs()
}

pub fn dirichlet_ground_state(problem: &DirichletProblem) -> Result<DirichletGroundState> {
    let op = problem.operator();
    let pair = op.eigenpairs(&problem.parent.geom, 1)?.remove(0);
    check_positive(&pair, &op.active)?;
    let p = &problem.parent.profile;
    let hopf = problem
        .boundary_nodes()
        .into_iter()
        .map(|i| one_sided_slope(p, &pair.eigenfunction, i, if i == problem.lo { 1 } else { -1 }))
        .fold(f64::INFINITY, f64::min);
    Ok(DirichletGroundState { pair, hopf })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub halfwidth: f64,
    pub window: (usize, usize),
}

/// Nodes in the outer quarter of arclength at `side`, minus `skip` nodes next
/// to the truncation.
pub fn end_window(p: &ProfileGeometry, side: Side, skip: usize) -> Vec<usize> {
    let (t, _) = p.chord_parameter();
    let total = *t.last().unwrap();
    let n = p.len();
    let mut idx: Vec<usize> = match side {
        Side::Start => (skip..n).filter(|&i| t[i] <= 0.25 * total).collect(),
        Side::End => (0..n.saturating_sub(skip)).filter(|&i| t[i] >= 0.75 * total).collect(),
    };
    idx.sort_unstable();
    idx
}

/// Log-log slope of a positive field against a positive coordinate on an index window.
pub fn decay_fit_on(coord: &[f64], field: &[f64], idx: &[usize]) -> Result<DecayFit> {
    if idx.len() < 30 {
        return invalid(format!("decay fit window has {} nodes, needs at least 30", idx.len()));
    }
    if idx.iter().any(|&i| field[i] <= 0.0) {
        return invalid("field is not positive on the fit window");
    }
    if idx.iter().any(|&i| coord[i] <= 0.0) {
        return invalid("fit coordinate is not positive on the window");
    }
    let x: Vec<f64> = idx.iter().map(|&i| coord[i].ln()).collect();
    let y: Vec<f64> = idx.iter().map(|&i| field[i].ln()).collect();
    let fit = line_fit(&x, &y);
    Ok(DecayFit { exponent: fit.slope, halfwidth: fit.slope_halfwidth, window: (idx[0], *idx.last().unwrap()) })
}

/// Decay exponent of a positive field along a classified end.
pub fn end_decay_fit(surface: &ShrinkerSurface, field: &[f64], side: Side) -> Result<DecayFit> {
    let class = surface
        .end_classification
        .iter()
        .find(|e| e.side == side)
        .map(|e| &e.class)
        .ok_or_else(|| LabError::Invalid(format!("profile has no end on side {side:?}")))?;
    if matches!(class, EndClass::Truncated { .. }) {
        return invalid("end is not classified as conical or cylindrical");
    }
    let p = &surface.profile;
    let (t, _) = p.chord_parameter();
    let n = p.len();
    let (tip, edge) = match side {
        Side::Start => (0, t[0]),
        Side::End => (n - 1, t[n - 1]),
    };
    // the truncation boundary layer decays like e^{-|x| d / 2} at distance d
    let layer = 14.0 / p.nodes[tip][0].hypot(p.nodes[tip][1]).max(1.0);
    let skip = (0..n).filter(|&i| (t[i] - edge).abs() < layer).count().max(5);
    let idx = end_window(p, side, skip);
    // axial distance along cylindrical ends, |x| along conical ones
    let coord: Vec<f64> = match class {
        EndClass::Cylindrical { .. } => p.nodes.iter().map(|x| x[1].abs()).collect(),
        _ => p.nodes.iter().map(|x| x[0].hypot(x[1])).collect(),
    };
    decay_fit_on(&coord, field, &idx)
}

/// Relative W-distance between `phi` and its best multiple of `reference`.
pub fn shape_mismatch(phi: &[f64], reference: &[f64], geom: &GeometryFields) -> Result<f64> {
    let c = weighted_inner(phi, reference, geom)? / weighted_inner(reference, reference, geom)?;
    let d: Vec<f64> = phi.iter().zip(reference).map(|(a, b)| a - c * b).collect();
    Ok(weighted_norm(&d, geom) / (c.abs() * weighted_norm(reference, geom)))
}

/// Eigenpair whose eigenvalue is closest to `target`, among the lowest `k`.
pub fn nearest_pair(surface: &ShrinkerSurface, m: i64, k: usize, target: f64) -> Result<SpectralPair> {
    let pairs = spectrum(surface, m, k)?;
    Ok(pairs
        .into_iter()
        .min_by(|a, b| (a.eigenvalue - target).abs().total_cmp(&(b.eigenvalue - target).abs()))
        .unwrap())
}

/// Discrete L applied to g = z^{-α} on a cylinder end, compared against the
/// closed form (α/2 − μ̂ + α(α+1)/z²)g on nodes with z in `window`. Returns the
/// maximal relative discrepancy and the largest z^{-2} remainder α(α+1)/z².
pub fn power_ansatz_identity(surface: &ShrinkerSurface, alpha: f64, mu_hat: f64, window: (f64, f64)) -> Result<(f64, f64)> {
    let op = assemble_l(surface, 0)?;
    let z: Vec<f64> = surface.profile.nodes.iter().map(|x| x[1]).collect();
    let g: Vec<f64> = z.iter().map(|z| z.abs().max(0.5).powf(-alpha)).collect();
    let lg = op.apply(&g);
    let (mut err, mut rem) = (0.0f64, 0.0f64);
    for i in 0..z.len() {
        if z[i] < window.0 || z[i] > window.1 {
            continue;
        }
        let tail = alpha * (alpha + 1.0) / (z[i] * z[i]);
        let exact = (alpha / 2.0 - mu_hat + tail) * g[i];
        err = err.max(((lg[i] - exact) / exact).abs());
        rem = rem.max(tail / (alpha / 2.0 - mu_hat));
    }
    if rem == 0.0 {
        return invalid("window contains no nodes");
    }
    Ok((err, rem))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinker::{make_model, Model, ModelParams};
    use rand::{Rng, SeedableRng};

    fn model(m: Model, n: usize) -> ShrinkerSurface {
        make_model(m, ModelParams::default(), n).unwrap()
    }

    #[test]
    fn sphere_ground_state_is_constant() {
        let s = model(Model::Sphere, 512);
        let g = ground_state(&s).unwrap();
        assert!((g.eigenvalue + 1.0).abs() < 1e-8, "{}", g.eigenvalue);
        let c = (std::f64::consts::E / 4.0).sqrt();
        assert!(g.eigenfunction.iter().all(|v| (v - c).abs() < 1e-6));
        assert!((g.normalization - 1.0).abs() < 1e-8);
        assert!(g.residual < 1e-8);
    }

    #[test]
    fn negative_mode_rejected() {
        let s = model(Model::Sphere, 128);
        assert!(assemble_l(&s, -1).is_err());
    }

    #[test]
    fn torus_operator_is_weighted_symmetric() {
        let s = model(Model::Torus, 256);
        let op = assemble_l(&s, 0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = weighted_inner(&op.apply(&f), &g, &s.geom).unwrap();
            let b = weighted_inner(&f, &op.apply(&g), &s.geom).unwrap();
            let scale = weighted_norm(&f, &s.geom) * weighted_norm(&g, &s.geom);
            assert!((a - b).abs() <= 1e-12 * scale.max(1.0) * 10.0, "{a} {b}");
        }
    }

    fn values(p: &[SpectralPair]) -> Vec<f64> {
        p.iter().map(|q| q.eigenvalue).collect()
    }

    #[test]
    fn sphere_spectrum_after_extrapolation() {
        let (c, f) = (model(Model::Sphere, 511), model(Model::Sphere, 1021));
        let mut found = vec![];
        for m in [0, 1] {
            let (a, b) = (values(&spectrum(&c, m, 3).unwrap()), values(&spectrum(&f, m, 3).unwrap()));
            for k in 0..3 {
                found.push(richardson(a[k], b[k]).0);
            }
        }
        for target in [-1.0, -0.5, 0.5] {
            let best = found.iter().map(|v| (v - target).abs()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "{target}: {found:?}");
        }
    }

    #[test]
    fn torus_ground_state_matches_oracle() {
        let (c, f) = (model(Model::Torus, 512), model(Model::Torus, 1024));
        let (mc, mf) = (ground_state(&c).unwrap(), ground_state(&f).unwrap());
        let (mu, est) = richardson(mc.eigenvalue, mf.eigenvalue);
        // frozen Fourier pseudo-spectral oracle (scipy)
        assert!((mu + 3.73976012).abs() < 1e-6, "{mu}");
        assert!(est < 1e-3 && mu < -1.1);
        assert!(mc.eigenfunction.iter().all(|v| *v > 0.0));
        assert!(mc.residual < 1e-8 * mu.abs());
    }

    #[test]
    fn torus_translation_and_scaling_modes() {
        let s = model(Model::Torus, 512);
        let p = nearest_pair(&s, 0, 4, -1.0).unwrap();
        assert!((p.eigenvalue + 1.0).abs() < 1e-4);
        assert!(shape_mismatch(&p.eigenfunction, &s.geom.h, &s.geom).unwrap() < 1e-4);
        let q = nearest_pair(&s, 1, 3, -0.5).unwrap();
        let nu_r: Vec<f64> = s.geom.normal.iter().map(|v| v[0]).collect();
        assert!((q.eigenvalue + 0.5).abs() < 1e-3);
        assert!(shape_mismatch(&q.eigenfunction, &nu_r, &s.geom).unwrap() < 1e-3);
    }

    #[test]
    fn cylinder_ground_state_and_dirichlet_intervals() {
        let c = model(Model::Cylinder, 512);
        let g = ground_state(&c).unwrap();
        assert!((g.eigenvalue + 1.0).abs() < 1e-6);
        assert_eq!(g.boundary_condition, Boundary::DecayTruncated);
        let inner = dirichlet_ground_state(&DirichletProblem::new(&c, 150, 361).unwrap()).unwrap();
        let outer = dirichlet_ground_state(&DirichletProblem::new(&c, 100, 411).unwrap()).unwrap();
        let phi = &outer.pair.eigenfunction;
        assert!((0..512).all(|i| (phi[i] - phi[511 - i]).abs() < 1e-8));
        assert!(inner.pair.eigenvalue >= outer.pair.eigenvalue);
        assert!(outer.pair.eigenvalue >= g.eigenvalue);
        assert!(outer.hopf > 0.0);
        assert!(DirichletProblem::new(&c, 100, 120).is_err());
    }

    #[test]
    fn torus_exhaustion_approaches_global_mu() {
        let s = model(Model::Torus, 512);
        let mu = ground_state(&s).unwrap().eigenvalue;
        let mut last = f64::NEG_INFINITY;
        for cut in [64, 16, 4, 1] {
            let d = dirichlet_ground_state(&DirichletProblem::new(&s, cut, 512 - cut).unwrap()).unwrap();
            let mu0 = d.pair.eigenvalue;
            assert!(mu0 >= mu - 1e-12);
            assert!(last == f64::NEG_INFINITY || mu0 <= last + 1e-12);
            last = mu0;
        }
        assert!(last - mu < 5e-3);
    }

    #[test]
    fn synthetic_power_decay_on_cylinder_end() {
        let c = model(Model::Cylinder, 512);
        let f: Vec<f64> = c.profile.nodes.iter().map(|x| x[1].abs().max(1.0).powi(-3)).collect();
        let fit = end_decay_fit(&c, &f, Side::End).unwrap();
        assert!((fit.exponent + 3.0).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn cylinder_power_ansatz_identity() {
        let c = model(Model::Cylinder, 1024);
        let (err, rem) = power_ansatz_identity(&c, 4.0, -1.0, (4.0, 7.5)).unwrap();
        assert!(err < 1e-3, "{err}");
        // at z = 4 the remainder α(α+1)/z² equals 1.25 in units of α/2 − μ̂ = 3
        assert!((rem - 20.0 / 16.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn conical_decay_tracks_ground_state() {
        let k = model(Model::Conical, 1024);
        let g = ground_state(&k).unwrap();
        let fit = end_decay_fit(&k, &g.eigenfunction, Side::End).unwrap();
        assert!((fit.exponent - (1.0 + 2.0 * g.eigenvalue)).abs() < 0.15, "{fit:?} {}", g.eigenvalue);
    }
}
