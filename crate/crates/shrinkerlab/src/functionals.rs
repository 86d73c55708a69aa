//! Gaussian functionals of rotational profiles and Ilmanen's conformal
//! distance between rotational sets.
//!
//! Every Gaussian quantity here reduces to one integral on a profile,
//!
//! ```text
//! Φ(c, t) = (4πt)^{-n/2} ∫ exp(−|x − c e_z|² / 4t) dμ,
//! ```
//!
//! with the center on the symmetry axis. F is Φ(0, 1), the entropy is the sup
//! over (c, t), and the density of a self-similar flow √(T − t)Σ at a back
//! slice is Φ on Σ after undoing the dilation.

use crate::error::{invalid, LabError, Result};
use crate::graphflow::{graph_push, FlowTrace};
use crate::shrinker::{Model, ShrinkerSurface};
use crate::surface::{arc_quadrature, ProfileGeometry, Side};
use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Arc quadrature points with induced-measure weights, and straight-ray continuations of truncated ends.
#[derive(Clone, Debug)]
pub struct GaussianQuadrature {
    pub n: usize,
    points: Vec<([f64; 2], f64)>,
    /// (end point, unit outward direction) per truncated end.
    rays: Vec<([f64; 2], [f64; 2])>,
}

impl GaussianQuadrature {
    pub fn new(p: &ProfileGeometry) -> Result<Self> {
        p.validate()?;
        let len = p.len();
        let mut rays = vec![];
        for side in [Side::Start, Side::End] {
            if p.end_tag(side).is_none() {
                continue;
            }
            let (a, b) = match side {
                Side::Start => (p.nodes[1], p.nodes[0]),
                Side::End => (p.nodes[len - 2], p.nodes[len - 1]),
            };
            let d = (b[0] - a[0]).hypot(b[1] - a[1]);
            rays.push((b, [(b[0] - a[0]) / d, (b[1] - a[1]) / d]));
        }
        Ok(GaussianQuadrature { n: p.n, points: arc_quadrature(p), rays })
    }

    fn kernel(&self, c: f64, t: f64) -> impl Fn([f64; 2]) -> f64 {
        let norm = (4.0 * PI * t).powf(-(self.n as f64) / 2.0);
        move |x| norm * (-(x[0] * x[0] + (x[1] - c) * (x[1] - c)) / (4.0 * t)).exp()
    }

    /// Φ(c, t) by quadrature on the profile.
    pub fn value(&self, c: f64, t: f64) -> f64 {
        let k = self.kernel(c, t);
        self.points.iter().map(|(x, m)| m * k(*x)).sum()
    }

    /// Φ over the straight continuation of each truncated end, which is the
    /// exact tail for cylindrical and flat ends and the leading term for
    /// conical ones.
    pub fn tail(&self, c: f64, t: f64) -> f64 {
        let k = self.kernel(c, t);
        let reach = 40.0 * t.sqrt() + 40.0;
        self.rays
            .iter()
            .map(|&(p, d)| {
                // Stop where the ray meets the axis.
                let len = if d[0] < 0.0 && self.n == 2 { (-p[0] / d[0]).min(reach) } else { reach };
                let f = |s: f64| {
                    let x = [p[0] + s * d[0], p[1] + s * d[1]];
                    let w = if self.n == 2 { 2.0 * PI * x[0].max(0.0) } else { 1.0 };
                    w * k(x)
                };
                simpson(&f, 0.0, len, 4000)
            })
            .sum()
    }

    pub fn has_truncated_ends(&self) -> bool {
        !self.rays.is_empty()
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + inner + f(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    /// Quadrature over the profile only.
    pub value: f64,
    /// Contribution of the truncated ends' straight continuations.
    pub tail: f64,
    pub total: f64,
    pub nodes: usize,
}

/// F = (4π)^{-n/2} ∫ e^{−|x|²/4} dμ.
pub fn f_functional(p: &ProfileGeometry) -> Result<FunctionalValue> {
    let q = GaussianQuadrature::new(p)?;
    let (value, tail) = (q.value(0.0, 1.0), q.tail(0.0, 1.0));
    Ok(FunctionalValue { value, tail, total: value + tail, nodes: p.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySearch {
    pub center_range: (f64, f64),
    pub center_step: f64,
    pub scale_range: (f64, f64),
    pub scale_count: usize,
    pub refinement_levels: usize,
}

impl Default for EntropySearch {
    fn default() -> Self {
        EntropySearch { center_range: (-8.0, 8.0), center_step: 0.25, scale_range: (0.25, 4.0), scale_count: 33, refinement_levels: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub value: f64,
    /// Axis center c of the maximizing Gaussian.
    pub center: f64,
    /// Time scale t of the maximizing Gaussian.
    pub scale: f64,
    pub f_value: f64,
    /// Tail share of the maximizing value.
    pub tail: f64,
    /// Coarse argmax sat on the search box boundary.
    pub on_boundary: bool,
    /// The profile is not a certified rotational model, so restricting
    /// centers to the axis is an assumption rather than a symmetry fact.
    pub axis_restriction_assumed: bool,
    pub evaluations: usize,
    pub search: EntropySearch,
}

/// sup over axis centers and scales of Φ (tails included), coarse grid then
/// local 5×5 refinements with halved steps.
pub fn entropy(surface: &ShrinkerSurface, search: &EntropySearch) -> Result<EntropyReport> {
    let s = search;
    if !(s.center_step > 0.0 && s.center_range.1 >= s.center_range.0) {
        return invalid("entropy search needs a positive center step and an ordered center range");
    }
    if !(s.scale_range.0 > 0.0 && s.scale_range.1 > s.scale_range.0 && s.scale_count >= 2) {
        return invalid("entropy search needs 0 < min scale < max scale and at least two scales");
    }
    let q = GaussianQuadrature::new(&surface.profile)?;
    let phi = |c: f64, y: f64| {
        let t = y.exp();
        q.value(c, t) + q.tail(c, t)
    };
    let nc = ((s.center_range.1 - s.center_range.0) / s.center_step).round() as usize + 1;
    let (y0, y1) = (s.scale_range.0.ln(), s.scale_range.1.ln());
    let dy = (y1 - y0) / (s.scale_count - 1) as f64;
    let coarse: Vec<(f64, usize, usize)> = (0..nc)
        .into_par_iter()
        .map(|i| {
            let c = s.center_range.0 + i as f64 * s.center_step;
            (0..s.scale_count)
                .map(|j| (phi(c, y0 + j as f64 * dy), i, j))
                .fold((f64::NEG_INFINITY, 0, 0), |a, b| if b.0 > a.0 { b } else { a })
        })
        .collect();
    let best = coarse.iter().cloned().fold((f64::NEG_INFINITY, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let on_boundary = (nc > 1 && (best.1 == 0 || best.1 == nc - 1)) || best.2 == 0 || best.2 == s.scale_count - 1;
    let mut evaluations = nc * s.scale_count;
    let (mut v, mut c, mut y) = (best.0, s.center_range.0 + best.1 as f64 * s.center_step, y0 + best.2 as f64 * dy);
    let (mut hc, mut hy) = (s.center_step, dy);
    for _ in 0..s.refinement_levels {
        hc /= 2.0;
        hy /= 2.0;
        let (c0, yc) = (c, y);
        for a in -2..=2 {
            for b in -2..=2 {
                let (cc, yy) = (c0 + a as f64 * hc, yc + b as f64 * hy);
                let w = phi(cc, yy);
                evaluations += 1;
                if w > v {
                    (v, c, y) = (w, cc, yy);
                }
            }
        }
    }
    let f = f_functional(&surface.profile)?;
    Ok(EntropyReport {
        value: v,
        center: c,
        scale: y.exp(),
        f_value: f.total,
        tail: q.tail(c, y.exp()),
        on_boundary,
        axis_restriction_assumed: surface.model == Model::Custom,
        evaluations,
        search: s.clone(),
    })
}

/// A mean curvature flow the density can be evaluated on.
#[derive(Clone, Copy, Debug)]
pub enum DensityFlow<'a> {
    /// t ↦ √(T − t)Σ for t < T.
    SelfSimilar { shrinker: &'a ShrinkerSurface, extinction: f64 },
    /// Graphical rescaled run over `base`, read as t = −e^{−τ}.
    Trace { base: &'a ShrinkerSurface, trace: &'a FlowTrace },
}

#[derive(Clone, Copy, Debug)]
pub struct DensityQuery<'a> {
    pub center_z: f64,
    pub t0: f64,
    pub r: f64,
    pub flow: DensityFlow<'a>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub value: f64,
    /// Back slice t₀ − r².
    pub slice: f64,
    /// |Θ| difference between the bracketing snapshots (zero for analytic flows).
    pub interpolation_bound: f64,
}

/// Θ(X₀, r) = ∫ ρ_{X₀}(x, t₀ − r²) dμ(t₀ − r²).
pub fn huisken_density(q: &DensityQuery) -> Result<DensityReport> {
    if !(q.r > 0.0 && q.r.is_finite() && q.t0.is_finite()) {
        return invalid("density needs a finite positive scale r and finite t0");
    }
    let slice = q.t0 - q.r * q.r;
    let s = q.r * q.r;
    match q.flow {
        DensityFlow::SelfSimilar { shrinker, extinction } => {
            if slice >= extinction {
                return invalid(format!("slice t = {slice} is not before the extinction time {extinction}"));
            }
            let lam = (extinction - slice).sqrt();
            let g = GaussianQuadrature::new(&shrinker.profile)?;
            let (c, t) = (q.center_z / lam, s / (lam * lam));
            Ok(DensityReport { value: g.value(c, t) + g.tail(c, t), slice, interpolation_bound: 0.0 })
        }
        DensityFlow::Trace { base, trace } => {
            let snaps = &trace.snapshots;
            if snaps.is_empty() || slice >= 0.0 {
                return invalid("slice must be at a negative time inside the trace");
            }
            let tau = -(-slice).ln();
            let (first, last) = (snaps[0].tau, snaps[snaps.len() - 1].tau);
            if tau < first - 1e-12 || tau > last + 1e-12 {
                return invalid(format!(
                    "slice t = {slice} (tau = {tau:.4}) lies outside the trace range [{}, {}]",
                    -(-first).exp(),
                    -(-last).exp()
                ));
            }
            let k = snaps.partition_point(|x| x.tau <= tau).clamp(1, snaps.len().max(2) - 1) - 1;
            let lam = (-slice).sqrt();
            let (c, t) = (q.center_z / lam, s / (lam * lam));
            let theta = |i: usize| -> Result<f64> {
                let g = GaussianQuadrature::new(&graph_push(base, &snaps[i].u)?)?;
                Ok(g.value(c, t) + g.tail(c, t))
            };
            if snaps.len() == 1 {
                return Ok(DensityReport { value: theta(0)?, slice, interpolation_bound: 0.0 });
            }
            let (a, b) = (theta(k)?, theta(k + 1)?);
            let w = ((tau - snaps[k].tau) / (snaps[k + 1].tau - snaps[k].tau)).clamp(0.0, 1.0);
            Ok(DensityReport { value: a + w * (b - a), slice, interpolation_bound: (b - a).abs() })
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConformalDistanceQuery<'a> {
    /// Ball center on the symmetry axis.
    pub center_z: f64,
    pub t0: f64,
    pub radius: f64,
    pub t: f64,
    pub first: &'a ProfileGeometry,
    pub second: &'a ProfileGeometry,
    /// Grid cells across the radius of {u > 0}.
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    /// `None` when no path joins the sets inside {u > 0}.
    pub distance: Option<f64>,
    /// Radius of {u(·, t) > 0}.
    pub support_radius: f64,
    pub spacing: f64,
    pub grid: (usize, usize),
    pub witness: Option<String>,
}

struct Grid {
    r0: f64,
    z0: f64,
    h: f64,
    nr: usize,
    nz: usize,
    inv_u: Vec<f64>,
}

impl Grid {
    fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.r0 + i as f64 * self.h, self.z0 + j as f64 * self.h]
    }
    fn id(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }
}

/// Grid nodes within two cells of the set's part inside {u > 0}, with the
/// conformal length of their straight connection to it.
fn band(grid: &Grid, p: &ProfileGeometry, conformal: &impl Fn([f64; 2]) -> f64) -> Vec<(usize, f64)> {
    let mut best: std::collections::HashMap<usize, f64> = Default::default();
    let len = p.len();
    let segs = if p.is_periodic() { len } else { len - 1 };
    let reach = 2.0 * grid.h;
    for s in 0..segs {
        let (a, b) = (p.nodes[s], p.nodes[(s + 1) % len]);
        let lo = [a[0].min(b[0]) - reach, a[1].min(b[1]) - reach];
        let hi = [a[0].max(b[0]) + reach, a[1].max(b[1]) + reach];
        let i0 = ((lo[0] - grid.r0) / grid.h).floor().max(0.0) as usize;
        let j0 = ((lo[1] - grid.z0) / grid.h).floor().max(0.0) as usize;
        let i1 = (((hi[0] - grid.r0) / grid.h).ceil() as usize).min(grid.nr - 1);
        let j1 = (((hi[1] - grid.z0) / grid.h).ceil() as usize).min(grid.nz - 1);
        if hi[0] < grid.r0 || hi[1] < grid.z0 || i0 > i1 || j0 > j1 {
            continue;
        }
        let d = [b[0] - a[0], b[1] - a[1]];
        let dd = d[0] * d[0] + d[1] * d[1];
        for j in j0..=j1 {
            for i in i0..=i1 {
                let id = grid.id(i, j);
                if grid.inv_u[id] == 0.0 {
                    continue;
                }
                let x = grid.point(i, j);
                let w = if dd > 0.0 { (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / dd).clamp(0.0, 1.0) } else { 0.0 };
                let foot = [a[0] + w * d[0], a[1] + w * d[1]];
                let dist = (x[0] - foot[0]).hypot(x[1] - foot[1]);
                if dist > reach {
                    continue;
                }
                let cf = conformal(foot);
                if cf == 0.0 {
                    continue;
                }
                let cost = dist * (grid.inv_u[id] + 4.0 * conformal([0.5 * (x[0] + foot[0]), 0.5 * (x[1] + foot[1])]) + cf) / 6.0;
                let e = best.entry(id).or_insert(f64::INFINITY);
                *e = e.min(cost);
            }
        }
    }
    best.into_iter().collect()
}

/// d_t = inf ∫ u^{-1} ds between two rotational sets with u = (R² − |x − x₀|²
/// − 2n(t − t₀))₊. Multi-source Dijkstra on the meridian half plane (the full
/// plane for curves), 8-connected, edge costs by Simpson's rule on 1/u, and
/// exact straight connections between each set and its nearby grid nodes.
pub fn ilmanen_distance(q: &ConformalDistanceQuery) -> Result<DistanceReport> {
    if q.first.n != q.second.n {
        return invalid("both sets must have the same dimension");
    }
    if !(q.radius > 0.0) || q.cells < 8 {
        return invalid("need R > 0 and at least 8 cells");
    }
    let n = q.first.n as f64;
    let c2 = q.radius * q.radius - 2.0 * n * (q.t - q.t0);
    if !(c2 > 0.0) {
        return invalid(format!("u(., t) vanishes identically at t = {}", q.t));
    }
    let c = c2.sqrt();
    let z0 = q.center_z;
    let conformal = move |x: [f64; 2]| {
        let u = c2 - x[0] * x[0] - (x[1] - z0) * (x[1] - z0);
        if u > 0.0 {
            1.0 / u
        } else {
            0.0
        }
    };
    let h = c / q.cells as f64;
    let r0 = if q.first.n == 1 { -c } else { 0.0 };
    let nr = if q.first.n == 1 { 2 * q.cells + 1 } else { q.cells + 1 };
    let nz = 2 * q.cells + 1;
    let mut grid = Grid { r0, z0: z0 - c, h, nr, nz, inv_u: vec![0.0; nr * nz] };
    for j in 0..nz {
        for i in 0..nr {
            let id = grid.id(i, j);
            grid.inv_u[id] = conformal(grid.point(i, j));
        }
    }
    let mut report = DistanceReport { distance: None, support_radius: c, spacing: h, grid: (nr, nz), witness: None };
    let sources = band(&grid, q.first, &conformal);
    let targets = band(&grid, q.second, &conformal);
    if sources.is_empty() || targets.is_empty() {
        let which = if sources.is_empty() { "first" } else { "second" };
        report.witness = Some(format!("the {which} set has no grid neighbourhood inside {{u > 0}} (support radius {c:.6})"));
        return Ok(report);
    }
    let mut target_cost = vec![f64::INFINITY; nr * nz];
    for &(id, v) in &targets {
        target_cost[id] = v;
    }
    let mut dist = vec![f64::INFINITY; nr * nz];
    let mut heap = BinaryHeap::new();
    for &(id, v) in &sources {
        dist[id] = v;
        heap.push(Reverse((OrderedFloat(v), id)));
    }
    let mut best = f64::INFINITY;
    let mut reached = 0usize;
    while let Some(Reverse((OrderedFloat(d), id))) = heap.pop() {
        if d > dist[id] {
            continue;
        }
        if d >= best {
            break;
        }
        reached += 1;
        best = best.min(d + target_cost[id]);
        let (i, j) = ((id % nr) as i64, (id / nr) as i64);
        let x = grid.point(i as usize, j as usize);
        for (di, dj) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= nr as i64 || b >= nz as i64 {
                continue;
            }
            let nb = grid.id(a as usize, b as usize);
            if grid.inv_u[nb] == 0.0 {
                continue;
            }
            let y = grid.point(a as usize, b as usize);
            let mid = conformal([0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])]);
            let step = h * ((di * di + dj * dj) as f64).sqrt() * (grid.inv_u[id] + 4.0 * mid + grid.inv_u[nb]) / 6.0;
            if d + step < dist[nb] {
                dist[nb] = d + step;
                heap.push(Reverse((OrderedFloat(d + step), nb)));
            }
        }
    }
    if best.is_finite() {
        report.distance = Some(best);
    } else {
        report.witness = Some(format!("the component of {{u > 0}} around the first set ({reached} grid nodes) never meets the second set"));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Largest relative drop between consecutive times.
    pub worst_drop: f64,
    pub pass: bool,
}

/// d_t between two flows sampled at `times`; non-decreasing up to `slack`.
pub fn distance_monotonicity(
    times: &[f64],
    sets: impl Fn(f64) -> Result<(ProfileGeometry, ProfileGeometry)>,
    center_z: f64,
    t0: f64,
    radius: f64,
    cells: usize,
    slack: f64,
) -> Result<MonotonicityReport> {
    let mut distances = vec![];
    for &t in times {
        let (a, b) = sets(t)?;
        let q = ConformalDistanceQuery { center_z, t0, radius, t, first: &a, second: &b, cells };
        let d = ilmanen_distance(&q)?
            .distance
            .ok_or_else(|| LabError::Invalid(format!("sets are not joined inside {{u > 0}} at t = {t}")))?;
        distances.push(d);
    }
    let worst_drop = distances.windows(2).map(|w| (w[0] - w[1]) / w[0]).fold(0.0, f64::max);
    Ok(MonotonicityReport { times: times.to_vec(), distances, worst_drop, pass: worst_drop <= slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphflow::{BoundaryData, GraphFlow, RunOptions};
    use crate::shrinker::{make_model, ModelParams};
    use crate::surface::refine;

    fn model(m: Model, radius: Option<f64>, n: usize) -> ShrinkerSurface {
        make_model(m, ModelParams { radius, ..Default::default() }, n).unwrap()
    }

    #[test]
    fn f_values_of_models() {
        let s = model(Model::Sphere, None, 512);
        assert!((f_functional(&s.profile).unwrap().value - 4.0 / std::f64::consts::E).abs() < 1e-4);
        let p = model(Model::Plane, None, 512);
        let f = f_functional(&p.profile).unwrap();
        assert!((f.value - 1.0).abs() < 1e-6 && (f.total - 1.0).abs() < 1e-9, "{f:?}");
        let c = model(Model::Circle, None, 512);
        let lambda1 = (2.0 * PI / std::f64::consts::E).sqrt();
        assert!((f_functional(&c.profile).unwrap().value - lambda1).abs() < 1e-4);
        let cyl = model(Model::Cylinder, None, 512);
        assert!((f_functional(&cyl.profile).unwrap().total - lambda1).abs() < 1e-4);
    }

    #[test]
    fn f_is_refinement_invariant() {
        let t = model(Model::Torus, None, 256);
        let a = f_functional(&t.profile).unwrap().value;
        let b = f_functional(&refine(&t.profile, 2).unwrap()).unwrap().value;
        assert!(((a - b) / b).abs() <= 1e-4, "{a} {b}");
    }

    #[test]
    fn entropy_of_spheres_and_circle() {
        let e = 4.0 / std::f64::consts::E;
        let s = model(Model::Sphere, None, 512);
        let r = entropy(&s, &EntropySearch::default()).unwrap();
        assert!((r.value - e).abs() < 1e-3 && r.center.abs() < 1e-9 && (r.scale - 1.0).abs() < 0.02, "{r:?}");
        assert!(r.value >= r.f_value - 1e-12 && !r.on_boundary);
        let big = model(Model::Sphere, Some(3.0), 512);
        let r3 = entropy(&big, &EntropySearch::default()).unwrap();
        assert!((r3.value - e).abs() < 1e-4 && (r3.scale - 2.25).abs() < 0.03, "{r3:?}");
        let c = model(Model::Circle, None, 512);
        let rc = entropy(&c, &EntropySearch::default()).unwrap();
        assert!((rc.value - (2.0 * PI / std::f64::consts::E).sqrt()).abs() < 1e-4);
        let p = model(Model::Plane, None, 512);
        assert!((entropy(&p, &EntropySearch::default()).unwrap().value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn density_of_shrinking_sphere_is_constant() {
        let s = model(Model::Sphere, None, 512);
        let flow = DensityFlow::SelfSimilar { shrinker: &s, extinction: 0.0 };
        for r in [0.1, 0.5, 1.0, 3.0] {
            let q = DensityQuery { center_z: 0.0, t0: 0.0, r, flow };
            assert!((huisken_density(&q).unwrap().value - 4.0 / std::f64::consts::E).abs() < 1e-4);
        }
        let p = model(Model::Plane, None, 512);
        let q = DensityQuery { center_z: 0.0, t0: 1.0, r: 0.7, flow: DensityFlow::SelfSimilar { shrinker: &p, extinction: 10.0 } };
        assert!((huisken_density(&q).unwrap().value - 1.0).abs() < 1e-6);
        let late = DensityQuery { center_z: 0.0, t0: 2.0, r: 0.5, flow };
        assert!(huisken_density(&late).is_err());
    }

    #[test]
    fn density_on_perturbed_sphere_flow_is_monotone() {
        let s = model(Model::Sphere, None, 256);
        let flow = GraphFlow::new(&s, BoundaryData::default());
        let u0: Vec<f64> = s.profile.nodes.iter().map(|x| -0.01 * x[1]).collect();
        let trace = flow.run(0.0, &u0, &RunOptions::new(3.5, 0.5, 20)).unwrap();
        let mut last = 0.0;
        for r in [0.2, 0.4, 0.8] {
            let q = DensityQuery { center_z: 0.0, t0: 0.0, r, flow: DensityFlow::Trace { base: &s, trace: &trace } };
            let d = huisken_density(&q).unwrap();
            assert!(d.value >= last - 1e-4, "{r}: {} < {last}", d.value);
            last = d.value;
        }
        let q = DensityQuery { center_z: 0.0, t0: 0.0, r: 0.05, flow: DensityFlow::Trace { base: &s, trace: &trace } };
        assert!(huisken_density(&q).is_err());
    }

    fn sphere(r: f64) -> ProfileGeometry {
        model(Model::Sphere, Some(r), 256).profile
    }

    #[test]
    fn conformal_distance_between_concentric_spheres() {
        let (a, b) = (sphere(1.0), sphere(3.0));
        let q = ConformalDistanceQuery { center_z: 0.0, t0: 0.0, radius: 10.0, t: 0.0, first: &a, second: &b, cells: 400 };
        let d = ilmanen_distance(&q).unwrap().distance.unwrap();
        assert!((d / 0.0209184 - 1.0).abs() < 0.02, "{d}");
        let back = ilmanen_distance(&ConformalDistanceQuery { first: &b, second: &a, ..q.clone() }).unwrap().distance.unwrap();
        assert!((back / d - 1.0).abs() < 0.03);
        let mid = sphere(2.0);
        let d12 = ilmanen_distance(&ConformalDistanceQuery { second: &mid, ..q.clone() }).unwrap().distance.unwrap();
        let d23 = ilmanen_distance(&ConformalDistanceQuery { first: &mid, ..q.clone() }).unwrap().distance.unwrap();
        assert!(d <= (d12 + d23) * 1.03 && d12 <= (d + d23) * 1.03, "{d} {d12} {d23}");
        let far = ilmanen_distance(&ConformalDistanceQuery { radius: 2.0, ..q.clone() }).unwrap();
        assert!(far.distance.is_none() && far.witness.is_some());
    }

    #[test]
    fn conformal_distance_is_monotone_between_shrinking_spheres() {
        let sets = |t: f64| Ok((sphere((2.56 - 4.0 * (t + 1.0)).sqrt()), sphere((5.76 - 4.0 * (t + 1.0)).sqrt())));
        let times: Vec<f64> = (0..7).map(|k| -1.0 + 0.1 * k as f64).collect();
        let rep = distance_monotonicity(&times, sets, 0.0, -1.0, 3.0, 200, 0.03).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.distances[0] / 0.16794 - 1.0).abs() < 0.03 && (rep.distances[6] / 0.28700 - 1.0).abs() < 0.03, "{rep:?}");
    }
}
