//! Generating profiles of rotational hypersurfaces (n = 2) and planar curves
//! (n = 1), their discrete geometry, Gaussian-weighted quadrature and
//! refinement.
//!
//! Sign conventions: the unit normal is `nu = orientation * J T` with
//! `J(a, b) = (-b, a)`. A counter-clockwise circle, or a sphere profile traced
//! from the south pole upward, gets the inward normal for `orientation = +1`,
//! and then has positive principal curvatures.

use crate::error::{invalid, LabError, Result};
use crate::numerics::fd::{DiffOp, EndRule, Topology};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::HashMap;
use std::f64::consts::PI;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndTag {
    Conical,
    Cylindrical,
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Start,
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndSpec {
    pub side: Side,
    pub tag: EndTag,
}

/// Discrete generating curve. Periodic profiles do not repeat their first node.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileGeometry {
    pub n: usize,
    pub nodes: Vec<[f64; 2]>,
    pub closed: bool,
    pub ends: Vec<EndSpec>,
    /// +1 or -1, see module docs.
    pub orientation: f64,
    pub metadata: Map<String, Value>,
}

/// A scalar field sampled on profile nodes.
pub type ScalarField = Vec<f64>;

impl ProfileGeometry {
    pub fn new(n: usize, nodes: Vec<[f64; 2]>, closed: bool, ends: Vec<EndSpec>) -> Self {
        ProfileGeometry { n, nodes, closed, ends, orientation: 1.0, metadata: Map::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn on_axis(&self, i: usize) -> bool {
        self.n == 2 && self.nodes[i][0] == 0.0
    }

    pub fn end_tag(&self, side: Side) -> Option<EndTag> {
        self.ends.iter().find(|e| e.side == side).map(|e| e.tag)
    }

    /// Whether the given end of an arc is a smooth cap on the rotation axis.
    pub fn is_cap(&self, side: Side) -> bool {
        if self.is_periodic() {
            return false;
        }
        let i = match side {
            Side::Start => 0,
            Side::End => self.len() - 1,
        };
        self.on_axis(i) && self.end_tag(side).is_none()
    }

    pub fn is_periodic(&self) -> bool {
        if !self.closed {
            return false;
        }
        let last = self.len() - 1;
        !(self.on_axis(0) && self.on_axis(last))
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        let n = self.len();
        let segs = if self.is_periodic() { n } else { n - 1 };
        (0..segs)
            .map(|i| {
                let a = self.nodes[i];
                let b = self.nodes[(i + 1) % n];
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .collect()
    }

    /// Cumulative chord parameter and, for periodic profiles, the period.
    pub fn chord_parameter(&self) -> (Vec<f64>, Option<f64>) {
        let h = self.segment_lengths();
        let mut t = Vec::with_capacity(self.len());
        t.push(0.0);
        for i in 0..self.len() - 1 {
            t.push(t[i] + h[i]);
        }
        let period = if self.is_periodic() { Some(t[self.len() - 1] + h[self.len() - 1]) } else { None };
        (t, period)
    }

    pub fn topology(&self) -> Topology {
        let (_, period) = self.chord_parameter();
        match period {
            Some(p) => Topology::Periodic { period: p },
            None => {
                let rule = |s| if self.is_cap(s) { EndRule::Mirror } else { EndRule::OneSided };
                Topology::Arc { left: rule(Side::Start), right: rule(Side::End) }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 1 && self.n != 2 {
            return invalid(format!("dimension must be 1 or 2, got {}", self.n));
        }
        if self.len() < 8 {
            return invalid(format!("profile needs at least 8 nodes, got {}", self.len()));
        }
        if self.orientation != 1.0 && self.orientation != -1.0 {
            return invalid("orientation must be +1 or -1");
        }
        if self.nodes.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return invalid("non-finite node coordinates");
        }
        if self.closed && !self.ends.is_empty() {
            return invalid("closed profiles carry no end tags");
        }
        let mut sides: Vec<Side> = self.ends.iter().map(|e| e.side).collect();
        sides.dedup();
        if sides.len() != self.ends.len() {
            return invalid("duplicate end tag");
        }
        let last = self.len() - 1;
        if self.n == 2 {
            for (i, p) in self.nodes.iter().enumerate() {
                if p[0] < 0.0 {
                    return invalid(format!("node {i} has r < 0"));
                }
                let endpoint = (i == 0 || i == last) && !self.is_periodic();
                if p[0] == 0.0 && !endpoint {
                    return invalid(format!("node {i} lies on the axis but is not a cap"));
                }
            }
            if self.closed && !self.is_periodic() && !(self.on_axis(0) && self.on_axis(last)) {
                return invalid("closed arc must start and end on the axis");
            }
            for (side, i, j) in [(Side::Start, 0usize, 1usize), (Side::End, last, last - 1)] {
                if self.on_axis(i) && self.end_tag(side).is_some() {
                    return invalid("an axis endpoint cannot carry an end tag");
                }
                if self.is_cap(side) {
                    let (a, b) = (self.nodes[i], self.nodes[j]);
                    if (b[1] - a[1]).abs() > (b[0] - a[0]).abs() {
                        return invalid("cap tangent is not orthogonal to the axis");
                    }
                }
            }
        }
        if !self.closed {
            for (side, i) in [(Side::Start, 0usize), (Side::End, last)] {
                if self.end_tag(side).is_none() && !self.on_axis(i) {
                    return invalid("open end without an end tag");
                }
            }
        }
        let h = self.segment_lengths();
        let scale = self
            .nodes
            .iter()
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(1.0, f64::max);
        let floor = 64.0 * f64::EPSILON * scale;
        if let Some((i, v)) = h.iter().enumerate().find(|(_, v)| **v <= floor) {
            return invalid(format!("degenerate spacing {v:e} after node {i}"));
        }
        self.check_embedded()
    }

    /// Segment-intersection test through a uniform hash grid.
    fn check_embedded(&self) -> Result<()> {
        let n = self.len();
        let periodic = self.is_periodic();
        let segs = if periodic { n } else { n - 1 };
        let h = self.segment_lengths();
        let cell = h.iter().cloned().fold(0.0, f64::max).max(1e-12);
        let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for s in 0..segs {
            let (a, b) = (self.nodes[s], self.nodes[(s + 1) % n]);
            let (ka, kb) = (key(a), key(b));
            for x in ka.0.min(kb.0)..=ka.0.max(kb.0) {
                for y in ka.1.min(kb.1)..=ka.1.max(kb.1) {
                    grid.entry((x, y)).or_default().push(s);
                }
            }
        }
        let adjacent = |s: usize, q: usize| {
            let d = s.abs_diff(q);
            d <= 1 || (periodic && d == segs - 1)
        };
        for s in 0..segs {
            let (a, b) = (self.nodes[s], self.nodes[(s + 1) % n]);
            let (ka, kb) = (key(a), key(b));
            for x in ka.0.min(kb.0) - 1..=ka.0.max(kb.0) + 1 {
                for y in ka.1.min(kb.1) - 1..=ka.1.max(kb.1) + 1 {
                    if let Some(list) = grid.get(&(x, y)) {
                        for &q in list {
                            if q <= s || adjacent(s, q) {
                                continue;
                            }
                            let (c, d) = (self.nodes[q], self.nodes[(q + 1) % n]);
                            if segments_cross(a, b, c, d) {
                                return invalid(format!("profile self-intersects (segments {s} and {q})"));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Same curve with the opposite unit normal.
    pub fn flipped(&self) -> Self {
        let mut p = self.clone();
        p.orientation = -p.orientation;
        p
    }

    pub fn to_json(&self) -> Value {
        let mut meta = self.metadata.clone();
        meta.insert("orientation".into(), Value::from(self.orientation));
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "closed": self.closed,
            "ends": self.ends,
            "nodes": self.nodes,
            "metadata": meta,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            schema_version: u32,
            n: usize,
            closed: bool,
            ends: Vec<EndSpec>,
            nodes: Vec<[f64; 2]>,
            metadata: Map<String, Value>,
        }
        let version = v.get("schema_version").and_then(Value::as_u64);
        match version {
            Some(x) if x == SCHEMA_VERSION as u64 => {}
            Some(x) => return invalid(format!("unsupported schema_version {x} (expected {SCHEMA_VERSION})")),
            None => return Err(LabError::Format("missing schema_version".into())),
        }
        let doc: Doc = serde_json::from_value(v.clone()).map_err(|e| LabError::Format(e.to_string()))?;
        let mut metadata = doc.metadata;
        let orientation = metadata.remove("orientation").and_then(|o| o.as_f64()).unwrap_or(1.0);
        let _ = doc.schema_version;
        let p = ProfileGeometry { n: doc.n, nodes: doc.nodes, closed: doc.closed, ends: doc.ends, orientation, metadata };
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.to_json()).map_err(|e| LabError::Format(e.to_string()))?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&s).map_err(|e| LabError::Format(e.to_string()))?;
        Self::from_json(&v)
    }
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Per-node geometry of a profile.
#[derive(Clone, Debug)]
pub struct GeometryFields {
    pub n: usize,
    pub tangent: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    pub k1: Vec<f64>,
    /// Rotational curvature; identically zero for n = 1.
    pub k2: Vec<f64>,
    /// Derivative of k1 along arclength.
    pub dk1: Vec<f64>,
    pub h: Vec<f64>,
    pub a2: Vec<f64>,
    pub xnorm: Vec<f64>,
    pub x_dot_t: Vec<f64>,
    pub x_dot_nu: Vec<f64>,
    /// Induced measure of each node's dual cell (includes 2πr for n = 2).
    pub mass: Vec<f64>,
    /// e^{-|x|²/4}
    pub gauss: Vec<f64>,
}

impl GeometryFields {
    /// Assemble every field from the unit tangent, profile curvature and its
    /// arclength derivative.
    pub fn from_frames(p: &ProfileGeometry, tangent: Vec<[f64; 2]>, k1: Vec<f64>, dk1: Vec<f64>) -> Self {
        let n = p.len();
        let sigma = p.orientation;
        let normal: Vec<[f64; 2]> = tangent.iter().map(|t| [-sigma * t[1], sigma * t[0]]).collect();
        let mut k2 = vec![0.0; n];
        if p.n == 2 {
            for i in 0..n {
                let r = p.nodes[i][0];
                k2[i] = if r == 0.0 { k1[i] } else { sigma * tangent[i][1] / r };
            }
        }
        let h: Vec<f64> = (0..n).map(|i| k1[i] + k2[i]).collect();
        let a2: Vec<f64> = (0..n).map(|i| k1[i] * k1[i] + k2[i] * k2[i]).collect();
        let xnorm: Vec<f64> = p.nodes.iter().map(|x| x[0].hypot(x[1])).collect();
        let x_dot_t = (0..n).map(|i| p.nodes[i][0] * tangent[i][0] + p.nodes[i][1] * tangent[i][1]).collect();
        let x_dot_nu = (0..n).map(|i| p.nodes[i][0] * normal[i][0] + p.nodes[i][1] * normal[i][1]).collect();
        let gauss = xnorm.iter().map(|r| (-r * r / 4.0).exp()).collect();
        GeometryFields {
            n: p.n,
            tangent,
            normal,
            k1,
            k2,
            dk1,
            h,
            a2,
            xnorm,
            x_dot_t,
            x_dot_nu,
            mass: dual_cell_measure(p),
            gauss,
        }
    }

    pub fn len(&self) -> usize {
        self.k1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k1.is_empty()
    }

    /// H + ½ x·ν at every node.
    pub fn shrinker_residual(&self) -> Vec<f64> {
        self.h.iter().zip(&self.x_dot_nu).map(|(h, x)| h + 0.5 * x).collect()
    }

    /// (4π)^{-n/2} e^{-|x|²/4} dμ per node.
    pub fn weights(&self) -> Vec<f64> {
        let c = (4.0 * PI).powf(-(self.n as f64) / 2.0);
        self.mass.iter().zip(&self.gauss).map(|(m, g)| c * m * g).collect()
    }
}

/// Dual-cell induced measure. Every segment is replaced by the circular arc
/// through its endpoints whose curvature is the mean of the nodal turning-angle
/// curvatures, split at the arc midpoint, and each half is integrated exactly.
/// This keeps the cells positive and makes the quadrature fourth order.
pub fn dual_cell_measure(p: &ProfileGeometry) -> Vec<f64> {
    let n = p.len();
    let h = p.segment_lengths();
    let (_, k1) = turning_angle_frames(p);
    let mut m = vec![0.0; n];
    for (s, &c) in h.iter().enumerate() {
        let (i, j) = (s, (s + 1) % n);
        let k = 0.5 * (k1[i] + k1[j]) * p.orientation;
        let (a, b) = (p.nodes[i], p.nodes[j]);
        let (left, right) = half_arc_moments(a, b, c, k);
        if p.n == 1 {
            m[i] += left.0;
            m[j] += right.0;
        } else {
            m[i] += 2.0 * PI * left.1;
            m[j] += 2.0 * PI * right.1;
        }
    }
    m
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Four-point Gauss–Legendre points and induced-measure weights on the same
/// circular arcs as [`dual_cell_measure`]. Smooth integrands converge at the
/// order of the arc reconstruction instead of the nodal spacing squared.
pub fn arc_quadrature(p: &ProfileGeometry) -> Vec<([f64; 2], f64)> {
    let n = p.len();
    let h = p.segment_lengths();
    let (_, k1) = turning_angle_frames(p);
    let mut out = Vec::with_capacity(4 * h.len());
    for (s, &c) in h.iter().enumerate() {
        let (i, j) = (s, (s + 1) % n);
        let k = 0.5 * (k1[i] + k1[j]) * p.orientation;
        let (a, b) = (p.nodes[i], p.nodes[j]);
        let u = [(b[0] - a[0]) / c, (b[1] - a[1]) / c];
        let nl = [-u[1], u[0]];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let kc = (0.5 * k * c).clamp(-1.0, 1.0);
        let straight = kc.abs() < 1e-7;
        let beta = kc.asin();
        let len = if straight { c } else { 2.0 * beta / k };
        for (x, w) in GL4 {
            let pt = if straight {
                [mid[0] + 0.5 * c * x * u[0], mid[1] + 0.5 * c * x * u[1]]
            } else {
                let th = beta * x;
                let (along, off) = (th.sin() / k, (beta.cos() - th.cos()) / k);
                [mid[0] + along * u[0] + off * nl[0], mid[1] + along * u[1] + off * nl[1]]
            };
            let dens = if p.n == 1 { 1.0 } else { 2.0 * PI * pt[0].max(0.0) };
            out.push((pt, 0.5 * w * len * dens));
        }
    }
    out
}

/// (length, ∫ r ds) of the two halves of the arc from `a` to `b` with chord
/// length `c` and signed curvature `k` (positive when turning left).
fn half_arc_moments(a: [f64; 2], b: [f64; 2], c: f64, k: f64) -> ((f64, f64), (f64, f64)) {
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let kc = (0.5 * k * c).clamp(-1.0, 1.0);
    if kc.abs() < 1e-7 {
        let l = 0.5 * c;
        return ((l, l * 0.5 * (a[0] + mid[0])), (l, l * 0.5 * (b[0] + mid[0])));
    }
    let beta = kc.asin();
    let rho = 1.0 / k.abs();
    let u = [(b[0] - a[0]) / c, (b[1] - a[1]) / c];
    let nl = [-u[1], u[0]];
    let to_center = beta.cos() / k;
    let center = [mid[0] + to_center * nl[0], mid[1] + to_center * nl[1]];
    let sag = (1.0 - beta.cos()) / k;
    let q = [mid[0] - sag * nl[0], mid[1] - sag * nl[1]];
    let half = beta.abs() / 2.0;
    let l = rho * beta.abs();
    let piece = |e: [f64; 2]| {
        let w = [0.5 * (e[0] + q[0]) - center[0], 0.5 * (e[1] + q[1]) - center[1]];
        let wn = w[0].hypot(w[1]);
        let r_bar = center[0] + rho * (half.sin() / half) * w[0] / wn;
        (l, l * r_bar)
    };
    (piece(a), piece(b))
}

/// Discrete geometry with second-order stencils.
pub fn compute_geometry(p: &ProfileGeometry) -> Result<GeometryFields> {
    compute_geometry_order(p, 2)
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Second-order frames from chord turning angles. Curvature at a node is the
/// turning angle divided by the mean of the adjacent chord lengths, which is
/// exact to O(h^2) and free of the 0/0 at axis caps via reflected ghosts.
fn turning_angle_frames(p: &ProfileGeometry) -> (Vec<[f64; 2]>, Vec<f64>) {
    let n = p.len();
    let chord = |a: [f64; 2], b: [f64; 2]| {
        let (dr, dz) = (b[0] - a[0], b[1] - a[1]);
        (dz.atan2(dr), dr.hypot(dz))
    };
    let periodic = p.is_periodic();
    let segs = if periodic { n } else { n - 1 };
    let seg: Vec<(f64, f64)> = (0..segs).map(|i| chord(p.nodes[i], p.nodes[(i + 1) % n])).collect();
    let ghost = |i: usize, j: usize| {
        // chord from reflected neighbour j across the axis into cap node i
        let m = [-p.nodes[j][0], p.nodes[j][1]];
        chord(m, p.nodes[i])
    };
    let mut kappa = vec![f64::NAN; n];
    let mut angle = vec![f64::NAN; n];
    for i in 0..n {
        let before = if i > 0 {
            Some(seg[i - 1])
        } else if periodic {
            Some(seg[n - 1])
        } else if p.is_cap(Side::Start) {
            Some(ghost(0, 1))
        } else {
            None
        };
        let after = if i < segs && (periodic || i + 1 < n) {
            Some(seg[i])
        } else if p.is_cap(Side::End) {
            let (a, l) = ghost(n - 1, n - 2);
            Some((wrap_angle(a + PI), l))
        } else {
            None
        };
        if let (Some((a0, l0)), Some((a1, l1))) = (before, after) {
            let turn = wrap_angle(a1 - a0);
            kappa[i] = 2.0 * turn / (l0 + l1);
            angle[i] = a0 + turn * l0 / (l0 + l1);
        }
    }
    if !periodic {
        if kappa[0].is_nan() {
            kappa[0] = 2.0 * kappa[1] - kappa[2];
            let (a, l) = seg[0];
            angle[0] = a - 0.25 * (kappa[0] + kappa[1]) * l;
        }
        if kappa[n - 1].is_nan() {
            kappa[n - 1] = 2.0 * kappa[n - 2] - kappa[n - 3];
            let (a, l) = seg[n - 2];
            angle[n - 1] = a + 0.25 * (kappa[n - 1] + kappa[n - 2]) * l;
        }
    }
    let tangent = angle.iter().map(|a| [a.cos(), a.sin()]).collect();
    let k1 = kappa.iter().map(|k| p.orientation * k).collect();
    (tangent, k1)
}

/// Discrete geometry with stencils of the given even order (2, 4 or 6).
pub fn compute_geometry_order(p: &ProfileGeometry, order: usize) -> Result<GeometryFields> {
    p.validate()?;
    if ![2, 4, 6].contains(&order) {
        return invalid(format!("stencil order must be 2, 4 or 6, got {order}"));
    }
    let (t, _) = p.chord_parameter();
    let op = DiffOp::new(&t, p.topology(), order);
    if order == 2 {
        let (tangent, k1) = turning_angle_frames(p);
        let dk1 = op.d1(&k1, 1.0);
        return Ok(GeometryFields::from_frames(p, tangent, k1, dk1));
    }
    let r: Vec<f64> = p.nodes.iter().map(|x| x[0]).collect();
    let z: Vec<f64> = p.nodes.iter().map(|x| x[1]).collect();
    let (r1, r2) = op.d12(&r, -1.0);
    let (z1, z2) = op.d12(&z, 1.0);
    let n = p.len();
    let mut tangent = Vec::with_capacity(n);
    let mut k1 = Vec::with_capacity(n);
    let mut speed = Vec::with_capacity(n);
    for i in 0..n {
        let sp = r1[i].hypot(z1[i]);
        tangent.push([r1[i] / sp, z1[i] / sp]);
        k1.push(p.orientation * (r1[i] * z2[i] - z1[i] * r2[i]) / sp.powi(3));
        speed.push(sp);
    }
    let dk = op.d1(&k1, 1.0);
    let dk1 = dk.iter().zip(&speed).map(|(a, b)| a / b).collect();
    Ok(GeometryFields::from_frames(p, tangent, k1, dk1))
}

pub fn weighted_inner(f: &[f64], g: &[f64], geom: &GeometryFields) -> Result<f64> {
    if f.len() != geom.len() || g.len() != geom.len() {
        return invalid(format!(
            "field lengths {} and {} do not match {} nodes",
            f.len(),
            g.len(),
            geom.len()
        ));
    }
    Ok(geom.weights().iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * a * b).sum())
}

/// (4π)^{-n/2} ∫ e^{-|x|²/4} dμ, the Gaussian area of the profile's surface.
pub fn gaussian_area(geom: &GeometryFields) -> f64 {
    geom.weights().iter().sum()
}

pub fn weighted_norm(f: &[f64], geom: &GeometryFields) -> f64 {
    weighted_inner(f, f, geom).map(f64::sqrt).unwrap_or(f64::NAN)
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

struct Hermite {
    p0: [f64; 2],
    p1: [f64; 2],
    m0: [f64; 2],
    m1: [f64; 2],
    a0: [f64; 2],
    a1: [f64; 2],
}

impl Hermite {
    fn combine(&self, w: [f64; 6]) -> [f64; 2] {
        [0, 1].map(|d| {
            w[0] * self.p0[d] + w[1] * self.m0[d] + w[2] * self.a0[d] + w[3] * self.a1[d] + w[4] * self.m1[d] + w[5] * self.p1[d]
        })
    }

    fn at(&self, u: f64) -> [f64; 2] {
        let (u2, u3, u4, u5) = (u * u, u.powi(3), u.powi(4), u.powi(5));
        self.combine([
            1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5,
            u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5,
            0.5 * u2 - 1.5 * u3 + 1.5 * u4 - 0.5 * u5,
            0.5 * u3 - u4 + 0.5 * u5,
            -4.0 * u3 + 7.0 * u4 - 3.0 * u5,
            10.0 * u3 - 15.0 * u4 + 6.0 * u5,
        ])
    }

    fn speed(&self, u: f64) -> f64 {
        let (u2, u3, u4) = (u * u, u.powi(3), u.powi(4));
        let v = self.combine([
            -30.0 * u2 + 60.0 * u3 - 30.0 * u4,
            1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4,
            u - 4.5 * u2 + 6.0 * u3 - 2.5 * u4,
            1.5 * u2 - 4.0 * u3 + 2.5 * u4,
            -12.0 * u2 + 28.0 * u3 - 15.0 * u4,
            30.0 * u2 - 60.0 * u3 + 30.0 * u4,
        ]);
        v[0].hypot(v[1])
    }

    fn length(&self, u: f64) -> f64 {
        GL5.iter().map(|(x, w)| 0.5 * u * w * self.speed(0.5 * u * (x + 1.0))).sum()
    }
}

/// Resample at uniform arclength with `factor` times as many nodes, using
/// piecewise quintic Hermite interpolation of the positions.
pub fn refine(p: &ProfileGeometry, factor: usize) -> Result<ProfileGeometry> {
    if factor < 2 {
        return invalid(format!("refinement factor must be at least 2, got {factor}"));
    }
    p.validate()?;
    let n = p.len();
    let (t, period) = p.chord_parameter();
    let op = DiffOp::new(&t, p.topology(), 6);
    let r: Vec<f64> = p.nodes.iter().map(|x| x[0]).collect();
    let z: Vec<f64> = p.nodes.iter().map(|x| x[1]).collect();
    let (dr, ddr) = op.d12(&r, -1.0);
    let (dz, ddz) = op.d12(&z, 1.0);
    let segs = if period.is_some() { n } else { n - 1 };
    let pieces: Vec<Hermite> = (0..segs)
        .map(|s| {
            let j = (s + 1) % n;
            let dt = if j == 0 { period.unwrap() - t[s] } else { t[j] - t[s] };
            Hermite {
                p0: p.nodes[s],
                p1: p.nodes[j],
                m0: [dr[s] * dt, dz[s] * dt],
                m1: [dr[j] * dt, dz[j] * dt],
                a0: [ddr[s] * dt * dt, ddz[s] * dt * dt],
                a1: [ddr[j] * dt * dt, ddz[j] * dt * dt],
            }
        })
        .collect();
    let lens: Vec<f64> = pieces.iter().map(|h| h.length(1.0)).collect();
    let mut cum = vec![0.0];
    for l in &lens {
        cum.push(cum.last().unwrap() + l);
    }
    let total = *cum.last().unwrap();
    let m = factor * n;
    let spacing = if period.is_some() { total / m as f64 } else { total / (m - 1) as f64 };
    let mut nodes = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let target = k as f64 * spacing;
        while seg + 1 < segs && cum[seg + 1] <= target {
            seg += 1;
        }
        let local = target - cum[seg];
        let h = &pieces[seg];
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if h.length(mid) < local {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        nodes.push(h.at(0.5 * (lo + hi)));
    }
    if period.is_none() {
        nodes[0] = p.nodes[0];
        nodes[m - 1] = p.nodes[n - 1];
    }
    if p.n == 2 {
        for (k, x) in nodes.iter_mut().enumerate() {
            let endpoint = period.is_none() && (k == 0 || k == m - 1);
            if !endpoint && x[0] <= 0.0 {
                return Err(LabError::NonConvergence("refinement crossed the axis".into()));
            }
        }
    }
    let out = ProfileGeometry { nodes, ..p.clone() };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn circle(radius: f64, n: usize) -> ProfileGeometry {
        let nodes = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        ProfileGeometry::new(1, nodes, true, vec![])
    }

    pub(crate) fn sphere(radius: f64, n: usize) -> ProfileGeometry {
        let nodes = (0..n)
            .map(|i| {
                let a = -PI / 2.0 + PI * i as f64 / (n - 1) as f64;
                let r = if i == 0 || i == n - 1 { 0.0 } else { radius * a.cos() };
                [r, radius * a.sin()]
            })
            .collect();
        ProfileGeometry::new(2, nodes, true, vec![])
    }

    #[test]
    fn circle_curvature() {
        let g = compute_geometry(&circle(2f64.sqrt(), 256)).unwrap();
        for k in &g.k1 {
            assert!((k - 0.5f64.sqrt()).abs() < 1e-4, "{k}");
        }
    }

    #[test]
    fn sphere_curvatures_and_normals() {
        let g = compute_geometry(&sphere(2.0, 256)).unwrap();
        for i in 0..256 {
            assert!((g.k1[i] - 0.5).abs() < 2e-4, "k1 {}", g.k1[i]);
            assert!((g.k2[i] - 0.5).abs() < 2e-4, "k2 {} at {i}", g.k2[i]);
            let (t, nu) = (g.tangent[i], g.normal[i]);
            assert!((t[0] * nu[0] + t[1] * nu[1]).abs() < 1e-14);
            assert!((nu[0].hypot(nu[1]) - 1.0).abs() < 1e-14);
            assert!(g.x_dot_nu[i] < 0.0);
        }
    }

    #[test]
    fn cylinder_curvatures() {
        let r = 2f64.sqrt();
        let nodes = (0..64).map(|i| [r, -4.0 + 8.0 * i as f64 / 63.0]).collect();
        let ends = vec![
            EndSpec { side: Side::Start, tag: EndTag::Truncated },
            EndSpec { side: Side::End, tag: EndTag::Truncated },
        ];
        let g = compute_geometry(&ProfileGeometry::new(2, nodes, false, ends)).unwrap();
        for i in 0..64 {
            assert!(g.k1[i].abs() < 1e-12);
            assert!((g.k2[i] - 1.0 / r).abs() < 1e-12);
            assert!((g.a2[i] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_weight_is_four_over_e() {
        let g = compute_geometry(&sphere(2.0, 512)).unwrap();
        let one = vec![1.0; 512];
        let v = weighted_inner(&one, &one, &g).unwrap();
        assert!((v - 4.0 / std::f64::consts::E).abs() < 1e-4, "{v}");
        assert_eq!(weighted_inner(&one, &vec![0.0; 512], &g).unwrap(), 0.0);
        assert!(weighted_inner(&one, &[1.0; 3], &g).is_err());
    }

    #[test]
    fn refine_halves_spacing_and_improves_h() {
        let p = sphere(2.0, 128);
        let q = refine(&p, 2).unwrap();
        assert_eq!(q.len(), 256);
        let hp = p.segment_lengths().into_iter().fold(0.0, f64::max);
        let hq = q.segment_lengths().into_iter().fold(0.0, f64::max);
        assert!((hq / hp - 0.5).abs() < 0.05);
        let err = |g: &GeometryFields| g.h.iter().map(|h| (h - 1.0).abs()).fold(0.0, f64::max);
        let e1 = err(&compute_geometry(&p).unwrap());
        let e2 = err(&compute_geometry(&q).unwrap());
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
        assert!(refine(&p, 1).is_err());
    }

    #[test]
    fn rejects_axis_node_in_interior() {
        let mut p = sphere(2.0, 32);
        p.nodes[10][0] = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_self_intersection() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, -1.0], [0.2, 2.0], [0.1, 3.0], [2.0, 3.0], [3.0, 3.0]];
        let ends = vec![
            EndSpec { side: Side::Start, tag: EndTag::Truncated },
            EndSpec { side: Side::End, tag: EndTag::Truncated },
        ];
        let p = ProfileGeometry::new(1, nodes, false, ends);
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut p = sphere(2.0, 64);
        p.orientation = -1.0;
        p.metadata.insert("model".into(), Value::from("sphere"));
        let text = serde_json::to_string(&p.to_json()).unwrap();
        let back = ProfileGeometry::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, p);
        let mut v = p.to_json();
        v["schema_version"] = Value::from(99);
        assert!(matches!(ProfileGeometry::from_json(&v), Err(LabError::Invalid(_))));
    }
}
