//! Model self-shrinkers, rotational shooting and residual certification.

use crate::error::{invalid, LabError, Result};
use crate::numerics::ode::{locate_event, Stepper, Tolerance};
use crate::surface::{
    compute_geometry_order, weighted_norm, EndSpec, EndTag, GeometryFields, ProfileGeometry, Side,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::{PI, SQRT_2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Sphere,
    Cylinder,
    Plane,
    Line,
    Circle,
    Torus,
    Conical,
    Custom,
}

impl std::str::FromStr for Model {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Model> {
        serde_json::from_value(Value::String(s.to_ascii_lowercase()))
            .map_err(|_| LabError::Invalid(format!("unknown model '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub radius: Option<f64>,
    /// Axial half length (cylinder), outer extent (plane, line) or outer |x| (conical).
    pub half_length: Option<f64>,
    /// Asymptotic r/z of a conical end.
    pub cone_slope: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_res: f64,
    /// Gaussian-weighted L² norm of the residual.
    pub l2_res: f64,
    pub tolerance: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EndClass {
    /// `slope` is the asymptotic r/z; `None` is the flat cone (r/z = ∞).
    Conical { slope: Option<f64> },
    Cylindrical { radius: f64 },
    Truncated { warning: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndReport {
    pub side: Side,
    pub class: EndClass,
}

#[derive(Clone, Debug)]
pub struct ShrinkerSurface {
    pub profile: ProfileGeometry,
    pub geom: GeometryFields,
    pub residual_report: ResidualReport,
    pub model: Model,
    pub end_classification: Vec<EndReport>,
}

/// Certificate threshold for shot and loaded profiles.
pub const CERTIFY_TOL: f64 = 1e-6;
/// Certificate threshold for exact models.
pub const EXACT_TOL: f64 = 1e-10;

impl ShrinkerSurface {
    fn assemble(profile: ProfileGeometry, geom: GeometryFields, model: Model, tol: f64) -> ShrinkerSurface {
        let res = geom.shrinker_residual();
        let max_res = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l2_res = weighted_norm(&res, &geom);
        let residual_report = ResidualReport { max_res, l2_res, tolerance: tol, certified: max_res <= tol };
        let end_classification = classify_ends(&profile);
        let mut s = ShrinkerSurface { profile, geom, residual_report, model, end_classification };
        s.stamp_metadata();
        s
    }

    fn stamp_metadata(&mut self) {
        let meta = &mut self.profile.metadata;
        meta.insert("model".into(), serde_json::to_value(self.model).unwrap());
        meta.insert("residual_report".into(), serde_json::to_value(self.residual_report).unwrap());
    }

    /// The same surface with the opposite unit normal.
    pub fn flipped(&self) -> ShrinkerSurface {
        let mut g = self.geom.clone();
        for v in [&mut g.k1, &mut g.k2, &mut g.dk1, &mut g.h, &mut g.x_dot_nu] {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        g.normal.iter_mut().for_each(|v| *v = [-v[0], -v[1]]);
        ShrinkerSurface { profile: self.profile.flipped(), geom: g, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.profile.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profile.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.profile.closed
    }

    pub fn residual(&self) -> Vec<f64> {
        self.geom.shrinker_residual()
    }
}

fn end(side: Side) -> EndSpec {
    EndSpec { side, tag: EndTag::Truncated }
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64> {
    let x = v.unwrap_or(default);
    if !(x.is_finite() && x > 0.0) {
        return invalid(format!("{name} must be positive, got {x}"));
    }
    Ok(x)
}

/// Exact or shot model shrinker with `node_count` profile nodes.
pub fn make_model(model: Model, params: ModelParams, node_count: usize) -> Result<ShrinkerSurface> {
    if node_count < 64 {
        return invalid(format!("node_count must be at least 64, got {node_count}"));
    }
    let n = node_count;
    let exact = |p: ProfileGeometry, t: Vec<[f64; 2]>, k: f64| -> Result<ShrinkerSurface> {
        p.validate()?;
        let g = GeometryFields::from_frames(&p, t, vec![k; n], vec![0.0; n]);
        Ok(ShrinkerSurface::assemble(p, g, model, EXACT_TOL))
    };
    match model {
        Model::Sphere | Model::Circle => {
            let default = if model == Model::Sphere { 2.0 } else { SQRT_2 };
            let rho = positive("radius", params.radius, default)?;
            let angles: Vec<f64> = if model == Model::Sphere {
                (0..n).map(|i| -PI / 2.0 + PI * i as f64 / (n - 1) as f64).collect()
            } else {
                (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
            };
            let nodes = angles
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let cap = model == Model::Sphere && (i == 0 || i == n - 1);
                    [if cap { 0.0 } else { rho * a.cos() }, rho * a.sin()]
                })
                .collect();
            let dim = if model == Model::Sphere { 2 } else { 1 };
            let t = angles.iter().map(|a| [-a.sin(), a.cos()]).collect();
            exact(ProfileGeometry::new(dim, nodes, true, vec![]), t, 1.0 / rho)
        }
        Model::Cylinder => {
            let rho = positive("radius", params.radius, SQRT_2)?;
            let zmax = positive("half_length", params.half_length, 6.0 * SQRT_2)?;
            let nodes = (0..n).map(|i| [rho, -zmax + 2.0 * zmax * i as f64 / (n - 1) as f64]).collect();
            let p = ProfileGeometry::new(2, nodes, false, vec![end(Side::Start), end(Side::End)]);
            exact(p, vec![[0.0, 1.0]; n], 0.0)
        }
        Model::Plane => {
            let ext = positive("half_length", params.half_length, 8.0)?;
            let nodes = (0..n).map(|i| [ext * i as f64 / (n - 1) as f64, 0.0]).collect();
            let p = ProfileGeometry::new(2, nodes, false, vec![end(Side::End)]);
            exact(p, vec![[1.0, 0.0]; n], 0.0)
        }
        Model::Line => {
            let ext = positive("half_length", params.half_length, 8.0)?;
            let nodes = (0..n).map(|i| [-ext + 2.0 * ext * i as f64 / (n - 1) as f64, 0.0]).collect();
            let p = ProfileGeometry::new(1, nodes, false, vec![end(Side::Start), end(Side::End)]);
            exact(p, vec![[1.0, 0.0]; n], 0.0)
        }
        Model::Torus => {
            let (p, _) = angenent_torus(n, 1e-12)?;
            certify_as(p, Model::Torus)
        }
        Model::Conical => {
            let slope = positive("cone_slope", params.cone_slope, 1.0)?;
            let outer = positive("half_length", params.half_length, 12.0)?;
            let (p, _) = conical_profile(slope, outer, CONE_INNER, n, 1e-12)?;
            certify_as(p, Model::Conical)
        }
        Model::Custom => invalid("custom profiles are certified, not constructed"),
    }
}

/// Inner truncation radius |x| of shot conical profiles.
pub const CONE_INNER: f64 = 2.0;

/// Certify an arbitrary profile with sixth-order stencils.
pub fn certify(profile: &ProfileGeometry) -> Result<ShrinkerSurface> {
    let model = profile
        .metadata
        .get("model")
        .and_then(|v| serde_json::from_value::<Model>(v.clone()).ok())
        .unwrap_or(Model::Custom);
    certify_as(profile.clone(), model)
}

fn certify_as(profile: ProfileGeometry, model: Model) -> Result<ShrinkerSurface> {
    let g = compute_geometry_order(&profile, 6)?;
    Ok(ShrinkerSurface::assemble(profile, g, model, CERTIFY_TOL))
}

/// Total-least-squares line through points: (centroid, unit direction, rms distance).
fn tls_line(pts: &[[f64; 2]]) -> ([f64; 2], [f64; 2], f64) {
    let m = pts.len() as f64;
    let c = [pts.iter().map(|p| p[0]).sum::<f64>() / m, pts.iter().map(|p| p[1]).sum::<f64>() / m];
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let ang = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let d = [ang.cos(), ang.sin()];
    let rms = (pts.iter().map(|p| ((p[0] - c[0]) * d[1] - (p[1] - c[1]) * d[0]).powi(2)).sum::<f64>() / m).sqrt();
    (c, d, rms)
}

/// Classify each truncated end from a line fit over its outer quarter of arclength.
pub fn classify_ends(p: &ProfileGeometry) -> Vec<EndReport> {
    let (t, _) = p.chord_parameter();
    let total = *t.last().unwrap();
    p.ends
        .iter()
        .map(|e| {
            let window: Vec<[f64; 2]> = (0..p.len())
                .filter(|&i| match e.side {
                    Side::Start => t[i] <= 0.25 * total,
                    Side::End => t[i] >= 0.75 * total,
                })
                .map(|i| p.nodes[i])
                .collect();
            EndReport { side: e.side, class: classify_window(&window) }
        })
        .collect()
}

fn classify_window(pts: &[[f64; 2]]) -> EndClass {
    if pts.len() < 3 {
        return EndClass::Truncated { warning: "too few nodes in the end window".into() };
    }
    let (c, d, rms) = tls_line(pts);
    let scale = pts.iter().map(|p| p[0].hypot(p[1])).sum::<f64>() / pts.len() as f64;
    let straight = rms <= 1e-3 * scale.max(1.0);
    let axial = straight && d[0].abs() <= 1e-3;
    let through_origin = straight && (c[0] * d[1] - c[1] * d[0]).abs() <= 0.05 * scale;
    match (axial, through_origin) {
        (true, true) => EndClass::Truncated { warning: "cylindrical and conical fits both accepted".into() },
        (true, false) => EndClass::Cylindrical { radius: c[0] },
        (false, true) => {
            let slope = if d[1].abs() <= 1e-12 { None } else { Some((d[0] / d[1]).abs()) };
            EndClass::Conical { slope }
        }
        (false, false) => EndClass::Truncated { warning: "no asymptotic model fits the end".into() },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Integrate a fixed arclength.
    ArcLength(f64),
    /// First crossing of z = 0 going downward, within a maximal arclength.
    DownwardAxisPlane(f64),
    /// First time |x| drops to the given radius, within a maximal arclength.
    NormReaches { radius: f64, max_len: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Stop,
    AxisCap,
    ClosureGap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootEvent {
    pub kind: EventKind,
    /// Arclength at the event (closure events store the gap here).
    pub s: f64,
    pub state: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingState {
    /// Hypersurface dimension: 1 for planar curves, 2 for rotational surfaces.
    pub n: usize,
    pub r0: f64,
    pub z0: f64,
    pub theta0: f64,
    pub tol: f64,
    pub stop: StopRule,
    pub node_count: usize,
    #[serde(default)]
    pub events: Vec<ShootEvent>,
}

/// Arclength form of H + ½x·ν = 0 with T = (cos θ, sin θ).
fn shrinker_rhs(n: usize) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    move |_s, y| {
        let (r, z, th) = (y[0], y[1], y[2]);
        let (s, c) = th.sin_cos();
        let turn = 0.5 * (r * s - z * c) - if n == 2 { s / r } else { 0.0 };
        [c, s, turn]
    }
}

const AXIS_FLOOR: f64 = 1e-4;

fn new_stepper(tol: f64) -> Stepper {
    Stepper::new(Tolerance::uniform(tol), 1e-3, 0.05)
}

/// First pass: find the stopping arclength and state.
fn find_stop(st: &ShootingState) -> Result<(f64, [f64; 3], EventKind)> {
    let f = shrinker_rhs(st.n);
    let y0 = [st.r0, st.z0, st.theta0];
    let (max_len, g): (f64, Box<dyn Fn(&[f64; 3]) -> f64>) = match st.stop {
        StopRule::ArcLength(l) => (l, Box::new(|_: &[f64; 3]| 1.0)),
        StopRule::DownwardAxisPlane(l) => (l, Box::new(|y: &[f64; 3]| y[1])),
        StopRule::NormReaches { radius, max_len } => (max_len, Box::new(move |y: &[f64; 3]| y[0].hypot(y[1]) - radius)),
    };
    let mut stepper = new_stepper(st.tol);
    let (mut s, mut y) = (0.0, y0);
    while s < max_len {
        let (s1, y1, h) = stepper.advance(&f, s, &y, max_len)?;
        let crossed = match st.stop {
            StopRule::ArcLength(_) => false,
            StopRule::DownwardAxisPlane(_) => y[1] >= 0.0 && y1[1] < 0.0,
            StopRule::NormReaches { .. } => g(&y) > 0.0 && g(&y1) <= 0.0,
        };
        if crossed {
            let (hs, ys) = locate_event(&f, &|v: &[f64; 3]| g(v), s, &y, h, 1e-15);
            return Ok((s + hs, ys, EventKind::Stop));
        }
        if st.n == 2 && y1[0] <= AXIS_FLOOR {
            if y1[2].sin().abs() > 1e-2 {
                return Err(LabError::NonConvergence(format!(
                    "trajectory hit the axis transversally at s = {s1:.6}"
                )));
            }
            return Ok((s1, y1, EventKind::AxisCap));
        }
        s = s1;
        y = y1;
    }
    Ok((s, y, EventKind::Stop))
}

/// Integrate to each requested arclength in increasing order.
fn sample(st: &ShootingState, targets: &[f64]) -> Result<Vec<[f64; 3]>> {
    let f = shrinker_rhs(st.n);
    let mut stepper = new_stepper(st.tol);
    let (mut s, mut y) = (0.0, [st.r0, st.z0, st.theta0]);
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        while s < target {
            let (s1, y1, _) = stepper.advance(&f, s, &y, target)?;
            s = s1;
            y = y1;
        }
        out.push(y);
    }
    Ok(out)
}

fn validate_state(st: &ShootingState) -> Result<()> {
    if st.n != 1 && st.n != 2 {
        return invalid(format!("dimension must be 1 or 2, got {}", st.n));
    }
    if st.n == 2 && !(st.r0 > 0.0) {
        return invalid(format!("r0 must be positive, got {}", st.r0));
    }
    if !(st.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    if st.node_count < 8 {
        return invalid("node_count must be at least 8");
    }
    Ok(())
}

/// Trace the shrinker ODE from the shooting state and resample at uniform
/// arclength. The returned profile is open with truncated ends; the state's
/// event log is extended.
pub fn shoot_rotational(st: &mut ShootingState) -> Result<ProfileGeometry> {
    validate_state(st)?;
    let (len, y_end, kind) = find_stop(st)?;
    st.events.push(ShootEvent { kind, s: len, state: y_end });
    let m = st.node_count;
    let targets: Vec<f64> = (0..m).map(|k| len * k as f64 / (m - 1) as f64).collect();
    let samples = sample(st, &targets)?;
    let mut nodes: Vec<[f64; 2]> = samples.iter().map(|y| [y[0], y[1]]).collect();
    nodes[m - 1] = [y_end[0], y_end[1]];
    let mut ends = vec![end(Side::Start), end(Side::End)];
    if kind == EventKind::AxisCap {
        nodes[m - 1][0] = 0.0;
        ends.pop();
    }
    let mut p = ProfileGeometry::new(st.n, nodes, false, ends);
    p.metadata.insert("shooting".into(), serde_json::to_value(&*st).unwrap());
    Ok(p)
}

/// Angenent torus: bisection on the outer z = 0 crossing so that the first
/// downward crossing is perpendicular, then one full loop resampled.
pub fn angenent_torus(node_count: usize, tol: f64) -> Result<(ProfileGeometry, ShootingState)> {
    let state = |r0: f64| ShootingState {
        n: 2,
        r0,
        z0: 0.0,
        theta0: PI / 2.0,
        tol,
        stop: StopRule::DownwardAxisPlane(20.0),
        node_count,
        events: vec![],
    };
    let miss = |r0: f64| -> Result<(f64, f64)> {
        let (s, y, _) = find_stop(&state(r0))?;
        Ok((y[2].cos(), s))
    };
    let mut lo = 2.5;
    let mut f_lo = miss(lo)?.0;
    let mut hi = f64::NAN;
    let mut r = lo;
    while r < 4.5 {
        r += 0.1;
        let f = miss(r)?.0;
        if (f > 0.0) != (f_lo > 0.0) {
            hi = r;
            break;
        }
        lo = r;
        f_lo = f;
    }
    if hi.is_nan() {
        return Err(LabError::NonConvergence("no torus bracket found for r0 in [2.5, 4.5]".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f = miss(mid)?.0;
        if (f > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
        }
    }
    let r0 = 0.5 * (lo + hi);
    let mut st = state(r0);
    let (half, y_half, _) = find_stop(&st)?;
    st.events.push(ShootEvent { kind: EventKind::Stop, s: half, state: y_half });
    let period = 2.0 * half;
    let mut targets: Vec<f64> = (0..node_count).map(|k| period * k as f64 / node_count as f64).collect();
    targets.push(period);
    let samples = sample(&st, &targets)?;
    let last = samples[node_count];
    let gap = (last[0] - r0).hypot(last[1]).max((last[2] - st.theta0 - 2.0 * PI).abs());
    st.events.push(ShootEvent { kind: EventKind::ClosureGap, s: gap, state: last });
    if gap > 1e-8 {
        return Err(LabError::NonConvergence(format!("torus closure gap {gap:e} exceeds 1e-8")));
    }
    let nodes = samples[..node_count].iter().map(|y| [y[0], y[1]]).collect();
    let mut p = ProfileGeometry::new(2, nodes, true, vec![]);
    p.metadata.insert("shooting".into(), serde_json::to_value(&st).unwrap());
    p.metadata.insert("closure_gap".into(), Value::from(gap));
    Ok((p, st))
}

/// Asymptotically conical profile: shot inward from |x| = `outer` along the
/// ray with r/z = `slope` and stopped at |x| = `inner`, then reordered so the
/// conical end is last. Forward shooting outward amplifies errors like
/// e^{|x|²/4}, while the inward direction damps them.
pub fn conical_profile(
    slope: f64,
    outer: f64,
    inner: f64,
    node_count: usize,
    tol: f64,
) -> Result<(ProfileGeometry, ShootingState)> {
    if !(outer > inner && inner > 0.0) {
        return invalid("conical profile needs outer > inner > 0");
    }
    let a = slope.atan2(1.0);
    let (r0, z0) = (outer * a.sin(), outer * a.cos());
    let mut st = ShootingState {
        n: 2,
        r0,
        z0,
        theta0: z0.atan2(r0) + PI,
        tol,
        stop: StopRule::NormReaches { radius: inner, max_len: 4.0 * outer },
        node_count,
        events: vec![],
    };
    let p = shoot_rotational(&mut st)?;
    let mut nodes = p.nodes.clone();
    nodes.reverse();
    let mut q = ProfileGeometry::new(2, nodes, false, vec![end(Side::Start), end(Side::End)]);
    q.metadata = p.metadata;
    Ok((q, st))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_models_have_roundoff_residual() {
        for m in [Model::Sphere, Model::Cylinder, Model::Plane, Model::Line, Model::Circle] {
            let s = make_model(m, ModelParams::default(), 512).unwrap();
            assert!(s.residual_report.max_res <= 1e-10, "{m:?} {}", s.residual_report.max_res);
            assert!(s.residual_report.certified);
        }
    }

    #[test]
    fn off_radius_sphere_residual() {
        let p = ModelParams { radius: Some(2.1), ..Default::default() };
        let s = make_model(Model::Sphere, p, 256).unwrap();
        assert!((s.residual_report.max_res - (2.0 / 2.1 - 1.05f64).abs()).abs() < 1e-6);
        assert!(!s.residual_report.certified);
    }

    #[test]
    fn model_parameter_errors() {
        assert!(make_model(Model::Sphere, ModelParams { radius: Some(-1.0), ..Default::default() }, 128).is_err());
        assert!(make_model(Model::Sphere, ModelParams::default(), 32).is_err());
        assert!("hyperboloid".parse::<Model>().is_err());
        assert_eq!("Torus".parse::<Model>().unwrap(), Model::Torus);
    }

    #[test]
    fn end_classes_of_exact_models() {
        let c = make_model(Model::Cylinder, ModelParams::default(), 256).unwrap();
        for e in &c.end_classification {
            match e.class {
                EndClass::Cylindrical { radius } => assert!((radius - SQRT_2).abs() < 1e-8),
                ref other => panic!("{other:?}"),
            }
        }
        let p = make_model(Model::Plane, ModelParams::default(), 256).unwrap();
        assert_eq!(p.end_classification.len(), 1);
        assert_eq!(p.end_classification[0].class, EndClass::Conical { slope: None });
    }

    #[test]
    fn shooting_on_the_sphere_stays_on_the_circle() {
        let mut st = ShootingState {
            n: 2,
            r0: 2.0,
            z0: 0.0,
            theta0: PI / 2.0,
            tol: 1e-12,
            stop: StopRule::ArcLength(2.5),
            node_count: 200,
            events: vec![],
        };
        let p = shoot_rotational(&mut st).unwrap();
        for x in &p.nodes {
            assert!((x[0].hypot(x[1]) - 2.0).abs() < 1e-8);
        }
        let again = shoot_rotational(&mut st.clone()).unwrap();
        assert_eq!(p.nodes, again.nodes);
    }

    #[test]
    fn transversal_axis_hit_is_reported() {
        let mut st = ShootingState {
            n: 2,
            r0: 5e-5,
            z0: 0.0,
            theta0: PI + 1.0,
            tol: 1e-10,
            stop: StopRule::ArcLength(5.0),
            node_count: 64,
            events: vec![],
        };
        assert!(matches!(shoot_rotational(&mut st), Err(LabError::NonConvergence(_))));
    }

    #[test]
    fn flipping_keeps_residual_and_negates_curvature() {
        let s = make_model(Model::Sphere, ModelParams::default(), 128).unwrap();
        let f = s.flipped();
        assert!(f.residual().iter().all(|v| v.abs() < 1e-12));
        assert!((f.geom.h[10] + 1.0).abs() < 1e-12);
        assert_eq!(f.profile.orientation, -1.0);
    }
}

#[cfg(test)]
mod shot_tests {
    use super::*;

    #[test]
    fn torus_closes_and_certifies() {
        let s = make_model(Model::Torus, ModelParams::default(), 512).unwrap();
        let gap = s.profile.metadata["closure_gap"].as_f64().unwrap();
        assert!(gap <= 1e-8, "gap {gap}");
        assert!(s.residual_report.max_res <= 1e-6, "res {}", s.residual_report.max_res);
        let outer = s.profile.nodes[0][0];
        // frozen scipy DOP853 oracle
        assert!((outer - 3.314708266553944).abs() < 1e-8, "{outer}");
    }

    #[test]
    fn conical_end_is_classified_and_reproducible() {
        let slope_at = |tol: f64| {
            let (p, _) = conical_profile(1.0, 12.0, CONE_INNER, 512, tol).unwrap();
            let s = certify(&p).unwrap();
            assert!(s.residual_report.max_res <= 1e-6, "res {}", s.residual_report.max_res);
            match &s.end_classification.iter().find(|e| e.side == Side::End).unwrap().class {
                EndClass::Conical { slope: Some(k) } => *k,
                other => panic!("{other:?}"),
            }
        };
        let (a, b) = (slope_at(1e-8), slope_at(1e-10));
        assert!((a - b).abs() < 1e-3, "{a} {b}");
    }
}
