//! Rotationally symmetric translators H + ½ω^⊥ + λe^⊥ = 0 bounded by a
//! horizontal circle, where ω is the horizontal position and e = e_z.
//!
//! With profile angle θ (tangent (cos θ, sin θ) in the (r, z) half plane)
//! and normal ν = (−sin θ, cos θ), the equation becomes
//!
//! ```text
//! θ' = −sin θ / r + ½ r sin θ − λ cos θ,   r' = cos θ,   z' = sin θ
//! ```
//!
//! in arclength. The axis start has θ(0) = 0 and θ'(0) = −λ/2. z does not
//! feed back, so the boundary height is fixed by a final shift.

use super::circle_ground_value;
use crate::error::{invalid, LabError, Result};
use crate::numerics::ode::{locate_event, Stepper, Tolerance};
use crate::surface::{compute_geometry_order, EndSpec, EndTag, ProfileGeometry, Side};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Translator {
    pub lambda: f64,
    pub delta: f64,
    /// Boundary circle radius √2 − δφ̂.
    pub r_delta: f64,
    /// Height of the axis point above the boundary plane.
    pub height: f64,
    pub arclength: f64,
    /// Profile from the axis (node 0) to the boundary circle, z(boundary) = 0.
    pub nodes: Vec<[f64; 2]>,
    /// Max |H + ½ω·ν + λ e·ν| from sixth-order geometry.
    pub certificate: f64,
}

impl Translator {
    pub fn profile(&self) -> ProfileGeometry {
        ProfileGeometry::new(2, self.nodes.clone(), false, vec![EndSpec { side: Side::End, tag: EndTag::Truncated }])
    }
}

/// State (r, z, θ, s, ∫|θ'|ds).
type Y = [f64; 5];

fn rhs(lambda: f64) -> impl Fn(f64, &Y) -> Y {
    move |_s, y| {
        let (r, th) = (y[0], y[2]);
        let rot = if r > 0.0 { th.sin() / r } else { -lambda / 2.0 };
        let dth = -rot + 0.5 * r * th.sin() - lambda * th.cos();
        [th.cos(), th.sin(), dth, 1.0, dth.abs()]
    }
}

/// Series start a short arclength off the axis.
fn start(lambda: f64) -> (f64, Y) {
    let s0 = 1e-4 / (1.0 + lambda);
    let k = -lambda / 2.0;
    (s0, [s0 - k * k * s0.powi(3) / 6.0, 0.5 * k * s0 * s0, k * s0, s0, -k * s0])
}

/// Residual of the translator equation from profile geometry, per node.
pub fn translator_residual(p: &ProfileGeometry, lambda: f64, order: usize) -> Result<Vec<f64>> {
    let g = compute_geometry_order(p, order)?;
    Ok((0..p.len())
        .map(|i| g.h[i] + 0.5 * p.nodes[i][0] * g.normal[i][0] + lambda * g.normal[i][1])
        .collect())
}

/// Shoot the translator from the axis to the circle of radius √2 − δφ̂.
/// Nodes equidistribute s + A·∫|θ'|ds with A = length / total turning, so
/// the highly curved cap (width about 2/λ) receives half of them.
pub fn translator_solve(lambda: f64, delta: f64, node_count: usize, tol: f64) -> Result<Translator> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    let r_delta = SQRT_2 - delta * circle_ground_value();
    if !(delta > 0.0 && r_delta > 0.1) {
        return invalid(format!("delta must lie in (0, {:.3})", (SQRT_2 - 0.1) / circle_ground_value()));
    }
    if node_count < 16 {
        return invalid("node_count must be at least 16");
    }
    let f = rhs(lambda);
    let tolerance = Tolerance::uniform(tol);
    let (s0, y0) = start(lambda);
    let max_len = 20.0 * (1.0 + lambda);
    let mut stepper = Stepper::new(tolerance, s0, 0.05);
    let (mut s, mut y) = (s0, y0);
    let (len, y_end) = loop {
        if s >= max_len {
            return Err(LabError::NonConvergence("translator never reached the boundary circle".into()));
        }
        let (s1, y1, h) = stepper.advance(&f, s, &y, max_len)?;
        if y1[2] <= -PI / 2.0 || y1[2] >= PI / 2.0 {
            return Err(LabError::NonConvergence(format!("profile stopped being a graph at s = {s1:.4}")));
        }
        if y1[0] >= r_delta {
            let (hs, ys) = locate_event(&f, &|v: &Y| v[0] - r_delta, s, &y, h, 1e-15);
            break (s + hs, ys);
        }
        s = s1;
        y = y1;
    };
    let scale = len / y_end[4];
    let monitor = |v: &Y| v[3] + scale * v[4];
    let total = monitor(&y_end);
    let mut stepper = Stepper::new(tolerance, s0, 0.05);
    let (mut s, mut y) = (s0, y0);
    let mut raw = vec![[0.0, 0.0]];
    let mut k = 1;
    while k < node_count - 1 {
        let (s1, y1, h) = stepper.advance(&f, s, &y, len)?;
        while k < node_count - 1 {
            let target = total * k as f64 / (node_count - 1) as f64;
            if monitor(&y1) < target {
                break;
            }
            let (_, ys) = locate_event(&f, &|v: &Y| monitor(v) - target, s, &y, h, 1e-15);
            raw.push([ys[0], ys[1]]);
            k += 1;
        }
        s = s1;
        y = y1;
    }
    raw.push([y_end[0], y_end[1]]);
    let shift = raw[node_count - 1][1];
    let nodes: Vec<[f64; 2]> = raw.iter().map(|p| [p[0], p[1] - shift]).collect();
    let mut t = Translator { lambda, delta, r_delta, height: -shift, arclength: len, nodes, certificate: 0.0 };
    let p = t.profile();
    p.validate()?;
    let res = translator_residual(&p, lambda, 6)?;
    t.certificate = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub a: f64,
    pub b: f64,
    /// ∫_{Γ∩{a≤z≤b}} e^{−f}.
    pub band_area: f64,
    /// ∫_Γ |e^⊥|² e^{−f}.
    pub normal_energy: f64,
    /// ∫_{∂Γ} e^{−f}.
    pub boundary_mass: f64,
    pub area_bound: f64,
    pub energy_bound: f64,
    pub area_slack: f64,
    pub energy_slack: f64,
    pub pass: bool,
}

/// Weight e^{−f} with f = |ω|²/4 (the common (4π) factor cancels).
fn weight(r: f64) -> f64 {
    (-r * r / 4.0).exp()
}

/// Both weighted area inequalities on a solved translator. Quadrature is the
/// midpoint rule on chords; a chord contributes the part of its height range
/// inside [a, b].
pub fn translator_area_check(t: &Translator, a: f64, b: f64) -> Result<AreaReport> {
    if !(a >= 0.0 && b >= a) {
        return invalid("need 0 <= a <= b");
    }
    let (mut band, mut energy) = (0.0, 0.0);
    for w in t.nodes.windows(2) {
        let (p, q) = (w[0], w[1]);
        let ds = (q[0] - p[0]).hypot(q[1] - p[1]);
        let rm = 0.5 * (p[0] + q[0]);
        let dens = 2.0 * PI * rm * weight(rm) * ds;
        let nz = (q[0] - p[0]) / ds;
        energy += dens * nz * nz;
        let (zl, zh) = (p[1].min(q[1]), p[1].max(q[1]));
        let frac = if zh > zl {
            ((zh.min(b) - zl.max(a)) / (zh - zl)).max(0.0)
        } else if zl >= a && zl <= b && b > a {
            1.0
        } else {
            0.0
        };
        band += dens * frac;
    }
    let boundary = 2.0 * PI * t.r_delta * weight(t.r_delta);
    let area_bound = (b - a + 1.0 / t.lambda) * boundary;
    let energy_bound = boundary / t.lambda;
    Ok(AreaReport {
        a,
        b,
        band_area: band,
        normal_energy: energy,
        boundary_mass: boundary,
        area_bound,
        energy_bound,
        area_slack: area_bound - band,
        energy_slack: energy_bound - energy,
        pass: band <= area_bound && energy <= energy_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub window: (f64, f64),
    /// Max relative deviation of λ dr/dz from r/2 − 1/r.
    pub max_relative_error: f64,
    pub samples: usize,
}

/// Centered finite differences of r(z) along the profile against the
/// rescaled circle flow r/2 − 1/r, on the heights between `lo` and `hi` as
/// fractions of the total height.
pub fn level_set_check(t: &Translator, lo: f64, hi: f64) -> Result<LevelSetReport> {
    let (zl, zh) = (lo * t.height, hi * t.height);
    let mut worst = 0.0f64;
    let mut count = 0;
    for w in t.nodes.windows(3) {
        let z = w[1][1];
        if z < zl || z > zh {
            continue;
        }
        let drdz = (w[2][0] - w[0][0]) / (w[2][1] - w[0][1]);
        let r = w[1][0];
        let target = r / 2.0 - 1.0 / r;
        worst = worst.max((t.lambda * drdz - target).abs() / target.abs());
        count += 1;
    }
    if count == 0 {
        return invalid("no nodes in the height window");
    }
    Ok(LevelSetReport { window: (zl, zh), max_relative_error: worst, samples: count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_and_graphicality() {
        let t = translator_solve(10.0, 0.05, 512, 1e-12).unwrap();
        assert!(t.certificate <= 1e-6, "{}", t.certificate);
        assert!(t.nodes.windows(2).all(|w| w[1][0] > w[0][0]));
        assert!((t.nodes.last().unwrap()[0] - t.r_delta).abs() < 1e-9);
    }

    #[test]
    fn second_order_residual_converges() {
        let max = |n: usize| {
            let t = translator_solve(10.0, 0.05, n, 1e-12).unwrap();
            let r = translator_residual(&t.profile(), 10.0, 2).unwrap();
            r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let (a, b) = (max(256), max(512));
        assert!((a / b).log2() >= 1.9, "{a} {b}");
    }

    #[test]
    fn weighted_area_inequalities() {
        let t = translator_solve(10.0, 0.05, 512, 1e-12).unwrap();
        let rep = translator_area_check(&t, 0.0, t.height).unwrap();
        assert!(rep.pass && rep.area_slack > 0.0 && rep.energy_slack > 0.0);
        let flat = translator_area_check(&t, 0.3, 0.3).unwrap();
        assert_eq!(flat.band_area, 0.0);
        let t2 = translator_solve(20.0, 0.05, 512, 1e-12).unwrap();
        let rep2 = translator_area_check(&t2, 0.0, t2.height).unwrap();
        assert!((rep2.energy_bound / rep.energy_bound - 0.5).abs() < 1e-12);
        assert!(rep2.normal_energy <= rep.normal_energy);
    }

    #[test]
    fn large_lambda_follows_circle_flow() {
        let t = translator_solve(50.0, 0.05, 2048, 1e-12).unwrap();
        let rep = level_set_check(&t, 0.25, 0.75).unwrap();
        assert!(rep.max_relative_error <= 0.05, "{}", rep.max_relative_error);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(translator_solve(0.0, 0.05, 64, 1e-10).is_err());
        assert!(translator_solve(10.0, 0.0, 64, 1e-10).is_err());
        assert!(translator_solve(10.0, 5.0, 64, 1e-10).is_err());
    }
}
