//! Dormand–Prince 5(4) with adaptive step control.

use crate::error::{LabError, Result};

pub type State<const D: usize> = [f64; D];

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One DOPRI5 step; returns the fifth-order solution and the embedded error.
pub fn dopri_step<const D: usize, F>(f: &F, t: f64, y: &State<D>, h: f64) -> (State<D>, State<D>)
where
    F: Fn(f64, &State<D>) -> State<D>,
{
    let mut k = [[0.0; D]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for d in 0..D {
                    ys[d] += h * a * kj[d];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; D];
    for s in 0..7 {
        for d in 0..D {
            y5[d] += h * B5[s] * k[s][d];
            err[d] += h * (B5[s] - B4[s]) * k[s][d];
        }
    }
    (y5, err)
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Tolerance { rtol: tol, atol: tol }
    }
}

/// Adaptive stepper. Steps are accepted when the scaled embedded error is at
/// most one.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub tol: Tolerance,
    pub h: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl Stepper {
    pub fn new(tol: Tolerance, h0: f64, h_max: f64) -> Self {
        Stepper { tol, h: h0, h_max, h_min: 1e-14, accepted: 0, rejected: 0 }
    }

    /// Take one accepted step, never beyond `t_stop`. Returns (t_new, y_new, h_used).
    pub fn advance<const D: usize, F>(
        &mut self,
        f: &F,
        t: f64,
        y: &State<D>,
        t_stop: f64,
    ) -> Result<(f64, State<D>, f64)>
    where
        F: Fn(f64, &State<D>) -> State<D>,
    {
        loop {
            let mut h = self.h.min(self.h_max);
            let clipped = t + h >= t_stop;
            if clipped {
                h = t_stop - t;
            }
            if h < self.h_min {
                return Err(LabError::NonConvergence(format!("step size underflow at t = {t}")));
            }
            let (y5, err) = dopri_step(f, t, y, h);
            let mut e2 = 0.0;
            for d in 0..D {
                let sc = self.tol.atol + self.tol.rtol * y[d].abs().max(y5[d].abs());
                e2 += (err[d] / sc).powi(2);
            }
            let e = (e2 / D as f64).sqrt();
            if !e.is_finite() {
                self.h *= 0.25;
                self.rejected += 1;
                continue;
            }
            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            if e <= 1.0 {
                self.accepted += 1;
                if !clipped || fac < 1.0 {
                    self.h = (h * fac).min(self.h_max);
                }
                return Ok((t + h, y5, h));
            }
            self.rejected += 1;
            self.h = h * fac.min(0.9);
        }
    }
}

/// Locate a sign change of `g` inside an accepted step starting at (t, y),
/// by bisection on sub-step length. Returns (h*, y(t + h*)).
pub fn locate_event<const D: usize, F, G>(
    f: &F,
    g: &G,
    t: f64,
    y: &State<D>,
    h: f64,
    tol: f64,
) -> (f64, State<D>)
where
    F: Fn(f64, &State<D>) -> State<D>,
    G: Fn(&State<D>) -> f64,
{
    let g0 = g(y);
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (ym, _) = dopri_step(f, t, y, mid);
        let gm = g(&ym);
        if gm == 0.0 {
            return (mid, ym);
        }
        if (gm > 0.0) == (g0 > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol {
            break;
        }
    }
    let hstar = 0.5 * (lo + hi);
    let (ys, _) = dopri_step(f, t, y, hstar);
    (hstar, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_t: f64, y: &State<2>| [y[1], -y[0]];
        let mut st = Stepper::new(Tolerance::uniform(1e-12), 1e-3, 0.1);
        let (mut t, mut y) = (0.0, [1.0, 0.0]);
        let end = std::f64::consts::TAU;
        while t < end {
            let (tn, yn, _) = st.advance(&f, t, &y, end).unwrap();
            t = tn;
            y = yn;
        }
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }

    #[test]
    fn event_is_located_precisely() {
        let f = |_t: f64, y: &State<2>| [y[1], -y[0]];
        let (h, y) = locate_event(&f, &|y: &State<2>| y[0], 1.5, &[1.5f64.cos(), -1.5f64.sin()], 0.1, 1e-15);
        assert!((1.5 + h - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!(y[0].abs() < 1e-9);
    }
}
