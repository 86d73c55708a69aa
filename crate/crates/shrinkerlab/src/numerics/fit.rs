//! Least-squares fits used by decay and rate diagnostics.

use nalgebra::{DMatrix, DVector};

/// Straight-line fit y = a + b x.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Two standard errors of the slope.
    pub slope_halfwidth: f64,
    pub rms: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = (n - 2.0).max(1.0);
    let se = (ss / dof / sxx).sqrt();
    LineFit { intercept, slope, slope_halfwidth: 2.0 * se, rms: (ss / n).sqrt() }
}

/// Linear least squares with an arbitrary design matrix (columns = basis).
pub fn lstsq(columns: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let m = y.len();
    let k = columns.len();
    let a = DMatrix::from_fn(m, k, |i, j| columns[j][i]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-14).expect("svd solve");
    let r = &a * &coef - b;
    (coef.iter().cloned().collect(), r.norm() / (m as f64).sqrt())
}

/// Fit y ≈ c0 + c1 e^{k x} over k in [k_lo, k_hi]; returns (k, c0, c1, rms).
pub fn offset_exponential_fit(x: &[f64], y: &[f64], k_lo: f64, k_hi: f64) -> (f64, f64, f64, f64) {
    let eval = |k: f64| {
        let e: Vec<f64> = x.iter().map(|v| (k * v).exp()).collect();
        let ones = vec![1.0; x.len()];
        let (c, rms) = lstsq(&[ones, e], y);
        (rms, c[0], c[1])
    };
    let mut best = (f64::INFINITY, k_lo);
    let steps = 200;
    for i in 0..=steps {
        let k = k_lo + (k_hi - k_lo) * i as f64 / steps as f64;
        let r = eval(k).0;
        if r < best.0 {
            best = (r, k);
        }
    }
    // golden-section refinement around the coarse minimum
    let h = (k_hi - k_lo) / steps as f64;
    let (mut a, mut b) = ((best.1 - h).max(k_lo), (best.1 + h).min(k_hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if eval(c).0 < eval(d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let k = 0.5 * (a + b);
    let (rms, c0, c1) = eval(k);
    (k, c0, c1, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = line_fit(&x, &y);
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn offset_exponential_recovers_rate() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 - 0.01 * (1.7 * v).exp()).collect();
        let (k, c0, c1, _) = offset_exponential_fit(&x, &y, 0.1, 5.0);
        assert!((k - 1.7).abs() < 1e-6, "{k}");
        assert!((c0 - 0.3).abs() < 1e-8 && (c1 + 0.01).abs() < 1e-8);
    }
}
