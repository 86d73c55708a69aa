//! Tridiagonal and cyclic tridiagonal matrices: solves, inertia counts and
//! lowest eigenpairs of the symmetric case.

use crate::error::{LabError, Result};

/// Tridiagonal matrix with optional corner entries closing it into a cycle.
/// Row i holds `lower[i-1]` (for i > 0), `diag[i]`, `upper[i]` (for i < n-1).
#[derive(Clone, Debug)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    /// (A[n-1][0], A[0][n-1]) for cyclic matrices.
    pub corner: Option<(f64, f64)>,
}

/// Bordered LU factorization without pivoting.
#[derive(Clone, Debug)]
pub struct TriFactor {
    n: usize,
    m: usize,
    l: Vec<f64>,
    p: Vec<f64>,
    upper: Vec<f64>,
    // bordered part, used only for cyclic matrices
    tb: Vec<f64>,
    c: Vec<f64>,
    schur: f64,
    cyclic: bool,
}

const TINY: f64 = 1e-290;

fn guard(p: f64) -> f64 {
    if p.abs() < TINY {
        -TINY
    } else {
        p
    }
}

impl Tridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn symmetric(diag: Vec<f64>, off: Vec<f64>, corner: Option<f64>) -> Tridiag {
        Tridiag { lower: off.clone(), diag, upper: off, corner: corner.map(|c| (c, c)) }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
        if let Some((lo, hi)) = self.corner {
            y[n - 1] += lo * x[0];
            y[0] += hi * x[n - 1];
        }
        y
    }

    /// Factor `self - shift * I`.
    pub fn factor(&self, shift: f64) -> TriFactor {
        let n = self.len();
        let cyclic = self.corner.is_some() && n >= 3;
        let m = if cyclic { n - 1 } else { n };
        let mut l = vec![0.0; m];
        let mut p = vec![0.0; m];
        p[0] = guard(self.diag[0] - shift);
        for i in 1..m {
            l[i] = self.lower[i - 1] / p[i - 1];
            p[i] = guard(self.diag[i] - shift - l[i] * self.upper[i - 1]);
        }
        let upper: Vec<f64> = self.upper.iter().take(m.saturating_sub(1)).cloned().collect();
        let mut f = TriFactor {
            n,
            m,
            l,
            p,
            upper,
            tb: Vec::new(),
            c: Vec::new(),
            schur: 0.0,
            cyclic,
        };
        if cyclic {
            let (lo, hi) = self.corner.unwrap();
            let mut b = vec![0.0; m];
            let mut c = vec![0.0; m];
            b[0] += hi;
            b[m - 1] += self.upper[m - 1];
            c[0] += lo;
            c[m - 1] += self.lower[m - 1];
            let tb = f.solve_inner(&b);
            let d = self.diag[n - 1] - shift;
            let schur: f64 = d - c.iter().zip(&tb).map(|(a, b)| a * b).sum::<f64>();
            f.tb = tb;
            f.c = c;
            f.schur = guard(schur);
        }
        f
    }
}

impl TriFactor {
    fn solve_inner(&self, y: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        w[0] = y[0];
        for i in 1..m {
            w[i] = y[i] - self.l[i] * w[i - 1];
        }
        let mut x = vec![0.0; m];
        x[m - 1] = w[m - 1] / self.p[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = (w[i] - self.upper[i] * x[i + 1]) / self.p[i];
        }
        x
    }

    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        if !self.cyclic {
            return self.solve_inner(y);
        }
        let m = self.m;
        let ty = self.solve_inner(&y[..m]);
        let ct: f64 = self.c.iter().zip(&ty).map(|(a, b)| a * b).sum();
        let xn = (y[self.n - 1] - ct) / self.schur;
        let mut x: Vec<f64> = ty.iter().zip(&self.tb).map(|(a, b)| a - xn * b).collect();
        x.push(xn);
        x
    }

    /// Number of negative pivots; for a symmetric matrix this is the number of
    /// eigenvalues below the factorization shift (Sylvester inertia).
    pub fn negative_count(&self) -> usize {
        let mut k = self.p.iter().filter(|&&v| v < 0.0).count();
        if self.cyclic && self.schur < 0.0 {
            k += 1;
        }
        k
    }
}

/// Gershgorin interval containing the spectrum of a symmetric matrix.
pub fn gershgorin(a: &Tridiag) -> (f64, f64) {
    let n = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += a.lower[i - 1].abs();
        }
        if i + 1 < n {
            r += a.upper[i].abs();
        }
        if let Some((c, _)) = a.corner {
            if i == 0 || i == n - 1 {
                r += c.abs();
            }
        }
        lo = lo.min(a.diag[i] - r);
        hi = hi.max(a.diag[i] + r);
    }
    (lo, hi)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let s = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= s;
    }
}

/// The `k` lowest eigenpairs of a symmetric (cyclic) tridiagonal matrix.
/// Eigenvalues by inertia bisection, eigenvectors by inverse iteration at the
/// converged shift. Vectors are Euclidean-normalized.
pub fn lowest_eigenpairs(a: &Tridiag, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = a.len();
    if k == 0 || k > n {
        return Err(LabError::Invalid(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    let (glo, ghi) = gershgorin(a);
    let scale = glo.abs().max(ghi.abs()).max(1.0);
    let count = |s: f64| a.factor(s).negative_count();
    let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
    for j in 0..k {
        let mut lo = glo - 1e-9 * scale;
        let mut hi = ghi + 1e-9 * scale;
        if let Some(prev) = out.last() {
            lo = lo.max(prev.0 - 1e-12 * scale);
        }
        let mut iters = 0;
        while hi - lo > 2.0 * f64::EPSILON * scale && iters < 300 {
            let mid = 0.5 * (lo + hi);
            if count(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            iters += 1;
        }
        let lam = 0.5 * (lo + hi);
        // inverse iteration with a deterministic, non-symmetric start
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i as f64) * 0.731).sin()).collect();
        let mut shift = lam;
        let mut fac = a.factor(shift);
        for _ in 0..4 {
            for (mu, w) in &out {
                if (mu - lam).abs() < 1e-4 * scale {
                    let c = dot(&v, w);
                    for (x, y) in v.iter_mut().zip(w) {
                        *x -= c * y;
                    }
                }
            }
            let mut x = fac.solve(&v);
            if !x.iter().all(|z| z.is_finite()) {
                shift += 1e-12 * scale;
                fac = a.factor(shift);
                x = fac.solve(&v);
            }
            if !x.iter().all(|z| z.is_finite()) {
                return Err(LabError::NonConvergence(format!(
                    "inverse iteration broke down at eigenvalue {lam}"
                )));
            }
            normalize(&mut x);
            v = x;
        }
        for (mu, w) in &out {
            if (mu - lam).abs() < 1e-4 * scale {
                let c = dot(&v, w);
                for (x, y) in v.iter_mut().zip(w) {
                    *x -= c * y;
                }
                normalize(&mut v);
            }
        }
        // Rayleigh quotient is more accurate than the bisection midpoint
        let av = a.matvec(&v);
        let rq = dot(&v, &av);
        out.push((rq, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize, cyclic: bool) -> Tridiag {
        let corner = if cyclic { Some(-1.0) } else { None };
        Tridiag::symmetric(vec![2.0; n], vec![-1.0; n - 1], corner)
    }

    #[test]
    fn solve_matches_matvec() {
        for cyclic in [false, true] {
            let mut a = laplacian(17, cyclic);
            for (i, d) in a.diag.iter_mut().enumerate() {
                *d += 0.1 + 0.01 * i as f64;
            }
            let x: Vec<f64> = (0..17).map(|i| (i as f64).cos()).collect();
            let y = a.matvec(&x);
            let z = a.factor(0.0).solve(&y);
            for i in 0..17 {
                assert!((z[i] - x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let a = laplacian(n, false);
        let pairs = lowest_eigenpairs(&a, 3).unwrap();
        for (j, (lam, _)) in pairs.iter().enumerate() {
            let th = (j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            assert!((lam - (2.0 - 2.0 * th.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_laplacian_has_double_eigenvalues() {
        let n = 40;
        let a = laplacian(n, true);
        let pairs = lowest_eigenpairs(&a, 3).unwrap();
        let th = std::f64::consts::TAU / n as f64;
        assert!(pairs[0].0.abs() < 1e-12);
        assert!((pairs[1].0 - (2.0 - 2.0 * th.cos())).abs() < 1e-11);
        assert!((pairs[2].0 - (2.0 - 2.0 * th.cos())).abs() < 1e-11);
        assert!(dot(&pairs[1].1, &pairs[2].1).abs() < 1e-8);
    }
}
