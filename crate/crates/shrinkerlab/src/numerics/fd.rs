//! Finite-difference stencils on non-uniform one-dimensional grids.

/// Fornberg's recursion. Returns `c[k][j]`, the weight of `x[j]` in the
/// k-th derivative at `z`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// How a stencil treats an end of an open grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndRule {
    /// End node sits on a symmetry axis; ghost values are reflected with a parity.
    Mirror,
    /// Stencil is shifted inward and widened by one point.
    OneSided,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    Periodic { period: f64 },
    Arc { left: EndRule, right: EndRule },
}

#[derive(Clone, Copy, Debug)]
struct Tap {
    j: usize,
    mirrored: bool,
    w1: f64,
    w2: f64,
}

/// Precomputed first and second derivative stencils for a fixed grid.
#[derive(Clone, Debug)]
pub struct DiffOp {
    taps: Vec<Vec<Tap>>,
}

impl DiffOp {
    /// `order` is the nominal accuracy (2, 4 or 6) of centered stencils.
    pub fn new(t: &[f64], topo: Topology, order: usize) -> DiffOp {
        let n = t.len();
        let half = (order / 2).max(1) as isize;
        let mut taps = Vec::with_capacity(n);
        for i in 0..n {
            let mut pts: Vec<(usize, bool, f64)> = Vec::new();
            match topo {
                Topology::Periodic { period } => {
                    for k in -half..=half {
                        let raw = i as isize + k;
                        let wraps = raw.div_euclid(n as isize);
                        let j = raw.rem_euclid(n as isize) as usize;
                        pts.push((j, false, t[j] + wraps as f64 * period));
                    }
                }
                Topology::Arc { left, right } => {
                    let lo = i as isize - half;
                    let hi = i as isize + half;
                    let last = n as isize - 1;
                    let needs_shift = (lo < 0 && left == EndRule::OneSided)
                        || (hi > last && right == EndRule::OneSided);
                    if needs_shift {
                        let width = 2 * half + 2;
                        let mut start = (i as isize - half).max(0);
                        if start + width - 1 > last {
                            start = (last - width + 1).max(0);
                        }
                        // A mirrored end on the far side can still be in reach.
                        for k in start..start + width {
                            if k < 0 || k > last {
                                continue;
                            }
                            pts.push((k as usize, false, t[k as usize]));
                        }
                    } else {
                        for k in lo..=hi {
                            if k < 0 {
                                let j = (-k) as usize;
                                pts.push((j, true, 2.0 * t[0] - t[j]));
                            } else if k > last {
                                let j = (2 * last - k) as usize;
                                pts.push((j, true, 2.0 * t[n - 1] - t[j]));
                            } else {
                                pts.push((k as usize, false, t[k as usize]));
                            }
                        }
                    }
                }
            }
            let xs: Vec<f64> = pts.iter().map(|p| p.2).collect();
            let c = fornberg(t[i], &xs, 2);
            let row = pts
                .iter()
                .enumerate()
                .map(|(q, p)| Tap { j: p.0, mirrored: p.1, w1: c[1][q], w2: c[2][q] })
                .collect();
            taps.push(row);
        }
        DiffOp { taps }
    }

    /// First and second derivatives; `parity` is the reflection sign used for
    /// ghost values at mirrored ends (+1 even, -1 odd).
    pub fn d12(&self, v: &[f64], parity: f64) -> (Vec<f64>, Vec<f64>) {
        let mut d1 = vec![0.0; v.len()];
        let mut d2 = vec![0.0; v.len()];
        for (i, row) in self.taps.iter().enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for tap in row {
                let val = if tap.mirrored { parity * v[tap.j] } else { v[tap.j] };
                a += tap.w1 * val;
                b += tap.w2 * val;
            }
            d1[i] = a;
            d2[i] = b;
        }
        (d1, d2)
    }

    pub fn d1(&self, v: &[f64], parity: f64) -> Vec<f64> {
        self.d12(v, parity).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_centered_second_difference() {
        let c = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((c[2][0] - 1.0).abs() < 1e-15);
        assert!((c[2][1] + 2.0).abs() < 1e-15);
        assert!((c[1][2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn periodic_sixth_order_is_accurate() {
        let n = 64;
        let p = std::f64::consts::TAU;
        let t: Vec<f64> = (0..n).map(|i| p * i as f64 / n as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| x.sin()).collect();
        let op = DiffOp::new(&t, Topology::Periodic { period: p }, 6);
        let (d1, d2) = op.d12(&v, 1.0);
        for i in 0..n {
            assert!((d1[i] - t[i].cos()).abs() < 1e-8);
            assert!((d2[i] + t[i].sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn mirrored_end_uses_parity() {
        let n = 40;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
        let odd: Vec<f64> = t.iter().map(|x| x.sin()).collect();
        let topo = Topology::Arc { left: EndRule::Mirror, right: EndRule::OneSided };
        let op = DiffOp::new(&t, topo, 2);
        let (d1, d2) = op.d12(&odd, -1.0);
        assert!((d1[0] - 1.0).abs() < 1e-3);
        assert!(d2[0].abs() < 1e-12);
        assert!((d2[n - 1] + t[n - 1].sin()).abs() < 1e-2);
    }
}
