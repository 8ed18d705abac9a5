//! Symmetric tridiagonal eigensolvers: implicit-shift QL for the full
//! eigenvalue list, Sturm-sequence bisection for selected eigenvalues, and
//! inverse iteration for eigenvectors. Everything here works on the
//! similarity-transformed (orthogonal) form of the diffusion operators.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: diagonal `d` (n entries) and off-diagonal
/// `e` (n-1 entries, e[i] couples rows i and i+1).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len());
        SymTridiag { d, e }
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = self.d[i] * v[i];
            if i > 0 {
                s += self.e[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.e[i] * v[i + 1];
            }
            out[i] = s;
        }
        out
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.e[i - 1].abs();
            }
            if i + 1 < n {
                r += self.e[i].abs();
            }
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm/LDL^T sign count).
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.n();
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let denom = if q.abs() < 1e-300 {
                1e-300_f64.copysign(if q == 0.0 { 1.0 } else { q })
            } else {
                q
            };
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// k-th eigenvalue (ascending, 0-based) by bisection.
    pub fn eigenvalue_k(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = hi.abs().max(lo.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-16 * scale {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues (ascending) by the implicit-shift QL algorithm with
    /// Wilkinson shifts (values only; eigenvectors are obtained separately by
    /// inverse iteration).
    pub fn eigenvalues_ql(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let mut d = self.d.clone();
        let mut e = self.e.clone();
        e.push(0.0);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m < n - 1 {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 50 {
                    return Err(Error::Eigen(format!(
                        "QL failed to converge at index {l} after 50 sweeps"
                    )));
                }
                // Wilkinson shift
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let mut s = 1.0;
                let mut c = 1.0;
                let mut p = 0.0;
                let mut underflow = false;
                for i in (l..m).rev() {
                    let mut f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    f = (d[i] - g) * s + 2.0 * c * b;
                    p = s * f;
                    d[i + 1] = g + p;
                    g = c * f - b;
                }
                if underflow {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(d)
    }

    /// Eigenvector for eigenvalue `lambda` by inverse iteration, orthogonalized
    /// against `previous` (Euclidean inner product). Returns (vector, residual).
    pub fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
        let n = self.n();
        let scale = self
            .d
            .iter()
            .chain(self.e.iter())
            .fold(0.0f64, |a, &x| a.max(x.abs()))
            .max(1.0);
        // deterministic start vector
        let mut v: Vec<f64> = (0..n).map(|i| (1.7 * (i as f64 + 1.0)).sin() + 0.25).collect();
        orthogonalize(&mut v, previous);
        normalize(&mut v);
        let mut res = f64::INFINITY;
        for _ in 0..6 {
            let mut w = solve_shifted(self, lambda, &v, scale);
            orthogonalize(&mut w, previous);
            let norm = normalize(&mut w);
            if norm == 0.0 {
                return Err(Error::Eigen("inverse iteration collapsed to zero".into()));
            }
            v = w;
            let tv = self.mul(&v);
            res = tv
                .iter()
                .zip(&v)
                .map(|(t, x)| (t - lambda * x) * (t - lambda * x))
                .sum::<f64>()
                .sqrt();
            if res <= 1e-12 * scale {
                break;
            }
        }
        if res > 1e-7 * scale {
            return Err(Error::Eigen(format!(
                "inverse iteration residual {res:.3e} exceeds tolerance (lambda = {lambda:.6e})"
            )));
        }
        Ok((v, res))
    }
}

fn orthogonalize(v: &mut [f64], previous: &[Vec<f64>]) {
    for _ in 0..2 {
        for p in previous {
            let dot: f64 = v.iter().zip(p).map(|(a, b)| a * b).sum();
            for (vi, pi) in v.iter_mut().zip(p) {
                *vi -= dot * pi;
            }
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Solve (T - lambda I) x = b by tridiagonal LU with partial pivoting.
/// Exactly singular pivots are replaced by a tiny value, which is the
/// standard inverse-iteration safeguard.
fn solve_shifted(t: &SymTridiag, lambda: f64, b: &[f64], scale: f64) -> Vec<f64> {
    let n = t.n();
    let tiny = f64::EPSILON * scale * 1e-3;
    let mut diag: Vec<f64> = t.d.iter().map(|&x| x - lambda).collect();
    let mut upper = vec![0.0; n]; // first superdiagonal
    let mut upper2 = vec![0.0; n]; // second superdiagonal (fill-in from pivoting)
    let sub: Vec<f64> = t.e.clone();
    for i in 0..n - 1 {
        upper[i] = t.e[i];
    }
    let mut x: Vec<f64> = b.to_vec();
    for i in 0..n - 1 {
        if sub[i].abs() > diag[i].abs() {
            // swap rows i and i+1
            x.swap(i, i + 1);
            let (a0, a1, a2) = (diag[i], upper[i], upper2[i]);
            diag[i] = sub[i];
            upper[i] = diag[i + 1];
            upper2[i] = if i + 1 < n - 1 { upper[i + 1] } else { 0.0 };
            diag[i + 1] = a1;
            if i + 1 < n - 1 {
                upper[i + 1] = a2;
            }
            // eliminate with multiplier from the (smaller) swapped-out row
            let m = a0 / diag[i];
            diag[i + 1] -= m * upper[i];
            if i + 1 < n - 1 {
                upper[i + 1] -= m * upper2[i];
            }
            x[i + 1] -= m * x[i];
        } else {
            let piv = if diag[i].abs() < tiny {
                tiny.copysign(if diag[i] == 0.0 { 1.0 } else { diag[i] })
            } else {
                diag[i]
            };
            diag[i] = piv;
            let m = sub[i] / piv;
            diag[i + 1] -= m * upper[i];
            if i + 1 < n - 1 {
                // upper2[i] is zero in the unswapped case
            }
            x[i + 1] -= m * x[i];
        }
    }
    if diag[n - 1].abs() < tiny {
        diag[n - 1] = tiny.copysign(if diag[n - 1] == 0.0 { 1.0 } else { diag[n - 1] });
    }
    // back substitution
    x[n - 1] /= diag[n - 1];
    if n >= 2 {
        x[n - 2] = (x[n - 2] - upper[n - 2] * x[n - 1]) / diag[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - upper[i] * x[i + 1] - upper2[i] * x[i + 2]) / diag[i];
    }
    x
}
