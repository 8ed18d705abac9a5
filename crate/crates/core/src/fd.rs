//! Finite differences on uniform grids: fourth-order central stencils in the
//! interior, one-sided (lower order) at the ends. End-cell order loss is
//! harmless here because the reversible densities vanish at the endpoints.

/// First derivative, fourth order in the interior.
pub fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "need at least 5 nodes for the stencils");
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    d[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h);
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        / (12.0 * h);
    d
}

/// Second derivative, fourth order in the interior.
pub fn second_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "need at least 5 nodes for the stencils");
    let h2 = h * h;
    let mut d = vec![0.0; n];
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    d[1] = (f[0] - 2.0 * f[1] + f[2]) / h2;
    for i in 2..n - 2 {
        d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2])
            / (12.0 * h2);
    }
    d[n - 2] = (f[n - 3] - 2.0 * f[n - 2] + f[n - 1]) / h2;
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_on_sine() {
        // interior error should drop ~16x when h halves
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|i| (3.0 * i as f64 * h).sin()).collect();
            let d = derivative(&f, h);
            let dd = second_derivative(&f, h);
            let mut e1: f64 = 0.0;
            let mut e2: f64 = 0.0;
            for i in 2..n - 1 {
                let x = i as f64 * h;
                e1 = e1.max((d[i] - 3.0 * (3.0 * x).cos()).abs());
                e2 = e2.max((dd[i] + 9.0 * (3.0 * x).sin()).abs());
            }
            (e1, e2)
        };
        let (a1, a2) = err(100);
        let (b1, b2) = err(200);
        assert!(a1 / b1 > 12.0, "first-derivative order too low: {}", a1 / b1);
        assert!(a2 / b2 > 12.0, "second-derivative order too low: {}", a2 / b2);
    }

    #[test]
    fn exact_on_cubics() {
        let n = 20;
        let h = 0.1;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
        let d = derivative(&f, h);
        for (i, di) in d.iter().enumerate() {
            let x = i as f64 * h;
            assert!((di - 3.0 * x * x).abs() < 1e-10);
        }
    }
}
