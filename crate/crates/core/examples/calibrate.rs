//! Convergence calibration of the finite-volume spectral gaps against the
//! closed-form model gaps. Prints absolute eigenvalue errors per resolution.

use gapstab_core::grid::Mapping;
use gapstab_core::models::DiffusionModel;
use gapstab_core::spectral::{discretize, eigen_lowest, spectral_gap_extrapolated};

fn main() {
    println!("== jacobi direct: |lambda_k - k(k+N-1)| ==");
    for &n_dim in &[2.0f64, 3.0, 5.0, 7.5] {
        let m = DiffusionModel::jacobi(n_dim).unwrap();
        for &n in &[500usize, 1000, 2000, 4000] {
            let op = discretize(&m, n, Mapping::Direct).unwrap();
            let dec = eigen_lowest(&op, 3).unwrap();
            let e1 = (dec.eigenvalues[1] - n_dim).abs() / n_dim;
            let l2 = 2.0 * (n_dim + 1.0);
            let e2 = (dec.eigenvalues[2] - l2).abs() / l2;
            println!("N={n_dim:4} n={n:5}  rel_err1={e1:.3e}  rel_err2={e2:.3e}");
        }
        let (lam, _, _, _) = spectral_gap_extrapolated(&m, 4000, Mapping::Direct).unwrap();
        println!("N={n_dim:4} richardson(2000,4000): rel_err1={:.3e}", (lam - n_dim).abs() / n_dim);
    }

    println!("== OU truncate(10): |lambda_k - k| ==");
    let m = DiffusionModel::gaussian(1.0).unwrap();
    for &n in &[1000usize, 2000, 4000, 8000] {
        let op = discretize(&m, n, Mapping::Truncate(10.0)).unwrap();
        let dec = eigen_lowest(&op, 4).unwrap();
        let errs: Vec<String> = (1..4)
            .map(|k| format!("{:.3e}", (dec.eigenvalues[k] - k as f64).abs() / k as f64))
            .collect();
        println!("n={n:5}  rel_errs={errs:?}");
    }
    let (lam, _, _, _) = spectral_gap_extrapolated(&m, 4000, Mapping::Truncate(10.0)).unwrap();
    println!("richardson(2000,4000): rel_err1={:.3e}", (lam - 1.0).abs());

    println!("== cauchy tan: |lambda_1 - |N|| ==");
    for &n_dim in &[-2.0f64, -3.0, -5.0] {
        let m = DiffusionModel::cauchy(n_dim).unwrap();
        for &n in &[500usize, 1000, 2000, 4000, 8000] {
            let op = discretize(&m, n, Mapping::TanCompactify).unwrap();
            let dec = eigen_lowest(&op, 3).unwrap();
            let e1 = (dec.eigenvalues[1] + n_dim).abs() / (-n_dim);
            println!(
                "N={n_dim:4} n={n:5}  rel_err1={e1:.3e}  (lam1={:.8}, lam2={:.6})",
                dec.eigenvalues[1], dec.eigenvalues[2]
            );
        }
        let (lam, _, _, _) = spectral_gap_extrapolated(&m, 8000, Mapping::TanCompactify).unwrap();
        println!(
            "N={n_dim:4} richardson(4000,8000): rel_err1={:.3e}",
            (lam + n_dim).abs() / (-n_dim)
        );
    }

    println!("== scaled jacobi(3, .9): lambda1 vs N/r^2 ==");
    let m = DiffusionModel::scaled_jacobi(3.0, 0.9).unwrap();
    for &n in &[1000usize, 2000] {
        let op = discretize(&m, n, Mapping::Direct).unwrap();
        let dec = eigen_lowest(&op, 2).unwrap();
        let want = 3.0 / 0.81;
        println!(
            "n={n:5}  rel_err1={:.3e}",
            (dec.eigenvalues[1] - want).abs() / want
        );
    }
}
