//! Dense bounded-variable simplex (maximization) with Bland's rule.
//!
//! Solves `max c^T x` subject to two-sided rows `|a_i^T x| <= b_i` and box
//! bounds `l <= x <= u`. Each row gets one slack in [0, 2 b_i]; the slacks
//! form the initial basis with the structural variables at their lower
//! bounds. Intended for the small dense programs of the Stein discrepancy
//! (at most a couple thousand variables).

use crate::error::{Error, Result};

/// One two-sided constraint `-bound <= sum coeffs . x <= bound`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct BoundedLp {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

pub fn maximize(lp: &BoundedLp) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    assert_eq!(lp.lower.len(), n);
    assert_eq!(lp.upper.len(), n);
    let ntot = n + m;

    // tableau T = B^{-1} [A | I], with row scaling for conditioning
    let mut tab = vec![vec![0.0f64; ntot]; m];
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.resize(ntot, 0.0);
    upper.resize(ntot, 0.0);
    for (i, row) in lp.rows.iter().enumerate() {
        if !(row.bound > 0.0) {
            return Err(Error::Simplex(format!("row {i} has nonpositive bound")));
        }
        let scale = row
            .coeffs
            .iter()
            .fold(0.0f64, |a, &(_, c)| a.max(c.abs()))
            .max(1e-12);
        for &(j, c) in &row.coeffs {
            if j >= n {
                return Err(Error::Simplex(format!("row {i} references variable {j}")));
            }
            tab[i][j] = c / scale;
        }
        tab[i][n + i] = 1.0;
        upper[n + i] = 2.0 * row.bound / scale;
    }

    let mut cost = lp.objective.clone();
    cost.resize(ntot, 0.0);
    let mut basis: Vec<usize> = (n..ntot).collect();
    let mut in_basis = vec![false; ntot];
    let mut at_upper = vec![false; ntot];
    let mut xval = vec![0.0f64; ntot];
    for j in 0..n {
        xval[j] = lower[j];
    }
    for i in 0..m {
        in_basis[n + i] = true;
        // slack = scaled bound - a^T x at the lower-bound corner
        let mut v = 0.5 * upper[n + i];
        for j in 0..n {
            v -= tab[i][j] * xval[j];
        }
        // starting value of the slack must be feasible
        if v < -1e-9 || v > upper[n + i] + 1e-9 {
            return Err(Error::Simplex(format!(
                "lower-bound corner infeasible in row {i}"
            )));
        }
        xval[n + i] = v.clamp(0.0, upper[n + i]);
    }

    let cost_scale = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs())).max(1.0);
    let tol = 1e-9 * cost_scale;
    let max_iter = 200 * (ntot + 10);
    let mut iterations = 0;

    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::Simplex(format!(
                "no convergence after {max_iter} pivots"
            )));
        }
        // reduced costs d_j = c_j - c_B^T tab[:, j]
        let mut entering = None;
        let mut enter_dir = 1.0;
        'search: for j in 0..ntot {
            if in_basis[j] {
                continue;
            }
            let mut d = cost[j];
            for i in 0..m {
                if tab[i][j] != 0.0 {
                    d -= cost[basis[i]] * tab[i][j];
                }
            }
            if !at_upper[j] && d > tol {
                entering = Some(j);
                enter_dir = 1.0;
                break 'search;
            }
            if at_upper[j] && d < -tol {
                entering = Some(j);
                enter_dir = -1.0;
                break 'search;
            }
        }
        let Some(je) = entering else { break };

        // ratio test: x_B moves by -dir * t * alpha
        let tie = 1e-12;
        let mut t_max = upper[je] - lower[je];
        let mut leave: Option<(usize, bool)> = None; // (row, hits_upper)
        for i in 0..m {
            let a = enter_dir * tab[i][je];
            let bi = basis[i];
            let (t, hits_upper) = if a > 1e-11 {
                ((xval[bi] - lower[bi]) / a, false)
            } else if a < -1e-11 {
                ((upper[bi] - xval[bi]) / (-a), true)
            } else {
                continue;
            };
            let t = t.max(0.0);
            if t < t_max - tie {
                t_max = t;
                leave = Some((i, hits_upper));
            } else if t <= t_max + tie && better_bland(&basis, leave, i) {
                // tie: Bland's rule, smallest leaving index
                t_max = t_max.min(t);
                leave = Some((i, hits_upper));
            }
        }
        if !t_max.is_finite() {
            return Err(Error::Simplex("unbounded direction in a box LP".into()));
        }

        // apply the move
        for i in 0..m {
            let a = enter_dir * tab[i][je];
            if a != 0.0 {
                let bi = basis[i];
                xval[bi] = (xval[bi] - t_max * a).clamp(lower[bi], upper[bi]);
            }
        }
        xval[je] += enter_dir * t_max;

        match leave {
            None => {
                // bound flip, no basis change
                at_upper[je] = !at_upper[je];
                xval[je] = if at_upper[je] { upper[je] } else { lower[je] };
            }
            Some((r, hits_upper)) => {
                let jl = basis[r];
                let piv = tab[r][je];
                if piv.abs() < 1e-13 {
                    return Err(Error::Simplex("vanishing pivot".into()));
                }
                for v in tab[r].iter_mut() {
                    *v /= piv;
                }
                for i in 0..m {
                    if i != r && tab[i][je] != 0.0 {
                        let f = tab[i][je];
                        // manual row update keeps the borrow checker happy
                        let (upd, src) = if i < r {
                            let (a, b) = tab.split_at_mut(r);
                            (&mut a[i], &b[0])
                        } else {
                            let (a, b) = tab.split_at_mut(i);
                            (&mut b[0], &a[r])
                        };
                        for (u, s) in upd.iter_mut().zip(src.iter()) {
                            *u -= f * s;
                        }
                    }
                }
                basis[r] = je;
                in_basis[je] = true;
                in_basis[jl] = false;
                at_upper[jl] = hits_upper;
                xval[jl] = if hits_upper { upper[jl] } else { lower[jl] };
            }
        }
    }

    let objective = (0..n).map(|j| lp.objective[j] * xval[j]).sum();
    Ok(LpSolution {
        objective,
        x: xval[..n].to_vec(),
        iterations,
    })
}

/// Bland tie-break on the leaving variable: smallest basis index wins.
fn better_bland(basis: &[usize], current: Option<(usize, bool)>, candidate: usize) -> bool {
    match current {
        None => true,
        Some((r, _)) => basis[candidate] < basis[r],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pure_box_problem() {
        // max x0 - 2 x1 with no rows: hits the box corners
        let lp = BoundedLp {
            objective: vec![1.0, -2.0],
            lower: vec![-1.0, -3.0],
            upper: vec![2.0, 4.0],
            rows: vec![],
        };
        let s = maximize(&lp).unwrap();
        assert_relative_eq!(s.objective, 2.0 + 6.0);
        assert_relative_eq!(s.x[0], 2.0);
        assert_relative_eq!(s.x[1], -3.0);
    }

    #[test]
    fn difference_chain() {
        // max x2 with |x_{i+1} - x_i| <= 1, x0 in [-5, 0] at most, x in [-5, 5]
        let lp = BoundedLp {
            objective: vec![0.0, 0.0, 1.0],
            lower: vec![-5.0, -5.0, -5.0],
            upper: vec![0.0, 5.0, 5.0],
            rows: vec![
                Row {
                    coeffs: vec![(0, -1.0), (1, 1.0)],
                    bound: 1.0,
                },
                Row {
                    coeffs: vec![(1, -1.0), (2, 1.0)],
                    bound: 1.0,
                },
            ],
        };
        let s = maximize(&lp).unwrap();
        // best: x0 = 0, x1 = 1, x2 = 2
        assert_relative_eq!(s.objective, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn matches_enumeration_on_random_small_lps() {
        // brute-force vertex check on tiny chains: the optimum of a chain LP
        // with monotone objective is attained with all differences at a bound
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = 4;
            let c: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lp = BoundedLp {
                objective: c.clone(),
                lower: vec![-1.0; k],
                upper: vec![1.0; k],
                rows: (0..k - 1)
                    .map(|i| Row {
                        coeffs: vec![(i, -1.0), (i + 1, 1.0)],
                        bound: 0.5,
                    })
                    .collect(),
            };
            let s = maximize(&lp).unwrap();
            // exhaustive grid search (coarse) never beats the LP
            let mut best = f64::NEG_INFINITY;
            let steps = 9;
            let vals: Vec<f64> = (0..steps).map(|i| -1.0 + 0.25 * i as f64).collect();
            for &x0 in &vals {
                // enumerate difference patterns
                for mask in 0..(3usize.pow((k - 1) as u32)) {
                    let mut x = vec![x0];
                    let mut mm = mask;
                    for _ in 0..k - 1 {
                        let d = match mm % 3 {
                            0 => -0.5,
                            1 => 0.0,
                            _ => 0.5,
                        };
                        mm /= 3;
                        x.push(x.last().unwrap() + d);
                    }
                    if x.iter().all(|v| (-1.0..=1.0).contains(v)) {
                        let obj: f64 = x.iter().zip(&c).map(|(a, b)| a * b).sum();
                        best = best.max(obj);
                    }
                }
            }
            assert!(
                s.objective >= best - 1e-9,
                "LP {} below enumerated {best}",
                s.objective
            );
        }
    }
}
