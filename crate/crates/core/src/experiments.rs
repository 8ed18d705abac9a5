//! Perturbation families, rate tables and stability-exponent fits.
//!
//! Each family builds a model per perturbation size delta, certifies the
//! curvature-dimension condition of the regime, computes the spectral gap
//! and normalized eigenfunction, pushes the measure forward, and records
//! the W1 distance to the family target together with the deficit
//! quantities and the governing theorem's right-hand side. Exact families
//! carry closed-form eps and W1 which are cross-checked against the
//! numerics (1% mismatch fails the row).

use crate::error::{Error, Result};
use crate::estimates::{self, DeficitReport};
use crate::fit::linear_fit;
use crate::grid::Mapping;
use crate::measures::{self, Target, TargetFamily};
use crate::models::{self, BumpProfile, DiffusionModel, DimParam};
use crate::spectral;
use crate::stein::paper_constants;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// sphere of radius 1 - delta: exact eps = N (1/r^2 - 1), exact W1
    BetaScaled { n: f64 },
    /// metric bump phi (1 + delta psi)
    BetaPhiPerturbed { n: f64, bump: BumpProfile },
    /// jacobi of dimension N - delta rescaled to curvature N - 1
    BetaDimShift { n: f64 },
    /// Gaussian with stiffness 1 + delta: exact eps and W1
    GaussStiff,
    /// potential x^2/2 + delta x^4
    GaussQuartic,
    /// Cauchy model of dimension N - delta: exact eps = delta
    CauchyDimShift { n: f64 },
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::BetaScaled { n } => format!("beta_scaled(N={n})"),
            Family::BetaPhiPerturbed { n, bump } => {
                format!("beta_phi_perturbed(N={n} psi={})", bump.name())
            }
            Family::BetaDimShift { n } => format!("beta_dim_shift(N={n})"),
            Family::GaussStiff => "gauss_stiff".to_string(),
            Family::GaussQuartic => "gauss_quartic".to_string(),
            Family::CauchyDimShift { n } => format!("cauchy_dim_shift(N={n})"),
        }
    }

    /// dimension regime the stability statement is tested in
    pub fn dim(&self) -> DimParam {
        match self {
            Family::BetaScaled { n }
            | Family::BetaPhiPerturbed { n, .. }
            | Family::BetaDimShift { n } => DimParam::Finite(*n),
            Family::GaussStiff | Family::GaussQuartic => DimParam::Infinite,
            Family::CauchyDimShift { n } => DimParam::Finite(*n),
        }
    }

    /// curvature certified per row
    pub fn curvature(&self) -> f64 {
        match self.dim() {
            DimParam::Finite(n) if n > 1.0 => n - 1.0,
            DimParam::Finite(n) => 1.0 - n,
            DimParam::Infinite => 1.0,
        }
    }

    /// gap of the unperturbed model
    pub fn reference_gap(&self) -> f64 {
        match self.dim() {
            DimParam::Finite(n) if n > 1.0 => n,
            DimParam::Finite(n) => -n,
            DimParam::Infinite => 1.0,
        }
    }

    pub fn target_family(&self) -> TargetFamily {
        match self.dim() {
            DimParam::Finite(n) if n > 1.0 => TargetFamily::Beta(n),
            DimParam::Finite(n) => TargetFamily::Cauchy(n),
            DimParam::Infinite => TargetFamily::Gauss,
        }
    }

    fn build_model(&self, delta: f64) -> Result<DiffusionModel> {
        match self {
            Family::BetaScaled { n } => {
                if !(delta < 1.0) {
                    return Err(Error::Model("delta must stay below 1".into()));
                }
                DiffusionModel::scaled_jacobi(*n, 1.0 - delta)
            }
            Family::BetaPhiPerturbed { n, bump } => {
                DiffusionModel::phi_perturbed_jacobi(*n, delta, *bump)
            }
            Family::BetaDimShift { n } => DiffusionModel::dim_shift_jacobi(n - delta, *n),
            Family::GaussStiff => DiffusionModel::gaussian(1.0 + delta),
            Family::GaussQuartic => DiffusionModel::gauss_quartic(delta),
            Family::CauchyDimShift { n } => DiffusionModel::cauchy(n - delta),
        }
    }

    fn eps_exact(&self, delta: f64) -> Option<f64> {
        match self {
            Family::BetaScaled { n } => {
                let r = 1.0 - delta;
                Some(n * (1.0 / (r * r) - 1.0))
            }
            Family::BetaDimShift { n } => Some(delta / (n - delta - 1.0)),
            Family::GaussStiff | Family::CauchyDimShift { .. } => Some(delta),
            _ => None,
        }
    }

    fn w1_exact(&self, delta: f64, target: &Target) -> Option<f64> {
        match self {
            // pushforward is the target scaled by r = 1 - delta; the
            // monotone coupling gives delta E|X| exactly
            Family::BetaScaled { .. } => Some(delta * target.mean_abs()),
            // centered normals: |1 - (1+delta)^{-1/2}| E|Z|
            Family::GaussStiff => {
                Some((1.0 - (1.0 + delta).powf(-0.5)).abs() * target.mean_abs())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RateRow {
    pub delta: f64,
    pub eps: f64,
    pub w1: f64,
    pub deficit_l1: f64,
    pub thm_rhs: f64,
    pub n: usize,
    pub cd_margin: f64,
    pub pass: bool,
    pub eps_exact: Option<f64>,
    pub w1_exact: Option<f64>,
    pub deficit: DeficitReport,
}

#[derive(Debug, Clone)]
pub struct RateTable {
    pub family: Family,
    pub rows: Vec<RateRow>,
    /// (delta, diagnostic) for rejected rows
    pub rejected: Vec<(f64, String)>,
}

fn family_row(family: Family, delta: f64, n: usize, target: &Target) -> Result<RateRow> {
    if !(delta >= 0.0) {
        return Err(Error::Model("perturbation sizes must be nonnegative".into()));
    }
    let model = family.build_model(delta)?;
    let dim = family.dim();
    let rho = family.curvature();
    let margin_report =
        models::cd_margin(&model, rho, dim, &models::margin_grid(&model, 2001))?;
    if margin_report.min_margin < -1e-12 {
        return Err(Error::Model(format!(
            "CD({rho}, {dim:?}) margin {:.3e} < 0 at x = {:.4}; family parameter too large",
            margin_report.min_margin, margin_report.arg_min
        )));
    }
    let mapping = model.default_mapping();
    // order-fitted extrapolation removes the (one-sided) discretization bias
    // in lambda1, keeping eps >= 0 even for exact rows
    let (lambda1, gap, op, _order) = spectral::spectral_gap_extrapolated(&model, n, mapping)?;
    let eps = lambda1 - family.reference_gap();
    let deficit = estimates::eigen_deficit(&model, &op, &gap, dim, Some(lambda1))?;

    // pushforward with cell spreading: interface values of f by averaging
    let nn = op.n();
    let mut f_ifaces = vec![0.0; nn + 1];
    for i in 1..nn {
        f_ifaces[i] = 0.5 * (deficit.f[i - 1] + deficit.f[i]);
    }
    f_ifaces[0] = deficit.f[0] - 0.5 * (deficit.f[1] - deficit.f[0]);
    f_ifaces[nn] = deficit.f[nn - 1] + 0.5 * (deficit.f[nn - 1] - deficit.f[nn - 2]);
    if matches!(mapping, Mapping::TanCompactify) {
        // the outermost interfaces sit at infinity; collapse to the node
        f_ifaces[0] = deficit.f[0];
        f_ifaces[nn] = deficit.f[nn - 1];
    }
    let nu = measures::pushforward_cells(&op.weights, &deficit.f, &f_ifaces)?;
    let target_mu = measures::QuadratureMeasure::from_target(target.clone(), 64);
    let w1 = measures::w1_distance(&nu, &target_mu);

    let _ = gap;
    let thm_rhs = match dim {
        DimParam::Finite(nf) if nf > 1.0 => {
            let c = paper_constants(nf);
            c.thm_beta_const.unwrap() * deficit.thm35_deficit.unwrap()
                + eps.abs() / nf * deficit.f_l2
        }
        DimParam::Infinite => 4.0 / (1.0 + eps) * deficit.deficit_l1 + 4.0 * eps.max(0.0),
        DimParam::Finite(nf) => {
            let c = paper_constants(nf);
            c.k_n.unwrap() * deficit.prop54_deficit.unwrap()
                + eps.abs() * c.l_n_lemma.unwrap() * deficit.f_sq_l1
        }
    };

    let eps_exact = family.eps_exact(delta);
    let w1_exact = family.w1_exact(delta, target);
    let mut pass = eps >= -1e-8 && w1 <= thm_rhs * (1.0 + 1e-9) + 1e-12;
    if let Some(ee) = eps_exact {
        pass &= (eps - ee).abs() <= 0.01 * ee.max(1e-9);
    }
    if let Some(we) = w1_exact {
        pass &= (w1 - we).abs() <= 0.01 * we.max(1e-9);
    }
    let deficit_col = deficit.prop54_deficit.unwrap_or(deficit.deficit_l1);
    Ok(RateRow {
        delta,
        eps,
        w1,
        deficit_l1: deficit_col,
        thm_rhs,
        n,
        cd_margin: margin_report.min_margin,
        pass,
        eps_exact,
        w1_exact,
        deficit,
    })
}

/// Run a perturbation family over `deltas` at resolution `n`; rows run in
/// parallel and are assembled in ascending delta order.
pub fn run_family(family: Family, deltas: &[f64], n: usize) -> Result<RateTable> {
    run_family_impl(family, deltas, n, false)
}

/// Sequential reference path of [`run_family`].
pub fn run_family_seq(family: Family, deltas: &[f64], n: usize) -> Result<RateTable> {
    run_family_impl(family, deltas, n, true)
}

fn run_family_impl(family: Family, deltas: &[f64], n: usize, seq: bool) -> Result<RateTable> {
    let target = Target::new(family.target_family())?;
    let mut sorted: Vec<f64> = deltas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let job = |i: usize| family_row(family, sorted[i], n, &target);
    let results = if seq {
        crate::par::map_indexed_seq(sorted.len(), job)
    } else {
        crate::par::map_indexed(sorted.len(), job)
    };
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for (delta, res) in sorted.iter().zip(results) {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => rejected.push((*delta, e.to_string())),
        }
    }
    Ok(RateTable {
        family,
        rows,
        rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateLaw {
    /// fit log W1 against log eps
    LinearEps,
    /// fit log W1 against log(eps log(2/eps))
    EpsLog,
}

#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub exponent: f64,
    pub constant: f64,
    /// max relative deviation of W1 from the fitted law
    pub residual: f64,
}

pub fn fit_rate(table: &RateTable, law: RateLaw) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.eps > 0.0 && r.w1 > 0.0)
        .map(|r| (r.eps, r.w1))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 usable rows, have {}",
            pts.len()
        )));
    }
    let (emin, emax) = pts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(e, _)| {
            (lo.min(e), hi.max(e))
        });
    if emax / emin < 10f64.powf(1.5) {
        return Err(Error::Fit(format!(
            "eps range {emin:.3e}..{emax:.3e} spans less than 1.5 decades"
        )));
    }
    let xs: Vec<f64> = pts
        .iter()
        .map(|&(e, _)| match law {
            RateLaw::LinearEps => e.ln(),
            RateLaw::EpsLog => (e * (2.0 / e).ln()).ln(),
        })
        .collect();
    let ys: Vec<f64> = pts.iter().map(|&(_, w)| w.ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    let residual = pts
        .iter()
        .zip(&xs)
        .map(|(&(_, w), &x)| {
            let fitted = (intercept + slope * x).exp();
            (w - fitted).abs() / fitted
        })
        .fold(0.0f64, f64::max);
    Ok(RateFit {
        exponent: slope,
        constant: intercept.exp(),
        residual,
    })
}

/// Rate-table CSV with the pinned schema
/// `family,delta,eps,w1,deficit_l1,thm_rhs,n,cd_margin,pass`.
pub fn rate_csv(table: &RateTable) -> String {
    let mut out = String::from("family,delta,eps,w1,deficit_l1,thm_rhs,n,cd_margin,pass\n");
    let name = table.family.name();
    for r in &table.rows {
        out.push_str(&format!(
            "{name},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{}\n",
            r.delta, r.eps, r.w1, r.deficit_l1, r.thm_rhs, r.n, r.cd_margin, r.pass
        ));
    }
    out
}

/// Estimates-schema CSV for the family's deficit rows.
pub fn deficit_rows_csv(table: &RateTable) -> String {
    let rows: Vec<(String, f64, DeficitReport, bool)> = table
        .rows
        .iter()
        .map(|r| {
            let pass = r.deficit.lh_l1 <= r.deficit.paper_rhs * 1.01 + 1e-12;
            (table.family.name(), r.delta, r.deficit.clone(), pass)
        })
        .collect();
    estimates::deficit_csv(&rows)
}

/// Default log-spaced perturbation grid.
pub fn default_deltas() -> Vec<f64> {
    vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
}

/// One-decade grid for the logarithmic-rate regimes (the per-row constant
/// W1 / (eps log(2/eps)) of an exactly linear family drifts with log(1/eps),
/// so stability checks use a narrower span).
pub fn log_rate_deltas() -> Vec<f64> {
    vec![1e-3, 2e-3, 5e-3, 1e-2]
}
