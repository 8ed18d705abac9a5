//! One-dimensional weighted diffusion models.
//!
//! Every model is an interval `I` carrying a metric coefficient `phi`
//! (metric 1/phi), a potential `W`, and the reversible density
//! m(x) = exp(-W) phi^{-1/2}. The generator is
//! `L f = phi f'' + (phi'/2 - phi W') f'` and the carre du champ is
//! `Gamma(f) = phi (f')^2`. The catalogue members all have hand-coded
//! first and second derivatives, so curvature margins carry no
//! finite-difference noise.

use crate::error::{Error, Result};
use crate::fd;
use crate::grid::{Grid, Mapping};
use crate::quadrature;

/// Dimension parameter: a real N outside [0, 1], or infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimParam {
    Finite(f64),
    Infinite,
}

impl DimParam {
    /// Normalization target for eigenfunctions: N/(N+1), or 1 when infinite.
    pub fn gamma_target(&self) -> f64 {
        match self {
            DimParam::Finite(n) => n / (n + 1.0),
            DimParam::Infinite => 1.0,
        }
    }
}

/// Named bump profiles for metric perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpProfile {
    /// sin(pi x)
    SinPi,
    /// (1 - x^2)^2
    Quartic,
    /// 1 + x^2 (keeps CD(N-1, N) for positive amplitudes)
    OnePlusX2,
}

impl BumpProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BumpProfile::SinPi => (std::f64::consts::PI * x).sin(),
            BumpProfile::Quartic => (1.0 - x * x) * (1.0 - x * x),
            BumpProfile::OnePlusX2 => 1.0 + x * x,
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            BumpProfile::SinPi => std::f64::consts::PI * (std::f64::consts::PI * x).cos(),
            BumpProfile::Quartic => -4.0 * x * (1.0 - x * x),
            BumpProfile::OnePlusX2 => 2.0 * x,
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            BumpProfile::SinPi => {
                -std::f64::consts::PI * std::f64::consts::PI * (std::f64::consts::PI * x).sin()
            }
            BumpProfile::Quartic => 12.0 * x * x - 4.0,
            BumpProfile::OnePlusX2 => 2.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sinpi" => Ok(BumpProfile::SinPi),
            "quartic" => Ok(BumpProfile::Quartic),
            "oneplusx2" => Ok(BumpProfile::OnePlusX2),
            other => Err(Error::Model(format!(
                "unknown bump profile '{other}' (expected sinpi|quartic|oneplusx2)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BumpProfile::SinPi => "sinpi",
            BumpProfile::Quartic => "quartic",
            BumpProfile::OnePlusX2 => "oneplusx2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// I = (-1, 1), phi = 1 - x^2, Beta-type reversible measure, N > 1.
    Jacobi { n: f64 },
    /// I = R, phi = 1 + x^2, generalized Cauchy measure, N < -1.
    Cauchy { n: f64 },
    /// I = R, phi = 1, W = kappa x^2 / 2 (kappa = 1 is Ornstein-Uhlenbeck).
    Gaussian { kappa: f64 },
    /// I = R, phi = 1, W = x^2/2 + delta x^4; satisfies CD(1, inf).
    GaussQuartic { delta: f64 },
    /// Radius-r sphere model: I = (-r, r), phi = 1 - (x/r)^2.
    ScaledJacobi { n: f64, radius: f64 },
    /// Jacobi metric multiplied by (1 + delta psi(x)).
    PhiPerturbedJacobi { n: f64, delta: f64, bump: BumpProfile },
    /// Jacobi with dimension n_model, metric scaled so the curvature equals
    /// n_family - 1 (used by the dimension-shift stability family).
    DimShiftJacobi { n_model: f64, scale: f64 },
}

/// A 1D weighted diffusion from the fixed catalogue.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub kind: ModelKind,
    pub interval: (f64, f64),
    pub dim: DimParam,
    /// the model's own sharp CD curvature
    pub curvature: f64,
    /// normalization Z = integral of the unnormalized density
    pub norm_const: f64,
    /// spectral gap of -L when known in closed form
    pub analytic_gap: Option<f64>,
}

impl DiffusionModel {
    pub fn jacobi(n: f64) -> Result<Self> {
        if !(n > 1.0) || !n.is_finite() {
            return Err(Error::Model(format!("jacobi requires N > 1, got {n}")));
        }
        Ok(Self::finish(ModelKind::Jacobi { n }, (-1.0, 1.0), DimParam::Finite(n), n - 1.0, Some(n)))
    }

    pub fn cauchy(n: f64) -> Result<Self> {
        if !(n < -1.0) || !n.is_finite() {
            return Err(Error::Model(format!("cauchy requires N < -1, got {n}")));
        }
        Ok(Self::finish(
            ModelKind::Cauchy { n },
            (f64::NEG_INFINITY, f64::INFINITY),
            DimParam::Finite(n),
            1.0 - n,
            Some(-n),
        ))
    }

    pub fn gaussian(kappa: f64) -> Result<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::Model(format!("gaussian requires kappa >= 1, got {kappa}")));
        }
        Ok(Self::finish(
            ModelKind::Gaussian { kappa },
            (f64::NEG_INFINITY, f64::INFINITY),
            DimParam::Infinite,
            kappa,
            Some(kappa),
        ))
    }

    pub fn gauss_quartic(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Model(format!(
                "quartic perturbation requires delta >= 0, got {delta}"
            )));
        }
        Ok(Self::finish(
            ModelKind::GaussQuartic { delta },
            (f64::NEG_INFINITY, f64::INFINITY),
            DimParam::Infinite,
            1.0,
            if delta == 0.0 { Some(1.0) } else { None },
        ))
    }

    /// Sphere of radius `r` in coordinate form: the unit Jacobi model with
    /// metric rescaled by 1/r^2 (gap N/r^2, curvature (N-1)/r^2).
    pub fn scaled_jacobi(n: f64, radius: f64) -> Result<Self> {
        if !(n > 1.0) {
            return Err(Error::Model(format!("scaled jacobi requires N > 1, got {n}")));
        }
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::Model(format!("radius must lie in (0, 1], got {radius}")));
        }
        Ok(Self::finish(
            ModelKind::ScaledJacobi { n, radius },
            (-radius, radius),
            DimParam::Finite(n),
            (n - 1.0) / (radius * radius),
            Some(n / (radius * radius)),
        ))
    }

    pub fn phi_perturbed_jacobi(n: f64, delta: f64, bump: BumpProfile) -> Result<Self> {
        if !(n > 1.0) {
            return Err(Error::Model(format!("perturbed jacobi requires N > 1, got {n}")));
        }
        // 1 + delta psi must stay positive on [-1, 1]
        let (lo, hi) = match bump {
            BumpProfile::SinPi => (-1.0, 1.0),
            BumpProfile::Quartic => (0.0, 1.0),
            BumpProfile::OnePlusX2 => (1.0, 2.0),
        };
        let min_factor = (1.0 + delta * lo).min(1.0 + delta * hi);
        if min_factor <= 0.0 {
            return Err(Error::Model(format!(
                "amplitude {delta} makes phi lose positivity (min factor {min_factor:.3e})"
            )));
        }
        Ok(Self::finish(
            ModelKind::PhiPerturbedJacobi { n, delta, bump },
            (-1.0, 1.0),
            DimParam::Finite(n),
            n - 1.0,
            None,
        ))
    }

    /// Jacobi model of dimension `n_model` with metric scaled so its sharp
    /// curvature is `n_family - 1`; gap = scale * n_model.
    pub fn dim_shift_jacobi(n_model: f64, n_family: f64) -> Result<Self> {
        if !(n_model > 1.0 && n_family >= n_model) {
            return Err(Error::Model(format!(
                "dimension shift requires 1 < N_model <= N_family, got {n_model}, {n_family}"
            )));
        }
        let scale = (n_family - 1.0) / (n_model - 1.0);
        Ok(Self::finish(
            ModelKind::DimShiftJacobi { n_model, scale },
            (-1.0, 1.0),
            DimParam::Finite(n_model),
            n_family - 1.0,
            Some(scale * n_model),
        ))
    }

    fn finish(
        kind: ModelKind,
        interval: (f64, f64),
        dim: DimParam,
        curvature: f64,
        analytic_gap: Option<f64>,
    ) -> Self {
        let mut m = DiffusionModel {
            kind,
            interval,
            dim,
            curvature,
            norm_const: 1.0,
            analytic_gap,
        };
        m.norm_const = m.measure_atoms(64).iter().map(|a| a.1).sum();
        m
    }

    /// Matched-family exponent beta with density phi^{-beta}, when applicable.
    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            ModelKind::Jacobi { n }
            | ModelKind::Cauchy { n }
            | ModelKind::ScaledJacobi { n, .. }
            | ModelKind::PhiPerturbedJacobi { n, .. } => Some(1.0 - n / 2.0),
            ModelKind::DimShiftJacobi { n_model, .. } => Some(1.0 - n_model / 2.0),
            _ => None,
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Jacobi { .. } => 1.0 - x * x,
            ModelKind::Cauchy { .. } => 1.0 + x * x,
            ModelKind::Gaussian { .. } | ModelKind::GaussQuartic { .. } => 1.0,
            ModelKind::ScaledJacobi { radius, .. } => 1.0 - (x / radius) * (x / radius),
            ModelKind::PhiPerturbedJacobi { delta, bump, .. } => {
                (1.0 - x * x) * (1.0 + delta * bump.eval(x))
            }
            ModelKind::DimShiftJacobi { scale, .. } => scale * (1.0 - x * x),
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Jacobi { .. } => -2.0 * x,
            ModelKind::Cauchy { .. } => 2.0 * x,
            ModelKind::Gaussian { .. } | ModelKind::GaussQuartic { .. } => 0.0,
            ModelKind::ScaledJacobi { radius, .. } => -2.0 * x / (radius * radius),
            ModelKind::PhiPerturbedJacobi { delta, bump, .. } => {
                -2.0 * x * (1.0 + delta * bump.eval(x)) + (1.0 - x * x) * delta * bump.d1(x)
            }
            ModelKind::DimShiftJacobi { scale, .. } => -2.0 * scale * x,
        }
    }

    pub fn d2phi(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Jacobi { .. } => -2.0,
            ModelKind::Cauchy { .. } => 2.0,
            ModelKind::Gaussian { .. } | ModelKind::GaussQuartic { .. } => 0.0,
            ModelKind::ScaledJacobi { radius, .. } => -2.0 / (radius * radius),
            ModelKind::PhiPerturbedJacobi { delta, bump, .. } => {
                -2.0 * (1.0 + delta * bump.eval(x)) - 4.0 * x * delta * bump.d1(x)
                    + (1.0 - x * x) * delta * bump.d2(x)
            }
            ModelKind::DimShiftJacobi { scale, .. } => -2.0 * scale,
        }
    }

    pub fn w_pot(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Gaussian { kappa } => 0.5 * kappa * x * x,
            ModelKind::GaussQuartic { delta } => 0.5 * x * x + delta * x.powi(4),
            _ => {
                let beta = self.beta().unwrap();
                (beta - 0.5) * self.phi(x).ln()
            }
        }
    }

    pub fn dw(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Gaussian { kappa } => kappa * x,
            ModelKind::GaussQuartic { delta } => x + 4.0 * delta * x.powi(3),
            _ => {
                let beta = self.beta().unwrap();
                (beta - 0.5) * self.dphi(x) / self.phi(x)
            }
        }
    }

    pub fn d2w(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Gaussian { kappa } => kappa,
            ModelKind::GaussQuartic { delta } => 1.0 + 12.0 * delta * x * x,
            _ => {
                let beta = self.beta().unwrap();
                let p = self.phi(x);
                (beta - 0.5) * (self.d2phi(x) * p - self.dphi(x) * self.dphi(x)) / (p * p)
            }
        }
    }

    /// Unnormalized reversible density exp(-W) phi^{-1/2}.
    pub fn density_unnorm(&self, x: f64) -> f64 {
        (-self.w_pot(x) - 0.5 * self.phi(x).ln()).exp()
    }

    /// Normalized density.
    pub fn density(&self, x: f64) -> f64 {
        self.density_unnorm(x) / self.norm_const
    }

    /// Truncation radius used for line-supported quadrature and grids.
    pub fn truncation_radius(&self) -> f64 {
        match self.kind {
            ModelKind::Gaussian { kappa } => (120.0 / kappa).sqrt().max(8.0),
            ModelKind::GaussQuartic { .. } => 11.0,
            _ => 10.0,
        }
    }

    /// Natural spectral mapping for this model's support.
    pub fn default_mapping(&self) -> Mapping {
        match self.kind {
            ModelKind::Cauchy { .. } => Mapping::TanCompactify,
            ModelKind::Gaussian { .. } | ModelKind::GaussQuartic { .. } => {
                Mapping::Truncate(self.truncation_radius())
            }
            _ => Mapping::Direct,
        }
    }

    /// High-order quadrature of the reversible measure: (point, unnormalized
    /// weight) pairs. Compact models integrate in the arcsine variable, line
    /// models in the arctangent (Cauchy) or truncated affine (Gaussian)
    /// variable, so the integrands stay smooth.
    pub fn measure_atoms(&self, panels: usize) -> Vec<(f64, f64)> {
        let (glx, glw) = quadrature::gauss_legendre(32);
        let mut atoms = Vec::with_capacity(panels * 32);
        let half_pi = 0.5 * std::f64::consts::PI;
        let hp = 2.0 / panels as f64;
        for p in 0..panels {
            let lo = -1.0 + p as f64 * hp;
            for (u, w) in glx.iter().zip(&glw) {
                let psi = lo + 0.5 * hp * (u + 1.0);
                let gw = w * 0.5 * hp;
                let (x, jac) = match self.kind {
                    ModelKind::Cauchy { .. } => {
                        let t = half_pi * psi;
                        (t.tan(), half_pi / t.cos().powi(2))
                    }
                    ModelKind::Gaussian { .. } | ModelKind::GaussQuartic { .. } => {
                        let r = self.truncation_radius();
                        (r * psi, r)
                    }
                    _ => {
                        // arcsine map scaled to the interval
                        let r = self.interval.1;
                        let t = half_pi * psi;
                        (r * t.sin(), r * half_pi * t.cos())
                    }
                };
                atoms.push((x, gw * jac * self.density_unnorm(x)));
            }
        }
        atoms
    }

    /// Expectation of `f` against the normalized reversible measure.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let atoms = self.measure_atoms(64);
        let z: f64 = atoms.iter().map(|a| a.1).sum();
        atoms.iter().map(|&(x, w)| w * f(x)).sum::<f64>() / z
    }

    /// Generator applied pointwise given exact derivatives of `f`.
    pub fn generator_pointwise(&self, x: f64, df: f64, d2f: f64) -> f64 {
        self.phi(x) * d2f + (0.5 * self.dphi(x) - self.phi(x) * self.dw(x)) * df
    }

    pub fn kind_name(&self) -> String {
        match self.kind {
            ModelKind::Jacobi { n } => format!("jacobi(N={n})"),
            ModelKind::Cauchy { n } => format!("cauchy(N={n})"),
            ModelKind::Gaussian { kappa } => format!("gaussian(kappa={kappa})"),
            ModelKind::GaussQuartic { delta } => format!("gauss_quartic(delta={delta})"),
            ModelKind::ScaledJacobi { n, radius } => format!("scaled(N={n} r={radius})"),
            ModelKind::PhiPerturbedJacobi { n, delta, bump } => {
                format!("phi_perturbed(N={n} delta={delta} bump={})", bump.name())
            }
            ModelKind::DimShiftJacobi { n_model, scale } => {
                format!("dim_shift(N'={n_model} scale={scale})")
            }
        }
    }

    /// key = value description lines (model catalogue serialization).
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("model".to_string(), self.kind_name()),
            ("interval".to_string(), format!("({}, {})", self.interval.0, self.interval.1)),
            (
                "dim".to_string(),
                match self.dim {
                    DimParam::Finite(n) => format!("{n}"),
                    DimParam::Infinite => "inf".to_string(),
                },
            ),
            ("curvature".to_string(), format!("{}", self.curvature)),
            ("norm_const".to_string(), format!("{:.17e}", self.norm_const)),
        ];
        if let Some(g) = self.analytic_gap {
            kv.push(("analytic_gap".to_string(), format!("{g}")));
        }
        kv
    }
}

/// Pointwise curvature-dimension margin report.
#[derive(Debug, Clone)]
pub struct MarginReport {
    pub grid: Vec<f64>,
    pub margin: Vec<f64>,
    pub min_margin: f64,
    pub arg_min: f64,
}

/// Margin of the 1D CD(rho, N) criterion at each grid point:
/// [W'' + W' phi' / (2 phi)] - rho/phi - (W')^2/(N-1),
/// with the last term dropped for N = infinity. A nonnegative minimum
/// certifies CD(rho, N) on the grid.
pub fn cd_margin(
    model: &DiffusionModel,
    rho: f64,
    dim: DimParam,
    grid: &[f64],
) -> Result<MarginReport> {
    if let DimParam::Finite(n) = dim {
        if (n - 1.0).abs() < 1e-14 {
            return Err(Error::Model("cd_margin undefined at N = 1".into()));
        }
    }
    let (a, b) = model.interval;
    let mut margin = Vec::with_capacity(grid.len());
    for &x in grid {
        if !(x > a && x < b) {
            return Err(Error::Model(format!(
                "grid point {x} outside the open interval ({a}, {b})"
            )));
        }
        let p = model.phi(x);
        let hess = model.d2w(x) + model.dw(x) * model.dphi(x) / (2.0 * p);
        let mut m = hess - rho / p;
        if let DimParam::Finite(n) = dim {
            m -= model.dw(x) * model.dw(x) / (n - 1.0);
        }
        margin.push(m);
    }
    let (mut min_margin, mut arg_min) = (f64::INFINITY, grid[0]);
    for (&x, &m) in grid.iter().zip(&margin) {
        if m < min_margin {
            min_margin = m;
            arg_min = x;
        }
    }
    Ok(MarginReport {
        grid: grid.to_vec(),
        margin,
        min_margin,
        arg_min,
    })
}

/// Interior grid for margin checks, shrunk slightly from the endpoints.
pub fn margin_grid(model: &DiffusionModel, count: usize) -> Vec<f64> {
    let (a, b) = model.interval;
    let (lo, hi) = if a.is_finite() && b.is_finite() {
        let eps = 1e-9 * (b - a);
        (a + eps, b - eps)
    } else {
        let r = model.truncation_radius();
        (-r, r)
    };
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// L f on grid values via fourth-order finite differences in the
/// computational coordinate.
pub fn generator_apply(model: &DiffusionModel, grid: &Grid, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), grid.n);
    let d1psi = fd::derivative(f, grid.h);
    let d2psi = fd::second_derivative(f, grid.h);
    (0..grid.n)
        .map(|i| {
            let xp = grid.dx_nodes[i];
            let xpp = grid.d2x_nodes[i];
            let df = d1psi[i] / xp;
            let d2f = (d2psi[i] - df * xpp) / (xp * xp);
            model.generator_pointwise(grid.x_nodes[i], df, d2f)
        })
        .collect()
}

/// Gamma(f) = phi (f')^2 on grid values.
pub fn carre_du_champ(model: &DiffusionModel, grid: &Grid, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), grid.n);
    let d1psi = fd::derivative(f, grid.h);
    (0..grid.n)
        .map(|i| {
            let df = d1psi[i] / grid.dx_nodes[i];
            model.phi(grid.x_nodes[i]) * df * df
        })
        .collect()
}

/// First derivative of a grid function in the physical coordinate.
pub fn grid_derivative(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let d1psi = fd::derivative(f, grid.h);
    (0..grid.n).map(|i| d1psi[i] / grid.dx_nodes[i]).collect()
}

/// Moments of the identity under the reversible measure.
#[derive(Debug, Clone, Copy)]
pub struct IdentityMoments {
    pub variance: f64,
    pub gamma_mass: f64,
}

/// Var(x) and integral of Gamma(id) = phi under the normalized measure.
pub fn identity_moments(model: &DiffusionModel) -> IdentityMoments {
    let atoms = model.measure_atoms(64);
    let z: f64 = atoms.iter().map(|a| a.1).sum();
    let mean: f64 = atoms.iter().map(|&(x, w)| w * x).sum::<f64>() / z;
    let var: f64 = atoms.iter().map(|&(x, w)| w * (x - mean) * (x - mean)).sum::<f64>() / z;
    let gamma: f64 = atoms.iter().map(|&(x, w)| w * model.phi(x)).sum::<f64>() / z;
    IdentityMoments {
        variance: var,
        gamma_mass: gamma,
    }
}
