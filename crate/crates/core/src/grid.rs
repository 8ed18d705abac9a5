//! Cell-centered grids in a uniform computational coordinate `psi` in
//! [-1, 1], with closed-form maps to the physical coordinate.
//!
//! * `Direct`: affine map onto a finite interval.
//! * `Truncate(R)`: affine map onto [-R, R] for line-supported models.
//! * `TanCompactify`: x = tan(pi/2 * psi) for the whole line. Uniform cells
//!   in the angle keep the tail cells coupled at local rates above the
//!   spectral gap; steeper gradings create quasi-isolated end cells with
//!   spurious low modes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mapping {
    Direct,
    TanCompactify,
    Truncate(f64),
}

/// Cell-centered mesh: `n` cells with nodes at cell centers in `psi`, plus
/// the physical images and the map derivatives needed for chain rules.
#[derive(Debug, Clone)]
pub struct Grid {
    pub mapping: Mapping,
    pub n: usize,
    /// uniform spacing of `psi`
    pub h: f64,
    pub psi_nodes: Vec<f64>,
    pub psi_ifaces: Vec<f64>,
    pub x_nodes: Vec<f64>,
    /// physical interface positions; the outermost may be infinite under
    /// `TanCompactify`
    pub x_ifaces: Vec<f64>,
    /// dx/dpsi at nodes
    pub dx_nodes: Vec<f64>,
    /// d2x/dpsi2 at nodes
    pub d2x_nodes: Vec<f64>,
    interval: (f64, f64),
}

impl Grid {
    pub fn build(interval: (f64, f64), mapping: Mapping, n: usize) -> Result<Grid> {
        if n < 16 {
            return Err(Error::Discretization(format!("n = {n} below minimum 16")));
        }
        let finite = interval.0.is_finite() && interval.1.is_finite();
        match mapping {
            Mapping::Direct if !finite => {
                return Err(Error::Discretization(
                    "direct mapping needs a finite interval".into(),
                ))
            }
            Mapping::TanCompactify | Mapping::Truncate(_) if finite => {
                return Err(Error::Discretization(
                    "compactifying mappings are for line-supported models".into(),
                ))
            }
            Mapping::Truncate(r) if !(r > 0.0) => {
                return Err(Error::Discretization("truncation radius must be positive".into()))
            }
            _ => {}
        }
        let h = 2.0 / n as f64;
        let psi_ifaces: Vec<f64> = (0..=n).map(|i| -1.0 + i as f64 * h).collect();
        let psi_nodes: Vec<f64> = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
        let g = Grid {
            mapping,
            n,
            h,
            x_nodes: Vec::new(),
            x_ifaces: Vec::new(),
            dx_nodes: Vec::new(),
            d2x_nodes: Vec::new(),
            psi_nodes,
            psi_ifaces,
            interval,
        };
        let x_nodes = g.psi_nodes.iter().map(|&p| g.x_of(p)).collect();
        let x_ifaces = g.psi_ifaces.iter().map(|&p| g.x_of(p)).collect();
        let dx_nodes = g.psi_nodes.iter().map(|&p| g.dx_of(p)).collect();
        let d2x_nodes = g.psi_nodes.iter().map(|&p| g.d2x_of(p)).collect();
        Ok(Grid {
            x_nodes,
            x_ifaces,
            dx_nodes,
            d2x_nodes,
            ..g
        })
    }

    pub fn x_of(&self, psi: f64) -> f64 {
        match self.mapping {
            Mapping::Direct => {
                let (a, b) = self.interval;
                0.5 * (a + b) + 0.5 * (b - a) * psi
            }
            Mapping::Truncate(r) => r * psi,
            Mapping::TanCompactify => {
                let half_pi = 0.5 * std::f64::consts::PI;
                (half_pi * psi).tan()
            }
        }
    }

    pub fn dx_of(&self, psi: f64) -> f64 {
        match self.mapping {
            Mapping::Direct => 0.5 * (self.interval.1 - self.interval.0),
            Mapping::Truncate(r) => r,
            Mapping::TanCompactify => {
                let half_pi = 0.5 * std::f64::consts::PI;
                let theta = half_pi * psi;
                half_pi / (theta.cos() * theta.cos())
            }
        }
    }

    pub fn d2x_of(&self, psi: f64) -> f64 {
        match self.mapping {
            Mapping::Direct | Mapping::Truncate(_) => 0.0,
            Mapping::TanCompactify => {
                let half_pi = 0.5 * std::f64::consts::PI;
                let theta = half_pi * psi;
                let sec2 = 1.0 / (theta.cos() * theta.cos());
                2.0 * half_pi * half_pi * sec2 * theta.tan()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn direct_grid_is_uniform() {
        let g = Grid::build((-1.0, 1.0), Mapping::Direct, 100).unwrap();
        assert_eq!(g.x_nodes.len(), 100);
        assert_relative_eq!(g.x_nodes[0], -1.0 + 0.01, max_relative = 1e-14);
        assert_relative_eq!(g.x_ifaces[100], 1.0, max_relative = 1e-14);
        for d in &g.dx_nodes {
            assert_relative_eq!(*d, 1.0);
        }
    }

    #[test]
    fn tan_map_derivatives_match_differences() {
        let g = Grid::build((f64::NEG_INFINITY, f64::INFINITY), Mapping::TanCompactify, 64).unwrap();
        let eps = 1e-6;
        for &p in &[-0.7, -0.2, 0.0, 0.4, 0.9] {
            let num1 = (g.x_of(p + eps) - g.x_of(p - eps)) / (2.0 * eps);
            assert_relative_eq!(g.dx_of(p), num1, max_relative = 1e-7);
            let num2 = (g.dx_of(p + eps) - g.dx_of(p - eps)) / (2.0 * eps);
            assert_relative_eq!(g.d2x_of(p), num2, max_relative = 1e-6);
        }
    }

    #[test]
    fn mapping_domain_checks() {
        assert!(Grid::build((-1.0, 1.0), Mapping::TanCompactify, 32).is_err());
        assert!(Grid::build((f64::NEG_INFINITY, f64::INFINITY), Mapping::Direct, 32).is_err());
        assert!(Grid::build((-1.0, 1.0), Mapping::Direct, 4).is_err());
    }
}
