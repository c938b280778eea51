use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::wave::WaveFunction;

/// Largest tail amplitude, relative to the peak, tolerated at the grid edge.
const MAX_TAIL_RATIO: f64 = 1e-8;

/// Minimum-uncertainty Gaussian packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketParams {
    /// Spatial spread (nm); |ψ|² has variance a0².
    pub a0: f64,
    /// Centre (nm).
    pub x0: f64,
    /// Central wave vector (nm⁻¹).
    pub k0: f64,
}

impl PacketParams {
    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if !(self.a0 > 0.0) {
            return Err(Error::InvalidParameter(format!("a0 = {} must be positive", self.a0)));
        }
        if self.x0 < grid.x_min() || self.x0 > grid.x_max() {
            return Err(Error::InvalidParameter(format!("x0 = {} outside the grid", self.x0)));
        }
        let k_limit = PI / (2.0 * grid.dx());
        if self.k0.abs() >= k_limit {
            return Err(Error::InvalidParameter(format!(
                "|k0| = {} exceeds the Wigner band limit {k_limit}",
                self.k0.abs()
            )));
        }
        Ok(())
    }

    /// Continuous amplitude (2πa0²)^{−1/4}·e^{ik0(x−x0)}·e^{−(x−x0)²/(4a0²)}.
    pub fn amplitude(&self, x: f64) -> Complex64 {
        let u = x - self.x0;
        let envelope = (2.0 * PI * self.a0 * self.a0).powf(-0.25) * (-u * u / (4.0 * self.a0 * self.a0)).exp();
        Complex64::from_polar(envelope, self.k0 * u)
    }
}

/// Samples the packet on `grid` and renormalizes it to unit discrete norm.
pub fn make_gaussian_packet(grid: &SpatialGrid, params: PacketParams) -> Result<WaveFunction> {
    params.validate(grid)?;
    let peak = params.amplitude(params.x0).norm();
    let tail = params
        .amplitude(grid.x_min())
        .norm()
        .max(params.amplitude(grid.x(grid.len() - 1)).norm());
    let ratio = tail / peak;
    if ratio > MAX_TAIL_RATIO {
        return Err(Error::DomainTooSmall { ratio, limit: MAX_TAIL_RATIO });
    }
    WaveFunction::from_fn(*grid, |x| params.amplitude(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(0.0, 300.0, 4096).unwrap()
    }

    #[test]
    fn moments_of_reference_packet() {
        let psi = make_gaussian_packet(&grid(), PacketParams { a0: 7.5, x0: 100.0, k0: 0.69 }).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
        assert!((psi.mean_position() - 100.0).abs() < 1e-9);
        assert!((psi.position_variance() - 56.25).abs() < 1e-8);
        let p = psi.mean_momentum() / crate::units::HBAR;
        assert!((p - 0.69).abs() < 1e-10);
    }

    #[test]
    fn resting_packet_is_real() {
        let psi = make_gaussian_packet(&grid(), PacketParams { a0: 7.5, x0: 100.0, k0: 0.0 }).unwrap();
        assert!(psi.values().iter().all(|c| c.im == 0.0));
        assert!(psi.mean_momentum().abs() < 1e-14);
    }

    #[test]
    fn packet_touching_the_edge_is_rejected() {
        let r = make_gaussian_packet(&grid(), PacketParams { a0: 7.5, x0: 20.0, k0: 0.69 });
        assert!(matches!(r, Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn invalid_params() {
        let g = grid();
        assert!(make_gaussian_packet(&g, PacketParams { a0: 0.0, x0: 100.0, k0: 0.0 }).is_err());
        assert!(make_gaussian_packet(&g, PacketParams { a0: 5.0, x0: 400.0, k0: 0.0 }).is_err());
        assert!(make_gaussian_packet(&g, PacketParams { a0: 5.0, x0: 100.0, k0: 30.0 }).is_err());
    }
}
