//! Potential, initial packet and Crank–Nicolson propagation.

mod crank_nicolson;
mod packet;
mod potential;
mod tridiagonal;

pub use crank_nicolson::{evolve, evolve_observed, CrankNicolson, EvolutionPlan, MAX_EDGE_RATIO, MAX_NORM_DRIFT};
pub use packet::{make_gaussian_packet, PacketParams};
pub use potential::{make_double_barrier, BarrierGeometry, PotentialField};
pub use tridiagonal::TridiagonalLu;

use crate::error::{Error, Result};
use crate::wave::WaveFunction;

/// Result of [`transmission_coefficient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    /// Σ_{x_i > boundary} |ψ_i|²·dx.
    pub probability: f64,
    /// Largest |ψ|² within `window` of the boundary relative to max|ψ|².
    pub boundary_density: f64,
}

impl Transmission {
    /// Whether the packet has cleanly separated at the boundary.
    pub fn is_split(&self) -> bool {
        self.boundary_density < 1e-6
    }
}

/// Probability found to the right of `boundary`.
pub fn transmission_coefficient(psi: &WaveFunction, boundary: f64, window: f64) -> Result<Transmission> {
    let grid = psi.grid();
    if boundary <= grid.x_min() || boundary >= grid.x_max() {
        return Err(Error::InvalidParameter(format!("boundary {boundary} nm outside the grid")));
    }
    let density = psi.density();
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let dx = grid.dx();
    let mut probability = 0.0;
    let mut near = 0.0f64;
    for (x, &rho) in grid.points().zip(&density) {
        if x > boundary {
            probability += rho * dx;
        }
        if (x - boundary).abs() <= window {
            near = near.max(rho);
        }
    }
    let result = Transmission {
        probability: probability.clamp(0.0, 1.0),
        boundary_density: if peak > 0.0 { near / peak } else { 0.0 },
    };
    if !result.is_split() {
        log::warn!(
            "density {:.3e} of peak remains near {boundary} nm; split not complete",
            result.boundary_density
        );
    }
    Ok(result)
}
