use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::spectral::spectral_derivative;
use crate::units::{Mass, HBAR};

/// Default node threshold, as a fraction of max|ψ|².
pub const DEFAULT_NODE_THRESHOLD: f64 = 1e-6;

/// Complex amplitudes (nm^−1/2) on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        Ok(WaveFunction { grid, values })
    }

    /// Builds the state and rescales it to unit norm.
    pub fn normalized(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        let mut psi = Self::new(grid, values)?;
        psi.normalize()?;
        Ok(psi)
    }

    /// Samples `f` at every grid point and normalizes.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::normalized(grid, values)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sq().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::VanishingWaveFunction);
        }
        for c in &mut self.values {
            *c /= norm;
        }
        Ok(())
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Σ|ψ_i|²·dx.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// |ψ|² at each grid point.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Spectral derivative ∂ψ/∂x.
    pub fn derivative(&self) -> Vec<Complex64> {
        spectral_derivative(&self.values, self.grid.dx())
    }

    pub fn mean_position(&self) -> f64 {
        let dx = self.grid.dx();
        self.grid
            .points()
            .zip(&self.values)
            .map(|(x, c)| x * c.norm_sqr() * dx)
            .sum::<f64>()
            / self.norm_sq()
    }

    pub fn position_variance(&self) -> f64 {
        let mean = self.mean_position();
        let dx = self.grid.dx();
        self.grid
            .points()
            .zip(&self.values)
            .map(|(x, c)| (x - mean).powi(2) * c.norm_sqr() * dx)
            .sum::<f64>()
            / self.norm_sq()
    }

    /// ⟨p⟩ in eV·fs/nm.
    pub fn mean_momentum(&self) -> f64 {
        let d = self.derivative();
        let dx = self.grid.dx();
        HBAR * self
            .values
            .iter()
            .zip(&d)
            .map(|(c, dc)| (c.conj() * dc).im * dx)
            .sum::<f64>()
            / self.norm_sq()
    }

    /// Largest |ψ| within the outer `fraction` of the domain on either side,
    /// relative to the global max|ψ|.
    pub fn edge_ratio(&self, fraction: f64) -> f64 {
        let n = self.values.len();
        let width = ((n as f64 * fraction).ceil() as usize).clamp(1, n / 2);
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let edge = self.values[..width]
            .iter()
            .chain(&self.values[n - width..])
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        edge / peak
    }

    /// L² distance ‖ψ − φ‖ on the common grid.
    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((sum * self.grid.dx()).sqrt())
    }
}

/// ψ = R·e^{iθ} with S = ħθ. Only the local phase gradient is kept; the phase
/// itself is never unwrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition {
    /// R = |ψ| (nm^−1/2).
    pub amplitude: Vec<f64>,
    /// ∂θ/∂x = Im(ψ*·∂ψ/∂x)/|ψ|² in nm⁻¹; zero where `valid` is false.
    pub phase_gradient: Vec<f64>,
    /// R²·∂θ/∂x = Im(ψ*·∂ψ/∂x), finite everywhere including nodes.
    pub phase_flux: Vec<f64>,
    /// Points with |ψ|² ≥ node_threshold·max|ψ|².
    pub valid: Vec<bool>,
}

pub fn polar_decompose(psi: &WaveFunction, node_threshold: f64) -> Result<PolarDecomposition> {
    if !(node_threshold > 0.0 && node_threshold <= 1e-3) {
        return Err(Error::InvalidParameter(format!(
            "node threshold {node_threshold} outside (0, 1e-3]"
        )));
    }
    let density = psi.density();
    let peak = density.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::VanishingWaveFunction);
    }
    let derivative = psi.derivative();
    let phase_flux: Vec<f64> = psi
        .values()
        .iter()
        .zip(&derivative)
        .map(|(c, dc)| (c.conj() * dc).im)
        .collect();
    let valid: Vec<bool> = density.iter().map(|&r2| r2 >= node_threshold * peak).collect();
    let phase_gradient = phase_flux
        .iter()
        .zip(&density)
        .zip(&valid)
        .map(|((&f, &r2), &ok)| if ok { f / r2 } else { 0.0 })
        .collect();
    Ok(PolarDecomposition {
        amplitude: density.iter().map(|r2| r2.sqrt()).collect(),
        phase_gradient,
        phase_flux,
        valid,
    })
}

/// Charge and current densities implied directly by ψ:
/// Q = |ψ|² and J = (ħ/m)·R²·∂θ/∂x.
///
/// These are the reference marginals for every phase-space distribution. The
/// Wigner and Bohmian oracles both return exactly this.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMarginals {
    /// nm⁻¹
    pub charge: Vec<f64>,
    /// fs⁻¹
    pub current: Vec<f64>,
}

impl ExactMarginals {
    pub fn of(psi: &WaveFunction, mass: Mass) -> Result<Self> {
        let polar = polar_decompose(psi, DEFAULT_NODE_THRESHOLD)?;
        let hbar_over_m = mass.hbar_over_m();
        Ok(ExactMarginals {
            charge: psi.density(),
            current: polar.phase_flux.iter().map(|f| hbar_over_m * f).collect(),
        })
    }
}
