use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::HBAR;

/// Uniform grid `x_i = x_min + i·dx`, `i ∈ [0, n)`, with `dx = (x_max − x_min)/n`.
///
/// `n` is a power of two, at least 16.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 16 {
            return Err(Error::InvalidGrid(format!(
                "point count {n} must be a power of two >= 16"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "bounds [{x_min}, {x_max}] must be finite and increasing"
            )));
        }
        Ok(SpatialGrid { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Index of the cell `[x_i − dx/2, x_i + dx/2)` containing `x`, if any.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let u = ((x - self.x_min) / self.dx() + 0.5).floor();
        if u >= 0.0 && u < self.n as f64 {
            Some(u as usize)
        } else {
            None
        }
    }

    /// Grid index closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let u = ((x - self.x_min) / self.dx()).round();
        u.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Grid whose cells are unions of `factor` consecutive cells of this one.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !factor.is_power_of_two() || self.n / factor < 16 {
            return Err(Error::InvalidGrid(format!("cannot coarsen {} points by {factor}", self.n)));
        }
        let shift = (factor - 1) as f64 * self.dx() / 2.0;
        SpatialGrid::new(self.x_min + shift, self.x_max + shift, self.n / factor)
    }

    /// Wave-vector resolution of a length-`n` FFT over this grid (nm⁻¹).
    pub fn fft_dk(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx())
    }
}

/// Momentum axis `p_j = j·dp`, `j ∈ [−n/2, n/2)`, stored in ascending order.
/// Momenta are ħk in eV·fs/nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    n: usize,
    dp: f64,
}

impl MomentumGrid {
    pub fn new(n: usize, dp: f64) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("momentum point count {n} must be even")));
        }
        if !(dp.is_finite() && dp > 0.0) {
            return Err(Error::InvalidGrid(format!("momentum step {dp} must be positive")));
        }
        Ok(MomentumGrid { n, dp })
    }

    /// Grid conjugate to a transform variable with step `dx_eff`:
    /// `dp·dx_eff = 2πħ/n`.
    pub fn conjugate(n: usize, dx_eff: f64) -> Result<Self> {
        Self::new(n, 2.0 * PI * HBAR / (n as f64 * dx_eff))
    }

    /// Momentum grid of the Wigner transform: `2n` points with
    /// `dp = πħ/(n·dx)`, covering |p| < πħ/dx.
    pub fn wigner(grid: &SpatialGrid) -> Self {
        Self::conjugate(2 * grid.len(), grid.dx()).expect("spatial grid is valid")
    }

    /// Central half of [`MomentumGrid::wigner`]: `n` points covering
    /// |p| < πħ/(2dx). Used for the Husimi and Bohmian fields.
    pub fn half_band(grid: &SpatialGrid) -> Self {
        Self::conjugate(grid.len(), 2.0 * grid.dx()).expect("spatial grid is valid")
    }

    /// Index in `self` of slot 0 of `inner`, if `inner` is a central window of
    /// `self` with the same step.
    pub fn window_offset(&self, inner: &MomentumGrid) -> Option<usize> {
        let same_step = (self.dp - inner.dp).abs() <= 1e-12 * self.dp;
        (same_step && inner.n <= self.n).then(|| (self.n - inner.n) / 2)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    /// Signed frequency index of storage slot `idx`.
    pub fn index(&self, idx: usize) -> i64 {
        idx as i64 - (self.n / 2) as i64
    }

    pub fn p(&self, idx: usize) -> f64 {
        self.index(idx) as f64 * self.dp
    }

    pub fn p_min(&self) -> f64 {
        self.p(0)
    }

    pub fn p_max(&self) -> f64 {
        self.p(self.n - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.p(j))
    }

    /// Storage slot of the bin `[p_j − dp/2, p_j + dp/2)` containing `p`, if any.
    pub fn cell_of(&self, p: f64) -> Option<usize> {
        let u = (p / self.dp + 0.5).floor() + (self.n / 2) as f64;
        if u >= 0.0 && u < self.n as f64 {
            Some(u as usize)
        } else {
            None
        }
    }

    /// Storage slot whose momentum is closest to `p`, clamped to the grid.
    pub fn nearest(&self, p: f64) -> usize {
        let u = (p / self.dp).round() + (self.n / 2) as f64;
        u.clamp(0.0, (self.n - 1) as f64) as usize
    }
}
