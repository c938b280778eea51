use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Two identical rectangular barriers enclosing a well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierGeometry {
    /// Centre of the well (nm).
    pub center: f64,
    /// Barrier height (eV).
    pub height: f64,
    /// Width of each barrier (nm).
    pub width: f64,
    /// Width of the well between the barriers (nm).
    pub well: f64,
}

impl BarrierGeometry {
    /// The two barrier intervals, left first.
    pub fn intervals(&self) -> [(f64, f64); 2] {
        let half = self.well / 2.0;
        [
            (self.center - half - self.width, self.center - half),
            (self.center + half, self.center + half + self.width),
        ]
    }

    /// Outer extent of the structure, both barriers included.
    pub fn band(&self) -> (f64, f64) {
        let half = self.well / 2.0 + self.width;
        (self.center - half, self.center + half)
    }
}

/// Potential energy (eV) at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("potential must be finite".into()));
        }
        Ok(PotentialField { grid, values })
    }

    pub fn zero(grid: SpatialGrid) -> Self {
        PotentialField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// ∫V dx by the rectangle rule (eV·nm).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }
}

/// Double barrier on `grid`. A cell `[x_i − dx/2, x_i + dx/2)` partially
/// covered by a barrier gets the covered fraction of the height.
pub fn make_double_barrier(grid: &SpatialGrid, geometry: BarrierGeometry) -> Result<PotentialField> {
    let BarrierGeometry { height, width, well, .. } = geometry;
    if well < 0.0 {
        return Err(Error::InvalidParameter(format!("well width {well} nm < 0: barriers overlap")));
    }
    if width < 0.0 || !height.is_finite() {
        return Err(Error::InvalidParameter("barrier width and height must be finite, width >= 0".into()));
    }
    let (lo, hi) = geometry.band();
    if lo < grid.x_min() || hi > grid.x_max() {
        return Err(Error::InvalidParameter(format!(
            "structure [{lo}, {hi}] nm does not fit in the grid"
        )));
    }
    let dx = grid.dx();
    let intervals = geometry.intervals();
    let values = grid
        .points()
        .map(|x| {
            let (c_lo, c_hi) = (x - dx / 2.0, x + dx / 2.0);
            let covered: f64 = intervals
                .iter()
                .map(|&(a, b)| (c_hi.min(b) - c_lo.max(a)).max(0.0))
                .sum();
            height * covered / dx
        })
        .collect();
    PotentialField::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> BarrierGeometry {
        BarrierGeometry { center: 150.0, height: 0.2, width: 0.8, well: 3.2 }
    }

    #[test]
    fn area_is_exact() {
        let grid = SpatialGrid::new(0.0, 300.0, 4096).unwrap();
        let v = make_double_barrier(&grid, reference()).unwrap();
        assert!((v.integral() - 0.32).abs() < 1e-12, "{}", v.integral());
        assert!(v.values().iter().all(|&e| (0.0..=0.2 + 1e-15).contains(&e)));
        // well centre and far field are flat
        assert_eq!(v.values()[grid.nearest(150.0)], 0.0);
        assert_eq!(v.values()[grid.nearest(100.0)], 0.0);
        assert!((v.values()[grid.nearest(147.6 + 0.4)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_height_is_free() {
        let grid = SpatialGrid::new(0.0, 300.0, 1024).unwrap();
        let v = make_double_barrier(&grid, BarrierGeometry { height: 0.0, ..reference() }).unwrap();
        assert!(v.values().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn overlapping_barriers_are_rejected() {
        let grid = SpatialGrid::new(0.0, 300.0, 1024).unwrap();
        let r = make_double_barrier(&grid, BarrierGeometry { well: -1.0, ..reference() });
        assert!(r.is_err());
        let r = make_double_barrier(&grid, BarrierGeometry { center: 299.0, ..reference() });
        assert!(r.is_err());
    }

    #[test]
    fn band_of_reference_structure() {
        let (lo, hi) = reference().band();
        assert!((lo - 147.6).abs() < 1e-12 && (hi - 152.4).abs() < 1e-12);
    }
}
