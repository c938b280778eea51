use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{MomentumGrid, SpatialGrid};
use crate::units::Mass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistributionKind {
    Wigner,
    Husimi,
    Bohmian,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 3] =
        [DistributionKind::Wigner, DistributionKind::Husimi, DistributionKind::Bohmian];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Wigner => "wigner",
            DistributionKind::Husimi => "husimi",
            DistributionKind::Bohmian => "bohmian",
        }
    }
}

/// Real function F(x, p) sampled on `xgrid × pgrid`, stored with x as the row
/// index. Values are in (nm·eV·fs/nm)⁻¹, so that ∫∫F dx dp is a probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceField {
    xgrid: SpatialGrid,
    pgrid: MomentumGrid,
    values: Array2<f64>,
    kind: DistributionKind,
    ensemble_size: Option<usize>,
}

impl PhaseSpaceField {
    pub fn new(
        xgrid: SpatialGrid,
        pgrid: MomentumGrid,
        values: Array2<f64>,
        kind: DistributionKind,
    ) -> Result<Self> {
        if values.dim() != (xgrid.len(), pgrid.len()) {
            return Err(Error::GridMismatch);
        }
        Ok(PhaseSpaceField { xgrid, pgrid, values, kind, ensemble_size: None })
    }

    /// Histogram built from `size` samples (Bohmian fields).
    pub fn with_ensemble_size(mut self, size: usize) -> Self {
        self.ensemble_size = Some(size);
        self
    }

    pub fn xgrid(&self) -> &SpatialGrid {
        &self.xgrid
    }

    pub fn pgrid(&self) -> &MomentumGrid {
        &self.pgrid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn ensemble_size(&self) -> Option<usize> {
        self.ensemble_size
    }

    fn cell(&self) -> f64 {
        self.xgrid.dx() * self.pgrid.dp()
    }

    /// ∫∫F dx dp by the rectangle rule.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.cell()
    }

    /// Rescales to unit integral and returns the previous integral.
    pub fn normalize(&mut self) -> Result<f64> {
        let total = self.integral();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidParameter(format!("field integral {total} cannot be normalized")));
        }
        self.values /= total;
        Ok(total)
    }

    /// Smallest value with its (x, p) location.
    pub fn min_with_location(&self) -> (f64, (f64, f64)) {
        let mut best = (f64::INFINITY, (0, 0));
        for ((i, j), &v) in self.values.indexed_iter() {
            if v < best.0 {
                best = (v, (i, j));
            }
        }
        let (v, (i, j)) = best;
        (v, (self.xgrid.x(i), self.pgrid.p(j)))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Q(x_i) = Σ_j F_ij·dp.
    pub fn marginal_position(&self) -> Vec<f64> {
        let dp = self.pgrid.dp();
        self.values.rows().into_iter().map(|row| row.sum() * dp).collect()
    }

    /// J(x_i) = (1/m)·Σ_j p_j·F_ij·dp, in fs⁻¹.
    pub fn marginal_momentum_flux(&self, mass: Mass) -> Vec<f64> {
        let dp = self.pgrid.dp();
        let m = mass.value();
        let momenta: Vec<f64> = self.pgrid.points().collect();
        self.values
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&momenta).map(|(f, p)| f * p).sum::<f64>() * dp / m)
            .collect()
    }

    /// ∫F dx as a function of p.
    pub fn marginal_momentum(&self) -> Vec<f64> {
        let dx = self.xgrid.dx();
        self.values.columns().into_iter().map(|col| col.sum() * dx).collect()
    }

    /// ∫_{x_lo}^{x_hi} ∫ F dp dx over grid points inside the band.
    pub fn band_mass(&self, x_lo: f64, x_hi: f64) -> f64 {
        let q = self.marginal_position();
        let dx = self.xgrid.dx();
        self.xgrid
            .points()
            .zip(&q)
            .filter(|(x, _)| *x >= x_lo && *x <= x_hi)
            .map(|(_, v)| v * dx)
            .sum()
    }

    /// The columns of `self` on `pgrid`, a central window of the momentum grid.
    pub fn crop_momentum(&self, pgrid: &MomentumGrid) -> Result<PhaseSpaceField> {
        let offset = self.pgrid.window_offset(pgrid).ok_or(Error::GridMismatch)?;
        let values = self.values.slice(s![.., offset..offset + pgrid.len()]).to_owned();
        Ok(PhaseSpaceField { xgrid: self.xgrid, pgrid: *pgrid, values, kind: self.kind, ensemble_size: self.ensemble_size })
    }

    /// max |F(x, p)| over grid points with x inside the band.
    pub fn band_max_abs(&self, x_lo: f64, x_hi: f64) -> f64 {
        self.values
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| {
                let x = self.xgrid.x(*i);
                x >= x_lo && x <= x_hi
            })
            .flat_map(|(_, row)| row.iter().map(|v| v.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// max|F − G| over the common grid.
pub fn field_linf_distance(a: &PhaseSpaceField, b: &PhaseSpaceField) -> Result<f64> {
    if a.xgrid != b.xgrid || a.pgrid != b.pgrid {
        return Err(Error::GridMismatch);
    }
    Ok(a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// ‖a − b‖₁ = Σ|a_i − b_i|·dx.
pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

/// max|a_i − b_i|.
pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
