//! Husimi distribution, computed from coherent-state overlaps and,
//! independently, by Gaussian smoothing of the Wigner function.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DistributionKind, PhaseSpaceField};
use crate::grid::{MomentumGrid, SpatialGrid};
use crate::spectral::{gaussian_kernel, LineConvolver};
use crate::units::{Mass, HBAR, PLANCK};
use crate::wave::{ExactMarginals, WaveFunction};

/// Gaussian tails are dropped beyond this many standard deviations.
const KERNEL_CUTOFF: f64 = 12.0;

/// Minimum-uncertainty probe `g_{x,p}(x′) = (2πs²)^{−1/4}e^{−(x′−x)²/(4s²)}e^{ipx′/ħ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentProbe {
    s: f64,
}

impl CoherentProbe {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!("probe width {s} nm must be positive")));
        }
        Ok(CoherentProbe { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// (2πs²)^{−1/4}
    pub fn normalization(&self) -> f64 {
        (2.0 * PI * self.s * self.s).powf(-0.25)
    }

    /// Real envelope of the probe at offset `u = x′ − x`.
    pub fn envelope(&self, u: f64) -> f64 {
        self.normalization() * (-(u * u) / (4.0 * self.s * self.s)).exp()
    }

    /// Momentum width ħ/(2s) of the probe's Wigner function.
    pub fn momentum_width(&self) -> f64 {
        HBAR / (2.0 * self.s)
    }

    /// Rejects probes the grids cannot resolve: `s < 2dx` or `ħ/(2s) < 2dp`.
    pub fn check_resolution(&self, xgrid: &SpatialGrid, pgrid: &MomentumGrid) -> Result<()> {
        if self.s < 2.0 * xgrid.dx() {
            return Err(Error::ProbeUnresolved {
                s: self.s,
                reason: format!("narrower than two cells of {} nm", xgrid.dx()),
            });
        }
        if self.momentum_width() < 2.0 * pgrid.dp() {
            return Err(Error::ProbeUnresolved {
                s: self.s,
                reason: format!("momentum width below two bins of {}", pgrid.dp()),
            });
        }
        Ok(())
    }
}

/// H(x_i, p_j) = (1/h)|⟨g_{x_i,p_j}|ψ⟩|², normalized to unit integral.
///
/// `pgrid` must have a step `2πħ/(L·dx)` for some integer `L ≥ n`; one
/// zero-padded length-`L` FFT is taken per row.
pub fn husimi_direct(psi: &WaveFunction, probe: &CoherentProbe, pgrid: &MomentumGrid) -> Result<PhaseSpaceField> {
    let xgrid = *psi.grid();
    let n = xgrid.len();
    let dx = xgrid.dx();
    let ratio = 2.0 * PI * HBAR / (pgrid.dp() * dx);
    let fft_len = ratio.round() as usize;
    if (ratio - fft_len as f64).abs() > 1e-6 * ratio || fft_len < n || fft_len < pgrid.len() {
        return Err(Error::InvalidGrid(format!(
            "momentum step {} is not 2πħ/(L·dx) for an integer L >= {n}",
            pgrid.dp()
        )));
    }
    let envelope: Vec<f64> = (0..n).map(|d| probe.envelope(d as f64 * dx)).collect();
    let fft = FftPlanner::new().plan_fft_forward(fft_len);
    let values = psi.values();
    let scale = dx * dx / PLANCK;
    let half = (pgrid.len() / 2) as i64;

    let mut field = Array2::<f64>::zeros((n, pgrid.len()));
    field
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            for (a, (b, v)) in buf.iter_mut().zip(values).enumerate() {
                *b = v * envelope[a.abs_diff(i)];
            }
            fft.process(&mut buf);
            for (slot, out) in row.iter_mut().enumerate() {
                let q = (slot as i64 - half).rem_euclid(fft_len as i64) as usize;
                *out = buf[q].norm_sqr() * scale;
            }
        });
    let mut field = PhaseSpaceField::new(xgrid, *pgrid, field, DistributionKind::Husimi)?;
    field.normalize()?;
    Ok(field)
}

/// Smooths a Wigner field with the probe's own Wigner function
/// `e^{−Δx²/(2s²)}·e^{−2s²Δp²/ħ²}` (separably, x then p), keeps the momenta of
/// `pgrid` (a central window of the Wigner grid) and normalizes.
pub fn husimi_from_wigner(wigner: &PhaseSpaceField, probe: &CoherentProbe, pgrid: &MomentumGrid) -> Result<PhaseSpaceField> {
    if wigner.kind() != DistributionKind::Wigner {
        return Err(Error::InvalidParameter(format!(
            "expected a Wigner field, got {:?}",
            wigner.kind()
        )));
    }
    let xgrid = *wigner.xgrid();
    probe.check_resolution(&xgrid, pgrid)?;
    let p_kernel = gaussian_kernel(pgrid.dp(), probe.momentum_width(), KERNEL_CUTOFF);
    let margin = p_kernel.len() / 2;
    // the window plus the reach of the momentum kernel, as far as W extends
    let available = wigner.pgrid().window_offset(pgrid).ok_or(Error::GridMismatch)?;
    let margin = margin.min(available);
    let padded_grid = MomentumGrid::new(pgrid.len() + 2 * margin, pgrid.dp())?;
    let mut values = wigner.crop_momentum(&padded_grid)?.values().clone();

    let along_x = LineConvolver::new(
        xgrid.len(),
        &gaussian_kernel(xgrid.dx(), probe.s(), KERNEL_CUTOFF),
    );
    values.axis_iter_mut(Axis(1)).into_par_iter().for_each(|mut column| {
        let line: Vec<f64> = column.iter().copied().collect();
        for (out, v) in column.iter_mut().zip(along_x.convolve(&line)) {
            *out = v;
        }
    });
    let along_p = LineConvolver::new(padded_grid.len(), &p_kernel);
    let mut smoothed = Array2::<f64>::zeros((xgrid.len(), pgrid.len()));
    smoothed
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(values.axis_iter(Axis(0)).into_par_iter())
        .for_each(|(mut out, row)| {
            let line = row.to_vec();
            for (o, v) in out.iter_mut().zip(along_p.convolve(&line).into_iter().skip(margin)) {
                *o = v;
            }
        });
    drop(values);

    let mut field = PhaseSpaceField::new(xgrid, *pgrid, smoothed, DistributionKind::Husimi)?;
    field.normalize()?;
    Ok(field)
}

/// G_s ⊛ f with the unit-area Gaussian `G_s(u) = (2πs²)^{−1/2}e^{−u²/(2s²)}`,
/// by direct quadrature on the grid of `f`.
pub fn gaussian_smooth(values: &[f64], grid: &SpatialGrid, s: f64) -> Vec<f64> {
    let dx = grid.dx();
    let kernel = gaussian_kernel(dx, s, KERNEL_CUTOFF);
    let norm = dx / (2.0 * PI * s * s).sqrt();
    let half = (kernel.len() / 2) as i64;
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            let lo = (i - half).max(0);
            let hi = (i + half).min(n - 1);
            (lo..=hi)
                .map(|a| kernel[(a - i + half) as usize] * values[a as usize])
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Closed-form Husimi marginals: Q_H = G_s ⊛ |ψ|² and J_H = G_s ⊛ J, with J
/// the exact current.
pub fn husimi_marginal_oracle(psi: &WaveFunction, probe: &CoherentProbe, mass: Mass) -> Result<ExactMarginals> {
    let exact = ExactMarginals::of(psi, mass)?;
    Ok(ExactMarginals {
        charge: gaussian_smooth(&exact.charge, psi.grid(), probe.s()),
        current: gaussian_smooth(&exact.current, psi.grid(), probe.s()),
    })
}
