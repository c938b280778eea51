//! Discrete Wigner–Weyl transform of a pure state.
//!
//! The transform variable is sampled at offsets `y = m·dx`. Odd `m` need ψ half
//! a cell off the grid, which is taken from the band-limited (Fourier)
//! interpolant of the samples. The conjugate momentum step is `πħ/(n·dx)` and
//! the `2n` momenta cover |p| < πħ/dx, the whole band the grid can carry. For
//! states confined to |k| < π/(2dx) this agrees with the even-offset sum
//! `y = 2m·dx`, which needs no interpolation.
//!
//! Sign convention: `W(x, p) = (1/h)∫ψ(x + y/2)ψ*(x − y/2)e^{−ipy/ħ}dy`, so a
//! packet moving with wave vector k₀ peaks at p = +ħk₀.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::{DistributionKind, PhaseSpaceField};
use crate::grid::{MomentumGrid, SpatialGrid};
use crate::solver::PacketParams;
use crate::units::{Mass, HBAR, PLANCK};
use crate::wave::{ExactMarginals, WaveFunction};

/// Largest tolerated Im/Re ratio of the assembled transform.
pub const MAX_IMAGINARY_RESIDUE: f64 = 1e-10;

/// Largest probability tolerated near the grid's Nyquist wave vector.
const MAX_UNRESOLVED: f64 = 1e-8;

/// States must be resolved below this fraction of the Nyquist wave vector π/dx.
const RESOLVED_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerTransformPlan {
    xgrid: SpatialGrid,
    pgrid: MomentumGrid,
}

impl WignerTransformPlan {
    pub fn new(xgrid: SpatialGrid) -> Self {
        WignerTransformPlan { xgrid, pgrid: MomentumGrid::wigner(&xgrid) }
    }

    pub fn xgrid(&self) -> &SpatialGrid {
        &self.xgrid
    }

    pub fn pgrid(&self) -> &MomentumGrid {
        &self.pgrid
    }

    /// Headroom limit π/(2dx) in nm⁻¹ for the initial packet.
    pub fn k_limit(&self) -> f64 {
        PI / (2.0 * self.xgrid.dx())
    }

    /// Wave vector above which a state counts as unresolved, in nm⁻¹.
    pub fn k_resolved(&self) -> f64 {
        RESOLVED_FRACTION * PI / self.xgrid.dx()
    }

    /// Requires |k₀| + 5σ_k below the band edge, with σ_k = 1/(2a₀).
    pub fn check_packet(&self, params: &PacketParams) -> Result<()> {
        let reach = params.k0.abs() + 5.0 / (2.0 * params.a0);
        if reach >= self.k_limit() {
            return Err(Error::NyquistViolation { outside: reach, k_max: self.k_limit() });
        }
        Ok(())
    }

    /// Requires the spectral weight of `psi` near the grid's Nyquist wave
    /// vector to be negligible.
    pub fn check_state(&self, psi: &WaveFunction) -> Result<()> {
        if psi.grid() != &self.xgrid {
            return Err(Error::GridMismatch);
        }
        let n = psi.values().len();
        let mut buf = psi.values().to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
        // FFT slot q carries k = q·2π/(n·dx); Nyquist is at q = n/2
        let edge = (RESOLVED_FRACTION * n as f64 / 2.0).round() as usize;
        let outside: f64 = buf
            .iter()
            .enumerate()
            .filter(|(q, _)| {
                let signed = if *q < n / 2 { *q as i64 } else { *q as i64 - n as i64 };
                signed.unsigned_abs() as usize >= edge
            })
            .map(|(_, c)| c.norm_sqr())
            .sum::<f64>()
            / total;
        log::debug!("spectral weight beyond {:.3} nm^-1: {outside:.3e}", self.k_resolved());
        if outside > MAX_UNRESOLVED {
            return Err(Error::NyquistViolation { outside, k_max: self.k_resolved() });
        }
        Ok(())
    }
}

/// Wigner distribution of `psi`; ψ is taken as zero outside the grid.
pub fn wigner_transform(psi: &WaveFunction, plan: &WignerTransformPlan) -> Result<PhaseSpaceField> {
    let (field, residue) = wigner_transform_with_residue(psi, plan)?;
    if residue > MAX_IMAGINARY_RESIDUE {
        return Err(Error::ImaginaryResidue { residue });
    }
    Ok(field)
}

/// Same as [`wigner_transform`], also returning `max|Im| / max|Re|` of the
/// discarded imaginary part, without enforcing a bound on it.
pub fn wigner_transform_with_residue(
    psi: &WaveFunction,
    plan: &WignerTransformPlan,
) -> Result<(PhaseSpaceField, f64)> {
    plan.check_state(psi)?;
    let n = plan.xgrid.len();
    let len = 2 * n;
    let fine = half_step_samples(psi);
    let prefactor = plan.xgrid.dx() / PLANCK;
    let fft = FftPlanner::new().plan_fft_forward(len);

    let mut field = Array2::<f64>::zeros((n, len));
    let mut row_extrema = vec![(0.0f64, 0.0f64); n];
    field
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(row_extrema.par_iter_mut())
        .enumerate()
        .for_each(|(i, (mut row, extrema))| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            let c = 2 * i;
            let reach = c.min(len - 1 - c);
            for m in 0..=reach {
                let product = fine[c + m] * fine[c - m].conj();
                buf[m] = product;
                if m > 0 {
                    buf[len - m] = product.conj();
                }
            }
            fft.process(&mut buf);
            let (mut max_re, mut max_im) = (0.0f64, 0.0f64);
            for (slot, out) in row.iter_mut().enumerate() {
                let c = buf[(slot + n) % len];
                *out = prefactor * c.re;
                max_re = max_re.max(c.re.abs());
                max_im = max_im.max(c.im.abs());
            }
            *extrema = (max_re * prefactor, max_im * prefactor);
        });

    let (max_re, max_im) = row_extrema
        .iter()
        .fold((0.0f64, 0.0f64), |acc, e| (acc.0.max(e.0), acc.1.max(e.1)));
    let residue = if max_re > 0.0 { max_im / max_re } else { 0.0 };
    let field = PhaseSpaceField::new(plan.xgrid, plan.pgrid, field, DistributionKind::Wigner)?;
    Ok((field, residue))
}

/// ψ on the half-step grid `x_min + a·dx/2`, `a < 2n`: even `a` are the
/// samples, odd `a` come from the band-limited interpolant. The Nyquist mode,
/// which vanishes half-way between samples, is dropped there.
pub fn half_step_samples(psi: &WaveFunction) -> Vec<Complex64> {
    let n = psi.values().len();
    let mut planner = FftPlanner::new();
    let mut buf = psi.values().to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (q, c) in buf.iter_mut().enumerate() {
        let signed = if q < n / 2 { q as f64 } else { q as f64 - n as f64 };
        *c *= if q == n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(1.0 / n as f64, PI * signed / n as f64)
        };
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut fine = Vec::with_capacity(2 * n);
    for (v, h) in psi.values().iter().zip(&buf) {
        fine.push(*v);
        fine.push(*h);
    }
    fine
}

/// W(x_i, p) by direct summation over offsets, for any momentum `p`.
pub fn wigner_point(psi: &WaveFunction, i: usize, p: f64) -> f64 {
    let fine = half_step_samples(psi);
    let dx = psi.grid().dx();
    let c = 2 * i;
    let reach = c.min(fine.len() - 1 - c);
    let mut sum = fine[c].norm_sqr();
    for m in 1..=reach {
        let product = fine[c + m] * fine[c - m].conj();
        let phase = Complex64::from_polar(1.0, -p * m as f64 * dx / HBAR);
        sum += 2.0 * (product * phase).re;
    }
    dx / PLANCK * sum
}

/// |ψ̃(p)|² on `pgrid` for the band-limited interpolant of ψ, with
/// ψ̃(p) = h^{−1/2}∫ψ(x)e^{−ipx/ħ}dx. `pgrid` must have the Wigner step.
pub fn momentum_density(psi: &WaveFunction, pgrid: &MomentumGrid) -> Vec<f64> {
    let fine = half_step_samples(psi);
    // p_j = j·πħ/(n·dx) is bin j of a length-4n transform on the half-step grid
    let padded = 2 * fine.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    buf[..fine.len()].copy_from_slice(&fine);
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let h = psi.grid().dx() / 2.0;
    let half = pgrid.len() / 2;
    (0..pgrid.len())
        .map(|slot| {
            let q = (slot as i64 - half as i64).rem_euclid(padded as i64) as usize;
            buf[q].norm_sqr() * h * h / PLANCK
        })
        .collect()
}

/// Closed-form marginals the Wigner function must reproduce: Q = |ψ|² and
/// J = (ħ/m)R²∂θ/∂x.
pub fn wigner_marginal_oracle(psi: &WaveFunction, mass: Mass) -> Result<ExactMarginals> {
    ExactMarginals::of(psi, mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Negativity {
    /// −∫∫min(W, 0)dx dp.
    pub neg_mass: f64,
    pub min_value: f64,
    /// (x, p) of the minimum.
    pub argmin: (f64, f64),
}

pub fn negativity_volume(field: &PhaseSpaceField) -> Result<Negativity> {
    if field.kind() != DistributionKind::Wigner {
        return Err(Error::InvalidParameter(format!(
            "negativity volume requires a Wigner field, got {:?}",
            field.kind()
        )));
    }
    Ok(negativity_of(field))
}

pub(crate) fn negativity_of(field: &PhaseSpaceField) -> Negativity {
    let cell = field.xgrid().dx() * field.pgrid().dp();
    let neg_mass = -field.values().iter().map(|&v| v.min(0.0)).sum::<f64>() * cell;
    let (min_value, argmin) = field.min_with_location();
    Negativity { neg_mass, min_value, argmin }
}

/// Decomposition of W(x, p) through φ(r) = ψ(r)e^{−ipr/ħ}:
///
/// ∫|φ(r) + φ(2x − r)|²dr − ∫|φ(r)|²dr − ∫|φ(2x − r)|²dr = c·W(x, p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationCheck {
    /// The three-integral combination.
    pub combination: f64,
    /// W(x, p) evaluated by direct summation.
    pub wigner: f64,
    /// Proportionality constant c.
    pub constant: f64,
    /// |combination − c·W| relative to the size of the integrals.
    pub residual: f64,
}

/// Evaluates the correlation form at grid point `i` and momentum `p`.
pub fn correlation_form_check(psi: &WaveFunction, i: usize, p: f64, constant: f64) -> CorrelationCheck {
    let grid = psi.grid();
    let n = grid.len();
    let dx = grid.dx();
    let phi = |a: i64| -> Complex64 {
        if a < 0 || a >= n as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            psi.values()[a as usize] * Complex64::from_polar(1.0, -p * grid.x(a as usize) / HBAR)
        }
    };
    let (mut sum_pair, mut sum_direct, mut sum_mirror) = (0.0, 0.0, 0.0);
    for a in 0..n as i64 {
        let direct = phi(a);
        let mirror = phi(2 * i as i64 - a);
        sum_pair += (direct + mirror).norm_sqr() * dx;
        sum_direct += direct.norm_sqr() * dx;
        sum_mirror += mirror.norm_sqr() * dx;
    }
    let combination = sum_pair - sum_direct - sum_mirror;
    let wigner = wigner_point(psi, i, p);
    let scale = (sum_direct + sum_mirror).max(f64::MIN_POSITIVE);
    CorrelationCheck {
        combination,
        wigner,
        constant,
        residual: (combination - constant * wigner).abs() / scale,
    }
}

/// Fixes c by matching the combination to W at the centre of a Gaussian packet
/// on `grid`.
pub fn calibrate_correlation_constant(grid: &SpatialGrid) -> Result<f64> {
    let width = grid.x_max() - grid.x_min();
    let params = PacketParams {
        a0: width / 40.0,
        x0: grid.x_min() + width / 2.0,
        k0: 0.0,
    };
    let psi = crate::solver::make_gaussian_packet(grid, params)?;
    let i = grid.nearest(params.x0);
    let check = correlation_form_check(&psi, i, 0.0, 1.0);
    Ok(check.combination / check.wigner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::make_gaussian_packet;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(-60.0, 60.0, 1024).unwrap()
    }

    /// (1/πħ)·e^{−(x−x₀)²/(2a₀²)}·e^{−2a₀²(p−ħk₀)²/ħ²}
    fn gaussian_wigner(params: &PacketParams, x: f64, p: f64) -> f64 {
        let a = params.a0;
        let u = x - params.x0;
        let q = p - HBAR * params.k0;
        (-(u * u) / (2.0 * a * a) - 2.0 * a * a * q * q / (HBAR * HBAR)).exp() / (PI * HBAR)
    }

    #[test]
    fn gaussian_packet_matches_closed_form() {
        let params = PacketParams { a0: 5.0, x0: -3.0, k0: 0.69 };
        let psi = make_gaussian_packet(&grid(), params).unwrap();
        let plan = WignerTransformPlan::new(grid());
        let (w, residue) = wigner_transform_with_residue(&psi, &plan).unwrap();
        assert!(residue < MAX_IMAGINARY_RESIDUE, "{residue}");
        let peak = 1.0 / (PI * HBAR);
        for ((i, j), &v) in w.values().indexed_iter() {
            let exact = gaussian_wigner(&params, grid().x(i), plan.pgrid().p(j));
            assert!((v - exact).abs() < 1e-9 * peak, "({i},{j}) {v} vs {exact}");
        }
        assert!((w.integral() - 1.0).abs() < 1e-6);
        let neg = negativity_volume(&w).unwrap();
        assert!(neg.neg_mass < 1e-9);
    }

    #[test]
    fn cat_state_interference() {
        // ψ ∝ g(x − d) + g(x + d), d ≫ a₀: W(0, p) ≈ (1/πħ)e^{−2a²p²/ħ²}cos(2pd/ħ)
        let (a, d) = (2.0, 20.0);
        let g = |x: f64| (-(x * x) / (4.0 * a * a)).exp();
        let psi = WaveFunction::from_fn(grid(), |x| Complex64::new(g(x - d) + g(x + d), 0.0)).unwrap();
        let plan = WignerTransformPlan::new(grid());
        let w = wigner_transform(&psi, &plan).unwrap();
        let i0 = grid().nearest(0.0);
        for j in 0..plan.pgrid().len() {
            let p = plan.pgrid().p(j);
            let exact = (-2.0 * a * a * p * p / (HBAR * HBAR)).exp() * (2.0 * p * d / HBAR).cos() / (PI * HBAR);
            assert!((w.values()[[i0, j]] - exact).abs() < 1e-8 / (PI * HBAR), "p={p}");
        }
        let neg = negativity_volume(&w).unwrap();
        assert!(neg.argmin.0.abs() < 0.5, "{:?}", neg.argmin);
        // nearest minimum of cos(2pd/ħ) sits half a period πħ/d away from p = 0
        assert!((neg.argmin.1.abs() - PI * HBAR / (2.0 * d)).abs() < plan.pgrid().dp());
        assert!(neg.neg_mass > 0.1);
    }

    #[test]
    fn marginals_are_exact() {
        let params = PacketParams { a0: 4.0, x0: 5.0, k0: -0.4 };
        let mut psi = make_gaussian_packet(&grid(), params).unwrap();
        // add a second, faster component to get a non-trivial phase
        let other = make_gaussian_packet(&grid(), PacketParams { a0: 3.0, x0: -10.0, k0: 1.1 }).unwrap();
        let sum: Vec<Complex64> = psi.values().iter().zip(other.values()).map(|(a, b)| a + 0.7 * b).collect();
        psi = WaveFunction::normalized(grid(), sum).unwrap();

        let plan = WignerTransformPlan::new(grid());
        let w = wigner_transform(&psi, &plan).unwrap();
        let mass = Mass::from_m0(0.2);
        let oracle = wigner_marginal_oracle(&psi, mass).unwrap();
        let q = w.marginal_position();
        let peak = oracle.charge.iter().cloned().fold(0.0, f64::max);
        for (a, b) in q.iter().zip(&oracle.charge) {
            assert!((a - b).abs() < 1e-8 * peak);
        }
        let j = w.marginal_momentum_flux(mass);
        let (mut num, mut den) = (0.0, 0.0);
        for ((a, b), rho) in j.iter().zip(&oracle.current).zip(&oracle.charge) {
            if *rho > 1e-6 * peak {
                num += (a - b).powi(2);
                den += b * b;
            }
        }
        assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());

        let pm = w.marginal_momentum();
        let exact = momentum_density(&psi, plan.pgrid());
        for (a, b) in pm.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn galilean_shift_moves_w_by_whole_slots() {
        let psi = make_gaussian_packet(&grid(), PacketParams { a0: 4.0, x0: 0.0, k0: 0.3 }).unwrap();
        let plan = WignerTransformPlan::new(grid());
        let shift = 10usize;
        let dk = plan.pgrid().dp() / HBAR;
        let boosted: Vec<Complex64> = grid()
            .points()
            .zip(psi.values())
            .map(|(x, c)| c * Complex64::from_polar(1.0, shift as f64 * dk * x))
            .collect();
        let boosted = WaveFunction::new(grid(), boosted).unwrap();
        let w0 = wigner_transform(&psi, &plan).unwrap();
        let w1 = wigner_transform(&boosted, &plan).unwrap();
        let n = plan.pgrid().len();
        for i in 0..grid().len() {
            for j in 0..n - shift {
                assert!((w0.values()[[i, j]] - w1.values()[[i, j + shift]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn magnitude_bounded_by_two_over_h() {
        let (a, d) = (1.5, 12.0);
        let psi = WaveFunction::from_fn(grid(), |x| {
            Complex64::from_polar((-(x - d).powi(2) / (4.0 * a * a)).exp(), 0.5 * x)
                - Complex64::new((-(x + d).powi(2) / (4.0 * a * a)).exp(), 0.0)
        })
        .unwrap();
        let w = wigner_transform(&psi, &WignerTransformPlan::new(grid())).unwrap();
        assert!(w.max_abs() <= 2.0 / PLANCK * (1.0 + 1e-8));
    }

    #[test]
    fn out_of_band_state_is_rejected() {
        let k = 0.9 * PI / grid().dx();
        let psi = WaveFunction::from_fn(grid(), |x| Complex64::from_polar((-(x * x) / 16.0).exp(), k * x)).unwrap();
        let r = wigner_transform(&psi, &WignerTransformPlan::new(grid()));
        assert!(matches!(r, Err(Error::NyquistViolation { .. })));
        let plan = WignerTransformPlan::new(grid());
        assert!(plan.check_packet(&PacketParams { a0: 5.0, x0: 0.0, k0: k }).is_err());
        assert!(plan.check_packet(&PacketParams { a0: 5.0, x0: 0.0, k0: 0.69 }).is_ok());
    }

    #[test]
    fn correlation_form_is_proportional_to_w() {
        let c = calibrate_correlation_constant(&grid()).unwrap();
        assert!((c - PLANCK).abs() < 1e-8 * PLANCK, "{c}");
        let params = PacketParams { a0: 5.0, x0: 3.0, k0: 0.69 };
        let psi = make_gaussian_packet(&grid(), params).unwrap();
        let i = grid().nearest(3.0);
        let check = correlation_form_check(&psi, i, HBAR * 0.69, c);
        assert!(check.residual < 1e-8);
        // matches the FFT-assembled transform too
        let plan = WignerTransformPlan::new(grid());
        let w = wigner_transform(&psi, &plan).unwrap();
        let j = plan.pgrid().nearest(HBAR * 0.69);
        let on_grid = correlation_form_check(&psi, i, plan.pgrid().p(j), c);
        assert!((on_grid.wigner - w.values()[[i, j]]).abs() < 1e-12);
    }

    #[test]
    fn odd_correlation_gives_negative_w() {
        // ψ odd about x = 0 and p = 0 ⇒ φ(r) = −φ(−r) ⇒ W(0, 0) < 0
        let psi = WaveFunction::from_fn(grid(), |x| Complex64::new(x * (-(x * x) / 20.0).exp(), 0.0)).unwrap();
        let c = calibrate_correlation_constant(&grid()).unwrap();
        let i = grid().nearest(0.0);
        let check = correlation_form_check(&psi, i, 0.0, c);
        assert!(check.wigner < 0.0);
        assert!(check.combination < 0.0);
        assert!(check.residual < 1e-8);
    }
}
