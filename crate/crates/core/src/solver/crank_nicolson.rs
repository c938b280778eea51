use num_complex::Complex64;

use super::potential::PotentialField;
use super::tridiagonal::TridiagonalLu;
use crate::error::{Error, Result};
use crate::units::{Mass, HBAR};
use crate::wave::WaveFunction;

/// Largest tolerated |‖ψ‖² − 1| over a run.
pub const MAX_NORM_DRIFT: f64 = 1e-8;

/// Largest tolerated edge amplitude relative to max|ψ|.
pub const MAX_EDGE_RATIO: f64 = 1e-4;

/// Fraction of the domain on each side that counts as "edge".
const EDGE_FRACTION: f64 = 0.01;

/// Steps between boundary checks.
const EDGE_CHECK_INTERVAL: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionPlan {
    dt: f64,
    snapshot_times: Vec<f64>,
    mass: Mass,
}

impl EvolutionPlan {
    /// `snapshot_times` (fs) must be non-negative, ascending multiples of `dt`.
    pub fn new(dt: f64, snapshot_times: Vec<f64>, mass: Mass) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
        }
        if !(mass.m0_ratio() > 0.0) {
            return Err(Error::InvalidParameter("mass must be positive".into()));
        }
        let mut previous = -1.0;
        for &t in &snapshot_times {
            if t < 0.0 || t <= previous {
                return Err(Error::InvalidParameter(format!(
                    "snapshot times must be non-negative and strictly ascending (got {t})"
                )));
            }
            let steps = t / dt;
            if (steps - steps.round()).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!("snapshot {t} fs is not a multiple of dt = {dt} fs")));
            }
            previous = t;
        }
        Ok(EvolutionPlan { dt, snapshot_times, mass })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn snapshot_times(&self) -> &[f64] {
        &self.snapshot_times
    }

    pub fn mass(&self) -> Mass {
        self.mass
    }

    pub fn steps_to(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.snapshot_times.last().map_or(0, |&t| self.steps_to(t))
    }
}

/// One Crank–Nicolson propagator `(1 + iHΔt/2ħ)ψⁿ⁺¹ = (1 − iHΔt/2ħ)ψⁿ` for
/// the finite-difference Hamiltonian with hard walls just outside the grid.
///
/// A negative `dt` propagates backwards.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    lu: TridiagonalLu,
    rhs_diag: Vec<Complex64>,
    rhs_off: Complex64,
    h_diag: Vec<f64>,
    h_off: f64,
    dx: f64,
    dt: f64,
}

impl CrankNicolson {
    pub fn new(potential: &PotentialField, mass: Mass, dt: f64) -> Result<Self> {
        if dt == 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step {dt} must be finite and non-zero")));
        }
        let dx = potential.grid().dx();
        let kinetic = mass.kinetic_scale() / (dx * dx);
        let h_diag: Vec<f64> = potential.values().iter().map(|v| 2.0 * kinetic + v).collect();
        let h_off = -kinetic;

        let c = Complex64::new(0.0, dt / (2.0 * HBAR));
        let n = h_diag.len();
        let lhs_diag: Vec<Complex64> = h_diag.iter().map(|&h| 1.0 + c * h).collect();
        let lhs_off = vec![c * h_off; n - 1];
        let lu = TridiagonalLu::new(&lhs_off, &lhs_diag, &lhs_off)?;
        Ok(CrankNicolson {
            lu,
            rhs_diag: h_diag.iter().map(|&h| 1.0 - c * h).collect(),
            rhs_off: -c * h_off,
            h_diag,
            h_off,
            dx,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &mut [Complex64]) {
        let n = psi.len();
        let mut rhs = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = self.rhs_diag[i] * psi[i];
            if i > 0 {
                s += self.rhs_off * psi[i - 1];
            }
            if i + 1 < n {
                s += self.rhs_off * psi[i + 1];
            }
            rhs.push(s);
        }
        self.lu.solve_in_place(&mut rhs);
        psi.copy_from_slice(&rhs);
    }

    /// One step applied to a wave function.
    pub fn advance(&self, psi: &mut WaveFunction) {
        self.step(psi.values_mut());
    }

    /// ⟨ψ|H|ψ⟩ with the discrete Hamiltonian (eV).
    pub fn energy(&self, psi: &WaveFunction) -> f64 {
        let v = psi.values();
        let n = v.len();
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mut h = self.h_diag[i] * v[i];
            if i > 0 {
                h += self.h_off * v[i - 1];
            }
            if i + 1 < n {
                h += self.h_off * v[i + 1];
            }
            sum += v[i].conj() * h;
        }
        sum.re * self.dx / psi.norm_sq()
    }
}

/// Propagates `psi` and returns the state at every snapshot time.
pub fn evolve(psi: &WaveFunction, potential: &PotentialField, plan: &EvolutionPlan) -> Result<Vec<(f64, WaveFunction)>> {
    evolve_observed(psi, potential, plan, 0, |_, _| Ok(()))
}

/// Like [`evolve`], additionally calling `observer(t, ψ)` at t = 0 and after
/// every `observe_every` steps (never if `observe_every == 0`).
pub fn evolve_observed<F>(
    psi: &WaveFunction,
    potential: &PotentialField,
    plan: &EvolutionPlan,
    observe_every: usize,
    mut observer: F,
) -> Result<Vec<(f64, WaveFunction)>>
where
    F: FnMut(f64, &WaveFunction) -> Result<()>,
{
    if psi.grid() != potential.grid() {
        return Err(Error::GridMismatch);
    }
    let propagator = CrankNicolson::new(potential, plan.mass(), plan.dt())?;
    let initial_norm = psi.norm_sq();
    let mut state = psi.clone();
    let mut snapshots = Vec::with_capacity(plan.snapshot_times().len());
    let mut pending = plan.snapshot_times().iter().peekable();

    let total = plan.total_steps();
    for step in 0..=total {
        let t = step as f64 * plan.dt();
        if step > 0 {
            propagator.step(state.values_mut());
            let drift = (state.norm_sq() - initial_norm).abs();
            if drift > MAX_NORM_DRIFT {
                return Err(Error::NormDrift { time: t, drift });
            }
        }
        let is_snapshot = pending.peek().is_some_and(|&&ts| plan.steps_to(ts) == step);
        if is_snapshot || step % EDGE_CHECK_INTERVAL == 0 {
            let ratio = state.edge_ratio(EDGE_FRACTION);
            if ratio > MAX_EDGE_RATIO {
                return Err(Error::BoundaryReached { time: t, ratio });
            }
        }
        if observe_every > 0 && step % observe_every == 0 {
            observer(t, &state)?;
        }
        if is_snapshot {
            pending.next();
            snapshots.push((t, state.clone()));
        }
    }
    Ok(snapshots)
}
