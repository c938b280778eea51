//! Internal unit system: lengths in nm, times in fs, energies in eV and masses
//! in units of the free-electron mass m₀. Momenta are carried as ħk, i.e. in
//! eV·fs/nm.
//!
//! Conversions happen only when a configuration is parsed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Reduced Planck constant in eV·fs.
pub const HBAR: f64 = 0.6582119569;

/// Planck constant in eV·fs.
pub const PLANCK: f64 = 2.0 * PI * HBAR;

/// Free-electron rest energy in eV.
const ELECTRON_REST_ENERGY_EV: f64 = 510_998.950_00;

/// Speed of light in nm/fs.
const SPEED_OF_LIGHT: f64 = 299.792_458;

/// Free-electron mass m₀ in eV·fs²/nm².
pub const ELECTRON_MASS: f64 = ELECTRON_REST_ENERGY_EV / (SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// Femtoseconds per picosecond.
pub const FS_PER_PS: f64 = 1000.0;

/// Particle mass expressed in units of m₀.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mass(f64);

impl Mass {
    pub const fn from_m0(ratio: f64) -> Self {
        Mass(ratio)
    }

    /// Ratio to the free-electron mass.
    pub fn m0_ratio(self) -> f64 {
        self.0
    }

    /// Mass in eV·fs²/nm².
    pub fn value(self) -> f64 {
        self.0 * ELECTRON_MASS
    }

    /// ħ/m in nm²/fs.
    pub fn hbar_over_m(self) -> f64 {
        HBAR / self.value()
    }

    /// ħ²/2m in eV·nm².
    pub fn kinetic_scale(self) -> f64 {
        HBAR * HBAR / (2.0 * self.value())
    }

    /// Wave vector (nm⁻¹) of a free particle with kinetic energy `energy` (eV).
    pub fn wave_vector(self, energy: f64) -> f64 {
        (energy / self.kinetic_scale()).sqrt()
    }

    /// Group velocity (nm/fs) of a plane wave with wave vector `k` (nm⁻¹).
    pub fn group_velocity(self, k: f64) -> f64 {
        self.hbar_over_m() * k
    }
}
