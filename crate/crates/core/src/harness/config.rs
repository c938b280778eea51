use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::solver::{BarrierGeometry, EvolutionPlan, PacketParams};
use crate::units::{Mass, FS_PER_PS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[default]
    Fs,
    Ps,
}

impl TimeUnit {
    fn in_fs(self) -> f64 {
        match self {
            TimeUnit::Fs => 1.0,
            TimeUnit::Ps => FS_PER_PS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.x_min, self.x_max, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BohmianConfig {
    /// 0 disables the trajectory pipeline.
    pub n_traj: usize,
    /// Largest RK4 substep.
    pub substep: f64,
    /// Spacing of the velocity-field snapshots; a multiple of `dt`.
    pub velocity_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Every `x_stride`-th grid point is written (a power of two).
    pub x_stride: usize,
    /// Every `p_stride`-th momentum point is written (a power of two).
    pub p_stride: usize,
    /// Momentum window of the phase-space files (eV·fs/nm).
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Deterministic fields are positive when min F ≥ −positivity.
    pub positivity: f64,
    pub normalization: f64,
    /// L₁ bound for exact Q and J of deterministic fields.
    pub marginal_l1: f64,
    /// Binomial band width for ensemble checks.
    pub sigmas: f64,
    /// Fraction of bins that must lie inside the band.
    pub pass_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            positivity: 1e-12,
            normalization: 1e-6,
            marginal_l1: 1e-6,
            sigmas: 4.0,
            pass_fraction: 0.99,
        }
    }
}

/// One run. Times are held in fs; `time_unit` only affects parsing, after
/// which it is always `fs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub time_unit: TimeUnit,
    /// Effective mass in units of m₀.
    pub mass: Mass,
    pub dt: f64,
    pub snapshots: Vec<f64>,
    /// Coherent-probe width s (nm).
    pub probe_s: f64,
    /// Position of the transmission boundary (nm).
    pub boundary: f64,
    pub grid: GridConfig,
    pub packet: PacketParams,
    pub barrier: BarrierGeometry,
    pub bohmian: BohmianConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            time_unit: TimeUnit::Fs,
            mass: Mass::from_m0(0.2),
            dt: 0.05,
            snapshots: vec![0.0, 90.0, 300.0],
            probe_s: 7.5,
            boundary: 150.0,
            grid: GridConfig { x_min: -150.0, x_max: 450.0, n: 8192 },
            packet: PacketParams { a0: 7.5, x0: 100.0, k0: 0.69 },
            barrier: BarrierGeometry { center: 150.0, height: 0.2, width: 0.8, well: 3.2 },
            bohmian: BohmianConfig { n_traj: 100_000, substep: 0.5, velocity_interval: 0.5 },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                x_stride: 16,
                p_stride: 2,
                p_min: -1.5,
                p_max: 1.5,
            },
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let scale = config.time_unit.in_fs();
        config.dt *= scale;
        config.snapshots.iter_mut().for_each(|t| *t *= scale);
        config.bohmian.substep *= scale;
        config.bohmian.velocity_interval *= scale;
        config.time_unit = TimeUnit::Fs;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets a dotted key such as `grid.n` or `bohmian.n_traj`. `value` is read
    /// as a TOML value, falling back to a string. Times are taken in fs.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root: toml::Table = toml::from_str(&self.to_toml_string()?).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::Config(format!("bad key {key}")))?;
        let mut table = &mut root;
        for part in parts {
            table = table
                .get_mut(part)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| Error::Config(format!("unknown section {part} in {key}")))?;
        }
        if !table.contains_key(last) && !(last == "tolerances" || key.starts_with("tolerances.")) {
            return Err(Error::Config(format!("unknown key {key}")));
        }
        table.insert(last.to_string(), parsed);
        let text = toml::to_string(&root).map_err(|e| Error::Config(e.to_string()))?;
        let candidate: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        candidate.validate()?;
        *self = candidate;
        Ok(())
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        self.grid.build()
    }

    pub fn evolution_plan(&self) -> Result<EvolutionPlan> {
        EvolutionPlan::new(self.dt, self.snapshots.clone(), self.mass)
    }

    /// Solver steps between velocity snapshots.
    pub fn velocity_stride(&self) -> usize {
        (self.bohmian.velocity_interval / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.spatial_grid()?;
        self.evolution_plan()?;
        self.packet.validate(&grid)?;
        if !(self.mass.m0_ratio() > 0.0) {
            return Err(Error::Config("mass must be positive".into()));
        }
        if self.snapshots.is_empty() {
            return Err(Error::Config("at least one snapshot time is required".into()));
        }
        if !(self.probe_s > 0.0) {
            return Err(Error::Config("probe_s must be positive".into()));
        }
        if self.boundary <= grid.x_min() || self.boundary >= grid.x_max() {
            return Err(Error::Config(format!("boundary {} nm outside the grid", self.boundary)));
        }
        let (lo, hi) = self.barrier.band();
        if self.barrier.well < 0.0 || lo <= grid.x_min() || hi >= grid.x_max() {
            return Err(Error::Config("barrier structure does not fit inside the grid".into()));
        }
        let b = &self.bohmian;
        if b.n_traj > 0 {
            if !(b.substep > 0.0 && b.velocity_interval > 0.0) {
                return Err(Error::Config("bohmian substep and velocity_interval must be positive".into()));
            }
            if !is_multiple(b.velocity_interval, self.dt) {
                return Err(Error::Config("bohmian.velocity_interval must be a multiple of dt".into()));
            }
            if b.velocity_interval > 4.0 * b.substep * (1.0 + 1e-9) {
                return Err(Error::Config("bohmian.velocity_interval may not exceed four substeps".into()));
            }
            if let Some(t) = self.snapshots.iter().find(|t| !is_multiple(**t, b.velocity_interval)) {
                return Err(Error::Config(format!(
                    "snapshot {t} fs is not a multiple of bohmian.velocity_interval"
                )));
            }
        }
        let o = &self.output;
        for (name, stride) in [("x_stride", o.x_stride), ("p_stride", o.p_stride)] {
            if stride == 0 || !stride.is_power_of_two() || grid.len() / stride < 16 {
                return Err(Error::Config(format!("output.{name} must be a power of two leaving >= 16 points")));
            }
        }
        if !(o.p_max > o.p_min) {
            return Err(Error::Config("output.p_max must exceed output.p_min".into()));
        }
        Ok(())
    }
}

fn is_multiple(value: f64, step: f64) -> bool {
    let ratio = value / step;
    (ratio - ratio.round()).abs() < 1e-6
}
