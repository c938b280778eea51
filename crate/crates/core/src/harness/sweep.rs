//! Convergence sweeps over the time step, the grid size and the ensemble size.

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::bohmian::{bin_probabilities, sample_equilibrium, TrajectoryIntegrator};
use crate::error::{Error, Result};
use crate::field::l1_distance;
use crate::solver::{evolve, evolve_observed, make_double_barrier, make_gaussian_packet, transmission_coefficient};
use crate::wave::WaveFunction;

/// One point of a sweep. `change` compares with the previous point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub transmission: Option<f64>,
    pub band_mass: Option<f64>,
    /// ‖ψ − ψ_prev‖ (dt sweep), |T − T_prev| (grid sweep) or the L₁ error of
    /// the trajectory histogram (ensemble sweep).
    pub change: Option<f64>,
    /// log₂ of successive change ratios.
    pub observed_order: Option<f64>,
}

fn final_state(config: &ExperimentConfig) -> Result<WaveFunction> {
    let grid = config.spatial_grid()?;
    let psi0 = make_gaussian_packet(&grid, config.packet)?;
    let potential = make_double_barrier(&grid, config.barrier)?;
    let mut plan = config.clone();
    plan.snapshots = vec![*config.snapshots.last().expect("validated")];
    let mut states = evolve(&psi0, &potential, &plan.evolution_plan()?)?;
    Ok(states.pop().expect("one snapshot").1)
}

fn observables(config: &ExperimentConfig, psi: &WaveFunction) -> Result<(f64, f64)> {
    let t = transmission_coefficient(psi, config.boundary, config.barrier.width + config.barrier.well / 2.0)?;
    let (lo, hi) = config.barrier.band();
    let band = psi
        .grid()
        .points()
        .zip(psi.values())
        .filter(|(x, _)| (lo..=hi).contains(x))
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        * psi.grid().dx();
    Ok((t.probability, band))
}

fn fill_orders(points: &mut [SweepPoint]) {
    for i in 1..points.len() {
        if let (Some(a), Some(b)) = (points[i - 1].change, points[i].change) {
            if a > 0.0 && b > 0.0 {
                points[i].observed_order = Some((a / b).log2());
            }
        }
    }
}

/// Evolves to the last snapshot at each `dt` (best given in halving order).
pub fn sweep_dt(config: &ExperimentConfig, dts: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    let mut previous: Option<WaveFunction> = None;
    for &dt in dts {
        let mut c = config.clone();
        c.dt = dt;
        c.bohmian.n_traj = 0;
        c.validate()?;
        let psi = final_state(&c)?;
        let (t, band) = observables(&c, &psi)?;
        let change = previous.as_ref().map(|p| psi.distance(p)).transpose()?;
        log::info!("dt = {dt}: T = {t:.6}");
        points.push(SweepPoint { value: dt, transmission: Some(t), band_mass: Some(band), change, observed_order: None });
        previous = Some(psi);
    }
    fill_orders(&mut points);
    Ok(points)
}

/// Evolves on grids with the configured bounds and each point count.
pub fn sweep_grid(config: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    let mut previous: Option<f64> = None;
    for &n in sizes {
        let mut c = config.clone();
        c.grid.n = n;
        c.bohmian.n_traj = 0;
        c.validate()?;
        let psi = final_state(&c)?;
        let (t, band) = observables(&c, &psi)?;
        log::info!("n = {n}: T = {t:.6}");
        points.push(SweepPoint {
            value: n as f64,
            transmission: Some(t),
            band_mass: Some(band),
            change: previous.map(|p| (t - p).abs()),
            observed_order: None,
        });
        previous = Some(t);
    }
    fill_orders(&mut points);
    Ok(points)
}

/// L₁ error of the trajectory position histogram at the last snapshot against
/// |ψ|², for ensembles made of the first `size` trajectories of one run.
/// Bins are the grid cells coarsened by `bin_factor`.
pub fn sweep_ensemble(config: &ExperimentConfig, seed: u64, sizes: &[usize], bin_factor: usize) -> Result<Vec<SweepPoint>> {
    let largest = *sizes.iter().max().ok_or_else(|| Error::InvalidParameter("no ensemble sizes".into()))?;
    config.validate()?;
    let grid = config.spatial_grid()?;
    let bins = grid.coarsened(bin_factor)?;
    let psi0 = make_gaussian_packet(&grid, config.packet)?;
    let potential = make_double_barrier(&grid, config.barrier)?;
    let x = sample_equilibrium(&psi0, largest, seed)?;
    let mut integrator = TrajectoryIntegrator::new(grid, x, config.mass, config.bohmian.substep, config.snapshots.clone())?;
    let snapshots = evolve_observed(&psi0, &potential, &config.evolution_plan()?, config.velocity_stride(), |t, psi| integrator.push(t, psi))?;
    let ensemble = integrator.finish()?;
    let k = snapshots.len() - 1;
    let probabilities = bin_probabilities(&snapshots[k].1, &bins);
    let positions = ensemble.positions();

    let mut points = Vec::new();
    for &n in sizes {
        let mut counts = vec![0u64; bins.len()];
        for x in positions.column(k).iter().take(n) {
            if let Some(b) = bins.cell_of(*x) {
                counts[b] += 1;
            }
        }
        let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let error = l1_distance(&empirical, &probabilities, 1.0);
        points.push(SweepPoint { value: n as f64, transmission: None, band_mass: None, change: Some(error), observed_order: None });
    }
    // for N-fold ensembles the error should fall as N^{-1/2}; report that exponent
    for i in 1..points.len() {
        let (a, b) = (points[i - 1].change.unwrap_or(0.0), points[i].change.unwrap_or(0.0));
        let ratio = points[i].value / points[i - 1].value;
        if a > 0.0 && b > 0.0 && ratio > 1.0 {
            points[i].observed_order = Some((a / b).ln() / ratio.ln());
        }
    }
    Ok(points)
}

/// Writes sweep points as CSV with the usual metadata line.
pub fn write_sweep_csv(path: &std::path::Path, parameter: &str, points: &[SweepPoint]) -> Result<()> {
    let column = |f: fn(&SweepPoint) -> Option<f64>| -> Vec<f64> {
        points.iter().map(|p| f(p).unwrap_or(f64::NAN)).collect()
    };
    let value: Vec<f64> = points.iter().map(|p| p.value).collect();
    let columns = [
        ("transmission", column(|p| p.transmission)),
        ("band_mass", column(|p| p.band_mass)),
        ("change", column(|p| p.change)),
        ("observed_order", column(|p| p.observed_order)),
    ];
    let refs: Vec<(&str, &[f64])> = columns.iter().map(|(n, c)| (*n, c.as_slice())).collect();
    super::io::write_table_csv(path, &[("kind", "sweep".into()), ("parameter", parameter.into())], parameter, &value, &refs)
}
