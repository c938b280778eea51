//! End-to-end experiment: configuration, simulation, validation against the
//! probability axioms, and the artifacts on disk.

pub mod config;
pub mod io;
pub mod plot;
pub mod report;
pub mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{BohmianConfig, ExperimentConfig, GridConfig, OutputConfig, TimeUnit, Tolerances};
pub use plot::emit_plot_data;
pub use report::{
    expected_pattern, validate_axioms, AxiomVerdict, ComparisonReport, HusimiMetrics, SnapshotReport, TableRow,
    TrajectoryReport, TransmissionReport, WignerMetrics,
};
pub use sweep::{sweep_dt, sweep_ensemble, sweep_grid, write_sweep_csv, SweepPoint};

use crate::bohmian::{
    bin_probabilities, binomial_check, bohmian_distribution, sample_equilibrium, TrajectoryEnsemble,
    TrajectoryIntegrator,
};
use crate::error::{Error, Result};
use crate::field::{field_linf_distance, l1_distance, linf_distance, DistributionKind, PhaseSpaceField};
use crate::grid::MomentumGrid;
use crate::husimi::{gaussian_smooth, husimi_direct, husimi_from_wigner, husimi_marginal_oracle, CoherentProbe};
use crate::solver::{
    evolve, evolve_observed, make_double_barrier, make_gaussian_packet, transmission_coefficient, PotentialField,
};
use crate::wave::{ExactMarginals, WaveFunction};
use crate::wigner::{negativity_volume, wigner_transform_with_residue, WignerTransformPlan, MAX_IMAGINARY_RESIDUE};

/// Environment variable naming the directory relative output paths resolve against.
pub const OUTPUT_ROOT_ENV: &str = "PHASESPACE_OUTPUT_ROOT";

/// Resolves a relative output directory against `$PHASESPACE_OUTPUT_ROOT`, if set.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

/// Wave-function snapshots and, if requested, the trajectory ensemble.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub potential: PotentialField,
    pub snapshots: Vec<(f64, WaveFunction)>,
    pub ensemble: Option<TrajectoryEnsemble>,
    /// Wall time of the propagation including trajectories.
    pub seconds: f64,
}

/// Propagates the packet and, when `n_traj > 0`, integrates trajectories
/// sampled with `seed` alongside it.
pub fn simulate(config: &ExperimentConfig, seed: u64) -> Result<Simulation> {
    config.validate()?;
    let grid = config.spatial_grid()?;
    WignerTransformPlan::new(grid).check_packet(&config.packet)?;
    let psi0 = make_gaussian_packet(&grid, config.packet)?;
    let potential = make_double_barrier(&grid, config.barrier)?;
    let plan = config.evolution_plan()?;
    let start = Instant::now();

    let (snapshots, ensemble) = if config.bohmian.n_traj == 0 {
        (evolve(&psi0, &potential, &plan)?, None)
    } else {
        let x = sample_equilibrium(&psi0, config.bohmian.n_traj, seed)?;
        let mut integrator =
            TrajectoryIntegrator::new(grid, x, config.mass, config.bohmian.substep, config.snapshots.clone())?;
        let snapshots =
            evolve_observed(&psi0, &potential, &plan, config.velocity_stride(), |t, psi| integrator.push(t, psi))?;
        (snapshots, Some(integrator.finish()?))
    };
    Ok(Simulation { potential, snapshots, ensemble, seconds: start.elapsed().as_secs_f64() })
}

/// Fields and metrics of one snapshot.
pub struct SnapshotAnalysis {
    pub report: SnapshotReport,
    pub wigner: PhaseSpaceField,
    pub husimi: PhaseSpaceField,
    pub bohmian: Option<PhaseSpaceField>,
}

pub fn analyze_snapshot(config: &ExperimentConfig, simulation: &Simulation, k: usize) -> Result<SnapshotAnalysis> {
    let (time, psi) = &simulation.snapshots[k];
    let grid = *psi.grid();
    let mass = config.mass;
    let tol = &config.tolerances;
    let (band_lo, band_hi) = config.barrier.band();
    let exact = ExactMarginals::of(psi, mass)?;
    let density = &exact.charge;
    let peak = density.iter().cloned().fold(0.0, f64::max);

    let plan = WignerTransformPlan::new(grid);
    let (wigner, residue) = wigner_transform_with_residue(psi, &plan)?;
    if residue > MAX_IMAGINARY_RESIDUE {
        return Err(Error::ImaginaryResidue { residue });
    }
    let negativity = negativity_volume(&wigner)?;
    let j_w = wigner.marginal_momentum_flux(mass);
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), rho) in j_w.iter().zip(&exact.current).zip(density) {
        if *rho > 1e-6 * peak {
            num += (a - b).powi(2);
            den += b * b;
        }
    }
    let wigner_metrics = WignerMetrics {
        residue,
        neg_mass: negativity.neg_mass,
        min_value: negativity.min_value,
        argmin: negativity.argmin,
        max_abs: wigner.max_abs(),
        q_linf_rel: linf_distance(&wigner.marginal_position(), density) / peak,
        j_rel_l2: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() },
        band_mass: wigner.band_mass(band_lo, band_hi),
        band_max_abs: wigner.band_max_abs(band_lo, band_hi),
    };

    let probe = CoherentProbe::new(config.probe_s)?;
    let pgrid = MomentumGrid::half_band(&grid);
    let husimi = husimi_direct(psi, &probe, &pgrid)?;
    let route_linf = {
        let smoothed = husimi_from_wigner(&wigner, &probe, &pgrid)?;
        field_linf_distance(&husimi, &smoothed)?
    };
    let dx = grid.dx();
    let husimi_metrics = HusimiMetrics {
        route_linf_rel: route_linf / husimi.max_abs(),
        q_bias_l1: l1_distance(&husimi.marginal_position(), density, dx),
        smoothing_bias_l1: l1_distance(&gaussian_smooth(density, &grid, probe.s()), density, dx),
        band_mass: husimi.band_mass(band_lo, band_hi),
    };

    let mut verdicts = vec![
        validate_axioms(&wigner, psi, mass, tol)?,
        validate_axioms(&husimi, psi, mass, tol)?,
    ];
    let bohmian = match &simulation.ensemble {
        Some(ensemble) => {
            let field = bohmian_distribution(ensemble, k, &grid, &pgrid)?;
            verdicts.push(validate_axioms(&field, psi, mass, tol)?);
            Some(field)
        }
        None => None,
    };

    let report = SnapshotReport {
        time: *time,
        norm: psi.norm_sq(),
        edge_ratio: psi.edge_ratio(0.05),
        wigner: wigner_metrics,
        husimi: husimi_metrics,
        verdicts,
    };
    Ok(SnapshotAnalysis { report, wigner, husimi, bohmian })
}

/// Result of [`run_experiment`]; the simulation is kept for further checks.
pub struct ExperimentRun {
    pub report: ComparisonReport,
    pub simulation: Simulation,
    pub output_dir: PathBuf,
}

/// Runs everything and writes the artifacts into `out_dir`.
///
/// Files are first written to `<out_dir>.partial`, which is renamed on success
/// and removed on failure. An existing `out_dir` is replaced only if it holds a
/// previous report.
pub fn run_experiment(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<ExperimentRun> {
    config.validate()?;
    if out_dir.exists() && !out_dir.join("report.json").exists() {
        return Err(Error::Config(format!(
            "{} exists and does not look like a previous run",
            out_dir.display()
        )));
    }
    let partial = PathBuf::from(format!("{}.partial", out_dir.display()));
    if partial.exists() {
        std::fs::remove_dir_all(&partial)?;
    }
    std::fs::create_dir_all(&partial)?;
    match write_run(config, seed, &partial) {
        Ok((report, simulation)) => {
            if out_dir.exists() {
                std::fs::remove_dir_all(out_dir)?;
            }
            std::fs::rename(&partial, out_dir)?;
            Ok(ExperimentRun { report, simulation, output_dir: out_dir.to_path_buf() })
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&partial);
            Err(e)
        }
    }
}

fn write_run(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(ComparisonReport, Simulation)> {
    std::fs::write(dir.join("config.toml"), config.to_toml_string()?)?;
    let simulation = simulate(config, seed)?;
    let grid = config.spatial_grid()?;
    let out = &config.output;
    let window = (out.p_min, out.p_max);
    let probe = CoherentProbe::new(config.probe_s)?;

    let mut snapshots = Vec::new();
    for k in 0..simulation.snapshots.len() {
        let analysis = analyze_snapshot(config, &simulation, k)?;
        let (time, psi) = &simulation.snapshots[k];
        log::info!("analysed t = {time} fs");
        io::write_wave_csv(&dir.join(format!("psi_{k}.csv")), *time, psi)?;
        io::write_field_csv(&dir.join(format!("wigner_{k}.csv")), *time, &analysis.wigner, out.x_stride, out.p_stride, window)?;
        io::write_field_csv(&dir.join(format!("husimi_{k}.csv")), *time, &analysis.husimi, out.x_stride, out.p_stride, window)?;

        let exact = ExactMarginals::of(psi, config.mass)?;
        let smoothed = husimi_marginal_oracle(psi, &probe, config.mass)?;
        let q_w = analysis.wigner.marginal_position();
        let j_w = analysis.wigner.marginal_momentum_flux(config.mass);
        let q_h = analysis.husimi.marginal_position();
        let j_h = analysis.husimi.marginal_momentum_flux(config.mass);
        let marginals_b = analysis
            .bohmian
            .as_ref()
            .map(|b| (b.marginal_position(), b.marginal_momentum_flux(config.mass)));
        drop(analysis.wigner);
        drop(analysis.husimi);
        drop(analysis.bohmian);

        let x: Vec<f64> = grid.points().collect();
        let mut columns: Vec<(&str, &[f64])> = vec![
            ("q_exact", &exact.charge),
            ("j_exact", &exact.current),
            ("q_wigner", &q_w),
            ("j_wigner", &j_w),
            ("q_husimi", &q_h),
            ("j_husimi", &j_h),
            ("q_husimi_oracle", &smoothed.charge),
            ("j_husimi_oracle", &smoothed.current),
        ];
        if let Some((q, j)) = &marginals_b {
            columns.push(("q_bohmian", q));
            columns.push(("j_bohmian", j));
        }
        io::write_columns_csv(&dir.join(format!("marginals_{k}.csv")), *time, &x, &columns)?;

        if let Some(ensemble) = &simulation.ensemble {
            let xbins = grid.coarsened(out.x_stride)?;
            let pfine = MomentumGrid::half_band(&grid);
            let pbins = MomentumGrid::new(pfine.len() / out.p_stride, pfine.dp() * out.p_stride as f64)?;
            let coarse = bohmian_distribution(ensemble, k, &xbins, &pbins)?;
            io::write_field_csv(&dir.join(format!("bohmian_{k}.csv")), *time, &coarse, 1, 1, window)?;
        }
        snapshots.push(analysis.report);
    }

    let (last_time, last) = simulation.snapshots.last().expect("at least one snapshot");
    let t = transmission_coefficient(last, config.boundary, config.barrier.width + config.barrier.well / 2.0)?;
    log::info!("transmission at {last_time} fs: {:.6}", t.probability);

    let trajectories = simulation.ensemble.as_ref().map(|ensemble| {
        let times = ensemble.times().len();
        TrajectoryReport {
            n_traj: ensemble.len(),
            aborted: ensemble.aborted(),
            refinements: ensemble.refinements(),
            order_violations: (0..times).map(|k| ensemble.order_violations(k)).collect(),
            equivariance: (0..times)
                .map(|k| {
                    let psi = &simulation.snapshots[k].1;
                    let counts = ensemble.position_counts(k, &grid);
                    let probabilities = bin_probabilities(psi, &grid);
                    binomial_check(&counts, &probabilities, ensemble.len(), config.tolerances.sigmas).pass_fraction()
                })
                .collect(),
            seconds: simulation.seconds,
        }
    });

    let table = ComparisonReport::build_table(&snapshots);
    let matches = table.len() == DistributionKind::ALL.len() && table.iter().all(TableRow::matches_expected);
    let report = ComparisonReport {
        seed,
        config: config.clone(),
        transmission: TransmissionReport { boundary: config.boundary, probability: t.probability, split: t.is_split() },
        snapshots,
        trajectories,
        table,
        matches_expected_pattern: matches,
    };
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    Ok((report, simulation))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A small free-flight configuration that runs in well under a second.
    pub(crate) fn small_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.grid = GridConfig { x_min: 0.0, x_max: 150.0, n: 1024 };
        config.packet.x0 = 50.0;
        config.packet.a0 = 5.0;
        config.barrier.center = 100.0;
        config.barrier.height = 0.0;
        config.boundary = 100.0;
        config.probe_s = 5.0;
        config.snapshots = vec![0.0, 20.0];
        config.bohmian.n_traj = 2000;
        config.output.x_stride = 8;
        config.output.p_stride = 4;
        config
    }

    #[test]
    fn output_root_applies_to_relative_paths_only() {
        let abs = Path::new("/tmp/somewhere");
        assert_eq!(resolve_output_dir(abs), abs);
    }

    #[test]
    fn free_run_is_positive_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let run = run_experiment(&small_config(), 3, &out).unwrap();
        assert!(out.join("report.json").exists());
        assert!(!PathBuf::from(format!("{}.partial", out.display())).exists());
        for s in &run.report.snapshots {
            assert!(s.wigner.neg_mass < 1e-9);
            assert!(s.verdicts.iter().all(|v| v.positive), "{:?}", s.verdicts);
        }
        for k in 0..2 {
            for name in ["psi", "wigner", "husimi", "bohmian", "marginals"] {
                assert!(out.join(format!("{name}_{k}.csv")).exists(), "{name}_{k}");
            }
        }
    }

    #[test]
    fn failed_run_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut config = small_config();
        // the packet reaches the wall long before this
        config.snapshots = vec![0.0, 400.0];
        assert!(run_experiment(&config, 1, &out).is_err());
        assert!(!out.exists());
        assert!(!PathBuf::from(format!("{}.partial", out.display())).exists());
    }

    #[test]
    fn refuses_to_replace_foreign_directories() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("keep.txt"), "x").unwrap();
        assert!(run_experiment(&small_config(), 1, dir.path()).is_err());
        assert!(dir.path().join("keep.txt").exists());
    }

    #[test]
    fn dry_run_omits_bohmian_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut config = small_config();
        config.bohmian.n_traj = 0;
        let run = run_experiment(&config, 1, &out).unwrap();
        assert!(run.report.trajectories.is_none());
        assert!(!out.join("bohmian_0.csv").exists());
        assert!(out.join("wigner_0.csv").exists());
        assert_eq!(run.report.table.len(), 2);
    }
}
