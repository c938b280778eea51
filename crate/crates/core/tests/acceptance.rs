//! End-to-end acceptance on the reference configuration. Every criterion is
//! evaluated, reported on its own line, and the test fails if any of them does.
//!
//! Run with `cargo test --release -p phasespace --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use phasespace::bohmian::{bin_probabilities, sample_equilibrium, TrajectoryIntegrator};
use phasespace::harness::{run_experiment, simulate, ExperimentConfig};
use phasespace::husimi::{husimi_direct, husimi_from_wigner, CoherentProbe};
use phasespace::solver::{
    evolve, evolve_observed, make_double_barrier, make_gaussian_packet, CrankNicolson, EvolutionPlan, PotentialField,
};
use phasespace::units::HBAR;
use phasespace::wigner::{wigner_transform, WignerTransformPlan};
use phasespace::{DistributionKind, Mass, MomentumGrid, PhaseSpaceField, WaveFunction};

const SEED: u64 = 42;
const GOLDEN_NEG_MASS: [f64; 2] = [0.16731, 0.35823];
const GOLDEN_TRANSMISSION: f64 = 0.62477;

struct Outcomes(Vec<(String, bool)>);

impl Outcomes {
    fn record(&mut self, label: &str, pass: bool, detail: String) {
        println!("{} {label}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push((label.to_string(), pass));
    }
}

/// ψ′ by a direct O(n²) discrete Fourier transform, Nyquist mode dropped.
fn dft_derivative(psi: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = psi.len();
    let twiddle: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64)).collect();
    let coefficients: Vec<Complex64> =
        (0..n).map(|k| (0..n).map(|j| psi[j] * twiddle[(j * k) % n]).sum()).collect();
    let scaled: Vec<Complex64> = coefficients
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let index = if k < n / 2 { k as f64 } else if k > n / 2 { k as f64 - n as f64 } else { 0.0 };
            c * Complex64::new(0.0, 2.0 * PI * index / (n as f64 * dx)) / n as f64
        })
        .collect();
    (0..n).map(|j| (0..n).map(|k| scaled[k] * twiddle[(j * k) % n].conj()).sum()).collect()
}

fn position_marginal(field: &PhaseSpaceField) -> Vec<f64> {
    let dp = field.pgrid().dp();
    field.values().rows().into_iter().map(|row| row.sum() * dp).collect()
}

fn current_marginal(field: &PhaseSpaceField, mass: Mass) -> Vec<f64> {
    let dp = field.pgrid().dp();
    let p: Vec<f64> = field.pgrid().points().collect();
    field
        .values()
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&p).map(|(w, p)| w * p).sum::<f64>() * dp / mass.value())
        .collect()
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// ∫∫W over x in [lo, hi] and max|W| there, with x-cells counted by centre.
fn band_stats(field: &PhaseSpaceField, lo: f64, hi: f64) -> (f64, f64) {
    let grid = field.xgrid();
    let dp = field.pgrid().dp();
    let (mut mass, mut peak) = (0.0, 0.0f64);
    for (i, row) in field.values().rows().into_iter().enumerate() {
        let x = grid.x(i);
        if x >= lo && x <= hi {
            mass += row.sum() * dp * grid.dx();
            peak = row.iter().fold(peak, |m, v| m.max(v.abs()));
        }
    }
    (mass, peak)
}

fn max_abs(field: &PhaseSpaceField) -> f64 {
    field.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn reference_configuration_meets_every_criterion() {
    let config = ExperimentConfig::default();
    let mass = config.mass;
    let mut out = Outcomes(Vec::new());

    // wave-function criteria on a trajectory-free run
    let mut wave_only = config.clone();
    wave_only.bohmian.n_traj = 0;
    let start = Instant::now();
    let sim = simulate(&wave_only, SEED).unwrap();
    let grid = *sim.snapshots[0].1.grid();
    let plan = WignerTransformPlan::new(grid);
    let probe = CoherentProbe::new(config.probe_s).unwrap();
    let husimi_grid = MomentumGrid::half_band(&grid);
    let (band_lo, band_hi) = (147.6, 152.4);

    let mut wigner_seconds = start.elapsed().as_secs_f64();
    let (mut q_worst, mut j_worst) = (0.0f64, 0.0f64);
    let mut neg_mass = Vec::new();
    let mut band = (0.0, 0.0, 0.0);
    let mut husimi_min = f64::INFINITY;
    let mut husimi_bias = (0.0, 0.0);
    let mut route = Vec::new();
    for (k, (t, psi)) in sim.snapshots.iter().enumerate() {
        let begin = Instant::now();
        let wigner = wigner_transform(psi, &plan).unwrap();
        wigner_seconds += begin.elapsed().as_secs_f64();

        let density = psi.density();
        let peak = density.iter().cloned().fold(0.0, f64::max);
        let q = position_marginal(&wigner);
        let q_err = q.iter().zip(&density).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / peak;
        let dpsi = dft_derivative(psi.values(), grid.dx());
        let j_exact: Vec<f64> =
            psi.values().iter().zip(&dpsi).map(|(f, d)| HBAR / mass.value() * (f.conj() * d).im).collect();
        let j = current_marginal(&wigner, mass);
        let num: f64 = j.iter().zip(&j_exact).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = j_exact.iter().map(|b| b * b).sum();
        let j_err = (num / den).sqrt();
        println!("  t = {t} fs: Q L∞/max = {q_err:.3e}, J rel L2 = {j_err:.3e}");
        q_worst = q_worst.max(q_err);
        j_worst = j_worst.max(j_err);

        let dp = wigner.pgrid().dp();
        neg_mass.push(wigner.values().iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * grid.dx() * dp);
        if k == 2 {
            let (mass_in_band, band_peak) = band_stats(&wigner, band_lo, band_hi);
            band = (mass_in_band, band_peak, max_abs(&wigner));
        }

        let husimi = husimi_direct(psi, &probe, &husimi_grid).unwrap();
        husimi_min = husimi_min.min(husimi.values().iter().cloned().fold(f64::INFINITY, f64::min));
        if k == 0 {
            // |ψ(t₀)|² is N(x0, a0²) and G_s ⊛ |ψ|² is N(x0, a0² + s²)
            let (x0, a0, s) = (config.packet.x0, config.packet.a0, config.probe_s);
            let q_h = position_marginal(&husimi);
            let bias: f64 = q_h.iter().zip(&density).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.dx();
            let smoothing: f64 = grid
                .points()
                .map(|x| (normal_pdf(x, x0, a0 * a0 + s * s) - normal_pdf(x, x0, a0 * a0)).abs())
                .sum::<f64>()
                * grid.dx();
            husimi_bias = (bias, smoothing);
        }
        if k != 1 {
            let smoothed = husimi_from_wigner(&wigner, &probe, &husimi_grid).unwrap();
            drop(wigner);
            let diff = husimi
                .values()
                .iter()
                .zip(smoothed.values().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            route.push((*t, diff / max_abs(&husimi)));
        }
    }

    out.record(
        "1 wigner marginals",
        q_worst < 1e-8 && j_worst < 1e-6 && wigner_seconds < 60.0,
        format!(
            "Q L∞/max {q_worst:.2e} (< 1e-8), J rel L2 {j_worst:.2e} (< 1e-6), {wigner_seconds:.1} s at n = {} (< 60 s)",
            grid.len()
        ),
    );

    let golden_ok = neg_mass[1..]
        .iter()
        .zip(GOLDEN_NEG_MASS)
        .all(|(v, g)| ((v - g) / g).abs() < 1e-4);
    out.record(
        "2 dynamic negativity",
        neg_mass[0] < 1e-9 && neg_mass[1] > 1e-3 && neg_mass[2] > 1e-3 && golden_ok,
        format!(
            "neg_mass {:.3e} / {:.5} / {:.5} (< 1e-9, > 1e-3, > 1e-3; golden {:?})",
            neg_mass[0], neg_mass[1], neg_mass[2], GOLDEN_NEG_MASS
        ),
    );

    let (band_mass, band_peak, global_peak) = band;
    out.record(
        "3 mid-barrier artifact",
        band_peak > 1e-3 * global_peak && band_mass.abs() < 1e-4,
        format!(
            "max|W| in band / global {:.3e} (> 1e-3), |∫∫ band W| {:.3e} (< 1e-4)",
            band_peak / global_peak,
            band_mass.abs()
        ),
    );

    let (bias, smoothing) = husimi_bias;
    out.record(
        "4 husimi positivity and bias",
        husimi_min >= -1e-12 && bias > 1e-2 && (bias - smoothing).abs() < 1e-6,
        format!(
            "min H {husimi_min:.2e} (≥ -1e-12), ‖Q_H − ρ‖₁ {bias:.6} (> 1e-2), vs ‖G⊛ρ − ρ‖₁ {:.2e} (< 1e-6)",
            (bias - smoothing).abs()
        ),
    );

    out.record(
        "5 husimi routes",
        route.iter().all(|(_, d)| *d < 1e-6),
        route.iter().map(|(t, d)| format!("t = {t} fs: {d:.2e}")).collect::<Vec<_>>().join(", ") + " (< 1e-6 of max H)",
    );
    drop(sim);

    // full pipeline with trajectories
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment(&config, SEED, &dir.path().join("run")).unwrap();
    let report = &run.report;
    let trajectories = report.trajectories.as_ref().unwrap();
    let last = report.snapshots.last().unwrap();
    let bohmian_at = |s: &phasespace::harness::SnapshotReport| {
        s.verdicts.iter().find(|v| v.kind == DistributionKind::Bohmian).cloned().unwrap()
    };
    let pass_fraction = bohmian_at(last).q_pass_fraction.unwrap();

    // the N and 4N ensembles are prefixes of one 4N run, so they share samples
    let n = config.bohmian.n_traj;
    let psi0 = make_gaussian_packet(&grid, config.packet).unwrap();
    let potential = make_double_barrier(&grid, config.barrier).unwrap();
    let x = sample_equilibrium(&psi0, 4 * n, SEED).unwrap();
    let mut integrator =
        TrajectoryIntegrator::new(grid, x, mass, config.bohmian.substep, config.snapshots.clone()).unwrap();
    let snapshots = evolve_observed(&psi0, &potential, &config.evolution_plan().unwrap(), config.velocity_stride(), |t, psi| {
        integrator.push(t, psi)
    })
    .unwrap();
    let large = integrator.finish().unwrap();
    let k = snapshots.len() - 1;
    let bins = grid.coarsened(16).unwrap();
    let probabilities = bin_probabilities(&snapshots[k].1, &bins);
    let l1 = |size: usize| {
        let mut counts = vec![0.0; bins.len()];
        for x in large.positions().column(k).iter().take(size) {
            if let Some(b) = bins.cell_of(*x) {
                counts[b] += 1.0;
            }
        }
        counts.iter().zip(&probabilities).map(|(c, p)| (c / size as f64 - p).abs()).sum::<f64>()
    };
    let ratio = l1(n) / l1(4 * n);
    out.record(
        "6 bohmian equivariance",
        pass_fraction >= 0.99 && (1.0..=4.0).contains(&ratio) && trajectories.seconds < 300.0,
        format!(
            "{:.2} % of bins within 4σ at t₂ (≥ 99 %), L1 ratio N→4N {ratio:.3} (2 within ×2), {:.1} s (< 300 s)",
            100.0 * pass_fraction,
            trajectories.seconds
        ),
    );
    drop(large);

    let ensemble = run.simulation.ensemble.as_ref().unwrap();
    let mut order: Vec<usize> = (0..ensemble.len()).collect();
    order.sort_by(|&a, &b| ensemble.positions()[[a, 0]].total_cmp(&ensemble.positions()[[b, 0]]));
    let violations: usize = (0..ensemble.times().len())
        .map(|k| {
            let column: Vec<f64> = order.iter().map(|&i| ensemble.positions()[[i, k]]).filter(|x| x.is_finite()).collect();
            column.windows(2).filter(|w| w[1] < w[0]).count()
        })
        .sum();
    let negative_bins = report.snapshots.iter().filter(|s| bohmian_at(s).min_value < 0.0).count();
    out.record(
        "7 bohmian positivity and order",
        violations == 0 && negative_bins == 0,
        format!("{violations} order violations, {negative_bins} snapshots with negative bins (both 0)"),
    );

    let expected = [
        (DistributionKind::Wigner, (false, true, true)),
        (DistributionKind::Husimi, (true, false, false)),
        (DistributionKind::Bohmian, (true, true, true)),
    ];
    let table_ok = report.table.len() == 3
        && expected.iter().all(|(kind, (positive, q, j))| {
            report.table.iter().any(|row| {
                row.kind == *kind
                    && row.positive == *positive
                    && row.exact_q == *q
                    && row.exact_j == *j
                    && row.statistical == (*kind == DistributionKind::Bohmian)
            })
        });
    println!("{}", report.table_text());
    out.record("8 table pattern", table_ok, format!("matches_expected_pattern = {}", report.matches_expected_pattern));
    drop(run);

    // solver fidelity
    let free = PotentialField::zero(grid);
    let a0 = config.packet.a0;
    let var = evolve(&psi0, &free, &EvolutionPlan::new(0.05, vec![100.0], mass).unwrap()).unwrap()[0]
        .1
        .position_variance();
    let tau = HBAR * 100.0 / (2.0 * mass.value() * a0 * a0);
    let spread_err = (var / (a0 * a0 * (1.0 + tau * tau)) - 1.0).abs();
    let propagator = CrankNicolson::new(&potential, mass, config.dt).unwrap();
    let mut psi = psi0.clone();
    let mut drift = 0.0f64;
    for _ in 0..(300.0 / config.dt) as usize {
        let before = psi.norm_sq();
        propagator.advance(&mut psi);
        drift = drift.max((psi.norm_sq() - before).abs());
    }
    let at = |dt: f64| -> WaveFunction {
        evolve(&psi0, &potential, &EvolutionPlan::new(dt, vec![100.0], mass).unwrap()).unwrap().pop().unwrap().1
    };
    let (c1, c2, c3) = (at(0.05), at(0.025), at(0.0125));
    let cn_order = (c1.distance(&c2).unwrap() / c2.distance(&c3).unwrap()).log2();
    out.record(
        "9 solver fidelity",
        spread_err < 1e-3 && drift < 1e-10 && (cn_order - 2.0).abs() <= 0.2,
        format!("spreading {spread_err:.2e} (< 1e-3), drift/step {drift:.2e} (< 1e-10), order {cn_order:.3} (2 ± 0.2)"),
    );

    // m₀ = 510998.95 eV / c², c = 299.792458 nm/fs
    let m = 0.2 * 510_998.95 / 299.792_458f64.powi(2);
    let k0 = (2.0 * m * 0.09).sqrt() / HBAR;
    let library_k0 = Mass::from_m0(0.2).wave_vector(0.09);
    out.record(
        "10 wave vector",
        ((k0 - 0.687) / 0.687).abs() < 1e-3 && ((k0 - 0.69) / 0.69).abs() < 0.01 && (library_k0 - k0).abs() < 1e-9,
        format!("k0 = {k0:.5} nm⁻¹ (0.687, within 1 % of 0.69), library {library_k0:.5}"),
    );

    let transmission = report_transmission(&dir);
    out.record(
        "regression transmission",
        (transmission - GOLDEN_TRANSMISSION).abs() < 1e-4,
        format!("T = {transmission:.6} (golden {GOLDEN_TRANSMISSION})"),
    );

    let failed: Vec<&str> = out.0.iter().filter(|(_, pass)| !pass).map(|(label, _)| label.as_str()).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

fn report_transmission(dir: &tempfile::TempDir) -> f64 {
    let text = std::fs::read_to_string(dir.path().join("run").join("report.json")).unwrap();
    phasespace::harness::ComparisonReport::from_json(&text).unwrap().transmission.probability
}
