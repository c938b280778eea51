use serde::{Deserialize, Serialize};

use crate::bohmian::{bin_probabilities, binomial_check, velocity_field};
use crate::error::{Error, Result};
use crate::field::{l1_distance, DistributionKind, PhaseSpaceField};
use crate::grid::SpatialGrid;
use crate::units::Mass;
use crate::wave::{ExactMarginals, WaveFunction};

use super::config::{ExperimentConfig, Tolerances};

/// Outcome of checking one field against the probability axioms and the exact
/// marginals of its wave function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomVerdict {
    pub kind: DistributionKind,
    pub positive: bool,
    pub normalized: bool,
    pub exact_q: bool,
    pub exact_j: bool,
    /// Q and J were judged with binomial bounds rather than an L₁ bound.
    pub statistical: bool,
    pub min_value: f64,
    pub integral: f64,
    pub q_l1: f64,
    pub j_l1: f64,
    pub q_pass_fraction: Option<f64>,
    pub j_pass_fraction: Option<f64>,
}

/// Fields with an ensemble size are judged statistically; all others against
/// L₁ tolerances on the wave function's own grid.
pub fn validate_axioms(
    field: &PhaseSpaceField,
    psi: &WaveFunction,
    mass: Mass,
    tolerances: &Tolerances,
) -> Result<AxiomVerdict> {
    match field.ensemble_size() {
        Some(n) => validate_ensemble(field, psi, mass, tolerances, n),
        None => validate_deterministic(field, psi, mass, tolerances),
    }
}

fn validate_deterministic(
    field: &PhaseSpaceField,
    psi: &WaveFunction,
    mass: Mass,
    tol: &Tolerances,
) -> Result<AxiomVerdict> {
    if field.xgrid() != psi.grid() {
        return Err(Error::GridMismatch);
    }
    let exact = ExactMarginals::of(psi, mass)?;
    let dx = psi.grid().dx();
    let min_value = field.min();
    let integral = field.integral();
    let q_l1 = l1_distance(&field.marginal_position(), &exact.charge, dx);
    let j_l1 = l1_distance(&field.marginal_momentum_flux(mass), &exact.current, dx);
    Ok(AxiomVerdict {
        kind: field.kind(),
        positive: min_value >= -tol.positivity,
        normalized: (integral - 1.0).abs() < tol.normalization,
        exact_q: q_l1 < tol.marginal_l1,
        exact_j: j_l1 < tol.marginal_l1,
        statistical: false,
        min_value,
        integral,
        q_l1,
        j_l1,
        q_pass_fraction: None,
        j_pass_fraction: None,
    })
}

fn validate_ensemble(
    field: &PhaseSpaceField,
    psi: &WaveFunction,
    mass: Mass,
    tol: &Tolerances,
    n: usize,
) -> Result<AxiomVerdict> {
    let bins = *field.xgrid();
    let fine = psi.grid();
    let factor = (bins.dx() / fine.dx()).round() as usize;
    if factor == 0 || (factor > 1 && fine.coarsened(factor).ok() != Some(bins)) || (factor == 1 && &bins != fine) {
        return Err(Error::GridMismatch);
    }
    let exact = ExactMarginals::of(psi, mass)?;
    let probabilities = bin_probabilities(psi, &bins);
    let bin_current = accumulate(&exact.current, fine, &bins);
    let slope = bin_velocity_slope(psi, mass, &bins)?;

    let pgrid = field.pgrid();
    let dp = pgrid.dp();
    let weight = n as f64 * bins.dx() * dp;
    let momenta: Vec<f64> = pgrid.points().collect();
    let mut counts = Vec::with_capacity(bins.len());
    let mut momentum_sums = Vec::with_capacity(bins.len());
    for row in field.values().rows() {
        let mut count = 0u64;
        let mut sum = 0.0;
        for (v, p) in row.iter().zip(&momenta) {
            let c = (v * weight).round();
            count += c as u64;
            sum += c * p;
        }
        counts.push(count);
        momentum_sums.push(sum);
    }

    let q_check = binomial_check(&counts, &probabilities, n, tol.sigmas);

    // Σp over a bin against N·m·∫J: binomial spread of the count times the mean
    // momentum, plus the momentum quantization and the spread of m·v across the bin
    let m = mass.value();
    let total = n as f64;
    let (mut tested, mut passed) = (0usize, 0usize);
    for i in 0..bins.len() {
        let p = probabilities[i];
        let expected_count = total * p;
        if counts[i] == 0 && expected_count < 1.0 {
            continue;
        }
        tested += 1;
        let expected = total * m * bin_current[i];
        let mean_momentum = if p > 0.0 { m * bin_current[i] / p } else { 0.0 };
        let sigma = (expected_count * (1.0 - p).max(0.0)).sqrt();
        let bound = tol.sigmas * sigma * mean_momentum.abs()
            + counts[i] as f64 * (dp / 2.0 + m * slope[i] * bins.dx() / 2.0);
        if (momentum_sums[i] - expected).abs() <= bound {
            passed += 1;
        }
    }
    let j_fraction = if tested == 0 { 1.0 } else { passed as f64 / tested as f64 };

    let q_field = field.marginal_position();
    let q_exact: Vec<f64> = probabilities.iter().map(|p| p / bins.dx()).collect();
    let j_field = field.marginal_momentum_flux(mass);
    let j_exact: Vec<f64> = bin_current.iter().map(|j| j / bins.dx()).collect();
    let min_value = field.min();
    let integral = field.integral();
    Ok(AxiomVerdict {
        kind: field.kind(),
        positive: min_value >= 0.0,
        normalized: (integral - 1.0).abs() <= crate::bohmian::MAX_ABORTED_FRACTION,
        exact_q: q_check.pass_fraction() >= tol.pass_fraction,
        exact_j: j_fraction >= tol.pass_fraction,
        statistical: true,
        min_value,
        integral,
        q_l1: l1_distance(&q_field, &q_exact, bins.dx()),
        j_l1: l1_distance(&j_field, &j_exact, bins.dx()),
        q_pass_fraction: Some(q_check.pass_fraction()),
        j_pass_fraction: Some(j_fraction),
    })
}

/// ∫ f dx over each cell of `bins`.
fn accumulate(values: &[f64], fine: &SpatialGrid, bins: &SpatialGrid) -> Vec<f64> {
    let mut out = vec![0.0; bins.len()];
    for (x, v) in fine.points().zip(values) {
        if let Some(i) = bins.cell_of(x) {
            out[i] += v * fine.dx();
        }
    }
    out
}

/// Largest |∂v/∂x| seen within or next to each bin.
fn bin_velocity_slope(psi: &WaveFunction, mass: Mass, bins: &SpatialGrid) -> Result<Vec<f64>> {
    let field = velocity_field(psi, mass, 0.0)?;
    let v = field.velocity();
    let fine = psi.grid();
    let mut out = vec![0.0f64; bins.len()];
    for i in 0..v.len() - 1 {
        let s = (v[i + 1] - v[i]).abs() / fine.dx();
        for x in [fine.x(i), fine.x(i + 1)] {
            if let Some(b) = bins.cell_of(x) {
                out[b] = out[b].max(s);
            }
        }
    }
    Ok(out)
}

/// Positive / exact-Q / exact-J as the table should read for each kind.
pub fn expected_pattern(kind: DistributionKind) -> (bool, bool, bool) {
    match kind {
        DistributionKind::Wigner => (false, true, true),
        DistributionKind::Husimi => (true, false, false),
        DistributionKind::Bohmian => (true, true, true),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub kind: DistributionKind,
    pub positive: bool,
    pub exact_q: bool,
    pub exact_j: bool,
    pub statistical: bool,
}

impl TableRow {
    /// Conjunction of the verdicts of one kind over all snapshots.
    pub fn aggregate(kind: DistributionKind, verdicts: &[&AxiomVerdict]) -> Self {
        TableRow {
            kind,
            positive: verdicts.iter().all(|v| v.positive),
            exact_q: verdicts.iter().all(|v| v.exact_q),
            exact_j: verdicts.iter().all(|v| v.exact_j),
            statistical: verdicts.iter().any(|v| v.statistical),
        }
    }

    pub fn matches_expected(&self) -> bool {
        (self.positive, self.exact_q, self.exact_j) == expected_pattern(self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerMetrics {
    /// max|Im| / max|Re| of the discarded imaginary part.
    pub residue: f64,
    pub neg_mass: f64,
    pub min_value: f64,
    pub argmin: (f64, f64),
    pub max_abs: f64,
    /// ‖∫W dp − |ψ|²‖∞ / max|ψ|².
    pub q_linf_rel: f64,
    /// Relative L₂ error of the current where |ψ|² > 1e-6·max.
    pub j_rel_l2: f64,
    /// ∫∫W over the barrier band.
    pub band_mass: f64,
    /// max|W| over the barrier band.
    pub band_max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiMetrics {
    /// max|H_direct − H_smoothed| / max H.
    pub route_linf_rel: f64,
    /// ‖Q_H − |ψ|²‖₁
    pub q_bias_l1: f64,
    /// ‖G_s ⊛ |ψ|² − |ψ|²‖₁
    pub smoothing_bias_l1: f64,
    pub band_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotReport {
    pub time: f64,
    pub norm: f64,
    /// Edge amplitude relative to max|ψ| over the outer 5 % of the domain.
    pub edge_ratio: f64,
    pub wigner: WignerMetrics,
    pub husimi: HusimiMetrics,
    pub verdicts: Vec<AxiomVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub n_traj: usize,
    pub aborted: usize,
    pub refinements: u64,
    pub order_violations: Vec<usize>,
    /// Fraction of x bins within the binomial band, per snapshot.
    pub equivariance: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionReport {
    pub boundary: f64,
    pub probability: f64,
    pub split: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub transmission: TransmissionReport,
    pub snapshots: Vec<SnapshotReport>,
    pub trajectories: Option<TrajectoryReport>,
    pub table: Vec<TableRow>,
    pub matches_expected_pattern: bool,
}

impl ComparisonReport {
    pub fn build_table(snapshots: &[SnapshotReport]) -> Vec<TableRow> {
        DistributionKind::ALL
            .iter()
            .filter_map(|&kind| {
                let verdicts: Vec<&AxiomVerdict> = snapshots
                    .iter()
                    .flat_map(|s| s.verdicts.iter().filter(move |v| v.kind == kind))
                    .collect();
                (!verdicts.is_empty()).then(|| TableRow::aggregate(kind, &verdicts))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plain-text rendering of the table.
    pub fn table_text(&self) -> String {
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        let mut out = format!("{:<10}{:>10}{:>10}{:>10}\n", "", "positive", "exact Q", "exact J");
        for row in &self.table {
            let star = if row.statistical { "*" } else { "" };
            out.push_str(&format!(
                "{:<10}{:>10}{:>10}{:>10}\n",
                row.kind.name(),
                yes_no(row.positive),
                format!("{}{star}", yes_no(row.exact_q)),
                format!("{}{star}", yes_no(row.exact_j)),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohmian::{bohmian_distribution, integrate_trajectories, sample_equilibrium};
    use crate::grid::MomentumGrid;
    use crate::husimi::{husimi_direct, CoherentProbe};
    use crate::solver::{make_gaussian_packet, PacketParams};
    use crate::wigner::{wigner_transform, WignerTransformPlan};

    fn setup() -> (WaveFunction, Mass) {
        let grid = SpatialGrid::new(0.0, 200.0, 2048).unwrap();
        let psi = make_gaussian_packet(&grid, PacketParams { a0: 7.5, x0: 100.0, k0: 0.69 }).unwrap();
        (psi, Mass::from_m0(0.2))
    }

    #[test]
    fn gaussian_wigner_passes_everything() {
        let (psi, mass) = setup();
        let w = wigner_transform(&psi, &WignerTransformPlan::new(*psi.grid())).unwrap();
        let v = validate_axioms(&w, &psi, mass, &Tolerances::default()).unwrap();
        assert!(v.positive && v.normalized && v.exact_q && v.exact_j, "{v:?}");
        assert!(!v.statistical);
    }

    #[test]
    fn husimi_fails_exact_marginals() {
        let (psi, mass) = setup();
        let h = husimi_direct(&psi, &CoherentProbe::new(7.5).unwrap(), &MomentumGrid::half_band(psi.grid())).unwrap();
        let v = validate_axioms(&h, &psi, mass, &Tolerances::default()).unwrap();
        assert!(v.positive && v.normalized);
        assert!(!v.exact_q && !v.exact_j);
        assert!(v.q_l1 > 1e-2);
    }

    #[test]
    fn ensemble_is_judged_statistically() {
        let (psi, mass) = setup();
        let x = sample_equilibrium(&psi, 100_000, 5).unwrap();
        let ens = integrate_trajectories(&[(0.0, psi.clone())], x, mass, 0.5, vec![0.0]).unwrap();
        let pgrid = MomentumGrid::half_band(psi.grid());
        for bins in [*psi.grid(), psi.grid().coarsened(8).unwrap()] {
            let b = bohmian_distribution(&ens, 0, &bins, &pgrid).unwrap();
            let v = validate_axioms(&b, &psi, mass, &Tolerances::default()).unwrap();
            assert!(v.statistical);
            assert!(v.positive && v.normalized && v.exact_q && v.exact_j, "{v:?}");
        }

        // a displaced ensemble must fail the charge check
        let shifted: Vec<f64> = sample_equilibrium(&psi, 100_000, 5).unwrap().iter().map(|x| x + 3.0).collect();
        let ens = integrate_trajectories(&[(0.0, psi.clone())], shifted, mass, 0.5, vec![0.0]).unwrap();
        let b = bohmian_distribution(&ens, 0, psi.grid(), &pgrid).unwrap();
        let v = validate_axioms(&b, &psi, mass, &Tolerances::default()).unwrap();
        assert!(!v.exact_q);
    }

    #[test]
    fn pattern_rows() {
        let row = TableRow { kind: DistributionKind::Husimi, positive: true, exact_q: false, exact_j: false, statistical: false };
        assert!(row.matches_expected());
        let row = TableRow { kind: DistributionKind::Wigner, positive: true, exact_q: true, exact_j: true, statistical: false };
        assert!(!row.matches_expected());
    }
}
