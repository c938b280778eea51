//! Bohmian trajectories guided by a time-ordered sequence of ψ snapshots.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{DistributionKind, PhaseSpaceField};
use crate::grid::{MomentumGrid, SpatialGrid};
use crate::units::Mass;
use crate::wave::{polar_decompose, ExactMarginals, WaveFunction, DEFAULT_NODE_THRESHOLD};

/// Largest tolerated fraction of aborted trajectories.
pub const MAX_ABORTED_FRACTION: f64 = 1e-3;

/// Node regions wider than this many cells abort the trajectories entering them.
const WIDE_NODE_CELLS: usize = 3;

/// Trajectories may be clamped at a wall only where |ψ| is below this
/// fraction of its maximum.
const WALL_THRESHOLD: f64 = 1e-8;

/// Each refinement doubles the number of substeps in an interval.
const MAX_REFINEMENTS: u32 = 10;

/// A substep is split until h·|∂v/∂x| stays below this near the trajectory.
const MAX_STEP_STIFFNESS: f64 = 0.1;

/// Upper bound on the local split of one substep, as a power of two.
const MAX_LOCAL_SPLIT: u32 = 10;

/// Cells on each side searched for the steepest velocity slope.
const SLOPE_WINDOW: usize = 2;

/// v = (ħ/m)·Im(ψ*∂ψ/∂x)/|ψ|² at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFieldSnapshot {
    time: f64,
    grid: SpatialGrid,
    velocity: Vec<f64>,
    valid: Vec<bool>,
    wide_node: Vec<bool>,
    wall_ratio: f64,
}

impl VelocityFieldSnapshot {
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// nm/fs; node points carry the value of their nearest valid neighbour.
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Linear interpolation, constant beyond the outermost grid points.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.velocity.len();
        let u = ((x - self.grid.x_min()) / self.grid.dx()).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let frac = u - i as f64;
        self.velocity[i] * (1.0 - frac) + self.velocity[i + 1] * frac
    }

    fn in_wide_node(&self, x: f64) -> bool {
        self.wide_node[self.grid.nearest(x)]
    }
}

pub fn velocity_field(psi: &WaveFunction, mass: Mass, time: f64) -> Result<VelocityFieldSnapshot> {
    let polar = polar_decompose(psi, DEFAULT_NODE_THRESHOLD)?;
    let scale = mass.hbar_over_m();
    let n = polar.valid.len();

    // distance to the nearest valid point on each side
    let mut left = vec![None; n];
    let mut last = None;
    for i in 0..n {
        if polar.valid[i] {
            last = Some(i);
        }
        left[i] = last;
    }
    let mut right = vec![None; n];
    last = None;
    for i in (0..n).rev() {
        if polar.valid[i] {
            last = Some(i);
        }
        right[i] = last;
    }
    let velocity = (0..n)
        .map(|i| {
            let source = match (left[i], right[i]) {
                (Some(l), Some(r)) => if i - l <= r - i { l } else { r },
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => unreachable!("polar_decompose rejects vanishing states"),
            };
            scale * polar.phase_gradient[source]
        })
        .collect();

    let mut wide_node = vec![false; n];
    let mut i = 0;
    while i < n {
        if polar.valid[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !polar.valid[i] {
            i += 1;
        }
        if i - start > WIDE_NODE_CELLS {
            wide_node[start..i].iter_mut().for_each(|w| *w = true);
        }
    }

    let peak = polar.amplitude.iter().cloned().fold(0.0, f64::max);
    let wall_ratio = polar.amplitude[0].max(polar.amplitude[n - 1]) / peak;
    Ok(VelocityFieldSnapshot {
        time,
        grid: *psi.grid(),
        velocity,
        valid: polar.valid,
        wide_node,
        wall_ratio,
    })
}

/// Draws `n_traj` positions from |ψ|² by inverting the piecewise-linear
/// cumulative of |ψ_i|²dx over cells `[x_i − dx/2, x_i + dx/2)`.
///
/// Trajectory `i` uses its own stream of a ChaCha8 generator seeded with
/// `seed`, so the result does not depend on scheduling.
pub fn sample_equilibrium(psi: &WaveFunction, n_traj: usize, seed: u64) -> Result<Vec<f64>> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("at least one trajectory is required".into()));
    }
    let grid = psi.grid();
    let dx = grid.dx();
    let density = psi.density();
    let cumulative = cumulative_mass(&density, dx);
    let total = cumulative[density.len()];
    if !(total > 0.0) {
        return Err(Error::VanishingWaveFunction);
    }
    Ok((0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let u = rng.gen::<f64>() * total;
            let k = (cumulative.partition_point(|&c| c <= u) - 1).min(density.len() - 1);
            let frac = ((u - cumulative[k]) / (density[k] * dx)).clamp(0.0, 1.0);
            grid.x(k) + (frac - 0.5) * dx
        })
        .collect())
}

fn cumulative_mass(density: &[f64], dx: f64) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(density.len() + 1);
    let mut running = 0.0;
    cumulative.push(0.0);
    for rho in density {
        running += rho * dx;
        cumulative.push(running);
    }
    cumulative
}

/// Positions and momenta of every trajectory at the output times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    mass: Mass,
    times: Vec<f64>,
    /// n_traj × n_times, NaN after an abort.
    positions: Array2<f64>,
    /// m·v(x, t) at the same points.
    momenta: Array2<f64>,
    initial_order: Vec<usize>,
    aborted: usize,
    refinements: u64,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mass(&self) -> Mass {
        self.mass
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &Array2<f64> {
        &self.positions
    }

    pub fn momenta(&self) -> &Array2<f64> {
        &self.momenta
    }

    pub fn aborted(&self) -> usize {
        self.aborted
    }

    /// Intervals that needed extra substeps to keep trajectories ordered.
    pub fn refinements(&self) -> u64 {
        self.refinements
    }

    /// Surviving (x, p) pairs at output index `k`.
    pub fn phase_points(&self, k: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions
            .column(k)
            .into_iter()
            .zip(self.momenta.column(k))
            .filter(|(x, _)| x.is_finite())
            .map(|(&x, &p)| (x, p))
            .collect::<Vec<_>>()
            .into_iter()
    }

    /// Adjacent pairs (in initial order) whose order is reversed at output `k`.
    pub fn order_violations(&self, k: usize) -> usize {
        let column = self.positions.column(k);
        let mut violations = 0;
        let mut previous = f64::NEG_INFINITY;
        for &i in &self.initial_order {
            let x = column[i];
            if !x.is_finite() {
                continue;
            }
            if x < previous {
                violations += 1;
            }
            previous = x;
        }
        violations
    }

    /// Trajectory counts per cell of `bins` at output `k`.
    pub fn position_counts(&self, k: usize, bins: &SpatialGrid) -> Vec<u64> {
        let mut counts = vec![0u64; bins.len()];
        for x in self.positions.column(k) {
            if let Some(i) = x.is_finite().then(|| bins.cell_of(*x)).flatten() {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Integrates trajectories while ψ snapshots are pushed in time order, so the
/// wave-function history never has to be stored.
///
/// Between consecutive snapshots v is interpolated linearly in t and each
/// interval is covered by equal RK4 substeps of at most `substep`. A substep is
/// split into smaller pieces where the velocity field is steep. If any two
/// trajectories still swap order the interval is redone with twice as many
/// substeps for every trajectory.
pub struct TrajectoryIntegrator {
    grid: SpatialGrid,
    mass: Mass,
    substep: f64,
    output_times: Vec<f64>,
    positions: Vec<f64>,
    alive: Vec<bool>,
    initial_order: Vec<usize>,
    previous: Option<VelocityFieldSnapshot>,
    recorded_x: Vec<Vec<f64>>,
    recorded_p: Vec<Vec<f64>>,
    refinements: u64,
}

impl TrajectoryIntegrator {
    pub fn new(
        grid: SpatialGrid,
        x_init: Vec<f64>,
        mass: Mass,
        substep: f64,
        output_times: Vec<f64>,
    ) -> Result<Self> {
        if !(substep.is_finite() && substep > 0.0) {
            return Err(Error::InvalidParameter(format!("substep {substep} fs must be positive")));
        }
        if output_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("output times must be strictly ascending".into()));
        }
        let half = grid.dx() / 2.0;
        if let Some(x) = x_init
            .iter()
            .find(|x| !(**x >= grid.x_min() - half && **x < grid.x_max() - half))
        {
            return Err(Error::InvalidParameter(format!("initial position {x} nm outside the grid")));
        }
        let mut initial_order: Vec<usize> = (0..x_init.len()).collect();
        initial_order.sort_by(|&a, &b| x_init[a].total_cmp(&x_init[b]).then(a.cmp(&b)));
        Ok(TrajectoryIntegrator {
            grid,
            mass,
            substep,
            output_times,
            alive: vec![true; x_init.len()],
            positions: x_init,
            initial_order,
            previous: None,
            recorded_x: Vec::new(),
            recorded_p: Vec::new(),
            refinements: 0,
        })
    }

    /// Current time, if any snapshot has been pushed.
    pub fn time(&self) -> Option<f64> {
        self.previous.as_ref().map(|s| s.time)
    }

    pub fn push(&mut self, t: f64, psi: &WaveFunction) -> Result<()> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let snapshot = velocity_field(psi, self.mass, t)?;
        if let Some(previous) = self.previous.take() {
            let span = t - previous.time;
            if !(span > 0.0) {
                return Err(Error::InvalidParameter(format!("snapshot at {t} fs is not after {} fs", previous.time)));
            }
            if span > 4.0 * self.substep * (1.0 + 1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "snapshot spacing {span} fs exceeds four substeps of {} fs",
                    self.substep
                )));
            }
            self.advance(&previous, &snapshot)?;
        }
        let next = self.recorded_x.len();
        if let Some(&target) = self.output_times.get(next) {
            let tolerance = 1e-9 * target.abs().max(1.0);
            if (t - target).abs() <= tolerance {
                self.record(&snapshot);
            } else if t > target {
                return Err(Error::InvalidParameter(format!("no snapshot at output time {target} fs")));
            }
        }
        self.previous = Some(snapshot);
        Ok(())
    }

    fn record(&mut self, snapshot: &VelocityFieldSnapshot) {
        let m = self.mass.value();
        self.recorded_x.push(self.positions.clone());
        self.recorded_p.push(
            self.positions
                .iter()
                .map(|&x| if x.is_finite() { m * snapshot.at(x) } else { f64::NAN })
                .collect(),
        );
    }

    fn advance(&mut self, a: &VelocityFieldSnapshot, b: &VelocityFieldSnapshot) -> Result<()> {
        let span = b.time - a.time;
        let base = ((span / self.substep) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let interval = Interval::new(a, b);
        for level in 0..=MAX_REFINEMENTS {
            let steps = base << level;
            let h = span / steps as f64;
            let mut positions = self.positions.clone();
            positions.par_iter_mut().for_each(|x| {
                if x.is_finite() {
                    *x = interval.rk4_path(*x, steps, h).unwrap_or(f64::NAN);
                }
            });
            if ordered(&positions, &self.initial_order) {
                for (alive, x) in self.alive.iter_mut().zip(&positions) {
                    *alive = x.is_finite();
                }
                self.positions = positions;
                return Ok(());
            }
            self.refinements += 1;
        }
        Err(Error::TrajectoryCrossing { time: b.time, refinements: MAX_REFINEMENTS })
    }

    pub fn finish(self) -> Result<TrajectoryEnsemble> {
        if self.recorded_x.len() != self.output_times.len() {
            return Err(Error::InvalidParameter(format!(
                "only {} of {} output times were reached",
                self.recorded_x.len(),
                self.output_times.len()
            )));
        }
        let n = self.positions.len();
        let aborted = self.alive.iter().filter(|a| !**a).count();
        if aborted as f64 > MAX_ABORTED_FRACTION * n as f64 {
            return Err(Error::TooManyAborted { aborted, total: n });
        }
        if aborted > 0 {
            log::info!("{aborted} of {n} trajectories aborted in node regions");
        }
        let k = self.output_times.len();
        let columns = |records: &[Vec<f64>]| Array2::from_shape_fn((n, k), |(i, j)| records[j][i]);
        Ok(TrajectoryEnsemble {
            mass: self.mass,
            positions: columns(&self.recorded_x),
            momenta: columns(&self.recorded_p),
            times: self.output_times,
            initial_order: self.initial_order,
            aborted,
            refinements: self.refinements,
        })
    }
}

fn ordered(positions: &[f64], order: &[usize]) -> bool {
    let mut previous = f64::NEG_INFINITY;
    for &i in order {
        let x = positions[i];
        if x.is_finite() {
            if x < previous {
                return false;
            }
            previous = x;
        }
    }
    true
}

/// Two consecutive velocity snapshots with the steepest |∂v/∂x| near each cell.
struct Interval<'a> {
    a: &'a VelocityFieldSnapshot,
    b: &'a VelocityFieldSnapshot,
    slope: Vec<f64>,
    x_first: f64,
    x_last: f64,
}

impl<'a> Interval<'a> {
    fn new(a: &'a VelocityFieldSnapshot, b: &'a VelocityFieldSnapshot) -> Self {
        let grid = a.grid;
        let n = grid.len();
        let dx = grid.dx();
        let cell: Vec<f64> = (0..n - 1)
            .map(|i| {
                let da = (a.velocity[i + 1] - a.velocity[i]).abs();
                let db = (b.velocity[i + 1] - b.velocity[i]).abs();
                da.max(db) / dx
            })
            .collect();
        let slope = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(SLOPE_WINDOW);
                let hi = (i + SLOPE_WINDOW).min(n - 2);
                cell[lo..=hi].iter().cloned().fold(0.0, f64::max)
            })
            .collect();
        Interval { a, b, slope, x_first: grid.x(0), x_last: grid.x(n - 1) }
    }

    fn velocity(&self, x: f64, s: f64) -> f64 {
        let w = s / (self.b.time - self.a.time);
        (1.0 - w) * self.a.at(x) + w * self.b.at(x)
    }

    /// RK4 over `steps` substeps of `h`, each split further where the
    /// velocity is steep; `None` means the trajectory aborted.
    fn rk4_path(&self, mut x: f64, steps: usize, h: f64) -> Option<f64> {
        for step in 0..steps {
            let stiffness = h * self.slope[self.a.grid.nearest(x)];
            let split = if stiffness > MAX_STEP_STIFFNESS {
                ((stiffness / MAX_STEP_STIFFNESS).log2().ceil() as u32).min(MAX_LOCAL_SPLIT)
            } else {
                0
            };
            let pieces = 1usize << split;
            let hs = h / pieces as f64;
            for piece in 0..pieces {
                if self.a.in_wide_node(x) || self.b.in_wide_node(x) {
                    return None;
                }
                let s = step as f64 * h + piece as f64 * hs;
                let k1 = self.velocity(x, s);
                let k2 = self.velocity(x + 0.5 * hs * k1, s + 0.5 * hs);
                let k3 = self.velocity(x + 0.5 * hs * k2, s + 0.5 * hs);
                let k4 = self.velocity(x + hs * k3, s + hs);
                x += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if x < self.x_first || x > self.x_last {
                    if self.a.wall_ratio.max(self.b.wall_ratio) >= WALL_THRESHOLD {
                        return None;
                    }
                    x = x.clamp(self.x_first, self.x_last);
                }
            }
        }
        Some(x)
    }
}

/// Integrates from stored snapshots; `x_init` are positions at the first one.
pub fn integrate_trajectories(
    snapshots: &[(f64, WaveFunction)],
    x_init: Vec<f64>,
    mass: Mass,
    substep: f64,
    output_times: Vec<f64>,
) -> Result<TrajectoryEnsemble> {
    let grid = *snapshots
        .first()
        .ok_or_else(|| Error::InvalidParameter("no snapshots".into()))?
        .1
        .grid();
    let mut integrator = TrajectoryIntegrator::new(grid, x_init, mass, substep, output_times)?;
    for (t, psi) in snapshots {
        integrator.push(*t, psi)?;
    }
    integrator.finish()
}

/// Histogram of the ensemble at output `k`: each surviving trajectory adds
/// 1/(N·dx·dp) to its (x, p) bin, N counting aborted trajectories too.
/// Momenta beyond the grid are put in the edge bins.
pub fn bohmian_distribution(
    ensemble: &TrajectoryEnsemble,
    k: usize,
    xgrid: &SpatialGrid,
    pgrid: &MomentumGrid,
) -> Result<PhaseSpaceField> {
    if ensemble.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    if k >= ensemble.times().len() {
        return Err(Error::InvalidParameter(format!("no output index {k}")));
    }
    let mut counts = Array2::<f64>::zeros((xgrid.len(), pgrid.len()));
    let mut clamped = 0usize;
    for (x, p) in ensemble.phase_points(k) {
        let Some(i) = xgrid.cell_of(x) else { continue };
        let j = pgrid.cell_of(p).unwrap_or_else(|| {
            clamped += 1;
            if p < 0.0 { 0 } else { pgrid.len() - 1 }
        });
        counts[[i, j]] += 1.0;
    }
    if clamped > 0 {
        log::warn!("{clamped} trajectories had momenta outside the grid");
    }
    let n = ensemble.len();
    counts /= n as f64 * xgrid.dx() * pgrid.dp();
    Ok(PhaseSpaceField::new(*xgrid, *pgrid, counts, DistributionKind::Bohmian)?.with_ensemble_size(n))
}

/// Q_B = |ψ|² and J_B = (ħ/m)R²∂θ/∂x; the same computation as the Wigner oracle.
pub fn bohmian_marginal_oracle(psi: &WaveFunction, mass: Mass) -> Result<ExactMarginals> {
    ExactMarginals::of(psi, mass)
}

/// Probability of each cell of `bins` under |ψ|², summing the grid cells
/// whose centres fall inside it.
pub fn bin_probabilities(psi: &WaveFunction, bins: &SpatialGrid) -> Vec<f64> {
    let dx = psi.grid().dx();
    let mut probabilities = vec![0.0; bins.len()];
    for (x, rho) in psi.grid().points().zip(psi.density()) {
        if let Some(i) = bins.cell_of(x) {
            probabilities[i] += rho * dx;
        }
    }
    probabilities
}

/// Per-bin binomial comparison of observed counts with expected probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialCheck {
    /// Bins with a count or an expectation of at least one.
    pub bins_tested: usize,
    pub bins_passed: usize,
}

impl BinomialCheck {
    pub fn pass_fraction(&self) -> f64 {
        if self.bins_tested == 0 {
            1.0
        } else {
            self.bins_passed as f64 / self.bins_tested as f64
        }
    }
}

/// Passes a bin when |n − Np| ≤ sigmas·√(Np(1 − p)).
pub fn binomial_check(counts: &[u64], probabilities: &[f64], total: usize, sigmas: f64) -> BinomialCheck {
    let n = total as f64;
    let mut check = BinomialCheck { bins_tested: 0, bins_passed: 0 };
    for (&count, &p) in counts.iter().zip(probabilities) {
        let expected = n * p;
        if count == 0 && expected < 1.0 {
            continue;
        }
        check.bins_tested += 1;
        let sigma = (expected * (1.0 - p).max(0.0)).sqrt();
        if (count as f64 - expected).abs() <= sigmas * sigma {
            check.bins_passed += 1;
        }
    }
    check
}
