use rayon::prelude::*;

use super::{recovery_trial, with_workers, EnsembleKind, TrialOutcome, TrialSeeds};
use crate::constraints::Penalty;
use crate::error::{invalid, Result};
use crate::geometry;
use crate::solver::{SolverConfig, StepRegime};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n: usize,
    pub s_grid: Vec<usize>,
    pub m_grid: Vec<usize>,
    pub ensemble: EnsembleKind,
    pub penalty: Penalty,
    pub regime: StepRegime<f64>,
    pub trials: usize,
    pub max_iters: usize,
    pub success_tol: f64,
    /// Width slack used when the structured step needs `m0`.
    pub eta: f64,
    pub master_seed: u64,
}

impl SweepSpec {
    /// Spec with the default 50 trials, 500 iterations and `1e-3` threshold.
    pub fn new(n: usize, s_grid: Vec<usize>, m_grid: Vec<usize>) -> Self {
        Self {
            n,
            s_grid,
            m_grid,
            ensemble: EnsembleKind::Gaussian,
            penalty: Penalty::L1,
            regime: StepRegime::Greedy,
            trials: 50,
            max_iters: 500,
            success_tol: 1e-3,
            eta: 0.0,
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        for (name, grid) in [("s", &self.s_grid), ("m", &self.m_grid)] {
            if grid.is_empty() {
                return Err(invalid(format!("{name} grid is empty")));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("{name} grid must be strictly ascending")));
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.success_tol > 0.0) {
            return Err(invalid("success_tol must be positive"));
        }
        if self.ensemble == EnsembleKind::SorsHadamard && !self.n.is_power_of_two() {
            return Err(invalid(format!("Hadamard SORS needs n a power of two, got {}", self.n)));
        }
        Ok(())
    }

    fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            step: self.regime,
            max_iters: self.max_iters,
            success_tol: self.success_tol,
            eta: self.eta,
            ..SolverConfig::default()
        }
    }

    /// `None` when the cell cannot be run: `s > n`, `m = 0`, an ensemble
    /// shape it does not support, or the structured step outside `m > 4 m0`.
    fn cell_config(&self, s: usize, m: usize) -> Result<Option<SolverConfig<f64>>> {
        if s > self.n || m == 0 || !self.ensemble.supports(m, self.n) {
            return Ok(None);
        }
        let mut cfg = self.solver_config();
        if self.regime == StepRegime::Structured {
            let m0 = geometry::m0_l1(self.n, s, self.eta)?;
            if m as f64 <= 4.0 * m0 {
                return Ok(None);
            }
            cfg.m0 = Some(m0);
        }
        Ok(Some(cfg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub s: usize,
    pub m: usize,
    /// Zero marks a skipped cell.
    pub trials: usize,
    pub successes: usize,
    /// Mean final relative error; NaN for skipped cells.
    pub mean_final_err: f64,
}

impl SweepCell {
    pub fn skipped(&self) -> bool {
        self.trials == 0
    }

    pub fn success_fraction(&self) -> Option<f64> {
        (!self.skipped()).then(|| self.successes as f64 / self.trials as f64)
    }
}

/// Sweep results, stored `s`-major: cell `(i, j)` is `s_grid[i]`, `m_grid[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub spec: SweepSpec,
    pub cells: Vec<SweepCell>,
}

impl PhaseGrid {
    pub fn cell(&self, si: usize, mi: usize) -> &SweepCell {
        &self.cells[si * self.spec.m_grid.len() + mi]
    }

    pub fn success_counts(&self) -> Vec<Vec<usize>> {
        self.rows().map(|row| row.iter().map(|c| c.successes).collect()).collect()
    }

    pub fn mean_final_err(&self) -> Vec<Vec<f64>> {
        self.rows().map(|row| row.iter().map(|c| c.mean_final_err).collect()).collect()
    }

    /// One slice of cells per sparsity level.
    pub fn rows(&self) -> impl Iterator<Item = &[SweepCell]> {
        self.cells.chunks(self.spec.m_grid.len())
    }
}

pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<PhaseGrid> {
    spec.validate()?;
    let mut configs = Vec::with_capacity(spec.s_grid.len() * spec.m_grid.len());
    for &s in &spec.s_grid {
        for &m in &spec.m_grid {
            configs.push((s, m, spec.cell_config(s, m)?));
        }
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.2.is_some())
        .flat_map(|(cell, _)| (0..spec.trials).map(move |t| (cell, t)))
        .collect();

    let outcomes: Vec<Result<TrialOutcome>> = with_workers(workers, || {
        jobs.par_iter()
            .map(|&(cell, t)| {
                let (s, m, cfg) = &configs[cell];
                let seeds = TrialSeeds::new(spec.master_seed, &[*s as u64, *m as u64, t as u64]);
                let cfg = cfg.as_ref().expect("only runnable cells are scheduled");
                recovery_trial(spec.n, *s, *m, spec.ensemble, spec.penalty, cfg, seeds)
            })
            .collect()
    })?;

    let mut cells: Vec<SweepCell> = configs
        .iter()
        .map(|&(s, m, _)| SweepCell { s, m, trials: 0, successes: 0, mean_final_err: f64::NAN })
        .collect();
    let mut err_sums = vec![0.0; cells.len()];
    for (&(cell, _), outcome) in jobs.iter().zip(outcomes) {
        let outcome = outcome?;
        let c = &mut cells[cell];
        c.trials += 1;
        c.successes += usize::from(outcome.success);
        err_sums[cell] += outcome.final_rel_err;
    }
    for (c, sum) in cells.iter_mut().zip(err_sums) {
        if c.trials > 0 {
            c.mean_final_err = sum / c.trials as f64;
        }
    }
    Ok(PhaseGrid { spec: spec.clone(), cells })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub s: usize,
    pub m_star: f64,
}

/// Per-`s` crossing of the success fraction through `level`, scanning `m`
/// upwards and interpolating linearly. Uses the last crossing from below, so
/// a noisy column reports where it finally stays above the level. Columns
/// that never reach the level are left out; skipped cells are ignored.
pub fn extract_boundary(grid: &PhaseGrid, level: f64) -> Vec<BoundaryPoint> {
    let mut out = Vec::new();
    for row in grid.rows() {
        let pts: Vec<(f64, f64)> = row
            .iter()
            .filter_map(|c| c.success_fraction().map(|f| (c.m as f64, f)))
            .collect();
        if let Some(m_star) = column_crossing(&pts, level) {
            out.push(BoundaryPoint { s: row[0].s, m_star });
        }
    }
    out
}

fn column_crossing(pts: &[(f64, f64)], level: f64) -> Option<f64> {
    let first = pts.first()?;
    let mut crossing = None;
    for w in pts.windows(2) {
        let ((m0, f0), (m1, f1)) = (w[0], w[1]);
        if f0 < level && f1 >= level {
            crossing = Some(m0 + (level - f0) / (f1 - f0) * (m1 - m0));
        }
    }
    match crossing {
        Some(m) => Some(m),
        // Never below the level before reaching it: the first point already succeeds.
        None if first.1 >= level => Some(first.0),
        None => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from_column(m_grid: Vec<usize>, fractions: &[f64]) -> PhaseGrid {
        let trials = 10;
        let cells = m_grid
            .iter()
            .zip(fractions)
            .map(|(&m, &f)| SweepCell {
                s: 1,
                m,
                trials,
                successes: (f * trials as f64).round() as usize,
                mean_final_err: 0.0,
            })
            .collect();
        let mut spec = SweepSpec::new(64, vec![1], m_grid);
        spec.trials = trials;
        PhaseGrid { spec, cells }
    }

    #[test]
    fn boundary_midpoint() {
        let g = grid_from_column(vec![10, 20, 30, 40], &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(extract_boundary(&g, 0.5), vec![BoundaryPoint { s: 1, m_star: 25.0 }]);
    }

    #[test]
    fn boundary_all_success_is_smallest_m() {
        let g = grid_from_column(vec![10, 20, 30, 40], &[1.0; 4]);
        assert_eq!(extract_boundary(&g, 0.5)[0].m_star, 10.0);
    }

    #[test]
    fn boundary_interpolates() {
        let g = grid_from_column(vec![10, 20, 30, 40], &[0.0, 0.4, 0.6, 1.0]);
        assert!((extract_boundary(&g, 0.5)[0].m_star - 25.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_never_success_is_absent() {
        let g = grid_from_column(vec![10, 20, 30], &[0.0, 0.2, 0.4]);
        assert!(extract_boundary(&g, 0.5).is_empty());
    }

    #[test]
    fn boundary_non_monotone_uses_last_crossing() {
        let g = grid_from_column(vec![10, 20, 30, 40, 50], &[0.0, 0.6, 0.2, 0.8, 1.0]);
        assert!((extract_boundary(&g, 0.5)[0].m_star - 35.0).abs() < 1e-12);
    }

    #[test]
    fn identity_cells_recover_in_one_step() {
        let mut spec = SweepSpec::new(16, vec![1, 3, 5], vec![16]);
        spec.ensemble = EnsembleKind::Identity;
        spec.regime = StepRegime::Fixed(1.0);
        spec.trials = 1;
        let grid = run_sweep(&spec, 1).unwrap();
        assert_eq!(grid.success_counts(), vec![vec![1], vec![1], vec![1]]);
    }

    #[test]
    fn infeasible_cells_are_skipped() {
        let mut spec = SweepSpec::new(8, vec![2, 9], vec![4, 8]);
        spec.trials = 2;
        let grid = run_sweep(&spec, 1).unwrap();
        assert!(grid.cell(1, 0).skipped() && grid.cell(1, 1).skipped());
        assert!(grid.cell(1, 0).mean_final_err.is_nan());
        assert_eq!(grid.cell(0, 1).trials, 2);
    }

    #[test]
    fn sweep_is_worker_independent() {
        let mut spec = SweepSpec::new(32, vec![2, 4], vec![8, 16, 24]);
        spec.trials = 4;
        spec.master_seed = 9;
        let a = run_sweep(&spec, 1).unwrap();
        let b = run_sweep(&spec, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SweepSpec::new(32, vec![4, 2], vec![8]);
        assert!(run_sweep(&spec, 1).is_err());
        spec.s_grid = vec![2];
        spec.trials = 0;
        assert!(run_sweep(&spec, 1).is_err());
        spec.trials = 1;
        spec.n = 30;
        spec.ensemble = EnsembleKind::SorsHadamard;
        assert!(run_sweep(&spec, 1).is_err());
    }
}
