use rayon::prelude::*;

use super::{draw_sparse_signal, median, with_workers, EnsembleKind, TrialSeeds};
use crate::constraints::{project_l1, Penalty};
use crate::error::{invalid, Result};
use crate::geometry::{self, Mismatch};
use crate::scalar::{dist2, norm2};
use crate::solver::{pgd_solve_penalty, SolverConfig, StepRegime};

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySpec {
    pub n: usize,
    pub s: usize,
    pub m: usize,
    /// Radii as multiples of `f(x) = ||x||_1`.
    pub ratios: Vec<f64>,
    pub trials: usize,
    pub iters: usize,
    pub ensemble: EnsembleKind,
    pub seed: u64,
}

impl SensitivitySpec {
    pub fn new(n: usize, s: usize, m: usize, ratios: Vec<f64>) -> Self {
        Self { n, s, m, ratios, trials: 20, iters: 200, ensemble: EnsembleKind::Gaussian, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityTrial {
    pub ratio: f64,
    pub trial: usize,
    /// Median relative error over the last 10 iterations.
    pub plateau_err: f64,
    /// Relative-error bound for this trial's mistuning; zero at ratio 1.
    pub bound: f64,
}

/// Per-ratio medians over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRow {
    pub ratio: f64,
    pub plateau_err: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityStudy {
    pub m0: f64,
    /// Greedy rate bound the mismatch bounds are stated for.
    pub rho: f64,
    pub trials: Vec<SensitivityTrial>,
    pub rows: Vec<SensitivityRow>,
}

const PLATEAU_WINDOW: usize = 10;

/// Relative limiting-error bound for radius `ratio * ||x||_1` at rate `rho`;
/// infinite when `rho >= 1`.
fn relative_bound(x: &[f64], ratio: f64, rho: f64) -> Result<f64> {
    let x_norm = norm2(x);
    let mismatch = if ratio < 1.0 {
        let p = project_l1(x, ratio * Penalty::L1.evaluate(x));
        Mismatch::Under { dist_to_set: dist2(x, &p) / x_norm }
    } else {
        Mismatch::Over { excess_ratio: ratio - 1.0, x_norm: 1.0 }
    };
    match geometry::mismatch_bound(1, rho, mismatch) {
        Ok(b) => Ok(b),
        Err(crate::Error::OutOfRegime(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub fn run_sensitivity_study(spec: &SensitivitySpec, workers: usize) -> Result<SensitivityStudy> {
    if spec.ratios.is_empty() || spec.trials == 0 || spec.iters < PLATEAU_WINDOW {
        return Err(invalid(format!(
            "sensitivity study needs ratios, trials and at least {PLATEAU_WINDOW} iterations"
        )));
    }
    if spec.ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radius ratios must be positive"));
    }
    if spec.s == 0 || spec.s > spec.n || !spec.ensemble.supports(spec.m, spec.n) {
        return Err(invalid("invalid sensitivity problem shape"));
    }
    let m0 = geometry::m0_l1(spec.n, spec.s, 0.0)?;
    let rho = geometry::rho_greedy(spec.m as f64, m0, 1)?;

    let jobs: Vec<(usize, usize)> = (0..spec.ratios.len())
        .flat_map(|r| (0..spec.trials).map(move |t| (r, t)))
        .collect();
    let results: Vec<Result<SensitivityTrial>> = with_workers(workers, || {
        jobs.par_iter()
            .map(|&(r, trial)| {
                let ratio = spec.ratios[r];
                // The signal and operator depend on the trial only, so each
                // ratio is run on the same instances.
                let seeds = TrialSeeds::new(spec.seed, &[spec.s as u64, spec.m as u64, trial as u64]);
                let x = draw_sparse_signal(spec.n, spec.s, seeds.signal);
                let op = spec.ensemble.build(spec.m, spec.n, seeds.operator)?;
                let y = op.apply(&x)?;
                let cfg = SolverConfig {
                    step: StepRegime::Greedy,
                    max_iters: spec.iters,
                    success_tol: f64::MIN_POSITIVE,
                    radius_override: Some(ratio * Penalty::L1.evaluate(&x)),
                    ..SolverConfig::default()
                };
                let (_, trace) = pgd_solve_penalty(op.as_ref(), &y, Penalty::L1, &cfg, Some(&x))?;
                let mut tail: Vec<f64> = trace
                    .records
                    .iter()
                    .rev()
                    .take(PLATEAU_WINDOW)
                    .map(|r| r.rel_err.unwrap_or(f64::NAN))
                    .collect();
                Ok(SensitivityTrial {
                    ratio,
                    trial,
                    plateau_err: median(&mut tail),
                    bound: relative_bound(&x, ratio, rho)?,
                })
            })
            .collect()
    })?;
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;

    let rows = spec
        .ratios
        .iter()
        .map(|&ratio| {
            let of_ratio = trials.iter().filter(|t| t.ratio == ratio);
            let mut plateau: Vec<f64> = of_ratio.clone().map(|t| t.plateau_err).collect();
            let mut bound: Vec<f64> = of_ratio.map(|t| t.bound).collect();
            SensitivityRow { ratio, plateau_err: median(&mut plateau), bound: median(&mut bound) }
        })
        .collect();
    Ok(SensitivityStudy { m0, rho, trials, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_radius_has_no_bound_and_recovers() {
        let m0 = geometry::m0_l1(128, 4, 0.0).unwrap();
        let m = (16.0 * m0).ceil() as usize;
        let mut spec = SensitivitySpec::new(128, 4, m, vec![1.0]);
        spec.trials = 3;
        spec.iters = 60;
        let study = run_sensitivity_study(&spec, 0).unwrap();
        assert_eq!(study.rows[0].bound, 0.0);
        assert!(study.rows[0].plateau_err < 1e-3);
    }

    #[test]
    fn under_bound_uses_distance_to_shrunk_ball() {
        let x = [3.0, 4.0];
        let b = relative_bound(&x, 6.0 / 7.0, 0.5).unwrap();
        // P onto ||.||_1 <= 6 is [2.5, 3.5]; distance sqrt(0.5), ||x|| = 5.
        assert!((b - 2.0 / 0.5 * 0.5f64.sqrt() / 5.0).abs() < 1e-12);
        assert!(relative_bound(&x, 1.1, 1.2).unwrap().is_infinite());
    }
}
