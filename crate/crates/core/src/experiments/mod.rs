//! Seeded, parallel reproductions of the empirical studies: phase-transition
//! sweeps, convergence-rate and timing studies, radius-mistuning sensitivity
//! and the denoising-bound Monte Carlo.
//!
//! Every random draw is seeded from the master seed and the work item's
//! coordinates (see [`crate::seed::derive`]), so outputs do not depend on the
//! number of workers.

pub mod config;
mod denoise;
pub mod persist;
mod rates;
mod sensitivity;
pub mod svg;
mod sweep;
mod timing;

pub use denoise::{run_denoising_check, DenoiseRow, DenoiseSpec};
pub use rates::{empirical_m0, run_rate_study, RateRow, RateStudy, RateStudySpec, RateSummary, ReferenceM0};
pub use sensitivity::{
    run_sensitivity_study, SensitivityRow, SensitivitySpec, SensitivityStudy, SensitivityTrial,
};
pub use sweep::{extract_boundary, run_sweep, BoundaryPoint, PhaseGrid, SweepCell, SweepSpec};
pub use timing::{fit_timing_model, TimingModel};
pub use timing::{run_timing_study, TimingFit, TimingIterRow, TimingRow, TimingSpec, TimingStudy};

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::constraints::Penalty;
use crate::error::{invalid, Result};
use crate::solver::{pgd_solve_penalty, SolverConfig};
use crate::operators::{DenseOperator, MeasurementOperator, SorsOperator, Transform};
use crate::seed;

/// Measurement ensemble used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Gaussian,
    Rademacher,
    SorsHadamard,
    SorsDct,
    /// `A = I`; only valid for `m = n`. Used as a test hook.
    Identity,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::Gaussian => "gaussian",
            EnsembleKind::Rademacher => "rademacher",
            EnsembleKind::SorsHadamard => "sors-hadamard",
            EnsembleKind::SorsDct => "sors-dct",
            EnsembleKind::Identity => "identity",
        }
    }

    pub fn build(self, m: usize, n: usize, seed_: u64) -> Result<Box<dyn MeasurementOperator<f64>>> {
        Ok(match self {
            EnsembleKind::Gaussian => Box::new(DenseOperator::gaussian(m, n, seed_)?),
            EnsembleKind::Rademacher => Box::new(DenseOperator::rademacher(m, n, seed_)?),
            EnsembleKind::SorsHadamard => {
                Box::new(SorsOperator::random(Transform::Hadamard, m, n, seed_)?)
            }
            EnsembleKind::SorsDct => Box::new(SorsOperator::random(Transform::Dct, m, n, seed_)?),
            EnsembleKind::Identity => {
                if m != n {
                    return Err(invalid(format!("identity ensemble needs m = n, got {m} != {n}")));
                }
                Box::new(DenseOperator::identity(n)?)
            }
        })
    }

    /// Whether `(m, n)` is a valid shape for this ensemble.
    pub fn supports(self, m: usize, n: usize) -> bool {
        match self {
            EnsembleKind::SorsHadamard => n.is_power_of_two(),
            EnsembleKind::Identity => m == n,
            _ => true,
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EnsembleKind::Gaussian),
            "rademacher" | "binary" => Ok(EnsembleKind::Rademacher),
            "sors-hadamard" | "sors_hadamard" => Ok(EnsembleKind::SorsHadamard),
            "sors-dct" | "sors_dct" => Ok(EnsembleKind::SorsDct),
            "identity" => Ok(EnsembleKind::Identity),
            other => Err(invalid(format!("unknown ensemble `{other}`"))),
        }
    }
}

/// `s`-sparse signal with a uniformly random support and i.i.d. N(0,1)
/// values on it.
pub fn draw_sparse_signal(n: usize, s: usize, seed_: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed_);
    let mut x = vec![0.0; n];
    let mut support = sample(&mut rng, n, s.min(n)).into_vec();
    support.sort_unstable();
    for i in support {
        x[i] = rng.sample(StandardNormal);
    }
    x
}

pub fn draw_gaussian(len: usize, sigma: f64, seed_: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed_);
    (0..len).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Per-trial seeds for the signal, the operator and the noise.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TrialSeeds {
    pub signal: u64,
    pub operator: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn new(master: u64, coords: &[u64]) -> Self {
        let base = seed::derive(master, coords);
        Self {
            signal: seed::derive(base, &[0]),
            operator: seed::derive(base, &[1]),
            noise: seed::derive(base, &[2]),
        }
    }
}

/// Runs `f` inside a rayon pool of `workers` threads (0 = rayon's default).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Outcome of one noiseless recovery trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    pub final_rel_err: f64,
    pub iterations: usize,
}

/// Draws `x` and `A` from `seeds`, sets `y = A x` and runs PGD with
/// `R = f(x)`.
pub(crate) fn recovery_trial(
    n: usize,
    s: usize,
    m: usize,
    ensemble: EnsembleKind,
    penalty: Penalty,
    cfg: &SolverConfig<f64>,
    seeds: TrialSeeds,
) -> Result<TrialOutcome> {
    let x = draw_sparse_signal(n, s, seeds.signal);
    let op = ensemble.build(m, n, seeds.operator)?;
    let y = op.apply(&x)?;
    let (_, trace) = pgd_solve_penalty(op.as_ref(), &y, penalty, cfg, Some(&x))?;
    let final_rel_err = trace.final_rel_err().unwrap_or(f64::NAN);
    Ok(TrialOutcome {
        success: trace.converged() || final_rel_err < cfg.success_tol,
        final_rel_err,
        iterations: trace.iterations_run(),
    })
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}
