use rayon::prelude::*;

use super::{draw_sparse_signal, median, run_sweep, extract_boundary, with_workers, EnsembleKind, SweepSpec, TrialSeeds};
use crate::constraints::Penalty;
use crate::error::{invalid, Result};
use crate::geometry;
use crate::solver::{fit_rate, pgd_solve_penalty, SolverConfig, StepRegime};

/// Which phase-transition location normalizes the error curves.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceM0 {
    /// `m0` from the closed-form width.
    Theoretical,
    /// Measured boundaries, one per entry of `s_list`.
    Empirical(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudySpec {
    pub n: usize,
    pub s_list: Vec<usize>,
    /// `m = round(oversampling * m0)` with the closed-form `m0`.
    pub oversampling: f64,
    pub ensemble: EnsembleKind,
    pub regime: StepRegime<f64>,
    pub trials: usize,
    pub iters: usize,
    /// Normalization slack in `((1 - gamma) m0 / m)^(t/2)`.
    pub gamma: f64,
    pub reference: ReferenceM0,
    /// Iteration window for the fitted rate.
    pub window: (usize, usize),
    pub eta: f64,
    pub seed: u64,
}

impl RateStudySpec {
    pub fn new(n: usize, s_list: Vec<usize>, oversampling: f64) -> Self {
        Self {
            n,
            s_list,
            oversampling,
            ensemble: EnsembleKind::Gaussian,
            regime: StepRegime::Greedy,
            trials: 50,
            iters: 50,
            gamma: 0.075,
            reference: ReferenceM0::Theoretical,
            window: (10, 40),
            eta: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub s: usize,
    pub m: usize,
    pub iter: usize,
    pub median_rel_err: f64,
    pub normalized_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub s: usize,
    pub m: usize,
    pub m0: f64,
    pub m0_ref: f64,
    /// Fitted contraction of the median curve over the window; NaN when the
    /// curve hits the floating-point floor too early to fit.
    pub measured_rate: f64,
    /// `sqrt(m0_ref / m)`, the scaling the normalization assumes.
    pub predicted_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub rows: Vec<RateRow>,
    pub summary: Vec<RateSummary>,
}

/// Errors below this are treated as converged to machine precision and
/// excluded from rate fits.
const FIT_FLOOR: f64 = 1e-11;

pub fn run_rate_study(spec: &RateStudySpec, workers: usize) -> Result<RateStudy> {
    if spec.s_list.is_empty() || spec.trials == 0 || spec.iters == 0 {
        return Err(invalid("rate study needs sparsities, trials and iterations"));
    }
    if !(spec.oversampling > 0.0) || !(0.0..1.0).contains(&spec.gamma) {
        return Err(invalid("oversampling must be positive and gamma in [0, 1)"));
    }
    if let ReferenceM0::Empirical(v) = &spec.reference {
        if v.len() != spec.s_list.len() {
            return Err(invalid("one empirical m0 per sparsity level is required"));
        }
    }
    let mut levels = Vec::new();
    for (k, &s) in spec.s_list.iter().enumerate() {
        let m0 = geometry::m0_l1(spec.n, s, spec.eta)?;
        let m0_ref = match &spec.reference {
            ReferenceM0::Theoretical => m0,
            ReferenceM0::Empirical(v) => v[k],
        };
        let m = ((spec.oversampling * m0).round() as usize).max(1);
        if !spec.ensemble.supports(m, spec.n) {
            return Err(invalid(format!("{} cannot take m = {m}", spec.ensemble.name())));
        }
        levels.push((s, m, m0, m0_ref));
    }

    let jobs: Vec<(usize, usize)> =
        (0..levels.len()).flat_map(|l| (0..spec.trials).map(move |t| (l, t))).collect();
    let curves: Vec<Result<Vec<f64>>> = with_workers(workers, || {
        jobs.par_iter()
            .map(|&(l, t)| {
                let (s, m, m0, _) = levels[l];
                let seeds = TrialSeeds::new(spec.seed, &[s as u64, m as u64, t as u64]);
                let x = draw_sparse_signal(spec.n, s, seeds.signal);
                let op = spec.ensemble.build(m, spec.n, seeds.operator)?;
                let y = op.apply(&x)?;
                let cfg = SolverConfig {
                    step: spec.regime,
                    max_iters: spec.iters,
                    success_tol: f64::MIN_POSITIVE,
                    m0: Some(m0),
                    ..SolverConfig::default()
                };
                let (_, trace) = pgd_solve_penalty(op.as_ref(), &y, Penalty::L1, &cfg, Some(&x))?;
                // Curve indexed by iteration, starting from z_0 = 0; runs that
                // stall early hold their last value.
                let mut curve = vec![1.0];
                curve.extend(trace.records.iter().map(|r| r.rel_err.unwrap_or(f64::NAN)));
                let last = *curve.last().unwrap_or(&1.0);
                curve.resize(spec.iters + 1, last);
                Ok(curve)
            })
            .collect()
    })?;
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (l, &(s, m, m0, m0_ref)) in levels.iter().enumerate() {
        let level: Vec<&Vec<f64>> =
            jobs.iter().zip(&curves).filter(|(j, _)| j.0 == l).map(|(_, c)| c).collect();
        let base = (1.0 - spec.gamma) * m0_ref / m as f64;
        let mut fit = Vec::new();
        for iter in 0..=spec.iters {
            let mut at: Vec<f64> = level.iter().map(|c| c[iter]).collect();
            let med = median(&mut at);
            let normalized_err = med / base.powf(iter as f64 / 2.0);
            rows.push(RateRow { s, m, iter, median_rel_err: med, normalized_err });
            if iter >= spec.window.0 && iter <= spec.window.1 && med > FIT_FLOOR {
                fit.push((iter as f64, med));
            }
        }
        summary.push(RateSummary {
            s,
            m,
            m0,
            m0_ref,
            measured_rate: fit_rate(&fit).unwrap_or(f64::NAN),
            predicted_rate: (m0_ref / m as f64).sqrt(),
        });
    }
    Ok(RateStudy { rows, summary })
}

/// Empirical phase transition for `s`: the 50% boundary of a greedy ℓ1
/// sweep over `m = ratio * m0`. `None` if no tested `m` reaches it.
pub fn empirical_m0(
    n: usize,
    s: usize,
    ensemble: EnsembleKind,
    ratios: &[f64],
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<Option<f64>> {
    let m0 = geometry::m0_l1(n, s, 0.0)?;
    let mut m_grid: Vec<usize> = ratios.iter().map(|r| ((r * m0).round() as usize).max(1)).collect();
    m_grid.sort_unstable();
    m_grid.dedup();
    let mut spec = SweepSpec::new(n, vec![s], m_grid);
    spec.ensemble = ensemble;
    spec.trials = trials;
    spec.master_seed = seed;
    let grid = run_sweep(&spec, workers)?;
    Ok(extract_boundary(&grid, 0.5).first().map(|b| b.m_star))
}
