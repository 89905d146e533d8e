use std::time::Instant;

use super::{draw_sparse_signal, median, EnsembleKind, TrialSeeds};
use crate::constraints::Penalty;
use crate::error::{invalid, Result};
use crate::geometry;
use crate::solver::{pgd_solve_penalty, SolverConfig, StepRegime};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSpec {
    pub n: usize,
    pub s: usize,
    pub m_grid: Vec<usize>,
    pub ensembles: Vec<EnsembleKind>,
    pub target_tol: f64,
    pub trials: usize,
    pub max_iters: usize,
    pub regime: StepRegime<f64>,
    pub seed: u64,
}

impl TimingSpec {
    pub fn new(n: usize, s: usize, m_grid: Vec<usize>, ensembles: Vec<EnsembleKind>) -> Self {
        Self {
            n,
            s,
            m_grid,
            ensembles,
            target_tol: 1e-3,
            trials: 5,
            max_iters: 500,
            regime: StepRegime::Greedy,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub ensemble: EnsembleKind,
    pub m: usize,
    /// Median wall-clock of the solve alone, operator construction excluded.
    pub median_ms: f64,
}

/// Iteration counts behind a [`TimingRow`]; unlike wall-clock these are
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingIterRow {
    pub ensemble: EnsembleKind,
    pub m: usize,
    pub median_iters: f64,
    /// Trials that reached the target before the iteration cap.
    pub successes: usize,
}

/// Cost model for time-to-target as a function of `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingModel {
    /// `alpha * m / ln(m / (beta m0))`: per-iteration cost grows with `m`.
    Dense,
    /// `alpha / ln(m / (beta m0))`: per-iteration cost independent of `m`.
    Fast,
}

impl TimingModel {
    pub fn for_ensemble(e: EnsembleKind) -> Self {
        match e {
            EnsembleKind::SorsHadamard | EnsembleKind::SorsDct => TimingModel::Fast,
            _ => TimingModel::Dense,
        }
    }

    fn shape(self, m: f64, beta_m0: f64) -> f64 {
        let g = 1.0 / (m / beta_m0).ln();
        match self {
            TimingModel::Dense => m * g,
            TimingModel::Fast => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingFit {
    pub ensemble: EnsembleKind,
    pub alpha: f64,
    pub beta: f64,
    /// Root-mean-square residual of the fit, in milliseconds.
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingStudy {
    pub m0: f64,
    pub rows: Vec<TimingRow>,
    pub iterations: Vec<TimingIterRow>,
    pub fits: Vec<TimingFit>,
}

/// Least-squares `(alpha, beta, rms)` for `t(m) = alpha * shape(m, beta m0)`.
/// `alpha` is solved in closed form for each `beta`; `beta` is searched on a
/// log grid over `(0, min m / m0)` and refined by golden section.
pub fn fit_timing_model(model: TimingModel, points: &[(f64, f64)], m0: f64) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(invalid("timing fit needs at least two points"));
    }
    if !(m0 > 0.0) {
        return Err(invalid("timing fit needs a positive m0"));
    }
    let m_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let beta_max = m_min / m0 * (1.0 - 1e-9);
    let sse = |ln_beta: f64| -> (f64, f64) {
        let bm0 = ln_beta.exp() * m0;
        let (mut sgg, mut stg) = (0.0, 0.0);
        for &(m, t) in points {
            let g = model.shape(m, bm0);
            sgg += g * g;
            stg += t * g;
        }
        let alpha = stg / sgg;
        let err = points.iter().map(|&(m, t)| (t - alpha * model.shape(m, bm0)).powi(2)).sum();
        (err, alpha)
    };
    let (lo, hi) = (1e-4f64.ln(), beta_max.ln());
    let steps = 2000;
    let grid = |k: usize| lo + (hi - lo) * k as f64 / steps as f64;
    let best = (0..steps)
        .min_by(|&a, &b| sse(grid(a)).0.total_cmp(&sse(grid(b)).0))
        .unwrap_or(0);
    let (mut a, mut b) = (grid(best.saturating_sub(1)), grid((best + 1).min(steps - 1)));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - inv_phi * (b - a);
        let d = a + inv_phi * (b - a);
        if sse(c).0 < sse(d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let ln_beta = 0.5 * (a + b);
    let (err, alpha) = sse(ln_beta);
    Ok((alpha, ln_beta.exp(), (err / points.len() as f64).sqrt()))
}

/// Times each `(ensemble, m)` cell. Runs sequentially so that timings are
/// not distorted by contention; iteration counts are deterministic, wall
/// clock is not.
pub fn run_timing_study(spec: &TimingSpec) -> Result<TimingStudy> {
    if spec.m_grid.is_empty() || spec.ensembles.is_empty() || spec.trials == 0 {
        return Err(invalid("timing study needs m values, ensembles and trials"));
    }
    if spec.s > spec.n {
        return Err(invalid(format!("s = {} exceeds n = {}", spec.s, spec.n)));
    }
    let m0 = geometry::m0_l1(spec.n, spec.s, 0.0)?;
    let cfg = SolverConfig {
        step: spec.regime,
        max_iters: spec.max_iters,
        success_tol: spec.target_tol,
        m0: Some(m0),
        ..SolverConfig::default()
    };
    let mut rows = Vec::new();
    let mut iterations = Vec::new();
    for &ensemble in &spec.ensembles {
        for &m in &spec.m_grid {
            if !ensemble.supports(m, spec.n) {
                return Err(invalid(format!("{} cannot take m = {m}", ensemble.name())));
            }
            let mut times = Vec::with_capacity(spec.trials);
            let mut iters = Vec::with_capacity(spec.trials);
            let mut successes = 0;
            for t in 0..spec.trials {
                let seeds = TrialSeeds::new(spec.seed, &[spec.s as u64, m as u64, t as u64]);
                let x = draw_sparse_signal(spec.n, spec.s, seeds.signal);
                let op = ensemble.build(m, spec.n, seeds.operator)?;
                let y = op.apply(&x)?;
                if t == 0 {
                    // untimed warm-up so the first cell does not pay for cold caches
                    pgd_solve_penalty(op.as_ref(), &y, Penalty::L1, &cfg, Some(&x))?;
                }
                let start = Instant::now();
                let (_, trace) = pgd_solve_penalty(op.as_ref(), &y, Penalty::L1, &cfg, Some(&x))?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
                iters.push(trace.iterations_run() as f64);
                successes += usize::from(trace.converged());
            }
            rows.push(TimingRow { ensemble, m, median_ms: median(&mut times) });
            iterations.push(TimingIterRow { ensemble, m, median_iters: median(&mut iters), successes });
        }
    }
    let mut fits = Vec::new();
    for &ensemble in &spec.ensembles {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.ensemble == ensemble)
            .map(|r| (r.m as f64, r.median_ms))
            .collect();
        if let Ok((alpha, beta, rms_residual)) =
            fit_timing_model(TimingModel::for_ensemble(ensemble), &pts, m0)
        {
            fits.push(TimingFit { ensemble, alpha, beta, rms_residual });
        }
    }
    Ok(TimingStudy { m0, rows, iterations, fits })
}
