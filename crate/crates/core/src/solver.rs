//! Projected gradient descent `z <- P_K(z + mu A*(y - A z))` from `z_0 = 0`,
//! its proximal variant, step-size rules and per-iteration tracing.

use std::time::Instant;

use crate::constraints::{ConstraintSet, Denoiser, Penalty};
use crate::error::{check_len, invalid, Result};
use crate::geometry;
use crate::operators::MeasurementOperator;
use crate::scalar::{dist2, norm2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRegime<T> {
    /// `mu = 1 / b_m^2`.
    Greedy,
    /// `mu = 0.99 / (sqrt m + sqrt n)^2`.
    Conservative,
    /// The `m0`-aware step; needs `m > 4 m0`.
    Structured,
    Fixed(T),
}

impl<T: Scalar> std::str::FromStr for StepRegime<T> {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(StepRegime::Greedy),
            "conservative" => Ok(StepRegime::Conservative),
            "structured" => Ok(StepRegime::Structured),
            other => match other.strip_prefix("fixed:") {
                Some(mu) => mu
                    .parse::<f64>()
                    .map(|mu| StepRegime::Fixed(T::lit(mu)))
                    .map_err(|_| invalid(format!("bad fixed step `{mu}`"))),
                None => Err(invalid(format!("unknown step regime `{other}`"))),
            },
        }
    }
}

impl<T: Scalar> std::fmt::Display for StepRegime<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepRegime::Greedy => write!(f, "greedy"),
            StepRegime::Conservative => write!(f, "conservative"),
            StepRegime::Structured => write!(f, "structured"),
            StepRegime::Fixed(mu) => write!(f, "fixed:{mu}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub step: StepRegime<T>,
    pub max_iters: usize,
    /// Relative error below which a run with known truth counts as recovered.
    pub success_tol: T,
    /// Stop when `||z_{t+1} - z_t|| < stall_tol * max(1, ||z_t||)`.
    pub stall_tol: T,
    /// Replaces the default radius `R = f(truth)`.
    pub radius_override: Option<T>,
    /// Slack added to the width when the structured step computes `m0`.
    pub eta: f64,
    /// Phase-transition estimate for the structured step. When absent it is
    /// computed from the support size of the supplied truth.
    pub m0: Option<f64>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            step: StepRegime::Greedy,
            max_iters: 500,
            success_tol: T::lit(1e-3),
            stall_tol: T::lit(1e-12),
            radius_override: None,
            eta: 0.0,
            m0: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_step(step: StepRegime<T>) -> Self {
        Self { step, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.success_tol > T::zero()) || !(self.stall_tol > T::zero()) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Step size for measurement count `m`, dimension `n` and phase transition
/// `m0`, stated for unnormalized Gaussian rows.
pub fn step_size<T: Scalar>(regime: StepRegime<T>, m: usize, n: usize, m0: f64) -> Result<T> {
    let (mf, nf) = (m as f64, n as f64);
    let mu = match regime {
        StepRegime::Greedy => 1.0 / geometry::b_m(mf)?.powi(2),
        StepRegime::Conservative => 0.99 / (mf.sqrt() + nf.sqrt()).powi(2),
        StepRegime::Structured => geometry::mu_structured(mf, m0, geometry::b_m(mf)?)?,
        StepRegime::Fixed(mu) => return Ok(mu),
    };
    Ok(T::lit(mu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub iter: usize,
    pub rel_err: Option<T>,
    /// `||y - A z||^2` at this iterate.
    pub objective: T,
    /// Nanoseconds since the solve started.
    pub elapsed_ns: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Relative error fell below `success_tol`.
    Converged,
    Stalled,
    MaxIters,
    /// A non-finite iterate appeared; the trace stops before it.
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub records: Vec<TraceRecord<T>>,
    pub status: SolveStatus,
    pub mu: T,
    /// `m0` used by the structured step, if any.
    pub m0: Option<f64>,
}

impl<T: Scalar> Trace<T> {
    pub fn iterations_run(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn final_rel_err(&self) -> Option<T> {
        self.records.last().and_then(|r| r.rel_err)
    }

    /// CSV with columns `iter,rel_err,objective,elapsed_ns`; a missing
    /// relative error is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,rel_err,objective,elapsed_ns\n");
        for r in &self.records {
            let rel = r.rel_err.map(|e| e.to_f64_lossy().to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iter,
                rel,
                r.objective.to_f64_lossy(),
                r.elapsed_ns
            ));
        }
        out
    }
}

/// Geometric-fit contraction factor: `exp` of the least-squares slope of
/// `ln rel_err` against the iteration index, over records with
/// `lo <= iter <= hi`.
pub fn measure_rate<T: Scalar>(trace: &Trace<T>, window: (usize, usize)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.iter >= window.0 && r.iter <= window.1)
        .map(|r| {
            r.rel_err
                .map(|e| (r.iter as f64, e.to_f64_lossy()))
                .ok_or_else(|| invalid("measure_rate needs relative errors in the trace"))
        })
        .collect::<Result<_>>()?;
    fit_rate(&pts)
}

/// `exp(slope)` of the least-squares line through `(x, ln y)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(invalid("rate fit needs at least two points"));
    }
    if points.iter().any(|&(_, y)| !(y > 0.0)) {
        return Err(invalid("rate fit needs positive errors"));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs distinct iterations"));
    }
    Ok((sxy / sxx).exp())
}

fn resolve_m0<T: Scalar>(cfg: &SolverConfig<T>, truth: Option<&[T]>, n: usize) -> Result<Option<f64>> {
    if !matches!(cfg.step, StepRegime::Structured) {
        return Ok(cfg.m0);
    }
    if let Some(m0) = cfg.m0 {
        return Ok(Some(m0));
    }
    let truth = truth.ok_or_else(|| invalid("structured step needs m0 or a ground truth"))?;
    let s = truth.iter().filter(|v| **v != T::zero()).count();
    Ok(Some(geometry::m0_l1(n, s, cfg.eta)?))
}

/// Regime step rescaled by `m / c`, where `E[A* A] = c I`, so that every
/// ensemble sees the step its rule was stated for.
fn effective_step<T: Scalar, O: MeasurementOperator<T> + ?Sized>(
    op: &O,
    cfg: &SolverConfig<T>,
    m0: Option<f64>,
) -> Result<T> {
    let (m, n) = (op.rows(), op.cols());
    let mu = step_size(cfg.step, m, n, m0.unwrap_or(f64::NAN))?;
    if matches!(cfg.step, StepRegime::Fixed(_)) {
        return Ok(mu);
    }
    let c = op.gram_scale();
    if !(c > T::zero()) {
        return Err(invalid("operator has a degenerate gram scale"));
    }
    Ok(mu * T::lit(m as f64) / c)
}

/// Runs PGD onto `set`. When `truth` is given the trace carries relative
/// errors and the run stops once they fall below `cfg.success_tol`.
pub fn pgd_solve<T, O>(
    op: &O,
    y: &[T],
    set: &ConstraintSet<T>,
    cfg: &SolverConfig<T>,
    truth: Option<&[T]>,
) -> Result<(Vec<T>, Trace<T>)>
where
    T: Scalar,
    O: MeasurementOperator<T> + ?Sized,
{
    cfg.validate()?;
    let m0 = resolve_m0(cfg, truth, op.cols())?;
    let mu = effective_step(op, cfg, m0)?;
    iterate(op, y, cfg, truth, mu, m0, |v, _| set.project(v))
}

/// PGD onto the sub-level set of `penalty` at `R = cfg.radius_override` or,
/// failing that, `R = f(truth)`.
pub fn pgd_solve_penalty<T, O>(
    op: &O,
    y: &[T],
    penalty: Penalty,
    cfg: &SolverConfig<T>,
    truth: Option<&[T]>,
) -> Result<(Vec<T>, Trace<T>)>
where
    T: Scalar,
    O: MeasurementOperator<T> + ?Sized,
{
    let radius = match (cfg.radius_override, truth) {
        (Some(r), _) => r,
        (None, Some(x)) => penalty.evaluate(x),
        (None, None) => {
            if penalty == Penalty::Trivial {
                T::zero()
            } else {
                return Err(invalid("radius needs either an override or a ground truth"));
            }
        }
    };
    let set = penalty.ball(radius)?;
    pgd_solve(op, y, &set, cfg, truth)
}

/// Proximal variant: the projection is replaced by `denoiser` at
/// `lambda_t = lambda0 * gamma^t`.
pub fn proximal_solve<T, O, D>(
    op: &O,
    y: &[T],
    denoiser: &D,
    lambda0: T,
    gamma: T,
    cfg: &SolverConfig<T>,
    truth: Option<&[T]>,
) -> Result<(Vec<T>, Trace<T>)>
where
    T: Scalar,
    O: MeasurementOperator<T> + ?Sized,
    D: Denoiser<T> + ?Sized,
{
    cfg.validate()?;
    if !(gamma > T::zero() && gamma < T::one()) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(lambda0 >= T::zero()) {
        return Err(invalid("lambda0 must be nonnegative"));
    }
    let m0 = resolve_m0(cfg, truth, op.cols())?;
    let mu = effective_step(op, cfg, m0)?;
    iterate(op, y, cfg, truth, mu, m0, |v, t| {
        denoiser.denoise(v, lambda0 * gamma.powi(t as i32))
    })
}

fn iterate<T, O>(
    op: &O,
    y: &[T],
    cfg: &SolverConfig<T>,
    truth: Option<&[T]>,
    mu: T,
    m0: Option<f64>,
    mut step: impl FnMut(&[T], usize) -> Vec<T>,
) -> Result<(Vec<T>, Trace<T>)>
where
    T: Scalar,
    O: MeasurementOperator<T> + ?Sized,
{
    let (m, n) = (op.rows(), op.cols());
    check_len(m, y.len())?;
    if let Some(x) = truth {
        check_len(n, x.len())?;
    }
    let truth_norm = truth.map(norm2);
    let rel_err = |z: &[T]| -> Option<T> {
        let x = truth?;
        let d = dist2(z, x);
        let scale = truth_norm.unwrap_or_else(T::one);
        Some(if scale > T::zero() { d / scale } else { d })
    };

    let start = Instant::now();
    let mut z = vec![T::zero(); n];
    let mut az = vec![T::zero(); m];
    let mut residual = y.to_vec();
    let mut grad = vec![T::zero(); n];
    let mut records = Vec::with_capacity(cfg.max_iters.min(1 << 16));
    let mut status = SolveStatus::MaxIters;

    for t in 0..cfg.max_iters {
        op.apply_adjoint_unchecked(&residual, &mut grad);
        let v: Vec<T> = z.iter().zip(&grad).map(|(&zi, &gi)| zi + mu * gi).collect();
        let next = step(&v, t);
        op.apply_unchecked(&next, &mut az);
        for ((r, &yi), &ai) in residual.iter_mut().zip(y).zip(&az) {
            *r = yi - ai;
        }
        let objective: T = residual.iter().map(|&r| r * r).sum();
        if !objective.is_finite() || next.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::Diverged;
            break;
        }
        let moved = dist2(&next, &z);
        let prev_norm = norm2(&z);
        z = next;
        let err = rel_err(&z);
        records.push(TraceRecord {
            iter: t + 1,
            rel_err: err,
            objective,
            elapsed_ns: start.elapsed().as_nanos(),
        });
        if err.is_some_and(|e| e < cfg.success_tol) {
            status = SolveStatus::Converged;
            break;
        }
        if moved < cfg.stall_tol * prev_norm.max(T::one()) {
            status = SolveStatus::Stalled;
            break;
        }
    }
    Ok((z, Trace { records, status, mu, m0 }))
}
