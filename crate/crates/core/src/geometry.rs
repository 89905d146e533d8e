//! Closed-form theory: the phase-transition function, Gaussian-width and
//! statistical-dimension estimates for descent cones, and the rate, step-size
//! and error-bound formulas that go with them.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::seed;

/// `(7 + 3 sqrt 5) / 2`, the sample-complexity constant of the sharp convex
/// greedy-step bound.
pub const SHARP_CONVEX_CONSTANT: f64 = 6.854_101_966_249_685;

/// Above this argument `phi` uses its asymptotic series; the truncation error
/// there is below 1e-16 relative.
const PHI_SERIES_CUTOFF: f64 = 300.0;

/// `phi(t) = sqrt(2) Gamma((t+1)/2) / Gamma(t/2)`, the mean norm of a
/// `t`-dimensional standard Gaussian.
pub fn phi(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("phi needs t > 0, got {t}")));
    }
    if t >= PHI_SERIES_CUTOFF {
        let u = 1.0 / t;
        let series = 1.0 - u / 4.0 + u * u / 32.0 + 5.0 * u.powi(3) / 128.0
            - 21.0 * u.powi(4) / 2048.0
            - 399.0 * u.powi(5) / 8192.0;
        return Ok(t.sqrt() * series);
    }
    Ok(std::f64::consts::SQRT_2 * (ln_gamma((t + 1.0) / 2.0) - ln_gamma(t / 2.0)).exp())
}

/// `b_m = phi(m)`.
pub fn b_m(m: f64) -> Result<f64> {
    phi(m)
}

/// Inverse of `phi` on `(0, inf)`, by bracketing then bisection.
pub fn phi_inv(y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(invalid(format!("phi_inv needs y > 0, got {y}")));
    }
    // phi(y^2 / 2) < y < phi(y^2 + 2) covers most inputs; widen if not.
    let mut lo = 0.5 * y * y;
    let mut hi = y * y + 2.0;
    while phi(lo)? > y {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(invalid(format!("phi_inv: {y} below representable range")));
        }
    }
    while phi(hi)? < y {
        hi *= 2.0;
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if phi(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Phase-transition function `m0 = phi^{-1}(omega + eta)`.
pub fn m0(omega: f64, eta: f64) -> Result<f64> {
    phi_inv(omega + eta)
}

/// `eta` for which the greedy-step guarantee fails with probability at most
/// `p_fail` (`9 exp(-eta^2/8)` up to the constant 9).
pub fn eta_for_failure_probability(p_fail: f64) -> Result<f64> {
    if !(p_fail > 0.0 && p_fail < 1.0) {
        return Err(invalid(format!("failure probability must lie in (0,1), got {p_fail}")));
    }
    Ok((8.0 * (1.0 / p_fail).ln()).sqrt())
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_sf(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// `E[(|g| - t)_+^2]` for standard normal `g`.
fn tail_second_moment(t: f64) -> f64 {
    2.0 * ((1.0 + t * t) * std_normal_sf(t) - t * std_normal_pdf(t))
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Statistical dimension of the `l1` descent cone at an `s`-sparse point in
/// `R^n`, used as the `omega^2` surrogate.
///
/// For `s < n` this is `min_t s(1+t^2) + (n-s) E(|g|-t)_+^2`. At `s = n` the
/// cone is a halfspace and the exact value `n - 1/2` is returned.
pub fn width_sq_l1(n: usize, s: usize) -> Result<f64> {
    if s > n || n == 0 {
        return Err(invalid(format!("width_sq_l1 needs 0 <= s <= n, n >= 1; got n={n}, s={s}")));
    }
    if s == 0 {
        log::warn!("width_sq_l1: s = 0 gives the trivial cone {{0}}");
        return Ok(0.0);
    }
    if s == n {
        return Ok(n as f64 - 0.5);
    }
    let (nf, sf) = (n as f64, s as f64);
    let objective = |t: f64| sf * (1.0 + t * t) + (nf - sf) * tail_second_moment(t);
    let upper = (2.0 * (nf / sf).ln()).sqrt() + 6.0;
    Ok(golden_section_min(objective, 0.0, upper, 1e-8).1)
}

/// `m0` for an `s`-sparse signal under the `l1` penalty.
pub fn m0_l1(n: usize, s: usize, eta: f64) -> Result<f64> {
    let delta = width_sq_l1(n, s)?;
    if delta == 0.0 && eta == 0.0 {
        return Ok(0.0);
    }
    m0(delta.sqrt(), eta)
}

/// A descent cone with a closed-form projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeDescriptor {
    /// Descent cone of `||.||_1` at a point with the given support and signs.
    L1Descent { n: usize, support: Vec<usize>, signs: Vec<f64> },
    /// `{h : h_0 <= 0}`.
    Halfspace { n: usize },
    /// Span of the first `dim` coordinates.
    Subspace { n: usize, dim: usize },
}

impl ConeDescriptor {
    pub fn l1_descent(n: usize, support: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        if support.len() != signs.len() || support.len() > n {
            return Err(invalid("support and sign pattern must have equal length <= n"));
        }
        if support.iter().any(|&i| i >= n) {
            return Err(invalid("support index out of range"));
        }
        let mut seen = support.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != support.len() {
            return Err(invalid("support indices must be distinct"));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(invalid("signs must be +1 or -1"));
        }
        Ok(ConeDescriptor::L1Descent { n, support, signs })
    }

    /// Descent cone of `||.||_1` at `x`.
    pub fn l1_at(x: &[f64]) -> Self {
        let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
        let signs = support.iter().map(|&i| x[i].signum()).collect();
        ConeDescriptor::L1Descent { n: x.len(), support, signs }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ConeDescriptor::L1Descent { n, .. }
            | ConeDescriptor::Halfspace { n }
            | ConeDescriptor::Subspace { n, .. } => *n,
        }
    }

    /// `||P_C(g)||^2`, the squared distance from `g` to the polar cone.
    pub fn projection_norm_sq(&self, g: &[f64]) -> f64 {
        match self {
            ConeDescriptor::Subspace { dim, .. } => g[..*dim].iter().map(|v| v * v).sum(),
            ConeDescriptor::Halfspace { .. } => {
                g.iter().map(|v| v * v).sum::<f64>() - g[0].max(0.0).powi(2)
            }
            ConeDescriptor::L1Descent { n, support, signs } => {
                l1_polar_dist_sq(*n, support, signs, g)
            }
        }
    }

    /// Exact statistical dimension where known in closed form.
    pub fn statistical_dimension(&self) -> Result<f64> {
        match self {
            ConeDescriptor::Subspace { dim, .. } => Ok(*dim as f64),
            ConeDescriptor::Halfspace { n } => Ok(*n as f64 - 0.5),
            ConeDescriptor::L1Descent { n, support, .. } => width_sq_l1(*n, support.len()),
        }
    }
}

/// `min_{t >= 0} dist^2(g, t * subdiff ||x||_1)`, solved exactly: the
/// objective is convex piecewise quadratic in `t` with breakpoints at the
/// off-support magnitudes.
fn l1_polar_dist_sq(n: usize, support: &[usize], signs: &[f64], g: &[f64]) -> f64 {
    let s = support.len();
    if s == 0 {
        return 0.0;
    }
    let mut on = vec![false; n];
    for &i in support {
        on[i] = true;
    }
    let corr: f64 = support.iter().zip(signs).map(|(&i, &sg)| sg * g[i]).sum();
    let mut off: Vec<f64> = (0..n).filter(|&i| !on[i]).map(|i| g[i].abs()).collect();
    off.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut acc = corr;
    let mut t = 0.0;
    for k in 0..=off.len() {
        let cand = acc / (s + k) as f64;
        let next = off.get(k).copied().unwrap_or(0.0);
        if cand >= next {
            t = cand.max(0.0);
            break;
        }
        acc += off[k];
    }
    let on_part: f64 = support
        .iter()
        .zip(signs)
        .map(|(&i, &sg)| (g[i] - t * sg).powi(2))
        .sum();
    let off_part: f64 = off.iter().map(|&a| (a - t).max(0.0).powi(2)).sum();
    on_part + off_part
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthEstimate {
    /// Monte Carlo mean of `||P_C(g)||`, an estimate of `omega(C ∩ B^n)`.
    pub mean: f64,
    pub stderr: f64,
    /// Monte Carlo mean of `||P_C(g)||^2`, an estimate of the statistical dimension.
    pub mean_sq: f64,
}

/// Monte Carlo Gaussian width of `C ∩ B^n` via `E ||P_C(g)||`.
pub fn width_mc(cone: &ConeDescriptor, samples: usize, seed_: u64) -> Result<WidthEstimate> {
    if samples == 0 {
        return Err(invalid("width_mc needs at least one sample"));
    }
    let n = cone.ambient_dim();
    let mut rng = seed::rng(seed_);
    let mut g = vec![0.0; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let d2 = cone.projection_norm_sq(&g).max(0.0);
        sum += d2.sqrt();
        sum_sq += d2;
    }
    let k = samples as f64;
    let mean = sum / k;
    let mean_sq = sum_sq / k;
    let var = if samples > 1 { ((mean_sq - mean * mean) * k / (k - 1.0)).max(0.0) } else { 0.0 };
    Ok(WidthEstimate { mean, stderr: (var / k).sqrt(), mean_sq })
}

/// Draws a unit vector in the cone. For the `l1` descent cone the on-support
/// part is Gaussian (sign-flipped to point inward) and the off-support part is
/// a Gaussian direction rescaled to a uniformly drawn fraction of the
/// available `l1` budget, so `||x + t h||_1 <= ||x||_1` for small `t > 0`.
pub fn sample_descent_direction(cone: &ConeDescriptor, seed_: u64) -> Vec<f64> {
    let n = cone.ambient_dim();
    let mut rng = seed::rng(seed_);
    let mut h: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    match cone {
        ConeDescriptor::Subspace { dim, .. } => h[*dim..].iter_mut().for_each(|v| *v = 0.0),
        ConeDescriptor::Halfspace { .. } => h[0] = -h[0].abs(),
        ConeDescriptor::L1Descent { support, signs, .. } => {
            let mut on = vec![false; n];
            for &i in support {
                on[i] = true;
            }
            let mut inward: f64 = -support.iter().zip(signs).map(|(&i, &s)| s * h[i]).sum::<f64>();
            if inward < 0.0 {
                for &i in support {
                    h[i] = -h[i];
                }
                inward = -inward;
            }
            let off_l1: f64 = (0..n).filter(|&i| !on[i]).map(|i| h[i].abs()).sum();
            let frac: f64 = rng.random();
            let c = if off_l1 > 0.0 { frac * inward / off_l1 } else { 0.0 };
            for (i, v) in h.iter_mut().enumerate() {
                if !on[i] {
                    *v *= c;
                }
            }
        }
    }
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        h.iter_mut().for_each(|v| *v /= norm);
    }
    h
}

fn check_kappa(kappa: u32) -> Result<f64> {
    match kappa {
        1 | 2 => Ok(kappa as f64),
        k => Err(invalid(format!("kappa must be 1 or 2, got {k}"))),
    }
}

/// Greedy-step rate bound `sqrt(8 kappa^2 m0 / m)`.
pub fn rho_greedy(m: f64, m0: f64, kappa: u32) -> Result<f64> {
    let k = check_kappa(kappa)?;
    Ok((8.0 * k * k * m0 / m).sqrt())
}

/// Sharper greedy-step rate bound for convex penalties.
pub fn rho_greedy_convex_sharp(m: f64, m0: f64) -> f64 {
    (SHARP_CONVEX_CONSTANT * m0 / m).sqrt()
}

/// Conservative-step rate bound `1 - 0.3 (sqrt m - sqrt m0)^2 / (m + n)`,
/// clamped to `[0, 1]`.
pub fn rho_conservative(m: f64, n: f64, m0: f64) -> f64 {
    if m <= m0 {
        return 1.0;
    }
    (1.0 - 0.3 / (m + n) * (m.sqrt() - m0.sqrt()).powi(2)).clamp(0.0, 1.0)
}

/// Contraction gain of the structured step: the rate bound is `1 - psi(m0/m)`.
pub fn psi(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("psi needs gamma in [0, 1], got {gamma}")));
    }
    let r = gamma.sqrt();
    let num = std::f64::consts::SQRT_2 * (1.0 - r).powf(1.5) - r;
    let den = gamma - 2.0 * r + 2.0;
    Ok(2.0 * num * num / (den * den))
}

/// Structure-dependent step size; requires `m > 4 m0`.
pub fn mu_structured(m: f64, m0: f64, b_m: f64) -> Result<f64> {
    if !(m > 4.0 * m0) {
        return Err(Error::OutOfRegime(format!(
            "structured step needs m > 4 m0 (m = {m}, m0 = {m0})"
        )));
    }
    let s = (m0 / m).sqrt();
    let scaled = (2.0 - std::f64::consts::SQRT_2 * s * (1.0 - s).powf(-1.5)) / (s * s - 2.0 * s + 2.0);
    Ok(scaled / (b_m * b_m))
}

/// Per-step lower bound `(1 - eps) max(1 - mu (sqrt m + sqrt m0)^2, 0)`.
pub fn rate_lower_bound(mu: f64, m: f64, m0: f64, eps: f64) -> f64 {
    (1.0 - eps) * (1.0 - mu * (m.sqrt() + m0.sqrt()).powi(2)).max(0.0)
}

/// Upper bound `mu sqrt(m0)` on the noise amplification factor.
pub fn xi_bound(mu: f64, m0: f64) -> f64 {
    mu * m0.sqrt()
}

/// Limiting error per the greedy-step bound:
/// `sqrt(pi/2) kappa / (1 - kappa rho) * sqrt(m0) / m * ||w||`, where `rho`
/// is the kappa-free rate `sqrt(8 m0 / m)`.
pub fn residual_bound(kappa: u32, rho: f64, m: f64, m0: f64, w_norm: f64) -> Result<f64> {
    let k = check_kappa(kappa)?;
    if k * rho >= 1.0 {
        return Err(Error::OutOfRegime(format!("kappa * rho = {} >= 1", k * rho)));
    }
    Ok((std::f64::consts::PI / 2.0).sqrt() * k / (1.0 - k * rho) * m0.sqrt() / m * w_norm)
}

/// Which side of `f(x)` the radius `R` was set on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mismatch {
    /// `R < f(x)`; carries `||x - P_K(x)||`.
    Under { dist_to_set: f64 },
    /// `R > f(x)`; carries `R/f(x) - 1` and `||x||`.
    Over { excess_ratio: f64, x_norm: f64 },
}

/// Limiting error caused by mistuning `R`, for a rate `rho < 1`.
pub fn mismatch_bound(kappa: u32, rho: f64, mismatch: Mismatch) -> Result<f64> {
    let k = check_kappa(kappa)?;
    if rho >= 1.0 {
        return Err(Error::OutOfRegime(format!("rho = {rho} >= 1")));
    }
    Ok(match mismatch {
        Mismatch::Under { dist_to_set } => (3.0 - k) / (1.0 - rho) * dist_to_set,
        Mismatch::Over { excess_ratio, x_norm } => {
            (k + 1.0 + 2.0 * rho) / (1.0 - rho) * excess_ratio * x_norm
        }
    })
}

/// Theory bundle for one problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    pub m0: f64,
    pub omega: f64,
    pub rho_bound: f64,
    pub mu: f64,
    pub kappa: u32,
    pub xi_bound: f64,
    /// Limiting error per unit noise norm; infinite outside the regime.
    pub residual_bound: f64,
    pub eta: f64,
}

impl RatePrediction {
    /// Greedy-step prediction for an `s`-sparse signal in `R^n` from `m`
    /// measurements, with `omega^2` taken from [`width_sq_l1`].
    pub fn greedy_l1(n: usize, s: usize, m: usize, kappa: u32, eta: f64) -> Result<Self> {
        let omega = width_sq_l1(n, s)?.sqrt();
        let m0 = m0(omega, eta)?;
        let mf = m as f64;
        let mu = 1.0 / phi(mf)?.powi(2);
        let rho_bound = rho_greedy(mf, m0, kappa)?;
        let residual_bound = residual_bound(kappa, rho_bound / kappa as f64, mf, m0, 1.0)
            .unwrap_or(f64::INFINITY);
        Ok(Self { m0, omega, rho_bound, mu, kappa, xi_bound: xi_bound(mu, m0), residual_bound, eta })
    }
}
