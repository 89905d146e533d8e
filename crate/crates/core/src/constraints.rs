//! Euclidean projections onto sub-level sets `K = {z : f(z) <= R}` and the
//! denoisers used by the proximal variant of the solver.

use std::cmp::Ordering;

use crate::error::{invalid, Result};
use crate::scalar::{dist2, Scalar};

/// Structure-promoting penalty `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Penalty {
    /// `||z||_1`
    L1,
    /// Number of nonzeros.
    L0,
    /// `sum_i |z_i|^{1/2}`
    LHalf,
    /// `f = 0`, so `K` is the whole space.
    Trivial,
}

impl Penalty {
    pub fn evaluate<T: Scalar>(self, z: &[T]) -> T {
        match self {
            Penalty::L1 => z.iter().map(|v| v.abs()).sum(),
            Penalty::L0 => T::lit(z.iter().filter(|v| **v != T::zero()).count() as f64),
            Penalty::LHalf => z.iter().map(|v| v.abs().sqrt()).sum(),
            Penalty::Trivial => T::zero(),
        }
    }

    /// 1 for convex penalties, 2 otherwise.
    pub fn kappa(self) -> u32 {
        match self {
            Penalty::L1 | Penalty::Trivial => 1,
            Penalty::L0 | Penalty::LHalf => 2,
        }
    }

    pub fn is_convex(self) -> bool {
        self.kappa() == 1
    }

    /// The sub-level set `{z : f(z) <= radius}`. For `L0` the radius is
    /// rounded to the nearest sparsity level.
    pub fn ball<T: Scalar>(self, radius: T) -> Result<ConstraintSet<T>> {
        if !(radius >= T::zero()) {
            return Err(invalid(format!("radius must be nonnegative, got {radius}")));
        }
        Ok(match self {
            Penalty::L1 => ConstraintSet::L1Ball { radius },
            Penalty::L0 => ConstraintSet::L0Ball {
                sparsity: radius.round().to_usize().unwrap_or(usize::MAX),
            },
            Penalty::LHalf => ConstraintSet::LHalfBall { radius },
            Penalty::Trivial => ConstraintSet::Trivial,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Penalty::L1 => "l1",
            Penalty::L0 => "l0",
            Penalty::LHalf => "lhalf",
            Penalty::Trivial => "trivial",
        }
    }
}

impl std::str::FromStr for Penalty {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Penalty::L1),
            "l0" => Ok(Penalty::L0),
            "lhalf" | "l1/2" => Ok(Penalty::LHalf),
            "trivial" | "none" => Ok(Penalty::Trivial),
            other => Err(invalid(format!("unknown penalty `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintSet<T> {
    L1Ball { radius: T },
    L0Ball { sparsity: usize },
    LHalfBall { radius: T },
    Trivial,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn penalty(&self) -> Penalty {
        match self {
            ConstraintSet::L1Ball { .. } => Penalty::L1,
            ConstraintSet::L0Ball { .. } => Penalty::L0,
            ConstraintSet::LHalfBall { .. } => Penalty::LHalf,
            ConstraintSet::Trivial => Penalty::Trivial,
        }
    }

    pub fn kappa(&self) -> u32 {
        self.penalty().kappa()
    }

    pub fn radius(&self) -> T {
        match *self {
            ConstraintSet::L1Ball { radius } | ConstraintSet::LHalfBall { radius } => radius,
            ConstraintSet::L0Ball { sparsity } => T::lit(sparsity as f64),
            ConstraintSet::Trivial => T::infinity(),
        }
    }

    /// `f(z) <= R + tol`.
    pub fn contains(&self, z: &[T], tol: T) -> bool {
        match self {
            ConstraintSet::Trivial => true,
            _ => self.penalty().evaluate(z) <= self.radius() + tol,
        }
    }

    pub fn project(&self, v: &[T]) -> Vec<T> {
        match *self {
            ConstraintSet::L1Ball { radius } => project_l1(v, radius),
            ConstraintSet::L0Ball { sparsity } => project_l0(v, sparsity),
            ConstraintSet::LHalfBall { radius } => project_lhalf(v, radius),
            ConstraintSet::Trivial => v.to_vec(),
        }
    }
}

/// Projection onto the `l1` ball of radius `radius` by sorting magnitudes and
/// soft-thresholding at the unique multiplier.
pub fn project_l1<T: Scalar>(v: &[T], radius: T) -> Vec<T> {
    if radius <= T::zero() {
        return vec![T::zero(); v.len()];
    }
    let l1: T = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut mags: Vec<T> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &u) in mags.iter().enumerate() {
        cumsum = cumsum + u;
        let candidate = (cumsum - radius) / T::lit((k + 1) as f64);
        if u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    soft_threshold(v, theta)
}

/// Keeps the `s` largest-magnitude entries. Ties go to the lower index.
pub fn project_l0<T: Scalar>(v: &[T], s: usize) -> Vec<T> {
    if s >= v.len() {
        return v.to_vec();
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| {
        v[j].abs()
            .partial_cmp(&v[i].abs())
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut out = vec![T::zero(); v.len()];
    for &i in &order[..s] {
        out[i] = v[i];
    }
    out
}

/// `sign(v) * max(|v| - lambda, 0)`, written as `v - clamp(v, -lambda, lambda)`
/// so that `lambda = 0` returns `v` bit for bit.
pub fn soft_threshold<T: Scalar>(v: &[T], lambda: T) -> Vec<T> {
    v.iter().map(|&x| x - x.max(-lambda).min(lambda)).collect()
}

/// The larger stationary point of `(x - v)^2 / 2 + lambda |x|^{1/2}`, i.e. the
/// cosine-formula root of the half-thresholding cubic. Defined while
/// `lambda <= 4 (|v|/3)^{3/2}`.
fn half_branch_root<T: Scalar>(v: T, lambda: T) -> T {
    let a = v.abs();
    let three = T::lit(3.0);
    let arg = (lambda / T::lit(4.0) * (a / three).powf(T::lit(-1.5))).min(T::one());
    let phase = arg.acos();
    let two_pi_3 = T::lit(2.0 * std::f64::consts::PI / 3.0);
    T::lit(2.0 / 3.0) * v * (T::one() + (two_pi_3 - T::lit(2.0 / 3.0) * phase).cos())
}

/// Coordinatewise minimizer of `(x - v_i)^2 / 2 + lambda |x|^{1/2}`.
///
/// Below the jump threshold `1.5 lambda^{2/3}` the minimizer is 0; above it
/// the larger cubic root wins.
pub fn prox_half<T: Scalar>(v: &[T], lambda: T) -> Vec<T> {
    if lambda <= T::zero() {
        return v.to_vec();
    }
    let threshold = T::lit(1.5) * lambda.powf(T::lit(2.0 / 3.0));
    v.iter()
        .map(|&x| {
            if x.abs() <= threshold {
                T::zero()
            } else {
                half_branch_root(x, lambda)
            }
        })
        .collect()
}

fn half_norm<T: Scalar>(z: &[T]) -> T {
    z.iter().map(|x| x.abs().sqrt()).sum()
}

/// Approximate projection onto `{z : sum |z_i|^{1/2} <= radius}`.
///
/// Bisects the prox multiplier until the half-norm lands just below `R`.
/// The prox path jumps whenever a coordinate crosses its threshold, so when
/// a jump skips `R` the boundary stationary points of every support size
/// skipped by the jump are also tried and the nearest one is returned. The
/// result is always feasible; it is not guaranteed optimal.
pub fn project_lhalf<T: Scalar>(v: &[T], radius: T) -> Vec<T> {
    if half_norm(v) <= radius {
        return v.to_vec();
    }
    if radius <= T::zero() {
        return vec![T::zero(); v.len()];
    }
    let eps = T::epsilon() * T::lit(1e4) * radius.max(T::one());
    let max_abs = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let mut lo = T::zero();
    let mut hi = T::lit(2.0) * max_abs.powf(T::lit(1.5));
    assert!(half_norm(&prox_half(v, hi)) == T::zero(), "prox multiplier bracket failed");

    let mut best = prox_half(v, hi);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let z = prox_half(v, mid);
        let g = half_norm(&z);
        if g > radius {
            lo = mid;
        } else {
            hi = mid;
            best = z;
            if g >= radius - eps {
                return best;
            }
        }
    }

    // A jump skipped the target: try fixed-support continuations.
    let nnz = |z: &[T]| z.iter().filter(|x| **x != T::zero()).count();
    let k_hi = nnz(&best);
    let k_lo = nnz(&prox_half(v, lo)).max(k_hi);
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| {
        v[j].abs()
            .partial_cmp(&v[i].abs())
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut best_dist = dist2(v, &best);
    for k in k_hi.max(1)..=k_lo {
        for z in support_candidates(v, &order[..k], radius) {
            let d = dist2(v, &z);
            if d < best_dist {
                best_dist = d;
                best = z;
            }
        }
    }
    best
}

/// Positive roots `(larger, smaller)` of `u^3 - a u + q = 0`, which exist
/// while `q <= 2 (a/3)^{3/2}`.
fn cubic_roots<T: Scalar>(a: T, q: T) -> (T, T) {
    let three = T::lit(3.0);
    let r = (a / three).sqrt();
    let arg = (-q * T::lit(1.5) / (a * r)).max(-T::one()).min(T::one());
    let c = arg.acos() / three;
    let two = T::lit(2.0);
    let shift = T::lit(2.0 * std::f64::consts::PI / 3.0);
    (two * r * c.cos(), (two * r * (c - shift).cos()).max(T::zero()))
}

/// Boundary KKT points on a fixed support, in the variables `u_i = |z_i|^{1/2}`
/// where the problem reads `min sum (u_i^2 - |v_i|)^2` s.t. `sum u_i = R`.
/// Every coordinate shares the multiplier `q`, taking the larger cubic root,
/// except possibly the smallest one, which may sit on the smaller root
/// (needed when the budget is below what the larger branch can reach).
fn support_candidates<T: Scalar>(v: &[T], support: &[usize], radius: T) -> Vec<Vec<T>> {
    let a: Vec<T> = support.iter().map(|&i| v[i].abs()).collect();
    let q_end = a
        .iter()
        .map(|&ai| T::lit(2.0) * (ai / T::lit(3.0)).powf(T::lit(1.5)))
        .fold(T::infinity(), |x, y| x.min(y));
    let last = a.len() - 1;
    let us = |q: T, small_last: bool| -> Vec<T> {
        a.iter()
            .enumerate()
            .map(|(k, &ai)| {
                let (big, small) = cubic_roots(ai, q);
                if small_last && k == last {
                    small
                } else {
                    big
                }
            })
            .collect()
    };
    let excess = |q: T, small_last: bool| -> T { us(q, small_last).into_iter().sum::<T>() - radius };
    let to_z = |u: Vec<T>| -> Vec<T> {
        let mut z = vec![T::zero(); v.len()];
        for (&i, ui) in support.iter().zip(u) {
            z[i] = (ui * ui).copysign(v[i]);
        }
        z
    };

    let steps = 64;
    let mut out = Vec::new();
    for small_last in [false, true] {
        let grid = |k: usize| q_end * T::lit(k as f64 / steps as f64);
        for k in 0..steps {
            let (mut lo, mut hi) = (grid(k), grid(k + 1));
            let (f_lo, f_hi) = (excess(lo, small_last), excess(hi, small_last));
            if (f_lo > T::zero()) == (f_hi > T::zero()) {
                continue;
            }
            let lo_feasible = f_lo <= T::zero();
            for _ in 0..100 {
                let mid = (lo + hi) / T::lit(2.0);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (excess(mid, small_last) <= T::zero()) == lo_feasible {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // Keep the feasible end of the final bracket.
            let q = if lo_feasible { lo } else { hi };
            out.push(to_z(us(q, small_last)));
        }
    }
    out
}

/// Denoiser `S(v; lambda)` plugged into the proximal iteration.
pub trait Denoiser<T: Scalar>: Send + Sync {
    fn denoise(&self, v: &[T], lambda: T) -> Vec<T>;
}

/// Proximal map of `lambda ||.||_1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SoftThreshold;

impl<T: Scalar> Denoiser<T> for SoftThreshold {
    fn denoise(&self, v: &[T], lambda: T) -> Vec<T> {
        soft_threshold(v, lambda)
    }
}

/// Proximal map of `lambda sum |.|^{1/2}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HalfThreshold;

impl<T: Scalar> Denoiser<T> for HalfThreshold {
    fn denoise(&self, v: &[T], lambda: T) -> Vec<T> {
        prox_half(v, lambda)
    }
}
