use rayon::prelude::*;

use super::{draw_gaussian, draw_sparse_signal, with_workers, TrialSeeds};
use crate::constraints::{project_l1, Penalty};
use crate::error::{invalid, Result};
use crate::geometry;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseSpec {
    pub n: usize,
    pub s: usize,
    pub sigmas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl DenoiseSpec {
    pub fn new(n: usize, s: usize, sigmas: Vec<f64>) -> Self {
        Self { n, s, sigmas, samples: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseRow {
    pub sigma: f64,
    /// Monte Carlo mean of `||P_K(x + w) - x||^2 / sigma^2`.
    pub ratio_estimate: f64,
    pub stderr: f64,
    /// `4 delta(n, s)`.
    pub bound: f64,
}

/// Denoises `x + w`, `w ~ N(0, sigma^2 I)`, by projecting onto the ℓ1 ball
/// of radius `||x||_1`. One signal is drawn per study; the noise is redrawn
/// per sample.
pub fn run_denoising_check(spec: &DenoiseSpec, workers: usize) -> Result<Vec<DenoiseRow>> {
    if spec.samples < 2 || spec.sigmas.is_empty() {
        return Err(invalid("denoising check needs sigmas and at least two samples"));
    }
    if spec.sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("noise levels must be positive"));
    }
    if spec.s == 0 || spec.s > spec.n {
        return Err(invalid(format!("need 0 < s <= n, got s = {}, n = {}", spec.s, spec.n)));
    }
    let bound = 4.0 * geometry::width_sq_l1(spec.n, spec.s)?;
    let x = draw_sparse_signal(spec.n, spec.s, seed::derive(spec.seed, &[spec.s as u64]));
    let radius = Penalty::L1.evaluate(&x);

    let mut rows = Vec::with_capacity(spec.sigmas.len());
    for (k, &sigma) in spec.sigmas.iter().enumerate() {
        let ratios: Vec<f64> = with_workers(workers, || {
            (0..spec.samples)
                .into_par_iter()
                .map(|i| {
                    let seeds = TrialSeeds::new(spec.seed, &[spec.s as u64, k as u64, i as u64]);
                    let w = draw_gaussian(spec.n, sigma, seeds.noise);
                    let noisy: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + b).collect();
                    let p = project_l1(&noisy, radius);
                    let err: f64 = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                    err / (sigma * sigma)
                })
                .collect()
        })?;
        let count = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / count;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (count - 1.0);
        rows.push(DenoiseRow { sigma, ratio_estimate: mean, stderr: (var / count).sqrt(), bound });
    }
    Ok(rows)
}
