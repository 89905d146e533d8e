use rand::Rng;
use rand_distr::StandardNormal;

use super::MeasurementOperator;
use crate::error::{check_len, invalid, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    /// i.i.d. standard normal entries.
    Gaussian,
    /// i.i.d. equiprobable ±1 entries.
    Rademacher,
    /// User-supplied entries.
    Explicit,
}

/// Row-major dense `m x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
    ensemble: Ensemble,
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(invalid(format!("operator dimensions must be positive, got {m}x{n}")));
    }
    Ok(())
}

impl<T: Scalar> DenseOperator<T> {
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = seed::rng(seed);
        let entries = (0..m * n)
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Ok(Self { rows: m, cols: n, entries, ensemble: Ensemble::Gaussian })
    }

    pub fn rademacher(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = seed::rng(seed);
        let entries = (0..m * n)
            .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
            .collect();
        Ok(Self { rows: m, cols: n, entries, ensemble: Ensemble::Rademacher })
    }

    /// Wraps explicit row-major entries.
    pub fn from_row_major(m: usize, n: usize, entries: Vec<T>) -> Result<Self> {
        check_dims(m, n)?;
        check_len(m * n, entries.len())?;
        Ok(Self { rows: m, cols: n, entries, ensemble: Ensemble::Explicit })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dims(n, n)?;
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = T::one();
        }
        Ok(Self { rows: n, cols: n, entries, ensemble: Ensemble::Explicit })
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Returns a copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            entries: self.entries.iter().map(|&a| a * c).collect(),
            ensemble: Ensemble::Explicit,
            ..*self
        }
    }
}

impl<T: Scalar> MeasurementOperator<T> for DenseOperator<T> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_unchecked(&self, v: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.cols)) {
            *o = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
        }
    }

    fn apply_adjoint_unchecked(&self, u: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (&ui, row) in u.iter().zip(self.entries.chunks_exact(self.cols)) {
            if ui == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(row) {
                *o = *o + a * ui;
            }
        }
    }

    fn gram_scale(&self) -> T {
        match self.ensemble {
            Ensemble::Gaussian | Ensemble::Rademacher => T::lit(self.rows as f64),
            // Average squared column norm.
            Ensemble::Explicit => {
                let fro: T = self.entries.iter().map(|&a| a * a).sum();
                fro / T::lit(self.cols as f64)
            }
        }
    }
}
