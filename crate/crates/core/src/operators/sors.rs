use rand::Rng;

use super::transform::{dct_matrix, fwht};
use super::MeasurementOperator;
use crate::error::{check_len, invalid, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Hadamard,
    Dct,
}

/// Subsampled orthogonal transform with random signs: `A = scale * S F D`,
/// where `D` is a random ±1 diagonal, `F` an orthonormal transform and `S`
/// picks `m` rows sampled uniformly with replacement.
///
/// With `scale = 1` every row of `A` has unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SorsOperator<T> {
    n: usize,
    transform: Transform,
    signs: Vec<T>,
    row_indices: Vec<usize>,
    scale: T,
    // Row-major DCT-II basis; empty for Hadamard.
    dct: Vec<T>,
}

impl<T: Scalar> SorsOperator<T> {
    pub fn random(transform: Transform, m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(invalid(format!("operator dimensions must be positive, got {m}x{n}")));
        }
        let mut rng = seed::rng(seed);
        let signs = (0..n)
            .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
            .collect();
        let row_indices = (0..m).map(|_| rng.random_range(0..n)).collect();
        Self::from_parts(transform, n, signs, row_indices, T::one())
    }

    pub fn from_parts(
        transform: Transform,
        n: usize,
        signs: Vec<T>,
        row_indices: Vec<usize>,
        scale: T,
    ) -> Result<Self> {
        if transform == Transform::Hadamard && !n.is_power_of_two() {
            return Err(invalid(format!("Hadamard transform needs a power-of-two length, got {n}")));
        }
        if row_indices.is_empty() {
            return Err(invalid("SORS operator needs at least one row"));
        }
        check_len(n, signs.len())?;
        if let Some(&bad) = row_indices.iter().find(|&&r| r >= n) {
            return Err(invalid(format!("row index {bad} out of range for n = {n}")));
        }
        let dct = match transform {
            Transform::Hadamard => Vec::new(),
            Transform::Dct => dct_matrix(n),
        };
        Ok(Self { n, transform, signs, row_indices, scale, dct })
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn signs(&self) -> &[T] {
        &self.signs
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_indices
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    fn forward(&self, buf: &mut [T]) {
        match self.transform {
            Transform::Hadamard => fwht(buf),
            Transform::Dct => {
                let x = buf.to_vec();
                for (k, b) in buf.iter_mut().enumerate() {
                    let row = &self.dct[k * self.n..(k + 1) * self.n];
                    *b = row.iter().zip(&x).map(|(&c, &v)| c * v).sum();
                }
            }
        }
    }

    fn inverse(&self, buf: &mut [T]) {
        match self.transform {
            Transform::Hadamard => fwht(buf),
            Transform::Dct => {
                let x = buf.to_vec();
                buf.iter_mut().for_each(|b| *b = T::zero());
                for (k, &xk) in x.iter().enumerate() {
                    if xk == T::zero() {
                        continue;
                    }
                    let row = &self.dct[k * self.n..(k + 1) * self.n];
                    for (b, &c) in buf.iter_mut().zip(row) {
                        *b = *b + c * xk;
                    }
                }
            }
        }
    }
}

impl<T: Scalar> MeasurementOperator<T> for SorsOperator<T> {
    fn rows(&self) -> usize {
        self.row_indices.len()
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply_unchecked(&self, v: &[T], out: &mut [T]) {
        let mut buf: Vec<T> = v.iter().zip(&self.signs).map(|(&a, &s)| a * s).collect();
        self.forward(&mut buf);
        for (o, &r) in out.iter_mut().zip(&self.row_indices) {
            *o = self.scale * buf[r];
        }
    }

    fn apply_adjoint_unchecked(&self, u: &[T], out: &mut [T]) {
        let mut buf = vec![T::zero(); self.n];
        for (&ui, &r) in u.iter().zip(&self.row_indices) {
            buf[r] = buf[r] + self.scale * ui;
        }
        self.inverse(&mut buf);
        for ((o, b), &s) in out.iter_mut().zip(buf).zip(&self.signs) {
            *o = b * s;
        }
    }

    /// Each sampled row `r` contributes `scale^2 f_r f_r*`, and `E[f_r f_r*] = I/n`.
    fn gram_scale(&self) -> T {
        self.scale * self.scale * T::lit(self.rows() as f64 / self.n as f64)
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::operators::test_util::adjoint_defect;
    use crate::scalar::norm2;

    fn full(transform: Transform, n: usize, seed_: u64) -> SorsOperator<f64> {
        let mut rng = seed::rng(seed_);
        let signs = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        SorsOperator::from_parts(transform, n, signs, (0..n).collect(), 1.0).unwrap()
    }

    #[test]
    fn full_sampling_is_an_isometry() {
        for t in [Transform::Hadamard, Transform::Dct] {
            let op = full(t, 64, 3);
            let mut rng = seed::rng(9);
            for _ in 0..20 {
                let v: Vec<f64> = (0..64).map(|_| rng.sample(StandardNormal)).collect();
                let av = op.apply(&v).unwrap();
                assert!((norm2(&av) - norm2(&v)).abs() < 1e-10 * norm2(&v));
            }
        }
    }

    #[test]
    fn single_hadamard_row() {
        let op = SorsOperator::from_parts(Transform::Hadamard, 4, vec![1.0; 4], vec![0], 1.0)
            .unwrap();
        assert_eq!(op.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.5]);
        assert_eq!(op.apply_adjoint(&[1.0]).unwrap(), vec![0.5; 4]);
        let scaled =
            SorsOperator::from_parts(Transform::Hadamard, 4, vec![1.0; 4], vec![0], 3.0).unwrap();
        assert_eq!(scaled.apply_adjoint(&[1.0]).unwrap(), vec![1.5; 4]);
    }

    #[test]
    fn adjoint_identity_all_backends() {
        let op = full(Transform::Dct, 8, 1);
        assert!(adjoint_defect(&op, 100, 2) < 1e-10);
        for t in [Transform::Hadamard, Transform::Dct] {
            let op = SorsOperator::<f64>::random(t, 40, 128, 5).unwrap();
            assert!(adjoint_defect(&op, 100, 7) < 1e-10);
        }
    }

    #[test]
    fn random_is_deterministic() {
        let a = SorsOperator::<f64>::random(Transform::Hadamard, 10, 32, 4).unwrap();
        let b = SorsOperator::<f64>::random(Transform::Hadamard, 10, 32, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.signs().iter().all(|&s| s == 1.0 || s == -1.0));
        assert!(a.row_indices().iter().all(|&r| r < 32));
    }

    #[test]
    fn hadamard_needs_power_of_two() {
        assert!(SorsOperator::<f64>::random(Transform::Hadamard, 4, 12, 1).is_err());
        assert!(SorsOperator::<f64>::random(Transform::Dct, 4, 12, 1).is_ok());
    }

    #[test]
    fn rows_have_unit_norm() {
        let op = SorsOperator::<f64>::random(Transform::Dct, 5, 16, 2).unwrap();
        for i in 0..5 {
            let mut e = vec![0.0; 5];
            e[i] = 1.0;
            let row = op.apply_adjoint(&e).unwrap();
            assert!((norm2(&row) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_scale_matches_sampling_rate() {
        let op = SorsOperator::<f64>::random(Transform::Hadamard, 16, 64, 2).unwrap();
        assert!((op.gram_scale() - 0.25).abs() < 1e-15);
    }
}
