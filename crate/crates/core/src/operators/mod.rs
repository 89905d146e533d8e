//! Random measurement ensembles `A: R^n -> R^m` and their adjoints.

mod dense;
mod sors;
pub mod transform;

pub use dense::{DenseOperator, Ensemble};
pub use sors::{SorsOperator, Transform};

use crate::error::{check_len, Result};
use crate::scalar::Scalar;

/// A linear map with an adjoint. Implementations are immutable after
/// construction and may be shared across threads.
pub trait MeasurementOperator<T: Scalar>: Send + Sync {
    /// Number of measurements `m`.
    fn rows(&self) -> usize;
    /// Signal dimension `n`.
    fn cols(&self) -> usize;

    /// `out = A v`. Slice lengths are checked by the caller-facing wrappers.
    fn apply_unchecked(&self, v: &[T], out: &mut [T]);
    /// `out = A* u`.
    fn apply_adjoint_unchecked(&self, u: &[T], out: &mut [T]);

    /// The constant `c` with `E[A* A] = c I` for the ensemble this operator
    /// was drawn from. Step-size rules are stated for `c = m` (unnormalized
    /// Gaussian rows); the solver rescales by `m / c` for other ensembles.
    fn gram_scale(&self) -> T;

    fn apply_into(&self, v: &[T], out: &mut [T]) -> Result<()> {
        check_len(self.cols(), v.len())?;
        check_len(self.rows(), out.len())?;
        self.apply_unchecked(v, out);
        Ok(())
    }

    fn apply_adjoint_into(&self, u: &[T], out: &mut [T]) -> Result<()> {
        check_len(self.rows(), u.len())?;
        check_len(self.cols(), out.len())?;
        self.apply_adjoint_unchecked(u, out);
        Ok(())
    }

    fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.rows()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    fn apply_adjoint(&self, u: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.cols()];
        self.apply_adjoint_into(u, &mut out)?;
        Ok(out)
    }
}

impl<T: Scalar, O: MeasurementOperator<T> + ?Sized> MeasurementOperator<T> for Box<O> {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply_unchecked(&self, v: &[T], out: &mut [T]) {
        (**self).apply_unchecked(v, out)
    }
    fn apply_adjoint_unchecked(&self, u: &[T], out: &mut [T]) {
        (**self).apply_adjoint_unchecked(u, out)
    }
    fn gram_scale(&self) -> T {
        (**self).gram_scale()
    }
}
