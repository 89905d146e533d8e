//! Orthonormal transforms backing the SORS ensemble.

use crate::scalar::Scalar;

/// In-place fast Walsh–Hadamard transform, scaled by `1/sqrt(n)` so that it
/// is orthonormal and self-inverse. `data.len()` must be a power of two.
pub fn fwht<T: Scalar>(data: &mut [T]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let scale = T::lit(1.0 / (n as f64).sqrt());
    data.iter_mut().for_each(|v| *v = *v * scale);
}

/// Orthonormal DCT-II basis, row-major `n x n`: `C[k][j] = c_k cos(pi (2j+1) k / 2n)`.
pub fn dct_matrix<T: Scalar>(n: usize) -> Vec<T> {
    let nf = n as f64;
    let mut c = Vec::with_capacity(n * n);
    for k in 0..n {
        let ck = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for j in 0..n {
            let arg = std::f64::consts::PI * (2.0 * j as f64 + 1.0) * k as f64 / (2.0 * nf);
            c.push(T::lit(ck * arg.cos()));
        }
    }
    c
}
