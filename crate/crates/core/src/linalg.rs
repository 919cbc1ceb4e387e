//! Banded Cholesky factorisation for the symmetric Toeplitz ISI matrix.

use num_complex::Complex64;

use crate::error::{FtnError, Result};
use crate::pulse::IsiProfile;

/// Lower-triangular Cholesky factor `C` of an `n x n` symmetric banded matrix,
/// `A = C C^T`, stored row by row with `bandwidth + 1` entries per row.
///
/// Row `i` holds `C[i][i - bandwidth ..= i]`; entries that would fall before
/// column 0 are zero.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    rows: Vec<f64>,
}

impl BandedCholesky {
    /// Factor the matrix whose entry `(i, j)` is `entry(i, j)` for
    /// `|i - j| <= bandwidth` and zero elsewhere.
    pub fn factor<F>(n: usize, bandwidth: usize, entry: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64,
    {
        let w = bandwidth + 1;
        let mut rows = vec![0.0; n * w];
        // rows[i * w + (j + bandwidth - i)] = C[i][j]
        let at = |i: usize, j: usize| i * w + (j + bandwidth - i);
        for i in 0..n {
            let first = i.saturating_sub(bandwidth);
            for j in first..=i {
                let mut s = entry(i, j);
                let k0 = first.max(j.saturating_sub(bandwidth));
                for k in k0..j {
                    s -= rows[at(i, k)] * rows[at(j, k)];
                }
                if i == j {
                    if s.is_nan() || s <= 0.0 {
                        return Err(FtnError::NotPositiveDefinite { pivot: i, value: s });
                    }
                    rows[at(i, i)] = s.sqrt();
                } else {
                    rows[at(i, j)] = s / rows[at(j, j)];
                }
            }
        }
        Ok(Self { n, bandwidth, rows })
    }

    /// Factor the `n x n` ISI matrix built from `profile`. If the truncated
    /// matrix is not positive definite, a diagonal jitter of `1e-9` is added
    /// once before giving up.
    pub fn from_profile(profile: &IsiProfile, n: usize) -> Result<Self> {
        let bandwidth = profile.len().saturating_sub(1);
        match Self::factor(n, bandwidth, |i, j| profile.matrix_entry(i, j)) {
            Ok(c) => Ok(c),
            Err(FtnError::NotPositiveDefinite { .. }) => {
                log::warn!(
                    "truncated ISI matrix (tau={}, L={}) is indefinite; adding 1e-9 diagonal jitter",
                    profile.tau(),
                    profile.len()
                );
                Self::factor(n, bandwidth, |i, j| {
                    profile.matrix_entry(i, j) + if i == j { 1e-9 } else { 0.0 }
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `C[i][j]`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bandwidth {
            0.0
        } else {
            self.rows[i * (self.bandwidth + 1) + (j + self.bandwidth - i)]
        }
    }

    /// Compute `C z` for a complex vector `z` of length `n`.
    pub fn lower_mul(&self, z: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(z.len(), self.n);
        let w = self.bandwidth + 1;
        (0..self.n)
            .map(|i| {
                let first = i.saturating_sub(self.bandwidth);
                let row = &self.rows[i * w..(i + 1) * w];
                let off = first + self.bandwidth - i;
                row[off..]
                    .iter()
                    .zip(&z[first..=i])
                    .map(|(c, v)| v * *c)
                    .sum()
            })
            .collect()
    }
}
