//! Symmetric positive definite band matrices and their Cholesky factors.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BandError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("right-hand side has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Lower band storage: `band[i][k] = A[i][i − k]` for `k ≤ bandwidth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bandwidth: usize,
    band: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            band: vec![vec![0.0; bandwidth + 1]; n],
        }
    }

    /// Lower band of a dense symmetric matrix given entrywise.
    pub fn from_fn(n: usize, bandwidth: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(n, bandwidth);
        for i in 0..n {
            for k in 0..=bandwidth.min(i) {
                out.band[i][k] = f(i, i - k);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.bandwidth {
            0.0
        } else {
            self.band[i][k]
        }
    }

    /// `a·self + b·diag(d)`
    pub fn scaled_plus_diagonal(&self, a: f64, b: f64, d: &[f64]) -> Self {
        let mut out = self.clone();
        for (i, row) in out.band.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v *= a;
            }
            row[0] += b * d[i];
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut s = self.band[i][0] * x[i];
            for k in 1..=self.bandwidth {
                if k <= i {
                    s += self.band[i][k] * x[i - k];
                }
                if i + k < self.n {
                    s += self.band[i + k][k] * x[i + k];
                }
            }
            out[i] = s;
        }
    }

    pub fn cholesky(&self) -> Result<BandCholesky, BandError> {
        let (n, bw) = (self.n, self.bandwidth);
        let mut l = vec![vec![0.0; bw + 1]; n];
        for i in 0..n {
            for k in (0..=bw.min(i)).rev() {
                let j = i - k;
                let mut s = self.band[i][k];
                // Σ_m L[i][m]·L[j][m] over m < j inside both bands
                for m in i.saturating_sub(bw)..j {
                    s -= l[i][i - m] * l[j][j - m];
                }
                if k == 0 {
                    if !(s > 0.0) {
                        return Err(BandError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i][0] = s.sqrt();
                } else {
                    l[i][k] = s / l[j][0];
                }
            }
        }
        Ok(BandCholesky {
            n,
            bandwidth: bw,
            l,
        })
    }
}

/// `A = L·Lᵀ` with `L` in lower band storage.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bandwidth: usize,
    l: Vec<Vec<f64>>,
}

impl BandCholesky {
    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), BandError> {
        if b.len() != self.n {
            return Err(BandError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let bw = self.bandwidth;
        for i in 0..self.n {
            let mut s = b[i];
            for k in 1..=bw.min(i) {
                s -= self.l[i][k] * b[i - k];
            }
            b[i] = s / self.l[i][0];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in 1..=bw {
                if i + k < self.n {
                    s -= self.l[i + k][k] * b[i + k];
                }
            }
            b[i] = s / self.l[i][0];
        }
        Ok(())
    }
}
