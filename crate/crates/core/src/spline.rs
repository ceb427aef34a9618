//! Quintic B-spline interpolation.
//!
//! Degree-5 splines with simple interior knots are C⁴, which is what the
//! beam coefficients need for the fourth-order generating-function ODEs.
//! Knots follow the not-a-knot placement: the end knots have multiplicity
//! six and the interior knots sit on data sites `x[3..n-3]`.

use nalgebra::{DMatrix, DVector};

const DEGREE: usize = 5;

#[derive(Debug, Clone)]
pub struct QuinticSpline {
    knots: Vec<f64>,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("quintic interpolation needs at least 6 samples, got {0}")]
    TooFewPoints(usize),
    #[error("sample abscissae must be strictly increasing")]
    NotIncreasing,
    #[error("x and y sample counts differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("collocation system is singular")]
    Singular,
}

impl QuinticSpline {
    pub fn interpolate(x: &[f64], y: &[f64]) -> Result<Self, SplineError> {
        let n = x.len();
        if n != y.len() {
            return Err(SplineError::LengthMismatch(n, y.len()));
        }
        if n < DEGREE + 1 {
            return Err(SplineError::TooFewPoints(n));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SplineError::NotIncreasing);
        }
        let mut knots = Vec::with_capacity(n + DEGREE + 1);
        knots.extend(std::iter::repeat_n(x[0], DEGREE + 1));
        knots.extend_from_slice(&x[3..n - 3]);
        knots.extend(std::iter::repeat_n(x[n - 1], DEGREE + 1));
        debug_assert_eq!(knots.len(), n + DEGREE + 1);

        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut ders = [[0.0; DEGREE + 1]; 1];
        for (i, &xi) in x.iter().enumerate() {
            let span = find_span(&knots, n, xi);
            basis_derivatives(&knots, span, xi, &mut ders);
            for (r, &b) in ders[0].iter().enumerate() {
                a[(i, span - DEGREE + r)] = b;
            }
        }
        let coeffs = a
            .lu()
            .solve(&DVector::from_column_slice(y))
            .ok_or(SplineError::Singular)?;
        Ok(Self {
            knots,
            coeffs: coeffs.iter().copied().collect(),
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Value and the first `D - 1` derivatives at `x` (clamped to the domain).
    pub fn eval<const D: usize>(&self, x: f64) -> [f64; D] {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let n = self.coeffs.len();
        let span = find_span(&self.knots, n, x);
        let mut ders = [[0.0; DEGREE + 1]; D];
        basis_derivatives(&self.knots, span, x, &mut ders);
        let mut out = [0.0; D];
        for (o, row) in out.iter_mut().zip(ders.iter()) {
            *o = row
                .iter()
                .enumerate()
                .map(|(r, b)| b * self.coeffs[span - DEGREE + r])
                .sum();
        }
        out
    }
}

fn find_span(knots: &[f64], n: usize, x: f64) -> usize {
    if x >= knots[n] {
        return n - 1;
    }
    let mut lo = DEGREE;
    let mut hi = n;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Non-vanishing basis functions on `span` and their derivatives
/// (Piegl & Tiller, algorithm A2.3). `ders[k][r]` is the k-th derivative of
/// basis function `span - 5 + r`.
fn basis_derivatives<const D: usize>(
    knots: &[f64],
    span: usize,
    x: f64,
    ders: &mut [[f64; DEGREE + 1]; D],
) {
    const P: usize = DEGREE;
    let mut ndu = [[0.0; P + 1]; P + 1];
    let mut left = [0.0; P + 1];
    let mut right = [0.0; P + 1];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for j in 0..=P {
        ders[0][j] = ndu[j][P];
    }
    let mut a = [[0.0; P + 1]; 2];
    for r in 0..=P {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..D.min(P + 1) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = P - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize {
                k - 1
            } else {
                P - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = P as f64;
    for k in 1..D.min(P + 1) {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (P - k) as f64;
    }
    for row in ders.iter_mut().skip(P + 1) {
        *row = [0.0; P + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quintic_polynomials_exactly() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) + 3.0 * x.powi(5);
        let dp = |x: f64| -2.0 + 1.5 * x * x + 15.0 * x.powi(4);
        let d2p = |x: f64| 3.0 * x + 60.0 * x.powi(3);
        let d4p = |x: f64| 360.0 * x;
        let xs: Vec<f64> = (0..12)
            .map(|i| 0.05 * i as f64 + 0.01 * (i % 3) as f64)
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let s = QuinticSpline::interpolate(&xs, &ys).unwrap();
        for i in 0..=50 {
            let x = xs[0] + (xs[11] - xs[0]) * i as f64 / 50.0;
            let [v, d1, d2, _d3, d4] = s.eval::<5>(x);
            assert!((v - p(x)).abs() < 1e-10, "value at {x}");
            assert!((d1 - dp(x)).abs() < 1e-8);
            assert!((d2 - d2p(x)).abs() < 1e-6);
            assert!((d4 - d4p(x)).abs() < 1e-4);
        }
    }

    #[test]
    fn interpolates_data_sites() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.125).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin()).collect();
        let s = QuinticSpline::interpolate(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval::<1>(*x)[0] - y).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert_eq!(
            QuinticSpline::interpolate(&[0.0, 1.0], &[1.0, 1.0]).unwrap_err(),
            SplineError::TooFewPoints(2)
        );
        let xs = [0.0, 0.1, 0.2, 0.2, 0.4, 0.5];
        assert_eq!(
            QuinticSpline::interpolate(&xs, &[1.0; 6]).unwrap_err(),
            SplineError::NotIncreasing
        );
    }
}
