//! Truncated Taylor jets in the scaled convention `c_k = f⁽ᵏ⁾(t₀)/k!`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetError {
    #[error("jets differ in expansion point or order ({0} at K={1} vs {2} at K={3})")]
    MismatchedJets(f64, usize, f64, usize),
    #[error("non-integer power {exponent} of a jet with base value {base}")]
    NonPositiveBase { base: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    t0: f64,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn from_coeffs(t0: f64, coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet carries at least the value");
        Self { t0, coeffs }
    }

    pub fn constant(t0: f64, value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { t0, coeffs }
    }

    /// Jet of the identity `t ↦ t`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut j = Self::constant(t0, t0, order);
        if order >= 1 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    pub fn zero(t0: f64, order: usize) -> Self {
        Self::constant(t0, 0.0, order)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `f⁽ⁿ⁾(t₀)`
    pub fn derivative(&self, n: usize) -> f64 {
        crate::numeric::pair_term(1.0, n, self.coeffs[n])
    }

    fn check(&self, other: &Jet) -> Result<(), JetError> {
        if self.t0 != other.t0 || self.coeffs.len() != other.coeffs.len() {
            return Err(JetError::MismatchedJets(
                self.t0,
                self.order(),
                other.t0,
                other.order(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    fn zip_map(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        Jet {
            t0: self.t0,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            t0: self.t0,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Cauchy product.
    pub fn mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        let n = self.coeffs.len();
        let coeffs = (0..n)
            .map(|k| (0..=k).map(|i| self.coeffs[i] * other.coeffs[k - i]).sum())
            .collect();
        Ok(Jet {
            t0: self.t0,
            coeffs,
        })
    }

    /// `exp ∘ a` via `k·e_k = Σ_{j=1..k} j·a_j·e_{k−j}`.
    pub fn exp(&self) -> Jet {
        let a = &self.coeffs;
        let mut e = vec![0.0; a.len()];
        e[0] = a[0].exp();
        for k in 1..a.len() {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet {
            t0: self.t0,
            coeffs: e,
        }
    }

    /// `a^r`. Non-integer exponents need a positive base value; integer
    /// exponents need a nonzero base value unless `r ≥ 0`.
    pub fn rpow(&self, r: f64) -> Result<Jet, JetError> {
        let a = &self.coeffs;
        let is_int = r.fract() == 0.0;
        if is_int && r >= 0.0 && a[0] == 0.0 {
            let mut out = Jet::constant(self.t0, 1.0, self.order());
            for _ in 0..r as u64 {
                out = out.mul(self)?;
            }
            return Ok(out);
        }
        if (!is_int && !(a[0] > 0.0)) || a[0] == 0.0 {
            return Err(JetError::NonPositiveBase {
                base: a[0],
                exponent: r,
            });
        }
        let mut b = vec![0.0; a.len()];
        b[0] = if is_int {
            a[0].powi(r as i32)
        } else {
            a[0].powf(r)
        };
        for k in 1..a.len() {
            let kf = k as f64;
            let s: f64 = (1..=k)
                .map(|j| ((r + 1.0) * j as f64 - kf) * a[j] * b[k - j])
                .sum();
            b[k] = s / (kf * a[0]);
        }
        Ok(Jet {
            t0: self.t0,
            coeffs: b,
        })
    }

    /// Jet of `q(t) = f(T − t)` at `T − t₀`, given the jet of `f` at `t₀`.
    pub fn reversed(&self, horizon: f64) -> Jet {
        Jet {
            t0: horizon - self.t0,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect(),
        }
    }

    /// Keep coefficients `0..=order`.
    pub fn truncate(&self, order: usize) -> Jet {
        Jet {
            t0: self.t0,
            coeffs: self.coeffs[..=order.min(self.order())].to_vec(),
        }
    }
}
