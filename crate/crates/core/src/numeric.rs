//! Small numeric helpers shared across modules.

use std::sync::OnceLock;

const TABLE_LEN: usize = 512;

fn table() -> &'static [f64; TABLE_LEN] {
    static TABLE: OnceLock<[f64; TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; TABLE_LEN];
        for n in 2..TABLE_LEN {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

/// `ln(n!)`
pub fn ln_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        table()[n]
    } else {
        // Stirling series, ample beyond n = 512
        let x = n as f64;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
    }
}

/// `coef · n! · scaled` where `scaled` is a Taylor coefficient `f⁽ⁿ⁾/n!`.
///
/// Evaluated directly while `n!` is representable and the product stays in
/// the normal range; otherwise the magnitudes are combined in log space.
pub fn pair_term(coef: f64, n: usize, scaled: f64) -> f64 {
    if coef == 0.0 || scaled == 0.0 {
        return 0.0;
    }
    if n <= 170 {
        let direct = coef * (factorial(n) * scaled);
        if direct.is_finite() && direct.abs() >= f64::MIN_POSITIVE {
            return direct;
        }
    }
    let sign = coef.signum() * scaled.signum();
    sign * (coef.abs().ln() + ln_factorial(n) + scaled.abs().ln()).exp()
}

/// `n!` as a double (exact up to 22!, correctly rounded products beyond).
pub fn factorial(n: usize) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_small_and_large() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(10) - 3628800f64.ln()).abs() < 1e-13);
        let stirling = ln_factorial(600);
        let direct: f64 = (2..=600).map(|k| (k as f64).ln()).sum();
        assert!((stirling - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn pair_term_agrees_across_regimes() {
        assert_eq!(pair_term(1.0, 0, 0.4), 0.4);
        let a = pair_term(1e-200, 150, 1e-10);
        let expect = (1e-200f64.ln() + ln_factorial(150) + 1e-10f64.ln()).exp();
        assert!((a - expect).abs() < 1e-12 * expect);
        let tiny = pair_term(-1e-300, 3, 1e-20);
        assert!(tiny <= 0.0);
        assert_eq!(pair_term(0.0, 200, 1e300), 0.0);
    }
}
