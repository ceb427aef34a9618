//! Gevrey bump `ψ`, the interpolated flat parameter `p` and the closed-form
//! functions used as `p₀`, `p_T`.
//!
//! `ψ(t) = 1 − ∫₀ᵗ ψ₀ / ∫₀ᵀ ψ₀` with `ψ₀(t) = exp(−[(1 − t/T)(t/T)]^{−1/(s−1)})`,
//! and `p(t) = p₀(t)ψ(t) + p_T(T − t)ψ(T − t)`.

use serde::{Deserialize, Serialize};

use crate::jet::{Jet, JetError};
use crate::numeric::ln_factorial;

/// `ψ₀` is treated as exactly zero once its exponent exceeds this value.
pub const UNDERFLOW_EXPONENT: f64 = 708.0;

/// Relative accuracy demanded of `∫₀ᵀ ψ₀`.
pub const NORMALIZER_TOLERANCE: f64 = 1e-12;

/// Absolute accuracy of the partial integrals, relative to `∫₀ᵀ ψ₀`.
const PARTIAL_TOLERANCE: f64 = 1e-15;

const ABS_FLOOR: f64 = 1e-300;
const MAX_DEPTH: u32 = 50;
const MAX_EVALUATIONS: usize = 4_000_000;

/// Largest admissible `ψ₀` exponent at the midpoint, `4^{1/(s−1)}`.
const PEAK_EXPONENT_LIMIT: f64 = 600.0;
const INITIAL_PANELS: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GevreyError {
    #[error("transfer horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("Gevrey order must lie in (1, 2), got {0}")]
    GevreyOrderOutOfRange(f64),
    #[error("Gevrey order {0} makes the bump underflow in double precision")]
    BumpUnderflow(f64),
    #[error("adaptive quadrature on [{a}, {b}] did not reach tolerance")]
    QuadratureFailure { a: f64, b: f64 },
    #[error("time {t} outside [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },
    #[error("unknown closed-form id {0:?}")]
    UnknownSpec(String),
    #[error("closed-form parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Smooth functions with exactly computable jets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClosedForm {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[i]·tⁱ`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `poly(t) + amplitude(t)·exp(rate·t)`
    PolyExp {
        poly: Vec<f64>,
        amplitude: Vec<f64>,
        rate: f64,
    },
}

impl ClosedForm {
    /// Look up a closed form by id: `constant` takes `[c]`, `polynomial`
    /// takes the coefficients, `poly-exp` takes `[rate, n, poly₀..poly_{n-1},
    /// amplitude…]`.
    pub fn from_id(id: &str, params: &[f64]) -> Result<Self, GevreyError> {
        let bad = |msg: &str| GevreyError::BadParameters(format!("{id}: {msg}"));
        match id {
            "constant" => match params {
                [c] => Ok(ClosedForm::Constant { value: *c }),
                _ => Err(bad("expects one value")),
            },
            "polynomial" => {
                if params.is_empty() {
                    return Err(bad("expects at least one coefficient"));
                }
                Ok(ClosedForm::Polynomial {
                    coeffs: params.to_vec(),
                })
            }
            "poly-exp" => {
                let (rate, rest) = params.split_first().ok_or_else(|| bad("missing rate"))?;
                let (n, rest) = rest.split_first().ok_or_else(|| bad("missing count"))?;
                let n = *n as usize;
                if rest.len() < n {
                    return Err(bad("too few polynomial coefficients"));
                }
                Ok(ClosedForm::PolyExp {
                    poly: rest[..n].to_vec(),
                    amplitude: rest[n..].to_vec(),
                    rate: *rate,
                })
            }
            other => Err(GevreyError::UnknownSpec(other.to_string())),
        }
    }

    /// `1 + 10t²e^{−2t}`
    pub fn decaying_bump() -> Self {
        ClosedForm::PolyExp {
            poly: vec![1.0],
            amplitude: vec![0.0, 0.0, 10.0],
            rate: -2.0,
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            ClosedForm::Constant { .. } => true,
            ClosedForm::Polynomial { coeffs } => {
                coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
            }
            ClosedForm::PolyExp { .. } => false,
        }
    }

    pub fn jet(&self, t: f64, order: usize) -> Jet {
        match self {
            ClosedForm::Constant { value } => Jet::constant(t, *value, order),
            ClosedForm::Polynomial { coeffs } => polynomial_jet(coeffs, t, order),
            ClosedForm::PolyExp {
                poly,
                amplitude,
                rate,
            } => {
                let lin = Jet::variable(t, order).scale(*rate);
                let e = lin.exp();
                let amp = polynomial_jet(amplitude, t, order);
                polynomial_jet(poly, t, order)
                    .add(&amp.mul(&e).expect("same point and order"))
                    .expect("same point and order")
            }
        }
    }
}

pub fn closed_form_jet(id: &str, params: &[f64], t: f64, order: usize) -> Result<Jet, GevreyError> {
    Ok(ClosedForm::from_id(id, params)?.jet(t, order))
}

/// Taylor shift of `Σ aᵢ tⁱ` to `t₀`.
fn polynomial_jet(a: &[f64], t0: f64, order: usize) -> Jet {
    let mut c = vec![0.0; order + 1];
    // Horner on the jet: c ← c·(t₀ + τ) + aᵢ
    for &ai in a.iter().rev() {
        for k in (0..=order).rev() {
            let lower = if k > 0 { c[k - 1] } else { 0.0 };
            c[k] = c[k] * t0 + lower;
        }
        c[0] += ai;
    }
    Jet::from_coeffs(t0, c)
}

/// Transfer description: horizon, Gevrey order and the two end parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    horizon: f64,
    gevrey: f64,
    p0: ClosedForm,
    p_final: ClosedForm,
    c_norm: f64,
}

impl TrajectorySpec {
    pub fn new(
        horizon: f64,
        gevrey: f64,
        p0: ClosedForm,
        p_final: ClosedForm,
    ) -> Result<Self, GevreyError> {
        let c_norm = bump_normalizer(horizon, gevrey)?;
        Ok(Self {
            horizon,
            gevrey,
            p0,
            p_final,
            c_norm,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn gevrey(&self) -> f64 {
        self.gevrey
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    pub fn p0(&self) -> &ClosedForm {
        &self.p0
    }

    pub fn p_final(&self) -> &ClosedForm {
        &self.p_final
    }

    fn check_time(&self, t: f64) -> Result<(), GevreyError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(GevreyError::OutOfDomain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `ψ₀` exponent `[(1 − t/T)(t/T)]^{−1/(s−1)}`; infinite at the ends.
    fn exponent(&self, t: f64) -> f64 {
        let u = (1.0 - t / self.horizon) * (t / self.horizon);
        if u <= 0.0 {
            f64::INFINITY
        } else {
            u.powf(-1.0 / (self.gevrey - 1.0))
        }
    }

    pub fn psi0(&self, t: f64) -> f64 {
        psi0(t, self.horizon, self.gevrey)
    }

    /// `ψ(t)`, using `ψ(t) = ∫_0^{T−t} ψ₀ / C` past the midpoint so that
    /// `ψ(t) + ψ(T − t) = 1` holds to rounding.
    pub fn psi(&self, t: f64) -> Result<f64, GevreyError> {
        self.check_time(t)?;
        let (t_, s_) = (self.horizon, self.gevrey);
        let f = |tau: f64| psi0(tau, t_, s_);
        let eps = PARTIAL_TOLERANCE * self.c_norm;
        if t <= 0.5 * t_ {
            Ok(1.0 - integrate_bump(&f, t, eps, s_)? / self.c_norm)
        } else {
            Ok(integrate_bump(&f, t_ - t, eps, s_)? / self.c_norm)
        }
    }
}

fn psi0(t: f64, horizon: f64, s: f64) -> f64 {
    let u = (1.0 - t / horizon) * (t / horizon);
    if u <= 0.0 {
        return 0.0;
    }
    let e = u.powf(-1.0 / (s - 1.0));
    if e > UNDERFLOW_EXPONENT {
        0.0
    } else {
        (-e).exp()
    }
}

/// `∫₀ᵀ ψ₀(τ) dτ`.
pub fn bump_normalizer(horizon: f64, gevrey: f64) -> Result<f64, GevreyError> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(GevreyError::NonPositiveHorizon(horizon));
    }
    if !(gevrey > 1.0 && gevrey < 2.0) {
        return Err(GevreyError::GevreyOrderOutOfRange(gevrey));
    }
    if 4f64.powf(1.0 / (gevrey - 1.0)) > PEAK_EXPONENT_LIMIT {
        return Err(GevreyError::BumpUnderflow(gevrey));
    }
    let f = |tau: f64| psi0(tau, horizon, gevrey);
    // ψ₀ is symmetric about T/2, so integrating one half keeps ψ(T/2) = 1/2.
    let rough = composite_simpson(&f, 0.0, horizon, 64);
    Ok(2.0 * integrate_bump(&f, 0.5 * horizon, 0.5 * PARTIAL_TOLERANCE * rough, gevrey)?)
}

/// `∫₀ᵇ ψ₀`. Rounding in the exponent limits the relative accuracy of `ψ₀`
/// to about `4^{1/(s−1)}·ε` near the peak, so refinement stops there.
fn integrate_bump(
    f: &impl Fn(f64) -> f64,
    b: f64,
    eps: f64,
    gevrey: f64,
) -> Result<f64, GevreyError> {
    let peak = 4f64.powf(1.0 / (gevrey - 1.0));
    adaptive_simpson_with_noise(f, 0.0, b, eps, 8.0 * f64::EPSILON * (1.0 + 2.0 * peak))
}

fn composite_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let x0 = a + i as f64 * h;
            h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h))
        })
        .sum()
}

/// Adaptive Simpson quadrature to absolute accuracy `eps` (floored at 1e−300).
pub fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    eps: f64,
) -> Result<f64, GevreyError> {
    adaptive_simpson_with_noise(f, a, b, eps, 8.0 * f64::EPSILON)
}

/// As [`adaptive_simpson`], but panels whose refinement correction is below
/// `noise` times their integral are accepted as rounding-limited.
pub fn adaptive_simpson_with_noise(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    eps: f64,
    noise: f64,
) -> Result<f64, GevreyError> {
    if b <= a {
        return Ok(0.0);
    }
    let eps = eps.max(ABS_FLOOR);
    let h = (b - a) / INITIAL_PANELS as f64;
    let panel_eps = eps / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut budget = MAX_EVALUATIONS;
    for i in 0..INITIAL_PANELS {
        let x0 = a + i as f64 * h;
        let x1 = if i + 1 == INITIAL_PANELS { b } else { x0 + h };
        let (fa, fm, fb) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        let whole = (x1 - x0) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(
            f,
            x0,
            x1,
            fa,
            fm,
            fb,
            whole,
            panel_eps,
            noise,
            MAX_DEPTH,
            &mut budget,
        )
        .ok_or(GevreyError::QuadratureFailure { a, b })?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    noise: f64,
    depth: u32,
    budget: &mut usize,
) -> Option<f64> {
    *budget = budget.checked_sub(2)?;
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps || delta.abs() <= noise * (left + right).abs() {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = simpson_step(
        f,
        a,
        m,
        fa,
        flm,
        fm,
        left,
        0.5 * eps,
        noise,
        depth - 1,
        budget,
    )?;
    let r = simpson_step(
        f,
        m,
        b,
        fm,
        frm,
        fb,
        right,
        0.5 * eps,
        noise,
        depth - 1,
        budget,
    )?;
    Some(l + r)
}

/// Jet of `ψ` at `t`, order `K`.
pub fn psi_jet(t: f64, spec: &TrajectorySpec, order: usize) -> Result<Jet, GevreyError> {
    spec.check_time(t)?;
    let horizon = spec.horizon;
    if spec.exponent(t) > UNDERFLOW_EXPONENT {
        let value = if t < 0.5 * horizon { 1.0 } else { 0.0 };
        return Ok(Jet::constant(t, value, order));
    }
    let mut coeffs = vec![0.0; order + 1];
    coeffs[0] = spec.psi(t)?;
    if order >= 1 {
        let psi0 = psi0_jet(t, spec, order - 1)?;
        for k in 1..=order {
            coeffs[k] = -psi0.coeffs()[k - 1] / (spec.c_norm * k as f64);
        }
    }
    Ok(Jet::from_coeffs(t, coeffs))
}

/// Jet of `ψ₀` at an interior point.
fn psi0_jet(t: f64, spec: &TrajectorySpec, order: usize) -> Result<Jet, GevreyError> {
    let horizon = spec.horizon;
    let mut u = vec![0.0; order + 1];
    u[0] = (1.0 - t / horizon) * (t / horizon);
    if order >= 1 {
        u[1] = (1.0 - 2.0 * t / horizon) / horizon;
    }
    if order >= 2 {
        u[2] = -1.0 / (horizon * horizon);
    }
    let u = Jet::from_coeffs(t, u);
    Ok(u.rpow(-1.0 / (spec.gevrey - 1.0))?.scale(-1.0).exp())
}

/// Jet of `p` at `t`.
///
/// Evaluated as `p₀ + (q − p₀)·ψ(T − t)` on the first half and
/// `q + (p₀ − q)·ψ(t)` on the second, where `q(t) = p_T(T − t)`. This equals
/// `p₀ψ + q·ψ(T − ·)` because `ψ(t) + ψ(T − t) = 1`, reproduces the end jets
/// exactly and keeps `p` exactly constant when `p₀ = p_T` is.
pub fn p_jet(t: f64, spec: &TrajectorySpec, order: usize) -> Result<Jet, GevreyError> {
    spec.check_time(t)?;
    let back = spec.horizon - t;
    let start = spec.p0.jet(t, order);
    // q and ψ(T − ·) near t, re-anchored at t to undo rounding in T − (T − t)
    let anchor = |j: Jet| Jet::from_coeffs(t, j.coeffs().to_vec());
    let end = anchor(spec.p_final.jet(back, order).reversed(spec.horizon));
    let jet = if t <= 0.5 * spec.horizon {
        let weight = anchor(psi_jet(back, spec, order)?.reversed(spec.horizon));
        start.add(&end.sub(&start)?.mul(&weight)?)?
    } else {
        let weight = psi_jet(t, spec, order)?;
        end.add(&start.sub(&end)?.mul(&weight)?)?
    };
    Ok(jet)
}

/// Fitted Gevrey constant: the smallest `D` with
/// `|ψ⁽ᵏ⁾(t)| ≤ D^{k+1}(k!)^s` over the sampled `t` and `k ≤ K`.
pub fn gevrey_constant(
    spec: &TrajectorySpec,
    times: &[f64],
    order: usize,
) -> Result<f64, GevreyError> {
    let mut best: f64 = 0.0;
    for &t in times {
        let j = psi_jet(t, spec, order)?;
        for (k, &c) in j.coeffs().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let ln_deriv = c.abs().ln() + ln_factorial(k);
            let ln_d = (ln_deriv - spec.gevrey * ln_factorial(k)) / (k + 1) as f64;
            best = best.max(ln_d.exp());
        }
    }
    Ok(best)
}
