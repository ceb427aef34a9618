//! Physical description of the beam and the spatial grid on `[0, L]`.
//!
//! The tip mass sits at `x = 0`; the moving clamp is at `x = L`. All
//! quantities are SI: meters, kilograms, kg·m², kg/m and N·m².

use serde::{Deserialize, Serialize};

use crate::spline::{QuinticSpline, SplineError};

/// Number of interior probe intervals used for the positivity scan.
pub const PROBE_INTERVALS: usize = 1000;

/// Minimum interval count accepted by [`SpatialGrid::uniform`].
pub const MIN_GRID_INTERVALS: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeamError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("coefficient {name} is not positive at x = {x} (value {value})")]
    NonPositiveCoefficient {
        name: &'static str,
        x: f64,
        value: f64,
    },
    #[error("malformed coefficient spec: {0}")]
    MalformedSpec(String),
    #[error("position {x} outside [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },
    #[error("grid needs at least {min} intervals, got {got}")]
    GridTooCoarse { min: usize, got: usize },
}

impl From<SplineError> for BeamError {
    fn from(e: SplineError) -> Self {
        BeamError::MalformedSpec(e.to_string())
    }
}

/// Serialized form of a coefficient function `x ↦ c(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefficientSpec {
    /// `a·(1 + b·x)`
    Affine { a: f64, b: f64 },
    /// `c₀ + c₁x + c₂x² + …`
    Poly { coeffs: Vec<f64> },
    /// Samples interpolated by a quintic (C⁴) spline.
    Table { x: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone)]
enum Profile {
    Poly(Vec<f64>),
    Table(QuinticSpline),
}

/// An evaluable coefficient function with derivatives up to second order.
#[derive(Debug, Clone)]
pub struct Coefficient {
    spec: CoefficientSpec,
    profile: Profile,
}

impl Coefficient {
    pub fn from_spec(spec: &CoefficientSpec, length: f64) -> Result<Self, BeamError> {
        let profile = match spec {
            CoefficientSpec::Affine { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(BeamError::MalformedSpec(
                        "non-finite affine parameters".into(),
                    ));
                }
                Profile::Poly(vec![*a, a * b])
            }
            CoefficientSpec::Poly { coeffs } => {
                if coeffs.is_empty() {
                    return Err(BeamError::MalformedSpec("empty polynomial".into()));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(BeamError::MalformedSpec(
                        "non-finite polynomial coefficient".into(),
                    ));
                }
                Profile::Poly(coeffs.clone())
            }
            CoefficientSpec::Table { x, values } => {
                if x.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(BeamError::MalformedSpec("non-finite table entry".into()));
                }
                let spline = QuinticSpline::interpolate(x, values)?;
                let (lo, hi) = spline.domain();
                let slack = 1e-12 * length.max(1.0);
                if lo > slack || hi < length - slack {
                    return Err(BeamError::MalformedSpec(format!(
                        "table covers [{lo}, {hi}] but the beam spans [0, {length}]"
                    )));
                }
                Profile::Table(spline)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            profile,
        })
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    /// `[c(x), c'(x), c''(x)]` without domain checks.
    pub fn eval3(&self, x: f64) -> [f64; 3] {
        match &self.profile {
            Profile::Poly(c) => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &ci in c.iter().rev() {
                    d2 = d2 * x + 2.0 * d1;
                    d1 = d1 * x + v;
                    v = v * x + ci;
                }
                [v, d1, d2]
            }
            Profile::Table(s) => s.eval::<3>(x),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Poly(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            Profile::Table(s) => s.eval::<1>(x)[0],
        }
    }
}

/// On-disk beam description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamConfigFile {
    #[serde(rename = "L")]
    pub length: f64,
    pub m: f64,
    #[serde(rename = "J")]
    pub inertia: f64,
    pub rho: CoefficientSpec,
    pub ei: CoefficientSpec,
}

/// Validated beam parameters.
#[derive(Debug, Clone)]
pub struct BeamConfig {
    length: f64,
    tip_mass: f64,
    tip_inertia: f64,
    rho: Coefficient,
    ei: Coefficient,
    rho_max: f64,
    ei_min: f64,
}

impl BeamConfig {
    pub fn new(
        length: f64,
        tip_mass: f64,
        tip_inertia: f64,
        rho: &CoefficientSpec,
        ei: &CoefficientSpec,
    ) -> Result<Self, BeamError> {
        for (name, value) in [("L", length), ("m", tip_mass), ("J", tip_inertia)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(BeamError::NonPositiveParameter { name, value });
            }
        }
        let rho = Coefficient::from_spec(rho, length)?;
        let ei = Coefficient::from_spec(ei, length)?;
        let mut rho_max = f64::NEG_INFINITY;
        let mut ei_min = f64::INFINITY;
        for i in 0..=PROBE_INTERVALS {
            let x = length * (i as f64 / PROBE_INTERVALS as f64);
            let (r, e) = (rho.value(x), ei.value(x));
            if !(r > 0.0) {
                return Err(BeamError::NonPositiveCoefficient {
                    name: "rho",
                    x,
                    value: r,
                });
            }
            if !(e > 0.0) {
                return Err(BeamError::NonPositiveCoefficient {
                    name: "EI",
                    x,
                    value: e,
                });
            }
            rho_max = rho_max.max(r);
            ei_min = ei_min.min(e);
        }
        Ok(Self {
            length,
            tip_mass,
            tip_inertia,
            rho,
            ei,
            rho_max,
            ei_min,
        })
    }

    pub fn from_file(file: &BeamConfigFile) -> Result<Self, BeamError> {
        Self::new(file.length, file.m, file.inertia, &file.rho, &file.ei)
    }

    pub fn to_file(&self) -> BeamConfigFile {
        BeamConfigFile {
            length: self.length,
            m: self.tip_mass,
            inertia: self.tip_inertia,
            rho: self.rho.spec().clone(),
            ei: self.ei.spec().clone(),
        }
    }

    /// Parameters of the laboratory beam: steel strip with linearly varying
    /// width, 0.402 kg tip mass.
    pub fn laboratory() -> Self {
        Self::new(
            0.5,
            0.402,
            1.9e-4,
            &CoefficientSpec::Affine { a: 0.11, b: 3.0 },
            &CoefficientSpec::Affine { a: 0.297, b: 3.0 },
        )
        .expect("laboratory parameters are valid")
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn tip_mass(&self) -> f64 {
        self.tip_mass
    }

    pub fn tip_inertia(&self) -> f64 {
        self.tip_inertia
    }

    pub fn rho(&self) -> &Coefficient {
        &self.rho
    }

    pub fn ei(&self) -> &Coefficient {
        &self.ei
    }

    /// Maximum of ρ over the probe grid.
    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Minimum of EI over the probe grid.
    pub fn ei_min(&self) -> f64 {
        self.ei_min
    }

    pub fn eval_coefficients(&self, x: f64) -> Result<(f64, f64), BeamError> {
        if !(0.0..=self.length).contains(&x) {
            return Err(BeamError::OutOfDomain {
                x,
                length: self.length,
            });
        }
        Ok((self.rho.value(x), self.ei.value(x)))
    }
}

/// Uniform grid `0 = x₀ < … < x_M = L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    nodes: Vec<f64>,
    spacing: f64,
}

impl SpatialGrid {
    pub fn uniform(length: f64, intervals: usize) -> Result<Self, BeamError> {
        if intervals < MIN_GRID_INTERVALS {
            return Err(BeamError::GridTooCoarse {
                min: MIN_GRID_INTERVALS,
                got: intervals,
            });
        }
        if !(length > 0.0) {
            return Err(BeamError::NonPositiveParameter {
                name: "L",
                value: length,
            });
        }
        let m = intervals as f64;
        let nodes = (0..=intervals).map(|i| length * (i as f64 / m)).collect();
        Ok(Self {
            nodes,
            spacing: length / m,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}
