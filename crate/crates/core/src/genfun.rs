//! Generating functions `g_k`, `h_k` of the flat parametrization.
//!
//! Each level solves `(EI u_xx)_xx = -ρ·u_prev` from `x = 0` with
//! prescribed data for `u, u_x, EI u_xx, (EI u_xx)_x`. All levels of one
//! family are integrated together as one linear first-order system with the
//! classical fourth-order Runge–Kutta method on the fixed grid, so that the
//! forcing `ρ·u_prev` is available at the half steps without interpolation.

use serde::{Deserialize, Serialize};

use crate::beam::{BeamConfig, BeamError, SpatialGrid};
use crate::numeric::ln_factorial;

/// Default number of grid intervals for the generating functions.
pub const DEFAULT_INTERVALS: usize = 512;

/// Endpoint agreement required between the `M` and `2M` tables.
pub const REFINEMENT_TOLERANCE: f64 = 1e-10;

/// RK4 steps taken inside each table interval.
pub const DEFAULT_SUBSTEPS: usize = 64;

/// Relative slack granted to the decay-bound checks for solver error.
pub const BOUND_ALLOWANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenFunError {
    #[error("truncation order must be at least 1")]
    ZeroOrder,
    #[error("grid spans [0, {grid}] but the beam has length {beam}")]
    GridMismatch { grid: f64, beam: f64 },
    #[error("non-finite value in level {level} of the {family} family")]
    SolverDivergence { family: Family, level: usize },
    #[error(
        "endpoint {quantity} of {family}_{level} changed by {rel:.3e} (relative) under grid halving"
    )]
    GridTooCoarse {
        family: Family,
        level: usize,
        quantity: &'static str,
        rel: f64,
    },
    #[error("level {index} outside 0..={order}")]
    IndexOutOfRange { index: usize, order: usize },
    #[error(
        "decay bound violated for {family}_{level} at x = {x} ({which}): log-margin {margin:.3e}"
    )]
    BoundViolation {
        family: Family,
        level: usize,
        x: f64,
        which: &'static str,
        margin: f64,
    },
    #[error(transparent)]
    Beam(#[from] BeamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    G,
    H,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::G => "g",
            Family::H => "h",
        })
    }
}

/// One generating function sampled on the grid: value and four derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub derivs: [Vec<f64>; 5],
}

impl SampledFunction {
    fn zeros(n: usize) -> Self {
        Self {
            derivs: std::array::from_fn(|_| vec![0.0; n]),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.derivs[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.derivs[1]
    }
}

/// `(g_k(L), g_k,x(L), h_k(L), h_k,x(L))`
pub type EndpointRow = [f64; 4];

#[derive(Debug, Clone)]
pub struct GenFunTable {
    order: usize,
    grid: SpatialGrid,
    g: Vec<SampledFunction>,
    h: Vec<SampledFunction>,
    endpoints: Vec<EndpointRow>,
    r1: f64,
    r2: f64,
}

/// Serialized endpoint summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenFunExport {
    #[serde(rename = "N")]
    pub order: usize,
    pub grid: GridSummary,
    pub endpoints: Vec<EndpointRow>,
    /// `[sign, ln|value|]` for each endpoint entry.
    pub log_endpoints: Vec<[[f64; 2]; 4]>,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub length: f64,
    pub intervals: usize,
    pub spacing: f64,
}

/// Worst log-margins `ln|value| - ln(bound)` over all levels and nodes.
/// Negative means the bound holds with room to spare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub worst_margin_g: f64,
    pub worst_margin_h: f64,
    pub checks: usize,
}

/// Build the table on `grid` and confirm its endpoint values against a
/// second table on the twice-refined grid.
pub fn compute_gen_fun_table(
    config: &BeamConfig,
    grid: &SpatialGrid,
    order: usize,
) -> Result<GenFunTable, GenFunError> {
    let table = GenFunTable::integrate(config, grid, order)?;
    let fine_grid = SpatialGrid::uniform(config.length(), 2 * grid.intervals())?;
    let fine = GenFunTable::integrate(config, &fine_grid, order)?;
    check_refinement(&table, &fine)?;
    Ok(table)
}

fn check_refinement(coarse: &GenFunTable, fine: &GenFunTable) -> Result<(), GenFunError> {
    const NAMES: [&str; 4] = ["value", "slope", "value", "slope"];
    for k in 0..=coarse.order {
        let (a, b) = (coarse.endpoints[k], fine.endpoints[k]);
        for q in 0..4 {
            if a[q] == b[q] {
                continue;
            }
            let rel = (a[q] - b[q]).abs() / b[q].abs();
            if !(rel <= REFINEMENT_TOLERANCE) {
                return Err(GenFunError::GridTooCoarse {
                    family: if q < 2 { Family::G } else { Family::H },
                    level: k,
                    quantity: NAMES[q],
                    rel,
                });
            }
        }
    }
    Ok(())
}

impl GenFunTable {
    /// Integrate both families on `grid` without the refinement check.
    pub fn integrate(
        config: &BeamConfig,
        grid: &SpatialGrid,
        order: usize,
    ) -> Result<Self, GenFunError> {
        Self::integrate_with_substeps(config, grid, order, DEFAULT_SUBSTEPS)
    }

    /// As [`GenFunTable::integrate`] with `substeps` RK4 steps per interval.
    pub fn integrate_with_substeps(
        config: &BeamConfig,
        grid: &SpatialGrid,
        order: usize,
        substeps: usize,
    ) -> Result<Self, GenFunError> {
        if order == 0 {
            return Err(GenFunError::ZeroOrder);
        }
        let length = config.length();
        if (grid.length() - length).abs() > 1e-12 * length {
            return Err(GenFunError::GridMismatch {
                grid: grid.length(),
                beam: length,
            });
        }
        let (g, h) = rayon::join(
            || integrate_family(config, grid, order, substeps.max(1), Family::G),
            || integrate_family(config, grid, order, substeps.max(1), Family::H),
        );
        let (g, h) = (g?, h?);
        let last = grid.intervals();
        let endpoints = (0..=order)
            .map(|k| {
                [
                    g[k].derivs[0][last],
                    g[k].derivs[1][last],
                    h[k].derivs[0][last],
                    h[k].derivs[1][last],
                ]
            })
            .collect();
        let rho_max = config.rho_max();
        let ei_min = config.ei_min();
        let r1 = (rho_max + config.tip_mass()) / ei_min * length.max(1.0);
        let r2 = (rho_max + config.tip_inertia()) / ei_min * length.powi(3).max(1.0);
        Ok(Self {
            order,
            grid: grid.clone(),
            g,
            h,
            endpoints,
            r1,
            r2,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn family(&self, family: Family) -> &[SampledFunction] {
        match family {
            Family::G => &self.g,
            Family::H => &self.h,
        }
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn endpoints(&self) -> &[EndpointRow] {
        &self.endpoints
    }

    pub fn endpoint_row(&self, k: usize) -> Result<EndpointRow, GenFunError> {
        self.endpoints
            .get(k)
            .copied()
            .ok_or(GenFunError::IndexOutOfRange {
                index: k,
                order: self.order,
            })
    }

    /// Value and derivatives 0..=4 of level `k` at an arbitrary `x`.
    ///
    /// Level 0 is returned in closed form.
    /// Grid nodes (to within 1e-9 of a spacing) return the stored samples
    /// exactly. Between nodes the value and slope come from the quintic
    /// Hermite interpolant of `(u, u', u'')` and derivatives two to four from
    /// the one of `(u'', u''', u'''')`.
    pub fn eval(&self, family: Family, k: usize, x: f64) -> [f64; 5] {
        if k == 0 {
            return match family {
                Family::G => [1.0, 0.0, 0.0, 0.0, 0.0],
                Family::H => [x, 1.0, 0.0, 0.0, 0.0],
            };
        }
        let f = &self.family(family)[k];
        let h = self.grid.spacing();
        let last = self.grid.intervals();
        let s = (x / h).clamp(0.0, last as f64);
        let node = |j: usize| std::array::from_fn::<f64, 5, _>(|d| f.derivs[d][j]);
        // snap points that sit on a node up to rounding in x / h
        let nearest = s.round();
        if (s - nearest).abs() <= 1e-9 {
            return node(nearest as usize);
        }
        let i = s.floor() as usize;
        let (a, b) = (node(i), node(i + 1));
        let tau = s - i as f64;
        let lo = hermite5([a[0], a[1], a[2]], [b[0], b[1], b[2]], h, tau);
        let hi = hermite5([a[2], a[3], a[4]], [b[2], b[3], b[4]], h, tau);
        [lo[0], lo[1], hi[0], hi[1], hi[2]]
    }

    /// Decay bounds `|g_k| ≤ R₁^k x^{4k-1}/(4k-1)!`, `|g_k,x| ≤ R₁^k x^{4k-2}/(4k-2)!`,
    /// `|h_k| ≤ R₂^k x^{4k-2}/(4k-2)!`, `|h_k,x| ≤ R₂^k x^{4k-3}/(4k-3)!` at every node.
    pub fn verify_decay_bounds(&self) -> Result<BoundReport, GenFunError> {
        let allowance = BOUND_ALLOWANCE.ln_1p();
        let mut report = BoundReport {
            worst_margin_g: f64::NEG_INFINITY,
            worst_margin_h: f64::NEG_INFINITY,
            checks: 0,
        };
        let checks: [(Family, usize, usize, &'static str); 4] = [
            (Family::G, 0, 1, "value"),
            (Family::G, 1, 2, "slope"),
            (Family::H, 0, 2, "value"),
            (Family::H, 1, 3, "slope"),
        ];
        for (family, deriv, shift, which) in checks {
            let ln_r = match family {
                Family::G => self.r1.ln(),
                Family::H => self.r2.ln(),
            };
            for k in 1..=self.order {
                let power = 4 * k - shift;
                let ln_bound_base = k as f64 * ln_r - ln_factorial(power);
                let samples = &self.family(family)[k].derivs[deriv];
                for (&x, &v) in self.grid.nodes().iter().zip(samples) {
                    report.checks += 1;
                    if v == 0.0 {
                        continue;
                    }
                    let margin = v.abs().ln() - (ln_bound_base + power as f64 * x.ln());
                    let worst = match family {
                        Family::G => &mut report.worst_margin_g,
                        Family::H => &mut report.worst_margin_h,
                    };
                    *worst = worst.max(margin);
                    if margin > allowance || margin.is_nan() {
                        return Err(GenFunError::BoundViolation {
                            family,
                            level: k,
                            x,
                            which,
                            margin,
                        });
                    }
                }
            }
        }
        Ok(report)
    }

    pub fn export(&self) -> GenFunExport {
        let log = |v: f64| [v.signum() * (v != 0.0) as u8 as f64, v.abs().ln()];
        GenFunExport {
            order: self.order,
            grid: GridSummary {
                length: self.grid.length(),
                intervals: self.grid.intervals(),
                spacing: self.grid.spacing(),
            },
            endpoints: self.endpoints.clone(),
            log_endpoints: self.endpoints.iter().map(|row| row.map(log)).collect(),
            r1: self.r1,
            r2: self.r2,
        }
    }

    /// Full sampled table as CSV: `x, g0, g0_x, …, g0_xxxx, …, hN_xxxx`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        const SUFFIX: [&str; 5] = ["", "_x", "_xx", "_xxx", "_xxxx"];
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string()];
        for fam in ["g", "h"] {
            for k in 0..=self.order {
                for s in SUFFIX {
                    header.push(format!("{fam}{k}{s}"));
                }
            }
        }
        w.write_record(&header)?;
        for (j, x) in self.grid.nodes().iter().enumerate() {
            let mut row = vec![x.to_string()];
            for fam in [&self.g, &self.h] {
                for f in fam.iter() {
                    row.extend(f.derivs.iter().map(|d| d[j].to_string()));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Perturb one stored sample; used to exercise the bound checker.
    #[doc(hidden)]
    pub fn perturb(&mut self, family: Family, level: usize, deriv: usize, delta: f64) {
        let f = match family {
            Family::G => &mut self.g[level],
            Family::H => &mut self.h[level],
        };
        for v in f.derivs[deriv].iter_mut() {
            *v += delta;
        }
    }
}

/// Quintic Hermite interpolation on `[0, h]` at `tau ∈ [0, 1]`; returns the
/// value and its first two derivatives with respect to `x`.
fn hermite5(a: [f64; 3], b: [f64; 3], h: f64, tau: f64) -> [f64; 3] {
    let t = tau;
    let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
    let h00 = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        -60.0 * t + 180.0 * t2 - 120.0 * t3,
    ];
    let h10 = [
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        -36.0 * t + 96.0 * t2 - 60.0 * t3,
    ];
    let h20 = [
        0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
        0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
        0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
    ];
    let h01 = [
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        60.0 * t - 180.0 * t2 + 120.0 * t3,
    ];
    let h11 = [
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        -24.0 * t + 84.0 * t2 - 60.0 * t3,
    ];
    let h21 = [
        0.5 * (t3 - 2.0 * t4 + t5),
        0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
    ];
    let scale = [1.0, 1.0 / h, 1.0 / (h * h)];
    std::array::from_fn(|d| {
        scale[d]
            * (a[0] * h00[d]
                + h * a[1] * h10[d]
                + h * h * a[2] * h20[d]
                + b[0] * h01[d]
                + h * b[1] * h11[d]
                + h * h * b[2] * h21[d])
    })
}

/// Per-level state `(u, u_x, EI u_xx, (EI u_xx)_x)`.
type LevelState = [f64; 4];

fn integrate_family(
    config: &BeamConfig,
    grid: &SpatialGrid,
    order: usize,
    substeps: usize,
    family: Family,
) -> Result<Vec<SampledFunction>, GenFunError> {
    let nodes = grid.nodes();
    let n = nodes.len();
    let steps = grid.intervals() * substeps;
    let h = grid.length() / steps as f64;
    let base = |x: f64| match family {
        Family::G => 1.0,
        Family::H => x,
    };

    let mut state: Vec<LevelState> = vec![[0.0; 4]; order];
    match family {
        Family::G => state[0][3] = -config.tip_mass(),
        Family::H => state[0][2] = config.tip_inertia(),
    }

    let mut out: Vec<SampledFunction> = (0..=order).map(|_| SampledFunction::zeros(n)).collect();
    for (j, &x) in nodes.iter().enumerate() {
        out[0].derivs[0][j] = base(x);
        if family == Family::H {
            out[0].derivs[1][j] = 1.0;
        }
    }

    let rhs = |x: f64, s: &[LevelState], ds: &mut [LevelState]| {
        let ei = config.ei().value(x);
        let rho = config.rho().value(x);
        for k in 0..s.len() {
            let prev = if k == 0 { base(x) } else { s[k - 1][0] };
            ds[k] = [s[k][1], s[k][2] / ei, s[k][3], -rho * prev];
        }
    };

    let mut k1 = vec![[0.0; 4]; order];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    record(config, &mut out, &state, 0, nodes[0], family);
    for step in 0..steps {
        let x = grid.length() * (step as f64 / steps as f64);
        let xm = x + 0.5 * h;
        let xe = if (step + 1) % substeps == 0 {
            nodes[(step + 1) / substeps]
        } else {
            grid.length() * ((step + 1) as f64 / steps as f64)
        };
        rhs(x, &state, &mut k1);
        axpy(&mut tmp, &state, 0.5 * h, &k1);
        rhs(xm, &tmp, &mut k2);
        axpy(&mut tmp, &state, 0.5 * h, &k2);
        rhs(xm, &tmp, &mut k3);
        axpy(&mut tmp, &state, h, &k3);
        rhs(xe, &tmp, &mut k4);
        for k in 0..order {
            for c in 0..4 {
                state[k][c] += h / 6.0 * (k1[k][c] + 2.0 * k2[k][c] + 2.0 * k3[k][c] + k4[k][c]);
            }
            if state[k].iter().any(|v| !v.is_finite()) {
                return Err(GenFunError::SolverDivergence {
                    family,
                    level: k + 1,
                });
            }
        }
        if (step + 1) % substeps == 0 {
            record(config, &mut out, &state, (step + 1) / substeps, xe, family);
        }
    }
    Ok(out)
}

fn axpy(out: &mut [LevelState], s: &[LevelState], a: f64, d: &[LevelState]) {
    for ((o, s), d) in out.iter_mut().zip(s).zip(d) {
        *o = std::array::from_fn(|c| s[c] + a * d[c]);
    }
}

/// Store the state at node `j` and recover the third and fourth derivatives
/// from `(EI u'')' = S` and `(EI u'')'' = -ρ u_prev`.
fn record(
    config: &BeamConfig,
    out: &mut [SampledFunction],
    state: &[LevelState],
    j: usize,
    x: f64,
    family: Family,
) {
    let [ei, ei1, ei2] = config.ei().eval3(x);
    let rho = config.rho().value(x);
    for k in 1..out.len() {
        let [u, ux, moment, shear] = state[k - 1];
        let uxx = moment / ei;
        let uxxx = (shear - ei1 * uxx) / ei;
        let prev = if k == 1 {
            match family {
                Family::G => 1.0,
                Family::H => x,
            }
        } else {
            state[k - 2][0]
        };
        let uxxxx = (-rho * prev - 2.0 * ei1 * uxxx - ei2 * uxx) / ei;
        let d = &mut out[k].derivs;
        d[0][j] = u;
        d[1][j] = ux;
        d[2][j] = uxx;
        d[3][j] = uxxx;
        d[4][j] = uxxxx;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::CoefficientSpec;

    fn uniform_beam(rho: f64, ei: f64, m: f64, j: f64) -> BeamConfig {
        BeamConfig::new(
            0.5,
            m,
            j,
            &CoefficientSpec::Affine { a: rho, b: 0.0 },
            &CoefficientSpec::Affine { a: ei, b: 0.0 },
        )
        .unwrap()
    }

    fn lab_table(order: usize) -> GenFunTable {
        let cfg = BeamConfig::laboratory();
        let grid = SpatialGrid::uniform(0.5, DEFAULT_INTERVALS).unwrap();
        compute_gen_fun_table(&cfg, &grid, order).unwrap()
    }

    #[test]
    fn level_zero_is_exact() {
        let t = lab_table(3);
        let nodes = t.grid().nodes();
        for (j, &x) in nodes.iter().enumerate() {
            assert_eq!(t.family(Family::G)[0].values()[j], 1.0);
            assert_eq!(t.family(Family::H)[0].values()[j], x);
            assert_eq!(t.family(Family::H)[0].slopes()[j], 1.0);
        }
        assert_eq!(t.endpoint_row(0).unwrap(), [1.0, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn initial_conditions_imposed() {
        let t = lab_table(6);
        for fam in [Family::G, Family::H] {
            for k in 1..=6 {
                let f = &t.family(fam)[k];
                assert_eq!(f.values()[0], 0.0);
                assert_eq!(f.slopes()[0], 0.0);
            }
        }
        let ei0 = 0.297;
        assert!((t.family(Family::H)[1].derivs[2][0] - 1.9e-4 / ei0).abs() < 1e-15);
        // (EI g₁,xx)_x(0) = -m with g₁,xx(0) = 0
        assert!((t.family(Family::G)[1].derivs[3][0] * ei0 + 0.402).abs() < 1e-14);
    }

    #[test]
    fn uniform_beam_matches_closed_form() {
        let (rho, ei, m, j) = (0.2, 0.5, 0.3, 2e-3);
        let cfg = uniform_beam(rho, ei, m, j);
        let grid = SpatialGrid::uniform(0.5, 64).unwrap();
        let t = GenFunTable::integrate(&cfg, &grid, 2).unwrap();
        for (idx, &x) in grid.nodes().iter().enumerate() {
            let g1 = -rho * x.powi(4) / (24.0 * ei) - m * x.powi(3) / (6.0 * ei);
            let h1 = -rho * x.powi(5) / (120.0 * ei) + j * x * x / (2.0 * ei);
            assert!((t.family(Family::G)[1].values()[idx] - g1).abs() <= 1e-13);
            assert!(
                (t.family(Family::H)[1].values()[idx] - h1).abs() <= 1e-12 * h1.abs().max(1e-6)
            );
        }
    }

    #[test]
    fn endpoint_row_bounds() {
        let t = lab_table(4);
        assert!(matches!(
            t.endpoint_row(5),
            Err(GenFunError::IndexOutOfRange { index: 5, order: 4 })
        ));
    }

    #[test]
    fn laboratory_decay_constants() {
        let t = lab_table(2);
        assert!((t.r1() - (0.275 + 0.402) / 0.297).abs() < 1e-12);
        assert!((t.r2() - (0.275 + 1.9e-4) / 0.297).abs() < 1e-12);
    }

    #[test]
    fn alternating_signs() {
        let t = lab_table(3);
        let g = t.family(Family::G);
        for j in 1..t.grid().nodes().len() {
            assert!(g[1].values()[j] < 0.0);
            assert!(g[1].values()[j] * g[2].values()[j] < 0.0);
        }
    }

    #[test]
    fn recursion_residual_small() {
        let cfg = BeamConfig::laboratory();
        let t = lab_table(4);
        let dx = t.grid().spacing();
        let nodes = t.grid().nodes();
        for fam in [Family::G, Family::H] {
            let levels = t.family(fam);
            for k in 1..=4 {
                let moment: Vec<f64> = nodes
                    .iter()
                    .zip(&levels[k].derivs[2])
                    .map(|(&x, &uxx)| cfg.ei().value(x) * uxx)
                    .collect();
                let mut worst: f64 = 0.0;
                let mut scale: f64 = 0.0;
                for j in 1..nodes.len() - 1 {
                    let d2 = (moment[j + 1] - 2.0 * moment[j] + moment[j - 1]) / (dx * dx);
                    let target = -cfg.rho().value(nodes[j]) * levels[k - 1].values()[j];
                    worst = worst.max((d2 - target).abs());
                    scale = scale.max(target.abs());
                }
                // O(dx²) truncation of the centered second difference
                assert!(
                    worst <= 100.0 * dx * dx * scale,
                    "{fam}{k}: {worst} vs {scale}"
                );
            }
        }
    }

    #[test]
    fn decay_bounds_hold_and_catch_faults() {
        let mut t = lab_table(20);
        let report = t.verify_decay_bounds().unwrap();
        assert!(report.worst_margin_g < 0.0 && report.worst_margin_h < 0.0);
        t.perturb(Family::G, 1, 0, 1.0);
        assert!(matches!(
            t.verify_decay_bounds(),
            Err(GenFunError::BoundViolation {
                family: Family::G,
                level: 1,
                ..
            })
        ));
    }

    #[test]
    fn interpolation_hits_nodes_and_tracks_polynomials() {
        let (rho, ei, m, j) = (0.2, 0.5, 0.3, 2e-3);
        let cfg = uniform_beam(rho, ei, m, j);
        let grid = SpatialGrid::uniform(0.5, 64).unwrap();
        let t = GenFunTable::integrate(&cfg, &grid, 1).unwrap();
        let x = 0.5 * 37.3 / 64.0;
        let e = t.eval(Family::G, 1, x);
        let exact = [
            -rho * x.powi(4) / (24.0 * ei) - m * x.powi(3) / (6.0 * ei),
            -rho * x.powi(3) / (6.0 * ei) - m * x * x / (2.0 * ei),
            -rho * x * x / (2.0 * ei) - m * x / ei,
            -rho * x / ei - m / ei,
            -rho / ei,
        ];
        for d in 0..5 {
            let tol = if d < 3 { 1e-11 } else { 1e-9 };
            assert!(
                (e[d] - exact[d]).abs() < tol,
                "d{d}: {} vs {}",
                e[d],
                exact[d]
            );
        }
        let node = t.eval(Family::G, 1, 0.5);
        assert_eq!(node[1], t.endpoint_row(1).unwrap()[1]);
    }

    #[test]
    fn export_has_one_row_per_level() {
        let t = lab_table(20);
        let ex = t.export();
        assert_eq!(ex.endpoints.len(), 21);
        let json = serde_json::to_value(&ex).unwrap();
        assert!(json.get("R1").is_some() && json.get("N").is_some());
        let mut buf = Vec::new();
        lab_table(2).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), DEFAULT_INTERVALS + 2);
        assert!(text.starts_with("x,g0,g0_x,"));
    }
}
