//! Flat parametrization of the beam: outputs `y₁ = L₂p`, `y₂ = −L₁p`, the
//! field `w = Σ g_k y₁⁽²ᵏ⁾ + h_k y₂⁽²ᵏ⁾` and the clamp input `f = w(L, ·)`.
//!
//! All series are truncated by total order: a product of level `k` and
//! level `j` coefficients is kept when `k + j ≤ N`. Combining the two
//! operators first gives one coefficient function per order `l`,
//!
//! `A_l(x) = Σ_{k+j=l} g_k(x)·h_{j,x}(L) − h_k(x)·g_{j,x}(L)`,
//!
//! and `w(x, t) = Σ_{l≤N} A_l(x)·p⁽²ˡ⁾(t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{BeamConfig, SpatialGrid};
use crate::genfun::{Family, GenFunTable};
use crate::gevrey::{p_jet, GevreyError, TrajectorySpec};
use crate::jet::Jet;
use crate::numeric::{ln_factorial, pair_term};

/// Default number of time samples on `[0, T]`.
pub const DEFAULT_TIME_SAMPLES: usize = 601;

/// Extra orders summed by [`tail_bound`].
pub const TAIL_TERMS: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("series order must be at least 1")]
    ZeroOrder,
    #[error("jet of order {have} is too short, need {need}")]
    JetTooShort { have: usize, need: usize },
    #[error("generating-function table has order {have}, need {need}")]
    TableTooShort { have: usize, need: usize },
    #[error("time grid: {0}")]
    BadTimeGrid(String),
    #[error("field grid spans [0, {grid}] but the table spans [0, {table}]")]
    GridMismatch { grid: f64, table: f64 },
    #[error("trajectory was synthesized without second time derivatives")]
    MissingDerivatives,
    #[error(transparent)]
    Gevrey(#[from] GevreyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub order: usize,
    pub jet_order: usize,
    pub times: Vec<f64>,
    pub field_grid: SpatialGrid,
    /// Use `+` between the two endpoint products of the input series.
    pub sign_flip: bool,
    /// Also tabulate `w_tt` and the bending terms needed by [`residuals`].
    pub extended: bool,
}

impl SynthesisParams {
    /// `order` with the default jet order `2N + 4` on the given grids.
    pub fn new(order: usize, times: Vec<f64>, field_grid: SpatialGrid) -> Self {
        Self {
            order,
            jet_order: 2 * order + 4,
            times,
            field_grid,
            sign_flip: false,
            extended: false,
        }
    }

    fn validate(&self, table: &GenFunTable) -> Result<(), SynthesisError> {
        if self.order == 0 {
            return Err(SynthesisError::ZeroOrder);
        }
        if table.order() < self.order {
            return Err(SynthesisError::TableTooShort {
                have: table.order(),
                need: self.order,
            });
        }
        let need = 2 * self.order + 2;
        if self.jet_order < need {
            return Err(SynthesisError::JetTooShort {
                have: self.jet_order,
                need,
            });
        }
        let (a, b) = (self.field_grid.length(), table.grid().length());
        if (a - b).abs() > 1e-12 * b {
            return Err(SynthesisError::GridMismatch { grid: a, table: b });
        }
        if self.times.is_empty() {
            return Err(SynthesisError::BadTimeGrid("no samples".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SynthesisError::BadTimeGrid("times must increase".into()));
        }
        Ok(())
    }

    fn validate_horizon(&self, horizon: f64) -> Result<(), SynthesisError> {
        let (first, last) = (self.times[0], self.times[self.times.len() - 1]);
        if first != 0.0 || last != horizon {
            return Err(SynthesisError::BadTimeGrid(format!(
                "samples must run from 0 to {horizon}, got [{first}, {last}]"
            )));
        }
        Ok(())
    }
}

/// `n` uniform samples on `[0, T]` with both ends hit exactly.
pub fn uniform_times(horizon: f64, samples: usize) -> Vec<f64> {
    let last = samples.max(2) - 1;
    (0..=last)
        .map(|i| {
            if i == last {
                horizon
            } else {
                horizon * (i as f64 / last as f64)
            }
        })
        .collect()
}

/// Beam state `[w(·,t), w_t(·,t), w_t(0,t), w_xt(0,t)]` on the field grid,
/// plus the tip slope `w_x(0,t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub tip_slope: f64,
}

impl BeamState {
    /// The rest state `[c, 0, 0, 0]`.
    pub fn steady(value: f64, nodes: usize) -> Self {
        Self {
            u: vec![value; nodes],
            v: vec![0.0; nodes],
            alpha: 0.0,
            beta: 0.0,
            tip_slope: 0.0,
        }
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &BeamState) -> f64 {
        let field = self
            .u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        field
            .max((self.alpha - other.alpha).abs())
            .max((self.beta - other.beta).abs())
            .max((self.tip_slope - other.tip_slope).abs())
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Clamp input and its first two derivatives at the sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSamples {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub f_t: Vec<f64>,
    pub f_tt: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InputRow {
    t: f64,
    f: f64,
    f_t: f64,
    f_tt: f64,
}

impl InputSamples {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.t.len() {
            w.serialize(InputRow {
                t: self.t[i],
                f: self.f[i],
                f_t: self.f_t[i],
                f_tt: self.f_tt[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self, csv::Error> {
        let mut out = InputSamples {
            t: vec![],
            f: vec![],
            f_t: vec![],
            f_tt: vec![],
        };
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: InputRow = row?;
            out.t.push(row.t);
            out.f.push(row.f);
            out.f_t.push(row.f_t);
            out.f_tt.push(row.f_tt);
        }
        Ok(out)
    }
}

/// Second-derivative and bending tables used by [`residuals`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedTables {
    pub w_tt: Vec<Vec<f64>>,
    /// `(EI w_xx)_xx` on the field grid.
    pub bending: Vec<Vec<f64>>,
    /// `(EI w_xx)_x(0, t)`
    pub tip_shear: Vec<f64>,
    /// `EI(0)·w_xx(0, t)`
    pub tip_moment: Vec<f64>,
    /// `w_xtt(0, t)`
    pub tip_angular_acc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTrajectory {
    pub params: SynthesisParams,
    pub input: InputSamples,
    pub states: Vec<BeamState>,
    /// `y₁⁽²ᵏ⁾(t_i)` for `k ≤ N`, one row per sample.
    pub y1: Vec<Vec<f64>>,
    pub y2: Vec<Vec<f64>>,
    /// `w_x(L, t_i)`
    pub clamp_slope: Vec<f64>,
    pub extended: Option<ExtendedTables>,
}

impl FlatTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.params.times
    }

    pub fn nodes(&self) -> &[f64] {
        self.params.field_grid.nodes()
    }

    pub fn tip_displacement(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.u[0]).collect()
    }

    /// `t, x, w, w_t` rows.
    pub fn write_field_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "w", "w_t"])?;
        for (t, state) in self.times().iter().zip(&self.states) {
            for (j, x) in self.nodes().iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    x.to_string(),
                    state.u[j].to_string(),
                    state.v[j].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Combined coefficient functions `A_l` sampled on a field grid.
#[derive(Debug, Clone)]
pub struct SeriesCoefficients {
    order: usize,
    nodes: Vec<f64>,
    /// `field[l][d][j] = A_l⁽ᵈ⁾(x_j)`, `d ≤ 4`
    field: Vec<[Vec<f64>; 5]>,
    /// `(EI A_l'')''` at the nodes
    bending: Vec<Vec<f64>>,
    /// `(EI A_l'')'(0)` and `EI(0)·A_l''(0)`
    tip: Vec<[f64; 2]>,
    input: Vec<f64>,
    input_flipped: Vec<f64>,
}

impl SeriesCoefficients {
    pub fn new(
        table: &GenFunTable,
        config: &BeamConfig,
        grid: &SpatialGrid,
        order: usize,
    ) -> Result<Self, SynthesisError> {
        if order == 0 {
            return Err(SynthesisError::ZeroOrder);
        }
        if table.order() < order {
            return Err(SynthesisError::TableTooShort {
                have: table.order(),
                need: order,
            });
        }
        let (a, b) = (grid.length(), table.grid().length());
        if (a - b).abs() > 1e-12 * b {
            return Err(SynthesisError::GridMismatch { grid: a, table: b });
        }
        let ends = table.endpoints();
        let gx: Vec<f64> = ends.iter().map(|r| r[1]).collect();
        let hx: Vec<f64> = ends.iter().map(|r| r[3]).collect();
        let nodes = grid.nodes().to_vec();
        let sample = |family: Family| -> Vec<Vec<[f64; 5]>> {
            (0..=order)
                .map(|k| nodes.iter().map(|&x| table.eval(family, k, x)).collect())
                .collect()
        };
        let (g, h) = (sample(Family::G), sample(Family::H));

        let mut field = Vec::with_capacity(order + 1);
        for l in 0..=order {
            let a: [Vec<f64>; 5] = std::array::from_fn(|d| {
                (0..nodes.len())
                    .map(|j| {
                        // The second sum runs in reverse so that at x = L its
                        // products match the first sum term by term.
                        let first: f64 = (0..=l).map(|k| g[k][j][d] * hx[l - k]).sum();
                        let second: f64 = (0..=l).map(|k| h[l - k][j][d] * gx[k]).sum();
                        first - second
                    })
                    .collect()
            });
            field.push(a);
        }

        let coef: Vec<[f64; 3]> = nodes.iter().map(|&x| config.ei().eval3(x)).collect();
        let bending = field
            .iter()
            .map(|a| {
                (0..nodes.len())
                    .map(|j| {
                        let [e, e1, e2] = coef[j];
                        e * a[4][j] + 2.0 * e1 * a[3][j] + e2 * a[2][j]
                    })
                    .collect()
            })
            .collect();
        let tip = field
            .iter()
            .map(|a| {
                let [e, e1, _] = coef[0];
                [e1 * a[2][0] + e * a[3][0], e * a[2][0]]
            })
            .collect();

        let input = (0..=order)
            .map(|l| {
                let first: f64 = (0..=l).map(|k| ends[k][0] * hx[l - k]).sum();
                let second: f64 = (0..=l).map(|k| ends[l - k][2] * gx[k]).sum();
                first - second
            })
            .collect();
        let input_flipped = (0..=order)
            .map(|l| {
                let first: f64 = (0..=l).map(|k| ends[k][0] * hx[l - k]).sum();
                let second: f64 = (0..=l).map(|k| ends[l - k][2] * gx[k]).sum();
                first + second
            })
            .collect();

        Ok(Self {
            order,
            nodes,
            field,
            bending,
            tip,
            input,
            input_flipped,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `A_l⁽ᵈ⁾` on the nodes.
    pub fn field(&self, l: usize, d: usize) -> &[f64] {
        &self.field[l][d]
    }

    /// Input-series coefficient of `p⁽²ˡ⁾`.
    pub fn input_coefficient(&self, l: usize, sign_flip: bool) -> f64 {
        if sign_flip {
            self.input_flipped[l]
        } else {
            self.input[l]
        }
    }
}

/// `Σ_l coef_l · p⁽²ˡ⁺ⁿ⁾`
fn series(coefs: impl Iterator<Item = f64>, p: &Jet, shift: usize) -> f64 {
    coefs
        .enumerate()
        .map(|(l, a)| pair_term(a, 2 * l + shift, p.coeffs()[2 * l + shift]))
        .sum()
}

struct Sample {
    f: [f64; 3],
    state: BeamState,
    y1: Vec<f64>,
    y2: Vec<f64>,
    clamp_slope: f64,
    extended: Option<(Vec<f64>, Vec<f64>, f64, f64, f64)>,
}

fn sample_at(
    coefs: &SeriesCoefficients,
    table: &GenFunTable,
    params: &SynthesisParams,
    p: &Jet,
) -> Result<Sample, SynthesisError> {
    let n = coefs.order;
    let need = 2 * n + 2;
    if p.order() < need {
        return Err(SynthesisError::JetTooShort {
            have: p.order(),
            need,
        });
    }
    let nodes = coefs.nodes.len();
    let field_at =
        |d: usize, j: usize, shift: usize| series((0..=n).map(|l| coefs.field[l][d][j]), p, shift);
    let u: Vec<f64> = (0..nodes).map(|j| field_at(0, j, 0)).collect();
    let v: Vec<f64> = (0..nodes).map(|j| field_at(0, j, 1)).collect();
    let input = |shift| {
        series(
            (0..=n).map(|l| coefs.input_coefficient(l, params.sign_flip)),
            p,
            shift,
        )
    };
    let state = BeamState {
        alpha: v[0],
        beta: field_at(1, 0, 1),
        tip_slope: field_at(1, 0, 0),
        u,
        v,
    };
    let (y1, y2) = flat_outputs_from_p(table, p, n, 0)?;
    let extended = if params.extended {
        let w_tt = (0..nodes).map(|j| field_at(0, j, 2)).collect();
        let bending = (0..nodes)
            .map(|j| series((0..=n).map(|l| coefs.bending[l][j]), p, 0))
            .collect();
        let shear = series((0..=n).map(|l| coefs.tip[l][0]), p, 0);
        let moment = series((0..=n).map(|l| coefs.tip[l][1]), p, 0);
        let angular = field_at(1, 0, 2);
        Some((w_tt, bending, shear, moment, angular))
    } else {
        None
    };
    Ok(Sample {
        f: [input(0), input(1), input(2)],
        clamp_slope: field_at(1, nodes - 1, 0),
        state,
        y1,
        y2,
        extended,
    })
}

/// `(y₁⁽²ᵏ⁺ⁿ⁾, y₂⁽²ᵏ⁺ⁿ⁾)` for `k ≤ N`, with `y₁ = L₂p`, `y₂ = −L₁p`
/// truncated by total order (`y⁽²ᵏ⁾` keeps levels `j ≤ N − k`).
pub fn flat_outputs_from_p(
    table: &GenFunTable,
    p: &Jet,
    order: usize,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>), SynthesisError> {
    if table.order() < order {
        return Err(SynthesisError::TableTooShort {
            have: table.order(),
            need: order,
        });
    }
    let need = 2 * order + n;
    if p.order() < need {
        return Err(SynthesisError::JetTooShort {
            have: p.order(),
            need,
        });
    }
    let ends = table.endpoints();
    let c = p.coeffs();
    let mut y1 = Vec::with_capacity(order + 1);
    let mut y2 = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut a = 0.0;
        let mut b = 0.0;
        for j in 0..=order - k {
            let m = 2 * (j + k) + n;
            a += pair_term(ends[j][3], m, c[m]);
            b -= pair_term(ends[j][1], m, c[m]);
        }
        y1.push(a);
        y2.push(b);
    }
    Ok((y1, y2))
}

/// Synthesize input, field and states from any jet source `p(t)`.
pub fn synthesize_with<F>(
    table: &GenFunTable,
    config: &BeamConfig,
    params: &SynthesisParams,
    p: F,
) -> Result<FlatTrajectory, SynthesisError>
where
    F: Fn(f64) -> Result<Jet, SynthesisError> + Sync,
{
    params.validate(table)?;
    let coefs = SeriesCoefficients::new(table, config, &params.field_grid, params.order)?;
    let samples: Vec<Sample> = params
        .times
        .par_iter()
        .map(|&t| sample_at(&coefs, table, params, &p(t)?))
        .collect::<Result<_, _>>()?;

    let mut input = InputSamples {
        t: params.times.clone(),
        f: Vec::with_capacity(samples.len()),
        f_t: Vec::with_capacity(samples.len()),
        f_tt: Vec::with_capacity(samples.len()),
    };
    let mut extended = params.extended.then(|| ExtendedTables {
        w_tt: vec![],
        bending: vec![],
        tip_shear: vec![],
        tip_moment: vec![],
        tip_angular_acc: vec![],
    });
    let mut states = Vec::with_capacity(samples.len());
    let (mut y1, mut y2, mut clamp_slope) = (vec![], vec![], vec![]);
    for s in samples {
        input.f.push(s.f[0]);
        input.f_t.push(s.f[1]);
        input.f_tt.push(s.f[2]);
        states.push(s.state);
        y1.push(s.y1);
        y2.push(s.y2);
        clamp_slope.push(s.clamp_slope);
        if let (Some(ext), Some((w_tt, bending, shear, moment, angular))) =
            (extended.as_mut(), s.extended)
        {
            ext.w_tt.push(w_tt);
            ext.bending.push(bending);
            ext.tip_shear.push(shear);
            ext.tip_moment.push(moment);
            ext.tip_angular_acc.push(angular);
        }
    }
    Ok(FlatTrajectory {
        params: params.clone(),
        input,
        states,
        y1,
        y2,
        clamp_slope,
        extended,
    })
}

/// Field, input and states for the interpolated flat parameter of `spec`.
pub fn synthesize_field(
    table: &GenFunTable,
    config: &BeamConfig,
    spec: &TrajectorySpec,
    params: &SynthesisParams,
) -> Result<FlatTrajectory, SynthesisError> {
    params.validate(table)?;
    params.validate_horizon(spec.horizon())?;
    synthesize_with(table, config, params, |t| {
        Ok(p_jet(t, spec, params.jet_order)?)
    })
}

/// Input samples only.
pub fn synthesize_input(
    table: &GenFunTable,
    spec: &TrajectorySpec,
    params: &SynthesisParams,
) -> Result<InputSamples, SynthesisError> {
    params.validate(table)?;
    params.validate_horizon(spec.horizon())?;
    let n = params.order;
    let ends = table.endpoints();
    let gx: Vec<f64> = ends.iter().map(|r| r[1]).collect();
    let hx: Vec<f64> = ends.iter().map(|r| r[3]).collect();
    let coef: Vec<f64> = (0..=n)
        .map(|l| {
            let first: f64 = (0..=l).map(|k| ends[k][0] * hx[l - k]).sum();
            let second: f64 = (0..=l).map(|k| ends[l - k][2] * gx[k]).sum();
            if params.sign_flip {
                first + second
            } else {
                first - second
            }
        })
        .collect();
    let rows: Vec<[f64; 3]> = params
        .times
        .par_iter()
        .map(|&t| {
            let p = p_jet(t, spec, params.jet_order)?;
            Ok(std::array::from_fn(|s| series(coef.iter().copied(), &p, s)))
        })
        .collect::<Result<_, SynthesisError>>()?;
    Ok(InputSamples {
        t: params.times.clone(),
        f: rows.iter().map(|r| r[0]).collect(),
        f_t: rows.iter().map(|r| r[1]).collect(),
        f_tt: rows.iter().map(|r| r[2]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Start,
    End,
}

/// State at `t = 0` from `p₀`, or the target state at `t = T` from `p_T`.
pub fn initial_state_from_p(
    table: &GenFunTable,
    config: &BeamConfig,
    spec: &TrajectorySpec,
    params: &SynthesisParams,
    which: Endpoint,
) -> Result<BeamState, SynthesisError> {
    params.validate(table)?;
    let coefs = SeriesCoefficients::new(table, config, &params.field_grid, params.order)?;
    let p = match which {
        Endpoint::Start => spec.p0().jet(0.0, params.jet_order),
        // p near T is p_T(T − t), whose jet at T is the reversed jet of p_T at 0
        Endpoint::End => spec
            .p_final()
            .jet(0.0, params.jet_order)
            .reversed(spec.horizon()),
    };
    let mut local = params.clone();
    local.extended = false;
    Ok(sample_at(&coefs, table, &local, &p)?.state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    /// Both nestings reduced with the same pairing of terms.
    pub paired_diff: f64,
    /// Outer sum over `g` levels versus outer sum over `h` levels,
    /// each accumulated left to right.
    pub naive_diff: f64,
    /// Largest `Σ|terms|` over the jets.
    pub scale: f64,
}

impl CommutationReport {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.naive_diff
        } else {
            self.naive_diff / self.scale
        }
    }
}

/// Compare `L₁L₂p` and `L₂L₁p` over `k, j ≤ N`.
pub fn check_commutation(
    table: &GenFunTable,
    jets: &[Jet],
    order: usize,
) -> Result<CommutationReport, SynthesisError> {
    if table.order() < order {
        return Err(SynthesisError::TableTooShort {
            have: table.order(),
            need: order,
        });
    }
    let ends = table.endpoints();
    let mut report = CommutationReport {
        paired_diff: 0.0,
        naive_diff: 0.0,
        scale: 0.0,
    };
    for p in jets {
        let need = 4 * order;
        if p.order() < need {
            return Err(SynthesisError::JetTooShort {
                have: p.order(),
                need,
            });
        }
        let c = p.coeffs();
        let term = |a: f64, b: f64, m: usize| pair_term(a * b, m, c[m]);
        let mut l1l2 = 0.0;
        let mut scale = 0.0;
        for k in 0..=order {
            let mut inner = 0.0;
            for j in 0..=order {
                let t = term(ends[k][1], ends[j][3], 2 * (k + j));
                inner += t;
                scale += t.abs();
            }
            l1l2 += inner;
        }
        let mut l2l1 = 0.0;
        for j in 0..=order {
            let mut inner = 0.0;
            for k in 0..=order {
                inner += term(ends[k][1], ends[j][3], 2 * (k + j));
            }
            l2l1 += inner;
        }
        let mut paired = 0.0;
        let mut paired_swapped = 0.0;
        for k in 0..=order {
            for j in 0..=order {
                paired += term(ends[k][1], ends[j][3], 2 * (k + j));
                paired_swapped += term(ends[k][1], ends[j][3], 2 * (j + k));
            }
        }
        report.paired_diff = report.paired_diff.max((paired - paired_swapped).abs());
        report.naive_diff = report.naive_diff.max((l1l2 - l2l1).abs());
        report.scale = report.scale.max(scale);
    }
    Ok(report)
}

/// Sup norms of the model residuals over the sampled times and nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `ρ w_tt + (EI w_xx)_xx`
    pub pde: f64,
    /// `m w_tt(0) + (EI w_xx)_x(0)`
    pub tip_force: f64,
    /// `J w_xtt(0) − EI(0) w_xx(0)`
    pub tip_moment: f64,
    /// `w_x(L)`
    pub clamp_slope: f64,
}

pub fn residuals(
    traj: &FlatTrajectory,
    config: &BeamConfig,
) -> Result<ResidualReport, SynthesisError> {
    let ext = traj
        .extended
        .as_ref()
        .ok_or(SynthesisError::MissingDerivatives)?;
    let rho: Vec<f64> = traj
        .nodes()
        .iter()
        .map(|&x| config.rho().value(x))
        .collect();
    let mut report = ResidualReport {
        pde: 0.0,
        tip_force: 0.0,
        tip_moment: 0.0,
        clamp_slope: 0.0,
    };
    for i in 0..traj.times().len() {
        for j in 0..rho.len() {
            let r = rho[j] * ext.w_tt[i][j] + ext.bending[i][j];
            report.pde = report.pde.max(r.abs());
        }
        let force = config.tip_mass() * ext.w_tt[i][0] + ext.tip_shear[i];
        let moment = config.tip_inertia() * ext.tip_angular_acc[i] - ext.tip_moment[i];
        report.tip_force = report.tip_force.max(force.abs());
        report.tip_moment = report.tip_moment.max(moment.abs());
        report.clamp_slope = report.clamp_slope.max(traj.clamp_slope[i].abs());
    }
    Ok(report)
}

/// Bound on the first `extra` omitted orders of the clamp-slope series,
/// `Σ_{l=N+1}^{N+extra} b_l |p⁽²ˡ⁾(t)|` with `b_l` assembled from the decay
/// bounds on `g_k,x(L)` and `h_k,x(L)`.
pub fn tail_bound(
    table: &GenFunTable,
    p: &Jet,
    order: usize,
    extra: usize,
) -> Result<f64, SynthesisError> {
    let top = order + extra;
    let need = 2 * top;
    if p.order() < need {
        return Err(SynthesisError::JetTooShort {
            have: p.order(),
            need,
        });
    }
    let length = table.grid().length();
    // ln of the bounds on |g_k,x(L)| and |h_k,x(L)|
    let ln_gx = |k: usize| -> Option<f64> {
        (k >= 1).then(|| {
            k as f64 * table.r1().ln() + (4 * k - 2) as f64 * length.ln() - ln_factorial(4 * k - 2)
        })
    };
    let ln_hx = |k: usize| -> f64 {
        if k == 0 {
            0.0
        } else {
            k as f64 * table.r2().ln() + (4 * k - 3) as f64 * length.ln() - ln_factorial(4 * k - 3)
        }
    };
    let mut total = 0.0;
    for l in order + 1..=top {
        let c = p.coeffs()[2 * l];
        if c == 0.0 {
            continue;
        }
        let mut b = 0.0;
        for k in 0..=l {
            if let Some(g) = ln_gx(k) {
                b += 2.0 * (g + ln_hx(l - k) + ln_factorial(2 * l) + c.abs().ln()).exp();
            }
        }
        total += b;
    }
    Ok(total)
}
