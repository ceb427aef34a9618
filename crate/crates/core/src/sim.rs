//! Finite-difference model of the beam with tip body and moving clamp.
//!
//! Unknowns are the tip slope `θ ≈ w_x(0)` followed by the nodal
//! displacements `w_0 … w_{N−1}`; `w_N = f(t)` is imposed. Curvatures
//!
//! - `κ_0 = 2(w_1 − w_0 − Δx·θ)/Δx²`
//! - `κ_j = (w_{j−1} − 2w_j + w_{j+1})/Δx²`
//! - `κ_N = 2(w_{N−1} − w_N)/Δx²` (ghost node `w_{N+1} = w_{N−1}`)
//!
//! enter the strain energy `½ Σ W_j EI_j κ_j²` with trapezoid weights, and
//! the stiffness is its Hessian. Interior rows reduce to `Δx·D₂(EI·D₂w)`,
//! the first row gives `J θ̈ = EI(0)κ_0` and the `w_0` row carries the
//! shear balance with the tip mass. Time stepping is Newmark's average
//! acceleration rule.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::banded::{BandError, SymBand};
use crate::beam::BeamConfig;
use crate::synthesis::{BeamState, FlatTrajectory, InputSamples};

pub const MIN_INTERVALS: usize = 32;
pub const DEFAULT_INTERVALS: usize = 150;
pub const DEFAULT_TIME_STEP: f64 = 1e-4;
/// Allowed mismatch between the initial state and the input at `t = 0`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("simulation grid needs at least {min} intervals, got {got}")]
    GridTooCoarse { min: usize, got: usize },
    #[error("initial state disagrees with the input at t = 0: {0}")]
    IncompatibleInitialData(String),
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grids differ: {0}")]
    GridMismatch(String),
    #[error("cannot read field: {0}")]
    Parse(String),
    #[error("bad settings: {0}")]
    BadSettings(String),
    #[error(transparent)]
    Band(#[from] BandError),
}

#[derive(Debug, Clone)]
pub struct SimOperator {
    intervals: usize,
    dx: f64,
    nodes: Vec<f64>,
    /// `EI` at the nodes
    ei: Vec<f64>,
    weights: Vec<f64>,
    /// diagonal mass of the unknowns
    mass: Vec<f64>,
    /// lumped mass of the clamp node
    clamp_mass: f64,
    dense: DMatrix<f64>,
    stiffness: SymBand,
}

impl SimOperator {
    pub fn discretize(config: &BeamConfig, intervals: usize) -> Result<Self, SimError> {
        if intervals < MIN_INTERVALS {
            return Err(SimError::GridTooCoarse {
                min: MIN_INTERVALS,
                got: intervals,
            });
        }
        let n = intervals;
        let length = config.length();
        let dx = length / n as f64;
        let nodes: Vec<f64> = (0..=n)
            .map(|j| {
                if j == n {
                    length
                } else {
                    length * (j as f64 / n as f64)
                }
            })
            .collect();
        let ei: Vec<f64> = nodes.iter().map(|&x| config.ei().value(x)).collect();
        let rho: Vec<f64> = nodes.iter().map(|&x| config.rho().value(x)).collect();
        let mut weights = vec![dx; n + 1];
        weights[0] = 0.5 * dx;
        weights[n] = 0.5 * dx;

        // curvature operator on [θ, w_0, …, w_{N−1}, f]; the last column drops out
        let h2 = dx * dx;
        let mut c = DMatrix::<f64>::zeros(n + 1, n + 2);
        c[(0, 0)] = -2.0 / dx;
        c[(0, 1)] = -2.0 / h2;
        c[(0, 2)] = 2.0 / h2;
        for j in 1..n {
            c[(j, j)] = 1.0 / h2;
            c[(j, j + 1)] = -2.0 / h2;
            c[(j, j + 2)] = 1.0 / h2;
        }
        c[(n, n)] = 2.0 / h2;
        c[(n, n + 1)] = -2.0 / h2;
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n + 1,
            weights.iter().zip(&ei).map(|(a, b)| a * b),
        ));
        let c = c.columns(0, n + 1);
        let dense = c.transpose() * w * c;
        let stiffness = SymBand::from_fn(n + 1, 2, |i, j| dense[(i, j)]);

        let mut mass = vec![0.0; n + 1];
        mass[0] = config.tip_inertia();
        mass[1] = config.tip_mass() + 0.5 * dx * rho[0];
        for j in 1..n {
            mass[j + 1] = dx * rho[j];
        }
        Ok(Self {
            intervals: n,
            dx,
            nodes,
            ei,
            weights,
            mass,
            clamp_mass: 0.5 * dx * rho[n],
            dense,
            stiffness,
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Diagonal mass of `[θ, w_0, …, w_{N−1}]`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Stiffness of `[θ, w_0, …, w_{N−1}]` as assembled, before band extraction.
    pub fn assembled_stiffness(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn stiffness(&self) -> &SymBand {
        &self.stiffness
    }

    /// Largest `|K − Kᵀ|` relative to the largest `|K|`.
    pub fn asymmetry(&self) -> f64 {
        let k = &self.dense;
        let diff = (k - k.transpose()).abs().max();
        diff / k.abs().max()
    }

    fn curvatures(&self, u: &[f64], slope: f64) -> Vec<f64> {
        let (n, h2) = (self.intervals, self.dx * self.dx);
        let mut kappa = vec![0.0; n + 1];
        kappa[0] = 2.0 * (u[1] - u[0] - self.dx * slope) / h2;
        for j in 1..n {
            kappa[j] = (u[j - 1] - 2.0 * u[j] + u[j + 1]) / h2;
        }
        kappa[n] = 2.0 * (u[n - 1] - u[n]) / h2;
        kappa
    }

    /// `K q + K_f f`, evaluated through the curvatures so that rigid
    /// translations give exactly zero.
    pub fn restoring_force(&self, q: &[f64], f: f64, out: &mut [f64]) {
        let (n, h2) = (self.intervals, self.dx * self.dx);
        let u = |j: usize| if j == n { f } else { q[j + 1] };
        let mut moment = vec![0.0; n + 1];
        moment[0] = 2.0 * (u(1) - u(0) - self.dx * q[0]) / h2;
        for j in 1..n {
            moment[j] = (u(j - 1) - 2.0 * u(j) + u(j + 1)) / h2;
        }
        moment[n] = 2.0 * (u(n - 1) - f) / h2;
        for j in 0..=n {
            moment[j] *= self.weights[j] * self.ei[j];
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        out[0] = -2.0 * moment[0] / self.dx;
        out[1] -= 2.0 * moment[0] / h2;
        out[2] += 2.0 * moment[0] / h2;
        for j in 1..n {
            out[j] += moment[j] / h2;
            out[j + 1] -= 2.0 * moment[j] / h2;
            if j + 1 < n {
                out[j + 2] += moment[j] / h2;
            }
        }
        out[n] += 2.0 * moment[n] / h2;
    }

    /// `½ Σ W EI κ² + ½ Σ μ v² + ½ J β²` with the tip mass in `μ_0`.
    pub fn energy(&self, state: &BeamState) -> Result<f64, SimError> {
        let n = self.intervals;
        for len in [state.u.len(), state.v.len()] {
            if len != n + 1 {
                return Err(SimError::DimensionMismatch {
                    expected: n + 1,
                    got: len,
                });
            }
        }
        let kappa = self.curvatures(&state.u, state.tip_slope);
        let strain: f64 = (0..=n)
            .map(|j| self.weights[j] * self.ei[j] * kappa[j] * kappa[j])
            .sum();
        let kinetic: f64 = (0..n)
            .map(|j| self.mass[j + 1] * state.v[j] * state.v[j])
            .sum::<f64>()
            + self.clamp_mass * state.v[n] * state.v[n]
            + self.mass[0] * state.beta * state.beta;
        Ok(0.5 * (strain + kinetic))
    }

    /// Eigenvalues of `K v = λ M v`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let scale: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let a = DMatrix::from_fn(self.dense.nrows(), self.dense.ncols(), |i, j| {
            scale[i] * self.dense[(i, j)] * scale[j]
        });
        let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Angular frequencies `√λ` of the lowest `count` modes.
    pub fn frequencies(&self, count: usize) -> Vec<f64> {
        self.eigenvalues()
            .into_iter()
            .take(count)
            .map(|l| l.max(0.0).sqrt())
            .collect()
    }
}

/// Input interpolated from samples of `f, f', f''` by quintic Hermite pieces.
#[derive(Debug, Clone)]
pub struct SampledInput {
    samples: InputSamples,
}

impl SampledInput {
    pub fn new(samples: InputSamples) -> Result<Self, SimError> {
        let n = samples.t.len();
        if n < 2 {
            return Err(SimError::BadSettings(
                "input needs at least two samples".into(),
            ));
        }
        for len in [samples.f.len(), samples.f_t.len(), samples.f_tt.len()] {
            if len != n {
                return Err(SimError::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        if samples.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimError::BadSettings("input times must increase".into()));
        }
        Ok(Self { samples })
    }

    /// Constant input `c` on `[0, T]`.
    pub fn constant(value: f64, horizon: f64) -> Self {
        Self {
            samples: InputSamples {
                t: vec![0.0, horizon],
                f: vec![value; 2],
                f_t: vec![0.0; 2],
                f_tt: vec![0.0; 2],
            },
        }
    }

    pub fn samples(&self) -> &InputSamples {
        &self.samples
    }

    pub fn end_time(&self) -> f64 {
        *self.samples.t.last().unwrap()
    }

    /// `(f, f', f'')` at `t`, held constant outside the sampled range.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let s = &self.samples;
        let last = s.t.len() - 1;
        if t <= s.t[0] {
            return [s.f[0], s.f_t[0], s.f_tt[0]];
        }
        if t >= s.t[last] {
            return [s.f[last], 0.0, 0.0];
        }
        let i = s.t.partition_point(|&x| x <= t) - 1;
        let h = s.t[i + 1] - s.t[i];
        let tau = (t - s.t[i]) / h;
        hermite5(
            [s.f[i], s.f_t[i], s.f_tt[i]],
            [s.f[i + 1], s.f_t[i + 1], s.f_tt[i + 1]],
            h,
            tau,
        )
    }
}

/// Value, first and second derivative of the quintic matching `(v, v', v'')`
/// at both ends of an interval of length `h`, at fraction `tau`.
fn hermite5(a: [f64; 3], b: [f64; 3], h: f64, tau: f64) -> [f64; 3] {
    // p(τ) = Σ cᵢ τⁱ in the unit variable
    let (p0, p1, p2) = (a[0], a[1] * h, a[2] * h * h);
    let (q0, q1, q2) = (b[0], b[1] * h, b[2] * h * h);
    let c3 = 10.0 * (q0 - p0) - 6.0 * p1 - 4.0 * q1 - 1.5 * p2 + 0.5 * q2;
    let c4 = -15.0 * (q0 - p0) + 8.0 * p1 + 7.0 * q1 + 1.5 * p2 - q2;
    let c5 = 6.0 * (q0 - p0) - 3.0 * p1 - 3.0 * q1 - 0.5 * p2 + 0.5 * q2;
    let c = [p0, p1, 0.5 * p2, c3, c4, c5];
    let t = tau;
    let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
    let d1 = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
    let d2 = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
    [v, d1 / h, d2 / (h * h)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub dt: f64,
    pub horizon: f64,
    /// Record every this many steps.
    pub record_every: usize,
    /// Numerical damping `α ≥ 0`: `γ = ½ + α`, `β = (γ + ½)²/4`.
    pub damping: f64,
}

impl SimSettings {
    pub fn new(dt: f64, horizon: f64, record_every: usize) -> Self {
        Self {
            dt,
            horizon,
            record_every,
            damping: 0.0,
        }
    }

    fn steps(&self) -> Result<usize, SimError> {
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) || self.record_every == 0 {
            return Err(SimError::BadSettings(format!("{self:?}")));
        }
        if self.damping < 0.0 {
            return Err(SimError::BadSettings("damping must be non-negative".into()));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(SimError::BadSettings(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub settings: SimSettings,
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    /// nodal displacements including the clamp node
    pub displacement: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
    pub tip_slope: Vec<f64>,
    pub tip_angular_rate: Vec<f64>,
    pub energy: Vec<f64>,
    pub input: Vec<f64>,
}

impl SimResult {
    pub fn tip_displacement(&self) -> Vec<f64> {
        self.displacement.iter().map(|u| u[0]).collect()
    }

    pub fn tip_velocity(&self) -> Vec<f64> {
        self.velocity.iter().map(|v| v[0]).collect()
    }

    pub fn state(&self, i: usize) -> BeamState {
        BeamState {
            u: self.displacement[i].clone(),
            v: self.velocity[i].clone(),
            alpha: self.velocity[i][0],
            beta: self.tip_angular_rate[i],
            tip_slope: self.tip_slope[i],
        }
    }

    /// Largest `|E(t) − E(0)| / E(0)`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        let worst = self
            .energy
            .iter()
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max);
        if e0 == 0.0 {
            worst
        } else {
            worst / e0
        }
    }

    /// `t, w(0,t), w_x(0,t), E` rows.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "w0", "wx0", "E"])?;
        for i in 0..self.times.len() {
            w.write_record([
                self.times[i].to_string(),
                self.displacement[i][0].to_string(),
                self.tip_slope[i].to_string(),
                self.energy[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `t, x, w` rows.
    pub fn write_field_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "w"])?;
        for (t, u) in self.times.iter().zip(&self.displacement) {
            for (x, v) in self.nodes.iter().zip(u) {
                w.write_record([t.to_string(), x.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn simulate(
    op: &SimOperator,
    z0: &BeamState,
    input: &SampledInput,
    settings: &SimSettings,
) -> Result<SimResult, SimError> {
    let steps = settings.steps()?;
    let n = op.intervals;
    for len in [z0.u.len(), z0.v.len()] {
        if len != n + 1 {
            return Err(SimError::DimensionMismatch {
                expected: n + 1,
                got: len,
            });
        }
    }
    let [f0, df0, _] = input.eval(0.0);
    let scale = 1.0 + f0.abs();
    if !((z0.u[n] - f0).abs() <= COMPATIBILITY_TOLERANCE * scale) {
        return Err(SimError::IncompatibleInitialData(format!(
            "u(L) = {} but f(0) = {f0}",
            z0.u[n]
        )));
    }
    if !((z0.v[n] - df0).abs() <= COMPATIBILITY_TOLERANCE * (1.0 + df0.abs())) {
        return Err(SimError::IncompatibleInitialData(format!(
            "v(L) = {} but f'(0) = {df0}",
            z0.v[n]
        )));
    }

    let gamma = 0.5 + settings.damping;
    let beta = 0.25 * (gamma + 0.5).powi(2);
    let dt = settings.dt;
    let dim = n + 1;
    let effective = op
        .stiffness
        .scaled_plus_diagonal(beta * dt * dt, 1.0, &op.mass)
        .cholesky()?;

    let mut q: Vec<f64> = std::iter::once(z0.tip_slope)
        .chain(z0.u[..n].iter().copied())
        .collect();
    let mut v: Vec<f64> = std::iter::once(z0.beta)
        .chain(z0.v[..n].iter().copied())
        .collect();
    let mut a = vec![0.0; dim];
    let mut work = vec![0.0; dim];
    let accel = |q: &[f64], f: f64, out: &mut [f64], work: &mut [f64]| {
        op.restoring_force(q, f, work);
        for i in 0..dim {
            out[i] = -work[i] / op.mass[i];
        }
    };
    accel(&q, f0, &mut a, &mut work);

    let mut result = SimResult {
        settings: settings.clone(),
        nodes: op.nodes.clone(),
        times: vec![],
        displacement: vec![],
        velocity: vec![],
        tip_slope: vec![],
        tip_angular_rate: vec![],
        energy: vec![],
        input: vec![],
    };
    let record = |result: &mut SimResult, t: f64, q: &[f64], v: &[f64], f: [f64; 3]| {
        let mut u: Vec<f64> = q[1..].to_vec();
        u.push(f[0]);
        let mut vel: Vec<f64> = v[1..].to_vec();
        vel.push(f[1]);
        let state = BeamState {
            alpha: vel[0],
            beta: v[0],
            tip_slope: q[0],
            u,
            v: vel,
        };
        let e = op.energy(&state).expect("state sized by the operator");
        result.times.push(t);
        result.tip_slope.push(state.tip_slope);
        result.tip_angular_rate.push(state.beta);
        result.energy.push(e);
        result.input.push(f[0]);
        result.displacement.push(state.u);
        result.velocity.push(state.v);
    };
    record(&mut result, 0.0, &q, &v, input.eval(0.0));

    let mut predictor = vec![0.0; dim];
    let mut rhs = vec![0.0; dim];
    for step in 1..=steps {
        let t = step as f64 * dt;
        let forcing = input.eval(t);
        for i in 0..dim {
            predictor[i] = q[i] + dt * v[i] + (0.5 - beta) * dt * dt * a[i];
        }
        op.restoring_force(&predictor, forcing[0], &mut rhs);
        rhs.iter_mut().for_each(|x| *x = -*x);
        effective.solve_in_place(&mut rhs)?;
        for i in 0..dim {
            let a_new = rhs[i];
            q[i] = predictor[i] + beta * dt * dt * a_new;
            v[i] += dt * ((1.0 - gamma) * a[i] + gamma * a_new);
            a[i] = a_new;
        }
        if !q.iter().chain(&v).all(|x| x.is_finite()) {
            return Err(SimError::NonFiniteState { t });
        }
        if step % settings.record_every == 0 {
            record(&mut result, t, &q, &v, forcing);
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceError {
    pub sup: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub tip: TraceError,
    pub clamp: TraceError,
    pub field: TraceError,
    /// largest `|w|` of the series field
    pub field_scale: f64,
}

impl ErrorReport {
    pub fn relative_field_sup(&self) -> f64 {
        self.field.sup / self.field_scale
    }
}

/// Displacement snapshots `values[i][j] = w(x_j, t_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTable {
    pub times: Vec<f64>,
    pub nodes: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl FieldTable {
    pub fn from_sim(sim: &SimResult) -> Self {
        Self {
            times: sim.times.clone(),
            nodes: sim.nodes.clone(),
            values: sim.displacement.clone(),
        }
    }

    pub fn from_flat(traj: &FlatTrajectory) -> Self {
        Self {
            times: traj.times().to_vec(),
            nodes: traj.nodes().to_vec(),
            values: traj.states.iter().map(|s| s.u.clone()).collect(),
        }
    }

    /// Reads long-format CSV with at least the columns `t, x, w`, grouped by time.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self, SimError> {
        let parse = |e: csv::Error| SimError::Parse(e.to_string());
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers().map_err(parse)?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| SimError::Parse(format!("missing column {name}")))
        };
        let (ct, cx, cw) = (column("t")?, column("x")?, column("w")?);
        let mut table = Self {
            times: vec![],
            nodes: vec![],
            values: vec![],
        };
        let mut column_index = 0;
        for record in reader.records() {
            let record = record.map_err(parse)?;
            let field = |c: usize| -> Result<f64, SimError> {
                record
                    .get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| SimError::Parse(format!("bad number in row {:?}", record)))
            };
            let (t, x, w) = (field(ct)?, field(cx)?, field(cw)?);
            if table.times.last() != Some(&t) {
                if !table.times.is_empty() && column_index != table.nodes.len() {
                    return Err(SimError::GridMismatch(format!(
                        "snapshot at t = {} has {column_index} nodes, expected {}",
                        table.times.last().unwrap(),
                        table.nodes.len()
                    )));
                }
                table.times.push(t);
                table.values.push(vec![]);
                column_index = 0;
            }
            if table.times.len() == 1 {
                table.nodes.push(x);
            } else if table.nodes.get(column_index) != Some(&x) {
                return Err(SimError::GridMismatch(format!(
                    "node {x} at t = {t} does not match the first snapshot"
                )));
            }
            table.values.last_mut().unwrap().push(w);
            column_index += 1;
        }
        if table.times.is_empty() {
            return Err(SimError::Parse("no rows".into()));
        }
        if column_index != table.nodes.len() {
            return Err(SimError::GridMismatch("last snapshot is incomplete".into()));
        }
        Ok(table)
    }

    /// Snapshot at `t`, linear in time between stored snapshots.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let last = self.times.len() - 1;
        if last == 0 {
            return self.values[0].clone();
        }
        let i = self.times.partition_point(|&x| x <= t).clamp(1, last) - 1;
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let s = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        self.values[i]
            .iter()
            .zip(&self.values[i + 1])
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }
}

/// Errors of the simulation against the series field, on the series time
/// grid (simulation records are interpolated linearly in time).
pub fn compare_to_flat(sim: &SimResult, traj: &FlatTrajectory) -> Result<ErrorReport, SimError> {
    compare_fields(&FieldTable::from_sim(sim), &FieldTable::from_flat(traj))
}

/// Errors of `sim` against `reference` on the reference time grid.
pub fn compare_fields(sim: &FieldTable, reference: &FieldTable) -> Result<ErrorReport, SimError> {
    let nodes = &reference.nodes;
    if nodes.len() != sim.nodes.len()
        || nodes
            .iter()
            .zip(&sim.nodes)
            .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
    {
        return Err(SimError::GridMismatch(format!(
            "reference field has {} nodes, simulation has {}",
            nodes.len(),
            sim.nodes.len()
        )));
    }
    let (t0, t1) = (sim.times[0], *sim.times.last().unwrap());
    let times = &reference.times;
    if times[0] < t0 - 1e-12 || *times.last().unwrap() > t1 + 1e-9 {
        return Err(SimError::GridMismatch(format!(
            "reference covers [{}, {}], simulation covers [{t0}, {t1}]",
            times[0],
            times.last().unwrap()
        )));
    }
    let m = nodes.len();
    let mut acc = [(0.0f64, 0.0f64); 3];
    let mut scale: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let row = sim.at(t);
        let w = &reference.values[i];
        let weight = if times.len() > 1 {
            let lo = if i == 0 { t } else { times[i - 1] };
            let hi = if i + 1 == times.len() {
                t
            } else {
                times[i + 1]
            };
            0.5 * (hi - lo)
        } else {
            1.0
        };
        let mut field_sup: f64 = 0.0;
        let mut field_sq = 0.0;
        for j in 0..m {
            let e = (row[j] - w[j]).abs();
            field_sup = field_sup.max(e);
            field_sq += e * e / m as f64;
            scale = scale.max(w[j].abs());
        }
        let tip = (row[0] - w[0]).abs();
        let clamp = (row[m - 1] - w[m - 1]).abs();
        for (k, (e, sq)) in [
            (tip, tip * tip),
            (clamp, clamp * clamp),
            (field_sup, field_sq),
        ]
        .into_iter()
        .enumerate()
        {
            acc[k].0 = acc[k].0.max(e);
            acc[k].1 += weight * sq;
        }
    }
    let pack = |(sup, sq): (f64, f64)| TraceError { sup, l2: sq.sqrt() };
    Ok(ErrorReport {
        tip: pack(acc[0]),
        clamp: pack(acc[1]),
        field: pack(acc[2]),
        field_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_beam() -> BeamConfig {
        use crate::beam::CoefficientSpec;
        BeamConfig::new(
            0.5,
            0.4,
            2e-4,
            &CoefficientSpec::Affine { a: 0.2, b: 0.0 },
            &CoefficientSpec::Affine { a: 0.3, b: 0.0 },
        )
        .unwrap()
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(matches!(
            SimOperator::discretize(&BeamConfig::laboratory(), 8),
            Err(SimError::GridTooCoarse { min: 32, got: 8 })
        ));
    }

    #[test]
    fn interior_rows_are_the_biharmonic_stencil() {
        let op = SimOperator::discretize(&uniform_beam(), 40).unwrap();
        let k = op.assembled_stiffness();
        let dx = op.spacing();
        let scale = 0.3 / dx.powi(4);
        for row in 4..36 {
            // row of w_j is index j + 1; divide by the nodal weight dx
            for (off, c) in [-2i32, -1, 0, 1, 2]
                .into_iter()
                .zip([1.0, -4.0, 6.0, -4.0, 1.0])
            {
                let col = (row as i32 + off) as usize;
                let got = k[(row, col)] / dx;
                assert!(
                    (got - c * scale).abs() <= 1e-9 * scale,
                    "row {row} col {col}"
                );
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric_and_banded() {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 150).unwrap();
        assert!(op.asymmetry() <= 1e-12);
        let k = op.assembled_stiffness();
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                if i.abs_diff(j) > 2 {
                    assert_eq!(k[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn restoring_force_matches_the_assembled_stiffness() {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 40).unwrap();
        let q: Vec<f64> = (0..41)
            .map(|j| (0.3 * j as f64).sin() + 0.01 * j as f64)
            .collect();
        let mut got = vec![0.0; 41];
        op.restoring_force(&q, 0.0, &mut got);
        let expect = op.assembled_stiffness() * nalgebra::DVector::from_column_slice(&q);
        let scale = expect.amax();
        for i in 0..41 {
            assert!((got[i] - expect[i]).abs() <= 1e-12 * scale, "row {i}");
        }
        let mut banded = vec![0.0; 41];
        op.stiffness().mul_vec(&q, &mut banded);
        for i in 0..41 {
            assert!((banded[i] - expect[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn energy_is_a_quadratic_form() {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 40).unwrap();
        assert_eq!(op.energy(&BeamState::steady(0.0, 41)).unwrap(), 0.0);
        assert_eq!(op.energy(&BeamState::steady(0.3, 41)).unwrap(), 0.0);
        let state = BeamState {
            u: (0..41).map(|j| (j as f64 * 0.2).sin()).collect(),
            v: (0..41).map(|j| (j as f64 * 0.1).cos()).collect(),
            alpha: 1.0,
            beta: 0.5,
            tip_slope: 0.2,
        };
        let e = op.energy(&state).unwrap();
        let double = BeamState {
            u: state.u.iter().map(|x| 2.0 * x).collect(),
            v: state.v.iter().map(|x| 2.0 * x).collect(),
            alpha: 2.0,
            beta: 1.0,
            tip_slope: 0.4,
        };
        assert!((op.energy(&double).unwrap() - 4.0 * e).abs() <= 1e-12 * e);
        assert!(matches!(
            op.energy(&BeamState::steady(0.0, 40)),
            Err(SimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn steady_state_stays_put() {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 60).unwrap();
        let z0 = BeamState::steady(0.4, 61);
        let input = SampledInput::constant(0.4, 1.0);
        let r = simulate(&op, &z0, &input, &SimSettings::new(1e-3, 1.0, 10)).unwrap();
        for u in &r.displacement {
            assert!(u.iter().all(|&x| x == 0.4));
        }
        assert!(r.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn incompatible_start_is_rejected() {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 40).unwrap();
        let z0 = BeamState::steady(0.4, 41);
        let input = SampledInput::constant(0.0, 1.0);
        assert!(matches!(
            simulate(&op, &z0, &input, &SimSettings::new(1e-3, 1.0, 1)),
            Err(SimError::IncompatibleInitialData(_))
        ));
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let p = |t: f64| {
            [
                1.0 - t + 2.0 * t.powi(3) - t.powi(5),
                -1.0 + 6.0 * t * t - 5.0 * t.powi(4),
                12.0 * t - 20.0 * t.powi(3),
            ]
        };
        let (a, b) = (0.3, 0.55);
        for i in 0..=10 {
            let tau = i as f64 / 10.0;
            let got = hermite5(p(a), p(b), b - a, tau);
            let expect = p(a + tau * (b - a));
            for d in 0..3 {
                assert!((got[d] - expect[d]).abs() < 1e-11, "d={d}");
            }
        }
    }

    #[test]
    fn frequencies_are_positive() {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 60).unwrap();
        let ev = op.eigenvalues();
        assert!(ev[0] > 0.0);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }
}
