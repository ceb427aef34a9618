//! End-to-end runs: generating functions, series synthesis, simulation and
//! the settling checks, with the artifacts written to one directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beam::{BeamConfig, BeamConfigFile, BeamError, SpatialGrid};
use crate::genfun::{self, compute_gen_fun_table, BoundReport, GenFunError, GenFunTable};
use crate::gevrey::{ClosedForm, GevreyError, TrajectorySpec};
use crate::plot::{line_chart, Series};
use crate::sim::{
    self, compare_to_flat, simulate, ErrorReport, SampledInput, SimError, SimOperator, SimResult,
    SimSettings,
};
use crate::synthesis::{
    self, initial_state_from_p, residuals, synthesize_field, uniform_times, BeamState, Endpoint,
    FlatTrajectory, ResidualReport, SynthesisError, SynthesisParams,
};

pub const PRESET_NAMES: [&str; 3] = ["problem1", "problem2", "steady"];

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("beam configuration: {0}")]
    Beam(#[from] BeamError),
    #[error("generating functions: {0}")]
    GenFun(#[from] GenFunError),
    #[error("trajectory specification: {0}")]
    Gevrey(#[from] GevreyError),
    #[error("synthesis: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unknown preset {0:?} (known: problem1, problem2, steady)")]
    UnknownPreset(String),
    #[error("invalid preset: {0}")]
    BadPreset(String),
}

impl PipelineError {
    /// 3 for a numerical blow-up, 4 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Sim(SimError::NonFiniteState { .. })
            | PipelineError::Sim(SimError::Band(_)) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    /// intervals of the generating-function grid
    pub genfun: usize,
    /// intervals of the series field and of the simulation
    pub nx: usize,
    pub time_samples: usize,
    pub dt: f64,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            genfun: genfun::DEFAULT_INTERVALS,
            nx: sim::DEFAULT_INTERVALS,
            time_samples: synthesis::DEFAULT_TIME_SAMPLES,
            dt: sim::DEFAULT_TIME_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub beam: BeamConfigFile,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub s: f64,
    #[serde(rename = "N")]
    pub order: usize,
    pub p0: ClosedForm,
    #[serde(rename = "pT")]
    pub p_final: ClosedForm,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub sign_flip: bool,
    /// Newmark damping parameter; 0 is the conservative rule.
    #[serde(default)]
    pub damping: f64,
}

impl ExperimentPreset {
    pub fn named(name: &str) -> Result<Self, PipelineError> {
        let (p0, p_final) = match name {
            "problem1" => (
                ClosedForm::decaying_bump(),
                ClosedForm::Constant { value: 0.0 },
            ),
            "problem2" => (
                ClosedForm::Constant { value: 0.4 },
                ClosedForm::Constant { value: 0.0 },
            ),
            "steady" => (
                ClosedForm::Constant { value: 0.4 },
                ClosedForm::Constant { value: 0.4 },
            ),
            _ => return Err(PipelineError::UnknownPreset(name.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            beam: BeamConfig::laboratory().to_file(),
            horizon: 3.0,
            s: 1.5,
            order: 20,
            p0,
            p_final,
            grids: Grids::default(),
            sign_flip: false,
            damping: 0.0,
        })
    }

    pub fn read_json(path: &Path) -> Result<Self, PipelineError> {
        let preset: Self = read_json(path)?;
        preset.validate()?;
        Ok(preset)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::BadPreset(msg));
        if self.order == 0 {
            return bad("N must be positive".into());
        }
        if !(self.grids.dt > 0.0) || !self.grids.dt.is_finite() {
            return bad(format!("dt = {} must be positive", self.grids.dt));
        }
        if self.grids.time_samples < 2 {
            return bad("at least two time samples are needed".into());
        }
        if !(self.damping >= 0.0) {
            return bad(format!("damping = {} must be non-negative", self.damping));
        }
        Ok(())
    }

    pub fn config(&self) -> Result<BeamConfig, PipelineError> {
        Ok(BeamConfig::from_file(&self.beam)?)
    }

    pub fn spec(&self) -> Result<TrajectorySpec, PipelineError> {
        Ok(TrajectorySpec::new(
            self.horizon,
            self.s,
            self.p0.clone(),
            self.p_final.clone(),
        )?)
    }

    pub fn synthesis_params(&self) -> Result<SynthesisParams, PipelineError> {
        let grid = SpatialGrid::uniform(self.beam.length, self.grids.nx)?;
        let mut params = SynthesisParams::new(
            self.order,
            uniform_times(self.horizon, self.grids.time_samples),
            grid,
        );
        params.sign_flip = self.sign_flip;
        Ok(params)
    }

    /// Simulation steps between two series samples, when that is a whole number.
    pub fn record_every(&self) -> usize {
        let spacing = self.horizon / (self.grids.time_samples.max(2) - 1) as f64;
        let ratio = spacing / self.grids.dt;
        if (ratio - ratio.round()).abs() <= 1e-9 * ratio && ratio >= 1.0 {
            ratio.round() as usize
        } else {
            1
        }
    }

    pub fn sim_settings(&self) -> SimSettings {
        SimSettings {
            dt: self.grids.dt,
            horizon: self.horizon,
            record_every: self.record_every(),
            damping: self.damping,
        }
    }
}

/// Pass/fail limits applied by [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `|f(0) − w(L,0)|` and `|f(T) − w_T(L)|`
    pub input_endpoint: f64,
    /// final tip offset and speed, as a fraction of the travel
    pub tip_fraction: f64,
    /// final field offset as a fraction of the initial one
    pub settle_fraction: f64,
    /// series/simulation field mismatch as a fraction of `max |w|`
    pub agreement: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            input_endpoint: 1e-9,
            tip_fraction: 0.01,
            settle_fraction: 0.02,
            agreement: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    /// `sup_x |w(x,0) − w_T(x)|`
    pub travel: f64,
    pub checks: Vec<Check>,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn sup_offset(u: &[f64], target: &[f64]) -> f64 {
    u.iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Settling and agreement checks against the end state `target`.
pub fn evaluate(
    traj: &FlatTrajectory,
    sim: &SimResult,
    errors: &ErrorReport,
    target: &BeamState,
    thresholds: &Thresholds,
) -> Validation {
    let start = &traj.states[0];
    let end = traj.states.last().unwrap();
    let n = start.u.len() - 1;
    let travel = sup_offset(&start.u, &target.u);
    let (f0, f_end) = (traj.input.f[0], *traj.input.f.last().unwrap());
    let last = sim.times.len() - 1;
    let sim_start = &sim.displacement[0];
    let sim_end = &sim.displacement[last];
    let tip_limit = thresholds.tip_fraction * travel;
    let checks = vec![
        Check::new(
            "input_start",
            (f0 - start.u[n]).abs(),
            thresholds.input_endpoint,
        ),
        Check::new(
            "input_end",
            (f_end - target.u[n]).abs(),
            thresholds.input_endpoint,
        ),
        Check::new(
            "sim_tip_position",
            (sim_end[0] - target.u[0]).abs(),
            tip_limit,
        ),
        Check::new(
            "sim_tip_speed",
            (sim.velocity[last][0] - target.v[0]).abs(),
            tip_limit,
        ),
        Check::new(
            "series_settling",
            sup_offset(&end.u, &target.u),
            thresholds.settle_fraction * travel,
        ),
        Check::new(
            "sim_settling",
            sup_offset(sim_end, &target.u),
            thresholds.settle_fraction * sup_offset(sim_start, &target.u),
        ),
        Check::new(
            "field_agreement",
            errors.field.sup,
            thresholds.agreement * errors.field_scale,
        ),
    ];
    Validation { travel, checks }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub preset: String,
    pub passed: bool,
    pub validation: Validation,
    pub errors: ErrorReport,
    pub residuals: ResidualReport,
    pub decay_bounds: BoundReport,
    pub c_norm: f64,
    /// lowest angular frequencies of the discretized beam, rad/s
    pub frequencies: Vec<f64>,
    /// simulated mechanical energy at the first and last record
    pub energy_start: f64,
    pub energy_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub preset: ExperimentPreset,
    pub thresholds: Thresholds,
    pub jet_order: usize,
    pub record_every: usize,
    pub genfun_substeps: usize,
    pub genfun_refinement_tolerance: f64,
    pub compatibility_tolerance: f64,
    pub integrator: String,
    pub residuals: ResidualReport,
    pub files: Vec<String>,
}

pub struct ArtifactBundle {
    pub table: GenFunTable,
    pub trajectory: FlatTrajectory,
    pub simulation: SimResult,
    pub summary: Summary,
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

pub fn build_table(preset: &ExperimentPreset) -> Result<GenFunTable, PipelineError> {
    let config = preset.config()?;
    let grid = SpatialGrid::uniform(config.length(), preset.grids.genfun)?;
    Ok(compute_gen_fun_table(&config, &grid, preset.order)?)
}

pub fn synthesize(
    preset: &ExperimentPreset,
    table: &GenFunTable,
    extended: bool,
) -> Result<FlatTrajectory, PipelineError> {
    let mut params = preset.synthesis_params()?;
    params.extended = extended;
    Ok(synthesize_field(
        table,
        &preset.config()?,
        &preset.spec()?,
        &params,
    )?)
}

/// Simulates from the first series state under the series input.
pub fn simulate_trajectory(
    preset: &ExperimentPreset,
    traj: &FlatTrajectory,
) -> Result<SimResult, PipelineError> {
    let op = SimOperator::discretize(&preset.config()?, preset.grids.nx)?;
    let input = SampledInput::new(traj.input.clone())?;
    Ok(simulate(
        &op,
        &traj.states[0],
        &input,
        &preset.sim_settings(),
    )?)
}

pub fn run_pipeline(
    preset: &ExperimentPreset,
    out: &Path,
) -> Result<ArtifactBundle, PipelineError> {
    run_with_thresholds(preset, &Thresholds::default(), out)
}

pub fn run_with_thresholds(
    preset: &ExperimentPreset,
    thresholds: &Thresholds,
    out: &Path,
) -> Result<ArtifactBundle, PipelineError> {
    preset.validate()?;
    create_dir(out)?;
    let config = preset.config()?;
    let spec = preset.spec()?;
    let table = build_table(preset)?;
    let decay_bounds = table.verify_decay_bounds()?;
    let traj = synthesize(preset, &table, true)?;
    let report = residuals(&traj, &config)?;
    let simulation = simulate_trajectory(preset, &traj)?;
    let errors = compare_to_flat(&simulation, &traj)?;
    let mut target_params = preset.synthesis_params()?;
    target_params.sign_flip = false;
    let target = initial_state_from_p(&table, &config, &spec, &target_params, Endpoint::End)?;
    let validation = evaluate(&traj, &simulation, &errors, &target, thresholds);
    let op = SimOperator::discretize(&config, preset.grids.nx)?;

    let summary = Summary {
        preset: preset.name.clone(),
        passed: validation.passed(),
        validation,
        errors,
        residuals: report,
        decay_bounds,
        c_norm: spec.c_norm(),
        frequencies: op.frequencies(3),
        energy_start: simulation.energy[0],
        energy_end: *simulation.energy.last().unwrap(),
    };

    let mut files = vec![];
    let mut emit = |name: &str,
                    write: &dyn Fn(&mut BufWriter<File>) -> Result<(), PipelineError>|
     -> Result<(), PipelineError> {
        let path = out.join(name);
        let mut w = BufWriter::new(create_file(&path)?);
        write(&mut w)?;
        w.flush().map_err(|e| io_error(&path, e))?;
        files.push(path);
        Ok(())
    };
    emit("genfun.json", &|w| {
        to_json(w, &table.export(), "genfun.json")
    })?;
    emit("input.csv", &|w| {
        to_csv(traj.input.write_csv(w), "input.csv")
    })?;
    emit("field.csv", &|w| {
        to_csv(traj.write_field_csv(w), "field.csv")
    })?;
    emit("state0.json", &|w| {
        to_json(w, &traj.states[0], "state0.json")
    })?;
    emit("sim.csv", &|w| {
        to_csv(simulation.write_trace_csv(w), "sim.csv")
    })?;
    emit("sim_field.csv", &|w| {
        to_csv(simulation.write_field_csv(w), "sim_field.csv")
    })?;
    emit("summary.json", &|w| to_json(w, &summary, "summary.json"))?;
    let input_chart = line_chart(
        "Clamp input",
        "t [s]",
        "f(t) [m]",
        &[Series {
            label: "f",
            x: &traj.input.t,
            y: &traj.input.f,
        }],
    );
    emit("input.svg", &|w| write_text(w, &input_chart, "input.svg"))?;
    let series_tip = traj.tip_displacement();
    let sim_tip = simulation.tip_displacement();
    let tip_chart = line_chart(
        "Tip displacement",
        "t [s]",
        "w(0,t) [m]",
        &[
            Series {
                label: "series",
                x: traj.times(),
                y: &series_tip,
            },
            Series {
                label: "simulation",
                x: &simulation.times,
                y: &sim_tip,
            },
        ],
    );
    emit("tip.svg", &|w| write_text(w, &tip_chart, "tip.svg"))?;

    let mut names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.push("manifest.json".into());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        preset: preset.clone(),
        thresholds: *thresholds,
        jet_order: traj.params.jet_order,
        record_every: preset.record_every(),
        genfun_substeps: genfun::DEFAULT_SUBSTEPS,
        genfun_refinement_tolerance: genfun::REFINEMENT_TOLERANCE,
        compatibility_tolerance: sim::COMPATIBILITY_TOLERANCE,
        integrator: format!(
            "newmark gamma={} beta={}",
            0.5 + preset.damping,
            0.25 * (1.0 + preset.damping).powi(2)
        ),
        residuals: report,
        files: names,
    };
    let path = out.join("manifest.json");
    write_json(&path, &manifest)?;
    files.push(path);

    Ok(ArtifactBundle {
        table,
        trajectory: traj,
        simulation,
        summary,
        manifest,
        files,
    })
}

pub fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn create_file(path: &Path) -> Result<File, PipelineError> {
    File::create(path).map_err(|e| io_error(path, e))
}

pub fn open_file(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn to_json<T: Serialize>(w: &mut impl Write, value: &T, name: &str) -> Result<(), PipelineError> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| PipelineError::Parse {
        path: name.into(),
        message: e.to_string(),
    })?;
    writeln!(w).map_err(|e| io_error(Path::new(name), e))
}

fn to_csv(result: Result<(), csv::Error>, name: &str) -> Result<(), PipelineError> {
    result.map_err(|e| PipelineError::Parse {
        path: name.into(),
        message: e.to_string(),
    })
}

fn write_text(w: &mut impl Write, text: &str, name: &str) -> Result<(), PipelineError> {
    w.write_all(text.as_bytes())
        .map_err(|e| io_error(Path::new(name), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(create_file(path)?);
    to_json(&mut w, value, &path.to_string_lossy())?;
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    serde_json::from_reader(open_file(path)?).map_err(|e| PipelineError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_csv_file(
    path: &Path,
    write: impl FnOnce(BufWriter<File>) -> Result<(), csv::Error>,
) -> Result<(), PipelineError> {
    let file = BufWriter::new(create_file(path)?);
    write(file).map_err(|e| PipelineError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            let preset = ExperimentPreset::named(name).unwrap();
            preset.spec().unwrap();
            preset.config().unwrap();
            assert_eq!(preset.record_every(), 50);
        }
        assert!(matches!(
            ExperimentPreset::named("problem3"),
            Err(PipelineError::UnknownPreset(_))
        ));
    }

    #[test]
    fn preset_json_round_trip() {
        let preset = ExperimentPreset::named("problem1").unwrap();
        let text = serde_json::to_string(&preset).unwrap();
        let back: ExperimentPreset = serde_json::from_str(&text).unwrap();
        assert_eq!(back, preset);
    }

    #[test]
    fn odd_sample_spacing_records_every_step() {
        let mut preset = ExperimentPreset::named("problem2").unwrap();
        preset.grids.dt = 3e-4;
        preset.grids.time_samples = 7;
        assert_eq!(preset.record_every(), 1);
    }

    #[test]
    fn blow_up_maps_to_exit_code_three() {
        assert_eq!(
            PipelineError::Sim(SimError::NonFiniteState { t: 1.0 }).exit_code(),
            3
        );
        assert_eq!(PipelineError::UnknownPreset("x".into()).exit_code(), 4);
    }
}
