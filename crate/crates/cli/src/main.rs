use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flexbeam::pipeline::{
    self, build_table, open_file, read_json, run_pipeline, synthesize, write_csv_file, write_json,
    ExperimentPreset, PipelineError, Thresholds,
};
use flexbeam::sim::{compare_fields, simulate, FieldTable, SampledInput, SimOperator};
use flexbeam::synthesis::{residuals, BeamState, InputSamples};

const VALIDATION_FAILED: u8 = 2;
const USAGE_ERROR: u8 = 4;

#[derive(Parser)]
#[command(
    name = "flexbeam",
    version,
    about = "Open-loop transfers of a flexible beam with a tip mass"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generating-function table and its endpoint values.
    Genfun(Common),
    /// Clamp input and series field for a transfer.
    Synthesize(Common),
    /// Finite-difference run driven by a synthesized input.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// input CSV (t, f, f_t, f_tt); defaults to <out>/input.csv
        #[arg(long)]
        input: Option<PathBuf>,
        /// initial state JSON; defaults to <out>/state0.json
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Compare a simulated field against the series field.
    Validate {
        #[command(flatten)]
        common: Common,
        /// series field CSV; defaults to <out>/field.csv
        #[arg(long)]
        series: Option<PathBuf>,
        /// simulated field CSV; defaults to <out>/sim_field.csv
        #[arg(long)]
        sim: Option<PathBuf>,
    },
    /// Whole pipeline with settling checks.
    Run(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// experiment JSON (beam, horizon, end parameters, grids)
    #[arg(long)]
    config: Option<PathBuf>,
    /// built-in experiment: problem1, problem2 or steady
    #[arg(long, default_value = "problem2")]
    preset: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// truncation order of the series
    #[arg(long = "N")]
    order: Option<usize>,
    /// Gevrey order of the transition
    #[arg(long)]
    s: Option<f64>,
    /// transfer time in seconds
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// spatial intervals of the field and the simulation
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// use `+` between the two endpoint products of the input series
    #[arg(long)]
    sign_flip: bool,
}

impl Common {
    fn preset(&self) -> Result<ExperimentPreset, PipelineError> {
        let mut preset = match &self.config {
            Some(path) => ExperimentPreset::read_json(path)?,
            None => ExperimentPreset::named(&self.preset)?,
        };
        if let Some(n) = self.order {
            preset.order = n;
        }
        if let Some(s) = self.s {
            preset.s = s;
        }
        if let Some(t) = self.horizon {
            preset.horizon = t;
        }
        if let Some(nx) = self.nx {
            preset.grids.nx = nx;
        }
        if let Some(dt) = self.dt {
            preset.grids.dt = dt;
        }
        preset.sign_flip |= self.sign_flip;
        preset.validate()?;
        Ok(preset)
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(threads) = std::env::var("FLEXBEAM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(VALIDATION_FAILED),
        Err((stage, err)) => {
            eprintln!("flexbeam: {stage} failed: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

type StageResult = Result<bool, (&'static str, PipelineError)>;

fn at<T>(
    stage: &'static str,
    r: Result<T, PipelineError>,
) -> Result<T, (&'static str, PipelineError)> {
    r.map_err(|e| (stage, e))
}

fn dispatch(command: Command) -> StageResult {
    match command {
        Command::Genfun(common) => genfun(&common),
        Command::Synthesize(common) => synthesize_cmd(&common),
        Command::Simulate {
            common,
            input,
            state,
        } => simulate_cmd(&common, input, state),
        Command::Validate {
            common,
            series,
            sim,
        } => validate_cmd(&common, series, sim),
        Command::Run(common) => run_cmd(&common),
    }
}

fn genfun(common: &Common) -> StageResult {
    let preset = at("config", common.preset())?;
    at("output", pipeline::create_dir(&common.out))?;
    let table = at("genfun", build_table(&preset))?;
    let bounds = at("genfun", table.verify_decay_bounds().map_err(Into::into))?;
    let path = common.out_file("genfun.json");
    at("output", write_json(&path, &table.export()))?;
    at(
        "output",
        write_csv_file(&common.out_file("genfun.csv"), |w| table.write_csv(w)),
    )?;
    println!(
        "genfun: N={} R1={:.6e} R2={:.6e} worst bound margins g={:.3} h={:.3} -> {}",
        table.order(),
        table.r1(),
        table.r2(),
        bounds.worst_margin_g,
        bounds.worst_margin_h,
        path.display()
    );
    Ok(true)
}

fn synthesize_cmd(common: &Common) -> StageResult {
    let preset = at("config", common.preset())?;
    at("output", pipeline::create_dir(&common.out))?;
    let table = at("genfun", build_table(&preset))?;
    let traj = at("synthesis", synthesize(&preset, &table, true))?;
    let config = at("config", preset.config())?;
    let report = at("synthesis", residuals(&traj, &config).map_err(Into::into))?;
    at(
        "output",
        write_json(&common.out_file("experiment.json"), &preset),
    )?;
    at(
        "output",
        write_csv_file(&common.out_file("input.csv"), |w| traj.input.write_csv(w)),
    )?;
    at(
        "output",
        write_csv_file(&common.out_file("field.csv"), |w| traj.write_field_csv(w)),
    )?;
    at(
        "output",
        write_json(&common.out_file("state0.json"), &traj.states[0]),
    )?;
    at(
        "output",
        write_json(&common.out_file("residuals.json"), &report),
    )?;
    let f = &traj.input.f;
    println!(
        "synthesize: {} samples, f(0)={:.12} f(T)={:.3e}, pde residual {:.3e}",
        f.len(),
        f[0],
        f[f.len() - 1],
        report.pde
    );
    Ok(true)
}

fn simulate_cmd(common: &Common, input: Option<PathBuf>, state: Option<PathBuf>) -> StageResult {
    let preset = at("config", common.preset())?;
    let input_path = input.unwrap_or_else(|| common.out_file("input.csv"));
    let state_path = state.unwrap_or_else(|| common.out_file("state0.json"));
    let samples = at("input", read_input(&input_path))?;
    let z0: BeamState = at("input", read_json(&state_path))?;
    let config = at("config", preset.config())?;
    let op = at(
        "simulation",
        SimOperator::discretize(&config, preset.grids.nx).map_err(Into::into),
    )?;
    let input = at("input", SampledInput::new(samples).map_err(Into::into))?;
    let mut settings = preset.sim_settings();
    settings.horizon = input.end_time();
    let result = at(
        "simulation",
        simulate(&op, &z0, &input, &settings).map_err(Into::into),
    )?;
    at("output", pipeline::create_dir(&common.out))?;
    at(
        "output",
        write_csv_file(&common.out_file("sim.csv"), |w| result.write_trace_csv(w)),
    )?;
    at(
        "output",
        write_csv_file(&common.out_file("sim_field.csv"), |w| {
            result.write_field_csv(w)
        }),
    )?;
    let last = result.times.len() - 1;
    println!(
        "simulate: nx={} dt={} w(0,T)={:.3e} w_t(0,T)={:.3e}",
        op.intervals(),
        settings.dt,
        result.displacement[last][0],
        result.velocity[last][0]
    );
    Ok(true)
}

fn validate_cmd(common: &Common, series: Option<PathBuf>, sim: Option<PathBuf>) -> StageResult {
    let series_path = series.unwrap_or_else(|| common.out_file("field.csv"));
    let sim_path = sim.unwrap_or_else(|| common.out_file("sim_field.csv"));
    let reference = at("input", read_field(&series_path))?;
    let simulated = at("input", read_field(&sim_path))?;
    let report = at(
        "validation",
        compare_fields(&simulated, &reference).map_err(Into::into),
    )?;
    let limit = Thresholds::default().agreement * report.field_scale;
    at("output", pipeline::create_dir(&common.out))?;
    at(
        "output",
        write_json(&common.out_file("validation.json"), &report),
    )?;
    let passed = report.field.sup <= limit;
    println!(
        "validate: field sup error {:.3e} (limit {:.3e}) tip {:.3e} clamp {:.3e}: {}",
        report.field.sup,
        limit,
        report.tip.sup,
        report.clamp.sup,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(passed)
}

fn run_cmd(common: &Common) -> StageResult {
    let preset = at("config", common.preset())?;
    let bundle = at("pipeline", run_pipeline(&preset, &common.out))?;
    for check in &bundle.summary.validation.checks {
        println!(
            "{:<18} {:>12.4e} <= {:<12.4e} {}",
            check.name,
            check.value,
            check.limit,
            if check.passed { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "run {}: {} ({} files in {})",
        preset.name,
        if bundle.summary.passed {
            "PASS"
        } else {
            "FAIL"
        },
        bundle.files.len(),
        common.out.display()
    );
    Ok(bundle.summary.passed)
}

fn read_input(path: &Path) -> Result<InputSamples, PipelineError> {
    InputSamples::read_csv(open_file(path)?).map_err(|e| PipelineError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_field(path: &Path) -> Result<FieldTable, PipelineError> {
    Ok(FieldTable::read_csv(open_file(path)?)?)
}
