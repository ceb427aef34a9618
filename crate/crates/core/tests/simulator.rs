use flexbeam::beam::{BeamConfig, CoefficientSpec, SpatialGrid};
use flexbeam::genfun::{compute_gen_fun_table, GenFunTable};
use flexbeam::gevrey::{ClosedForm, TrajectorySpec};
use flexbeam::sim::*;
use flexbeam::synthesis::{
    synthesize_field, uniform_times, BeamState, InputSamples, SynthesisParams,
};
use proptest::prelude::*;
use std::sync::OnceLock;

fn lab() -> &'static (BeamConfig, GenFunTable) {
    static CELL: OnceLock<(BeamConfig, GenFunTable)> = OnceLock::new();
    CELL.get_or_init(|| {
        let config = BeamConfig::laboratory();
        let grid = SpatialGrid::uniform(config.length(), 512).unwrap();
        let table = compute_gen_fun_table(&config, &grid, 20).unwrap();
        (config, table)
    })
}

/// Deflected, moving state with `w(L) = c` and `w_t(L) = 0`.
fn plucked(op: &SimOperator, c: f64) -> BeamState {
    let nodes = op.nodes();
    BeamState {
        u: nodes
            .iter()
            .map(|&x| c + 0.03 * (1.0 - 2.0 * x).powi(2))
            .collect(),
        v: nodes.iter().map(|&x| 0.5 * (1.0 - 2.0 * x)).collect(),
        alpha: 0.5,
        beta: 0.2,
        tip_slope: -0.12,
    }
}

#[test]
fn free_vibration_conserves_energy() {
    let op = SimOperator::discretize(&BeamConfig::laboratory(), 150).unwrap();
    for c in [0.0, 0.25] {
        let r = simulate(
            &op,
            &plucked(&op, c),
            &SampledInput::constant(c, 3.0),
            &SimSettings::new(1e-4, 3.0, 100),
        )
        .unwrap();
        assert!(r.energy[0] > 0.0);
        assert!(r.energy_drift() <= 1e-3, "c={c}: {}", r.energy_drift());
        // the clamp holds the commanded position throughout
        assert!(r.displacement.iter().all(|u| *u.last().unwrap() == c));
    }
}

#[test]
fn numerical_damping_dissipates() {
    let op = SimOperator::discretize(&BeamConfig::laboratory(), 64).unwrap();
    let mut settings = SimSettings::new(1e-3, 2.0, 10);
    settings.damping = 0.05;
    let r = simulate(
        &op,
        &plucked(&op, 0.0),
        &SampledInput::constant(0.0, 2.0),
        &settings,
    )
    .unwrap();
    assert!(r.energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    // only the well-resolved modes carry energy here, so the loss is small but strict
    assert!(*r.energy.last().unwrap() < r.energy[0] * (1.0 - 1e-6));
}

#[test]
fn lowest_frequency_is_stable_under_refinement() {
    let config = BeamConfig::laboratory();
    let coarse = SimOperator::discretize(&config, 150)
        .unwrap()
        .frequencies(2);
    let fine = SimOperator::discretize(&config, 300)
        .unwrap()
        .frequencies(2);
    assert!(coarse[0] > 0.0);
    assert!(
        ((coarse[0] - fine[0]) / fine[0]).abs() < 5e-4,
        "{coarse:?} {fine:?}"
    );
    let all = SimOperator::discretize(&config, 150).unwrap().eigenvalues();
    assert!(all.iter().all(|&l| l > 0.0));
}

#[test]
fn uniform_beam_frequency_matches_the_tip_loaded_cantilever() {
    // with a negligible tip body the lowest root of 1 + cos(βL)cosh(βL) = 0 applies
    let (rho, ei) = (0.2, 0.3);
    let config = BeamConfig::new(
        0.5,
        1e-9,
        1e-12,
        &CoefficientSpec::Affine { a: rho, b: 0.0 },
        &CoefficientSpec::Affine { a: ei, b: 0.0 },
    )
    .unwrap();
    let op = SimOperator::discretize(&config, 200).unwrap();
    let beta_l: f64 = 1.875_104_068_711_961;
    let exact = (beta_l / 0.5).powi(2) * (ei / rho).sqrt();
    let got = op.frequencies(1)[0];
    assert!(((got - exact) / exact).abs() < 1e-3, "{got} vs {exact}");
}

#[test]
fn steady_preset_agrees_to_rounding() {
    let (config, table) = lab();
    let spec = TrajectorySpec::new(
        3.0,
        1.5,
        ClosedForm::Constant { value: 0.4 },
        ClosedForm::Constant { value: 0.4 },
    )
    .unwrap();
    let grid = SpatialGrid::uniform(0.5, 64).unwrap();
    let params = SynthesisParams::new(20, uniform_times(3.0, 61), grid);
    let traj = synthesize_field(table, config, &spec, &params).unwrap();
    let op = SimOperator::discretize(config, 64).unwrap();
    let input = SampledInput::new(traj.input.clone()).unwrap();
    let r = simulate(
        &op,
        &traj.states[0],
        &input,
        &SimSettings::new(1e-3, 3.0, 50),
    )
    .unwrap();
    let report = compare_to_flat(&r, &traj).unwrap();
    assert_eq!(report.field.sup, 0.0);
    assert_eq!(report.tip.l2, 0.0);
}

#[test]
fn problem1_field_error_is_second_order() {
    let (config, table) = lab();
    let spec = TrajectorySpec::new(
        3.0,
        1.5,
        ClosedForm::decaying_bump(),
        ClosedForm::Constant { value: 0.0 },
    )
    .unwrap();
    let mut errors = vec![];
    for (nx, dt) in [(40usize, 1e-3f64), (80, 5e-4)] {
        let grid = SpatialGrid::uniform(0.5, nx).unwrap();
        let params = SynthesisParams::new(20, uniform_times(3.0, 151), grid);
        let traj = synthesize_field(table, config, &spec, &params).unwrap();
        let op = SimOperator::discretize(config, nx).unwrap();
        let input = SampledInput::new(traj.input.clone()).unwrap();
        let every = (0.02 / dt).round() as usize;
        let r = simulate(
            &op,
            &traj.states[0],
            &input,
            &SimSettings::new(dt, 3.0, every),
        )
        .unwrap();
        let report = compare_to_flat(&r, &traj).unwrap();
        assert!(report.relative_field_sup() <= 0.02);
        errors.push(report.field.sup);
    }
    let order = (errors[0] / errors[1]).log2();
    assert!(order >= 1.8, "{errors:?}");
}

#[test]
fn comparison_rejects_other_grids() {
    let (config, table) = lab();
    let spec = TrajectorySpec::new(
        3.0,
        1.5,
        ClosedForm::Constant { value: 0.4 },
        ClosedForm::Constant { value: 0.0 },
    )
    .unwrap();
    let params = SynthesisParams::new(
        8,
        uniform_times(3.0, 31),
        SpatialGrid::uniform(0.5, 48).unwrap(),
    );
    let traj = synthesize_field(table, config, &spec, &params).unwrap();
    let op = SimOperator::discretize(config, 64).unwrap();
    let z0 = BeamState::steady(0.4, 65);
    let input = SampledInput::new(traj.input.clone()).unwrap();
    let r = simulate(&op, &z0, &input, &SimSettings::new(1e-2, 3.0, 10)).unwrap();
    assert!(matches!(
        compare_to_flat(&r, &traj),
        Err(SimError::GridMismatch(_))
    ));

    // right nodes, but the simulation stops before the series does
    let op48 = SimOperator::discretize(config, 48).unwrap();
    let r48 = simulate(
        &op48,
        &BeamState::steady(0.4, 49),
        &input,
        &SimSettings::new(1e-2, 1.0, 10),
    )
    .unwrap();
    assert!(matches!(
        compare_to_flat(&r48, &traj),
        Err(SimError::GridMismatch(_))
    ));
}

#[test]
fn field_csv_round_trip() {
    let op = SimOperator::discretize(&BeamConfig::laboratory(), 40).unwrap();
    let r = simulate(
        &op,
        &plucked(&op, 0.0),
        &SampledInput::constant(0.0, 0.1),
        &SimSettings::new(1e-3, 0.1, 20),
    )
    .unwrap();
    let mut buf = vec![];
    r.write_field_csv(&mut buf).unwrap();
    let table = FieldTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(table.times, r.times);
    assert_eq!(table.nodes, r.nodes);
    assert_eq!(table.values, r.displacement);
    let report = compare_fields(&FieldTable::from_sim(&r), &table).unwrap();
    assert_eq!(report.field.sup, 0.0);

    let mut trace = vec![];
    r.write_trace_csv(&mut trace).unwrap();
    let text = String::from_utf8(trace).unwrap();
    assert_eq!(text.lines().next(), Some("t,w0,wx0,E"));
    assert_eq!(text.lines().count(), r.times.len() + 1);

    let ragged = "t,x,w\n0,0,1\n0,0.5,1\n0.1,0,1\n";
    assert!(matches!(
        FieldTable::read_csv(ragged.as_bytes()),
        Err(SimError::GridMismatch(_))
    ));
    assert!(matches!(
        FieldTable::read_csv("t,w\n0,1\n".as_bytes()),
        Err(SimError::Parse(_))
    ));
}

#[test]
fn bad_inputs_are_reported() {
    let op = SimOperator::discretize(&BeamConfig::laboratory(), 40).unwrap();
    let z0 = BeamState::steady(0.0, 41);
    let still = SampledInput::constant(0.0, 1.0);
    assert!(matches!(
        simulate(&op, &z0, &still, &SimSettings::new(0.3, 1.0, 1)),
        Err(SimError::BadSettings(_))
    ));
    assert!(matches!(
        simulate(
            &op,
            &BeamState::steady(0.0, 40),
            &still,
            &SimSettings::new(0.1, 1.0, 1)
        ),
        Err(SimError::DimensionMismatch { .. })
    ));
    let mut samples = InputSamples {
        t: vec![0.0, 0.5, 1.0],
        f: vec![0.0, f64::NAN, 0.0],
        f_t: vec![0.0; 3],
        f_tt: vec![0.0; 3],
    };
    let nan = SampledInput::new(samples.clone()).unwrap();
    assert!(matches!(
        simulate(&op, &z0, &nan, &SimSettings::new(0.1, 1.0, 1)),
        Err(SimError::NonFiniteState { .. })
    ));
    samples.t[2] = 0.5;
    assert!(SampledInput::new(samples).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stiffness_is_symmetric_for_any_affine_beam(
        a_rho in 0.05f64..1.0, b_rho in -0.5f64..4.0,
        a_ei in 0.05f64..1.0, b_ei in -0.5f64..4.0,
        nx in 32usize..90,
    ) {
        let config = BeamConfig::new(
            0.5, 0.3, 1e-4,
            &CoefficientSpec::Affine { a: a_rho, b: b_rho },
            &CoefficientSpec::Affine { a: a_ei, b: b_ei },
        ).unwrap();
        let op = SimOperator::discretize(&config, nx).unwrap();
        prop_assert!(op.asymmetry() <= 1e-12);
        prop_assert!(op.eigenvalues()[0] > 0.0);
    }

    #[test]
    fn energy_is_a_nonnegative_quadratic_form(
        u in prop::collection::vec(-1.0f64..1.0, 41),
        v in prop::collection::vec(-1.0f64..1.0, 41),
        slope in -1.0f64..1.0, rate in -1.0f64..1.0, k in -3.0f64..3.0,
    ) {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 40).unwrap();
        let state = BeamState { alpha: v[0], beta: rate, tip_slope: slope, u: u.clone(), v: v.clone() };
        let e = op.energy(&state).unwrap();
        prop_assert!(e >= 0.0);
        let scaled = BeamState {
            alpha: k * v[0], beta: k * rate, tip_slope: k * slope,
            u: u.iter().map(|x| k * x).collect(),
            v: v.iter().map(|x| k * x).collect(),
        };
        let es = op.energy(&scaled).unwrap();
        prop_assert!((es - k * k * e).abs() <= 1e-10 * e.max(1e-300) * (1.0 + k * k));
    }

    #[test]
    fn rigid_shift_stores_no_strain(c in -2.0f64..2.0) {
        let op = SimOperator::discretize(&BeamConfig::laboratory(), 40).unwrap();
        prop_assert_eq!(op.energy(&BeamState::steady(c, 41)).unwrap(), 0.0);
    }
}
