use flexbeam::beam::{BeamConfig, SpatialGrid};
use flexbeam::genfun::{compute_gen_fun_table, GenFunTable};
use flexbeam::gevrey::{p_jet, ClosedForm, TrajectorySpec};
use flexbeam::jet::Jet;
use flexbeam::numeric::pair_term;
use flexbeam::synthesis::*;
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

fn field_grid() -> SpatialGrid {
    SpatialGrid::uniform(0.5, 150).unwrap()
}

fn problem1() -> TrajectorySpec {
    TrajectorySpec::new(
        3.0,
        1.5,
        ClosedForm::decaying_bump(),
        ClosedForm::Constant { value: 0.0 },
    )
    .unwrap()
}

fn problem2() -> TrajectorySpec {
    TrajectorySpec::new(
        3.0,
        1.5,
        ClosedForm::Constant { value: 0.4 },
        ClosedForm::Constant { value: 0.0 },
    )
    .unwrap()
}

#[test]
fn rest_to_rest_input_endpoints() {
    let (_, table) = lab();
    let params = SynthesisParams::new(20, uniform_times(3.0, 61), field_grid());
    let input = synthesize_input(table, &problem2(), &params).unwrap();
    assert!((input.f[0] - 0.4).abs() <= 1e-9);
    assert!(input.f[60].abs() <= 1e-9);
    assert_eq!(input.f_t[0], 0.0);
    assert_eq!(input.f_tt[60], 0.0);
    let p1 = synthesize_input(table, &problem1(), &params).unwrap();
    assert!(p1.f[60].abs() <= 1e-9);
}

#[test]
fn endpoint_states() {
    let (config, table) = lab();
    let params = SynthesisParams::new(20, uniform_times(3.0, 61), field_grid());
    let start = initial_state_from_p(table, config, &problem2(), &params, Endpoint::Start).unwrap();
    assert_eq!(start, BeamState::steady(0.4, 151));
    let end = initial_state_from_p(table, config, &problem2(), &params, Endpoint::End).unwrap();
    assert_eq!(end, BeamState::steady(0.0, 151));

    let moving =
        initial_state_from_p(table, config, &problem1(), &params, Endpoint::Start).unwrap();
    let speed = moving.v.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(speed > 1e-3, "Problem 1 starts in motion, got {speed}");
    // the state lies in the domain of the clamped-end model
    assert!(moving.v[0] == moving.alpha);
}

#[test]
fn synthesized_ends_match_endpoint_states() {
    let (config, table) = lab();
    let params = SynthesisParams::new(20, uniform_times(3.0, 61), field_grid());
    let spec = problem1();
    let traj = synthesize_field(table, config, &spec, &params).unwrap();
    let start = initial_state_from_p(table, config, &spec, &params, Endpoint::Start).unwrap();
    let end = initial_state_from_p(table, config, &spec, &params, Endpoint::End).unwrap();
    let scale = start.sup_norm();
    assert!(traj.states[0].max_abs_diff(&start) <= 1e-10 * scale);
    assert!(traj.states[60].max_abs_diff(&end) <= 1e-10 * scale);
}

#[test]
fn flat_output_terms_decay() {
    let (_, table) = lab();
    let p = p_jet(1.5, &problem1(), 44).unwrap();
    let ends = table.endpoints();
    let terms: Vec<f64> = (0..=20)
        .map(|k| pair_term(ends[k][3], 2 * k, p.coeffs()[2 * k]).abs())
        .collect();
    for k in 2..20 {
        assert!(
            terms[k + 1] < terms[k],
            "k={k}: {:e} vs {:e}",
            terms[k + 1],
            terms[k]
        );
    }
}

#[test]
fn commutation_on_problem1() {
    let (_, table) = lab();
    let spec = problem1();
    let jets: Vec<Jet> = uniform_times(3.0, 61)
        .iter()
        .map(|&t| p_jet(t, &spec, 80).unwrap())
        .collect();
    let r = check_commutation(table, &jets, 20).unwrap();
    assert_eq!(r.paired_diff, 0.0);
    assert!(r.relative() <= 1e-12, "{r:?}");
}

#[test]
fn residuals_shrink_with_order() {
    let (config, table) = lab();
    let spec = problem2();
    // A field grid whose nodes are generating-function nodes, so the
    // residuals carry no interpolation error.
    let aligned = SpatialGrid::uniform(0.5, 128).unwrap();
    let floor = 1e-14;
    let mut previous: Option<ResidualReport> = None;
    for n in [1, 2, 3, 4, 5, 10, 15, 20] {
        let mut params = SynthesisParams::new(n, uniform_times(3.0, 61), aligned.clone());
        params.extended = true;
        let traj = synthesize_field(table, config, &spec, &params).unwrap();
        let r = residuals(&traj, config).unwrap();
        if let Some(prev) = previous {
            for (now, before) in [(r.pde, prev.pde), (r.tip_force, prev.tip_force)] {
                assert!(
                    now <= before / 10.0 || now <= floor,
                    "N={n}: {now:e} after {before:e}"
                );
            }
        }
        previous = Some(r);
    }
    let last = previous.unwrap();
    assert!(last.pde <= floor && last.tip_force <= floor && last.tip_moment <= floor);
}

#[test]
fn residual_floor_on_the_simulator_grid() {
    let (config, table) = lab();
    let mut params = SynthesisParams::new(20, uniform_times(3.0, 61), field_grid());
    params.extended = true;
    let traj = synthesize_field(table, config, &problem2(), &params).unwrap();
    let r = residuals(&traj, config).unwrap();
    // interpolating the tables between their nodes costs about 1e-9 here
    assert!(r.pde < 1e-7, "{r:?}");
    assert_eq!(r.clamp_slope, 0.0);
}

#[test]
fn clamp_slope_within_tail_bound() {
    let (config, table) = lab();
    let spec = problem1();
    let params = SynthesisParams::new(20, uniform_times(3.0, 61), field_grid());
    let traj = synthesize_field(table, config, &spec, &params).unwrap();
    for (i, &t) in params.times.iter().enumerate() {
        let p = p_jet(t, &spec, 2 * (20 + TAIL_TERMS)).unwrap();
        let bound = tail_bound(table, &p, 20, TAIL_TERMS).unwrap();
        assert!(traj.clamp_slope[i].abs() <= bound);
    }
}

#[test]
fn synthesis_is_linear_in_p() {
    let (config, table) = lab();
    let params = SynthesisParams::new(12, uniform_times(3.0, 31), field_grid());
    let (s1, s2) = (problem1(), problem2());
    let (a, b) = (0.7, -1.3);
    let t1 = synthesize_field(table, config, &s1, &params).unwrap();
    let t2 = synthesize_field(table, config, &s2, &params).unwrap();
    let combo = synthesize_with(table, config, &params, |t| {
        let p = p_jet(t, &s1, params.jet_order)?.scale(a);
        let q = p_jet(t, &s2, params.jet_order)?.scale(b);
        Ok(p.add(&q).unwrap())
    })
    .unwrap();
    for i in 0..31 {
        let expect = a * t1.input.f[i] + b * t2.input.f[i];
        assert!((combo.input.f[i] - expect).abs() <= 1e-13 * (1.0 + expect.abs()));
    }
}

#[test]
fn sign_flip_changes_only_the_input() {
    let (config, table) = lab();
    let mut params = SynthesisParams::new(20, uniform_times(3.0, 31), field_grid());
    let plain = synthesize_field(table, config, &problem2(), &params).unwrap();
    params.sign_flip = true;
    let flipped = synthesize_field(table, config, &problem2(), &params).unwrap();
    assert_eq!(plain.states, flipped.states);
    let gap = plain
        .input
        .f
        .iter()
        .zip(&flipped.input.f)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap > 1e-3);
}

#[test]
fn input_csv_round_trip() {
    let (_, table) = lab();
    let params = SynthesisParams::new(20, uniform_times(3.0, 11), field_grid());
    let input = synthesize_input(table, &problem1(), &params).unwrap();
    let mut buf = Vec::new();
    input.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t,f,f_t,f_tt\n"));
    assert_eq!(InputSamples::read_csv(buf.as_slice()).unwrap(), input);
}
