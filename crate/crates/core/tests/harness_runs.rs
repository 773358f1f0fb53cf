mod common;

use common::{deg, users};
use ffsi::harness::experiments::{run_experiment, ExperimentKind, ExperimentSpec};
use ffsi::harness::{measure_methods, Method, ScenarioSource};
use ffsi::scenario::{db_to_linear, Action, Scenario, ScattererMap, ScattererRecord, SystemConstants, UserSet};

/// One UL user and four well separated DL users. With several UL users the
/// LS estimation error leaks between streams and costs a few tenths of a dB.
fn separated_users() -> UserSet {
    users(&[0.0], &[-30.0, 0.0, 30.0, 55.0], 10.0)
}

fn one_scatterer(users: UserSet, angle: f64, inr_db: f64) -> Scenario {
    let rec = ScattererRecord::new(deg(angle), 5, db_to_linear(inr_db));
    Scenario::new(users, ScattererMap::new(vec![rec]).unwrap())
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let consts = SystemConstants::default();
    let sc = ScenarioSource::Fixed(one_scatterer(common::reference_users(), 1.0, 34.0));
    let run = |trials, seed| measure_methods(trials, &sc, &Method::standard(), &consts, seed, 3, 50).unwrap();
    let a = run(1, 77);
    let b = run(1, 77);
    assert_eq!(a, b);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.ul_worst_db.to_bits(), y.ul_worst_db.to_bits());
        assert_eq!(x.ul_worst_ci_db.0.to_bits(), y.ul_worst_ci_db.0.to_bits());
    }
    assert_ne!(run(4, 77)[0].ul_worst_db, run(4, 78)[0].ul_worst_db);
}

#[test]
fn si_free_reaches_the_input_snr() {
    let consts = SystemConstants::default();
    let sc = one_scatterer(separated_users(), 20.0, 34.0);
    let r = measure_methods(400, &ScenarioSource::Fixed(sc), &[Method::SiFree], &consts, 5, 0, 0).unwrap();
    assert!((r[0].ul_worst_db - 10.0).abs() <= 0.3, "{}", r[0].ul_worst_db);
}

#[test]
fn only_dsic_loses_the_residual_factor() {
    let consts = SystemConstants::default();
    let expected = -10.0 * (1.0f64 + 4.0 / 64.0).log10();
    assert!((expected + 0.263).abs() < 1e-3);
    let sc = one_scatterer(separated_users(), 0.0, 34.0);
    let r = measure_methods(400, &ScenarioSource::Fixed(sc), &[Method::OnlyDsic, Method::SiFree], &consts, 6, 0, 0)
        .unwrap();
    assert!((r[0].ul_worst_db - (10.0 + expected)).abs() <= 0.3, "{}", r[0].ul_worst_db);
    assert!((r[0].ul_worst_db - r[1].ul_worst_db - expected).abs() <= 0.3);
}

#[test]
fn downlink_untouched_by_receive_side_methods() {
    let consts = SystemConstants::default();
    let sc = one_scatterer(common::reference_users(), -2.5, 34.0);
    let methods = [Method::SiFree, Method::NoSic, Method::OnlyRx, Method::OnlyDsic];
    let r = measure_methods(100, &ScenarioSource::Fixed(sc), &methods, &consts, 8, 0, 0).unwrap();
    for m in &r[1..] {
        assert!((m.dl_air_mean() - r[0].dl_air_mean()).abs() <= 0.1, "{}", m.method);
    }
}

#[test]
fn only_dsic_is_flat_in_inr() {
    let consts = SystemConstants::default();
    let levels: Vec<f64> = [10.0, 20.0, 30.0, 40.0]
        .iter()
        .map(|&inr| {
            let sc = one_scatterer(common::reference_users(), 0.0, inr);
            measure_methods(300, &ScenarioSource::Fixed(sc), &[Method::OnlyDsic], &consts, 9, 0, 0).unwrap()[0]
                .ul_worst_db
        })
        .collect();
    let hi = levels.iter().cloned().fold(f64::MIN, f64::max);
    let lo = levels.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi - lo <= 0.5, "{levels:?}");
}

#[test]
fn no_sic_collapses_on_strong_echo() {
    let consts = SystemConstants::default();
    let sc = one_scatterer(common::reference_users(), 0.0, 34.0);
    let r = measure_methods(50, &ScenarioSource::Fixed(sc), &[Method::NoSic, Method::SiFree], &consts, 10, 0, 0).unwrap();
    assert!(r[0].ul_worst_db < r[1].ul_worst_db - 15.0, "{} {}", r[0].ul_worst_db, r[1].ul_worst_db);
}

fn small(kind: ExperimentKind) -> (ExperimentSpec, SystemConstants) {
    let consts = SystemConstants::default();
    let mut spec = ExperimentSpec::defaults(kind, &consts);
    spec.trials = 4;
    spec.frames_per_scenario = 2;
    spec.bootstrap = 10;
    spec.angle_grid = vec![-10.0, 0.0, 2.5];
    spec.inr_grid_db = vec![10.0, 30.0];
    spec.count_grid = vec![1, 3];
    spec.random.k_s = 3;
    (spec, consts)
}

#[test]
fn every_experiment_kind_produces_tables() {
    for kind in [
        ExperimentKind::AngleSweep,
        ExperimentKind::Scenario,
        ExperimentKind::RandomMc,
        ExperimentKind::InrSweep,
        ExperimentKind::CountSweep,
        ExperimentKind::Emergence,
    ] {
        let (spec, consts) = small(kind);
        let out = run_experiment(&spec, &consts).unwrap();
        assert!(!out.main.rows.is_empty(), "{kind}");
        for r in &out.main.rows {
            assert_eq!(r.len(), out.main.columns.len());
        }
        let text = out.main.to_csv_string();
        assert!(text.contains(&format!("# experiment: {}", kind.name())), "{kind}");
        assert!(text.contains("# seed: 1"));
        let expected_rows = match kind {
            ExperimentKind::AngleSweep => 3 * spec.methods.len(),
            ExperimentKind::Scenario | ExperimentKind::RandomMc => spec.methods.len(),
            ExperimentKind::InrSweep | ExperimentKind::CountSweep => 2 * spec.methods.len(),
            ExperimentKind::Emergence => 3,
        };
        assert_eq!(out.main.rows.len(), expected_rows, "{kind}");
    }
}

#[test]
fn scenario_assignment_matches_selection() {
    let (spec, consts) = small(ExperimentKind::Scenario);
    let out = run_experiment(&spec, &consts).unwrap();
    let assign = out.extras.iter().find(|d| d.name == "assignment").unwrap();
    let map = ffsi::selection::select_actions(&spec.users, &spec.scatterers, &consts).unwrap();
    assert_eq!(assign.rows.len(), map.len());
    let col = assign.column("action").unwrap();
    for (row, rec) in assign.rows.iter().zip(map.records()) {
        assert_eq!(row[col], rec.action.unwrap().label());
    }
    // the FD-user scatterer at 0 degrees cannot be nulled without hurting
    // the co-located pair
    let zero = map.records().iter().position(|r| r.angle.degrees() == 0.0).unwrap();
    assert_eq!(map.records()[zero].action, Some(Action::Dsic));
}

#[test]
fn seed_changes_results() {
    let (mut spec, consts) = small(ExperimentKind::Scenario);
    spec.methods = vec![Method::Proposed];
    let a = run_experiment(&spec, &consts).unwrap();
    spec.seed = 2;
    let b = run_experiment(&spec, &consts).unwrap();
    assert_ne!(a.main.rows, b.main.rows);
}
