mod common;

use common::*;
use ffsi::scenario::{Action, RfcLimits, ScattererRecord, SystemConstants};
use ffsi::selection::{assign_actions, prior_metrics, ActionMetricTable, TIE_BREAK_ORDER};
use proptest::prelude::*;

fn limit() -> impl Strategy<Value = Option<usize>> {
    prop_oneof![Just(None), (0usize..4).prop_map(Some)]
}

fn limits() -> impl Strategy<Value = RfcLimits> {
    (limit(), limit(), limit(), limit()).prop_map(|(na, rx, tx, dsic)| RfcLimits { na, rx, tx, dsic })
}

/// Metric rows from a small value set so ties show up often.
fn table(max_k: usize) -> impl Strategy<Value = ActionMetricTable> {
    let v = prop::sample::select(vec![0.1, 0.5, 0.9, 0.94, 0.97, 1.0]);
    prop::collection::vec(prop::array::uniform4(v), 1..=max_k).prop_map(|rows| ActionMetricTable { rows })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn greedy_equals_exhaustive(t in table(4), l in limits()) {
        match assign_actions(&t, &l) {
            Ok(a) => prop_assert_eq!(a.actions, brute_force(&t, &l)),
            Err(_) => prop_assert!(l.capacities(t.rows.len()).iter().sum::<usize>() < t.rows.len()),
        }
    }

    #[test]
    fn relabeling_permutes_assignment(
        rows in prop::collection::vec(prop::array::uniform4(0.0f64..1.0), 1..8),
        l in limits(),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let t = ActionMetricTable { rows: rows.clone() };
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let tp = ActionMetricTable { rows: perm.iter().map(|&i| rows[i]).collect() };
        if let (Ok(a), Ok(b)) = (assign_actions(&t, &l), assign_actions(&tp, &l)) {
            for (j, &i) in perm.iter().enumerate() {
                prop_assert_eq!(b.actions[j], a.actions[i]);
            }
        }
    }

    #[test]
    fn metrics_in_unit_interval(users in user_set(), s in angle(), inr in -10.0f64..50.0) {
        let consts = SystemConstants::default();
        let rec = ScattererRecord::new(deg(s), 0, 10f64.powf(inr / 10.0));
        let m = prior_metrics(&users, &rec, &consts).unwrap();
        for a in Action::ALL {
            for &v in m.get(a).ul.iter().chain(&m.get(a).dl) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{a}: {v}");
                if a == Action::NoAction {
                    prop_assert!(v > 0.0);
                }
            }
        }
        let d = 1.0 / (1.0 + users.k_d() as f64 / 64.0);
        prop_assert!(m.get(Action::Dsic).ul.iter().all(|&v| (v - d).abs() < 1e-15));
    }

    #[test]
    fn unlimited_is_rowwise_argmax(t in table(8)) {
        let a = assign_actions(&t, &RfcLimits::unlimited()).unwrap();
        for (k, row) in t.rows.iter().enumerate() {
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(row[a.actions[k].index()], best);
            let first = TIE_BREAK_ORDER.iter().find(|b| row[b.index()] == best).unwrap();
            prop_assert_eq!(a.actions[k], *first);
        }
    }
}

#[test]
fn scarce_rx_goes_to_most_severe() {
    let consts = SystemConstants::default();
    let users = reference_users();
    // three scatterers near DL users, Rx preferred for all
    let map = map_at(&[-30.0, -7.5, -12.5], 10f64.powf(3.4), Action::NoAction);
    let t = ActionMetricTable::from_scenario(&users, &map, &consts).unwrap();
    let l: RfcLimits = "rx=1".parse().unwrap();
    let got = assign_actions(&t, &l).unwrap();
    assert_eq!(got.actions, brute_force(&t, &l));
    assert_eq!(got.set(Action::Rx).len(), 1);
}
