#![allow(dead_code)]

use ffsi::array_geometry::AngleDeg;
use ffsi::scenario::{Action, RfcLimits, ScattererMap, ScattererRecord, UserSet};
use ffsi::selection::{ActionMetricTable, TIE_BREAK_ORDER};
use proptest::prelude::*;

pub fn deg(v: f64) -> AngleDeg {
    AngleDeg::new(v).unwrap()
}

pub fn users(ul: &[f64], dl: &[f64], p: f64) -> UserSet {
    UserSet::with_powers(ul.iter().map(|&a| deg(a)).collect(), dl.iter().map(|&a| deg(a)).collect(), p, p).unwrap()
}

pub fn reference_users() -> UserSet {
    users(&[0.0, 2.5, 7.5, 12.5], &[0.0, -2.5, -7.5, -12.5], 10.0)
}

/// Scatterers at the given angles with delays 1, 2, ... and a common power.
pub fn map_at(angles: &[f64], power: f64, action: Action) -> ScattererMap {
    let recs = angles
        .iter()
        .enumerate()
        .map(|(i, &a)| ScattererRecord::new(deg(a), i + 1, power))
        .collect();
    ScattererMap::new(recs).unwrap().with_uniform_action(action)
}

pub fn angle() -> impl Strategy<Value = f64> {
    -80.0f64..80.0
}

pub fn user_set() -> impl Strategy<Value = UserSet> {
    (
        prop::collection::vec(angle(), 1..=4),
        prop::collection::vec(angle(), 1..=4),
    )
        .prop_map(|(ul, dl)| users(&ul, &dl, 10.0))
}

/// Exhaustive search: among all capacity-feasible assignments, take the one
/// whose per-scatterer preference ranks, read in severity order, are
/// lexicographically smallest.
pub fn brute_force(table: &ActionMetricTable, limits: &RfcLimits) -> Vec<Action> {
    let k = table.rows.len();
    let caps = limits.capacities(k);
    // severity: ascending NA metric, lower index first
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| table.rows[a][0].partial_cmp(&table.rows[b][0]).unwrap().then(a.cmp(&b)));
    let rank = |s: usize, a: Action| -> usize {
        // preference list: metric descending, ties in tie-break order
        let mut prefs = TIE_BREAK_ORDER.to_vec();
        prefs.sort_by(|&x, &y| table.rows[s][y.index()].partial_cmp(&table.rows[s][x.index()]).unwrap());
        prefs.iter().position(|&p| p == a).unwrap()
    };
    let mut best: Option<(Vec<usize>, Vec<Action>)> = None;
    for code in 0..4usize.pow(k as u32) {
        let actions: Vec<Action> = (0..k).map(|i| Action::ALL[(code / 4usize.pow(i as u32)) % 4]).collect();
        let mut used = [0usize; 4];
        for a in &actions {
            used[a.index()] += 1;
        }
        if (0..4).any(|i| used[i] > caps[i]) {
            continue;
        }
        let key: Vec<usize> = order.iter().map(|&s| rank(s, actions[s])).collect();
        if best.as_ref().is_none_or(|(bk, _)| key < *bk) {
            best = Some((key, actions));
        }
    }
    best.unwrap().1
}
