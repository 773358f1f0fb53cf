//! Prior performance metrics per scatterer and action, and greedy action
//! assignment under RF-chain limits.
//!
//! Metrics are normalized SINR (UL) and SNR (DL) predictions relative to the
//! SI-free case, computed with conventional beams and one scatterer at a time.

use crate::array_geometry::beam_correlation;
use crate::scenario::{Action, RfcLimits, ScattererMap, ScattererRecord, SystemConstants, UserSet};
use crate::{Error, Result};

/// Order used to break exact ties in the per-scatterer argmax.
pub const TIE_BREAK_ORDER: [Action; 4] = [Action::NoAction, Action::Tx, Action::Rx, Action::Dsic];

#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub ul: Vec<f64>,
    pub dl: Vec<f64>,
}

/// Per-user normalized metrics of one scatterer for every action.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMetrics {
    by_action: [UserMetrics; 4],
}

impl PriorMetrics {
    pub fn get(&self, a: Action) -> &UserMetrics {
        &self.by_action[a.index()]
    }
}

pub fn prior_metrics(users: &UserSet, rec: &ScattererRecord, consts: &SystemConstants) -> Result<PriorMetrics> {
    let n = consts.n_antennas;
    let q_us: Vec<f64> = users
        .ul_angles
        .iter()
        .map(|&a| beam_correlation(a, rec.angle, n))
        .collect::<Result<_>>()?;
    let q_ds: Vec<f64> = users
        .dl_angles
        .iter()
        .map(|&a| beam_correlation(a, rec.angle, n))
        .collect::<Result<_>>()?;
    let inr = rec.power / consts.noise_power;
    let sum_ds: f64 = q_ds.iter().sum();
    let ones_ul = vec![1.0; users.k_u()];
    let ones_dl = vec![1.0; users.k_d()];
    let dsic = 1.0 / (1.0 + users.k_d() as f64 / consts.n_training as f64);
    Ok(PriorMetrics {
        by_action: [
            UserMetrics {
                ul: q_us.iter().map(|q| 1.0 / (1.0 + inr * sum_ds * q)).collect(),
                dl: ones_dl.clone(),
            },
            UserMetrics {
                ul: q_us.iter().map(|q| 1.0 - q).collect(),
                dl: ones_dl.clone(),
            },
            UserMetrics {
                ul: ones_ul.clone(),
                dl: q_ds.iter().map(|q| 1.0 - q).collect(),
            },
            UserMetrics {
                ul: vec![dsic; users.k_u()],
                dl: ones_dl,
            },
        ],
    })
}

/// Arithmetic mean over all UL and DL users.
pub fn mean_metric(m: &UserMetrics) -> f64 {
    let n = m.ul.len() + m.dl.len();
    assert!(n > 0, "mean metric needs at least one user");
    (m.ul.iter().sum::<f64>() + m.dl.iter().sum::<f64>()) / n as f64
}

/// `γ̄` for every scatterer (rows) and action (columns in [`Action::ALL`] order).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMetricTable {
    pub rows: Vec<[f64; 4]>,
}

impl ActionMetricTable {
    pub fn from_scenario(users: &UserSet, map: &ScattererMap, consts: &SystemConstants) -> Result<Self> {
        let rows = map
            .records()
            .iter()
            .map(|r| {
                let m = prior_metrics(users, r, consts)?;
                Ok(Action::ALL.map(|a| mean_metric(m.get(a))))
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn get(&self, k: usize, a: Action) -> f64 {
        self.rows[k][a.index()]
    }
}

/// One action per scatterer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionAssignment {
    pub actions: Vec<Action>,
}

impl ActionAssignment {
    pub fn set(&self, a: Action) -> Vec<usize> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == a)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Scatterer indices from most to least severe (ascending `γ̄^NA`, lowest
/// index first on ties).
pub fn severity_order(table: &ActionMetricTable) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    order.sort_by(|&a, &b| {
        table
            .get(a, Action::NoAction)
            .total_cmp(&table.get(b, Action::NoAction))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy assignment: the most severe scatterer picks first, each takes its
/// best action among those with capacity left.
pub fn assign_actions(table: &ActionMetricTable, limits: &RfcLimits) -> Result<ActionAssignment> {
    let k_s = table.rows.len();
    let mut capacity = limits.capacities(k_s);
    if capacity.iter().sum::<usize>() < k_s {
        return Err(Error::Config(format!(
            "RF-chain limits {limits} cannot host {k_s} scatterers"
        )));
    }
    let mut actions = vec![Action::NoAction; k_s];
    for k in severity_order(table) {
        let mut best: Option<Action> = None;
        for a in TIE_BREAK_ORDER {
            if capacity[a.index()] == 0 {
                continue;
            }
            if best.is_none_or(|b| table.get(k, a) > table.get(k, b)) {
                best = Some(a);
            }
        }
        let a = best.expect("total capacity covers every scatterer");
        capacity[a.index()] -= 1;
        actions[k] = a;
    }
    Ok(ActionAssignment { actions })
}

/// Runs the policy on `map` and returns it with the chosen actions.
pub fn select_actions(users: &UserSet, map: &ScattererMap, consts: &SystemConstants) -> Result<ScattererMap> {
    select_actions_with_limits(users, map, consts, &consts.rfc_limits)
}

pub fn select_actions_with_limits(
    users: &UserSet,
    map: &ScattererMap,
    consts: &SystemConstants,
    limits: &RfcLimits,
) -> Result<ScattererMap> {
    let table = ActionMetricTable::from_scenario(users, map, consts)?;
    let assignment = assign_actions(&table, limits)?;
    map.with_actions(&assignment.actions)
}
