//! Deployment geometry, scatterer map, system constants and link budget.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array_geometry::AngleDeg;
use crate::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Mitigation action for one scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "NA")]
    NoAction,
    Rx,
    Tx,
    #[serde(rename = "DSIC")]
    Dsic,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::NoAction, Action::Rx, Action::Tx, Action::Dsic];

    pub fn index(self) -> usize {
        match self {
            Action::NoAction => 0,
            Action::Rx => 1,
            Action::Tx => 2,
            Action::Dsic => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::NoAction => "NA",
            Action::Rx => "Rx",
            Action::Tx => "Tx",
            Action::Dsic => "DSIC",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Action {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "na" | "none" => Ok(Action::NoAction),
            "rx" => Ok(Action::Rx),
            "tx" => Ok(Action::Tx),
            "dsic" => Ok(Action::Dsic),
            _ => Err(Error::Config(format!("unknown action '{s}'"))),
        }
    }
}

/// Per-action RF-chain limits `L_a`; `None` means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RfcLimits {
    #[serde(default)]
    pub na: Option<usize>,
    #[serde(default)]
    pub rx: Option<usize>,
    #[serde(default)]
    pub tx: Option<usize>,
    #[serde(default)]
    pub dsic: Option<usize>,
}

impl RfcLimits {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn get(&self, a: Action) -> Option<usize> {
        match a {
            Action::NoAction => self.na,
            Action::Rx => self.rx,
            Action::Tx => self.tx,
            Action::Dsic => self.dsic,
        }
    }

    pub fn set(&mut self, a: Action, limit: Option<usize>) {
        match a {
            Action::NoAction => self.na = limit,
            Action::Rx => self.rx = limit,
            Action::Tx => self.tx = limit,
            Action::Dsic => self.dsic = limit,
        }
    }

    /// Capacity of each action for `k_s` scatterers.
    pub fn capacities(&self, k_s: usize) -> [usize; 4] {
        Action::ALL.map(|a| self.get(a).unwrap_or(k_s).min(k_s))
    }

    pub fn is_unlimited(&self) -> bool {
        Action::ALL.iter().all(|&a| self.get(a).is_none())
    }
}

impl FromStr for RfcLimits {
    type Err = Error;
    /// Parses `rx=2,tx=2` (keys `na`, `rx`, `tx`, `dsic`; value `inf` = unlimited).
    fn from_str(s: &str) -> Result<Self> {
        let mut limits = RfcLimits::unlimited();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("limit '{part}' is not key=value")))?;
            let action: Action = k.trim().parse()?;
            let v = v.trim();
            let limit = if v.eq_ignore_ascii_case("inf") {
                None
            } else {
                Some(v.parse::<usize>().map_err(|_| {
                    Error::Config(format!("limit value '{v}' is not a non-negative integer"))
                })?)
            };
            limits.set(action, limit);
        }
        Ok(limits)
    }
}

impl fmt::Display for RfcLimits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Action::ALL
            .iter()
            .map(|&a| match self.get(a) {
                Some(l) => format!("{}={l}", a.label().to_ascii_lowercase()),
                None => format!("{}=inf", a.label().to_ascii_lowercase()),
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    pub n_training: usize,
    pub noise_power: f64,
    #[serde(default)]
    pub rfc_limits: RfcLimits,
}

impl Default for SystemConstants {
    fn default() -> Self {
        Self {
            n_antennas: 32,
            n_subcarriers: 1024,
            n_training: 64,
            noise_power: 1.0,
            rfc_limits: RfcLimits::unlimited(),
        }
    }
}

impl SystemConstants {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(Error::Config("n_antennas must be positive".into()));
        }
        if self.n_training < 2 || self.n_training > self.n_subcarriers {
            return Err(Error::Config(format!(
                "n_training = {} must lie in [2, n_subcarriers = {}]",
                self.n_training, self.n_subcarriers
            )));
        }
        if self.n_subcarriers % self.n_training != 0 {
            return Err(Error::Config(format!(
                "n_subcarriers = {} must be a multiple of n_training = {}",
                self.n_subcarriers, self.n_training
            )));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Config("noise_power must be positive".into()));
        }
        Ok(())
    }

    /// Uniformly spaced training subcarriers `{0, N_c/N_tr, 2N_c/N_tr, ...}`.
    pub fn training_columns(&self) -> Vec<usize> {
        let step = self.n_subcarriers / self.n_training;
        (0..self.n_training).map(|i| i * step).collect()
    }

    /// Subcarriers that carry data.
    pub fn data_columns(&self) -> Vec<usize> {
        let step = self.n_subcarriers / self.n_training;
        (0..self.n_subcarriers).filter(|m| m % step != 0).collect()
    }

    /// Size of the delay search set `{0, ..., N_tr − 1}`.
    pub fn delay_set_len(&self) -> usize {
        self.n_training
    }
}

/// Angles and channel variances of the UL and DL users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSet {
    pub ul_angles: Vec<AngleDeg>,
    pub dl_angles: Vec<AngleDeg>,
    pub ul_powers: Vec<f64>,
    pub dl_powers: Vec<f64>,
}

impl UserSet {
    pub fn new(
        ul_angles: Vec<AngleDeg>,
        dl_angles: Vec<AngleDeg>,
        ul_powers: Vec<f64>,
        dl_powers: Vec<f64>,
    ) -> Result<Self> {
        let u = UserSet {
            ul_angles,
            dl_angles,
            ul_powers,
            dl_powers,
        };
        u.validate()?;
        Ok(u)
    }

    /// Same variance for every UL user and every DL user.
    pub fn with_powers(ul: Vec<AngleDeg>, dl: Vec<AngleDeg>, p_u: f64, p_d: f64) -> Result<Self> {
        let (ku, kd) = (ul.len(), dl.len());
        Self::new(ul, dl, vec![p_u; ku], vec![p_d; kd])
    }

    pub fn validate(&self) -> Result<()> {
        if self.ul_angles.is_empty() || self.dl_angles.is_empty() {
            return Err(Error::Config("need at least one UL and one DL user".into()));
        }
        if self.ul_angles.len() != self.ul_powers.len() || self.dl_angles.len() != self.dl_powers.len() {
            return Err(Error::Config("user angle and power lists differ in length".into()));
        }
        if self
            .ul_powers
            .iter()
            .chain(&self.dl_powers)
            .any(|&p| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::Config("user powers must be positive".into()));
        }
        Ok(())
    }

    pub fn k_u(&self) -> usize {
        self.ul_angles.len()
    }

    pub fn k_d(&self) -> usize {
        self.dl_angles.len()
    }

    pub fn mirrored(&self) -> Self {
        UserSet {
            ul_angles: self.ul_angles.iter().map(|a| a.mirrored()).collect(),
            dl_angles: self.dl_angles.iter().map(|a| a.mirrored()).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererRecord {
    pub angle: AngleDeg,
    pub delay: usize,
    pub power: f64,
    /// `None` while unassigned.
    pub action: Option<Action>,
}

impl ScattererRecord {
    pub fn new(angle: AngleDeg, delay: usize, power: f64) -> Self {
        Self {
            angle,
            delay,
            power,
            action: None,
        }
    }
}

/// Ordered scatterer records; the index of a record is its scatterer label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScattererMap {
    records: Vec<ScattererRecord>,
}

impl ScattererMap {
    pub fn new(records: Vec<ScattererRecord>) -> Result<Self> {
        if records.iter().any(|r| !(r.power > 0.0 && r.power.is_finite())) {
            return Err(Error::Config("scatterer powers must be positive".into()));
        }
        Ok(Self { records })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[ScattererRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Indices of scatterers assigned to `a`, ascending.
    pub fn action_set(&self, a: Action) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.action == Some(a))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn unassigned(&self) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.action.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// New map with one action per record.
    pub fn with_actions(&self, actions: &[Action]) -> Result<Self> {
        if actions.len() != self.records.len() {
            return Err(Error::Domain(format!(
                "{} actions for {} scatterers",
                actions.len(),
                self.records.len()
            )));
        }
        let records = self
            .records
            .iter()
            .zip(actions)
            .map(|(r, &a)| ScattererRecord {
                action: Some(a),
                ..r.clone()
            })
            .collect();
        Ok(Self { records })
    }

    /// Every record assigned the same action.
    pub fn with_uniform_action(&self, a: Action) -> Self {
        self.with_actions(&vec![a; self.len()]).expect("lengths match")
    }

    /// New map with `record` appended; returns its index.
    pub fn with_record(&self, record: ScattererRecord) -> (Self, usize) {
        let mut records = self.records.clone();
        records.push(record);
        let idx = records.len() - 1;
        (Self { records }, idx)
    }

    pub fn delays(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.delay).collect()
    }

    pub fn mirrored(&self) -> Self {
        Self {
            records: self
                .records
                .iter()
                .map(|r| ScattererRecord {
                    angle: r.angle.mirrored(),
                    ..r.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub users: UserSet,
    pub map: ScattererMap,
}

impl Scenario {
    pub fn new(users: UserSet, map: ScattererMap) -> Self {
        Self { users, map }
    }

    pub fn validate(&self, consts: &SystemConstants) -> Result<()> {
        consts.validate()?;
        self.users.validate()?;
        if let Some(r) = self.map.records().iter().find(|r| r.delay >= consts.delay_set_len()) {
            return Err(Error::Config(format!(
                "scatterer delay {} outside the delay set [0, {})",
                r.delay,
                consts.delay_set_len()
            )));
        }
        Ok(())
    }
}

/// Physical parameters for deriving channel variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub wavelength: f64,
    pub ue_tx_power: f64,
    pub bs_tx_power: f64,
    pub rcs: f64,
    pub user_distance: f64,
    pub scatterer_distance: f64,
}

/// Friis (user) and radar-equation (scatterer) channel variances `(P_u, P_s)`.
pub fn channel_variances(lb: &LinkBudget, consts: &SystemConstants, k_d: usize) -> Result<(f64, f64)> {
    let fields = [
        lb.wavelength,
        lb.ue_tx_power,
        lb.bs_tx_power,
        lb.rcs,
        lb.user_distance,
        lb.scatterer_distance,
    ];
    if fields.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain("link budget entries must be positive".into()));
    }
    if k_d == 0 || consts.n_antennas == 0 {
        return Err(Error::Domain("need K_d ≥ 1 and N_a ≥ 1".into()));
    }
    let na = consts.n_antennas as f64;
    let l2 = lb.wavelength * lb.wavelength;
    let p_u = lb.ue_tx_power * na * l2 / ((4.0 * PI).powi(2) * lb.user_distance.powi(2));
    let p_s = lb.bs_tx_power * na * na * l2 * lb.rcs
        / (k_d as f64 * (4.0 * PI).powi(3) * lb.scatterer_distance.powi(4));
    Ok((p_u, p_s))
}

/// Parameters of a randomized deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomScenarioSpec {
    pub k_u: usize,
    pub k_d: usize,
    pub k_s: usize,
    pub angle_range: (f64, f64),
    pub fd_user_at_zero: bool,
    pub ul_power: f64,
    pub dl_power: f64,
    pub scatterer_power: f64,
}

/// Deterministic random deployment for a seed.
pub fn random_scenario(seed: u64, spec: &RandomScenarioSpec, consts: &SystemConstants) -> Result<Scenario> {
    random_scenario_with(&mut ChaCha8Rng::seed_from_u64(seed), spec, consts)
}

/// Random deployment drawn from a caller-owned RNG.
pub fn random_scenario_with<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &RandomScenarioSpec,
    consts: &SystemConstants,
) -> Result<Scenario> {
    if spec.k_u == 0 || spec.k_d == 0 {
        return Err(Error::Config("random scenario needs K_u, K_d ≥ 1".into()));
    }
    if spec.k_s > consts.delay_set_len() {
        return Err(Error::Config(format!(
            "{} scatterers do not fit {} distinct delays",
            spec.k_s,
            consts.delay_set_len()
        )));
    }
    let (lo, hi) = spec.angle_range;
    AngleDeg::new(lo)?;
    AngleDeg::new(hi)?;
    if lo > hi {
        return Err(Error::Config(format!("empty angle range [{lo}, {hi}]")));
    }
    let draw = |rng: &mut R| AngleDeg::new(lo + (hi - lo) * rng.random::<f64>()).expect("inside range");
    let mut ul: Vec<AngleDeg> = (0..spec.k_u).map(|_| draw(rng)).collect();
    let mut dl: Vec<AngleDeg> = (0..spec.k_d).map(|_| draw(rng)).collect();
    if spec.fd_user_at_zero {
        ul[0] = AngleDeg::ZERO;
        dl[0] = AngleDeg::ZERO;
    }
    let angles: Vec<AngleDeg> = (0..spec.k_s).map(|_| draw(rng)).collect();
    let delays = sample(rng, consts.delay_set_len(), spec.k_s);
    let records = angles
        .into_iter()
        .zip(delays.iter())
        .map(|(a, l)| ScattererRecord::new(a, l, spec.scatterer_power))
        .collect();
    let users = UserSet::with_powers(ul, dl, spec.ul_power, spec.dl_power)?;
    Ok(Scenario::new(users, ScattererMap::new(records)?))
}
