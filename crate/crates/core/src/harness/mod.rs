//! Monte Carlo harness: methods under test, the per-frame processing chain,
//! measured metrics and experiment drivers.
//!
//! Every trial draws its randomness from its own ChaCha8 stream derived from
//! `(seed, point, trial)`, and all methods at a sweep point consume the same
//! draw. Results are collected in trial order before aggregation, so output
//! does not depend on the thread count.

pub mod experiments;
pub mod output;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beamforming::{design_beamformers, BeamformerPair};
use crate::estimation::{dsic_delays, regenerate_si, ChannelEstimateSet, LsEstimator};
use crate::fd_link::{
    compose_frame, dl_receive, ls_equalize, measured_sinr, EqualizedFrame, FrameDraw, FrameObservation, Precoding,
    TrainingPlan,
};
use crate::scenario::{
    random_scenario_with, Action, RandomScenarioSpec, RfcLimits, Scenario, ScattererMap, SystemConstants, UserSet,
};
use crate::selection::select_actions_with_limits;
use crate::{Error, Result};

pub use stats::MeasuredPerformance;

/// Mitigation strategy under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NoSic,
    OnlyDsic,
    OnlyRx,
    OnlyTx,
    SwitchingRxTx,
    Proposed,
    ProposedLimited(RfcLimits),
    SiFree,
}

impl Method {
    /// Every method except the resource-limited variant.
    pub fn standard() -> Vec<Method> {
        vec![
            Method::NoSic,
            Method::OnlyDsic,
            Method::OnlyRx,
            Method::OnlyTx,
            Method::SwitchingRxTx,
            Method::Proposed,
            Method::SiFree,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::NoSic => "no-sic",
            Method::OnlyDsic => "only-dsic",
            Method::OnlyRx => "only-rx",
            Method::OnlyTx => "only-tx",
            Method::SwitchingRxTx => "switching-rx-tx",
            Method::Proposed => "proposed",
            Method::ProposedLimited(_) => "proposed-limited",
            Method::SiFree => "si-free",
        }
    }

    /// RF-chain limits used by the method, if it is resource limited.
    pub fn limits(&self) -> Option<RfcLimits> {
        match self {
            Method::ProposedLimited(l) => Some(*l),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::ProposedLimited(l) => write!(f, "proposed-limited({l})"),
            m => f.write_str(m.name()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    /// Names as printed by [`Method::name`]; `proposed-limited(rx=2,tx=2)`
    /// carries its limits inline, bare `proposed-limited` starts unlimited.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("proposed-limited") {
            let inner = rest.trim();
            if inner.is_empty() {
                return Ok(Method::ProposedLimited(RfcLimits::unlimited()));
            }
            let inner = inner
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::Config(format!("bad method '{s}'")))?;
            return Ok(Method::ProposedLimited(inner.parse()?));
        }
        match s {
            "no-sic" => Ok(Method::NoSic),
            "only-dsic" => Ok(Method::OnlyDsic),
            "only-rx" => Ok(Method::OnlyRx),
            "only-tx" => Ok(Method::OnlyTx),
            "switching-rx-tx" | "switching" => Ok(Method::SwitchingRxTx),
            "proposed" => Ok(Method::Proposed),
            "si-free" => Ok(Method::SiFree),
            _ => Err(Error::Config(format!(
                "unknown method '{s}' (expected no-sic, only-dsic, only-rx, only-tx, switching-rx-tx, proposed, proposed-limited, si-free)"
            ))),
        }
    }
}

/// Switching rule: Tx nulling when the closest user (in `|sin θ|` distance)
/// is an UL user, Rx nulling when it is a DL user. Ties go to Tx.
pub fn switching_action(users: &UserSet, angle: crate::array_geometry::AngleDeg) -> Action {
    let s = angle.sin();
    let closest = |angles: &[crate::array_geometry::AngleDeg]| {
        angles.iter().map(|a| (a.sin() - s).abs()).fold(f64::INFINITY, f64::min)
    };
    if closest(&users.ul_angles) <= closest(&users.dl_angles) {
        Action::Tx
    } else {
        Action::Rx
    }
}

/// Scatterer map with the actions chosen by `method`.
pub fn assign_for_method(method: Method, scenario: &Scenario, consts: &SystemConstants) -> Result<ScattererMap> {
    let map = &scenario.map;
    Ok(match method {
        Method::NoSic | Method::SiFree => map.with_uniform_action(Action::NoAction),
        Method::OnlyDsic => map.with_uniform_action(Action::Dsic),
        Method::OnlyRx => map.with_uniform_action(Action::Rx),
        Method::OnlyTx => map.with_uniform_action(Action::Tx),
        Method::SwitchingRxTx => {
            let actions: Vec<Action> = map
                .records()
                .iter()
                .map(|r| switching_action(&scenario.users, r.angle))
                .collect();
            map.with_actions(&actions)?
        }
        Method::Proposed => select_actions_with_limits(&scenario.users, map, consts, &RfcLimits::unlimited())?,
        Method::ProposedLimited(l) => select_actions_with_limits(&scenario.users, map, consts, &l)?,
    })
}

/// Everything a method fixes before frames arrive.
#[derive(Debug, Clone)]
pub struct MethodPlan {
    pub method: Method,
    pub map: ScattererMap,
    pub bf: BeamformerPair,
    pub training: TrainingPlan,
    pub estimator: LsEstimator,
    /// `false` for the SI-free reference, which sees no echoes at all.
    pub with_si: bool,
}

impl MethodPlan {
    pub fn new(method: Method, scenario: &Scenario, consts: &SystemConstants) -> Result<Self> {
        Self::for_map(method, &scenario.users, assign_for_method(method, scenario, consts)?, consts)
    }

    /// Plan for an already assigned map.
    pub fn for_map(method: Method, users: &UserSet, map: ScattererMap, consts: &SystemConstants) -> Result<Self> {
        let bf = design_beamformers(users, &map, consts)?;
        let dsic = dsic_delays(&map);
        let reference = dsic.first().map(|d| d.1).unwrap_or(0);
        let training = TrainingPlan::new(consts, users.k_u(), users.k_d(), reference)?;
        let estimator = LsEstimator::new(&training.ul, &training.dl, &dsic, &training.columns, consts.n_subcarriers)?;
        Ok(Self {
            method,
            map,
            bf,
            training,
            estimator,
            with_si: method != Method::SiFree,
        })
    }

    /// Composes this method's observation of a frame draw.
    pub fn observe(&self, draw: &FrameDraw, scenario: &Scenario, consts: &SystemConstants) -> Result<FrameObservation> {
        let scatterers = if self.with_si { scenario.map.records() } else { &[] };
        compose_frame(
            draw,
            &scenario.users,
            scatterers,
            &self.bf,
            &self.training,
            Precoding::ZeroForcing,
            consts,
        )
    }

    /// Estimation, SI cancellation (DSIC set of the plan) and equalization.
    pub fn process(&self, obs: &FrameObservation, consts: &SystemConstants) -> Result<(ChannelEstimateSet, EqualizedFrame)> {
        let est = self.estimator.estimate(&obs.training_z());
        let eq = if est.si_estimates.is_empty() {
            ls_equalize(obs, &est.g_hat_ul, None)?
        } else {
            let regen = regenerate_si(&est, &obs.truth.f_dl, &self.map, consts)?;
            ls_equalize(obs, &est.g_hat_ul, Some(&regen.z_si_hat))?
        };
        Ok((est, eq))
    }
}

/// Measured per-user UL SINR and DL SNR of one frame (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub ul: Vec<f64>,
    pub dl: Vec<f64>,
}

pub fn score_ul(obs: &FrameObservation, eq: &EqualizedFrame) -> Vec<f64> {
    measured_sinr(&eq.d_hat_ul, &eq.m_matrix, &obs.truth.d_ul, &obs.data_columns)
}

pub fn score_dl(obs: &FrameObservation) -> Vec<f64> {
    let rx = dl_receive(obs);
    measured_sinr(&rx.d_hat, &rx.m_matrix, &obs.truth.d_dl, &obs.data_columns)
}

/// Full chain for one method on one draw.
pub fn run_frame(plan: &MethodPlan, draw: &FrameDraw, scenario: &Scenario, consts: &SystemConstants) -> Result<TrialOutcome> {
    let obs = plan.observe(draw, scenario, consts)?;
    let (_, eq) = plan.process(&obs, consts)?;
    Ok(TrialOutcome {
        ul: score_ul(&obs, &eq),
        dl: score_dl(&obs),
    })
}

/// Singular configurations are skipped and counted; anything else aborts.
pub(crate) fn skippable(e: &Error) -> bool {
    matches!(e, Error::Singular { .. })
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream for `(seed, point, trial)`.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(point)));
    rng.set_stream(trial);
    rng
}

/// Where the deployment of each trial comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Fixed(Scenario),
    /// A fresh random deployment per trial.
    Random(RandomScenarioSpec),
}

/// Runs `trials` frames of every method at one sweep point, on shared draws.
pub fn measure_methods(
    trials: usize,
    source: &ScenarioSource,
    methods: &[Method],
    consts: &SystemConstants,
    seed: u64,
    point: u64,
    bootstrap: usize,
) -> Result<Vec<MeasuredPerformance>> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    consts.validate()?;
    let fixed_plans = match source {
        ScenarioSource::Fixed(sc) => {
            sc.validate(consts)?;
            Some(
                methods
                    .iter()
                    .map(|&m| plan_or_skip(m, sc, consts))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        ScenarioSource::Random(_) => None,
    };

    let per_trial: Vec<Vec<Option<TrialOutcome>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, point, t as u64);
            let random_sc;
            let (scenario, plans) = match (source, &fixed_plans) {
                (ScenarioSource::Fixed(sc), Some(p)) => (sc, std::borrow::Cow::Borrowed(p)),
                (ScenarioSource::Random(spec), _) => {
                    random_sc = random_scenario_with(&mut rng, spec, consts)?;
                    let p = methods
                        .iter()
                        .map(|&m| plan_or_skip(m, &random_sc, consts))
                        .collect::<Result<Vec<_>>>()?;
                    (&random_sc, std::borrow::Cow::Owned(p))
                }
                _ => unreachable!(),
            };
            let draw = FrameDraw::draw(&mut rng, &scenario.users, scenario.map.records(), consts);
            plans
                .iter()
                .map(|plan| match plan {
                    None => Ok(None),
                    Some(plan) => match run_frame(plan, &draw, scenario, consts) {
                        Ok(o) => Ok(Some(o)),
                        Err(e) if skippable(&e) => Ok(None),
                        Err(e) => Err(e),
                    },
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    Ok(methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let outcomes: Vec<&TrialOutcome> = per_trial.iter().filter_map(|t| t[i].as_ref()).collect();
            stats::aggregate(&m.to_string(), &outcomes, trials, bootstrap, mix(seed ^ point))
        })
        .collect())
}

fn plan_or_skip(m: Method, sc: &Scenario, consts: &SystemConstants) -> Result<Option<MethodPlan>> {
    match MethodPlan::new(m, sc, consts) {
        Ok(p) => Ok(Some(p)),
        Err(e) if skippable(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Measured performance of one method.
pub fn measure(
    trials: usize,
    source: &ScenarioSource,
    method: Method,
    consts: &SystemConstants,
    seed: u64,
) -> Result<MeasuredPerformance> {
    Ok(measure_methods(trials, source, &[method], consts, seed, 0, stats::DEFAULT_BOOTSTRAP)?.remove(0))
}
