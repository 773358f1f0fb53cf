//! Experiment drivers: angle sweep, fixed scenario, random-position Monte
//! Carlo, INR sweep, scatterer-count sweep and the emergence demo.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use super::output::{annotate, num, Dataset};
use super::stats::{bootstrap_ci, mean, median, MeasuredPerformance};
use super::{measure_methods, score_ul, skippable, trial_rng, Method, MethodPlan, ScenarioSource};
use crate::array_geometry::{steering_unchecked, AngleDeg};
use crate::emergent::{cfar_test, estimate_angle, recover, scan_frame, AngleGrid};
use crate::fd_link::{compose_frame, FrameDraw, Precoding};
use crate::scenario::{
    db_to_linear, linear_to_db, random_scenario_with, RandomScenarioSpec, RfcLimits, Scenario, ScattererMap,
    ScattererRecord, SystemConstants, UserSet,
};
use crate::selection::{assign_actions, ActionMetricTable};
use crate::{Error, Result};

/// Stream index reserved for drawing random deployments.
const SCENARIO_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    AngleSweep,
    Scenario,
    RandomMc,
    InrSweep,
    CountSweep,
    Emergence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AngleSweep => "sweep-angle",
            ExperimentKind::Scenario => "scenario",
            ExperimentKind::RandomMc => "random-mc",
            ExperimentKind::InrSweep => "sweep-inr",
            ExperimentKind::CountSweep => "sweep-count",
            ExperimentKind::Emergence => "emergence",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sweep-angle" | "angle-sweep" => ExperimentKind::AngleSweep,
            "scenario" => ExperimentKind::Scenario,
            "random-mc" => ExperimentKind::RandomMc,
            "sweep-inr" | "inr-sweep" => ExperimentKind::InrSweep,
            "sweep-count" | "count-sweep" => ExperimentKind::CountSweep,
            "emergence" | "emergence-demo" => ExperimentKind::Emergence,
            _ => return Err(Error::Config(format!("unknown experiment kind '{s}'"))),
        })
    }
}

/// Users at 0°, 2.5°, 7.5°, 12.5° (UL) and their mirror images (DL).
pub fn reference_users(p_u: f64, p_d: f64) -> UserSet {
    let deg = |v: f64| AngleDeg::new(v).expect("valid angle");
    UserSet::with_powers(
        [0.0, 2.5, 7.5, 12.5].map(deg).to_vec(),
        [0.0, -2.5, -7.5, -12.5].map(deg).to_vec(),
        p_u,
        p_d,
    )
    .expect("valid users")
}

/// Six scatterers spread over the sector, used as the default fixed scenario.
pub fn reference_scatterers(p_s: f64) -> ScattererMap {
    let recs = [(-40.0, 3), (-7.5, 9), (0.0, 14), (5.0, 22), (12.5, 31), (35.0, 47)]
        .iter()
        .map(|&(a, l)| ScattererRecord::new(AngleDeg::new(a).expect("valid angle"), l, p_s))
        .collect();
    ScattererMap::new(recs).expect("positive powers")
}

/// `start..=stop` in steps of `step`, plus `extra` points, sorted and deduplicated.
pub fn angle_grid(start: f64, stop: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).chain(extra.iter().copied()).collect();
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    g
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub methods: Vec<Method>,
    /// Frames per sweep point, or scenarios per point for random deployments.
    pub trials: usize,
    pub frames_per_scenario: usize,
    pub seed: u64,
    pub bootstrap: usize,
    pub users: UserSet,
    /// Fixed scatterers (scenario kind) or the known map (emergence).
    pub scatterers: ScattererMap,
    pub scatterer_power: f64,
    pub scatterer_delay: usize,
    pub angle_grid: Vec<f64>,
    pub inr_grid_db: Vec<f64>,
    pub count_grid: Vec<usize>,
    pub random: RandomScenarioSpec,
    pub p_fa: f64,
    pub angle_search: AngleGrid,
}

impl ExperimentSpec {
    /// Defaults at 10 dB input SNR and 34 dB INR.
    pub fn defaults(kind: ExperimentKind, consts: &SystemConstants) -> Self {
        let n0 = consts.noise_power;
        let p_u = n0 * db_to_linear(10.0);
        let p_s = n0 * db_to_linear(34.0);
        let users = reference_users(p_u, p_u);
        let user_angles: Vec<f64> = users
            .ul_angles
            .iter()
            .chain(&users.dl_angles)
            .map(|a| a.degrees())
            .collect();
        let methods = match kind {
            ExperimentKind::Emergence => vec![Method::Proposed],
            _ => Method::standard(),
        };
        Self {
            kind,
            methods,
            trials: match kind {
                ExperimentKind::RandomMc | ExperimentKind::InrSweep | ExperimentKind::CountSweep => 200,
                _ => 2000,
            },
            frames_per_scenario: 10,
            seed: 1,
            bootstrap: super::stats::DEFAULT_BOOTSTRAP,
            users,
            scatterers: reference_scatterers(p_s),
            scatterer_power: p_s,
            scatterer_delay: 7,
            angle_grid: angle_grid(-60.0, 60.0, 2.0, &user_angles),
            inr_grid_db: vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            count_grid: vec![1, 2, 4, 6, 8, 10, 13],
            random: RandomScenarioSpec {
                k_u: 4,
                k_d: 4,
                k_s: 13,
                angle_range: (-60.0, 60.0),
                fd_user_at_zero: true,
                ul_power: p_u,
                dl_power: p_u,
                scatterer_power: p_s,
            },
            p_fa: 1e-2,
            angle_search: AngleGrid::default(),
        }
    }
}

/// Main dataset plus auxiliary dumps (assignments, per-scenario rows,
/// detection traces).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub main: Dataset,
    pub extras: Vec<Dataset>,
}

const METRIC_COLUMNS: [&str; 13] = [
    "method",
    "limits",
    "trials",
    "skipped",
    "ul_worst_db",
    "ul_ci_lo_db",
    "ul_ci_hi_db",
    "dl_worst_db",
    "dl_ci_lo_db",
    "dl_ci_hi_db",
    "ul_air",
    "dl_air",
    "ul_per_user_db",
];

fn metric_cells(method: &Method, m: &MeasuredPerformance) -> Vec<String> {
    let per_user: Vec<String> = m.ul_sinr.iter().map(|&g| format!("{:.3}", linear_to_db(g))).collect();
    vec![
        method.name().to_string(),
        method.limits().map(|l| l.to_string()).unwrap_or_default(),
        m.trials.to_string(),
        m.skipped.to_string(),
        num(m.ul_worst_db),
        num(m.ul_worst_ci_db.0),
        num(m.ul_worst_ci_db.1),
        num(m.dl_worst_db),
        num(m.dl_worst_ci_db.0),
        num(m.dl_worst_ci_db.1),
        num(m.ul_air_mean()),
        num(m.dl_air_mean()),
        per_user.join(" "),
    ]
}

fn with_leading(lead: &[&str], rest: &[&str]) -> Vec<String> {
    lead.iter().chain(rest).map(|s| s.to_string()).collect()
}

/// One scatterer per sweep angle at the configured delay and power.
pub fn angle_sweep(spec: &ExperimentSpec, consts: &SystemConstants) -> Result<Vec<(f64, Vec<MeasuredPerformance>)>> {
    spec.angle_grid
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let rec = ScattererRecord::new(AngleDeg::new(theta)?, spec.scatterer_delay, spec.scatterer_power);
            let sc = Scenario::new(spec.users.clone(), ScattererMap::new(vec![rec])?);
            let res = measure_methods(
                spec.trials,
                &ScenarioSource::Fixed(sc),
                &spec.methods,
                consts,
                spec.seed,
                i as u64,
                spec.bootstrap,
            )?;
            Ok((theta, res))
        })
        .collect()
}

/// Per-scenario results and per-method summaries of one random-position run.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMcResult {
    /// `[scenario][method]`; `None` if every frame of that scenario was skipped.
    pub per_scenario: Vec<Vec<MeasuredPerformance>>,
    pub summary: Vec<RandomMcSummary>,
}

/// Medians over scenarios of the per-scenario worst-case metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMcSummary {
    pub method: Method,
    pub scenarios: usize,
    pub skipped_frames: usize,
    pub median_ul_worst_db: f64,
    pub median_ul_ci_db: (f64, f64),
    pub median_dl_worst_db: f64,
    pub median_dl_ci_db: (f64, f64),
    pub mean_ul_air: f64,
    pub mean_dl_air: f64,
}

/// `spec.trials` random deployments with `frames_per_scenario` frames each.
/// Deployment `s` and its frames come from streams indexed by `s` only, so
/// runs with different INR or scatterer counts see the same randomness.
pub fn random_mc(spec: &ExperimentSpec, random: &RandomScenarioSpec, consts: &SystemConstants) -> Result<RandomMcResult> {
    if spec.trials == 0 || spec.frames_per_scenario == 0 {
        return Err(Error::Config("need at least one scenario and one frame".into()));
    }
    let per_scenario: Vec<Vec<MeasuredPerformance>> = (0..spec.trials)
        .into_par_iter()
        .map(|s| {
            let mut rng = trial_rng(spec.seed, SCENARIO_STREAM, s as u64);
            let sc = random_scenario_with(&mut rng, random, consts)?;
            measure_methods(
                spec.frames_per_scenario,
                &ScenarioSource::Fixed(sc),
                &spec.methods,
                consts,
                spec.seed,
                s as u64,
                0,
            )
        })
        .collect::<Result<_>>()?;

    let summary = spec
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let ul: Vec<f64> = per_scenario
                .iter()
                .map(|r| r[i].ul_worst_db)
                .filter(|v| !v.is_nan())
                .collect();
            let dl: Vec<f64> = per_scenario
                .iter()
                .map(|r| r[i].dl_worst_db)
                .filter(|v| !v.is_nan())
                .collect();
            let pick = |v: &[f64], idx: &[usize]| median(&idx.iter().map(|&j| v[j]).collect::<Vec<_>>());
            RandomMcSummary {
                method,
                scenarios: ul.len(),
                skipped_frames: per_scenario.iter().map(|r| r[i].skipped).sum(),
                median_ul_worst_db: median(&ul),
                median_ul_ci_db: bootstrap_ci(ul.len(), spec.bootstrap, spec.seed ^ i as u64, |idx| pick(&ul, idx)),
                median_dl_worst_db: median(&dl),
                median_dl_ci_db: bootstrap_ci(dl.len(), spec.bootstrap, spec.seed ^ (i as u64 + 97), |idx| {
                    pick(&dl, idx)
                }),
                mean_ul_air: mean(
                    &per_scenario
                        .iter()
                        .filter(|r| r[i].used() > 0)
                        .map(|r| r[i].ul_air_mean())
                        .collect::<Vec<_>>(),
                ),
                mean_dl_air: mean(
                    &per_scenario
                        .iter()
                        .filter(|r| r[i].used() > 0)
                        .map(|r| r[i].dl_air_mean())
                        .collect::<Vec<_>>(),
                ),
            }
        })
        .collect();
    Ok(RandomMcResult { per_scenario, summary })
}

const SUMMARY_COLUMNS: [&str; 11] = [
    "method",
    "limits",
    "scenarios",
    "skipped_frames",
    "median_ul_worst_db",
    "ul_ci_lo_db",
    "ul_ci_hi_db",
    "median_dl_worst_db",
    "dl_ci_lo_db",
    "dl_ci_hi_db",
    "ul_air",
];

fn summary_cells(s: &RandomMcSummary) -> Vec<String> {
    vec![
        s.method.name().to_string(),
        s.method.limits().map(|l| l.to_string()).unwrap_or_default(),
        s.scenarios.to_string(),
        s.skipped_frames.to_string(),
        num(s.median_ul_worst_db),
        num(s.median_ul_ci_db.0),
        num(s.median_ul_ci_db.1),
        num(s.median_dl_worst_db),
        num(s.median_dl_ci_db.0),
        num(s.median_dl_ci_db.1),
        num(s.mean_ul_air),
    ]
}

/// Outcome of the emergence demo at one angle of the new scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmergencePoint {
    pub angle: f64,
    pub trials: usize,
    pub skipped: usize,
    /// Detections at the true delay.
    pub correct: usize,
    /// Detections at any other delay.
    pub wrong: usize,
    pub baseline_ul_worst_db: f64,
    pub pre_ul_worst_db: f64,
    pub post_ul_worst_db: f64,
    /// `|θ̂ − θ|` for correct detections.
    pub angle_errors: Vec<f64>,
    /// The new scatterer lies inside the 3 dB mainlobe of some Rx or Tx beam.
    pub in_beams: bool,
    /// Trace of the first frame.
    pub trace: Option<crate::emergent::DetectionReport>,
    pub trace_delay: usize,
}

impl EmergencePoint {
    pub fn used(&self) -> usize {
        self.trials - self.skipped
    }

    pub fn p_detect(&self) -> f64 {
        self.correct as f64 / self.used() as f64
    }

    pub fn p_wrong(&self) -> f64 {
        self.wrong as f64 / self.used() as f64
    }

    pub fn fraction_within(&self, tol_deg: f64) -> f64 {
        if self.angle_errors.is_empty() {
            return f64::NAN;
        }
        self.angle_errors.iter().filter(|&&e| e <= tol_deg).count() as f64 / self.angle_errors.len() as f64
    }
}

/// Whether `theta` is inside the half-power mainlobe of at least one Rx or
/// Tx beam. Outside every mainlobe the new echo is seen through sidelobes only
/// and the angle estimate can lock onto the wrong lobe.
pub fn inside_beams(bf: &crate::beamforming::BeamformerPair, theta: f64) -> bool {
    let a = steering_unchecked(theta.to_radians().sin(), bf.rx.nrows());
    let best = |m: &crate::linalg::CMat| m.column_iter().map(|c| c.dotc(&a).norm_sqr()).fold(0.0, f64::max);
    best(&bf.rx) >= 0.5 || best(&bf.tx) >= 0.5
}

fn worst_of_means(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    let k = rows[0].len();
    let worst = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .fold(f64::INFINITY, f64::min);
    linear_to_db(worst)
}

struct EmergenceTrial {
    base: Vec<f64>,
    pre: Vec<f64>,
    post: Vec<f64>,
    decision: Option<usize>,
    delay: usize,
    angle_error: Option<f64>,
    report: crate::emergent::DetectionReport,
}

/// Known scatterers handled by `spec.methods[0]`; a new scatterer appears at
/// each angle of `spec.angle_grid` with a random free delay per frame.
pub fn emergence_sweep(spec: &ExperimentSpec, consts: &SystemConstants) -> Result<Vec<EmergencePoint>> {
    let method = *spec.methods.first().ok_or_else(|| Error::Config("no method given".into()))?;
    let known = Scenario::new(spec.users.clone(), spec.scatterers.clone());
    known.validate(consts)?;
    let plan = MethodPlan::new(method, &known, consts)?;
    let known_delays = known.map.delays();
    let free: Vec<usize> = (0..consts.delay_set_len()).filter(|l| !known_delays.contains(l)).collect();
    if free.is_empty() {
        return Err(Error::Config("no free delay left for an emerging scatterer".into()));
    }
    let (ku, kd) = (known.users.k_u(), known.users.k_d());

    spec.angle_grid
        .iter()
        .enumerate()
        .map(|(point, &theta)| {
            let angle = AngleDeg::new(theta)?;
            let trials: Vec<Option<EmergenceTrial>> = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(spec.seed, point as u64, t as u64);
                    let delay = free[rng.random_range(0..free.len())];
                    let mut all = known.map.records().to_vec();
                    all.push(ScattererRecord::new(angle, delay, spec.scatterer_power));
                    let draw = FrameDraw::draw(&mut rng, &known.users, &all, consts);
                    let run = || -> Result<EmergenceTrial> {
                        let obs = compose_frame(
                            &draw,
                            &known.users,
                            &all,
                            &plan.bf,
                            &plan.training,
                            Precoding::ZeroForcing,
                            consts,
                        )?;
                        let base_obs = obs.without_scatterer(all.len() - 1);
                        let (_, eq_base) = plan.process(&base_obs, consts)?;
                        let (_, eq_pre) = plan.process(&obs, consts)?;
                        let profile = scan_frame(&obs, &eq_pre)?;
                        let report = cfar_test(&profile.cells_excluding(&known_delays), spec.p_fa, ku, kd)?;
                        let pre = score_ul(&obs, &eq_pre);
                        let (post, angle_error) = match report.decision {
                            Some(l) => {
                                let rec = recover(&obs, &plan.map, l, consts)?;
                                let err = if l == delay {
                                    let est = estimate_angle(rec.new_channel(), &plan.bf, &spec.angle_search)?;
                                    Some((est.theta_hat.degrees() - theta).abs())
                                } else {
                                    None
                                };
                                (score_ul(&obs, &rec.equalized), err)
                            }
                            None => (pre.clone(), None),
                        };
                        Ok(EmergenceTrial {
                            base: score_ul(&base_obs, &eq_base),
                            pre,
                            post,
                            decision: report.decision,
                            delay,
                            angle_error,
                            report,
                        })
                    };
                    match run() {
                        Ok(tr) => Ok(Some(tr)),
                        Err(e) if skippable(&e) || matches!(e, Error::Estimation(_)) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;

            let ok: Vec<&EmergenceTrial> = trials.iter().flatten().collect();
            let correct = ok.iter().filter(|t| t.decision == Some(t.delay)).count();
            let wrong = ok.iter().filter(|t| t.decision.is_some_and(|l| l != t.delay)).count();
            let first = ok.first();
            Ok(EmergencePoint {
                angle: theta,
                trials: spec.trials,
                skipped: spec.trials - ok.len(),
                correct,
                wrong,
                baseline_ul_worst_db: worst_of_means(&ok.iter().map(|t| t.base.clone()).collect::<Vec<_>>()),
                pre_ul_worst_db: worst_of_means(&ok.iter().map(|t| t.pre.clone()).collect::<Vec<_>>()),
                post_ul_worst_db: worst_of_means(&ok.iter().map(|t| t.post.clone()).collect::<Vec<_>>()),
                angle_errors: ok.iter().filter_map(|t| t.angle_error).collect(),
                in_beams: inside_beams(&plan.bf, theta),
                trace: first.map(|t| t.report.clone()),
                trace_delay: first.map_or(0, |t| t.delay),
            })
        })
        .collect()
}

/// Per-cell false-alarm count of the detector on frames without emergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalseAlarmStats {
    pub frames: usize,
    pub cells: usize,
    pub exceedances: usize,
    pub frames_with_detection: usize,
}

impl FalseAlarmStats {
    pub fn per_cell_rate(&self) -> f64 {
        self.exceedances as f64 / self.cells as f64
    }
}

/// Runs the detector on `frames` frames of the known scenario only.
pub fn false_alarm_calibration(
    scenario: &Scenario,
    method: Method,
    consts: &SystemConstants,
    p_fa: f64,
    frames: usize,
    seed: u64,
) -> Result<FalseAlarmStats> {
    let plan = MethodPlan::new(method, scenario, consts)?;
    let known = scenario.map.delays();
    let (ku, kd) = (scenario.users.k_u(), scenario.users.k_d());
    let per: Vec<(usize, usize, bool)> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 0, t as u64);
            let draw = FrameDraw::draw(&mut rng, &scenario.users, scenario.map.records(), consts);
            let obs = plan.observe(&draw, scenario, consts)?;
            let (_, eq) = plan.process(&obs, consts)?;
            let report = cfar_test(&scan_frame(&obs, &eq)?.cells_excluding(&known), p_fa, ku, kd)?;
            Ok((report.cells.len(), report.detections().count(), report.decision.is_some()))
        })
        .collect::<Result<_>>()?;
    Ok(FalseAlarmStats {
        frames,
        cells: per.iter().map(|p| p.0).sum(),
        exceedances: per.iter().map(|p| p.1).sum(),
        frames_with_detection: per.iter().filter(|p| p.2).count(),
    })
}

/// Prior metrics and chosen action for each scatterer.
pub fn assignment_dataset(
    users: &UserSet,
    map: &ScattererMap,
    consts: &SystemConstants,
    limits: &RfcLimits,
) -> Result<Dataset> {
    let table = ActionMetricTable::from_scenario(users, map, consts)?;
    let assignment = assign_actions(&table, limits)?;
    let mut ds = Dataset::new(
        "assignment",
        &["index", "angle_deg", "delay", "gamma_na", "gamma_rx", "gamma_tx", "gamma_dsic", "action"],
    );
    ds.meta("limits", limits);
    for (k, r) in map.records().iter().enumerate() {
        let row = &table.rows[k];
        ds.push(vec![
            k.to_string(),
            num(r.angle.degrees()),
            r.delay.to_string(),
            num(row[0]),
            num(row[1]),
            num(row[2]),
            num(row[3]),
            assignment.actions[k].to_string(),
        ]);
    }
    Ok(ds)
}

fn power_meta(ds: &mut Dataset, spec: &ExperimentSpec, consts: &SystemConstants) {
    annotate(ds, spec.seed, consts);
    ds.meta("experiment", spec.kind);
    ds.meta("trials", spec.trials);
    ds.meta("bootstrap", spec.bootstrap);
    ds.meta(
        "levels",
        format!(
            "ul_snr_db={:.2} dl_snr_db={:.2} inr_db={:.2}",
            linear_to_db(spec.users.ul_powers[0] / consts.noise_power),
            linear_to_db(spec.users.dl_powers[0] / consts.noise_power),
            linear_to_db(spec.scatterer_power / consts.noise_power)
        ),
    );
}

/// Runs an experiment and renders its datasets.
pub fn run_experiment(spec: &ExperimentSpec, consts: &SystemConstants) -> Result<ExperimentOutput> {
    consts.validate()?;
    if spec.methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    match spec.kind {
        ExperimentKind::AngleSweep => {
            let mut ds = Dataset::new("sweep-angle", &[]);
            ds.columns = with_leading(&["scatterer_angle_deg"], &METRIC_COLUMNS);
            power_meta(&mut ds, spec, consts);
            ds.meta("scatterer_delay", spec.scatterer_delay);
            for (theta, res) in angle_sweep(spec, consts)? {
                for (m, r) in spec.methods.iter().zip(&res) {
                    let mut row = vec![num(theta)];
                    row.extend(metric_cells(m, r));
                    ds.push(row);
                }
            }
            Ok(ExperimentOutput {
                main: ds,
                extras: vec![],
            })
        }
        ExperimentKind::Scenario => {
            let sc = Scenario::new(spec.users.clone(), spec.scatterers.clone());
            let res = measure_methods(
                spec.trials,
                &ScenarioSource::Fixed(sc),
                &spec.methods,
                consts,
                spec.seed,
                0,
                spec.bootstrap,
            )?;
            let mut ds = Dataset::new("scenario", &[]);
            ds.columns = METRIC_COLUMNS.iter().map(|s| s.to_string()).collect();
            power_meta(&mut ds, spec, consts);
            for (m, r) in spec.methods.iter().zip(&res) {
                ds.push(metric_cells(m, r));
            }
            let limits = spec
                .methods
                .iter()
                .find_map(|m| m.limits())
                .unwrap_or(consts.rfc_limits);
            let assign = assignment_dataset(&spec.users, &spec.scatterers, consts, &limits)?;
            Ok(ExperimentOutput {
                main: ds,
                extras: vec![assign],
            })
        }
        ExperimentKind::RandomMc | ExperimentKind::InrSweep | ExperimentKind::CountSweep => {
            let (lead, points): (&str, Vec<(String, RandomScenarioSpec)>) = match spec.kind {
                ExperimentKind::RandomMc => ("k_s", vec![(spec.random.k_s.to_string(), spec.random.clone())]),
                ExperimentKind::InrSweep => (
                    "inr_db",
                    spec.inr_grid_db
                        .iter()
                        .map(|&inr| {
                            (
                                num(inr),
                                RandomScenarioSpec {
                                    scatterer_power: consts.noise_power * db_to_linear(inr),
                                    ..spec.random.clone()
                                },
                            )
                        })
                        .collect(),
                ),
                _ => (
                    "k_s",
                    spec.count_grid
                        .iter()
                        .map(|&k| (k.to_string(), RandomScenarioSpec { k_s: k, ..spec.random.clone() }))
                        .collect(),
                ),
            };
            let mut ds = Dataset::new(spec.kind.name(), &[]);
            ds.columns = with_leading(&[lead], &SUMMARY_COLUMNS);
            power_meta(&mut ds, spec, consts);
            ds.meta("frames_per_scenario", spec.frames_per_scenario);
            ds.meta(
                "deployment",
                format!(
                    "k_u={} k_d={} angle_range=[{}, {}] fd_user_at_zero={}",
                    spec.random.k_u,
                    spec.random.k_d,
                    spec.random.angle_range.0,
                    spec.random.angle_range.1,
                    spec.random.fd_user_at_zero
                ),
            );
            let mut per = Dataset::new("per-scenario", &[]);
            per.columns = with_leading(&[lead, "scenario"], &METRIC_COLUMNS);
            annotate(&mut per, spec.seed, consts);
            for (x, rs) in points {
                let res = random_mc(spec, &rs, consts)?;
                for s in &res.summary {
                    let mut row = vec![x.clone()];
                    row.extend(summary_cells(s));
                    ds.push(row);
                }
                for (s, row_res) in res.per_scenario.iter().enumerate() {
                    for (m, r) in spec.methods.iter().zip(row_res) {
                        let mut row = vec![x.clone(), s.to_string()];
                        row.extend(metric_cells(m, r));
                        per.push(row);
                    }
                }
            }
            Ok(ExperimentOutput {
                main: ds,
                extras: vec![per],
            })
        }
        ExperimentKind::Emergence => {
            let points = emergence_sweep(spec, consts)?;
            let mut ds = Dataset::new(
                "emergence",
                &[
                    "angle_deg",
                    "trials",
                    "skipped",
                    "p_detect",
                    "p_wrong_delay",
                    "baseline_ul_worst_db",
                    "pre_ul_worst_db",
                    "post_ul_worst_db",
                    "detected",
                    "angle_within_0p5",
                    "median_angle_error_deg",
                    "in_beams",
                ],
            );
            power_meta(&mut ds, spec, consts);
            ds.meta("method", spec.methods[0]);
            ds.meta("p_fa", spec.p_fa);
            let mut trace = Dataset::new("detection-trace", &["angle_deg", "true_delay", "l", "rho", "threshold", "decision"]);
            annotate(&mut trace, spec.seed, consts);
            for p in &points {
                ds.push(vec![
                    num(p.angle),
                    p.trials.to_string(),
                    p.skipped.to_string(),
                    num(p.p_detect()),
                    num(p.p_wrong()),
                    num(p.baseline_ul_worst_db),
                    num(p.pre_ul_worst_db),
                    num(p.post_ul_worst_db),
                    p.angle_errors.len().to_string(),
                    num(p.fraction_within(0.5)),
                    num(median(&p.angle_errors)),
                    p.in_beams.to_string(),
                ]);
                if let Some(rep) = &p.trace {
                    let decision = rep.decision.map(|l| l.to_string()).unwrap_or_else(|| "none".into());
                    for c in &rep.cells {
                        trace.push(vec![
                            num(p.angle),
                            p.trace_delay.to_string(),
                            c.delay.to_string(),
                            format!("{:e}", c.rho),
                            format!("{:e}", c.threshold),
                            decision.clone(),
                        ]);
                    }
                }
            }
            Ok(ExperimentOutput {
                main: ds,
                extras: vec![trace],
            })
        }
    }
}
