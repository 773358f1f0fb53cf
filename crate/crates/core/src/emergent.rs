//! Detection of SI arriving at a delay that is not in the scatterer map,
//! recovery by adding it to the DSIC set, and an initial angle estimate.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::array_geometry::{steering_unchecked, AngleDeg};
use crate::beamforming::BeamformerPair;
use crate::estimation::{regenerate_si, ChannelEstimateSet, LsEstimator};
use crate::fd_link::{ls_equalize, EqualizedFrame, FrameObservation};
use crate::linalg::CMat;
use crate::scenario::{Action, ScattererMap, ScattererRecord, SystemConstants};
use crate::{Error, Result};

/// `ρ_l` for every delay `l = 0..N_tr`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    pub rho: Vec<f64>,
}

impl DelayProfile {
    /// `(l, ρ_l)` for delays not listed in `exclude`.
    pub fn cells_excluding(&self, exclude: &[usize]) -> Vec<(usize, f64)> {
        self.rho
            .iter()
            .enumerate()
            .filter(|(l, _)| !exclude.contains(l))
            .map(|(l, &r)| (l, r))
            .collect()
    }

    pub fn argmax(&self) -> usize {
        self.rho
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(l, _)| l)
            .unwrap_or(0)
    }
}

/// Per-user SI channel scan. `residual` is `D̂_u − D_u` and `f_training` the
/// DL training symbols, both restricted to the `N_tr` training tones.
///
/// `M̂_l[r,t] = (1/N_tr) Σ_i (residual[r,i] / F[t,i]) exp(+j2π i l / N_tr)`
/// and `ρ_l = Σ_{r,t} |M̂_l[r,t]|²`. Tones where `F[t,i] = 0` are dropped and
/// the sum is rescaled by `N_tr / N_used`.
pub fn per_user_delay_scan(residual: &CMat, f_training: &CMat) -> Result<DelayProfile> {
    let n = residual.ncols();
    if f_training.ncols() != n {
        return Err(Error::Domain("residual and DL training tone counts differ".into()));
    }
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut rho = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..f_training.nrows() {
        let used = f_training.row(t).iter().filter(|f| f.norm_sqr() > 0.0).count();
        if used == 0 {
            continue;
        }
        let scale = n as f64 / used as f64 / n as f64;
        for r in 0..residual.nrows() {
            for (i, b) in buf.iter_mut().enumerate() {
                let f = f_training[(t, i)];
                *b = if f.norm_sqr() > 0.0 {
                    residual[(r, i)] / f
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            ifft.process(&mut buf);
            for (acc, m) in rho.iter_mut().zip(&buf) {
                *acc += (m * scale).norm_sqr();
            }
        }
    }
    Ok(DelayProfile { rho })
}

/// Scan of an equalized frame against the known training symbols.
pub fn scan_frame(obs: &FrameObservation, eq: &EqualizedFrame) -> Result<DelayProfile> {
    let cols = &obs.training_columns;
    let residual = eq.d_hat_ul.select_columns(cols) - obs.truth.d_ul.select_columns(cols);
    per_user_delay_scan(&residual, &obs.truth.f_dl.select_columns(cols))
}

/// Upper-tail quantile of the χ² distribution with even `dof`: the `x` with
/// `P(X > x) = p_tail`.
pub fn chi2_upper_quantile(p_tail: f64, dof: usize) -> Result<f64> {
    if !(p_tail > 0.0 && p_tail < 1.0) {
        return Err(Error::Domain(format!("tail probability {p_tail} outside (0, 1)")));
    }
    if dof == 0 || dof % 2 != 0 {
        return Err(Error::Domain(format!("closed-form χ² quantile needs even dof, got {dof}")));
    }
    let m = dof / 2;
    // survival = exp(−y) Σ_{k<m} y^k / k!, y = x/2
    let survival = |x: f64| {
        let y = x / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..m {
            term *= y / k as f64;
            sum += term;
        }
        (-y).exp() * sum
    };
    let mut hi = dof as f64;
    while survival(hi) > p_tail {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if survival(mid) > p_tail {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub delay: usize,
    pub rho: f64,
    pub threshold: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub cells: Vec<CellResult>,
    /// Delay with the largest `ρ / threshold` among exceedances.
    pub decision: Option<usize>,
}

impl DetectionReport {
    pub fn detections(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.exceeded)
    }
}

/// Cell-averaging CFAR over the given `(delay, ρ)` cells. Each cell is
/// compared with `g(P_FA)/(2 K_u K_d)` times the mean of all other cells.
pub fn cfar_test(cells: &[(usize, f64)], p_fa: f64, k_u: usize, k_d: usize) -> Result<DetectionReport> {
    if cells.len() < 2 {
        return Err(Error::Domain("CFAR needs at least two cells".into()));
    }
    let dof = 2 * k_u * k_d;
    let g = chi2_upper_quantile(p_fa, dof)?;
    let factor = g / dof as f64;
    let total: f64 = cells.iter().map(|c| c.1).sum();
    let others = (cells.len() - 1) as f64;
    let mut best: Option<(usize, f64)> = None;
    let cells: Vec<CellResult> = cells
        .iter()
        .map(|&(delay, rho)| {
            let threshold = factor * ((total - rho).max(0.0) / others);
            let exceeded = rho > threshold;
            if exceeded {
                let ratio = if threshold > 0.0 { rho / threshold } else { f64::INFINITY };
                if best.is_none_or(|b| ratio > b.1) {
                    best = Some((delay, ratio));
                }
            }
            CellResult {
                delay,
                rho,
                threshold,
                exceeded,
            }
        })
        .collect();
    Ok(DetectionReport {
        cells,
        decision: best.map(|b| b.0),
    })
}

/// Artifacts after adding a detected scatterer to the DSIC set.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub map: ScattererMap,
    pub new_index: usize,
    pub estimates: ChannelEstimateSet,
    pub equalized: EqualizedFrame,
}

impl Recovery {
    pub fn new_channel(&self) -> &CMat {
        &self.estimates.si_estimates[&self.new_index]
    }
}

/// Adds a DSIC record at `delay` and re-runs estimation and equalization on
/// the stored frame. The new record's angle and power are placeholders until
/// [`AngleEstimate::update_record`] fills them in.
pub fn recover(
    obs: &FrameObservation,
    map: &ScattererMap,
    delay: usize,
    consts: &SystemConstants,
) -> Result<Recovery> {
    if delay >= consts.delay_set_len() {
        return Err(Error::Domain(format!("delay {delay} outside the delay set")));
    }
    let rec = ScattererRecord {
        action: Some(Action::Dsic),
        ..ScattererRecord::new(AngleDeg::ZERO, delay, 1.0)
    };
    let (map, new_index) = map.with_record(rec);
    let estimates = LsEstimator::for_frame(obs, &map)?.estimate(&obs.training_z());
    let regen = regenerate_si(&estimates, &obs.truth.f_dl, &map, consts)?;
    let equalized = ls_equalize(obs, &estimates.g_hat_ul, Some(&regen.z_si_hat))?;
    Ok(Recovery {
        map,
        new_index,
        estimates,
        equalized,
    })
}

/// Uniform angle grid in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self {
            start: -90.0,
            stop: 90.0,
            step: 0.1,
        }
    }
}

impl AngleGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleEstimate {
    pub theta_hat: AngleDeg,
    /// `(θ, J(θ))` on the non-skipped grid cells.
    pub objective_profile: Vec<(f64, f64)>,
    /// Least-squares gain at `θ̂`.
    pub alpha_hat: Complex64,
}

impl AngleEstimate {
    /// Writes the estimated angle and power `|α̂|²` into record `k`.
    pub fn update_record(&self, map: &ScattererMap, k: usize) -> Result<ScattererMap> {
        let mut records = map.records().to_vec();
        let r = records
            .get_mut(k)
            .ok_or_else(|| Error::Domain(format!("no scatterer {k} in the map")))?;
        r.angle = self.theta_hat;
        r.power = self.alpha_hat.norm_sqr().max(f64::MIN_POSITIVE);
        ScattererMap::new(records)
    }
}

struct AngleObjective<'a> {
    g: &'a CMat,
    ch: CMat,
    wh: CMat,
    n: usize,
}

impl AngleObjective<'_> {
    /// `(|v^H ĝ|² / ‖v‖², v^H ĝ, ‖v‖²)` for `v(θ) = vec(C^H a a^H W)`.
    fn eval(&self, theta_deg: f64) -> (f64, Complex64, f64) {
        let a = steering_unchecked(theta_deg.to_radians().sin(), self.n);
        let u = &self.ch * &a;
        let b = &self.wh * &a;
        let vn = u.norm_squared() * b.norm_squared();
        let proj = (u.adjoint() * self.g * &b)[(0, 0)];
        if vn < 1e-15 {
            (f64::NAN, proj, vn)
        } else {
            (proj.norm_sqr() / vn, proj, vn)
        }
    }
}

/// Nonlinear LS angle of a rank-one SI channel estimate: grid search of
/// `|v^H ĝ|²/‖v‖²` followed by golden-section refinement within one step.
pub fn estimate_angle(g_hat_new: &CMat, bf: &BeamformerPair, grid: &AngleGrid) -> Result<AngleEstimate> {
    if g_hat_new.shape() != (bf.rx.ncols(), bf.tx.ncols()) {
        return Err(Error::Domain("SI channel estimate does not match the beamformers".into()));
    }
    if !(grid.step > 0.0) || grid.start < -90.0 || grid.stop > 90.0 || grid.start > grid.stop {
        return Err(Error::Domain("angle grid must be increasing inside [-90°, 90°]".into()));
    }
    let obj = AngleObjective {
        g: g_hat_new,
        ch: bf.rx.adjoint(),
        wh: bf.tx.adjoint(),
        n: bf.rx.nrows(),
    };
    let mut profile = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for theta in grid.points() {
        let (j, _, _) = obj.eval(theta);
        if j.is_nan() {
            continue;
        }
        profile.push((theta, j));
        if best.is_none_or(|b| j > b.1) {
            best = Some((theta, j));
        }
    }
    let (coarse, _) = best.ok_or_else(|| Error::Estimation("every angle grid cell was skipped".into()))?;

    let value = |t: f64| {
        let j = obj.eval(t).0;
        if j.is_nan() {
            f64::NEG_INFINITY
        } else {
            j
        }
    };
    let (mut lo, mut hi) = ((coarse - grid.step).max(grid.start), (coarse + grid.step).min(grid.stop));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (value(x1), value(x2));
    while hi - lo > 1e-7 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = value(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = value(x1);
        }
    }
    let refined = 0.5 * (lo + hi);
    let theta = if value(refined) >= value(coarse) { refined } else { coarse };
    let (_, proj, vn) = obj.eval(theta);
    Ok(AngleEstimate {
        theta_hat: AngleDeg::new(theta.clamp(-90.0, 90.0))?,
        objective_profile: profile,
        alpha_hat: if vn > 0.0 { proj / vn } else { Complex64::new(0.0, 0.0) },
    })
}
