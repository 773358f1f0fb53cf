//! Joint LS estimation of the effective UL channel and of the SI channels of
//! DSIC scatterers, and SI regeneration.

use std::collections::BTreeMap;

use crate::fd_link::{si_term, DelayPhaseOperator, FrameObservation};
use crate::linalg::{condition_number, CMat, MAX_GRAM_CONDITION};
use crate::scenario::{Action, ScattererMap, SystemConstants};
use crate::{Error, Result};

/// Which rows were stacked and on which tones.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub columns: Vec<usize>,
    /// `(scatterer index, delay)` in stacking order.
    pub dsic: Vec<(usize, usize)>,
    /// Condition number of the stacked training matrix.
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimateSet {
    pub g_hat_ul: CMat,
    pub si_estimates: BTreeMap<usize, CMat>,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegeneratedSi {
    pub z_si_hat: CMat,
}

/// LS solver for a fixed stacked training matrix
/// `D̄ = [D_u; F E_{l_1}; F E_{l_2}; ...]` on the training tones.
///
/// `D̄` only depends on the training symbols and delays, so the solver can be
/// reused across frames.
#[derive(Debug, Clone)]
pub struct LsEstimator {
    k_u: usize,
    k_d: usize,
    meta: TrainingMeta,
    /// `D̄^H (D̄ D̄^H)⁻¹`, `N_tr × K`.
    projector: CMat,
}

impl LsEstimator {
    /// `ul_training` is `K_u × N_tr`, `dl_training` is `K_d × N_tr` (both on
    /// the tones in `columns`).
    pub fn new(
        ul_training: &CMat,
        dl_training: &CMat,
        dsic: &[(usize, usize)],
        columns: &[usize],
        n_subcarriers: usize,
    ) -> Result<Self> {
        let (k_u, k_d) = (ul_training.nrows(), dl_training.nrows());
        let n_tr = columns.len();
        let unknowns = k_u + k_d * dsic.len();
        if unknowns >= n_tr {
            return Err(Error::InvertibilityBound {
                n_training: n_tr,
                unknowns,
            });
        }
        let mut stacked = CMat::zeros(unknowns, n_tr);
        stacked.rows_mut(0, k_u).copy_from(ul_training);
        for (j, &(_, delay)) in dsic.iter().enumerate() {
            let shifted = DelayPhaseOperator::new(delay, n_subcarriers).apply(dl_training, columns);
            stacked.rows_mut(k_u + j * k_d, k_d).copy_from(&shifted);
        }
        // QR of D̄^H: X = Z D̄^H (D̄ D̄^H)⁻¹ = Z Q R^{-H}
        let qr = stacked.adjoint().qr();
        let r = qr.r();
        let condition = condition_number(&r);
        if !(condition * condition <= MAX_GRAM_CONDITION) {
            return Err(Error::Singular {
                context: "stacked training matrix",
                condition: condition * condition,
            });
        }
        let q = qr.q();
        // R Y = Q^H, projector = Y^H = Q R^{-H}
        let projector = r
            .solve_upper_triangular(&q.adjoint())
            .ok_or(Error::Singular {
                context: "stacked training matrix",
                condition: f64::INFINITY,
            })?
            .adjoint();
        Ok(Self {
            k_u,
            k_d,
            meta: TrainingMeta {
                columns: columns.to_vec(),
                dsic: dsic.to_vec(),
                condition,
            },
            projector,
        })
    }

    /// Estimator for the DSIC set of `map`, using the training symbols
    /// carried by `obs`.
    pub fn for_frame(obs: &FrameObservation, map: &ScattererMap) -> Result<Self> {
        let dsic = dsic_delays(map);
        let cols = &obs.training_columns;
        Self::new(
            &obs.truth.d_ul.select_columns(cols),
            &obs.truth.f_dl.select_columns(cols),
            &dsic,
            cols,
            obs.n_subcarriers,
        )
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Estimates from the observation restricted to the training tones.
    pub fn estimate(&self, z_training: &CMat) -> ChannelEstimateSet {
        let x = z_training * &self.projector;
        let g_hat_ul = x.columns(0, self.k_u).into_owned();
        let si_estimates = self
            .meta
            .dsic
            .iter()
            .enumerate()
            .map(|(j, &(k, _))| (k, x.columns(self.k_u + j * self.k_d, self.k_d).into_owned()))
            .collect();
        ChannelEstimateSet {
            g_hat_ul,
            si_estimates,
            meta: self.meta.clone(),
        }
    }
}

/// `(index, delay)` of every DSIC scatterer, in index order.
pub fn dsic_delays(map: &ScattererMap) -> Vec<(usize, usize)> {
    map.action_set(Action::Dsic)
        .into_iter()
        .map(|k| (k, map.records()[k].delay))
        .collect()
}

/// Joint LS estimate `[Ĝ_u Ĝ_1 ...] = Z D̄^H (D̄ D̄^H)⁻¹` over the training tones.
pub fn joint_ls_estimate(
    obs: &FrameObservation,
    map: &ScattererMap,
    consts: &SystemConstants,
) -> Result<ChannelEstimateSet> {
    if obs.n_subcarriers != consts.n_subcarriers {
        return Err(Error::Domain("observation does not match the system constants".into()));
    }
    Ok(LsEstimator::for_frame(obs, map)?.estimate(&obs.training_z()))
}

/// `Ẑ_si = Σ_{k ∈ S_DSIC} Ĝ_k F E_{l_k}` over all subcarriers.
pub fn regenerate_si(
    est: &ChannelEstimateSet,
    f_dl: &CMat,
    map: &ScattererMap,
    consts: &SystemConstants,
) -> Result<RegeneratedSi> {
    let k_u = est.g_hat_ul.nrows();
    let mut z = CMat::zeros(k_u, consts.n_subcarriers);
    for (k, delay) in dsic_delays(map) {
        let g = est
            .si_estimates
            .get(&k)
            .ok_or_else(|| Error::Estimation(format!("no SI estimate for DSIC scatterer {k}")))?;
        z += si_term(g, f_dl, delay, consts.n_subcarriers);
    }
    Ok(RegeneratedSi { z_si_hat: z })
}
