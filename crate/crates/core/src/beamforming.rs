//! Conventional, max-SINR (Rx) and max-SLNR (Tx) beamformers and their
//! hybrid analog/digital factorization.
//!
//! The interference weights `ρ` always use conventional beams for the
//! opposite side, so Rx and Tx designs are decoupled and need no iteration.

use num_complex::Complex64;

use crate::array_geometry::{beam_correlation, steering_matrix, steering_unchecked};
use crate::linalg::{hpd_solve, normalize_columns, rel_frobenius, CMat, CVec};
use crate::scenario::{Action, ScattererMap, ScattererRecord, SystemConstants, UserSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Rx,
    Tx,
}

/// Rx combiner `C` (N_a×K_u) and Tx beamformer `W` (N_a×K_d), unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerPair {
    pub rx: CMat,
    pub tx: CMat,
}

/// Analog stage of steering columns, digital stage, and scalar `1/σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridFactorization {
    pub analog: CMat,
    pub digital: CMat,
    pub scale: f64,
    /// Relative Frobenius distance of the reconstruction to the full beamformer.
    pub reconstruction_error: f64,
}

impl HybridFactorization {
    pub fn reconstruct(&self) -> CMat {
        &self.analog * &self.digital * Complex64::new(self.scale, 0.0)
    }

    /// Number of RF chains, i.e. analog columns.
    pub fn rfc_count(&self) -> usize {
        self.analog.ncols()
    }
}

pub fn conventional_beamformers(users: &UserSet, consts: &SystemConstants) -> Result<BeamformerPair> {
    Ok(BeamformerPair {
        rx: steering_matrix(&users.ul_angles, consts.n_antennas)?,
        tx: steering_matrix(&users.dl_angles, consts.n_antennas)?,
    })
}

/// `ρ^(s,c) = P_s Σ_kd |q_kd^H q_s|²`: SI weight seen by the Rx design.
pub fn rho_rx(users: &UserSet, rec: &ScattererRecord, n_antennas: usize) -> f64 {
    rec.power
        * users
            .dl_angles
            .iter()
            .map(|&a| beam_correlation(a, rec.angle, n_antennas).expect("n_antennas > 0"))
            .sum::<f64>()
}

/// `ρ^(s,w) = P_s Σ_ku |q_ku^H q_s|²`: SI weight seen by the Tx design.
pub fn rho_tx(users: &UserSet, rec: &ScattererRecord, n_antennas: usize) -> f64 {
    rec.power
        * users
            .ul_angles
            .iter()
            .map(|&a| beam_correlation(a, rec.angle, n_antennas).expect("n_antennas > 0"))
            .sum::<f64>()
}

struct SideProblem {
    targets: CMat,
    interferers: CMat,
    rhos: Vec<f64>,
    loading: f64,
}

fn side_problem(users: &UserSet, map: &ScattererMap, side: Side, consts: &SystemConstants) -> Result<SideProblem> {
    if !(consts.noise_power > 0.0) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    let n = consts.n_antennas;
    let (angles, action, loading) = match side {
        Side::Rx => (&users.ul_angles, Action::Rx, consts.noise_power),
        Side::Tx => (
            &users.dl_angles,
            Action::Tx,
            users.k_u() as f64 / users.k_d() as f64 * consts.noise_power,
        ),
    };
    let set = map.action_set(action);
    let mut interferers = CMat::zeros(n, set.len());
    let mut rhos = Vec::with_capacity(set.len());
    for (j, &k) in set.iter().enumerate() {
        let rec = &map.records()[k];
        interferers.set_column(j, &steering_unchecked(rec.angle.sin(), n));
        rhos.push(match side {
            Side::Rx => rho_rx(users, rec, n),
            Side::Tx => rho_tx(users, rec, n),
        });
    }
    Ok(SideProblem {
        targets: steering_matrix(angles, n)?,
        interferers,
        rhos,
        loading,
    })
}

fn loaded_beamformer(p: &SideProblem) -> Result<CMat> {
    if p.rhos.is_empty() {
        return Ok(p.targets.clone());
    }
    let n = p.targets.nrows();
    let mut r = CMat::identity(n, n) * Complex64::new(p.loading, 0.0);
    for (q, &rho) in p.interferers.column_iter().zip(&p.rhos) {
        let q: CVec = q.into_owned();
        r += &q * q.adjoint() * Complex64::new(rho, 0.0);
    }
    let mut x = hpd_solve(r, &p.targets, "loaded covariance")?;
    normalize_columns(&mut x);
    Ok(x)
}

/// Max-SINR combiner nulling the scatterers of `S_Rx`.
pub fn max_sinr_rx(users: &UserSet, map: &ScattererMap, consts: &SystemConstants) -> Result<CMat> {
    loaded_beamformer(&side_problem(users, map, Side::Rx, consts)?)
}

/// Max-SLNR beamformer nulling the scatterers of `S_Tx`.
pub fn max_slnr_tx(users: &UserSet, map: &ScattererMap, consts: &SystemConstants) -> Result<CMat> {
    loaded_beamformer(&side_problem(users, map, Side::Tx, consts)?)
}

/// Rx and Tx beamformers for the action sets stored in `map`.
pub fn design_beamformers(users: &UserSet, map: &ScattererMap, consts: &SystemConstants) -> Result<BeamformerPair> {
    Ok(BeamformerPair {
        rx: max_sinr_rx(users, map, consts)?,
        tx: max_slnr_tx(users, map, consts)?,
    })
}

/// Woodbury form `(1/σ)[Q_x | Q_S][B; −(σP⁻¹ + Q_S^H Q_S)⁻¹ Q_S^H Q_x B]` of a
/// max-SINR/max-SLNR beamformer. The normalizers `B` are computed on this path
/// and `full` is only used to report the reconstruction error.
pub fn hybrid_factorize(
    full: &CMat,
    users: &UserSet,
    map: &ScattererMap,
    side: Side,
    consts: &SystemConstants,
) -> Result<HybridFactorization> {
    let p = side_problem(users, map, side, consts)?;
    if full.shape() != p.targets.shape() {
        return Err(Error::Domain(format!(
            "beamformer is {:?}, expected {:?}",
            full.shape(),
            p.targets.shape()
        )));
    }
    if let Some(bad) = p.rhos.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Domain(format!("scatterer weight {bad} makes P singular")));
    }
    let sigma = p.loading;
    let qx = &p.targets;
    let qs = &p.interferers;
    let k = qx.ncols();
    let s = qs.ncols();

    // X = (σP⁻¹ + Q_S^H Q_S)⁻¹ Q_S^H Q_x
    let x = if s == 0 {
        CMat::zeros(0, k)
    } else {
        let mut inner = qs.adjoint() * qs;
        for (j, &rho) in p.rhos.iter().enumerate() {
            inner[(j, j)] += Complex64::new(sigma / rho, 0.0);
        }
        hpd_solve(inner, &(qs.adjoint() * qx), "Woodbury inner matrix")?
    };
    // β_k = σ / ‖q_k − Q_S x_k‖
    let unnorm = qx - qs * &x;
    let betas: Vec<f64> = unnorm.column_iter().map(|c| sigma / c.norm()).collect();

    let mut analog = CMat::zeros(qx.nrows(), k + s);
    analog.columns_mut(0, k).copy_from(qx);
    analog.columns_mut(k, s).copy_from(qs);
    let mut digital = CMat::zeros(k + s, k);
    for (j, &b) in betas.iter().enumerate() {
        digital[(j, j)] = Complex64::new(b, 0.0);
        for i in 0..s {
            digital[(k + i, j)] = -x[(i, j)] * b;
        }
    }
    let mut f = HybridFactorization {
        analog,
        digital,
        scale: 1.0 / sigma,
        reconstruction_error: 0.0,
    };
    f.reconstruction_error = rel_frobenius(&f.reconstruct(), full);
    Ok(f)
}
