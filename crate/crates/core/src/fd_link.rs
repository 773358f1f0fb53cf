//! OFDM frame simulation for the full-duplex link: symbols, training design,
//! ZF precoding, frame composition with delayed SI echoes, LS equalization
//! and DL reception.
//!
//! Composition happens in the frequency domain, where a circular delay of `l`
//! samples is the diagonal phase ramp `E_l`. [`circular_delay_time_domain`]
//! is the IFFT/shift/FFT path kept as a cross-check.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::array_geometry::steering_unchecked;
use crate::beamforming::BeamformerPair;
use crate::linalg::{condition_number, left_pinv, CMat, MAX_GRAM_CONDITION};
use crate::scenario::{ScattererRecord, SystemConstants, UserSet};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fixed seed of the column permutation used by the training set.
const TRAINING_PERMUTATION_SEED: u64 = 0x7a11_5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Data,
    Training,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    pub entries: CMat,
    pub kind: SymbolKind,
}

/// Unit-power QPSK, `rows × cols`.
pub fn qpsk<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut bits = 0u64;
    let mut left = 0u32;
    CMat::from_fn(rows, cols, |_, _| {
        if left == 0 {
            bits = rng.random();
            left = 32;
        }
        let re = if bits & 1 == 0 { s } else { -s };
        let im = if bits & 2 == 0 { s } else { -s };
        bits >>= 2;
        left -= 1;
        Complex64::new(re, im)
    })
}

/// `rows × cols` i.i.d. CN(0, 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Rows of an `n × n` DFT matrix with a fixed pseudo-random column
/// permutation. Rows are unit-modulus and mutually orthogonal, and unlike
/// plain DFT rows they do not map onto each other under a delay ramp.
pub fn training_sequences(k_streams: usize, n_training: usize) -> Result<CMat> {
    if k_streams > n_training {
        return Err(Error::Domain(format!(
            "{k_streams} training sequences requested but only {n_training} tones"
        )));
    }
    let mut perm: Vec<usize> = (0..n_training).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(TRAINING_PERMUTATION_SEED));
    let n = n_training as f64;
    Ok(CMat::from_fn(k_streams, n_training, |k, i| {
        let e = (k * perm[i]) % n_training;
        Complex64::from_polar(1.0, 2.0 * PI * e as f64 / n)
    }))
}

/// Data symbols (`k × N_c` QPSK) or training symbols (`k × N_tr`).
pub fn generate_symbols<R: Rng + ?Sized>(
    rng: &mut R,
    k_streams: usize,
    consts: &SystemConstants,
    kind: SymbolKind,
) -> Result<SymbolMatrix> {
    let entries = match kind {
        SymbolKind::Data => qpsk(rng, k_streams, consts.n_subcarriers),
        SymbolKind::Training => training_sequences(k_streams, consts.n_training)?,
    };
    Ok(SymbolMatrix { entries, kind })
}

/// Diagonal phase ramp `E_l = diag(exp(−j2π m l / N_c))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayPhaseOperator {
    pub delay: usize,
    pub n_subcarriers: usize,
}

impl DelayPhaseOperator {
    pub fn new(delay: usize, n_subcarriers: usize) -> Self {
        Self { delay, n_subcarriers }
    }

    pub fn phase(&self, m: usize) -> Complex64 {
        let e = ((m % self.n_subcarriers) * (self.delay % self.n_subcarriers)) % self.n_subcarriers;
        Complex64::from_polar(1.0, -2.0 * PI * e as f64 / self.n_subcarriers as f64)
    }

    /// Diagonal entries for the given subcarrier indices.
    pub fn diagonal(&self, columns: &[usize]) -> Vec<Complex64> {
        columns.iter().map(|&m| self.phase(m)).collect()
    }

    /// `x E_l`, where column `j` of `x` sits on subcarrier `columns[j]`.
    pub fn apply(&self, x: &CMat, columns: &[usize]) -> CMat {
        let mut out = x.clone();
        for (j, p) in self.diagonal(columns).into_iter().enumerate() {
            for z in out.column_mut(j).iter_mut() {
                *z *= p;
            }
        }
        out
    }
}

/// Rows of `x` taken to time domain, circularly delayed by `delay`, and
/// transformed back.
pub fn circular_delay_time_domain(x: &CMat, delay: usize) -> CMat {
    let n = x.ncols();
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);
    let fft = planner.plan_fft_forward(n);
    let mut out = CMat::zeros(x.nrows(), n);
    let mut buf = vec![ZERO; n];
    let mut shifted = vec![ZERO; n];
    for r in 0..x.nrows() {
        for (m, b) in buf.iter_mut().enumerate() {
            *b = x[(r, m)];
        }
        ifft.process(&mut buf);
        for (t, s) in shifted.iter_mut().enumerate() {
            *s = buf[(t + n - delay % n) % n];
        }
        fft.process(&mut shifted);
        for (m, s) in shifted.iter().enumerate() {
            out[(r, m)] = s / n as f64;
        }
    }
    out
}

/// Training symbols placed on the training tones.
///
/// UL user `j` sends sequence `j` multiplied by the delay ramp of a reference
/// delay (the first DSIC scatterer, 0 if none); DL stream `t` sends sequence
/// `K_u + t` without precoding. With one DSIC scatterer the stacked training
/// matrix then has orthogonal rows of squared norm `N_tr`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pub columns: Vec<usize>,
    pub ul: CMat,
    pub dl: CMat,
    pub reference_delay: usize,
}

impl TrainingPlan {
    pub fn new(consts: &SystemConstants, k_u: usize, k_d: usize, reference_delay: usize) -> Result<Self> {
        let columns = consts.training_columns();
        let seqs = training_sequences(k_u + k_d, consts.n_training)?;
        let ramp = DelayPhaseOperator::new(reference_delay, consts.n_subcarriers);
        let ul = ramp.apply(&seqs.rows(0, k_u).into_owned(), &columns);
        let dl = seqs.rows(k_u, k_d).into_owned();
        Ok(Self {
            columns,
            ul,
            dl,
            reference_delay,
        })
    }
}

/// Zero-forcing precoder `T = Ĝ(Ĝ^H Ĝ)⁻¹` (not power normalized).
pub fn zf_precoder(g_hat_dl: &CMat) -> Result<CMat> {
    let cond = condition_number(g_hat_dl);
    if !(cond * cond <= MAX_GRAM_CONDITION) {
        return Err(Error::Singular {
            context: "ZF precoder",
            condition: cond * cond,
        });
    }
    Ok(left_pinv(g_hat_dl, "ZF precoder")?.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precoding {
    /// ZF on the true DL channel with per-user column normalization.
    ZeroForcing,
    /// `T = I`: each stream goes straight onto its Tx beam.
    Identity,
}

/// Applied precoder: `raw` is `T`, `normalized` is `T diag(1/‖t_k‖)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub raw: CMat,
    pub normalized: CMat,
    pub gains: Vec<f64>,
}

impl Precoder {
    pub fn from_raw(raw: CMat) -> Self {
        let gains: Vec<f64> = raw.column_iter().map(|c| c.norm()).collect();
        let mut normalized = raw.clone();
        for (mut c, &g) in normalized.column_iter_mut().zip(&gains) {
            c /= Complex64::new(g, 0.0);
        }
        Self { raw, normalized, gains }
    }

    pub fn identity(k_d: usize) -> Self {
        Self::from_raw(CMat::identity(k_d, k_d))
    }
}

/// All per-frame randomness, independent of the beamformers, so different
/// methods can be compared on the same realization.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDraw {
    pub alpha_ul: Vec<Complex64>,
    pub alpha_dl: Vec<Complex64>,
    pub alpha_s: Vec<Complex64>,
    pub ul_data: CMat,
    pub dl_data: CMat,
    /// White CN(0, 1) noise before combining, `K_u × N_c`.
    pub ul_noise: CMat,
    /// White CN(0, 1) noise at the DL users, `K_d × N_c`.
    pub dl_noise: CMat,
}

impl FrameDraw {
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        users: &UserSet,
        scatterers: &[ScattererRecord],
        consts: &SystemConstants,
    ) -> Self {
        let nc = consts.n_subcarriers;
        let alpha_ul = users.ul_powers.iter().map(|&p| cn(rng, p)).collect();
        let alpha_dl = users.dl_powers.iter().map(|&p| cn(rng, p)).collect();
        let alpha_s = scatterers.iter().map(|s| cn(rng, s.power)).collect();
        Self {
            alpha_ul,
            alpha_dl,
            alpha_s,
            ul_data: qpsk(rng, users.k_u(), nc),
            dl_data: qpsk(rng, users.k_d(), nc),
            ul_noise: complex_gaussian(rng, users.k_u(), nc),
            dl_noise: complex_gaussian(rng, users.k_d(), nc),
        }
    }

    /// Draw for one more scatterer appended to the list (drawn from `rng`).
    pub fn with_extra_scatterer<R: Rng + ?Sized>(mut self, rng: &mut R, power: f64) -> Self {
        self.alpha_s.push(cn(rng, power));
        self
    }
}

/// One SI echo: effective channel `G_k` and its delay.
#[derive(Debug, Clone, PartialEq)]
pub struct SiChannel {
    pub delay: usize,
    pub g: CMat,
}

/// Quantities retained for scoring and for oracle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    pub d_ul: CMat,
    pub d_dl: CMat,
    pub f_dl: CMat,
    pub alpha_ul: Vec<Complex64>,
    pub alpha_dl: Vec<Complex64>,
    pub alpha_s: Vec<Complex64>,
    pub g_ul: CMat,
    pub g_dl: CMat,
    pub si_channels: Vec<SiChannel>,
    pub precoder: Precoder,
    pub soi: CMat,
    pub si: CMat,
    pub noise: CMat,
    pub dl_noise: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub z: CMat,
    pub training_columns: Vec<usize>,
    pub data_columns: Vec<usize>,
    pub n_subcarriers: usize,
    pub truth: FrameTruth,
}

impl FrameObservation {
    /// Contribution `G_k F E_l` of true scatterer `k` to `z`.
    pub fn si_component(&self, k: usize) -> CMat {
        let s = &self.truth.si_channels[k];
        si_term(&s.g, &self.truth.f_dl, s.delay, self.n_subcarriers)
    }

    /// The same frame with scatterer `k`'s echo removed from `z` (and from the
    /// retained SI).
    pub fn without_scatterer(&self, k: usize) -> FrameObservation {
        let c = self.si_component(k);
        let mut out = self.clone();
        out.z -= &c;
        out.truth.si -= &c;
        out.truth.si_channels[k].g.fill(ZERO);
        out
    }

    pub fn training_z(&self) -> CMat {
        self.z.select_columns(&self.training_columns)
    }
}

/// `G F E_l` over all `N_c` subcarriers.
pub fn si_term(g: &CMat, f: &CMat, delay: usize, n_subcarriers: usize) -> CMat {
    let e = DelayPhaseOperator::new(delay, n_subcarriers);
    let mut gf = g * f;
    for (m, mut col) in gf.column_iter_mut().enumerate() {
        let p = e.phase(m);
        for z in col.iter_mut() {
            *z *= p;
        }
    }
    gf
}

fn noise_coloring(c: &CMat) -> CMat {
    let gram = c.adjoint() * c;
    match gram.clone().cholesky() {
        Some(ch) => ch.l(),
        None => {
            // rank-deficient combiner (coincident UL users): Hermitian square root
            let eig = gram.symmetric_eigen();
            let sqrt_vals = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
            &eig.eigenvectors * CMat::from_diagonal(&sqrt_vals) * eig.eigenvectors.adjoint()
        }
    }
}

/// Builds the observation `Z = G_u D_u + Σ_k G_k F E_{l_k} + N` from a draw.
/// Scatterer `k` uses gain `draw.alpha_s[k]`; extra gains are ignored.
pub fn compose_frame(
    draw: &FrameDraw,
    users: &UserSet,
    scatterers: &[ScattererRecord],
    bf: &BeamformerPair,
    training: &TrainingPlan,
    precoding: Precoding,
    consts: &SystemConstants,
) -> Result<FrameObservation> {
    let (ku, kd) = (users.k_u(), users.k_d());
    let na = consts.n_antennas;
    if bf.rx.shape() != (na, ku) || bf.tx.shape() != (na, kd) {
        return Err(Error::Domain("beamformer dimensions do not match the users".into()));
    }
    if draw.alpha_s.len() < scatterers.len() {
        return Err(Error::Domain("frame draw has fewer scatterer gains than scatterers".into()));
    }
    let nc = consts.n_subcarriers;
    let cols = &training.columns;
    let ch = bf.rx.adjoint();
    let wh = bf.tx.adjoint();

    let steer = |angles: &[crate::array_geometry::AngleDeg], alphas: &[Complex64]| {
        let mut h = CMat::zeros(na, angles.len());
        for (k, (a, &al)) in angles.iter().zip(alphas).enumerate() {
            h.set_column(k, &(steering_unchecked(a.sin(), na) * al));
        }
        h
    };
    let g_ul = &ch * steer(&users.ul_angles, &draw.alpha_ul);
    let g_dl = &wh * steer(&users.dl_angles, &draw.alpha_dl);

    let precoder = match precoding {
        Precoding::ZeroForcing => Precoder::from_raw(zf_precoder(&g_dl)?),
        Precoding::Identity => Precoder::identity(kd),
    };

    let mut d_ul = draw.ul_data.clone();
    let mut d_dl = draw.dl_data.clone();
    for (j, &m) in cols.iter().enumerate() {
        d_ul.set_column(m, &training.ul.column(j));
        d_dl.set_column(m, &training.dl.column(j));
    }
    let mut f_dl = &precoder.normalized * &d_dl;
    for (j, &m) in cols.iter().enumerate() {
        f_dl.set_column(m, &training.dl.column(j));
    }

    let soi = &g_ul * &d_ul;
    let mut si = CMat::zeros(ku, nc);
    let mut si_channels = Vec::with_capacity(scatterers.len());
    for (s, &alpha) in scatterers.iter().zip(&draw.alpha_s) {
        let q = steering_unchecked(s.angle.sin(), na);
        let a = &ch * &q;
        let b = &wh * &q;
        let g = &a * b.adjoint() * alpha;
        // rank one: (a α)(b^H F) E_l
        let row = b.adjoint() * &f_dl;
        let e = DelayPhaseOperator::new(s.delay, nc);
        for m in 0..nc {
            let v = row[(0, m)] * e.phase(m) * alpha;
            for r in 0..ku {
                si[(r, m)] += a[r] * v;
            }
        }
        si_channels.push(SiChannel { delay: s.delay, g });
    }
    let noise = noise_coloring(&bf.rx) * &draw.ul_noise * Complex64::new(consts.noise_power.sqrt(), 0.0);
    let z = &soi + &si + &noise;
    let dl_noise = &draw.dl_noise * Complex64::new(consts.noise_power.sqrt(), 0.0);

    Ok(FrameObservation {
        z,
        training_columns: cols.clone(),
        data_columns: consts.data_columns(),
        n_subcarriers: nc,
        truth: FrameTruth {
            d_ul,
            d_dl,
            f_dl,
            alpha_ul: draw.alpha_ul.clone(),
            alpha_dl: draw.alpha_dl.clone(),
            alpha_s: draw.alpha_s[..scatterers.len()].to_vec(),
            g_ul,
            g_dl,
            si_channels,
            precoder,
            soi,
            si,
            noise,
            dl_noise,
        },
    })
}

/// Draws a frame from `rng` and composes it.
pub fn simulate_frame<R: Rng + ?Sized>(
    rng: &mut R,
    users: &UserSet,
    scatterers: &[ScattererRecord],
    bf: &BeamformerPair,
    training: &TrainingPlan,
    precoding: Precoding,
    consts: &SystemConstants,
) -> Result<FrameObservation> {
    let draw = FrameDraw::draw(rng, users, scatterers, consts);
    compose_frame(&draw, users, scatterers, bf, training, precoding, consts)
}

/// UL symbol estimates `D̂ = (Ĝ^H Ĝ)⁻¹ Ĝ^H (Z − Ẑ_si)` and the effective
/// mixing matrix `M = (Ĝ^H Ĝ)⁻¹ Ĝ^H G`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedFrame {
    pub d_hat_ul: CMat,
    pub m_matrix: CMat,
}

pub fn ls_equalize(obs: &FrameObservation, g_hat_ul: &CMat, z_si_hat: Option<&CMat>) -> Result<EqualizedFrame> {
    let p = left_pinv(g_hat_ul, "UL equalizer")?;
    let d_hat_ul = match z_si_hat {
        Some(zs) => &p * (&obs.z - zs),
        None => &p * &obs.z,
    };
    Ok(EqualizedFrame {
        d_hat_ul,
        m_matrix: &p * &obs.truth.g_ul,
    })
}

/// DL symbol estimates after each user rescales by its precoder gain.
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkReception {
    pub d_hat: CMat,
    pub m_matrix: CMat,
}

pub fn dl_receive(obs: &FrameObservation) -> DownlinkReception {
    let t = &obs.truth;
    let gains = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        t.precoder.gains.len(),
        t.precoder.gains.iter().map(|&g| Complex64::new(g, 0.0)),
    ));
    let m_matrix = &gains * t.g_dl.adjoint() * &t.precoder.normalized;
    // every DL subcarrier, training tones included, goes through the precoder
    let rx = t.g_dl.adjoint() * (&t.precoder.normalized * &t.d_dl) + &t.dl_noise;
    DownlinkReception {
        d_hat: &gains * rx,
        m_matrix,
    }
}

/// Per-stream `Γ_k = ‖m_kk d_k‖² / ‖d̂_k − m_kk d_k‖²` over `columns`.
pub fn measured_sinr(d_hat: &CMat, m: &CMat, d: &CMat, columns: &[usize]) -> Vec<f64> {
    (0..d.nrows())
        .map(|k| {
            let mkk = m[(k, k)];
            let (mut sig, mut err) = (0.0, 0.0);
            for &c in columns {
                let s = mkk * d[(k, c)];
                sig += s.norm_sqr();
                err += (d_hat[(k, c)] - s).norm_sqr();
            }
            if err == 0.0 {
                f64::INFINITY
            } else {
                sig / err
            }
        })
        .collect()
}
