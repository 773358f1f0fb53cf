mod common;

use common::*;
use ffsi::beamforming::{conventional_beamformers, design_beamformers};
use ffsi::emergent::scan_frame;
use ffsi::estimation::{joint_ls_estimate, regenerate_si};
use ffsi::fd_link::{
    circular_delay_time_domain, compose_frame, dl_receive, ls_equalize, qpsk, zf_precoder, DelayPhaseOperator,
    FrameDraw, Precoding, TrainingPlan,
};
use ffsi::linalg::{rel_frobenius, CMat};
use ffsi::scenario::{Action, ScattererMap, SystemConstants, UserSet};
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn small() -> SystemConstants {
    SystemConstants {
        n_subcarriers: 256,
        ..Default::default()
    }
}

#[test]
fn phase_ramp_equals_circular_delay() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nc = 128;
    let x = qpsk(&mut rng, 3, nc);
    let cols: Vec<usize> = (0..nc).collect();
    for l in [0, 1, 7, 63, 127] {
        let fd = DelayPhaseOperator::new(l, nc).apply(&x, &cols);
        let td = circular_delay_time_domain(&x, l);
        assert!((fd - td).norm() < 1e-10 * x.norm(), "delay {l}");
    }
}

#[test]
fn equalizer_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let consts = small();
    let users = users(&[-20.0, 15.0], &[5.0, 40.0], 10.0);
    let bf = conventional_beamformers(&users, &consts).unwrap();
    let training = TrainingPlan::new(&consts, 2, 2, 0).unwrap();
    for _ in 0..20 {
        let draw = FrameDraw::draw(&mut rng, &users, &[], &consts);
        let obs = compose_frame(&draw, &users, &[], &bf, &training, Precoding::ZeroForcing, &consts).unwrap();
        let g = ffsi::fd_link::complex_gaussian(&mut rng, 2, 2);
        let eq = ls_equalize(&obs, &g, None).unwrap();
        // 2×2 inverse by cofactors
        let gram = g.adjoint() * &g;
        let m2 = Matrix2::new(gram[(0, 0)], gram[(0, 1)], gram[(1, 0)], gram[(1, 1)]);
        let det = m2[(0, 0)] * m2[(1, 1)] - m2[(0, 1)] * m2[(1, 0)];
        let inv = CMat::from_row_slice(2, 2, &[m2[(1, 1)] / det, -m2[(0, 1)] / det, -m2[(1, 0)] / det, m2[(0, 0)] / det]);
        let oracle = inv * g.adjoint() * &obs.z;
        assert!(rel_frobenius(&eq.d_hat_ul, &oracle) < 1e-10);
    }
}

#[test]
fn single_user_equalizer_is_scalar_division() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let consts = small();
    let users = users(&[10.0], &[-30.0], 10.0);
    let bf = conventional_beamformers(&users, &consts).unwrap();
    let training = TrainingPlan::new(&consts, 1, 1, 0).unwrap();
    let draw = FrameDraw::draw(&mut rng, &users, &[], &consts);
    let obs = compose_frame(&draw, &users, &[], &bf, &training, Precoding::ZeroForcing, &consts).unwrap();
    let g = CMat::from_element(1, 1, Complex64::new(0.3, -1.2));
    let eq = ls_equalize(&obs, &g, None).unwrap();
    let want = &obs.z / g[(0, 0)];
    assert!(rel_frobenius(&eq.d_hat_ul, &want) < 1e-12);
}

#[test]
fn zf_two_by_two_hand_case() {
    let g = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(1.0), c(1.0)]);
    let t = zf_precoder(&g).unwrap();
    // (G^H G)^{-1} = [[2,1],[1,1]]^{-1} = [[1,-1],[-1,2]]
    let want = &g * CMat::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(-1.0), c(2.0)]);
    assert!((t - want).norm() < 1e-12);
}

#[test]
fn qpsk_has_unit_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = qpsk(&mut rng, 1, 10_000);
    assert!(d.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    let p = d.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e4;
    assert!((p - 1.0).abs() < 0.02);
}

/// Statistics over many noise-only and SI-only frames at reduced N_c.
#[test]
fn noise_and_si_power_match_closed_forms() {
    let consts = small();
    let users = users(&[0.0, 4.0, 30.0], &[-10.0, 3.0], 10.0);
    let p_s = 1e3;
    let map = map_at(&[5.0, -25.0], p_s, Action::NoAction);
    let bf = design_beamformers(&users, &map, &consts).unwrap();
    let training = TrainingPlan::new(&consts, 3, 2, 0).unwrap();
    let gram = bf.rx.adjoint() * &bf.rx;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let frames = 1000;
    let data = consts.data_columns();
    let mut noise_pow = [0.0; 3];
    let mut si_pow = [0.0; 3];
    for _ in 0..frames {
        let draw = FrameDraw::draw(&mut rng, &users, map.records(), &consts);
        let obs =
            compose_frame(&draw, &users, map.records(), &bf, &training, Precoding::Identity, &consts).unwrap();
        let resid = &obs.z - &obs.truth.soi - &obs.truth.si;
        for r in 0..3 {
            for &m in &data {
                noise_pow[r] += resid[(r, m)].norm_sqr();
                si_pow[r] += obs.truth.si[(r, m)].norm_sqr();
            }
        }
    }
    let n = (frames * data.len()) as f64;
    for r in 0..3 {
        let want = gram[(r, r)].re * consts.noise_power;
        assert!((noise_pow[r] / n / want - 1.0).abs() < 0.05, "noise row {r}");
        // Σ_s Σ_kd P_s |w^H q|² |c^H q|² with identity precoding
        let mut want_si = 0.0;
        for rec in map.records() {
            let q = ffsi::array_geometry::steering(rec.angle, 32).unwrap().into_vector();
            let cq = bf.rx.column(r).dotc(&q).norm_sqr();
            let wq: f64 = bf.tx.column_iter().map(|w| w.dotc(&q).norm_sqr()).sum();
            want_si += rec.power * cq * wq;
        }
        assert!((si_pow[r] / n / want_si - 1.0).abs() < 0.05, "si row {r}: {} vs {want_si}", si_pow[r] / n);
    }
}

#[test]
fn perfect_cancellation_residual_is_independent_of_inr() {
    let consts = small();
    let users = users(&[0.0, 20.0], &[-15.0, 10.0], 10.0);
    let bf = conventional_beamformers(&users, &consts).unwrap();
    let training = TrainingPlan::new(&consts, 2, 2, 0).unwrap();
    let mut errs = Vec::new();
    for inr in [10.0, 40.0] {
        let map = map_at(&[3.0], 10f64.powf(inr / 10.0), Action::NoAction);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut acc = 0.0;
        for _ in 0..200 {
            let draw = FrameDraw::draw(&mut rng, &users, map.records(), &consts);
            let obs = compose_frame(&draw, &users, map.records(), &bf, &training, Precoding::ZeroForcing, &consts)
                .unwrap();
            let eq = ls_equalize(&obs, &obs.truth.g_ul, Some(&obs.truth.si)).unwrap();
            acc += (&eq.d_hat_ul - &obs.truth.d_ul).norm_squared();
        }
        errs.push(acc);
    }
    // identical noise draws, so the residuals agree up to rounding
    assert!((errs[0] / errs[1] - 1.0).abs() < 1e-6, "{errs:?}");
}

#[test]
fn noiseless_link_recovers_symbols() {
    let consts = SystemConstants {
        noise_power: 1e-300,
        ..small()
    };
    let users = users(&[-5.0, 25.0], &[0.0, -40.0], 10.0);
    let bf = conventional_beamformers(&users, &consts).unwrap();
    let training = TrainingPlan::new(&consts, 2, 2, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draw = FrameDraw::draw(&mut rng, &users, &[], &consts);
    let obs = compose_frame(&draw, &users, &[], &bf, &training, Precoding::ZeroForcing, &consts).unwrap();
    let eq = ls_equalize(&obs, &obs.truth.g_ul, None).unwrap();
    assert!(rel_frobenius(&eq.d_hat_ul, &obs.truth.d_ul) < 1e-9);
    assert!((&eq.m_matrix - CMat::identity(2, 2)).norm() < 1e-9);
    let dl = dl_receive(&obs);
    let data = consts.data_columns();
    assert!(rel_frobenius(&dl.d_hat.select_columns(&data), &obs.truth.d_dl.select_columns(&data)) < 1e-9);
}

#[test]
fn dl_signal_power_follows_beam_gain() {
    // a single DL user: intended signal power P_d |w^H q|² = P_d for a matched beam
    let consts = small();
    let users = users(&[30.0], &[-12.0], 10.0);
    let bf = conventional_beamformers(&users, &consts).unwrap();
    let training = TrainingPlan::new(&consts, 1, 1, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut acc = 0.0;
    let frames = 4000;
    for _ in 0..frames {
        let draw = FrameDraw::draw(&mut rng, &users, &[], &consts);
        let obs = compose_frame(&draw, &users, &[], &bf, &training, Precoding::Identity, &consts).unwrap();
        acc += obs.truth.g_dl[(0, 0)].norm_sqr();
    }
    assert!((acc / frames as f64 / 10.0 - 1.0).abs() < 0.05);
}

fn dsic_residual(users: &UserSet, map: &ScattererMap, consts: &SystemConstants, frames: usize, seed: u64) -> f64 {
    let bf = design_beamformers(users, map, consts).unwrap();
    let dsic = ffsi::estimation::dsic_delays(map);
    let training = TrainingPlan::new(consts, users.k_u(), users.k_d(), dsic[0].1).unwrap();
    let data = consts.data_columns();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..frames {
        let draw = FrameDraw::draw(&mut rng, users, map.records(), consts);
        let obs = compose_frame(&draw, users, map.records(), &bf, &training, Precoding::ZeroForcing, consts).unwrap();
        let est = joint_ls_estimate(&obs, map, consts).unwrap();
        let regen = regenerate_si(&est, &obs.truth.f_dl, map, consts).unwrap();
        let r = &obs.truth.si - &regen.z_si_hat;
        for &m in &data {
            acc += r.column(m).norm_squared();
        }
    }
    acc / (frames * data.len() * users.k_u()) as f64
}

#[test]
fn dsic_residual_grows_with_the_dsic_set() {
    let consts = small();
    let users = users(&[0.0, 20.0, -35.0, 45.0], &[0.0, -10.0, 25.0, 50.0], 10.0);
    let one = dsic_residual(&users, &map_at(&[12.0], 1e3, Action::Dsic), &consts, 300, 1);
    let two = dsic_residual(&users, &map_at(&[12.0, -30.0], 1e3, Action::Dsic), &consts, 300, 1);
    let law = 4.0 / 64.0;
    assert!((one / law - 1.0).abs() < 0.1, "{one}");
    assert!(two > 1.8 * one, "{two} vs {one}");
}

#[test]
fn cancelled_scatterer_leaves_no_peak() {
    let consts = SystemConstants::default();
    let users = reference_users();
    let map = map_at(&[1.0], 10f64.powf(3.4), Action::Dsic);
    let plan = ffsi::harness::MethodPlan::for_map(ffsi::harness::Method::OnlyDsic, &users, map.clone(), &consts)
        .unwrap();
    let sc = ffsi::scenario::Scenario::new(users.clone(), map.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let draw = FrameDraw::draw(&mut rng, &users, map.records(), &consts);
        let obs = plan.observe(&draw, &sc, &consts).unwrap();
        let (_, eq) = plan.process(&obs, &consts).unwrap();
        let prof = scan_frame(&obs, &eq).unwrap();
        let mean = prof.rho.iter().sum::<f64>() / prof.rho.len() as f64;
        assert!(prof.rho[1] < 10.0 * mean, "{} vs {mean}", prof.rho[1]);
        // without cancellation the same delay dominates
        let eq_raw = ls_equalize(&obs, &obs.truth.g_ul, None).unwrap();
        let raw = scan_frame(&obs, &eq_raw).unwrap();
        assert_eq!(raw.argmax(), 1);
    }
}
