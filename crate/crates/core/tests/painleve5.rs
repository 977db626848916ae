use std::f64::consts::PI;

use isolab::algebra::{exp_ipi, ONE, ZERO};
use isolab::fuchsian::{LoopMeta, MonodromyKind, MonodromyPoint, Residuals};
use isolab::painleve5::*;
use isolab::{c, Error, Mat2C, C};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn thetas() -> Thetas5 {
    Thetas5::new(c(0.3, 0.1), c(0.45, -0.2), c(0.35, 0.05))
}

fn state(seed: u64, t5: C) -> P5State {
    P5State::random(&mut ChaCha8Rng::seed_from_u64(seed), thetas(), t5)
}

#[test]
fn assembled_residues_have_the_printed_structure() {
    let th = thetas();
    let mut st = state(1, c(1.0, 0.0));
    let r = st.invariant_residuals();
    assert!(r.iter().all(|x| *x <= 1e-10), "{r:?}");
    let sys = st.assemble5().unwrap();
    assert_eq!(sys.poly_part, Mat2C::sigma3() * c(0.5, 0.0));
    assert_eq!(sys.residue_at(ONE).unwrap(), st.a15());

    st.z5 = ZERO;
    assert_eq!(st.a05().a21, ZERO);
    st.z5 = -th.th0;
    assert_eq!(st.a05().a12, ZERO);

    st.y5 = ZERO;
    assert!(matches!(st.assemble5(), Err(Error::ConstraintViolation(_))));
}

#[test]
fn residues_round_trip_through_coordinates() {
    let st = state(2, c(1.2, 0.1));
    let back = P5State::from_residues(st.t5, &st.a05(), &st.a15(), st.thetas).unwrap();
    for (a, b) in [(st.u5, back.u5), (st.z5, back.z5), (st.y5, back.y5)] {
        assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
    }
}

#[test]
fn diagonal_residues_do_not_move() {
    let thinf = c(0.7, 0.0);
    let a0 = Mat2C::diag(c(0.1, 0.0), c(-0.1, 0.0));
    let a1 = Mat2C::diag(c(-0.45, 0.0), c(0.45, 0.0));
    let [b0, b1] = flow_residues5(ONE, [a0, a1], thinf, c(1.5, 0.2), 1e-12).unwrap();
    assert!(b0.dist(&a0) <= 1e-14 && b1.dist(&a1) <= 1e-14);
}

#[test]
fn flow_refuses_to_cross_zero() {
    let st = state(3, c(-1.0, 0.0));
    assert!(matches!(
        idm5_flow(&st, c(1.0, 0.0), 1e-10),
        Err(Error::SingularTime(_))
    ));
}

#[test]
fn flow_solves_p5() {
    let th = thetas();
    let st = state(4, c(1.0, 0.0));
    for t in [1.1, 1.3, 1.5] {
        let s = idm5_flow(&st, c(t, 0.0), 1e-13).unwrap();
        assert!(s.invariant_residuals().iter().all(|x| *x <= 1e-9));
        let (y, yp, ypp) = y5_jet(&s, 1e-3, 1e-13).unwrap();
        let r = p5_residual(s.t5, y, yp, ypp, &th);
        assert!(r <= 1e-5, "t5 = {t}: residual {r:e}");
        // a wrong γ5 is visible
        let bad = Thetas5::new(th.th0, th.th1 + 0.05, th.thinf);
        let mut rb = (ypp - p5_rhs(s.t5, y, yp, &bad)).norm();
        rb /= ypp.norm().max(1.0);
        assert!(rb > 1e-3);
    }
}

#[test]
fn sigma5_derivative_is_minus_z5() {
    let st = state(5, c(1.0, 0.0));
    let n = 40;
    let times: Vec<C> = (0..=n).map(|k| c(1.0 + 0.5 * k as f64 / n as f64, 0.0)).collect();
    let traj = trajectory5(&st, &times, 1e-13).unwrap();
    let h = 0.5 / n as f64;
    let mut int = ZERO;
    for (k, s) in traj.iter().enumerate() {
        let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        int += -s.z5 * w;
    }
    int *= h / 3.0;
    let ds = sigma5(&traj[n]).unwrap() - sigma5(&traj[0]).unwrap();
    assert!((ds - int).norm() <= 1e-6, "{ds} vs {int}");
}

#[test]
fn tau5_special_values() {
    let th = thetas();
    let t5 = c(1.3, 0.2);
    let st = P5State {
        t5,
        u5: c(0.8, 0.1),
        z5: ZERO,
        y5: ONE,
        thetas: th,
    };
    let sum = th.th0 + th.th1 + th.thinf;
    let diff = th.th0 - th.th1 + th.thinf;
    let expect = -(th.th0 + th.thinf) / 2.0 + (sum / 2.0) * (th.th0 - diff / 2.0) / t5;
    assert!((tau5_logderiv(&st).unwrap() - expect).norm() <= 1e-12);
    let zero_t = P5State { t5: ZERO, ..st };
    assert!(matches!(tau5_scalar(&zero_t), Err(Error::IndeterminateTau(_))));
}

#[test]
fn tau5_matches_the_formal_series() {
    // −½ tr(Φ1σ3) from the expansion at infinity is a third route to d log τ5
    for seed in 0..5 {
        let st = state(10 + seed, c(0.8 + 0.2 * seed as f64, -0.1));
        let phi = formal_series5(st.t5, &st.a05(), &st.a15(), st.thetas.thinf, 2);
        let via_psi = -(phi[1] * Mat2C::sigma3()).trace() / 2.0;
        assert!((tau5_logderiv(&st).unwrap() - via_psi).norm() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn tau5_forms_agree(seed in any::<u64>(), tr in 0.3f64..3.0, ti in -1.0f64..1.0) {
        let st = state(seed, c(tr, ti));
        prop_assert!(st.invariant_residuals().iter().all(|x| *x <= 1e-10));
        let a = tau5_scalar(&st).unwrap();
        let b = tau5_matrix(&st).unwrap();
        prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0));
    }
}

#[test]
fn free_system_has_trivial_stokes_data() {
    let t5 = c(1.5, 0.0);
    let sys = system5(t5, Mat2C::zero(), Mat2C::zero(), ZERO).unwrap();
    let opts = FrameOptions::for_time(t5);
    for k in 0..3 {
        let f = canonical_frame(&sys, t5, k, &opts).unwrap();
        let exact = Mat2C::exp_sigma3(f.point * t5 / 2.0);
        assert!(f.psi.dist(&exact) <= 1e-12 * exact.norm());
    }
    let s = stokes_of(&sys, t5, &opts).unwrap();
    assert!(s.s0.norm() <= 1e-10 && s.s1.norm() <= 1e-10);
}

#[test]
fn anchors_are_validated() {
    let st = state(6, c(1.0, 0.0));
    let sys = st.assemble5().unwrap();
    let mut opts = FrameOptions::for_time(st.t5);
    opts.radius = 20.0;
    assert!(matches!(
        canonical_frame(&sys, st.t5, 0, &opts),
        Err(Error::AnchorTooClose(_))
    ));
    let mut opts = FrameOptions::for_time(st.t5);
    opts.offset = PI;
    assert!(matches!(
        canonical_frame(&sys, st.t5, 0, &opts),
        Err(Error::SectorViolation(_))
    ));
}

#[test]
fn stokes_data_is_anchor_independent() {
    let st = state(7, c(1.2, 0.2));
    let sys = st.assemble5().unwrap();
    let opts = FrameOptions::for_time(st.t5);
    let base = stokes_of(&sys, st.t5, &opts).unwrap();
    assert!(base.off_pattern <= 1e-8);

    let mut far = opts;
    far.radius *= 2.0;
    let s = stokes_of(&sys, st.t5, &far).unwrap();
    assert!((s.s0 - base.s0).norm().max((s.s1 - base.s1).norm()) <= 1e-3);

    // anchors rotated off the central ray on either side
    for k in 0..2 {
        let mut lo = opts;
        lo.offset = -PI / 8.0;
        let mut hi = opts;
        hi.offset = PI / 8.0;
        let a = stokes_matrix_numeric(&sys, st.t5, k, &lo).unwrap();
        let b = stokes_matrix_numeric(&sys, st.t5, k, &hi).unwrap();
        assert!(a.dist(&b) <= 5e-4, "k = {k}: {:e}", a.dist(&b));
    }
}

#[test]
fn stokes_matrices_follow_the_shift_rule() {
    let st = state(8, c(1.0, -0.2));
    let sys = st.assemble5().unwrap();
    let opts = FrameOptions::for_time(st.t5);
    let data = stokes_of(&sys, st.t5, &opts).unwrap();
    for k in [2, 3, -1] {
        let num = stokes_matrix_numeric(&sys, st.t5, k, &opts).unwrap();
        let d = num.dist(&data.s(k));
        assert!(d <= 1e-3 * data.s(k).norm(), "k = {k}: {d:e}");
    }
    assert!(data.trace_residual() <= 1e-10 * data.m_inf(0).norm());
}

#[test]
fn reducible_system_has_no_lower_stokes_multiplier() {
    let th = Thetas5::new(c(0.3, 0.1), c(0.45, -0.2), c(-0.75, 0.1));
    let st = P5State {
        t5: c(1.1, 0.0),
        u5: c(0.9, 0.2),
        z5: ZERO,
        y5: c(1.2, -0.1),
        thetas: th,
    };
    assert_eq!(st.a05().a21, ZERO);
    assert!(st.a15().a21.norm() <= 1e-15);
    let sys = st.assemble5().unwrap();
    let s = stokes_of(&sys, st.t5, &FrameOptions::for_time(st.t5)).unwrap();
    assert!(s.s0.norm() <= 1e-3, "{}", s.s0);
}

#[test]
fn monodromy_closes_in_both_presentations() {
    for (seed, t5) in [(9, c(1.0, 0.0)), (10, c(1.4, 0.3)), (11, c(0.9, -0.2))] {
        let st = state(seed, t5);
        let sys = st.assemble5().unwrap();
        let rep = m5_point(&sys, t5, &st.thetas, &FrameOptions::for_time(t5)).unwrap();
        let scale = rep.point.get("inf").unwrap().norm();
        assert!(rep.point.residuals.cyclic <= 2e-3, "{:?}", rep.point.residuals);
        assert!(rep.tilde.residuals.cyclic <= 2e-3, "{:?}", rep.tilde.residuals);
        assert_eq!(rep.tilde.get("0"), rep.point.get("0"));
        assert_eq!(rep.tilde.get("inf"), rep.point.get("inf"));
        // direct loops agree with the Stokes and conjugation routes
        let d_inf = rep.m_inf_loop.dist(&rep.point.get("inf").unwrap());
        assert!(d_inf <= 2e-3 * scale.max(1.0), "{d_inf:e}");
        let m1t = rep.tilde.get("1").unwrap();
        assert!(rep.m1_tilde_loop.dist(&m1t) <= 2e-3 * m1t.norm().max(1.0));
        let json = serde_json::to_string(&rep).unwrap();
        let back: M5Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back.point, rep.point);
    }
}

#[test]
fn commuting_local_monodromies_give_the_same_tilde_matrix() {
    let th = thetas();
    let m0 = Mat2C::diag(exp_ipi(th.th0), exp_ipi(-th.th0));
    let m1 = Mat2C::diag(exp_ipi(th.th1), exp_ipi(-th.th1));
    let point = MonodromyPoint {
        kind: MonodromyKind::P5,
        matrices: vec![
            ("0".into(), m0),
            ("1".into(), m1),
            ("inf".into(), (m0 * m1).inv().unwrap()),
        ],
        thetas: th.tuple(),
        residuals: Residuals::default(),
        meta: LoopMeta::default(),
    };
    let tilde = tilde_presentation(&point, P5_TILDE_BASE).unwrap();
    assert!(tilde.get("1").unwrap().dist(&m1) <= 1e-15);
    assert!(tilde.residuals.cyclic <= 1e-14);
}

#[test]
fn stokes_multipliers_are_isomonodromic() {
    let st = state(12, c(1.0, 0.0));
    let end = idm5_flow(&st, c(1.3, 0.0), 1e-12).unwrap();
    let a = stokes_of(&st.assemble5().unwrap(), st.t5, &FrameOptions::for_time(st.t5)).unwrap();
    let b = stokes_of(&end.assemble5().unwrap(), end.t5, &FrameOptions::for_time(end.t5)).unwrap();
    let drift = (a.s0 - b.s0).norm().max((a.s1 - b.s1).norm());
    assert!(drift <= 5e-3 * a.s0.norm().max(a.s1.norm()).max(1.0), "{drift:e}");
}

#[test]
fn trajectory_csv_has_one_row_per_state() {
    let st = state(13, c(1.0, 0.0));
    let traj = trajectory5(&st, &[c(1.1, 0.0), c(1.2, 0.0)], 1e-10).unwrap();
    let csv = trajectory5_csv(&traj);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with(TRAJECTORY5_HEADER));
}
