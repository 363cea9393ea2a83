use blindsim::cq::cq_distance;
use blindsim::error::Error;
use blindsim::linalg::{self, ComplexMatrix, C64};
use blindsim::prep::*;
use blindsim::states::{basis_state, gates, plus_state, DensityMatrix, KrausChannel};
use blindsim::Angle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn half_identity() -> ComplexMatrix {
    ComplexMatrix::identity(2).scale_real(0.5)
}

/// `Tr_1[(Pi ⊗ I) |p><p|]`, computed entry by entry as an independent oracle.
fn steer_oracle(pi: &ComplexMatrix, p: &blindsim::PureState) -> ComplexMatrix {
    let d = pi.rows();
    let a = p.amplitudes();
    ComplexMatrix::from_fn(d, d, |r, c| {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += pi[(j, i)] * a[i * d + r] * a[j * d + c].conj();
            }
        }
        acc
    })
}

#[test]
fn weak_check_examples() {
    let honest = check_weak(&PrepStateFamily::honest()).unwrap();
    assert!(honest.is_weak());
    assert!(honest.eta.max_abs_diff(&half_identity()) < 1e-12);
    assert!(check_weak(&PrepStateFamily::cubed()).unwrap().is_weak());
    let bad = check_weak(&PrepStateFamily::nonweak()).unwrap();
    assert!((bad.deviation - 0.5).abs() < 1e-12);
    assert!(matches!(
        require_weak(&PrepStateFamily::nonweak()),
        Err(Error::NotWeak { .. })
    ));

    let odd = PrepStateFamily::from_fn(&[Angle::ZERO, Angle::HALF_PI, Angle::PI], |t| {
        Ok(plus_state(t).density())
    })
    .unwrap();
    assert!(matches!(check_weak(&odd), Err(Error::NotPiClosed(_))));
}

#[test]
fn honest_steering_is_the_bell_pair() {
    let s = steering_measurements(&PrepStateFamily::honest()).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = [h, 0.0, 0.0, h];
    for (z, b) in s.purification.amplitudes().iter().zip(bell) {
        assert!((z - C64::new(b, 0.0)).norm() < 1e-12);
    }
    for t in blindsim::angle::eight_angles() {
        let expected = plus_state(-t).projector();
        assert!(s.measurements.op(t).unwrap().max_abs_diff(&expected) < 1e-12);
    }
}

#[test]
fn cubed_and_trivial_steering() {
    let s = steering_measurements(&PrepStateFamily::cubed()).unwrap();
    for t in blindsim::angle::eight_angles() {
        let pi = s.measurements.op(t).unwrap();
        assert!(pi.max_abs_diff(&plus_state(-t.times(3)).projector()) < 1e-12);
        let post = steer_oracle(pi, &s.purification);
        assert!(post.max_abs_diff(&plus_state(t.times(3)).projector().scale_real(0.5)) < 1e-12);
    }
    let flat = PrepStateFamily::from_fn(
        &blindsim::angle::eight_angles(),
        |_| DensityMatrix::new(half_identity()),
    )
    .unwrap();
    let s = steering_measurements(&flat).unwrap();
    for op in s.measurements.ops() {
        assert!(op.max_abs_diff(&half_identity()) < 1e-12);
    }
    assert!(steering_measurements(&PrepStateFamily::nonweak()).is_err());
}

#[test]
fn random_weak_families_steer() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let dim = if trial % 2 == 0 { 2 } else { 4 };
        let fam = PrepStateFamily::random_weak(dim, &mut rng).unwrap();
        assert!(check_weak(&fam).unwrap().is_weak());
        let s = steering_measurements(&fam).unwrap();
        assert!(s.measurements.completeness_defect().unwrap() < 1e-10);
        for (t, rho) in fam.angles().iter().zip(fam.states()) {
            let pi = s.measurements.op(*t).unwrap();
            assert!(*linalg::eigvalsh(pi).unwrap().last().unwrap() >= -1e-10);
            let post = steer_oracle(pi, &s.purification);
            assert!((post.trace().re - 0.5).abs() < 1e-10);
            let err = post.scale_real(2.0).max_abs_diff(rho.matrix());
            assert!(err < 1e-9, "trial {trial} dim {dim}: {err}");
        }
    }
}

#[test]
fn measurement_family_validation() {
    let bad = MeasurementFamily::new(vec![
        (Angle::ZERO, ComplexMatrix::identity(2)),
        (Angle::PI, ComplexMatrix::identity(2)),
    ]);
    assert!(matches!(bad, Err(Error::IncompleteFamily { .. })));
    let neg = MeasurementFamily::new(vec![
        (Angle::ZERO, ComplexMatrix::identity(2).scale_real(-0.5)),
        (Angle::PI, ComplexMatrix::identity(2).scale_real(1.5)),
    ]);
    assert!(matches!(neg, Err(Error::NotPositive { .. })));
}

#[test]
fn random_resources() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = rsp_b(None, &mut rng).unwrap();
    assert!(out.state.trace_distance(&plus_state(out.angle).density()).unwrap() < 1e-12);
    let cubed = PrepStateFamily::cubed();
    let out = rsp_b(Some(&cubed), &mut rng).unwrap();
    assert!(
        out.state
            .trace_distance(&plus_state(out.angle.times(3)).density())
            .unwrap()
            < 1e-12
    );
    assert!(matches!(
        rsp_b(Some(&PrepStateFamily::nonweak()), &mut rng),
        Err(Error::Retry(_))
    ));

    let out = rsp_s(Some(&KrausChannel::depolarizing(1.0).unwrap()), &mut rng).unwrap();
    assert!(out.state.matrix().max_abs_diff(&half_identity()) < 1e-12);
    let rot = KrausChannel::unitary(gates::phase_angle(Angle::QUARTER_PI)).unwrap();
    let out = rsp_s(Some(&rot), &mut rng).unwrap();
    let expected = plus_state(out.angle + Angle::QUARTER_PI).density();
    assert!(out.state.trace_distance(&expected).unwrap() < 1e-12);
}

#[test]
fn measurement_based_resource() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let steering = steering_measurements(&PrepStateFamily::honest()).unwrap();
    let bell = steering.purification.density();
    for _ in 0..20 {
        let out = mrsp_b(Some((&MeasurementFamily::honest(), &bell)), &mut rng).unwrap();
        assert!(out.state.trace_distance(&plus_state(out.angle).density()).unwrap() < 1e-12);
    }
    let mixed = DensityMatrix::new(half_identity()).unwrap();
    let joint = mrsp_b_joint(Some((&MeasurementFamily::honest(), &mixed))).unwrap();
    for (label, block) in joint.blocks() {
        assert!((block.trace().re - 0.125).abs() < 1e-12);
        let expected = plus_state(-label[0]).projector().scale_real(0.125);
        assert!(block.max_abs_diff(&expected) < 1e-12);
    }
}

#[test]
fn steering_feeds_measurement_resource_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let families = [
        PrepStateFamily::honest(),
        PrepStateFamily::cubed(),
        PrepStateFamily::mixed(0.3).unwrap(),
        PrepStateFamily::random_weak(4, &mut rng).unwrap(),
    ];
    for fam in &families {
        let s = steering_measurements(fam).unwrap();
        let input = s.purification.density();
        let real = rsp_b_joint(Some(fam)).unwrap();
        let sim = mrsp_b_joint(Some((&s.measurements, &input))).unwrap();
        assert!(cq_distance(&real, &sim).unwrap() < 1e-10);
    }
}

#[test]
fn angle_shift_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let fam = PrepStateFamily::random_weak(2, &mut rng).unwrap();
    let s = steering_measurements(&fam).unwrap();
    let input = s.purification.density();
    let shift = Angle::eighth(3);
    let base = mrsp_b_joint(Some((&s.measurements, &input))).unwrap();
    let moved = mrsp_b_joint(Some((&s.measurements.shifted(shift), &input))).unwrap();
    for (label, block) in base.blocks() {
        let other = moved.block(&[label[0] + shift]).unwrap();
        assert!(block.max_abs_diff(other) < 1e-14);
    }
}

#[test]
fn chosen_angle_wrappers() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..8 {
        let theta = Angle::eighth(k);
        let s = sp_b(theta, &mut rng);
        assert!(s.outcome.state.trace_distance(&plus_state(theta).density()).unwrap() < 1e-12);
        let s = msp_b(theta, None, &mut rng).unwrap();
        assert!(s.outcome.angle == theta || s.outcome.angle == theta + Angle::PI);
        assert!(s.delta < Angle::PI);
        let expected = plus_state(s.outcome.angle).density();
        assert!(s.outcome.state.trace_distance(&expected).unwrap() < 1e-12);
    }
}

#[test]
fn two_state_resource_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 10_000;
    let mut ones = 0;
    for _ in 0..draws {
        let out = sp2_emit(&mut rng);
        if out.angle == Angle::HALF_PI {
            ones += 1;
            assert!(out.state.trace_distance(&plus_state(Angle::HALF_PI).density()).unwrap() < 1e-12);
        } else {
            assert_eq!(out.angle, Angle::ZERO);
        }
    }
    let f = ones as f64 / draws as f64;
    assert!((0.47..=0.53).contains(&f), "{f}");
}

#[test]
fn retry_budget() {
    let mut log = SessionLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let nonweak = PrepStateFamily::nonweak();
    let cubed = PrepStateFamily::cubed();
    let out = with_retries(DEFAULT_RETRY_BUDGET, &mut log, |k| {
        let fam = if k < 2 { &nonweak } else { &cubed };
        rsp_b(Some(fam), &mut rng)
    })
    .unwrap();
    assert!(out.state.trace() > 0.99);
    assert_eq!(log.lines.iter().filter(|l| l.starts_with("retry")).count(), 2);
    assert!(log.lines.last().unwrap().starts_with("emit\t-\t"));

    let mut log = SessionLog::default();
    let err = with_retries(DEFAULT_RETRY_BUDGET, &mut log, |_| rsp_b(Some(&nonweak), &mut rng));
    assert_eq!(err.unwrap_err(), Error::RetriesExhausted(3));
}

#[test]
fn family_file_round_trip() {
    let fam = PrepStateFamily::cubed();
    let back = PrepStateFamily::from_json(&fam.to_json()).unwrap();
    assert_eq!(back.angles(), fam.angles());
    for (a, b) in back.states().iter().zip(fam.states()) {
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-15);
    }
    let bad = r#"{"states":[{"angle":"0pi","matrix":[[[1.5,0],[0,0]],[[0,0],[-0.5,0]]]}]}"#;
    assert!(PrepStateFamily::from_json(bad).is_err());
    assert!(PrepStateFamily::from_json("{").is_err());
}

#[test]
fn two_server_honest_and_rotated() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let out = two_server_prepare(&TwoServerDeviation::honest(), &mut rng).unwrap();
        assert!(out.state.trace_distance(&plus_state(out.angle).density()).unwrap() < 1e-12);
        let out = two_server_prepare(&TwoServerDeviation::rotated_b2(), &mut rng).unwrap();
        let expected = plus_state(out.angle + Angle::QUARTER_PI).density();
        assert!(out.state.trace_distance(&expected).unwrap() < 1e-12);
    }
}

#[test]
fn two_server_correlations_are_weak_and_simulable() {
    for name in ["honest", "computational", "skewed", "biased", "rotated"] {
        let dev = TwoServerDeviation::preset(name).unwrap();
        let corr = two_server_correlation(&dev).unwrap();
        assert!((corr.marginal().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(corr.check_weak().unwrap().is_weak(), "{name}");
        let d = cq_distance(&corr.joint().unwrap(), &corr.simulated_joint().unwrap()).unwrap();
        assert!(d < 1e-10, "{name}: {d}");
    }
    let comp = two_server_correlation(&TwoServerDeviation::computational_b1()).unwrap();
    assert!(check_weak(&comp.family().unwrap()).unwrap().is_weak());
    let z = basis_state(2, 0).projector();
    assert!(comp.blocks[0].max_abs_diff(&ComplexMatrix::identity(2).scale_real(1.0 / 16.0)) < 1e-12);
    assert!(z.rows() == 2);

    let biased = two_server_correlation(&TwoServerDeviation::biased_b1()).unwrap();
    let m = biased.marginal();
    assert!((m[0] - 3.0 / 16.0).abs() < 1e-12 && (m[4] - 1.0 / 16.0).abs() < 1e-12);
}
