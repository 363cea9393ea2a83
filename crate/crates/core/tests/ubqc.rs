use blindsim::cq::cq_distance;
use blindsim::linalg::{self, ComplexMatrix};
use blindsim::mbqc::{run_pattern, BrickworkPattern, Vertex};
use blindsim::prep::{random_unitary, PrepStateFamily};
use blindsim::states::{basis_state, plus_state, DensityMatrix, KrausChannel};
use blindsim::ubqc::*;
use blindsim::Angle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_input(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let u = random_unitary(1 << n, rng);
    let v = u.column(0);
    DensityMatrix::new(ComplexMatrix::projector(&v)).unwrap()
}

fn ideal(pattern: &BrickworkPattern, input: &DensityMatrix) -> ComplexMatrix {
    pattern.ideal_unitary().conjugate(input.matrix()).unwrap()
}

#[test]
fn delta_examples() {
    assert_eq!(delta_angle(Angle::ZERO, Angle::ZERO, 0), Angle::ZERO);
    assert_eq!(delta_angle(Angle::QUARTER_PI, Angle::HALF_PI, 1), Angle::eighth(7));
    for k in 0..8 {
        let phi = Angle::eighth(k);
        for t in 0..8 {
            let theta = Angle::eighth(t);
            assert_eq!(delta_angle(phi, theta, 0), delta_angle(phi, theta + Angle::PI, 1));
        }
    }
}

#[test]
fn identity_wire_classical_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = BrickworkPattern::new(1, 2).unwrap();
    let input = basis_state(2, 0).density();
    let oracle = run_pattern(&p, &input, &mut rng).unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = run_ubqc(&p, &input, &mut HonestPrep, &BobBehavior::honest(), &mut rng).unwrap();
        assert!(run.output.trace_distance(&oracle.output).unwrap() < 1e-9);
        assert!(linalg::trace_distance(run.output.matrix(), input.matrix()).unwrap() < 1e-9);
    }
}

#[test]
fn honest_runs_match_ideal_unitary() {
    for (n, m) in [(1, 1), (1, 4), (2, 1), (2, 4), (3, 2)] {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 * n as u64 + 10 * m as u64 + seed);
            let p = BrickworkPattern::random(n, m, &mut rng).unwrap();
            let input = random_input(n, &mut rng);
            let run = run_ubqc(&p, &input, &mut HonestPrep, &BobBehavior::honest(), &mut rng).unwrap();
            let d = linalg::trace_distance(run.output.matrix(), &ideal(&p, &input)).unwrap();
            assert!(d < 1e-9, "n={n} m={m} seed={seed}: {d}");
        }
    }
}

#[test]
fn transcript_shape_and_replay() {
    let p = BrickworkPattern::random(2, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let input = random_input(2, &mut ChaCha8Rng::seed_from_u64(2));
    let go = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        run_ubqc(&p, &input, &mut HonestPrep, &BobBehavior::honest(), &mut rng).unwrap()
    };
    let a = go();
    let b = go();
    assert_eq!(a.transcript, b.transcript);
    assert_eq!(a.transcript.to_text(), b.transcript.to_text());
    let text = a.transcript.to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4 + 8 + 2);
    assert!(lines[0].starts_with("prep\t0,0"));
    assert!(lines[4].starts_with("delta\t0,0\t"));
    assert!(lines[5].starts_with("outcome\t0,0\t-\t"));
    assert_eq!(lines[13], "output\t1,2\t-\t-");
    assert_eq!(Transcript::from_text(&text).unwrap(), a.transcript);
    assert!(Transcript::from_text("delta\t0,0\tx\t-").is_err());
}

#[test]
fn deviant_bob_keeps_transcript_well_formed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = BrickworkPattern::random(2, 3, &mut rng).unwrap();
    let input = random_input(2, &mut rng);
    let mixed = DensityMatrix::new(ComplexMatrix::identity(2).scale_real(0.5)).unwrap();
    let bob = BobBehavior::honest()
        .with_receive_channel(KrausChannel::replace_with(&mixed, 2).unwrap())
        .unwrap();
    let run = run_ubqc(&p, &input, &mut HonestPrep, &bob, &mut rng).unwrap();
    assert_eq!(run.transcript.deltas().len(), 6);
    assert_eq!(run.transcript.reported_outcomes(), run.reported);
    assert!((run.output.trace() - 1.0).abs() < 1e-9);
    assert!(linalg::trace_distance(run.output.matrix(), &ideal(&p, &input)).unwrap() > 1e-3);
}

#[test]
fn flip_report_is_undone_by_nothing() {
    // A lying Bob is not caught, but honesty on every other site keeps the
    // run well defined; the output simply differs from the ideal one.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = BrickworkPattern::with_angles(1, 2, vec![Angle::QUARTER_PI, Angle::ZERO]).unwrap();
    let input = plus_state(Angle::ZERO).density();
    let bob = BobBehavior::honest().with_override(Vertex::new(0, 0), RoundStrategy::FlipReport);
    let run = run_ubqc(&p, &input, &mut HonestPrep, &bob, &mut rng).unwrap();
    assert!(linalg::trace_distance(run.output.matrix(), &ideal(&p, &input)).unwrap() > 0.1);
}

#[test]
fn bad_receive_channel_is_rejected() {
    let ch = KrausChannel::unitary(ComplexMatrix::identity(4)).unwrap();
    assert!(BobBehavior::honest().with_receive_channel(ch).is_err());
    let p = BrickworkPattern::new(1, 0).unwrap();
    let input = plus_state(Angle::ZERO).density();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(run_ubqc(&p, &input, &mut HonestPrep, &BobBehavior::honest(), &mut rng).is_err());
}

#[test]
fn single_site_view_factorizes() {
    let family = PrepStateFamily::honest();
    for k in 0..8 {
        let p = BrickworkPattern::with_angles(1, 1, vec![Angle::eighth(k)]).unwrap();
        let view = bob_view(&p, &[0], &family, &[0]).unwrap();
        assert_eq!(view.blocks().len(), 8);
        for block in view.blocks().values() {
            let expected = ComplexMatrix::identity(2).scale_real(1.0 / 16.0);
            assert!(block.max_abs_diff(&expected) < 1e-12);
        }
    }
}

#[test]
fn views_do_not_depend_on_the_computation() {
    let fam = PrepStateFamily::cubed();
    let a = BrickworkPattern::with_angles(1, 1, vec![Angle::ZERO]).unwrap();
    let b = BrickworkPattern::with_angles(1, 1, vec![Angle::QUARTER_PI]).unwrap();
    let va = bob_view(&a, &[1], &fam, &[0]).unwrap();
    let vb = bob_view(&b, &[1], &fam, &[1]).unwrap();
    assert!(cq_distance(&va, &vb).unwrap() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = BrickworkPattern::random(2, 2, &mut rng).unwrap();
    let b = BrickworkPattern::random(2, 2, &mut rng).unwrap();
    let va = bob_view(&a, &[0, 1, 1, 0], &fam, &[0, 1]).unwrap();
    let vb = bob_view(&b, &[0, 1, 1, 0], &fam, &[1, 1]).unwrap();
    assert!((va.trace() - 1.0).abs() < 1e-10);
    assert!(cq_distance(&va, &vb).unwrap() < 1e-10);
}

#[test]
fn nonweak_family_leaks() {
    let fam = PrepStateFamily::nonweak();
    let a = BrickworkPattern::with_angles(1, 1, vec![Angle::ZERO]).unwrap();
    let b = BrickworkPattern::with_angles(1, 1, vec![Angle::HALF_PI]).unwrap();
    let va = bob_view(&a, &[0], &fam, &[0]).unwrap();
    let vb = bob_view(&b, &[0], &fam, &[0]).unwrap();
    assert!(cq_distance(&va, &vb).unwrap() > 0.01);
}

#[test]
fn view_cap() {
    let p = BrickworkPattern::new(1, 5).unwrap();
    assert!(bob_view(&p, &[0; 5], &PrepStateFamily::honest(), &[0]).is_err());
}

#[test]
fn outcome_marginals_are_uniform() {
    let p = BrickworkPattern::with_angles(1, 1, vec![Angle::eighth(3)]).unwrap();
    let input = basis_state(2, 0).density();
    let mut ones = 0;
    let trials = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..trials {
        let run = run_ubqc(&p, &input, &mut HonestPrep, &BobBehavior::honest(), &mut rng).unwrap();
        ones += run.reported[0] as usize;
    }
    let f = ones as f64 / trials as f64;
    assert!((f - 0.5).abs() < 0.05, "{f}");
}
