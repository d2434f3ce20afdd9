use locality::regularizer::*;
use locality::Kernel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_kernel(rng: &mut ChaCha8Rng) -> Kernel {
    Kernel::new(3, (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap()
}

#[test]
fn unit_factors_are_bitwise_uniform_l2() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lambda = 5e-4;
    let spec = RegSpec::l2(lambda, 1.0, 1.0).unwrap();
    assert_eq!(spec.z(), 1.0);
    for _ in 0..1000 {
        let w = random_kernel(&mut rng);
        assert_eq!(loco_loss(&w, &spec).unwrap(), uniform_l2(w.weights(), lambda));
        let mut a = [0.0; 9];
        let mut b = [0.0; 9];
        loco_grad_into(w.weights(), &spec, &mut a).unwrap();
        uniform_l2_grad_into(w.weights(), lambda, &mut b);
        assert_eq!(a, b);
    }
}

#[test]
fn half_and_double_coefficients() {
    for lambda in [1.0, 5e-4, 3.0] {
        let c = RegSpec::l2(lambda, 0.5, 2.0).unwrap().cell_coefficients();
        let want = [1.44, 0.72, 1.44, 0.72, 0.36, 0.72, 1.44, 0.72, 1.44];
        for (got, w) in c.iter().zip(want) {
            assert!((got - w * lambda).abs() < 1e-12);
        }
    }
}

#[test]
fn class_loss_generalizes_three_by_three() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (g, e) in [(0.7, 0.77), (2.0, 0.5), (1.0, 1.0)] {
        let classes = DistanceClassSpec::three_by_three(g, e).unwrap();
        let spec = RegSpec::l2(0.1, g, e).unwrap();
        let w = random_kernel(&mut rng);
        let a = distance_class_loss(&w, 0.1, &classes, NormExponent::L2).unwrap();
        let b = loco_loss(&w, &spec).unwrap();
        assert!((a - b).abs() < 1e-12 * b.max(1.0));
        let s: f64 = classes.shares(3).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }
}

#[test]
fn regspec_text() {
    let s: RegSpec = "# demo\nlambda = 0.0005\ngamma=0.7\n eta = 0.77 \np = 2\n".parse().unwrap();
    assert_eq!((s.lambda(), s.gamma(), s.eta()), (0.0005, 0.7, 0.77));
    assert_eq!(s.to_text().parse::<RegSpec>().unwrap(), s);
    assert!("lambda = 1\ngamma = 1\n".parse::<RegSpec>().is_err());
    assert!("lambda = 1\ngamma = 1\neta = 1\np = 3\n".parse::<RegSpec>().is_err());
    assert!("lambda = 1\ngamma = 0\neta = 1\n".parse::<RegSpec>().is_err());
    assert!("lambda: 1\n".parse::<RegSpec>().is_err());
}

#[test]
fn gradient_requires_l2() {
    let spec = RegSpec::new(1.0, 1.0, 1.0, NormExponent::L1).unwrap();
    assert!(loco_grad(&Kernel::zeros(3), &spec).is_err());
    assert!(loco_loss(&Kernel::zeros(5), &RegSpec::uniform(1.0).unwrap()).is_err());
}

proptest! {
    #[test]
    fn total_mass_independent_of_factors(
        v in 0.01f64..5.0,
        signs in prop::collection::vec(any::<bool>(), 9),
        g in 0.05f64..20.0,
        e in 0.05f64..20.0,
        lambda in 0.0f64..2.0,
    ) {
        let w = Kernel::new(3, signs.iter().map(|&s| if s { v } else { -v }).collect()).unwrap();
        let base = loco_loss(&w, &RegSpec::l2(lambda, 1.0, 1.0).unwrap()).unwrap();
        let other = loco_loss(&w, &RegSpec::l2(lambda, g, e).unwrap()).unwrap();
        prop_assert!((base - other).abs() <= 1e-12 * base.max(1e-300) + 1e-300);
    }

    #[test]
    fn gradient_matches_central_difference(
        w in prop::collection::vec(-2.0f64..2.0, 9),
        g in 0.1f64..5.0,
        e in 0.1f64..5.0,
    ) {
        let spec = RegSpec::l2(0.3, g, e).unwrap();
        let k = Kernel::new(3, w.clone()).unwrap();
        let grad = loco_grad(&k, &spec).unwrap();
        for i in 0..9 {
            let h = 1e-6;
            let mut a = w.clone();
            a[i] += h;
            let mut b = w.clone();
            b[i] -= h;
            let fd = (loco_loss(&Kernel::new(3, a).unwrap(), &spec).unwrap()
                - loco_loss(&Kernel::new(3, b).unwrap(), &spec).unwrap()) / (2.0 * h);
            prop_assert!((grad.weights()[i] - fd).abs() < 1e-6);
        }
    }
}
