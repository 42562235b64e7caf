use proptest::prelude::*;
use tensorpgd::datagen::{gaussian_tensor, gen_covariates, gen_response};
use tensorpgd::glm::{evaluate, gradient, objective};
use tensorpgd::{Dataset, DenseTensor, GlmFamily};

const FAMILIES: [GlmFamily; 3] = [
    GlmFamily::Gaussian { sigma: 0.7 },
    GlmFamily::Logistic { m: 4, alpha: 1.3 },
    GlmFamily::Poisson { m: 2.0, alpha: 0.4 },
];

fn small_dataset(family: GlmFamily, seed: u64) -> Dataset {
    let dims = [3, 3, 3];
    let truth = gaussian_tensor(&dims, seed).scaled(0.3);
    let xs = gen_covariates(40, &dims, seed + 1);
    let y = gen_response(&family, &xs, &truth, seed + 2).unwrap();
    Dataset::new(&xs, y, family, Some(truth)).unwrap()
}

#[test]
fn gradient_matches_central_differences_everywhere() {
    let h = 1e-6;
    for family in FAMILIES {
        for seed in [1, 2, 3] {
            let data = small_dataset(family, 10 * seed);
            let a = gaussian_tensor(&[3, 3, 3], seed + 100).scaled(0.2);
            let g = gradient(&data, &a).unwrap();
            for i in 0..a.len() {
                let mut up = a.clone();
                up.data_mut()[i] += h;
                let mut down = a.clone();
                down.data_mut()[i] -= h;
                let fd = (objective(&data, &up).unwrap() - objective(&data, &down).unwrap()) / (2.0 * h);
                let exact = g.data()[i];
                let rel = (fd - exact).abs() / exact.abs().max(1.0);
                assert!(rel <= 1e-5, "{} coordinate {}: {} vs {}", family.name(), i, fd, exact);
            }
        }
    }
}

#[test]
fn zero_coefficient_objective_by_hand() {
    // a(0) for each family with y = (1, 2): Gaussian y²/2, logistic m·ln 2, Poisson m
    let xs = vec![DenseTensor::zeros(&[1, 1, 1]); 2];
    let zero = DenseTensor::zeros(&[1, 1, 1]);
    let gauss = Dataset::new(&xs, vec![1.0, 2.0], GlmFamily::Gaussian { sigma: 1.0 }, None).unwrap();
    assert!((objective(&gauss, &zero).unwrap() - 1.25).abs() < 1e-15);
    let logit = Dataset::new(&xs, vec![1.0, 2.0], GlmFamily::Logistic { m: 3, alpha: 2.0 }, None).unwrap();
    assert!((objective(&logit, &zero).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-15);
    let pois = Dataset::new(&xs, vec![1.0, 2.0], GlmFamily::Poisson { m: 5.0, alpha: 1.0 }, None).unwrap();
    assert!((objective(&pois, &zero).unwrap() - 5.0).abs() < 1e-15);
}

#[test]
fn logistic_loss_is_overflow_safe() {
    let f = GlmFamily::Logistic { m: 2, alpha: 1.0 };
    assert!((f.log_partition(800.0) - 1600.0).abs() < 1e-9);
    assert!(f.log_partition(-800.0) >= 0.0 && f.log_partition(-800.0) < 1e-300);
    assert!((f.mean(800.0) - 2.0).abs() < 1e-15);
    assert!(f.curvature(800.0).is_finite());
}

#[test]
fn poisson_overflow_is_reported() {
    let xs = vec![DenseTensor::new(vec![1, 1, 1], vec![1.0]).unwrap()];
    let data = Dataset::new(&xs, vec![1.0], GlmFamily::Poisson { m: 1.0, alpha: 1.0 }, None).unwrap();
    let huge = DenseTensor::new(vec![1, 1, 1], vec![1e4]).unwrap();
    assert!(evaluate(&data, &huge).is_err());
}

#[test]
fn invalid_families_are_rejected() {
    assert!(GlmFamily::Gaussian { sigma: -1.0 }.validate().is_err());
    assert!(GlmFamily::Logistic { m: 0, alpha: 1.0 }.validate().is_err());
    assert!(GlmFamily::Poisson { m: 0.0, alpha: 1.0 }.validate().is_err());
}

#[test]
fn mismatched_dims_are_shape_errors() {
    let data = small_dataset(FAMILIES[0], 1);
    let wrong = DenseTensor::zeros(&[3, 3, 2]);
    assert!(matches!(objective(&data, &wrong), Err(tensorpgd::Error::Shape(_))));
    let xs = vec![DenseTensor::zeros(&[2, 2]), DenseTensor::zeros(&[2, 3])];
    assert!(Dataset::new(&xs, vec![0.0, 0.0], FAMILIES[0], None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // f((a + b)/2) ≤ (f(a) + f(b))/2 for every family
    #[test]
    fn objective_is_convex_along_lines(fam in 0usize..3, seed in 0u64..1000, t in 0.0f64..1.0) {
        let data = small_dataset(FAMILIES[fam], seed);
        let a = gaussian_tensor(&[3, 3, 3], seed + 7).scaled(0.3);
        let b = gaussian_tensor(&[3, 3, 3], seed + 8).scaled(0.3);
        let mut mid = a.scaled(1.0 - t);
        mid.axpy(t, &b).unwrap();
        let fa = objective(&data, &a).unwrap();
        let fb = objective(&data, &b).unwrap();
        let fm = objective(&data, &mid).unwrap();
        prop_assert!(fm <= (1.0 - t) * fa + t * fb + 1e-10 * (1.0 + fa.abs() + fb.abs()));
    }

    #[test]
    fn curvature_is_nonnegative(fam in 0usize..3, theta in -50.0f64..50.0) {
        prop_assert!(FAMILIES[fam].curvature(theta) >= 0.0);
    }

    #[test]
    fn loss_derivative_matches_difference(fam in 0usize..3, theta in -5.0f64..5.0, y in 0.0f64..4.0) {
        let f = FAMILIES[fam];
        let h = 1e-6;
        let fd = (f.loss(theta + h, y) - f.loss(theta - h, y)) / (2.0 * h);
        prop_assert!((fd - f.loss_derivative(theta, y)).abs() <= 1e-5 * (1.0 + fd.abs()));
    }
}
