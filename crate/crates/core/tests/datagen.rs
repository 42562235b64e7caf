use proptest::prelude::*;
use tensorpgd::datagen::{
    derive_seed, gaussian_tensor, gen_cp, gen_design, gen_covariates, gen_response, gen_sparse_slices,
    gen_tucker, snr, CaseSpec, SnrLevel, Structure,
};
use tensorpgd::projection::{mode_ranks, slice_ranks};
use tensorpgd::{ConstraintSpec, GlmFamily};

#[test]
fn gaussian_entries_have_unit_moments() {
    let g = gaussian_tensor(&[20, 20, 25], 4);
    let n = g.len() as f64;
    let mean = g.data().iter().sum::<f64>() / n;
    let var = g.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    // 10000 draws: 4 standard errors
    assert!(mean.abs() < 0.04, "mean {}", mean);
    assert!((var - 1.0).abs() < 0.06, "var {}", var);
}

#[test]
fn design_rows_match_covariates() {
    let dims = [3, 2, 2];
    let x = gen_design(5, &dims, 8);
    let xs = gen_covariates(5, &dims, 8);
    for (i, t) in xs.iter().enumerate() {
        assert_eq!(t.dims(), &dims);
        for j in 0..t.len() {
            assert_eq!(x[(i, j)], t.data()[j]);
        }
    }
}

#[test]
fn gaussian_responses_have_the_configured_noise() {
    let dims = [4, 4, 4];
    let truth = gen_cp(&dims, 2, 1).unwrap();
    let xs = gen_covariates(4000, &dims, 2);
    let y = gen_response(&GlmFamily::Gaussian { sigma: 2.0 }, &xs, &truth, 3).unwrap();
    let resid: Vec<f64> = xs.iter().zip(&y).map(|(x, y)| y - x.inner(&truth).unwrap()).collect();
    let var = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
    assert!((var - 4.0).abs() < 0.4, "var {}", var);
}

#[test]
fn poisson_and_logistic_responses_are_counts() {
    let dims = [3, 3, 3];
    let truth = gen_cp(&dims, 1, 4).unwrap();
    let xs = gen_covariates(300, &dims, 5);
    let y = gen_response(&GlmFamily::Logistic { m: 7, alpha: 1.0 }, &xs, &truth, 6).unwrap();
    assert!(y.iter().all(|&v| v.fract() == 0.0 && (0.0..=7.0).contains(&v)));
    let y = gen_response(&GlmFamily::Poisson { m: 3.0, alpha: 0.5 }, &xs, &truth, 6).unwrap();
    assert!(y.iter().all(|&v| v.fract() == 0.0 && v >= 0.0));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    // E[m e^{αθ}] with θ ~ N(0, 1) is 3 e^{1/8}
    assert!((mean - 3.0 * 0.125f64.exp()).abs() < 0.5, "mean {}", mean);
}

#[test]
fn reported_snr_levels_are_reproduced() {
    // (case, level, value): Gaussian ones are exact, GLM ones Monte-Carlo
    let expected = [
        ("6a", SnrLevel::High, 4.47, 0.01),
        ("8a", SnrLevel::Low, 2.5, 0.01),
        ("6b", SnrLevel::High, 9.0, 1.0),
        ("6b", SnrLevel::Low, 2.0, 0.3),
        ("6c", SnrLevel::Moderate, 4.7, 0.7),
    ];
    for (id, level, value, tol) in expected {
        let case = CaseSpec::lookup(id, level).unwrap();
        let t = case.generate_truth(1).unwrap();
        let got = snr(&t, &case.family, 20_000, 2);
        assert!((got - value).abs() < tol, "{} {:?}: {}", id, level, got);
    }
}

#[test]
fn seeds_depend_on_every_part() {
    let base = derive_seed(1, &[2, 3]);
    assert_ne!(base, derive_seed(1, &[3, 2]));
    assert_ne!(base, derive_seed(2, &[2, 3]));
    assert_ne!(base, derive_seed(1, &[2, 3, 0]));
    assert_eq!(base, derive_seed(1, &[2, 3]));
}

#[test]
fn case_datasets_are_reproducible() {
    let case = CaseSpec::lookup("7c", SnrLevel::Low).unwrap().with_n(30);
    let a = case.generate(5).unwrap();
    let b = case.generate(5).unwrap();
    let c = case.generate(6).unwrap();
    assert_eq!(a.responses(), b.responses());
    assert_eq!(a.truth(), b.truth());
    assert_ne!(a.truth(), c.truth());
}

#[test]
fn structures_serialize_with_a_kind_tag() {
    let s: Structure = toml::from_str("kind = \"sparse_slices\"\nr = 2\ns = 3").unwrap();
    assert_eq!(s, Structure::SparseSlices { r: 2, s: 3 });
    assert_eq!(s.constraint(), ConstraintSpec::Theta2 { r: 2, s: 3 });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generators_land_in_their_cones(seed in any::<u64>(), d in 3usize..7, r in 1usize..3) {
        let dims = [d, d, d];
        let tol = 1e-9;
        let cp = gen_cp(&dims, r, seed).unwrap();
        prop_assert!((cp.frobenius_norm() - (r as f64).sqrt()).abs() < 1e-10);
        prop_assert!(mode_ranks(&cp, tol).unwrap().iter().all(|&k| k <= r));

        let tucker = gen_tucker(&dims, r, seed).unwrap();
        prop_assert!(mode_ranks(&tucker, tol * tucker.frobenius_norm()).unwrap().iter().all(|&k| k <= r));

        let s = 1 + (seed % d as u64) as usize;
        let sl = gen_sparse_slices(&dims, r, s, seed).unwrap();
        let ranks = slice_ranks(&sl, tol).unwrap();
        prop_assert_eq!(ranks.iter().filter(|&&k| k > 0).count(), s);
        prop_assert!(ranks.iter().all(|&k| k == 0 || k == r));
        prop_assert!((sl.frobenius_norm() - ((r * s) as f64).sqrt()).abs() < 1e-10);
    }
}
