use attrsparse::model::{Activation, LinearModel};
use attrsparse::theory::*;
use attrsparse::LossSpec;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const N: usize = 100_000;

fn gaussian(a: Vec<f64>) -> FeatureSampler {
    let sd = vec![1.0; a.len()];
    FeatureSampler::new(a, sd, NoiseKind::Gaussian, 0.5).unwrap()
}

#[test]
fn zero_weights_update_matches_strengths() {
    let s = gaussian(vec![1.0, 0.5, 0.0, -0.7]);
    for spec in LossSpec::ALL {
        let checks = check_theorem1_zero(spec, 0.2, &s, N, 11).unwrap();
        for c in &checks {
            assert!(c.passed, "{spec}: {c:?}");
        }
    }
}

#[test]
fn zero_weights_zero_strength_update_is_negligible() {
    // a = (1, 0): the second coordinate's update is pure noise.
    let s = gaussian(vec![1.0, 0.0]);
    let up = expected_update(LossSpec::Logistic, &[0.0, 0.0], 0.0, &s, N, 5).unwrap();
    assert!(up.delta[1].value.abs() <= 3.0 * up.delta[1].se);
    assert!((up.delta[0].value - 0.5).abs() <= 3.0 * up.delta[0].se);
}

#[test]
fn weighted_bound_over_random_configurations() {
    for spec in LossSpec::ALL {
        let mut failures = 0;
        for k in 0..20u64 {
            let c = draw_bound_configuration(spec, 6, 1000 + k).unwrap();
            let r = check_theorem1_bound(spec, &c.wspec, c.epsilon, &c.sampler, N, k).unwrap();
            if !r.passed {
                failures += 1;
            }
        }
        assert_eq!(failures, 0, "{spec}");
    }
}

#[test]
fn limit_residual_shrinks() {
    for spec in LossSpec::ALL {
        for k in 0..5u64 {
            let c = draw_bound_configuration(spec, 5, 77 + k).unwrap();
            let l = check_theorem1_limit(spec, &c.wspec, c.epsilon, &c.sampler, N, 3, &[1.0, 0.1, 0.01, 0.001]).unwrap();
            assert_eq!(l.steps.len(), 4);
            assert!(l.steps.iter().all(|s| s.covariance_residual.is_finite() && s.covariance_se >= 0.0));
            assert!(l.passed(), "{spec} {k}");
        }
    }
}

#[test]
fn hinge_configurations_avoid_kink() {
    for k in 0..10 {
        let c = draw_bound_configuration(LossSpec::Hinge, 4, k).unwrap();
        assert_eq!(c.sampler.noise(), NoiseKind::Rademacher);
        let l1: f64 = c.wspec.w().iter().map(|v| v.abs()).sum();
        for (y, p, x) in c.sampler.support().unwrap() {
            assert!(p > 0.0);
            let dot: f64 = c.wspec.w().iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((c.epsilon * l1 - y * dot + 1.0).abs() > 0.05);
        }
    }
}

#[test]
fn lemma_random_constructions() {
    for k in 0..20 {
        let c = LemmaConstruction::random(k).check(N, k).unwrap();
        assert!(c.passed, "{c:?}");
    }
}

#[test]
fn lemma_negative_identity_is_strict() {
    // f = −Z, Z ~ N(1, 1): E[Zf] = −2, E[Z]E[f] = −1.
    let c = check_lemma_exp_bound(
        |z, _| -z,
        |rng| (1.0 + rng.sample::<f64, _>(StandardNormal), 0.0, 1.0),
        N,
        9,
    )
    .unwrap();
    assert!(c.passed);
    assert!((c.estimate + 2.0).abs() < 0.05, "{c:?}");
    assert!((c.bound + 1.0).abs() < 0.05);
    assert!(c.estimate < c.bound - 10.0 * c.standard_error);
}

#[test]
fn theorem3_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for spec in LossSpec::ALL {
        for _ in 0..200 {
            let d = rng.gen_range(1..=8);
            let w: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let x: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y = if rng.gen_bool(0.5) { 1 } else { -1 };
            let eps = rng.gen_range(0.0..1.0);
            let m = LinearModel::new(w, Activation::Sigmoid).unwrap();
            let c = check_theorem3_identity(spec, &m, x.view(), y, eps).unwrap();
            assert!(c.residual <= 1e-9, "{spec}: {c:?}");
            let s = theorem3_corner_search(spec, &m, x.view(), y, eps).unwrap();
            assert!((s.best_value - s.closed_form_value).abs() <= 1e-9 * s.best_value.max(1.0), "{spec}: {s:?}");
        }
    }
}

#[test]
fn theorem3_in_single_precision() {
    let m = LinearModel::<f32>::new(Array1::from(vec![0.4, -0.9, 1.3]), Activation::Sigmoid).unwrap();
    let x = Array1::from(vec![0.3f32, 0.1, -0.5]);
    let c = check_theorem3_identity(LossSpec::SoftplusHinge, &m, x.view(), -1, 0.25).unwrap();
    assert!(c.residual <= 1e-5);
}

#[test]
fn monte_carlo_is_reproducible() {
    let s = gaussian(vec![0.3, -0.2]);
    let a = estimate_gprimebar(LossSpec::Logistic, &[0.5, 1.0], 0.1, &s, 30_000, 8).unwrap();
    let b = estimate_gprimebar(LossSpec::Logistic, &[0.5, 1.0], 0.1, &s, 30_000, 8).unwrap();
    assert_eq!(a, b);
}
