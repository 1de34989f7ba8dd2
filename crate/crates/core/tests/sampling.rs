use kshrink_core::montecarlo::{replicate_rng, sample_canonical, ModelSampler};
use kshrink_core::{DMatrix, DVector, TrueParameters};
use rand::Rng;

const DRAWS: usize = 200_000;

fn correlated_v() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_row_slice(3, 3, &[2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5]),
        DMatrix::identity(3, 3) * 0.4,
    ]
}

#[test]
fn draws_have_the_model_moments() {
    let v = correlated_v();
    let (n, sigma2) = (7, 1.8);
    let mu = vec![DVector::from_vec(vec![1.0, -2.0, 0.5]), DVector::from_vec(vec![0.0, 3.0, -1.0])];
    let sampler = ModelSampler::new(&v, n, sigma2).unwrap();

    let mut sum_x = vec![DVector::<f64>::zeros(3); 2];
    let mut sum_xx = vec![DMatrix::<f64>::zeros(3, 3); 2];
    let (mut sum_s, mut sum_ss) = (0.0, 0.0);
    for r in 0..DRAWS {
        let m = sampler.sample(&mu, &mut replicate_rng(11, 0, r));
        for i in 0..2 {
            let d = &m.x[i] - &mu[i];
            sum_x[i] += &d;
            sum_xx[i] += &d * d.transpose();
        }
        sum_s += m.s;
        sum_ss += m.s * m.s;
    }
    let nd = DRAWS as f64;
    for i in 0..2 {
        let cov = &v[i] * sigma2;
        for a in 0..3 {
            let se_mean = (cov[(a, a)] / nd).sqrt();
            assert!((sum_x[i][a] / nd).abs() < 5.0 * se_mean, "mean of X_{i}[{a}]");
            for b in 0..3 {
                let se = ((cov[(a, a)] * cov[(b, b)] + cov[(a, b)].powi(2)) / nd).sqrt();
                let got = sum_xx[i][(a, b)] / nd;
                assert!((got - cov[(a, b)]).abs() < 5.0 * se, "cov of X_{i}[{a},{b}]: {got} vs {}", cov[(a, b)]);
            }
        }
    }
    // S ~ sigma^2 chi^2_n: mean n sigma^2, variance 2 n sigma^4
    let mean_s = sum_s / nd;
    let var_s = sum_ss / nd - mean_s * mean_s;
    let want_var = 2.0 * n as f64 * sigma2 * sigma2;
    assert!((mean_s - n as f64 * sigma2).abs() < 5.0 * (want_var / nd).sqrt());
    assert!((var_s / want_var - 1.0).abs() < 0.03);
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let draw = |seed, g, r| replicate_rng(seed, g, r).random::<u64>();
    assert_eq!(draw(1, 2, 3), draw(1, 2, 3));
    assert_ne!(draw(1, 2, 3), draw(1, 2, 4));
    assert_ne!(draw(1, 2, 3), draw(1, 3, 3));
    assert_ne!(draw(1, 2, 3), draw(2, 2, 3));
}

#[test]
fn canonical_sampler_checks_dimensions() {
    let truth = TrueParameters::new(vec![DVector::zeros(3); 2], 1.0).unwrap();
    let mut rng = replicate_rng(0, 0, 0);
    assert!(sample_canonical(&truth, &correlated_v(), 5, &mut rng).is_ok());
    assert!(sample_canonical(&truth, &correlated_v()[..1], 5, &mut rng).is_err());
    assert!(ModelSampler::new(&correlated_v(), 5, 0.0).is_err());
}
