use optsub::experiments::{self, CovariateLaw, GeneratorSpec, ModelKind};
use optsub::model::Family;
use optsub::optprob::HMode;
use optsub::pipeline::{self, PipelineOptions};
use optsub::sampling::{self, RngSeed, Scheme};

fn logistic_data(n: usize) -> optsub::Dataset {
    let spec = GeneratorSpec::new(ModelKind::Logistic, n, 4, CovariateLaw::Normal);
    experiments::generate(&spec, RngSeed::new(77, 0)).unwrap()
}

#[test]
fn runs_are_deterministic_per_seed() {
    let data = logistic_data(5000);
    for scheme in [Scheme::WithReplacement, Scheme::Poisson] {
        let opts = PipelineOptions::new(100, 500);
        let a = pipeline::run(Family::Logistic, &data, scheme, &opts, RngSeed::new(1, 0)).unwrap();
        let b = pipeline::run(Family::Logistic, &data, scheme, &opts, RngSeed::new(1, 0)).unwrap();
        let c = pipeline::run(Family::Logistic, &data, scheme, &opts, RngSeed::new(1, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.estimate(), c.estimate());
    }
}

#[test]
fn estimates_are_close_to_full_fit() {
    let data = logistic_data(20_000);
    let full = pipeline::fit_full(Family::Logistic, &data).unwrap().theta;
    for (scheme, h_mode) in [
        (Scheme::WithReplacement, HMode::Quantile),
        (Scheme::Poisson, HMode::Quantile),
        (Scheme::Poisson, HMode::Infinity),
    ] {
        let opts = PipelineOptions::new(200, 2000).h_mode(h_mode);
        let res = pipeline::run(Family::Logistic, &data, scheme, &opts, RngSeed::new(5, 0)).unwrap();
        let err: f64 = res.estimate().iter().zip(&full).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err < 0.05, "{scheme} {h_mode:?}: squared error {err}");
    }
}

#[test]
fn alpha_one_is_uniform_second_stage() {
    let data = logistic_data(3000);
    let opts = PipelineOptions::new(60, 300).alpha(1.0);
    let res = pipeline::run(Family::Logistic, &data, Scheme::Poisson, &opts, RngSeed::new(3, 0)).unwrap();
    let size = res.second.size as f64;
    assert!((size - 300.0).abs() < 5.0 * 300f64.sqrt(), "second stage size {size}");
}

#[test]
fn poisson_sampler_hits_expected_size() {
    let n = 2000;
    let s = 150;
    let pi: Vec<f64> = (0..n).map(|i| (1.0 + (i % 7) as f64) / 8000.0).collect();
    let total: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|p| p / total).collect();
    let reps = 2000u64;
    let mean = (0..reps)
        .map(|r| sampling::sample_poisson(pi.iter().copied(), s, RngSeed::new(4, r)).indices.len() as f64)
        .sum::<f64>()
        / reps as f64;
    let var: f64 = pi.iter().map(|p| (s as f64 * p).min(1.0)).map(|q| q * (1.0 - q)).sum();
    assert!((mean - s as f64).abs() < 4.0 * (var / reps as f64).sqrt());
}

#[test]
fn with_replacement_sampler_is_exact_size_and_reproducible() {
    let pi = [0.1, 0.2, 0.3, 0.4];
    let a = sampling::sample_with_replacement(&pi, 1000, RngSeed::new(2, 9)).unwrap();
    let b = sampling::sample_with_replacement(&pi, 1000, RngSeed::new(2, 9)).unwrap();
    assert_eq!(a.indices.len(), 1000);
    assert_eq!(a, b);
    assert!(a.indices.iter().all(|i| *i < 4));
}
