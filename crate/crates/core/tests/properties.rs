use proptest::prelude::*;

use optsub::model::Family;
use optsub::optprob::{self, NormVector};
use optsub::solver::{self, WeightedProblem};
use optsub::variance;
use optsub::{Dataset, Scheme};

fn norms(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-3f64..10.0, 10.0f64..1e4], 4..max_n)
        .prop_filter("some positive norm", |v| v.iter().any(|t| *t > 0.0))
}

fn norms_and_size(max_n: usize) -> impl Strategy<Value = (Vec<f64>, usize)> {
    norms(max_n).prop_flat_map(|t| {
        let n = t.len();
        (Just(t), 1..n)
    })
}

fn ols_data() -> impl Strategy<Value = Dataset> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -5.0f64..5.0), 8..40).prop_filter_map(
        "full rank design",
        |rows| {
            let x: Vec<Vec<f64>> = rows.iter().map(|(a, b, _)| vec![1.0, *a, *b]).collect();
            let y: Vec<f64> = rows.iter().map(|(a, b, e)| 1.0 + a - 2.0 * b + e).collect();
            let d = Dataset::from_rows(&x, y).ok()?;
            solver::fit(&WeightedProblem::full(Family::Ols, &d)).ok()?;
            Some(d)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn with_replacement_plan_is_on_the_simplex(t in norms(60)) {
        let plan = optprob::opt_probs_withreplacement(&NormVector::new(t.clone()).unwrap()).unwrap();
        let total: f64 = t.iter().sum();
        prop_assert!((plan.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (p, v) in plan.pi.iter().zip(&t) {
            prop_assert!(*p >= 0.0);
            prop_assert!((p - v / total).abs() <= 1e-15 + 1e-12 * p);
        }
    }

    #[test]
    fn poisson_plan_respects_cap_and_threshold((t, s) in norms_and_size(60)) {
        let tv = NormVector::new(t.clone()).unwrap();
        let positive = t.iter().filter(|v| **v > 0.0).count();
        let plan = match optprob::opt_probs_poisson(&tv, s) {
            Ok(p) => p,
            Err(_) => {
                prop_assert!(positive <= s);
                return Ok(());
            }
        };
        let th = plan.threshold.unwrap();
        prop_assert!((plan.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(plan.pi.iter().all(|p| *p >= 0.0 && *p * s as f64 <= 1.0 + 1e-12));
        let capped: f64 = t.iter().map(|v| v.min(th.h)).sum();
        prop_assert!((capped - s as f64 * th.h).abs() <= 1e-9 * capped);
        let mut sorted = t.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = t.len();
        prop_assert!(sorted[n - th.g - 1] < th.h);
        if th.g > 0 {
            prop_assert!(th.h <= sorted[n - th.g]);
        }
    }

    #[test]
    fn poisson_plan_matches_oracle((t, s) in norms_and_size(30)) {
        let tv = NormVector::new(t).unwrap();
        if let Ok(plan) = optprob::opt_probs_poisson(&tv, s) {
            let oracle = optprob::kkt_oracle(&tv, s).unwrap();
            for (a, b) in plan.pi.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn plans_are_scale_invariant((t, s) in norms_and_size(40), c in 1e-3f64..1e3) {
        let scaled: Vec<f64> = t.iter().map(|v| v * c).collect();
        let a = NormVector::new(t).unwrap();
        let b = NormVector::new(scaled).unwrap();
        let wa = optprob::opt_probs_withreplacement(&a).unwrap();
        let wb = optprob::opt_probs_withreplacement(&b).unwrap();
        for (x, y) in wa.pi.iter().zip(&wb.pi) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300) + 1e-300);
        }
        if let (Ok(pa), Ok(pb)) = (optprob::opt_probs_poisson(&a, s), optprob::opt_probs_poisson(&b, s)) {
            prop_assert_eq!(pa.threshold.unwrap().g, pb.threshold.unwrap().g);
            for (x, y) in pa.pi.iter().zip(&pb.pi) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn truncation_count_grows_with_size(t in norms(50)) {
        let tv = NormVector::new(t.clone()).unwrap();
        let mut last = 0;
        for s in 1..t.len() {
            match optprob::poisson_threshold(&tv, s) {
                Ok(th) => {
                    prop_assert!(th.g >= last, "g fell from {} to {} at s={}", last, th.g, s);
                    last = th.g;
                }
                Err(_) => break,
            }
        }
    }

    #[test]
    fn mixing_stays_on_simplex_and_bounded(t in norms(40), alpha in 0.0f64..=1.0) {
        let n = t.len() as f64;
        let plan = optprob::opt_probs_withreplacement(&NormVector::new(t).unwrap()).unwrap();
        let mixed = optprob::defensive_mix(&plan, alpha).unwrap();
        prop_assert!((mixed.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (m, p) in mixed.pi.iter().zip(&plan.pi) {
            prop_assert!(*m >= alpha / n - 1e-15);
            prop_assert!(*m >= (1.0 - alpha) * p - 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn poisson_variance_identity(data in ols_data(), s_frac in 0.05f64..0.9) {
        let theta = solver::fit(&WeightedProblem::full(Family::Ols, &data)).unwrap().theta;
        let n = data.len();
        let s = ((s_frac * n as f64) as usize).max(1);
        let pi = vec![1.0 / n as f64; n];
        let lr = variance::lambda_r(Family::Ols, &data, &theta, &pi).unwrap();
        let lp = variance::lambda_p(Family::Ols, &data, &theta, &pi, s).unwrap();
        let outer = variance::gradient_outer_sum(Family::Ols, &data, &theta).unwrap();
        let want = &lr - outer * (s as f64 / (n * n) as f64);
        prop_assert!((&lp - &want).abs().max() <= 1e-12 * lr.abs().max().max(1.0));
        prop_assert!(lp.trace() < lr.trace());
    }

    #[test]
    fn sandwich_is_symmetric_psd(data in ols_data()) {
        let theta = solver::fit(&WeightedProblem::full(Family::Ols, &data)).unwrap().theta;
        let t = NormVector::new(optsub::model::grad_norms(Family::Ols, &data, &theta).unwrap()).unwrap();
        let plan = optprob::optimal_plan(&t, Scheme::WithReplacement, 2).unwrap();
        let lambda = variance::lambda_for(Family::Ols, &data, &theta, &plan, 2).unwrap();
        let v = variance::sandwich(Family::Ols, &data, &theta, &lambda).unwrap();
        prop_assert!((&v - v.transpose()).abs().max() <= 1e-12 * v.abs().max());
        prop_assert!(variance::is_psd(&v));
    }

    #[test]
    fn solver_ignores_weight_scale(data in ols_data(), c in 1e-4f64..1e4, seed in any::<u64>()) {
        let n = data.len();
        let idx: Vec<usize> = (0..n).collect();
        let w: Vec<f64> = (0..n).map(|i| 0.5 + ((seed >> (i % 60)) & 1) as f64).collect();
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let a = WeightedProblem::new(Family::Ols, &data, idx.clone(), w).unwrap();
        let b = WeightedProblem::new(Family::Ols, &data, idx, scaled).unwrap();
        let ra = solver::fit(&a).unwrap();
        let rb = solver::fit(&b).unwrap();
        let (ta, tb) = (ra.theta, rb.theta);
        prop_assert!((ra.hessian * c - rb.hessian).abs().max() <= 1e-9 * c * (1.0 + n as f64));
        for (x, y) in ta.iter().zip(&tb) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}
