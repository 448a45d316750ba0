use distill_lab::eval::{
    evaluate_datasets, mean_std, score_predictions, train_and_score, welch_t_test, Metric,
};
use distill_lab::pipeline::RunConfig;
use distill_lab::text::{make_synthetic_task, TaskKind};
use proptest::collection::vec;
use proptest::prelude::*;

/// Two-sided Welch p-value by Simpson integration of the unnormalized
/// Student-t density, mapped onto `[0, 1)` with `x = u / (1 - u)`.
fn welch_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    let t = ((ma - mb) / (va + vb).sqrt()).abs();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let density = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let mapped = |u: f64| {
        if u >= 1.0 {
            0.0
        } else {
            density(u / (1.0 - u)) / ((1.0 - u) * (1.0 - u))
        }
    };
    let simpson = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let total = simpson(&mapped, 0.0, 1.0);
    let tail = simpson(&mapped, t / (1.0 + t), 1.0);
    tail / total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn welch_matches_numerical_integration(
        a in vec(0.0..1.0f64, 3..20),
        b in vec(0.0..1.0f64, 3..20),
        shift in -0.5..0.5f64,
    ) {
        let b: Vec<f64> = b.iter().map(|x| x + shift).collect();
        prop_assume!(mean_std(&a).1 > 1e-3 && mean_std(&b).1 > 1e-3);
        let p = welch_t_test(&a, &b).unwrap();
        let q = welch_oracle(&a, &b);
        prop_assert!((p - q).abs() < 1e-6, "{p} vs {q}");
    }
}

#[test]
fn welch_textbook_case() {
    // scipy.stats.ttest_ind(equal_var=False): t = -2.2192, df = 24.496
    let a = [19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0];
    let b = [
        28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9,
        21.6, 24.3, 20.4, 24.0, 13.2,
    ];
    let p = welch_t_test(&a, &b).unwrap();
    assert!((p - welch_oracle(&a, &b)).abs() < 1e-6);
    assert!((p - 0.035972271029797).abs() < 1e-12, "{p}");
}

#[test]
fn metric_values() {
    let gold = [0, 0, 1, 1];
    assert_eq!(
        score_predictions(&[0, 1, 1, 1], &gold, Metric::Accuracy),
        0.75
    );
    // f1 of class 1: tp 2, fp 1, fn 0 -> 0.8
    let m = score_predictions(&[0, 1, 1, 1], &gold, Metric::AccF1Mean);
    assert!((m - (0.75 + 0.8) / 2.0).abs() < 1e-12);
}

#[test]
fn full_training_set_is_nearly_perfect_and_reproducible() {
    let cfg = RunConfig::desk().normalized();
    let train = make_synthetic_task(TaskKind::Keyword, 1000, 1).unwrap();
    let test = make_synthetic_task(TaskKind::Keyword, 300, 2).unwrap();
    let a = train_and_score(&train, &test, &cfg.learner, &cfg.eval, 9).unwrap();
    let b = train_and_score(&train, &test, &cfg.learner, &cfg.eval, 9).unwrap();
    assert!(a > 0.95, "{a}");
    assert_eq!(a, b);
}

#[test]
fn report_is_independent_of_worker_count() {
    let mut cfg = RunConfig::desk().normalized();
    cfg.eval.train_steps = 30;
    let train = make_synthetic_task(TaskKind::Keyword, 8, 3).unwrap();
    let test = make_synthetic_task(TaskKind::Keyword, 50, 4).unwrap();
    let sets = vec![train.clone(), train];
    let one = evaluate_datasets("x", 8, &sets, 3, &test, &cfg.learner, &cfg.eval, 5, 1).unwrap();
    let four = evaluate_datasets("x", 8, &sets, 3, &test, &cfg.learner, &cfg.eval, 5, 4).unwrap();
    assert_eq!(one.runs.len(), 6);
    assert_eq!(one.scores(), four.scores());
    // identical datasets under per-(dataset, run) seeds still differ by run
    assert_ne!(one.scores()[0..3], one.scores()[3..6]);
}
