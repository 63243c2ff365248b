mod common;

use common::{case, check_metrics, init_params, small_inputs, zero_aggregator_deviation, zero_fusion_deviation};
use grouprec::eval::{hr_at_n, ndcg_at_n, ndcg_from_ranks, rank_items, EvalInstance};
use grouprec::model::aggregate;
use grouprec::nn::{log_softmax, softmax, softmax_with_counts};
use proptest::prelude::*;

fn logits() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..40)
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(v in logits()) {
        let p = softmax(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let lp = log_softmax(&v);
        for (a, b) in p.iter().zip(&lp) {
            prop_assert!((a.ln() - b).abs() < 1e-9 || *a == 0.0);
        }
    }

    #[test]
    fn softmax_ignores_shifts(v in logits(), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        for (a, b) in softmax(&v).iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn counted_softmax_equals_softmax_over_repeats(
        entries in prop::collection::vec((-10.0f64..10.0, 1usize..5), 1..12),
    ) {
        let v: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let c: Vec<f64> = entries.iter().map(|e| e.1 as f64).collect();
        let expanded: Vec<f64> = entries.iter().flat_map(|&(x, n)| std::iter::repeat_n(x, n)).collect();
        let flat = softmax(&expanded);
        let mut at = 0;
        for (k, mass) in softmax_with_counts(&v, &c).into_iter().enumerate() {
            let n = entries[k].1;
            let want: f64 = flat[at..at + n].iter().sum();
            at += n;
            prop_assert!((mass - want).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_match_brute_force(cases in prop::collection::vec(case(), 1..12)) {
        check_metrics(&cases, 1e-12)?;
    }
}

#[test]
fn single_relevant_item_at_rank_three() {
    let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4];
    let cands: Vec<u32> = (0..6).collect();
    let inst = [EvalInstance { group: 0, item: 2 }];
    let rankings = vec![rank_items(&scores, &cands)];
    assert_eq!(ndcg_at_n(&inst, &rankings, 5).unwrap(), 0.5);
    assert_eq!(hr_at_n(&inst, &rankings, 5).unwrap(), 1.0);
    assert_eq!(ndcg_from_ranks(&[3], 5), 0.5);
    assert_eq!(ndcg_from_ranks(&[6], 5), 0.0);
}

#[test]
fn zero_fusion_gives_branch_mean() {
    for (store_seed, seed) in [(None, 0), (None, 5), (Some(1), 2), (Some(4), 9)] {
        let (hat, eta) = zero_fusion_deviation(store_seed, seed);
        assert!(hat <= 1e-12, "{store_seed:?}/{seed}: {hat:e}");
        assert_eq!(eta, 0.0);
    }
}

#[test]
fn zero_aggregator_gives_meanpool() {
    for seed in 0..5 {
        let (r, gamma) = zero_aggregator_deviation(seed);
        assert!(r <= 1e-12 && gamma <= 1e-12, "seed {seed}: {r:e} {gamma:e}");
    }
}

proptest! {
    #[test]
    fn attention_aggregation_ignores_member_order(
        hats in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 6), 1..7),
        seed in 0u64..50,
        rot in 0usize..7,
    ) {
        let inputs = small_inputs(None);
        let p = init_params(&inputs, 6, seed);
        let refs: Vec<&[f64]> = hats.iter().map(Vec::as_slice).collect();
        let mut rotated = refs.clone();
        rotated.rotate_left(rot % refs.len());
        let a = aggregate(&p, &refs).unwrap();
        let b = aggregate(&p, &rotated).unwrap();
        prop_assert!((a.gamma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.r.iter().zip(&b.r) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let mut ga = a.gamma.clone();
        ga.rotate_left(rot % refs.len());
        for (x, y) in ga.iter().zip(&b.gamma) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
