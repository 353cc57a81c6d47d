use proptest::prelude::*;

use cliqueparcel::batch::{build_batch, parse_itemized, render_itemized};
use cliqueparcel::clique::{make_grouping, CliqueMethod};
use cliqueparcel::data::{Prompt, Workload};
use cliqueparcel::eval::{relative_cost, weighted_efficiency};
use cliqueparcel::text::{bleu_score, rouge_l_score};
use cliqueparcel::tradeoff::{normalize_objectives, owa_score, ObjectivePoint, OwaWeights};

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["alpha", "beta", "gamma", "delta", "river", "stone", "42", "x-ray", "why?"])
        .prop_map(str::to_string)
}

fn phrase(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..max).prop_map(|w| w.join(" "))
}

fn method() -> impl Strategy<Value = CliqueMethod> {
    prop::sample::select(CliqueMethod::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn grouping_partitions_workload(
        texts in prop::collection::vec((phrase(12), prop::option::of(0..3usize)), 1..30),
        l in 1..9usize,
        seed in any::<u64>(),
        m in method(),
    ) {
        let prompts: Vec<Prompt> = texts
            .iter()
            .enumerate()
            .map(|(i, (t, c))| {
                let p = Prompt::new(format!("p{i}"), t.clone());
                match c {
                    Some(c) => p.with_concept(["LOC", "HUM", "NUM"][*c]),
                    None => p,
                }
            })
            .collect();
        let w = Workload::new("prop", prompts).unwrap();
        let plan = make_grouping(m, &w, l, seed).unwrap();
        plan.validate(&w).unwrap();
        let cap = if m == CliqueMethod::Separate { 1 } else { l };
        prop_assert!(plan.groups.iter().all(|g| !g.member_ids.is_empty() && g.member_ids.len() <= cap));
        prop_assert_eq!(&plan, &make_grouping(m, &w, l, seed).unwrap());
    }

    #[test]
    fn batch_round_trip(answers in prop::collection::vec(phrase(10), 1..17)) {
        let prompts: Vec<Prompt> = answers.iter().enumerate().map(|(i, a)| Prompt::new(format!("q{i}"), a.clone())).collect();
        let batch = build_batch(&prompts).unwrap();
        prop_assert_eq!(batch.member_ids.len(), prompts.len());
        let parsed = parse_itemized(&render_itemized(&answers), answers.len()).unwrap();
        prop_assert!(parsed.complete);
        for (k, a) in answers.iter().enumerate() {
            prop_assert_eq!(parsed.get(k + 1), Some(a.as_str()));
        }
    }

    #[test]
    fn metrics_bounded(a in phrase(15), b in phrase(15)) {
        for s in [bleu_score(&a, &b), rouge_l_score(&a, &b)] {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        prop_assert!((bleu_score(&a, &a) - 1.0).abs() < 1e-9);
        prop_assert!((rouge_l_score(&a, &a) - 1.0).abs() < 1e-9);
        prop_assert!((rouge_l_score(&a, &b) - rouge_l_score(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn cost_monotone(in_a in 1u64..10_000, out_a in 1u64..10_000, in_b in 1u64..10_000, out_b in 1u64..10_000,
                     w in 0.01f64..4.0, t_a in 0.1f64..100.0, dt in 0.1f64..10.0) {
        let c = relative_cost(in_a, in_b, out_a, out_b, w).unwrap();
        prop_assert!(relative_cost(in_a, in_b, out_a + 1, out_b, w).unwrap() > c);
        prop_assert!(relative_cost(in_a + 1, in_b, out_a, out_b, w).unwrap() > c);
        prop_assert!(weighted_efficiency(t_a + dt, 10.0, c).unwrap() < weighted_efficiency(t_a, 10.0, c).unwrap());
    }

    #[test]
    fn owa_properties(x in 0.0f64..=1.0, y in 0.0f64..=1.0, d in 0.0f64..0.5, w in 0.0f64..=1.0) {
        let ws = OwaWeights::new(w).unwrap();
        let s = owa_score(x, y, ws);
        prop_assert!(x.min(y) - 1e-12 <= s && s <= x.max(y) + 1e-12);
        prop_assert!(owa_score(x + d, y, ws) >= s - 1e-12);
        prop_assert!((owa_score(x, x, ws) - x).abs() < 1e-12);
    }

    #[test]
    fn normalization_in_unit_interval(raw in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 1..8)) {
        let pts: Vec<ObjectivePoint> = raw
            .iter()
            .zip(CliqueMethod::ALL)
            .map(|(&(e, f), m)| ObjectivePoint::new(m, e, f))
            .collect();
        for p in normalize_objectives(&pts) {
            for v in [p.efficiency_norm.unwrap(), p.faithfulness_norm.unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
