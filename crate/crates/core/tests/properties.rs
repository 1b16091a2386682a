//! Invariants checked over generated inputs.

use std::collections::HashSet;

use pals_core::evaluation::{stratified_split, Metrics};
use pals_core::offline::{run_offline, OfflineConfig, SelectionStrategy};
use pals_core::oracle::ReplayOracle;
use pals_core::pipeline::{
    chi2_select, extract_features, low_pass_filter, segment, LabelMap, SensorRecord, SignalSegment, WindowSpec,
};
use pals_core::proximity::{propagate_labels, Kernel, PropagationConfig, ProximityGraph, ProximityModel};
use pals_core::selection::{entropy, select_top, smote_balance, InformativenessScore, QueryBudget};
use pals_core::streaming::{
    best_lambda, lambda_at, run_stream, static_lambda, Decision, LambdaPolicy, StreamConfig, StreamItem,
    ThresholdState,
};
use pals_core::{Instance, InstanceId, Label, LabelDistribution};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CASES: u32 = 500;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(CASES)
}

fn label_of(b: bool) -> Label {
    Label::from_bool(b)
}

fn records(values: &[Vec<f64>]) -> Vec<SensorRecord> {
    values.iter().enumerate().map(|(i, v)| SensorRecord::new(i as f64 * 10.0, v.clone())).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Two 2-D clusters; `labels[i]` picks the cluster and the label.
fn clustered(points: &[(f64, f64)], labels: &[bool]) -> Vec<Instance> {
    points
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&(x, y), &eat))| {
            let c = if eat { 3.0 } else { -3.0 };
            Instance::labeled(i as u64, vec![c + x, y], label_of(eat))
        })
        .collect()
}

fn pool_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<Instance>> {
    (min..=max).prop_flat_map(|n| {
        (prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n), prop::collection::vec(any::<bool>(), n))
            .prop_map(|(p, l)| clustered(&p, &l))
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn segment_count_follows_stride_formula(n in 0usize..600, secs in 1u32..8, rate in 2u32..40) {
        let spec = WindowSpec::new(secs as f64, rate as f64);
        let stream = records(&vec![vec![0.0]; n]);
        let segs = segment(&stream, &spec, &LabelMap::default()).unwrap();
        let w = secs as usize * rate as usize;
        let s = w / 2;
        let expected = if n < w { 0 } else { (n - w) / s + 1 };
        prop_assert_eq!(segs.len(), expected);
        for (i, seg) in segs.iter().enumerate() {
            prop_assert_eq!(seg.samples.len(), w);
            prop_assert_eq!(seg.start_ms(), (i * s) as f64 * 10.0);
        }
    }

    #[test]
    fn features_have_fixed_length_and_are_finite(
        channels in 1usize..6,
        len in 2usize..60,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..channels).map(|_| rand::Rng::random_range(&mut rng, -50.0..50.0)).collect())
            .collect();
        let stream = records(&rows);
        let seg = SignalSegment { samples: &stream, label: None };
        let names: Vec<String> = (0..channels).map(|c| format!("c{c}")).collect();
        let a = extract_features(&seg, &names).unwrap();
        let b = extract_features(&seg, &names).unwrap();
        prop_assert_eq!(a.len(), 15 * channels);
        prop_assert!(a.values.iter().all(|v| v.is_finite()));
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn chi2_mask_ignores_row_order(
        rows in prop::collection::vec((prop::collection::vec(0u8..20, 6), any::<bool>()), 4..40),
        keep in 1usize..6,
        seed in any::<u64>(),
    ) {
        let feats: Vec<Vec<f64>> = rows.iter().map(|(r, _)| r.iter().map(|&v| v as f64).collect()).collect();
        let labels: Vec<Label> = rows.iter().map(|&(_, l)| label_of(l)).collect();
        let a = chi2_select(&feats, &labels, keep).unwrap();
        let mut order: Vec<usize> = (0..feats.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pf: Vec<Vec<f64>> = order.iter().map(|&i| feats[i].clone()).collect();
        let pl: Vec<Label> = order.iter().map(|&i| labels[i]).collect();
        let b = chi2_select(&pf, &pl, keep).unwrap();
        prop_assert_eq!(a.kept_indices, b.kept_indices);
    }

    #[test]
    fn low_pass_filter_is_linear(
        xs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..200),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let x: Vec<Vec<f64>> = xs.iter().map(|&(u, _)| vec![u]).collect();
        let y: Vec<Vec<f64>> = xs.iter().map(|&(_, v)| vec![v]).collect();
        let z: Vec<Vec<f64>> = xs.iter().map(|&(u, v)| vec![a * u + b * v]).collect();
        let fx = low_pass_filter(&records(&x), 5.0, 50.0).unwrap();
        let fy = low_pass_filter(&records(&y), 5.0, 50.0).unwrap();
        let fz = low_pass_filter(&records(&z), 5.0, 50.0).unwrap();
        for i in 0..xs.len() {
            let want = a * fx[i].channels[0] + b * fy[i].channels[0];
            prop_assert!((fz[i].channels[0] - want).abs() <= 1e-9, "{} vs {}", fz[i].channels[0], want);
        }
    }

    #[test]
    fn knn_graph_is_symmetric_union_of_neighbourhoods(pool in pool_strategy(2, 40), k in 1usize..10) {
        let n = pool.len();
        let k = k.min(n - 1);
        let graph = ProximityGraph::build(&pool, Kernel::Knn { k }).unwrap();
        let mut nbrs: Vec<HashSet<usize>> = Vec::new();
        for i in 0..n {
            let mut o: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            o.sort_by(|&a, &b| dist(&pool[i].features, &pool[a].features)
                .total_cmp(&dist(&pool[i].features, &pool[b].features))
                .then(a.cmp(&b)));
            nbrs.push(o.into_iter().take(k).collect());
        }
        for i in 0..n {
            for j in 0..n {
                let w = graph.edge_weight(InstanceId(i as u64), InstanceId(j as u64));
                prop_assert_eq!(w, graph.edge_weight(InstanceId(j as u64), InstanceId(i as u64)));
                let expected = i != j && (nbrs[i].contains(&j) || nbrs[j].contains(&i));
                prop_assert_eq!(w > 0.0, expected, "edge ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn propagation_yields_valid_distributions_and_keeps_clamps(
        pool in pool_strategy(3, 40),
        mask in prop::collection::vec(any::<bool>(), 40),
        extra in (-2.0f64..2.0, -2.0f64..2.0, any::<bool>()),
    ) {
        let mut nodes: Vec<Instance> = pool.clone();
        for (i, inst) in nodes.iter_mut().enumerate() {
            if i > 0 && !mask[i] {
                inst.label = None;
            }
        }
        let k = 5.min(nodes.len() - 1);
        let mut graph = ProximityGraph::build(&nodes, Kernel::Knn { k }).unwrap();
        let cfg = PropagationConfig::default();
        propagate_labels(&mut graph, &cfg).unwrap();
        for node in graph.nodes() {
            prop_assert!(node.distribution.is_valid());
            if let Some(l) = node.clamped {
                prop_assert!(node.distribution.is_one_hot(l));
            }
        }
        let x = Instance::new(1000, vec![extra.0, extra.1]);
        graph.add_labeled_node(&x, label_of(extra.2)).unwrap();
        propagate_labels(&mut graph, &cfg.warm(1000)).unwrap();
        for node in graph.nodes() {
            prop_assert!(node.distribution.is_valid());
            if let Some(l) = node.clamped {
                prop_assert!(node.distribution.is_one_hot(l));
            }
        }
    }

    #[test]
    fn rbf_weight_decreases_with_distance(sigma in 0.1f64..5.0, f1 in 0.0f64..4.0, gap in 0.01f64..1.0) {
        let d1 = f1 * sigma;
        let d2 = d1 + gap * sigma;
        let pts = vec![
            Instance::new(0, vec![0.0]),
            Instance::new(1, vec![d1]),
            Instance::new(2, vec![-d2]),
        ];
        let g = ProximityGraph::build(&pts, Kernel::Rbf { sigma }).unwrap();
        let w1 = g.edge_weight(InstanceId(0), InstanceId(1));
        let w2 = g.edge_weight(InstanceId(0), InstanceId(2));
        prop_assert!(w1 > w2, "{} at {} vs {} at {}", w1, d1, w2, d2);
    }

    #[test]
    fn entropy_peaks_at_uniform_and_is_symmetric(p in 0.0f64..=1.0) {
        let h = entropy(&LabelDistribution::new(vec![p, 1.0 - p]).unwrap()).unwrap();
        let mirrored = entropy(&LabelDistribution::new(vec![1.0 - p, p]).unwrap()).unwrap();
        let top = entropy(&LabelDistribution::uniform()).unwrap();
        prop_assert!((top - 1.0).abs() < 1e-12);
        prop_assert!(h <= top + 1e-12);
        prop_assert!((h - mirrored).abs() < 1e-12);
        if (p - 0.5).abs() > 1e-6 {
            prop_assert!(h < top);
        }
    }

    #[test]
    fn selected_scores_dominate_the_rest(scores in prop::collection::vec(0.0f64..1.0, 0..60), delta in 0usize..70) {
        let items: Vec<InformativenessScore> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| InformativenessScore { id: InstanceId(i as u64), score: s })
            .collect();
        let chosen = select_top(&items, delta);
        prop_assert_eq!(chosen.len(), delta.min(items.len()));
        let set: HashSet<InstanceId> = chosen.iter().copied().collect();
        prop_assert_eq!(set.len(), chosen.len());
        let min_in = chosen.iter().map(|id| scores[id.0 as usize]).fold(f64::INFINITY, f64::min);
        for it in &items {
            if !set.contains(&it.id) {
                prop_assert!(it.score <= min_in);
            }
        }
    }

    #[test]
    fn budget_is_never_overspent(total in 0usize..20, ops in prop::collection::vec(0u8..4, 0..200)) {
        let mut b = QueryBudget::new(total);
        let mut granted = 0usize;
        for op in ops {
            match op {
                0 | 1 => {
                    if b.try_spend() {
                        granted += 1;
                    }
                }
                2 => {
                    if granted > 0 {
                        b.refund();
                        granted -= 1;
                    }
                }
                _ => {
                    b.reset();
                    granted = 0;
                }
            }
            prop_assert!(b.spent() <= b.total());
            prop_assert_eq!(b.spent(), granted);
            prop_assert_eq!(b.remaining(), total - granted);
        }
    }

    #[test]
    fn smote_balances_with_convex_combinations(pool in pool_strategy(2, 40), k in 1usize..7, seed in any::<u64>()) {
        let mut next = 0u64;
        let out = smote_balance(&pool, k, seed, &mut next).unwrap();
        let count = |l| out.instances.iter().filter(|i| i.label == Some(l)).count();
        let Some(minority) = out.minority else {
            prop_assert_eq!(out.synthetic, 0);
            return Ok(());
        };
        let real: Vec<&Instance> = pool.iter().filter(|i| i.label == Some(minority)).collect();
        if real.len() < 2 {
            prop_assert_eq!(out.synthetic, 0);
            return Ok(());
        }
        prop_assert_eq!(count(Label::Eating), count(Label::NonEating));
        prop_assert_eq!(&out.instances[..pool.len()], &pool[..]);
        for s in &out.instances[pool.len()..] {
            prop_assert!(s.id.is_synthetic());
            prop_assert_eq!(s.label, Some(minority));
            let on_segment = real.iter().any(|a| {
                real.iter().any(|b| {
                    a.id != b.id && (dist(&a.features, &s.features) + dist(&s.features, &b.features)
                        - dist(&a.features, &b.features)).abs() < 1e-9
                })
            });
            prop_assert!(on_segment, "synthetic point {:?} is not between two minority points", s.features);
        }
    }

    #[test]
    fn stratified_split_partitions_and_keeps_classes(
        labels in prop::collection::vec(any::<bool>(), 1..200),
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let labels: Vec<Label> = labels.into_iter().map(label_of).collect();
        let (train, test) = stratified_split(&labels, frac, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for class in Label::ALL {
            let n = labels.iter().filter(|&&l| l == class).count();
            let tr = train.iter().filter(|&&i| labels[i] == class).count();
            if n >= 2 {
                prop_assert!(tr >= 1 && tr < n);
            }
            prop_assert!((tr as f64 - frac * n as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn f_score_bounded_symmetric_and_order_free(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..100),
        seed in any::<u64>(),
    ) {
        let truth: Vec<Label> = pairs.iter().map(|p| label_of(p.0)).collect();
        let pred: Vec<Label> = pairs.iter().map(|p| label_of(p.1)).collect();
        let m = Metrics::from_labels(&truth, &pred).unwrap();
        prop_assert!(m.f_score <= 2.0 * m.precision.min(m.recall) + 1e-12);
        prop_assert!(m.f_score >= 0.0 && m.f_score <= 1.0);
        prop_assert!((pals_core::evaluation::f_score(m.recall, m.precision) - m.f_score).abs() < 1e-15);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let st: Vec<Label> = order.iter().map(|&i| truth[i]).collect();
        let sp: Vec<Label> = order.iter().map(|&i| pred[i]).collect();
        prop_assert_eq!(Metrics::from_labels(&st, &sp).unwrap(), m);
    }

    #[test]
    fn adaptive_lambda_is_non_increasing_in_index(values in prop::collection::vec(0.0f64..1.0, 0..50)) {
        let mut desc = values.clone();
        desc.sort_by(|a, b| b.total_cmp(a));
        for i in 0..desc.len() + 3 {
            prop_assert!(lambda_at(&desc, i) >= lambda_at(&desc, i + 1));
        }
    }

    #[test]
    fn static_and_best_lambda_pick_ranked_entropies(
        values in prop::collection::vec(0.0f64..1.0, 1..80),
        ratio in 0.01f64..=1.0,
        delta in 1usize..100,
    ) {
        let mut desc = values.clone();
        desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let rank = ((ratio * values.len() as f64).ceil() as usize).max(1);
        prop_assert_eq!(static_lambda(&values, ratio).unwrap(), desc[rank - 1]);
        let best = best_lambda(&values, delta);
        prop_assert_eq!(best, desc[delta.min(desc.len()) - 1]);
        let above = values.iter().filter(|&&v| v >= best).count();
        prop_assert!(above >= delta.min(values.len()));
    }

    #[test]
    fn threshold_offers_respect_the_budget(
        entropies in prop::collection::vec(0.0f64..1.0, 1..300),
        budget in 0usize..30,
    ) {
        let n = entropies.len();
        let mut state = ThresholdState::adaptive(n as f64, budget);
        let mut b = QueryBudget::new(budget);
        let mut taken = 0;
        for (t, &e) in entropies.iter().enumerate() {
            let lambda = state.lambda();
            let yes = state.offer(e, t as f64, &mut b);
            if yes {
                prop_assert!(e >= lambda);
                taken += 1;
            }
        }
        prop_assert!(taken <= budget);
    }
}

fn answer_all(pool: &[Instance]) -> ReplayOracle {
    ReplayOracle::new(pool.iter().map(|i| (i.id, i.label.unwrap())))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn offline_loop_spends_exactly_the_budget(
        pool in pool_strategy(12, 30),
        initial in 0usize..4,
        iterations in 1usize..4,
        per in 1usize..4,
        uniform in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let (seeded, rest) = pool.split_at(initial);
        let unlabeled: Vec<Instance> = rest.iter().map(|i| Instance::new(i.id.0, i.features.clone())).collect();
        let budget = iterations * per;
        prop_assume!(budget <= unlabeled.len());
        let mut cfg = OfflineConfig::new(budget, iterations, seed);
        cfg.kernel = Kernel::Knn { k: 3 };
        cfg.smote_k = 3;
        if uniform {
            cfg.selection = SelectionStrategy::Uniform;
        }
        let mut oracle = answer_all(rest);
        let run = run_offline(seeded, &unlabeled, &mut oracle, &cfg).unwrap();

        prop_assert_eq!(run.log.len(), budget);
        let ids: HashSet<InstanceId> = run.log.iter().map(|e| e.instance_id).collect();
        prop_assert_eq!(ids.len(), budget);
        for (j, stats) in run.iterations.iter().enumerate() {
            prop_assert!(stats.labeled >= initial + (j + 1) * per);
        }
        if !uniform {
            for stats in run.iterations.iter().filter(|s| !s.bootstrap) {
                let batch: Vec<f64> =
                    run.log.iter().filter(|e| e.iteration == stats.iteration).map(|e| e.entropy).collect();
                prop_assert!(batch.windows(2).all(|w| w[0] >= w[1]), "batch {:?}", batch);
            }
        }
        for node in run.model.graph.nodes() {
            prop_assert!(node.distribution.is_valid());
        }
    }

    #[test]
    fn stream_emits_one_event_per_arrival_within_budget(
        seed_pool in pool_strategy(6, 16),
        arrivals in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, any::<bool>(), 1u32..50), 1..60),
        budget in 0usize..6,
        policy in 0usize..3,
    ) {
        let kernel = Kernel::Knn { k: 3 };
        let mut model = ProximityModel::fit(&seed_pool, kernel, PropagationConfig::default()).unwrap();
        let mut t = 0.0;
        let items: Vec<StreamItem> = arrivals
            .iter()
            .enumerate()
            .map(|(i, &(x, y, eat, gap))| {
                t += gap as f64;
                let c = if eat { 3.0 } else { -3.0 };
                StreamItem::new(t, Instance::labeled(100 + i as u64, vec![c + x, y], label_of(eat)))
            })
            .collect();
        let policy = LambdaPolicy::ALL[policy];
        let mut cfg = StreamConfig::new(policy, budget);
        cfg.interval_ms = 200.0;
        cfg.static_lambda = Some(0.5);
        let mut oracle = ReplayOracle::new(items.iter().map(|it| (it.instance.id, it.instance.label.unwrap())));
        let run = run_stream(&mut model, &items, &mut oracle, &cfg).unwrap();

        prop_assert_eq!(run.events.len(), items.len());
        for (ev, it) in run.events.iter().zip(&items) {
            prop_assert_eq!(ev.id, it.instance.id);
            if ev.decision == Decision::Queried {
                prop_assert!(ev.entropy >= ev.lambda);
            }
        }
        let mut total = 0;
        for iv in &run.intervals {
            prop_assert!(iv.queries <= budget);
            if policy == LambdaPolicy::Best {
                prop_assert_eq!(iv.queries, budget.min(iv.events));
            }
            total += iv.events;
        }
        prop_assert_eq!(total, items.len());
    }
}

/// Every check in this file, for running the suite as one unit.
#[allow(dead_code)]
pub fn all() -> Vec<(&'static str, fn())> {
    vec![
        ("segment_count_follows_stride_formula", segment_count_follows_stride_formula),
        ("features_have_fixed_length_and_are_finite", features_have_fixed_length_and_are_finite),
        ("chi2_mask_ignores_row_order", chi2_mask_ignores_row_order),
        ("low_pass_filter_is_linear", low_pass_filter_is_linear),
        ("knn_graph_is_symmetric_union_of_neighbourhoods", knn_graph_is_symmetric_union_of_neighbourhoods),
        ("propagation_yields_valid_distributions_and_keeps_clamps", propagation_yields_valid_distributions_and_keeps_clamps),
        ("rbf_weight_decreases_with_distance", rbf_weight_decreases_with_distance),
        ("entropy_peaks_at_uniform_and_is_symmetric", entropy_peaks_at_uniform_and_is_symmetric),
        ("selected_scores_dominate_the_rest", selected_scores_dominate_the_rest),
        ("budget_is_never_overspent", budget_is_never_overspent),
        ("smote_balances_with_convex_combinations", smote_balances_with_convex_combinations),
        ("stratified_split_partitions_and_keeps_classes", stratified_split_partitions_and_keeps_classes),
        ("f_score_bounded_symmetric_and_order_free", f_score_bounded_symmetric_and_order_free),
        ("adaptive_lambda_is_non_increasing_in_index", adaptive_lambda_is_non_increasing_in_index),
        ("static_and_best_lambda_pick_ranked_entropies", static_and_best_lambda_pick_ranked_entropies),
        ("threshold_offers_respect_the_budget", threshold_offers_respect_the_budget),
        ("offline_loop_spends_exactly_the_budget", offline_loop_spends_exactly_the_budget),
        ("stream_emits_one_event_per_arrival_within_budget", stream_emits_one_event_per_arrival_within_budget),
    ]
}
