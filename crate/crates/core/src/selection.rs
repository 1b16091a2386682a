//! Informativeness scoring, query selection and minority oversampling.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage_err, Result};
use crate::label::{Instance, InstanceId, Label, LabelDistribution, NUM_CLASSES};
use crate::proximity::squared_distance;

/// Shannon entropy in bits, with `0 · log 0 = 0`.
pub fn entropy(p: &LabelDistribution) -> Result<f64> {
    p.validate()?;
    Ok(entropy_unchecked(p.probabilities()))
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.log2()).sum();
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformativenessScore {
    pub id: InstanceId,
    pub score: f64,
}

/// The `delta` highest scores, ties broken by lower id. Output is ordered
/// from most to least informative.
pub fn select_top(scores: &[InformativenessScore], delta: usize) -> Vec<InstanceId> {
    let mut ranked: Vec<&InformativenessScore> = scores.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    ranked.into_iter().take(delta).map(|s| s.id).collect()
}

/// `delta` ids drawn without replacement, reproducible per seed.
pub fn uniform_select(ids: &[InstanceId], delta: usize, seed: u64) -> Result<Vec<InstanceId>> {
    if delta > ids.len() {
        return Err(usage_err(format!("cannot draw {delta} of {} ids without replacement", ids.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, ids.len(), delta).into_iter().map(|i| ids[i]).collect())
}

/// Derives an independent seed for sub-stream `stream` of a run seed
/// (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Query allowance Δ and how much of it is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBudget {
    total: usize,
    spent: usize,
}

impl QueryBudget {
    pub fn new(total: usize) -> Self {
        QueryBudget { total, spent: 0 }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn spent(&self) -> usize {
        self.spent
    }

    pub fn remaining(&self) -> usize {
        self.total - self.spent
    }

    pub fn is_exhausted(&self) -> bool {
        self.spent >= self.total
    }

    /// Takes one query from the budget if any is left.
    pub fn try_spend(&mut self) -> bool {
        if self.is_exhausted() {
            return false;
        }
        self.spent += 1;
        true
    }

    /// Returns a query that the oracle did not answer.
    pub fn refund(&mut self) {
        self.spent = self.spent.saturating_sub(1);
    }

    /// Starts a new allowance period with the same total.
    pub fn reset(&mut self) {
        self.spent = 0;
    }
}

pub const DEFAULT_SMOTE_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutcome {
    /// The inputs followed by the synthetic minority instances.
    pub instances: Vec<Instance>,
    pub synthetic: usize,
    pub minority: Option<Label>,
    /// Why balancing was skipped, if it was.
    pub warning: Option<String>,
}

/// Oversamples the minority class until both classes have equal counts.
///
/// Every synthetic point is `x + g (x_nn - x)` for a real (non-synthetic)
/// minority instance `x`, one of its `k` nearest real minority neighbours
/// `x_nn`, and `g` uniform in `[0, 1]`. Bases cycle through the minority
/// instances in id order. Synthetic ids are allocated from `next_synthetic`.
pub fn smote_balance(
    labeled: &[Instance],
    k_neighbors: usize,
    seed: u64,
    next_synthetic: &mut u64,
) -> Result<SmoteOutcome> {
    if k_neighbors == 0 {
        return Err(usage_err("SMOTE needs k_neighbors >= 1"));
    }
    let mut counts = [0usize; NUM_CLASSES];
    for inst in labeled {
        let label = inst
            .label
            .ok_or_else(|| usage_err(format!("instance {} has no label", inst.id)))?;
        counts[label.index()] += 1;
    }
    let unchanged = |warning: Option<String>, minority| SmoteOutcome {
        instances: labeled.to_vec(),
        synthetic: 0,
        minority,
        warning,
    };
    let eating = counts[Label::Eating.index()];
    let non_eating = counts[Label::NonEating.index()];
    if eating == non_eating {
        return Ok(unchanged(None, None));
    }
    let (minority, needed) = if eating < non_eating {
        (Label::Eating, non_eating - eating)
    } else {
        (Label::NonEating, eating - non_eating)
    };

    let mut sources: Vec<&Instance> =
        labeled.iter().filter(|i| i.label == Some(minority) && !i.id.is_synthetic()).collect();
    sources.sort_by_key(|i| i.id);
    if sources.len() < 2 {
        let msg = format!("only {} real {minority} instance(s); cannot interpolate", sources.len());
        log::warn!("{msg}");
        return Ok(unchanged(Some(msg), Some(minority)));
    }
    let k = k_neighbors.min(sources.len() - 1);
    let neighbors: Vec<Vec<usize>> = (0..sources.len())
        .map(|a| {
            let mut others: Vec<(f64, InstanceId, usize)> = (0..sources.len())
                .filter(|&b| b != a)
                .map(|b| (squared_distance(&sources[a].features, &sources[b].features), sources[b].id, b))
                .collect();
            others.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            others.into_iter().take(k).map(|(_, _, b)| b).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = labeled.to_vec();
    for s in 0..needed {
        let a = s % sources.len();
        let nn = neighbors[a][rng.random_range(0..neighbors[a].len())];
        let gap: f64 = rng.random();
        let features = sources[a]
            .features
            .iter()
            .zip(&sources[nn].features)
            .map(|(x, y)| x + gap * (y - x))
            .collect();
        instances.push(Instance { id: InstanceId::synthetic(*next_synthetic), features, label: Some(minority) });
        *next_synthetic += 1;
    }
    Ok(SmoteOutcome { instances, synthetic: needed, minority: Some(minority), warning: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> LabelDistribution {
        LabelDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_reference_values() {
        assert_eq!(entropy(&dist(&[0.5, 0.5])).unwrap(), 1.0);
        assert_eq!(entropy(&dist(&[1.0, 0.0])).unwrap(), 0.0);
        // -0.9 log2 0.9 - 0.1 log2 0.1, evaluated in extended precision
        assert!((entropy(&dist(&[0.9, 0.1])).unwrap() - 0.468_995_593_589_281_2).abs() < 1e-12);
        assert!(entropy(&LabelDistribution::from_raw(vec![0.9, 0.9])).unwrap_err().is_usage());
    }

    #[test]
    fn select_top_keeps_tied_leaders() {
        let s = [
            InformativenessScore { id: InstanceId(1), score: 0.9 },
            InformativenessScore { id: InstanceId(2), score: 0.7 },
            InformativenessScore { id: InstanceId(3), score: 0.9 },
        ];
        assert_eq!(select_top(&s, 2), vec![InstanceId(1), InstanceId(3)]);
        assert!(select_top(&s, 0).is_empty());
        assert_eq!(select_top(&s, 10).len(), 3);
        let flat: Vec<_> = (0..4).rev().map(|i| InformativenessScore { id: InstanceId(i), score: 0.3 }).collect();
        assert_eq!(select_top(&flat, 1), vec![InstanceId(0)]);
    }

    #[test]
    fn uniform_select_is_seeded() {
        let ids: Vec<InstanceId> = (0..20).map(InstanceId).collect();
        let a = uniform_select(&ids, 5, 7).unwrap();
        assert_eq!(a, uniform_select(&ids, 5, 7).unwrap());
        let mut all = uniform_select(&ids, 20, 3).unwrap();
        all.sort();
        assert_eq!(all, ids);
        assert!(uniform_select(&ids, 21, 0).unwrap_err().is_usage());
    }

    #[test]
    fn uniform_select_frequencies() {
        let ids = [InstanceId(0), InstanceId(1), InstanceId(2)];
        let mut hits = [0usize; 3];
        for seed in 0..10_000 {
            hits[uniform_select(&ids, 1, seed).unwrap()[0].0 as usize] += 1;
        }
        for h in hits {
            assert!((h as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02, "{hits:?}");
        }
    }

    #[test]
    fn budget_accounting() {
        let mut b = QueryBudget::new(2);
        assert!(b.try_spend());
        assert!(b.try_spend());
        assert!(!b.try_spend());
        assert_eq!(b.spent(), 2);
        b.refund();
        assert_eq!(b.remaining(), 1);
        b.reset();
        assert_eq!(b.remaining(), 2);
    }

    #[test]
    fn smote_on_a_diagonal() {
        let mut data = vec![
            Instance::labeled(0, vec![0.0, 0.0], Label::Eating),
            Instance::labeled(1, vec![1.0, 1.0], Label::Eating),
        ];
        data.extend((2..8).map(|i| Instance::labeled(i, vec![5.0, i as f64], Label::NonEating)));
        let mut next = 0;
        let out = smote_balance(&data, 5, 1, &mut next).unwrap();
        assert_eq!(out.synthetic, 4);
        assert_eq!(next, 4);
        for s in out.instances.iter().filter(|i| i.id.is_synthetic()) {
            assert_eq!(s.features[0], s.features[1]);
            assert!((0.0..=1.0).contains(&s.features[0]));
            assert_eq!(s.label, Some(Label::Eating));
        }
    }

    #[test]
    fn smote_leaves_balanced_or_tiny_minority_alone() {
        let balanced = vec![
            Instance::labeled(0, vec![0.0], Label::Eating),
            Instance::labeled(1, vec![1.0], Label::NonEating),
        ];
        let mut next = 0;
        let out = smote_balance(&balanced, 5, 0, &mut next).unwrap();
        assert_eq!(out.instances, balanced);
        assert!(out.warning.is_none());

        let lone = vec![
            Instance::labeled(0, vec![0.0], Label::Eating),
            Instance::labeled(1, vec![1.0], Label::NonEating),
            Instance::labeled(2, vec![2.0], Label::NonEating),
        ];
        let out = smote_balance(&lone, 5, 0, &mut next).unwrap();
        assert_eq!(out.instances, lone);
        assert!(out.warning.is_some());
        assert_eq!(next, 0);
    }
}
