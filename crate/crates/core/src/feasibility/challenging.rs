use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::negatives::Positives;
use super::{FeasibilityError, ForwardModel, Negative, NegativeMethod};
use crate::molgraph::{canonical_key, fingerprint, tanimoto_fp, Fingerprint, MolGraph};
use crate::templates::forward_apply;

/// Reactions sharing one product in a challenging set.
pub const GROUP_SIZE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChallengeGroup {
    pub product: String,
    pub reactions: Vec<Negative>,
}

/// Hard negatives: `m / 10` novel products, each paired with ten distinct
/// reactant sets. The first is the set that produced it under a forward
/// template, the rest are the most similar unused corpus reactant sets.
pub fn challenging_set(
    corpus: &[crate::molgraph::ReactionRecord],
    forward: &ForwardModel,
    m: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ChallengeGroup>, FeasibilityError> {
    let pos = Positives::new(corpus);
    if pos.reactions.len() < m {
        return Err(FeasibilityError::Insufficient(format!(
            "corpus has {} reactions, fewer than m = {m}",
            pos.reactions.len()
        )));
    }
    let wanted = m / GROUP_SIZE;
    let corpus_products: HashSet<&str> = pos.reactions.iter().map(|(_, p)| p.as_str()).collect();
    let pool: Vec<(&String, &Vec<MolGraph>, Fingerprint)> = pos
        .reactant_graphs
        .iter()
        .map(|(k, g)| (k, g, fingerprint(&MolGraph::union(g))))
        .collect();

    // Seed negatives from forward-template application. Most reactant sets
    // have no outcome beyond their recorded product, so the whole pool is
    // scanned in random order until enough distinct products turn up.
    let templates: Vec<_> = forward.templates().collect();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    let mut seeds: Vec<(usize, String)> = Vec::new();
    for &i in &order {
        if seeds.len() >= m {
            break;
        }
        let mut ts: Vec<usize> = (0..templates.len()).collect();
        ts.shuffle(rng);
        'templates: for t in ts {
            for p in forward_apply(templates[t], pool[i].1) {
                let key = canonical_key(&p);
                if !corpus_products.contains(key.as_str()) {
                    seeds.push((i, key));
                    break 'templates;
                }
            }
        }
    }

    // Pairwise-distinct products and reactant sets.
    let mut chosen: Vec<(usize, String)> = Vec::new();
    let mut products = HashSet::new();
    for (i, p) in seeds {
        if chosen.len() == wanted {
            break;
        }
        if products.insert(p.clone()) {
            chosen.push((i, p));
        }
    }
    if chosen.len() < wanted {
        return Err(FeasibilityError::Insufficient(format!(
            "found {} seed products, need {wanted}",
            chosen.len()
        )));
    }

    let mut used: HashSet<usize> = chosen.iter().map(|(i, _)| *i).collect();
    let mut groups = Vec::with_capacity(wanted);
    for (seed, product) in chosen {
        let mut ranked: Vec<(f64, usize)> = (0..pool.len())
            .filter(|j| !used.contains(j))
            .map(|j| (tanimoto_fp(&pool[seed].2, &pool[j].2), j))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| pool[a.1].0.cmp(pool[b.1].0)));
        let mut members = vec![seed];
        for (_, j) in ranked {
            if members.len() == GROUP_SIZE {
                break;
            }
            if !pos.contains(pool[j].0, &product) {
                members.push(j);
            }
        }
        if members.len() < GROUP_SIZE {
            return Err(FeasibilityError::Insufficient(
                "ran out of distinct reactant sets".into(),
            ));
        }
        used.extend(members.iter().copied());
        groups.push(ChallengeGroup {
            reactions: members
                .iter()
                .map(|&j| Negative {
                    reactants: pool[j].0.clone(),
                    product: product.clone(),
                    method: NegativeMethod::ForwardTemplate,
                })
                .collect(),
            product,
        });
    }
    Ok(groups)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    /// Fraction of negatives the forward model rejects.
    pub rejection: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * ((p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt()) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn acceptance_accuracy(forward: &ForwardModel, negatives: &[Negative]) -> Result<AcceptanceReport, FeasibilityError> {
    if negatives.is_empty() {
        return Err(FeasibilityError::Insufficient("empty negative set".into()));
    }
    let rejected = negatives
        .iter()
        .filter(|n| !forward.backtranslates(&n.reactants, &n.product))
        .count();
    let (ci_low, ci_high) = wilson_interval(rejected, negatives.len());
    Ok(AcceptanceReport {
        rejection: rejected as f64 / negatives.len() as f64,
        ci_low,
        ci_high,
        n: negatives.len(),
    })
}
