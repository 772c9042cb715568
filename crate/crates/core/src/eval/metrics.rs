use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::RankedPredictions;
use crate::molgraph::{canonical_key, parse_smiles, scaffold};

/// Cutoffs reported everywhere.
pub const K_GRID: [usize; 6] = [1, 3, 5, 10, 20, 50];

/// Ground truth: product key to the reactant-set keys recorded for it.
pub type GroundTruth = HashMap<String, HashSet<String>>;

fn first_hit(p: &RankedPredictions, truth: &GroundTruth) -> Option<usize> {
    let gold = truth.get(&p.product)?;
    p.predictions.iter().position(|x| gold.contains(&x.reactants)).map(|i| i + 1)
}

/// Rank of the first ground-truth hit per dataset product, in sorted product
/// order. Products absent from `preds` count as misses.
fn hit_ranks(preds: &[RankedPredictions], truth: &GroundTruth) -> Vec<Option<usize>> {
    let by_product: HashMap<&str, &RankedPredictions> = preds.iter().map(|p| (p.product.as_str(), p)).collect();
    let products: BTreeSet<&String> = truth.keys().collect();
    products
        .into_iter()
        .map(|k| by_product.get(k.as_str()).and_then(|p| first_hit(p, truth)))
        .collect()
}

/// Dataset products with no prediction list.
pub fn missing_products(preds: &[RankedPredictions], truth: &GroundTruth) -> usize {
    let have: HashSet<&str> = preds.iter().map(|p| p.product.as_str()).collect();
    truth.keys().filter(|k| !have.contains(k.as_str())).count()
}

pub fn topk_accuracy(preds: &[RankedPredictions], truth: &GroundTruth, ks: &[usize]) -> Vec<f64> {
    let ranks = hit_ranks(preds, truth);
    if ranks.is_empty() {
        return vec![0.0; ks.len()];
    }
    ks.iter()
        .map(|&k| ranks.iter().filter(|r| matches!(r, Some(r) if *r <= k)).count() as f64 / ranks.len() as f64)
        .collect()
}

pub fn mrr(preds: &[RankedPredictions], truth: &GroundTruth) -> f64 {
    let ranks = hit_ranks(preds, truth);
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum::<f64>() / ranks.len() as f64
}

/// Mean over products of (1/k) * (number of top-k slots passing `ok`).
/// Short lists are penalized by their missing slots.
fn slot_rate(preds: &[RankedPredictions], ks: &[usize], ok: impl Fn(&str, &str) -> bool) -> Vec<f64> {
    if preds.is_empty() {
        return vec![0.0; ks.len()];
    }
    let flags: Vec<Vec<bool>> = preds
        .iter()
        .map(|p| p.predictions.iter().map(|x| ok(&p.product, &x.reactants)).collect())
        .collect();
    ks.iter()
        .map(|&k| {
            flags
                .iter()
                .map(|f| f.iter().take(k).filter(|&&b| b).count() as f64 / k as f64)
                .sum::<f64>()
                / flags.len() as f64
        })
        .collect()
}

/// `backtranslates(product, reactants)` decides one slot.
pub fn round_trip(preds: &[RankedPredictions], backtranslates: impl Fn(&str, &str) -> bool, ks: &[usize]) -> Vec<f64> {
    slot_rate(preds, ks, backtranslates)
}

/// `score(product, reactants)` is the feasibility classifier output.
pub fn ftc(preds: &[RankedPredictions], score: impl Fn(&str, &str) -> f64, threshold: f64, ks: &[usize]) -> Vec<f64> {
    slot_rate(preds, ks, |p, r| score(p, r) >= threshold)
}

/// Non-empty scaffold keys of a reactant-set key.
pub fn reactant_scaffolds(reactants: &str) -> Vec<String> {
    reactants
        .split('.')
        .filter_map(|s| parse_smiles(s).ok())
        .map(|g| scaffold(&g))
        .filter(|s| s.atom_count() > 0)
        .map(|s| canonical_key(&s))
        .collect()
}

/// Mean number of distinct scaffolds among back-translated top-k slots.
pub fn scaffold_diversity(
    preds: &[RankedPredictions],
    backtranslates: impl Fn(&str, &str) -> bool,
    ks: &[usize],
) -> Vec<f64> {
    if preds.is_empty() {
        return vec![0.0; ks.len()];
    }
    let per_product: Vec<Vec<Option<Vec<String>>>> = preds
        .iter()
        .map(|p| {
            p.predictions
                .iter()
                .map(|x| backtranslates(&p.product, &x.reactants).then(|| reactant_scaffolds(&x.reactants)))
                .collect()
        })
        .collect();
    ks.iter()
        .map(|&k| {
            per_product
                .iter()
                .map(|slots| {
                    let distinct: HashSet<&String> = slots.iter().take(k).flatten().flatten().collect();
                    distinct.len() as f64
                })
                .sum::<f64>()
                / per_product.len() as f64
        })
        .collect()
}

/// Drops slots that do not back-translate; survivors keep their order.
pub fn filter_ablation(
    preds: &[RankedPredictions],
    backtranslates: impl Fn(&str, &str) -> bool,
) -> Vec<RankedPredictions> {
    preds
        .iter()
        .map(|p| RankedPredictions {
            product: p.product.clone(),
            predictions: p
                .predictions
                .iter()
                .filter(|x| backtranslates(&p.product, &x.reactants))
                .cloned()
                .collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ks: Vec<usize>,
    pub top_k: Vec<f64>,
    pub mrr: f64,
    pub round_trip: Vec<f64>,
    pub ftc: Option<Vec<f64>>,
    pub scaffold_diversity: Vec<f64>,
    pub products: usize,
    pub missing_products: usize,
    pub empty_predictions: usize,
}

impl MetricsReport {
    pub fn build(
        preds: &[RankedPredictions],
        truth: &GroundTruth,
        backtranslates: impl Fn(&str, &str) -> bool,
        ftc_scores: Option<(&dyn Fn(&str, &str) -> f64, f64)>,
    ) -> MetricsReport {
        let ks = K_GRID.to_vec();
        MetricsReport {
            top_k: topk_accuracy(preds, truth, &ks),
            mrr: mrr(preds, truth),
            round_trip: round_trip(preds, &backtranslates, &ks),
            ftc: ftc_scores.map(|(f, t)| ftc(preds, f, t, &ks)),
            scaffold_diversity: scaffold_diversity(preds, &backtranslates, &ks),
            products: truth.len(),
            missing_products: missing_products(preds, truth),
            empty_predictions: preds.iter().filter(|p| p.predictions.is_empty()).count(),
            ks,
        }
    }

    /// Every rate lies in [0, 1] and scaffold counts are non-negative.
    pub fn in_range(&self) -> bool {
        let unit = |v: &[f64]| v.iter().all(|x| (0.0..=1.0).contains(x));
        unit(&self.top_k)
            && (0.0..=1.0).contains(&self.mrr)
            && unit(&self.round_trip)
            && self.ftc.as_deref().map_or(true, unit)
            && self.scaffold_diversity.iter().all(|&x| x >= 0.0)
    }
}
