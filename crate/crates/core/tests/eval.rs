use std::collections::HashSet;
use std::sync::Arc;

use retrogfn::corpus::{generate_corpus, parse_corpus};
use retrogfn::env::EnvConfig;
use retrogfn::eval::{
    filter_ablation, reactant_scaffolds, scaffold_diversity, topk_accuracy, EvalError, InferConfig, MetricsReport,
    Prediction, RankedPredictions, K_GRID, MAX_PREDICTIONS,
};
use retrogfn::eval::infer;
use retrogfn::molgraph::ReactionRecord;
use retrogfn::pipeline::{distinct_products, extract_library, ground_truth, infer_products, GfnModel};
use retrogfn::policy::EncoderConfig;
use retrogfn::templates::PatternLibrary;

fn corpus() -> (Vec<ReactionRecord>, Vec<ReactionRecord>) {
    let c = generate_corpus(0).unwrap();
    (
        parse_corpus(&c.train.join("\n")).unwrap(),
        parse_corpus(&c.test.join("\n")).unwrap(),
    )
}

fn model(train: &[ReactionRecord]) -> GfnModel {
    let library: Arc<PatternLibrary> = Arc::new(extract_library(train, 1).0);
    let encoder = EncoderConfig {
        hidden_dim: 8,
        gnn1_layers: 1,
        gnn2_layers: 1,
        attention_heads: 2,
        rw_pe_steps: 4,
    };
    GfnModel::new(library, encoder, Vec::new(), EnvConfig::default(), 3).unwrap()
}

fn small() -> InferConfig {
    InferConfig { n: 60, k: 2, alpha: 0.7 }
}

fn list(product: &str, keys: &[&str]) -> RankedPredictions {
    RankedPredictions {
        product: product.into(),
        predictions: keys
            .iter()
            .enumerate()
            .map(|(i, k)| Prediction {
                reactants: k.to_string(),
                p_estimate: 1.0 / (i + 2) as f64,
            })
            .collect(),
    }
}

#[test]
fn inferred_lists_are_bounded_distinct_and_subnormalized() {
    let (train, test) = corpus();
    let m = model(&train);
    let products = distinct_products(&test);
    let preds = infer_products(&m, &products[..8], &small(), 0, 1).unwrap();
    assert_eq!(preds.len(), 8);
    for p in &preds {
        assert!(p.predictions.len() <= MAX_PREDICTIONS);
        let keys: HashSet<&str> = p.predictions.iter().map(|x| x.reactants.as_str()).collect();
        assert_eq!(keys.len(), p.predictions.len());
        let total: f64 = p.predictions.iter().map(|x| x.p_estimate).sum();
        assert!(total <= 1.0 + 1e-9, "{total}");
        assert!(p.predictions.windows(2).all(|w| w[0].p_estimate >= w[1].p_estimate));
        assert!(p.predictions.iter().all(|x| x.p_estimate > 0.0));
    }
}

#[test]
fn inference_is_deterministic_and_independent_of_workers() {
    let (train, test) = corpus();
    let m = model(&train);
    let products = distinct_products(&test);
    let a = infer_products(&m, &products[..6], &small(), 5, 1).unwrap();
    let b = infer_products(&m, &products[..6], &small(), 5, 1).unwrap();
    let c = infer_products(&m, &products[..6], &small(), 5, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn invalid_request_sizes_are_config_errors() {
    let (train, test) = corpus();
    let m = model(&train);
    let info = m.env.product(test[0].product.without_map_numbers());
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    for cfg in [
        InferConfig { n: 0, ..small() },
        InferConfig { n: 101, ..small() },
        InferConfig { k: 0, ..small() },
    ] {
        let r = infer(&m.env, &m.policy, &m.store, info.clone(), &cfg, &mut rng);
        assert!(matches!(r, Err(EvalError::Config(_))));
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let (train, test) = corpus();
    let m = model(&train);
    let library = Arc::new(extract_library(&train, 1).0);
    let back = GfnModel::from_json(&m.to_json(), library, EnvConfig::default()).unwrap();
    let products = distinct_products(&test);
    assert_eq!(
        infer_products(&m, &products[..3], &small(), 1, 1).unwrap(),
        infer_products(&back, &products[..3], &small(), 1, 1).unwrap()
    );
    let other = Arc::new(extract_library(&train[..40], 1).0);
    assert!(GfnModel::from_json(&m.to_json(), other, EnvConfig::default()).is_err());
}

#[test]
fn ranked_lists_merge_sort_and_truncate() {
    let r = RankedPredictions::from_masses(
        "P".into(),
        [("b".into(), 0.2), ("a".into(), 0.2), ("c".into(), 0.1), ("c".into(), 0.15)],
        2,
    );
    let keys: Vec<&str> = r.predictions.iter().map(|p| p.reactants.as_str()).collect();
    assert_eq!(keys, ["c", "a"]);
    assert!((r.predictions[0].p_estimate - 0.25).abs() < 1e-12);
    assert_eq!(r.rank_of("a"), Some(2));
    assert_eq!(r.rank_of("b"), None);
}

#[test]
fn scaffolds_skip_acyclic_reactants() {
    assert_eq!(reactant_scaffolds("OC(=O)Cc1ccccc1.CCO"), vec!["c1ccccc1".to_string()]);
    assert!(reactant_scaffolds("CCO.CN").is_empty());
}

#[test]
fn scaffold_diversity_counts_distinct_backtranslated_scaffolds() {
    let preds = vec![list(
        "P",
        &["OCc1ccccc1.CCN", "Nc1ccccc1", "OC1CCCCC1", "CCO"],
    )];
    let all = |_: &str, _: &str| true;
    assert_eq!(scaffold_diversity(&preds, all, &[1, 2, 3, 4]), vec![1.0, 1.0, 2.0, 2.0]);
    let none_of_ring = |_: &str, r: &str| !r.contains("C1CCCCC1");
    assert_eq!(scaffold_diversity(&preds, none_of_ring, &[4]), vec![1.0]);
    assert_eq!(scaffold_diversity(&[], all, &[1, 5]), vec![0.0, 0.0]);
}

#[test]
fn filter_ablation_keeps_survivor_order() {
    let preds = vec![list("P", &["a", "b", "c", "d"]), list("Q", &["e"])];
    assert_eq!(filter_ablation(&preds, |_, _| true), preds);
    let none = filter_ablation(&preds, |_, _| false);
    assert!(none.iter().all(|p| p.predictions.is_empty()));
    let odd = filter_ablation(&preds, |_, r| r == "b" || r == "d");
    let keys: Vec<&str> = odd[0].predictions.iter().map(|p| p.reactants.as_str()).collect();
    assert_eq!(keys, ["b", "d"]);
    assert_eq!(odd[0].predictions[0].p_estimate, preds[0].predictions[1].p_estimate);
}

#[test]
fn report_counts_missing_products_and_stays_in_range() {
    let (_, test) = corpus();
    let truth = ground_truth(&test);
    let mut products: Vec<&String> = truth.keys().collect();
    products.sort();
    let first = products[0];
    let gold = truth[first].iter().next().unwrap().clone();
    let preds = vec![list(first, &["X", &gold])];
    let r = MetricsReport::build(&preds, &truth, |_, _| true, None);
    assert_eq!(r.ks, K_GRID.to_vec());
    assert_eq!(r.products, truth.len());
    assert_eq!(r.missing_products, truth.len() - 1);
    assert!(r.in_range());
    let top = topk_accuracy(&preds, &truth, &[1, 2]);
    assert_eq!(top, vec![0.0, 1.0 / truth.len() as f64]);
    assert!((r.mrr - 0.5 / truth.len() as f64).abs() < 1e-12);
}
