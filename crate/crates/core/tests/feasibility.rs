use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retrogfn::corpus::{generate_corpus, parse_corpus};
use retrogfn::feasibility::{
    acceptance_accuracy, auc, generate_negatives, read_negatives, train_rfm, wilson_interval, write_negatives,
    ForwardModel, Negative, NegativeMethod, Rfm, RfmConfig, RfmInput,
};
use retrogfn::molgraph::{canonical_key, parse_smiles, ReactionRecord};
use retrogfn::pipeline::extract_library;

fn train() -> Vec<ReactionRecord> {
    parse_corpus(&generate_corpus(0).unwrap().train.join("\n")).unwrap()
}

fn forward(corpus: &[ReactionRecord]) -> ForwardModel {
    ForwardModel::new(&extract_library(corpus, 1).0)
}

#[test]
fn negatives_hit_the_ratio_and_avoid_positives() {
    let corpus = train();
    let fwd = forward(&corpus);
    let set = generate_negatives(&corpus, &fwd, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let positives: HashSet<String> = corpus.iter().map(|r| r.key()).collect();
    assert!(set.reached_target());
    assert_eq!(set.target, 5 * positives.len());
    let keys: HashSet<String> = set.negatives.iter().map(Negative::key).collect();
    assert_eq!(keys.len(), set.negatives.len());
    assert!(keys.is_disjoint(&positives));
    let methods: HashSet<NegativeMethod> = set.negatives.iter().map(|n| n.method).collect();
    assert!(methods.contains(&NegativeMethod::ProductSwap));
    let again = generate_negatives(&corpus, &fwd, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(set, again);
}

#[test]
fn negative_lines_round_trip() {
    let negs = vec![
        Negative {
            reactants: "CC(=O)Cl.NC".into(),
            product: "CCO".into(),
            method: NegativeMethod::ProductSwap,
        },
        Negative {
            reactants: "OB(O)c1ccccc1".into(),
            product: "c1ccccc1".into(),
            method: NegativeMethod::ForwardTemplate,
        },
    ];
    let text = write_negatives(&negs);
    assert_eq!(read_negatives(&text).unwrap(), negs);
    assert_eq!(Negative::from_line(&negs[0].to_line()).unwrap(), negs[0]);
    assert!(Negative::from_line("CC>>CO # made_up").is_err());
    assert!(Negative::from_line("no arrow here").is_err());
}

#[test]
fn forward_model_reproduces_corpus_products() {
    let corpus = train();
    let fwd = forward(&corpus);
    let hits = corpus
        .iter()
        .filter(|r| {
            fwd.predict(&r.reactants, 50)
                .iter()
                .any(|p| p.key == r.product_key())
        })
        .count();
    assert_eq!(hits, corpus.len());
    for r in corpus.iter().take(10) {
        let ranked = fwd.predict_key(&r.reactant_key(), 50);
        assert!(ranked
            .windows(2)
            .all(|w| (w[0].frequency, &w[1].key) >= (w[1].frequency, &w[0].key)));
        assert_eq!(fwd.top1(&r.reactant_key()), ranked.first().map(|p| p.key.clone()));
    }
    assert!(fwd.predict_key("C", 5).is_empty());
    assert!(fwd.predict(&[], 5).is_empty());
}

#[test]
fn forward_model_applies_an_amide_coupling() {
    let corpus = train();
    let fwd = forward(&corpus);
    let acid = corpus
        .iter()
        .find(|r| {
            let p = r.product_key();
            p.contains("N") && p.contains("=O") && r.reactant_key().contains("Cl")
        })
        .expect("an acyl chloride coupling in the corpus");
    let top = fwd.top1(&acid.reactant_key()).unwrap();
    assert!(parse_smiles(&top).is_ok());
    assert_eq!(canonical_key(&parse_smiles(&top).unwrap()), top);
}

#[test]
fn acceptance_accuracy_tracks_the_forward_model() {
    let corpus = train();
    let fwd = forward(&corpus);
    let swaps: Vec<Negative> = corpus
        .iter()
        .zip(corpus.iter().skip(1))
        .filter(|(a, b)| a.product_key() != b.product_key())
        .map(|(a, b)| Negative {
            reactants: a.reactant_key(),
            product: b.product_key(),
            method: NegativeMethod::ProductSwap,
        })
        .collect();
    let never = ForwardModel::new(&extract_library(&[], 1).0);
    let r = acceptance_accuracy(&never, &swaps).unwrap();
    assert_eq!(r.rejection, 1.0);
    assert_eq!(r.n, swaps.len());
    let own: Vec<Negative> = corpus
        .iter()
        .map(|r| Negative {
            reactants: r.reactant_key(),
            product: fwd.top1(&r.reactant_key()).unwrap(),
            method: NegativeMethod::ForwardTemplate,
        })
        .collect();
    let r = acceptance_accuracy(&fwd, &own).unwrap();
    assert_eq!(r.rejection, 0.0);
    assert!(r.ci_low <= r.rejection && r.rejection <= r.ci_high);
    assert!(acceptance_accuracy(&fwd, &[]).is_err());
}

#[test]
fn wilson_interval_shrinks_with_sample_size() {
    let (a, b) = wilson_interval(47, 50);
    assert!((a - 0.8378).abs() < 1e-3 && (b - 0.9794).abs() < 1e-3);
    let (c, d) = wilson_interval(470, 500);
    assert!(d - c < b - a);
    assert!(c <= 0.94 && 0.94 <= d);
    assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    let (lo, hi) = wilson_interval(0, 10);
    assert_eq!(lo, 0.0);
    assert!(hi > 0.0 && hi < 0.35);
}

#[test]
fn auc_counts_ties_as_half() {
    assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]), Some(1.0));
    assert_eq!(auc(&[0.1], &[0.9]), Some(0.0));
    assert_eq!(auc(&[0.5], &[0.5]), Some(0.5));
    assert_eq!(auc(&[], &[0.5]), None);
}

#[test]
fn invalid_classifier_configs_are_rejected() {
    for cfg in [
        RfmConfig { hidden_dim: 30, heads: 4, ..RfmConfig::default() },
        RfmConfig { epochs: 0, ..RfmConfig::default() },
        RfmConfig { holdout: 1.0, ..RfmConfig::default() },
        RfmConfig { rw_steps: 1000, ..RfmConfig::default() },
        RfmConfig { lr: 0.0, ..RfmConfig::default() },
    ] {
        assert!(Rfm::new(cfg).is_err());
    }
    assert!(serde_json::from_str::<RfmConfig>(r#"{"hidden": 4}"#).is_err());
}

#[test]
fn classifier_separates_held_out_reactions() {
    let corpus = train();
    let fwd = forward(&corpus);
    let negs = generate_negatives(&corpus, &fwd, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let cfg = RfmConfig::default();
    let pos: Vec<RfmInput> = corpus
        .iter()
        .map(|r| RfmInput::new(&r.reactants, &r.product, cfg.rw_steps))
        .collect();
    let neg: Vec<RfmInput> = negs
        .negatives
        .iter()
        .map(|n| RfmInput::from_keys(&n.reactants, &n.product, cfg.rw_steps).unwrap())
        .collect();
    let (rfm, report) = train_rfm(pos.clone(), neg, cfg).unwrap();
    let auc = report.holdout_auc.unwrap();
    assert!(auc > 0.8, "held-out AUC {auc}");
    assert_eq!(report.epoch_losses.len(), rfm.config.epochs);
    assert!(report.epoch_losses.last() < report.epoch_losses.first());
    for x in pos.iter().take(20) {
        let s = rfm.score(x).unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
    let back = Rfm::from_json(&rfm.to_json()).unwrap();
    assert_eq!(back.score(&pos[0]).unwrap(), rfm.score(&pos[0]).unwrap());
}
