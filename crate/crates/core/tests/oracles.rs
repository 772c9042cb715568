use std::sync::Arc;

use retrogfn::corpus::{generate_corpus, parse_corpus};
use retrogfn::feasibility::ForwardModel;
use retrogfn::molgraph::ReactionRecord;
use retrogfn::pipeline::extract_library;
use retrogfn::selfcheck::*;

fn corpus() -> (Vec<ReactionRecord>, Vec<ReactionRecord>) {
    let c = generate_corpus(0).unwrap();
    (parse_corpus(&c.train.join("\n")).unwrap(), parse_corpus(&c.test.join("\n")).unwrap())
}

fn assert_pass(c: Check) {
    println!("{}", c.line());
    assert!(c.passed, "{}", c.line());
}

#[test]
fn matcher_agrees_with_brute_force() {
    assert_pass(check_matcher(200, 11));
}

#[test]
fn trajectory_balance_oracle() {
    assert_pass(check_tb_oracle());
}

#[test]
fn metric_fixtures_exact() {
    assert_pass(check_metric_fixtures());
}

#[test]
fn smiles_round_trip() {
    assert_pass(check_parser_round_trip());
}

#[test]
fn extract_apply_round_trip() {
    let (train, test) = corpus();
    let all: Vec<_> = train.into_iter().chain(test).collect();
    assert_pass(check_round_trip(&all));
}

#[test]
fn score_heads_and_classifier_gradients() {
    let (train, _) = corpus();
    assert_pass(check_gradients(&train, 10, 3));
}

#[test]
fn estimator_matches_exact_mass() {
    let (train, _) = corpus();
    assert_pass(check_estimator(&train, 20_000, 5));
}

#[test]
fn challenging_set_structure() {
    let (train, test) = corpus();
    let all: Vec<_> = train.into_iter().chain(test).collect();
    let (lib, _) = extract_library(&all, 1);
    let forward = ForwardModel::new(&Arc::new(lib));
    assert_pass(check_challenging(&all, &forward, 50, 2));
}
