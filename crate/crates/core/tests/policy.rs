use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retrogfn::autodiff::{ParamStore, Tape, Tensor};
use retrogfn::corpus::{generate_corpus, parse_corpus};
use retrogfn::env::toy::ToyEnv;
use retrogfn::env::{sample_backward, EnvConfig, FlowEnv, RetroEnv, Stage, State};
use retrogfn::molgraph::{parse_smiles, ReactionRecord};
use retrogfn::pipeline::extract_library;
use retrogfn::policy::{action_probs, EncoderConfig, RetroPolicy, TabularPolicy};
use retrogfn::templates::PatternLibrary;

struct Fixture {
    corpus: Vec<ReactionRecord>,
    env: RetroEnv,
    policy: RetroPolicy,
    store: ParamStore,
}

fn encoder() -> EncoderConfig {
    EncoderConfig {
        hidden_dim: 16,
        gnn1_layers: 2,
        gnn2_layers: 1,
        attention_heads: 4,
        rw_pe_steps: 4,
    }
}

fn fixture(seed: u64) -> Fixture {
    let corpus = parse_corpus(&generate_corpus(0).unwrap().train.join("\n")).unwrap();
    let library: Arc<PatternLibrary> = Arc::new(extract_library(&corpus, 1).0);
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = RetroPolicy::new(encoder(), library.clone(), Vec::new(), &mut store, &mut rng).unwrap();
    Fixture {
        corpus,
        env: RetroEnv::new(library, EnvConfig::default()),
        policy,
        store,
    }
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    t.as_slice().chunks(t.cols()).map(|r| r.to_vec()).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn product_encoder_is_permutation_equivariant() {
    let f = fixture(0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for r in f.corpus.iter().step_by(20) {
        let g = r.product.without_map_numbers();
        let mut order: Vec<usize> = (0..g.atom_count()).collect();
        order.shuffle(&mut rng);
        let h = g.permuted(&order);
        let mut tape = Tape::new(&f.store);
        let a = f.policy.encode_product(&mut tape, &g).unwrap();
        let b = f.policy.encode_product(&mut tape, &h).unwrap();
        let (ra, rb) = (rows(tape.value(a)), rows(tape.value(b)));
        for (i, &o) in order.iter().enumerate() {
            assert!(close(&rb[i], &ra[o], 1e-9), "row {i}");
            assert!(rb[i].iter().all(|x| x.is_finite()));
        }
    }
}

#[test]
fn isomorphic_inputs_give_row_permuted_embeddings() {
    let f = fixture(1);
    let mut tape = Tape::new(&f.store);
    let a = f.policy.encode_product(&mut tape, &parse_smiles("OCC(=O)N").unwrap()).unwrap();
    let b = f.policy.encode_product(&mut tape, &parse_smiles("NC(=O)CO").unwrap()).unwrap();
    let sort = |mut v: Vec<Vec<f64>>| {
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        v
    };
    let (ra, rb) = (sort(rows(tape.value(a))), sort(rows(tape.value(b))));
    for (x, y) in ra.iter().zip(&rb) {
        assert!(close(x, y, 1e-9));
    }
}

#[test]
fn single_atom_inputs_give_one_finite_row() {
    let f = fixture(2);
    let mut tape = Tape::new(&f.store);
    let a = f.policy.encode_product(&mut tape, &parse_smiles("C").unwrap()).unwrap();
    assert_eq!(tape.value(a).rows(), 1);
    assert_eq!(tape.value(a).cols(), 16);
    assert!(tape.value(a).as_slice().iter().all(|x| x.is_finite()));
}

#[test]
fn pattern_encoder_sees_the_mappable_flag() {
    let f = fixture(3);
    let p = f.env.library().rps[0].clone();
    let mut flipped = p.clone();
    flipped.mappable[0] = !flipped.mappable[0];
    let mut tape = Tape::new(&f.store);
    let a = f.policy.encode_pattern(&mut tape, &p).unwrap();
    let b = f.policy.encode_pattern(&mut tape, &flipped).unwrap();
    assert!(!close(tape.value(a).as_slice(), tape.value(b).as_slice(), 1e-12));
}

#[test]
fn match_score_ignores_atom_order_within_a_match() {
    let f = fixture(4);
    let g = f.corpus[0].product.without_map_numbers();
    let mut tape = Tape::new(&f.store);
    let h = f.policy.encode_product(&mut tape, &g).unwrap();
    let fwd: Vec<usize> = (0..g.atom_count().min(4)).collect();
    let rev: Vec<usize> = fwd.iter().rev().copied().collect();
    let other: Vec<usize> = vec![g.atom_count() - 1];
    let s = f.policy.score_phase1(&mut tape, h, &[&fwd, &rev, &other]).unwrap();
    let v = tape.value(s).as_slice().to_vec();
    assert_eq!(v[0], v[1]);
    assert_ne!(v[0], v[2]);
}

#[test]
fn zero_match_head_scores_zero() {
    let mut f = fixture(5);
    let ids: Vec<_> = f.store.ids().filter(|&id| f.store.name(id).starts_with("mlp1")).collect();
    for id in ids {
        f.store.value_mut(id).as_mut_slice().fill(0.0);
    }
    let g = f.corpus[0].product.without_map_numbers();
    let mut tape = Tape::new(&f.store);
    let h = f.policy.encode_product(&mut tape, &g).unwrap();
    let s = f.policy.score_phase1(&mut tape, h, &[&[0], &[1, 2]]).unwrap();
    assert!(tape.value(s).as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn reactant_scores_depend_on_the_collected_multiset_only() {
    let f = fixture(6);
    let n_rps = f.env.library().rps.len();
    assert!(n_rps >= 3);
    let g = f.corpus[0].product.without_map_numbers();
    let mut tape = Tape::new(&f.store);
    let h = f.policy.encode_product(&mut tape, &g).unwrap();
    let ab = f.policy.score_phase2(&mut tape, h, &[0, 1], 0, &[0, 2]).unwrap();
    let ba = f.policy.score_phase2(&mut tape, h, &[0, 1], 0, &[2, 0]).unwrap();
    let abc = f.policy.score_phase2(&mut tape, h, &[0, 1], 0, &[0, 1, 2]).unwrap();
    assert_eq!(tape.value(ab).as_slice(), tape.value(ba).as_slice());
    assert_eq!(tape.value(ab).cols(), n_rps + 1);
    assert_ne!(tape.value(ab).as_slice(), tape.value(abc).as_slice());
}

fn sampled_states(f: &Fixture, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for r in f.corpus.iter().step_by(15) {
        let t = f.env.reaction_terminal(r, 1).unwrap();
        let traj = sample_backward(&f.env, &t, &mut rng).unwrap();
        out.extend(traj.states.into_iter().filter(|s| !f.env.is_terminal(s)));
    }
    out
}

#[test]
fn mapping_scores_differ_across_candidate_atoms() {
    let f = fixture(7);
    let s = sampled_states(&f, 1)
        .into_iter()
        .find(|s| matches!(s.stage, Stage::Phase3 { .. }) && f.env.actions(s).len() >= 2)
        .expect("a mapping state with a choice");
    let probs = action_probs(&f.policy, &f.store, &s, &f.env.actions(&s), 1.0).unwrap();
    let first = probs[0];
    assert!(probs.iter().any(|&p| (p - first).abs() > 1e-12));
}

#[test]
fn distributions_are_normalized_and_nonnegative() {
    let f = fixture(8);
    for s in sampled_states(&f, 2) {
        let actions = f.env.actions(&s);
        let p = action_probs(&f.policy, &f.store, &s, &actions, 0.7).unwrap();
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let one = action_probs(&f.policy, &f.store, &s, &actions[..1], 0.7).unwrap();
        assert_eq!(one, vec![1.0]);
    }
}

#[test]
fn argmax_is_invariant_to_temperature() {
    let f = fixture(9);
    let argmax = |p: &[f64]| {
        p.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap()
    };
    for s in sampled_states(&f, 3) {
        let actions = f.env.actions(&s);
        if actions.len() < 2 {
            continue;
        }
        let base = action_probs(&f.policy, &f.store, &s, &actions, 1.0).unwrap();
        let best = argmax(&base);
        for alpha in [0.1, 0.7, 3.0] {
            let p = action_probs(&f.policy, &f.store, &s, &actions, alpha).unwrap();
            assert_eq!(argmax(&p), best);
        }
        let sharp = action_probs(&f.policy, &f.store, &s, &actions, 1e4).unwrap();
        let mut sorted = base.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if (sorted[0] / sorted[1]).ln() > 2e-3 {
            assert!(sharp[best] > 0.99);
        }
    }
}

#[test]
fn equal_scores_give_a_uniform_distribution() {
    let env = ToyEnv::new(4, 2);
    let mut store = ParamStore::new();
    let policy = TabularPolicy::new(&env.states(), 5, &mut store);
    let s0 = env.initial();
    let actions = env.actions(&s0);
    let p = action_probs::<ToyEnv, _>(&policy, &store, &s0, &actions, 0.7).unwrap();
    for x in &p {
        assert!((x - 1.0 / actions.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn construction_is_deterministic_under_a_seed() {
    let (a, b) = (fixture(11), fixture(11));
    assert_eq!(a.store.to_json(), b.store.to_json());
}
