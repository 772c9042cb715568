use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retrogfn::corpus::{generate_corpus, parse_corpus};
use retrogfn::env::{sample_backward, Action, EnvConfig, FlowEnv, RetroEnv, Stage, State};
use retrogfn::molgraph::{parse_smiles, ReactionRecord};
use retrogfn::pipeline::{count_terminals, extract_library};

fn train() -> Vec<ReactionRecord> {
    parse_corpus(&generate_corpus(0).unwrap().train.join("\n")).unwrap()
}

fn env_for(corpus: &[ReactionRecord]) -> RetroEnv {
    RetroEnv::new(Arc::new(extract_library(corpus, 1).0), EnvConfig::default())
}

fn s0(env: &RetroEnv, r: &ReactionRecord) -> State {
    env.initial_state(env.product(r.product.without_map_numbers()))
}

#[test]
fn backward_then_forward_replay_reaches_recorded_reactants() {
    let corpus = train();
    let env = env_for(&corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut replayed = 0;
    for r in &corpus {
        let terminal = env.reaction_terminal(r, 1).expect("every training template is in the library");
        let traj = sample_backward(&env, &terminal, &mut rng).unwrap();
        let mut s = s0(&env, r);
        assert_eq!(&s, traj.initial());
        for a in &traj.actions {
            assert!(env.actions(&s).contains(a), "replayed action must be legal");
            s = env.step(&s, a).unwrap();
        }
        assert!(env.is_terminal(&s));
        assert_eq!(s, terminal);
        assert_eq!(s.reactant_key(), Some(r.reactant_key().as_str()));
        replayed += 1;
    }
    assert_eq!(replayed, corpus.len());
}

#[test]
fn trajectories_are_acyclic_and_bounded() {
    let corpus = train();
    let env = env_for(&corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for r in corpus.iter().step_by(7) {
        let t = env.reaction_terminal(r, 1).unwrap();
        let traj = sample_backward(&env, &t, &mut rng).unwrap();
        let distinct: HashSet<&State> = traj.states.iter().collect();
        assert_eq!(distinct.len(), traj.states.len());
        let mappable = t.pick().map_or(0, |m| env.library().pps[m.pattern_index].mappable.iter().filter(|&&x| x).count());
        assert!(traj.actions.len() <= 1 + env.config().max_reactants + mappable);
    }
}

#[test]
fn stepping_a_terminal_or_an_illegal_mapping_fails() {
    let corpus = train();
    let env = env_for(&corpus);
    let t = env.reaction_terminal(&corpus[0], 1).unwrap();
    assert!(env.step(&t, &Action::Advance).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let traj = sample_backward(&env, &t, &mut rng).unwrap();
    let phase3 = traj
        .states
        .iter()
        .find(|s| matches!(s.stage, Stage::Phase3 { .. }))
        .expect("every trajectory maps at least one atom");
    assert!(env.step(phase3, &Action::Map((0, 0, 10_000))).is_err());
    let legal = env.actions(phase3);
    if let Some(Action::Map((j, k, _))) = legal.first() {
        // Same product atom paired with a pattern atom that is never offered.
        let offered: HashSet<usize> = legal
            .iter()
            .filter_map(|a| match a {
                Action::Map((jj, kk, l)) if jj == j && kk == k => Some(*l),
                _ => None,
            })
            .collect();
        let pattern = env.library().rps[phase3.collected()[*k]].atom_count();
        if let Some(l) = (0..pattern).find(|l| !offered.contains(l)) {
            assert!(env.step(phase3, &Action::Map((*j, *k, l))).is_err());
        }
    }
}

#[test]
fn product_without_matches_has_no_actions() {
    let corpus = train();
    let env = env_for(&corpus);
    let s = env.initial_state(env.product(parse_smiles("FF").unwrap()));
    assert!(env.actions(&s).is_empty());
}

#[test]
fn first_reactant_state_has_single_parent() {
    let corpus = train();
    let env = env_for(&corpus);
    let start = s0(&env, &corpus[0]);
    let a = env.actions(&start)[0].clone();
    let next = env.step(&start, &a).unwrap();
    assert!(matches!(&next.stage, Stage::Phase2 { collected, .. } if collected.is_empty()));
    assert_eq!(env.parent_count(&next).unwrap(), 1);
}

#[test]
fn parent_count_matches_brute_force_predecessors() {
    let corpus = train();
    let mut checked = 0;
    for (i, r) in corpus.iter().enumerate() {
        if checked >= 5 {
            break;
        }
        let env = env_for(&corpus[i..(i + 3).min(corpus.len())]);
        let start = s0(&env, r);
        if count_terminals(&env, &start, 200).is_none() {
            continue;
        }
        let mut preds: HashMap<State, HashSet<State>> = HashMap::new();
        let mut seen = HashSet::new();
        let mut stack = vec![start.clone()];
        while let Some(s) = stack.pop() {
            if !seen.insert(s.clone()) {
                continue;
            }
            for a in env.actions(&s) {
                let c = env.step(&s, &a).unwrap();
                preds.entry(c.clone()).or_default().insert(s.clone());
                stack.push(c);
            }
        }
        for (s, p) in &preds {
            assert_eq!(env.parent_count(s).unwrap(), p.len(), "state {:?}", s.stage);
        }
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn backward_sampling_covers_orderings_uniformly() {
    let corpus = train();
    let env = env_for(&corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for r in &corpus {
        let t = env.reaction_terminal(r, 1).unwrap();
        let probe = sample_backward(&env, &t, &mut rng).unwrap();
        let orderings: f64 = probe.log_pb.iter().map(|l| (-l).exp()).product::<f64>().round();
        if !(2.0..=24.0).contains(&orderings) {
            continue;
        }
        let draws = 1000;
        let mut counts: HashMap<Vec<Action>, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(sample_backward(&env, &t, &mut rng).unwrap().actions).or_default() += 1;
        }
        assert_eq!(counts.len() as f64, orderings);
        let p = 1.0 / orderings;
        let (mean, sd) = (draws as f64 * p, (draws as f64 * p * (1.0 - p)).sqrt());
        for c in counts.values() {
            assert!((*c as f64 - mean).abs() <= 5.0 * sd, "count {c} vs mean {mean}");
        }
        return;
    }
    panic!("no reaction with 2..=24 orderings");
}
