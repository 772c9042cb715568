//! Oracle checks with known answers: brute-force matching, exact flow
//! balance, central differences, exact policy mass, metric fixtures and the
//! structural rules of the challenging set.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{gradient_check, AutodiffError, ParamStore, Tape, Tensor, Var};
use crate::econ::{scenario_table, two_sig};
use crate::env::toy::{ToyEnv, ToyState};
use crate::env::{sample_backward, EnvConfig, FlowEnv, RetroEnv, State};
use crate::eval::{
    estimate_terminal_probs, filter_ablation, ftc, mrr, round_trip, topk_accuracy, GroundTruth, Prediction,
    RankedPredictions, K_GRID,
};
use crate::feasibility::{challenging_set, FeasibilityError, ForwardModel, Rfm, RfmConfig};
use crate::molgraph::{parse_smiles, Atom, BondOrder, Element, MolGraph, ReactionRecord};
use crate::pipeline::{count_terminals, extract_library};
use crate::policy::{action_probs, EncoderConfig, FlowPolicy, PolicyError, RetroPolicy, TabularPolicy};
use crate::templates::{find_matches, PatternGraph};
use crate::train::{sample_forward, tb_loss, train, TrainConfig, TrainData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String, start: Instant) -> Check {
        Check {
            name: name.to_string(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display, start: Instant) -> Check {
        Check::new(name, false, format!("error: {err}"), start)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Six income cells against the reference table at two significant figures.
pub fn check_econ() -> Check {
    let start = Instant::now();
    let rows = scenario_table();
    let expected = [
        ("RT-optimal", 10.0, "1.1e3"),
        ("RT-optimal", 100.0, "1.6e4"),
        ("RT-optimal", 1000.0, "1.7e5"),
        ("ACC-optimal", 10.0, "1.3e3"),
        ("ACC-optimal", 100.0, "1.5e4"),
        ("ACC-optimal", 1000.0, "1.5e5"),
    ];
    let mut bad = Vec::new();
    for (model, ratio, want) in expected {
        let got = rows
            .iter()
            .find(|r| r.model == model && r.ratio == ratio)
            .map(|r| two_sig(r.income))
            .unwrap_or_default();
        if got != want {
            bad.push(format!("{model} P/C={ratio}: {got} != {want}"));
        }
    }
    let fast = start.elapsed().as_secs_f64() < 1.0;
    let detail = if bad.is_empty() {
        "six cells match".to_string()
    } else {
        bad.join("; ")
    };
    Check::new("econ table", bad.is_empty() && fast, detail, start)
}

fn toy_score(s: &ToyState) -> f64 {
    let h: usize = s.items.iter().enumerate().map(|(p, &i)| (i + 1) * (p + 2)).sum();
    (h % 7) as f64 / 6.0
}

/// Trains a tabular sampler on the enumerable multiset environment and
/// compares its terminal frequencies with R/Z.
pub fn check_toy_gflownet(iterations: usize, samples: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "toy GFlowNet L1";
    let beta = 3.0;
    let env = ToyEnv::new(3, 3);
    let terminals = env.terminals();
    let z: f64 = terminals.iter().map(|t| (beta * toy_score(t)).exp()).sum();
    let mut store = ParamStore::new();
    let policy = TabularPolicy::new(&env.states(), 4, &mut store);
    let cfg = TrainConfig {
        iterations,
        n_forward: 8,
        n_dataset: 0,
        n_replay: 0,
        epsilon: 0.05,
        lr: 0.01,
        log_flow_lr: 0.1,
        reward_beta: beta,
        seed,
        ..TrainConfig::default()
    };
    let data = TrainData {
        starts: vec![env.initial()],
        dataset: Vec::new(),
    };
    if let Err(e) = train(&env, &policy, &mut store, &cfg, &data, toy_score, |_, _| {}) {
        return Check::failed(name, e, start);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut counts: HashMap<ToyState, usize> = HashMap::new();
    for _ in 0..samples {
        match sample_forward(&env, &policy, &store, &env.initial(), 0.0, 1.0, 0, &mut rng) {
            Ok(s) => {
                if let Some(t) = s.trajectory {
                    *counts.entry(t.terminal().clone()).or_default() += 1;
                }
            }
            Err(e) => return Check::failed(name, e, start),
        }
    }
    let l1: f64 = terminals
        .iter()
        .map(|t| {
            let p = counts.get(t).copied().unwrap_or(0) as f64 / samples as f64;
            (p - (beta * toy_score(t)).exp() / z).abs()
        })
        .sum();
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        name,
        l1 < 0.05 && secs < 300.0,
        format!("{} terminals, L1 = {l1:.4}", terminals.len()),
        start,
    )
}

/// Edge flows of a small diamond-shaped DAG: s0 -> {a, b} -> {x, y}, with
/// every node's inflow equal to its outflow.
struct FlowDag {
    edges: Vec<(usize, usize, f64)>,
}

impl FlowDag {
    const TERMINALS: [usize; 2] = [3, 4];

    fn balanced() -> FlowDag {
        FlowDag {
            edges: vec![(0, 1, 4.0), (0, 2, 12.0), (1, 3, 1.0), (1, 4, 3.0), (2, 3, 6.0), (2, 4, 6.0)],
        }
    }

    fn out_flow(&self, s: usize) -> f64 {
        self.edges.iter().filter(|e| e.0 == s).map(|e| e.2).sum()
    }

    fn in_flow(&self, s: usize) -> f64 {
        self.edges.iter().filter(|e| e.1 == s).map(|e| e.2).sum()
    }

    fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![0usize]];
        while let Some(p) = stack.pop() {
            let last = *p.last().expect("non-empty");
            if Self::TERMINALS.contains(&last) {
                out.push(p);
                continue;
            }
            for (i, e) in self.edges.iter().enumerate() {
                if e.0 == last {
                    let mut q = p.clone();
                    q.push(i);
                    q.push(e.1);
                    stack.push(q);
                }
            }
        }
        out
    }
}

/// Summed TB loss over every complete trajectory. Rewards and the initial
/// flow are fixed from `reference`, policies come from `dag`.
fn dag_loss(dag: &FlowDag, reference: &FlowDag) -> Result<f64, AutodiffError> {
    let store = ParamStore::new();
    let mut total = 0.0;
    for path in dag.paths() {
        let mut tape = Tape::new(&store);
        let log_z = tape.leaf(Tensor::scalar(reference.out_flow(0).ln()));
        let mut log_pf = Vec::new();
        let mut log_pb = Vec::new();
        for w in path.chunks(2).filter(|c| c.len() == 2) {
            let (s, e) = (w[0], &dag.edges[w[1]]);
            log_pf.push(tape.leaf(Tensor::scalar((e.2 / dag.out_flow(s)).ln())));
            log_pb.push((e.2 / dag.in_flow(e.1)).ln());
        }
        let terminal = *path.last().expect("non-empty");
        let loss = tb_loss(&mut tape, log_z, &log_pf, reference.in_flow(terminal).ln(), &log_pb)?;
        total += tape.value(loss).item();
    }
    Ok(total)
}

pub fn check_tb_oracle() -> Check {
    let start = Instant::now();
    let name = "trajectory balance oracle";
    let reference = FlowDag::balanced();
    let balanced = match dag_loss(&reference, &reference) {
        Ok(v) => v,
        Err(e) => return Check::failed(name, e, start),
    };
    let mut min_perturbed = f64::INFINITY;
    for i in 0..reference.edges.len() {
        let mut dag = FlowDag::balanced();
        dag.edges[i].2 *= 1.5;
        match dag_loss(&dag, &reference) {
            Ok(v) => min_perturbed = min_perturbed.min(v),
            Err(e) => return Check::failed(name, e, start),
        }
    }
    Check::new(
        name,
        balanced <= 1e-18 && min_perturbed > 0.0,
        format!("balanced loss {balanced:.3e}, smallest perturbed loss {min_perturbed:.3e}"),
        start,
    )
}

fn random_graph(rng: &mut impl Rng, n: usize) -> MolGraph {
    let elements = [Element::C, Element::C, Element::N, Element::O];
    let mut g = MolGraph::new();
    for _ in 0..n {
        let mut a = Atom::new(elements[rng.gen_range(0..elements.len())]);
        a.aromatic = rng.gen_bool(0.2);
        a.charge = if rng.gen_bool(0.1) { 1 } else { 0 };
        g.add_atom(a);
    }
    let orders = [BondOrder::Single, BondOrder::Single, BondOrder::Double, BondOrder::Aromatic];
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let _ = g.add_bond(i, j, orders[rng.gen_range(0..orders.len())]);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j && g.bond_between(i, j).is_none() {
            let _ = g.add_bond(i, j, orders[rng.gen_range(0..orders.len())]);
        }
    }
    g
}

/// Every injective assignment checked directly.
pub fn brute_force_matches(p: &MolGraph, g: &MolGraph) -> Vec<Vec<usize>> {
    fn rec(p: &MolGraph, g: &MolGraph, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p.atom_count() {
            let ok = p.bonds().iter().all(|b| g.bond_between(cur[b.a], cur[b.b]) == Some(b.order));
            if ok {
                out.push(cur.clone());
            }
            return;
        }
        let pa = p.atom(cur.len());
        for v in 0..g.atom_count() {
            let ga = g.atom(v);
            if used[v] || ga.element != pa.element || ga.charge != pa.charge || ga.aromatic != pa.aromatic {
                continue;
            }
            used[v] = true;
            cur.push(v);
            rec(p, g, cur, used, out);
            cur.pop();
            used[v] = false;
        }
    }
    let mut out = Vec::new();
    rec(p, g, &mut Vec::new(), &mut vec![false; g.atom_count()], &mut out);
    out.sort();
    out
}

/// Matcher against brute force on random small pairs. Half the patterns are
/// connected pieces cut from their graph so that matches exist.
pub fn check_matcher(pairs: usize, seed: u64) -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut discrepancies = 0;
    let mut total_matches = 0;
    for k in 0..pairs {
        let n = rng.gen_range(1..=8);
        let g = random_graph(&mut rng, n);
        let p = if k % 2 == 0 {
            let size = rng.gen_range(1..=g.atom_count().min(5));
            let mut atoms = vec![rng.gen_range(0..g.atom_count())];
            while atoms.len() < size {
                let frontier: Vec<usize> = atoms
                    .iter()
                    .flat_map(|&a| g.neighbors(a).iter().map(|&(n, _)| n))
                    .filter(|n| !atoms.contains(n))
                    .collect();
                let Some(&next) = frontier.choose(&mut rng) else { break };
                atoms.push(next);
            }
            g.subgraph(&atoms)
        } else {
            let n = rng.gen_range(1..=4);
            random_graph(&mut rng, n)
        };
        let pattern = PatternGraph {
            mappable: vec![true; p.atom_count()],
            origin: vec![Default::default(); p.atom_count()],
            graph: p.clone(),
        };
        let fast = find_matches(&pattern, &g);
        let slow = brute_force_matches(&p, &g);
        total_matches += slow.len();
        if fast != slow {
            discrepancies += 1;
        }
    }
    Check::new(
        "matcher vs brute force",
        discrepancies == 0,
        format!("{pairs} pairs, {total_matches} embeddings, {discrepancies} discrepancies"),
        start,
    )
}

/// Extract then reapply at the original center on every reaction.
pub fn check_round_trip(corpus: &[ReactionRecord]) -> Check {
    let start = Instant::now();
    let (_, report) = extract_library(corpus, 1);
    let rate = report.round_trip_rate();
    let unexplained = report
        .failures
        .iter()
        .filter(|(_, m)| !m.starts_with("template collision"))
        .count();
    Check::new(
        "extract/apply round trip",
        rate >= 0.95 && unexplained == 0,
        format!(
            "{}/{} reproduced ({:.1}%), {} collisions, {unexplained} other failures",
            report.round_trip_ok,
            report.reactions,
            rate * 100.0,
            report.failures.len() - unexplained
        ),
        start,
    )
}

fn policy_err(e: PolicyError) -> AutodiffError {
    match e {
        PolicyError::Autodiff(a) => a,
        other => AutodiffError::Checkpoint(other.to_string()),
    }
}

fn rfm_err(e: FeasibilityError) -> AutodiffError {
    match e {
        FeasibilityError::Autodiff(a) => a,
        other => AutodiffError::Checkpoint(other.to_string()),
    }
}

/// Random projection of a row of scores down to a scalar.
fn project(tape: &mut Tape, scores: Var, weights: &Tensor) -> Result<Var, AutodiffError> {
    let w = tape.leaf(weights.clone());
    let m = tape.mul(scores, w)?;
    Ok(tape.sum(m))
}

/// Tiny architecture so that full central differences stay cheap.
pub fn gradcheck_encoder() -> EncoderConfig {
    EncoderConfig {
        hidden_dim: 4,
        gnn1_layers: 1,
        gnn2_layers: 1,
        attention_heads: 2,
        rw_pe_steps: 2,
    }
}

/// Worst relative errors of the three score heads and the classifier over
/// `draws` random parameter sets and states.
pub fn gradient_errors(corpus: &[ReactionRecord], draws: usize, seed: u64) -> Result<[f64; 4], AutodiffError> {
    let (library, _) = extract_library(corpus, 1);
    let library = Arc::new(library);
    let env = RetroEnv::new(library.clone(), EnvConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terminals: Vec<State> = corpus.iter().filter_map(|r| env.reaction_terminal(r, 1).ok()).collect();
    if terminals.is_empty() {
        return Err(AutodiffError::Checkpoint("no reachable reactions".into()));
    }
    let (h, floor) = (3e-4, 1e-6);
    let mut worst = [0.0f64; 4];
    for draw in 0..draws {
        let mut store = ParamStore::new();
        let policy = RetroPolicy::new(gradcheck_encoder(), library.clone(), Vec::new(), &mut store, &mut rng)
            .map_err(policy_err)?;
        let t = &terminals[rng.gen_range(0..terminals.len())];
        let traj = sample_backward(&env, t, &mut rng).map_err(|e| AutodiffError::Checkpoint(e.to_string()))?;
        // One non-terminal state per phase: match choice, reactant choice, mapping.
        let phase_of = |s: &State| match s.stage {
            crate::env::Stage::Phase1 => 0,
            crate::env::Stage::Phase2 { .. } => 1,
            crate::env::Stage::Phase3 { .. } => 2,
            crate::env::Stage::Terminal { .. } => 3,
        };
        for head in 0..3 {
            let candidates: Vec<&State> = traj.states.iter().filter(|s| phase_of(s) == head).collect();
            let Some(s) = candidates.choose(&mut rng) else { continue };
            let actions = env.actions(s);
            if actions.is_empty() {
                continue;
            }
            let weights = Tensor::new(
                1,
                actions.len(),
                (0..actions.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )?;
            let err = gradient_check(&mut store, h, floor, |tape| {
                let mut cache = Default::default();
                let lp = policy.log_probs(tape, &mut cache, s, &actions, 1.0).map_err(policy_err)?;
                project(tape, lp, &weights)
            })?;
            worst[head] = worst[head].max(err);
        }
        let rfm_cfg = RfmConfig {
            hidden_dim: 4,
            heads: 2,
            rw_steps: 2,
            seed: seed.wrapping_add(draw as u64),
            ..RfmConfig::default()
        };
        let rfm = Rfm::new(rfm_cfg).map_err(rfm_err)?;
        let r = &corpus[rng.gen_range(0..corpus.len())];
        let x = rfm.input(&r.reactants, &r.product);
        let mut probe = rfm.store.clone();
        let err = gradient_check(&mut probe, h, floor, |tape| {
            let z = rfm.logit(tape, &x).map_err(rfm_err)?;
            Ok(tape.sigmoid(z))
        })?;
        worst[3] = worst[3].max(err);
    }
    Ok(worst)
}

pub fn check_gradients(corpus: &[ReactionRecord], draws: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "gradient checks";
    match gradient_errors(corpus, draws, seed) {
        Ok(w) => Check::new(
            name,
            w.iter().all(|&e| e < 1e-4),
            format!(
                "{draws} draws; worst relative error: match head {:.2e}, reactant head {:.2e}, mapping head {:.2e}, classifier {:.2e}",
                w[0], w[1], w[2], w[3]
            ),
            start,
        ),
        Err(e) => Check::failed(name, e, start),
    }
}

/// Exact terminal mass under the policy by recursion over the DAG.
pub fn exact_terminal_mass<E: FlowEnv, P: FlowPolicy<E>>(
    env: &E,
    policy: &P,
    store: &ParamStore,
    s0: &E::State,
    alpha: f64,
) -> Result<HashMap<E::State, f64>, PolicyError> {
    fn go<E: FlowEnv, P: FlowPolicy<E>>(
        env: &E,
        policy: &P,
        store: &ParamStore,
        s: &E::State,
        alpha: f64,
        memo: &mut HashMap<E::State, HashMap<E::State, f64>>,
    ) -> Result<HashMap<E::State, f64>, PolicyError> {
        if let Some(d) = memo.get(s) {
            return Ok(d.clone());
        }
        let mut dist = HashMap::new();
        if env.is_terminal(s) {
            dist.insert(s.clone(), 1.0);
        } else {
            let actions = env.actions(s);
            if !actions.is_empty() {
                let probs = action_probs(policy, store, s, &actions, alpha)?;
                for (a, p) in actions.iter().zip(probs) {
                    let next = env.step(s, a).map_err(|e| PolicyError::BadAction(e.to_string()))?;
                    for (t, q) in go(env, policy, store, &next, alpha, memo)? {
                        *dist.entry(t).or_insert(0.0) += p * q;
                    }
                }
            }
        }
        memo.insert(s.clone(), dist.clone());
        Ok(dist)
    }
    go(env, policy, store, s0, alpha, &mut HashMap::new())
}

fn estimator_encoder() -> EncoderConfig {
    EncoderConfig {
        hidden_dim: 16,
        gnn1_layers: 2,
        gnn2_layers: 1,
        attention_heads: 2,
        rw_pe_steps: 4,
    }
}

/// Sampled estimate against exact mass on a product whose template space
/// has at most 50 terminals.
pub fn check_estimator(corpus: &[ReactionRecord], samples: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "inference estimator vs exact mass";
    // A library from a few neighbouring reactions keeps the space
    // enumerable. Products whose exact mass is mostly lost to dead ends make
    // for a weak comparison and are skipped.
    let alpha = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = None;
    for (i, r) in corpus.iter().enumerate() {
        let window = &corpus[i..(i + 3).min(corpus.len())];
        let (library, _) = extract_library(window, 1);
        let env = RetroEnv::new(Arc::new(library), EnvConfig::default());
        let s0 = env.initial_state(env.product(r.product.without_map_numbers()));
        let Some(n) = count_terminals(&env, &s0, 50) else { continue };
        if n < 3 {
            continue;
        }
        let mut store = ParamStore::new();
        let policy = match RetroPolicy::new(estimator_encoder(), env.library().clone(), Vec::new(), &mut store, &mut rng) {
            Ok(p) => p,
            Err(e) => return Check::failed(name, e, start),
        };
        let exact = match exact_terminal_mass(&env, &policy, &store, &s0, alpha) {
            Ok(m) => m,
            Err(e) => return Check::failed(name, e, start),
        };
        if exact.values().sum::<f64>() >= 0.25 {
            chosen = Some((env, s0, n, store, policy, exact));
            break;
        }
    }
    let Some((env, s0, n_terminals, store, policy, exact)) = chosen else {
        return Check::failed(name, "no product with 3..=50 terminals and substantial reachable mass", start);
    };
    let estimate: HashMap<State, f64> = match estimate_terminal_probs(&env, &policy, &store, &s0, samples, alpha, &mut rng) {
        Ok(v) => v.into_iter().collect(),
        Err(e) => return Check::failed(name, e, start),
    };
    let mut worst: f64 = 0.0;
    for (t, p) in &exact {
        worst = worst.max((p - estimate.get(t).copied().unwrap_or(0.0)).abs());
    }
    for (t, p) in &estimate {
        if !exact.contains_key(t) {
            worst = worst.max(*p);
        }
    }
    let total: f64 = estimate.values().sum();
    let exact_total: f64 = exact.values().sum();
    Check::new(
        name,
        worst <= 0.02 && total <= 1.0 + 1e-9 && samples >= 20_000,
        format!("{n_terminals} terminals, {samples} samples, max abs error {worst:.2e}, mass exact {exact_total:.4} estimated {total:.4}"),
        start,
    )
}

fn fixture(product: &str, reactants: &[&str]) -> RankedPredictions {
    RankedPredictions {
        product: product.to_string(),
        predictions: reactants
            .iter()
            .enumerate()
            .map(|(i, r)| Prediction {
                reactants: r.to_string(),
                p_estimate: 1.0 / (i + 2) as f64,
            })
            .collect(),
    }
}

/// Three products with ground truth at ranks 1, 4 and nowhere.
pub fn metric_fixture() -> (Vec<RankedPredictions>, GroundTruth) {
    let preds = vec![
        fixture("P1", &["g1", "a", "b", "c", "d"]),
        fixture("P2", &["a", "b", "c", "g2", "d"]),
        fixture("P3", &["a", "b", "c", "d", "e"]),
    ];
    let mut truth = GroundTruth::new();
    for (p, g) in [("P1", "g1"), ("P2", "g2"), ("P3", "g3")] {
        truth.entry(p.to_string()).or_default().insert(g.to_string());
    }
    (preds, truth)
}

pub fn check_metric_fixtures() -> Check {
    let start = Instant::now();
    let (preds, truth) = metric_fixture();
    let mut bad = Vec::new();
    let mut expect = |what: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-15 {
            bad.push(format!("{what}: {got} != {want}"));
        }
    };
    let acc = topk_accuracy(&preds, &truth, &[1, 3, 5]);
    expect("top-1", acc[0], 1.0 / 3.0);
    expect("top-3", acc[1], 1.0 / 3.0);
    expect("top-5", acc[2], 2.0 / 3.0);
    expect("MRR", mrr(&preds, &truth), (1.0 + 0.25 + 0.0) / 3.0);

    // Back-translating slots per product: 2 of 3, 1 of 3, 3 of 3.
    let rt_preds = vec![fixture("Q1", &["ok", "ok2", "no"]), fixture("Q2", &["no", "ok", "no2"]), fixture("Q3", &["ok", "ok2", "ok3"])];
    let rt = round_trip(&rt_preds, |_, r| r.starts_with("ok"), &[3]);
    expect("round-trip@3", rt[0], 2.0 / 3.0);
    let short = round_trip(&[fixture("S", &["ok", "no"])], |_, r| r.starts_with("ok"), &[2]);
    expect("round-trip short list", short[0], 0.5);

    let scores: HashMap<&str, f64> = [("x", 0.95), ("y", 0.5), ("z", 0.91)].into_iter().collect();
    let f = ftc(&[fixture("F", &["x", "y", "z"])], |_, r| scores[r], 0.9, &[3]);
    expect("FTC@3", f[0], 2.0 / 3.0);
    let detail = if bad.is_empty() {
        "top-k, MRR, round-trip and FTC fixtures exact".to_string()
    } else {
        bad.join("; ")
    };
    Check::new("metric fixtures", bad.is_empty(), detail, start)
}

/// Structural rules of the challenging set, checked on every member.
pub fn check_challenging(corpus: &[ReactionRecord], forward: &ForwardModel, m: usize, seed: u64) -> Check {
    let start = Instant::now();
    let name = "challenging set structure";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = match challenging_set(corpus, forward, m, &mut rng) {
        Ok(g) => g,
        Err(e) => return Check::failed(name, e, start),
    };
    let corpus_keys: HashSet<String> = corpus.iter().map(|r| r.key()).collect();
    let mut reactant_sets = HashSet::new();
    let mut products = HashSet::new();
    let mut sizes_ok = groups.len() == m / 10;
    let mut distinct = true;
    let mut disjoint = true;
    for g in &groups {
        sizes_ok &= g.reactions.len() == 10;
        distinct &= products.insert(g.product.clone());
        for r in &g.reactions {
            distinct &= reactant_sets.insert(r.reactants.clone());
            disjoint &= !corpus_keys.contains(&r.key()) && r.product == g.product;
        }
    }
    Check::new(
        name,
        sizes_ok && distinct && disjoint,
        format!(
            "{} products x 10 reactions; sizes {sizes_ok}, distinct reactant sets {distinct}, disjoint from corpus {disjoint}",
            groups.len()
        ),
        start,
    )
}

/// Fraction of present top-k slots that back-translate, per k.
pub fn slot_precision(preds: &[RankedPredictions], ok: impl Fn(&str, &str) -> bool, ks: &[usize]) -> Vec<f64> {
    ks.iter()
        .map(|&k| {
            let (mut hit, mut all) = (0usize, 0usize);
            for p in preds {
                for x in p.predictions.iter().take(k) {
                    all += 1;
                    hit += usize::from(ok(&p.product, &x.reactants));
                }
            }
            if all == 0 {
                1.0
            } else {
                hit as f64 / all as f64
            }
        })
        .collect()
}

/// Filtering by the training-split forward model lowers no accuracy value
/// and raises no loss in back-translation precision of surviving slots.
pub fn check_filter_direction(
    preds: &[RankedPredictions],
    truth: &GroundTruth,
    forward_train: &ForwardModel,
    forward_eval: &ForwardModel,
) -> Check {
    let start = Instant::now();
    let filtered = filter_ablation(preds, |p, r| forward_train.backtranslates(r, p));
    let before = topk_accuracy(preds, truth, &K_GRID);
    let after = topk_accuracy(&filtered, truth, &K_GRID);
    let eval_ok = |p: &str, r: &str| forward_eval.backtranslates(r, p);
    let prec_before = slot_precision(preds, eval_ok, &K_GRID);
    let prec_after = slot_precision(&filtered, eval_ok, &K_GRID);
    let acc_ok = after.iter().zip(&before).all(|(a, b)| a <= b);
    let prec_ok = prec_after.iter().zip(&prec_before).all(|(a, b)| a >= b);
    Check::new(
        "filter ablation direction",
        acc_ok && prec_ok,
        format!(
            "top-k before {:?} after {:?}; surviving-slot precision before {:?} after {:?}",
            round3(&before),
            round3(&after),
            round3(&prec_before),
            round3(&prec_after)
        ),
        start,
    )
}

fn round3(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

/// Parses a fixed SMILES list and checks write/parse stability.
pub fn check_parser_round_trip() -> Check {
    let start = Instant::now();
    let cases = ["CC(=O)Nc1ccccc1", "c1ccncc1", "C#CCO", "[N+](=O)([O-])c1ccccc1", "OC(=O)C1CC1", "CS(=O)(=O)N1CCOCC1"];
    let mut bad = Vec::new();
    for c in cases {
        match parse_smiles(c) {
            Ok(g) => {
                let key = crate::molgraph::canonical_key(&g);
                let again = parse_smiles(&key).map(|h| crate::molgraph::canonical_key(&h));
                if again.as_deref() != Ok(key.as_str()) {
                    bad.push(c.to_string());
                }
            }
            Err(_) => bad.push(c.to_string()),
        }
    }
    Check::new(
        "SMILES round trip",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} molecules stable", cases.len())
        } else {
            format!("unstable: {}", bad.join(", "))
        },
        start,
    )
}

/// The fast suite run by the `selfcheck` command.
pub fn fast_suite(corpus: &[ReactionRecord], seed: u64) -> Vec<Check> {
    vec![
        check_parser_round_trip(),
        check_matcher(200, seed),
        check_gradients(corpus, 5, seed),
        check_econ(),
        check_tb_oracle(),
        check_metric_fixtures(),
    ]
}
