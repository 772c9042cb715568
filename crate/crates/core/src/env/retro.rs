use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EnvError, FlowEnv};
use crate::molgraph::{canonical_key, reactant_set_key, MolGraph, ReactionRecord};
use crate::templates::{
    apply_parts, extract_with_center, find_matches_capped, Match, PatternGraph, PatternLibrary, Template, Triple,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub max_reactants: usize,
    /// Upper bound on first-phase matches per product.
    pub match_cap: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            max_reactants: 3,
            match_cap: 10_000,
        }
    }
}

/// A product with its cached first-phase action list.
#[derive(Debug)]
pub struct ProductInfo {
    pub graph: MolGraph,
    pub key: String,
    pub matches: Vec<Match>,
    /// Whether `matches` was truncated at the cap.
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Phase1,
    Phase2 {
        pick: usize,
        /// Sorted multiset of reactant-pattern indices.
        collected: Vec<usize>,
    },
    Phase3 {
        pick: usize,
        collected: Vec<usize>,
        /// Sorted (product-pattern atom, position in `collected`, atom).
        mapping: Vec<Triple>,
    },
    Terminal {
        pick: usize,
        collected: Vec<usize>,
        mapping: Vec<Triple>,
    },
}

/// Reactants produced at a terminal.
#[derive(Debug)]
pub struct Outcome {
    pub reactants: Vec<MolGraph>,
    pub reactant_key: String,
}

#[derive(Clone, Debug)]
pub struct State {
    pub product: Arc<ProductInfo>,
    pub stage: Stage,
    pub outcome: Option<Arc<Outcome>>,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.stage == other.stage && self.product.key == other.product.key
    }
}

impl Eq for State {}

impl Hash for State {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.product.key.hash(h);
        self.stage.hash(h);
    }
}

impl State {
    pub fn pick(&self) -> Option<&Match> {
        match &self.stage {
            Stage::Phase1 => None,
            Stage::Phase2 { pick, .. } | Stage::Phase3 { pick, .. } | Stage::Terminal { pick, .. } => {
                Some(&self.product.matches[*pick])
            }
        }
    }

    pub fn collected(&self) -> &[usize] {
        match &self.stage {
            Stage::Phase1 => &[],
            Stage::Phase2 { collected, .. } | Stage::Phase3 { collected, .. } | Stage::Terminal { collected, .. } => {
                collected
            }
        }
    }

    pub fn mapping(&self) -> &[Triple] {
        match &self.stage {
            Stage::Phase3 { mapping, .. } | Stage::Terminal { mapping, .. } => mapping,
            _ => &[],
        }
    }

    pub fn reactants(&self) -> Option<&[MolGraph]> {
        self.outcome.as_ref().map(|o| o.reactants.as_slice())
    }

    pub fn reactant_key(&self) -> Option<&str> {
        self.outcome.as_ref().map(|o| o.reactant_key.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    /// Index into the product's match list.
    Match(usize),
    /// Reactant-pattern index.
    Reactant(usize),
    Advance,
    Map(Triple),
}

/// The template-composition environment over a fixed pattern library.
pub struct RetroEnv {
    library: Arc<PatternLibrary>,
    config: EnvConfig,
    pp_need: Vec<[u32; 10]>,
    rp_have: Vec<[u32; 10]>,
    /// Distinct non-zero count vectors among reactant patterns.
    rp_distinct: Vec<[u32; 10]>,
}

fn add_counts(a: &[u32; 10], b: &[u32; 10]) -> [u32; 10] {
    let mut out = *a;
    for (o, x) in out.iter_mut().zip(b) {
        *o += x;
    }
    out
}

fn deficit(need: &[u32; 10], have: &[u32; 10]) -> [u32; 10] {
    let mut out = [0; 10];
    for i in 0..10 {
        out[i] = need[i].saturating_sub(have[i]);
    }
    out
}

impl RetroEnv {
    pub fn new(library: Arc<PatternLibrary>, config: EnvConfig) -> RetroEnv {
        let pp_need = library.pps.iter().map(PatternGraph::mappable_counts).collect();
        let rp_have: Vec<[u32; 10]> = library.rps.iter().map(PatternGraph::mappable_counts).collect();
        let mut rp_distinct: Vec<[u32; 10]> = rp_have.iter().copied().filter(|c| c.iter().any(|&x| x > 0)).collect();
        rp_distinct.sort_unstable();
        rp_distinct.dedup();
        RetroEnv {
            library,
            config,
            pp_need,
            rp_have,
            rp_distinct,
        }
    }

    pub fn library(&self) -> &Arc<PatternLibrary> {
        &self.library
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Enumerates first-phase matches over every product pattern.
    pub fn product(&self, graph: MolGraph) -> Arc<ProductInfo> {
        let key = canonical_key(&graph);
        let mut matches = Vec::new();
        let mut capped = false;
        for (pi, pp) in self.library.pps.iter().enumerate() {
            let room = self.config.match_cap - matches.len();
            let (found, hit) = find_matches_capped(&pp.graph, &graph, room);
            matches.extend(found.into_iter().map(|atom_indices| Match {
                pattern_index: pi,
                atom_indices,
            }));
            if hit || matches.len() >= self.config.match_cap {
                capped = true;
                log::warn!("match cap {} reached for {}", self.config.match_cap, key);
                break;
            }
        }
        Arc::new(ProductInfo {
            graph,
            key,
            matches,
            capped,
        })
    }

    pub fn initial_state(&self, product: Arc<ProductInfo>) -> State {
        State {
            product,
            stage: Stage::Phase1,
            outcome: None,
        }
    }

    fn have(&self, collected: &[usize]) -> [u32; 10] {
        collected
            .iter()
            .fold([0; 10], |acc, &r| add_counts(&acc, &self.rp_have[r]))
    }

    /// Whether `def` can be covered by at most `slots` more patterns.
    fn coverable(&self, def: &[u32; 10], slots: usize) -> bool {
        if def.iter().all(|&x| x == 0) {
            return true;
        }
        if slots == 0 {
            return false;
        }
        self.rp_distinct.iter().any(|v| {
            v.iter().zip(def).any(|(&a, &b)| a > 0 && b > 0) && self.coverable(&deficit(def, v), slots - 1)
        })
    }

    fn complete(&self, pick: usize, collected: &[usize], product: &ProductInfo) -> bool {
        let pp = product.matches[pick].pattern_index;
        deficit(&self.pp_need[pp], &self.have(collected)).iter().all(|&x| x == 0)
    }

    fn can_add(&self, pick: usize, collected: &[usize], rp: usize, product: &ProductInfo) -> bool {
        if collected.len() >= self.config.max_reactants {
            return false;
        }
        let pp = product.matches[pick].pattern_index;
        let have = add_counts(&self.have(collected), &self.rp_have[rp]);
        self.coverable(
            &deficit(&self.pp_need[pp], &have),
            self.config.max_reactants - collected.len() - 1,
        )
    }

    fn mappable_left(&self, pick: usize, mapping: &[Triple], product: &ProductInfo) -> Vec<usize> {
        let pp = &self.library.pps[product.matches[pick].pattern_index];
        pp.mappable_atoms()
            .filter(|j| !mapping.iter().any(|t| t.0 == *j))
            .collect()
    }

    /// Assembles the composed template of a state.
    pub fn template(&self, s: &State) -> Option<Template> {
        let pick = s.pick()?;
        Some(Template {
            product_pattern: self.library.pps[pick.pattern_index].clone(),
            reactant_patterns: s.collected().iter().map(|&r| self.library.rps[r].clone()).collect(),
            mapping: s.mapping().to_vec(),
        })
    }

    fn apply(&self, product: &ProductInfo, pick: usize, collected: &[usize], mapping: &[Triple]) -> Result<Outcome, EnvError> {
        let m = &product.matches[pick];
        let pp = &self.library.pps[m.pattern_index];
        let rps: Vec<&PatternGraph> = collected.iter().map(|&r| &self.library.rps[r]).collect();
        let reactants = apply_parts(pp, &rps, mapping, &product.graph, &m.atom_indices)
            .map_err(|e| EnvError::Application(e.to_string()))?;
        let reactant_key = reactant_set_key(&reactants);
        Ok(Outcome {
            reactants,
            reactant_key,
        })
    }

    fn terminal(&self, product: &Arc<ProductInfo>, pick: usize, collected: Vec<usize>, mapping: Vec<Triple>) -> Result<State, EnvError> {
        let outcome = self.apply(product, pick, &collected, &mapping)?;
        Ok(State {
            product: product.clone(),
            stage: Stage::Terminal {
                pick,
                collected,
                mapping,
            },
            outcome: Some(Arc::new(outcome)),
        })
    }

    /// Candidate third-phase triples, before final-step masking.
    fn map_candidates(&self, product: &ProductInfo, pick: usize, collected: &[usize], mapping: &[Triple]) -> Vec<Triple> {
        let pp = &self.library.pps[product.matches[pick].pattern_index];
        let mut out = Vec::new();
        for j in self.mappable_left(pick, mapping, product) {
            let element = pp.graph.atom(j).element;
            for (k, &r) in collected.iter().enumerate() {
                let rp = &self.library.rps[r];
                for l in rp.mappable_atoms() {
                    if rp.graph.atom(l).element == element && !mapping.iter().any(|t| t.1 == k && t.2 == l) {
                        out.push((j, k, l));
                    }
                }
            }
        }
        out
    }

    /// The terminal of a corpus reaction, built from its extracted template
    /// expressed in library patterns.
    pub fn reaction_terminal(&self, r: &ReactionRecord, radius: usize) -> Result<State, EnvError> {
        let e = extract_with_center(r, radius).map_err(|e| EnvError::NotInLibrary(e.to_string()))?;
        let resolved = self
            .library
            .resolve(&e.template)
            .ok_or_else(|| EnvError::NotInLibrary("pattern missing from library".into()))?;
        if resolved.reactant_patterns.len() > self.config.max_reactants {
            return Err(EnvError::NotInLibrary("too many reactant patterns".into()));
        }
        let mut atoms = vec![0; e.center.len()];
        for (old, &a) in e.center.iter().enumerate() {
            atoms[resolved.pp_atom_map[old]] = a;
        }
        let product = self.product(r.product.clone());
        let pick = product
            .matches
            .iter()
            .position(|m| m.pattern_index == resolved.product_pattern && m.atom_indices == atoms)
            .ok_or_else(|| EnvError::NotInLibrary("reaction center not among matches".into()))?;
        let t = self.terminal(&product, pick, resolved.reactant_patterns, resolved.mapping)?;
        if t.reactant_key() != Some(r.reactant_key().as_str()) {
            return Err(EnvError::NotInLibrary("composed template does not reproduce the reactants".into()));
        }
        Ok(t)
    }
}

impl FlowEnv for RetroEnv {
    type State = State;
    type Action = Action;

    fn actions(&self, s: &State) -> Vec<Action> {
        let product = &s.product;
        match &s.stage {
            Stage::Phase1 => (0..product.matches.len()).map(Action::Match).collect(),
            Stage::Phase2 { pick, collected } => {
                let mut out: Vec<Action> = (0..self.library.rps.len())
                    .filter(|&r| self.can_add(*pick, collected, r, product))
                    .map(Action::Reactant)
                    .collect();
                if self.complete(*pick, collected, product) {
                    let pp = &self.library.pps[product.matches[*pick].pattern_index];
                    let direct = pp.mappable_atoms().next().is_none();
                    if !direct || self.apply(product, *pick, collected, &[]).is_ok() {
                        out.push(Action::Advance);
                    }
                }
                out
            }
            Stage::Phase3 {
                pick,
                collected,
                mapping,
            } => {
                let cands = self.map_candidates(product, *pick, collected, mapping);
                let last = self.mappable_left(*pick, mapping, product).len() == 1;
                cands
                    .into_iter()
                    .filter(|t| {
                        if !last {
                            return true;
                        }
                        let mut m = mapping.clone();
                        m.push(*t);
                        m.sort_unstable();
                        self.apply(product, *pick, collected, &m).is_ok()
                    })
                    .map(Action::Map)
                    .collect()
            }
            Stage::Terminal { .. } => Vec::new(),
        }
    }

    fn step(&self, s: &State, a: &Action) -> Result<State, EnvError> {
        let illegal = || EnvError::IllegalAction(format!("{a:?}"));
        let product = &s.product;
        let next = |stage| State {
            product: product.clone(),
            stage,
            outcome: None,
        };
        match (&s.stage, a) {
            (Stage::Terminal { .. }, _) => Err(EnvError::Terminal),
            (Stage::Phase1, Action::Match(i)) if *i < product.matches.len() => Ok(next(Stage::Phase2 {
                pick: *i,
                collected: Vec::new(),
            })),
            (Stage::Phase2 { pick, collected }, Action::Reactant(r))
                if *r < self.library.rps.len() && self.can_add(*pick, collected, *r, product) =>
            {
                let mut c = collected.clone();
                let at = c.partition_point(|&x| x <= *r);
                c.insert(at, *r);
                Ok(next(Stage::Phase2 {
                    pick: *pick,
                    collected: c,
                }))
            }
            (Stage::Phase2 { pick, collected }, Action::Advance) if self.complete(*pick, collected, product) => {
                let pp = &self.library.pps[product.matches[*pick].pattern_index];
                if pp.mappable_atoms().next().is_none() {
                    self.terminal(product, *pick, collected.clone(), Vec::new())
                } else {
                    Ok(next(Stage::Phase3 {
                        pick: *pick,
                        collected: collected.clone(),
                        mapping: Vec::new(),
                    }))
                }
            }
            (
                Stage::Phase3 {
                    pick,
                    collected,
                    mapping,
                },
                Action::Map(t),
            ) => {
                if !self.map_candidates(product, *pick, collected, mapping).contains(t) {
                    return Err(illegal());
                }
                let mut m = mapping.clone();
                m.push(*t);
                m.sort_unstable();
                if self.mappable_left(*pick, &m, product).is_empty() {
                    self.terminal(product, *pick, collected.clone(), m)
                } else {
                    Ok(next(Stage::Phase3 {
                        pick: *pick,
                        collected: collected.clone(),
                        mapping: m,
                    }))
                }
            }
            _ => Err(illegal()),
        }
    }

    fn is_terminal(&self, s: &State) -> bool {
        matches!(s.stage, Stage::Terminal { .. })
    }

    fn parents(&self, s: &State) -> Result<Vec<(State, Action)>, EnvError> {
        let product = &s.product;
        let mk = |stage| State {
            product: product.clone(),
            stage,
            outcome: None,
        };
        match &s.stage {
            Stage::Phase1 => Err(EnvError::Initial),
            Stage::Phase2 { pick, collected } if collected.is_empty() => Ok(vec![(mk(Stage::Phase1), Action::Match(*pick))]),
            Stage::Phase2 { pick, collected } => {
                let mut distinct = collected.clone();
                distinct.dedup();
                Ok(distinct
                    .into_iter()
                    .map(|r| {
                        let mut c = collected.clone();
                        let at = c.iter().position(|&x| x == r).expect("present");
                        c.remove(at);
                        (
                            mk(Stage::Phase2 {
                                pick: *pick,
                                collected: c,
                            }),
                            Action::Reactant(r),
                        )
                    })
                    .collect())
            }
            Stage::Phase3 {
                pick,
                collected,
                mapping,
            }
            | Stage::Terminal {
                pick,
                collected,
                mapping,
            } => {
                if mapping.is_empty() {
                    return Ok(vec![(
                        mk(Stage::Phase2 {
                            pick: *pick,
                            collected: collected.clone(),
                        }),
                        Action::Advance,
                    )]);
                }
                Ok(mapping
                    .iter()
                    .map(|t| {
                        let m: Vec<Triple> = mapping.iter().copied().filter(|x| x != t).collect();
                        (
                            mk(Stage::Phase3 {
                                pick: *pick,
                                collected: collected.clone(),
                                mapping: m,
                            }),
                            Action::Map(*t),
                        )
                    })
                    .collect())
            }
        }
    }

    fn parent_count(&self, s: &State) -> Result<usize, EnvError> {
        match &s.stage {
            Stage::Phase1 => Err(EnvError::Initial),
            Stage::Phase2 { collected, .. } if collected.is_empty() => Ok(1),
            Stage::Phase2 { collected, .. } => {
                let mut d = collected.clone();
                d.dedup();
                Ok(d.len())
            }
            Stage::Phase3 { mapping, .. } | Stage::Terminal { mapping, .. } => Ok(mapping.len().max(1)),
        }
    }
}
