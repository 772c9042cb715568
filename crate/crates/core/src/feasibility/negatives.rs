use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{parse_reactant_key, FeasibilityError, ForwardModel};
use crate::molgraph::{canonical_key, fingerprint, parse_smiles, tanimoto_fp, Fingerprint, MolGraph, ReactionRecord};
use crate::templates::forward_apply;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMethod {
    ForwardTemplate,
    ProductSwap,
}

impl fmt::Display for NegativeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeMethod::ForwardTemplate => "forward_template",
            NegativeMethod::ProductSwap => "product_swap",
        })
    }
}

impl FromStr for NegativeMethod {
    type Err = FeasibilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward_template" => Ok(NegativeMethod::ForwardTemplate),
            "product_swap" => Ok(NegativeMethod::ProductSwap),
            _ => Err(FeasibilityError::Format(format!("unknown negative method {s:?}"))),
        }
    }
}

/// A reaction believed infeasible, by canonical keys.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Negative {
    pub reactants: String,
    pub product: String,
    pub method: NegativeMethod,
}

impl Negative {
    pub fn key(&self) -> String {
        format!("{}>>{}", self.reactants, self.product)
    }

    /// `reactants>>product # method`.
    pub fn to_line(&self) -> String {
        format!("{} # {}", self.key(), self.method)
    }

    pub fn from_line(line: &str) -> Result<Negative, FeasibilityError> {
        let (rxn, tag) = line
            .rsplit_once(" # ")
            .ok_or_else(|| FeasibilityError::Format(format!("missing method tag in {line:?}")))?;
        let (r, p) = rxn
            .trim()
            .split_once(">>")
            .ok_or_else(|| FeasibilityError::Format(format!("missing '>>' in {line:?}")))?;
        Ok(Negative {
            reactants: r.to_string(),
            product: p.to_string(),
            method: tag.trim().parse()?,
        })
    }
}

pub fn write_negatives(negs: &[Negative]) -> String {
    negs.iter().map(|n| n.to_line() + "\n").collect()
}

pub fn read_negatives(text: &str) -> Result<Vec<Negative>, FeasibilityError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(Negative::from_line)
        .collect()
}

/// Distinct corpus reactions by key, in key order.
pub(crate) struct Positives {
    pub keys: HashSet<String>,
    /// (reactant key, product key)
    pub reactions: Vec<(String, String)>,
    pub reactant_graphs: BTreeMap<String, Vec<MolGraph>>,
}

impl Positives {
    pub fn new(corpus: &[ReactionRecord]) -> Positives {
        let mut by_key: BTreeMap<String, (String, String)> = BTreeMap::new();
        let mut reactant_graphs = BTreeMap::new();
        for r in corpus {
            let rk = r.reactant_key();
            by_key.entry(r.key()).or_insert_with(|| (rk.clone(), r.product_key()));
            reactant_graphs.entry(rk).or_insert_with(|| parse_reactant_key(&r.reactant_key()));
        }
        Positives {
            keys: by_key.keys().cloned().collect(),
            reactions: by_key.into_values().collect(),
            reactant_graphs,
        }
    }

    pub fn contains(&self, reactants: &str, product: &str) -> bool {
        self.keys.contains(&format!("{reactants}>>{product}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegativeSet {
    pub negatives: Vec<Negative>,
    pub target: usize,
}

impl NegativeSet {
    pub fn reached_target(&self) -> bool {
        self.negatives.len() >= self.target
    }
}

/// Negatives at `ratio` per distinct positive, alternating between forward
/// template application and product swaps. Swap round `r` pairs a reaction
/// with its `r`-th most similar other product.
pub fn generate_negatives(
    corpus: &[ReactionRecord],
    forward: &ForwardModel,
    ratio: usize,
    rng: &mut impl Rng,
) -> Result<NegativeSet, FeasibilityError> {
    let pos = Positives::new(corpus);
    let products: Vec<String> = pos
        .reactions
        .iter()
        .map(|(_, p)| p.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if products.len() < 2 {
        return Err(FeasibilityError::Insufficient("need at least two distinct products".into()));
    }
    let target = ratio * pos.reactions.len();
    let mut out = Vec::with_capacity(target);
    let mut seen: HashSet<String> = HashSet::new();
    let mut accept = |n: Negative, out: &mut Vec<Negative>| {
        if !pos.keys.contains(&n.key()) && seen.insert(n.key()) {
            out.push(n);
        }
    };

    // Forward-template candidates in random order.
    let templates: Vec<_> = forward.templates().collect();
    let mut pairs: Vec<(usize, usize)> = (0..pos.reactions.len())
        .flat_map(|r| (0..templates.len()).map(move |t| (r, t)))
        .collect();
    pairs.shuffle(rng);
    let mut pairs = pairs.into_iter();

    // Swap candidates: each reaction's other products by similarity.
    let fps: BTreeMap<&String, Fingerprint> = products
        .iter()
        .filter_map(|p| parse_smiles(p).ok().map(|g| (p, fingerprint(&g))))
        .collect();
    let mut order: Vec<usize> = (0..pos.reactions.len()).collect();
    order.shuffle(rng);
    let neighbors = |i: usize| -> Vec<String> {
        let own = &pos.reactions[i].1;
        let Some(f) = fps.get(own) else { return Vec::new() };
        let mut others: Vec<(f64, &String)> = fps
            .iter()
            .filter(|(p, _)| **p != own)
            .map(|(p, g)| (tanimoto_fp(f, g), *p))
            .collect();
        others.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        others.into_iter().map(|(_, p)| p.clone()).collect()
    };
    let mut swap_lists: Vec<Option<Vec<String>>> = vec![None; pos.reactions.len()];
    let mut swap_round = 0usize;
    let mut swap_cursor = 0usize;
    let max_round = products.len() - 1;

    let mut forward_dry = false;
    let mut swap_dry = false;
    let mut use_forward = true;
    while out.len() < target && !(forward_dry && swap_dry) {
        if use_forward && !forward_dry {
            loop {
                let Some((r, t)) = pairs.next() else {
                    forward_dry = true;
                    break;
                };
                let (rk, pk) = &pos.reactions[r];
                let graphs = &pos.reactant_graphs[rk];
                let before = out.len();
                for p in forward_apply(templates[t], graphs) {
                    let key = canonical_key(&p);
                    if &key != pk {
                        accept(
                            Negative {
                                reactants: rk.clone(),
                                product: key,
                                method: NegativeMethod::ForwardTemplate,
                            },
                            &mut out,
                        );
                        if out.len() > before {
                            break;
                        }
                    }
                }
                if out.len() > before {
                    break;
                }
            }
        } else if !swap_dry {
            loop {
                if swap_round >= max_round {
                    swap_dry = true;
                    break;
                }
                let i = order[swap_cursor];
                let round = swap_round;
                swap_cursor += 1;
                if swap_cursor == order.len() {
                    swap_cursor = 0;
                    swap_round += 1;
                }
                let list = swap_lists[i].get_or_insert_with(|| neighbors(i));
                let Some(p) = list.get(round).cloned() else {
                    continue;
                };
                let before = out.len();
                accept(
                    Negative {
                        reactants: pos.reactions[i].0.clone(),
                        product: p,
                        method: NegativeMethod::ProductSwap,
                    },
                    &mut out,
                );
                if out.len() > before {
                    break;
                }
            }
        }
        use_forward = !use_forward;
    }
    if out.len() < target {
        log::warn!("generated {} negatives, short of the target {target}", out.len());
    }
    out.truncate(target);
    Ok(NegativeSet { negatives: out, target })
}
