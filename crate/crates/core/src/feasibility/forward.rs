use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::molgraph::{canonical_key, parse_smiles, reactant_set_key, MolGraph};
use crate::templates::{forward_apply, PatternLibrary, Template};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardProduct {
    pub key: String,
    /// Corpus frequency of the best template producing it.
    pub frequency: u64,
}

/// Rule-based reaction predictor: every library template run forward,
/// candidates ranked by (template frequency desc, canonical key asc).
pub struct ForwardModel {
    templates: Vec<(Template, u64)>,
    cache: Mutex<HashMap<String, Vec<ForwardProduct>>>,
}

impl ForwardModel {
    pub fn new(library: &PatternLibrary) -> ForwardModel {
        ForwardModel {
            templates: (0..library.templates.len())
                .map(|i| (library.template(i), library.templates[i].count as u64))
                .collect(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn template_count(&self) -> usize {
        self.templates.len()
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.iter().map(|(t, _)| t)
    }

    /// Ranked products, at most `top` of them.
    pub fn predict(&self, reactants: &[MolGraph], top: usize) -> Vec<ForwardProduct> {
        let key = reactant_set_key(reactants);
        let mut ranked = self.ranked(&key, || reactants.to_vec());
        ranked.truncate(top);
        ranked
    }

    /// As [`predict`](Self::predict) from a reactant-set key.
    pub fn predict_key(&self, reactant_key: &str, top: usize) -> Vec<ForwardProduct> {
        let mut ranked = self.ranked(reactant_key, || parse_reactant_key(reactant_key));
        ranked.truncate(top);
        ranked
    }

    fn ranked(&self, key: &str, graphs: impl FnOnce() -> Vec<MolGraph>) -> Vec<ForwardProduct> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(key) {
            return hit.clone();
        }
        let reactants = graphs();
        let mut best: HashMap<String, u64> = HashMap::new();
        if !reactants.is_empty() {
            for (t, count) in &self.templates {
                for p in forward_apply(t, &reactants) {
                    let e = best.entry(canonical_key(&p)).or_insert(0);
                    *e = (*e).max(*count);
                }
            }
        }
        let mut out: Vec<ForwardProduct> = best
            .into_iter()
            .map(|(key, frequency)| ForwardProduct { key, frequency })
            .collect();
        out.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.key.cmp(&b.key)));
        self.cache.lock().expect("cache lock").insert(key.to_string(), out.clone());
        out
    }

    /// Rank-1 product key, if any.
    pub fn top1(&self, reactant_key: &str) -> Option<String> {
        self.predict_key(reactant_key, 1).pop().map(|p| p.key)
    }

    /// 1 when the rank-1 forward product is `product_key`.
    pub fn backtranslates(&self, reactant_key: &str, product_key: &str) -> bool {
        self.top1(reactant_key).as_deref() == Some(product_key)
    }

    pub fn backtranslate_indicator(&self, reactant_key: &str, product_key: &str) -> f64 {
        f64::from(u8::from(self.backtranslates(reactant_key, product_key)))
    }
}

/// Molecules of a dot-joined reactant-set key; unparsable parts are skipped.
pub fn parse_reactant_key(key: &str) -> Vec<MolGraph> {
    key.split('.').filter_map(|s| parse_smiles(s).ok()).collect()
}
