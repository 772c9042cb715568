//! Backward reaction templates split into product and reactant patterns,
//! the deduplicated pattern library, substructure matching and template
//! application in both directions.

mod apply;
mod extract;
mod library;
mod matcher;

use serde::{Deserialize, Serialize};

use crate::molgraph::{canonical_order, canonical_smiles_labeled, MolGraph};

pub use apply::{apply_parts, apply_template, forward_apply, forward_apply_parts, ApplyError};
pub use extract::{extract_template, extract_with_center, ExtractError, Extraction};
pub use library::{build_library, LibraryError, LibraryTemplate, PatternLibrary, ResolvedTemplate};
pub use matcher::{find_matches, find_matches_capped, Match};

/// Per-atom record of where a pattern atom came from in its source template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct OriginFeatures {
    pub was_mapped: bool,
    /// Reactant-side charge minus product-side charge.
    pub charge_delta: i32,
    /// Reactant-side hydrogen count minus product-side hydrogen count.
    pub h_delta: i32,
}

/// A template fragment with its mappable atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternGraph {
    pub graph: MolGraph,
    pub mappable: Vec<bool>,
    pub origin: Vec<OriginFeatures>,
}

/// (product-pattern atom, reactant-pattern index, reactant-pattern atom).
pub type Triple = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub product_pattern: PatternGraph,
    pub reactant_patterns: Vec<PatternGraph>,
    pub mapping: Vec<Triple>,
}

impl PatternGraph {
    pub fn atom_count(&self) -> usize {
        self.graph.atom_count()
    }

    pub fn mappable_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.mappable
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }

    fn labels(&self) -> Vec<String> {
        (0..self.atom_count())
            .map(|i| {
                let o = self.origin[i];
                format!(
                    "{}{}{:+}{:+}",
                    u8::from(self.mappable[i]),
                    u8::from(o.was_mapped),
                    o.charge_delta,
                    o.h_delta
                )
            })
            .collect()
    }

    /// Dedup key over the graph, the mappable set and the origin records.
    pub fn key(&self) -> String {
        canonical_smiles_labeled(&self.graph, &self.labels())
    }

    /// Same pattern with atoms in canonical order, plus `old -> new` index map.
    pub fn canonicalized(&self) -> (PatternGraph, Vec<usize>) {
        let order = canonical_order(&self.graph, Some(&self.labels()));
        let mut new_index = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let p = PatternGraph {
            graph: self.graph.permuted(&order),
            mappable: order.iter().map(|&o| self.mappable[o]).collect(),
            origin: order.iter().map(|&o| self.origin[o]).collect(),
        };
        (p, new_index)
    }

    /// Element counts over mappable atoms, indexed by element.
    pub fn mappable_counts(&self) -> [u32; 10] {
        let mut c = [0u32; 10];
        for i in self.mappable_atoms() {
            c[self.graph.atom(i).element.index()] += 1;
        }
        c
    }
}

impl Template {
    pub fn reactant_pattern(&self, k: usize) -> &PatternGraph {
        &self.reactant_patterns[k]
    }
}
