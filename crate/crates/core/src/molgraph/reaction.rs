use std::collections::HashMap;

use super::{canonical_key, parse_smiles, MolGraph, SmilesError};

/// An atom-mapped reaction `R1.R2>>P`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReactionRecord {
    pub reactants: Vec<MolGraph>,
    pub product: MolGraph,
    /// (product atom, (reactant index, reactant atom)) for every mapped
    /// product atom.
    pub atom_map: Vec<(usize, (usize, usize))>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReactionError {
    #[error("reaction SMILES must contain exactly one '>>' separator")]
    MissingSeparator,
    #[error("empty reactant or product side")]
    EmptySide,
    #[error("invalid SMILES in {side}: {source}")]
    Smiles {
        side: &'static str,
        #[source]
        source: SmilesError,
    },
    #[error("map number {0} used twice on the {1} side")]
    DuplicateMap(u32, &'static str),
    #[error("product map number {0} has no reactant partner")]
    UnpairedMap(u32),
    #[error("map number {0} pairs atoms with different elements")]
    ElementMismatch(u32),
}

/// Parses an atom-mapped reaction. Reactants are split on '.', one graph per
/// dot-separated fragment; the product side is kept as a single graph.
pub fn parse_reaction(text: &str) -> Result<ReactionRecord, ReactionError> {
    let text = text.trim();
    let mut sides = text.split(">>");
    let (Some(lhs), Some(rhs), None) = (sides.next(), sides.next(), sides.next()) else {
        return Err(ReactionError::MissingSeparator);
    };
    if lhs.is_empty() || rhs.is_empty() {
        return Err(ReactionError::EmptySide);
    }
    let reactants = lhs
        .split('.')
        .map(|s| {
            parse_smiles(s).map_err(|source| ReactionError::Smiles {
                side: "reactants",
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let product = parse_smiles(rhs).map_err(|source| ReactionError::Smiles {
        side: "product",
        source,
    })?;

    let mut reactant_maps: HashMap<u32, (usize, usize)> = HashMap::new();
    for (r, g) in reactants.iter().enumerate() {
        for (i, atom) in g.atoms().iter().enumerate() {
            if let Some(m) = atom.map_number {
                if reactant_maps.insert(m, (r, i)).is_some() {
                    return Err(ReactionError::DuplicateMap(m, "reactant"));
                }
            }
        }
    }
    let mut seen = HashMap::new();
    let mut atom_map = Vec::new();
    for (i, atom) in product.atoms().iter().enumerate() {
        let Some(m) = atom.map_number else { continue };
        if seen.insert(m, i).is_some() {
            return Err(ReactionError::DuplicateMap(m, "product"));
        }
        let &(r, j) = reactant_maps.get(&m).ok_or(ReactionError::UnpairedMap(m))?;
        if reactants[r].atom(j).element != atom.element {
            return Err(ReactionError::ElementMismatch(m));
        }
        atom_map.push((i, (r, j)));
    }
    Ok(ReactionRecord {
        reactants,
        product,
        atom_map,
    })
}

/// Order-independent key for a multiset of molecules (maps ignored).
pub fn reactant_set_key(mols: &[MolGraph]) -> String {
    let mut keys: Vec<String> = mols.iter().map(canonical_key).collect();
    keys.sort();
    keys.join(".")
}

/// Key of a whole reaction: reactant multiset and product.
pub fn reaction_key(reactants: &[MolGraph], product: &MolGraph) -> String {
    format!("{}>>{}", reactant_set_key(reactants), canonical_key(product))
}

impl ReactionRecord {
    pub fn reactant_key(&self) -> String {
        reactant_set_key(&self.reactants)
    }

    pub fn product_key(&self) -> String {
        canonical_key(&self.product)
    }

    pub fn key(&self) -> String {
        reaction_key(&self.reactants, &self.product)
    }

    /// Writes the record back as mapped reaction SMILES.
    pub fn to_smiles(&self) -> String {
        let lhs: Vec<String> = self.reactants.iter().map(super::write_smiles).collect();
        format!("{}>>{}", lhs.join("."), super::write_smiles(&self.product))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unpaired_product_map() {
        assert_eq!(
            parse_reaction("[CH3:1][OH:2]>>[CH3:1][Cl:3]").unwrap_err(),
            ReactionError::UnpairedMap(3)
        );
    }

    #[test]
    fn corrected_form_maps_carbon() {
        let r = parse_reaction("[CH3:1][OH:2]>>[CH3:1]Cl").unwrap();
        assert_eq!(r.atom_map, vec![(0, (0, 0))]);
    }

    #[test]
    fn unmapped_identity() {
        let r = parse_reaction("C>>C").unwrap();
        assert_eq!(r.reactants.len(), 1);
        assert!(r.atom_map.is_empty());
    }

    #[test]
    fn two_reactants() {
        let r = parse_reaction("CC(=O)O.NC>>CC(=O)NC").unwrap();
        assert_eq!(r.reactants.len(), 2);
    }

    #[test]
    fn separator_and_duplicates() {
        assert_eq!(parse_reaction("CC").unwrap_err(), ReactionError::MissingSeparator);
        assert_eq!(
            parse_reaction("C>>C>>C").unwrap_err(),
            ReactionError::MissingSeparator
        );
        assert_eq!(
            parse_reaction("[CH3:1][OH:1]>>[CH4:1]").unwrap_err(),
            ReactionError::DuplicateMap(1, "reactant")
        );
        assert_eq!(
            parse_reaction("[CH3:1]O.[CH4:2]>>[CH3:1][CH3:1]").unwrap_err(),
            ReactionError::DuplicateMap(1, "product")
        );
        assert_eq!(
            parse_reaction("[CH3:1]O>>[NH3:1]").unwrap_err(),
            ReactionError::ElementMismatch(1)
        );
    }
}
