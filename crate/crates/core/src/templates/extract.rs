use std::collections::{BTreeSet, HashMap};

use super::{OriginFeatures, PatternGraph, Template, Triple};
use crate::molgraph::{BondOrder, MolGraph, ReactionRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("reaction has no atom mapping")]
    Unmapped,
    #[error("reaction changes no bond, charge or hydrogen count")]
    NoChange,
}

/// A template together with the product atoms its product pattern was cut
/// from (`center[j]` is the product atom of pattern atom `j`).
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub template: Template,
    pub center: Vec<usize>,
}

pub fn extract_template(r: &ReactionRecord, radius: usize) -> Result<Template, ExtractError> {
    extract_with_center(r, radius).map(|e| e.template)
}

/// Cuts the reaction center plus `radius` bond hops out of the product and
/// the matching atoms plus every leaving atom out of the reactants.
pub fn extract_with_center(r: &ReactionRecord, radius: usize) -> Result<Extraction, ExtractError> {
    if r.atom_map.is_empty() {
        return Err(ExtractError::Unmapped);
    }
    let product = &r.product;
    let np = product.atom_count();
    let mut partner: Vec<Option<(usize, usize)>> = vec![None; np];
    let mut back: HashMap<(usize, usize), usize> = HashMap::new();
    for &(pi, rj) in &r.atom_map {
        partner[pi] = Some(rj);
        back.insert(rj, pi);
    }

    let changed: Vec<bool> = (0..np)
        .map(|i| match partner[i] {
            None => true,
            Some((ri, rj)) => atom_changed(r, &back, &partner, i, ri, rj),
        })
        .collect();
    if !changed.iter().any(|&c| c) && !has_unmapped_reactant_atoms(r, &back) {
        return Err(ExtractError::NoChange);
    }
    if !changed.iter().any(|&c| c) {
        // Only spectator fragments differ; nothing to anchor a template on.
        return Err(ExtractError::NoChange);
    }

    // Center plus radius hops in the product.
    let mut dist = vec![usize::MAX; np];
    let mut frontier: Vec<usize> = (0..np).filter(|&i| changed[i]).collect();
    for &i in &frontier {
        dist[i] = 0;
    }
    for hop in 1..=radius {
        let mut next = Vec::new();
        for &v in &frontier {
            for &(w, _) in product.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = hop;
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    let pp_atoms: Vec<usize> = (0..np).filter(|&i| dist[i] != usize::MAX).collect();

    let mut pp = product_pattern(r, &pp_atoms, &partner);

    // Reactant atoms: images of product-pattern atoms plus all leaving atoms.
    let mut selected: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); r.reactants.len()];
    for &i in &pp_atoms {
        if let Some((ri, rj)) = partner[i] {
            selected[ri].insert(rj);
        }
    }
    for (ri, g) in r.reactants.iter().enumerate() {
        for j in 0..g.atom_count() {
            if !back.contains_key(&(ri, j)) {
                selected[ri].insert(j);
            }
        }
    }

    let mut rps: Vec<PatternGraph> = Vec::new();
    // (reactant, atom) -> (pattern, local index)
    let mut location: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (ri, atoms) in selected.iter().enumerate() {
        if atoms.is_empty() {
            continue;
        }
        let atoms: Vec<usize> = atoms.iter().copied().collect();
        let sub = r.reactants[ri].subgraph(&atoms);
        for comp in sub.components() {
            let k = rps.len();
            let originals: Vec<usize> = comp.iter().map(|&c| atoms[c]).collect();
            for (l, &orig) in originals.iter().enumerate() {
                location.insert((ri, orig), (k, l));
            }
            rps.push(reactant_pattern(r, ri, &originals, &back));
        }
    }

    let mut mapping: Vec<Triple> = Vec::new();
    for (j, &i) in pp_atoms.iter().enumerate() {
        if let Some(rj) = partner[i] {
            let (k, l) = location[&rj];
            mapping.push((j, k, l));
        }
    }

    // Canonical atom order inside every pattern, reactant patterns sorted by key.
    let (canon_pp, pp_index) = pp.canonicalized();
    pp = canon_pp;
    let mut center = vec![0; pp_atoms.len()];
    for (old, &new) in pp_index.iter().enumerate() {
        center[new] = pp_atoms[old];
    }
    let mut canon_rps: Vec<(String, PatternGraph, Vec<usize>, usize)> = rps
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let (c, idx) = p.canonicalized();
            (c.key(), c, idx, k)
        })
        .collect();
    canon_rps.sort_by(|a, b| a.0.cmp(&b.0));
    let mut k_new = vec![0; canon_rps.len()];
    for (new, entry) in canon_rps.iter().enumerate() {
        k_new[entry.3] = new;
    }
    let mapping: Vec<Triple> = {
        let mut m: Vec<Triple> = mapping
            .iter()
            .map(|&(j, k, l)| (pp_index[j], k_new[k], canon_rps[k_new[k]].2[l]))
            .collect();
        m.sort_unstable();
        m
    };
    let template = Template {
        product_pattern: pp,
        reactant_patterns: canon_rps.into_iter().map(|e| e.1).collect(),
        mapping,
    };
    Ok(Extraction { template, center })
}

fn has_unmapped_reactant_atoms(r: &ReactionRecord, back: &HashMap<(usize, usize), usize>) -> bool {
    r.reactants
        .iter()
        .enumerate()
        .any(|(ri, g)| (0..g.atom_count()).any(|j| !back.contains_key(&(ri, j))))
}

type Descriptor = (Option<(usize, usize)>, BondOrder);

fn atom_changed(
    r: &ReactionRecord,
    back: &HashMap<(usize, usize), usize>,
    partner: &[Option<(usize, usize)>],
    i: usize,
    ri: usize,
    rj: usize,
) -> bool {
    let pa = r.product.atom(i);
    let ra = r.reactants[ri].atom(rj);
    if pa.charge != ra.charge || pa.implicit_h != ra.implicit_h || pa.aromatic != ra.aromatic {
        return true;
    }
    let mut p_side: Vec<Descriptor> = r
        .product
        .neighbors(i)
        .iter()
        .map(|&(w, bi)| (partner[w], r.product.bonds()[bi].order))
        .collect();
    let g = &r.reactants[ri];
    let mut r_side: Vec<Descriptor> = g
        .neighbors(rj)
        .iter()
        .map(|&(w, bi)| {
            let mapped = back.contains_key(&(ri, w)).then_some((ri, w));
            (mapped, g.bonds()[bi].order)
        })
        .collect();
    p_side.sort_unstable();
    r_side.sort_unstable();
    // Unmapped neighbors on either side always count as a change.
    p_side.iter().any(|d| d.0.is_none()) || r_side.iter().any(|d| d.0.is_none()) || p_side != r_side
}

fn product_pattern(
    r: &ReactionRecord,
    atoms: &[usize],
    partner: &[Option<(usize, usize)>],
) -> PatternGraph {
    let mut graph = r.product.subgraph(atoms);
    let mut mappable = Vec::with_capacity(atoms.len());
    let mut origin = Vec::with_capacity(atoms.len());
    for (j, &i) in atoms.iter().enumerate() {
        let pa = r.product.atom(i);
        match partner[i] {
            Some((ri, rj)) => {
                let ra = r.reactants[ri].atom(rj);
                mappable.push(true);
                origin.push(OriginFeatures {
                    was_mapped: true,
                    charge_delta: ra.charge - pa.charge,
                    h_delta: ra.implicit_h as i32 - pa.implicit_h as i32,
                });
                graph.atom_mut(j).implicit_h = 0;
            }
            None => {
                mappable.push(false);
                origin.push(OriginFeatures::default());
            }
        }
    }
    graph.clear_map_numbers();
    PatternGraph {
        graph,
        mappable,
        origin,
    }
}

fn reactant_pattern(
    r: &ReactionRecord,
    ri: usize,
    atoms: &[usize],
    back: &HashMap<(usize, usize), usize>,
) -> PatternGraph {
    let source: &MolGraph = &r.reactants[ri];
    let mut graph = source.subgraph(atoms);
    let mut mappable = Vec::with_capacity(atoms.len());
    let mut origin = Vec::with_capacity(atoms.len());
    for (l, &j) in atoms.iter().enumerate() {
        let ra = source.atom(j);
        match back.get(&(ri, j)) {
            Some(&pi) => {
                let pa = r.product.atom(pi);
                mappable.push(true);
                origin.push(OriginFeatures {
                    was_mapped: true,
                    charge_delta: ra.charge - pa.charge,
                    h_delta: ra.implicit_h as i32 - pa.implicit_h as i32,
                });
                graph.atom_mut(l).implicit_h = 0;
            }
            None => {
                mappable.push(false);
                origin.push(OriginFeatures::default());
            }
        }
    }
    graph.clear_map_numbers();
    PatternGraph {
        graph,
        mappable,
        origin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{canonical_key, parse_reaction, Element};

    const ESTER: &str = "[CH3:1][OH:2].[Cl:3][C:4](=O)C>>[CH3:1][O:2][C:4](=O)C";

    #[test]
    fn esterification_fixture() {
        let r = parse_reaction(ESTER).unwrap();
        let t = extract_template(&r, 1).unwrap();
        // Center: O2, C4 and the two unmapped acyl atoms; radius 1 adds C1.
        assert_eq!(t.product_pattern.atom_count(), 5);
        assert_eq!(t.reactant_patterns.len(), 2);
        let mapped: Vec<Element> = t
            .mapping
            .iter()
            .map(|&(j, _, _)| t.product_pattern.graph.atom(j).element)
            .collect();
        assert_eq!(mapped.iter().filter(|&&e| e == Element::C).count(), 2);
        assert_eq!(mapped.iter().filter(|&&e| e == Element::O).count(), 1);
        // The acyl chloride pattern keeps its leaving Cl as an unmappable atom.
        let acyl = t
            .reactant_patterns
            .iter()
            .find(|p| p.graph.atoms().iter().any(|a| a.element == Element::Cl))
            .unwrap();
        let cl = acyl
            .graph
            .atoms()
            .iter()
            .position(|a| a.element == Element::Cl)
            .unwrap();
        assert!(!acyl.mappable[cl]);
    }

    #[test]
    fn ester_triples_pair_maps_one_two_four() {
        let r = parse_reaction(ESTER).unwrap();
        let e = extract_with_center(&r, 1).unwrap();
        let maps: BTreeSet<u32> = e
            .template
            .mapping
            .iter()
            .filter_map(|&(j, _, _)| r.product.atom(e.center[j]).map_number)
            .collect();
        assert_eq!(maps, [1, 2, 4].into_iter().collect());
    }

    #[test]
    fn identity_is_rejected() {
        let r = parse_reaction("[CH3:1][OH:2]>>[CH3:1][OH:2]").unwrap();
        assert_eq!(extract_template(&r, 1), Err(ExtractError::NoChange));
        let r = parse_reaction("C>>C").unwrap();
        assert_eq!(extract_template(&r, 1), Err(ExtractError::Unmapped));
    }

    #[test]
    fn radius_grows_pattern() {
        let r = parse_reaction(ESTER).unwrap();
        let a = extract_template(&r, 0).unwrap();
        let b = extract_template(&r, 1).unwrap();
        assert!(b.product_pattern.atom_count() >= a.product_pattern.atom_count());
        assert_eq!(a.product_pattern.atom_count(), 4);
    }

    #[test]
    fn mapping_is_complete() {
        let r = parse_reaction(ESTER).unwrap();
        let t = extract_template(&r, 1).unwrap();
        let mappable: Vec<usize> = t.product_pattern.mappable_atoms().collect();
        let mut covered: Vec<usize> = t.mapping.iter().map(|m| m.0).collect();
        covered.sort_unstable();
        assert_eq!(covered, mappable);
        for &(j, k, l) in &t.mapping {
            assert!(t.reactant_patterns[k].mappable[l]);
            assert_eq!(
                t.product_pattern.graph.atom(j).element,
                t.reactant_patterns[k].graph.atom(l).element
            );
        }
    }

    #[test]
    fn center_points_at_product_atoms() {
        let r = parse_reaction(ESTER).unwrap();
        let e = extract_with_center(&r, 1).unwrap();
        for (j, &i) in e.center.iter().enumerate() {
            assert_eq!(
                e.template.product_pattern.graph.atom(j).element,
                r.product.atom(i).element
            );
        }
        let _ = canonical_key(&r.product);
    }
}
