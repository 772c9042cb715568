use std::collections::BTreeMap;

use super::{find_matches, PatternGraph, Template, Triple};
use crate::molgraph::{canonical_key, Atom, BondOrder, MolGraph};

/// Upper bound on embedding combinations tried by forward application.
const MAX_COMBINATIONS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("match does not fit the product pattern")]
    BadMatch,
    #[error("valence violated at atom {0} after rewrite")]
    Valence(usize),
    #[error("hydrogen count would become negative at atom {0}")]
    NegativeHydrogens(usize),
    #[error("aromatic flag inconsistent with bonds at atom {0}")]
    Aromaticity(usize),
    #[error("deleted atom {0} is still bonded outside the template")]
    Dangling(usize),
    #[error("rewrite creates a bond that already exists between {0} and {1}")]
    BondClash(usize, usize),
}

/// Backward application of a full template at `m` (product atom per pattern
/// atom). Returns one graph per connected reactant.
pub fn apply_template(t: &Template, g: &MolGraph, m: &[usize]) -> Result<Vec<MolGraph>, ApplyError> {
    let rps: Vec<&PatternGraph> = t.reactant_patterns.iter().collect();
    apply_parts(&t.product_pattern, &rps, &t.mapping, g, m)
}

/// Backward application from parts, as composed by the environment.
pub fn apply_parts(
    pp: &PatternGraph,
    rps: &[&PatternGraph],
    mapping: &[Triple],
    g: &MolGraph,
    m: &[usize],
) -> Result<Vec<MolGraph>, ApplyError> {
    if m.len() != pp.atom_count() {
        return Err(ApplyError::BadMatch);
    }
    let mut work = Rewrite::new(g);
    let mut image_of_rp: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut pp_mapped = vec![false; pp.atom_count()];
    for &(j, k, l) in mapping {
        image_of_rp.insert((k, l), m[j]);
        pp_mapped[j] = true;
        let source = &rps[k].graph;
        let o = rps[k].origin[l];
        let atom = &mut work.atoms[m[j]];
        atom.charge += o.charge_delta;
        let h = atom.implicit_h as i32 + o.h_delta;
        if h < 0 {
            return Err(ApplyError::NegativeHydrogens(m[j]));
        }
        atom.implicit_h = h as u32;
        atom.aromatic = source.atom(l).aromatic;
        work.touched.push(m[j]);
    }
    for b in pp.graph.bonds() {
        work.remove_bond(m[b.a], m[b.b]);
    }
    for (k, rp) in rps.iter().enumerate() {
        for l in 0..rp.atom_count() {
            if !image_of_rp.contains_key(&(k, l)) {
                let mut fresh = rp.graph.atom(l).clone();
                fresh.map_number = None;
                let idx = work.add_atom(fresh);
                if rp.origin[l].was_mapped {
                    work.fill_h.push(idx);
                }
                image_of_rp.insert((k, l), idx);
            }
        }
        for b in rp.graph.bonds() {
            let x = image_of_rp[&(k, b.a)];
            let y = image_of_rp[&(k, b.b)];
            work.add_bond(x, y, b.order)?;
        }
    }
    for (j, &mapped) in pp_mapped.iter().enumerate() {
        if !mapped {
            work.delete(m[j]);
        }
    }
    let out = work.finish()?;
    Ok(out.fragments())
}

/// Forward application: embeds every reactant pattern disjointly into the
/// reactant set and rewrites to the product pattern. Distinct products in
/// canonical-key order.
pub fn forward_apply(t: &Template, reactants: &[MolGraph]) -> Vec<MolGraph> {
    let rps: Vec<&PatternGraph> = t.reactant_patterns.iter().collect();
    forward_apply_parts(&t.product_pattern, &rps, &t.mapping, reactants)
}

pub fn forward_apply_parts(
    pp: &PatternGraph,
    rps: &[&PatternGraph],
    mapping: &[Triple],
    reactants: &[MolGraph],
) -> Vec<MolGraph> {
    let union = MolGraph::union(reactants);
    let embeddings: Vec<Vec<Vec<usize>>> = rps.iter().map(|p| find_matches(p, &union)).collect();
    if embeddings.iter().any(|e| e.is_empty()) {
        return Vec::new();
    }
    let mut products: BTreeMap<String, MolGraph> = BTreeMap::new();
    let mut choice = vec![0usize; rps.len()];
    let mut tried = 0usize;
    'outer: loop {
        tried += 1;
        if tried > MAX_COMBINATIONS {
            break;
        }
        let picked: Vec<&Vec<usize>> = choice
            .iter()
            .enumerate()
            .map(|(k, &c)| &embeddings[k][c])
            .collect();
        if disjoint(&picked) {
            if let Ok(p) = forward_rewrite(pp, rps, mapping, &union, &picked) {
                products.entry(canonical_key(&p)).or_insert(p);
            }
        }
        // Odometer increment.
        for k in (0..choice.len()).rev() {
            choice[k] += 1;
            if choice[k] < embeddings[k].len() {
                continue 'outer;
            }
            choice[k] = 0;
        }
        break;
    }
    products.into_values().collect()
}

fn disjoint(picked: &[&Vec<usize>]) -> bool {
    let mut seen = std::collections::HashSet::new();
    picked.iter().all(|e| e.iter().all(|&a| seen.insert(a)))
}

fn forward_rewrite(
    pp: &PatternGraph,
    rps: &[&PatternGraph],
    mapping: &[Triple],
    union: &MolGraph,
    picked: &[&Vec<usize>],
) -> Result<MolGraph, ApplyError> {
    let mut work = Rewrite::new(union);
    let mut image_of_pp = vec![usize::MAX; pp.atom_count()];
    let mut rp_mapped: Vec<Vec<bool>> = rps.iter().map(|p| vec![false; p.atom_count()]).collect();
    for &(j, k, l) in mapping {
        let idx = picked[k][l];
        image_of_pp[j] = idx;
        rp_mapped[k][l] = true;
        let o = rps[k].origin[l];
        let atom = &mut work.atoms[idx];
        atom.charge -= o.charge_delta;
        let h = atom.implicit_h as i32 - o.h_delta;
        if h < 0 {
            return Err(ApplyError::NegativeHydrogens(idx));
        }
        atom.implicit_h = h as u32;
        atom.aromatic = pp.graph.atom(j).aromatic;
        work.touched.push(idx);
    }
    for (k, rp) in rps.iter().enumerate() {
        for b in rp.graph.bonds() {
            work.remove_bond(picked[k][b.a], picked[k][b.b]);
        }
    }
    for (j, slot) in image_of_pp.iter_mut().enumerate() {
        if *slot == usize::MAX {
            let mut fresh: Atom = pp.graph.atom(j).clone();
            fresh.map_number = None;
            *slot = work.add_atom(fresh);
            if pp.origin[j].was_mapped {
                work.fill_h.push(*slot);
            }
        }
    }
    for b in pp.graph.bonds() {
        work.add_bond(image_of_pp[b.a], image_of_pp[b.b], b.order)?;
    }
    for (k, flags) in rp_mapped.iter().enumerate() {
        for (l, &mapped) in flags.iter().enumerate() {
            if !mapped {
                work.delete(picked[k][l]);
            }
        }
    }
    let anchors: Vec<usize> = image_of_pp.clone();
    let full = work.finish_with_anchors(&anchors)?;
    Ok(full)
}

/// Mutable working copy of a graph for template rewrites.
struct Rewrite {
    atoms: Vec<Atom>,
    bonds: BTreeMap<(usize, usize), BondOrder>,
    deleted: Vec<bool>,
    touched: Vec<usize>,
    /// Fresh atoms whose stored H is relative; they get default H instead.
    fill_h: Vec<usize>,
}

impl Rewrite {
    fn new(g: &MolGraph) -> Self {
        let mut bonds = BTreeMap::new();
        for b in g.bonds() {
            bonds.insert((b.a.min(b.b), b.a.max(b.b)), b.order);
        }
        Rewrite {
            atoms: g
                .atoms()
                .iter()
                .map(|a| Atom {
                    map_number: None,
                    ..a.clone()
                })
                .collect(),
            bonds,
            deleted: vec![false; g.atom_count()],
            touched: Vec::new(),
            fill_h: Vec::new(),
        }
    }

    fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.deleted.push(false);
        self.touched.push(self.atoms.len() - 1);
        self.atoms.len() - 1
    }

    fn remove_bond(&mut self, a: usize, b: usize) {
        self.bonds.remove(&(a.min(b), a.max(b)));
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<(), ApplyError> {
        let key = (a.min(b), a.max(b));
        if a == b || self.bonds.contains_key(&key) {
            return Err(ApplyError::BondClash(key.0, key.1));
        }
        self.bonds.insert(key, order);
        self.touched.push(a);
        self.touched.push(b);
        Ok(())
    }

    fn delete(&mut self, a: usize) {
        self.deleted[a] = true;
    }

    fn build(&self) -> Result<(MolGraph, Vec<usize>), ApplyError> {
        for (&(a, b), _) in &self.bonds {
            match (self.deleted[a], self.deleted[b]) {
                (true, false) => return Err(ApplyError::Dangling(a)),
                (false, true) => return Err(ApplyError::Dangling(b)),
                _ => {}
            }
        }
        let mut index = vec![usize::MAX; self.atoms.len()];
        let mut g = MolGraph::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if !self.deleted[i] {
                index[i] = g.add_atom(atom.clone());
            }
        }
        for (&(a, b), &order) in &self.bonds {
            if !self.deleted[a] {
                g.add_bond(index[a], index[b], order)
                    .expect("bond map holds unique pairs");
            }
        }
        for &t in &self.fill_h {
            let v = index[t];
            g.atom_mut(v).implicit_h = 0;
            let h = g.default_hydrogens(v);
            g.atom_mut(v).implicit_h = h;
        }
        for &t in &self.touched {
            if self.deleted[t] {
                continue;
            }
            let v = index[t];
            if !g.valence_ok(v) {
                return Err(ApplyError::Valence(t));
            }
            let aromatic_bonds = g
                .neighbors(v)
                .iter()
                .filter(|&&(_, bi)| g.bonds()[bi].order == BondOrder::Aromatic)
                .count();
            if g.atom(v).aromatic != (aromatic_bonds > 0) {
                return Err(ApplyError::Aromaticity(t));
            }
        }
        Ok((g, index))
    }

    fn finish(self) -> Result<MolGraph, ApplyError> {
        self.build().map(|(g, _)| g)
    }

    /// The union of connected components that contain any anchor atom.
    fn finish_with_anchors(self, anchors: &[usize]) -> Result<MolGraph, ApplyError> {
        let (g, index) = self.build()?;
        let comps = g.components();
        let mut keep = Vec::new();
        for comp in comps {
            if anchors
                .iter()
                .any(|&a| index[a] != usize::MAX && comp.contains(&index[a]))
            {
                keep.extend(comp);
            }
        }
        keep.sort_unstable();
        Ok(g.subgraph(&keep))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{extract_with_center, OriginFeatures};
    use super::*;
    use crate::molgraph::{parse_reaction, parse_smiles, reactant_set_key};

    const ESTER: &str = "[CH3:1][OH:2].[Cl:3][C:4](=O)C>>[CH3:1][O:2][C:4](=O)C";

    #[test]
    fn extracted_template_reproduces_reactants() {
        let r = parse_reaction(ESTER).unwrap();
        let e = extract_with_center(&r, 1).unwrap();
        let out = apply_template(&e.template, &r.product, &e.center).unwrap();
        assert_eq!(reactant_set_key(&out), reactant_set_key(&r.reactants));
    }

    #[test]
    fn forward_contains_original_product() {
        let r = parse_reaction(ESTER).unwrap();
        let e = extract_with_center(&r, 1).unwrap();
        let reactants = apply_template(&e.template, &r.product, &e.center).unwrap();
        let products = forward_apply(&e.template, &reactants);
        let want = canonical_key(&r.product);
        assert!(products.iter().any(|p| canonical_key(p) == want));
    }

    #[test]
    fn identity_template() {
        let g = parse_smiles("CCO").unwrap();
        let n = g.atom_count();
        let mut pg = g.clone();
        for i in 0..n {
            pg.atom_mut(i).implicit_h = 0;
        }
        let pattern = PatternGraph {
            graph: pg,
            mappable: vec![true; n],
            origin: vec![
                OriginFeatures {
                    was_mapped: true,
                    ..Default::default()
                };
                n
            ],
        };
        let t = Template {
            product_pattern: pattern.clone(),
            reactant_patterns: vec![pattern],
            mapping: (0..n).map(|j| (j, 0, j)).collect(),
        };
        let out = apply_template(&t, &g, &[0, 1, 2]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(canonical_key(&out[0]), canonical_key(&g));
    }

    #[test]
    fn two_reactant_patterns_give_two_fragments() {
        let r = parse_reaction("[CH3:1][C:2](=[O:3])O.[NH2:4][CH3:5]>>[CH3:1][C:2](=[O:3])[NH:4][CH3:5]")
            .unwrap();
        let e = extract_with_center(&r, 1).unwrap();
        assert_eq!(e.template.reactant_patterns.len(), 2);
        let out = apply_template(&e.template, &r.product, &e.center).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn no_match_no_products() {
        let r = parse_reaction(ESTER).unwrap();
        let e = extract_with_center(&r, 1).unwrap();
        assert!(forward_apply(&e.template, &[parse_smiles("CCC").unwrap()]).is_empty());
    }

    #[test]
    fn symmetric_reactant_dedups_products() {
        // Acylating either methyl of dimethylamine yields the same amide.
        let r = parse_reaction("[CH3:1][C:2](=[O:3])Cl.[NH:4]([CH3:5])[CH3:6]>>[CH3:1][C:2](=[O:3])[N:4]([CH3:5])[CH3:6]")
            .unwrap();
        let e = extract_with_center(&r, 0).unwrap();
        let products = forward_apply(&e.template, &r.reactants);
        assert_eq!(products.len(), 1);
        assert_eq!(canonical_key(&products[0]), canonical_key(&r.product));
    }

    #[test]
    fn dangling_attachment_rejected() {
        // Pattern deletes an unmapped atom that still has an outside neighbor.
        let g = parse_smiles("CCO").unwrap();
        let mut pg = parse_smiles("CO").unwrap();
        pg.atom_mut(0).implicit_h = 0;
        let pp = PatternGraph {
            graph: pg.clone(),
            mappable: vec![false, true],
            origin: vec![
                OriginFeatures::default(),
                OriginFeatures {
                    was_mapped: true,
                    ..Default::default()
                },
            ],
        };
        let rp = PatternGraph {
            graph: parse_smiles("[O]").unwrap(),
            mappable: vec![true],
            origin: vec![OriginFeatures {
                was_mapped: true,
                h_delta: 1,
                ..Default::default()
            }],
        };
        let err = apply_parts(&pp, &[&rp], &[(1, 0, 0)], &g, &[1, 2]).unwrap_err();
        assert_eq!(err, ApplyError::Dangling(1));
    }
}
