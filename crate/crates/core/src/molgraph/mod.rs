//! Molecular graphs: data model, SMILES reading and writing, canonical keys,
//! scaffolds, featurization and path fingerprints.

mod canon;
mod features;
mod fingerprint;
mod reaction;
mod scaffold;
mod smiles;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use canon::{canonical_key, canonical_order, canonical_smiles_labeled, write_smiles};
pub use features::{
    featurize, featurize_with, random_walk_pe, Features, EDGE_FEATURES, NODE_FEATURES, RW_STEPS,
};
pub use fingerprint::{fingerprint, tanimoto, tanimoto_fp, Fingerprint, FP_BITS};
pub use reaction::{parse_reaction, reactant_set_key, reaction_key, ReactionError, ReactionRecord};
pub use scaffold::scaffold;
pub use smiles::{parse_smiles, SmilesError, SmilesErrorKind};

/// Elements accepted by the parser.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn atomic_number(self) -> i32 {
        match self {
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::P => 15,
            Element::S => 16,
            Element::F => 9,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    /// Whether the element may be written in lowercase (aromatic) form.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }

    /// Allowed total valences for this element carrying `charge`, using the
    /// isoelectronic shift (N+ behaves like C, O- like F, and so on).
    pub fn valences(self, charge: i32) -> &'static [u32] {
        let z = self.atomic_number();
        // Heavy halogens behave like Cl.
        let z = match self {
            Element::Br | Element::I => 17,
            _ => z,
        };
        match z - charge {
            3 => &[1],
            4 => &[2],
            5 => &[3],
            6 => &[4],
            7 => &[3, 5],
            8 => &[2],
            9 => &[1],
            10 => &[0],
            13 => &[3],
            14 => &[4],
            15 => &[3, 5],
            16 => &[2, 4, 6],
            17 => &[1, 3, 5, 7],
            18 => &[0],
            _ => &[],
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub charge: i32,
    pub aromatic: bool,
    /// Number of attached hydrogens.
    pub implicit_h: u32,
    pub map_number: Option<u32>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            aromatic: false,
            implicit_h: 0,
            map_number: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn index(self) -> usize {
        self as usize
    }

    /// Integer valence contribution (aromatic bonds are handled separately).
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// An annotated molecular graph. Need not be connected.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Per atom: (neighbor, bond index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("bond endpoints must differ (atom {0})")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("atom index {0} out of range")]
    AtomOutOfRange(usize),
}

impl MolGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, GraphError> {
        if a == b {
            return Err(GraphError::SelfBond(a));
        }
        for &x in &[a, b] {
            if x >= self.atoms.len() {
                return Err(GraphError::AtomOutOfRange(x));
            }
        }
        if self.bond_between(a, b).is_some() {
            return Err(GraphError::DuplicateBond(a.min(b), a.max(b)));
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond { a, b, order });
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Ok(idx)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Neighbors of `i` as (atom, bond index) pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<BondOrder> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, bi)| self.bonds[bi].order)
    }

    /// Sum of bond valences around an atom, with aromatic bonds counted as one
    /// each plus one extra when the atom can accommodate it.
    pub fn bond_valence(&self, i: usize) -> u32 {
        let mut plain = 0;
        let mut aromatic = 0;
        for &(_, bi) in &self.adjacency[i] {
            match self.bonds[bi].order {
                BondOrder::Aromatic => aromatic += 1,
                o => plain += o.valence(),
            }
        }
        let atom = &self.atoms[i];
        let base = plain + aromatic;
        if aromatic == 0 {
            return base;
        }
        let max = atom
            .element
            .valences(atom.charge)
            .iter()
            .copied()
            .max()
            .unwrap_or(0);
        if base + 1 + atom.implicit_h <= max {
            base + 1
        } else {
            base
        }
    }

    /// Default hydrogen count for an atom written without brackets.
    pub fn default_hydrogens(&self, i: usize) -> u32 {
        let atom = &self.atoms[i];
        let mut plain = 0;
        let mut aromatic = 0;
        for &(_, bi) in &self.adjacency[i] {
            match self.bonds[bi].order {
                BondOrder::Aromatic => aromatic += 1,
                o => plain += o.valence(),
            }
        }
        let valences = atom.element.valences(atom.charge);
        let mut used = plain + aromatic;
        if aromatic > 0 {
            let bumped = used + 1;
            if valences.iter().any(|&v| v >= bumped) {
                used = bumped;
            }
        }
        valences
            .iter()
            .copied()
            .find(|&v| v >= used)
            .map(|v| v - used)
            .unwrap_or(0)
    }

    /// Checks every atom's bonds plus hydrogens against its allowed valences.
    pub fn valence_violation(&self) -> Option<usize> {
        (0..self.atoms.len()).find(|&i| !self.valence_ok(i))
    }

    pub fn valence_ok(&self, i: usize) -> bool {
        let atom = &self.atoms[i];
        let max = atom
            .element
            .valences(atom.charge)
            .iter()
            .copied()
            .max();
        match max {
            Some(max) => self.bond_valence(i) + atom.implicit_h <= max,
            None => false,
        }
    }

    /// Connected components as sorted atom index lists, ordered by smallest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &(w, _) in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Induced subgraph on `atoms` (in the given order).
    pub fn subgraph(&self, atoms: &[usize]) -> MolGraph {
        let mut index = vec![usize::MAX; self.atoms.len()];
        let mut g = MolGraph::new();
        for &a in atoms {
            index[a] = g.add_atom(self.atoms[a].clone());
        }
        for bond in &self.bonds {
            let (x, y) = (index[bond.a], index[bond.b]);
            if x != usize::MAX && y != usize::MAX {
                g.add_bond(x, y, bond.order).expect("induced bonds are unique");
            }
        }
        g
    }

    /// Splits into one graph per connected component.
    pub fn fragments(&self) -> Vec<MolGraph> {
        self.components()
            .iter()
            .map(|c| self.subgraph(c))
            .collect()
    }

    /// Disjoint union of graphs.
    pub fn union(parts: &[MolGraph]) -> MolGraph {
        let mut g = MolGraph::new();
        for part in parts {
            let offset = g.atom_count();
            for atom in &part.atoms {
                g.add_atom(atom.clone());
            }
            for bond in &part.bonds {
                g.add_bond(bond.a + offset, bond.b + offset, bond.order)
                    .expect("parts are valid graphs");
            }
        }
        g
    }

    /// Graph with atoms reordered so that new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> MolGraph {
        assert_eq!(order.len(), self.atoms.len());
        self.subgraph(order)
    }

    pub fn clear_map_numbers(&mut self) {
        for atom in &mut self.atoms {
            atom.map_number = None;
        }
    }

    pub fn without_map_numbers(&self) -> MolGraph {
        let mut g = self.clone();
        g.clear_map_numbers();
        g
    }

    /// Bridges (bonds whose removal disconnects their endpoints) are the
    /// non-ring bonds; everything else lies on a cycle.
    pub fn ring_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut in_ring = vec![true; self.bonds.len()];
        let mut time = 0usize;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // Iterative DFS: (vertex, parent bond, next neighbor position).
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = time;
            low[root] = time;
            time += 1;
            while let Some(&mut (v, parent_bond, ref mut pos)) = stack.last_mut() {
                if *pos < self.adjacency[v].len() {
                    let (w, bi) = self.adjacency[v][*pos];
                    *pos += 1;
                    if bi == parent_bond {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = time;
                        low[w] = time;
                        time += 1;
                        stack.push((w, bi, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(u, _, _)) = stack.last() {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            in_ring[parent_bond] = false;
                        }
                    }
                }
            }
        }
        in_ring
    }

    /// Atoms that belong to at least one ring.
    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring = self.ring_bonds();
        let mut out = vec![false; self.atoms.len()];
        for (bond, &r) in self.bonds.iter().zip(&ring) {
            if r {
                out[bond.a] = true;
                out[bond.b] = true;
            }
        }
        out
    }
}

impl fmt::Display for MolGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_smiles(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_bond_detection() {
        let g = parse_smiles("CC1CCC1").unwrap();
        let ring = g.ring_bonds();
        assert_eq!(ring.iter().filter(|&&r| r).count(), 4);
        assert!(!ring[0]);
    }

    #[test]
    fn charged_valences() {
        assert_eq!(Element::N.valences(1), &[4]);
        assert_eq!(Element::O.valences(-1), &[1]);
        assert_eq!(Element::C.valences(-1), &[3, 5]);
        assert_eq!(Element::Br.valences(0), &[1, 3, 5, 7]);
    }

    #[test]
    fn duplicate_and_self_bonds_rejected() {
        let mut g = MolGraph::new();
        let a = g.add_atom(Atom::new(Element::C));
        let b = g.add_atom(Atom::new(Element::C));
        g.add_bond(a, b, BondOrder::Single).unwrap();
        assert_eq!(
            g.add_bond(b, a, BondOrder::Double),
            Err(GraphError::DuplicateBond(0, 1))
        );
        assert_eq!(g.add_bond(a, a, BondOrder::Single), Err(GraphError::SelfBond(0)));
    }
}
