//! Dense node and edge features for the graph encoders.
//!
//! Node layout (width [`NODE_FEATURES`]):
//!
//! | offset | width | content                               |
//! |--------|-------|---------------------------------------|
//! | 0      | 10    | element one-hot                       |
//! | 10     | 7     | degree one-hot, capped at 6           |
//! | 17     | 1     | aromatic flag                         |
//! | 18     | 5     | formal charge one-hot, clamped [-2,2] |
//! | 23     | 5     | hydrogen count one-hot, capped at 4   |
//! | 28     | 16    | random-walk return probabilities      |
//!
//! Edge layout: one-hot bond order (single, double, triple, aromatic).

use super::MolGraph;

pub const RW_STEPS: usize = 16;
pub const NODE_FEATURES: usize = 10 + 7 + 1 + 5 + 5 + RW_STEPS;
pub const EDGE_FEATURES: usize = 4;

/// Row-major feature matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub nodes: Vec<f64>,
    pub node_width: usize,
    /// One row per bond, in bond order.
    pub edges: Vec<f64>,
}

pub fn featurize(g: &MolGraph) -> Features {
    featurize_with(g, RW_STEPS)
}

/// As [`featurize`] with `steps` random-walk columns.
pub fn featurize_with(g: &MolGraph, steps: usize) -> Features {
    let n = g.atom_count();
    let width = NODE_FEATURES - RW_STEPS + steps;
    let pe = random_walk_pe(g, steps);
    let mut nodes = vec![0.0; n * width];
    for i in 0..n {
        let a = g.atom(i);
        let row = &mut nodes[i * width..(i + 1) * width];
        row[a.element.index()] = 1.0;
        row[10 + g.degree(i).min(6)] = 1.0;
        row[17] = if a.aromatic { 1.0 } else { 0.0 };
        row[18 + (a.charge.clamp(-2, 2) + 2) as usize] = 1.0;
        row[23 + (a.implicit_h.min(4)) as usize] = 1.0;
        row[28..28 + steps].copy_from_slice(&pe[i]);
    }
    Features {
        nodes,
        node_width: width,
        edges: edge_features(g),
    }
}

pub(crate) fn edge_features(g: &MolGraph) -> Vec<f64> {
    let mut edges = vec![0.0; g.bond_count() * EDGE_FEATURES];
    for (k, b) in g.bonds().iter().enumerate() {
        edges[k * EDGE_FEATURES + b.order.index()] = 1.0;
    }
    edges
}

/// Return probabilities of uniform random walks: entry `k-1` of atom `v` is
/// the probability that a `k`-step walk from `v` ends at `v`. Isolated atoms
/// get zeros.
pub fn random_walk_pe(g: &MolGraph, steps: usize) -> Vec<Vec<f64>> {
    let n = g.atom_count();
    let mut out = vec![vec![0.0; steps]; n];
    if n == 0 {
        return out;
    }
    // Transition matrix T[i][j] = 1/deg(i) for neighbors.
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        let d = g.degree(i);
        if d == 0 {
            continue;
        }
        for &(j, _) in g.neighbors(i) {
            t[i * n + j] = 1.0 / d as f64;
        }
    }
    let mut power = t.clone();
    for k in 0..steps {
        for i in 0..n {
            out[i][k] = power[i * n + i];
        }
        if k + 1 < steps {
            let mut next = vec![0.0; n * n];
            for i in 0..n {
                for m in 0..n {
                    let p = power[i * n + m];
                    if p == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        next[i * n + j] += p * t[m * n + j];
                    }
                }
            }
            power = next;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    #[test]
    fn walk_single_atom() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(random_walk_pe(&g, 3), vec![vec![0.0, 0.0, 0.0]]);
    }

    #[test]
    fn walk_two_atoms() {
        let g = parse_smiles("CC").unwrap();
        assert_eq!(random_walk_pe(&g, 2), vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn walk_triangle() {
        let g = parse_smiles("C1CC1").unwrap();
        for row in random_walk_pe(&g, 2) {
            assert_eq!(row[0], 0.0);
            assert!((row[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn walk_entries_are_probabilities() {
        let g = parse_smiles("CC(C)c1ccc2ccccc2c1O").unwrap();
        for row in random_walk_pe(&g, RW_STEPS) {
            assert_eq!(row[0], 0.0);
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn methane_and_benzene_features() {
        let f = featurize(&parse_smiles("C").unwrap());
        assert_eq!(f.nodes.len(), NODE_FEATURES);
        assert_eq!(f.nodes[10], 1.0);
        assert_eq!(f.nodes[17], 0.0);
        assert_eq!(f.nodes[23 + 4], 1.0);

        let f = featurize(&parse_smiles("c1ccccc1").unwrap());
        let row = &f.nodes[..NODE_FEATURES];
        assert_eq!(row[crate::molgraph::Element::C.index()], 1.0);
        assert_eq!(row[12], 1.0);
        assert_eq!(row[17], 1.0);
        assert_eq!(f.edges.len(), 6 * EDGE_FEATURES);
        assert_eq!(f.edges[3], 1.0);
    }

    #[test]
    fn width_is_fixed() {
        for s in ["C", "CCO", "c1ccccc1C(=O)[O-]", "[NH4+]"] {
            let f = featurize(&parse_smiles(s).unwrap());
            assert_eq!(f.node_width, NODE_FEATURES);
            assert_eq!(f.nodes.len() % NODE_FEATURES, 0);
        }
    }
}
