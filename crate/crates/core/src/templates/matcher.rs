use serde::{Deserialize, Serialize};

use super::PatternGraph;
use crate::molgraph::MolGraph;

/// An embedding of a product pattern: `atom_indices[j]` is the graph atom
/// matched to pattern atom `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Match {
    pub pattern_index: usize,
    pub atom_indices: Vec<usize>,
}

/// All injective embeddings of `p` into `g` that agree on element, charge and
/// aromaticity and map every pattern bond onto a bond of equal order.
/// Hydrogen counts and extra graph bonds are not constrained. Sorted
/// lexicographically.
pub fn find_matches(p: &PatternGraph, g: &MolGraph) -> Vec<Vec<usize>> {
    find_matches_capped(&p.graph, g, usize::MAX).0
}

/// Like [`find_matches`] on a bare graph, stopping after `cap` embeddings.
/// The flag reports whether the cap was hit.
pub fn find_matches_capped(p: &MolGraph, g: &MolGraph, cap: usize) -> (Vec<Vec<usize>>, bool) {
    let n = p.atom_count();
    let mut out = Vec::new();
    if n == 0 || n > g.atom_count() {
        return (out, false);
    }
    let order = search_order(p);
    // For each position, an already-placed pattern neighbor to draw candidates from.
    let anchor: Vec<Option<usize>> = order
        .iter()
        .enumerate()
        .map(|(pos, &v)| {
            p.neighbors(v)
                .iter()
                .map(|&(w, _)| w)
                .find(|w| order[..pos].contains(w))
        })
        .collect();
    let mut assignment = vec![usize::MAX; n];
    let mut used = vec![false; g.atom_count()];
    let mut capped = false;
    extend(
        p,
        g,
        &order,
        &anchor,
        0,
        &mut assignment,
        &mut used,
        &mut out,
        cap,
        &mut capped,
    );
    out.sort();
    (out, capped)
}

/// Connected BFS order starting from the most constrained atom of each
/// component.
fn search_order(p: &MolGraph) -> Vec<usize> {
    let n = p.atom_count();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !placed[i])
            .max_by_key(|&i| (p.degree(i), std::cmp::Reverse(i)))
            .expect("unplaced atom exists");
        placed[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nb: Vec<usize> = p
                .neighbors(v)
                .iter()
                .map(|&(w, _)| w)
                .filter(|&w| !placed[w])
                .collect();
            nb.sort_by_key(|&w| (std::cmp::Reverse(p.degree(w)), w));
            for w in nb {
                placed[w] = true;
                order.push(w);
            }
        }
    }
    order
}

fn compatible(p: &MolGraph, g: &MolGraph, pv: usize, gv: usize) -> bool {
    let a = p.atom(pv);
    let b = g.atom(gv);
    a.element == b.element
        && a.charge == b.charge
        && a.aromatic == b.aromatic
        && g.degree(gv) >= p.degree(pv)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    p: &MolGraph,
    g: &MolGraph,
    order: &[usize],
    anchor: &[Option<usize>],
    pos: usize,
    assignment: &mut [usize],
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
    cap: usize,
    capped: &mut bool,
) {
    if out.len() >= cap {
        *capped = true;
        return;
    }
    if pos == order.len() {
        out.push(assignment.to_vec());
        return;
    }
    let pv = order[pos];
    let candidates: Vec<usize> = match anchor[pos] {
        Some(pa) => g
            .neighbors(assignment[pa])
            .iter()
            .map(|&(w, _)| w)
            .collect(),
        None => (0..g.atom_count()).collect(),
    };
    for gv in candidates {
        if used[gv] || !compatible(p, g, pv, gv) {
            continue;
        }
        let bonds_ok = p.neighbors(pv).iter().all(|&(pw, bi)| {
            let gw = assignment[pw];
            gw == usize::MAX || g.bond_between(gv, gw) == Some(p.bonds()[bi].order)
        });
        if !bonds_ok {
            continue;
        }
        assignment[pv] = gv;
        used[gv] = true;
        extend(p, g, order, anchor, pos + 1, assignment, used, out, cap, capped);
        used[gv] = false;
        assignment[pv] = usize::MAX;
        if *capped {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::OriginFeatures;
    use super::*;
    use crate::molgraph::parse_smiles;

    fn pattern(s: &str) -> PatternGraph {
        let graph = parse_smiles(s).unwrap();
        let n = graph.atom_count();
        PatternGraph {
            graph,
            mappable: vec![true; n],
            origin: vec![OriginFeatures::default(); n],
        }
    }

    #[test]
    fn single_carbon_into_propane() {
        let m = find_matches(&pattern("C"), &parse_smiles("CCC").unwrap());
        assert_eq!(m, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn benzene_into_propane() {
        assert!(find_matches(&pattern("c1ccccc1"), &parse_smiles("CCC").unwrap()).is_empty());
    }

    #[test]
    fn ethane_into_propane() {
        let m = find_matches(&pattern("CC"), &parse_smiles("CCC").unwrap());
        assert_eq!(m, vec![vec![0, 1], vec![1, 0], vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn bond_order_and_aromaticity_respected() {
        let g = parse_smiles("C=CC").unwrap();
        assert_eq!(find_matches(&pattern("C=C"), &g).len(), 2);
        assert!(find_matches(&pattern("c:c"), &g).is_empty());
        let benz = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(find_matches(&pattern("c:c"), &benz).len(), 12);
    }

    #[test]
    fn cap_is_reported() {
        let (m, capped) =
            find_matches_capped(&parse_smiles("C").unwrap(), &parse_smiles("CCCCC").unwrap(), 3);
        assert_eq!(m.len(), 3);
        assert!(capped);
    }
}
