//! Canonical atom ranking by iterative neighborhood refinement, and the SMILES
//! writer built on it.
//!
//! Ranks start from atom invariants and are refined by sorted neighbor ranks
//! until stable. Remaining ties are broken by individualizing each member of
//! the first tied cell in turn and keeping the lexicographically smallest
//! output, up to a fixed leaf budget.

use std::fmt::Write as _;

use super::{BondOrder, MolGraph};

/// Leaves explored in the tie-breaking search before falling back to the
/// first member of each tied cell.
const LEAF_BUDGET: usize = 256;

#[derive(Clone, Copy)]
struct Options<'a> {
    maps: bool,
    labels: Option<&'a [String]>,
}

/// SMILES string including map numbers, canonical for the map-labeled graph.
pub fn write_smiles(g: &MolGraph) -> String {
    canonicalize(
        g,
        Options {
            maps: true,
            labels: None,
        },
    )
    .0
}

/// Canonical key ignoring atom-map numbers: equal iff the graphs are
/// isomorphic with respect to element, charge, aromaticity, hydrogens and
/// bond order.
pub fn canonical_key(g: &MolGraph) -> String {
    canonicalize(
        g,
        Options {
            maps: false,
            labels: None,
        },
    )
    .0
}

/// Canonical string where each atom additionally carries an opaque label.
/// The output is a key, not parseable SMILES.
pub fn canonical_smiles_labeled(g: &MolGraph, labels: &[String]) -> String {
    assert_eq!(labels.len(), g.atom_count());
    canonicalize(
        g,
        Options {
            maps: false,
            labels: Some(labels),
        },
    )
    .0
}

/// Atom indices in canonical order (map numbers ignored, labels respected).
pub fn canonical_order(g: &MolGraph, labels: Option<&[String]>) -> Vec<usize> {
    let ranks = canonicalize(g, Options { maps: false, labels }).1;
    let mut order: Vec<usize> = (0..g.atom_count()).collect();
    order.sort_by_key(|&i| ranks[i]);
    order
}

fn canonicalize(g: &MolGraph, opts: Options<'_>) -> (String, Vec<usize>) {
    let n = g.atom_count();
    if n == 0 {
        return (String::new(), Vec::new());
    }
    let initial = initial_ranks(g, opts);
    let ranks = refine(g, initial);
    let mut best: Option<(String, Vec<usize>)> = None;
    let mut leaves = 0usize;
    search(g, opts, ranks, &mut best, &mut leaves);
    best.expect("at least one leaf")
}

fn search(
    g: &MolGraph,
    opts: Options<'_>,
    ranks: Vec<usize>,
    best: &mut Option<(String, Vec<usize>)>,
    leaves: &mut usize,
) {
    let n = ranks.len();
    // First tied cell: the smallest rank value shared by more than one atom.
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r] += 1;
    }
    let cell = (0..n).find(|&r| counts[r] > 1);
    let Some(cell) = cell else {
        *leaves += 1;
        let s = emit(g, &ranks, opts);
        match best {
            Some((b, _)) if *b <= s => {}
            _ => *best = Some((s, ranks)),
        }
        return;
    };
    let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == cell).collect();
    for (k, &v) in members.iter().enumerate() {
        if k > 0 && *leaves >= LEAF_BUDGET {
            break;
        }
        let mut next = ranks.clone();
        for &u in &members {
            if u != v {
                next[u] = cell + 1;
            }
        }
        let next = refine(g, next);
        search(g, opts, next, best, leaves);
    }
}

fn initial_ranks(g: &MolGraph, opts: Options<'_>) -> Vec<usize> {
    let keys: Vec<(usize, i32, bool, u32, usize, u32, &str)> = (0..g.atom_count())
        .map(|i| {
            let a = g.atom(i);
            (
                a.element.index(),
                a.charge,
                a.aromatic,
                a.implicit_h,
                g.degree(i),
                if opts.maps { a.map_number.unwrap_or(0) } else { 0 },
                opts.labels.map(|l| l[i].as_str()).unwrap_or(""),
            )
        })
        .collect();
    ranks_from_keys(&keys)
}

/// Rank of each item = number of items with a strictly smaller key.
fn ranks_from_keys<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0usize; keys.len()];
    for pos in 1..idx.len() {
        ranks[idx[pos]] = if keys[idx[pos]] == keys[idx[pos - 1]] {
            ranks[idx[pos - 1]]
        } else {
            pos
        };
    }
    ranks
}

fn distinct(ranks: &[usize]) -> usize {
    let mut seen = vec![false; ranks.len()];
    let mut c = 0;
    for &r in ranks {
        if !seen[r] {
            seen[r] = true;
            c += 1;
        }
    }
    c
}

fn refine(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = distinct(&ranks);
    loop {
        if classes == ranks.len() {
            return ranks;
        }
        let keys: Vec<(usize, Vec<(usize, BondOrder)>)> = (0..ranks.len())
            .map(|i| {
                let mut nb: Vec<(usize, BondOrder)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| (ranks[j], g.bonds()[bi].order))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = ranks_from_keys(&keys);
        let c = distinct(&next);
        ranks = next;
        if c == classes {
            return ranks;
        }
        classes = c;
    }
}

/// Writes the graph given a total order (all ranks distinct).
fn emit(g: &MolGraph, ranks: &[usize], opts: Options<'_>) -> String {
    let ring = g.ring_bonds();
    let mut parts: Vec<String> = g
        .components()
        .iter()
        .map(|comp| {
            let root = *comp.iter().min_by_key(|&&i| ranks[i]).expect("non-empty");
            emit_component(g, ranks, &ring, root, opts)
        })
        .collect();
    parts.sort();
    parts.join(".")
}

fn emit_component(
    g: &MolGraph,
    ranks: &[usize],
    ring: &[bool],
    root: usize,
    opts: Options<'_>,
) -> String {
    let n = g.atom_count();
    // Pass 1: DFS tree, children lists and ring-closure pairs.
    let mut visited = vec![false; n];
    let mut order = Vec::new();
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut tree_bond = vec![false; g.bond_count()];
    let mut closures: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (partner, bond)
    dfs(g, ranks, root, &mut visited, &mut order, &mut children, &mut tree_bond);
    let mut position = vec![usize::MAX; n];
    for (p, &v) in order.iter().enumerate() {
        position[v] = p;
    }
    for (bi, bond) in g.bonds().iter().enumerate() {
        if !tree_bond[bi] && position[bond.a] != usize::MAX {
            closures[bond.a].push((bond.b, bi));
            closures[bond.b].push((bond.a, bi));
        }
    }
    for list in closures.iter_mut() {
        list.sort_by_key(|&(p, _)| ranks[p]);
    }

    // Pass 2: emit.
    let mut out = String::new();
    let mut digit_of_bond: Vec<Option<u32>> = vec![None; g.bond_count()];
    let mut free_digits: Vec<bool> = vec![true; 100];
    free_digits[0] = false;
    let mut stack: Vec<Frame> = vec![Frame::Atom(root, None)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Close => out.push(')'),
            Frame::Open => out.push('('),
            Frame::Atom(v, via) => {
                if let Some(bi) = via {
                    push_bond(g, ring, bi, &mut out);
                }
                write_atom(g, v, opts, &mut out);
                for &(_, bi) in &closures[v] {
                    if let Some(d) = digit_of_bond[bi] {
                        // Closing: partner already written.
                        push_bond(g, ring, bi, &mut out);
                        push_digit(d, &mut out);
                        free_digits[d as usize] = true;
                    } else {
                        let d = free_digits
                            .iter()
                            .position(|&f| f)
                            .expect("fewer than 99 open rings") as u32;
                        free_digits[d as usize] = false;
                        digit_of_bond[bi] = Some(d);
                        push_digit(d, &mut out);
                    }
                }
                let kids = &children[v];
                // Push in reverse so the lowest-ranked child is written first;
                // every child except the last goes in a branch.
                for (k, &(child, bi)) in kids.iter().enumerate().rev() {
                    let last = k + 1 == kids.len();
                    if last {
                        stack.push(Frame::Atom(child, Some(bi)));
                    } else {
                        stack.push(Frame::Close);
                        stack.push(Frame::Atom(child, Some(bi)));
                        stack.push(Frame::Open);
                    }
                }
            }
        }
    }
    out
}

enum Frame {
    Atom(usize, Option<usize>),
    Open,
    Close,
}

fn dfs(
    g: &MolGraph,
    ranks: &[usize],
    root: usize,
    visited: &mut [bool],
    order: &mut Vec<usize>,
    children: &mut [Vec<(usize, usize)>],
    tree_bond: &mut [bool],
) {
    // Iterative to survive long chains.
    let mut stack: Vec<(usize, usize)> = vec![(root, usize::MAX)];
    while let Some((v, via)) = stack.pop() {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        order.push(v);
        if via != usize::MAX {
            tree_bond[via] = true;
            let parent = g.bonds()[via].other(v);
            children[parent].push((v, via));
        }
        let mut nb: Vec<(usize, usize)> = g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&(w, _)| !visited[w])
            .collect();
        nb.sort_by_key(|&(w, _)| std::cmp::Reverse(ranks[w]));
        stack.extend(nb);
    }
}

fn push_digit(d: u32, out: &mut String) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn push_bond(g: &MolGraph, ring: &[bool], bi: usize, out: &mut String) {
    let bond = g.bonds()[bi];
    let both_aromatic = g.atom(bond.a).aromatic && g.atom(bond.b).aromatic;
    let implicit = if both_aromatic && ring[bi] {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    };
    if bond.order != implicit {
        out.push(bond.order.symbol());
    }
}

fn write_atom(g: &MolGraph, i: usize, opts: Options<'_>, out: &mut String) {
    let a = g.atom(i);
    let map = if opts.maps { a.map_number } else { None };
    let sym = if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    let plain = a.charge == 0
        && map.is_none()
        && a.implicit_h == g.default_hydrogens(i)
        && (!a.aromatic || a.element.can_be_aromatic());
    if plain {
        out.push_str(&sym);
    } else {
        out.push('[');
        out.push_str(&sym);
        match a.implicit_h {
            0 => {}
            1 => out.push('H'),
            h => {
                let _ = write!(out, "H{h}");
            }
        }
        match a.charge {
            0 => {}
            1 => out.push('+'),
            -1 => out.push('-'),
            c if c > 0 => {
                let _ = write!(out, "+{c}");
            }
            c => {
                let _ = write!(out, "-{}", -c);
            }
        }
        if let Some(m) = map {
            let _ = write!(out, ":{m}");
        }
        out.push(']');
    }
    if let Some(labels) = opts.labels {
        let _ = write!(out, "{{{}}}", labels[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    fn key(s: &str) -> String {
        canonical_key(&parse_smiles(s).unwrap())
    }

    #[test]
    fn single_carbon() {
        assert_eq!(write_smiles(&parse_smiles("C").unwrap()), "C");
    }

    #[test]
    fn isomorphic_inputs_share_output() {
        let a = write_smiles(&parse_smiles("OCC").unwrap());
        let b = write_smiles(&parse_smiles("CCO").unwrap());
        assert_eq!(a, b);
        assert_ne!(key("CCO"), key("CCN"));
    }

    #[test]
    fn benzene_round_trip() {
        let s = write_smiles(&parse_smiles("c1ccccc1").unwrap());
        assert_eq!(s.chars().filter(|c| *c == 'c').count(), 6);
        assert_eq!(key(&s), key("c1ccccc1"));
    }

    #[test]
    fn chain_permutations_share_key() {
        // All 24 atom orderings of a labeled 4-atom chain C-C-N-O.
        let g = parse_smiles("CCNO").unwrap();
        let expected = canonical_key(&g);
        let mut perms = Vec::new();
        permutations(&mut vec![0, 1, 2, 3], 0, &mut perms);
        assert_eq!(perms.len(), 24);
        for p in perms {
            assert_eq!(canonical_key(&g.permuted(&p)), expected);
        }
    }

    fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == v.len() {
            out.push(v.clone());
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permutations(v, k + 1, out);
            v.swap(k, i);
        }
    }

    #[test]
    fn maps_ignored_by_key_but_kept_by_writer() {
        let a = parse_smiles("[CH3:1][OH:2]").unwrap();
        assert_eq!(canonical_key(&a), key("CO"));
        let s = write_smiles(&a);
        assert!(s.contains(":1") && s.contains(":2"));
        assert_eq!(write_smiles(&parse_smiles(&s).unwrap()), s);
    }

    #[test]
    fn charges_and_hydrogens_survive() {
        for s in [
            "C[N+](=O)[O-]",
            "c1cc[nH]c1",
            "[NH4+]",
            "O=C(O)c1ccccc1",
            "CC(C)(C)OC(=O)NC",
            "c1ccc2ccccc2c1",
            "C1CC2CCC1CC2",
            "c1ccccc1-c1ccccc1",
            "c:c",
            "[CH2]C",
        ] {
            let g = parse_smiles(s).unwrap();
            let w = write_smiles(&g);
            let back = parse_smiles(&w).unwrap_or_else(|e| panic!("{s} -> {w}: {e}"));
            assert_eq!(canonical_key(&back), canonical_key(&g), "{s} -> {w}");
            assert_eq!(back.atoms().iter().map(|a| a.implicit_h).sum::<u32>(),
                       g.atoms().iter().map(|a| a.implicit_h).sum::<u32>());
        }
    }

    #[test]
    fn symmetric_molecules_are_stable() {
        let a = key("CC(C)(C)c1ccc(cc1)C(C)(C)C");
        let b = key("c1cc(C(C)(C)C)ccc1C(C)(C)C");
        assert_eq!(a, b);
    }

    #[test]
    fn fragment_order_is_canonical() {
        assert_eq!(key("CCO.N"), key("N.OCC"));
    }

    #[test]
    fn labels_distinguish() {
        let g = parse_smiles("CC").unwrap();
        let a = canonical_smiles_labeled(&g, &["x".into(), "y".into()]);
        let b = canonical_smiles_labeled(&g, &["y".into(), "x".into()]);
        let c = canonical_smiles_labeled(&g, &["x".into(), "x".into()]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
