use super::MolGraph;

/// Ring-system framework: repeatedly deletes acyclic atoms of degree at most
/// one until nothing changes. Hydrogen counts of the surviving attachment
/// atoms absorb the removed bonds, so toluene reduces to benzene. Acyclic
/// molecules reduce to the empty graph.
pub fn scaffold(g: &MolGraph) -> MolGraph {
    let n = g.atom_count();
    let ring = g.ring_atoms();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let mut extra_h = vec![0u32; n];
    let mut queue: Vec<usize> = (0..n).filter(|&i| !ring[i] && degree[i] <= 1).collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(w, bi) in g.neighbors(v) {
            if alive[w] {
                degree[w] -= 1;
                extra_h[w] += g.bonds()[bi].order.valence();
                if !ring[w] && degree[w] <= 1 {
                    queue.push(w);
                }
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let mut out = g.subgraph(&keep);
    for (new, &old) in keep.iter().enumerate() {
        out.atom_mut(new).implicit_h += extra_h[old];
        out.atom_mut(new).map_number = None;
    }
    out
}
