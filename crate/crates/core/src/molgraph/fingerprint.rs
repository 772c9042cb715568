use super::MolGraph;

pub const FP_BITS: usize = 1024;
/// Longest path, in bonds.
const MAX_PATH_BONDS: usize = 4;

/// Hashed linear-path fingerprint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    words: [u64; FP_BITS / 64],
}

impl Fingerprint {
    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn count(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    fn and_count(&self, other: &Fingerprint) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    fn or_count(&self, other: &Fingerprint) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones())
            .sum()
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn atom_label(g: &MolGraph, i: usize) -> String {
    let a = g.atom(i);
    format!(
        "{}{}{}",
        a.element.symbol(),
        if a.aromatic { "a" } else { "" },
        a.charge
    )
}

/// Sets one bit per simple path of 0..=4 bonds. A path and its reverse hash
/// to the same bit.
pub fn fingerprint(g: &MolGraph) -> Fingerprint {
    let mut fp = Fingerprint {
        words: [0; FP_BITS / 64],
    };
    let labels: Vec<String> = (0..g.atom_count()).map(|i| atom_label(g, i)).collect();
    let mut path = Vec::with_capacity(MAX_PATH_BONDS + 1);
    for start in 0..g.atom_count() {
        path.clear();
        path.push(start);
        walk(g, &labels, &mut path, &mut fp);
    }
    fp
}

fn walk(g: &MolGraph, labels: &[String], path: &mut Vec<usize>, fp: &mut Fingerprint) {
    let forward = describe(g, labels, path, false);
    let backward = describe(g, labels, path, true);
    let text = forward.min(backward);
    fp.set((fnv1a(text.as_bytes()) % FP_BITS as u64) as usize);
    if path.len() > MAX_PATH_BONDS {
        return;
    }
    let last = *path.last().expect("non-empty path");
    for &(w, _) in g.neighbors(last) {
        if !path.contains(&w) {
            path.push(w);
            walk(g, labels, path, fp);
            path.pop();
        }
    }
}

fn describe(g: &MolGraph, labels: &[String], path: &[usize], reverse: bool) -> String {
    let seq: Vec<usize> = if reverse {
        path.iter().rev().copied().collect()
    } else {
        path.to_vec()
    };
    let mut s = labels[seq[0]].clone();
    for w in seq.windows(2) {
        let order = g.bond_between(w[0], w[1]).expect("path follows bonds");
        s.push(order.symbol());
        s.push_str(&labels[w[1]]);
    }
    s
}

/// Jaccard index of the two path fingerprints. Two empty fingerprints are
/// treated as identical.
pub fn tanimoto(a: &MolGraph, b: &MolGraph) -> f64 {
    tanimoto_fp(&fingerprint(a), &fingerprint(b))
}

pub fn tanimoto_fp(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let union = a.or_count(b);
    if union == 0 {
        return 1.0;
    }
    a.and_count(b) as f64 / union as f64
}
