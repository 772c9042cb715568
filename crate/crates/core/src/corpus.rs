//! Synthetic atom-mapped reaction corpus built from hand-written reaction
//! families, plus the reader for corpus files.
//!
//! Building blocks mark their reactive atom with map number 1 and the atoms
//! that leave with map number 2. A reaction bonds the two reactive atoms,
//! drops every leaving atom together with whatever hangs off it, and resets
//! hydrogen counts on the reactive atoms.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::molgraph::{parse_reaction, parse_smiles, BondOrder, MolGraph, ReactionError, ReactionRecord};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ReactionError,
    },
    #[error("building block {0:?}: {1}")]
    Block(String, String),
}

/// Text before a whitespace-led `#` comment. A bare `#` is a triple bond.
pub fn strip_comment(line: &str) -> &str {
    let line = line.trim();
    if line.starts_with('#') {
        return "";
    }
    line.char_indices()
        .find(|&(i, c)| c == '#' && line[..i].ends_with(char::is_whitespace))
        .map_or(line, |(i, _)| line[..i].trim_end())
}

/// Reaction lines of a corpus file. Blank lines and comments are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<ReactionRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        out.push(parse_reaction(line).map_err(|source| CorpusError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<ReactionRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

struct Family {
    name: &'static str,
    first: &'static [&'static str],
    second: &'static [&'static str],
}

const ACIDS: &[&str] = &[
    "[C:1](=O)([OH:2])c1ccccc1",
    "[C:1](=O)([OH:2])C",
    "[C:1](=O)([OH:2])CC",
    "[C:1](=O)([OH:2])c1ccc(Cl)cc1",
    "[C:1](=O)([OH:2])c1ccncc1",
    "[C:1](=O)([OH:2])C1CC1",
    "[C:1](=O)([OH:2])Cc1ccccc1",
    "[C:1](=O)([OH:2])c1ccc(C)cc1",
    "[C:1](=O)([OH:2])C(C)C",
    "[C:1](=O)([OH:2])c1ccc(F)cc1",
];

const AMINES: &[&str] = &[
    "[NH2:1]C",
    "[NH2:1]CC",
    "[NH2:1]c1ccccc1",
    "[NH:1]1CCCC1",
    "[NH:1]1CCOCC1",
    "[NH2:1]Cc1ccccc1",
    "[NH:1](C)C",
    "[NH2:1]C1CCCCC1",
    "[NH2:1]c1ccc(F)cc1",
    "[NH2:1]CC(C)C",
];

const SECONDARY_AMINES: &[&str] = &[
    "[NH:1]1CCCC1",
    "[NH:1]1CCOCC1",
    "[NH:1](C)C",
    "[NH:1]1CCCCC1",
    "[NH:1](C)Cc1ccccc1",
    "[NH:1](CC)CC",
];

const ALCOHOLS: &[&str] = &[
    "[OH:1]C",
    "[OH:1]CC",
    "[OH:1]C(C)C",
    "[OH:1]Cc1ccccc1",
    "[OH:1]C1CCCC1",
    "[OH:1]CC(C)C",
    "[OH:1]CCC",
];

const PHENOLS: &[&str] = &[
    "[OH:1]c1ccccc1",
    "[OH:1]c1ccc(C)cc1",
    "[OH:1]c1ccc(F)cc1",
    "[OH:1]c1ccc(OC)cc1",
    "[OH:1]c1cccnc1",
    "[OH:1]c1ccc(Cl)cc1",
];

const ALKYL_BROMIDES: &[&str] = &[
    "[CH3:1][Br:2]",
    "[CH2:1]([Br:2])C",
    "[CH2:1]([Br:2])c1ccccc1",
    "[CH2:1]([Br:2])CC",
    "[CH2:1]([Br:2])C=C",
    "[CH2:1]([Br:2])c1ccc(F)cc1",
    "[CH2:1]([Br:2])C1CC1",
];

const ARYL_BROMIDES: &[&str] = &[
    "[c:1]1([Br:2])ccccc1",
    "[c:1]1([Br:2])ccc(C)cc1",
    "[c:1]1([Br:2])ccc(F)cc1",
    "[c:1]1([Br:2])cccnc1",
    "[c:1]1([Br:2])ccc(C#N)cc1",
    "[c:1]1([Br:2])ccc(OC)cc1",
];

const BORONIC_ACIDS: &[&str] = &[
    "[c:1]1([B:2](O)O)ccccc1",
    "[c:1]1([B:2](O)O)ccc(C)cc1",
    "[c:1]1([B:2](O)O)cccc(Cl)c1",
    "[c:1]1([B:2](O)O)ccncc1",
    "[c:1]1([B:2](O)O)ccc(OC)cc1",
];

const SULFONYL_CHLORIDES: &[&str] = &[
    "[S:1](=O)(=O)([Cl:2])c1ccccc1",
    "[S:1](=O)(=O)([Cl:2])C",
    "[S:1](=O)(=O)([Cl:2])c1ccc(C)cc1",
    "[S:1](=O)(=O)([Cl:2])CC",
];

const ALDEHYDES: &[&str] = &[
    "[CH:1](=[O:2])c1ccccc1",
    "[CH:1](=[O:2])C",
    "[CH:1](=[O:2])c1ccc(Cl)cc1",
    "[CH:1](=[O:2])C1CCCCC1",
    "[CH:1](=[O:2])c1ccncc1",
];

const ACID_CHLORIDES: &[&str] = &[
    "[C:1](=O)([Cl:2])C",
    "[C:1](=O)([Cl:2])c1ccccc1",
    "[C:1](=O)([Cl:2])CC",
    "[C:1](=O)([Cl:2])c1ccc(F)cc1",
];

const ARYL_IODIDES: &[&str] = &[
    "[c:1]1([I:2])ccccc1",
    "[c:1]1([I:2])ccc(C)cc1",
    "[c:1]1([I:2])ccc(F)cc1",
    "[c:1]1([I:2])cccnc1",
    "[c:1]1([I:2])ccc(OC)cc1",
];

const ALKYNES: &[&str] = &["[CH:1]#CC", "[CH:1]#Cc1ccccc1", "[CH:1]#CCC", "[CH:1]#CC(C)C", "[CH:1]#CCO"];

const BOC_AMINES: &[&str] = &[
    "[NH:1]([C:2](=O)OC(C)(C)C)c1ccccc1",
    "CC[NH:1][C:2](=O)OC(C)(C)C",
    "[N:1]1([C:2](=O)OC(C)(C)C)CCCC1",
    "[N:1]1([C:2](=O)OC(C)(C)C)CCOCC1",
    "[NH:1]([C:2](=O)OC(C)(C)C)Cc1ccccc1",
    "[NH:1]([C:2](=O)OC(C)(C)C)C1CCCCC1",
    "[NH:1]([C:2](=O)OC(C)(C)C)c1ccc(F)cc1",
    "[N:1]1([C:2](=O)OC(C)(C)C)CCCCC1",
];

const METHYL_ESTERS: &[&str] = &[
    "[O:1]([CH3:2])C(=O)c1ccccc1",
    "[O:1]([CH3:2])C(=O)c1ccc(Cl)cc1",
    "[O:1]([CH3:2])C(=O)Cc1ccccc1",
    "[O:1]([CH3:2])C(=O)c1ccncc1",
    "[O:1]([CH3:2])C(=O)C1CCCCC1",
    "[O:1]([CH3:2])C(=O)c1ccc(OC)cc1",
    "[O:1]([CH3:2])C(=O)CCc1ccccc1",
    "[O:1]([CH3:2])C(=O)c1ccc(C)cc1",
];

const NITROARENES: &[&str] = &[
    "[N+:1](=[O:2])([O-:2])c1ccccc1",
    "[N+:1](=[O:2])([O-:2])c1ccc(C)cc1",
    "[N+:1](=[O:2])([O-:2])c1ccc(F)cc1",
    "[N+:1](=[O:2])([O-:2])c1cccnc1",
    "[N+:1](=[O:2])([O-:2])c1ccc(OC)cc1",
    "[N+:1](=[O:2])([O-:2])c1ccc(Cl)cc1",
];

const FAMILIES: &[Family] = &[
    Family { name: "amide_coupling", first: ACIDS, second: AMINES },
    Family { name: "esterification", first: ACIDS, second: ALCOHOLS },
    Family { name: "williamson_ether", first: ALKYL_BROMIDES, second: PHENOLS },
    Family { name: "n_alkylation", first: ALKYL_BROMIDES, second: SECONDARY_AMINES },
    Family { name: "suzuki", first: ARYL_BROMIDES, second: BORONIC_ACIDS },
    Family { name: "sulfonamide", first: SULFONYL_CHLORIDES, second: AMINES },
    Family { name: "reductive_amination", first: ALDEHYDES, second: AMINES },
    Family { name: "acylation", first: ACID_CHLORIDES, second: ALCOHOLS },
    Family { name: "buchwald", first: ARYL_BROMIDES, second: SECONDARY_AMINES },
    Family { name: "sonogashira", first: ARYL_IODIDES, second: ALKYNES },
    Family { name: "boc_deprotection", first: BOC_AMINES, second: &[] },
    Family { name: "ester_hydrolysis", first: METHYL_ESTERS, second: &[] },
    Family { name: "nitro_reduction", first: NITROARENES, second: &[] },
];

/// Reactions drawn per two-component family.
pub const PER_FAMILY: usize = 26;

/// Reactive atom and leaving atoms of a building block, with markers cleared.
fn block(smiles: &str) -> Result<(MolGraph, usize, Vec<usize>), CorpusError> {
    let mut g = parse_smiles(smiles).map_err(|e| CorpusError::Block(smiles.into(), e.to_string()))?;
    let mut site = None;
    let mut leaving = Vec::new();
    for (i, a) in g.atoms().iter().enumerate() {
        match a.map_number {
            Some(1) => site = Some(i),
            Some(2) => leaving.push(i),
            _ => {}
        }
    }
    g.clear_map_numbers();
    let site = site.ok_or_else(|| CorpusError::Block(smiles.into(), "no reactive atom".into()))?;
    Ok((g, site, leaving))
}

/// Atoms reachable from `start` without passing through `site`.
fn hanging(g: &MolGraph, start: usize, site: usize, out: &mut HashSet<usize>) {
    let mut stack = vec![start];
    while let Some(a) = stack.pop() {
        if a == site || !out.insert(a) {
            continue;
        }
        stack.extend(g.neighbors(a).iter().map(|&(n, _)| n));
    }
}

/// One mapped reaction from one or two building blocks.
pub fn assemble(first: &str, second: Option<&str>) -> Result<String, CorpusError> {
    let mut parts = vec![block(first)?];
    if let Some(s) = second {
        parts.push(block(s)?);
    }
    let graphs: Vec<MolGraph> = parts.iter().map(|p| p.0.clone()).collect();
    let mut union = MolGraph::union(&graphs);
    let mut sites = Vec::new();
    let mut removed = HashSet::new();
    let mut offset = 0;
    for (g, site, leaving) in &parts {
        sites.push(site + offset);
        for &l in leaving {
            hanging(&union, l + offset, site + offset, &mut removed);
        }
        offset += g.atom_count();
    }
    let keep: Vec<usize> = (0..union.atom_count()).filter(|i| !removed.contains(i)).collect();
    for (k, &i) in keep.iter().enumerate() {
        union.atom_mut(i).map_number = Some(k as u32 + 1);
    }
    let mut product = union.subgraph(&keep);
    let new_index = |old: usize| keep.iter().position(|&k| k == old).expect("sites are kept");
    let psites: Vec<usize> = sites.iter().map(|&s| new_index(s)).collect();
    if psites.len() == 2 {
        product
            .add_bond(psites[0], psites[1], BondOrder::Single)
            .map_err(|e| CorpusError::Block(first.into(), e.to_string()))?;
    }
    for &s in &psites {
        product.atom_mut(s).charge = 0;
        let h = product.default_hydrogens(s);
        product.atom_mut(s).implicit_h = h;
    }
    // Copy the numbering back onto each reactant.
    let mut offset = 0;
    let mut lhs = Vec::new();
    for (g, _, _) in &parts {
        let mut r = g.clone();
        for i in 0..r.atom_count() {
            r.atom_mut(i).map_number = union.atom(i + offset).map_number;
        }
        offset += g.atom_count();
        lhs.push(crate::molgraph::write_smiles(&r));
    }
    Ok(format!("{}>>{}", lhs.join("."), crate::molgraph::write_smiles(&product)))
}

/// Generated corpus split into train and test lines.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCorpus {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Every family contributes up to [`PER_FAMILY`] reactions; one in five of
/// each family goes to the test split.
pub fn generate_corpus(seed: u64) -> Result<GeneratedCorpus, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seen = HashSet::new();
    for family in FAMILIES {
        let mut pairs: Vec<(&str, Option<&str>)> = if family.second.is_empty() {
            family.first.iter().map(|&a| (a, None)).collect()
        } else {
            family
                .first
                .iter()
                .flat_map(|&a| family.second.iter().map(move |&b| (a, Some(b))))
                .collect()
        };
        pairs.shuffle(&mut rng);
        let mut lines = Vec::new();
        for (a, b) in pairs {
            if lines.len() == PER_FAMILY {
                break;
            }
            let line = assemble(a, b)?;
            let rec = parse_reaction(&line).map_err(|source| CorpusError::Parse { line: 0, source })?;
            if seen.insert(rec.key()) {
                lines.push(format!("{line} # {}", family.name));
            }
        }
        for (i, l) in lines.into_iter().enumerate() {
            if i % 5 == 4 {
                test.push(l);
            } else {
                train.push(l);
            }
        }
    }
    Ok(GeneratedCorpus { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::canonical_key;

    #[test]
    fn comments_need_leading_space() {
        assert_eq!(strip_comment("C#C>>CC # alkyne"), "C#C>>CC");
        assert_eq!(strip_comment("# header"), "");
        assert_eq!(strip_comment("C#N>>C"), "C#N>>C");
    }

    #[test]
    fn amide_assembly() {
        let line = assemble("[C:1](=O)([OH:2])C", Some("[NH2:1]C")).unwrap();
        let r = parse_reaction(&line).unwrap();
        assert_eq!(canonical_key(&r.product), canonical_key(&parse_smiles("CC(=O)NC").unwrap()));
        assert_eq!(r.atom_map.len(), 5);
    }

    #[test]
    fn nitro_reduction_resets_charge() {
        let line = assemble("[N+:1](=[O:2])([O-:2])c1ccccc1", None).unwrap();
        let r = parse_reaction(&line).unwrap();
        assert_eq!(canonical_key(&r.product), canonical_key(&parse_smiles("Nc1ccccc1").unwrap()));
    }

    #[test]
    fn corpus_size_and_determinism() {
        let a = generate_corpus(0).unwrap();
        let b = generate_corpus(0).unwrap();
        assert_eq!(a, b);
        let n = a.train.len() + a.test.len();
        assert!((250..=350).contains(&n), "{n}");
    }
}
