use std::collections::HashMap;
use std::fmt::Write as _;

use super::{OriginFeatures, PatternGraph, Template, Triple};
use crate::molgraph::{parse_smiles, write_smiles, MolGraph};

const HEADER: &str = "retrogfn-library v1";

/// A library template: indices into the pattern sets plus corpus frequency.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LibraryTemplate {
    pub product_pattern: usize,
    /// Sorted reactant-pattern indices; `mapping` refers to positions here.
    pub reactant_patterns: Vec<usize>,
    pub mapping: Vec<Triple>,
    pub count: usize,
}

/// Deduplicated product patterns (PPS), reactant patterns (RPS) and the
/// templates they were split from.
#[derive(Clone, Debug, Default)]
pub struct PatternLibrary {
    pub pps: Vec<PatternGraph>,
    pub rps: Vec<PatternGraph>,
    pub templates: Vec<LibraryTemplate>,
    pp_index: HashMap<String, usize>,
    rp_index: HashMap<String, usize>,
    template_index: HashMap<(usize, Vec<usize>, Vec<Triple>), usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("library file: {0}")]
    Io(#[from] std::io::Error),
    #[error("library line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// A template in library coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedTemplate {
    pub product_pattern: usize,
    pub reactant_patterns: Vec<usize>,
    pub mapping: Vec<Triple>,
    /// Source product-pattern atom index to library atom index.
    pub pp_atom_map: Vec<usize>,
}

fn normalize(pp: (usize, Vec<usize>), rps: Vec<(usize, Vec<usize>)>, mapping: &[Triple]) -> ResolvedTemplate {
    let mut order: Vec<usize> = (0..rps.len()).collect();
    order.sort_by_key(|&k| (rps[k].0, k));
    let mut position = vec![0; rps.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let mut triples: Vec<Triple> = mapping
        .iter()
        .map(|&(j, k, l)| (pp.1[j], position[k], rps[k].1[l]))
        .collect();
    triples.sort_unstable();
    ResolvedTemplate {
        product_pattern: pp.0,
        reactant_patterns: order.iter().map(|&k| rps[k].0).collect(),
        mapping: triples,
        pp_atom_map: pp.1,
    }
}

fn format_err(line: usize, msg: impl Into<String>) -> LibraryError {
    LibraryError::Format {
        line,
        msg: msg.into(),
    }
}

/// Splits templates into patterns deduplicated by key, indices assigned in
/// first-seen order.
pub fn build_library(templates: &[Template]) -> PatternLibrary {
    let mut lib = PatternLibrary::default();
    for t in templates {
        lib.add_template(t);
    }
    lib
}

impl PatternLibrary {
    pub fn pp_lookup(&self, p: &PatternGraph) -> Option<usize> {
        self.pp_index.get(&p.key()).copied()
    }

    pub fn rp_lookup(&self, p: &PatternGraph) -> Option<usize> {
        self.rp_index.get(&p.key()).copied()
    }

    /// Returns the set index of `p` and its `old -> canonical` atom map.
    fn intern(set: &mut Vec<PatternGraph>, index: &mut HashMap<String, usize>, p: &PatternGraph) -> (usize, Vec<usize>) {
        // Stored patterns are kept in canonical atom order so that triples
        // from any source refer to the same atoms.
        let (canon, map) = p.canonicalized();
        let key = p.key();
        if let Some(&i) = index.get(&key) {
            return (i, map);
        }
        set.push(canon);
        index.insert(key, set.len() - 1);
        (set.len() - 1, map)
    }

    fn lookup(index: &HashMap<String, usize>, p: &PatternGraph) -> Option<(usize, Vec<usize>)> {
        let i = *index.get(&p.key())?;
        Some((i, p.canonicalized().1))
    }

    /// Expresses a template in library indices without modifying the
    /// library. Also returns the product-pattern atom map (`old -> library`).
    pub fn resolve(&self, t: &Template) -> Option<ResolvedTemplate> {
        let pp = Self::lookup(&self.pp_index, &t.product_pattern)?;
        let rps = t
            .reactant_patterns
            .iter()
            .map(|p| Self::lookup(&self.rp_index, p))
            .collect::<Option<Vec<_>>>()?;
        Some(normalize(pp, rps, &t.mapping))
    }

    /// Adds a template and returns its library index.
    pub fn add_template(&mut self, t: &Template) -> usize {
        let pp = Self::intern(&mut self.pps, &mut self.pp_index, &t.product_pattern);
        let rps: Vec<(usize, Vec<usize>)> = t
            .reactant_patterns
            .iter()
            .map(|p| Self::intern(&mut self.rps, &mut self.rp_index, p))
            .collect();
        let r = normalize(pp, rps, &t.mapping);
        let key = (r.product_pattern, r.reactant_patterns.clone(), r.mapping.clone());
        if let Some(&i) = self.template_index.get(&key) {
            self.templates[i].count += 1;
            return i;
        }
        self.templates.push(LibraryTemplate {
            product_pattern: r.product_pattern,
            reactant_patterns: r.reactant_patterns,
            mapping: r.mapping,
            count: 1,
        });
        self.template_index.insert(key, self.templates.len() - 1);
        self.templates.len() - 1
    }

    pub fn find_template(&self, pp: usize, rps: &[usize], mapping: &[Triple]) -> Option<usize> {
        self.template_index
            .get(&(pp, rps.to_vec(), mapping.to_vec()))
            .copied()
    }

    /// Materializes a library template.
    pub fn template(&self, i: usize) -> Template {
        let t = &self.templates[i];
        Template {
            product_pattern: self.pps[t.product_pattern].clone(),
            reactant_patterns: t
                .reactant_patterns
                .iter()
                .map(|&k| self.rps[k].clone())
                .collect(),
            mapping: t.mapping.clone(),
        }
    }

    /// Text serialization; indices are preserved exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        for (tag, set) in [("pps", &self.pps), ("rps", &self.rps)] {
            let _ = writeln!(s, "{tag}\t{}", set.len());
            for p in set {
                let _ = writeln!(s, "{}", pattern_line(p));
            }
        }
        let _ = writeln!(s, "templates\t{}", self.templates.len());
        for t in &self.templates {
            let rps: Vec<String> = t.reactant_patterns.iter().map(|k| k.to_string()).collect();
            let triples: Vec<String> = t
                .mapping
                .iter()
                .map(|(j, k, l)| format!("{j}:{k}:{l}"))
                .collect();
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}",
                t.product_pattern,
                rps.join(","),
                triples.join(";"),
                t.count
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<PatternLibrary, LibraryError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(format_err(1, format!("expected header '{HEADER}'"))),
        }
        let mut lib = PatternLibrary::default();
        for tag in ["pps", "rps"] {
            let count = section(&mut lines, tag)?;
            for _ in 0..count {
                let (no, line) = lines.next().ok_or(format_err(0, "truncated file"))?;
                let p = parse_pattern_line(line).map_err(|m| format_err(no, m))?;
                let (set, index) = if tag == "pps" {
                    (&mut lib.pps, &mut lib.pp_index)
                } else {
                    (&mut lib.rps, &mut lib.rp_index)
                };
                index.insert(p.key(), set.len());
                set.push(p);
            }
        }
        let count = section(&mut lines, "templates")?;
        for _ in 0..count {
            let (no, line) = lines.next().ok_or(format_err(0, "truncated file"))?;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(format_err(no, "template line needs 4 fields"));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| format_err(no, format!("bad index '{s}'")));
            let pp = num(f[0])?;
            let rps = f[1]
                .split(',')
                .filter(|s| !s.is_empty())
                .map(num)
                .collect::<Result<Vec<_>, _>>()?;
            let mut mapping = Vec::new();
            for t in f[2].split(';').filter(|s| !s.is_empty()) {
                let parts: Vec<usize> = t.split(':').map(num).collect::<Result<_, _>>()?;
                if parts.len() != 3 {
                    return Err(format_err(no, "triple needs j:k:l"));
                }
                mapping.push((parts[0], parts[1], parts[2]));
            }
            let count = num(f[3])?;
            if pp >= lib.pps.len() || rps.iter().any(|&k| k >= lib.rps.len()) {
                return Err(format_err(no, "pattern index out of range"));
            }
            lib.template_index
                .insert((pp, rps.clone(), mapping.clone()), lib.templates.len());
            lib.templates.push(LibraryTemplate {
                product_pattern: pp,
                reactant_patterns: rps,
                mapping,
                count,
            });
        }
        Ok(lib)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), LibraryError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<PatternLibrary, LibraryError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn section<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    tag: &str,
) -> Result<usize, LibraryError> {
    let (no, line) = lines.next().ok_or(format_err(0, format!("missing '{tag}' section")))?;
    let mut f = line.split('\t');
    if f.next() != Some(tag) {
        return Err(format_err(no, format!("expected '{tag}' section")));
    }
    f.next()
        .and_then(|c| c.parse().ok())
        .ok_or(format_err(no, "bad section count"))
}

/// `<smiles with map = index+1>\t<mappable indices>\t<was_mapped:dq:dh;...>`
fn pattern_line(p: &PatternGraph) -> String {
    let mut g = p.graph.clone();
    for i in 0..g.atom_count() {
        g.atom_mut(i).map_number = Some(i as u32 + 1);
    }
    let mappable: Vec<String> = p.mappable_atoms().map(|i| i.to_string()).collect();
    let origin: Vec<String> = p
        .origin
        .iter()
        .map(|o| format!("{}:{}:{}", u8::from(o.was_mapped), o.charge_delta, o.h_delta))
        .collect();
    format!("{}\t{}\t{}", write_smiles(&g), mappable.join(","), origin.join(";"))
}

fn parse_pattern_line(line: &str) -> Result<PatternGraph, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 3 {
        return Err("pattern line needs 3 fields".into());
    }
    let g = parse_smiles(f[0]).map_err(|e| e.to_string())?;
    let n = g.atom_count();
    let mut order = vec![usize::MAX; n];
    for (i, a) in g.atoms().iter().enumerate() {
        let m = a.map_number.ok_or("pattern atom without index")? as usize;
        if m == 0 || m > n || order[m - 1] != usize::MAX {
            return Err("pattern atom indices must be 1..n".into());
        }
        order[m - 1] = i;
    }
    let mut graph: MolGraph = g.permuted(&order);
    graph.clear_map_numbers();
    let mut mappable = vec![false; n];
    for s in f[1].split(',').filter(|s| !s.is_empty()) {
        let i: usize = s.parse().map_err(|_| format!("bad mappable index '{s}'"))?;
        *mappable.get_mut(i).ok_or("mappable index out of range")? = true;
    }
    let origin = f[2]
        .split(';')
        .map(|o| {
            let p: Vec<&str> = o.split(':').collect();
            if p.len() != 3 {
                return Err(format!("bad origin record '{o}'"));
            }
            Ok(OriginFeatures {
                was_mapped: p[0] == "1",
                charge_delta: p[1].parse().map_err(|_| format!("bad delta '{o}'"))?,
                h_delta: p[2].parse().map_err(|_| format!("bad delta '{o}'"))?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if origin.len() != n {
        return Err("origin record count differs from atom count".into());
    }
    Ok(PatternGraph {
        graph,
        mappable,
        origin,
    })
}

#[cfg(test)]
mod tests {
    use super::super::extract_template;
    use super::*;
    use crate::molgraph::parse_reaction;

    const ESTER: &str = "[CH3:1][OH:2].[Cl:3][C:4](=O)C>>[CH3:1][O:2][C:4](=O)C";
    const ESTER2: &str = "[CH3:1][OH:2].[Br:3][C:4](=O)C>>[CH3:1][O:2][C:4](=O)C";

    #[test]
    fn duplicates_collapse() {
        let t = extract_template(&parse_reaction(ESTER).unwrap(), 1).unwrap();
        let one = build_library(std::slice::from_ref(&t));
        let two = build_library(&[t.clone(), t]);
        assert_eq!(one.pps.len(), two.pps.len());
        assert_eq!(one.rps.len(), two.rps.len());
        assert_eq!(two.templates.len(), 1);
        assert_eq!(two.templates[0].count, 2);
    }

    #[test]
    fn shared_product_pattern() {
        let a = extract_template(&parse_reaction(ESTER).unwrap(), 1).unwrap();
        let b = extract_template(&parse_reaction(ESTER2).unwrap(), 1).unwrap();
        let lib = build_library(&[a, b]);
        assert_eq!(lib.pps.len(), 1);
        assert_eq!(lib.rps.len(), 3);
        assert_eq!(lib.templates.len(), 2);
    }

    #[test]
    fn text_round_trip_keeps_indices() {
        let a = extract_template(&parse_reaction(ESTER).unwrap(), 1).unwrap();
        let b = extract_template(&parse_reaction(ESTER2).unwrap(), 1).unwrap();
        let lib = build_library(&[a, b]);
        let back = PatternLibrary::from_text(&lib.to_text()).unwrap();
        for (x, y) in back.pps.iter().chain(&back.rps).zip(lib.pps.iter().chain(&lib.rps)) {
            assert_eq!(x.graph.atoms(), y.graph.atoms());
            assert_eq!(x.mappable, y.mappable);
            assert_eq!(x.origin, y.origin);
            assert_eq!(x.key(), y.key());
        }
        assert_eq!(back.templates, lib.templates);
        assert_eq!(back.to_text(), lib.to_text());
    }

    #[test]
    fn bad_header_rejected() {
        assert!(PatternLibrary::from_text("nope\n").is_err());
    }
}
