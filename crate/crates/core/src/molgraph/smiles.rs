//! SMILES reader for the organic subset plus bracket atoms with charge,
//! hydrogen count and atom-map class. No stereochemistry or isotopes.

use std::collections::BTreeMap;
use std::fmt;

use super::{Atom, BondOrder, Element, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Empty,
    UnexpectedChar(char),
    UnbalancedBracket,
    UnbalancedBranch,
    UnclosedRing(u32),
    RingBondConflict(u32),
    UnsupportedElement,
    ValenceOverflow,
    DanglingBond,
    DuplicateBond,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    /// Byte offset of the offending token.
    pub offset: usize,
}

impl fmt::Display for SmilesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SmilesErrorKind::Empty => write!(f, "empty SMILES"),
            SmilesErrorKind::UnexpectedChar(c) => {
                write!(f, "unexpected character '{c}' at byte {}", self.offset)
            }
            SmilesErrorKind::UnbalancedBracket => {
                write!(f, "unbalanced bracket atom at byte {}", self.offset)
            }
            SmilesErrorKind::UnbalancedBranch => {
                write!(f, "unbalanced branch parenthesis at byte {}", self.offset)
            }
            SmilesErrorKind::UnclosedRing(d) => {
                write!(f, "ring bond {d} opened at byte {} is never closed", self.offset)
            }
            SmilesErrorKind::RingBondConflict(d) => {
                write!(f, "ring bond {d} closed with conflicting order at byte {}", self.offset)
            }
            SmilesErrorKind::UnsupportedElement => {
                write!(f, "unsupported element at byte {}", self.offset)
            }
            SmilesErrorKind::ValenceOverflow => {
                write!(f, "valence exceeded for atom at byte {}", self.offset)
            }
            SmilesErrorKind::DanglingBond => {
                write!(f, "bond symbol without a following atom at byte {}", self.offset)
            }
            SmilesErrorKind::DuplicateBond => {
                write!(f, "duplicate bond at byte {}", self.offset)
            }
        }
    }
}

impl std::error::Error for SmilesError {}

fn err(kind: SmilesErrorKind, offset: usize) -> SmilesError {
    SmilesError { kind, offset }
}

struct PendingRing {
    atom: usize,
    order: Option<BondOrder>,
    offset: usize,
}

struct ParsedAtom {
    atom: Atom,
    /// Bracket atoms carry an explicit hydrogen count.
    explicit_h: bool,
    offset: usize,
}

/// Parses a SMILES string into a graph. Atom indices follow textual order.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    let bytes = text.as_bytes();
    if bytes.is_empty() {
        return Err(err(SmilesErrorKind::Empty, 0));
    }
    let mut atoms: Vec<ParsedAtom> = Vec::new();
    // (a, b, explicit order, offset)
    let mut bonds: Vec<(usize, usize, Option<BondOrder>, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, PendingRing> = BTreeMap::new();
    let mut branch_stack: Vec<(usize, usize)> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending_bond: Option<(BondOrder, usize)> = None;
    let mut dot_pending = false;
    let mut pos = 0usize;

    while pos < bytes.len() {
        let c = bytes[pos] as char;
        match c {
            '(' => {
                let p = prev.ok_or(err(SmilesErrorKind::UnbalancedBranch, pos))?;
                if pending_bond.is_some() {
                    return Err(err(SmilesErrorKind::DanglingBond, pos));
                }
                branch_stack.push((p, pos));
                pos += 1;
            }
            ')' => {
                let (p, _) = branch_stack
                    .pop()
                    .ok_or(err(SmilesErrorKind::UnbalancedBranch, pos))?;
                if pending_bond.is_some() {
                    return Err(err(SmilesErrorKind::DanglingBond, pos));
                }
                prev = Some(p);
                pos += 1;
            }
            '-' | '=' | '#' | ':' => {
                if pending_bond.is_some() || prev.is_none() {
                    return Err(err(SmilesErrorKind::UnexpectedChar(c), pos));
                }
                let order = match c {
                    '-' => BondOrder::Single,
                    '=' => BondOrder::Double,
                    '#' => BondOrder::Triple,
                    _ => BondOrder::Aromatic,
                };
                pending_bond = Some((order, pos));
                pos += 1;
            }
            '.' => {
                if pending_bond.is_some() || prev.is_none() {
                    return Err(err(SmilesErrorKind::UnexpectedChar(c), pos));
                }
                dot_pending = true;
                prev = None;
                pos += 1;
            }
            '0'..='9' | '%' => {
                let start = pos;
                let digit = if c == '%' {
                    if pos + 2 >= bytes.len()
                        || !bytes[pos + 1].is_ascii_digit()
                        || !bytes[pos + 2].is_ascii_digit()
                    {
                        return Err(err(SmilesErrorKind::UnexpectedChar('%'), pos));
                    }
                    let d = (bytes[pos + 1] - b'0') as u32 * 10 + (bytes[pos + 2] - b'0') as u32;
                    pos += 3;
                    d
                } else {
                    pos += 1;
                    (c as u8 - b'0') as u32
                };
                let atom = prev.ok_or(err(SmilesErrorKind::UnexpectedChar(c), start))?;
                let order = pending_bond.take().map(|(o, _)| o);
                if let Some(open) = rings.remove(&digit) {
                    let order = match (open.order, order) {
                        (Some(a), Some(b)) if a != b => {
                            return Err(err(SmilesErrorKind::RingBondConflict(digit), start))
                        }
                        (a, b) => a.or(b),
                    };
                    if open.atom == atom {
                        return Err(err(SmilesErrorKind::DuplicateBond, start));
                    }
                    bonds.push((open.atom, atom, order, start));
                } else {
                    rings.insert(
                        digit,
                        PendingRing {
                            atom,
                            order,
                            offset: start,
                        },
                    );
                }
            }
            _ => {
                let (parsed, next) = parse_atom(bytes, pos)?;
                let idx = atoms.len();
                atoms.push(parsed);
                if let Some(p) = prev {
                    let order = pending_bond.take().map(|(o, _)| o);
                    bonds.push((p, idx, order, pos));
                } else if let Some((_, off)) = pending_bond {
                    return Err(err(SmilesErrorKind::DanglingBond, off));
                }
                dot_pending = false;
                prev = Some(idx);
                pos = next;
            }
        }
    }
    if let Some((_, off)) = pending_bond {
        return Err(err(SmilesErrorKind::DanglingBond, off));
    }
    if dot_pending {
        return Err(err(SmilesErrorKind::UnexpectedChar('.'), bytes.len() - 1));
    }
    if let Some((_, off)) = branch_stack.pop() {
        return Err(err(SmilesErrorKind::UnbalancedBranch, off));
    }
    if let Some((&d, open)) = rings.iter().next() {
        return Err(err(SmilesErrorKind::UnclosedRing(d), open.offset));
    }

    let mut g = MolGraph::new();
    for p in &atoms {
        g.add_atom(p.atom.clone());
    }
    // Implicit bonds are single unless both atoms are aromatic and the bond
    // lies on a ring; resolve ring membership on a provisional graph first.
    let mut provisional = MolGraph::new();
    for p in &atoms {
        provisional.add_atom(p.atom.clone());
    }
    for &(a, b, _, off) in &bonds {
        provisional
            .add_bond(a, b, BondOrder::Single)
            .map_err(|_| err(SmilesErrorKind::DuplicateBond, off))?;
    }
    let ring = provisional.ring_bonds();
    for (i, &(a, b, order, off)) in bonds.iter().enumerate() {
        let order = order.unwrap_or_else(|| {
            if atoms[a].atom.aromatic && atoms[b].atom.aromatic && ring[i] {
                BondOrder::Aromatic
            } else {
                BondOrder::Single
            }
        });
        g.add_bond(a, b, order)
            .map_err(|_| err(SmilesErrorKind::DuplicateBond, off))?;
    }
    for (i, p) in atoms.iter().enumerate() {
        if !p.explicit_h {
            let h = g.default_hydrogens(i);
            g.atom_mut(i).implicit_h = h;
        }
        if !g.valence_ok(i) {
            return Err(err(SmilesErrorKind::ValenceOverflow, p.offset));
        }
    }
    Ok(g)
}

fn parse_atom(bytes: &[u8], pos: usize) -> Result<(ParsedAtom, usize), SmilesError> {
    let c = bytes[pos] as char;
    if c == '[' {
        return parse_bracket(bytes, pos);
    }
    let two = if pos + 1 < bytes.len() {
        Some(&bytes[pos..pos + 2])
    } else {
        None
    };
    let (element, aromatic, len) = match (c, two) {
        ('C', Some(b"Cl")) => (Element::Cl, false, 2),
        ('B', Some(b"Br")) => (Element::Br, false, 2),
        ('B', _) => (Element::B, false, 1),
        ('C', _) => (Element::C, false, 1),
        ('N', _) => (Element::N, false, 1),
        ('O', _) => (Element::O, false, 1),
        ('P', _) => (Element::P, false, 1),
        ('S', _) => (Element::S, false, 1),
        ('F', _) => (Element::F, false, 1),
        ('I', _) => (Element::I, false, 1),
        ('b', _) => (Element::B, true, 1),
        ('c', _) => (Element::C, true, 1),
        ('n', _) => (Element::N, true, 1),
        ('o', _) => (Element::O, true, 1),
        ('p', _) => (Element::P, true, 1),
        ('s', _) => (Element::S, true, 1),
        (c, _) if c.is_ascii_alphabetic() => {
            return Err(err(SmilesErrorKind::UnsupportedElement, pos))
        }
        (c, _) => return Err(err(SmilesErrorKind::UnexpectedChar(c), pos)),
    };
    let mut atom = Atom::new(element);
    atom.aromatic = aromatic;
    Ok((
        ParsedAtom {
            atom,
            explicit_h: false,
            offset: pos,
        },
        pos + len,
    ))
}

fn parse_bracket(bytes: &[u8], start: usize) -> Result<(ParsedAtom, usize), SmilesError> {
    let end = bytes[start + 1..]
        .iter()
        .position(|&b| b == b']')
        .map(|p| start + 1 + p)
        .ok_or(err(SmilesErrorKind::UnbalancedBracket, start))?;
    let body = &bytes[start + 1..end];
    if body.contains(&b'[') {
        return Err(err(SmilesErrorKind::UnbalancedBracket, start));
    }
    let mut i = 0;
    if body.first().is_some_and(|b| b.is_ascii_digit()) {
        // Isotopes are outside the supported subset.
        return Err(err(SmilesErrorKind::UnexpectedChar(body[0] as char), start + 1));
    }
    let sym_len = if body.len() >= 2 && body[0].is_ascii_uppercase() && body[1].is_ascii_lowercase()
    {
        let two = std::str::from_utf8(&body[..2]).unwrap_or("");
        if Element::from_symbol(two).is_some() {
            2
        } else if two.len() == 2 && !matches!(body[1], b'c' | b'n' | b'o' | b's' | b'p' | b'b') {
            return Err(err(SmilesErrorKind::UnsupportedElement, start + 1));
        } else {
            1
        }
    } else {
        1
    };
    if body.is_empty() {
        return Err(err(SmilesErrorKind::UnbalancedBracket, start));
    }
    let sym = std::str::from_utf8(&body[..sym_len]).unwrap_or("");
    let (element, aromatic) = if sym.chars().all(|c| c.is_ascii_lowercase()) {
        let upper = sym.to_ascii_uppercase();
        match Element::from_symbol(&upper) {
            Some(e) if e.can_be_aromatic() => (e, true),
            _ => return Err(err(SmilesErrorKind::UnsupportedElement, start + 1)),
        }
    } else {
        match Element::from_symbol(sym) {
            Some(e) => (e, false),
            None => return Err(err(SmilesErrorKind::UnsupportedElement, start + 1)),
        }
    };
    i += sym_len;
    let mut atom = Atom::new(element);
    atom.aromatic = aromatic;
    if i < body.len() && body[i] == b'H' {
        i += 1;
        let mut n = 0u32;
        let mut digits = 0;
        while i < body.len() && body[i].is_ascii_digit() {
            n = n * 10 + (body[i] - b'0') as u32;
            i += 1;
            digits += 1;
        }
        atom.implicit_h = if digits == 0 { 1 } else { n };
    }
    if i < body.len() && (body[i] == b'+' || body[i] == b'-') {
        let sign = if body[i] == b'+' { 1 } else { -1 };
        let sc = body[i];
        i += 1;
        let mut magnitude = 1i32;
        if i < body.len() && body[i].is_ascii_digit() {
            let mut n = 0i32;
            while i < body.len() && body[i].is_ascii_digit() {
                n = n * 10 + (body[i] - b'0') as i32;
                i += 1;
            }
            magnitude = n;
        } else {
            while i < body.len() && body[i] == sc {
                magnitude += 1;
                i += 1;
            }
        }
        atom.charge = sign * magnitude;
    }
    if i < body.len() && body[i] == b':' {
        i += 1;
        let mut n = 0u32;
        let mut digits = 0;
        while i < body.len() && body[i].is_ascii_digit() {
            n = n * 10 + (body[i] - b'0') as u32;
            i += 1;
            digits += 1;
        }
        if digits == 0 {
            return Err(err(SmilesErrorKind::UnexpectedChar(':'), start + 1 + i - 1));
        }
        atom.map_number = if n == 0 { None } else { Some(n) };
    }
    if i != body.len() {
        return Err(err(
            SmilesErrorKind::UnexpectedChar(body[i] as char),
            start + 1 + i,
        ));
    }
    Ok((
        ParsedAtom {
            atom,
            explicit_h: true,
            offset: start,
        },
        end + 1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.atom_count(), 1);
        assert_eq!(g.bond_count(), 0);
        assert_eq!(g.atom(0).implicit_h, 4);
    }

    #[test]
    fn benzene_ring_closed_and_aromatic() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bond_count(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic && a.implicit_h == 1));
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
    }

    #[test]
    fn mapped_bracket_atoms() {
        let g = parse_smiles("[CH3:1][OH:2]").unwrap();
        assert_eq!(g.atom(0).map_number, Some(1));
        assert_eq!(g.atom(1).map_number, Some(2));
        assert_eq!(g.atom(0).implicit_h, 3);
        assert_eq!(g.atom(1).implicit_h, 1);
        assert_eq!(g.bond_count(), 1);
        assert_eq!(g.bonds()[0].order, BondOrder::Single);
    }

    #[test]
    fn biphenyl_link_is_single() {
        let g = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        let singles = g.bonds().iter().filter(|b| b.order == BondOrder::Single).count();
        assert_eq!(singles, 1);
        let g = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        let singles = g.bonds().iter().filter(|b| b.order == BondOrder::Single).count();
        assert_eq!(singles, 1);
    }

    #[test]
    fn heteroaromatics_and_charges() {
        let g = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(g.atom(3).implicit_h, 0);
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(g.atom(3).implicit_h, 1);
        let g = parse_smiles("c1ccoc1").unwrap();
        assert_eq!(g.atom(3).implicit_h, 0);
        let g = parse_smiles("C[N+](=O)[O-]").unwrap();
        assert_eq!(g.atom(1).charge, 1);
        assert_eq!(g.atom(3).charge, -1);
        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.atom(0).implicit_h, 4);
    }

    #[test]
    fn substituted_aromatic_hydrogens() {
        let g = parse_smiles("Cc1ccccc1").unwrap();
        assert_eq!(g.atom(1).implicit_h, 0);
        assert_eq!(g.atom(2).implicit_h, 1);
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(g.atom(3).implicit_h, 0);
    }

    #[test]
    fn error_kinds_with_offsets() {
        assert_eq!(parse_smiles("").unwrap_err().kind, SmilesErrorKind::Empty);
        let e = parse_smiles("C1CC").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::UnclosedRing(1));
        assert_eq!(e.offset, 1);
        let e = parse_smiles("C[CH3").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::UnbalancedBracket);
        assert_eq!(e.offset, 1);
        let e = parse_smiles("CC(C").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::UnbalancedBranch);
        let e = parse_smiles("C[Xe]").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::UnsupportedElement);
        assert_eq!(e.offset, 2);
        let e = parse_smiles("CZ").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::UnsupportedElement);
        let e = parse_smiles("C(C)(C)(C)(C)C").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::ValenceOverflow);
        assert_eq!(e.offset, 0);
        let e = parse_smiles("[CH4]=C").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::ValenceOverflow);
        let e = parse_smiles("CC=").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::DanglingBond);
        let e = parse_smiles("C12CC12").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::DuplicateBond);
    }

    #[test]
    fn dot_separated_fragments() {
        let g = parse_smiles("CC.O").unwrap();
        assert_eq!(g.components().len(), 2);
        assert!(parse_smiles("CC.").is_err());
        assert!(parse_smiles(".C").is_err());
    }

    #[test]
    fn explicit_aromatic_bond_outside_ring() {
        let g = parse_smiles("c:c").unwrap();
        assert_eq!(g.bonds()[0].order, BondOrder::Aromatic);
        let g = parse_smiles("cc").unwrap();
        assert_eq!(g.bonds()[0].order, BondOrder::Single);
    }
}
