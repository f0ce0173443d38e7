//! Alanine-peptide topology, HCON Lennard-Jones parameters and pair energies.
//!
//! Topologies and parameters are plain text so that the atom inventory and
//! the force-field values can be swapped without recompiling:
//!
//! ```text
//! # topology
//! EXCLUDE_BONDED 2
//! ATOM 0 N backbone lj:1 clash:1
//! ATOM 1 C backbone lj:1 clash:1
//! ATOM 2 C side:1 lj:1 clash:1
//!
//! # parameters: element epsilon(kcal/mol) r_half(Å)
//! C 0.1094 1.9080
//! ```
//!
//! `EXCLUDE_BONDED n` drops Lennard-Jones terms between atoms separated by at
//! most `n` bonds. Clash counting is unaffected by exclusions.

mod placement;

pub use placement::{place_and_minimize, Conformation, PeptideModel, DEFAULT_BOND_LENGTH};

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    H,
    C,
    N,
    O,
}

impl Element {
    pub const ALL: [Element; 4] = [Element::H, Element::C, Element::N, Element::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "H" => Ok(Element::H),
            "C" => Ok(Element::C),
            "N" => Ok(Element::N),
            "O" => Ok(Element::O),
            other => Err(format!("unknown element {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomRole {
    Backbone,
    /// Side atom bonded to the atom with this topology index, which must be
    /// a backbone atom.
    Side { attach: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub role: AtomRole,
    pub participates_in_lj: bool,
    pub participates_in_clash: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideGroup {
    /// Position of the attachment atom along the backbone chain.
    pub attach: usize,
    /// Topology indices of the side atoms.
    pub atoms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeptideTopology {
    pub atoms: Vec<Atom>,
    /// Topology indices of backbone atoms in chain order.
    pub backbone: Vec<usize>,
    pub side_groups: Vec<SideGroup>,
    pub exclude_bonded: usize,
}

impl PeptideTopology {
    pub fn new(atoms: Vec<Atom>, exclude_bonded: usize) -> Result<Self> {
        let backbone: Vec<usize> = atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == AtomRole::Backbone)
            .map(|(i, _)| i)
            .collect();
        if backbone.len() < 2 {
            return Err(Error::Config(format!(
                "topology needs at least 2 backbone atoms, found {}",
                backbone.len()
            )));
        }
        let mut side_groups: Vec<SideGroup> = Vec::new();
        for (i, atom) in atoms.iter().enumerate() {
            if let AtomRole::Side { attach } = atom.role {
                let chain_pos = backbone.iter().position(|&b| b == attach).ok_or_else(|| {
                    Error::Config(format!(
                        "atom {i} attaches to {attach}, which is not a backbone atom"
                    ))
                })?;
                match side_groups.iter_mut().find(|g| g.attach == chain_pos) {
                    Some(group) => group.atoms.push(i),
                    None => side_groups.push(SideGroup {
                        attach: chain_pos,
                        atoms: vec![i],
                    }),
                }
            }
        }
        Ok(Self {
            atoms,
            backbone,
            side_groups,
            exclude_bonded,
        })
    }

    /// Relative turns left free once the first two are pinned.
    pub fn free_turns(&self) -> usize {
        (self.backbone.len() - 1).saturating_sub(2)
    }

    pub fn configurations(&self) -> usize {
        3usize.pow(self.free_turns() as u32)
    }

    /// Side atoms in enumeration order.
    pub fn side_atoms(&self) -> Vec<usize> {
        self.side_groups.iter().flat_map(|g| g.atoms.iter().copied()).collect()
    }

    /// Bond-graph distance between every pair of atoms.
    pub fn bond_separation(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for pair in self.backbone.windows(2) {
            adjacency[pair[0]].push(pair[1]);
            adjacency[pair[1]].push(pair[0]);
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if let AtomRole::Side { attach } = atom.role {
                adjacency[i].push(attach);
                adjacency[attach].push(i);
            }
        }
        (0..n)
            .map(|start| {
                let mut dist = vec![usize::MAX; n];
                dist[start] = 0;
                let mut queue = VecDeque::from([start]);
                while let Some(u) = queue.pop_front() {
                    for &v in &adjacency[u] {
                        if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                dist
            })
            .collect()
    }

    /// Whether the pair contributes a Lennard-Jones term.
    pub fn lj_pairs(&self) -> Vec<(usize, usize)> {
        let sep = self.bond_separation();
        let mut pairs = Vec::new();
        for i in 0..self.atoms.len() {
            for j in i + 1..self.atoms.len() {
                if self.atoms[i].participates_in_lj
                    && self.atoms[j].participates_in_lj
                    && sep[i][j] > self.exclude_bonded
                {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries: Vec<(usize, Atom)> = Vec::new();
        let mut exclude_bonded = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "EXCLUDE_BONDED" => {
                    exclude_bonded = fields
                        .get(1)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::parse(origin, lineno, "EXCLUDE_BONDED needs a count"))?;
                }
                "ATOM" => {
                    if fields.len() != 6 {
                        return Err(Error::parse(origin, lineno, "ATOM takes 5 fields"));
                    }
                    let index: usize = fields[1]
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, "bad atom index"))?;
                    let element: Element = fields[2]
                        .parse()
                        .map_err(|e: String| Error::parse(origin, lineno, e))?;
                    let role = match fields[3] {
                        "backbone" => AtomRole::Backbone,
                        s => match s.strip_prefix("side:").and_then(|a| a.parse().ok()) {
                            Some(attach) => AtomRole::Side { attach },
                            None => {
                                return Err(Error::parse(
                                    origin,
                                    lineno,
                                    format!("expected backbone or side:<index>, got {s:?}"),
                                ))
                            }
                        },
                    };
                    let flag = |field: &str, key: &str| -> Result<bool> {
                        match field.strip_prefix(key) {
                            Some("0") => Ok(false),
                            Some("1") => Ok(true),
                            _ => Err(Error::parse(origin, lineno, format!("expected {key}0 or {key}1"))),
                        }
                    };
                    let atom = Atom {
                        element,
                        role,
                        participates_in_lj: flag(fields[4], "lj:")?,
                        participates_in_clash: flag(fields[5], "clash:")?,
                    };
                    entries.push((index, atom));
                }
                other => {
                    return Err(Error::parse(origin, lineno, format!("unknown directive {other:?}")))
                }
            }
        }
        entries.sort_by_key(|(i, _)| *i);
        for (expected, (index, _)) in entries.iter().enumerate() {
            if *index != expected {
                return Err(Error::parse(
                    origin,
                    0,
                    format!("atom indices must be 0..n without gaps; missing {expected}"),
                ));
            }
        }
        Self::new(entries.into_iter().map(|(_, a)| a).collect(), exclude_bonded)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.exclude_bonded > 0 {
            out.push_str(&format!("EXCLUDE_BONDED {}\n", self.exclude_bonded));
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            let role = match atom.role {
                AtomRole::Backbone => "backbone".to_string(),
                AtomRole::Side { attach } => format!("side:{attach}"),
            };
            out.push_str(&format!(
                "ATOM {i} {} {role} lj:{} clash:{}\n",
                atom.element,
                atom.participates_in_lj as u8,
                atom.participates_in_clash as u8
            ));
        }
        out
    }
}

/// Alanine chain of `n_residues`: `N, Cα, C` per residue plus a terminal
/// oxygen on the backbone, a Cβ side atom on every Cα and a carbonyl oxygen
/// on every C. Pairs up to two bonds apart are excluded from the
/// Lennard-Jones sum.
pub fn build_alanine_topology(n_residues: usize) -> PeptideTopology {
    let heavy = |element, role| Atom {
        element,
        role,
        participates_in_lj: true,
        participates_in_clash: true,
    };
    let mut atoms = Vec::new();
    for _ in 0..n_residues {
        let n = atoms.len();
        atoms.push(heavy(Element::N, AtomRole::Backbone));
        atoms.push(heavy(Element::C, AtomRole::Backbone));
        atoms.push(heavy(Element::C, AtomRole::Side { attach: n + 1 }));
        atoms.push(heavy(Element::C, AtomRole::Backbone));
        atoms.push(heavy(Element::O, AtomRole::Side { attach: n + 3 }));
    }
    atoms.push(heavy(Element::O, AtomRole::Backbone));
    PeptideTopology::new(atoms, 2).expect("alanine topology is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementParams {
    /// Well depth, kcal/mol.
    pub epsilon: f64,
    /// Half of the pair minimum distance, Å.
    pub r_half: f64,
}

/// One `(ε, r½)` pair per element.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HconParams {
    entries: [Option<ElementParams>; 4],
}

impl HconParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, element: Element, epsilon: f64, r_half: f64) -> Self {
        self.entries[element.index()] = Some(ElementParams { epsilon, r_half });
        self
    }

    pub fn get(&self, element: Element) -> Option<ElementParams> {
        self.entries[element.index()]
    }

    pub fn require(&self, element: Element) -> Result<ElementParams> {
        self.get(element)
            .ok_or_else(|| Error::Config(format!("no HCON parameters for element {element}")))
    }

    /// Placeholder values of typical magnitude for C, H, N and O. They are
    /// not a published HCON fit; supply a parameter file for real studies.
    pub fn placeholder() -> Self {
        Self::new()
            .with(Element::H, 0.0157, 1.4870)
            .with(Element::C, 0.1094, 1.9080)
            .with(Element::N, 0.1700, 1.8240)
            .with(Element::O, 0.2100, 1.6612)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut params = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::parse(origin, lineno, "expected: element epsilon r_half"));
            }
            let element: Element = fields[0]
                .parse()
                .map_err(|e: String| Error::parse(origin, lineno, e))?;
            let number = |s: &str| -> Result<f64> {
                match s.parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                    _ => Err(Error::parse(origin, lineno, format!("expected a positive number, got {s:?}"))),
                }
            };
            params = params.with(element, number(fields[1])?, number(fields[2])?);
        }
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        Element::ALL
            .iter()
            .filter_map(|&e| self.get(e).map(|p| format!("{e} {} {}\n", p.epsilon, p.r_half)))
            .collect()
    }
}

/// Lennard-Jones term `√(εᵢεⱼ)·((σ/d)¹² − 2(σ/d)⁶)` with `σ = r½ᵢ + r½ⱼ`.
/// Coincident atoms (`d = 0`) contribute nothing; clashes are penalized
/// separately.
pub fn lj_pair_with(a: ElementParams, b: ElementParams, distance: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let sigma = a.r_half + b.r_half;
    let s6 = (sigma / distance).powi(6);
    (a.epsilon * b.epsilon).sqrt() * (s6 * s6 - 2.0 * s6)
}

pub fn lj_pair(a: Element, b: Element, distance: f64, params: &HconParams) -> Result<f64> {
    Ok(lj_pair_with(params.require(a)?, params.require(b)?, distance))
}

/// Sum over contributing pairs of their well depth: no conformation can go
/// below this.
pub fn lj_lower_bound(topology: &PeptideTopology, params: &HconParams) -> Result<f64> {
    let mut total = 0.0;
    for (i, j) in topology.lj_pairs() {
        let a = params.require(topology.atoms[i].element)?;
        let b = params.require(topology.atoms[j].element)?;
        total -= (a.epsilon * b.epsilon).sqrt();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> HconParams {
        HconParams::new().with(Element::C, 1.0, 1.0)
    }

    #[test]
    fn pair_at_sigma_is_well_depth() {
        let p = HconParams::new().with(Element::C, 1.0, 1.0).with(Element::O, 4.0, 0.5);
        let v = lj_pair(Element::C, Element::O, 1.5, &p).unwrap();
        assert!((v + 2.0).abs() < 1e-14);
    }

    #[test]
    fn pair_vanishes_far_and_at_overlap() {
        let p = unit_params();
        assert!(lj_pair(Element::C, Element::C, 1e6, &p).unwrap().abs() < 1e-30);
        assert_eq!(lj_pair(Element::C, Element::C, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn pair_at_twice_sigma() {
        let p = unit_params();
        let v = lj_pair(Element::C, Element::C, 4.0, &p).unwrap();
        let ratio: f64 = 0.5;
        let independent = ratio.powf(12.0) - 2.0 * ratio.powf(6.0);
        assert!((v - independent).abs() < 1e-15);
        assert!((v + 0.031006).abs() < 1e-6);
    }

    #[test]
    fn pair_minimum_on_grid() {
        let p = HconParams::placeholder();
        let sigma = 1.9080 + 1.6612;
        let depth = -(0.1094f64 * 0.2100).sqrt();
        let (mut best_d, mut best_v) = (0.0, f64::INFINITY);
        for k in 1..20000 {
            let d = k as f64 * 0.0005;
            let v = lj_pair(Element::C, Element::O, d, &p).unwrap();
            let w = lj_pair(Element::O, Element::C, d, &p).unwrap();
            assert_eq!(v, w);
            if v < best_v {
                best_v = v;
                best_d = d;
            }
        }
        assert!((best_d - sigma).abs() < 1e-3);
        assert!((best_v - depth).abs() < 1e-6);
    }

    #[test]
    fn missing_element_is_config_error() {
        let p = unit_params();
        assert!(matches!(lj_pair(Element::C, Element::N, 1.0, &p), Err(Error::Config(_))));
    }

    fn flat_topology(elements: &[Element]) -> PeptideTopology {
        let atoms = elements
            .iter()
            .map(|&element| Atom {
                element,
                role: AtomRole::Backbone,
                participates_in_lj: true,
                participates_in_clash: true,
            })
            .collect();
        PeptideTopology::new(atoms, 0).unwrap()
    }

    #[test]
    fn lower_bound_small() {
        let p = HconParams::new().with(Element::C, 1.0, 1.0);
        let t = flat_topology(&[Element::C, Element::C]);
        assert_eq!(lj_lower_bound(&t, &p).unwrap(), -1.0);
        let p = HconParams::new()
            .with(Element::C, 1.0, 1.0)
            .with(Element::N, 4.0, 1.0)
            .with(Element::O, 9.0, 1.0);
        let t = flat_topology(&[Element::C, Element::N, Element::O]);
        assert!((lj_lower_bound(&t, &p).unwrap() + 11.0).abs() < 1e-12);
    }

    #[test]
    fn alanine_sizes() {
        let t4 = build_alanine_topology(4);
        assert_eq!(t4.backbone.len(), 13);
        assert_eq!(t4.free_turns(), 10);
        assert_eq!(t4.configurations(), 59049);
        // two qubits per qutrit register
        assert_eq!(2 * t4.free_turns(), 20);
        assert_eq!(t4.side_atoms().len(), 8);
        let t2 = build_alanine_topology(2);
        assert_eq!(t2.configurations(), 81);
    }

    #[test]
    fn exclusions_follow_bond_graph() {
        let t = build_alanine_topology(1);
        // N Cα Cβ C O OXT ; Cβ–C is a 1-3 pair, N–O a 1-4 pair
        let sep = t.bond_separation();
        assert_eq!(sep[2][3], 2);
        assert_eq!(sep[0][4], 3);
        let pairs = t.lj_pairs();
        assert!(!pairs.contains(&(2, 3)));
        assert!(pairs.contains(&(0, 4)));
    }

    #[test]
    fn topology_text_round_trip() {
        let t = build_alanine_topology(4);
        let back = PeptideTopology::parse(&t.to_text(), "mem").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn topology_parse_errors() {
        assert!(PeptideTopology::parse("ATOM 0 X backbone lj:1 clash:1", "t").is_err());
        assert!(PeptideTopology::parse("ATOM 0 C backbone lj:2 clash:1", "t").is_err());
        let one = "ATOM 0 C backbone lj:1 clash:1\n";
        assert!(matches!(PeptideTopology::parse(one, "t"), Err(Error::Config(_))));
        let bad_attach = "ATOM 0 C backbone lj:1 clash:1\nATOM 1 C backbone lj:1 clash:1\nATOM 2 H side:2 lj:0 clash:1\n";
        assert!(PeptideTopology::parse(bad_attach, "t").is_err());
        let gap = "ATOM 0 C backbone lj:1 clash:1\nATOM 2 C backbone lj:1 clash:1\n";
        assert!(PeptideTopology::parse(gap, "t").is_err());
    }

    #[test]
    fn params_parse() {
        let p = HconParams::parse("# comment\nC 0.1 1.9\nO 0.2 1.6 # trailing\n", "p").unwrap();
        assert_eq!(p.get(Element::C), Some(ElementParams { epsilon: 0.1, r_half: 1.9 }));
        assert!(p.get(Element::H).is_none());
        assert!(HconParams::parse("C -0.1 1.9", "p").is_err());
        assert!(HconParams::parse("C 0.1", "p").is_err());
        let again = HconParams::parse(&HconParams::placeholder().to_text(), "p").unwrap();
        assert_eq!(again, HconParams::placeholder());
    }
}
