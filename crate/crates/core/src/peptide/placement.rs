use std::io::Write;

use super::{lj_pair_with, ElementParams, HconParams, PeptideTopology};
use crate::error::{Error, Result};
use crate::lattice::{
    decode_tetrahedral, distance_sq, tetrahedral_neighbors, Encoding, EncodingMode, FixedPrefix,
    LatticeKind, Site,
};

/// Every bond on the lattice has this length, Å.
pub const DEFAULT_BOND_LENGTH: f64 = 1.5;

/// Cap on side-placement combinations tried for one backbone.
const MAX_PLACEMENTS: usize = 1 << 24;

const RELATIVE_TETRAHEDRAL: Encoding = Encoding::new(LatticeKind::Tetrahedral, EncodingMode::Relative);

#[derive(Debug, Clone, PartialEq)]
pub struct Conformation {
    pub backbone_positions: Vec<Site>,
    /// One site per side atom, in [`PeptideTopology::side_atoms`] order.
    pub side_positions: Vec<Site>,
    /// Lennard-Jones energy, kcal/mol.
    pub lj_energy: f64,
    pub clashes: u32,
    /// `lj_energy + λ·clashes`, kcal/mol.
    pub energy: f64,
    /// Å per integer lattice unit.
    pub unit_length: f64,
}

impl Conformation {
    /// Sites indexed by topology atom index.
    pub fn atom_sites(&self, topology: &PeptideTopology) -> Vec<Site> {
        let mut sites = vec![[0; 3]; topology.atoms.len()];
        for (&atom, &site) in topology.backbone.iter().zip(&self.backbone_positions) {
            sites[atom] = site;
        }
        for (atom, &site) in topology.side_atoms().into_iter().zip(&self.side_positions) {
            sites[atom] = site;
        }
        sites
    }

    /// Writes `atom_index,element,x,y,z` rows in Å.
    pub fn write_csv<W: Write>(&self, topology: &PeptideTopology, mut out: W) -> Result<()> {
        writeln!(out, "atom_index,element,x,y,z")?;
        for (i, site) in self.atom_sites(topology).into_iter().enumerate() {
            let [x, y, z] = site.map(|c| c as f64 * self.unit_length);
            writeln!(out, "{i},{},{x},{y},{z}", topology.atoms[i].element)?;
        }
        Ok(())
    }
}

/// Precomputed pair tables for repeated conformation scoring.
#[derive(Debug, Clone)]
pub struct PeptideModel {
    topology: PeptideTopology,
    params: HconParams,
    lambda: f64,
    bond_length: f64,
    prefix: FixedPrefix,
    side_atoms: Vec<usize>,
    side_attach: Vec<usize>,
    /// `pair_table[i * n + j]`: index into `lj_tables`, or `None` when the
    /// pair has no Lennard-Jones term.
    pair_table: Vec<Option<usize>>,
    clash: Vec<bool>,
    /// Lennard-Jones energy by integer squared distance, per element pair.
    lj_tables: Vec<Vec<f64>>,
}

impl PeptideModel {
    pub fn new(topology: PeptideTopology, params: HconParams, lambda: f64) -> Result<Self> {
        Self::with_geometry(topology, params, lambda, DEFAULT_BOND_LENGTH, FixedPrefix::standard())
    }

    pub fn with_geometry(
        topology: PeptideTopology,
        params: HconParams,
        lambda: f64,
        bond_length: f64,
        prefix: FixedPrefix,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Precondition(format!("clash penalty must be ≥ 0, got {lambda}")));
        }
        if !(bond_length > 0.0) {
            return Err(Error::Precondition(format!("bond length must be > 0, got {bond_length}")));
        }
        if prefix.len() + 1 > topology.backbone.len() {
            return Err(Error::Precondition("prefix longer than the backbone".into()));
        }
        let n = topology.atoms.len();
        let elements: Vec<ElementParams> = topology
            .atoms
            .iter()
            .map(|a| params.require(a.element))
            .collect::<Result<_>>()?;

        let unit = bond_length / 3f64.sqrt();
        let reach = 2 * (topology.backbone.len() as i64 + 1);
        let max_d2 = (3 * reach * reach) as usize;
        let mut lj_tables: Vec<Vec<f64>> = Vec::new();
        let mut table_of = std::collections::HashMap::new();
        let mut pair_table = vec![None; n * n];
        for (i, j) in topology.lj_pairs() {
            let key = (topology.atoms[i].element, topology.atoms[j].element);
            let key = if key.0 <= key.1 { key } else { (key.1, key.0) };
            let id = *table_of.entry(key).or_insert_with(|| {
                let (a, b) = (elements[i], elements[j]);
                lj_tables.push(
                    (0..=max_d2)
                        .map(|d2| lj_pair_with(a, b, (d2 as f64).sqrt() * unit))
                        .collect(),
                );
                lj_tables.len() - 1
            });
            pair_table[i * n + j] = Some(id);
            pair_table[j * n + i] = Some(id);
        }
        let side_atoms = topology.side_atoms();
        let side_attach = topology
            .side_groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.attach, g.atoms.len()))
            .collect();
        let clash = topology.atoms.iter().map(|a| a.participates_in_clash).collect();
        Ok(Self {
            topology,
            params,
            lambda,
            bond_length,
            prefix,
            side_atoms,
            side_attach,
            pair_table,
            clash,
            lj_tables,
        })
    }

    pub fn topology(&self) -> &PeptideTopology {
        &self.topology
    }

    pub fn params(&self) -> &HconParams {
        &self.params
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bond_length(&self) -> f64 {
        self.bond_length
    }

    pub fn prefix(&self) -> &FixedPrefix {
        &self.prefix
    }

    pub fn free_turns(&self) -> usize {
        self.topology.backbone.len() - 1 - self.prefix.len()
    }

    pub fn unit_length(&self) -> f64 {
        self.bond_length / 3f64.sqrt()
    }

    pub fn backbone_sites(&self, digits: &[u8]) -> Result<Vec<Site>> {
        if digits.len() != self.free_turns() {
            return Err(Error::Precondition(format!(
                "expected {} free turns, got {}",
                self.free_turns(),
                digits.len()
            )));
        }
        let walk = decode_tetrahedral(digits, RELATIVE_TETRAHEDRAL, &self.prefix, self.bond_length)?;
        Ok(walk.positions)
    }

    /// Lennard-Jones energy and clash count of one atom pair.
    #[inline]
    fn pair(&self, i: usize, j: usize, si: Site, sj: Site) -> (f64, u32) {
        if si == sj {
            return (0.0, (self.clash[i] && self.clash[j]) as u32);
        }
        match self.pair_table[i * self.topology.atoms.len() + j] {
            Some(t) => (self.lj_tables[t][distance_sq(si, sj) as usize], 0),
            None => (0.0, 0),
        }
    }

    /// Candidate sites for each side atom: lattice neighbours of its
    /// attachment atom other than the sites of the bonded backbone atoms.
    pub fn side_candidates(&self, backbone: &[Site]) -> Vec<Vec<Site>> {
        self.side_attach
            .iter()
            .map(|&b| {
                let all = tetrahedral_neighbors(backbone[b]);
                let bonded = |s: &Site| {
                    (b > 0 && backbone[b - 1] == *s) || backbone.get(b + 1) == Some(s)
                };
                let free: Vec<Site> = all.iter().copied().filter(|s| !bonded(s)).collect();
                if free.is_empty() {
                    all.to_vec()
                } else {
                    free
                }
            })
            .collect()
    }

    /// Number of side placements enumerated for this backbone.
    pub fn placement_count(&self, digits: &[u8]) -> Result<usize> {
        let backbone = self.backbone_sites(digits)?;
        Ok(self.side_candidates(&backbone).iter().map(Vec::len).product())
    }

    pub fn place_and_minimize(&self, digits: &[u8]) -> Result<Conformation> {
        let backbone = self.backbone_sites(digits)?;
        self.minimize_backbone(&backbone)
    }

    /// Lowest `H_LJ + λ·clashes` over side placements for a fixed backbone.
    /// Placements are enumerated lexicographically (first side atom most
    /// significant) and the first minimum wins.
    pub fn minimize_backbone(&self, backbone: &[Site]) -> Result<Conformation> {
        if backbone.len() != self.topology.backbone.len() {
            return Err(Error::Precondition(format!(
                "expected {} backbone sites, got {}",
                self.topology.backbone.len(),
                backbone.len()
            )));
        }
        let bb = &self.topology.backbone;
        let (mut base_lj, mut base_clash) = (0.0, 0u32);
        for a in 0..bb.len() {
            for b in a + 1..bb.len() {
                let (e, c) = self.pair(bb[a], bb[b], backbone[a], backbone[b]);
                base_lj += e;
                base_clash += c;
            }
        }

        let candidates = self.side_candidates(backbone);
        let total: usize = candidates.iter().map(Vec::len).product();
        if total > MAX_PLACEMENTS {
            return Err(Error::Precondition(format!(
                "{total} side placements exceed the enumeration cap of {MAX_PLACEMENTS}"
            )));
        }

        let unary: Vec<Vec<(f64, u32)>> = self
            .side_atoms
            .iter()
            .zip(&candidates)
            .map(|(&s, cands)| {
                cands
                    .iter()
                    .map(|&site| {
                        let (mut e, mut c) = (0.0, 0);
                        for (k, &atom) in bb.iter().enumerate() {
                            let (de, dc) = self.pair(s, atom, site, backbone[k]);
                            e += de;
                            c += dc;
                        }
                        (e, c)
                    })
                    .collect()
            })
            .collect();

        let m = self.side_atoms.len();
        // binary[k][l] for l < k, flattened as [c_k * len_l + c_l]
        let binary: Vec<Vec<Vec<(f64, u32)>>> = (0..m)
            .map(|k| {
                (0..k)
                    .map(|l| {
                        let mut table = Vec::with_capacity(candidates[k].len() * candidates[l].len());
                        for &sk in &candidates[k] {
                            for &sl in &candidates[l] {
                                table.push(self.pair(self.side_atoms[k], self.side_atoms[l], sk, sl));
                            }
                        }
                        table
                    })
                    .collect()
            })
            .collect();

        let mut search = Search {
            lambda: self.lambda,
            candidates: &candidates,
            unary: &unary,
            binary: &binary,
            choice: vec![0; m],
            best: None,
        };
        search.descend(0, base_lj, base_clash);
        let (lj_energy, clashes, best) = search.best.expect("at least one placement");
        Ok(Conformation {
            backbone_positions: backbone.to_vec(),
            side_positions: best.iter().enumerate().map(|(k, &c)| candidates[k][c]).collect(),
            lj_energy,
            clashes,
            energy: lj_energy + self.lambda * clashes as f64,
            unit_length: self.unit_length(),
        })
    }
}

struct Search<'a> {
    lambda: f64,
    candidates: &'a [Vec<Site>],
    unary: &'a [Vec<(f64, u32)>],
    binary: &'a [Vec<Vec<(f64, u32)>>],
    choice: Vec<usize>,
    best: Option<(f64, u32, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, k: usize, lj: f64, clashes: u32) {
        if k == self.choice.len() {
            let energy = lj + self.lambda * clashes as f64;
            let better = match &self.best {
                None => true,
                Some((blj, bc, _)) => energy < blj + self.lambda * *bc as f64,
            };
            if better {
                self.best = Some((lj, clashes, self.choice.clone()));
            }
            return;
        }
        for c in 0..self.candidates[k].len() {
            let (mut e, mut n) = self.unary[k][c];
            for l in 0..k {
                let (de, dn) = self.binary[k][l][c * self.candidates[l].len() + self.choice[l]];
                e += de;
                n += dn;
            }
            self.choice[k] = c;
            self.descend(k + 1, lj + e, clashes + n);
        }
    }
}

/// One-shot convenience around [`PeptideModel::place_and_minimize`].
pub fn place_and_minimize(
    digits: &[u8],
    topology: &PeptideTopology,
    params: &HconParams,
    clash_penalty: f64,
) -> Result<Conformation> {
    PeptideModel::new(topology.clone(), params.clone(), clash_penalty)?.place_and_minimize(digits)
}
