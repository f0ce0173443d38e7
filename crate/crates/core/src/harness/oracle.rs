//! Brute-force enumeration written independently of the lattice and cost
//! modules, used to cross-check them.

use std::collections::HashMap;

use crate::cost::WalkProblem;
use crate::error::{Error, Result};
use crate::lattice::{EncodingMode, LatticeKind, Site};
use crate::peptide::PeptideModel;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStats {
    pub configurations: usize,
    /// Self-avoiding loops for walks, clash-free conformations for peptides.
    pub valid_count: usize,
    /// Configurations with no coinciding sites or atoms.
    pub clash_free_count: usize,
    pub energies: Vec<f64>,
    pub e_min: f64,
    pub e_max: f64,
    /// Minimum over the valid configurations.
    pub e_min_valid: Option<f64>,
}

fn digits_of(mut index: usize, radix: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let d = index % radix;
            index /= radix;
            d
        })
        .collect()
}

/// Site multiset collisions, not counting a closed loop's endpoints.
fn collisions(sites: &[Site]) -> usize {
    let mut seen: HashMap<Site, usize> = HashMap::new();
    for s in sites {
        *seen.entry(*s).or_default() += 1;
    }
    let pairs: usize = seen.values().map(|m| m * (m - 1) / 2).sum();
    pairs - usize::from(sites.len() > 1 && sites[0] == sites[sites.len() - 1])
}

fn square_walk(digits: &[usize], relative: bool) -> Vec<Site> {
    const STEP: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    let mut headings = vec![0usize, 1];
    for &d in digits {
        let previous = *headings.last().expect("prefix present");
        headings.push(if relative { [previous + 1, previous, previous + 3][d] % 4 } else { d });
    }
    let (mut x, mut y) = (0, 0);
    let mut sites = vec![[0, 0, 0]];
    for h in headings {
        x += STEP[h].0;
        y += STEP[h].1;
        sites.push([x, y, 0]);
    }
    sites
}

fn finish(energies: Vec<f64>, valid: Vec<bool>, clash_free: usize) -> OracleStats {
    let e_min_valid = energies
        .iter()
        .zip(&valid)
        .filter(|(_, &v)| v)
        .map(|(&e, _)| e)
        .reduce(f64::min);
    OracleStats {
        configurations: energies.len(),
        valid_count: valid.iter().filter(|&&v| v).count(),
        clash_free_count: clash_free,
        e_min: energies.iter().copied().fold(f64::INFINITY, f64::min),
        e_max: energies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        e_min_valid,
        energies,
    }
}

/// Every walk of a square-lattice problem with the standard prefix.
pub fn enumerate_walks(problem: &WalkProblem) -> Result<OracleStats> {
    if problem.encoding.lattice != LatticeKind::Square || problem.prefix.0 != [0, 1] {
        return Err(Error::Precondition("the walk oracle covers square walks with the +x, +y prefix".into()));
    }
    let relative = problem.encoding.mode == EncodingMode::Relative;
    let radix: usize = if relative { 3 } else { 4 };
    let n = problem.steps.checked_sub(2).filter(|&n| n > 0 && n <= 12).ok_or_else(|| {
        Error::Precondition(format!("walk oracle supports 3..=14 steps, got {}", problem.steps))
    })?;
    let total = radix.pow(n as u32);
    let mut energies = Vec::with_capacity(total);
    let mut valid = Vec::with_capacity(total);
    let mut clash_free = 0;
    for index in 0..total {
        let sites = square_walk(&digits_of(index, radix, n), relative);
        let c = collisions(&sites);
        let end = sites[sites.len() - 1];
        let d2 = (end[0] * end[0] + end[1] * end[1]) as f64;
        energies.push(c as f64 + problem.lambda * d2);
        valid.push(c == 0 && d2 == 0.0);
        clash_free += usize::from(c == 0);
    }
    Ok(finish(energies, valid, clash_free))
}

/// Every backbone of a peptide model, decoded here and handed to the
/// model's side-group minimization.
pub fn enumerate_peptide(model: &PeptideModel) -> Result<OracleStats> {
    const TETRAD: [Site; 4] = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];
    let n = model.free_turns();
    let total = 3usize.pow(n as u32);
    let prefix = model.prefix().0.clone();
    let mut energies = Vec::with_capacity(total);
    let mut valid = Vec::with_capacity(total);
    let mut clash_free = 0;
    for index in 0..total {
        let mut turns = prefix.iter().map(|&t| t as usize).collect::<Vec<_>>();
        for d in digits_of(index, 3, n) {
            let previous = *turns.last().ok_or_else(|| Error::Precondition("peptide oracle needs a prefix".into()))?;
            turns.push((previous + 1 + d) % 4);
        }
        let mut here = [0, 0, 0];
        let mut sites = vec![here];
        for (i, &t) in turns.iter().enumerate() {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            for k in 0..3 {
                here[k] += sign * TETRAD[t][k];
            }
            sites.push(here);
        }
        let conf = model.minimize_backbone(&sites)?;
        energies.push(conf.energy);
        valid.push(conf.clashes == 0);
        clash_free += usize::from(conf.clashes == 0);
    }
    Ok(finish(energies, valid, clash_free))
}

/// Enumerates a configured problem; peptide problems load their input files.
pub fn oracle_enumerate(spec: &super::ProblemSpec) -> Result<OracleStats> {
    match spec.walk() {
        Some(walk) => enumerate_walks(&walk),
        None => {
            let (topology, params) = super::load_peptide(spec)?;
            enumerate_peptide(&PeptideModel::new(topology, params, spec.lambda())?)
        }
    }
}
