//! Diagonal cost vectors over every basis configuration.
//!
//! Index convention: configuration `x` is the mixed-radix integer whose
//! least-significant digit is the first free turn.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    absolute_turns, crossings_of, distance_sq, square_positions, Encoding, FixedPrefix, LatticeKind, Walk,
};
use crate::peptide::{HconParams, PeptideModel, PeptideTopology};

/// Working-set bytes per configuration: the cost entry plus three complex
/// statevectors used by gradient evaluation.
pub const BYTES_PER_CONFIGURATION: u64 = 8 + 3 * 16;

/// Default memory cap, 4 GiB.
pub const DEFAULT_MEMORY_CAP_BYTES: u64 = 4 << 30;

/// Vectors with at most this many distinct values keep a level table for
/// fast phase application.
const MAX_LEVELS: usize = 1024;

const MAGIC: &[u8; 4] = b"QFCV";
const FORMAT_VERSION: u32 = 1;

/// Distinct values of a cost vector and, per configuration, which one.
#[derive(Debug, Clone, PartialEq)]
pub struct Levels {
    pub values: Vec<f64>,
    pub index: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    values: Vec<f64>,
    radices: Vec<usize>,
    lambda: f64,
    problem_hash: u64,
    description: String,
    levels: Option<Levels>,
}

impl CostVector {
    pub fn new(values: Vec<f64>, radices: Vec<usize>, lambda: f64, description: impl Into<String>) -> Result<Self> {
        let description = description.into();
        let problem_hash = fnv1a(description.as_bytes());
        Self::with_hash(values, radices, lambda, description, problem_hash)
    }

    fn with_hash(
        values: Vec<f64>,
        radices: Vec<usize>,
        lambda: f64,
        description: String,
        problem_hash: u64,
    ) -> Result<Self> {
        if radices.iter().any(|&r| r < 2) {
            return Err(Error::Precondition(format!("every radix must be ≥ 2, got {radices:?}")));
        }
        let len = radices.iter().product::<usize>();
        if values.len() != len {
            return Err(Error::Precondition(format!(
                "{} values for radices {radices:?} (expected {len})",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("cost value {i} is not finite: {}", values[i])));
        }
        let levels = find_levels(&values);
        Ok(Self {
            values,
            radices,
            lambda,
            problem_hash,
            description,
            levels,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn problem_hash(&self) -> u64 {
        self.problem_hash
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn levels(&self) -> Option<&Levels> {
        self.levels.as_ref()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation of the spectrum.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.values.len() as f64;
        var.sqrt()
    }

    pub fn digits(&self, index: usize) -> Vec<u8> {
        mixed_radix_digits(index, &self.radices)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(self.radices.len() as u32).to_le_bytes())?;
        for &r in &self.radices {
            out.write_all(&(r as u32).to_le_bytes())?;
        }
        out.write_all(&self.lambda.to_le_bytes())?;
        out.write_all(&self.problem_hash.to_le_bytes())?;
        out.write_all(&(self.description.len() as u32).to_le_bytes())?;
        out.write_all(self.description.as_bytes())?;
        out.write_all(&(self.values.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut input)? as usize;
        if n > 64 {
            return Err(Error::Format(format!("{n} radices is implausible")));
        }
        let radices = (0..n).map(|_| read_u32(&mut input).map(|r| r as usize)).collect::<Result<Vec<_>>>()?;
        let lambda = f64::from_le_bytes(read_array(&mut input)?);
        let hash = u64::from_le_bytes(read_array(&mut input)?);
        let desc_len = read_u32(&mut input)? as usize;
        let mut desc = vec![0u8; desc_len];
        input.read_exact(&mut desc)?;
        let description = String::from_utf8(desc).map_err(|_| Error::Format("description is not UTF-8".into()))?;
        let len = u64::from_le_bytes(read_array(&mut input)?) as usize;
        let expected: Option<usize> = radices.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
        if expected != Some(len) {
            return Err(Error::Format(format!("length {len} does not match radices {radices:?}")));
        }
        let mut bytes = vec![0u8; len * 8];
        input.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::with_hash(values, radices, lambda, description, hash).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn read_array<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(input)?))
}

fn find_levels(values: &[f64]) -> Option<Levels> {
    let mut seen: HashMap<u64, u16> = HashMap::new();
    let mut distinct = Vec::new();
    let mut index = Vec::with_capacity(values.len());
    for &v in values {
        let next = distinct.len();
        let id = *seen.entry(v.to_bits()).or_insert_with(|| {
            distinct.push(v);
            next as u16
        });
        if distinct.len() > MAX_LEVELS {
            return None;
        }
        index.push(id);
    }
    Some(Levels { values: distinct, index })
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Digits of `index`, least significant first.
pub fn mixed_radix_digits(mut index: usize, radices: &[usize]) -> Vec<u8> {
    radices
        .iter()
        .map(|&r| {
            let d = (index % r) as u8;
            index /= r;
            d
        })
        .collect()
}

pub fn mixed_radix_index(digits: &[u8], radices: &[usize]) -> usize {
    digits.iter().zip(radices).rev().fold(0, |acc, (&d, &r)| acc * r + d as usize)
}

/// Refuses configuration spaces whose working set would exceed `cap_bytes`.
pub fn check_memory(radices: &[usize], cap_bytes: u64) -> Result<usize> {
    let entries: u128 = radices.iter().map(|&r| r as u128).product();
    if entries * BYTES_PER_CONFIGURATION as u128 > cap_bytes as u128 {
        return Err(Error::MemoryCap { required: entries, cap_bytes });
    }
    Ok(entries as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkProblem {
    pub steps: usize,
    pub encoding: Encoding,
    pub prefix: FixedPrefix,
    pub lambda: f64,
}

impl WalkProblem {
    pub fn new(steps: usize, encoding: Encoding, lambda: f64) -> Self {
        Self {
            steps,
            encoding,
            prefix: FixedPrefix::standard(),
            lambda,
        }
    }

    pub fn free_digits(&self) -> usize {
        self.steps.saturating_sub(self.prefix.len())
    }

    pub fn radices(&self) -> Vec<usize> {
        vec![self.encoding.radix() as usize; self.free_digits()]
    }

    pub fn description(&self) -> String {
        format!(
            "saw steps={} lattice={:?} mode={:?} prefix={:?} lambda={}",
            self.steps, self.encoding.lattice, self.encoding.mode, self.prefix.0, self.lambda
        )
    }

    fn validate(&self) -> Result<()> {
        if self.encoding.lattice != LatticeKind::Square {
            return Err(Error::Precondition("walk problems live on the square lattice".into()));
        }
        if !(4..=16).contains(&self.steps) {
            return Err(Error::Precondition(format!("steps must be in 4..=16, got {}", self.steps)));
        }
        if self.steps <= self.prefix.len() {
            return Err(Error::Precondition("prefix leaves no free turns".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Precondition(format!("λ must be > 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Square-lattice walk for configuration `index`.
    pub fn decode(&self, index: usize) -> Result<Walk> {
        let digits = mixed_radix_digits(index, &self.radices());
        crate::lattice::decode_square(&digits, self.encoding, &self.prefix)
    }
}

/// `crossings + λ·(endpoint distance)²`.
pub fn saw_energy(walk: &Walk, lambda: f64) -> f64 {
    crossings_of(&walk.positions) as f64 + lambda * distance_sq(walk.positions[0], walk.last()) as f64
}

pub fn build_saw_cost(problem: &WalkProblem) -> Result<CostVector> {
    build_saw_cost_capped(problem, DEFAULT_MEMORY_CAP_BYTES)
}

pub fn build_saw_cost_capped(problem: &WalkProblem, cap_bytes: u64) -> Result<CostVector> {
    problem.validate()?;
    let radices = problem.radices();
    let len = check_memory(&radices, cap_bytes)?;
    let encoding: Encoding = problem.encoding;
    let values: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|x| {
            let digits = mixed_radix_digits(x, &radices);
            let turns = absolute_turns(&digits, encoding, &problem.prefix).expect("digits are in range");
            let positions = square_positions(&turns);
            crossings_of(&positions) as f64
                + problem.lambda * distance_sq(positions[0], positions[positions.len() - 1]) as f64
        })
        .collect();
    CostVector::new(values, radices, problem.lambda, problem.description())
}

/// Peptide cost with the per-configuration parts kept for conditional metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct PeptideCost {
    pub cost: CostVector,
    pub clashes: Vec<u32>,
    pub lj_only: Vec<f64>,
}

impl PeptideCost {
    pub fn clash_free_count(&self) -> usize {
        self.clashes.iter().filter(|&&c| c == 0).count()
    }
}

pub fn build_peptide_cost(topology: &PeptideTopology, params: &HconParams, lambda: f64) -> Result<PeptideCost> {
    let model = PeptideModel::new(topology.clone(), params.clone(), lambda)?;
    build_peptide_cost_with(&model, DEFAULT_MEMORY_CAP_BYTES)
}

pub fn build_peptide_cost_with(model: &PeptideModel, cap_bytes: u64) -> Result<PeptideCost> {
    let radices = vec![3usize; model.free_turns()];
    let len = check_memory(&radices, cap_bytes)?;
    let parts: Vec<(f64, u32, f64)> = (0..len)
        .into_par_iter()
        .map(|x| {
            let conf = model.place_and_minimize(&mixed_radix_digits(x, &radices))?;
            Ok((conf.energy, conf.clashes, conf.lj_energy))
        })
        .collect::<Result<_>>()?;
    let description = format!(
        "peptide lambda={} bond={} prefix={:?}\n{}\n{}",
        model.lambda(),
        model.bond_length(),
        model.prefix().0,
        model.topology().to_text(),
        model.params().to_text()
    );
    let mut values = Vec::with_capacity(len);
    let mut clashes = Vec::with_capacity(len);
    let mut lj_only = Vec::with_capacity(len);
    for (v, c, lj) in parts {
        values.push(v);
        clashes.push(c);
        lj_only.push(lj);
    }
    Ok(PeptideCost {
        cost: CostVector::new(values, radices, model.lambda(), description)?,
        clashes,
        lj_only,
    })
}
