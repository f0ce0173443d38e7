//! Fixtures shared by the benchmarks.

use qfold_core::cost::{build_peptide_cost, build_saw_cost, CostVector, PeptideCost, WalkProblem};
use qfold_core::lattice::{Encoding, EncodingMode, LatticeKind};
use qfold_core::peptide::{build_alanine_topology, HconParams};
use qfold_core::qsim::{Mixer, Schedule};

pub fn walk_problem(steps: usize, mode: EncodingMode) -> WalkProblem {
    WalkProblem::new(steps, Encoding::new(LatticeKind::Square, mode), 0.2)
}

pub fn walk_cost(steps: usize, mode: EncodingMode) -> CostVector {
    build_saw_cost(&walk_problem(steps, mode)).expect("walk cost")
}

pub fn tetrapeptide() -> PeptideCost {
    build_peptide_cost(&build_alanine_topology(4), &HconParams::placeholder(), 1000.0).expect("peptide cost")
}

/// Deterministic `p`-layer schedule with `modes` angles per layer.
pub fn schedule(p: usize, modes: usize, mixer: Mixer) -> Schedule {
    let betas: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..modes).map(|k| 0.3 + 0.1 * j as f64 - 0.05 * k as f64).collect())
        .collect();
    let gammas: Vec<f64> = (0..p).map(|j| 0.2 + 0.05 * j as f64).collect();
    Schedule {
        betas,
        gammas,
        mixer,
        gamma_scale: 1.0,
        origin: qfold_core::qsim::Origin::Manual,
    }
}
