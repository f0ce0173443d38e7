//! Helpers shared by the property and acceptance suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use qfold_core::cost::{build_saw_cost, CostVector, WalkProblem};
use qfold_core::lattice::{Encoding, EncodingMode, LatticeKind};
use qfold_core::optimize::{gradient, objective};
use qfold_core::qsim::{MixedRadixState, Mixer, Schedule};

const C0: Complex64 = Complex64::new(0.0, 0.0);

pub fn state_from(radices: Vec<usize>, raw: &[(f64, f64)]) -> MixedRadixState {
    let len: usize = radices.iter().product();
    let mut amplitudes: Vec<Complex64> = (0..len).map(|i| Complex64::new(raw[i % raw.len()].0, raw[i % raw.len()].1 + i as f64 * 1e-3)).collect();
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amplitudes.iter_mut().for_each(|a| *a /= norm);
    MixedRadixState { amplitudes, radices }
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn saw(steps: usize, mode: EncodingMode) -> CostVector {
    build_saw_cost(&WalkProblem::new(steps, Encoding::new(LatticeKind::Square, mode), 0.2)).unwrap()
}

/// Dense `n × n` matrix of one mixer layer, built as a Kronecker product
/// with qudit 0 as the least significant factor.
pub fn dense_mixer(radices: &[usize], mixer: Mixer, angles: &[f64]) -> DMatrix<Complex64> {
    let mut full = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for &d in radices {
        let local = match mixer {
            Mixer::InversionAboutMean => {
                let shift = (Complex64::from_polar(1.0, -angles[0] / 2.0) - 1.0) / d as f64;
                DMatrix::from_fn(d, d, |i, j| if i == j { shift + 1.0 } else { shift })
            }
            Mixer::QubitX => {
                let (s, c) = (angles[0] / 2.0).sin_cos();
                let rx = DMatrix::from_row_slice(2, 2, &[Complex64::new(c, 0.0), Complex64::new(0.0, -s), Complex64::new(0.0, -s), Complex64::new(c, 0.0)]);
                let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
                for _ in 0..d.trailing_zeros() {
                    m = rx.kronecker(&m);
                }
                m
            }
            Mixer::Qudit => {
                let mut m = DMatrix::from_element(d, d, C0);
                for j in 0..d {
                    let w = if j + 1 < d { Complex64::from_polar(1.0, -angles[j] / 2.0) } else { Complex64::new(1.0, 0.0) };
                    let f = DMatrix::from_fn(d, 1, |k, _| Complex64::from_polar(1.0 / (d as f64).sqrt(), 2.0 * PI * (j * k) as f64 / d as f64));
                    m += (&f * f.adjoint()) * w;
                }
                m
            }
        };
        full = local.kronecker(&full);
    }
    full
}

pub fn dense_expectation(cost: &CostVector, schedule: &Schedule) -> f64 {
    let n = cost.len();
    let mut psi = DMatrix::from_element(n, 1, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    for (betas, &gamma) in schedule.betas.iter().zip(&schedule.gammas) {
        let phase = DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::from_polar(1.0, -gamma * cost.values()[i] / 2.0) } else { C0 });
        psi = dense_mixer(cost.radices(), schedule.mixer, betas) * (phase * psi);
    }
    (0..n).map(|i| psi[(i, 0)].norm_sqr() * cost.values()[i]).sum()
}

/// Largest deviation of the adjoint gradient from central differences,
/// relative to the largest finite-difference component.
pub fn gradient_error(cost: &CostVector, schedule: &Schedule, h: f64) -> f64 {
    let g = gradient(cost, schedule).unwrap();
    let p = schedule.depth();
    let modes = schedule.modes();
    let mut fd = Vec::new();
    for k in 0..p * modes + p {
        let bump = |delta: f64| {
            let mut s = schedule.clone();
            if k < p * modes {
                s.betas[k / modes][k % modes] += delta;
            } else {
                s.gammas[k - p * modes] += delta;
            }
            objective(cost, &s).unwrap()
        };
        fd.push((bump(h) - bump(-h)) / (2.0 * h));
    }
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}
