//! Mixed-radix statevector simulation of QAOA circuits.
//!
//! Qudit `q` has stride `Π_{i<q} radices[i]`, matching the cost-vector
//! index convention.

mod mixer;

pub use mixer::Mixer;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cost::CostVector;
use crate::error::{Error, Result};

pub(crate) use mixer::{apply_inversion, apply_local, apply_qubit_x, inversion_sandwich, local_sandwich, qudit_sandwiches};

#[derive(Debug, Clone, PartialEq)]
pub struct MixedRadixState {
    pub amplitudes: Vec<Complex64>,
    pub radices: Vec<usize>,
}

impl MixedRadixState {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `Σ conj(self)·other`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// Debug dump: radix count, radices (u32) and interleaved re/im f64,
    /// all little endian.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.radices.len() as u32).to_le_bytes())?;
        for &r in &self.radices {
            out.write_all(&(r as u32).to_le_bytes())?;
        }
        for a in &self.amplitudes {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }
}

pub fn uniform_state(radices: &[usize]) -> MixedRadixState {
    let len: usize = radices.iter().product();
    let a = Complex64::new(1.0 / (len as f64).sqrt(), 0.0);
    MixedRadixState {
        amplitudes: vec![a; len],
        radices: radices.to_vec(),
    }
}

fn check_register(state: &MixedRadixState, cost: &CostVector) -> Result<()> {
    if state.radices != cost.radices() {
        return Err(Error::Precondition(format!(
            "state radices {:?} do not match cost radices {:?}",
            state.radices,
            cost.radices()
        )));
    }
    Ok(())
}

/// Multiplies `amps[x]` by `exp(−i·gamma·values[x]/2)`.
pub(crate) fn phase_in_place(amps: &mut [Complex64], cost: &CostVector, gamma: f64) {
    match cost.levels() {
        Some(levels) => {
            let phases: Vec<Complex64> = levels
                .values
                .iter()
                .map(|v| Complex64::from_polar(1.0, -gamma * v / 2.0))
                .collect();
            for (a, &k) in amps.iter_mut().zip(&levels.index) {
                *a *= phases[k as usize];
            }
        }
        None => {
            for (a, v) in amps.iter_mut().zip(cost.values()) {
                let (s, c) = (-gamma * v / 2.0).sin_cos();
                *a *= Complex64::new(c, s);
            }
        }
    }
}

/// `exp(−i·gamma·values[x]/2)` for every configuration.
pub(crate) fn phase_factors(cost: &CostVector, gamma: f64, out: &mut Vec<Complex64>) {
    out.clear();
    match cost.levels() {
        Some(levels) => {
            let phases: Vec<Complex64> = levels
                .values
                .iter()
                .map(|v| Complex64::from_polar(1.0, -gamma * v / 2.0))
                .collect();
            out.extend(levels.index.iter().map(|&k| phases[k as usize]));
        }
        None => out.extend(cost.values().iter().map(|v| {
            let (s, c) = (-gamma * v / 2.0).sin_cos();
            Complex64::new(c, s)
        })),
    }
}

pub fn apply_phase(state: &mut MixedRadixState, cost: &CostVector, gamma: f64) -> Result<()> {
    check_register(state, cost)?;
    phase_in_place(&mut state.amplitudes, cost, gamma);
    Ok(())
}

pub fn apply_qubit_x_mixer(state: &mut MixedRadixState, beta: f64) -> Result<()> {
    Mixer::QubitX.modes(&state.radices)?;
    apply_qubit_x(&mut state.amplitudes, &state.radices, beta);
    Ok(())
}

/// Qudit mixer via its dense projector-sum matrix.
pub fn apply_qudit_mixer(state: &mut MixedRadixState, betas: &[f64]) -> Result<()> {
    let modes = Mixer::Qudit.modes(&state.radices)?;
    if betas.len() != modes {
        return Err(Error::Arity { expected: modes, actual: betas.len() });
    }
    apply_local(&mut state.amplitudes, &state.radices, |d| Mixer::Qudit.local_unitary(d, betas));
    Ok(())
}

/// Qudit mixer via per-qudit discrete Fourier transforms.
pub fn apply_qudit_mixer_fourier(state: &mut MixedRadixState, betas: &[f64]) -> Result<()> {
    let modes = Mixer::Qudit.modes(&state.radices)?;
    if betas.len() != modes {
        return Err(Error::Arity { expected: modes, actual: betas.len() });
    }
    mixer::apply_qudit_fourier(&mut state.amplitudes, &state.radices, betas);
    Ok(())
}

pub fn apply_inversion_mixer(state: &mut MixedRadixState, beta: f64) -> Result<()> {
    apply_inversion(&mut state.amplitudes, &state.radices, beta);
    Ok(())
}

/// Any mixer through the generic strided dense path.
pub fn apply_mixer_dense(state: &mut MixedRadixState, mixer: Mixer, angles: &[f64]) -> Result<()> {
    let modes = mixer.modes(&state.radices)?;
    if angles.len() != modes {
        return Err(Error::Arity { expected: modes, actual: angles.len() });
    }
    apply_local(&mut state.amplitudes, &state.radices, |d| mixer.local_unitary(d, angles));
    Ok(())
}

pub(crate) fn mixer_in_place(amps: &mut [Complex64], radices: &[usize], mixer: Mixer, angles: &[f64]) {
    match mixer {
        Mixer::QubitX => apply_qubit_x(amps, radices, angles[0]),
        Mixer::InversionAboutMean => apply_inversion(amps, radices, angles[0]),
        Mixer::Qudit => apply_local(amps, radices, |d| mixer.local_unitary(d, angles)),
    }
}

pub fn apply_mixer(state: &mut MixedRadixState, mixer: Mixer, angles: &[f64]) -> Result<()> {
    let modes = mixer.modes(&state.radices)?;
    if angles.len() != modes {
        return Err(Error::Arity { expected: modes, actual: angles.len() });
    }
    mixer_in_place(&mut state.amplitudes, &state.radices, mixer, angles);
    Ok(())
}

/// `Σ_q ⟨bra|G_mode^{(q)}|ket⟩` for the mixer generator of one angle.
pub(crate) fn generator_sandwich(
    bra: &[Complex64],
    ket: &[Complex64],
    radices: &[usize],
    mixer: Mixer,
    mode: usize,
) -> Complex64 {
    match mixer {
        Mixer::InversionAboutMean => inversion_sandwich(bra, ket, radices),
        _ => local_sandwich(bra, ket, radices, |d| mixer.local_generator(d, mode)),
    }
}

/// [`generator_sandwich`] for every angle of one layer, sharing passes
/// where the mixer allows.
pub(crate) fn generator_sandwiches(
    bra: &[Complex64],
    ket: &[Complex64],
    radices: &[usize],
    mixer: Mixer,
    out: &mut [Complex64],
) {
    match mixer {
        Mixer::Qudit => qudit_sandwiches(bra, ket, radices, out),
        _ => {
            for (mode, slot) in out.iter_mut().enumerate() {
                *slot = generator_sandwich(bra, ket, radices, mixer, mode);
            }
        }
    }
}

/// Where a schedule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Manual,
    Random,
    AnnealingSchedule,
    AnnealingInit,
    Extrapolated,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Manual => "manual",
            Origin::Random => "random",
            Origin::AnnealingSchedule => "annealing_schedule",
            Origin::AnnealingInit => "annealing_init",
            Origin::Extrapolated => "extrapolated",
        }
    }
}

/// QAOA angles. `betas[j]` holds the mixer angles of layer `j` (one for
/// qubit-X and inversion mixers, `d − 1` for the qudit mixer). `gammas`
/// are the angles fed to the phase operator; optimizers work with
/// `gammas[j] / gamma_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub betas: Vec<Vec<f64>>,
    pub gammas: Vec<f64>,
    pub mixer: Mixer,
    pub gamma_scale: f64,
    #[serde(default)]
    pub origin: Origin,
}

impl Schedule {
    pub fn empty(mixer: Mixer) -> Self {
        Self {
            betas: Vec::new(),
            gammas: Vec::new(),
            mixer,
            gamma_scale: 1.0,
            origin: Origin::Manual,
        }
    }

    /// Single-angle mixers only.
    pub fn new(betas: &[f64], gammas: &[f64], mixer: Mixer) -> Self {
        Self {
            betas: betas.iter().map(|&b| vec![b]).collect(),
            gammas: gammas.to_vec(),
            mixer,
            gamma_scale: 1.0,
            origin: Origin::Manual,
        }
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn modes(&self) -> usize {
        self.betas.first().map_or(1, Vec::len)
    }

    pub fn validate(&self, radices: &[usize]) -> Result<()> {
        let modes = self.mixer.modes(radices)?;
        if self.betas.len() != self.gammas.len() {
            return Err(Error::Arity { expected: self.gammas.len(), actual: self.betas.len() });
        }
        for layer in &self.betas {
            if layer.len() != modes {
                return Err(Error::Arity { expected: modes, actual: layer.len() });
            }
        }
        if !(self.gamma_scale > 0.0 && self.gamma_scale.is_finite()) {
            return Err(Error::Precondition(format!("gamma_scale must be > 0, got {}", self.gamma_scale)));
        }
        Ok(())
    }
}

pub fn qaoa_state(cost: &CostVector, schedule: &Schedule) -> Result<MixedRadixState> {
    schedule.validate(cost.radices())?;
    let mut state = uniform_state(cost.radices());
    evolve_in_place(&mut state.amplitudes, cost, schedule);
    Ok(state)
}

/// Applies every layer to `amps`; the schedule must already be validated.
pub(crate) fn evolve_in_place(amps: &mut [Complex64], cost: &CostVector, schedule: &Schedule) {
    for (betas, &gamma) in schedule.betas.iter().zip(&schedule.gammas) {
        phase_in_place(amps, cost, gamma);
        mixer_in_place(amps, cost.radices(), schedule.mixer, betas);
    }
}

pub(crate) fn energy_of(amps: &[Complex64], cost: &CostVector) -> f64 {
    amps.iter().zip(cost.values()).map(|(a, v)| a.norm_sqr() * v).sum()
}

pub fn expected_energy(state: &MixedRadixState, cost: &CostVector) -> Result<f64> {
    check_register(state, cost)?;
    Ok(energy_of(&state.amplitudes, cost))
}

pub fn event_probability(state: &MixedRadixState, predicate: impl Fn(usize) -> bool) -> f64 {
    state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(x, _)| predicate(*x))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Success probability after `k` Grover iterations from initial success
/// probability `p0`.
pub fn amplitude_amplification_probability(p0: f64, k: u32) -> f64 {
    let theta = p0.clamp(0.0, 1.0).sqrt().asin();
    ((2 * k + 1) as f64 * theta).sin().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cost(values: Vec<f64>, radices: Vec<usize>) -> CostVector {
        CostVector::new(values, radices, 1.0, "test").unwrap()
    }

    fn close(a: &MixedRadixState, b: &MixedRadixState, tol: f64) -> bool {
        a.amplitudes.iter().zip(&b.amplitudes).all(|(x, y)| (x - y).norm() < tol)
    }

    fn ramp_state(radices: &[usize]) -> MixedRadixState {
        let len: usize = radices.iter().product();
        let raw: Vec<Complex64> = (0..len)
            .map(|i| Complex64::new((i as f64 * 0.37).sin() + 0.2, (i as f64 * 1.3).cos()))
            .collect();
        let n = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        MixedRadixState {
            amplitudes: raw.into_iter().map(|a| a / n).collect(),
            radices: radices.to_vec(),
        }
    }

    #[test]
    fn uniform_amplitudes() {
        let s = uniform_state(&[3]);
        assert!(s.amplitudes.iter().all(|a| (a.re - 1.0 / 3f64.sqrt()).abs() < 1e-15 && a.im == 0.0));
        let s = uniform_state(&[4, 4]);
        assert_eq!(s.len(), 16);
        assert!(s.amplitudes.iter().all(|a| (a.re - 0.25).abs() < 1e-15));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phase_examples() {
        let c = cost(vec![0.0, 1.0, 2.5, 4.0, 0.3, 7.0], vec![2, 3]);
        let s0 = ramp_state(&[2, 3]);
        let mut s = s0.clone();
        apply_phase(&mut s, &c, 0.0).unwrap();
        assert_eq!(s, s0);

        let flat = cost(vec![1.7; 6], vec![2, 3]);
        let mut s = s0.clone();
        apply_phase(&mut s, &flat, 0.9).unwrap();
        let g = Complex64::from_polar(1.0, -0.9 * 1.7 / 2.0);
        assert!(s.amplitudes.iter().zip(&s0.amplitudes).all(|(a, b)| (a - b * g).norm() < 1e-15));

        let lambda = 0.2;
        let c = cost((0..6).map(|k| lambda * (k * k) as f64).collect(), vec![2, 3]);
        let mut s = s0.clone();
        apply_phase(&mut s, &c, 4.0 * PI / lambda).unwrap();
        let ratio = s.amplitudes[0] / s0.amplitudes[0];
        assert!(s.amplitudes.iter().zip(&s0.amplitudes).all(|(a, b)| (a - b * ratio).norm() < 1e-12));
    }

    #[test]
    fn qubit_x_examples() {
        let mut s = MixedRadixState {
            amplitudes: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            radices: vec![2],
        };
        apply_qubit_x_mixer(&mut s, PI).unwrap();
        assert!(s.amplitudes[0].norm() < 1e-15);
        assert!((s.amplitudes[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);

        let s0 = ramp_state(&[4, 2, 4]);
        let mut s = s0.clone();
        apply_qubit_x_mixer(&mut s, 0.0).unwrap();
        assert!(close(&s, &s0, 1e-15));
        let mut s = s0.clone();
        apply_qubit_x_mixer(&mut s, 2.0 * PI).unwrap();
        // five qubits, each picks up −1
        assert!(s.amplitudes.iter().zip(&s0.amplitudes).all(|(a, b)| (a + b).norm() < 1e-14));

        let mut bad = uniform_state(&[3, 4]);
        assert!(matches!(apply_qubit_x_mixer(&mut bad, 0.1), Err(Error::UnsupportedMixer { .. })));
    }

    #[test]
    fn qubit_x_fast_path_matches_dense_tensor_power() {
        let s0 = ramp_state(&[4, 4, 2]);
        for beta in [0.3, -1.7, 2.9] {
            let mut fast = s0.clone();
            apply_qubit_x_mixer(&mut fast, beta).unwrap();
            let mut dense = s0.clone();
            apply_mixer_dense(&mut dense, Mixer::QubitX, &[beta]).unwrap();
            assert!(close(&fast, &dense, 1e-12));
        }
    }

    #[test]
    fn qudit_mixer_examples() {
        let s0 = ramp_state(&[3, 3]);
        let mut s = s0.clone();
        apply_qudit_mixer(&mut s, &[0.0, 0.0]).unwrap();
        assert!(close(&s, &s0, 1e-14));

        for b in [0.4, -2.2, 5.0] {
            let mut q = s0.clone();
            apply_qudit_mixer(&mut q, &[b, 0.0]).unwrap();
            let mut inv = s0.clone();
            apply_inversion_mixer(&mut inv, b).unwrap();
            assert!(close(&q, &inv, 1e-13));
        }

        let mut s = s0.clone();
        assert!(matches!(apply_qudit_mixer(&mut s, &[0.1]), Err(Error::Arity { expected: 2, actual: 1 })));
        let mut mixed = uniform_state(&[3, 4]);
        assert!(apply_qudit_mixer(&mut mixed, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn qudit_fourier_and_projector_paths_agree() {
        for radices in [vec![3, 3, 3], vec![4, 4], vec![2, 2, 2]] {
            let d = radices[0];
            let s0 = ramp_state(&radices);
            let angles: Vec<f64> = (0..d - 1).map(|j| 0.7 + 1.3 * j as f64).collect();
            let mut a = s0.clone();
            apply_qudit_mixer(&mut a, &angles).unwrap();
            let mut b = s0.clone();
            apply_qudit_mixer_fourier(&mut b, &angles).unwrap();
            assert!(close(&a, &b, 1e-12));
        }
    }

    #[test]
    fn inversion_examples() {
        let s0 = ramp_state(&[3, 4]);
        let mut s = s0.clone();
        apply_inversion_mixer(&mut s, 0.0).unwrap();
        assert!(close(&s, &s0, 1e-15));

        // β = 2π gives 1 − 2|+⟩⟨+| on each qudit
        let mut s = s0.clone();
        apply_inversion_mixer(&mut s, 2.0 * PI).unwrap();
        let mut r = s0.clone();
        apply_local(&mut r.amplitudes, &r.radices, |d| {
            let mut m = vec![Complex64::new(-2.0 / d as f64, 0.0); d * d];
            for i in 0..d {
                m[i * d + i] += 1.0;
            }
            m
        });
        assert!(close(&s, &r, 1e-13));

        let u0 = uniform_state(&[3, 4]);
        let mut u = u0.clone();
        apply_inversion_mixer(&mut u, 1.234).unwrap();
        let ratio = u.amplitudes[0] / u0.amplitudes[0];
        assert!((ratio.norm() - 1.0).abs() < 1e-14);
        assert!(u.amplitudes.iter().zip(&u0.amplitudes).all(|(a, b)| (a - b * ratio).norm() < 1e-14));
    }

    #[test]
    fn local_unitaries_are_unitary() {
        for (mixer, d, angles) in [
            (Mixer::QubitX, 4, vec![0.77]),
            (Mixer::QubitX, 2, vec![-2.1]),
            (Mixer::Qudit, 3, vec![0.4, 1.9]),
            (Mixer::Qudit, 4, vec![0.4, -1.9, 3.3]),
            (Mixer::InversionAboutMean, 3, vec![2.6]),
        ] {
            let m = mixer.local_unitary(d, &angles);
            for i in 0..d {
                for j in 0..d {
                    let dot: Complex64 = (0..d).map(|k| m[k * d + i].conj() * m[k * d + j]).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expected).norm() < 1e-12, "{mixer:?} d={d}");
                }
            }
        }
    }

    #[test]
    fn qaoa_state_examples() {
        let c = cost(vec![0.0, 1.0, 2.0, 0.5, 3.0, 1.0, 2.0, 0.0, 1.0], vec![3, 3]);
        let s = qaoa_state(&c, &Schedule::empty(Mixer::InversionAboutMean)).unwrap();
        assert_eq!(s, uniform_state(&[3, 3]));
        let s = qaoa_state(&c, &Schedule::new(&[0.8], &[0.0], Mixer::InversionAboutMean)).unwrap();
        let p = s.probabilities();
        assert!(p.iter().all(|x| (x - 1.0 / 9.0).abs() < 1e-14));
        let bad = Schedule::new(&[0.8, 0.1], &[0.0], Mixer::InversionAboutMean);
        assert!(matches!(qaoa_state(&c, &bad), Err(Error::Arity { .. })));
    }

    #[test]
    fn energy_and_probability_queries() {
        let c = cost(vec![0.0, 1.0, 2.0, 5.0], vec![2, 2]);
        let u = uniform_state(&[2, 2]);
        assert!((expected_energy(&u, &c).unwrap() - 2.0).abs() < 1e-15);
        let mut basis = u.clone();
        basis.amplitudes = vec![Complex64::new(0.0, 0.0); 4];
        basis.amplitudes[3] = Complex64::new(0.0, 1.0);
        assert_eq!(expected_energy(&basis, &c).unwrap(), 5.0);
        let s = ramp_state(&[2, 2]);
        let mut rotated = s.clone();
        rotated.amplitudes.iter_mut().for_each(|a| *a *= Complex64::from_polar(1.0, 0.7));
        assert!((expected_energy(&s, &c).unwrap() - expected_energy(&rotated, &c).unwrap()).abs() < 1e-14);
        assert!((event_probability(&s, |_| true) - 1.0).abs() < 1e-14);
        assert!((event_probability(&u, |x| x == 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn amplitude_amplification_examples() {
        let p = 0.000671;
        assert!((amplitude_amplification_probability(p, 0) - p).abs() < 1e-15);
        assert!((amplitude_amplification_probability(p, 2) - 0.0167).abs() < 1e-3);
        assert!((amplitude_amplification_probability(p, 5) - 0.0791).abs() < 1e-3);
        assert!((amplitude_amplification_probability(p, 10) - 0.268).abs() < 1e-3);
        let p = 0.00671;
        assert!((amplitude_amplification_probability(p, 2) - 0.158).abs() < 1e-3);
        assert!((amplitude_amplification_probability(p, 5) - 0.615).abs() < 1e-3);
        assert!((amplitude_amplification_probability(p, 10) - 0.977).abs() < 1e-3);
    }

    #[test]
    fn state_dump_layout() {
        let s = uniform_state(&[2]);
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 2 * 16);
        assert_eq!(&buf[..8], &[1, 0, 0, 0, 2, 0, 0, 0]);
    }

    #[test]
    fn shared_qudit_sandwiches_match_per_mode() {
        let radices = [3, 3, 3, 3];
        let len = 81;
        let bra: Vec<Complex64> = (0..len).map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos())).collect();
        let ket: Vec<Complex64> = (0..len).map(|i| Complex64::new((i as f64 * 1.1).cos(), (i as f64 * 0.5).sin())).collect();
        let mut all = vec![Complex64::new(0.0, 0.0); 2];
        generator_sandwiches(&bra, &ket, &radices, Mixer::Qudit, &mut all);
        for (mode, v) in all.iter().enumerate() {
            let one = generator_sandwich(&bra, &ket, &radices, Mixer::Qudit, mode);
            assert!((v - one).norm() < 1e-12);
        }
    }
}
