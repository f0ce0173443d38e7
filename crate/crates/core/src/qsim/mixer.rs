use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixer {
    /// `Rx(β)` on every qubit of every power-of-two qudit.
    QubitX,
    /// Fourier-phase mixer with `d − 1` angles per layer.
    Qudit,
    /// `1 + (e^{−iβ/2} − 1)|+⟩⟨+|` on every qudit.
    #[serde(alias = "inversion")]
    InversionAboutMean,
}

impl Mixer {
    pub fn name(self) -> &'static str {
        match self {
            Mixer::QubitX => "qubit_x",
            Mixer::Qudit => "qudit",
            Mixer::InversionAboutMean => "inversion_about_mean",
        }
    }

    /// Angles per layer on this register, or an error if the mixer does not
    /// apply to it.
    pub fn modes(self, radices: &[usize]) -> Result<usize> {
        let unsupported = || Error::UnsupportedMixer {
            mixer: self.name(),
            radices: radices.to_vec(),
        };
        match self {
            Mixer::QubitX => {
                if radices.iter().all(|r| r.is_power_of_two() && *r >= 2) {
                    Ok(1)
                } else {
                    Err(unsupported())
                }
            }
            Mixer::InversionAboutMean => Ok(1),
            Mixer::Qudit => match radices.first() {
                Some(&d) if radices.iter().all(|&r| r == d) => Ok(d - 1),
                Some(_) => Err(unsupported()),
                None => Ok(1),
            },
        }
    }

    /// Dense `d × d` single-qudit unitary for one layer, row major.
    pub fn local_unitary(self, d: usize, angles: &[f64]) -> Vec<Complex64> {
        match self {
            Mixer::QubitX => {
                let (s, c) = (angles[0] / 2.0).sin_cos();
                let mut m = vec![Complex64::new(0.0, 0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        let flips = (i ^ j).count_ones() as i32;
                        let same = d.trailing_zeros() as i32 - flips;
                        m[i * d + j] = c.powi(same) * s.powi(flips) * (-I).powi(flips);
                    }
                }
                m
            }
            Mixer::InversionAboutMean => {
                let shift = (Complex64::from_polar(1.0, -angles[0] / 2.0) - 1.0) / d as f64;
                let mut m = vec![shift; d * d];
                for i in 0..d {
                    m[i * d + i] += 1.0;
                }
                m
            }
            Mixer::Qudit => {
                let mut m = vec![Complex64::new(0.0, 0.0); d * d];
                for j in 0..d {
                    let phase = match angles.get(j) {
                        Some(&b) if j < d - 1 => Complex64::from_polar(1.0, -b / 2.0),
                        _ => Complex64::new(1.0, 0.0),
                    };
                    add_projector(&mut m, d, j, phase);
                }
                m
            }
        }
    }

    /// Hermitian generator `G_k` of angle `k`: the layer unitary is
    /// `exp(−i/2 Σ_k β_k Σ_q G_k^{(q)})`.
    pub fn local_generator(self, d: usize, mode: usize) -> Vec<Complex64> {
        let mut m = vec![Complex64::new(0.0, 0.0); d * d];
        match self {
            Mixer::QubitX => {
                for i in 0..d {
                    for j in 0..d {
                        if (i ^ j).count_ones() == 1 {
                            m[i * d + j] = Complex64::new(1.0, 0.0);
                        }
                    }
                }
            }
            Mixer::InversionAboutMean => m.fill(Complex64::new(1.0 / d as f64, 0.0)),
            Mixer::Qudit => add_projector(&mut m, d, mode, Complex64::new(1.0, 0.0)),
        }
        m
    }
}

/// `m += w·|f_j⟩⟨f_j|` with `|f_j⟩ = d^{-1/2} Σ_k ω^{jk}|k⟩`.
fn add_projector(m: &mut [Complex64], d: usize, j: usize, w: Complex64) {
    for a in 0..d {
        for b in 0..d {
            let angle = 2.0 * PI * ((j * a) as f64 - (j * b) as f64) / d as f64;
            m[a * d + b] += w * Complex64::from_polar(1.0 / d as f64, angle);
        }
    }
}

/// Applies a per-radix dense matrix to every qudit.
pub(crate) fn apply_local(amps: &mut [Complex64], radices: &[usize], matrix_for: impl Fn(usize) -> Vec<Complex64>) {
    let mut stride = 1;
    let mut cache: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for &d in radices {
        let m = match cache.iter().find(|(r, _)| *r == d) {
            Some((_, m)) => m.clone(),
            None => {
                let m = matrix_for(d);
                cache.push((d, m.clone()));
                m
            }
        };
        match d {
            2 => apply_fixed::<2>(amps, stride, &m),
            3 => apply_fixed::<3>(amps, stride, &m),
            4 => apply_fixed::<4>(amps, stride, &m),
            _ => apply_any(amps, stride, d, &m),
        }
        stride *= d;
    }
}

fn apply_fixed<const D: usize>(amps: &mut [Complex64], stride: usize, m: &[Complex64]) {
    let mat: [[Complex64; D]; D] = std::array::from_fn(|i| std::array::from_fn(|j| m[i * D + j]));
    let mul = |f: &[Complex64; D], i: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..D {
            acc += mat[i][j] * f[j];
        }
        acc
    };
    if stride == 1 {
        for fiber in amps.chunks_exact_mut(D) {
            let f: [Complex64; D] = std::array::from_fn(|k| fiber[k]);
            for (i, a) in fiber.iter_mut().enumerate() {
                *a = mul(&f, i);
            }
        }
        return;
    }
    for chunk in amps.chunks_exact_mut(stride * D) {
        let mut it = chunk.chunks_exact_mut(stride);
        let mut rows: [&mut [Complex64]; D] = std::array::from_fn(|_| it.next().expect("D rows per block"));
        for off in 0..stride {
            let f: [Complex64; D] = std::array::from_fn(|k| rows[k][off]);
            for (i, row) in rows.iter_mut().enumerate() {
                row[off] = mul(&f, i);
            }
        }
    }
}

fn apply_any(amps: &mut [Complex64], stride: usize, d: usize, m: &[Complex64]) {
    let mut fiber = vec![Complex64::new(0.0, 0.0); d];
    for chunk in amps.chunks_exact_mut(stride * d) {
        for off in 0..stride {
            for k in 0..d {
                fiber[k] = chunk[off + k * stride];
            }
            for i in 0..d {
                let row = &m[i * d..(i + 1) * d];
                chunk[off + i * stride] = row.iter().zip(&fiber).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// `Σ_q ⟨bra|P_j^{(q)}|ket⟩` for every Fourier projector `P_j = |f_j⟩⟨f_j|`
/// with `j < d − 1`, written to `out`. Registers must have uniform radix.
pub(crate) fn qudit_sandwiches(bra: &[Complex64], ket: &[Complex64], radices: &[usize], out: &mut [Complex64]) {
    out.fill(Complex64::new(0.0, 0.0));
    match radices.first() {
        None => {}
        Some(2) => fourier_sandwiches::<2>(bra, ket, radices.len(), out),
        Some(3) => fourier_sandwiches::<3>(bra, ket, radices.len(), out),
        Some(4) => fourier_sandwiches::<4>(bra, ket, radices.len(), out),
        Some(&d) => {
            for (mode, slot) in out.iter_mut().enumerate() {
                *slot = local_sandwich(bra, ket, radices, |d| Mixer::Qudit.local_generator(d, mode));
            }
            debug_assert!(d > 4);
        }
    }
}

fn fourier_sandwiches<const D: usize>(bra: &[Complex64], ket: &[Complex64], qudits: usize, out: &mut [Complex64]) {
    let w: [[Complex64; D]; D] = std::array::from_fn(|j| {
        std::array::from_fn(|x| Complex64::from_polar(1.0, -2.0 * PI * ((j * x) % D) as f64 / D as f64))
    });
    let mut acc = [Complex64::new(0.0, 0.0); D];
    let mut stride = 1;
    for _ in 0..qudits {
        for (cb, ck) in bra.chunks_exact(stride * D).zip(ket.chunks_exact(stride * D)) {
            for off in 0..stride {
                let b: [Complex64; D] = std::array::from_fn(|x| cb[off + x * stride]);
                let k: [Complex64; D] = std::array::from_fn(|x| ck[off + x * stride]);
                for j in 0..D - 1 {
                    let (mut fb, mut fk) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for x in 0..D {
                        fb += w[j][x] * b[x];
                        fk += w[j][x] * k[x];
                    }
                    acc[j] += fb.conj() * fk;
                }
            }
        }
        stride *= D;
    }
    for (o, a) in out.iter_mut().zip(acc) {
        *o = a / D as f64;
    }
}

/// `Σ_q ⟨bra| G^{(q)} |ket⟩` for a per-radix local operator `G`.
pub(crate) fn local_sandwich(
    bra: &[Complex64],
    ket: &[Complex64],
    radices: &[usize],
    matrix_for: impl Fn(usize) -> Vec<Complex64>,
) -> Complex64 {
    let len = ket.len();
    let mut stride = 1;
    let mut total = Complex64::new(0.0, 0.0);
    for &d in radices {
        let m = matrix_for(d);
        let block = stride * d;
        for start in (0..len).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for i in 0..d {
                    let mut row = Complex64::new(0.0, 0.0);
                    for j in 0..d {
                        row += m[i * d + j] * ket[base + j * stride];
                    }
                    total += bra[base + i * stride].conj() * row;
                }
            }
        }
        stride = block;
    }
    total
}

/// Elements per cache tile for the blocked inversion mixer.
const TILE: usize = 2048;

/// Fast path for the inversion mixer: `a → a + (e^{−iβ/2} − 1)·mean(a)`
/// along every qudit. Low qudits are applied chunk by chunk and high
/// qudits on gathered tiles so that each pass stays in cache.
pub(crate) fn apply_inversion(amps: &mut [Complex64], radices: &[usize], beta: f64) {
    let factor = Complex64::from_polar(1.0, -beta / 2.0) - 1.0;
    let (low, high) = split_low(radices);
    let block: usize = low.iter().product();
    let mut sums = Vec::new();
    for chunk in amps.chunks_exact_mut(block) {
        inversion_pass(chunk, 1, low, factor, &mut sums);
    }
    if high.is_empty() {
        return;
    }
    let h: usize = high.iter().product();
    let width = (TILE / h).clamp(1, block);
    let mut tile = Vec::with_capacity(h * width);
    for l0 in (0..block).step_by(width) {
        let w = width.min(block - l0);
        tile.clear();
        for j in 0..h {
            tile.extend_from_slice(&amps[j * block + l0..j * block + l0 + w]);
        }
        inversion_pass(&mut tile, w, high, factor, &mut sums);
        for j in 0..h {
            amps[j * block + l0..j * block + l0 + w].copy_from_slice(&tile[j * w..(j + 1) * w]);
        }
    }
}

/// Leading qudits whose combined dimension fits in a tile, and the rest.
fn split_low(radices: &[usize]) -> (&[usize], &[usize]) {
    let mut k = 0;
    let mut block = 1;
    while k < radices.len() && block * radices[k] <= TILE {
        block *= radices[k];
        k += 1;
    }
    radices.split_at(k)
}

/// Inversion on `radices` laid out from stride `stride` upward in `buf`.
fn inversion_pass(
    buf: &mut [Complex64],
    mut stride: usize,
    radices: &[usize],
    factor: Complex64,
    sums: &mut Vec<Complex64>,
) {
    let len = buf.len();
    for &d in radices {
        let scale = factor / d as f64;
        let block = stride * d;
        if stride == 1 {
            for fiber in buf.chunks_exact_mut(d) {
                let shift = fiber.iter().sum::<Complex64>() * scale;
                fiber.iter_mut().for_each(|a| *a += shift);
            }
        } else {
            sums.resize(stride, Complex64::new(0.0, 0.0));
            for start in (0..len).step_by(block) {
                let chunk = &mut buf[start..start + block];
                sums.copy_from_slice(&chunk[..stride]);
                for row in chunk[stride..].chunks_exact(stride) {
                    sums.iter_mut().zip(row).for_each(|(s, a)| *s += a);
                }
                sums.iter_mut().for_each(|s| *s *= scale);
                for row in chunk.chunks_exact_mut(stride) {
                    row.iter_mut().zip(sums.iter()).for_each(|(a, s)| *a += s);
                }
            }
        }
        stride = block;
    }
}

/// `Σ_q ⟨bra|P^{(q)}|ket⟩` with `P = |+⟩⟨+|`.
pub(crate) fn inversion_sandwich(bra: &[Complex64], ket: &[Complex64], radices: &[usize]) -> Complex64 {
    let len = ket.len();
    let mut stride = 1;
    let mut total = Complex64::new(0.0, 0.0);
    let mut sb = Vec::new();
    let mut sk = Vec::new();
    for &d in radices {
        let block = stride * d;
        let mut layer = Complex64::new(0.0, 0.0);
        if stride == 1 {
            for (b, k) in bra.chunks_exact(d).zip(ket.chunks_exact(d)) {
                layer += b.iter().sum::<Complex64>().conj() * k.iter().sum::<Complex64>();
            }
        } else {
            sb.resize(stride, Complex64::new(0.0, 0.0));
            sk.resize(stride, Complex64::new(0.0, 0.0));
            for start in (0..len).step_by(block) {
                sb.copy_from_slice(&bra[start..start + stride]);
                sk.copy_from_slice(&ket[start..start + stride]);
                for k in 1..d {
                    let off = start + k * stride;
                    sb.iter_mut().zip(&bra[off..off + stride]).for_each(|(s, a)| *s += a);
                    sk.iter_mut().zip(&ket[off..off + stride]).for_each(|(s, a)| *s += a);
                }
                layer += sb.iter().zip(&sk).map(|(b, k)| b.conj() * k).sum::<Complex64>();
            }
        }
        total += layer / d as f64;
        stride = block;
    }
    total
}

/// Fast path for `Rx(β)` on every qubit of power-of-two qudits.
pub(crate) fn apply_qubit_x(amps: &mut [Complex64], radices: &[usize], beta: f64) {
    let (s, c) = (beta / 2.0).sin_cos();
    let off_diag = Complex64::new(0.0, -s);
    let len = amps.len();
    let mut stride = 1;
    for &d in radices {
        for b in 0..d.trailing_zeros() {
            let t = stride << b;
            for start in (0..len).step_by(2 * t) {
                let (lo, hi) = amps[start..start + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = a * c + b * off_diag;
                    *y = a * off_diag + b * c;
                }
            }
        }
        stride *= d;
    }
}

/// Fourier-path qudit mixer: per qudit, transform into the `|f_j⟩` basis,
/// apply `e^{−iβ_j/2}` and transform back.
pub(crate) fn apply_qudit_fourier(amps: &mut [Complex64], radices: &[usize], angles: &[f64]) {
    let len = amps.len();
    let mut stride = 1;
    let mut fiber = Vec::new();
    let mut modes = Vec::new();
    for &d in radices {
        let omega: Vec<Complex64> = (0..d)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64))
            .collect();
        let phases: Vec<Complex64> = (0..d)
            .map(|j| if j < d - 1 { Complex64::from_polar(1.0, -angles[j] / 2.0) } else { Complex64::new(1.0, 0.0) })
            .collect();
        let norm = 1.0 / d as f64;
        fiber.resize(d, Complex64::new(0.0, 0.0));
        modes.resize(d, Complex64::new(0.0, 0.0));
        let block = stride * d;
        for start in (0..len).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for k in 0..d {
                    fiber[k] = amps[base + k * stride];
                }
                for j in 0..d {
                    let mut c = Complex64::new(0.0, 0.0);
                    for k in 0..d {
                        c += omega[(j * k) % d].conj() * fiber[k];
                    }
                    modes[j] = c * phases[j];
                }
                for k in 0..d {
                    let mut a = Complex64::new(0.0, 0.0);
                    for j in 0..d {
                        a += omega[(j * k) % d] * modes[j];
                    }
                    amps[base + k * stride] = a * norm;
                }
            }
        }
        stride = block;
    }
}
