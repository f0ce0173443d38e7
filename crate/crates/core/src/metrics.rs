//! Statistics of prepared QAOA distributions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cost::WalkProblem;
use crate::error::{Error, Result};
use crate::lattice::{crossings_of, distance_sq, Site};

/// Tolerance on cumulative sums when locating a quantile.
const CUMSUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyUnit {
    #[default]
    Nats,
    Bits,
}

impl EntropyUnit {
    pub fn name(self) -> &'static str {
        match self {
            EntropyUnit::Nats => "nats",
            EntropyUnit::Bits => "bits",
        }
    }
}

/// Probabilities of the configurations in `subset`, renormalized; `None`
/// when the subset carries no probability.
fn conditional(probs: &[f64], subset: impl Fn(usize) -> bool) -> Option<Vec<f64>> {
    let picked: Vec<f64> = probs
        .iter()
        .enumerate()
        .filter(|(x, _)| subset(*x))
        .map(|(_, &p)| p)
        .collect();
    let mass: f64 = picked.iter().sum();
    (mass > 0.0).then(|| picked.into_iter().map(|p| p / mass).collect())
}

/// `Σ p²` of the distribution conditioned on `subset`.
pub fn collision_entropy(probs: &[f64], subset: impl Fn(usize) -> bool) -> Option<f64> {
    conditional(probs, subset).map(|c| c.iter().map(|p| p * p).sum())
}

/// `−Σ p log p` of the distribution conditioned on `subset`.
pub fn shannon_entropy(probs: &[f64], subset: impl Fn(usize) -> bool, unit: EntropyUnit) -> Option<f64> {
    conditional(probs, subset).map(|c| {
        let nats: f64 = c.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
        match unit {
            EntropyUnit::Nats => nats,
            EntropyUnit::Bits => nats / std::f64::consts::LN_2,
        }
    })
}

/// `(E − E_min)/(E_random − E_min)`.
pub fn dimensionless_energy(e: f64, e_random: f64, e_min: f64) -> f64 {
    (e - e_min) / (e_random - e_min)
}

/// Reference energies for the dimensionless scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReference {
    pub e_random: f64,
    pub e_min: f64,
}

impl EnergyReference {
    /// Uniform mean and minimum of `values` over the configurations in
    /// `mask` (all of them when `mask` is `None`).
    pub fn over(values: &[f64], mask: Option<&[bool]>) -> Option<Self> {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for (i, &v) in values.iter().enumerate() {
            if mask.is_none_or(|m| m[i]) {
                n += 1;
                sum += v;
                min = min.min(v);
            }
        }
        (n > 0).then(|| Self { e_random: sum / n as f64, e_min: min })
    }

    pub fn scale(&self, e: f64) -> f64 {
        dimensionless_energy(e, self.e_random, self.e_min)
    }
}

/// `E[values | mask]` under `probs`; `None` when the mask has no mass.
pub fn conditional_expectation(probs: &[f64], values: &[f64], mask: &[bool]) -> Option<f64> {
    let (mut mass, mut total) = (0.0, 0.0);
    for ((&p, &v), &m) in probs.iter().zip(values).zip(mask) {
        if m {
            mass += p;
            total += p * v;
        }
    }
    (mass > 0.0).then(|| total / mass)
}

pub fn expectation(probs: &[f64], values: &[f64]) -> f64 {
    probs.iter().zip(values).map(|(p, v)| p * v).sum()
}

pub fn clash_probability(probs: &[f64], clashes: &[u32]) -> f64 {
    probs.iter().zip(clashes).filter(|(_, &c)| c > 0).map(|(p, _)| p).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingDistribution {
    /// `by_count[k]` = P(k self-crossings).
    pub by_count: Vec<f64>,
    /// P(endpoint ≠ origin).
    pub non_loop: f64,
    /// P(no crossing and endpoint = origin).
    pub self_avoiding_loop: f64,
}

pub fn crossing_distribution(probs: &[f64], problem: &WalkProblem) -> Result<CrossingDistribution> {
    let radices = problem.radices();
    let len: usize = radices.iter().product();
    if probs.len() != len {
        return Err(Error::Precondition(format!("{} probabilities for {len} configurations", probs.len())));
    }
    let mut by_count: Vec<f64> = Vec::new();
    let mut non_loop = 0.0;
    let mut saw = 0.0;
    for (x, &p) in probs.iter().enumerate() {
        let walk = problem.decode(x)?;
        let k = crossings_of(&walk.positions);
        if by_count.len() <= k {
            by_count.resize(k + 1, 0.0);
        }
        by_count[k] += p;
        let closed = distance_sq(walk.positions[0], walk.last()) == 0;
        if !closed {
            non_loop += p;
        } else if k == 0 {
            saw += p;
        }
    }
    Ok(CrossingDistribution {
        by_count,
        non_loop,
        self_avoiding_loop: saw,
    })
}

/// `1 − (1 − (1 + m)/N)^p` where `m` is the smallest 0-based index at
/// which the cumulative sum of `sorted_desc` reaches `q`.
pub fn random_guess_quantile(sorted_desc: &[f64], q: f64, p_queries: u32) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Precondition(format!("quantile must be in (0, 1], got {q}")));
    }
    if sorted_desc.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Precondition("probabilities must be sorted in non-increasing order".into()));
    }
    let n = sorted_desc.len();
    let mut cumulative = 0.0;
    let mut m = n - 1;
    for (i, &p) in sorted_desc.iter().enumerate() {
        cumulative += p;
        if cumulative >= q - CUMSUM_TOLERANCE {
            m = i;
            break;
        }
    }
    Ok(1.0 - (1.0 - (1 + m) as f64 / n as f64).powi(p_queries as i32))
}

/// Points `(q, P_random(q), q / P_random(q))` for each requested quantile.
pub fn quantile_curve(probs: &[f64], qs: &[f64], p_queries: u32) -> Result<Vec<(f64, f64, f64)>> {
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    qs.iter()
        .map(|&q| {
            let pr = random_guess_quantile(&sorted, q, p_queries)?;
            Ok((q, pr, q / pr))
        })
        .collect()
}

/// Least-squares line through `(x, log₁₀ y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub intercept: f64,
    pub slope: f64,
    /// Pearson correlation; NaN when either variable is constant.
    pub correlation: f64,
}

pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExpFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Precondition("need at least two (x, y) pairs of equal length".into()));
    }
    if ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Precondition("exponential fit needs positive y values".into()));
    }
    let ls: Vec<f64> = ys.iter().map(|y| y.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ls.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok(ExpFit {
        intercept: my - slope * mx,
        slope,
        correlation: if syy == 0.0 { f64::NAN } else { sxy / (sxx * syy).sqrt() },
    })
}

/// Root-mean-square distance between corresponding atoms, no superposition.
pub fn rms_distance(a: &[Site], b: &[Site], unit_length: f64) -> f64 {
    let total: i64 = a.iter().zip(b).map(|(&x, &y)| distance_sq(x, y)).sum();
    (total as f64 / a.len() as f64).sqrt() * unit_length
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// One row of `rank` coordinates per input item.
    pub points: Vec<Vec<f64>>,
    /// Eigenvalues of the double-centred Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Kruskal stress `√(Σ(d̂ − d)² / Σ d²)` of the embedded distances.
    pub stress: f64,
}

/// Classical (Torgerson) multidimensional scaling of a distance matrix.
pub fn classical_mds(distances: &[Vec<f64>], rank: usize) -> Result<Embedding> {
    let n = distances.len();
    if n == 0 {
        return Err(Error::Precondition("nothing to embed".into()));
    }
    if distances.iter().any(|row| row.len() != n) {
        return Err(Error::Precondition("distance matrix must be square".into()));
    }
    let d2 = DMatrix::from_fn(n, n, |i, j| distances[i][j].powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..rank)
                .map(|r| match order.get(r) {
                    Some(&k) => eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt(),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let e: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            num += (e - distances[i][j]).powi(2);
            den += distances[i][j].powi(2);
        }
    }
    Ok(Embedding {
        points,
        eigenvalues,
        stress: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
    })
}

/// Two-dimensional MDS over pairwise RMS backbone distances.
pub fn mds_embed(conformations: &[Vec<Site>], unit_length: f64) -> Result<Embedding> {
    let n = conformations.len();
    let mut distances = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = rms_distance(&conformations[i], &conformations[j], unit_length);
            distances[i][j] = d;
            distances[j][i] = d;
        }
    }
    classical_mds(&distances, 2)
}

/// Indices of the `k` largest probabilities, ties to the lower index.
pub fn top_k(probs: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Probability mass per bin of `values` over `[lo, hi]` among masked
/// configurations; returns `(bin_lo, bin_hi, mass)`.
pub fn energy_histogram(
    probs: &[f64],
    values: &[f64],
    mask: Option<&[bool]>,
    bins: usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::Precondition(format!("histogram needs bins ≥ 1 and hi > lo, got {bins}, [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut mass = vec![0.0; bins];
    for (i, (&p, &v)) in probs.iter().zip(values).enumerate() {
        if mask.is_some_and(|m| !m[i]) || v < lo || v > hi {
            continue;
        }
        let b = (((v - lo) / width) as usize).min(bins - 1);
        mass[b] += p;
    }
    Ok(mass
        .into_iter()
        .enumerate()
        .map(|(b, m)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, m))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_saw_cost, WalkProblem};
    use crate::lattice::{Encoding, EncodingMode, LatticeKind};

    #[test]
    fn entropy_examples() {
        let uniform = vec![0.125; 8];
        assert!((collision_entropy(&uniform, |_| true).unwrap() - 0.125).abs() < 1e-15);
        assert!((shannon_entropy(&uniform, |_| true, EntropyUnit::Nats).unwrap() - 8f64.ln()).abs() < 1e-14);
        assert!((shannon_entropy(&uniform, |_| true, EntropyUnit::Bits).unwrap() - 3.0).abs() < 1e-14);
        let det = vec![0.0, 1.0, 0.0];
        assert_eq!(collision_entropy(&det, |_| true), Some(1.0));
        assert_eq!(shannon_entropy(&det, |_| true, EntropyUnit::Nats), Some(0.0));
        let half = vec![0.5, 0.5];
        assert_eq!(collision_entropy(&half, |_| true), Some(0.5));
        assert!((shannon_entropy(&half, |_| true, EntropyUnit::Nats).unwrap() - 2f64.ln()).abs() < 1e-15);
        // conditioning renormalizes
        let probs = vec![0.1, 0.1, 0.8];
        assert_eq!(collision_entropy(&probs, |x| x < 2), Some(0.5));
        assert_eq!(collision_entropy(&probs, |_| false), None);
    }

    #[test]
    fn dimensionless_examples() {
        assert_eq!(dimensionless_energy(5.0, 5.0, 1.0), 1.0);
        assert_eq!(dimensionless_energy(1.0, 5.0, 1.0), 0.0);
        let values = [3.0, 1.0, 2.0, 6.0];
        let r = EnergyReference::over(&values, None).unwrap();
        let uniform = [0.25; 4];
        assert_eq!(r.scale(expectation(&uniform, &values)), 1.0);
        let masked = EnergyReference::over(&values, Some(&[true, false, true, false])).unwrap();
        assert_eq!(masked, EnergyReference { e_random: 2.5, e_min: 2.0 });
    }

    #[test]
    fn clash_probability_examples() {
        let clashes = [0, 2, 0, 1];
        assert_eq!(clash_probability(&[0.5, 0.0, 0.5, 0.0], &clashes), 0.0);
        assert_eq!(clash_probability(&[0.0, 0.7, 0.0, 0.3], &clashes), 1.0);
        assert_eq!(clash_probability(&[0.25; 4], &clashes), 0.5);
    }

    #[test]
    fn crossing_distribution_uniform() {
        let problem = WalkProblem::new(10, Encoding::new(LatticeKind::Square, EncodingMode::Absolute), 0.2);
        let probs = vec![1.0 / 65536.0; 65536];
        let d = crossing_distribution(&probs, &problem).unwrap();
        assert!((d.self_avoiding_loop - 44.0 / 65536.0).abs() < 1e-15);
        assert!((d.by_count.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let cost = build_saw_cost(&problem).unwrap();
        let zeros: Vec<usize> = (0..65536).filter(|&x| cost.values()[x] == 0.0).collect();
        let mut on_loops = vec![0.0; 65536];
        for &x in &zeros {
            on_loops[x] = 1.0 / zeros.len() as f64;
        }
        let d = crossing_distribution(&on_loops, &problem).unwrap();
        assert_eq!(d.non_loop, 0.0);
        assert!((d.self_avoiding_loop - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_examples() {
        let uniform = [0.25; 4];
        assert!((random_guess_quantile(&uniform, 0.25, 1).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(random_guess_quantile(&uniform, 1.0, 1).unwrap(), 1.0);
        assert_eq!(random_guess_quantile(&[0.7, 0.2, 0.1], 1.0, 5).unwrap(), 1.0);
        assert!(random_guess_quantile(&uniform, 0.0, 1).is_err());
        assert!(random_guess_quantile(&[0.1, 0.9], 0.5, 1).is_err());
        let curve = quantile_curve(&[0.1, 0.6, 0.3], &[0.5, 0.9], 1).unwrap();
        assert!((curve[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((curve[0].2 - 1.5).abs() < 1e-14);
    }

    #[test]
    fn exponential_fit_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 10f64.powf(-0.776 - 0.238 * x)).collect();
        let f = fit_exponential(&xs, &ys).unwrap();
        assert!((f.slope + 0.238).abs() < 1e-12);
        assert!((f.intercept + 0.776).abs() < 1e-12);
        assert!((f.correlation + 1.0).abs() < 1e-12);
        let flat = fit_exponential(&xs, &[0.3; 4]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!(flat.correlation.is_nan());
    }

    #[test]
    fn mds_examples() {
        let s = 3f64.sqrt();
        let tri = vec![vec![0.0, 2.0, 2.0], vec![2.0, 0.0, 2.0], vec![2.0, 2.0, 0.0]];
        let e = classical_mds(&tri, 2).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                let d = ((e.points[i][0] - e.points[j][0]).powi(2) + (e.points[i][1] - e.points[j][1]).powi(2)).sqrt();
                assert!((d - 2.0).abs() < 1e-8);
            }
        }
        assert!(e.stress < 1e-8);
        let one = classical_mds(&[vec![0.0]], 2).unwrap();
        assert_eq!(one.points, vec![vec![0.0, 0.0]]);
        let sites = vec![vec![[0, 0, 0], [1, 1, 1]], vec![[0, 0, 0], [1, -1, -1]]];
        let e = mds_embed(&sites, s).unwrap();
        let d = ((e.points[0][0] - e.points[1][0]).powi(2) + (e.points[0][1] - e.points[1][1]).powi(2)).sqrt();
        assert!((d - rms_distance(&sites[0], &sites[1], s)).abs() < 1e-8);
    }

    #[test]
    fn histogram_and_top_k() {
        let h = energy_histogram(&[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], None, 2, 0.0, 2.0).unwrap();
        assert_eq!(h.len(), 2);
        assert!((h[0].2 - 0.2).abs() < 1e-15 && (h[1].2 - 0.8).abs() < 1e-15);
        assert_eq!(top_k(&[0.1, 0.4, 0.4, 0.1], 3), vec![1, 2, 0]);
    }
}
