//! Limited-memory BFGS with box constraints handled by projection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsSettings {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once the projected gradient's Euclidean norm drops below this.
    pub gradient_tolerance: f64,
    /// Stop once a step improves the objective by less than this, relative
    /// to `max(|f|, 1)`.
    pub function_tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            function_tolerance: 1e-12,
            armijo: 1e-4,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Norm of the projected gradient at `x`.
    pub gradient_norm: f64,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

/// Gradient with components zeroed where a bound blocks descent.
fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0` (clamped
/// into the box). `f` returns the value and gradient.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &LbfgsSettings,
) -> Result<Minimum> {
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::Precondition("bounds do not match the dimension".into()));
    }
    if lower.iter().zip(upper).any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::Precondition("lower bound above upper bound".into()));
    }
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(Error::NonFinite { iteration: 0, value: fx });
    }
    let initial_value = fx;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut pg = projected_gradient(&x, &g, lower, upper);

    while iterations < settings.max_iterations && n > 0 {
        if norm(&pg) <= settings.gradient_tolerance {
            break;
        }
        let free: Vec<bool> = pg.iter().zip(&g).map(|(p, gi)| *p != 0.0 || *gi == 0.0).collect();
        let mut direction = two_loop(&pg, &history, &free);
        if dot(&direction, &g) >= 0.0 {
            history.clear();
            direction = pg.iter().map(|v| -v).collect();
        }

        let mut step = if history.is_empty() { (1.0 / norm(&pg)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..settings.max_line_search {
            let mut trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if decrease >= 0.0 {
                step *= 0.5;
                continue;
            }
            let (ft, gt) = f(&trial);
            evaluations += 1;
            if !ft.is_finite() {
                return Err(Error::NonFinite { iteration: iterations + 1, value: ft });
            }
            if ft <= fx + settings.armijo * decrease {
                accepted = Some((trial, ft, gt, moved));
                break;
            }
            step *= 0.5;
        }

        let Some((trial, ft, gt, s)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        iterations += 1;
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - ft;
        x = trial;
        fx = ft;
        g = gt;
        pg = projected_gradient(&x, &g, lower, upper);
        if improvement <= settings.function_tolerance * fx.abs().max(1.0) {
            break;
        }
    }

    Ok(Minimum {
        gradient_norm: norm(&pg),
        x,
        value: fx,
        initial_value,
        iterations,
        evaluations,
    })
}

/// `−H·q` restricted to the free coordinates.
fn two_loop(q0: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let mask = |v: &mut Vec<f64>| {
        for (vi, &f) in v.iter_mut().zip(free) {
            if !f {
                *vi = 0.0;
            }
        }
    };
    let mut q = q0.to_vec();
    mask(&mut q);
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    mask(&mut q);
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        (f, g)
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let inf = f64::INFINITY;
        let m = minimize(rosenbrock, &[-1.2, 1.0], &[-inf; 2], &[inf; 2], &LbfgsSettings::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
        assert!(m.value <= m.initial_value);
    }

    #[test]
    fn active_bound_is_respected() {
        // minimum of (x-3)² + (y+1)² over [0,2]×[0,2] is at (2,0)
        let f = |x: &[f64]| ((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]);
        let m = minimize(f, &[0.5, 1.5], &[0.0, 0.0], &[2.0, 2.0], &LbfgsSettings::default()).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-12 && m.x[1].abs() < 1e-12);
        assert_eq!(m.gradient_norm, 0.0);
    }

    #[test]
    fn start_at_minimum_stays() {
        let f = |x: &[f64]| (x[0] * x[0] + 2.0 * x[1] * x[1], vec![2.0 * x[0], 4.0 * x[1]]);
        let m = minimize(f, &[0.0, 0.0], &[-1.0; 2], &[1.0; 2], &LbfgsSettings::default()).unwrap();
        assert_eq!(m.x, vec![0.0, 0.0]);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn deterministic() {
        let inf = f64::INFINITY;
        let s = LbfgsSettings::default();
        let a = minimize(rosenbrock, &[0.3, -0.4], &[-inf; 2], &[inf; 2], &s).unwrap();
        let b = minimize(rosenbrock, &[0.3, -0.4], &[-inf; 2], &[inf; 2], &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_aborts() {
        let f = |x: &[f64]| (if x[0] < 0.5 { f64::NAN } else { -x[0] }, vec![-1.0]);
        let err = minimize(f, &[1.0], &[-10.0], &[10.0], &LbfgsSettings::default());
        assert!(err.is_ok());
        let f = |x: &[f64]| (x[0].ln(), vec![1.0 / x[0]]);
        let err = minimize(f, &[1.0], &[-10.0], &[10.0], &LbfgsSettings::default());
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }
}
