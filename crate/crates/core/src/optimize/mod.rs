//! Variational-angle search for QAOA schedules.
//!
//! Optimizers see the coordinates `[β_0.., β_1.., …, γ_0/s, …, γ_{p−1}/s]`
//! where `s` is the schedule's `gamma_scale`; angle ranges and bounds are
//! expressed in those coordinates.

mod lbfgs;

pub use lbfgs::{minimize, LbfgsSettings, Minimum};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostVector;
use crate::error::{Error, Result};
use crate::qsim::{
    energy_of, evolve_in_place, generator_sandwiches, mixer_in_place, phase_factors, uniform_state, Mixer, Origin,
    Schedule,
};

/// Box for random draws and for local optimization, in optimizer
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRanges {
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
}

impl AngleRanges {
    /// `β ∈ [−2π, 2π]`, `γ ∈ [−10π, 10π]`.
    pub fn saw() -> Self {
        Self {
            beta: (-2.0 * PI, 2.0 * PI),
            gamma: (-10.0 * PI, 10.0 * PI),
        }
    }

    /// `β ∈ [−2π, 2π]`, scaled `γ ∈ [−2π, 2π]`.
    pub fn peptide() -> Self {
        Self {
            beta: (-2.0 * PI, 2.0 * PI),
            gamma: (-2.0 * PI, 2.0 * PI),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is empty or unbounded")));
            }
        }
        Ok(())
    }

    fn bounds(&self, p: usize, modes: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lower = vec![self.beta.0; p * modes];
        let mut upper = vec![self.beta.1; p * modes];
        lower.extend(std::iter::repeat_n(self.gamma.0, p));
        upper.extend(std::iter::repeat_n(self.gamma.1, p));
        (lower, upper)
    }
}

/// Flattens a schedule into optimizer coordinates.
pub fn to_coordinates(schedule: &Schedule) -> Vec<f64> {
    let mut x: Vec<f64> = schedule.betas.iter().flatten().copied().collect();
    x.extend(schedule.gammas.iter().map(|g| g / schedule.gamma_scale));
    x
}

pub fn from_coordinates(x: &[f64], p: usize, modes: usize, mixer: Mixer, gamma_scale: f64, origin: Origin) -> Schedule {
    Schedule {
        betas: x[..p * modes].chunks(modes.max(1)).map(<[f64]>::to_vec).collect(),
        gammas: x[p * modes..].iter().map(|g| g * gamma_scale).collect(),
        mixer,
        gamma_scale,
        origin,
    }
}

/// Reusable buffers for repeated energy and gradient evaluation.
pub struct Evaluator<'a> {
    cost: &'a CostVector,
    mixer: Mixer,
    modes: usize,
    psi: Vec<Complex64>,
    mu: Vec<Complex64>,
    /// Per-layer phase factors from the last gradient evaluation.
    phases: Vec<Vec<Complex64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(cost: &'a CostVector, mixer: Mixer) -> Result<Self> {
        let modes = mixer.modes(cost.radices())?;
        Ok(Self {
            cost,
            mixer,
            modes,
            psi: Vec::new(),
            mu: Vec::new(),
            phases: Vec::new(),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn mixer(&self) -> Mixer {
        self.mixer
    }

    pub fn cost(&self) -> &'a CostVector {
        self.cost
    }

    fn prepare(&mut self, schedule: &Schedule) -> Result<()> {
        if schedule.mixer != self.mixer {
            return Err(Error::Precondition(format!(
                "schedule uses mixer {} but the evaluator was built for {}",
                schedule.mixer.name(),
                self.mixer.name()
            )));
        }
        schedule.validate(self.cost.radices())?;
        let uniform = uniform_state(self.cost.radices()).amplitudes;
        self.psi = uniform;
        evolve_in_place(&mut self.psi, self.cost, schedule);
        Ok(())
    }

    /// `⟨ψ(schedule)|H_C|ψ(schedule)⟩`.
    pub fn energy(&mut self, schedule: &Schedule) -> Result<f64> {
        self.prepare(schedule)?;
        Ok(energy_of(&self.psi, self.cost))
    }

    /// Probabilities of the state prepared by the last evaluation.
    pub fn probabilities(&self) -> Vec<f64> {
        self.psi.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Energy and its gradient with respect to `(β, γ)` as applied, laid
    /// out like [`to_coordinates`] but without the `gamma_scale` factor.
    /// One forward evolution and one backward sweep that uncomputes the
    /// state alongside the adjoint vector.
    pub fn energy_and_gradient(&mut self, schedule: &Schedule) -> Result<(f64, Vec<f64>)> {
        if schedule.mixer != self.mixer {
            return Err(Error::Precondition(format!(
                "schedule uses mixer {} but the evaluator was built for {}",
                schedule.mixer.name(),
                self.mixer.name()
            )));
        }
        schedule.validate(self.cost.radices())?;
        let radices = self.cost.radices();
        let p = schedule.depth();
        if self.phases.len() < p {
            self.phases.resize_with(p, Vec::new);
        }
        self.psi = uniform_state(radices).amplitudes;
        for (j, (betas, &gamma)) in schedule.betas.iter().zip(&schedule.gammas).enumerate() {
            phase_factors(self.cost, gamma, &mut self.phases[j]);
            self.psi.iter_mut().zip(&self.phases[j]).for_each(|(a, f)| *a *= f);
            mixer_in_place(&mut self.psi, radices, self.mixer, betas);
        }
        let energy = energy_of(&self.psi, self.cost);
        let modes = self.modes;
        let mut grad = vec![0.0; p * (modes + 1)];
        self.mu.clear();
        self.mu
            .extend(self.psi.iter().zip(self.cost.values()).map(|(a, v)| a * v));
        let mut negated = vec![0.0; modes];
        let mut sandwiches = vec![Complex64::new(0.0, 0.0); modes];
        for j in (0..p).rev() {
            generator_sandwiches(&self.mu, &self.psi, radices, self.mixer, &mut sandwiches);
            for (slot, s) in grad[j * modes..(j + 1) * modes].iter_mut().zip(&sandwiches) {
                *slot = s.im;
            }
            for (n, b) in negated.iter_mut().zip(&schedule.betas[j]) {
                *n = -b;
            }
            mixer_in_place(&mut self.psi, radices, self.mixer, &negated);
            mixer_in_place(&mut self.mu, radices, self.mixer, &negated);
            let mut c = Complex64::new(0.0, 0.0);
            for (((m, s), v), f) in self
                .mu
                .iter_mut()
                .zip(self.psi.iter_mut())
                .zip(self.cost.values())
                .zip(&self.phases[j])
            {
                c += m.conj() * *s * v;
                let back = f.conj();
                *m *= back;
                *s *= back;
            }
            grad[p * modes + j] = c.im;
        }
        Ok((energy, grad))
    }
}

pub fn objective(cost: &CostVector, schedule: &Schedule) -> Result<f64> {
    Evaluator::new(cost, schedule.mixer)?.energy(schedule)
}

/// Exact gradient with respect to the applied angles.
pub fn gradient(cost: &CostVector, schedule: &Schedule) -> Result<Vec<f64>> {
    Ok(Evaluator::new(cost, schedule.mixer)?.energy_and_gradient(schedule)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRun {
    pub initial: Schedule,
    pub schedule: Schedule,
    pub initial_objective: f64,
    pub objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub seed: Option<u64>,
}

impl OptimizationRun {
    pub fn strategy(&self) -> Origin {
        self.schedule.origin
    }
}

/// Projected L-BFGS from `initial` inside `ranges`.
pub fn local_optimize(
    evaluator: &mut Evaluator,
    initial: &Schedule,
    ranges: &AngleRanges,
    settings: &LbfgsSettings,
) -> Result<OptimizationRun> {
    ranges.validate()?;
    initial.validate(evaluator.cost.radices())?;
    let p = initial.depth();
    let modes = evaluator.modes;
    let scale = initial.gamma_scale;
    let (lower, upper) = ranges.bounds(p, modes);
    let mut x0 = to_coordinates(initial);
    for ((v, lo), hi) in x0.iter_mut().zip(&lower).zip(&upper) {
        *v = v.clamp(*lo, *hi);
    }
    let start = from_coordinates(&x0, p, modes, initial.mixer, scale, initial.origin);
    let mixer = initial.mixer;
    let origin = initial.origin;
    let result = minimize(
        |x| {
            let schedule = from_coordinates(x, p, modes, mixer, scale, origin);
            let (e, mut g) = evaluator
                .energy_and_gradient(&schedule)
                .expect("schedule shape checked up front");
            for v in &mut g[p * modes..] {
                *v *= scale;
            }
            (e, g)
        },
        &x0,
        &lower,
        &upper,
        settings,
    )?;
    Ok(OptimizationRun {
        initial: start,
        schedule: from_coordinates(&result.x, p, modes, mixer, scale, origin),
        initial_objective: result.initial_value,
        objective: result.value,
        iterations: result.iterations,
        gradient_norm: result.gradient_norm,
        seed: None,
    })
}

/// Seed for attempt `attempt` at depth `p`, independent of thread layout.
pub fn attempt_seed(seed: u64, p: usize, attempt: usize) -> u64 {
    let mut z = seed ^ ((p as u64) << 40) ^ attempt as u64;
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One uniform draw inside `ranges`.
pub fn random_schedule(p: usize, modes: usize, ranges: &AngleRanges, mixer: Mixer, gamma_scale: f64, seed: u64) -> Schedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..p * modes).map(|_| rng.gen_range(ranges.beta.0..ranges.beta.1)).collect();
    x.extend((0..p).map(|_| rng.gen_range(ranges.gamma.0..ranges.gamma.1)));
    from_coordinates(&x, p, modes, mixer, gamma_scale, Origin::Random)
}

/// `attempts` seeded draws; draw `i` uses [`attempt_seed`]`(seed, p, i)`.
pub fn random_init(
    p: usize,
    attempts: usize,
    ranges: &AngleRanges,
    mixer: Mixer,
    modes: usize,
    gamma_scale: f64,
    seed: u64,
) -> Vec<(u64, Schedule)> {
    (0..attempts)
        .map(|i| {
            let s = attempt_seed(seed, p, i);
            (s, random_schedule(p, modes, ranges, mixer, gamma_scale, s))
        })
        .collect()
}

/// `β_j = −((p−j)/p)Δt` on the first mixer mode (others 0) and scaled
/// `γ_j = ((j+1)/p)Δt`.
pub fn annealing_schedule(p: usize, delta_t: f64, mixer: Mixer, modes: usize, gamma_scale: f64) -> Schedule {
    let pf = p as f64;
    Schedule {
        betas: (0..p)
            .map(|j| {
                let mut layer = vec![0.0; modes];
                layer[0] = -((p - j) as f64 / pf) * delta_t;
                layer
            })
            .collect(),
        gammas: (0..p).map(|j| ((j + 1) as f64 / pf) * delta_t * gamma_scale).collect(),
        mixer,
        gamma_scale,
        origin: Origin::AnnealingSchedule,
    }
}

/// Result of optimizing `Δt` alone and then all angles from there.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealingRuns {
    pub delta_t: f64,
    pub schedule_run: OptimizationRun,
    pub init_run: OptimizationRun,
    /// Every `Δt` attempt, in attempt order.
    pub attempts: Vec<OptimizationRun>,
}

/// Largest `Δt` keeping the annealing schedule inside `ranges`.
pub fn max_delta_t(ranges: &AngleRanges) -> f64 {
    (-ranges.beta.0).min(ranges.gamma.1).max(0.0)
}

pub fn anneal_strategies(
    cost: &CostVector,
    p: usize,
    mixer: Mixer,
    gamma_scale: f64,
    attempts: usize,
    ranges: &AngleRanges,
    settings: &LbfgsSettings,
    seed: u64,
) -> Result<AnnealingRuns> {
    if p == 0 || attempts == 0 {
        return Err(Error::Precondition("annealing needs p ≥ 1 and at least one attempt".into()));
    }
    ranges.validate()?;
    let modes = mixer.modes(cost.radices())?;
    let dt_max = max_delta_t(ranges);
    let runs: Vec<(f64, OptimizationRun)> = (0..attempts)
        .into_par_iter()
        .map_init(
            || Evaluator::new(cost, mixer).expect("mixer checked"),
            |ev, i| {
                let s = attempt_seed(seed, p, i);
                let dt0 = ChaCha8Rng::seed_from_u64(s).gen_range(0.0..=dt_max);
                let result = minimize(
                    |x| {
                        let sched = annealing_schedule(p, x[0], mixer, modes, gamma_scale);
                        let (e, g) = ev.energy_and_gradient(&sched).expect("valid schedule");
                        let pf = p as f64;
                        let mut d = 0.0;
                        for j in 0..p {
                            d -= g[j * modes] * (p - j) as f64 / pf;
                            d += g[p * modes + j] * gamma_scale * (j + 1) as f64 / pf;
                        }
                        (e, vec![d])
                    },
                    &[dt0],
                    &[0.0],
                    &[dt_max],
                    settings,
                )?;
                Ok((
                    result.x[0],
                    OptimizationRun {
                        initial: annealing_schedule(p, dt0, mixer, modes, gamma_scale),
                        schedule: annealing_schedule(p, result.x[0], mixer, modes, gamma_scale),
                        initial_objective: result.initial_value,
                        objective: result.value,
                        iterations: result.iterations,
                        gradient_norm: result.gradient_norm,
                        seed: Some(s),
                    },
                ))
            },
        )
        .collect::<Result<_>>()?;
    let best = best_index(runs.iter().map(|(_, r)| r.objective));
    let (delta_t, schedule_run) = runs[best].clone();
    let mut start = schedule_run.schedule.clone();
    start.origin = Origin::AnnealingInit;
    let mut ev = Evaluator::new(cost, mixer)?;
    let mut init_run = local_optimize(&mut ev, &start, ranges, settings)?;
    init_run.seed = schedule_run.seed;
    Ok(AnnealingRuns {
        delta_t,
        schedule_run,
        init_run,
        attempts: runs.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Index of the smallest value; the first one wins ties.
fn best_index(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multistart {
    pub runs: Vec<OptimizationRun>,
    pub best: usize,
}

impl Multistart {
    pub fn best_run(&self) -> &OptimizationRun {
        &self.runs[self.best]
    }
}

/// Optimizes every start in parallel and keeps the lowest final objective
/// (earliest start on ties).
pub fn multistart(
    cost: &CostVector,
    starts: Vec<(Option<u64>, Schedule)>,
    ranges: &AngleRanges,
    settings: &LbfgsSettings,
) -> Result<Multistart> {
    let Some((_, first)) = starts.first() else {
        return Err(Error::Precondition("multistart needs at least one start".into()));
    };
    let mixer = first.mixer;
    Evaluator::new(cost, mixer)?;
    let runs: Vec<OptimizationRun> = starts
        .into_par_iter()
        .map_init(
            || Evaluator::new(cost, mixer).expect("mixer checked"),
            |ev, (seed, start)| {
                let mut run = local_optimize(ev, &start, ranges, settings)?;
                run.seed = seed;
                Ok(run)
            },
        )
        .collect::<Result<_>>()?;
    let best = best_index(runs.iter().map(|r| r.objective));
    Ok(Multistart { runs, best })
}

/// Depth `p + 1` start: the `p` optimal angles followed by `2a_{p−1} − a_{p−2}`
/// for every β mode and for γ.
pub fn extrapolate(schedule: &Schedule) -> Result<Schedule> {
    let p = schedule.depth();
    if p < 2 {
        return Err(Error::Precondition(format!("extrapolation needs p ≥ 2, got {p}")));
    }
    let mut next = schedule.clone();
    let extra = schedule.betas[p - 1]
        .iter()
        .zip(&schedule.betas[p - 2])
        .map(|(a, b)| 2.0 * a - b)
        .collect();
    next.betas.push(extra);
    next.gammas.push(2.0 * schedule.gammas[p - 1] - schedule.gammas[p - 2]);
    next.origin = Origin::Extrapolated;
    Ok(next)
}

/// `1/σ` of the cost spectrum, or 1 for a flat spectrum.
pub fn rescale_gamma(cost: &CostVector) -> f64 {
    let sigma = cost.std_dev();
    if sigma > 0.0 && sigma.is_finite() {
        1.0 / sigma
    } else {
        1.0
    }
}

/// How the non-extrapolated candidate at each depth is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Random,
    AnnealingSchedule,
    AnnealingInit,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Random => "random",
            InitKind::AnnealingSchedule => "annealing_schedule",
            InitKind::AnnealingInit => "annealing_init",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitStrategy {
    pub kind: InitKind,
    pub attempts: usize,
    pub ranges: AngleRanges,
}

/// Iteration cap applied from `from_p` upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Taper {
    pub from_p: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub strategy: InitStrategy,
    pub mixer: Mixer,
    pub gamma_scale: f64,
    pub depths: std::ops::RangeInclusive<usize>,
    /// Fresh (non-extrapolated) optimization only up to this depth.
    pub fresh_max_p: usize,
    /// First depth seeded by extrapolation; `None` disables it.
    pub extrapolate_from: Option<usize>,
    pub lbfgs: LbfgsSettings,
    /// Caps on `lbfgs.max_iterations` at larger depths; the entry with the
    /// largest `from_p ≤ p` applies.
    pub taper: Vec<Taper>,
    pub seed: u64,
}

impl SweepSettings {
    pub fn lbfgs_at(&self, p: usize) -> LbfgsSettings {
        let mut lbfgs = self.lbfgs;
        if let Some(t) = self.taper.iter().filter(|t| t.from_p <= p).max_by_key(|t| t.from_p) {
            lbfgs.max_iterations = lbfgs.max_iterations.min(t.max_iterations);
        }
        lbfgs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthResult {
    pub p: usize,
    pub best: OptimizationRun,
    /// Every run made at this depth, fresh attempts first.
    pub runs: Vec<OptimizationRun>,
}

/// Optimizes each depth in turn, retaining the better of the fresh result
/// and the run started from the extrapolated previous optimum.
pub fn depth_sweep(
    cost: &CostVector,
    settings: &SweepSettings,
    mut on_depth: impl FnMut(&DepthResult) -> Result<()>,
) -> Result<Vec<DepthResult>> {
    if settings.strategy.attempts == 0 {
        return Err(Error::Config("attempts must be ≥ 1".into()));
    }
    let modes = settings.mixer.modes(cost.radices())?;
    let ranges = settings.strategy.ranges;
    let mut results: Vec<DepthResult> = Vec::new();
    for p in settings.depths.clone() {
        if p == 0 {
            let schedule = Schedule {
                gamma_scale: settings.gamma_scale,
                ..Schedule::empty(settings.mixer)
            };
            let e = objective(cost, &schedule)?;
            let run = OptimizationRun {
                initial: schedule.clone(),
                schedule,
                initial_objective: e,
                objective: e,
                iterations: 0,
                gradient_norm: 0.0,
                seed: None,
            };
            let r = DepthResult { p, best: run.clone(), runs: vec![run] };
            on_depth(&r)?;
            results.push(r);
            continue;
        }
        let lbfgs = settings.lbfgs_at(p);
        let mut runs = Vec::new();
        if p <= settings.fresh_max_p {
            match settings.strategy.kind {
                InitKind::Random => {
                    let starts = random_init(p, settings.strategy.attempts, &ranges, settings.mixer, modes, settings.gamma_scale, settings.seed)
                        .into_iter()
                        .map(|(s, sch)| (Some(s), sch))
                        .collect();
                    runs.extend(multistart(cost, starts, &ranges, &lbfgs)?.runs);
                }
                kind => {
                    let a = anneal_strategies(
                        cost,
                        p,
                        settings.mixer,
                        settings.gamma_scale,
                        settings.strategy.attempts,
                        &ranges,
                        &lbfgs,
                        settings.seed,
                    )?;
                    runs.push(if kind == InitKind::AnnealingSchedule { a.schedule_run } else { a.init_run });
                }
            }
        }
        let previous = results.last().filter(|r| r.p + 1 == p && r.p >= 2);
        let extrapolating = settings.extrapolate_from.is_some_and(|from| p >= from);
        if let (true, Some(prev)) = (extrapolating, previous) {
            // annealing-schedule runs stay on the schedule family
            if settings.strategy.kind == InitKind::AnnealingSchedule {
                if runs.is_empty() {
                    let a = anneal_strategies(
                        cost,
                        p,
                        settings.mixer,
                        settings.gamma_scale,
                        settings.strategy.attempts,
                        &ranges,
                        &lbfgs,
                        settings.seed,
                    )?;
                    runs.push(a.schedule_run);
                }
            } else {
                let start = extrapolate(&prev.best.schedule)?;
                let mut ev = Evaluator::new(cost, settings.mixer)?;
                runs.push(local_optimize(&mut ev, &start, &ranges, &lbfgs)?);
            }
        }
        if runs.is_empty() {
            return Err(Error::Config(format!(
                "depth {p} has neither fresh optimization nor an extrapolation source"
            )));
        }
        let best = runs[best_index(runs.iter().map(|r| r.objective))].clone();
        let r = DepthResult { p, best, runs };
        on_depth(&r)?;
        results.push(r);
    }
    Ok(results)
}

/// Probability mass of valid configurations under each penalty weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyRow {
    pub lambda: f64,
    pub p: usize,
    pub valid_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyReport {
    pub rows: Vec<PenaltyRow>,
    /// λ with the largest mean valid probability over the depths.
    pub chosen: f64,
}

/// For each λ, builds the cost with `build(λ)` (returning the cost and a
/// validity mask), optimizes at every depth in `depths` by random
/// multistart and scores λ by the mean valid probability. Ties go to the
/// smaller λ.
#[allow(clippy::too_many_arguments)]
pub fn tune_penalty(
    grid: &[f64],
    depths: &[usize],
    mut build: impl FnMut(f64) -> Result<(CostVector, Vec<bool>)>,
    mixer: Mixer,
    attempts: usize,
    ranges: &AngleRanges,
    rescale: bool,
    settings: &LbfgsSettings,
    seed: u64,
) -> Result<PenaltyReport> {
    if grid.is_empty() || depths.is_empty() {
        return Err(Error::Config("penalty grid and depth list must be non-empty".into()));
    }
    let mut rows = Vec::new();
    let mut scored: Vec<(f64, f64)> = Vec::new();
    for &lambda in grid {
        let (cost, valid) = build(lambda)?;
        let modes = mixer.modes(cost.radices())?;
        let scale = if rescale { rescale_gamma(&cost) } else { 1.0 };
        let mut total = 0.0;
        for &p in depths {
            let starts = random_init(p, attempts, ranges, mixer, modes, scale, seed)
                .into_iter()
                .map(|(s, sch)| (Some(s), sch))
                .collect();
            let best = multistart(&cost, starts, ranges, settings)?.best_run().schedule.clone();
            let mut ev = Evaluator::new(&cost, mixer)?;
            ev.energy(&best)?;
            let prob: f64 = ev
                .probabilities()
                .iter()
                .zip(&valid)
                .filter(|(_, &v)| v)
                .map(|(q, _)| q)
                .sum();
            total += prob;
            rows.push(PenaltyRow { lambda, p, valid_probability: prob });
        }
        scored.push((lambda, total / depths.len() as f64));
    }
    let mut chosen = scored[0];
    for &(lambda, score) in &scored[1..] {
        if score > chosen.1 || (score == chosen.1 && lambda < chosen.0) {
            chosen = (lambda, score);
        }
    }
    Ok(PenaltyReport { rows, chosen: chosen.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_saw_cost, WalkProblem};
    use crate::lattice::{Encoding, EncodingMode, LatticeKind};

    fn saw(steps: usize, mode: EncodingMode) -> CostVector {
        build_saw_cost(&WalkProblem::new(steps, Encoding::new(LatticeKind::Square, mode), 0.2)).unwrap()
    }

    #[test]
    fn depth_zero_is_mean() {
        let c = saw(6, EncodingMode::Absolute);
        let e = objective(&c, &Schedule::empty(Mixer::InversionAboutMean)).unwrap();
        assert!((e - c.mean()).abs() < 1e-12);
    }

    #[test]
    fn gamma_period_for_lattice_spacing() {
        let c = saw(6, EncodingMode::Absolute);
        let s = Schedule::new(&[0.3, -1.1], &[0.7, 2.2], Mixer::InversionAboutMean);
        let mut shifted = s.clone();
        shifted.gammas[1] += 4.0 * PI / 0.2;
        let a = objective(&c, &s).unwrap();
        let b = objective(&c, &shifted).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn zero_angle_beta_gradient_vanishes() {
        let c = saw(6, EncodingMode::Absolute);
        let g = gradient(&c, &Schedule::new(&[0.0], &[0.0], Mixer::InversionAboutMean)).unwrap();
        assert!(g[0].abs() < 1e-14);
    }

    #[test]
    fn constant_cost_has_zero_gradient() {
        let c = CostVector::new(vec![2.5; 27], vec![3, 3, 3], 1.0, "flat").unwrap();
        let s = Schedule {
            betas: vec![vec![0.3, 1.2], vec![-0.7, 0.1]],
            gammas: vec![0.4, 2.0],
            mixer: Mixer::Qudit,
            gamma_scale: 1.0,
            origin: Origin::Manual,
        };
        assert!(gradient(&c, &s).unwrap().iter().all(|g| g.abs() < 1e-13));
    }

    #[test]
    fn annealing_schedule_examples() {
        let s = annealing_schedule(2, 1.0, Mixer::InversionAboutMean, 1, 1.0);
        assert_eq!(s.betas, vec![vec![-1.0], vec![-0.5]]);
        assert_eq!(s.gammas, vec![0.5, 1.0]);
        let s = annealing_schedule(1, 2.0, Mixer::InversionAboutMean, 1, 1.0);
        assert_eq!(s.betas, vec![vec![-2.0]]);
        assert_eq!(s.gammas, vec![2.0]);
        let s = annealing_schedule(3, 0.0, Mixer::Qudit, 2, 0.5);
        assert!(s.betas.iter().flatten().chain(&s.gammas).all(|&v| v == 0.0));
    }

    #[test]
    fn extrapolation_examples() {
        let s = Schedule::new(&[0.1, 0.2], &[1.0, 0.5], Mixer::InversionAboutMean);
        let e = extrapolate(&s).unwrap();
        assert_eq!(e.depth(), 3);
        assert!((e.betas[2][0] - 0.3).abs() < 1e-15);
        assert_eq!(e.gammas, vec![1.0, 0.5, 0.0]);
        let flat = Schedule::new(&[0.4; 4], &[1.5; 4], Mixer::InversionAboutMean);
        let e = extrapolate(&flat).unwrap();
        assert_eq!(e.betas[4][0], 0.4);
        assert_eq!(e.gammas[4], 1.5);
        assert!(extrapolate(&Schedule::new(&[0.1], &[0.1], Mixer::QubitX)).is_err());
    }

    #[test]
    fn rescale_examples() {
        let flat = CostVector::new(vec![3.0; 9], vec![3, 3], 1.0, "flat").unwrap();
        assert_eq!(rescale_gamma(&flat), 1.0);
        let c = saw(6, EncodingMode::Relative);
        let doubled = CostVector::new(c.values().iter().map(|v| 2.0 * v).collect(), c.radices().to_vec(), 0.4, "x").unwrap();
        assert!((rescale_gamma(&doubled) - rescale_gamma(&c) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_init_is_reproducible() {
        let r = AngleRanges::saw();
        let a = random_init(3, 5, &r, Mixer::InversionAboutMean, 1, 1.0, 42);
        let b = random_init(3, 5, &r, Mixer::InversionAboutMean, 1, 1.0, 42);
        assert_eq!(a, b);
        let c = random_init(3, 5, &r, Mixer::InversionAboutMean, 1, 1.0, 43);
        assert_ne!(a, c);
        for (_, s) in &a {
            assert!(s.betas.iter().flatten().all(|b| (-2.0 * PI..2.0 * PI).contains(b)));
            assert!(s.gammas.iter().all(|g| (-10.0 * PI..10.0 * PI).contains(g)));
        }
    }

    #[test]
    fn local_optimize_descends_and_is_deterministic() {
        let c = saw(6, EncodingMode::Absolute);
        let start = Schedule::new(&[0.5, -0.3], &[1.0, 2.0], Mixer::InversionAboutMean);
        let mut ev = Evaluator::new(&c, Mixer::InversionAboutMean).unwrap();
        let a = local_optimize(&mut ev, &start, &AngleRanges::saw(), &LbfgsSettings::default()).unwrap();
        let b = local_optimize(&mut ev, &start, &AngleRanges::saw(), &LbfgsSettings::default()).unwrap();
        assert!(a.objective <= a.initial_objective);
        assert_eq!(a, b);
        let again = local_optimize(&mut ev, &a.schedule, &AngleRanges::saw(), &LbfgsSettings::default()).unwrap();
        assert!((again.objective - a.objective).abs() < 1e-9);
    }

    #[test]
    fn annealing_init_not_worse_than_schedule() {
        let c = saw(6, EncodingMode::Relative);
        let r = anneal_strategies(&c, 2, Mixer::InversionAboutMean, 1.0, 5, &AngleRanges::peptide(), &LbfgsSettings::default(), 7).unwrap();
        assert!(r.init_run.objective <= r.schedule_run.objective);
        assert!(r.attempts.iter().all(|a| a.objective >= r.schedule_run.objective));
        let again = anneal_strategies(&c, 2, Mixer::InversionAboutMean, 1.0, 5, &AngleRanges::peptide(), &LbfgsSettings::default(), 7).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn single_lambda_grid() {
        let report = tune_penalty(
            &[0.25],
            &[1],
            |l| {
                let c = build_saw_cost(&WalkProblem::new(4, Encoding::new(LatticeKind::Square, EncodingMode::Absolute), l))?;
                let valid = c.values().iter().map(|&v| v == 0.0).collect();
                Ok((c, valid))
            },
            Mixer::InversionAboutMean,
            2,
            &AngleRanges::saw(),
            false,
            &LbfgsSettings::default(),
            1,
        )
        .unwrap();
        assert_eq!(report.chosen, 0.25);
        assert_eq!(report.rows.len(), 1);
    }
}
