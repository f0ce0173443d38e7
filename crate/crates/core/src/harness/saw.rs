use super::{distribution, fmt, ledger_rows, mass, open_ledger, sweep_settings, walk_cost, ArchiveWriter, CsvTable, ExperimentConfig, RunArchive};
use crate::cost::{CostVector, WalkProblem};
use crate::error::{Error, Result};
use crate::lattice::EncodingMode;
use crate::metrics::{collision_entropy, crossing_distribution, expectation, fit_exponential, shannon_entropy, EntropyUnit};
use crate::optimize::{depth_sweep, rescale_gamma, DepthResult};
use crate::qsim::{amplitude_amplification_probability, Schedule};

fn label(problem: &WalkProblem) -> String {
    let mode = match problem.encoding.mode {
        EncodingMode::Absolute => "absolute",
        EncodingMode::Relative => "relative",
    };
    format!("saw{}_{mode}", problem.steps)
}

/// Depth sweep with the ledger written as each depth completes; a depth-0
/// result is prepended when the range starts above zero.
fn sweep(
    cost: &CostVector,
    valid: &[bool],
    config: &ExperimentConfig,
    depths: std::ops::RangeInclusive<usize>,
    problem: &str,
    ledger: &mut CsvTable,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let scale = config.gamma_scale.unwrap_or_else(|| rescale_gamma(cost));
    let settings = sweep_settings(config, config.init.kind, scale, depths);
    let results: Vec<DepthResult> = depth_sweep(cost, &settings, |r| ledger_rows(ledger, problem, r, cost, valid))?;
    let mut out = Vec::with_capacity(results.len() + 1);
    if results.first().is_none_or(|r| r.p != 0) {
        out.push((0, distribution(cost, &Schedule::empty(config.mixer))?));
    }
    for r in &results {
        out.push((r.p, distribution(cost, &r.best.schedule)?));
    }
    Ok(out)
}

/// Success-probability tables, entropies, crossing distributions and the
/// fixed-depth size sweep for a walk problem.
pub fn cmd_saw(config: &ExperimentConfig) -> Result<RunArchive> {
    config.validate()?;
    let problem = config
        .problem
        .walk()
        .ok_or_else(|| Error::Config("saw needs a walk problem".into()))?;
    let name = label(&problem);
    let mut archive = ArchiveWriter::create(&config.output_dir, config)?;
    let (cost, valid) = walk_cost(&problem, config.memory_cap_bytes)?;
    if config.cache_costs {
        cost.save(archive.path(&format!("costs/{name}.qfcv"))?)?;
    }
    let loops = valid.iter().filter(|&&v| v).count();
    let p0 = loops as f64 / cost.len() as f64;
    archive.metric("configurations", "count", &name, None, "", cost.len() as f64, None);
    archive.metric("loop_count", "count", &name, None, "", loops as f64, None);

    let mut ledger = open_ledger(&mut archive)?;
    let rows = sweep(&cost, &valid, config, config.depths(), &name, &mut ledger)?;
    let strategy = config.init.kind.name();

    let mut success = archive.csv(
        "success.csv",
        &[
            ("p", "layers"),
            ("qaoa_probability", "probability"),
            ("aa_probability", "probability"),
            ("expected_energy_sq_lattice", "crossings + λ·squared lattice units"),
        ],
    )?;
    let mut entropy = archive.csv(
        "entropy.csv",
        &[
            ("p", "layers"),
            ("collision_entropy_loops", "sum of squared probabilities"),
            ("collision_entropy_uniform", "sum of squared probabilities"),
            ("shannon_entropy_loops_nats", "nats"),
            ("shannon_entropy_uniform_nats", "nats"),
        ],
    )?;
    let mut crossings = archive.csv(
        "crossings.csv",
        &[("p", "layers"), ("self_crossings", "count"), ("probability", "probability")],
    )?;
    for (p, probs) in &rows {
        let ps = mass(probs, &valid);
        let aa = amplitude_amplification_probability(p0, *p as u32);
        let energy = expectation(probs, cost.values());
        success.row([p.to_string(), fmt(ps), fmt(aa), fmt(energy)])?;
        archive.metric("saw_probability", "probability", &name, Some(*p), strategy, ps, None);
        archive.metric("aa_probability", "probability", &name, Some(*p), "amplitude_amplification", aa, Some(*p as f64));
        archive.metric("expected_energy_sq_lattice", "crossings + λ·squared lattice units", &name, Some(*p), strategy, energy, None);

        let ce = collision_entropy(probs, |x| valid[x]).unwrap_or(f64::NAN);
        let se = shannon_entropy(probs, |x| valid[x], EntropyUnit::Nats).unwrap_or(f64::NAN);
        entropy.row([
            p.to_string(),
            fmt(ce),
            fmt(1.0 / loops as f64),
            fmt(se),
            fmt((loops as f64).ln()),
        ])?;
        archive.metric("collision_entropy_loops", "sum of squared probabilities", &name, Some(*p), strategy, ce, None);

        let dist = crossing_distribution(probs, &problem)?;
        for (k, q) in dist.by_count.iter().enumerate() {
            crossings.row([p.to_string(), k.to_string(), fmt(*q)])?;
        }
        archive.metric("non_loop_probability", "probability", &name, Some(*p), strategy, dist.non_loop, None);
    }
    let k = config.saw.size_aa_queries;
    archive.metric(
        "aa_probability",
        "probability",
        &name,
        None,
        "amplitude_amplification",
        amplitude_amplification_probability(p0, k),
        Some(k as f64),
    );
    success.finish()?;
    entropy.finish()?;
    crossings.finish()?;

    size_sweep(config, &problem, &mut archive, &mut ledger)?;
    ledger.finish()?;
    archive.commit()
}

fn size_sweep(
    config: &ExperimentConfig,
    base: &WalkProblem,
    archive: &mut ArchiveWriter,
    ledger: &mut CsvTable,
) -> Result<()> {
    if config.saw.sizes.is_empty() {
        return Ok(());
    }
    let depth = config.saw.size_depth;
    let k = config.saw.size_aa_queries;
    let mut table = archive.csv(
        "size_sweep.csv",
        &[
            ("steps", "count"),
            ("p", "layers"),
            ("qaoa_probability", "probability"),
            ("random_probability", "probability"),
            ("aa_probability", "probability"),
        ],
    )?;
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    for &steps in &config.saw.sizes {
        let problem = WalkProblem { steps, ..base.clone() };
        let name = label(&problem);
        let (cost, valid) = match walk_cost(&problem, config.memory_cap_bytes) {
            Ok(c) => c,
            Err(Error::MemoryCap { required, cap_bytes }) => {
                archive.note(format!("{name}: skipped, {required} configurations exceed the {cap_bytes}-byte cap"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let loops = valid.iter().filter(|&&v| v).count();
        if loops == 0 {
            archive.note(format!("{name}: skipped, no self-avoiding loops"));
            continue;
        }
        let p0 = loops as f64 / cost.len() as f64;
        let rows = sweep(&cost, &valid, config, 0..=depth, &name, ledger)?;
        let (_, probs) = rows.last().expect("sweep yields at least depth 0");
        let ps = mass(probs, &valid);
        table.row([
            steps.to_string(),
            depth.to_string(),
            fmt(ps),
            fmt(p0),
            fmt(amplitude_amplification_probability(p0, k)),
        ])?;
        points.push((steps as f64, ps, p0));
    }
    table.finish()?;
    if points.len() >= 2 {
        let xs: Vec<f64> = points.iter().map(|t| t.0).collect();
        let q: Vec<f64> = points.iter().map(|t| t.1).collect();
        let r: Vec<f64> = points.iter().map(|t| t.2).collect();
        let strategy = config.init.kind.name();
        if let Ok(fit) = fit_exponential(&xs, &q) {
            archive.metric("size_slope_log10", "log10 probability per step", "size_sweep", Some(depth), strategy, fit.slope, None);
            archive.metric("size_fit_correlation", "dimensionless", "size_sweep", Some(depth), strategy, fit.correlation, None);
        }
        let fit = fit_exponential(&xs, &r)?;
        archive.metric("size_slope_log10", "log10 probability per step", "size_sweep", Some(0), "random", fit.slope, None);
        archive.metric("size_fit_correlation", "dimensionless", "size_sweep", Some(0), "random", fit.correlation, None);
    }
    Ok(())
}
