use super::{distribution, fmt, ledger_rows, load_peptide, mass, open_ledger, sweep_settings, ArchiveWriter, ExperimentConfig, ProblemSpec, RunArchive};
use crate::cost::build_peptide_cost_with;
use crate::error::{Error, Result};
use crate::metrics::{clash_probability, conditional_expectation, energy_histogram, expectation, mds_embed, quantile_curve, top_k, EnergyReference};
use crate::optimize::{depth_sweep, rescale_gamma};
use crate::peptide::{lj_lower_bound, PeptideModel};

const KCAL: &str = "kcal/mol";

fn digit_string(digits: &[u8]) -> String {
    digits.iter().map(|d| char::from(b'0' + d)).collect()
}

/// Energy curves for every strategy, plus histograms, top-k tables,
/// quantile curves and MDS coordinates at the report depths.
pub fn cmd_fold(config: &ExperimentConfig) -> Result<RunArchive> {
    config.validate()?;
    if !matches!(config.problem, ProblemSpec::Peptide { .. }) {
        return Err(Error::Config("fold needs a peptide problem".into()));
    }
    let (topology, params) = load_peptide(&config.problem)?;
    let mut archive = ArchiveWriter::create(&config.output_dir, config)?;
    archive.write_text("inputs/topology.top", &topology.to_text())?;
    archive.write_text("inputs/hcon.params", &params.to_text())?;
    let bound = lj_lower_bound(&topology, &params)?;
    let model = PeptideModel::new(topology, params, config.problem.lambda())?;
    let pc = build_peptide_cost_with(&model, config.memory_cap_bytes)?;
    let cost = &pc.cost;
    if config.cache_costs {
        cost.save(archive.path("costs/peptide.qfcv")?)?;
    }
    let name = "peptide";
    let valid: Vec<bool> = pc.clashes.iter().map(|&c| c == 0).collect();
    let all = EnergyReference::over(cost.values(), None).expect("non-empty cost");
    let no_clash = EnergyReference::over(cost.values(), Some(&valid))
        .ok_or_else(|| Error::Precondition("every configuration clashes".into()))?;
    archive.metric("configurations", "count", name, None, "", cost.len() as f64, None);
    archive.metric("clash_free_count", "count", name, None, "", pc.clash_free_count() as f64, None);
    archive.metric("lj_lower_bound", KCAL, name, None, "", bound, None);
    archive.metric("min_energy", KCAL, name, None, "", all.e_min, None);
    archive.metric("min_energy_no_clash", KCAL, name, None, "", no_clash.e_min, None);
    archive.metric("random_energy", KCAL, name, None, "", all.e_random, None);
    let scale = config.gamma_scale.unwrap_or_else(|| rescale_gamma(cost));
    let e_max_valid = cost
        .values()
        .iter()
        .zip(&valid)
        .filter(|(_, &v)| v)
        .map(|(&e, _)| e)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut ledger = open_ledger(&mut archive)?;
    let mut energy = archive.csv(
        "energy.csv",
        &[
            ("strategy", "label"),
            ("p", "layers"),
            ("expected_energy_kcal_per_mol", KCAL),
            ("dimensionless_energy", "dimensionless"),
            ("dimensionless_energy_no_clash", "dimensionless"),
            ("clash_probability", "probability"),
        ],
    )?;
    let mut histogram = archive.csv(
        "histogram.csv",
        &[
            ("strategy", "label"),
            ("p", "layers"),
            ("bin_lo_kcal_per_mol", KCAL),
            ("bin_hi_kcal_per_mol", KCAL),
            ("probability", "probability"),
        ],
    )?;
    let mut tops = archive.csv(
        "top_k.csv",
        &[
            ("strategy", "label"),
            ("p", "layers"),
            ("class", "valid or invalid"),
            ("rank", "ordinal"),
            ("index", "configuration index"),
            ("digits", "turn digits"),
            ("probability", "probability"),
            ("energy_kcal_per_mol", KCAL),
            ("clashes", "count"),
        ],
    )?;
    let mut lowest = archive.csv(
        "lowest_energy.csv",
        &[
            ("strategy", "label"),
            ("p", "layers"),
            ("rank", "ordinal"),
            ("index", "configuration index"),
            ("digits", "turn digits"),
            ("probability", "probability"),
            ("energy_kcal_per_mol", KCAL),
        ],
    )?;
    let mut quantiles = archive.csv(
        "quantile.csv",
        &[
            ("strategy", "label"),
            ("p", "layers"),
            ("q", "probability"),
            ("random_probability", "probability"),
            ("ratio", "dimensionless"),
        ],
    )?;
    let mut mds = archive.csv(
        "mds.csv",
        &[
            ("strategy", "label"),
            ("p", "layers"),
            ("x_angstrom", "Å"),
            ("y_angstrom", "Å"),
            ("probability", "probability"),
            ("energy_kcal_per_mol", KCAL),
        ],
    )?;

    let mut by_energy: Vec<usize> = (0..cost.len()).filter(|&i| valid[i]).collect();
    by_energy.sort_by(|&a, &b| cost.values()[a].total_cmp(&cost.values()[b]).then(a.cmp(&b)));
    by_energy.truncate(config.fold.top_k);

    for &kind in &config.fold.strategies {
        let strategy = kind.name();
        let settings = sweep_settings(config, kind, scale, config.depths());
        let results = depth_sweep(cost, &settings, |r| ledger_rows(&mut ledger, name, r, cost, &valid))?;
        for r in &results {
            let p = r.p;
            let probs = distribution(cost, &r.best.schedule)?;
            let e = expectation(&probs, cost.values());
            let e_nc = conditional_expectation(&probs, cost.values(), &valid).map_or(f64::NAN, |v| no_clash.scale(v));
            let clash = clash_probability(&probs, &pc.clashes);
            energy.row([strategy.to_string(), p.to_string(), fmt(e), fmt(all.scale(e)), fmt(e_nc), fmt(clash)])?;
            archive.metric("dimensionless_energy", "dimensionless", name, Some(p), strategy, all.scale(e), None);
            archive.metric("dimensionless_energy_no_clash", "dimensionless", name, Some(p), strategy, e_nc, None);
            archive.metric("clash_probability", "probability", name, Some(p), strategy, clash, None);
            archive.metric("valid_probability", "probability", name, Some(p), strategy, mass(&probs, &valid), None);

            if !config.fold.report_depths.contains(&p) {
                continue;
            }
            if e_max_valid > bound {
                for (lo, hi, m) in energy_histogram(&probs, cost.values(), Some(&valid), config.fold.histogram_bins, bound, e_max_valid)? {
                    histogram.row([strategy.to_string(), p.to_string(), fmt(lo), fmt(hi), fmt(m)])?;
                }
            }
            for (class, keep) in [("valid", true), ("invalid", false)] {
                let masked: Vec<f64> = probs.iter().zip(&valid).map(|(&q, &v)| if v == keep { q } else { -1.0 }).collect();
                for (rank, i) in top_k(&masked, config.fold.top_k).into_iter().enumerate() {
                    if masked[i] < 0.0 {
                        break;
                    }
                    let digits = cost.digits(i);
                    tops.row([
                        strategy.to_string(),
                        p.to_string(),
                        class.to_string(),
                        (rank + 1).to_string(),
                        i.to_string(),
                        digit_string(&digits),
                        fmt(probs[i]),
                        fmt(cost.values()[i]),
                        pc.clashes[i].to_string(),
                    ])?;
                    if keep {
                        let conf = model.place_and_minimize(&digits)?;
                        let path = archive.path(&format!("conformations/{strategy}_p{p}_top{}.csv", rank + 1))?;
                        conf.write_csv(model.topology(), std::fs::File::create(path)?)?;
                    }
                }
            }
            for (rank, &i) in by_energy.iter().enumerate() {
                lowest.row([
                    strategy.to_string(),
                    p.to_string(),
                    (rank + 1).to_string(),
                    i.to_string(),
                    digit_string(&cost.digits(i)),
                    fmt(probs[i]),
                    fmt(cost.values()[i]),
                ])?;
            }
            if p > 0 {
                let curve = quantile_curve(&probs, &config.fold.quantiles, p as u32)?;
                let mut best = f64::NEG_INFINITY;
                for (q, pr, ratio) in curve {
                    quantiles.row([strategy.to_string(), p.to_string(), fmt(q), fmt(pr), fmt(ratio)])?;
                    best = best.max(ratio);
                }
                archive.metric("max_quantile_ratio", "dimensionless", name, Some(p), strategy, best, None);
            }
            let picked = top_k(&probs, config.fold.mds_points);
            if picked.len() >= 2 {
                let backbones = picked
                    .iter()
                    .map(|&i| model.backbone_sites(&cost.digits(i)))
                    .collect::<Result<Vec<_>>>()?;
                let emb = mds_embed(&backbones, model.unit_length())?;
                for (&i, pt) in picked.iter().zip(&emb.points) {
                    mds.row([strategy.to_string(), p.to_string(), fmt(pt[0]), fmt(pt[1]), fmt(probs[i]), fmt(cost.values()[i])])?;
                }
                archive.metric("mds_stress", "dimensionless", name, Some(p), strategy, emb.stress, None);
            }
        }
    }
    for table in [ledger, energy, histogram, tops, lowest, quantiles, mds] {
        table.finish()?;
    }
    archive.commit()
}
