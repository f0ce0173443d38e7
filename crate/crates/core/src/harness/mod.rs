//! Experiment configuration, recipes and run archives.

mod archive;
mod fold;
pub mod oracle;
mod saw;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{build_peptide_cost, build_saw_cost_capped, CostVector, WalkProblem, DEFAULT_MEMORY_CAP_BYTES};
use crate::error::{Error, Result};
use crate::lattice::{Encoding, EncodingMode, LatticeKind};
use crate::optimize::{
    tune_penalty, AngleRanges, DepthResult, Evaluator, InitKind, InitStrategy, LbfgsSettings, PenaltyReport, SweepSettings, Taper,
};
use crate::peptide::{HconParams, PeptideTopology};
use crate::qsim::{Mixer, Schedule};

pub use archive::{ArchiveWriter, CsvTable, RunArchive};
pub use fold::cmd_fold;
pub use saw::cmd_saw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Square-lattice walk with the standard two-turn prefix.
    Walk {
        steps: usize,
        #[serde(default = "default_encoding")]
        encoding: EncodingMode,
        #[serde(default = "default_walk_lambda")]
        lambda: f64,
    },
    Peptide {
        topology: PathBuf,
        params: PathBuf,
        lambda: f64,
    },
}

fn default_encoding() -> EncodingMode {
    EncodingMode::Absolute
}

fn default_walk_lambda() -> f64 {
    0.2
}

impl ProblemSpec {
    pub fn lambda(&self) -> f64 {
        match self {
            ProblemSpec::Walk { lambda, .. } | ProblemSpec::Peptide { lambda, .. } => *lambda,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ProblemSpec::Walk { lambda: l, .. } | ProblemSpec::Peptide { lambda: l, .. } => *l = lambda,
        }
        out
    }

    pub fn walk(&self) -> Option<WalkProblem> {
        match self {
            ProblemSpec::Walk { steps, encoding, lambda } => Some(WalkProblem::new(
                *steps,
                Encoding::new(LatticeKind::Square, *encoding),
                *lambda,
            )),
            ProblemSpec::Peptide { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub kind: InitKind,
    pub attempts: usize,
    /// Fresh optimization up to this depth; defaults to the depth before
    /// `extrapolate_from`, or `p_max` without extrapolation.
    pub fresh_max_p: Option<usize>,
    pub extrapolate_from: Option<usize>,
    /// Box in optimizer coordinates (`γ` divided by `gamma_scale`).
    pub ranges: AngleRanges,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitKind::Random,
            attempts: 20,
            fresh_max_p: None,
            extrapolate_from: Some(3),
            ranges: AngleRanges::peptide(),
        }
    }
}

impl InitConfig {
    pub fn fresh_max_p(&self, p_max: usize) -> usize {
        self.fresh_max_p
            .unwrap_or_else(|| self.extrapolate_from.map_or(p_max, |f| f.saturating_sub(1).max(1)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SawReport {
    /// Walk lengths for the fixed-depth size sweep; empty disables it.
    pub sizes: Vec<usize>,
    pub size_depth: usize,
    /// Query count of the amplitude-amplification comparison column.
    pub size_aa_queries: u32,
}

impl Default for SawReport {
    fn default() -> Self {
        Self {
            sizes: vec![6, 8, 10, 12],
            size_depth: 1,
            size_aa_queries: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldReport {
    pub strategies: Vec<InitKind>,
    /// Depths for quantile curves, histograms, top-k tables and MDS.
    pub report_depths: Vec<usize>,
    pub quantiles: Vec<f64>,
    pub histogram_bins: usize,
    pub top_k: usize,
    /// Most probable configurations embedded by MDS.
    pub mds_points: usize,
}

impl Default for FoldReport {
    fn default() -> Self {
        Self {
            strategies: vec![InitKind::Random, InitKind::AnnealingSchedule, InitKind::AnnealingInit],
            report_depths: vec![2, 3, 8, 62],
            quantiles: (0..=40).map(|i| 10f64.powf(-4.0 + 0.1 * i as f64)).collect(),
            histogram_bins: 60,
            top_k: 3,
            mds_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub lambdas: Vec<f64>,
    pub depths: Vec<usize>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.1, 0.2, 0.3, 0.5, 1.0],
            depths: vec![1, 2, 3],
        }
    }
}

fn default_mixer() -> Mixer {
    Mixer::InversionAboutMean
}

fn default_cap() -> u64 {
    DEFAULT_MEMORY_CAP_BYTES
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/latest")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_cap")]
    pub memory_cap_bytes: u64,
    /// Write binary cost dumps into the archive.
    #[serde(default)]
    pub cache_costs: bool,
    #[serde(default = "default_mixer")]
    pub mixer: Mixer,
    #[serde(default)]
    pub p_min: usize,
    pub p_max: usize,
    /// Multiplier from optimizer `γ` to applied `γ`; `1/σ` of the cost
    /// spectrum when absent.
    #[serde(default)]
    pub gamma_scale: Option<f64>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub lbfgs: LbfgsSettings,
    #[serde(default)]
    pub saw: SawReport,
    #[serde(default)]
    pub fold: FoldReport,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub taper: Vec<Taper>,
}

impl ExperimentConfig {
    /// Parses TOML; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let ProblemSpec::Peptide { topology, params, .. } = &mut config.problem {
            for path in [topology, params] {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_min > self.p_max {
            return Err(Error::Config(format!("empty depth range {}..={}", self.p_min, self.p_max)));
        }
        if self.init.attempts == 0 {
            return Err(Error::Config("init.attempts must be ≥ 1".into()));
        }
        if let Some(s) = self.gamma_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("gamma_scale must be positive, got {s}")));
            }
        }
        if let ProblemSpec::Peptide { topology, params, .. } = &self.problem {
            for path in [topology, params] {
                if !path.is_file() {
                    return Err(Error::Config(format!("missing input file {}", path.display())));
                }
            }
        }
        Ok(())
    }

    pub fn depths(&self) -> std::ops::RangeInclusive<usize> {
        self.p_min..=self.p_max
    }
}

pub(crate) fn walk_cost(problem: &WalkProblem, cap: u64) -> Result<(CostVector, Vec<bool>)> {
    let cost = build_saw_cost_capped(problem, cap)?;
    let valid = cost.values().iter().map(|&v| v == 0.0).collect();
    Ok((cost, valid))
}

pub(crate) fn load_peptide(spec: &ProblemSpec) -> Result<(PeptideTopology, HconParams)> {
    match spec {
        ProblemSpec::Peptide { topology, params, .. } => {
            Ok((PeptideTopology::load(topology)?, HconParams::load(params)?))
        }
        ProblemSpec::Walk { .. } => Err(Error::Config("expected a peptide problem".into())),
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Sweeps the penalty grid and writes `penalty.csv`.
pub fn cmd_tune_penalty(config: &ExperimentConfig) -> Result<(RunArchive, PenaltyReport)> {
    config.validate()?;
    let mut archive = ArchiveWriter::create(&config.output_dir, config)?;
    let report = match &config.problem {
        spec @ ProblemSpec::Walk { .. } => tune_penalty(
            &config.tune.lambdas,
            &config.tune.depths,
            |lambda| walk_cost(&spec.with_lambda(lambda).walk().expect("walk"), config.memory_cap_bytes),
            config.mixer,
            config.init.attempts,
            &config.init.ranges,
            config.gamma_scale.is_none(),
            &config.lbfgs,
            config.seed,
        )?,
        spec @ ProblemSpec::Peptide { .. } => {
            let (topology, params) = load_peptide(spec)?;
            tune_penalty(
                &config.tune.lambdas,
                &config.tune.depths,
                |lambda| {
                    let pc = build_peptide_cost(&topology, &params, lambda)?;
                    let valid = pc.clashes.iter().map(|&c| c == 0).collect();
                    Ok((pc.cost, valid))
                },
                config.mixer,
                config.init.attempts,
                &config.init.ranges,
                config.gamma_scale.is_none(),
                &config.lbfgs,
                config.seed,
            )?
        }
    };
    let mut table = archive.csv(
        "penalty.csv",
        &[("lambda", "energy per squared lattice unit"), ("p", "layers"), ("valid_probability", "probability")],
    )?;
    for row in &report.rows {
        table.row([fmt(row.lambda), row.p.to_string(), fmt(row.valid_probability)])?;
    }
    table.finish()?;
    archive.metric("chosen_lambda", "energy per squared lattice unit", "penalty", None, "", report.chosen, None);
    Ok((archive.commit()?, report))
}

/// Human-readable summary of an archive's metrics.
pub fn report(dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    let text = std::fs::read_to_string(dir.join(archive::CONFIG_FILE))
        .map_err(|e| Error::Config(format!("{} is not a run archive: {e}", dir.display())))?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = format!("archive {}\nproblem {:?}\n", dir.display(), config.problem);
    let mut reader = csv::Reader::from_path(dir.join(archive::METRICS_FILE))?;
    for record in reader.records() {
        let r = record?;
        let p = if r[2].is_empty() { String::new() } else { format!(" p={}", &r[2]) };
        let s = if r[3].is_empty() { String::new() } else { format!(" {}", &r[3]) };
        let k = if r[5].is_empty() { String::new() } else { format!(" [{}]", &r[5]) };
        out.push_str(&format!("{}{p}{s}{k}: {}\n", &r[0], &r[4]));
    }
    Ok(out)
}

pub(crate) fn sweep_settings(
    config: &ExperimentConfig,
    kind: InitKind,
    gamma_scale: f64,
    depths: std::ops::RangeInclusive<usize>,
) -> SweepSettings {
    let p_max = *depths.end();
    SweepSettings {
        strategy: InitStrategy {
            kind,
            attempts: config.init.attempts,
            ranges: config.init.ranges,
        },
        mixer: config.mixer,
        gamma_scale,
        depths,
        fresh_max_p: config.init.fresh_max_p(p_max),
        extrapolate_from: config.init.extrapolate_from,
        lbfgs: config.lbfgs,
        taper: config.taper.clone(),
        seed: config.seed,
    }
}

/// Output distribution of `schedule`.
pub(crate) fn distribution(cost: &CostVector, schedule: &Schedule) -> Result<Vec<f64>> {
    let mut ev = Evaluator::new(cost, schedule.mixer)?;
    ev.energy(schedule)?;
    Ok(ev.probabilities())
}

pub(crate) fn mass(probs: &[f64], mask: &[bool]) -> f64 {
    probs.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| p).sum()
}

pub(crate) fn open_ledger(archive: &mut ArchiveWriter) -> Result<CsvTable> {
    archive.csv(
        "ledger.csv",
        &[
            ("problem", "label"),
            ("p", "layers"),
            ("strategy", "label"),
            ("seed", "integer"),
            ("init_objective", "cost units"),
            ("final_objective", "cost units"),
            ("iterations", "count"),
            ("grad_norm", "cost units per radian"),
            ("valid_prob", "probability"),
        ],
    )
}

/// One ledger row per optimization run at this depth.
pub(crate) fn ledger_rows(
    table: &mut CsvTable,
    problem: &str,
    result: &DepthResult,
    cost: &CostVector,
    valid: &[bool],
) -> Result<()> {
    for run in &result.runs {
        let probs = distribution(cost, &run.schedule)?;
        table.row([
            problem.to_string(),
            result.p.to_string(),
            run.strategy().name().to_string(),
            run.seed.map(|s| s.to_string()).unwrap_or_default(),
            fmt(run.initial_objective),
            fmt(run.objective),
            run.iterations.to_string(),
            fmt(run.gradient_norm),
            fmt(mass(&probs, valid)),
        ])?;
    }
    Ok(())
}
