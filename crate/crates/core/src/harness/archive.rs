use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::{fmt, ExperimentConfig};
use crate::error::{Error, Result};

pub(crate) const CONFIG_FILE: &str = "config.toml";
pub(crate) const METRICS_FILE: &str = "metrics.csv";
const UNITS_FILE: &str = "units.csv";
const NOTES_FILE: &str = "notes.txt";

/// A finished archive directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArchive {
    pub root: PathBuf,
    /// Relative paths of every file written, sorted.
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

pub struct CsvTable {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvTable {
    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        Ok(self.writer.write_record(fields)?)
    }

    pub fn finish(mut self) -> Result<()> {
        Ok(self.writer.flush()?)
    }
}

struct MetricRow {
    metric: String,
    problem: String,
    p: Option<usize>,
    strategy: String,
    value: f64,
    k_or_q: Option<f64>,
}

/// Builds an archive in a staging directory next to the target and moves it
/// into place on [`ArchiveWriter::commit`]. Dropping an uncommitted writer
/// removes the staging directory.
pub struct ArchiveWriter {
    target: PathBuf,
    staging: PathBuf,
    files: Vec<String>,
    units: Vec<(String, String, String)>,
    metrics: Vec<MetricRow>,
    notes: Vec<String>,
    committed: bool,
}

impl ArchiveWriter {
    pub fn create(target: impl AsRef<Path>, config: &ExperimentConfig) -> Result<Self> {
        let target = target.as_ref().to_path_buf();
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("output directory {} has no name", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        let mut writer = Self {
            target,
            staging,
            files: Vec::new(),
            units: Vec::new(),
            metrics: Vec::new(),
            notes: Vec::new(),
            committed: false,
        };
        writer.write_text(CONFIG_FILE, &config.to_toml()?)?;
        Ok(writer)
    }

    /// Path for a new file inside the staging directory.
    pub fn path(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.staging.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name)?;
        Ok(fs::write(path, text)?)
    }

    /// New CSV with a header of `(column, unit)` pairs.
    pub fn csv(&mut self, name: &str, columns: &[(&str, &str)]) -> Result<CsvTable> {
        let path = self.path(name)?;
        for (column, unit) in columns {
            self.units.push((name.to_string(), column.to_string(), unit.to_string()));
        }
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(columns.iter().map(|(c, _)| c))?;
        Ok(CsvTable { writer })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn metric(
        &mut self,
        metric: &str,
        unit: &str,
        problem: &str,
        p: Option<usize>,
        strategy: &str,
        value: f64,
        k_or_q: Option<f64>,
    ) {
        if !self.units.iter().any(|(f, c, _)| f == METRICS_FILE && c == metric) {
            self.units.push((METRICS_FILE.to_string(), metric.to_string(), unit.to_string()));
        }
        self.metrics.push(MetricRow {
            metric: metric.to_string(),
            problem: problem.to_string(),
            p,
            strategy: strategy.to_string(),
            value,
            k_or_q,
        });
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.notes.push(message.into());
    }

    pub fn commit(mut self) -> Result<RunArchive> {
        let mut table = self.csv(
            METRICS_FILE,
            &[
                ("metric", "name; unit in units.csv"),
                ("problem", "label"),
                ("p", "layers"),
                ("strategy", "label"),
                ("value", "see units.csv"),
                ("k_or_q", "queries or quantile"),
            ],
        )?;
        for m in &self.metrics {
            table.row([
                m.metric.clone(),
                m.problem.clone(),
                m.p.map(|p| p.to_string()).unwrap_or_default(),
                m.strategy.clone(),
                fmt(m.value),
                m.k_or_q.map(fmt).unwrap_or_default(),
            ])?;
        }
        table.finish()?;
        if !self.notes.is_empty() {
            let text: String = self.notes.iter().map(|n| format!("{n}\n")).collect();
            self.write_text(NOTES_FILE, &text)?;
        }
        let units = std::mem::take(&mut self.units);
        let mut table = self.csv(UNITS_FILE, &[("file", "path"), ("column", "name"), ("unit", "text")])?;
        for (f, c, u) in &units {
            table.row([f, c, u])?;
        }
        table.finish()?;

        if self.target.exists() {
            if !self.target.join(CONFIG_FILE).is_file() {
                return Err(Error::Config(format!(
                    "{} exists and is not a run archive; refusing to replace it",
                    self.target.display()
                )));
            }
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)?;
        self.committed = true;
        let mut files = std::mem::take(&mut self.files);
        files.sort();
        Ok(RunArchive {
            root: self.target.clone(),
            files,
            notes: std::mem::take(&mut self.notes),
        })
    }
}

impl Drop for ArchiveWriter {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
