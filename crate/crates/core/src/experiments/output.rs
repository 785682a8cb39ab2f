use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::error::Result;
use crate::experiments::config::{ExperimentConfig, ExperimentKind};
use crate::stats::{wilson_interval, Interval, RunningStats};

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// One statistic of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub cell: String,
    /// `inf` for the i.i.d. baseline.
    pub gamma: Option<f64>,
    pub l: Option<u32>,
    pub a: Option<f64>,
    pub j: Option<u32>,
    pub statistic: String,
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub exceedances: Option<u64>,
    pub note: String,
}

impl ResultRow {
    pub fn new(cell: impl Into<String>, statistic: impl Into<String>) -> Self {
        Self {
            cell: cell.into(),
            gamma: None,
            l: None,
            a: None,
            j: None,
            statistic: statistic.into(),
            count: 0,
            mean: f64::NAN,
            variance: f64::NAN,
            std_error: f64::NAN,
            ci_lower: f64::NAN,
            ci_upper: f64::NAN,
            exceedances: None,
            note: String::new(),
        }
    }

    /// Mean, variance and normal-approximation interval of `stats`.
    pub fn with_moments(mut self, stats: &RunningStats, level: f64) -> Self {
        let ci = stats.mean_interval(level);
        self.count = stats.count();
        self.mean = stats.mean();
        self.variance = stats.variance();
        self.std_error = stats.std_error();
        self.ci_lower = ci.lower;
        self.ci_upper = ci.upper;
        self
    }

    /// Proportion with a Wilson interval; a zero count is flagged as
    /// reporting only the upper bound.
    pub fn with_proportion(mut self, hits: u64, trials: u64, level: f64) -> Self {
        let p = if trials == 0 { f64::NAN } else { hits as f64 / trials as f64 };
        let ci = wilson_interval(hits, trials, level);
        self.count = trials;
        self.exceedances = Some(hits);
        self.mean = p;
        self.variance = p * (1.0 - p);
        self.std_error = (p * (1.0 - p) / trials as f64).sqrt();
        self.ci_lower = ci.lower;
        self.ci_upper = ci.upper;
        if hits == 0 {
            self.note = "zero_count_upper_bound".into();
        }
        self
    }

    pub fn interval(&self) -> Interval {
        Interval {
            lower: self.ci_lower,
            upper: self.ci_upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub replicas: usize,
    pub rows: Vec<ResultRow>,
    pub summary: serde_json::Value,
    /// Not serialized: outputs must not depend on timing.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentResult {
    pub fn rows_for(&self, statistic: &str) -> impl Iterator<Item = &ResultRow> {
        let statistic = statistic.to_string();
        self.rows.iter().filter(move |r| r.statistic == statistic)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "schema_version,experiment,cell,gamma,L,a,J,statistic,count,mean,variance,std_error,ci_lower,ci_upper,exceedances,note\n",
        );
        for r in &self.rows {
            let opt_f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            let opt_u = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.schema_version,
                self.experiment.name(),
                r.cell,
                opt_f(r.gamma),
                opt_u(r.l),
                opt_f(r.a),
                opt_u(r.j),
                r.statistic,
                r.count,
                fmt_f64(r.mean),
                fmt_f64(r.variance),
                fmt_f64(r.std_error),
                fmt_f64(r.ci_lower),
                fmt_f64(r.ci_upper),
                r.exceedances.map(|e| e.to_string()).unwrap_or_default(),
                r.note
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Writes `<kind>.csv`, `<kind>.json` and `config.json` into `dir`, each
    /// through a temporary file and a rename.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let name = self.experiment.name();
        let mut config = self.config.to_json_pretty()?;
        config.push('\n');
        let files = [
            (dir.join(format!("{name}.csv")), self.to_csv()),
            (dir.join(format!("{name}.json")), self.to_json()?),
            (dir.join("config.json"), config),
        ];
        for (path, text) in &files {
            write_atomic(path, text.as_bytes())?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
