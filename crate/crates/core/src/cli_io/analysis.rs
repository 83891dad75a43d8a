use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::RandomSource;
use crate::error::{Error, ErrorKind, Result};
use crate::medtests::{choose_k, run_method, CsmtOptions, Method, WeightScheme, DEFAULT_M};

use super::config::{KSetting, OutputFormat};
use super::data::{ColumnRoles, Table};
use super::format::{human, machine};

pub const ANALYSIS_SCHEMA_VERSION: u32 = 1;

/// A real-data run: one CSV, a role for each column, and test settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    #[serde(rename = "columns")]
    pub roles: ColumnRoles,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub k: KSetting,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub weights: WeightScheme,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Csmt, Method::MaxP, Method::Sobel]
}

fn default_m() -> usize {
    DEFAULT_M
}

fn default_level() -> f64 {
    0.05
}

pub(crate) fn default_seed() -> u64 {
    1
}

impl AnalysisConfig {
    pub fn new(input: impl Into<PathBuf>, roles: ColumnRoles) -> Self {
        Self {
            input: input.into(),
            roles,
            methods: default_methods(),
            k: KSetting::Auto,
            m: default_m(),
            level: default_level(),
            seed: default_seed(),
            weights: WeightScheme::Random,
            out: None,
            format: OutputFormat::Json,
        }
    }

    /// Loads a document and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = super::config::load_document(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.input.is_relative() {
            cfg.input = base.join(&cfg.input);
        }
        if let Some(out) = cfg.out.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.roles.validate()?;
        self.k.validate()?;
        if self.methods.is_empty() {
            return Err(Error::config("/methods", "no methods selected"));
        }
        if self.m == 0 {
            return Err(Error::config("/m", "need at least one partition"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config("/level", format!("{} is not in (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
    pub reject: Option<bool>,
    /// Set when this method failed on this pair.
    pub error: Option<String>,
    pub error_kind: Option<ErrorKind>,
}

/// One `(mediator, outcome)` pair of an analysis. Serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub schema_version: u32,
    pub pair: usize,
    pub exposure: String,
    pub mediator: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    pub n: Option<usize>,
    pub dropped: Option<usize>,
    pub k: Option<usize>,
    pub m: usize,
    pub level: f64,
    pub seed: u64,
    pub results: Vec<MethodOutcome>,
    /// Set when the pair could not be analysed at all.
    pub error: Option<String>,
    pub error_kind: Option<ErrorKind>,
}

impl AnalysisRow {
    pub fn p_value(&self, method: Method) -> Option<f64> {
        self.results.iter().find(|r| r.method == method).and_then(|r| r.p_value)
    }

    /// The first failure on this pair, whole-pair failures first.
    pub fn first_failure(&self) -> Option<ErrorKind> {
        self.error_kind.or_else(|| self.results.iter().find_map(|r| r.error_kind))
    }
}

/// Runs every configured method on every `(mediator, outcome)` pair.
/// Pair `i` (outcomes outermost) draws from substream `i` of the seed.
/// Failures on one pair are recorded in its row.
pub fn run_analysis(cfg: &AnalysisConfig) -> Result<Vec<AnalysisRow>> {
    cfg.validate()?;
    let table = Table::read_path(&cfg.input, &cfg.roles)?;
    log::info!("read {} rows from {}", table.rows(), cfg.input.display());
    let root = RandomSource::new(cfg.seed);
    let pairs = table.pairs(&cfg.roles);
    let rows = pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(mediator, outcome))| {
            let mut row = AnalysisRow {
                schema_version: ANALYSIS_SCHEMA_VERSION,
                pair: i,
                exposure: cfg.roles.exposure.clone(),
                mediator: mediator.to_string(),
                outcome: outcome.to_string(),
                covariates: cfg.roles.covariates.clone(),
                n: None,
                dropped: None,
                k: None,
                m: cfg.m,
                level: cfg.level,
                seed: cfg.seed,
                results: Vec::new(),
                error: None,
                error_kind: None,
            };
            let pd = match table.pair_dataset(&cfg.roles, mediator, outcome) {
                Ok(pd) => pd,
                Err(e) => {
                    log::warn!("{mediator} -> {outcome}: {e}");
                    row.error = Some(e.to_string());
                    row.error_kind = Some(e.kind());
                    return row;
                }
            };
            row.n = Some(pd.dataset.n());
            row.dropped = Some(pd.dropped);
            let k = match cfg.k {
                KSetting::Fixed(k) => Ok(k),
                KSetting::Auto => choose_k(pd.dataset.n()).inspect(|k| {
                    log::info!("{mediator} -> {outcome}: n = {}, automatic K = {k}", pd.dataset.n())
                }),
            };
            let k = match k {
                Ok(k) => k,
                Err(e) => {
                    row.error = Some(e.to_string());
                    row.error_kind = Some(e.kind());
                    return row;
                }
            };
            row.k = Some(k);
            let opts = CsmtOptions {
                k,
                m: cfg.m,
                weights: cfg.weights,
            };
            let src = root.child(i as u64);
            row.results = cfg
                .methods
                .iter()
                .map(|&method| match run_method(method, &pd.dataset, &opts, &src) {
                    Ok(r) => MethodOutcome {
                        method,
                        p_value: Some(r.p_value),
                        statistic: Some(r.statistic),
                        reject: Some(r.p_value <= cfg.level),
                        error: None,
                        error_kind: None,
                    },
                    Err(e) => {
                        log::warn!("{mediator} -> {outcome}, {method}: {e}");
                        MethodOutcome {
                            method,
                            p_value: None,
                            statistic: None,
                            reject: None,
                            error: Some(e.to_string()),
                            error_kind: Some(e.kind()),
                        }
                    }
                })
                .collect();
            row
        })
        .collect();
    Ok(rows)
}

/// One JSON object per line.
pub fn write_json_lines<W: Write>(rows: &[AnalysisRow], mut w: W) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Flat table: one row per pair, one p-value column per method.
pub fn write_analysis_csv<W: Write>(rows: &[AnalysisRow], methods: &[Method], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["pair", "exposure", "mediator", "outcome", "covariates", "n", "dropped", "k", "m"]
        .map(String::from)
        .to_vec();
    header.extend(methods.iter().map(|m| format!("{m}_p")));
    header.push("error".into());
    w.write_record(&header)?;
    let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    for row in rows {
        let mut rec = vec![
            row.pair.to_string(),
            row.exposure.clone(),
            row.mediator.clone(),
            row.outcome.clone(),
            row.covariates.join(";"),
            opt(row.n),
            opt(row.dropped),
            opt(row.k),
            row.m.to_string(),
        ];
        rec.extend(methods.iter().map(|&m| row.p_value(m).map(machine).unwrap_or_default()));
        let errors: Vec<String> = row
            .error
            .iter()
            .cloned()
            .chain(row.results.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.method))))
            .collect();
        rec.push(errors.join("; "));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text table with four significant digits.
pub fn write_human_table<W: Write>(rows: &[AnalysisRow], methods: &[Method], mut w: W) -> Result<()> {
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(rows.len() + 1);
    let mut header = vec!["mediator".to_string(), "outcome".into(), "n".into(), "K".into()];
    header.extend(methods.iter().map(|m| m.to_string()));
    cells.push(header);
    for row in rows {
        let mut line = vec![
            row.mediator.clone(),
            row.outcome.clone(),
            row.n.map_or("-".into(), |v| v.to_string()),
            row.k.map_or("-".into(), |v| v.to_string()),
        ];
        line.extend(methods.iter().map(|&m| row.p_value(m).map_or("error".into(), human)));
        cells.push(line);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    for line in &cells {
        let padded: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, &wd))| if c < 2 { format!("{s:<wd$}") } else { format!("{s:>wd$}") })
            .collect();
        writeln!(w, "{}", padded.join("  ").trim_end())?;
    }
    Ok(())
}

pub fn write_analysis<W: Write>(rows: &[AnalysisRow], cfg: &AnalysisConfig, w: W) -> Result<()> {
    match cfg.format {
        OutputFormat::Json => write_json_lines(rows, w),
        OutputFormat::Csv => write_analysis_csv(rows, &cfg.methods, w),
    }
}
