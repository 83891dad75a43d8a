use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::medtests::{Method, WeightScheme};
use crate::simulate::{
    run_power_experiment, run_size_experiment, ExperimentKind, ExperimentReport, ExperimentSettings, NullMixture,
    Nuisance, PowerScenario,
};

use super::config::{KSetting, Preset};
use super::format::machine;

/// A single sample size or a sweep over several.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSizes {
    One(usize),
    Sweep(Vec<usize>),
}

impl SampleSizes {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            SampleSizes::One(n) => vec![*n],
            SampleSizes::Sweep(v) => v.clone(),
        }
    }
}

/// A simulation document as written on disk. Every field is optional so
/// that presets and flags can fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDocument {
    pub schema_version: Option<u32>,
    pub mode: Option<ExperimentKind>,
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub n: Option<SampleSizes>,
    pub n_tests: Option<usize>,
    pub methods: Option<Vec<Method>>,
    pub level: Option<f64>,
    pub k: Option<KSetting>,
    pub m: Option<usize>,
    pub weights: Option<WeightScheme>,
    pub nuisance: Option<Nuisance>,
    pub mixture: Option<NullMixture>,
    pub power: Option<PowerSection>,
}

/// Which power regime a `[power]` table describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FixedEqual,
    FixedProduct,
}

/// The `[power]` table. Flat rather than tagged so that type errors keep
/// their full document path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<f64>,
}

impl PowerSection {
    pub fn into_scenario(self) -> Result<PowerScenario> {
        let stray = |field: &str| Error::config(format!("/power/{field}"), "not used by this scenario");
        match self.scenario {
            ScenarioKind::FixedEqual => {
                if self.ratios.is_some() {
                    return Err(stray("ratios"));
                }
                if self.product.is_some() {
                    return Err(stray("product"));
                }
                let values = self.values.ok_or_else(|| Error::config("/power/values", "required"))?;
                Ok(PowerScenario::FixedEqual { values })
            }
            ScenarioKind::FixedProduct => {
                if self.values.is_some() {
                    return Err(stray("values"));
                }
                let ratios = self.ratios.ok_or_else(|| Error::config("/power/ratios", "required"))?;
                Ok(PowerScenario::FixedProduct { ratios, product: self.product })
            }
        }
    }
}

/// Flag values. Each set field overrides the document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationOverrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub n: Option<Vec<usize>>,
    pub n_tests: Option<usize>,
    pub methods: Option<Vec<Method>>,
    pub level: Option<f64>,
    pub k: Option<KSetting>,
    pub m: Option<usize>,
    pub weights: Option<WeightScheme>,
    pub mixture: Option<NullMixture>,
    pub power: Option<PowerScenario>,
}

/// Fully resolved simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub sizes: Vec<usize>,
    /// Template settings; `n` is replaced per sample size.
    pub settings: ExperimentSettings,
    pub mixture: Option<NullMixture>,
    pub power: Option<PowerScenario>,
}

impl SimulationConfig {
    /// Precedence, lowest first: built-in defaults (the `paper` preset), the
    /// document's preset, the document's fields, the `--preset` flag, other
    /// flags.
    pub fn resolve(kind: ExperimentKind, doc: SimulationDocument, flags: SimulationOverrides) -> Result<Self> {
        if let Some(v) = doc.schema_version {
            if v != 1 {
                return Err(Error::config("/schema_version", format!("unsupported version {v}")));
            }
        }
        if let Some(mode) = doc.mode {
            if mode != kind {
                return Err(Error::config("/mode", format!("document describes a {mode:?} study")));
            }
        }
        let mut n_tests = Preset::Paper.n_tests();
        let mut m = Preset::Paper.m();
        if let Some(p) = doc.preset {
            n_tests = p.n_tests();
            m = p.m();
        }
        n_tests = doc.n_tests.unwrap_or(n_tests);
        m = doc.m.unwrap_or(m);
        if let Some(p) = flags.preset {
            n_tests = p.n_tests();
            m = p.m();
        }
        n_tests = flags.n_tests.unwrap_or(n_tests);
        m = flags.m.unwrap_or(m);

        let sizes = flags
            .n
            .or_else(|| doc.n.map(|n| n.to_vec()))
            .ok_or_else(|| Error::config("/n", "sample size is required"))?;
        if sizes.is_empty() {
            return Err(Error::config("/n", "sample-size sweep is empty"));
        }
        let mut settings = ExperimentSettings::new(sizes[0], n_tests);
        settings.m = m;
        if let Some(methods) = flags.methods.or(doc.methods) {
            settings.methods = methods;
        }
        if let Some(level) = flags.level.or(doc.level) {
            settings.level = level;
        }
        let k = flags.k.or(doc.k).unwrap_or_default();
        k.validate()?;
        settings.k = k.fixed();
        if let Some(w) = flags.weights.or(doc.weights) {
            settings.weights = w;
        }
        if let Some(nu) = doc.nuisance {
            settings.nuisance = nu;
        }

        let mixture = flags.mixture.or(doc.mixture);
        let power = match flags.power {
            Some(p) => Some(p),
            None => doc.power.map(PowerSection::into_scenario).transpose()?,
        };
        match kind {
            ExperimentKind::Size if mixture.is_none() => {
                return Err(Error::config("/mixture", "a size study needs a null mixture"));
            }
            ExperimentKind::Power if power.is_none() => {
                return Err(Error::config("/power", "a power study needs a scenario"));
            }
            _ => {}
        }
        let cfg = Self {
            kind,
            seed: flags.seed.or(doc.seed).unwrap_or(super::analysis::default_seed()),
            sizes,
            settings,
            mixture: if kind == ExperimentKind::Size { mixture } else { None },
            power: if kind == ExperimentKind::Power { power } else { None },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &n) in self.sizes.iter().enumerate() {
            let mut s = self.settings.clone();
            s.n = n;
            s.validate().map_err(|e| match e {
                Error::Config { path, message } if path == "/n" && self.sizes.len() > 1 => {
                    Error::config(format!("/n/{i}"), message)
                }
                other => other,
            })?;
            if let Some(p) = &self.power {
                p.grid(n)?;
            }
        }
        if let Some(mix) = &self.mixture {
            mix.validate()?;
            if mix.pi_11 > 0.0 {
                return Err(Error::config("/mixture/pi_11", "a size study cannot include non-null tests"));
            }
        }
        Ok(())
    }
}

/// Runs the study once per sample size. Sample size `n_j` of a sweep draws
/// from substream `j` of the seed; a single size uses the seed directly.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<Vec<ExperimentReport>> {
    cfg.validate()?;
    let root = RandomSource::new(cfg.seed);
    cfg.sizes
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mut settings = cfg.settings.clone();
            settings.n = n;
            let src = if cfg.sizes.len() == 1 { root.clone() } else { root.child(j as u64) };
            let started = std::time::Instant::now();
            let report = match cfg.kind {
                ExperimentKind::Size => run_size_experiment(cfg.mixture.as_ref().expect("validated"), &settings, &src),
                ExperimentKind::Power => run_power_experiment(cfg.power.as_ref().expect("validated"), &settings, &src),
            }?;
            log::info!("n = {n}: finished in {:.1?}", started.elapsed());
            Ok(report)
        })
        .collect()
}

/// QQ pairs of one method at one point: `expected,observed`.
pub fn write_qq_csv<W: Write>(report: &ExperimentReport, point: usize, method: Method, w: W) -> Result<()> {
    let summary = report.points[point]
        .methods
        .iter()
        .find(|s| s.method == method)
        .ok_or_else(|| Error::config("/methods", format!("{method} was not run")))?;
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["expected", "observed"])?;
    for q in &summary.qq {
        w.write_record([machine(q.expected), machine(q.observed)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per grid point and method with the rejection count and rate.
pub fn write_rate_table<W: Write>(reports: &[ExperimentReport], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "point", "label", "n", "k", "m", "alpha", "beta", "ratio", "product", "method", "level", "n_tests",
        "rejections", "rate",
    ])?;
    let opt = |v: Option<f64>| v.map(machine).unwrap_or_default();
    for report in reports {
        for (g, point) in report.points.iter().enumerate() {
            for s in &point.methods {
                w.write_record([
                    g.to_string(),
                    point.label.clone(),
                    point.n.to_string(),
                    point.k.to_string(),
                    point.m.to_string(),
                    opt(point.alpha),
                    opt(point.beta),
                    opt(point.ratio),
                    opt(point.product),
                    s.method.to_string(),
                    machine(report.level),
                    s.p_values.len().to_string(),
                    s.rejections.to_string(),
                    machine(s.rejection_rate),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `size.csv` or `power.csv`, and for size studies one
/// `qq_<method>.csv` per method into `dir`. A sweep gets one subdirectory
/// `n<size>` per sample size.
pub fn write_simulation_outputs(reports: &[ExperimentReport], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let single = reports.len() == 1;
    for report in reports {
        let sub = if single {
            dir.to_path_buf()
        } else {
            dir.join(format!("n{}", report.settings.n))
        };
        std::fs::create_dir_all(&sub)?;
        write_file(&sub.join("report.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, report)?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
        let table = match report.kind {
            ExperimentKind::Size => "size.csv",
            ExperimentKind::Power => "power.csv",
        };
        write_file(&sub.join(table), |w| write_rate_table(std::slice::from_ref(report), w))?;
        if report.kind == ExperimentKind::Size {
            for &method in &report.settings.methods {
                write_file(&sub.join(format!("qq_{method}.csv")), |w| write_qq_csv(report, 0, method, w))?;
            }
        }
    }
    if !single {
        write_file(&dir.join("sweep.csv"), |w| write_rate_table(reports, w))?;
    }
    Ok(())
}
