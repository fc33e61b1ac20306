//! Experiment configuration: TOML file, profile presets and flag overrides.
//!
//! Precedence, lowest first: profile preset, config file, command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mixcascade::cascade::mixed_cell_count;
use mixcascade::{FamilyKind, GeneratorF64, ResourceLimits};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Invalid or missing configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// T = 2^10, 30 trials, 5 extra construction levels.
    #[default]
    Desk,
    /// T = 2^13, 130 trials, cascades built to level 18.
    Paper,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    profile: Option<Profile>,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    fit: FitSection,
    #[serde(default)]
    spectrum: SpectrumSection,
    #[serde(default)]
    histogram: HistogramSection,
    #[serde(default)]
    clt: CltSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    family: Option<String>,
    lambda2: Option<f64>,
    delta: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    t_log2: Option<u32>,
    chi_list: Option<Vec<f64>>,
    j_min: Option<u32>,
    j_max: Option<u32>,
    delta_levels: Option<u32>,
    p_list: Option<Vec<f64>>,
    trials: Option<usize>,
    master_seed: Option<u64>,
    workers: Option<usize>,
    out_dir: Option<PathBuf>,
    max_cells: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateSection {
    trials: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitSection {
    analyzer: Option<AnalyzerChoice>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumSection {
    p_min: Option<f64>,
    p_max: Option<f64>,
    p_step: Option<f64>,
    h_min: Option<f64>,
    h_max: Option<f64>,
    h_step: Option<f64>,
    inv_p_step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramSection {
    chi: Option<f64>,
    j_list: Option<Vec<u32>>,
    h_min: Option<f64>,
    h_max: Option<f64>,
    h_bins: Option<Vec<f64>>,
    epsilon: Option<f64>,
    trials: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CltSection {
    p: Option<f64>,
    j_list: Option<Vec<u32>>,
    trials: Option<usize>,
}

/// Partition function used by `fit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzerChoice {
    /// Plain dyadic box sums.
    #[default]
    Dyadic,
    /// Indicator window over the interior positions.
    Box,
    /// Two-cell Haar window.
    Haar,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramOptions {
    pub chi: f64,
    pub j_list: Vec<u32>,
    pub h_bins: Vec<f64>,
    pub epsilon: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltOptions {
    pub p: f64,
    pub j_list: Vec<u32>,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumOptions {
    pub p_grid: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub inv_p_grid: Vec<f64>,
}

/// Fully resolved experiment. Everything that can change a numeric output is
/// serialized into the provenance hash; the worker count and output location
/// are not.
#[derive(Debug, Clone, Serialize)]
pub struct Experiment {
    pub profile: Profile,
    pub family: String,
    pub lambda2: f64,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub t_log2: u32,
    pub chi_list: Vec<f64>,
    pub j_min: u32,
    pub j_max: u32,
    pub delta_levels: u32,
    pub p_list: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub max_cells: u64,
    pub simulate_trials: usize,
    pub analyzer: AnalyzerChoice,
    pub spectrum: SpectrumOptions,
    pub histogram: HistogramOptions,
    pub clt: CltOptions,
    #[serde(skip)]
    pub generator: Option<GeneratorF64>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

/// Values given on the command line; each overrides the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// `start, start+step, ...` up to `end` inclusive, built by multiplication to avoid drift.
pub fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn finite(name: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return bad(format!("{name}: list must not be empty"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return bad(format!("{name}: non-finite value {v}"));
    }
    Ok(())
}

fn step(name: &str, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, ConfigError> {
    if !(step > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
        return bad(format!("{name}: need finite bounds with min <= max and a positive step"));
    }
    Ok(grid(lo, hi, step))
}

impl Experiment {
    /// Reads `path` (if any) and resolves it against the profile and overrides.
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self, ConfigError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", p.display(), e.0)))?
            }
            None => FileConfig::default(),
        };
        Self::resolve(file, over)
    }

    #[cfg(test)]
    pub fn from_toml(text: &str, over: &Overrides) -> Result<Self, ConfigError> {
        Self::resolve(Self::parse(text)?, over)
    }

    fn parse(text: &str) -> Result<FileConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))
    }

    fn resolve(f: FileConfig, over: &Overrides) -> Result<Self, ConfigError> {
        let profile = over.profile.or(f.profile).unwrap_or_default();
        let (t_log2, trials, delta_levels) = match profile {
            Profile::Desk => (10, 30, 5),
            Profile::Paper => (13, 130, 12),
        };

        let family: FamilyKind = match &f.model.family {
            Some(s) => s.parse().map_err(|e| ConfigError(format!("model.family: {e}")))?,
            None => FamilyKind::LogNormal,
        };
        let lambda2 = f.model.lambda2.unwrap_or(0.2);
        let (delta, beta) = match family {
            FamilyKind::LogNormal => (None, None),
            FamilyKind::LogPoisson => (Some(f.model.delta.unwrap_or(-0.1)), None),
            FamilyKind::LogGamma => (None, Some(f.model.beta.unwrap_or(10.0))),
        };
        if family != FamilyKind::LogPoisson && f.model.delta.is_some() {
            return bad(format!("model.delta: only meaningful for logpoisson, family is {family}"));
        }
        if family != FamilyKind::LogGamma && f.model.beta.is_some() {
            return bad(format!("model.beta: only meaningful for loggamma, family is {family}"));
        }
        let generator = GeneratorF64::new(family, lambda2, delta.or(beta))
            .map_err(|e| ConfigError(format!("model: {e}")))?;

        let r = f.run;
        let Some(master_seed) = over.seed.or(r.master_seed) else {
            return bad("run.master_seed: a seed is required (set it in the config or pass --seed)");
        };
        let chi_list = r.chi_list.unwrap_or_else(|| vec![0.0, 0.5, 1.0]);
        finite("run.chi_list", &chi_list)?;
        if let Some(c) = chi_list.iter().find(|c| **c < 0.0) {
            return bad(format!("run.chi_list: chi must be >= 0, got {c}"));
        }
        let j_min = r.j_min.unwrap_or(0);
        let j_max = r.j_max.unwrap_or(6);
        if j_max <= j_min {
            return bad(format!("run.j_max: must exceed run.j_min ({j_max} <= {j_min})"));
        }
        let p_list = r.p_list.unwrap_or_else(|| grid(0.0, 6.0, 0.5));
        finite("run.p_list", &p_list)?;
        let trials = r.trials.unwrap_or(trials);
        if trials == 0 {
            return bad("run.trials: must be at least 1");
        }

        let analyzer = f.fit.analyzer.unwrap_or_default();
        let min_j = match analyzer {
            AnalyzerChoice::Dyadic => 0,
            AnalyzerChoice::Box => 1,
            AnalyzerChoice::Haar => 2,
        };
        if j_min < min_j {
            return bad(format!("fit.analyzer: {analyzer:?} windows need run.j_min >= {min_j}"));
        }
        if analyzer != AnalyzerChoice::Dyadic {
            if let Some(p) = p_list.iter().find(|p| **p <= 0.0) {
                return bad(format!("run.p_list: window analyzers need p > 0, got {p}"));
            }
        }

        let s = f.spectrum;
        let spectrum = SpectrumOptions {
            p_grid: step(
                "spectrum.p_*",
                s.p_min.unwrap_or(-4.0),
                s.p_max.unwrap_or(8.0),
                s.p_step.unwrap_or(0.1),
            )?,
            h_grid: step(
                "spectrum.h_*",
                s.h_min.unwrap_or(0.0),
                s.h_max.unwrap_or(2.5),
                s.h_step.unwrap_or(0.01),
            )?,
            inv_p_grid: {
                let st = s.inv_p_step.unwrap_or(0.01);
                step("spectrum.inv_p_step", st, 1.0, st)?
            },
        };

        let h = f.histogram;
        let epsilon = h.epsilon.unwrap_or(0.05);
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return bad(format!("histogram.epsilon: must be positive, got {epsilon}"));
        }
        let h_bins = match h.h_bins {
            Some(b) => b,
            None => {
                let (lo, hi) = (h.h_min.unwrap_or(0.0), h.h_max.unwrap_or(2.0));
                if !(hi > lo) {
                    return bad("histogram.h_max: must exceed histogram.h_min");
                }
                mixcascade::analysis::contiguous_bins(lo, hi, epsilon)
            }
        };
        finite("histogram.h_bins", &h_bins)?;
        let histogram = HistogramOptions {
            chi: h.chi.unwrap_or(1.0),
            j_list: h.j_list.unwrap_or_else(|| (4..=9).collect()),
            h_bins,
            epsilon,
            trials: h.trials.unwrap_or(10),
        };
        if histogram.j_list.len() < 2 {
            return bad("histogram.j_list: need at least two levels to fit a slope");
        }
        if !(histogram.chi >= 0.0 && histogram.chi.is_finite()) {
            return bad("histogram.chi: must be finite and >= 0");
        }
        if histogram.trials == 0 {
            return bad("histogram.trials: must be at least 1");
        }

        let c = f.clt;
        let clt = CltOptions {
            p: c.p.unwrap_or(1.0),
            j_list: c.j_list.unwrap_or_else(|| (3..=8).collect()),
            trials: c.trials.unwrap_or(64),
        };
        if clt.trials < mixcascade::estimation::CLT_MIN_TRIALS {
            return bad(format!(
                "clt.trials: at least {} trials are needed for a variance estimate",
                mixcascade::estimation::CLT_MIN_TRIALS
            ));
        }
        if clt.j_list.len() < 2 {
            return bad("clt.j_list: need at least two levels to fit a slope");
        }

        let simulate_trials = f.simulate.trials.unwrap_or(1);
        if simulate_trials == 0 {
            return bad("simulate.trials: must be at least 1");
        }

        Ok(Experiment {
            profile,
            family: family.name().to_string(),
            lambda2,
            delta,
            beta,
            t_log2: r.t_log2.unwrap_or(t_log2),
            chi_list,
            j_min,
            j_max,
            delta_levels: r.delta_levels.unwrap_or(delta_levels),
            p_list,
            trials,
            master_seed,
            max_cells: r.max_cells.unwrap_or(ResourceLimits::default().max_cells),
            simulate_trials,
            analyzer,
            spectrum,
            histogram,
            clt,
            generator: Some(generator),
            workers: over.workers.or(r.workers).unwrap_or(1),
            out_dir: over.out.clone().or(r.out_dir).unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    pub fn generator(&self) -> GeneratorF64 {
        self.generator.expect("set by resolve")
    }

    pub fn limits(&self) -> ResourceLimits {
        ResourceLimits { max_cells: self.max_cells }
    }

    /// Refuses a build of `j_max` analysis levels before anything is allocated.
    pub fn preflight(&self, j_max: u32, chi: f64) -> mixcascade::Result<()> {
        self.limits().check(mixed_cell_count(j_max, chi, self.delta_levels))
    }

    /// Hex SHA-256 of the canonical TOML form of this experiment.
    pub fn sha256(&self) -> String {
        let text = toml::to_string(self).expect("experiment serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
