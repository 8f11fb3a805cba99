use std::path::{Path, PathBuf};

use disent_core::analysis::{DownstreamLearner, DEFAULT_SIZES, DEFAULT_TEST_SIZE};
use disent_core::estimation::Estimator;
use disent_core::factors::{EncoderKind, Factor, FactorSpace, OracleEncoder};
use disent_core::impossibility::{Entangler, Marginal};
use disent_core::metrics::{EvalBudget, Metric};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    pub encoders: Vec<EncoderSpec>,
    /// Evaluation seeds; every (dataset, encoder, seed) is one model.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub downstream: Option<DownstreamSpec>,
    #[serde(default)]
    pub analyses: Vec<AnalysisKind>,
    #[serde(default)]
    pub analysis_settings: AnalysisSettings,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: String,
    pub cardinalities: Vec<usize>,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

impl DatasetSpec {
    pub fn space(&self) -> disent_core::Result<FactorSpace> {
        match &self.names {
            None => FactorSpace::from_cardinalities(&self.cardinalities),
            Some(names) => {
                if names.len() != self.cardinalities.len() {
                    return Err(disent_core::Error::Argument(format!(
                        "{} names for {} factors",
                        names.len(),
                        self.cardinalities.len()
                    )));
                }
                FactorSpace::new(
                    names
                        .iter()
                        .zip(&self.cardinalities)
                        .map(|(n, &c)| Factor {
                            name: n.clone(),
                            cardinality: c,
                        })
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub id: String,
    pub kind: KindSpec,
    #[serde(default)]
    pub sigma: f64,
    /// Design labels used by the variance and transfer analyses; default to
    /// the kind's name and its main parameter.
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub hyperparam: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KindSpec {
    Identity {},
    PermuteScale {
        permutation: Vec<usize>,
        scale: Vec<f64>,
    },
    Merge {
        groups: Vec<Vec<usize>>,
    },
    Duplicate {
        sources: Vec<usize>,
    },
    Noise {
        stds: Vec<f64>,
    },
    Collapsed {
        dims: usize,
        #[serde(default)]
        value: f64,
    },
    Rotation {
        alpha: f64,
        #[serde(default)]
        factors: Vec<usize>,
        #[serde(default = "default_marginal")]
        marginal: Marginal,
    },
    Concat {
        parts: Vec<KindSpec>,
    },
    /// Precomputed representation read from CSV files.
    External {
        factors_csv: PathBuf,
        codes_csv: PathBuf,
        #[serde(default = "default_external")]
        dataset: String,
    },
}

fn default_marginal() -> Marginal {
    Marginal::Uniform01
}

fn default_external() -> String {
    "external".into()
}

impl KindSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KindSpec::Identity {} => "identity",
            KindSpec::PermuteScale { .. } => "permute_scale",
            KindSpec::Merge { .. } => "merge",
            KindSpec::Duplicate { .. } => "duplicate",
            KindSpec::Noise { .. } => "noise",
            KindSpec::Collapsed { .. } => "collapsed",
            KindSpec::Rotation { .. } => "rotation",
            KindSpec::Concat { .. } => "concat",
            KindSpec::External { .. } => "external",
        }
    }

    fn default_hyperparam(&self) -> String {
        match self {
            KindSpec::Rotation { alpha, .. } => format!("{alpha}"),
            KindSpec::Merge { groups } => format!("{}", groups.len()),
            KindSpec::Duplicate { sources } => format!("{}", sources.len()),
            KindSpec::Noise { stds } => format!("{}", stds.len()),
            KindSpec::Collapsed { dims, .. } => format!("{dims}"),
            _ => "-".into(),
        }
    }

    /// Oracle encoder structure for `k` factors; `None` for external data.
    pub fn build(&self, path: &str, k: usize) -> Result<Option<EncoderKind>> {
        Ok(Some(match self {
            KindSpec::Identity {} => EncoderKind::Identity,
            KindSpec::PermuteScale { permutation, scale } => EncoderKind::PermuteScale {
                permutation: permutation.clone(),
                scale: scale.clone(),
            },
            KindSpec::Merge { groups } => EncoderKind::Merge {
                groups: groups.clone(),
            },
            KindSpec::Duplicate { sources } => EncoderKind::Duplicate {
                sources: sources.clone(),
            },
            KindSpec::Noise { stds } => EncoderKind::NoiseChannels { stds: stds.clone() },
            KindSpec::Collapsed { dims, value } => EncoderKind::Collapsed {
                dims: *dims,
                value: *value,
            },
            KindSpec::Rotation {
                alpha,
                factors,
                marginal,
            } => {
                if !(*alpha > 0.0 && *alpha < 0.5) {
                    return Err(CliError::config(
                        format!("{path}.alpha"),
                        format!("{alpha} is outside the open range (0, 0.5)"),
                    ));
                }
                if factors.len() == 1 {
                    return Err(CliError::config(
                        format!("{path}.factors"),
                        "rotate at least two factors",
                    ));
                }
                let d = if factors.is_empty() { k } else { factors.len() };
                let entangler = Entangler::new(d, *alpha, *marginal)
                    .map_err(|e| CliError::config(path, e.to_string()))?;
                EncoderKind::Rotation {
                    entangler,
                    factors: factors.clone(),
                }
            }
            KindSpec::Concat { parts } => {
                let mut out = Vec::with_capacity(parts.len());
                for (i, p) in parts.iter().enumerate() {
                    match p.build(&format!("{path}.parts[{i}]"), k)? {
                        Some(k) => out.push(k),
                        None => {
                            return Err(CliError::config(
                                format!("{path}.parts[{i}]"),
                                "external data cannot be concatenated",
                            ))
                        }
                    }
                }
                EncoderKind::Concat { parts: out }
            }
            KindSpec::External { .. } => return Ok(None),
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSpec {
    /// Metric names; all nine when omitted.
    pub names: Vec<String>,
    /// Score every estimator × aggregation pair too.
    pub blends: bool,
    /// Gaussian total correlation and mean pairwise MI of mean and sampled codes.
    pub unsupervised: bool,
    pub budget: EvalBudget,
    pub unrelated_dim_is_modular: bool,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            names: Metric::ALL.iter().map(|m| m.name().to_string()).collect(),
            blends: true,
            unsupervised: true,
            budget: EvalBudget::default(),
            unrelated_dim_is_modular: true,
        }
    }
}

impl MetricsSpec {
    pub fn parsed(&self) -> Vec<Metric> {
        self.names.iter().filter_map(|n| Metric::parse(n)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DownstreamSpec {
    pub learners: Vec<DownstreamLearner>,
    pub sizes: Vec<usize>,
    pub n_test: usize,
}

impl Default for DownstreamSpec {
    fn default() -> Self {
        Self {
            learners: vec![DownstreamLearner::LogisticCv, DownstreamLearner::Gbt],
            sizes: DEFAULT_SIZES.to_vec(),
            n_test: DEFAULT_TEST_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    RankCorrelation,
    VarianceExplained,
    Transfer,
    Groups,
    Reliability,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::RankCorrelation => "rank_correlation",
            AnalysisKind::VarianceExplained => "variance_explained",
            AnalysisKind::Transfer => "transfer",
            AnalysisKind::Groups => "groups",
            AnalysisKind::Reliability => "reliability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub transfer_trials: usize,
    /// Matrix used for independent-groups curves and dendrograms.
    pub groups_estimator: Estimator,
    pub groups_thresholds: usize,
    /// Dataset whose factor space hosts the reliability encoder family;
    /// the first dataset when omitted.
    pub reliability_dataset: Option<String>,
    pub reliability_metrics: Vec<String>,
    pub reliability_sizes: Vec<usize>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            transfer_trials: 10000,
            groups_estimator: Estimator::Gbt,
            groups_thresholds: 50,
            reliability_dataset: None,
            reliability_metrics: Metric::ALL.iter().map(|m| m.name().to_string()).collect(),
            reliability_sizes: vec![100, 10000],
        }
    }
}

/// An encoder resolved against one dataset.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub dataset: String,
    pub encoder: String,
    pub method: String,
    pub hyperparam: String,
    pub seed: u64,
    pub source: ModelSource,
}

#[derive(Debug, Clone)]
pub enum ModelSource {
    Oracle {
        space: FactorSpace,
        encoder: OracleEncoder,
    },
    External {
        factors_csv: PathBuf,
        codes_csv: PathBuf,
    },
}

impl ModelSpec {
    pub fn task_id(&self) -> String {
        format!("eval/{}/{}/{}", self.dataset, self.encoder, self.seed)
    }
}

/// A parsed and validated configuration plus the exact bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
    pub base_dir: PathBuf,
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let config = parse_config_bytes(&bytes, &base_dir)?;
    Ok(LoadedConfig {
        config,
        bytes,
        base_dir,
    })
}

/// Strict parse: unknown keys are rejected and every error names its key path.
pub fn parse_config_bytes(bytes: &[u8], base_dir: &Path) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(
            if path.is_empty() || path == "." {
                "<root>".to_string()
            } else {
                path
            },
            e.into_inner().to_string(),
        )
    })?;
    validate(&config, base_dir)?;
    Ok(config)
}

fn validate(c: &RunConfig, base_dir: &Path) -> Result<()> {
    if c.encoders.is_empty() {
        return Err(CliError::config(
            "encoders",
            "at least one encoder or external data pair is required",
        ));
    }
    if c.seeds.is_empty() {
        return Err(CliError::config(
            "seeds",
            "at least one evaluation seed is required",
        ));
    }
    let has_oracle = c
        .encoders
        .iter()
        .any(|e| !matches!(e.kind, KindSpec::External { .. }));
    if has_oracle && c.datasets.is_empty() {
        return Err(CliError::config(
            "datasets",
            "oracle encoders need at least one dataset",
        ));
    }
    let mut ids = std::collections::BTreeSet::new();
    for (i, d) in c.datasets.iter().enumerate() {
        check_id(&d.id, &format!("datasets[{i}].id"))?;
        if !ids.insert(d.id.clone()) {
            return Err(CliError::config(
                format!("datasets[{i}].id"),
                format!("duplicate dataset id {:?}", d.id),
            ));
        }
        d.space()
            .map_err(|e| CliError::config(format!("datasets[{i}]"), e.to_string()))?;
    }
    let mut ids = std::collections::BTreeSet::new();
    for (i, e) in c.encoders.iter().enumerate() {
        let path = format!("encoders[{i}]");
        check_id(&e.id, &format!("{path}.id"))?;
        if !ids.insert(e.id.clone()) {
            return Err(CliError::config(
                format!("{path}.id"),
                format!("duplicate encoder id {:?}", e.id),
            ));
        }
        if !(e.sigma.is_finite() && e.sigma >= 0.0) {
            return Err(CliError::config(
                format!("{path}.sigma"),
                "must be finite and >= 0",
            ));
        }
        if let KindSpec::External {
            factors_csv,
            codes_csv,
            dataset,
        } = &e.kind
        {
            check_id(dataset, &format!("{path}.kind.dataset"))?;
            for (key, f) in [("factors_csv", factors_csv), ("codes_csv", codes_csv)] {
                if !base_dir.join(f).is_file() {
                    return Err(CliError::config(
                        format!("{path}.kind.{key}"),
                        format!("file {} not found", f.display()),
                    ));
                }
            }
            continue;
        }
        for d in &c.datasets {
            let space = d
                .space()
                .map_err(|x| CliError::config("datasets", x.to_string()))?;
            if let Some(kind) = e.kind.build(&format!("{path}.kind"), space.num_factors())? {
                OracleEncoder::new(kind, e.sigma)
                    .and_then(|o| o.validate(&space))
                    .map_err(|x| {
                        CliError::config(
                            format!("{path}.kind"),
                            format!("on dataset {:?}: {x}", d.id),
                        )
                    })?;
            }
        }
    }
    for (i, n) in c.metrics.names.iter().enumerate() {
        if Metric::parse(n).is_none() {
            return Err(CliError::config(
                format!("metrics.names[{i}]"),
                format!("unknown metric {n:?}"),
            ));
        }
    }
    c.metrics
        .budget
        .validate()
        .map_err(|e| CliError::config("metrics.budget", e.to_string()))?;
    if let Some(d) = &c.downstream {
        if d.learners.is_empty() || d.sizes.is_empty() || d.sizes.contains(&0) || d.n_test == 0 {
            return Err(CliError::config(
                "downstream",
                "needs learners, positive sizes and a positive n_test",
            ));
        }
    }
    let s = &c.analysis_settings;
    for (i, n) in s.reliability_metrics.iter().enumerate() {
        if Metric::parse(n).is_none() {
            return Err(CliError::config(
                format!("analysis_settings.reliability_metrics[{i}]"),
                format!("unknown metric {n:?}"),
            ));
        }
    }
    if s.reliability_sizes.is_empty() || s.reliability_sizes.contains(&0) {
        return Err(CliError::config(
            "analysis_settings.reliability_sizes",
            "needs positive sizes",
        ));
    }
    if s.transfer_trials == 0 {
        return Err(CliError::config(
            "analysis_settings.transfer_trials",
            "must be positive",
        ));
    }
    if let Some(d) = &s.reliability_dataset {
        if !c.datasets.iter().any(|x| &x.id == d) {
            return Err(CliError::config(
                "analysis_settings.reliability_dataset",
                format!("no dataset {d:?}"),
            ));
        }
    }
    Ok(())
}

/// Ids become path components.
fn check_id(id: &str, path: &str) -> Result<()> {
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        || id.starts_with('.')
    {
        return Err(CliError::config(
            path,
            format!("{id:?} must be nonempty and use only [A-Za-z0-9_.-]"),
        ));
    }
    Ok(())
}

impl LoadedConfig {
    /// All models in configuration order: datasets × oracle encoders × seeds,
    /// then external data (seed 0 only).
    pub fn models(&self) -> Result<Vec<ModelSpec>> {
        let c = &self.config;
        let mut out = Vec::new();
        for d in &c.datasets {
            let space = d.space()?;
            for e in &c.encoders {
                let Some(kind) = e.kind.build("encoders", space.num_factors())? else {
                    continue;
                };
                let encoder = OracleEncoder::new(kind, e.sigma)?;
                for &seed in &c.seeds {
                    out.push(ModelSpec {
                        dataset: d.id.clone(),
                        encoder: e.id.clone(),
                        method: e.method.clone().unwrap_or_else(|| e.kind.name().into()),
                        hyperparam: e
                            .hyperparam
                            .clone()
                            .unwrap_or_else(|| e.kind.default_hyperparam()),
                        seed,
                        source: ModelSource::Oracle {
                            space: space.clone(),
                            encoder: encoder.clone(),
                        },
                    });
                }
            }
        }
        for e in &c.encoders {
            if let KindSpec::External {
                factors_csv,
                codes_csv,
                dataset,
            } = &e.kind
            {
                out.push(ModelSpec {
                    dataset: dataset.clone(),
                    encoder: e.id.clone(),
                    method: e.method.clone().unwrap_or_else(|| "external".into()),
                    hyperparam: e.hyperparam.clone().unwrap_or_else(|| "-".into()),
                    seed: 0,
                    source: ModelSource::External {
                        factors_csv: self.base_dir.join(factors_csv),
                        codes_csv: self.base_dir.join(codes_csv),
                    },
                });
            }
        }
        Ok(out)
    }
}
