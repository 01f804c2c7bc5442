//! Scenario file schema and conversion to core model types.
//!
//! The file is a single JSON document; unknown keys are rejected and schema
//! errors are reported with their JSON path. Agents and background states are
//! indexed from zero throughout.

use serde::{Deserialize, Serialize};

use dissem::apps::{
    build_opinion_spec, build_storage_spec, build_wealth_spec, LinkRates, OpinionScenario,
    StorageScenario, StorageVariant, WealthScenario,
};
use dissem::kernels::OffspringDistribution;
use dissem::model::{ArrivalClass, BackgroundChain, InitialState, ModelSpec, ShockStream};
use dissem::numerics::Matrix;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: ModelDoc,
    #[serde(default)]
    pub run: RunDoc,
    #[serde(default)]
    pub simulate: SimulateDoc,
    #[serde(default)]
    pub oracle: OracleDoc,
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ModelDoc {
    Custom(CustomModelDoc),
    Preset(PresetDoc),
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub t_end: Option<f64>,
    pub step: Option<f64>,
    pub sample_times: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateDoc {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OracleDoc {
    pub cap: Option<Vec<usize>>,
    pub budget: Option<usize>,
    pub overflow_threshold: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModelDoc {
    pub agents: usize,
    pub chain: ChainDoc,
    #[serde(default)]
    pub arrivals: Vec<ArrivalDoc>,
    /// Single-stream shorthand: per-state shock rates plus one kernel table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shock_rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<Vec<KernelDoc>>>,
    /// General form: any number of named shock streams.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shocks: Vec<ShockStreamDoc>,
    pub initial_wealth: Vec<u64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDoc {
    pub q: Vec<Vec<f64>>,
    pub initial: InitialDoc,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InitialDoc {
    State(usize),
    Probs(Vec<f64>),
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalDoc {
    pub targets: Vec<usize>,
    pub rates: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ShockStreamDoc {
    pub name: String,
    pub rates: Vec<f64>,
    pub kernels: Vec<Vec<KernelDoc>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum KernelDoc {
    Deterministic {
        offspring: Vec<u32>,
    },
    UnitMultinomial {
        placement: Vec<f64>,
    },
    Amplified {
        double_prob: f64,
        placement: Vec<f64>,
    },
    FiniteTable {
        rows: Vec<FiniteRowDoc>,
    },
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteRowDoc {
    pub offspring: Vec<u32>,
    pub prob: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PresetDoc {
    pub name: String,
    pub params: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WealthParamsDoc {
    pub agents: usize,
    pub growth_to_recession: f64,
    pub recession_to_growth: f64,
    pub leader_income: [f64; 2],
    pub shock_rates: [f64; 2],
    pub retention: [f64; 2],
    pub leader_leak: [f64; 2],
    pub follower_leak: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpinionParamsDoc {
    pub group_a: usize,
    pub group_b: usize,
    pub normal_to_adapted: f64,
    pub adapted_to_normal: f64,
    #[serde(default)]
    pub adapted_arrival_rate: f64,
    #[serde(default)]
    pub double_prob: f64,
    pub shock_rate: f64,
    pub attention_ratio_a: f64,
    pub attention_ratio_b: f64,
    pub initial_opinion: [u64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageParamsDoc {
    pub variant: String,
    pub create_rate: f64,
    pub backup_rate: f64,
    #[serde(default)]
    pub link: Option<LinkDoc>,
    #[serde(default)]
    pub failure_rate: Option<f64>,
    #[serde(default)]
    pub cost_per_backup: f64,
    #[serde(default)]
    pub cost_per_uncopied: f64,
    #[serde(default)]
    pub horizon: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub outage: f64,
    pub repair: f64,
}

const KNOWN_OUTPUTS: &[&str] = &[
    "means",
    "seconds",
    "stationary",
    "ensemble",
    "oracle",
    "optimum",
    "model",
];

/// Parse and schema-check a scenario document, reporting the JSON path of
/// the first violation.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, CliError> {
    let deserializer = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(deserializer)
        .map_err(|e| CliError::Input(format!("schema error at {}: {}", e.path(), e.inner())))?;
    for output in &file.outputs {
        if !KNOWN_OUTPUTS.contains(&output.as_str()) {
            return Err(CliError::Input(format!(
                "outputs: unknown product \"{output}\" (known: {})",
                KNOWN_OUTPUTS.join(", ")
            )));
        }
    }
    check_finite(text)?;
    Ok(file)
}

// All numbers in the document must be finite; serde_json already rejects
// bare NaN/Infinity literals, so this guards against overflow spellings like
// 1e999 collapsing to infinity.
fn check_finite(text: &str) -> Result<(), CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
    fn walk(v: &serde_json::Value, path: &mut String) -> Result<(), CliError> {
        match v {
            serde_json::Value::Number(n) => {
                if let Some(f) = n.as_f64() {
                    if !f.is_finite() {
                        return Err(CliError::Input(format!("non-finite number at {path}")));
                    }
                }
            }
            serde_json::Value::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    walk(item, path)?;
                    path.truncate(len);
                }
            }
            serde_json::Value::Object(map) => {
                for (key, item) in map {
                    let len = path.len();
                    if !path.is_empty() {
                        path.push('.');
                    }
                    path.push_str(key);
                    walk(item, path)?;
                    path.truncate(len);
                }
            }
            _ => {}
        }
        Ok(())
    }
    walk(&value, &mut String::new())
}

impl KernelDoc {
    pub fn to_kernel(&self) -> OffspringDistribution {
        match self {
            KernelDoc::Deterministic { offspring } => {
                OffspringDistribution::Deterministic(offspring.clone())
            }
            KernelDoc::UnitMultinomial { placement } => {
                OffspringDistribution::UnitMultinomialWithLeak(placement.clone())
            }
            KernelDoc::Amplified {
                double_prob,
                placement,
            } => OffspringDistribution::Amplified {
                double_prob: *double_prob,
                placement: placement.clone(),
            },
            KernelDoc::FiniteTable { rows } => OffspringDistribution::FiniteTable(
                rows.iter().map(|r| (r.offspring.clone(), r.prob)).collect(),
            ),
        }
    }

    pub fn from_kernel(kernel: &OffspringDistribution) -> Self {
        match kernel {
            OffspringDistribution::Deterministic(v) => KernelDoc::Deterministic {
                offspring: v.clone(),
            },
            OffspringDistribution::UnitMultinomialWithLeak(p) => KernelDoc::UnitMultinomial {
                placement: p.clone(),
            },
            OffspringDistribution::Amplified {
                double_prob,
                placement,
            } => KernelDoc::Amplified {
                double_prob: *double_prob,
                placement: placement.clone(),
            },
            OffspringDistribution::FiniteTable(rows) => KernelDoc::FiniteTable {
                rows: rows
                    .iter()
                    .map(|(offspring, prob)| FiniteRowDoc {
                        offspring: offspring.clone(),
                        prob: *prob,
                    })
                    .collect(),
            },
        }
    }
}

impl ModelDoc {
    /// Construct the model without the validity gate (the `validate` command
    /// wants to list violations itself).
    pub fn build_unchecked(&self) -> Result<ModelSpec, CliError> {
        match self {
            ModelDoc::Custom(doc) => doc.build(),
            ModelDoc::Preset(preset) => build_preset(preset),
        }
    }

    /// Build and validate the full model.
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let spec = self.build_unchecked()?;
        let report = dissem::validate(&spec);
        if !report.is_valid() {
            let lines: Vec<String> = report.violations.iter().map(|v| format!("  {v}")).collect();
            return Err(CliError::Input(format!(
                "model failed validation:\n{}",
                lines.join("\n")
            )));
        }
        Ok(spec)
    }
}

impl CustomModelDoc {
    fn build(&self) -> Result<ModelSpec, CliError> {
        let initial = match &self.chain.initial {
            InitialDoc::State(k) => InitialState::Fixed(*k),
            InitialDoc::Probs(p) => InitialState::Mixed(p.clone()),
        };
        let rows = self.chain.q.len();
        for (i, row) in self.chain.q.iter().enumerate() {
            if row.len() != rows {
                return Err(CliError::Input(format!(
                    "model.custom.chain.q[{i}]: expected {rows} entries, got {}",
                    row.len()
                )));
            }
        }
        let chain = BackgroundChain::new(Matrix::from_rows(&self.chain.q), initial);
        let arrivals = self
            .arrivals
            .iter()
            .map(|a| ArrivalClass::new(a.targets.clone(), a.rates.clone()))
            .collect();

        let mut shocks: Vec<ShockStream> = self
            .shocks
            .iter()
            .map(|s| ShockStream {
                name: s.name.clone(),
                rates: s.rates.clone(),
                kernels: s
                    .kernels
                    .iter()
                    .map(|row| row.iter().map(KernelDoc::to_kernel).collect())
                    .collect(),
            })
            .collect();
        match (&self.shock_rates, &self.kernels) {
            (Some(rates), Some(kernels)) => {
                shocks.push(ShockStream {
                    name: "shocks".into(),
                    rates: rates.clone(),
                    kernels: kernels
                        .iter()
                        .map(|row| row.iter().map(KernelDoc::to_kernel).collect())
                        .collect(),
                });
            }
            (None, None) => {}
            _ => {
                return Err(CliError::Input(
                    "model.custom: shock_rates and kernels must be given together".into(),
                ))
            }
        }
        if shocks.is_empty() {
            return Err(CliError::Input(
                "model.custom: provide shock_rates/kernels or a shocks list".into(),
            ));
        }

        Ok(ModelSpec {
            agents: self.agents,
            chain,
            arrivals,
            shocks,
            initial_wealth: self.initial_wealth.clone(),
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Self {
        let q = (0..spec.chain.dim())
            .map(|i| {
                (0..spec.chain.dim())
                    .map(|j| spec.chain.generator()[(i, j)])
                    .collect()
            })
            .collect();
        let initial = match spec.chain.initial() {
            InitialState::Fixed(k) => InitialDoc::State(*k),
            InitialState::Mixed(p) => InitialDoc::Probs(p.clone()),
        };
        CustomModelDoc {
            agents: spec.agents,
            chain: ChainDoc { q, initial },
            arrivals: spec
                .arrivals
                .iter()
                .map(|a| ArrivalDoc {
                    targets: a.targets.clone(),
                    rates: a.rates.clone(),
                })
                .collect(),
            shock_rates: None,
            kernels: None,
            shocks: spec
                .shocks
                .iter()
                .map(|s| ShockStreamDoc {
                    name: s.name.clone(),
                    rates: s.rates.clone(),
                    kernels: s
                        .kernels
                        .iter()
                        .map(|row| row.iter().map(KernelDoc::from_kernel).collect())
                        .collect(),
                })
                .collect(),
            initial_wealth: spec.initial_wealth.clone(),
        }
    }
}

fn build_preset(preset: &PresetDoc) -> Result<ModelSpec, CliError> {
    let path_error = |e: serde_path_to_error::Error<serde_json::Error>| {
        CliError::Input(format!(
            "model.preset.params at {}: {}",
            e.path(),
            e.inner()
        ))
    };
    match preset.name.as_str() {
        "wealth" => {
            let p: WealthParamsDoc =
                serde_path_to_error::deserialize(preset.params.clone()).map_err(path_error)?;
            let sc = WealthScenario::from_leaks(
                p.agents,
                p.growth_to_recession,
                p.recession_to_growth,
                p.leader_income,
                p.shock_rates,
                p.retention,
                p.leader_leak,
                p.follower_leak,
            );
            let issues = sc.check();
            if !issues.is_empty() {
                return Err(CliError::Input(format!(
                    "wealth preset rejected: {}",
                    issues.join("; ")
                )));
            }
            Ok(build_wealth_spec(&sc))
        }
        "opinion" => {
            let p: OpinionParamsDoc =
                serde_path_to_error::deserialize(preset.params.clone()).map_err(path_error)?;
            let sc = OpinionScenario::from_attention_ratios(
                p.group_a,
                p.group_b,
                p.normal_to_adapted,
                p.adapted_to_normal,
                p.adapted_arrival_rate,
                p.double_prob,
                p.shock_rate,
                p.attention_ratio_a,
                p.attention_ratio_b,
                p.initial_opinion,
            );
            let issues = sc.check();
            if !issues.is_empty() {
                return Err(CliError::Input(format!(
                    "opinion preset rejected: {}",
                    issues.join("; ")
                )));
            }
            Ok(build_opinion_spec(&sc))
        }
        "storage" => {
            let p: StorageParamsDoc =
                serde_path_to_error::deserialize(preset.params.clone()).map_err(path_error)?;
            let (sc, variant) = storage_scenario(&p)?;
            build_storage_spec(&sc, variant).map_err(|e| CliError::Input(e.to_string()))
        }
        other => Err(CliError::Input(format!(
            "model.preset.name: unknown preset \"{other}\" (known: wealth, opinion, storage)"
        ))),
    }
}

pub fn storage_scenario(
    p: &StorageParamsDoc,
) -> Result<(StorageScenario, StorageVariant), CliError> {
    let variant = match p.variant.as_str() {
        "basic" => StorageVariant::Basic,
        "faulty_link" => StorageVariant::FaultyLink,
        "with_failures" => StorageVariant::WithFailures,
        other => {
            return Err(CliError::Input(format!(
                "storage preset: unknown variant \"{other}\""
            )))
        }
    };
    let mut sc = StorageScenario::basic(p.create_rate, p.backup_rate).with_costs(
        p.cost_per_backup,
        p.cost_per_uncopied,
        p.horizon,
    );
    if let Some(link) = &p.link {
        sc = sc.with_link(LinkRates {
            outage: link.outage,
            repair: link.repair,
        });
    }
    if let Some(rate) = p.failure_rate {
        sc = sc.with_failures(rate);
    }
    Ok((sc, variant))
}
