//! JSON configuration ingestion.
//!
//! A document has three top-level sections:
//!
//! ```json
//! {
//!   "hardware": { "preset": "wanvideo", "bw_h2d": 2.0e10 },
//!   "models": [ { "preset": "flux" }, { "name": "custom", ... } ],
//!   "defaults": { "chunk_bytes": 16000000, "residency": 0.0, "policy": "chunked" }
//! }
//! ```
//!
//! Byte quantities are integers in bytes; rates and latencies are SI
//! (FLOP/s, B/s, s). A `preset` key inside `hardware` or a model entry
//! imports the named preset before applying the remaining keys as
//! overrides. Omitted optional fields take documented defaults; every
//! invariant violation is reported with its field path.

use crate::calibration::{
    derive_b_pref, preset, Arch, CalibrationError, HardwareProfile, ModelSpec, SeqFormula, SweepVar,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration parse failure: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("no hardware profile")]
    NoHardware,
    #[error("{path}: {msg}")]
    Field { path: String, msg: String },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

fn field_err(path: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Simulation defaults applied by front ends when flags are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDefaults {
    pub chunk_bytes: f64,
    pub residency: f64,
    pub policy: String,
}

impl Default for SimDefaults {
    fn default() -> Self {
        SimDefaults {
            chunk_bytes: 16e6,
            residency: 0.0,
            policy: "chunked".to_string(),
        }
    }
}

/// A fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub hardware: HardwareProfile,
    pub models: Vec<ModelSpec>,
    pub defaults: SimDefaults,
}

impl LoadedConfig {
    /// Built-in configuration: preset hardware plus all preset models.
    pub fn builtin() -> Self {
        let (hardware, _) = preset("wanvideo").expect("builtin preset");
        let models = crate::calibration::PRESET_NAMES
            .iter()
            .map(|n| preset(n).expect("builtin preset").1)
            .collect();
        LoadedConfig {
            hardware,
            models,
            defaults: SimDefaults::default(),
        }
    }

    pub fn model(&self, name: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    hardware: Option<RawHardware>,
    #[serde(skip_serializing_if = "Option::is_none")]
    models: Option<Vec<RawModel>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    defaults: Option<RawDefaults>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHardware {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_peak: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bw_h2d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_comp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_pref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_dma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bw_coll: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_coll_latency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_pause_resume: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gpu_count: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawArch {
    Dit { num_blocks: u32 },
    Mmdit { n_double: u32, n_single: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawSeq {
    Affine { scale: u64, offset: u64 },
    Fixed { value: u64 },
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    arch: Option<RawArch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_ctx: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_act: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_pref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seq_formula: Option<RawSeq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    activation_overhead: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_var: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_grid: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_collective: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefaults {
    #[serde(skip_serializing_if = "Option::is_none")]
    chunk_bytes: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<String>,
}

fn resolve_hardware(raw: RawHardware) -> Result<HardwareProfile, ConfigError> {
    let base = match &raw.preset {
        Some(name) => Some(preset(name)?.0),
        None => None,
    };
    let take =
        |field: &str, value: Option<f64>, base_value: Option<f64>| -> Result<f64, ConfigError> {
            value
                .or(base_value)
                .ok_or_else(|| field_err(format!("hardware.{field}"), "missing required field"))
        };
    let p_peak = take("p_peak", raw.p_peak, base.as_ref().map(|h| h.p_peak))?;
    let bw_h2d = take("bw_h2d", raw.bw_h2d, base.as_ref().map(|h| h.bw_h2d))?;
    let eta_comp = take("eta_comp", raw.eta_comp, base.as_ref().map(|h| h.eta_comp))?;
    let eta_pref = take("eta_pref", raw.eta_pref, base.as_ref().map(|h| h.eta_pref))?;
    let t_dma = raw
        .t_dma
        .or(base.as_ref().map(|h| h.t_dma))
        .unwrap_or(40e-6);
    let bw_coll = raw
        .bw_coll
        .or(base.as_ref().map(|h| h.bw_coll))
        .unwrap_or(eta_pref * bw_h2d);
    let t_coll_latency = raw
        .t_coll_latency
        .or(base.as_ref().map(|h| h.t_coll_latency))
        .unwrap_or(50e-6);
    let t_pause_resume = raw
        .t_pause_resume
        .or(base.as_ref().map(|h| h.t_pause_resume))
        .unwrap_or(10e-6);
    let gpu_count = raw
        .gpu_count
        .or(base.as_ref().map(|h| h.gpu_count))
        .unwrap_or(1);

    let hw = HardwareProfile {
        p_peak,
        bw_h2d,
        eta_comp,
        eta_pref,
        t_dma,
        bw_coll,
        t_coll_latency,
        t_pause_resume,
        gpu_count,
    };
    hw.validate_at("hardware")?;
    Ok(hw)
}

fn resolve_model(raw: RawModel, index: usize) -> Result<ModelSpec, ConfigError> {
    let path = format!("models[{index}]");
    let base = match &raw.preset {
        Some(name) => Some(preset(name)?.1),
        None => None,
    };
    let arch = match (raw.arch, base.as_ref().map(|m| m.arch)) {
        (Some(RawArch::Dit { num_blocks }), _) => Arch::Dit { num_blocks },
        (Some(RawArch::Mmdit { n_double, n_single }), _) => Arch::MmDit { n_double, n_single },
        (None, Some(a)) => a,
        (None, None) => return Err(field_err(format!("{path}.arch"), "missing required field")),
    };
    let seq_formula = match (raw.seq_formula, base.as_ref().map(|m| m.seq_formula)) {
        (Some(RawSeq::Affine { scale, offset }), _) => SeqFormula::Affine { scale, offset },
        (Some(RawSeq::Fixed { value }), _) => SeqFormula::Fixed { value },
        (None, Some(s)) => s,
        (None, None) => {
            return Err(field_err(
                format!("{path}.seq_formula"),
                "missing required field",
            ))
        }
    };
    let name = raw
        .name
        .or(base.as_ref().map(|m| m.name.clone()))
        .ok_or_else(|| field_err(format!("{path}.name"), "missing required field"))?;
    let d = raw
        .d
        .or(base.as_ref().map(|m| m.d))
        .ok_or_else(|| field_err(format!("{path}.d"), "missing required field"))?;
    let f = raw
        .f
        .or(base.as_ref().map(|m| m.f))
        .ok_or_else(|| field_err(format!("{path}.f"), "missing required field"))?;
    let l_ctx = raw
        .l_ctx
        .or(base.as_ref().map(|m| m.l_ctx))
        .ok_or_else(|| field_err(format!("{path}.l_ctx"), "missing required field"))?;
    let beta = raw.beta.or(base.as_ref().map(|m| m.beta)).unwrap_or(2.0);
    let beta_act = raw
        .beta_act
        .or(base.as_ref().map(|m| m.beta_act))
        .unwrap_or(2.0);
    let sweep_var = match raw.sweep_var.as_deref() {
        Some("frames") => SweepVar::Frames,
        Some("batch") => SweepVar::Batch,
        Some(other) => {
            return Err(field_err(
                format!("{path}.sweep_var"),
                format!("unknown sweep variable '{other}' (expected frames or batch)"),
            ))
        }
        None => base
            .as_ref()
            .map(|m| m.sweep_var)
            .unwrap_or(match seq_formula {
                SeqFormula::Affine { .. } => SweepVar::Frames,
                SeqFormula::Fixed { .. } => SweepVar::Batch,
            }),
    };
    let sweep_grid = raw
        .sweep_grid
        .or(base.as_ref().map(|m| m.sweep_grid.clone()))
        .unwrap_or_default();

    let mut model = ModelSpec {
        name,
        arch,
        d,
        f,
        l_ctx,
        beta,
        beta_act,
        // Placeholder until the measured-or-derived choice below.
        b_pref: 1.0,
        seq_formula,
        activation_overhead: raw
            .activation_overhead
            .or(base.as_ref().map(|m| m.activation_overhead))
            .unwrap_or(0.0),
        sweep_var,
        sweep_grid,
        cross_collective: raw
            .cross_collective
            .or(base.as_ref().map(|m| m.cross_collective))
            .unwrap_or(false),
    };
    // A measured volume always wins over the closed-form estimate.
    model.b_pref = match raw.b_pref.or(base.as_ref().map(|m| m.b_pref)) {
        Some(v) => v,
        None => derive_b_pref(&model).map_err(|_| {
            field_err(
                format!("{path}.b_pref"),
                "required for DiT models (no closed-form volume)",
            )
        })?,
    };
    model.validate_at(&path)?;
    Ok(model)
}

/// Parse and validate a configuration document.
// Negated comparisons intentionally treat NaN as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn load_config(document: &str) -> Result<LoadedConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(document)?;
    let hardware = resolve_hardware(raw.hardware.ok_or(ConfigError::NoHardware)?)?;
    let models = raw
        .models
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(i, m)| resolve_model(m, i))
        .collect::<Result<Vec<_>, _>>()?;
    let d = raw.defaults.unwrap_or_default();
    let defaults = SimDefaults {
        chunk_bytes: d.chunk_bytes.unwrap_or(16e6),
        residency: d.residency.unwrap_or(0.0),
        policy: d.policy.unwrap_or_else(|| "chunked".to_string()),
    };
    if !(defaults.chunk_bytes > 0.0) {
        return Err(field_err("defaults.chunk_bytes", "must be > 0"));
    }
    if !(0.0..=1.0).contains(&defaults.residency) {
        return Err(field_err("defaults.residency", "out of [0,1]"));
    }
    if !["no-offload", "whole-layer", "chunked", "chunked-nopause"]
        .contains(&defaults.policy.as_str())
    {
        return Err(field_err(
            "defaults.policy",
            format!("unknown policy '{}'", defaults.policy),
        ));
    }
    Ok(LoadedConfig {
        hardware,
        models,
        defaults,
    })
}

/// Serialize a resolved configuration back to a document that `load_config`
/// reproduces bit-exactly.
pub fn to_document(config: &LoadedConfig) -> String {
    let hw = &config.hardware;
    let raw = RawConfig {
        hardware: Some(RawHardware {
            preset: None,
            p_peak: Some(hw.p_peak),
            bw_h2d: Some(hw.bw_h2d),
            eta_comp: Some(hw.eta_comp),
            eta_pref: Some(hw.eta_pref),
            t_dma: Some(hw.t_dma),
            bw_coll: Some(hw.bw_coll),
            t_coll_latency: Some(hw.t_coll_latency),
            t_pause_resume: Some(hw.t_pause_resume),
            gpu_count: Some(hw.gpu_count),
        }),
        models: Some(
            config
                .models
                .iter()
                .map(|m| RawModel {
                    preset: None,
                    name: Some(m.name.clone()),
                    arch: Some(match m.arch {
                        Arch::Dit { num_blocks } => RawArch::Dit { num_blocks },
                        Arch::MmDit { n_double, n_single } => RawArch::Mmdit { n_double, n_single },
                    }),
                    d: Some(m.d),
                    f: Some(m.f),
                    l_ctx: Some(m.l_ctx),
                    beta: Some(m.beta),
                    beta_act: Some(m.beta_act),
                    b_pref: Some(m.b_pref),
                    seq_formula: Some(match m.seq_formula {
                        SeqFormula::Affine { scale, offset } => RawSeq::Affine { scale, offset },
                        SeqFormula::Fixed { value } => RawSeq::Fixed { value },
                    }),
                    activation_overhead: Some(m.activation_overhead),
                    sweep_var: Some(m.sweep_var.name().to_string()),
                    sweep_grid: Some(m.sweep_grid.clone()),
                    cross_collective: Some(m.cross_collective),
                })
                .collect(),
        ),
        defaults: Some(RawDefaults {
            chunk_bytes: Some(config.defaults.chunk_bytes),
            residency: Some(config.defaults.residency),
            policy: Some(config.defaults.policy.clone()),
        }),
    };
    serde_json::to_string_pretty(&raw).expect("config serialization cannot fail")
}
