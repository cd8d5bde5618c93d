//! Platform and model constants: domain types, invariant validation,
//! built-in presets, and the per-block prefetch-volume estimate for
//! fused-block architectures.

use thiserror::Error;

/// SI megabyte. Preset byte volumes and CLI chunk sizes use SI units.
pub const MB: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("unknown preset '{0}' (expected one of: wanvideo, flux, hunyuanvideo)")]
    UnknownPreset(String),
    #[error("{path}: {msg}")]
    Invariant { path: String, msg: String },
    #[error("prefetch volume derivation requires an MM-DiT architecture; provide a measured b_pref for DiT models")]
    DerivationUnsupported,
}

fn invariant(path: &str, msg: &str) -> CalibrationError {
    CalibrationError::Invariant {
        path: path.to_string(),
        msg: msg.to_string(),
    }
}

/// Platform constants and calibration factors.
///
/// Rates are SI (FLOP/s, B/s), latencies in seconds. `p_peak` is the dense
/// BF16 peak of one GPU; `bw_h2d` is the post-sharing host-to-device
/// bandwidth seen by one GPU. `eta_comp`/`eta_pref` are the empirical
/// calibration factors that scale the two roofs.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    /// Peak dense BF16 throughput, FLOP/s.
    pub p_peak: f64,
    /// Host-to-device bandwidth per GPU after root-complex sharing, B/s.
    pub bw_h2d: f64,
    /// Compute calibration factor in (0, 1].
    pub eta_comp: f64,
    /// Prefetch calibration factor in (0, 1].
    pub eta_pref: f64,
    /// Per-transfer DMA startup latency, seconds.
    pub t_dma: f64,
    /// Effective inter-GPU collective bandwidth at the Rx port, B/s.
    pub bw_coll: f64,
    /// Fixed per-collective launch latency, seconds.
    pub t_coll_latency: f64,
    /// Per-collective pause/resume synchronization overhead, seconds.
    pub t_pause_resume: f64,
    /// Number of symmetric participants.
    pub gpu_count: u32,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        self.validate_at("hardware")
    }

    // Negated comparisons intentionally treat NaN as a violation.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub(crate) fn validate_at(&self, path: &str) -> Result<(), CalibrationError> {
        let field = |f: &str| format!("{path}.{f}");
        if !(self.eta_comp > 0.0 && self.eta_comp <= 1.0) {
            return Err(invariant(&field("eta_comp"), "out of (0,1]"));
        }
        if !(self.eta_pref > 0.0 && self.eta_pref <= 1.0) {
            return Err(invariant(&field("eta_pref"), "out of (0,1]"));
        }
        if !(self.p_peak > 0.0) {
            return Err(invariant(&field("p_peak"), "must be > 0"));
        }
        if !(self.bw_h2d > 0.0) {
            return Err(invariant(&field("bw_h2d"), "must be > 0"));
        }
        if !(self.bw_coll > 0.0) {
            return Err(invariant(&field("bw_coll"), "must be > 0"));
        }
        for (name, v) in [
            ("t_dma", self.t_dma),
            ("t_coll_latency", self.t_coll_latency),
            ("t_pause_resume", self.t_pause_resume),
        ] {
            if !(v >= 0.0) {
                return Err(invariant(&field(name), "must be >= 0"));
            }
        }
        if self.gpu_count < 1 {
            return Err(invariant(&field("gpu_count"), "must be >= 1"));
        }
        Ok(())
    }
}

/// Block architecture of the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    /// Standard DiT block: self-attention, text cross-attention, MLP.
    Dit { num_blocks: u32 },
    /// MM-DiT denoiser with double- and single-stream blocks.
    MmDit { n_double: u32, n_single: u32 },
}

impl Arch {
    pub fn num_blocks(&self) -> u32 {
        match *self {
            Arch::Dit { num_blocks } => num_blocks,
            Arch::MmDit { n_double, n_single } => n_double + n_single,
        }
    }
}

/// Sequence-length formula: affine in the frame count, or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqFormula {
    /// S = scale * (frames + offset).
    Affine { scale: u64, offset: u64 },
    /// S is a constant (image models).
    Fixed { value: u64 },
}

/// Which workload variable a model is swept over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Frames,
    Batch,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::Frames => "frames",
            SweepVar::Batch => "batch",
        }
    }
}

/// Architecture parameters of one model plus its offload-relevant volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub arch: Arch,
    /// Hidden dimension.
    pub d: u64,
    /// FFN expansion dimension.
    pub f: u64,
    /// Text context length, tokens.
    pub l_ctx: u64,
    /// Parameter byte width (2 for BF16).
    pub beta: f64,
    /// Activation byte width used for collective volumes.
    pub beta_act: f64,
    /// Per-block prefetch volume, bytes (block-type average for MM-DiT).
    pub b_pref: f64,
    pub seq_formula: SeqFormula,
    /// User-supplied non-parameter peak-memory constant, bytes.
    pub activation_overhead: f64,
    /// Natural sweep variable for this model.
    pub sweep_var: SweepVar,
    /// Valid swept configurations, used to round critical-configuration
    /// predictions to the nearest admissible point.
    pub sweep_grid: Vec<u64>,
    /// Adds a third all-to-all for DiT cross-attention context re-sharding.
    /// Off by default: the cross-attention context is treated as replicated.
    pub cross_collective: bool,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        self.validate_at("model")
    }

    // Negated comparisons intentionally treat NaN as a violation.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub(crate) fn validate_at(&self, path: &str) -> Result<(), CalibrationError> {
        let field = |f: &str| format!("{path}.{f}");
        for (name, v) in [("d", self.d), ("f", self.f), ("l_ctx", self.l_ctx)] {
            if v == 0 {
                return Err(invariant(&field(name), "must be > 0"));
            }
        }
        if !(self.beta > 0.0) {
            return Err(invariant(&field("beta"), "must be > 0"));
        }
        if !(self.beta_act > 0.0) {
            return Err(invariant(&field("beta_act"), "must be > 0"));
        }
        if !(self.b_pref > 0.0) {
            return Err(invariant(&field("b_pref"), "must be > 0"));
        }
        if !(self.activation_overhead >= 0.0) {
            return Err(invariant(&field("activation_overhead"), "must be >= 0"));
        }
        if self.arch.num_blocks() == 0 {
            return Err(invariant(&field("arch"), "must have at least one block"));
        }
        match self.seq_formula {
            SeqFormula::Affine { scale: 0, .. } => {
                return Err(invariant(
                    &field("seq_formula"),
                    "affine scale must be >= 1",
                ));
            }
            SeqFormula::Fixed { value: 0 } => {
                return Err(invariant(&field("seq_formula"), "fixed S must be >= 1"));
            }
            _ => {}
        }
        if !self.sweep_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(invariant(
                &field("sweep_grid"),
                "must be strictly increasing",
            ));
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> u32 {
        self.arch.num_blocks()
    }
}

/// Derived per-block prefetch volume for MM-DiT models, bytes.
///
/// A double-stream block carries two attention projection sets, two MLPs and
/// modulation (`beta * (20 d^2 + 4 d f)` bytes); a single-stream block
/// carries the two fused linears plus one modulation
/// (`beta * (7 d^2 + 2 d f)` bytes). The result is the block-count-weighted
/// average. Used only when a measured `b_pref` is not supplied; a measured
/// value always wins.
pub fn derive_b_pref(model: &ModelSpec) -> Result<f64, CalibrationError> {
    let Arch::MmDit { n_double, n_single } = model.arch else {
        return Err(CalibrationError::DerivationUnsupported);
    };
    let d = model.d as u128;
    let f = model.f as u128;
    let per_double = 20 * d * d + 4 * d * f;
    let per_single = 7 * d * d + 2 * d * f;
    let num = n_double as u128 * per_double + n_single as u128 * per_single;
    let den = (n_double + n_single) as u128;
    Ok(model.beta * (num as f64 / den as f64))
}

fn preset_hardware() -> HardwareProfile {
    let eta_pref = 0.89;
    let bw_h2d = 31.5e9;
    HardwareProfile {
        p_peak: 756e12,
        bw_h2d,
        eta_comp: 0.60,
        eta_pref,
        t_dma: 40e-6,
        // The platform gives no separate collective-bandwidth figure; default
        // to the calibrated H2D rate and expose it as a knob.
        bw_coll: eta_pref * bw_h2d,
        t_coll_latency: 50e-6,
        t_pause_resume: 10e-6,
        gpu_count: 2,
    }
}

/// Built-in calibration presets.
///
/// All three share one hardware profile (two H100 PCIe GPUs behind a shared
/// Gen5 root complex); the model entries carry the per-model formula
/// parameters and profiled per-block prefetch volumes.
pub fn preset(name: &str) -> Result<(HardwareProfile, ModelSpec), CalibrationError> {
    let model = match name {
        "wanvideo" => ModelSpec {
            name: "wanvideo".to_string(),
            arch: Arch::Dit { num_blocks: 30 },
            d: 3072,
            f: 14336,
            l_ctx: 512,
            beta: 2.0,
            beta_act: 2.0,
            b_pref: 520.0 * MB,
            seq_formula: SeqFormula::Affine {
                scale: 220,
                offset: 3,
            },
            activation_overhead: 0.0,
            sweep_var: SweepVar::Frames,
            sweep_grid: vec![41, 81, 121, 161],
            cross_collective: false,
        },
        "flux" => ModelSpec {
            name: "flux".to_string(),
            arch: Arch::MmDit {
                n_double: 19,
                n_single: 38,
            },
            d: 3072,
            f: 12288,
            l_ctx: 512,
            beta: 2.0,
            beta_act: 2.0,
            b_pref: 465.0 * MB,
            seq_formula: SeqFormula::Fixed { value: 4096 },
            activation_overhead: 0.0,
            sweep_var: SweepVar::Batch,
            sweep_grid: vec![4, 8, 12, 16],
            cross_collective: false,
        },
        "hunyuanvideo" => ModelSpec {
            name: "hunyuanvideo".to_string(),
            arch: Arch::MmDit {
                n_double: 20,
                n_single: 40,
            },
            d: 3072,
            f: 12288,
            l_ctx: 161,
            beta: 2.0,
            beta_act: 2.0,
            b_pref: 675.0 * MB,
            seq_formula: SeqFormula::Affine {
                scale: 900,
                offset: 3,
            },
            activation_overhead: 0.0,
            sweep_var: SweepVar::Frames,
            sweep_grid: vec![9, 17, 33, 65],
            cross_collective: false,
        },
        other => return Err(CalibrationError::UnknownPreset(other.to_string())),
    };
    Ok((preset_hardware(), model))
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 3] = ["wanvideo", "flux", "hunyuanvideo"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_constants_match_calibration_tables() {
        let (hw, wan) = preset("wanvideo").unwrap();
        assert_eq!(hw.p_peak, 756e12);
        assert_eq!(hw.bw_h2d, 31.5e9);
        assert_eq!(hw.eta_comp, 0.60);
        assert_eq!(hw.eta_pref, 0.89);
        assert_eq!(hw.gpu_count, 2);
        assert_eq!(wan.arch, Arch::Dit { num_blocks: 30 });
        assert_eq!(wan.d, 3072);
        assert_eq!(wan.f, 14336);
        assert_eq!(wan.l_ctx, 512);
        assert_eq!(wan.b_pref, 520e6);
        assert_eq!(
            wan.seq_formula,
            SeqFormula::Affine {
                scale: 220,
                offset: 3
            }
        );

        let (_, flux) = preset("flux").unwrap();
        assert_eq!(
            flux.arch,
            Arch::MmDit {
                n_double: 19,
                n_single: 38
            }
        );
        assert_eq!(flux.f, 12288);
        assert_eq!(flux.b_pref, 465e6);
        assert_eq!(flux.seq_formula, SeqFormula::Fixed { value: 4096 });

        let (_, hun) = preset("hunyuanvideo").unwrap();
        assert_eq!(
            hun.arch,
            Arch::MmDit {
                n_double: 20,
                n_single: 40
            }
        );
        assert_eq!(hun.l_ctx, 161);
        assert_eq!(hun.b_pref, 675e6);
        assert_eq!(
            hun.seq_formula,
            SeqFormula::Affine {
                scale: 900,
                offset: 3
            }
        );
    }

    #[test]
    fn unknown_preset_is_a_distinct_error() {
        assert_eq!(
            preset("sdxl"),
            Err(CalibrationError::UnknownPreset("sdxl".to_string()))
        );
    }

    #[test]
    fn preset_values_pass_validation() {
        for name in PRESET_NAMES {
            let (hw, model) = preset(name).unwrap();
            hw.validate().unwrap();
            model.validate().unwrap();
        }
    }

    #[test]
    fn derive_b_pref_flux_matches_per_block_byte_counts() {
        let (_, flux) = preset("flux").unwrap();
        // Per-type volumes at beta=2, d=3072, f=12288.
        let d = 3072u128;
        let f = 12288u128;
        assert_eq!(2 * (20 * d * d + 4 * d * f), 679_477_248);
        assert_eq!(2 * (7 * d * d + 2 * d * f), 283_115_520);
        let derived = derive_b_pref(&flux).unwrap();
        assert_eq!(derived, 415_236_096.0);
        // The profiled value is measured; the closed form lands within 15%.
        assert!((derived - 465e6).abs() / 465e6 < 0.15);
    }

    #[test]
    fn derive_b_pref_degenerate_mixture_equals_double_volume() {
        let (_, mut m) = preset("flux").unwrap();
        m.arch = Arch::MmDit {
            n_double: 19,
            n_single: 0,
        };
        assert_eq!(derive_b_pref(&m).unwrap(), 679_477_248.0);
    }

    #[test]
    fn derive_b_pref_rejects_dit() {
        let (_, wan) = preset("wanvideo").unwrap();
        assert_eq!(
            derive_b_pref(&wan),
            Err(CalibrationError::DerivationUnsupported)
        );
    }

    #[test]
    fn derive_b_pref_scaling_and_linearity() {
        let (_, flux) = preset("flux").unwrap();
        let base = derive_b_pref(&flux).unwrap();

        // Scaling (n_double, n_single) by a common factor leaves the average.
        let mut scaled = flux.clone();
        scaled.arch = Arch::MmDit {
            n_double: 57,
            n_single: 114,
        };
        assert_eq!(derive_b_pref(&scaled).unwrap(), base);

        // Linear in beta.
        let mut wide = flux.clone();
        wide.beta = 4.0;
        assert_eq!(derive_b_pref(&wide).unwrap(), 2.0 * base);
    }

    #[test]
    fn validation_rejects_out_of_range_factors() {
        let (mut hw, _) = preset("wanvideo").unwrap();
        hw.eta_comp = 1.5;
        let err = hw.validate().unwrap_err();
        assert_eq!(err.to_string(), "hardware.eta_comp: out of (0,1]");

        let (mut hw, _) = preset("wanvideo").unwrap();
        hw.t_dma = -1.0;
        assert!(hw.validate().is_err());

        let (_, mut model) = preset("flux").unwrap();
        model.b_pref = 0.0;
        assert!(model.validate().is_err());
    }
}
