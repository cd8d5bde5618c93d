//! Per-block FLOP counts for DiT and MM-DiT blocks, sequence lengths,
//! collective volumes, and the per-block phase plan.
//!
//! FLOP terms are exact 128-bit integers so totals stay bit-exact up to
//! scales far beyond any realistic workload; everything downstream of the
//! breakdown (time, averages) moves to f64.

use crate::calibration::{Arch, ModelSpec, SeqFormula};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("model '{0}' uses an affine sequence formula; a frame count is required")]
    FramesRequired(String),
    #[error("model '{0}' has a fixed sequence length; frames are not applicable")]
    FramesNotApplicable(String),
    #[error("batch must be >= 1")]
    ZeroBatch,
    #[error("sequence-parallel degree must be >= 1")]
    ZeroDegree,
}

/// Per-term FLOP counts of one block, summed over batch and sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlopBreakdown {
    Dit {
        self_proj: u128,
        self_attn: u128,
        cross_proj: u128,
        cross_attn: u128,
        mlp: u128,
        total: u128,
    },
    MmDitDouble {
        img_proj: u128,
        txt_proj: u128,
        joint_attn: u128,
        img_mlp: u128,
        txt_mlp: u128,
        total: u128,
    },
    MmDitSingle {
        lin1: u128,
        attn: u128,
        lin2: u128,
        total: u128,
    },
}

impl FlopBreakdown {
    pub fn total(&self) -> u128 {
        match *self {
            FlopBreakdown::Dit { total, .. }
            | FlopBreakdown::MmDitDouble { total, .. }
            | FlopBreakdown::MmDitSingle { total, .. } => total,
        }
    }

    /// Terms in declaration order, for reporting and oracle comparison.
    pub fn terms(&self) -> Vec<(&'static str, u128)> {
        match *self {
            FlopBreakdown::Dit {
                self_proj,
                self_attn,
                cross_proj,
                cross_attn,
                mlp,
                ..
            } => vec![
                ("self_proj", self_proj),
                ("self_attn", self_attn),
                ("cross_proj", cross_proj),
                ("cross_attn", cross_attn),
                ("mlp", mlp),
            ],
            FlopBreakdown::MmDitDouble {
                img_proj,
                txt_proj,
                joint_attn,
                img_mlp,
                txt_mlp,
                ..
            } => vec![
                ("img_proj", img_proj),
                ("txt_proj", txt_proj),
                ("joint_attn", joint_attn),
                ("img_mlp", img_mlp),
                ("txt_mlp", txt_mlp),
            ],
            FlopBreakdown::MmDitSingle {
                lin1, attn, lin2, ..
            } => {
                vec![("lin1", lin1), ("attn", attn), ("lin2", lin2)]
            }
        }
    }
}

/// DiT block: serial self-attention, text cross-attention, MLP.
pub fn flops_dit_block(b: u64, s: u64, d: u64, f: u64, l_ctx: u64) -> FlopBreakdown {
    let (b, s, d, f, l) = (b as u128, s as u128, d as u128, f as u128, l_ctx as u128);
    let self_proj = 8 * b * s * d * d;
    let self_attn = 4 * b * s * s * d;
    let cross_proj = 4 * b * s * d * d + 4 * b * l * d * d;
    let cross_attn = 4 * b * s * l * d;
    let mlp = 4 * b * s * d * f;
    FlopBreakdown::Dit {
        self_proj,
        self_attn,
        cross_proj,
        cross_attn,
        mlp,
        total: self_proj + self_attn + cross_proj + cross_attn + mlp,
    }
}

/// MM-DiT double-stream block: separate image/text weights, joint attention
/// over the concatenated streams.
pub fn flops_mmdit_double(b: u64, s: u64, d: u64, f: u64, l_ctx: u64) -> FlopBreakdown {
    let (b, s, d, f, l) = (b as u128, s as u128, d as u128, f as u128, l_ctx as u128);
    let t = s + l;
    let img_proj = 8 * b * s * d * d;
    let txt_proj = 8 * b * l * d * d;
    let joint_attn = 4 * b * t * t * d;
    let img_mlp = 4 * b * s * d * f;
    let txt_mlp = 4 * b * l * d * f;
    FlopBreakdown::MmDitDouble {
        img_proj,
        txt_proj,
        joint_attn,
        img_mlp,
        txt_mlp,
        total: img_proj + txt_proj + joint_attn + img_mlp + txt_mlp,
    }
}

/// MM-DiT single-stream block: one fused QKV+MLP-up linear and one fused
/// output+MLP-down linear over the concatenated sequence.
pub fn flops_mmdit_single(b: u64, s: u64, d: u64, f: u64, l_ctx: u64) -> FlopBreakdown {
    let (b, s, d, f, l) = (b as u128, s as u128, d as u128, f as u128, l_ctx as u128);
    let t = s + l;
    let lin1 = 2 * b * t * d * (3 * d + f);
    let attn = 4 * b * t * t * d;
    let lin2 = 2 * b * t * (d + f) * d;
    FlopBreakdown::MmDitSingle {
        lin1,
        attn,
        lin2,
        total: lin1 + attn + lin2,
    }
}

/// Block-averaged global FLOPs of one model at (B, S).
///
/// DiT has a single block type; for MM-DiT the two types are collapsed into
/// a block-count-weighted average.
pub fn flops_block_avg(model: &ModelSpec, b: u64, s: u64) -> f64 {
    match model.arch {
        Arch::Dit { .. } => flops_dit_block(b, s, model.d, model.f, model.l_ctx).total() as f64,
        Arch::MmDit { n_double, n_single } => {
            let dbl = flops_mmdit_double(b, s, model.d, model.f, model.l_ctx).total();
            let sng = flops_mmdit_single(b, s, model.d, model.f, model.l_ctx).total();
            let num = n_double as u128 * dbl + n_single as u128 * sng;
            num as f64 / (n_double + n_single) as f64
        }
    }
}

/// Continuous-variable twin of [`flops_block_avg`] for root finding over a
/// real-relaxed batch size or sequence length.
pub fn flops_block_avg_real(model: &ModelSpec, b: f64, s: f64) -> f64 {
    let d = model.d as f64;
    let f = model.f as f64;
    let l = model.l_ctx as f64;
    match model.arch {
        Arch::Dit { .. } => {
            8.0 * b * s * d * d
                + 4.0 * b * s * s * d
                + 4.0 * b * s * d * d
                + 4.0 * b * l * d * d
                + 4.0 * b * s * l * d
                + 4.0 * b * s * d * f
        }
        Arch::MmDit { n_double, n_single } => {
            let t = s + l;
            let dbl = 8.0 * b * s * d * d
                + 8.0 * b * l * d * d
                + 4.0 * b * t * t * d
                + 4.0 * b * s * d * f
                + 4.0 * b * l * d * f;
            let sng =
                2.0 * b * t * d * (3.0 * d + f) + 4.0 * b * t * t * d + 2.0 * b * t * (d + f) * d;
            (n_double as f64 * dbl + n_single as f64 * sng) / (n_double + n_single) as f64
        }
    }
}

/// Per-GPU share of a global FLOP count under head-partitioning parallelism.
pub fn per_gpu_flops(flops: f64, sp_degree: u32) -> f64 {
    flops / sp_degree as f64
}

/// Sequence length for a model, from a frame count when the formula is
/// affine. Supplying frames to a fixed-length model (or omitting them for an
/// affine one) is an error.
pub fn seq_len(model: &ModelSpec, frames: Option<u64>) -> Result<u64, WorkloadError> {
    match (model.seq_formula, frames) {
        (SeqFormula::Affine { scale, offset }, Some(n)) => Ok(scale * (n + offset)),
        (SeqFormula::Affine { .. }, None) => Err(WorkloadError::FramesRequired(model.name.clone())),
        (SeqFormula::Fixed { value }, None) => Ok(value),
        (SeqFormula::Fixed { .. }, Some(_)) => {
            Err(WorkloadError::FramesNotApplicable(model.name.clone()))
        }
    }
}

/// Per-GPU Rx volume of one all-to-all, bytes.
///
/// (p-1)/p shuffle accounting over the effective attention sequence; zero
/// when there is a single participant.
pub fn collective_bytes(b: u64, s_eff: u64, d: u64, beta_act: f64, sp_degree: u32) -> f64 {
    if sp_degree <= 1 {
        return 0.0;
    }
    let payload = (b as u128 * s_eff as u128 * d as u128) as f64 * beta_act;
    payload * (sp_degree - 1) as f64 / sp_degree as f64
}

/// One evaluation point: batch, optional frame count, derived sequence
/// length, and sequence-parallel degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadPoint {
    pub batch: u64,
    pub frames: Option<u64>,
    pub seq: u64,
    pub sp_degree: u32,
}

impl WorkloadPoint {
    pub fn new(
        model: &ModelSpec,
        batch: u64,
        frames: Option<u64>,
        sp_degree: u32,
    ) -> Result<Self, WorkloadError> {
        if batch == 0 {
            return Err(WorkloadError::ZeroBatch);
        }
        if sp_degree == 0 {
            return Err(WorkloadError::ZeroDegree);
        }
        Ok(WorkloadPoint {
            batch,
            frames,
            seq: seq_len(model, frames)?,
            sp_degree,
        })
    }

    /// Video-model point: batch 1, swept frame count.
    pub fn for_frames(
        model: &ModelSpec,
        frames: u64,
        sp_degree: u32,
    ) -> Result<Self, WorkloadError> {
        Self::new(model, 1, Some(frames), sp_degree)
    }

    /// Image-model point: fixed sequence, swept batch.
    pub fn for_batch(model: &ModelSpec, batch: u64, sp_degree: u32) -> Result<Self, WorkloadError> {
        Self::new(model, batch, None, sp_degree)
    }

    /// Effective attention sequence: the joint image+text stream for MM-DiT.
    pub fn s_eff(&self, model: &ModelSpec) -> u64 {
        match model.arch {
            Arch::Dit { .. } => self.seq,
            Arch::MmDit { .. } => self.seq + model.l_ctx,
        }
    }
}

/// One phase of a block. `Compute` carries global FLOPs; divide by the
/// plan's `sp_degree` for the per-GPU share (kept global so phase sums stay
/// exact integers).
#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    Compute { flops: u128 },
    Collective { bytes: f64 },
}

/// Ordered phases of one block: compute segments interleaved with the
/// all-to-alls that sequence parallelism inserts around attention.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPhasePlan {
    pub phases: Vec<Phase>,
    pub sp_degree: u32,
}

impl BlockPhasePlan {
    /// Sum of compute-phase FLOPs, global (exact).
    pub fn compute_total(&self) -> u128 {
        self.phases
            .iter()
            .map(|p| match p {
                Phase::Compute { flops } => *flops,
                Phase::Collective { .. } => 0,
            })
            .sum()
    }

    /// Per-GPU compute FLOPs of the whole plan.
    pub fn per_gpu_compute_flops(&self) -> f64 {
        per_gpu_flops(self.compute_total() as f64, self.sp_degree)
    }
}

/// Phase plan of one (average) block.
///
/// The first all-to-all is needed right after the QKV projection and the
/// second right after attention, so the plan is
/// `[Compute(qkv), Collective, Compute(attn), Collective, Compute(rest)]`.
/// QKV work is `6 B S d^2` for DiT; for MM-DiT both block types contribute
/// the same `6 B S_eff d^2` pre-collective share (for the fused single-stream
/// linear this is the `3d/(3d+f)` fraction of lin1), and their totals
/// coincide, so one plan serves the whole block sequence. With
/// `cross_collective` set, a third all-to-all over the text context follows
/// the cross-attention query projection.
pub fn phase_plan(model: &ModelSpec, workload: &WorkloadPoint) -> BlockPhasePlan {
    let (b, d) = (workload.batch as u128, model.d as u128);
    let s_eff = workload.s_eff(model) as u128;
    let qkv = 6 * b * s_eff * d * d;
    let attn = 4 * b * s_eff * s_eff * d;
    let total = match model.arch {
        Arch::Dit { .. } => {
            flops_dit_block(workload.batch, workload.seq, model.d, model.f, model.l_ctx).total()
        }
        // Double- and single-stream totals are algebraically identical, so
        // the block average equals either one.
        Arch::MmDit { .. } => {
            flops_mmdit_double(workload.batch, workload.seq, model.d, model.f, model.l_ctx).total()
        }
    };
    let a2a = collective_bytes(
        workload.batch,
        workload.s_eff(model),
        model.d,
        model.beta_act,
        workload.sp_degree,
    );

    let mut phases = vec![
        Phase::Compute { flops: qkv },
        Phase::Collective { bytes: a2a },
        Phase::Compute { flops: attn },
        Phase::Collective { bytes: a2a },
    ];
    let mut rest = total - qkv - attn;
    if model.cross_collective && matches!(model.arch, Arch::Dit { .. }) {
        // Video-side query projection of cross-attention, then a context
        // re-shard collective.
        let cross_q = 2 * b * (workload.seq as u128) * d * d;
        let ctx_a2a = collective_bytes(
            workload.batch,
            model.l_ctx,
            model.d,
            model.beta_act,
            workload.sp_degree,
        );
        rest -= cross_q;
        phases.push(Phase::Compute { flops: cross_q });
        phases.push(Phase::Collective { bytes: ctx_a2a });
    }
    phases.push(Phase::Compute { flops: rest });
    BlockPhasePlan {
        phases,
        sp_degree: workload.sp_degree,
    }
}
