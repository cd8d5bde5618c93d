//! First-order prefetch/compute overlap model.
//!
//! One block's execution window has two dominant costs: its own compute and
//! the host-to-device prefetch of the next block. Compute time is
//! `F / (eta_comp * p_peak)`; prefetch time is
//! `bytes / (eta_pref * bw_h2d)`. Prefetch hides completely exactly when the
//! per-GPU block FLOPs reach the critical compute workload
//! `f_star = eta_comp * p_peak * b_pref / (eta_pref * bw_h2d)`, which on a
//! roofline is the turning point `i_star` between the calibrated compute
//! roof and the H2D bandwidth roof.

use crate::calibration::{HardwareProfile, ModelSpec};
use crate::workload::{flops_block_avg, flops_block_avg_real, per_gpu_flops, WorkloadPoint};

/// Block compute time from per-GPU FLOPs, seconds.
pub fn t_comp(per_gpu_flops: f64, hw: &HardwareProfile) -> f64 {
    per_gpu_flops / (hw.eta_comp * hw.p_peak)
}

/// Prefetch time for a transfer volume, seconds. First-order model: DMA
/// startup is a simulator concern, not part of this estimate.
pub fn t_pref(bytes: f64, hw: &HardwareProfile) -> f64 {
    bytes / (hw.eta_pref * hw.bw_h2d)
}

/// Roofline turning point, FLOP/byte.
pub fn i_star(hw: &HardwareProfile) -> f64 {
    (hw.eta_comp * hw.p_peak) / (hw.eta_pref * hw.bw_h2d)
}

/// Critical compute workload for a prefetch volume, FLOPs.
///
/// Computed as `i_star * b_pref` so the roofline identity
/// `i_star * b_pref == f_star` holds bit-exactly.
pub fn f_star(hw: &HardwareProfile, b_pref: f64) -> f64 {
    i_star(hw) * b_pref
}

/// Attainable throughput at one operational intensity, FLOP/s.
pub fn roofline_attainable(hw: &HardwareProfile, intensity: f64) -> f64 {
    (hw.eta_comp * hw.p_peak).min(intensity * hw.eta_pref * hw.bw_h2d)
}

/// Sampled roofline: (intensity, attainable FLOP/s) pairs.
pub fn roofline_points(hw: &HardwareProfile, intensities: &[f64]) -> Vec<(f64, f64)> {
    intensities
        .iter()
        .map(|&i| (i, roofline_attainable(hw, i)))
        .collect()
}

/// Residual collective wait after one in-flight chunk, seconds: the chunk's
/// full service time including DMA startup. The simulator's chunk service
/// time uses the same expression, so its contention bound is assertable
/// against this value.
pub fn chunk_tail_stall(chunk_bytes: f64, hw: &HardwareProfile) -> f64 {
    hw.t_dma + chunk_bytes / (hw.eta_pref * hw.bw_h2d)
}

/// Overlap verdict for one (model, workload) point.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    /// Global block-average FLOPs.
    pub f_block: f64,
    /// Per-GPU block FLOPs.
    pub f_per_gpu: f64,
    pub t_comp: f64,
    pub t_pref: f64,
    pub f_star: f64,
    /// Per-GPU operational intensity, FLOP/byte (infinite when nothing is
    /// prefetched).
    pub i_block: f64,
    pub i_star: f64,
    /// Whether the prefetch hides entirely behind compute.
    pub hidden: bool,
    /// Exposed transfer time, seconds.
    pub exposed: f64,
}

/// Evaluate the overlap model at one workload point.
///
/// `prefetch_bytes` defaults to the model's full per-block volume; partial
/// residency scales it by `1 - r` upstream.
pub fn overlap_report(
    model: &ModelSpec,
    workload: &WorkloadPoint,
    hw: &HardwareProfile,
    prefetch_bytes: Option<f64>,
) -> OverlapReport {
    let bytes = prefetch_bytes.unwrap_or(model.b_pref);
    let f_block = flops_block_avg(model, workload.batch, workload.seq);
    let f_per_gpu = per_gpu_flops(f_block, workload.sp_degree);
    let tc = t_comp(f_per_gpu, hw);
    let tp = t_pref(bytes, hw);
    let i_block = if bytes > 0.0 {
        f_per_gpu / bytes
    } else {
        f64::INFINITY
    };
    OverlapReport {
        f_block,
        f_per_gpu,
        t_comp: tc,
        t_pref: tp,
        f_star: f_star(hw, bytes),
        i_block,
        i_star: i_star(hw),
        hidden: tc >= tp,
        exposed: (tp - tc).max(0.0),
    }
}

/// Result of the critical-configuration search.
#[derive(Debug, Clone, PartialEq)]
pub enum CriticalConfig {
    /// The swept variable crosses the overlap threshold at `real`; the
    /// smallest admissible integer configuration is `rounded_up`.
    Threshold { real: f64, rounded_up: u64 },
    /// Hidden over the whole admissible range.
    AlwaysHidden,
    /// Exposed over the whole admissible range.
    NeverHidden,
}

const SWEEP_LO: f64 = 1.0;
const SWEEP_HI: f64 = 1e6;

/// Smallest real sweep value (frames or batch) at which the per-GPU block
/// workload reaches `f_star`, found by bracketing and bisection over
/// `[1, 1e6]` to a relative tolerance of 1e-6.
///
/// Per-GPU partitioning uses `hw.gpu_count`; the video models sweep frames
/// at batch 1 and fixed-sequence models sweep batch.
pub fn critical_config(
    model: &ModelSpec,
    hw: &HardwareProfile,
    sweep_var: crate::calibration::SweepVar,
) -> CriticalConfig {
    let target = f_star(hw, model.b_pref);
    let p = hw.gpu_count;
    let eval = |x: f64| -> f64 {
        let f = match sweep_var {
            crate::calibration::SweepVar::Frames => {
                let s = match model.seq_formula {
                    crate::calibration::SeqFormula::Affine { scale, offset } => {
                        scale as f64 * (x + offset as f64)
                    }
                    // A fixed-sequence model has no frame axis; constant in x.
                    crate::calibration::SeqFormula::Fixed { value } => value as f64,
                };
                flops_block_avg_real(model, 1.0, s)
            }
            crate::calibration::SweepVar::Batch => {
                let s = match model.seq_formula {
                    crate::calibration::SeqFormula::Fixed { value } => value as f64,
                    crate::calibration::SeqFormula::Affine { scale, offset } => {
                        scale as f64 * (1.0 + offset as f64)
                    }
                };
                flops_block_avg_real(model, x, s)
            }
        };
        per_gpu_flops(f, p) - target
    };

    let (mut lo, mut hi) = (SWEEP_LO, SWEEP_HI);
    if eval(lo) >= 0.0 {
        return CriticalConfig::AlwaysHidden;
    }
    if eval(hi) < 0.0 {
        return CriticalConfig::NeverHidden;
    }
    // The workload model is monotone in the sweep variable, so the bracket
    // stays valid throughout.
    while (hi - lo) / hi > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let real = 0.5 * (lo + hi);
    CriticalConfig::Threshold {
        real,
        rounded_up: real.ceil() as u64,
    }
}

/// Smallest residency fraction at which the remaining prefetch hides behind
/// the block compute window: `max(0, 1 - t_comp * eta_pref * bw_h2d / b_pref)`,
/// clamped to [0, 1].
pub fn min_residency(model: &ModelSpec, workload: &WorkloadPoint, hw: &HardwareProfile) -> f64 {
    let f_per_gpu = per_gpu_flops(
        flops_block_avg(model, workload.batch, workload.seq),
        workload.sp_degree,
    );
    let hidable = t_comp(f_per_gpu, hw) * hw.eta_pref * hw.bw_h2d;
    (1.0 - hidable / model.b_pref).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{preset, SweepVar, MB};
    use crate::workload::WorkloadPoint;

    fn wan() -> (HardwareProfile, ModelSpec) {
        preset("wanvideo").unwrap()
    }

    #[test]
    fn compute_time_is_flops_over_calibrated_peak() {
        let (hw, _) = wan();
        let t = t_comp(8.407e12, &hw);
        assert!((t - 18.53e-3).abs() < 0.01e-3);
        assert_eq!(t_comp(0.0, &hw), 0.0);
        assert_eq!(t_comp(2.0 * 8.407e12, &hw), 2.0 * t);
    }

    #[test]
    fn prefetch_time_is_bytes_over_calibrated_bandwidth() {
        let (hw, _) = wan();
        assert!((t_pref(520.0 * MB, &hw) - 18.548e-3).abs() < 0.01e-3);
        assert_eq!(t_pref(0.0, &hw), 0.0);
        assert!((t_pref(465.0 * MB, &hw) - 16.586e-3).abs() < 0.01e-3);
    }

    #[test]
    fn critical_workload_values() {
        let (hw, _) = wan();
        let f520 = f_star(&hw, 520.0 * MB);
        assert!((f520 - 8.42e12).abs() / 8.42e12 < 5e-3);
        let f465 = f_star(&hw, 465.0 * MB);
        assert!((f465 - 7.52e12).abs() / 7.52e12 < 5e-3);
        assert_eq!(f_star(&hw, 0.0), 0.0);
    }

    #[test]
    fn roofline_turning_point() {
        let (hw, _) = wan();
        let i = i_star(&hw);
        assert!((i - 16_180.0).abs() < 5.0);
        // The kink attains the compute roof exactly.
        assert_eq!(roofline_attainable(&hw, i), hw.eta_comp * hw.p_peak);
        assert_eq!(roofline_attainable(&hw, 0.0), 0.0);
        let pts = roofline_points(&hw, &[0.0, i, 2.0 * i]);
        assert_eq!(pts[2].1, hw.eta_comp * hw.p_peak);
    }

    #[test]
    fn roofline_identity_is_exact() {
        for name in crate::calibration::PRESET_NAMES {
            let (hw, model) = preset(name).unwrap();
            assert_eq!(i_star(&hw) * model.b_pref, f_star(&hw, model.b_pref));
        }
    }

    #[test]
    fn chunk_tail_stall_values() {
        let (mut hw, _) = wan();
        hw.t_dma = 0.0;
        assert!((chunk_tail_stall(16.0 * MB, &hw) - 0.571e-3).abs() < 1e-6);
        assert!((chunk_tail_stall(256.0 * MB, &hw) - 9.13e-3).abs() < 5e-6);
        hw.t_dma = 40e-6;
        assert_eq!(chunk_tail_stall(0.0, &hw), 40e-6);
    }

    #[test]
    fn overlap_verdicts_at_the_regime_boundary() {
        let (hw, model) = wan();
        let hidden = overlap_report(
            &model,
            &WorkloadPoint::for_frames(&model, 121, 2).unwrap(),
            &hw,
            None,
        );
        assert!(hidden.hidden);
        assert_eq!(hidden.exposed, 0.0);

        let exposed = overlap_report(
            &model,
            &WorkloadPoint::for_frames(&model, 41, 2).unwrap(),
            &hw,
            None,
        );
        assert!(!exposed.hidden);
        assert!(exposed.exposed > 0.0);

        let nothing = overlap_report(
            &model,
            &WorkloadPoint::for_frames(&model, 41, 2).unwrap(),
            &hw,
            Some(0.0),
        );
        assert!(nothing.hidden);
        assert_eq!(nothing.exposed, 0.0);
        assert!(nothing.i_block.is_infinite());
    }

    #[test]
    fn critical_configurations_match_predictions() {
        let (hw, wan) = preset("wanvideo").unwrap();
        let CriticalConfig::Threshold { real, rounded_up } =
            critical_config(&wan, &hw, SweepVar::Frames)
        else {
            panic!("expected a crossing")
        };
        assert!((real - 119.2).abs() <= 1.0, "wanvideo n* = {real}");
        assert_eq!(rounded_up, real.ceil() as u64);

        let (hw, flux) = preset("flux").unwrap();
        let CriticalConfig::Threshold { real, .. } = critical_config(&flux, &hw, SweepVar::Batch)
        else {
            panic!("expected a crossing")
        };
        assert!((real - 11.5).abs() <= 0.3, "flux b* = {real}");

        let (hw, hun) = preset("hunyuanvideo").unwrap();
        let CriticalConfig::Threshold { real, .. } = critical_config(&hun, &hw, SweepVar::Frames)
        else {
            panic!("expected a crossing")
        };
        assert!((real - 34.5).abs() <= 1.0, "hunyuanvideo n* = {real}");
    }

    #[test]
    fn critical_config_consistent_with_overlap_report() {
        for name in crate::calibration::PRESET_NAMES {
            let (hw, model) = preset(name).unwrap();
            let var = model.sweep_var;
            let CriticalConfig::Threshold { real, rounded_up } = critical_config(&model, &hw, var)
            else {
                panic!("expected a crossing for {name}")
            };
            let at = |v: u64| {
                let w = match var {
                    SweepVar::Frames => WorkloadPoint::for_frames(&model, v, hw.gpu_count),
                    SweepVar::Batch => WorkloadPoint::for_batch(&model, v, hw.gpu_count),
                }
                .unwrap();
                overlap_report(&model, &w, &hw, None).hidden
            };
            assert!(at(rounded_up), "{name}: hidden at ceil({real})");
            assert!(!at(real.floor() as u64 - 1), "{name}: exposed below {real}");
        }
    }

    #[test]
    fn degenerate_sweeps() {
        let (mut hw, model) = wan();
        // Free transfers: every workload is hidden.
        hw.bw_h2d = 1e30;
        assert_eq!(
            critical_config(&model, &hw, SweepVar::Frames),
            CriticalConfig::AlwaysHidden
        );
        // Glacial transfers: none is.
        hw.bw_h2d = 1e-12;
        assert_eq!(
            critical_config(&model, &hw, SweepVar::Frames),
            CriticalConfig::NeverHidden
        );
    }

    #[test]
    fn min_residency_closed_form() {
        let (hw, model) = wan();
        // Past the threshold nothing must stay resident.
        let big = WorkloadPoint::for_frames(&model, 161, 2).unwrap();
        assert_eq!(min_residency(&model, &big, &hw), 0.0);

        // A huge prefetch volume with a tiny compute window needs everything
        // resident.
        let mut heavy = model.clone();
        heavy.b_pref = 1e15;
        let w = WorkloadPoint::for_frames(&heavy, 1, 2).unwrap();
        assert!(min_residency(&heavy, &w, &hw) > 0.999);

        // At the smallest sweep point the closed form gives 1 - hidable/b_pref.
        let small = WorkloadPoint::for_frames(&model, 41, 2).unwrap();
        let r = min_residency(&model, &small, &hw);
        assert!((r - 0.7603).abs() < 1e-3, "r = {r}");
    }

    #[test]
    fn min_residency_is_the_hiding_threshold() {
        let (hw, model) = wan();
        for frames in [41, 81, 121] {
            let w = WorkloadPoint::for_frames(&model, frames, 2).unwrap();
            let r = min_residency(&model, &w, &hw);
            let hidden_at =
                |r: f64| overlap_report(&model, &w, &hw, Some((1.0 - r) * model.b_pref)).hidden;
            assert!(hidden_at(r), "n={frames}: hidden at r*={r}");
            if r > 1e-3 {
                assert!(!hidden_at(r - 1e-3), "n={frames}: exposed just below r*");
            }
        }
    }
}
