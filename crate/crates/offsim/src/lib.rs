//! Planner and simulator for layerwise weight offloading on PCIe-only
//! multi-GPU nodes.
//!
//! Large diffusion-transformer denoisers can stage block weights in host
//! memory and prefetch them one layer ahead of use. Whether that prefetch
//! stays off the critical path depends on two things: whether the per-block
//! compute window is long enough to cover the host-to-device transfer, and
//! whether inter-GPU collective traffic contends with the transfer at the
//! GPU's PCIe receive port. This crate models both:
//!
//! * [`workload`] — per-block FLOP counts for DiT and MM-DiT blocks,
//!   sequence-length formulas, collective volumes, and the per-block phase
//!   plan (compute segments interleaved with all-to-alls).
//! * [`overlap`] — the first-order prefetch/compute overlap model: block
//!   compute time, prefetch time, the critical compute workload, the
//!   roofline view, the critical-configuration solver, and the minimum
//!   residency needed to hide a partial prefetch.
//! * [`sim`] — a deterministic discrete-event simulator of one denoising
//!   step with a FIFO non-preemptive shared receive port, under no-offload,
//!   whole-layer, and chunked (pauseable, partially resident) prefetch
//!   policies.
//! * [`calibration`] — platform/model constants, built-in presets, and
//!   validation.
//! * [`config`] — JSON configuration ingestion with preset overrides.
//! * [`trace`] — event traces, JSON-lines export, and trace validation.
//!
//! All functions are pure and all results deterministic: identical inputs
//! produce bit-identical traces.

pub mod calibration;
pub mod config;
pub mod overlap;
pub mod sim;
pub mod trace;
pub mod workload;

pub use calibration::{preset, Arch, HardwareProfile, ModelSpec, SeqFormula, SweepVar};
pub use config::{load_config, LoadedConfig, SimDefaults};
pub use overlap::{critical_config, min_residency, overlap_report, CriticalConfig, OverlapReport};
pub use sim::{simulate_step, simulate_sweep, OffloadPolicy, StepBreakdown, SweepRow};
pub use trace::{validate_trace, Category, TraceEvent, Violation};
pub use workload::{phase_plan, BlockPhasePlan, FlopBreakdown, Phase, WorkloadPoint};
