//! Deterministic discrete-event simulation of one denoising step on `p`
//! symmetric GPUs under a shared, non-preemptive FIFO PCIe receive port.
//!
//! The GPUs are symmetric, so a single timeline is simulated. Per layer the
//! compute stream runs the block's phase plan; a prefetch worker streams the
//! next layer's parameter chunks onto the Rx port; collectives occupy the
//! same port. Semantics:
//!
//! * a layer's compute starts only once all its non-resident chunks have
//!   arrived (barrier wait = `prefetch_stall`);
//! * the chunk queue for layer `l+1` is enqueued the instant layer `l`'s
//!   compute begins, and layer `l`'s non-resident bytes are freed when its
//!   compute ends — the working set is two layers;
//! * a collective issued while a transfer is in flight queues behind it:
//!   the full remaining transfer under whole-layer prefetch, at most one
//!   in-flight chunk under pauseable chunked prefetch (the pause flag stops
//!   further chunk launches and clears when the collective completes);
//! * each pause/resume handshake puts `t_pause_resume` on the compute
//!   timeline as `overhead`.
//!
//! The step is the steady state of the denoising loop: layer 0's parameters
//! arrived during the previous step, and the prefetch issued during the last
//! layer wraps around to layer 0, with any residual wait charged to this
//! step. Identical inputs produce bit-identical traces.

use crate::calibration::{HardwareProfile, ModelSpec};
use crate::overlap::chunk_tail_stall;
use crate::trace::{Category, TraceEvent};
use crate::workload::{phase_plan, Phase, WorkloadPoint};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("chunked policy requires chunk_bytes > 0")]
    InvalidChunkSize,
    #[error("residency must lie in [0, 1]")]
    InvalidResidency,
    #[error("simulated step has zero duration (empty model or workload)")]
    ZeroDurationStep,
    #[error(transparent)]
    Workload(#[from] crate::workload::WorkloadError),
}

/// Offloading policy for one run.
#[derive(Debug, Clone, PartialEq)]
pub enum OffloadPolicy {
    /// All parameters resident; no transfers.
    NoOffload,
    /// One monolithic transfer per layer, issued at the previous layer's
    /// compute start.
    WholeLayer,
    /// Fixed-size chunk transfers with chunk-granular residency. `pausing`
    /// lets the worker yield to collectives at chunk boundaries; disabling
    /// it degenerates to FIFO behind the whole remaining queue.
    Chunked {
        chunk_bytes: f64,
        residency: f64,
        pausing: bool,
    },
}

impl OffloadPolicy {
    pub fn chunked(chunk_bytes: f64, residency: f64) -> Self {
        OffloadPolicy::Chunked {
            chunk_bytes,
            residency,
            pausing: true,
        }
    }

    pub fn label(&self) -> String {
        match self {
            OffloadPolicy::NoOffload => "no-offload".to_string(),
            OffloadPolicy::WholeLayer => "whole-layer".to_string(),
            OffloadPolicy::Chunked { pausing: true, .. } => "chunked".to_string(),
            OffloadPolicy::Chunked { pausing: false, .. } => "chunked-nopause".to_string(),
        }
    }

    pub fn residency(&self) -> f64 {
        match self {
            OffloadPolicy::Chunked { residency, .. } => *residency,
            _ => 0.0,
        }
    }
}

/// Simulated per-step latency decomposition plus memory and I/O accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBreakdown {
    pub policy_label: String,
    pub n_layers: u32,
    pub compute_s: f64,
    /// Intrinsic collective service time on the critical path.
    pub collective_s: f64,
    /// Block-start waits for not-yet-arrived parameters.
    pub prefetch_stall_s: f64,
    /// Collective queueing behind in-flight transfers at the Rx port.
    pub contention_stall_s: f64,
    /// Pause/resume synchronization.
    pub overhead_s: f64,
    pub step_time_s: f64,
    pub peak_param_bytes: f64,
    pub total_h2d_bytes: f64,
    /// Whether chunk launches yield to collectives at chunk boundaries.
    pub pausing: bool,
    /// Service time of one full chunk (the pauseable contention bound).
    pub chunk_service_bound_s: f64,
    /// Total service time of one layer's transfer queue (the FIFO
    /// contention bound when pausing is off; the whole-layer transfer time
    /// under the whole-layer policy).
    pub queue_service_s: f64,
    pub trace: Vec<TraceEvent>,
}

/// Per-layer transfer schedule derived from a policy. The transferred part
/// of a layer is `n_transferred` chunks: all of size `full_bytes` except the
/// final tail of `tail_bytes`.
struct TransferPlan {
    n_transferred: u64,
    full_bytes: f64,
    tail_bytes: f64,
    /// Bytes of each layer kept permanently resident.
    resident_bytes: f64,
    pausing: bool,
}

// Negated comparison intentionally treats NaN as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn transfer_plan(model: &ModelSpec, policy: &OffloadPolicy) -> Result<TransferPlan, SimError> {
    let b_pref = model.b_pref;
    match *policy {
        OffloadPolicy::NoOffload => Ok(TransferPlan {
            n_transferred: 0,
            full_bytes: 0.0,
            tail_bytes: 0.0,
            resident_bytes: b_pref,
            pausing: true,
        }),
        OffloadPolicy::WholeLayer => Ok(TransferPlan {
            n_transferred: 1,
            full_bytes: b_pref,
            tail_bytes: b_pref,
            resident_bytes: 0.0,
            pausing: false,
        }),
        OffloadPolicy::Chunked {
            chunk_bytes,
            residency,
            pausing,
        } => {
            if !(chunk_bytes > 0.0) {
                return Err(SimError::InvalidChunkSize);
            }
            if !(0.0..=1.0).contains(&residency) {
                return Err(SimError::InvalidResidency);
            }
            // A chunk size beyond the layer volume is one chunk.
            let c = chunk_bytes.min(b_pref);
            let n_chunks = (b_pref / c).ceil();
            // Round-half-up keeps the realized fraction tracking the target;
            // the first k_res chunks of each layer stay resident.
            let k_res = (residency * n_chunks + 0.5).floor().min(n_chunks);
            let tail = b_pref - (n_chunks - 1.0) * c;
            let resident_bytes = if k_res == n_chunks { b_pref } else { k_res * c };
            Ok(TransferPlan {
                n_transferred: (n_chunks - k_res) as u64,
                full_bytes: c,
                tail_bytes: tail,
                resident_bytes,
                pausing,
            })
        }
    }
}

/// Prefetch worker state for the one in-flight layer queue.
///
/// Chunks launch back to back from `next_free`; `next_free` is also bumped
/// past collectives so launches resume only after the port clears. A layer's
/// queue is uniform chunks plus one tail, so launches advance in closed form
/// and uninterrupted runs coalesce into one Rx occupancy event — cost and
/// trace size stay proportional to the number of interruptions, not the
/// chunk count.
struct ChunkQueue {
    remaining_full: u64,
    svc_full: f64,
    svc_tail: f64,
    tail_pending: bool,
    total: u64,
    launched: u64,
    next_free: f64,
    /// Start of the currently open launch run; NaN when none is open.
    run_start: f64,
    run_first: u64,
    target_layer: u32,
}

impl ChunkQueue {
    fn new(
        plan: &TransferPlan,
        chunk_services: &ChunkServices,
        enqueue_at: f64,
        target_layer: u32,
    ) -> Self {
        let n_tx = plan.n_transferred;
        ChunkQueue {
            remaining_full: n_tx.saturating_sub(1),
            svc_full: chunk_services.full,
            svc_tail: chunk_services.tail,
            tail_pending: n_tx > 0,
            total: n_tx,
            launched: 0,
            next_free: enqueue_at,
            run_start: f64::NAN,
            run_first: 0,
            target_layer,
        }
    }

    fn open_run(&mut self) {
        if self.run_start.is_nan() {
            self.run_start = self.next_free;
            self.run_first = self.launched;
        }
    }

    /// Close the open launch run, emitting one coalesced Rx event.
    fn flush(&mut self, events: &mut Vec<TraceEvent>) {
        if self.run_start.is_nan() {
            return;
        }
        let label = if self.launched == self.run_first + 1 {
            format!("chunk {}/{}", self.launched, self.total)
        } else {
            format!(
                "chunks {}-{}/{}",
                self.run_first + 1,
                self.launched,
                self.total
            )
        };
        events.push(TraceEvent {
            t_start: self.run_start,
            t_end: self.next_free,
            category: Category::H2dChunk,
            layer: self.target_layer,
            label,
        });
        self.run_start = f64::NAN;
    }

    /// Launch every chunk that starts strictly before `t`. Afterwards
    /// `next_free` is the in-flight chunk's completion (or the last idle
    /// point if the queue drained).
    fn launch_before(&mut self, t: f64) {
        while self.next_free < t {
            if self.remaining_full > 0 {
                let gap = t - self.next_free;
                // Chunk i starts at next_free + i*svc; count starts below t.
                let k = if self.svc_full > 0.0 {
                    let k = (gap / self.svc_full).ceil();
                    if k >= self.remaining_full as f64 {
                        self.remaining_full
                    } else {
                        k as u64
                    }
                } else {
                    self.remaining_full
                };
                self.open_run();
                self.next_free += k as f64 * self.svc_full;
                self.remaining_full -= k;
                self.launched += k;
            } else if self.tail_pending {
                self.open_run();
                self.next_free += self.svc_tail;
                self.tail_pending = false;
                self.launched += 1;
            } else {
                break;
            }
        }
    }

    /// Launch everything left; returns the drain instant.
    fn drain(&mut self, events: &mut Vec<TraceEvent>) -> f64 {
        if self.remaining_full > 0 {
            self.open_run();
            self.next_free += self.remaining_full as f64 * self.svc_full;
            self.launched += self.remaining_full;
            self.remaining_full = 0;
        }
        if self.tail_pending {
            self.open_run();
            self.next_free += self.svc_tail;
            self.tail_pending = false;
            self.launched += 1;
        }
        self.flush(events);
        self.next_free
    }

    /// Whether transfers remain pending or in flight at `t`.
    fn outstanding(&self, t: f64) -> bool {
        self.remaining_full > 0 || self.tail_pending || self.next_free > t
    }
}

/// Per-chunk service times of one layer's transfer queue: uniform full
/// chunks and the final tail.
struct ChunkServices {
    full: f64,
    tail: f64,
    per_layer_total: f64,
    max_single: f64,
}

/// Simulate one steady-state denoising step.
pub fn simulate_step(
    model: &ModelSpec,
    workload: &WorkloadPoint,
    hw: &HardwareProfile,
    policy: &OffloadPolicy,
) -> Result<StepBreakdown, SimError> {
    let plan = phase_plan(model, workload);
    let transfers = transfer_plan(model, policy)?;
    let n_layers = model.num_blocks();

    let effective_throughput = hw.eta_comp * hw.p_peak;
    let p = workload.sp_degree as f64;

    // Durations of the per-block phases; identical for every layer.
    enum Step {
        Compute { dur: f64, label: &'static str },
        Collective { svc: f64, label: String },
    }
    let mut steps = Vec::new();
    let mut compute_idx = 0usize;
    let mut coll_idx = 0usize;
    let n_computes = plan
        .phases
        .iter()
        .filter(|p| matches!(p, Phase::Compute { .. }))
        .count();
    for phase in &plan.phases {
        match phase {
            Phase::Compute { flops } => {
                compute_idx += 1;
                let label = if compute_idx == 1 {
                    "qkv"
                } else if compute_idx == 2 {
                    "attn"
                } else if compute_idx == n_computes {
                    "rest"
                } else {
                    "mid"
                };
                steps.push(Step::Compute {
                    dur: (*flops as f64) / p / effective_throughput,
                    label,
                });
            }
            Phase::Collective { bytes } => {
                // No participants, no collective.
                if *bytes > 0.0 {
                    coll_idx += 1;
                    steps.push(Step::Collective {
                        svc: hw.t_coll_latency + bytes / hw.bw_coll,
                        label: format!("a2a#{coll_idx}"),
                    });
                }
            }
        }
    }

    let chunk_services = ChunkServices {
        full: chunk_tail_stall(transfers.full_bytes, hw),
        tail: chunk_tail_stall(transfers.tail_bytes, hw),
        per_layer_total: if transfers.n_transferred == 0 {
            0.0
        } else {
            (transfers.n_transferred - 1) as f64 * chunk_tail_stall(transfers.full_bytes, hw)
                + chunk_tail_stall(transfers.tail_bytes, hw)
        },
        max_single: if transfers.n_transferred == 0 {
            0.0
        } else {
            chunk_tail_stall(transfers.full_bytes, hw)
                .max(chunk_tail_stall(transfers.tail_bytes, hw))
        },
    };

    let mut events: Vec<TraceEvent> = Vec::new();
    let mut compute_s = 0.0;
    let mut collective_s = 0.0;
    let mut prefetch_stall_s = 0.0;
    let mut contention_stall_s = 0.0;
    let mut overhead_s = 0.0;
    let mut now = 0.0f64;

    for layer in 0..n_layers {
        // Compute of this layer begins now; the worker immediately enqueues
        // the next layer's chunks (wrapping to layer 0 for the next step).
        let mut queue = ChunkQueue::new(&transfers, &chunk_services, now, (layer + 1) % n_layers);

        for step in &steps {
            match step {
                Step::Compute { dur, label } => {
                    if *dur > 0.0 {
                        events.push(TraceEvent {
                            t_start: now,
                            t_end: now + dur,
                            category: Category::Compute,
                            layer,
                            label: (*label).to_string(),
                        });
                        compute_s += dur;
                        now += dur;
                    }
                }
                Step::Collective { svc, label } => {
                    let issue = now;
                    if transfers.pausing {
                        // Pause flag set at issue: chunks already started
                        // finish, nothing new launches.
                        queue.launch_before(issue);
                        queue.flush(&mut events);
                    } else {
                        // FIFO behind the whole remaining queue.
                        queue.drain(&mut events);
                    }
                    let outstanding = queue.outstanding(issue);
                    let wait = (queue.next_free - issue).max(0.0);
                    if wait > 0.0 {
                        events.push(TraceEvent {
                            t_start: issue,
                            t_end: issue + wait,
                            category: Category::ContentionStall,
                            layer,
                            label: format!("wait {label}"),
                        });
                        contention_stall_s += wait;
                        now += wait;
                    }
                    events.push(TraceEvent {
                        t_start: now,
                        t_end: now + svc,
                        category: Category::Collective,
                        layer,
                        label: label.clone(),
                    });
                    collective_s += svc;
                    now += svc;
                    // Chunks resume once the port clears.
                    queue.next_free = queue.next_free.max(now);
                    if transfers.pausing && outstanding && hw.t_pause_resume > 0.0 {
                        events.push(TraceEvent {
                            t_start: now,
                            t_end: now + hw.t_pause_resume,
                            category: Category::Overhead,
                            layer,
                            label: "pause/resume".to_string(),
                        });
                        overhead_s += hw.t_pause_resume;
                        now += hw.t_pause_resume;
                    }
                }
            }
        }

        // Barrier: the next layer's parameters must be on device before its
        // compute starts.
        let drain = queue.drain(&mut events);
        if drain > now {
            events.push(TraceEvent {
                t_start: now,
                t_end: drain,
                category: Category::PrefetchStall,
                layer: queue.target_layer,
                label: format!("wait layer {} params", queue.target_layer),
            });
            prefetch_stall_s += drain - now;
            now = drain;
        }
    }

    if now == 0.0 {
        return Err(SimError::ZeroDurationStep);
    }

    // Coalesced Rx runs are pushed when they close; order the export by
    // start time (stable, so construction order breaks exact ties).
    events.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));

    let b_pref = model.b_pref;
    let non_resident = b_pref - transfers.resident_bytes;
    let peak_param_bytes =
        n_layers as f64 * transfers.resident_bytes + 2.0 * non_resident + model.activation_overhead;
    let total_h2d_bytes = n_layers as f64 * non_resident;

    let chunk_service_bound_s = chunk_services.max_single;
    let queue_service_s = chunk_services.per_layer_total;

    Ok(StepBreakdown {
        policy_label: policy.label(),
        n_layers,
        compute_s,
        collective_s,
        prefetch_stall_s,
        contention_stall_s,
        overhead_s,
        step_time_s: now,
        peak_param_bytes,
        total_h2d_bytes,
        pausing: transfers.pausing,
        chunk_service_bound_s,
        queue_service_s,
        trace: events,
    })
}

/// One sweep result row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: u64,
    pub policy: OffloadPolicy,
    pub breakdown: StepBreakdown,
}

/// Run every (value, policy) combination of a sweep, values outer, policies
/// inner, in the given order.
pub fn simulate_sweep(
    model: &ModelSpec,
    hw: &HardwareProfile,
    policies: &[OffloadPolicy],
    sweep_var: crate::calibration::SweepVar,
    values: &[u64],
) -> Result<Vec<SweepRow>, SimError> {
    let mut rows = Vec::with_capacity(values.len() * policies.len());
    for &value in values {
        let workload = match sweep_var {
            crate::calibration::SweepVar::Frames => {
                WorkloadPoint::for_frames(model, value, hw.gpu_count)?
            }
            crate::calibration::SweepVar::Batch => {
                WorkloadPoint::for_batch(model, value, hw.gpu_count)?
            }
        };
        for policy in policies {
            rows.push(SweepRow {
                value,
                policy: policy.clone(),
                breakdown: simulate_step(model, &workload, hw, policy)?,
            });
        }
    }
    Ok(rows)
}
