//! Event traces: categories, JSON-lines export, and validation.
//!
//! A step trace carries two families of events. Timeline events (`compute`,
//! `collective`, `prefetch_stall`, `contention_stall`, `overhead`) partition
//! the critical path: every instant of the step belongs to exactly one.
//! `h2d_chunk` events record receive-port occupancy of prefetch transfers;
//! they overlap timeline events freely but never another Rx occupancy
//! (`collective` events occupy the port too).

use crate::sim::StepBreakdown;

pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Compute,
    Collective,
    PrefetchStall,
    ContentionStall,
    Overhead,
    H2dChunk,
}

impl Category {
    pub fn name(&self) -> &'static str {
        match self {
            Category::Compute => "compute",
            Category::Collective => "collective",
            Category::PrefetchStall => "prefetch_stall",
            Category::ContentionStall => "contention_stall",
            Category::Overhead => "overhead",
            Category::H2dChunk => "h2d_chunk",
        }
    }

    /// Whether events of this category sit on the critical timeline.
    pub fn on_timeline(&self) -> bool {
        !matches!(self, Category::H2dChunk)
    }

    /// Whether events of this category occupy the Rx port.
    pub fn on_rx(&self) -> bool {
        matches!(self, Category::H2dChunk | Category::Collective)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub category: Category,
    /// Block index the event belongs to (the target layer for chunks).
    pub layer: u32,
    pub label: String,
}

impl TraceEvent {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// One JSON object per event; timestamps printed with nine decimal
    /// digits (nanosecond resolution).
    pub fn to_json_line(&self) -> String {
        format!(
            r#"{{"t_start":{:.9},"t_end":{:.9},"category":"{}","layer":{},"label":{}}}"#,
            self.t_start,
            self.t_end,
            self.category.name(),
            self.layer,
            serde_json::to_string(&self.label).expect("string serialization cannot fail"),
        )
    }
}

/// Serialize a whole trace as JSON lines.
pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&ev.to_json_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

/// Check a completed step against the trace invariants. Returns all
/// violations found (empty on success).
///
/// Rules checked:
/// * every component and event duration is non-negative;
/// * timeline events tile `[0, step_time_s]` with no gaps or overlaps;
/// * per-category event sums match the breakdown fields, and the five
///   breakdown components sum to `step_time_s`;
/// * no two Rx occupancies overlap;
/// * every collective's queueing delay respects the policy's contention
///   bound: one in-flight chunk under pauseable chunking, the remaining
///   whole-layer transfer otherwise.
// Negated comparisons intentionally treat NaN as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_trace(breakdown: &StepBreakdown) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut push = |rule: &'static str, detail: String| {
        violations.push(Violation { rule, detail });
    };
    // Nanosecond tolerance at unit scale, widened proportionally for steps
    // beyond one second so accumulation rounding never trips the checks.
    let tol = SUM_TOLERANCE * breakdown.step_time_s.abs().max(1.0);

    let components = [
        ("compute_s", breakdown.compute_s),
        ("collective_s", breakdown.collective_s),
        ("prefetch_stall_s", breakdown.prefetch_stall_s),
        ("contention_stall_s", breakdown.contention_stall_s),
        ("overhead_s", breakdown.overhead_s),
    ];
    for (name, v) in components {
        if !(v >= 0.0) {
            push("non_negative", format!("{name} = {v}"));
        }
    }
    let sum: f64 = components.iter().map(|(_, v)| v).sum();
    if (sum - breakdown.step_time_s).abs() > tol {
        push(
            "category_sum",
            format!(
                "components sum to {sum} but step_time_s = {}",
                breakdown.step_time_s
            ),
        );
    }

    for ev in &breakdown.trace {
        if ev.t_end < ev.t_start - tol {
            push("event_order", format!("negative duration in {}", ev.label));
        }
    }

    // Timeline tiling.
    let mut timeline: Vec<&TraceEvent> = breakdown
        .trace
        .iter()
        .filter(|e| e.category.on_timeline())
        .collect();
    timeline.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    let mut cursor = 0.0;
    for ev in &timeline {
        if (ev.t_start - cursor).abs() > tol {
            push(
                "timeline_tiling",
                format!(
                    "gap or overlap at t={cursor}: next timeline event '{}' starts at {}",
                    ev.label, ev.t_start
                ),
            );
        }
        cursor = ev.t_end;
    }
    if (cursor - breakdown.step_time_s).abs() > tol {
        push(
            "timeline_tiling",
            format!(
                "timeline ends at {cursor}, step_time_s = {}",
                breakdown.step_time_s
            ),
        );
    }

    // Per-category sums against the breakdown fields.
    for (cat, field, expected) in [
        (Category::Compute, "compute_s", breakdown.compute_s),
        (Category::Collective, "collective_s", breakdown.collective_s),
        (
            Category::PrefetchStall,
            "prefetch_stall_s",
            breakdown.prefetch_stall_s,
        ),
        (
            Category::ContentionStall,
            "contention_stall_s",
            breakdown.contention_stall_s,
        ),
        (Category::Overhead, "overhead_s", breakdown.overhead_s),
    ] {
        let total: f64 = breakdown
            .trace
            .iter()
            .filter(|e| e.category == cat)
            .map(|e| e.duration())
            .sum();
        if (total - expected).abs() > tol {
            push(
                "field_trace_mismatch",
                format!("{field} = {expected} but trace sums to {total}"),
            );
        }
    }

    // Rx exclusivity.
    let mut rx: Vec<&TraceEvent> = breakdown
        .trace
        .iter()
        .filter(|e| e.category.on_rx())
        .collect();
    rx.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    for pair in rx.windows(2) {
        if pair[1].t_start < pair[0].t_end - tol {
            push(
                "rx_exclusive",
                format!(
                    "'{}' [{}, {}] overlaps '{}' [{}, {}]",
                    pair[0].label,
                    pair[0].t_start,
                    pair[0].t_end,
                    pair[1].label,
                    pair[1].t_start,
                    pair[1].t_end
                ),
            );
        }
    }

    // Contention bound: each collective's queueing delay is recorded as the
    // contention_stall event immediately preceding it on the timeline.
    let bound = if breakdown.pausing {
        breakdown.chunk_service_bound_s
    } else {
        breakdown.queue_service_s
    };
    let mut prev: Option<&TraceEvent> = None;
    for ev in &timeline {
        if ev.category == Category::Collective {
            let delay = match prev {
                Some(p) if p.category == Category::ContentionStall => p.duration(),
                _ => 0.0,
            };
            if delay > bound + tol {
                push(
                    "contention_bound",
                    format!("collective '{}' queued {delay}s, bound {bound}s", ev.label),
                );
            }
        }
        prev = Some(ev);
    }

    violations
}
