//! Subcommand implementations: load configuration, run the model or the
//! simulator, emit CSV (and optionally SVG) artifacts.

use crate::csvout::{format_bytes, format_flops, format_seconds, CsvTable};
use crate::svg;
use offsim::calibration::SweepVar;
use offsim::config::{load_config, LoadedConfig};
use offsim::overlap::{self, CriticalConfig};
use offsim::sim::{simulate_step, OffloadPolicy, StepBreakdown};
use offsim::trace::{to_jsonl, validate_trace};
use offsim::workload::WorkloadPoint;
use offsim::ModelSpec;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Simulation(String),
    Validation(String),
    Io(std::io::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Simulation(_) => 3,
            CmdError::Validation(_) => 4,
            CmdError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "config: {m}"),
            CmdError::Simulation(m) => write!(f, "simulation: {m}"),
            CmdError::Validation(m) => write!(f, "validation: {m}"),
            CmdError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

impl From<offsim::sim::SimError> for CmdError {
    fn from(e: offsim::sim::SimError) -> Self {
        CmdError::Simulation(e.to_string())
    }
}

impl From<offsim::workload::WorkloadError> for CmdError {
    fn from(e: offsim::workload::WorkloadError) -> Self {
        CmdError::Config(e.to_string())
    }
}

pub struct Context {
    pub config: LoadedConfig,
    pub out: PathBuf,
    pub svg: bool,
    pub validate: bool,
    pub json_trace: Option<PathBuf>,
}

impl Context {
    pub fn new(
        config_path: Option<&Path>,
        out: &Path,
        svg: bool,
        validate: bool,
        json_trace: Option<&Path>,
    ) -> Result<Self, CmdError> {
        let config = match config_path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CmdError::Config(format!("{}: {e}", p.display())))?;
                load_config(&text).map_err(|e| CmdError::Config(e.to_string()))?
            }
            None => LoadedConfig::builtin(),
        };
        fs::create_dir_all(out)?;
        Ok(Context {
            config,
            out: out.to_path_buf(),
            svg,
            validate,
            json_trace: json_trace.map(Path::to_path_buf),
        })
    }

    fn model(&self, name: &str) -> Result<&ModelSpec, CmdError> {
        self.config
            .model(name)
            .ok_or_else(|| CmdError::Config(format!("unknown model '{name}'")))
    }

    fn workload(&self, model: &ModelSpec, value: u64) -> Result<WorkloadPoint, CmdError> {
        let p = self.config.hardware.gpu_count;
        Ok(match model.sweep_var {
            SweepVar::Frames => WorkloadPoint::for_frames(model, value, p)?,
            SweepVar::Batch => WorkloadPoint::for_batch(model, value, p)?,
        })
    }

    fn policy(
        &self,
        name: &str,
        chunk_bytes: Option<f64>,
        residency: Option<f64>,
    ) -> Result<OffloadPolicy, CmdError> {
        let c = chunk_bytes.unwrap_or(self.config.defaults.chunk_bytes);
        let r = residency.unwrap_or(self.config.defaults.residency);
        match name {
            "no-offload" => Ok(OffloadPolicy::NoOffload),
            "whole-layer" => Ok(OffloadPolicy::WholeLayer),
            "chunked" => Ok(OffloadPolicy::chunked(c, r)),
            "chunked-nopause" => Ok(OffloadPolicy::Chunked {
                chunk_bytes: c,
                residency: r,
                pausing: false,
            }),
            other => Err(CmdError::Config(format!("unknown policy '{other}'"))),
        }
    }

    /// Run one simulation, honoring --validate and --json-trace.
    fn run(
        &self,
        model: &ModelSpec,
        w: &WorkloadPoint,
        policy: &OffloadPolicy,
        traces: &mut Vec<String>,
        trace_ctx: &str,
    ) -> Result<StepBreakdown, CmdError> {
        let bd = simulate_step(model, w, &self.config.hardware, policy)?;
        if self.validate {
            let violations = validate_trace(&bd);
            if !violations.is_empty() {
                return Err(CmdError::Validation(format!(
                    "{trace_ctx}: {}",
                    violations
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join("; ")
                )));
            }
        }
        if self.json_trace.is_some() {
            // Context keys are appended so sweep traces stay attributable.
            for line in to_jsonl(&bd.trace).lines() {
                let mut obj = line.trim_end_matches('}').to_string();
                obj.push_str(&format!(r#","run":"{trace_ctx}"}}"#));
                traces.push(obj);
            }
        }
        Ok(bd)
    }

    fn finish_traces(&self, traces: Vec<String>) -> Result<(), CmdError> {
        if let Some(path) = &self.json_trace {
            fs::write(path, traces.join("\n") + "\n")?;
        }
        Ok(())
    }

    fn write_artifact(&self, name: &str, content: &str) -> Result<PathBuf, CmdError> {
        let path = self.out.join(name);
        fs::write(&path, content)?;
        Ok(path)
    }
}

fn breakdown_columns(bd: &StepBreakdown) -> Vec<String> {
    vec![
        format_seconds(bd.step_time_s),
        format_seconds(bd.compute_s),
        format_seconds(bd.collective_s),
        format_seconds(bd.prefetch_stall_s),
        format_seconds(bd.contention_stall_s),
        format_seconds(bd.overhead_s),
        format_bytes(bd.peak_param_bytes),
        format_bytes(bd.total_h2d_bytes),
    ]
}

const BREAKDOWN_HEADER: [&str; 8] = [
    "step_time_s",
    "compute_s",
    "collective_s",
    "prefetch_stall_s",
    "contention_stall_s",
    "overhead_s",
    "peak_param_bytes",
    "total_h2d_bytes",
];

/// Nearest value of the model's swept grid; ties round up. Falls back to the
/// rounded-up admissible integer when no grid is configured.
fn round_to_grid(real: f64, grid: &[u64], rounded_up: u64) -> u64 {
    grid.iter()
        .copied()
        .min_by(|&a, &b| {
            let da = (a as f64 - real).abs();
            let db = (b as f64 - real).abs();
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .unwrap_or(rounded_up)
}

pub fn cmd_predict(ctx: &Context, model_name: &str, value: Option<u64>) -> Result<(), CmdError> {
    let hw = &ctx.config.hardware;
    let model = ctx.model(model_name)?;
    let fs = overlap::f_star(hw, model.b_pref);
    let is = overlap::i_star(hw);
    let tp = overlap::t_pref(model.b_pref, hw);
    let crit = overlap::critical_config(model, hw, model.sweep_var);
    let (crit_real, crit_rounded) = match crit {
        CriticalConfig::Threshold { real, rounded_up } => (
            format!("{real:.3}"),
            round_to_grid(real, &model.sweep_grid, rounded_up).to_string(),
        ),
        CriticalConfig::AlwaysHidden => ("always-hidden".to_string(), "always-hidden".to_string()),
        CriticalConfig::NeverHidden => ("never-hidden".to_string(), "never-hidden".to_string()),
    };
    let value = value.or_else(|| model.sweep_grid.first().copied());
    let min_res = match value {
        Some(v) => {
            let w = ctx.workload(model, v)?;
            format!("{:.4}", overlap::min_residency(model, &w, hw))
        }
        None => String::new(),
    };

    let mut table = CsvTable::new(vec![
        "model",
        "f_star_flops",
        "i_star_flops_per_byte",
        "t_pref_s",
        "critical_real",
        "critical_rounded",
        "min_residency",
    ]);
    table.row(vec![
        model.name.clone(),
        format_flops(fs),
        format!("{is:.6}"),
        format_seconds(tp),
        crit_real.clone(),
        crit_rounded.clone(),
        min_res.clone(),
    ]);
    let path = ctx.write_artifact("predict.csv", &table.render())?;

    println!("model:            {}", model.name);
    println!("F* (FLOPs):       {}", format_flops(fs));
    println!("I* (FLOP/byte):   {is:.3}");
    println!("T_pref (s):       {}", format_seconds(tp));
    println!(
        "critical ({}):    {crit_real} (rounded: {crit_rounded})",
        model.sweep_var.name()
    );
    if let Some(v) = value {
        println!("min residency @{v}: {min_res}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_sweep(
    ctx: &Context,
    model_name: &str,
    values: Option<Vec<u64>>,
    policies: Option<Vec<String>>,
    chunk_bytes: Option<f64>,
    residency: Option<f64>,
) -> Result<(), CmdError> {
    let model = ctx.model(model_name)?;
    let values = resolve_values(values, model)?;
    let policy_names = policies.unwrap_or_else(|| {
        vec![
            "no-offload".to_string(),
            "chunked".to_string(),
            "whole-layer".to_string(),
        ]
    });
    let policies = policy_names
        .iter()
        .map(|n| ctx.policy(n, chunk_bytes, residency))
        .collect::<Result<Vec<_>, _>>()?;

    let mut header = vec!["model", "sweep_var", "value", "policy", "residency"];
    header.extend(BREAKDOWN_HEADER);
    let mut table = CsvTable::new(header);
    let mut traces = Vec::new();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = policy_names
        .iter()
        .map(|n| (n.clone(), Vec::new()))
        .collect();
    let mut mem_series: Vec<(String, Vec<(f64, f64)>)> = series.clone();

    for &value in &values {
        let w = ctx.workload(model, value)?;
        for (i, policy) in policies.iter().enumerate() {
            let run_id = format!("{model_name}/{value}/{}", policy.label());
            let bd = ctx.run(model, &w, policy, &mut traces, &run_id)?;
            let mut row = vec![
                model.name.clone(),
                model.sweep_var.name().to_string(),
                value.to_string(),
                policy.label(),
                format!("{:.2}", policy.residency()),
            ];
            row.extend(breakdown_columns(&bd));
            table.row(row);
            series[i].1.push((value as f64, bd.step_time_s));
            mem_series[i]
                .1
                .push((value as f64, bd.peak_param_bytes / 1e9));
        }
    }
    ctx.finish_traces(traces)?;
    let path = ctx.write_artifact("sweep.csv", &table.render())?;
    println!("wrote {}", path.display());
    if ctx.svg {
        let chart = svg::line_chart(
            &format!("{model_name}: step time vs {}", model.sweep_var.name()),
            model.sweep_var.name(),
            "step time (s)",
            &series,
        );
        let p = ctx.write_artifact("sweep_step_time.svg", &chart)?;
        println!("wrote {}", p.display());
        let chart = svg::line_chart(
            &format!(
                "{model_name}: peak parameter memory vs {}",
                model.sweep_var.name()
            ),
            model.sweep_var.name(),
            "peak parameter bytes (GB)",
            &mem_series,
        );
        let p = ctx.write_artifact("sweep_memory.svg", &chart)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_breakdown(
    ctx: &Context,
    model_name: &str,
    value: u64,
    policy_name: Option<&str>,
) -> Result<(), CmdError> {
    let model = ctx.model(model_name)?;
    let w = ctx.workload(model, value)?;
    let policy_name = policy_name.unwrap_or(&ctx.config.defaults.policy);
    let policy = ctx.policy(policy_name, None, None)?;
    let mut traces = Vec::new();
    let run_id = format!("{model_name}/{value}/{}", policy.label());
    let bd = ctx.run(model, &w, &policy, &mut traces, &run_id)?;
    ctx.finish_traces(traces)?;

    // The emitted decomposition must tile the step exactly.
    let violations = validate_trace(&bd);
    if !violations.is_empty() {
        return Err(CmdError::Validation(
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }

    let categories = [
        ("compute", bd.compute_s),
        ("collective", bd.collective_s),
        ("prefetch_stall", bd.prefetch_stall_s),
        ("contention_stall", bd.contention_stall_s),
        ("overhead", bd.overhead_s),
    ];
    let mut table = CsvTable::new(vec![
        "model", "value", "policy", "category", "seconds", "fraction",
    ]);
    for (name, seconds) in categories {
        table.row(vec![
            model.name.clone(),
            value.to_string(),
            policy.label(),
            name.to_string(),
            format_seconds(seconds),
            format!("{:.6}", seconds / bd.step_time_s),
        ]);
    }
    table.row(vec![
        model.name.clone(),
        value.to_string(),
        policy.label(),
        "step_time".to_string(),
        format_seconds(bd.step_time_s),
        "1.000000".to_string(),
    ]);
    let path = ctx.write_artifact("breakdown.csv", &table.render())?;
    for (name, seconds) in categories {
        println!(
            "{name:>18}: {} ({:.1}%)",
            format_seconds(seconds),
            100.0 * seconds / bd.step_time_s
        );
    }
    println!("{:>18}: {}", "step_time", format_seconds(bd.step_time_s));
    println!("wrote {}", path.display());
    if ctx.svg {
        let chart = svg::stacked_bar(
            &format!(
                "{model_name} @ {value}: {} step decomposition",
                policy.label()
            ),
            &categories.map(|(n, v)| (n.to_string(), v)),
        );
        let p = ctx.write_artifact("breakdown.svg", &chart)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_chunk_sweep(
    ctx: &Context,
    model_name: &str,
    value: u64,
    chunks: Option<Vec<f64>>,
) -> Result<(), CmdError> {
    let model = ctx.model(model_name)?;
    let w = ctx.workload(model, value)?;
    let chunks = chunks.unwrap_or_else(|| vec![4e6, 16e6, 64e6, 256e6]);
    if chunks.is_empty() || chunks.windows(2).any(|p| p[0] >= p[1]) {
        return Err(CmdError::Config(
            "chunk list must be non-empty and strictly increasing".to_string(),
        ));
    }
    let mut header = vec!["model", "value", "chunk_bytes"];
    header.extend(BREAKDOWN_HEADER);
    let mut table = CsvTable::new(header);
    let mut traces = Vec::new();
    let mut points = Vec::new();
    for &c in &chunks {
        let policy = OffloadPolicy::chunked(c, ctx.config.defaults.residency);
        let run_id = format!("{model_name}/{value}/chunk={c}");
        let bd = ctx.run(model, &w, &policy, &mut traces, &run_id)?;
        let mut row = vec![model.name.clone(), value.to_string(), format_bytes(c)];
        row.extend(breakdown_columns(&bd));
        table.row(row);
        points.push((c / 1e6, bd.step_time_s));
    }
    ctx.finish_traces(traces)?;
    let path = ctx.write_artifact("chunk_sweep.csv", &table.render())?;
    println!("wrote {}", path.display());
    if ctx.svg {
        let chart = svg::line_chart(
            &format!("{model_name} @ {value}: step time vs chunk size"),
            "chunk size (MB)",
            "step time (s)",
            &[("chunked".to_string(), points)],
        );
        let p = ctx.write_artifact("chunk_sweep.svg", &chart)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_residency_sweep(
    ctx: &Context,
    model_name: &str,
    value: u64,
    residencies: Option<Vec<f64>>,
) -> Result<(), CmdError> {
    let model = ctx.model(model_name)?;
    let w = ctx.workload(model, value)?;
    let residencies = residencies.unwrap_or_else(|| vec![0.0, 0.2, 0.4, 0.6, 1.0]);
    if residencies.is_empty() || residencies.windows(2).any(|p| p[0] >= p[1]) {
        return Err(CmdError::Config(
            "residency list must be non-empty and strictly increasing".to_string(),
        ));
    }
    let mut header = vec!["model", "value", "residency"];
    header.extend(BREAKDOWN_HEADER);
    let mut table = CsvTable::new(header);
    let mut traces = Vec::new();
    let mut step_points = Vec::new();
    let mut mem_points = Vec::new();
    for &r in &residencies {
        let policy = OffloadPolicy::chunked(ctx.config.defaults.chunk_bytes, r);
        let run_id = format!("{model_name}/{value}/r={r}");
        let bd = ctx.run(model, &w, &policy, &mut traces, &run_id)?;
        let mut row = vec![model.name.clone(), value.to_string(), format!("{r:.2}")];
        row.extend(breakdown_columns(&bd));
        table.row(row);
        step_points.push((r, bd.step_time_s));
        mem_points.push((r, bd.peak_param_bytes / 1e9));
    }
    ctx.finish_traces(traces)?;
    let path = ctx.write_artifact("residency_sweep.csv", &table.render())?;
    println!("wrote {}", path.display());
    if ctx.svg {
        let chart = svg::line_chart(
            &format!("{model_name} @ {value}: residency tradeoff"),
            "resident fraction",
            "step time (s)",
            &[("step time".to_string(), step_points)],
        );
        let p = ctx.write_artifact("residency_step_time.svg", &chart)?;
        println!("wrote {}", p.display());
        let chart = svg::line_chart(
            &format!("{model_name} @ {value}: peak parameter memory"),
            "resident fraction",
            "peak parameter bytes (GB)",
            &[("peak memory".to_string(), mem_points)],
        );
        let p = ctx.write_artifact("residency_memory.svg", &chart)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_roofline(ctx: &Context, model_name: &str) -> Result<(), CmdError> {
    let hw = &ctx.config.hardware;
    let model = ctx.model(model_name)?;
    let is = overlap::i_star(hw);

    let mut table = CsvTable::new(vec![
        "model",
        "kind",
        "label",
        "intensity_flop_per_byte",
        "attainable_flop_per_s",
        "hidden",
    ]);
    // Sample the two arms over two decades around the turning point.
    let mut intensities = Vec::new();
    let mut x = is / 100.0;
    while x <= is * 100.0 * (1.0 + 1e-12) {
        intensities.push(x);
        x *= 10f64.powf(0.125);
    }
    intensities.push(is);
    for (i, a) in overlap::roofline_points(hw, &intensities) {
        let label = if i == is { "i_star" } else { "arm" };
        table.row(vec![
            model.name.clone(),
            "roofline".to_string(),
            label.to_string(),
            format!("{i:.6}"),
            format_flops(a),
            String::new(),
        ]);
    }
    let mut markers = Vec::new();
    for &v in &model.sweep_grid {
        let w = ctx.workload(model, v)?;
        let report = overlap::overlap_report(model, &w, hw, None);
        table.row(vec![
            model.name.clone(),
            "marker".to_string(),
            format!("{}={v}", model.sweep_var.name()),
            format!("{:.6}", report.i_block),
            format_flops(overlap::roofline_attainable(hw, report.i_block)),
            report.hidden.to_string(),
        ]);
        markers.push((v, report.i_block, report.hidden));
    }
    let path = ctx.write_artifact("roofline.csv", &table.render())?;
    println!("I* = {is:.3} FLOP/byte");
    for (v, i_block, hidden) in &markers {
        println!(
            "{}={v}: I_block = {i_block:.3} ({})",
            model.sweep_var.name(),
            if *hidden { "hidden" } else { "exposed" }
        );
    }
    println!("wrote {}", path.display());
    if ctx.svg {
        let chart = svg::roofline_chart(
            &format!("{model_name}: roofline"),
            hw,
            is,
            &markers
                .iter()
                .map(|(v, i, h)| (format!("{}={v}", model.sweep_var.name()), *i, *h))
                .collect::<Vec<_>>(),
        );
        let p = ctx.write_artifact("roofline.svg", &chart)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn resolve_values(values: Option<Vec<u64>>, model: &ModelSpec) -> Result<Vec<u64>, CmdError> {
    let values = values.unwrap_or_else(|| model.sweep_grid.clone());
    if values.is_empty() {
        return Err(CmdError::Config(
            "value list must be non-empty (pass --values or configure a sweep_grid)".to_string(),
        ));
    }
    if values.windows(2).any(|p| p[0] >= p[1]) {
        return Err(CmdError::Config(
            "value list must be strictly increasing".to_string(),
        ));
    }
    Ok(values)
}
