//! Fuzz the step simulator: for any admissible (hardware, model, workload,
//! policy) tuple the run must complete without panicking and its trace must
//! pass every validator rule (timeline tiling, Rx exclusivity, contention
//! bounds, category sums).

#![no_main]

use arbitrary::Arbitrary;
use libfuzzer_sys::fuzz_target;
use offsim::calibration::preset;
use offsim::sim::{simulate_step, OffloadPolicy};
use offsim::trace::validate_trace;
use offsim::workload::WorkloadPoint;
use offsim::SeqFormula;

#[derive(Debug, Arbitrary)]
struct Input {
    preset_pick: u8,
    batch: u8,
    frames: u16,
    sp_degree: u8,
    policy_pick: u8,
    chunk_kb: u32,
    residency_milli: u16,
    pausing: bool,
    t_dma_us: u16,
    coll_latency_us: u16,
}

fuzz_target!(|input: Input| {
    let names = ["wanvideo", "flux", "hunyuanvideo"];
    let (mut hw, model) = preset(names[input.preset_pick as usize % 3]).unwrap();
    hw.t_dma = input.t_dma_us as f64 * 1e-6;
    hw.t_coll_latency = input.coll_latency_us as f64 * 1e-6;

    let batch = 1 + (input.batch as u64 % 32);
    let frames = 1 + (input.frames as u64 % 512);
    let sp_degree = 1 + (input.sp_degree as u32 % 8);
    let workload = match model.seq_formula {
        SeqFormula::Affine { .. } => WorkloadPoint::new(&model, batch, Some(frames), sp_degree),
        SeqFormula::Fixed { .. } => WorkloadPoint::new(&model, batch, None, sp_degree),
    }
    .unwrap();

    let policy = match input.policy_pick % 3 {
        0 => OffloadPolicy::NoOffload,
        1 => OffloadPolicy::WholeLayer,
        _ => OffloadPolicy::Chunked {
            chunk_bytes: (1 + input.chunk_kb as u64 % 1_000_000) as f64 * 1e3,
            residency: (input.residency_milli % 1001) as f64 / 1000.0,
            pausing: input.pausing,
        },
    };

    let bd = simulate_step(&model, &workload, &hw, &policy).expect("admissible run");
    let violations = validate_trace(&bd);
    assert!(violations.is_empty(), "{violations:?}");

    // Determinism: an identical rerun is bit-identical.
    let again = simulate_step(&model, &workload, &hw, &policy).unwrap();
    assert_eq!(bd, again);
});
