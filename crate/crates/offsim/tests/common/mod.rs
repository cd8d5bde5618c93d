//! Independent oracles for the equivalence checks: every formula is
//! re-evaluated here term by term, in exact integer arithmetic where the
//! published expression is integral, without touching the library's own
//! breakdown code paths.

use offsim::calibration::{Arch, HardwareProfile, ModelSpec};

fn pow2(x: u128) -> u128 {
    x * x
}

/// Term-by-term DiT block FLOPs: 8BSd^2, 4BS^2d, 4BSd^2 + 4BLd^2, 4BSLd,
/// 4BSdf.
pub fn oracle_dit_terms(b: u64, s: u64, d: u64, f: u64, l: u64) -> Vec<u128> {
    let (b, s, d, f, l) = (b as u128, s as u128, d as u128, f as u128, l as u128);
    vec![
        8 * b * s * pow2(d),
        4 * b * pow2(s) * d,
        4 * b * s * pow2(d) + 4 * b * l * pow2(d),
        4 * b * s * l * d,
        4 * b * s * d * f,
    ]
}

/// Double-stream terms: 8BSd^2, 8BLd^2, 4B(S+L)^2 d, 4BSdf, 4BLdf.
pub fn oracle_double_terms(b: u64, s: u64, d: u64, f: u64, l: u64) -> Vec<u128> {
    let (b, s, d, f, l) = (b as u128, s as u128, d as u128, f as u128, l as u128);
    vec![
        8 * b * s * pow2(d),
        8 * b * l * pow2(d),
        4 * b * pow2(s + l) * d,
        4 * b * s * d * f,
        4 * b * l * d * f,
    ]
}

/// Single-stream terms with T = S + L: 2BTd(3d+f), 4BT^2 d, 2BT(d+f)d.
pub fn oracle_single_terms(b: u64, s: u64, d: u64, f: u64, l: u64) -> Vec<u128> {
    let (b, s, d, f, l) = (b as u128, s as u128, d as u128, f as u128, l as u128);
    let t = s + l;
    vec![
        2 * b * t * d * (3 * d + f),
        4 * b * pow2(t) * d,
        2 * b * t * (d + f) * d,
    ]
}

/// Block-average FLOPs straight from the mixture definition.
pub fn oracle_block_avg(model: &ModelSpec, b: u64, s: u64) -> f64 {
    match model.arch {
        Arch::Dit { .. } => oracle_dit_terms(b, s, model.d, model.f, model.l_ctx)
            .iter()
            .sum::<u128>() as f64,
        Arch::MmDit { n_double, n_single } => {
            let dbl: u128 = oracle_double_terms(b, s, model.d, model.f, model.l_ctx)
                .iter()
                .sum();
            let sng: u128 = oracle_single_terms(b, s, model.d, model.f, model.l_ctx)
                .iter()
                .sum();
            (n_double as u128 * dbl + n_single as u128 * sng) as f64 / (n_double + n_single) as f64
        }
    }
}

/// Critical compute workload re-evaluated from its definition,
/// eta_comp * p_peak * b_pref / (eta_pref * bw_h2d).
pub fn oracle_f_star(hw: &HardwareProfile, b_pref: f64) -> f64 {
    hw.eta_comp * hw.p_peak * b_pref / (hw.eta_pref * hw.bw_h2d)
}

/// Roofline turning point re-evaluated from its definition.
pub fn oracle_i_star(hw: &HardwareProfile) -> f64 {
    hw.eta_comp * hw.p_peak / (hw.eta_pref * hw.bw_h2d)
}
