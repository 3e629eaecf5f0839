//! Browser bindings: three interactive views over the solver library.
//!
//! Each operation has a plain Rust form returning a JSON string (tested
//! natively) and a `wasm_bindgen` wrapper used by `www/index.html`.

use qpratio::bench::build_family;
use qpratio::exact::brute_force_qp_ratio;
use qpratio::generators::{check_expr1, level_graph_ratio, LevelGraphParams};
use qpratio::hardness::{
    check_linear_l1, check_smallball, fourier, linear_coefficients, nonlinear_weight, BoolFn,
};
use qpratio::rounding::solve_general_with;
use qpratio::sdp::SdpOptions;
use qpratio::spectral::eig_relaxation_value;
use qpratio::{trivial_solution, Error, Result};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest instance the page will solve; the SDP runs on one thread.
pub const MAX_DEMO_VERTICES: usize = 64;
/// Exact optimum is shown up to this size.
pub const DEMO_ORACLE_CAP: usize = 10;

/// Trivial value, rounded SDP value, SDP objective, eigenvalue bound and
/// (for small n) the exact optimum of one generated instance, plus the
/// edges and rounded assignment for drawing.
pub fn sandwich_json(family: &str, size: usize, seed: u64) -> Result<String> {
    let inst = build_family(family, size, seed)?;
    if inst.n() > MAX_DEMO_VERTICES {
        return Err(Error::OverBudget {
            what: "demo instance (vertices)".into(),
            requested: inst.n() as u128,
            cap: MAX_DEMO_VERTICES as u128,
        });
    }
    let opts = SdpOptions {
        seed,
        restarts: 2,
        ..SdpOptions::default()
    };
    let general = solve_general_with(&inst, &opts)?;
    let exact = if inst.n() <= DEMO_ORACLE_CAP {
        Some(brute_force_qp_ratio(&inst, DEMO_ORACLE_CAP)?.1.value)
    } else {
        None
    };
    let entries: Vec<(usize, usize, f64)> =
        inst.entries().iter().map(|e| (e.i, e.j, e.w)).collect();
    Ok(json!({
        "n": inst.n(),
        "entries": entries,
        "trivial": trivial_solution(&inst).1.value,
        "rounded": general.value.value,
        "sdp": general.sdp_objective * general.scale,
        "eig": eig_relaxation_value(&inst)?,
        "exact": exact,
        "assignment": general.assignment.values(),
    })
    .to_string())
}

/// Normalized ratio of a level-constant vector on the level graph with
/// `eps = 1/big_m`; an empty `values` uses the alternating witness. Also
/// reports the gain-ratio bound check on `gammas` when they are given.
pub fn level_graph_json(big_m: usize, values: &[f64], gammas: &[f64]) -> Result<String> {
    if big_m < 2 {
        return Err(Error::InvalidInput("M must be at least 2".into()));
    }
    let p = LevelGraphParams::new(1.0 / big_m as f64)?;
    let vals = if values.is_empty() {
        p.witness()
    } else {
        values.to_vec()
    };
    let r = level_graph_ratio(&p, &vals)?;
    let gain = if gammas.is_empty() {
        None
    } else {
        let (ratio, holds) = check_expr1(gammas, big_m, gammas.len())?;
        let bound = (big_m as f64).powf(-(gammas.len() as f64).sqrt() / 4.0);
        Some(json!({ "ratio": ratio, "bound": bound, "holds": holds }))
    };
    Ok(json!({
        "M": big_m,
        "levels": p.levels(),
        // Level sizes overflow f64 precision long before u128; strings keep them exact.
        "level_sizes": p.level_sizes().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "vertices": p.vertex_count().to_string(),
        "values": vals,
        "ratio": r.value,
        "gain_check": gain,
    })
    .to_string())
}

/// Fourier spectrum and the two checkable inequalities for a table of
/// `2^R` values in `[-1, 1]`.
pub fn boolfn_json(table: &[f64]) -> Result<String> {
    let r = table.len().trailing_zeros() as usize;
    if table.is_empty() || table.len() != 1 << r {
        return Err(Error::InvalidInput(format!(
            "table length {} is not a power of two",
            table.len()
        )));
    }
    let f = BoolFn::new(r, table.to_vec())?;
    let sb = check_smallball(&f);
    let ll = check_linear_l1(&f);
    Ok(json!({
        "R": r,
        "fourier": fourier(&f),
        "linear": linear_coefficients(&f),
        "l1": f.l1(),
        "l2_sq": f.l2_sq(),
        "nonlinear_sq": nonlinear_weight(&f),
        "smallball": { "antecedent": sb.antecedent, "holds": sb.holds },
        "linear_l1": { "sum": ll.sum, "holds": ll.holds },
    })
    .to_string())
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn sandwich(family: &str, size: usize, seed: u32) -> std::result::Result<String, JsError> {
    sandwich_json(family, size, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn level_graph(
    big_m: usize,
    values: Vec<f64>,
    gammas: Vec<f64>,
) -> std::result::Result<String, JsError> {
    level_graph_json(big_m, &values, &gammas).map_err(js)
}

#[wasm_bindgen]
pub fn boolfn(table: Vec<f64>) -> std::result::Result<String, JsError> {
    boolfn_json(&table).map_err(js)
}
