//! Exhaustive oracles. Deliberately naive: every candidate is evaluated from
//! scratch, visited in lexicographic order with `-1 < 0 < 1`, and only a
//! strictly better value replaces the incumbent, so ties go to the
//! lexicographically smallest candidate.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hardness::{eval_ratio_ug, PartialLabeling, UgInstance};
use crate::model::{
    Assignment, FractionalAssignment, QpIntermediateInstance, QpRatioInstance, RatioValue,
};

pub const DEFAULT_CAP: usize = 12;
pub const DEFAULT_GRID_CAP: usize = 4;
pub const GRID_BUDGET: u128 = 50_000_000;
pub const UG_BUDGET: u128 = 2_000_000;

fn refuse(what: &str, n: usize, cap: usize) -> Error {
    Error::OverBudget {
        what: what.to_string(),
        requested: n as u128,
        cap: cap as u128,
    }
}

/// Numerator and degree-weighted or plain denominator for `{-1,0,1}` input.
fn objective(inst: &QpRatioInstance, deg: Option<&[f64]>, x: &[i8]) -> RatioValue {
    let mut num = 0.0;
    for e in inst.entries() {
        num += 2.0 * e.w * (x[e.i] * x[e.j]) as f64;
    }
    let den = match deg {
        None => x.iter().filter(|&&v| v != 0).count() as f64,
        Some(d) => x
            .iter()
            .zip(d)
            .filter(|(v, _)| **v != 0)
            .map(|(_, di)| di)
            .sum(),
    };
    RatioValue::new(num, den)
}

/// Lexicographic scan of all assignments sharing the prefix `head`.
fn scan_block(inst: &QpRatioInstance, deg: Option<&[f64]>, head: &[i8]) -> (Vec<i8>, RatioValue) {
    let n = inst.n();
    let mut x = vec![-1i8; n];
    x[..head.len()].copy_from_slice(head);
    let free = head.len()..n;
    let mut best_x = x.clone();
    let mut best = objective(inst, deg, &x);
    loop {
        // Odometer increment on the free suffix, last coordinate fastest.
        let mut k = n;
        loop {
            if k == free.start {
                return (best_x, best);
            }
            k -= 1;
            if x[k] < 1 {
                x[k] += 1;
                break;
            }
            x[k] = -1;
        }
        let v = objective(inst, deg, &x);
        if v.value > best.value {
            best = v;
            best_x.copy_from_slice(&x);
        }
    }
}

fn brute_force(
    inst: &QpRatioInstance,
    deg: Option<&[f64]>,
    cap: usize,
) -> Result<(Assignment, RatioValue)> {
    let n = inst.n();
    if n > cap {
        return Err(refuse(
            "brute-force enumeration over 3^n assignments (n)",
            n,
            cap,
        ));
    }
    // Blocks over the first few coordinates, in lexicographic order; the
    // reduction keeps the earliest maximum, so the schedule cannot matter.
    let h = n.min(4);
    let heads: Vec<Vec<i8>> = (0..3usize.pow(h as u32))
        .map(|mut c| {
            let mut v = vec![0i8; h];
            for k in (0..h).rev() {
                v[k] = (c % 3) as i8 - 1;
                c /= 3;
            }
            v
        })
        .collect();
    #[cfg(feature = "parallel")]
    let results: Vec<(Vec<i8>, RatioValue)> = heads
        .par_iter()
        .map(|hd| scan_block(inst, deg, hd))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(Vec<i8>, RatioValue)> =
        heads.iter().map(|hd| scan_block(inst, deg, hd)).collect();
    let mut it = results.into_iter();
    let mut best = it.next().expect("at least one block");
    for r in it {
        if r.1.value > best.1.value {
            best = r;
        }
    }
    Ok((Assignment::new(best.0)?, best.1))
}

/// Exact QP-Ratio optimum over all `3^n` assignments.
pub fn brute_force_qp_ratio(
    inst: &QpRatioInstance,
    cap: usize,
) -> Result<(Assignment, RatioValue)> {
    brute_force(inst, None, cap)
}

/// Exact Normalized QP-Ratio optimum.
pub fn brute_force_normalized(
    inst: &QpRatioInstance,
    cap: usize,
) -> Result<(Assignment, RatioValue)> {
    let d = inst.degrees();
    brute_force(inst, Some(&d), cap)
}

/// Grid spacing `1/K` used by [`grid_search_intermediate`].
pub fn grid_resolution(inst: &QpIntermediateInstance, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let n = inst.n().max(1) as f64;
    let l1 = inst.l1_norm();
    let delta = if l1 > 0.0 {
        (eps / (2.0 * l1)).min(1.0 / (2.0 * n))
    } else {
        1.0 / (2.0 * n)
    };
    Ok((1.0 / delta).ceil() as u64)
}

/// Best point of the grid `{-1, -1 + 1/K, ..., 1}^n` for QP-Intermediate.
/// The spacing is fine enough that the value is within `eps` of the
/// continuous optimum.
pub fn grid_search_intermediate(
    inst: &QpIntermediateInstance,
    eps: f64,
    cap: usize,
) -> Result<(FractionalAssignment, RatioValue)> {
    grid_search_with_budget(inst, eps, cap, GRID_BUDGET)
}

pub fn grid_search_with_budget(
    inst: &QpIntermediateInstance,
    eps: f64,
    cap: usize,
    budget: u128,
) -> Result<(FractionalAssignment, RatioValue)> {
    let n = inst.n();
    if n > cap {
        return Err(refuse("grid search (n)", n, cap));
    }
    let k = grid_resolution(inst, eps)?;
    let per = 2 * k as u128 + 1;
    let total = per.checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > budget {
        return Err(Error::OverBudget {
            what: format!("grid search at eps = {eps} (grid points, {per} per coordinate)"),
            requested: total,
            cap: budget,
        });
    }
    let kf = k as f64;
    let point = |idx: &[u64]| -> Vec<f64> { idx.iter().map(|&c| -1.0 + c as f64 / kf).collect() };
    let eval = |x: &[f64]| -> RatioValue {
        let den: f64 = x.iter().map(|v| v.abs()).sum();
        RatioValue::new(inst.quadratic_form(x), den)
    };
    let mut idx = vec![0u64; n];
    let mut best_x = point(&idx);
    let mut best = eval(&best_x);
    'outer: loop {
        let mut p = n;
        loop {
            if p == 0 {
                break 'outer;
            }
            p -= 1;
            if idx[p] < 2 * k {
                idx[p] += 1;
                break;
            }
            idx[p] = 0;
        }
        let x = point(&idx);
        let v = eval(&x);
        if v.value > best.value {
            best = v;
            best_x = x;
        }
    }
    let best_x = best_x.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    Ok((FractionalAssignment::new(best_x)?, best))
}

/// Exact Ratio-UG optimum over all `(R + 1)^|V|` partial labelings,
/// with `None` (unlabeled) ordered before every label.
pub fn brute_force_ratio_ug(ug: &UgInstance, budget: u128) -> Result<(PartialLabeling, f64)> {
    let nv = ug.vertices();
    let r = ug.alphabet();
    let total = ((r + 1) as u128)
        .checked_pow(nv as u32)
        .unwrap_or(u128::MAX);
    if total > budget {
        return Err(Error::OverBudget {
            what: "Ratio-UG enumeration (labelings)".into(),
            requested: total,
            cap: budget,
        });
    }
    let mut cur: Vec<Option<usize>> = vec![None; nv];
    let mut best_l = cur.clone();
    let mut best = eval_ratio_ug(ug, &PartialLabeling::new(cur.clone(), r)?)?;
    'outer: loop {
        let mut p = nv;
        loop {
            if p == 0 {
                break 'outer;
            }
            p -= 1;
            match cur[p] {
                None => {
                    cur[p] = Some(0);
                    break;
                }
                Some(l) if l + 1 < r => {
                    cur[p] = Some(l + 1);
                    break;
                }
                Some(_) => cur[p] = None,
            }
        }
        let v = eval_ratio_ug(ug, &PartialLabeling::new(cur.clone(), r)?)?;
        if v > best {
            best = v;
            best_l.clone_from(&cur);
        }
    }
    Ok((PartialLabeling::new(best_l, r)?, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_star;

    #[test]
    fn brute_force_examples() {
        let e = QpRatioInstance::from_triples(2, [(0, 1, 1.0)]).unwrap();
        let (a, v) = brute_force_qp_ratio(&e, DEFAULT_CAP).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(a.values(), &[-1, -1]);
        assert_eq!(a.negated().values(), &[1, 1]);

        let star = gen_star(5).unwrap();
        let (_, v) = brute_force_qp_ratio(&star, DEFAULT_CAP).unwrap();
        assert!((v.value - 10.0 / 6.0).abs() < 1e-15);

        let z = QpRatioInstance::new(3, vec![]).unwrap();
        assert_eq!(brute_force_qp_ratio(&z, DEFAULT_CAP).unwrap().1.value, 0.0);
    }

    #[test]
    fn normalized_examples() {
        let e = QpRatioInstance::from_triples(2, [(0, 1, -1.0)]).unwrap();
        let (a, v) = brute_force_normalized(&e, DEFAULT_CAP).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(a.values(), &[-1, 1]);
        let star = gen_star(5).unwrap();
        assert!((brute_force_normalized(&star, DEFAULT_CAP).unwrap().1.value - 1.0).abs() < 1e-15);
        let z = QpRatioInstance::new(2, vec![]).unwrap();
        assert_eq!(
            brute_force_normalized(&z, DEFAULT_CAP).unwrap().1.value,
            0.0
        );
    }

    #[test]
    fn refuses_above_cap() {
        let big = QpRatioInstance::new(13, vec![]).unwrap();
        let err = brute_force_qp_ratio(&big, DEFAULT_CAP).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("13") && msg.contains("12"), "{msg}");
    }

    #[test]
    fn grid_examples() {
        let a = QpIntermediateInstance::from_triples(2, [(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        let (x, v) = grid_search_intermediate(&a, 0.5, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(x.values(), &[-1.0, -1.0]);

        let d = QpIntermediateInstance::from_triples(1, [], vec![-1.0]).unwrap();
        let (x, v) = grid_search_intermediate(&d, 0.1, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(x.values(), &[0.0]);
    }

    #[test]
    fn lexicographic_tie_break_is_schedule_independent() {
        let inst =
            QpRatioInstance::from_triples(6, [(0, 1, 1.0), (2, 3, 1.0), (4, 5, -1.0)]).unwrap();
        let (a, v) = brute_force_qp_ratio(&inst, DEFAULT_CAP).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(a.values(), &[-1, -1, -1, -1, -1, 1]);
    }
}
