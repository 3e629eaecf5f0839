//! Eigenvalue relaxations and the roundings that work from an eigenvector.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigen, norm2, SymMatrix};
use crate::model::{
    eval_normalized_qp_ratio, eval_qp_ratio, trivial_solution, Assignment, QpRatioInstance,
    RatioValue,
};
use crate::rng;

/// Largest eigenpair of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda_max: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub method: EigenMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    Power,
    Jacobi,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_iter: 100_000,
            seed: 0,
        }
    }
}

/// Dense fallback is only attempted up to this size.
const JACOBI_FALLBACK_MAX_N: usize = 512;

fn residual_of(m: &SymMatrix, v: &[f64], lambda: f64, av: &mut [f64]) -> f64 {
    m.matvec(v, av);
    av.iter()
        .zip(v)
        .map(|(a, x)| (a - lambda * x) * (a - lambda * x))
        .sum::<f64>()
        .sqrt()
}

/// Largest eigenvalue and a unit eigenvector.
///
/// Power iteration on `A + sI`, with `s` the largest absolute row sum so the
/// shifted spectrum is nonnegative and the top of the original spectrum
/// dominates. Falls back to cyclic Jacobi for small matrices when the power
/// method stalls on a tiny spectral gap.
pub fn eigen_max(m: &SymMatrix, opts: &EigenOptions) -> Result<EigenResult> {
    let n = m.n();
    if n == 0 {
        return Ok(EigenResult {
            lambda_max: 0.0,
            vector: vec![],
            iterations: 0,
            residual: 0.0,
            method: EigenMethod::Power,
        });
    }
    let shift = m.max_abs_row_sum();
    if shift == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return Ok(EigenResult {
            lambda_max: 0.0,
            vector: v,
            iterations: 0,
            residual: 0.0,
            method: EigenMethod::Power,
        });
    }

    let mut r = rng::stream(opts.seed, rng::streams::EIGEN_START);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; n];
    let mut best = (f64::INFINITY, 0.0, v.clone());
    for it in 1..=opts.max_iter {
        m.matvec(&v, &mut av);
        let lambda = dot(&v, &av);
        let res = av
            .iter()
            .zip(&v)
            .map(|(a, x)| (a - lambda * x) * (a - lambda * x))
            .sum::<f64>()
            .sqrt();
        if res < best.0 {
            best = (res, lambda, v.clone());
        }
        if res <= opts.tol {
            return Ok(EigenResult {
                lambda_max: lambda,
                vector: v,
                iterations: it,
                residual: res,
                method: EigenMethod::Power,
            });
        }
        for (x, a) in v.iter_mut().zip(&av) {
            *x = a + shift * *x;
        }
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
    }

    if n <= JACOBI_FALLBACK_MAX_N {
        let (vals, vecs) = jacobi_eigen(m);
        let mut vector = vecs.into_iter().next().expect("nonempty");
        let nv = norm2(&vector);
        vector.iter_mut().for_each(|x| *x /= nv);
        let lambda = dot(&vector, &{
            let mut t = vec![0.0; n];
            m.matvec(&vector, &mut t);
            t
        });
        let res = residual_of(m, &vector, lambda, &mut av);
        if res <= opts.tol {
            debug_assert!((lambda - vals[0]).abs() <= 1e-8 * (1.0 + vals[0].abs()));
            return Ok(EigenResult {
                lambda_max: lambda,
                vector,
                iterations: opts.max_iter,
                residual: res,
                method: EigenMethod::Jacobi,
            });
        }
        best.0 = best.0.min(res);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: best.0,
    })
}

/// `lambda_max(A)`; an upper bound on the QP-Ratio optimum.
pub fn eig_relaxation_value(inst: &QpRatioInstance) -> Result<f64> {
    Ok(eigen_max(&inst.to_dense(), &EigenOptions::default())?.lambda_max)
}

/// Solution of the degree-normalized eigenvalue relaxation.
#[derive(Clone, Debug)]
pub struct NormalizedEig {
    pub value: f64,
    /// `x = D^{-1/2} y` for the top eigenvector `y`; zero on isolated vertices.
    pub x: Vec<f64>,
}

/// Maximises `x^T A x / x^T D x` via `lambda_max(D^{-1/2} A D^{-1/2})`,
/// with zero-degree vertices removed first.
pub fn normalized_eig(inst: &QpRatioInstance) -> Result<NormalizedEig> {
    let d = inst.degrees();
    let keep: Vec<usize> = (0..inst.n()).filter(|&i| d[i] > 0.0).collect();
    if keep.is_empty() {
        return Ok(NormalizedEig {
            value: 0.0,
            x: vec![0.0; inst.n()],
        });
    }
    let sub = inst.induced(&keep);
    let inv_sqrt: Vec<f64> = keep.iter().map(|&i| 1.0 / d[i].sqrt()).collect();
    let m = sub.to_dense().congruence_scaled(&inv_sqrt);
    let eig = eigen_max(&m, &EigenOptions::default())?;
    let mut x = vec![0.0; inst.n()];
    for (k, &i) in keep.iter().enumerate() {
        x[i] = eig.vector[k] * inv_sqrt[k];
    }
    Ok(NormalizedEig {
        value: eig.lambda_max,
        x,
    })
}

pub fn normalized_eig_value(inst: &QpRatioInstance) -> Result<f64> {
    Ok(normalized_eig(inst)?.value)
}

/// Threshold cut of `x` at `t`: `sign(x_i)` where `|x_i| >= t`, else 0.
pub fn threshold_cut(x: &[f64], t: f64) -> Assignment {
    let v: Vec<f64> = x
        .iter()
        .map(|&xi| if xi.abs() >= t { xi } else { 0.0 })
        .collect();
    Assignment::signs_of(&v)
}

/// Scans every threshold cut of `x` and returns the best under the
/// normalized objective. Thresholds are visited in decreasing order; the
/// first maximiser wins.
pub fn trevisan_round(inst: &QpRatioInstance, x: &[f64]) -> Result<(Assignment, RatioValue)> {
    if x.len() != inst.n() {
        return Err(Error::Dimension {
            expected: inst.n(),
            got: x.len(),
        });
    }
    let mut thresholds: Vec<f64> = x.iter().map(|v| v.abs()).filter(|&t| t > 0.0).collect();
    if thresholds.is_empty() {
        return Err(Error::InvalidInput(
            "threshold rounding needs a nonzero vector".into(),
        ));
    }
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut best: Option<(Assignment, RatioValue)> = None;
    for &t in &thresholds {
        let y = threshold_cut(x, t);
        let v = eval_normalized_qp_ratio(inst, &y)?;
        if best.as_ref().is_none_or(|(_, b)| v.value > b.value) {
            best = Some((y, v));
        }
    }
    Ok(best.expect("at least one threshold"))
}

/// Normalized eigenvector followed by the threshold scan.
pub fn solve_trevisan(inst: &QpRatioInstance) -> Result<(Assignment, RatioValue)> {
    let eig = normalized_eig(inst)?;
    if eig.x.iter().all(|&v| v == 0.0) {
        return Ok((Assignment::zeros(inst.n()), RatioValue::zero()));
    }
    trevisan_round(inst, &eig.x)
}

/// Outcome of the PSD level-rounding.
#[derive(Clone, Debug)]
pub struct PsdRoundResult {
    pub assignment: Assignment,
    /// QP-Ratio value of `assignment` (zero-diagonal numerator).
    pub value: RatioValue,
    /// Value under the full PSD form, supplied diagonal included.
    pub form_value: RatioValue,
    /// Dyadic level that was selected, if any coordinate survived.
    pub level: Option<u32>,
    /// Numerator of the full form after each convexity push.
    pub push_trace: Vec<f64>,
    /// True when the single-edge solution beat the rounded vector.
    pub used_trivial: bool,
}

fn full_form(inst: &QpRatioInstance, diag: &[f64]) -> SymMatrix {
    let mut f = inst.to_dense();
    for (i, &d) in diag.iter().enumerate() {
        f.add_diag(i, d);
    }
    f
}

/// Bucket of `|x| in (2^{-l-1}, 2^{-l}]` for `|x| <= 1`.
fn dyadic_level(a: f64) -> u32 {
    let mut l = 0u32;
    let mut hi = 1.0f64;
    while a <= hi / 2.0 && l < 1100 {
        hi /= 2.0;
        l += 1;
    }
    l
}

/// Poly-log rounding for instances whose form `A + diag` is PSD.
///
/// `x` is a solution of the eigenvalue relaxation (typically the top
/// eigenvector of `A + diag`). Small coordinates are dropped, the rest are
/// bucketed into dyadic levels, the best level is kept, and every surviving
/// coordinate is pushed to the top of its level by the sign that does not
/// decrease the (convex) numerator.
pub fn psd_polylog_round(
    inst: &QpRatioInstance,
    diag: &[f64],
    x: &[f64],
    tol: f64,
) -> Result<PsdRoundResult> {
    let n = inst.n();
    if diag.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: diag.len(),
        });
    }
    if x.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    let form = full_form(inst, diag);
    let scale = form.max_abs_row_sum().max(1.0);
    let mut neg = form.clone();
    for i in 0..n {
        for j in 0..n {
            neg.set_sym(i, j, -form.get(i, j));
        }
    }
    let lambda_min = -eigen_max(&neg, &EigenOptions::default())?.lambda_max;
    if lambda_min < -tol * scale {
        return Err(Error::InvalidInput(format!(
            "form is not PSD: smallest eigenvalue {lambda_min:e}"
        )));
    }

    let (triv_a, triv_v) = trivial_solution(inst);
    let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best_level: Option<(u32, f64)> = None;
    let mut y = vec![0.0; n];
    if xmax > 0.0 {
        let entry_max = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max(form.get(i, j).abs()));
        let floor = 1.0 / ((n * n) as f64 * (1.0 + entry_max));
        let scaled: Vec<f64> = x.iter().map(|v| v / xmax).collect();
        let levels: Vec<Option<u32>> = scaled
            .iter()
            .map(|&v| {
                if v.abs() >= floor {
                    Some(dyadic_level(v.abs()))
                } else {
                    None
                }
            })
            .collect();
        let mut distinct: Vec<u32> = levels.iter().flatten().copied().collect();
        distinct.sort_unstable();
        distinct.dedup();
        for &l in &distinct {
            let cand: Vec<f64> = scaled
                .iter()
                .zip(&levels)
                .map(|(&v, &lv)| if lv == Some(l) { v } else { 0.0 })
                .collect();
            let den: f64 = cand.iter().map(|v| v * v).sum();
            let ratio = form.quadratic_form(&cand) / den;
            if best_level.is_none_or(|(_, r)| ratio > r) {
                best_level = Some((l, ratio));
                y = cand;
            }
        }
    }

    let mut trace = Vec::new();
    let assignment;
    if let Some((level, _)) = best_level {
        let top = 0.5f64.powi(level as i32);
        let mut num = form.quadratic_form(&y);
        trace.push(num);
        for i in 0..n {
            if y[i] == 0.0 || y[i].abs() >= top {
                continue;
            }
            let c: f64 = (0..n)
                .filter(|&k| k != i)
                .map(|k| form.get(i, k) * y[k])
                .sum();
            let fii = form.get(i, i);
            let before = fii * y[i] * y[i] + 2.0 * y[i] * c;
            let t = if c >= 0.0 { top } else { -top };
            let after = fii * t * t + 2.0 * t * c;
            y[i] = t;
            let next = num - before + after;
            assert!(
                next >= num - 1e-12 * (1.0 + num.abs()),
                "convexity push decreased the numerator: {num} -> {next}"
            );
            num = next;
            trace.push(num);
        }
        assignment = Assignment::signs_of(&y);
    } else {
        assignment = Assignment::zeros(n);
    }

    let value = eval_qp_ratio(inst, &assignment)?;
    let rounded = PsdRoundResult {
        form_value: form_value(&form, &assignment),
        assignment,
        value,
        level: best_level.map(|(l, _)| l),
        push_trace: trace,
        used_trivial: false,
    };
    if triv_v.value > rounded.value.value {
        return Ok(PsdRoundResult {
            form_value: form_value(&form, &triv_a),
            assignment: triv_a,
            value: triv_v,
            used_trivial: true,
            ..rounded
        });
    }
    Ok(rounded)
}

fn form_value(form: &SymMatrix, a: &Assignment) -> RatioValue {
    let x = a.as_f64();
    RatioValue::new(form.quadratic_form(&x), a.support() as f64)
}

/// Smallest uniform diagonal shift that makes `A + sI` PSD.
pub fn psd_shift(inst: &QpRatioInstance) -> Result<f64> {
    let a = inst.to_dense();
    let n = a.n();
    let mut neg = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            neg.set_sym(i, j, -a.get(i, j));
        }
    }
    Ok(eigen_max(&neg, &EigenOptions::default())?
        .lambda_max
        .max(0.0))
}

/// PSD pipeline: top eigenvector of `A + diag` followed by the level rounding.
pub fn solve_psd(inst: &QpRatioInstance, diag: &[f64]) -> Result<PsdRoundResult> {
    let form = full_form(inst, diag);
    let eig = eigen_max(&form, &EigenOptions::default())?;
    psd_polylog_round(inst, diag, &eig.vector, 1e-9)
}

#[derive(Clone, Debug)]
pub struct HighOptResult {
    pub assignment: Assignment,
    pub value: RatioValue,
    /// Vertices that survived the degree filter.
    pub kept: Vec<usize>,
    pub used_trivial: bool,
}

/// Drops vertices of degree below `eps/2 * d_max`, runs the normalized
/// eigenvector and threshold scan on what is left, and returns the better of
/// that and the single-edge solution (both measured as QP-Ratio).
pub fn solve_high_opt(inst: &QpRatioInstance, eps: f64) -> Result<HighOptResult> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} outside (0, 1]")));
    }
    let d = inst.degrees();
    let dmax = d.iter().fold(0.0f64, |m, &v| m.max(v));
    let kept: Vec<usize> = (0..inst.n())
        .filter(|&i| d[i] > 0.0 && d[i] >= eps / 2.0 * dmax)
        .collect();
    let (triv_a, triv_v) = trivial_solution(inst);
    let mut best = (triv_a, triv_v, true);
    if !kept.is_empty() {
        let sub = inst.induced(&kept);
        let (y, _) = solve_trevisan(&sub)?;
        let mut x = vec![0i8; inst.n()];
        for (k, &i) in kept.iter().enumerate() {
            x[i] = y.values()[k];
        }
        let a = Assignment::new(x)?;
        let v = eval_qp_ratio(inst, &a)?;
        if v.value >= best.1.value {
            best = (a, v, false);
        }
    }
    Ok(HighOptResult {
        assignment: best.0,
        value: best.1,
        kept,
        used_trivial: best.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_random, gen_star};

    #[test]
    fn eigen_small_cases() {
        let m = SymMatrix::from_rows(2, vec![0.0, 1.0, 1.0, 0.0]);
        let r = eigen_max(&m, &EigenOptions::default()).unwrap();
        assert!((r.lambda_max - 1.0).abs() < 1e-10);
        assert!((r.vector[0].abs() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((r.vector[0] - r.vector[1]).abs() < 1e-9);

        let d = SymMatrix::from_rows(2, vec![3.0, 0.0, 0.0, 1.0]);
        assert!((eigen_max(&d, &EigenOptions::default()).unwrap().lambda_max - 3.0).abs() < 1e-10);

        let star = gen_star(5).unwrap();
        assert!((eig_relaxation_value(&star).unwrap() - 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn star_characteristic_polynomial_cross_check() {
        // det(lambda I - A) for a k-leaf star is lambda^{k-1} (lambda^2 - k).
        let star = gen_star(5).unwrap();
        let (vals, _) = jacobi_eigen(&star.to_dense());
        let lam = vals[0];
        assert!((lam * lam - 5.0).abs() < 1e-12);
    }

    #[test]
    fn relaxation_trivial_cases() {
        let e = QpRatioInstance::from_triples(2, [(0, 1, 1.0)]).unwrap();
        assert!((eig_relaxation_value(&e).unwrap() - 1.0).abs() < 1e-10);
        let z = QpRatioInstance::new(4, vec![]).unwrap();
        assert_eq!(eig_relaxation_value(&z).unwrap(), 0.0);
        assert_eq!(normalized_eig_value(&z).unwrap(), 0.0);
    }

    #[test]
    fn normalized_eig_examples() {
        let neg = QpRatioInstance::from_triples(2, [(0, 1, -1.0)]).unwrap();
        assert!((normalized_eig_value(&neg).unwrap() - 1.0).abs() < 1e-10);
        let star = gen_star(5).unwrap();
        assert!((normalized_eig_value(&star).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trevisan_examples() {
        let neg = QpRatioInstance::from_triples(2, [(0, 1, -1.0)]).unwrap();
        let (y, v) = trevisan_round(&neg, &[1.0, -1.0]).unwrap();
        assert_eq!(y.values(), &[1, -1]);
        assert_eq!(v.value, 1.0);

        let inst = gen_random(5, 1.0, 3).unwrap();
        let x = [0.3, -0.3, 0.3, 0.3, -0.3];
        let (y, _) = trevisan_round(&inst, &x).unwrap();
        assert_eq!(y, Assignment::signs_of(&x));

        assert!(trevisan_round(&inst, &[0.0; 5]).is_err());
    }

    #[test]
    fn psd_rank_one_all_ones() {
        let inst =
            QpRatioInstance::from_triples(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let diag = [1.0, 1.0, 1.0];
        let x = [1.0 / 3f64.sqrt(); 3];
        let r = psd_polylog_round(&inst, &diag, &x, 1e-9).unwrap();
        assert_eq!(r.assignment.values(), &[1, 1, 1]);
        assert_eq!(r.value.numerator, 6.0);
        assert_eq!(r.value.value, 2.0);
        assert_eq!(r.form_value.numerator, 9.0);
    }

    #[test]
    fn psd_dominant_coordinate_pairs_with_best_partner() {
        // A heavy diagonal on vertex 0 makes the eigenvector concentrate there;
        // the single surviving coordinate has QP-Ratio 0 and the best edge at 0 wins.
        let inst =
            QpRatioInstance::from_triples(4, [(0, 1, 0.2), (0, 2, -0.9), (0, 3, 0.4), (1, 2, 0.1)])
                .unwrap();
        let diag = [50.0, 1.0, 1.0, 1.0];
        let r = solve_psd(&inst, &diag).unwrap();
        assert_eq!(r.assignment.values(), &[1, 0, -1, 0]);
        assert!((r.value.value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn psd_rejects_indefinite_and_handles_zero() {
        let inst = QpRatioInstance::from_triples(2, [(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            psd_polylog_round(&inst, &[0.0, 0.0], &[1.0, 1.0], 1e-9),
            Err(Error::InvalidInput(_))
        ));
        let z = QpRatioInstance::new(3, vec![]).unwrap();
        let r = solve_psd(&z, &[0.0; 3]).unwrap();
        assert_eq!(r.value.value, 0.0);
    }

    #[test]
    fn psd_push_trace_is_monotone() {
        for seed in 0..20 {
            let inst = gen_random(8, 0.7, seed).unwrap();
            let s = psd_shift(&inst).unwrap() + 1e-6;
            let r = solve_psd(&inst, &[s; 8]).unwrap();
            for w in r.push_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
        }
    }

    #[test]
    fn high_opt_examples() {
        // Regular: 4-cycle with random signs; the filter keeps everything.
        let cyc =
            QpRatioInstance::from_triples(4, [(0, 1, 1.0), (1, 2, -1.0), (2, 3, 1.0), (0, 3, 1.0)])
                .unwrap();
        let h = solve_high_opt(&cyc, 0.5).unwrap();
        assert_eq!(h.kept, vec![0, 1, 2, 3]);
        let (t, tv) = solve_trevisan(&cyc).unwrap();
        if !h.used_trivial {
            assert_eq!(h.assignment, t);
        }
        assert!(h.value.value >= eval_qp_ratio(&cyc, &t).unwrap().value.min(tv.value) - 1e-12);

        let iso =
            QpRatioInstance::from_triples(5, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 0, 0.01)])
                .unwrap();
        let h = solve_high_opt(&iso, 0.5).unwrap();
        assert!(!h.kept.contains(&3));
        assert!(!h.kept.contains(&4));

        let r = gen_random(10, 0.6, 11).unwrap();
        let h = solve_high_opt(&r, 0.3).unwrap();
        assert!(h.value.value >= trivial_solution(&r).1.value);
    }
}
