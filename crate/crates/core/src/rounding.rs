//! Vector-solution roundings: length preprocessing, close-lengths rounding
//! with a derandomized selection stage, and the general and bipartite
//! pipelines built on top of them.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::NeumaierSum;
use crate::model::{eval_qp_ratio, trivial_solution, Assignment, QpRatioInstance, RatioValue};
use crate::rng;
use crate::sdp::{sdp_solve, GramSolution, SdpOptions};

fn adjacency(inst: &QpRatioInstance) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); inst.n()];
    for e in inst.entries() {
        adj[e.i].push((e.j, e.w));
        adj[e.j].push((e.i, e.w));
    }
    adj
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lifts every nonzero vector with `|v_i|^2 < 1/n` to length `1/sqrt(n)`
/// when its cross term `S_i = sum_j a_ij <v_i, v_j>` is positive and zeroes
/// it otherwise. Vertices are visited once in index order; neither action
/// lowers the objective.
pub fn preprocess_small(inst: &QpRatioInstance, sol: &GramSolution) -> Result<GramSolution> {
    let n = inst.n();
    if n == 0 {
        return Ok(sol.clone());
    }
    let adj = adjacency(inst);
    let floor = 1.0 / n as f64;
    let target = floor.sqrt();
    let mut v = sol.vectors.clone();
    for i in 0..n {
        let sq = dotv(&v[i], &v[i]);
        if sq == 0.0 || sq >= floor {
            continue;
        }
        let s: f64 = adj[i].iter().map(|&(j, w)| w * dotv(&v[i], &v[j])).sum();
        if s <= 0.0 {
            v[i].iter_mut().for_each(|x| *x = 0.0);
        } else {
            let c = target / sq.sqrt();
            v[i].iter_mut().for_each(|x| *x *= c);
        }
    }
    GramSolution::new(inst, v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapReport {
    pub threshold: f64,
    pub removed: Vec<usize>,
    /// `B n^rho / 2`: the value the large vectors must carry when
    /// removing them loses more than half.
    pub large_value_bound: f64,
}

/// Zeroes every vector with `|v_i|^2 > 16 / n^rho`.
pub fn cap_large(
    inst: &QpRatioInstance,
    sol: &GramSolution,
    b: f64,
    rho: f64,
) -> Result<(GramSolution, CapReport)> {
    let n = inst.n().max(1) as f64;
    let threshold = 16.0 / n.powf(rho);
    let mut v = sol.vectors.clone();
    let mut removed = Vec::new();
    for (i, vi) in v.iter_mut().enumerate() {
        if dotv(vi, vi) > threshold {
            vi.iter_mut().for_each(|x| *x = 0.0);
            removed.push(i);
        }
    }
    let out = if inst.n() == 0 {
        sol.clone()
    } else {
        GramSolution::new(inst, v)?
    };
    Ok((
        out,
        CapReport {
            threshold,
            removed,
            large_value_bound: b * n.powf(rho) / 2.0,
        },
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CloseLengthsResult {
    pub assignment: Assignment,
    pub value: RatioValue,
    /// Conditional-expectation ratio before the first and after each step.
    pub trace: Vec<f64>,
    pub kept: usize,
    pub trials: usize,
    pub used_trivial: bool,
}

pub fn trial_count(n: usize) -> usize {
    (8.0 * (n.max(2) as f64).ln()).ceil() as usize + 8
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Two-stage rounding of a solution whose nonzero lengths are within a
/// constant factor of each other.
///
/// Stage one treats `q_i = |v_i| / max_j |v_j|` as keep probabilities for
/// the unit vectors `u_i` and fixes them one at a time to 1 or 0, whichever
/// gives the larger ratio of `E[sum a_ij q_i q_j <u_i, u_j>]` to
/// `E[sum q_i]`; a mediant argument makes the ratio non-decreasing. Stage
/// two projects the kept unit vectors on Gaussians scaled by
/// `1 / (2 sqrt(ln n))`, clamps to `[-1, 1]` and keeps `sign(z_i)` with
/// probability `|z_i|`. The plain sign pattern of each projection is also
/// tried.
pub fn round_close_lengths(
    inst: &QpRatioInstance,
    sol: &GramSolution,
    seed: u64,
) -> Result<CloseLengthsResult> {
    let n = inst.n();
    if sol.vectors.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: sol.vectors.len(),
        });
    }
    let (triv_a, triv_v) = trivial_solution(inst);
    let norms: Vec<f64> = sol.sq_norms().iter().map(|s| s.sqrt()).collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(CloseLengthsResult {
            assignment: triv_a,
            value: triv_v,
            trace: vec![],
            kept: 0,
            trials: 0,
            used_trivial: true,
        });
    }
    let unit: Vec<Vec<f64>> = sol
        .vectors
        .iter()
        .zip(&norms)
        .map(|(v, &l)| {
            if l > 0.0 {
                v.iter().map(|x| x / l).collect()
            } else {
                vec![0.0; v.len()]
            }
        })
        .collect();
    let adj = adjacency(inst);
    // Weighted Gram row entries `a_ij <u_i, u_j>`, computed once.
    let wg: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            adj[i]
                .iter()
                .map(|&(j, w)| (j, w * dotv(&unit[i], &unit[j])))
                .collect()
        })
        .collect();

    let mut q: Vec<f64> = norms.iter().map(|l| l / top).collect();
    let mut num = NeumaierSum::default();
    for i in 0..n {
        for &(j, g) in &wg[i] {
            num.add(g * q[i] * q[j]);
        }
    }
    let mut num = num.total();
    let mut den: f64 = q.iter().sum();
    let mut trace = vec![ratio(num, den)];
    for i in 0..n {
        if q[i] == 0.0 {
            continue;
        }
        let s: f64 = wg[i].iter().map(|&(j, g)| g * q[j]).sum();
        let base_num = num - 2.0 * q[i] * s;
        let base_den = den - q[i];
        let keep = ratio(base_num + 2.0 * s, base_den + 1.0);
        let drop = ratio(base_num, base_den);
        let before = *trace.last().unwrap();
        let (qi, r) = if keep >= drop {
            (1.0, keep)
        } else {
            (0.0, drop)
        };
        assert!(
            r >= before - 1e-12 * before.abs().max(1.0),
            "stage-one ratio decreased at step {i}: {before} -> {r}"
        );
        q[i] = qi;
        num = base_num + 2.0 * qi * s;
        den = base_den + qi;
        trace.push(r);
    }
    let kept: Vec<usize> = (0..n).filter(|&i| q[i] == 1.0).collect();

    let trials = trial_count(n);
    let t = 2.0 * (n.max(2) as f64).ln().sqrt();
    let mut r = rng::stream(seed, rng::streams::CLOSE_LENGTHS);
    let dim = sol.dim;
    let mut best = (triv_a, triv_v);
    let mut used_trivial = true;
    let mut x = vec![0i8; n];
    let mut g = vec![0.0; dim];
    for _ in 0..trials {
        g.iter_mut()
            .for_each(|v| *v = StandardNormal.sample(&mut r));
        let proj: Vec<f64> = kept.iter().map(|&i| dotv(&unit[i], &g)).collect();
        // Randomized rounding, then the sign pattern of the same projection.
        x.iter_mut().for_each(|v| *v = 0);
        for (&i, &p) in kept.iter().zip(&proj) {
            let z = (p / t).clamp(-1.0, 1.0);
            if r.gen::<f64>() < z.abs() {
                x[i] = if z > 0.0 { 1 } else { -1 };
            }
        }
        let mut signs = vec![0i8; n];
        for (&i, &p) in kept.iter().zip(&proj) {
            signs[i] = if p > 0.0 {
                1
            } else if p < 0.0 {
                -1
            } else {
                0
            };
        }
        for cand in [x.clone(), signs] {
            let a = Assignment::new(cand)?;
            let v = eval_qp_ratio(inst, &a)?;
            if v.value > best.1.value {
                best = (a, v);
                used_trivial = false;
            }
        }
    }
    Ok(CloseLengthsResult {
        assignment: best.0,
        value: best.1,
        trace,
        kept: kept.len(),
        trials,
        used_trivial,
    })
}

/// Groups nonzero squared lengths into bands `(t / 2^{k+1}, t / 2^k]`
/// below the largest one, `t`. Bands are returned top-down, empty ones
/// skipped.
pub fn dyadic_bands(sq: &[f64]) -> Vec<Vec<usize>> {
    let top = sq.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return vec![];
    }
    let mut bands: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, &s) in sq.iter().enumerate() {
        if s > 0.0 {
            let mut k = (top / s).log2().floor().max(0.0) as i32;
            // Correct for rounding in log2 near band edges.
            while k > 0 && s > top * f64::powi(2.0, -k) {
                k -= 1;
            }
            while s <= top * f64::powi(2.0, -k - 1) {
                k += 1;
            }
            let k = k as u32;
            bands.entry(k).or_default().push(i);
        }
    }
    bands.into_values().collect()
}

fn restrict(inst: &QpRatioInstance, sol: &GramSolution, keep: &[usize]) -> Result<GramSolution> {
    let mut v = vec![vec![0.0; sol.dim]; sol.vectors.len()];
    for &i in keep {
        v[i].clone_from(&sol.vectors[i]);
    }
    GramSolution::new(inst, v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralResult {
    pub assignment: Assignment,
    pub value: RatioValue,
    /// Relaxation objective of the normalized instance (`max |a_ij| = 1`).
    pub sdp_objective: f64,
    pub scale: f64,
    pub bands: usize,
    pub capped: usize,
    pub used_trivial: bool,
}

pub fn solve_general(inst: &QpRatioInstance, seed: u64) -> Result<GeneralResult> {
    solve_general_with(
        inst,
        &SdpOptions {
            seed,
            ..Default::default()
        },
    )
}

/// Relaxation, length preprocessing, capping with `rho = 1/3`, and
/// close-lengths rounding of each dyadic band and of the whole capped
/// solution; the best candidate or the trivial solution is returned, with
/// its value on the original weights.
pub fn solve_general_with(inst: &QpRatioInstance, opts: &SdpOptions) -> Result<GeneralResult> {
    let (triv_a, triv_v) = trivial_solution(inst);
    let scale = inst.max_abs_weight();
    let mut out = GeneralResult {
        assignment: triv_a.clone(),
        value: triv_v,
        sdp_objective: 0.0,
        scale,
        bands: 0,
        capped: 0,
        used_trivial: true,
    };
    if scale == 0.0 {
        return Ok(out);
    }
    let norm = inst.scaled(1.0 / scale);
    let sol = sdp_solve(&norm, opts, &[triv_a])?;
    out.sdp_objective = sol.objective;
    if !(sol.objective > 0.0) {
        return Ok(out);
    }
    let pre = preprocess_small(&norm, &sol)?;
    let (capped, rep) = cap_large(&norm, &pre, 1.0, 1.0 / 3.0)?;
    out.capped = rep.removed.len();
    let bands = dyadic_bands(&capped.sq_norms());
    out.bands = bands.len();
    let mut jobs: Vec<GramSolution> = Vec::with_capacity(bands.len() + 1);
    for b in &bands {
        jobs.push(restrict(&norm, &capped, b)?);
    }
    jobs.push(capped);
    let run = |(k, g): (usize, &GramSolution)| {
        round_close_lengths(&norm, g, opts.seed ^ ((k as u64) << 40))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<CloseLengthsResult>> = jobs.par_iter().enumerate().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<CloseLengthsResult>> = jobs.iter().enumerate().map(run).collect();
    for res in results {
        let res = res?;
        let v = eval_qp_ratio(inst, &res.assignment)?;
        if v.value > out.value.value {
            out.assignment = res.assignment;
            out.value = v;
            out.used_trivial = false;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteResult {
    pub assignment: Assignment,
    pub value: RatioValue,
    pub sdp_objective: f64,
    pub level_pairs: usize,
    pub used_trivial: bool,
}

/// For `x` on the sampled side, the values `sum_i a_ij x_i` on the other.
fn column_sums(rows: &[Vec<(usize, f64)>], x: &[i8], ncols: usize) -> Vec<f64> {
    let mut s = vec![0.0; ncols];
    for (r, &xi) in rows.iter().zip(x) {
        for &(c, w) in r {
            s[c] += w * xi as f64;
        }
    }
    s
}

pub fn solve_bipartite(inst: &QpRatioInstance, seed: u64) -> Result<BipartiteResult> {
    solve_bipartite_with(
        inst,
        &SdpOptions {
            seed,
            ..Default::default()
        },
    )
}

/// Level-pair assignment rounding.
///
/// The smaller-mass side of the relaxation is scaled up to the mass of the
/// other, lengths are renormalized to a maximum of 1 and grouped into
/// levels `(2^{-k-1}, 2^{-k}]` down to `1/(2n)`. For each pair of a left and
/// a right level, `n` uniform sign vectors are drawn on the level with
/// fewer vertices, the one maximizing `sum_j |sum_i a_ij x_i|` is kept, and
/// the other level gets `y_j = sign(sum_i a_ij x_i)`. Close-lengths rounding
/// of the whole relaxation and the trivial solution are also candidates.
pub fn solve_bipartite_with(inst: &QpRatioInstance, opts: &SdpOptions) -> Result<BipartiteResult> {
    let bp = inst
        .bipartition()
        .ok_or_else(|| {
            Error::InvalidInput("bipartite algorithm needs an instance with a bipartition".into())
        })?
        .clone();
    let n = inst.n();
    let (triv_a, triv_v) = trivial_solution(inst);
    let scale = inst.max_abs_weight();
    let mut out = BipartiteResult {
        assignment: triv_a.clone(),
        value: triv_v,
        sdp_objective: 0.0,
        level_pairs: 0,
        used_trivial: true,
    };
    if scale == 0.0 {
        return Ok(out);
    }
    let norm = inst.scaled(1.0 / scale);
    let sol = sdp_solve(&norm, opts, &[triv_a])?;
    out.sdp_objective = sol.objective;
    if !(sol.objective > 0.0) {
        return Ok(out);
    }

    let mut sq = sol.sq_norms();
    let mass = |side: &[usize], sq: &[f64]| side.iter().map(|&i| sq[i]).sum::<f64>();
    let (ml, mr) = (mass(&bp.left, &sq), mass(&bp.right, &sq));
    if ml > 0.0 && mr > 0.0 {
        let (small, factor) = if ml < mr {
            (&bp.left, mr / ml)
        } else {
            (&bp.right, ml / mr)
        };
        for &i in small {
            sq[i] *= factor;
        }
    }
    let top = sq.iter().cloned().fold(0.0, f64::max);
    let floor = 1.0 / (2.0 * n as f64);
    let level_of = |i: usize| -> Option<u32> {
        let s = sq[i] / top;
        if s < floor || s == 0.0 {
            return None;
        }
        Some((1.0 / s).log2().floor().max(0.0) as u32)
    };
    let group = |side: &[usize]| {
        let mut m: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for &i in side {
            if let Some(k) = level_of(i) {
                m.entry(k).or_default().push(i);
            }
        }
        m.into_values().collect::<Vec<_>>()
    };
    let (lv, rv) = (group(&bp.left), group(&bp.right));
    let adj = adjacency(inst);
    let mut pairs = Vec::new();
    for a in &lv {
        for b in &rv {
            pairs.push((a.clone(), b.clone()));
        }
    }
    out.level_pairs = pairs.len();

    let run_pair =
        |(k, (la, lb)): (usize, &(Vec<usize>, Vec<usize>))| -> Result<(Assignment, RatioValue)> {
            let (sample, other) = if la.len() <= lb.len() {
                (la, lb)
            } else {
                (lb, la)
            };
            let mut col = vec![usize::MAX; n];
            other.iter().enumerate().for_each(|(c, &j)| col[j] = c);
            let rows: Vec<Vec<(usize, f64)>> = sample
                .iter()
                .map(|&i| {
                    adj[i]
                        .iter()
                        .filter(|&&(j, _)| col[j] != usize::MAX)
                        .map(|&(j, w)| (col[j], w))
                        .collect()
                })
                .collect();
            let mut r = rng::stream(opts.seed ^ ((k as u64) << 32), rng::streams::BIPARTITE);
            let mut best_x = vec![1i8; sample.len()];
            let mut best_s = f64::NEG_INFINITY;
            let mut x = vec![0i8; sample.len()];
            for _ in 0..n.max(1) {
                x.iter_mut()
                    .for_each(|v| *v = if r.gen::<bool>() { 1 } else { -1 });
                let s: f64 = column_sums(&rows, &x, other.len())
                    .iter()
                    .map(|v| v.abs())
                    .sum();
                if s > best_s {
                    best_s = s;
                    best_x.clone_from(&x);
                }
            }
            let sums = column_sums(&rows, &best_x, other.len());
            let mut full = vec![0i8; n];
            for (&i, &xi) in sample.iter().zip(&best_x) {
                full[i] = xi;
            }
            for (&j, &s) in other.iter().zip(&sums) {
                full[j] = if s > 0.0 {
                    1
                } else if s < 0.0 {
                    -1
                } else {
                    0
                };
            }
            let a = Assignment::new(full)?;
            let v = eval_qp_ratio(inst, &a)?;
            Ok((a, v))
        };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<(Assignment, RatioValue)>> =
        pairs.par_iter().enumerate().map(run_pair).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(Assignment, RatioValue)>> =
        pairs.iter().enumerate().map(run_pair).collect();
    let close = round_close_lengths(&norm, &sol, opts.seed)?;
    let close_v = eval_qp_ratio(inst, &close.assignment)?;
    for res in results
        .into_iter()
        .chain(std::iter::once(Ok((close.assignment, close_v))))
    {
        let (a, v) = res?;
        if v.value > out.value.value {
            out.assignment = a;
            out.value = v;
            out.used_trivial = false;
        }
    }
    Ok(out)
}

pub const RANDOM_SUMS_MAX_N: usize = 24;

/// `E |sum_i b_i X_i|` over uniform signs `X`, by enumeration.
pub fn random_sums_expectation(b: &[f64]) -> Result<f64> {
    let n = b.len();
    if n > RANDOM_SUMS_MAX_N {
        return Err(Error::OverBudget {
            what: "random-sign enumeration (n)".into(),
            requested: n as u128,
            cap: RANDOM_SUMS_MAX_N as u128,
        });
    }
    let mut total = NeumaierSum::default();
    for p in 0..1usize << n {
        let s: f64 = b
            .iter()
            .enumerate()
            .map(|(i, &bi)| if p >> i & 1 == 1 { -bi } else { bi })
            .sum();
        total.add(s.abs());
    }
    Ok(total.total() / (1u64 << n) as f64)
}
