//! Vector relaxation with the equal-length constraints
//! `|<w_i, w_j>| <= |w_i|^2`, solved heuristically by low-rank ascent.
//!
//! The solver only ever returns exactly feasible points (up to rounding), so
//! its objective is a lower bound on the relaxation value; with an integer
//! warm start it is also at least that assignment's value.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::NeumaierSum;
use crate::model::{Assignment, QpRatioInstance};
use crate::rng;

/// `n` vectors in `R^d` with the objective and residuals they realise.
#[derive(Clone, Debug, PartialEq)]
pub struct GramSolution {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
    /// `sum_{i,j} a_ij <w_i, w_j>`.
    pub objective: f64,
    /// `|sum_i |w_i|^2 - 1|`.
    pub residual_norm1: f64,
    /// `max_{i != j} max(0, |<w_i, w_j>| - min(|w_i|^2, |w_j|^2))`.
    pub residual_pair: f64,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GramSolution {
    pub fn new(inst: &QpRatioInstance, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.len() != inst.n() {
            return Err(Error::Dimension {
                expected: inst.n(),
                got: vectors.len(),
            });
        }
        let dim = vectors.first().map_or(1, |v| v.len());
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidInput(
                "Gram vectors must share a positive dimension".into(),
            ));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("Gram vectors must be finite".into()));
        }
        let mut sol = GramSolution {
            vectors,
            dim,
            objective: 0.0,
            residual_norm1: 0.0,
            residual_pair: 0.0,
        };
        sol.recompute(inst);
        Ok(sol)
    }

    /// Rank-one embedding `w_i = x_i / sqrt(k) * e_0` of an assignment with
    /// support `k`, padded to dimension `dim`.
    pub fn from_assignment(inst: &QpRatioInstance, a: &Assignment, dim: usize) -> Result<Self> {
        let k = a.support();
        if k == 0 {
            return Err(Error::InvalidInput(
                "cannot embed the all-zero assignment".into(),
            ));
        }
        let s = 1.0 / (k as f64).sqrt();
        let vectors = a
            .values()
            .iter()
            .map(|&x| {
                let mut v = vec![0.0; dim.max(1)];
                v[0] = x as f64 * s;
                v
            })
            .collect();
        GramSolution::new(inst, vectors)
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        dotv(&self.vectors[i], &self.vectors[j])
    }

    pub fn sq_norms(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| dotv(v, v)).collect()
    }

    /// Recomputes objective and residuals from the vectors.
    pub fn recompute(&mut self, inst: &QpRatioInstance) {
        let mut obj = NeumaierSum::default();
        for e in inst.entries() {
            obj.add(2.0 * e.w * self.inner(e.i, e.j));
        }
        self.objective = obj.total();
        let s = self.sq_norms();
        let mut total = NeumaierSum::default();
        s.iter().for_each(|&v| total.add(v));
        self.residual_norm1 = (total.total() - 1.0).abs();
        let n = self.vectors.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let g = self.inner(i, j).abs();
                worst = worst.max(g - s[i].min(s[j]));
            }
        }
        self.residual_pair = worst;
    }

    pub fn to_json(&self) -> String {
        let f = GramFile {
            kind: "gram".into(),
            n: self.vectors.len(),
            d: self.dim,
            vectors: self.vectors.clone(),
        };
        let mut s = serde_json::to_string(&f).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(inst: &QpRatioInstance, text: &str) -> Result<Self> {
        let f: GramFile = serde_json::from_str(text)?;
        if f.kind != "gram" {
            return Err(Error::InvalidInput(format!(
                "expected kind \"gram\", got {:?}",
                f.kind
            )));
        }
        if f.n != f.vectors.len() || f.vectors.iter().any(|v| v.len() != f.d) {
            return Err(Error::InvalidInput(
                "gram file: n/d disagree with vectors".into(),
            ));
        }
        GramSolution::new(inst, f.vectors)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GramFile {
    kind: String,
    n: usize,
    d: usize,
    vectors: Vec<Vec<f64>>,
}

/// Outcome of the feasibility check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub residual_norm1: f64,
    pub residual_pair: f64,
}

pub fn sdp_feasibility(sol: &GramSolution, tol: f64) -> Feasibility {
    Feasibility {
        feasible: sol.residual_norm1 <= tol && sol.residual_pair <= tol,
        residual_norm1: sol.residual_norm1,
        residual_pair: sol.residual_pair,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    /// Factorization rank; `None` picks `ceil(sqrt(2n)) + 1`.
    pub rank: Option<usize>,
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            rank: None,
            tol: 1e-6,
            seed: 0,
            restarts: 3,
            max_outer: 30,
            max_inner: 300,
        }
    }
}

pub fn default_rank(n: usize) -> usize {
    ((2.0 * n as f64).sqrt().ceil() as usize + 1).max(2)
}

/// Best feasible solution among local ascents from random starts and the
/// rank-one embeddings of `warm` (and any supplied feasible Gram solutions).
pub fn sdp_solve(
    inst: &QpRatioInstance,
    opts: &SdpOptions,
    warm: &[Assignment],
) -> Result<GramSolution> {
    sdp_solve_warm(inst, opts, warm, &[])
}

pub fn sdp_solve_warm(
    inst: &QpRatioInstance,
    opts: &SdpOptions,
    warm: &[Assignment],
    warm_grams: &[GramSolution],
) -> Result<GramSolution> {
    let n = inst.n();
    let d = opts.rank.unwrap_or_else(|| default_rank(n));
    if d < 2 {
        return Err(Error::InvalidInput(format!("rank {d} < 2")));
    }
    for a in warm {
        if a.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: a.len(),
            });
        }
    }
    let mut candidates: Vec<GramSolution> = Vec::new();
    for a in warm.iter().filter(|a| a.support() > 0) {
        candidates.push(GramSolution::from_assignment(inst, a, d)?);
    }
    for g in warm_grams {
        if g.vectors.len() == n && sdp_feasibility(g, opts.tol).feasible {
            candidates.push(g.clone());
        }
    }
    if n > 0 && !inst.entries().is_empty() {
        let dense = Dense::new(inst);
        let run = |k: usize| ascend(&dense, d, opts, opts.seed, k);
        #[cfg(feature = "parallel")]
        let found: Vec<GramSolution> = (0..opts.restarts).into_par_iter().map(run).collect();
        #[cfg(not(feature = "parallel"))]
        let found: Vec<GramSolution> = (0..opts.restarts).map(run).collect();
        for mut g in found {
            g.recompute(inst);
            if sdp_feasibility(&g, opts.tol).feasible {
                candidates.push(g);
            }
        }
    }
    if candidates.is_empty() {
        if n == 0 {
            return GramSolution::new(inst, vec![]);
        }
        let mut v = vec![vec![0.0; d]; n];
        v[0][0] = 1.0;
        return GramSolution::new(inst, v);
    }
    let mut best = 0;
    for (k, c) in candidates.iter().enumerate() {
        if c.objective > candidates[best].objective {
            best = k;
        }
    }
    Ok(candidates.swap_remove(best))
}

/// True when the brute-force optimum does not exceed `sol.objective + tol`.
pub fn sdp_upper_check(inst: &QpRatioInstance, sol: &GramSolution, tol: f64) -> Result<bool> {
    let (_, v) = crate::exact::brute_force_qp_ratio(inst, crate::exact::DEFAULT_CAP)?;
    Ok(v.value <= sol.objective + tol)
}

/// Adjacency lists `(j, a_ij)` over the symmetric completion.
struct Dense {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
}

impl Dense {
    fn new(inst: &QpRatioInstance) -> Self {
        let mut adj = vec![Vec::new(); inst.n()];
        for e in inst.entries() {
            adj[e.i].push((e.j, e.w));
            adj[e.j].push((e.i, e.w));
        }
        Dense { n: inst.n(), adj }
    }
}

struct AlState {
    lam: Vec<f64>,
    mu: f64,
}

/// Augmented Lagrangian value and its gradient at `w` (n x d, row-major).
fn lagrangian(a: &Dense, w: &[f64], d: usize, st: &AlState, grad: &mut [f64]) -> (f64, f64) {
    let n = a.n;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let row = |i: usize| &w[i * d..(i + 1) * d];
    let mut f = 0.0;
    for i in 0..n {
        for &(j, aij) in &a.adj[i] {
            f += aij * dotv(row(i), row(j));
            for k in 0..d {
                grad[i * d + k] += 2.0 * aij * w[j * d + k];
            }
        }
    }
    let s: Vec<f64> = (0..n).map(|i| dotv(row(i), row(i))).collect();
    let mut pen = 0.0;
    let mut viol = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let g = dotv(row(i), row(j));
            let c = g.abs() - s[i];
            viol = viol.max(c);
            let lam = st.lam[i * n + j];
            let t = (lam + st.mu * c).max(0.0);
            pen += (t * t - lam * lam) / (2.0 * st.mu);
            if t > 0.0 {
                let sg = g.signum();
                for k in 0..d {
                    grad[i * d + k] -= t * (sg * w[j * d + k] - 2.0 * w[i * d + k]);
                    grad[j * d + k] -= t * sg * w[i * d + k];
                }
            }
        }
    }
    (f - pen, viol)
}

fn normalize(w: &mut [f64]) {
    let s = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
}

fn ascend(a: &Dense, d: usize, opts: &SdpOptions, seed: u64, restart: usize) -> GramSolution {
    let n = a.n;
    let mut r = rng::stream(seed, rng::streams::SDP_RESTART + restart as u64);
    let mut w: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
    normalize(&mut w);
    let mut st = AlState {
        lam: vec![0.0; n * n],
        mu: 10.0 * n as f64,
    };
    let mut grad = vec![0.0; n * d];
    let mut trial = vec![0.0; n * d];
    let mut tgrad = vec![0.0; n * d];
    let mut prev_viol = f64::INFINITY;
    let mut step = 1.0;
    for _outer in 0..opts.max_outer {
        let (mut val, _) = lagrangian(a, &w, d, &st, &mut grad);
        for _inner in 0..opts.max_inner {
            // Project onto the tangent space of the unit sphere.
            let radial: f64 = dotv(&grad, &w);
            let mut gnorm2 = 0.0;
            for k in 0..n * d {
                let g = grad[k] - radial * w[k];
                grad[k] = g;
                gnorm2 += g * g;
            }
            if gnorm2.sqrt() <= opts.tol * 1e-2 {
                break;
            }
            let mut accepted = false;
            step *= 2.0;
            for _ in 0..50 {
                for k in 0..n * d {
                    trial[k] = w[k] + step * grad[k];
                }
                normalize(&mut trial);
                let (tv, _) = lagrangian(a, &trial, d, &st, &mut tgrad);
                if tv >= val + 1e-4 * step * gnorm2 {
                    std::mem::swap(&mut w, &mut trial);
                    std::mem::swap(&mut grad, &mut tgrad);
                    val = tv;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let (_, viol) = lagrangian(a, &w, d, &st, &mut grad);
        // Multiplier update from the constraint values at the current point.
        let row = |i: usize| &w[i * d..(i + 1) * d];
        for i in 0..n {
            let si = dotv(row(i), row(i));
            for j in 0..n {
                if i != j {
                    let c = dotv(row(i), row(j)).abs() - si;
                    let l = &mut st.lam[i * n + j];
                    *l = (*l + st.mu * c).max(0.0);
                }
            }
        }
        if viol <= opts.tol * 1e-3 {
            break;
        }
        if viol > 0.25 * prev_viol {
            st.mu = (st.mu * 4.0).min(1e9);
        }
        prev_viol = viol;
    }
    let vectors: Vec<Vec<f64>> = (0..n).map(|i| w[i * d..(i + 1) * d].to_vec()).collect();
    repair(vectors)
}

/// Makes a near-feasible point exactly feasible: each violating `w_i` gets
/// a private extra coordinate of squared length `max_j (|<w_i,w_j>| - |w_i|^2)`,
/// then everything is rescaled to unit total squared length. Inner products
/// between distinct vectors are unchanged before the rescale.
fn repair(vectors: Vec<Vec<f64>>) -> GramSolution {
    let n = vectors.len();
    let d = vectors.first().map_or(1, |v| v.len());
    let s: Vec<f64> = vectors.iter().map(|v| dotv(v, v)).collect();
    let mut extra = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let c = dotv(&vectors[i], &vectors[j]).abs() - s[i];
                if c > 0.0 {
                    extra[i] = extra[i].max(c * (1.0 + 1e-9) + f64::MIN_POSITIVE);
                }
            }
        }
    }
    let violators: Vec<usize> = (0..n).filter(|&i| extra[i] > 0.0).collect();
    let dim = d + violators.len();
    let mut out: Vec<Vec<f64>> = vectors
        .into_iter()
        .map(|mut v| {
            v.resize(dim, 0.0);
            v
        })
        .collect();
    for (k, &i) in violators.iter().enumerate() {
        out[i][d + k] = extra[i].sqrt();
    }
    let total: f64 = out.iter().map(|v| dotv(v, v)).sum::<f64>().sqrt();
    if total > 0.0 {
        out.iter_mut().flatten().for_each(|x| *x /= total);
    }
    GramSolution {
        vectors: out,
        dim,
        objective: 0.0,
        residual_norm1: 0.0,
        residual_pair: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_star;
    use crate::model::eval_qp_ratio;

    #[test]
    fn embedding_is_feasible_and_matches_value() {
        let inst = gen_star(5).unwrap();
        let a = Assignment::new(vec![1, 1, 1, 1, 1, 1]).unwrap();
        let g = GramSolution::from_assignment(&inst, &a, 3).unwrap();
        assert_eq!(g.residual_pair, 0.0);
        assert!(g.residual_norm1 <= 1e-15);
        let v = eval_qp_ratio(&inst, &a).unwrap().value;
        assert!((g.objective - v).abs() <= 1e-12);
    }

    #[test]
    fn zero_vectors_are_infeasible() {
        let inst = gen_star(2).unwrap();
        let g = GramSolution::new(&inst, vec![vec![0.0; 2]; 3]).unwrap();
        assert!(!sdp_feasibility(&g, 1e-6).feasible);
    }

    #[test]
    fn repair_restores_feasibility() {
        let inst = gen_star(3).unwrap();
        let v = vec![
            vec![1.0, 0.0],
            vec![0.5, 0.0],
            vec![0.1, 0.3],
            vec![0.0, 0.0],
        ];
        let mut g = repair(v);
        g.recompute(&inst);
        assert!(sdp_feasibility(&g, 1e-12).feasible, "{g:?}");
    }

    #[test]
    fn single_edge_objective() {
        let inst = QpRatioInstance::from_triples(2, [(0, 1, 1.0)]).unwrap();
        let g = sdp_solve(
            &inst,
            &SdpOptions::default(),
            &[Assignment::new(vec![1, 1]).unwrap()],
        )
        .unwrap();
        assert!(g.objective >= 1.0 - 1e-12);
        assert!(g.objective <= 1.0 + 1e-6);
        assert!(sdp_feasibility(&g, 1e-6).feasible);
    }

    #[test]
    fn gram_json_round_trip() {
        let inst = gen_star(1).unwrap();
        let g = GramSolution::new(&inst, vec![vec![0.5, 0.5], vec![0.5, -0.5]]).unwrap();
        let back = GramSolution::from_json(&inst, &g.to_json()).unwrap();
        assert_eq!(back, g);
    }
}
