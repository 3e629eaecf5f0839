//! Reduction machinery: random k-AND formulas and their bipartite QP-Ratio
//! image, Boolean functions on the hypercube with their Fourier expansion,
//! Ratio Unique Games with the long-code style reduction to QP-Intermediate,
//! the QP-Intermediate to QP-Ratio reduction, and the three-vector
//! relaxation embedding.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::NeumaierSum;
use crate::model::{Assignment, Entry, Meta, QpIntermediateInstance, QpRatioInstance};
use crate::rng;
use crate::sdp::GramSolution;

// ---------------------------------------------------------------------------
// Boolean functions

pub const BOOLFN_MAX_R: usize = 12;

/// A function `{-1,1}^R -> [-1,1]` as a table of `2^R` values. Bit `i` of
/// the table index set means `x_i = -1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoolFn {
    r: usize,
    table: Vec<f64>,
}

impl BoolFn {
    /// Values are clamped into `[-1, 1]`; non-finite values are rejected.
    pub fn new(r: usize, table: Vec<f64>) -> Result<Self> {
        if r > BOOLFN_MAX_R {
            return Err(Error::OverBudget {
                what: "Boolean function arity (R)".into(),
                requested: r as u128,
                cap: BOOLFN_MAX_R as u128,
            });
        }
        if table.len() != 1 << r {
            return Err(Error::Dimension {
                expected: 1 << r,
                got: table.len(),
            });
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "Boolean function values must be finite".into(),
            ));
        }
        Ok(BoolFn {
            r,
            table: table.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        })
    }

    pub fn zero(r: usize) -> Self {
        BoolFn {
            r,
            table: vec![0.0; 1 << r],
        }
    }

    pub fn constant(r: usize, c: f64) -> Result<Self> {
        BoolFn::new(r, vec![c; 1 << r])
    }

    /// `f(x) = x_i`.
    pub fn dictator(r: usize, i: usize) -> Result<Self> {
        if i >= r {
            return Err(Error::InvalidInput(format!(
                "dictator coordinate {i} >= R = {r}"
            )));
        }
        BoolFn::new(r, (0..1usize << r).map(|p| coord(p, i) as f64).collect())
    }

    /// Uniform values in `[-1, 1]`.
    pub fn random(r: usize, rng: &mut rng::Rng) -> Result<Self> {
        BoolFn::new(
            r,
            (0..1usize << r)
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect(),
        )
    }

    pub fn arity(&self) -> usize {
        self.r
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `E_x |f(x)|`.
    pub fn l1(&self) -> f64 {
        self.table.iter().map(|v| v.abs()).sum::<f64>() / self.table.len() as f64
    }

    /// `E_x f(x)^2`.
    pub fn l2_sq(&self) -> f64 {
        self.table.iter().map(|v| v * v).sum::<f64>() / self.table.len() as f64
    }
}

/// `x_i` at table index `p`.
#[inline]
pub fn coord(p: usize, i: usize) -> i8 {
    if p >> i & 1 == 1 {
        -1
    } else {
        1
    }
}

fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for blk in (0..v.len()).step_by(2 * h) {
            for k in blk..blk + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `f^(S) = E_x[chi_S(x) f(x)]`, indexed by the bitmask of `S`.
pub fn fourier(f: &BoolFn) -> Vec<f64> {
    let mut v = f.table.clone();
    walsh_hadamard(&mut v);
    let scale = 1.0 / v.len() as f64;
    v.iter_mut().for_each(|c| *c *= scale);
    v
}

/// Table of `sum_S c_S chi_S`.
pub fn inverse_fourier(coeffs: &[f64]) -> Vec<f64> {
    let mut v = coeffs.to_vec();
    walsh_hadamard(&mut v);
    v
}

/// Degree-one coefficients `f^({i})`, `i = 0..R`.
pub fn linear_coefficients(f: &BoolFn) -> Vec<f64> {
    let c = fourier(f);
    (0..f.r).map(|i| c[1 << i]).collect()
}

/// `||f^{!=1}||_2^2 = sum_{|S| != 1} f^(S)^2`.
pub fn nonlinear_weight(f: &BoolFn) -> f64 {
    fourier(f)
        .iter()
        .enumerate()
        .filter(|(s, _)| s.count_ones() != 1)
        .map(|(_, c)| c * c)
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallBallReport {
    /// `delta = ||f||_1`.
    pub delta: f64,
    pub l2_sq: f64,
    pub nonlinear_sq: f64,
    pub antecedent: bool,
    pub holds: bool,
}

/// Checks `||f||_2^2 > (10^4 + 1) delta^2  =>  ||f^{!=1}||_2^2 >= delta^2`.
pub fn check_smallball(f: &BoolFn) -> SmallBallReport {
    let delta = f.l1();
    let l2_sq = f.l2_sq();
    let nonlinear_sq = nonlinear_weight(f);
    let antecedent = l2_sq > (1e4 + 1.0) * delta * delta;
    SmallBallReport {
        delta,
        l2_sq,
        nonlinear_sq,
        antecedent,
        holds: !antecedent || nonlinear_sq >= delta * delta,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearL1Report {
    pub sum: f64,
    pub holds: bool,
}

/// `sum_i |f^({i})| <= 2`.
pub fn check_linear_l1(f: &BoolFn) -> LinearL1Report {
    let sum: f64 = linear_coefficients(f).iter().map(|c| c.abs()).sum();
    LinearL1Report {
        sum,
        holds: sum <= 2.0,
    }
}

// ---------------------------------------------------------------------------
// k-AND

/// Literal `(variable, sign)`; satisfied when `x_variable == sign`.
pub type Literal = (usize, i8);

#[derive(Clone, Debug, PartialEq)]
pub struct KAndInstance {
    n: usize,
    k: usize,
    clauses: Vec<Vec<Literal>>,
    /// Clauses made fully satisfied by the planted assignment, if any.
    pub planted: Option<(Vec<i8>, Vec<usize>)>,
}

impl KAndInstance {
    pub fn new(n: usize, k: usize, clauses: Vec<Vec<Literal>>) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidInput(format!(
                "k = {k} must lie in [1, n = {n}]"
            )));
        }
        for (c, cl) in clauses.iter().enumerate() {
            if cl.len() != k {
                return Err(Error::Validation(format!(
                    "clause {c} has {} literals, expected {k}",
                    cl.len()
                )));
            }
            let mut vars: Vec<usize> = cl.iter().map(|l| l.0).collect();
            vars.sort_unstable();
            vars.dedup();
            if vars.len() != k || vars.last().is_some_and(|&v| v >= n) {
                return Err(Error::Validation(format!(
                    "clause {c}: variables must be distinct and < n"
                )));
            }
            if cl.iter().any(|l| l.1 != 1 && l.1 != -1) {
                return Err(Error::Validation(format!("clause {c}: signs must be ±1")));
            }
        }
        Ok(KAndInstance {
            n,
            k,
            clauses,
            planted: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    /// Number of satisfied literals of each clause under `x in {-1,1}^n`.
    pub fn satisfied_counts(&self, x: &[i8]) -> Vec<usize> {
        self.clauses
            .iter()
            .map(|cl| cl.iter().filter(|&&(v, s)| x[v] == s).count())
            .collect()
    }

    /// `sum_{clause j, literal (i, s)} s f_i g_j`: the signed incidence form.
    pub fn signed_form(&self, f: &[i8], g: &[i8]) -> i64 {
        self.clauses
            .iter()
            .zip(g)
            .map(|(cl, &gj)| cl.iter().map(|&(v, s)| (s * f[v]) as i64).sum::<i64>() * gj as i64)
            .sum()
    }

    /// `theta(f, g) = sum a_ij f_i g_j / (alpha mu_f + mu_g)` with
    /// `a = ±1/m`, `mu_f = ||f||_1 / n`, `mu_g = ||g||_1 / m`.
    pub fn theta(&self, alpha: f64, f: &[i8], g: &[i8]) -> Result<f64> {
        if f.len() != self.n || g.len() != self.m() {
            return Err(Error::Dimension {
                expected: self.n + self.m(),
                got: f.len() + g.len(),
            });
        }
        let m = self.m() as f64;
        let num = self.signed_form(f, g) as f64 / m;
        let mu_f = f.iter().filter(|&&v| v != 0).count() as f64 / self.n as f64;
        let mu_g = g.iter().filter(|&&v| v != 0).count() as f64 / m;
        let den = alpha * mu_f + mu_g;
        Ok(if den == 0.0 { 0.0 } else { num / den })
    }

    /// The natural completeness pair: `f` the planted assignment and `g` the
    /// indicator of the planted clauses.
    pub fn planted_pair(&self) -> Option<(Vec<i8>, Vec<i8>)> {
        let (x, idx) = self.planted.as_ref()?;
        let mut g = vec![0i8; self.m()];
        idx.iter().for_each(|&j| g[j] = 1);
        Some((x.clone(), g))
    }

    pub fn to_json(&self) -> String {
        let f = KAndFile {
            kind: "kand".into(),
            n: self.n,
            k: self.k,
            clauses: self.clauses.clone(),
            planted: self.planted.as_ref().map(|(x, idx)| PlantedFile {
                x: x.clone(),
                clauses: idx.clone(),
            }),
        };
        let mut s = serde_json::to_string(&f).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: KAndFile = serde_json::from_str(text)?;
        if f.kind != "kand" {
            return Err(Error::InvalidInput(format!(
                "expected kind \"kand\", got {:?}",
                f.kind
            )));
        }
        let mut inst = KAndInstance::new(f.n, f.k, f.clauses)?;
        if let Some(p) = f.planted {
            if p.x.len() != f.n || p.x.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::Validation(
                    "planted assignment must be a ±1 vector of length n".into(),
                ));
            }
            if p.clauses.iter().any(|&j| j >= inst.m()) {
                return Err(Error::Validation(
                    "planted clause index out of range".into(),
                ));
            }
            inst.planted = Some((p.x, p.clauses));
        }
        Ok(inst)
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct KAndFile {
    kind: String,
    n: usize,
    k: usize,
    clauses: Vec<Vec<Literal>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    planted: Option<PlantedFile>,
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantedFile {
    x: Vec<i8>,
    clauses: Vec<usize>,
}

/// Random k-AND formula. With `planted = Some((x, alpha))`, `round(alpha m)`
/// clauses chosen at random copy their literal signs from `x`.
pub fn gen_kand(
    n: usize,
    m: usize,
    k: usize,
    planted: Option<(&[i8], f64)>,
    seed: u64,
) -> Result<KAndInstance> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "k = {k} must lie in [1, n = {n}]"
        )));
    }
    let mut r = rng::stream(seed, rng::streams::KAND);
    let mut chosen = vec![false; m];
    let mut planted_idx = Vec::new();
    if let Some((x, alpha)) = planted {
        if x.len() != n || x.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidInput(
                "planted assignment must be in {-1,1}^n".into(),
            ));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!(
                "alpha = {alpha} outside [0, 1]"
            )));
        }
        let count = (alpha * m as f64).round() as usize;
        let mut order: Vec<usize> = (0..m).collect();
        for t in 0..count {
            let u = r.gen_range(t..m);
            order.swap(t, u);
        }
        planted_idx = order[..count].to_vec();
        planted_idx.sort_unstable();
        planted_idx.iter().for_each(|&j| chosen[j] = true);
    }
    let mut clauses = Vec::with_capacity(m);
    let mut pool: Vec<usize> = (0..n).collect();
    for &is_planted in &chosen {
        for t in 0..k {
            let u = r.gen_range(t..n);
            pool.swap(t, u);
        }
        let cl: Vec<Literal> = pool[..k]
            .iter()
            .map(|&v| {
                let coin = if r.gen::<bool>() { 1 } else { -1 };
                let s = match planted {
                    Some((x, _)) if is_planted => x[v],
                    _ => coin,
                };
                (v, s)
            })
            .collect();
        clauses.push(cl);
    }
    let mut inst = KAndInstance::new(n, k, clauses)?;
    if let Some((x, _)) = planted {
        inst.planted = Some((x.to_vec(), planted_idx));
    }
    Ok(inst)
}

/// Planted formula whose hidden assignment is drawn from the generator
/// stream of `seed`.
pub fn gen_planted_kand(
    n: usize,
    m: usize,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<KAndInstance> {
    let mut r = rng::stream(seed, rng::streams::GENERATOR);
    let x: Vec<i8> = (0..n)
        .map(|_| if r.gen::<bool>() { 1 } else { -1 })
        .collect();
    gen_kand(n, m, k, Some((&x, alpha)), seed)
}

/// Copy structure of the k-AND image: copy `c` of variable `v` sits at
/// `c n + v`, clause `j` at `w n + j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KAndMapping {
    pub n: usize,
    pub m: usize,
    pub w: usize,
}

impl KAndMapping {
    pub fn variable(&self, copy: usize, v: usize) -> usize {
        copy * self.n + v
    }

    pub fn clause(&self, j: usize) -> usize {
        self.w * self.n + j
    }

    /// Image assignment with every copy of the variables set to `f`.
    pub fn replicate(&self, f: &[i8], g: &[i8]) -> Result<Assignment> {
        let mut x = Vec::with_capacity(self.w * self.n + self.m);
        for _ in 0..self.w {
            x.extend_from_slice(f);
        }
        x.extend_from_slice(g);
        Assignment::new(x)
    }

    /// `(mu_f, mu_g)` of an image assignment: the average support fraction
    /// over variable copies, and the clause support fraction.
    pub fn mu(&self, a: &Assignment) -> (f64, f64) {
        let x = a.values();
        let left = x[..self.w * self.n].iter().filter(|&&v| v != 0).count() as f64;
        let right = x[self.w * self.n..].iter().filter(|&&v| v != 0).count() as f64;
        (left / (self.w * self.n) as f64, right / self.m as f64)
    }
}

/// Default replication count `max(1, round(alpha m / n))`, the integer for
/// which the image's unweighted denominator reproduces `alpha mu_f + mu_g`
/// up to a common factor.
pub fn default_replication(inst: &KAndInstance, alpha: f64) -> usize {
    ((alpha * inst.m() as f64 / inst.n() as f64).round() as usize).max(1)
}

/// Bipartite QP-Ratio image of a k-AND formula: `w` copies of the variable
/// side, each joined to every clause containing it with weight `sign / 2`
/// (so a literal contributes `±1` to the full-sum numerator).
///
/// For replicated assignments the image value is
/// `w * f^T S g / (w ||f||_1 + ||g||_1)`, which is `w * theta` when
/// `w = alpha m / n`; the image optimum is `w` times the weighted optimum
/// `max f^T S g / (w ||f||_1 + ||g||_1)`.
pub fn kand_to_qpratio(
    inst: &KAndInstance,
    alpha: f64,
    w: Option<usize>,
    max_vertices: usize,
) -> Result<(QpRatioInstance, KAndMapping)> {
    let w = w.unwrap_or_else(|| default_replication(inst, alpha));
    if w == 0 {
        return Err(Error::InvalidInput("replication count must be >= 1".into()));
    }
    let map = KAndMapping {
        n: inst.n(),
        m: inst.m(),
        w,
    };
    let size = w * inst.n() + inst.m();
    if size > max_vertices {
        return Err(Error::OverBudget {
            what: "k-AND image (vertices)".into(),
            requested: size as u128,
            cap: max_vertices as u128,
        });
    }
    let mut entries = Vec::new();
    for (j, cl) in inst.clauses().iter().enumerate() {
        for &(v, s) in cl {
            for c in 0..w {
                entries.push(Entry {
                    i: map.variable(c, v),
                    j: map.clause(j),
                    w: s as f64 / 2.0,
                });
            }
        }
    }
    let meta = Meta::family("kand")
        .param("n", inst.n())
        .param("m", inst.m())
        .param("k", inst.k())
        .param("alpha", alpha)
        .param("w", w);
    let inst_out = QpRatioInstance::new(size, entries)?
        .with_bipartition((0..w * inst.n()).collect(), (w * inst.n()..size).collect())?
        .with_meta(meta);
    Ok((inst_out, map))
}

/// Exact `max f^T S g / (w ||f||_1 + ||g||_1)` over `f in {-1,0,1}^n`,
/// `g in {-1,0,1}^m`, multiplied by `w` so it is directly comparable with
/// the image optimum.
pub fn brute_force_weighted_kand(inst: &KAndInstance, w: usize, cap: usize) -> Result<f64> {
    let (n, m) = (inst.n(), inst.m());
    if n + m > cap {
        return Err(Error::OverBudget {
            what: "weighted k-AND enumeration (n + m)".into(),
            requested: (n + m) as u128,
            cap: cap as u128,
        });
    }
    let total = 3usize.pow((n + m) as u32);
    let mut best = 0.0f64;
    let mut x = vec![0i8; n + m];
    for c in 0..total {
        let mut t = c;
        for v in x.iter_mut() {
            *v = (t % 3) as i8 - 1;
            t /= 3;
        }
        let (f, g) = x.split_at(n);
        let num = inst.signed_form(f, g);
        let den = w * f.iter().filter(|&&v| v != 0).count() + g.iter().filter(|&&v| v != 0).count();
        if den > 0 {
            // w * num / den with integer operands: a single correctly rounded division.
            let v = (w as i64 * num) as f64 / den as f64;
            best = best.max(v);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub threshold: f64,
    /// Max over `x in {-1,1}^n` of the fraction of clauses with more than
    /// `threshold` satisfied literals.
    pub max_fraction: f64,
    /// Max fraction of fully satisfied clauses.
    pub max_full_fraction: f64,
    pub argmax: Vec<i8>,
}

pub const KAND_CONCENTRATION_CAP: usize = 16;

/// Exhaustive check over all `2^n` total assignments. The default threshold
/// is `k/2 + k^{7/8}`.
pub fn check_kand_concentration(
    inst: &KAndInstance,
    cap: usize,
    threshold: Option<f64>,
) -> Result<ConcentrationReport> {
    let n = inst.n();
    if n > cap {
        return Err(Error::OverBudget {
            what: "k-AND concentration enumeration (n)".into(),
            requested: n as u128,
            cap: cap as u128,
        });
    }
    let k = inst.k() as f64;
    let threshold = threshold.unwrap_or(k / 2.0 + k.powf(7.0 / 8.0));
    let m = inst.m().max(1) as f64;
    let mut best = (0usize, 0usize, vec![1i8; n]);
    let mut x = vec![1i8; n];
    for p in 0..1usize << n {
        for (i, v) in x.iter_mut().enumerate() {
            *v = coord(p, i);
        }
        let counts = inst.satisfied_counts(&x);
        let above = counts.iter().filter(|&&c| c as f64 > threshold).count();
        let full = counts.iter().filter(|&&c| c == inst.k()).count();
        if above > best.0 || p == 0 {
            best.0 = above;
            best.2.clone_from(&x);
        }
        best.1 = best.1.max(full);
    }
    Ok(ConcentrationReport {
        threshold,
        max_fraction: best.0 as f64 / m,
        max_full_fraction: best.1 as f64 / m,
        argmax: best.2,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionReport {
    pub exhaustive: bool,
    /// Variable subsets `T` examined.
    pub subsets: u64,
    pub t_max: usize,
    pub s_factor: f64,
    /// Worst `|E(S,T)| / |S|` over admissible nonempty `S`; 0 if none.
    pub worst_ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

pub const EXPANSION_CAP: u128 = 1 << 20;

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k as u128 {
        r = r * (n as u128 - i) / (i + 1);
    }
    r
}

/// Checks `|E(S,T)| <= sqrt(k) |S|` for variable sets `|T| <= t_max` and
/// clause sets `|S| <= s_factor |T|` (defaults `n alpha / 400` and `alpha`).
///
/// For fixed `T` the worst admissible `S` is the single clause with the most
/// variables in `T` (an average never exceeds its largest term), so only `T`
/// is enumerated: exhaustively when the subset count is within `cap`,
/// otherwise by `samples` seeded draws.
pub fn check_expansion(
    inst: &KAndInstance,
    alpha: f64,
    limits: Option<(usize, f64)>,
    cap: u128,
    samples: usize,
    seed: u64,
) -> ExpansionReport {
    let n = inst.n();
    let (t_max, s_factor) = limits.unwrap_or(((n as f64 * alpha / 400.0).floor() as usize, alpha));
    let t_max = t_max.min(n);
    let mut incid: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, cl) in inst.clauses().iter().enumerate() {
        for &(v, _) in cl {
            incid[v].push(j);
        }
    }
    let mut worst = 0.0f64;
    let mut count = 0u64;
    let mut hits = vec![0usize; inst.m()];
    let mut eval = |t: &[usize], worst: &mut f64| {
        if t.is_empty() || (s_factor * t.len() as f64).floor() < 1.0 {
            return;
        }
        for &v in t {
            for &j in &incid[v] {
                hits[j] += 1;
            }
        }
        let top = t
            .iter()
            .flat_map(|&v| incid[v].iter())
            .map(|&j| hits[j])
            .max()
            .unwrap_or(0);
        *worst = worst.max(top as f64);
        for &v in t {
            for &j in &incid[v] {
                hits[j] = 0;
            }
        }
    };
    let total: u128 = (0..=t_max).map(|t| binom(n, t)).sum();
    let exhaustive = total <= cap;
    if exhaustive {
        for size in 1..=t_max {
            let mut t: Vec<usize> = (0..size).collect();
            loop {
                eval(&t, &mut worst);
                count += 1;
                // Next combination in lexicographic order.
                let mut p = size;
                while p > 0 && t[p - 1] == n - size + p - 1 {
                    p -= 1;
                }
                if p == 0 {
                    break;
                }
                t[p - 1] += 1;
                for q in p..size {
                    t[q] = t[q - 1] + 1;
                }
            }
        }
    } else if t_max > 0 {
        let mut r = rng::stream(seed, rng::streams::SWEEP);
        let mut pool: Vec<usize> = (0..n).collect();
        for _ in 0..samples {
            let size = r.gen_range(1..=t_max);
            for q in 0..size {
                let u = r.gen_range(q..n);
                pool.swap(q, u);
            }
            let mut t = pool[..size].to_vec();
            t.sort_unstable();
            eval(&t, &mut worst);
            count += 1;
        }
    }
    let bound = (inst.k() as f64).sqrt();
    ExpansionReport {
        exhaustive,
        subsets: count,
        t_max,
        s_factor,
        worst_ratio: worst,
        bound,
        holds: worst <= bound,
    }
}

// ---------------------------------------------------------------------------
// Ratio Unique Games

#[derive(Clone, Debug, PartialEq)]
pub struct UgEdge {
    pub u: usize,
    pub v: usize,
    /// `pi[l]` is the label of `v` that label `l` of `u` maps to.
    pub pi: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UgInstance {
    vertices: usize,
    r: usize,
    edges: Vec<UgEdge>,
    degree: usize,
}

impl UgInstance {
    /// Validates permutations and regularity of the constraint graph.
    pub fn new(vertices: usize, r: usize, edges: Vec<UgEdge>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidInput("alphabet size must be >= 1".into()));
        }
        let mut deg = vec![0usize; vertices];
        for (k, e) in edges.iter().enumerate() {
            if e.u >= vertices || e.v >= vertices || e.u == e.v {
                return Err(Error::Validation(format!(
                    "edge {k}: bad endpoints ({}, {})",
                    e.u, e.v
                )));
            }
            let mut seen = vec![false; r];
            if e.pi.len() != r
                || e.pi
                    .iter()
                    .any(|&l| l >= r || std::mem::replace(&mut seen[l], true))
            {
                return Err(Error::Validation(format!(
                    "edge {k}: not a permutation of [{r}]"
                )));
            }
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        let degree = deg.first().copied().unwrap_or(0);
        if deg.iter().any(|&d| d != degree) {
            return Err(Error::Validation("constraint graph is not regular".into()));
        }
        Ok(UgInstance {
            vertices,
            r,
            edges,
            degree,
        })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn alphabet(&self) -> usize {
        self.r
    }

    pub fn edges(&self) -> &[UgEdge] {
        &self.edges
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn to_json(&self) -> String {
        let f = UgFile {
            kind: "ug".into(),
            vertices: self.vertices,
            r: self.r,
            edges: self
                .edges
                .iter()
                .map(|e| (e.u, e.v, e.pi.clone()))
                .collect(),
        };
        let mut s = serde_json::to_string(&f).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: UgFile = serde_json::from_str(text)?;
        if f.kind != "ug" {
            return Err(Error::InvalidInput(format!(
                "expected kind \"ug\", got {:?}",
                f.kind
            )));
        }
        UgInstance::new(
            f.vertices,
            f.r,
            f.edges
                .into_iter()
                .map(|(u, v, pi)| UgEdge { u, v, pi })
                .collect(),
        )
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct UgFile {
    kind: String,
    vertices: usize,
    #[serde(rename = "R")]
    r: usize,
    edges: Vec<(usize, usize, Vec<usize>)>,
}

/// `L : V -> [R] ∪ {⊥}` with `None` for ⊥.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialLabeling {
    labels: Vec<Option<usize>>,
}

impl PartialLabeling {
    pub fn new(labels: Vec<Option<usize>>, r: usize) -> Result<Self> {
        if labels.iter().flatten().any(|&l| l >= r) {
            return Err(Error::InvalidInput(format!("label out of range [0, {r})")));
        }
        Ok(PartialLabeling { labels })
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }
}

/// Satisfied edges over labeled vertices; 0 when nothing is labeled.
pub fn eval_ratio_ug(ug: &UgInstance, l: &PartialLabeling) -> Result<f64> {
    if l.labels.len() != ug.vertices {
        return Err(Error::Dimension {
            expected: ug.vertices,
            got: l.labels.len(),
        });
    }
    let labeled = l.labels.iter().filter(|x| x.is_some()).count();
    if labeled == 0 {
        return Ok(0.0);
    }
    let sat = ug
        .edges
        .iter()
        .filter(|e| matches!((l.labels[e.u], l.labels[e.v]), (Some(a), Some(b)) if e.pi[a] == b))
        .count();
    Ok(sat as f64 / labeled as f64)
}

pub const UG_MAX_R: usize = 8;

/// Parameters of the UG reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UgReduction {
    pub vertices: usize,
    pub r: usize,
    /// `10^6 |V|^7 2^{4R}`.
    pub eta: f64,
    /// Variables `|V| 2^R`; the matrix is `N` times the quadratic form so
    /// that `sum |x|` is the QP-Intermediate denominator.
    pub n_vars: usize,
}

pub fn ug_eta(vertices: usize, r: usize) -> f64 {
    1e6 * (vertices as f64).powi(7) * 2f64.powi(4 * r as i32)
}

/// Expands `E_{(u,v)} T_uv - eta E_u L(u)` over the table values
/// `f_u(x)` (variable `u 2^R + x`) into a QP-Intermediate matrix, with
///
/// - `T_uv = 2^{-2R} sum_{x,y} f_u(x) f_v(y) sum_i x_i y_{pi(i)}`,
/// - `L(u) = sum_{x,y} f_u(x) f_u(y) (2^{-R} [x = y] - 2^{-2R} <x, y>)`,
///
/// averaged uniformly over edges and vertices, then scaled by `N = |V| 2^R`
/// so the denominator `E_u ||f_u||_1 = sum |x| / N` becomes `sum |x|`.
pub fn ug_to_intermediate(
    ug: &UgInstance,
    max_r: usize,
) -> Result<(QpIntermediateInstance, UgReduction)> {
    let r = ug.alphabet();
    if r > max_r {
        return Err(Error::OverBudget {
            what: "UG reduction alphabet (R)".into(),
            requested: r as u128,
            cap: max_r as u128,
        });
    }
    let nv = ug.vertices();
    let size = 1usize << r;
    let n_vars = nv * size;
    let eta = ug_eta(nv, r);
    let nf = n_vars as f64;
    let inv2r = 1.0 / size as f64;
    let inv4r = inv2r * inv2r;
    let mut off: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut diag = vec![0.0; n_vars];

    let pen = eta / nv as f64 * nf;
    for u in 0..nv {
        for x in 0..size {
            let ix = u * size + x;
            let inner_xx = r as f64;
            diag[ix] -= pen * (inv2r - inv4r * inner_xx);
            for y in (x + 1)..size {
                let ip: i64 = (0..r).map(|i| (coord(x, i) * coord(y, i)) as i64).sum();
                if ip != 0 {
                    // The symmetric pair (x, y), (y, x) is one stored entry.
                    *off.entry((ix, u * size + y)).or_default() += pen * inv4r * ip as f64;
                }
            }
        }
    }
    if !ug.edges().is_empty() {
        let per_edge = nf / ug.edges().len() as f64 * inv4r;
        for e in ug.edges() {
            for x in 0..size {
                for y in 0..size {
                    let s: i64 = (0..r)
                        .map(|i| (coord(x, i) * coord(y, e.pi[i])) as i64)
                        .sum();
                    if s != 0 {
                        let (a, b) = (e.u * size + x, e.v * size + y);
                        // Bilinear term c f_a f_b is c/2 on each of a_ab, a_ba.
                        *off.entry((a.min(b), a.max(b))).or_default() += per_edge * s as f64 / 2.0;
                    }
                }
            }
        }
    }
    let entries = off
        .into_iter()
        .filter(|&(_, w)| w != 0.0)
        .map(|((i, j), w)| Entry { i, j, w })
        .collect();
    let meta = Meta::family("ug")
        .param("vertices", nv)
        .param("R", r)
        .param("eta", eta)
        .param(
            "scale",
            "matrix = |V| 2^R x (E_e T_uv - eta E_u L(u)); denominator sum |x|",
        );
    let inst = QpIntermediateInstance::new(n_vars, entries, diag)?.with_meta(meta);
    Ok((
        inst,
        UgReduction {
            vertices: nv,
            r,
            eta,
            n_vars,
        },
    ))
}

/// Reduction objective of a profile `{f_u}` computed from Fourier
/// coefficients, with its components kept apart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UgComponents {
    /// `E_{(u,v)} T_uv`.
    pub edge_term: f64,
    /// `E_u L(u)`, before multiplying by `eta`.
    pub penalty_term: f64,
    pub eta: f64,
    /// `E_u ||f_u||_1`.
    pub denominator: f64,
    pub ratio: f64,
}

pub fn ug_components(ug: &UgInstance, profile: &[BoolFn]) -> Result<UgComponents> {
    if profile.len() != ug.vertices() {
        return Err(Error::Dimension {
            expected: ug.vertices(),
            got: profile.len(),
        });
    }
    if profile.iter().any(|f| f.arity() != ug.alphabet()) {
        return Err(Error::InvalidInput("profile arity differs from R".into()));
    }
    let coeffs: Vec<Vec<f64>> = profile.iter().map(fourier).collect();
    let mut edge = NeumaierSum::default();
    for e in ug.edges() {
        for i in 0..ug.alphabet() {
            edge.add(coeffs[e.u][1 << i] * coeffs[e.v][1 << e.pi[i]]);
        }
    }
    let ne = ug.edges().len().max(1) as f64;
    let mut pen = NeumaierSum::default();
    for c in &coeffs {
        for (s, v) in c.iter().enumerate() {
            if s.count_ones() != 1 {
                pen.add(v * v);
            }
        }
    }
    let nv = ug.vertices() as f64;
    let eta = ug_eta(ug.vertices(), ug.alphabet());
    let edge_term = edge.total() / ne;
    let penalty_term = pen.total() / nv;
    let denominator = profile.iter().map(|f| f.l1()).sum::<f64>() / nv;
    let numerator = edge_term - eta * penalty_term;
    Ok(UgComponents {
        edge_term,
        penalty_term,
        eta,
        denominator,
        ratio: if denominator == 0.0 {
            0.0
        } else {
            numerator / denominator
        },
    })
}

/// Dictator `x_{L(u)}` on labeled vertices, zero on ⊥.
pub fn dictator_profile(ug: &UgInstance, l: &PartialLabeling) -> Result<Vec<BoolFn>> {
    l.labels()
        .iter()
        .map(|lab| match lab {
            Some(i) => BoolFn::dictator(ug.alphabet(), *i),
            None => Ok(BoolFn::zero(ug.alphabet())),
        })
        .collect()
}

/// Concatenated tables: the QP-Intermediate point of a profile.
pub fn profile_vector(profile: &[BoolFn]) -> Vec<f64> {
    profile
        .iter()
        .flat_map(|f| f.table().iter().copied())
        .collect()
}

// ---------------------------------------------------------------------------
// QP-Intermediate to QP-Ratio

/// Copies per variable: `floor(max(2 ||A||_1 / eps, 2n)) + 1`.
pub fn intermediate_copies(inst: &QpIntermediateInstance, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let bound = (2.0 * inst.l1_norm() / eps).max(2.0 * inst.n() as f64);
    Ok(bound.floor() as usize + 1)
}

/// Splits variable `i` into `m` copies (`i m + c`) with `x_i` their average;
/// the expanded form over the copies is scaled by `1/m` and its square terms
/// are dropped, leaving a zero-diagonal QP-Ratio instance whose optimum is
/// within `eps` of the QP-Intermediate optimum.
pub fn intermediate_to_qpratio(
    inst: &QpIntermediateInstance,
    eps: f64,
    max_vertices: usize,
) -> Result<(QpRatioInstance, usize)> {
    let m = intermediate_copies(inst, eps)?;
    let n = inst.n();
    let size = n.saturating_mul(m);
    if size > max_vertices {
        return Err(Error::OverBudget {
            what: format!("QP-Intermediate image at eps = {eps} (vertices)"),
            requested: size as u128,
            cap: max_vertices as u128,
        });
    }
    let mf = m as f64;
    let mut entries = Vec::new();
    for (i, &d) in inst.diag().iter().enumerate() {
        if d != 0.0 {
            for c in 0..m {
                for c2 in (c + 1)..m {
                    entries.push(Entry {
                        i: i * m + c,
                        j: i * m + c2,
                        w: d / mf,
                    });
                }
            }
        }
    }
    for e in inst.entries() {
        if e.w != 0.0 {
            for c in 0..m {
                for c2 in 0..m {
                    entries.push(Entry {
                        i: e.i * m + c,
                        j: e.j * m + c2,
                        w: e.w / mf,
                    });
                }
            }
        }
    }
    let meta = Meta::family("intermediate")
        .param("eps", eps)
        .param("copies", m);
    Ok((QpRatioInstance::new(size, entries)?.with_meta(meta), m))
}

// ---------------------------------------------------------------------------
// Three-vector relaxation

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CspEmbeddingReport {
    /// Largest violation over all listed constraints.
    pub max_violation: f64,
    pub objective_vector: f64,
    pub objective_csp: f64,
    pub holds: bool,
}

/// Builds `a_i, b_i, c_i in R^{n+d+1}` from a vector solution and checks the
/// three-vector constraints and objective preservation.
pub fn embed_basic_sdp_to_csp(
    inst: &QpRatioInstance,
    sol: &GramSolution,
    tol: f64,
) -> Result<CspEmbeddingReport> {
    let n = sol.vectors.len();
    if n != inst.n() {
        return Err(Error::Dimension {
            expected: inst.n(),
            got: n,
        });
    }
    let d = sol.dim;
    let s = sol.sq_norms();
    if let Some(i) = s.iter().position(|&v| v > 1.0) {
        return Err(Error::InvalidInput(format!("|w_{i}|^2 = {} > 1", s[i])));
    }
    let dim = n + d + 1;
    let mut a = vec![vec![0.0; dim]; n];
    let mut b = vec![vec![0.0; dim]; n];
    let mut c = vec![vec![0.0; dim]; n];
    for i in 0..n {
        a[i][i] = (1.0 - s[i]).max(0.0).sqrt();
        let len = s[i].sqrt();
        for k in 0..d {
            b[i][n + k] = sol.vectors[i][k] / 2.0;
            c[i][n + k] = -sol.vectors[i][k] / 2.0;
        }
        b[i][n + d] = len / 2.0;
        c[i][n + d] = len / 2.0;
    }
    let ip = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
    let mut worst = 0.0f64;
    let mut total = NeumaierSum::default();
    for i in 0..n {
        total.add(ip(&b[i], &b[i]) + ip(&c[i], &c[i]));
        worst = worst.max((ip(&a[i], &a[i]) + ip(&b[i], &b[i]) + ip(&c[i], &c[i]) - 1.0).abs());
        worst = worst.max(ip(&a[i], &b[i]).abs());
        worst = worst.max(ip(&b[i], &c[i]).abs());
        worst = worst.max(ip(&a[i], &c[i]).abs());
        for j in 0..n {
            for v in [
                ip(&a[i], &b[j]),
                ip(&b[i], &c[j]),
                ip(&a[i], &c[j]),
                ip(&a[i], &a[j]),
                ip(&b[i], &b[j]),
                ip(&c[i], &c[j]),
            ] {
                worst = worst.max(-v);
            }
        }
    }
    worst = worst.max((total.total() - 1.0).abs());
    let diff: Vec<Vec<f64>> = (0..n)
        .map(|i| b[i].iter().zip(&c[i]).map(|(p, q)| p - q).collect())
        .collect();
    let mut obj = NeumaierSum::default();
    for e in inst.entries() {
        obj.add(2.0 * e.w * ip(&diff[e.i], &diff[e.j]));
    }
    let objective_csp = obj.total();
    Ok(CspEmbeddingReport {
        max_violation: worst,
        objective_vector: sol.objective,
        objective_csp,
        holds: worst <= tol && objective_csp == sol.objective,
    })
}
