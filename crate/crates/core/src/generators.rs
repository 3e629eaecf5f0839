//! Seeded instance families: the star, the bipartite integrality-gap
//! instance with its explicit vector solution, the planted distribution, the
//! weighted level graph for the gain ratio, and the 5-cycle Max-Cut gadget.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::{Assignment, Entry, Meta, QpRatioInstance, RatioValue};
use crate::rng;
use crate::sdp::GramSolution;

/// Star with center 0 and unit edges to `1..=leaves`.
pub fn gen_star(leaves: usize) -> Result<QpRatioInstance> {
    if leaves == 0 {
        return Err(Error::InvalidInput("star needs at least one leaf".into()));
    }
    let inst = QpRatioInstance::from_triples(leaves + 1, (1..=leaves).map(|i| (0, i, 1.0)))?;
    Ok(inst.with_meta(Meta::family("star").param("leaves", leaves)))
}

/// Each pair present with probability `density`, weight uniform in `[-1, 1]`.
pub fn gen_random(n: usize, density: f64, seed: u64) -> Result<QpRatioInstance> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidInput(format!(
            "density {density} outside [0, 1]"
        )));
    }
    let mut r = rng::stream(seed, rng::streams::GENERATOR);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let keep = r.gen::<f64>() < density;
            let w = r.gen_range(-1.0..=1.0);
            if keep && w != 0.0 {
                entries.push(Entry { i, j, w });
            }
        }
    }
    let meta = Meta::family("random")
        .with_seed(seed)
        .param("n", n)
        .param("density", density);
    Ok(QpRatioInstance::new(n, entries)?.with_meta(meta))
}

fn perfect_sqrt(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

/// Complete bipartite graph between `L` (size `sqrt(n)`, indices first) and
/// `R` (size `n`), with i.i.d. uniform `±1` weights.
pub fn gen_bipartite_gap(n: usize, seed: u64) -> Result<QpRatioInstance> {
    let s = perfect_sqrt(n)
        .filter(|&s| s >= 2)
        .ok_or_else(|| Error::InvalidInput(format!("n = {n} must be a perfect square >= 4")))?;
    let mut r = rng::stream(seed, rng::streams::GENERATOR);
    let mut entries = Vec::with_capacity(s * n);
    for i in 0..s {
        for j in 0..n {
            let w = if r.gen::<bool>() { 1.0 } else { -1.0 };
            entries.push(Entry { i, j: s + j, w });
        }
    }
    let meta = Meta::family("bipartite-gap").with_seed(seed).param("n", n);
    QpRatioInstance::new(s + n, entries)?
        .with_bipartition((0..s).collect(), (s..s + n).collect())
        .map(|i| i.with_meta(meta))
}

/// The explicit vector solution for the gap instance: orthogonal `v_i` with
/// `|v_i|^2 = 1/(2 sqrt(n))` on `L`, and `w_j = sum_i B_ij v_i / sqrt(n)` on `R`.
pub fn gen_gap_sdp_certificate(inst: &QpRatioInstance) -> Result<GramSolution> {
    let bad = || Error::InvalidInput("instance is not a complete ±1 bipartite gap instance".into());
    let bp = inst.bipartition().ok_or_else(bad)?;
    let (s, n) = (bp.left.len(), bp.right.len());
    if perfect_sqrt(n) != Some(s) || inst.entries().len() != s * n {
        return Err(bad());
    }
    let lpos: std::collections::HashMap<usize, usize> =
        bp.left.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut b = vec![vec![0.0; n]; s];
    let rpos: std::collections::HashMap<usize, usize> =
        bp.right.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    for e in inst.entries() {
        if e.w.abs() != 1.0 {
            return Err(bad());
        }
        let (l, r) = match (
            lpos.get(&e.i),
            rpos.get(&e.j),
            lpos.get(&e.j),
            rpos.get(&e.i),
        ) {
            (Some(&l), Some(&r), _, _) | (_, _, Some(&l), Some(&r)) => (l, r),
            _ => return Err(bad()),
        };
        b[l][r] = e.w;
    }
    let sqrt_n = (n as f64).sqrt();
    let v_len = (1.0 / (2.0 * sqrt_n)).sqrt();
    let mut vectors = vec![vec![0.0; s]; inst.n()];
    for (l, &v) in bp.left.iter().enumerate() {
        vectors[v][l] = v_len;
    }
    for (r, &v) in bp.right.iter().enumerate() {
        for l in 0..s {
            vectors[v][l] = b[l][r] * v_len / sqrt_n;
        }
    }
    GramSolution::new(inst, vectors)
}

#[derive(Clone, Debug)]
pub struct PlantedParams {
    pub n: usize,
    pub r: Option<usize>,
    pub p: Option<f64>,
    pub planted_size: Option<usize>,
    /// Exponent used for the default edge probability `n^{delta - 1}`.
    pub delta: f64,
    pub seed: u64,
}

impl PlantedParams {
    pub fn new(n: usize, seed: u64) -> Self {
        PlantedParams {
            n,
            r: None,
            p: None,
            planted_size: None,
            delta: 0.1,
            seed,
        }
    }

    fn two_thirds(&self) -> usize {
        ((self.n as f64).powf(2.0 / 3.0).round() as usize).clamp(1, self.n.max(1))
    }

    pub fn right_size(&self) -> usize {
        self.r.unwrap_or_else(|| self.two_thirds())
    }

    pub fn edge_prob(&self) -> f64 {
        self.p
            .unwrap_or_else(|| (self.n as f64).powf(self.delta - 1.0).min(1.0))
    }

    pub fn planted(&self) -> usize {
        self.planted_size.unwrap_or_else(|| self.two_thirds())
    }
}

/// Random bipartite graph `V_L` (size n) x `V_R` (size r) with a hidden
/// consistent sign pattern on `P_L x V_R`; other edges get independent signs.
/// Returns the instance and the planted assignment.
pub fn gen_planted(params: &PlantedParams) -> Result<(QpRatioInstance, Assignment)> {
    let n = params.n;
    let r = params.right_size();
    let p = params.edge_prob();
    let k = params.planted();
    if n == 0 || r == 0 || r > n || k > n || !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "planted params out of range: n = {n}, r = {r}, planted = {k}, p = {p}"
        )));
    }
    let mut rg = rng::stream(params.seed, rng::streams::GENERATOR);
    // Partial Fisher-Yates for the planted subset.
    let mut order: Vec<usize> = (0..n).collect();
    for t in 0..k {
        let u = rg.gen_range(t..n);
        order.swap(t, u);
    }
    let mut rho = vec![0i8; n + r];
    for &i in &order[..k] {
        rho[i] = if rg.gen::<bool>() { 1 } else { -1 };
    }
    for j in 0..r {
        rho[n + j] = if rg.gen::<bool>() { 1 } else { -1 };
    }
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..r {
            let present = rg.gen::<f64>() < p;
            let coin = if rg.gen::<bool>() { 1.0 } else { -1.0 };
            if present {
                let w = if rho[i] != 0 {
                    (rho[i] * rho[n + j]) as f64
                } else {
                    coin
                };
                entries.push(Entry { i, j: n + j, w });
            }
        }
    }
    let meta = Meta::family("planted")
        .with_seed(params.seed)
        .param("n", n)
        .param("r", r)
        .param("p", p)
        .param("planted_size", k);
    let inst = QpRatioInstance::new(n + r, entries)?
        .with_bipartition((0..n).collect(), (n..n + r).collect())?
        .with_meta(meta);
    Ok((inst, Assignment::new(rho)?))
}

/// Expected value of the planted assignment: `2 k r p / (k + r)`.
pub fn planted_expected_value(params: &PlantedParams) -> f64 {
    let (k, r, p) = (
        params.planted() as f64,
        params.right_size() as f64,
        params.edge_prob(),
    );
    2.0 * k * r * p / (k + r)
}

/// Level graph parameters: `M = round(1/eps)` levels' growth factor,
/// `m = round(2/eps)` levels, level `i` (1-based) holds `N_0 M^i` vertices.
#[derive(Clone, Copy, Debug)]
pub struct LevelGraphParams {
    pub eps: f64,
    pub base_count: usize,
}

pub const LEVEL_GRAPH_MAX_ENTRIES: u128 = 5_000_000;

impl LevelGraphParams {
    pub fn new(eps: f64) -> Result<Self> {
        let p = LevelGraphParams { eps, base_count: 1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 0.5) || self.base_count == 0 {
            return Err(Error::InvalidInput(format!(
                "level graph: eps = {} must lie in (0, 1/2], N0 = {} >= 1",
                self.eps, self.base_count
            )));
        }
        Ok(())
    }

    pub fn big_m(&self) -> usize {
        (1.0 / self.eps).round() as usize
    }

    pub fn levels(&self) -> usize {
        (2.0 / self.eps).round() as usize
    }

    pub fn level_sizes(&self) -> Vec<u128> {
        let m = self.big_m() as u128;
        (1..=self.levels() as u32)
            .map(|i| self.base_count as u128 * m.pow(i))
            .collect()
    }

    pub fn vertex_count(&self) -> u128 {
        self.level_sizes().iter().sum()
    }

    pub fn entry_count(&self) -> u128 {
        let s = self.level_sizes();
        let clique: u128 = s.iter().map(|&k| k * (k - 1) / 2).sum();
        let cross: u128 = s.windows(2).map(|w| w[0] * w[1]).sum();
        clique + cross
    }

    /// Per-level values of the completeness witness `(-1)^i eps^i`.
    pub fn witness(&self) -> Vec<f64> {
        (1..=self.levels() as i32)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * self.eps.powi(i))
            .collect()
    }
}

/// Weighted level graph with gain-ratio signs: `-1` inside each level,
/// `-(1/2 + eps)` between adjacent levels.
pub fn gen_level_graph(params: &LevelGraphParams, max_entries: u128) -> Result<QpRatioInstance> {
    params.validate()?;
    let count = params.entry_count();
    if count > max_entries {
        return Err(Error::OverBudget {
            what: format!("level graph at eps = {} (entries)", params.eps),
            requested: count,
            cap: max_entries,
        });
    }
    let sizes: Vec<usize> = params.level_sizes().iter().map(|&s| s as usize).collect();
    let mut start = vec![0usize; sizes.len() + 1];
    for (k, s) in sizes.iter().enumerate() {
        start[k + 1] = start[k] + s;
    }
    let cross = -(0.5 + params.eps);
    let mut entries = Vec::with_capacity(count as usize);
    for (l, &s) in sizes.iter().enumerate() {
        let a = start[l];
        for u in a..a + s {
            for v in (u + 1)..a + s {
                entries.push(Entry {
                    i: u,
                    j: v,
                    w: -1.0,
                });
            }
            if l + 1 < sizes.len() {
                for v in start[l + 1]..start[l + 2] {
                    entries.push(Entry {
                        i: u,
                        j: v,
                        w: cross,
                    });
                }
            }
        }
    }
    let meta = Meta::family("level-graph")
        .param("eps", params.eps)
        .param("M", params.big_m())
        .param("m", params.levels())
        .param("N0", params.base_count)
        .param("signs", "gain-ratio: weights are -W(G)");
    Ok(QpRatioInstance::new(start[sizes.len()], entries)?.with_meta(meta))
}

/// Per-vertex vector that is constant (`values[i]`) on each level.
pub fn expand_level_vector(params: &LevelGraphParams, values: &[f64]) -> Vec<f64> {
    params
        .level_sizes()
        .iter()
        .zip(values)
        .flat_map(|(&s, &v)| std::iter::repeat_n(v, s as usize))
        .collect()
}

/// Normalized Rayleigh quotient of a level-constant vector, computed from
/// level sizes alone (no materialised graph).
pub fn level_graph_ratio(params: &LevelGraphParams, values: &[f64]) -> Result<RatioValue> {
    params.validate()?;
    let s: Vec<f64> = params.level_sizes().iter().map(|&v| v as f64).collect();
    if values.len() != s.len() {
        return Err(Error::Dimension {
            expected: s.len(),
            got: values.len(),
        });
    }
    let c = 0.5 + params.eps;
    let m = s.len();
    let mut half = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        let x = values[i];
        half -= s[i] * (s[i] - 1.0) / 2.0 * x * x;
        if i + 1 < m {
            half -= c * s[i] * s[i + 1] * x * values[i + 1];
        }
        let nb = if i > 0 { s[i - 1] } else { 0.0 } + if i + 1 < m { s[i + 1] } else { 0.0 };
        let deg = (s[i] - 1.0) + c * nb;
        den += deg * s[i] * x * x;
    }
    Ok(RatioValue::new(2.0 * half, den))
}

/// Gain ratio of a weight sequence at `eps = 1/M`; returns the
/// ratio and whether it falls below `M^{-sqrt(m)/4}`.
pub fn check_expr1(gammas: &[f64], big_m: usize, m: usize) -> Result<(f64, bool)> {
    if gammas.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: gammas.len(),
        });
    }
    if gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::InvalidInput("gammas must lie in [0, 1]".into()));
    }
    if gammas.iter().all(|&g| g == 0.0) {
        return Err(Error::InvalidInput("gammas are all zero".into()));
    }
    let mf = big_m as f64;
    let eps = 1.0 / mf;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        let p2 = mf.powi(2 * (i as i32 + 1));
        num -= gammas[i] * gammas[i] * p2;
        den += gammas[i] * p2;
        if i + 1 < m {
            num += (1.0 + 2.0 * eps) * gammas[i] * gammas[i + 1] * p2 * mf;
        }
    }
    let ratio = num / den;
    Ok((ratio, ratio < mf.powf(-(m as f64).sqrt() / 4.0)))
}

/// Max-Cut gadget: for every vertex `i` of a `d`-regular graph a 5-cycle
/// `a_i b_i c_i d_i e_i` (indices `i, n+i, ..., 4n+i`) with weights
/// `+D` on ab, bc, cd, de and `-D` on ae (`D = max(d, 1)`); cliques of weight
/// `10d/n` on `A` and on `E`; the graph itself on `C` with weight `-1`, so
/// cut edges contribute positively.
pub fn gen_apx_gadget(n: usize, edges: &[(usize, usize)]) -> Result<QpRatioInstance> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "gadget needs at least one vertex".into(),
        ));
    }
    let mut deg = vec![0usize; n];
    let mut seen = std::collections::BTreeSet::new();
    for &(u, v) in edges {
        if u >= n || v >= n || u == v || !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::InvalidInput(format!("bad graph edge ({u}, {v})")));
        }
        deg[u] += 1;
        deg[v] += 1;
    }
    let d = deg[0];
    if deg.iter().any(|&x| x != d) {
        return Err(Error::InvalidInput("graph is not regular".into()));
    }
    let big_d = d.max(1) as f64;
    let (a, b, c, dd, e) = (0, n, 2 * n, 3 * n, 4 * n);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((a + i, b + i, big_d));
        t.push((b + i, c + i, big_d));
        t.push((c + i, dd + i, big_d));
        t.push((dd + i, e + i, big_d));
        t.push((a + i, e + i, -big_d));
    }
    let clique = 10.0 * d as f64 / n as f64;
    if clique > 0.0 {
        for i in 0..n {
            for j in (i + 1)..n {
                t.push((a + i, a + j, clique));
                t.push((e + i, e + j, clique));
            }
        }
    }
    for &(u, v) in edges {
        t.push((c + u, c + v, -1.0));
    }
    let meta = Meta::family("apx-gadget").param("n", n).param("d", d);
    Ok(QpRatioInstance::from_triples(5 * n, t)?.with_meta(meta))
}

/// The structured gadget solution for a cut `x in {-1,1}^n`: `a = 1`,
/// `e = -1`, `c = x`, and `b = 1, d = 0` when `c = 1`, else `b = 0, d = -1`.
pub fn apx_structured_assignment(cut: &[i8]) -> Result<Assignment> {
    let n = cut.len();
    let mut x = vec![0i8; 5 * n];
    for (i, &ci) in cut.iter().enumerate() {
        if ci != 1 && ci != -1 {
            return Err(Error::InvalidInput("cut entries must be ±1".into()));
        }
        x[i] = 1;
        x[4 * n + i] = -1;
        x[2 * n + i] = ci;
        if ci == 1 {
            x[n + i] = 1;
        } else {
            x[3 * n + i] = -1;
        }
    }
    Assignment::new(x)
}

/// `Delta` in the half-sum numerator `(Delta + theta) n d` of the structured
/// solution, where `theta` is the cut size over `nd/2`: `12.5 - 10/n`.
pub fn apx_delta(n: usize) -> f64 {
    12.5 - 10.0 / n as f64
}

/// Cycle graph `C_n` (2-regular), used as the default gadget input.
pub fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => vec![],
        2 => vec![(0, 1)],
        _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}
