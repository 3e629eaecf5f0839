//! Benchmark grid: families × sizes × seeds × algorithms, each row scored
//! against the exact optimum when it is cheap and the eigenvalue bound
//! otherwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exact::{brute_force_normalized, brute_force_qp_ratio};
use crate::generators::{
    cycle_edges, gen_apx_gadget, gen_bipartite_gap, gen_level_graph, gen_planted, gen_random,
    gen_star, LevelGraphParams, PlantedParams, LEVEL_GRAPH_MAX_ENTRIES,
};
use crate::hardness::{gen_planted_kand, kand_to_qpratio};
use crate::model::{trivial_solution, Assignment, QpRatioInstance, RatioValue};
use crate::rounding::{solve_bipartite, solve_general};
use crate::spectral::{
    eig_relaxation_value, normalized_eig_value, psd_shift, solve_high_opt, solve_psd,
    solve_trevisan,
};

pub const CSV_HEADER: [&str; 12] = [
    "instance_id",
    "family",
    "n",
    "seed",
    "algo",
    "value",
    "bound",
    "bound_kind",
    "ratio",
    "support",
    "runtime_ms",
    "status",
];

pub const FAMILIES: [&str; 7] = [
    "star",
    "bipartite-gap",
    "planted",
    "random",
    "apx-gadget",
    "level-graph",
    "kand",
];

/// Largest instance the bench will build.
pub const BENCH_MAX_VERTICES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algo {
    Trivial,
    General,
    Bipartite,
    Trevisan,
    /// Uniform diagonal shift; `None` uses the smallest PSD shift.
    Psd(Option<f64>),
    HighOpt(f64),
}

impl Algo {
    /// Scored against the degree-normalized objective.
    pub fn normalized(&self) -> bool {
        matches!(self, Algo::Trevisan)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Trivial => "trivial",
            Algo::General => "general",
            Algo::Bipartite => "bipartite",
            Algo::Trevisan => "trevisan",
            Algo::Psd(_) => "psd",
            Algo::HighOpt(_) => "high-opt",
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "trivial" => Algo::Trivial,
            "general" => Algo::General,
            "bipartite" => Algo::Bipartite,
            "trevisan" => Algo::Trevisan,
            "psd" => Algo::Psd(None),
            "high-opt" => Algo::HighOpt(0.5),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown algorithm {s:?} (expected trivial, general, bipartite, trevisan, psd, high-opt)"
                )))
            }
        })
    }
}

/// Runs one algorithm. Values are exact re-evaluations of the returned
/// assignment under the algorithm's objective.
pub fn run_algo(inst: &QpRatioInstance, algo: Algo, seed: u64) -> Result<(Assignment, RatioValue)> {
    match algo {
        Algo::Trivial => Ok(trivial_solution(inst)),
        Algo::General => solve_general(inst, seed).map(|r| (r.assignment, r.value)),
        Algo::Bipartite => solve_bipartite(inst, seed).map(|r| (r.assignment, r.value)),
        Algo::Trevisan => solve_trevisan(inst),
        Algo::Psd(shift) => {
            let s = match shift {
                Some(s) => s,
                // A little slack so the eigenvalue test does not trip on rounding.
                None => psd_shift(inst)? * (1.0 + 1e-9) + 1e-12,
            };
            solve_psd(inst, &vec![s; inst.n()]).map(|r| (r.assignment, r.value))
        }
        Algo::HighOpt(eps) => solve_high_opt(inst, eps).map(|r| (r.assignment, r.value)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Oracle,
    Eig,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Oracle => "oracle",
            BoundKind::Eig => "eig",
        }
    }
}

/// Exact optimum for `n <= cap`, otherwise the matching eigenvalue bound.
pub fn bound_for(inst: &QpRatioInstance, normalized: bool, cap: usize) -> Result<(f64, BoundKind)> {
    if inst.n() <= cap {
        let v = if normalized {
            brute_force_normalized(inst, cap)?.1.value
        } else {
            brute_force_qp_ratio(inst, cap)?.1.value
        };
        Ok((v, BoundKind::Oracle))
    } else if normalized {
        Ok((normalized_eig_value(inst)?, BoundKind::Eig))
    } else {
        Ok((eig_relaxation_value(inst)?, BoundKind::Eig))
    }
}

/// Builds a family member. `size` is the family's natural size parameter:
/// leaves for `star`, `|R|` for `bipartite-gap`, `|V_L|` for `planted`,
/// `n` for `random`, `apx-gadget` (the MaxCut graph is the `n`-cycle) and
/// `kand` (variables), and `M = 1/eps` for `level-graph`.
pub fn build_family(family: &str, size: usize, seed: u64) -> Result<QpRatioInstance> {
    let inst = match family {
        "star" => gen_star(size)?,
        "bipartite-gap" => gen_bipartite_gap(size, seed)?,
        "planted" => gen_planted(&PlantedParams::new(size, seed))?.0,
        "random" => gen_random(size, 0.5, seed)?,
        "apx-gadget" => gen_apx_gadget(size, &cycle_edges(size))?,
        "level-graph" => {
            if size < 2 {
                return Err(Error::InvalidInput(
                    "level-graph size is M = 1/eps >= 2".into(),
                ));
            }
            gen_level_graph(
                &LevelGraphParams::new(1.0 / size as f64)?,
                LEVEL_GRAPH_MAX_ENTRIES,
            )?
        }
        "kand" => {
            let kand = gen_planted_kand(size, 4 * size, 3.min(size.max(1)), 0.25, seed)?;
            kand_to_qpratio(&kand, 0.25, None, BENCH_MAX_VERTICES)?.0
        }
        _ => {
            return Err(Error::InvalidInput(format!(
                "unknown family {family:?} (expected one of {})",
                FAMILIES.join(", ")
            )))
        }
    };
    if inst.n() > BENCH_MAX_VERTICES {
        return Err(Error::OverBudget {
            what: format!("{family} instance (vertices)"),
            requested: inst.n() as u128,
            cap: BENCH_MAX_VERTICES as u128,
        });
    }
    Ok(inst)
}

fn default_cap() -> usize {
    10
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub kind: String,
    #[serde(default = "default_cap")]
    pub oracle_cap: usize,
    pub runs: Vec<BenchRun>,
    /// Wall-clock timing breaks byte-identical reruns, so it is opt-in.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchRun {
    pub family: String,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algos: Vec<String>,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: BenchConfig = serde_json::from_str(text)?;
        if c.kind != "bench" {
            return Err(Error::InvalidInput(format!(
                "expected kind \"bench\", got {:?}",
                c.kind
            )));
        }
        for r in &c.runs {
            if !FAMILIES.contains(&r.family.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "unknown family {:?}",
                    r.family
                )));
            }
            for a in &r.algos {
                Algo::from_str(a)?;
            }
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub instance_id: String,
    pub family: String,
    pub n: Option<usize>,
    pub seed: u64,
    pub algo: String,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub bound_kind: Option<BoundKind>,
    pub ratio: Option<f64>,
    pub support: Option<usize>,
    pub runtime_ms: u128,
    pub status: String,
}

pub fn status_of(e: &Error) -> &'static str {
    match e {
        Error::OverBudget { .. } => "over-budget",
        Error::InvalidInput(_) | Error::Validation(_) | Error::Dimension { .. } => "invalid-input",
        Error::NoConvergence { .. } => "no-convergence",
        Error::Parse { .. } => "parse-error",
    }
}

pub fn instance_id(family: &str, size: usize, seed: u64) -> String {
    format!("{family}-n{size}-s{seed}")
}

/// `value / bound`, undefined for a nonpositive bound.
pub fn ratio_of(value: f64, bound: f64) -> Option<f64> {
    (bound > 0.0).then(|| value / bound)
}

/// Scores one solved row: value, bound and ratio.
pub fn score(
    inst: &QpRatioInstance,
    algo: Algo,
    seed: u64,
    cap: usize,
) -> Result<(Assignment, RatioValue, f64, BoundKind)> {
    let (a, v) = run_algo(inst, algo, seed)?;
    let (b, kind) = bound_for(inst, algo.normalized(), cap)?;
    Ok((a, v, b, kind))
}

fn run_cell(cfg: &BenchConfig, family: &str, size: usize, seed: u64, algo: &str) -> BenchRow {
    let mut row = BenchRow {
        instance_id: instance_id(family, size, seed),
        family: family.to_string(),
        n: None,
        seed,
        algo: algo.to_string(),
        value: None,
        bound: None,
        bound_kind: None,
        ratio: None,
        support: None,
        runtime_ms: 0,
        status: "ok".into(),
    };
    let inst = match build_family(family, size, seed) {
        Ok(i) => i,
        Err(e) => {
            row.status = status_of(&e).into();
            return row;
        }
    };
    row.n = Some(inst.n());
    let alg = Algo::from_str(algo).expect("validated with the config");
    let start = Instant::now();
    match score(&inst, alg, seed, cfg.oracle_cap) {
        Ok((a, v, b, kind)) => {
            row.value = Some(v.value);
            row.bound = Some(b);
            row.bound_kind = Some(kind);
            row.ratio = ratio_of(v.value, b);
            row.support = Some(a.support());
        }
        Err(e) => row.status = status_of(&e).into(),
    }
    if cfg.timing {
        row.runtime_ms = start.elapsed().as_millis();
    }
    row
}

/// Runs the whole grid; rows are sorted by `(instance_id, algo)`.
pub fn run_bench(cfg: &BenchConfig) -> Vec<BenchRow> {
    let mut cells = Vec::new();
    for r in &cfg.runs {
        for &size in &r.sizes {
            for &seed in &r.seeds {
                for algo in &r.algos {
                    cells.push((r.family.as_str(), size, seed, algo.as_str()));
                }
            }
        }
    }
    #[cfg(feature = "parallel")]
    let mut rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|&(f, s, e, a)| run_cell(cfg, f, s, e, a))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let mut rows: Vec<BenchRow> = cells
        .iter()
        .map(|&(f, s, e, a)| run_cell(cfg, f, s, e, a))
        .collect();
    rows.sort_by(|a, b| (&a.instance_id, &a.algo).cmp(&(&b.instance_id, &b.algo)));
    rows
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| x.to_string())
}

impl BenchRow {
    pub fn record(&self) -> [String; 12] {
        [
            self.instance_id.clone(),
            self.family.clone(),
            opt(&self.n),
            self.seed.to_string(),
            self.algo.clone(),
            opt(&self.value),
            opt(&self.bound),
            self.bound_kind
                .map_or(String::new(), |k| k.as_str().to_string()),
            opt(&self.ratio),
            opt(&self.support),
            self.runtime_ms.to_string(),
            self.status.clone(),
        ]
    }
}

pub fn rows_to_csv(rows: &[BenchRow], header: bool) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    if header {
        w.write_record(CSV_HEADER).map_err(io)?;
    }
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Mean ratio against `n`, one polyline per algorithm.
pub fn rows_to_svg(rows: &[BenchRow]) -> String {
    let mut series: BTreeMap<&str, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        if let (Some(n), Some(q)) = (r.n, r.ratio) {
            let e = series
                .entry(r.algo.as_str())
                .or_default()
                .entry(n)
                .or_insert((0.0, 0));
            e.0 += q;
            e.1 += 1;
        }
    }
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let ns: Vec<usize> = series.values().flat_map(|s| s.keys().copied()).collect();
    let (nmin, nmax) = (
        ns.iter().copied().min().unwrap_or(1) as f64,
        ns.iter().copied().max().unwrap_or(1) as f64,
    );
    let ymax = series
        .values()
        .flat_map(|s| s.values().map(|(t, c)| t / *c as f64))
        .fold(1.0f64, f64::max);
    let sx = |n: f64| {
        if nmax > nmin {
            pad + (n.ln() - nmin.ln()) / (nmax.ln() - nmin.ln()) * (w - 2.0 * pad)
        } else {
            w / 2.0
        }
    };
    let sy = |y: f64| h - pad - y / ymax * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{y0} H{x1}" fill="none" stroke="black"/>"#,
        y0 = h - pad,
        x1 = w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">n (log scale)</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">mean value / bound</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (t, y) in [(0.0, 0.0), (ymax / 2.0, ymax / 2.0), (ymax, ymax)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{t:.2}</text>"#,
            pad - 4.0,
            sy(y) + 4.0
        );
    }
    for n in [nmin, nmax] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{n}</text>"#,
            sx(n),
            h - pad + 16.0
        );
    }
    for (k, (algo, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(&n, &(t, c))| format!("{:.1},{:.1}", sx(n as f64), sy(t / c as f64)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for p in &path {
            let (x, y) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = pad + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{algo}</text>"#,
            w - pad - 80.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"{"kind":"bench","oracle_cap":10,"runs":[
        {"family":"star","sizes":[3,5],"seeds":[0],"algos":["general","trevisan"]},
        {"family":"random","sizes":[6],"seeds":[1,2],"algos":["general","trivial","bipartite"]}]}"#;

    #[test]
    fn smoke_grid() {
        let cfg = BenchConfig::from_json(SMOKE).unwrap();
        let rows = run_bench(&cfg);
        assert_eq!(rows.len(), 4 + 6);
        let csv = rows_to_csv(&rows, true).unwrap();
        assert!(csv.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(csv.lines().count(), 11);
        for r in &rows {
            if r.bound_kind == Some(BoundKind::Oracle) {
                assert!(r.ratio.unwrap_or(0.0) <= 1.0 + 1e-9, "{r:?}");
            }
        }
        // Random instances carry no bipartition.
        assert!(rows
            .iter()
            .filter(|r| r.algo == "bipartite")
            .all(|r| r.status == "invalid-input"));
        assert_eq!(rows_to_csv(&run_bench(&cfg), true).unwrap(), csv);
        assert!(rows_to_svg(&rows).contains("<polyline"));
    }

    #[test]
    fn config_errors() {
        assert!(BenchConfig::from_json(
            r#"{"kind":"bench","runs":[{"family":"nope","sizes":[],"seeds":[],"algos":[]}]}"#
        )
        .is_err());
        assert!(BenchConfig::from_json(
            r#"{"kind":"bench","runs":[{"family":"star","sizes":[],"seeds":[],"algos":["x"]}]}"#
        )
        .is_err());
        assert!(BenchConfig::from_json(r#"{"kind":"gram","runs":[]}"#).is_err());
    }

    #[test]
    fn every_family_builds() {
        for (f, s) in [
            ("star", 4),
            ("bipartite-gap", 4),
            ("planted", 27),
            ("random", 6),
            ("apx-gadget", 5),
            ("level-graph", 2),
            ("kand", 6),
        ] {
            let inst = build_family(f, s, 3).unwrap();
            assert!(inst.n() > 0, "{f}");
        }
    }
}
