use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use qpratio::bench::{rows_to_csv, rows_to_svg, run_bench, score, Algo, BenchConfig, BenchRow};
use qpratio::exact::{
    brute_force_normalized, brute_force_qp_ratio, brute_force_ratio_ug, grid_search_intermediate,
    UG_BUDGET,
};
use qpratio::generators::{
    cycle_edges, gen_apx_gadget, gen_bipartite_gap, gen_level_graph, gen_planted, gen_random,
    gen_star, LevelGraphParams, PlantedParams, LEVEL_GRAPH_MAX_ENTRIES,
};
use qpratio::hardness::{
    gen_kand, gen_planted_kand, intermediate_to_qpratio, kand_to_qpratio, ug_to_intermediate,
    KAndInstance, UgInstance,
};
use qpratio::sdp::{sdp_feasibility, sdp_solve, SdpOptions};
use qpratio::spectral::{eig_relaxation_value, normalized_eig_value};
use qpratio::{
    trivial_solution, AnyInstance, GramSolution, Meta, QpIntermediateInstance, QpRatioInstance,
};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{
    BenchArgs, CertifyArgs, ExactArgs, Family, GenArgs, Method, ReduceArgs, RelaxArgs, SolveArgs,
    Source,
};

pub enum CliError {
    Usage(String),
    Lib(qpratio::Error),
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(qpratio::Error::NoConvergence { .. }) => 1,
            CliError::Lib(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<qpratio::Error> for CliError {
    fn from(e: qpratio::Error) -> Self {
        CliError::Lib(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Sizes the global rayon pool from `QPRL_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("QPRL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        usage(format!(
            "QPRL_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_json(v: &Value) {
    println!(
        "{}",
        serde_json::to_string(v).expect("json value serializes")
    );
}

fn kind_of(text: &str) -> Result<String> {
    let v: Value = serde_json::from_str(text).map_err(qpratio::Error::from)?;
    v.get("kind")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| usage("input has no \"kind\" field"))
}

fn load_qp(path: &Path) -> Result<QpRatioInstance> {
    Ok(QpRatioInstance::from_json(&read(path)?)?)
}

fn need<T>(v: Option<T>, flag: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("gen {family} needs --{flag}")))
}

fn parse_edges(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p
                .split_once('-')
                .ok_or_else(|| usage(format!("edge {p:?} is not of the form u-v")))?;
            let a = a
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad vertex in {p:?}")))?;
            let b = b
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad vertex in {p:?}")))?;
            Ok((a, b))
        })
        .collect()
}

pub fn gen(a: GenArgs) -> Result<()> {
    let text = match a.family {
        Family::Star => {
            let leaves = a.leaves.or(a.n);
            gen_star(need(leaves, "leaves", "star")?)?.to_json()
        }
        Family::Random => gen_random(need(a.n, "n", "random")?, a.density, a.seed)?.to_json(),
        Family::BipartiteGap => {
            gen_bipartite_gap(need(a.n, "n", "bipartite-gap")?, a.seed)?.to_json()
        }
        Family::Planted => gen_planted(&PlantedParams::new(need(a.n, "n", "planted")?, a.seed))?
            .0
            .to_json(),
        Family::LevelGraph => {
            let p = LevelGraphParams::new(need(a.eps, "eps", "level-graph")?)?;
            gen_level_graph(&p, LEVEL_GRAPH_MAX_ENTRIES)?.to_json()
        }
        Family::ApxGadget => {
            let n = need(a.n, "n", "apx-gadget")?;
            let edges = match &a.edges {
                Some(s) => parse_edges(s)?,
                None => cycle_edges(n),
            };
            gen_apx_gadget(n, &edges)?.to_json()
        }
        Family::Kand => {
            let n = need(a.n, "n", "kand")?;
            let m = a.m.unwrap_or(4 * n);
            if a.alpha > 0.0 {
                gen_planted_kand(n, m, a.k, a.alpha, a.seed)?.to_json()
            } else {
                gen_kand(n, m, a.k, None, a.seed)?.to_json()
            }
        }
    };
    write_out(a.out.as_deref(), &text)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

pub fn solve(a: SolveArgs) -> Result<()> {
    let inst = load_qp(&a.instance)?;
    let mut algo = Algo::from_str(&a.algo)?;
    match (&mut algo, a.psd_shift, a.eps) {
        (Algo::Psd(s), shift, None) => *s = shift,
        (Algo::HighOpt(e), None, eps) => *e = eps.unwrap_or(*e),
        (_, None, None) => {}
        _ => {
            return Err(usage(
                "--psd-shift applies to psd and --eps to high-opt only",
            ))
        }
    }
    let start = Instant::now();
    let (assignment, value, bound, kind) = score(&inst, algo, a.seed, a.oracle_cap)?;
    let row = BenchRow {
        instance_id: stem(&a.instance),
        family: inst.family().unwrap_or("").to_string(),
        n: Some(inst.n()),
        seed: a.seed,
        algo: algo.name().to_string(),
        value: Some(value.value),
        bound: Some(bound),
        bound_kind: Some(kind),
        ratio: qpratio::bench::ratio_of(value.value, bound),
        support: Some(assignment.support()),
        runtime_ms: if a.timing {
            start.elapsed().as_millis()
        } else {
            0
        },
        status: "ok".into(),
    };
    let line = rows_to_csv(std::slice::from_ref(&row), false)?;
    print!("{line}");
    if a.show_assignment {
        eprintln!("{}", json!({ "assignment": assignment.values() }));
    }
    if let Some(path) = &a.csv {
        append_row(path, &row)?;
    }
    Ok(())
}

fn append_row(path: &PathBuf, row: &BenchRow) -> Result<()> {
    let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
    let text = rows_to_csv(std::slice::from_ref(row), fresh)?;
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

pub fn exact(a: ExactArgs) -> Result<()> {
    let text = read(&a.instance)?;
    let out = match kind_of(&text)?.as_str() {
        "ug" => {
            let ug = UgInstance::from_json(&text)?;
            let (l, v) = brute_force_ratio_ug(&ug, UG_BUDGET)?;
            json!({ "kind": "ug", "value": v, "labels": l.labels() })
        }
        _ => match AnyInstance::from_json(&text)? {
            AnyInstance::QpRatio(inst) => {
                let (x, v) = if a.normalized {
                    brute_force_normalized(&inst, a.cap)?
                } else {
                    brute_force_qp_ratio(&inst, a.cap)?
                };
                json!({
                    "kind": "qp_ratio",
                    "objective": if a.normalized { "normalized" } else { "ratio" },
                    "value": v.value,
                    "numerator": v.numerator,
                    "denominator": v.denominator,
                    "assignment": x.values(),
                })
            }
            AnyInstance::QpIntermediate(inst) => {
                if a.normalized {
                    return Err(usage("--normalized applies to qp_ratio instances only"));
                }
                let (x, v) = grid_search_intermediate(&inst, a.eps, a.cap)?;
                json!({
                    "kind": "qp_intermediate",
                    "eps": a.eps,
                    "value": v.value,
                    "numerator": v.numerator,
                    "denominator": v.denominator,
                    "assignment": x.values(),
                })
            }
        },
    };
    print_json(&out);
    Ok(())
}

pub fn relax(a: RelaxArgs) -> Result<()> {
    let inst = load_qp(&a.instance)?;
    if a.gram_out.is_some() && !matches!(a.method, Method::Sdp) {
        return Err(usage("--gram-out needs --method sdp"));
    }
    let out = match a.method {
        Method::Eig => json!({ "method": "eig", "value": eig_relaxation_value(&inst)? }),
        Method::NormalizedEig => {
            json!({ "method": "normalized-eig", "value": normalized_eig_value(&inst)? })
        }
        Method::Sdp => {
            let opts = SdpOptions {
                rank: a.rank,
                tol: a.tol,
                seed: a.seed,
                restarts: a.restarts,
                ..SdpOptions::default()
            };
            let sol = sdp_solve(&inst, &opts, &[trivial_solution(&inst).0])?;
            if let Some(p) = &a.gram_out {
                write_out(Some(p), &sol.to_json())?;
            }
            json!({
                "method": "sdp",
                "value": sol.objective,
                "dim": sol.dim,
                "residual_norm1": sol.residual_norm1,
                "residual_pair": sol.residual_pair,
                "feasible": sdp_feasibility(&sol, a.tol).feasible,
            })
        }
    };
    print_json(&out);
    Ok(())
}

fn with_source(meta: Option<&Meta>, source: &str, bytes: &str) -> Meta {
    let hash = format!("{:x}", Sha256::digest(bytes.as_bytes()));
    meta.cloned()
        .unwrap_or_default()
        .param("source_kind", source)
        .param("source_sha256", hash)
}

pub fn reduce(a: ReduceArgs) -> Result<()> {
    let text = read(&a.input)?;
    let out = match a.from {
        Source::Kand => {
            let src = KAndInstance::from_json(&text)?;
            let (inst, _) = kand_to_qpratio(&src, a.alpha, a.w, a.max_vertices)?;
            let meta = with_source(inst.meta(), "kand", &text);
            inst.with_meta(meta).to_json()
        }
        Source::Ug => {
            let src = UgInstance::from_json(&text)?;
            let (inst, _) = ug_to_intermediate(&src, a.max_r)?;
            let meta = with_source(inst.meta(), "ug", &text);
            inst.with_meta(meta).to_json()
        }
        Source::Intermediate => {
            let src = QpIntermediateInstance::from_json(&text)?;
            let (inst, _) = intermediate_to_qpratio(&src, a.eps, a.max_vertices)?;
            let meta = with_source(inst.meta(), "qp_intermediate", &text);
            inst.with_meta(meta).to_json()
        }
    };
    write_out(a.out.as_deref(), &out)
}

pub fn certify(a: CertifyArgs) -> Result<()> {
    let inst = load_qp(&a.instance)?;
    let sol = GramSolution::from_json(&inst, &read(&a.gram)?)?;
    let f = sdp_feasibility(&sol, a.tol);
    print_json(&json!({
        "feasible": f.feasible,
        "objective": sol.objective,
        "residual_norm1": f.residual_norm1,
        "residual_pair": f.residual_pair,
        "tol": a.tol,
    }));
    if f.feasible {
        Ok(())
    } else {
        Err(CliError::Lib(qpratio::Error::Validation(format!(
            "Gram solution violates the constraints beyond tol {:e}",
            a.tol
        ))))
    }
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let cfg = BenchConfig::from_json(&read(&a.config)?)?;
    let rows = run_bench(&cfg);
    write_out(a.csv.as_deref(), &rows_to_csv(&rows, true)?)?;
    if let Some(p) = &a.svg {
        write_out(Some(p), &rows_to_svg(&rows))?;
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!(
            "qprl: {failed} of {} rows did not finish with status ok",
            rows.len()
        );
    }
    Ok(())
}
