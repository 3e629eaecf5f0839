//! Instance and assignment data model, objective evaluation and the JSON
//! instance format.
//!
//! Every objective uses the full symmetric sum: a stored entry `(i, j, w)`
//! with `i < j` stands for `a_ij = a_ji = w`, so it contributes `2 w x_i x_j`
//! to a numerator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// One off-diagonal weight, stored with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Provenance carried alongside an instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
}

impl Meta {
    pub fn family(name: &str) -> Self {
        Meta {
            family: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self.rng = Some(crate::rng::RNG_NAME.to_string());
        self
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// A QP-Ratio instance: symmetric weights with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct QpRatioInstance {
    n: usize,
    entries: Vec<Entry>,
    bipartition: Option<Bipartition>,
    pub meta: Option<Meta>,
}

fn check_entries(n: usize, entries: &mut [Entry]) -> Result<()> {
    for (k, e) in entries.iter().enumerate() {
        if e.i >= n || e.j >= n {
            return Err(Error::Validation(format!(
                "entry {k}: index ({}, {}) out of range for n = {n}",
                e.i, e.j
            )));
        }
        if e.i == e.j {
            return Err(Error::Validation(format!(
                "entry {k}: diagonal entry ({}, {}) not allowed",
                e.i, e.j
            )));
        }
        if e.i > e.j {
            return Err(Error::Validation(format!(
                "entry {k}: expected i < j, got ({}, {})",
                e.i, e.j
            )));
        }
        if !e.w.is_finite() {
            return Err(Error::Validation(format!(
                "entry {k}: weight is not finite"
            )));
        }
    }
    entries.sort_by_key(|a| (a.i, a.j));
    for pair in entries.windows(2) {
        if pair[0].i == pair[1].i && pair[0].j == pair[1].j {
            return Err(Error::Validation(format!(
                "duplicate entry ({}, {})",
                pair[0].i, pair[0].j
            )));
        }
    }
    Ok(())
}

impl QpRatioInstance {
    /// Builds an instance from entries that already satisfy `i < j`.
    pub fn new(n: usize, entries: Vec<Entry>) -> Result<Self> {
        let mut entries = entries;
        check_entries(n, &mut entries)?;
        Ok(QpRatioInstance {
            n,
            entries,
            bipartition: None,
            meta: None,
        })
    }

    /// Builds an instance from unordered `(i, j, w)` triples.
    pub fn from_triples(
        n: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let entries = triples
            .into_iter()
            .map(|(i, j, w)| Entry {
                i: i.min(j),
                j: i.max(j),
                w,
            })
            .collect();
        Self::new(n, entries)
    }

    pub fn with_bipartition(mut self, left: Vec<usize>, right: Vec<usize>) -> Result<Self> {
        let mut side = vec![0u8; self.n];
        for &v in &left {
            if v >= self.n || side[v] != 0 {
                return Err(Error::Validation(format!(
                    "bipartition: bad left index {v}"
                )));
            }
            side[v] = 1;
        }
        for &v in &right {
            if v >= self.n || side[v] != 0 {
                return Err(Error::Validation(format!(
                    "bipartition: bad right index {v}"
                )));
            }
            side[v] = 2;
        }
        for e in &self.entries {
            if side[e.i] == 0 || side[e.j] == 0 || side[e.i] == side[e.j] {
                return Err(Error::Validation(format!(
                    "bipartition: entry ({}, {}) does not cross the partition",
                    e.i, e.j
                )));
            }
        }
        self.bipartition = Some(Bipartition { left, right });
        Ok(self)
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn bipartition(&self) -> Option<&Bipartition> {
        self.bipartition.as_ref()
    }

    pub fn meta(&self) -> Option<&Meta> {
        self.meta.as_ref()
    }

    pub fn family(&self) -> Option<&str> {
        self.meta.as_ref().and_then(|m| m.family.as_deref())
    }

    /// `d_i = sum_j |a_ij|` over the symmetric completion.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.entries {
            d[e.i] += e.w.abs();
            d[e.j] += e.w.abs();
        }
        d
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.w.abs()))
    }

    pub fn to_dense(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.n);
        for e in &self.entries {
            m.set_sym(e.i, e.j, e.w);
        }
        m
    }

    /// Returns the instance with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> QpRatioInstance {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.w *= c;
        }
        out
    }

    /// Induced sub-instance on `keep` (relabelled `0..keep.len()` in order).
    pub fn induced(&self, keep: &[usize]) -> QpRatioInstance {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &v) in keep.iter().enumerate() {
            pos[v] = k;
        }
        let entries = self
            .entries
            .iter()
            .filter(|e| pos[e.i] != usize::MAX && pos[e.j] != usize::MAX)
            .map(|e| {
                let (a, b) = (pos[e.i], pos[e.j]);
                Entry {
                    i: a.min(b),
                    j: a.max(b),
                    w: e.w,
                }
            })
            .collect();
        let mut sub = QpRatioInstance::new(keep.len(), entries).expect("induced instance is valid");
        if let Some(bp) = &self.bipartition {
            let left = bp
                .left
                .iter()
                .filter(|&&v| pos[v] != usize::MAX)
                .map(|&v| pos[v])
                .collect();
            let right = bp
                .right
                .iter()
                .filter(|&&v| pos[v] != usize::MAX)
                .map(|&v| pos[v])
                .collect();
            sub = sub
                .with_bipartition(left, right)
                .expect("induced bipartition is valid");
        }
        sub
    }

    /// Full-sum quadratic form `sum_{i != j} a_ij x_i x_j` for real `x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = crate::linalg::NeumaierSum::default();
        for e in &self.entries {
            acc.add(2.0 * e.w * x[e.i] * x[e.j]);
        }
        acc.total()
    }
}

/// A vector in `{-1, 0, 1}^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    x: Vec<i8>,
}

impl Assignment {
    pub fn new(x: Vec<i8>) -> Result<Self> {
        if let Some(k) = x.iter().position(|v| !matches!(v, -1..=1)) {
            return Err(Error::InvalidInput(format!(
                "assignment component {k} is {}, expected -1, 0 or 1",
                x[k]
            )));
        }
        Ok(Assignment { x })
    }

    pub fn zeros(n: usize) -> Self {
        Assignment { x: vec![0; n] }
    }

    /// Sign pattern of a real vector; exact zeros stay zero.
    pub fn signs_of(v: &[f64]) -> Self {
        Assignment {
            x: v.iter()
                .map(|&t| {
                    if t > 0.0 {
                        1
                    } else if t < 0.0 {
                        -1
                    } else {
                        0
                    }
                })
                .collect(),
        }
    }

    pub fn values(&self) -> &[i8] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn support(&self) -> usize {
        self.x.iter().filter(|&&v| v != 0).count()
    }

    pub fn negated(&self) -> Self {
        Assignment {
            x: self.x.iter().map(|v| -v).collect(),
        }
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.x.iter().map(|&v| v as f64).collect()
    }
}

/// A vector in `[-1, 1]^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalAssignment {
    x: Vec<f64>,
}

impl FractionalAssignment {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some(k) = x.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!(
                "fractional component {k} = {} outside [-1, 1]",
                x[k]
            )));
        }
        Ok(FractionalAssignment { x })
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }
}

/// A ratio with its parts; the value of a `0 / 0` ratio is 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioValue {
    pub numerator: f64,
    pub denominator: f64,
    pub value: f64,
}

impl RatioValue {
    pub fn new(numerator: f64, denominator: f64) -> Self {
        let value = if denominator == 0.0 {
            0.0
        } else {
            numerator / denominator
        };
        RatioValue {
            numerator,
            denominator,
            value,
        }
    }

    pub fn zero() -> Self {
        RatioValue::new(0.0, 0.0)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// QP-Ratio objective: `sum_{i != j} a_ij x_i x_j / sum_i x_i^2`.
pub fn eval_qp_ratio(inst: &QpRatioInstance, a: &Assignment) -> Result<RatioValue> {
    check_len(inst.n, a.len())?;
    let x = a.values();
    let num: f64 = inst
        .entries
        .iter()
        .map(|e| 2.0 * e.w * (x[e.i] * x[e.j]) as f64)
        .sum();
    Ok(RatioValue::new(num, a.support() as f64))
}

/// Normalized QP-Ratio objective: same numerator over `sum_i d_i x_i^2`.
pub fn eval_normalized_qp_ratio(inst: &QpRatioInstance, a: &Assignment) -> Result<RatioValue> {
    check_len(inst.n, a.len())?;
    let x = a.values();
    let d = inst.degrees();
    let num: f64 = inst
        .entries
        .iter()
        .map(|e| 2.0 * e.w * (x[e.i] * x[e.j]) as f64)
        .sum();
    let den: f64 = x
        .iter()
        .zip(&d)
        .filter(|(v, _)| **v != 0)
        .map(|(_, di)| di)
        .sum();
    Ok(RatioValue::new(num, den))
}

/// Rayleigh quotient `x^T A x / x^T x` for a real vector.
pub fn rayleigh(inst: &QpRatioInstance, x: &[f64]) -> Result<RatioValue> {
    check_len(inst.n, x.len())?;
    let den: f64 = x.iter().map(|v| v * v).sum();
    Ok(RatioValue::new(inst.quadratic_form(x), den))
}

/// Degree-normalized Rayleigh quotient `x^T A x / sum_i d_i x_i^2`.
pub fn rayleigh_normalized(inst: &QpRatioInstance, x: &[f64]) -> Result<RatioValue> {
    check_len(inst.n, x.len())?;
    let d = inst.degrees();
    let mut den = crate::linalg::NeumaierSum::default();
    x.iter().zip(&d).for_each(|(v, di)| den.add(di * v * v));
    Ok(RatioValue::new(inst.quadratic_form(x), den.total()))
}

pub fn degrees(inst: &QpRatioInstance) -> Vec<f64> {
    inst.degrees()
}

/// Best single-edge solution: the two endpoints of a heaviest entry, signed
/// so the edge contributes positively. Its value is `max |a_ij|`.
pub fn trivial_solution(inst: &QpRatioInstance) -> (Assignment, RatioValue) {
    let mut best: Option<&Entry> = None;
    for e in &inst.entries {
        if best.is_none_or(|b| e.w.abs() > b.w.abs()) {
            best = Some(e);
        }
    }
    let mut x = vec![0i8; inst.n];
    if let Some(e) = best {
        if e.w != 0.0 {
            x[e.i] = 1;
            x[e.j] = if e.w > 0.0 { 1 } else { -1 };
        }
    }
    let a = Assignment { x };
    let v = eval_qp_ratio(inst, &a).expect("length matches");
    (a, v)
}

/// QP-Intermediate instance: symmetric matrix with nonpositive diagonal,
/// maximised over `[-1, 1]^n` against `sum_i |x_i|`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpIntermediateInstance {
    n: usize,
    entries: Vec<Entry>,
    diag: Vec<f64>,
    pub meta: Option<Meta>,
}

impl QpIntermediateInstance {
    pub fn new(n: usize, entries: Vec<Entry>, diag: Vec<f64>) -> Result<Self> {
        let mut entries = entries;
        check_entries(n, &mut entries)?;
        check_len(n, diag.len())?;
        for (k, &d) in diag.iter().enumerate() {
            if !d.is_finite() || d > 0.0 {
                return Err(Error::Validation(format!(
                    "diagonal {k} = {d}: must be finite and nonpositive"
                )));
            }
        }
        Ok(QpIntermediateInstance {
            n,
            entries,
            diag,
            meta: None,
        })
    }

    pub fn from_triples(
        n: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
        diag: Vec<f64>,
    ) -> Result<Self> {
        let entries = triples
            .into_iter()
            .map(|(i, j, w)| Entry {
                i: i.min(j),
                j: i.max(j),
                w,
            })
            .collect();
        Self::new(n, entries, diag)
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn meta(&self) -> Option<&Meta> {
        self.meta.as_ref()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `sum_{i,j} |a_ij|` over the full matrix, diagonal included.
    pub fn l1_norm(&self) -> f64 {
        self.diag.iter().map(|d| d.abs()).sum::<f64>()
            + 2.0 * self.entries.iter().map(|e| e.w.abs()).sum::<f64>()
    }

    /// `x^T A x` with compensated summation.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = crate::linalg::NeumaierSum::default();
        for (i, d) in self.diag.iter().enumerate() {
            acc.add(d * x[i] * x[i]);
        }
        for e in &self.entries {
            acc.add(2.0 * e.w * x[e.i] * x[e.j]);
        }
        acc.total()
    }
}

/// QP-Intermediate objective `x^T A x / sum_i |x_i|`.
pub fn eval_qp_intermediate(
    inst: &QpIntermediateInstance,
    x: &FractionalAssignment,
) -> Result<RatioValue> {
    check_len(inst.n, x.values().len())?;
    let den: f64 = x.values().iter().map(|v| v.abs()).sum();
    Ok(RatioValue::new(inst.quadratic_form(x.values()), den))
}

// ---------------------------------------------------------------------------
// JSON instance files

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum InstanceFile {
    QpRatio {
        n: usize,
        entries: Vec<(usize, usize, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bipartition: Option<(Vec<usize>, Vec<usize>)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        meta: Option<Meta>,
    },
    QpIntermediate {
        n: usize,
        entries: Vec<(usize, usize, f64)>,
        diag: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        meta: Option<Meta>,
    },
}

/// Either kind of instance file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyInstance {
    QpRatio(QpRatioInstance),
    QpIntermediate(QpIntermediateInstance),
}

fn to_entries(raw: Vec<(usize, usize, f64)>) -> Vec<Entry> {
    raw.into_iter().map(|(i, j, w)| Entry { i, j, w }).collect()
}

fn from_entries(entries: &[Entry]) -> Vec<(usize, usize, f64)> {
    entries.iter().map(|e| (e.i, e.j, e.w)).collect()
}

impl AnyInstance {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Ok(match file {
            InstanceFile::QpRatio {
                n,
                entries,
                bipartition,
                meta,
            } => {
                let mut inst = QpRatioInstance::new(n, to_entries(entries))?;
                if let Some((l, r)) = bipartition {
                    inst = inst.with_bipartition(l, r)?;
                }
                inst.meta = meta;
                AnyInstance::QpRatio(inst)
            }
            InstanceFile::QpIntermediate {
                n,
                entries,
                diag,
                meta,
            } => {
                let mut inst = QpIntermediateInstance::new(n, to_entries(entries), diag)?;
                inst.meta = meta;
                AnyInstance::QpIntermediate(inst)
            }
        })
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            AnyInstance::QpRatio(inst) => InstanceFile::QpRatio {
                n: inst.n,
                entries: from_entries(&inst.entries),
                bipartition: inst.bipartition.clone().map(|b| (b.left, b.right)),
                meta: inst.meta.clone(),
            },
            AnyInstance::QpIntermediate(inst) => InstanceFile::QpIntermediate {
                n: inst.n,
                entries: from_entries(&inst.entries),
                diag: inst.diag.clone(),
                meta: inst.meta.clone(),
            },
        };
        let mut s = serde_json::to_string(&file).expect("instance serializes");
        s.push('\n');
        s
    }
}

impl QpRatioInstance {
    pub fn to_json(&self) -> String {
        AnyInstance::QpRatio(self.clone()).to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match AnyInstance::from_json(text)? {
            AnyInstance::QpRatio(inst) => Ok(inst),
            AnyInstance::QpIntermediate(_) => Err(Error::InvalidInput(
                "expected a qp_ratio instance, found qp_intermediate".into(),
            )),
        }
    }
}

impl QpIntermediateInstance {
    pub fn to_json(&self) -> String {
        AnyInstance::QpIntermediate(self.clone()).to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match AnyInstance::from_json(text)? {
            AnyInstance::QpIntermediate(inst) => Ok(inst),
            AnyInstance::QpRatio(_) => Err(Error::InvalidInput(
                "expected a qp_intermediate instance, found qp_ratio".into(),
            )),
        }
    }
}
