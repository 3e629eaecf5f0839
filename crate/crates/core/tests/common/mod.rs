//! Shared proptest strategies.

#![allow(dead_code)]

use proptest::prelude::*;
use qpratio::{Assignment, Entry, QpRatioInstance};

/// Random weighted graph on `2..=max_n` vertices; each pair is absent or
/// carries a weight in `[-1, 1]`.
pub fn instance(max_n: usize) -> impl Strategy<Value = QpRatioInstance> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        prop::collection::vec(prop::option::weighted(0.6, -1.0f64..=1.0), pairs).prop_map(
            move |ws| {
                let mut entries = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if let Some(w) = ws[k] {
                            if w != 0.0 {
                                entries.push(Entry { i, j, w });
                            }
                        }
                        k += 1;
                    }
                }
                QpRatioInstance::new(n, entries).expect("valid by construction")
            },
        )
    })
}

pub fn assignment(n: usize) -> impl Strategy<Value = Assignment> {
    prop::collection::vec(-1i8..=1, n)
        .prop_map(|x| Assignment::new(x).expect("entries in {-1, 0, 1}"))
}

pub fn instance_and_assignment(
    max_n: usize,
) -> impl Strategy<Value = (QpRatioInstance, Assignment)> {
    instance(max_n).prop_flat_map(|inst| {
        let n = inst.n();
        (Just(inst), assignment(n))
    })
}

/// Random bipartite instance with sides `0..l` and `l..l+r`.
pub fn bipartite_instance(max_side: usize) -> impl Strategy<Value = QpRatioInstance> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(l, r)| {
        prop::collection::vec(prop::option::weighted(0.7, -1.0f64..=1.0), l * r).prop_map(
            move |ws| {
                let mut entries = Vec::new();
                for i in 0..l {
                    for j in 0..r {
                        if let Some(w) = ws[i * r + j] {
                            if w != 0.0 {
                                entries.push(Entry { i, j: l + j, w });
                            }
                        }
                    }
                }
                QpRatioInstance::new(l + r, entries)
                    .and_then(|inst| inst.with_bipartition((0..l).collect(), (l..l + r).collect()))
                    .expect("valid by construction")
            },
        )
    })
}

/// Gaussian vectors in `R^d`, some zeroed and some shrunk, scaled so the
/// squared lengths sum to one.
pub fn gram_vectors(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec((prop::collection::vec(-1.0f64..1.0, d), 0u8..4), n).prop_map(|rows| {
        let mut v: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|(mut x, kind)| {
                match kind {
                    0 => x.iter_mut().for_each(|c| *c = 0.0),
                    1 => x.iter_mut().for_each(|c| *c *= 0.05),
                    _ => {}
                }
                x
            })
            .collect();
        let total: f64 = v.iter().flatten().map(|c| c * c).sum();
        if total == 0.0 {
            v[0][0] = 1.0;
        } else {
            let s = 1.0 / total.sqrt();
            v.iter_mut().flatten().for_each(|c| *c *= s);
        }
        v
    })
}
