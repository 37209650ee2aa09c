//! Cosine similarity, sentence-to-set similarity, and adapter application.
//!
//! All accumulation happens in `f64`; embeddings are only narrowed back to
//! `f32` when an adapted matrix is materialized.

use crate::error::{Error, Result};
use crate::store::{AdapterCheckpoint, EmbeddingMatrix, SemanticSet};

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum()
}

pub(crate) fn sq_norm(a: &[f32]) -> f64 {
    a.iter().map(|x| f64::from(*x) * f64::from(*x)).sum()
}

/// `a·b / (‖a‖·‖b‖)`.
///
/// Computed as `a·b / sqrt(‖a‖²·‖b‖²)` with a single rounding in the square
/// root, so the cosine of a vector with itself is exactly 1.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (sa, sb) = (sq_norm(a), sq_norm(b));
    if sa == 0.0 || sb == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero-norm vector".into()));
    }
    Ok(cosine_with_sq_norms(a, sa, b, sb))
}

/// Cosine with precomputed squared norms; bit-identical to [`cosine_sim`].
#[inline]
pub(crate) fn cosine_with_sq_norms(a: &[f32], sa: f64, b: &[f32], sb: f64) -> f64 {
    dot(a, b) / (sa * sb).sqrt()
}

/// Mean cosine between `x` and the rows at `rows`, summed in slice order.
pub(crate) fn mean_similarity(x: &[f32], x_sq: f64, rows: &[usize], emb: &EmbeddingMatrix) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|&r| cosine_with_sq_norms(x, x_sq, emb.row(r), emb.sq_norm(r)))
        .sum();
    total / rows.len() as f64
}

/// Row indices of a set's members, in member order.
pub(crate) fn resolve_rows(set: &SemanticSet, emb: &EmbeddingMatrix) -> Result<Vec<usize>> {
    if set.is_empty() {
        return Err(Error::Domain(format!("set {:?} is empty", set.name())));
    }
    set.members()
        .iter()
        .map(|id| {
            emb.position(id).ok_or_else(|| {
                Error::Validation(format!(
                    "member {id:?} of set {:?} has no embedding",
                    set.name()
                ))
            })
        })
        .collect()
}

/// Semantic similarity of a sentence to a set: the mean cosine similarity
/// between `x` and every member of `set`.
pub fn set_similarity(x: &[f32], set: &SemanticSet, emb: &EmbeddingMatrix) -> Result<f64> {
    if x.len() != emb.dim() {
        return Err(Error::Shape(format!(
            "query vector has length {}, embeddings have dim {}",
            x.len(),
            emb.dim()
        )));
    }
    let x_sq = sq_norm(x);
    if x_sq == 0.0 {
        return Err(Error::Domain("set similarity of a zero-norm vector".into()));
    }
    let rows = resolve_rows(set, emb)?;
    Ok(mean_similarity(x, x_sq, &rows, emb))
}

/// Maps every row through the adapter. Ids and row order are preserved.
pub fn apply_adapter(adapter: &AdapterCheckpoint, emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if adapter.dim() != emb.dim() {
        return Err(Error::Shape(format!(
            "adapter dim {} does not match embedding dim {}",
            adapter.dim(),
            emb.dim()
        )));
    }
    let dim = emb.dim();
    let mut out = Vec::with_capacity(emb.values().len());
    let mut buf = vec![0.0f64; dim];
    for row in 0..emb.len() {
        adapter.transform(emb.row(row), &mut buf);
        let start = out.len();
        out.extend(buf.iter().map(|&v| v as f32));
        if out[start..].iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "adapter output for {:?} is not finite",
                emb.ids()[row]
            )));
        }
        if out[start..].iter().all(|&v| v == 0.0) {
            return Err(Error::Numeric(format!(
                "adapter maps {:?} to the zero vector",
                emb.ids()[row]
            )));
        }
    }
    EmbeddingMatrix::new(emb.ids().to_vec(), dim, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[(&str, Vec<f32>)]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows.iter().map(|(id, v)| (*id, v.clone()))).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_sim(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((s - 0.707_106_78).abs() < 1e-7);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(cosine_sim(&[1.0], &[1.0, 0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn set_similarity_examples() {
        let e = matrix(&[("p", vec![1.0, 0.0]), ("q", vec![0.0, 1.0])]);
        let single = SemanticSet::new("S", ["p"]).unwrap();
        let both = SemanticSet::new("S", ["p", "q"]).unwrap();
        assert_eq!(set_similarity(&[1.0, 0.0], &single, &e).unwrap(), 1.0);
        assert_eq!(set_similarity(&[1.0, 0.0], &both, &e).unwrap(), 0.5);
        let s = set_similarity(&[1.0, 1.0], &both, &e).unwrap();
        assert!((s - 0.707_106_78).abs() < 1e-7);
    }

    #[test]
    fn set_similarity_unresolved_member() {
        let e = matrix(&[("p", vec![1.0, 0.0])]);
        let s = SemanticSet::new("S", ["p", "ghost"]).unwrap();
        assert!(matches!(
            set_similarity(&[1.0, 0.0], &s, &e),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn identity_adapter_is_bit_exact() {
        let e = matrix(&[("a", vec![0.1, -3.0, 7.5]), ("b", vec![1e-20, 2.0, -0.0])]);
        let out = apply_adapter(&AdapterCheckpoint::identity(3), &e).unwrap();
        assert_eq!(out.ids(), e.ids());
        for (x, y) in e.values().iter().zip(out.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn doubling_adapter_preserves_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<(String, Vec<f32>)> = (0..5)
            .map(|i| (format!("r{i}"), (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let e = EmbeddingMatrix::from_rows(rows).unwrap();
        let w: Vec<f64> = (0..16).map(|i| if i % 5 == 0 { 2.0 } else { 0.0 }).collect();
        let a = AdapterCheckpoint::new(4, w, vec![0.0; 4]).unwrap();
        let out = apply_adapter(&a, &e).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let before = cosine_sim(e.row(i), e.row(j)).unwrap();
                let after = cosine_sim(out.row(i), out.row(j)).unwrap();
                assert!((before - after).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn random_adapter_matches_per_row_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<(String, Vec<f32>)> = (0..3)
            .map(|i| (format!("r{i}"), (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let e = EmbeddingMatrix::from_rows(rows.clone()).unwrap();
        let w: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
        let a = AdapterCheckpoint::from_rows(4, w.clone(), b.clone()).unwrap();
        let out = apply_adapter(&a, &e).unwrap();
        for (r, (_, x)) in rows.iter().enumerate() {
            for i in 0..4 {
                let mut expect = b[i];
                for j in 0..4 {
                    expect += w[i][j] * f64::from(x[j]);
                }
                assert!((f64::from(out.row(r)[i]) - expect).abs() <= 1e-6 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn adapter_dim_mismatch() {
        let e = matrix(&[("a", vec![1.0, 0.0])]);
        assert!(matches!(
            apply_adapter(&AdapterCheckpoint::identity(3), &e),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn adapter_overflow_is_numeric_error() {
        let e = matrix(&[("a", vec![3.0e38, 3.0e38])]);
        let a = AdapterCheckpoint::new(2, vec![1.0, 1.0, 0.0, 1.0], vec![0.0; 2]).unwrap();
        assert!(matches!(apply_adapter(&a, &e), Err(Error::Numeric(_))));
    }

    fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f32>> {
        proptest::collection::vec(-10.0f32..10.0, dim)
            .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn prop_cosine_symmetric_and_bounded(a in vec_strategy(6), b in vec_strategy(6)) {
            let ab = cosine_sim(&a, &b).unwrap();
            let ba = cosine_sim(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab.abs() <= 1.0 + 1e-6);
        }

        #[test]
        fn prop_cosine_scale_invariant(a in vec_strategy(5), b in vec_strategy(5), c in 0.01f32..100.0) {
            let scaled: Vec<f32> = a.iter().map(|x| x * c).collect();
            let s1 = cosine_sim(&a, &b).unwrap();
            let s2 = cosine_sim(&scaled, &b).unwrap();
            prop_assert!((s1 - s2).abs() < 1e-6);
        }

        #[test]
        fn prop_set_similarity_bounded_and_mean_invariant(
            x in vec_strategy(4),
            members in proptest::collection::vec(vec_strategy(4), 1..6),
        ) {
            let rows: Vec<(String, Vec<f32>)> = members
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("m{i}"), v.clone()))
                .collect();
            let e = EmbeddingMatrix::from_rows(rows.clone()).unwrap();
            let set = SemanticSet::new("S", rows.iter().map(|r| r.0.clone())).unwrap();
            let sim = set_similarity(&x, &set, &e).unwrap();
            let each: Vec<f64> = members.iter().map(|m| cosine_sim(&x, m).unwrap()).collect();
            let lo = each.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = each.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(sim >= lo - 1e-12 && sim <= hi + 1e-12);

            // Duplicate every member under a fresh id.
            let doubled: Vec<(String, Vec<f32>)> = rows
                .iter()
                .cloned()
                .chain(rows.iter().map(|(id, v)| (format!("{id}'"), v.clone())))
                .collect();
            let e2 = EmbeddingMatrix::from_rows(doubled.clone()).unwrap();
            let set2 = SemanticSet::new("S2", doubled.iter().map(|r| r.0.clone())).unwrap();
            let sim2 = set_similarity(&x, &set2, &e2).unwrap();
            prop_assert!((sim - sim2).abs() < 1e-9);
        }
    }
}
