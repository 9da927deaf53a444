use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::backends::{BackendError, EmbeddingProvider};
use crate::types::MathQuery;

/// Whitespace runs collapsed to one space, ends trimmed, case kept.
pub fn normalize_query_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Keeps the first query of each normalized text.
pub fn dedup_queries(queries: &[MathQuery]) -> Vec<MathQuery> {
    let mut seen = HashSet::new();
    queries
        .iter()
        .filter(|q| seen.insert(normalize_query_text(&q.text)))
        .cloned()
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedItem {
    pub query: MathQuery,
    pub max_similarity: f64,
    pub nearest_bench_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decontamination {
    pub kept: Vec<MathQuery>,
    pub removed: Vec<RemovedItem>,
}

fn embed_corpus(
    items: &[MathQuery],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Vec<f64>>, EvalError> {
    let texts: Vec<String> = items.iter().map(|q| q.text.clone()).collect();
    let item_id = |i: usize| items.get(i).map_or_else(|| "?".to_string(), |q| q.id.clone());
    let vectors = provider.embed(&texts).map_err(|e| match &e {
        BackendError::ProviderFailure { indices, .. } => EvalError::ProviderFailure {
            item_id: item_id(indices.first().copied().unwrap_or(0)),
            message: e.to_string(),
        },
        _ => EvalError::ProviderFailure {
            item_id: item_id(0),
            message: e.to_string(),
        },
    })?;
    if vectors.len() != items.len() {
        return Err(EvalError::ProviderFailure {
            item_id: item_id(vectors.len()),
            message: format!("{} vectors for {} texts", vectors.len(), items.len()),
        });
    }
    if let Some(dim) = vectors.first().map(Vec::len) {
        if let Some(i) = vectors.iter().position(|v| v.len() != dim) {
            return Err(EvalError::ProviderFailure {
                item_id: item_id(i),
                message: format!("vector of dimension {} where {dim} expected", vectors[i].len()),
            });
        }
    }
    Ok(vectors)
}

/// Removes training items whose best cosine similarity to any benchmark
/// item is strictly above `threshold`.
pub fn decontaminate(
    train: &[MathQuery],
    bench: &[MathQuery],
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Decontamination, EvalError> {
    let bench_vecs = embed_corpus(bench, provider)?;
    let train_vecs = embed_corpus(train, provider)?;
    if let (Some(b), Some(t)) = (bench_vecs.first(), train_vecs.first()) {
        if b.len() != t.len() {
            return Err(EvalError::ProviderFailure {
                item_id: train[0].id.clone(),
                message: format!("dimension {} differs from benchmark dimension {}", t.len(), b.len()),
            });
        }
    }
    let mut out = Decontamination { kept: Vec::new(), removed: Vec::new() };
    for (q, v) in train.iter().zip(&train_vecs) {
        let nearest = bench_vecs
            .iter()
            .enumerate()
            .map(|(i, b)| (i, cosine(v, b)))
            .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((i, s)),
            });
        match nearest {
            Some((i, s)) if s > threshold => out.removed.push(RemovedItem {
                query: q.clone(),
                max_similarity: s,
                nearest_bench_id: bench[i].id.clone(),
            }),
            _ => out.kept.push(q.clone()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::embed::HashingEmbedder;
    use crate::backends::script::ScriptedEmbedder;

    fn q(id: &str, text: &str) -> MathQuery {
        MathQuery::new(id, text, "t").unwrap()
    }

    #[test]
    fn dedup_is_first_wins_on_whitespace() {
        let qs = vec![q("1", "Find  x."), q("2", "Find x. "), q("3", "find x.")];
        let ids: Vec<String> = dedup_queries(&qs).into_iter().map(|q| q.id).collect();
        assert_eq!(ids, vec!["1", "3"]);
        assert!(dedup_queries(&[]).is_empty());
        assert_eq!(dedup_queries(&dedup_queries(&qs)), dedup_queries(&qs));
    }

    #[test]
    fn identical_text_is_removed_and_disjoint_kept() {
        let e = HashingEmbedder::default();
        let bench = vec![q("b", "abcabc abcabc")];
        let train = vec![q("t1", "abcabc abcabc"), q("t2", "xyzxyz xyzxyz")];
        let out = decontaminate(&train, &bench, &e, 0.8).unwrap();
        assert_eq!(out.removed.len(), 1);
        assert_eq!(out.removed[0].query.id, "t1");
        assert!((out.removed[0].max_similarity - 1.0).abs() < 1e-12);
        assert_eq!(out.kept[0].id, "t2");
        let again = decontaminate(&out.kept, &bench, &e, 0.8).unwrap();
        assert_eq!(again.kept, out.kept);
    }

    #[test]
    fn boundary_is_strict() {
        let e = ScriptedEmbedder::new()
            .with("bench", vec![1.0, 0.0])
            .with("at", vec![80.0, 60.0])
            .with("above", vec![81.0, (10_000.0f64 - 81.0 * 81.0).sqrt()]);
        let bench = vec![q("b", "bench")];
        let train = vec![q("t1", "at"), q("t2", "above")];
        let out = decontaminate(&train, &bench, &e, 0.8).unwrap();
        assert_eq!(out.kept.iter().map(|q| q.id.as_str()).collect::<Vec<_>>(), vec!["t1"]);
        assert_eq!(out.removed[0].query.id, "t2");
    }

    #[test]
    fn provider_failure_names_the_item() {
        let e = ScriptedEmbedder::new().with("bench", vec![1.0, 0.0]);
        let err = decontaminate(&[q("t9", "missing")], &[q("b", "bench")], &e, 0.8).unwrap_err();
        assert!(matches!(err, EvalError::ProviderFailure { ref item_id, .. } if item_id == "t9"));
    }
}
