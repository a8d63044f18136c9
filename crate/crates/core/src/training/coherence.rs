use crate::bot::context_indices;
use crate::engine::Document;
use crate::text::{embed_text, DenseVector, EmbeddingStore};

/// Source of coherence labels in `[0, 4]` for a replacement candidate.
pub trait CoherenceModel: Sync {
    fn label(
        &self,
        d_cur: &Document,
        src_index: usize,
        target_text: &str,
        store: &EmbeddingStore,
    ) -> f64;
}

/// Embedding-based stand-in for human coherence judgments.
///
/// `c = 4 · clamp01((s_ctx + s_pair) / 2)` where `s_pair` is the cosine
/// between source and target passage embeddings and `s_ctx` is the mean
/// cosine between the target and the source's neighbours (same boundary
/// rules as the bot's context features; 0 for single-passage documents).
#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddingCoherenceProxy;

impl CoherenceModel for EmbeddingCoherenceProxy {
    fn label(
        &self,
        d_cur: &Document,
        src_index: usize,
        target_text: &str,
        store: &EmbeddingStore,
    ) -> f64 {
        let passages = d_cur.passages();
        let cos = |a: &DenseVector, b: &DenseVector| a.cosine(b).unwrap_or(0.0);
        let target = embed_text(target_text, store);
        let source = embed_text(&passages[src_index], store);
        let s_pair = cos(&source, &target);
        let s_ctx = match context_indices(src_index, passages.len()) {
            Some((prec, follow)) => {
                let p = embed_text(&passages[prec], store);
                let f = embed_text(&passages[follow], store);
                (cos(&target, &p) + cos(&target, &f)) / 2.0
            }
            None => 0.0,
        };
        4.0 * ((s_ctx + s_pair) / 2.0).clamp(0.0, 1.0)
    }
}
