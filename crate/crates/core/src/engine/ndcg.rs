/// NDCG@k with exponential gain `2^label − 1` and `1/log2(pos + 1)` discount.
///
/// `ranked_labels` are the labels in ranked order. The ideal ordering is the
/// same label multiset sorted descending; an ideal DCG of 0 yields 0.
pub fn ndcg_at_k(ranked_labels: &[f64], k: usize) -> f64 {
    let k = k.max(1);
    let ideal = {
        let mut sorted = ranked_labels.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        dcg(&sorted, k)
    };
    if ideal <= 0.0 {
        return 0.0;
    }
    (dcg(ranked_labels, k) / ideal).clamp(0.0, 1.0)
}

fn dcg(labels: &[f64], k: usize) -> f64 {
    labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &l)| (2f64.powf(l) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}
