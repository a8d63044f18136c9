use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CompetitionResult, OfflineReport, StrategyKind};
use crate::bot::{PairModel, PAIR_FEATURE_NAMES};

/// Averages for one player class in one round, over all players of that
/// class across competitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: StrategyKind,
    pub round: usize,
    pub players: usize,
    pub mean_rank: f64,
    /// Over players with a defined promotion; `None` when there are none.
    pub mean_raw_promotion: Option<f64>,
    pub mean_scaled_promotion: Option<f64>,
    pub promoted_players: usize,
    pub mean_quality_proxy: f64,
}

pub type SeriesRecord = ClassSummary;

pub fn summarize(results: &[CompetitionResult]) -> Vec<ClassSummary> {
    #[derive(Default)]
    struct Acc {
        n: usize,
        rank: f64,
        quality: f64,
        k: usize,
        raw: f64,
        scaled: f64,
    }
    let mut acc: BTreeMap<(StrategyKind, usize), Acc> = BTreeMap::new();
    for r in results {
        for m in &r.rounds {
            for p in &m.players {
                let a = acc.entry((p.kind, m.round)).or_default();
                a.n += 1;
                a.rank += p.rank as f64;
                a.quality += p.quality_proxy;
                if let (Some(raw), Some(scaled)) = (p.raw_promotion, p.scaled_promotion) {
                    a.k += 1;
                    a.raw += raw as f64;
                    a.scaled += scaled;
                }
            }
        }
    }
    acc.into_iter()
        .map(|((class, round), a)| ClassSummary {
            class,
            round,
            players: a.n,
            mean_rank: a.rank / a.n as f64,
            mean_raw_promotion: (a.k > 0).then(|| a.raw / a.k as f64),
            mean_scaled_promotion: (a.k > 0).then(|| a.scaled / a.k as f64),
            promoted_players: a.k,
            mean_quality_proxy: a.quality / a.n as f64,
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

/// Average rank, promotion and quality proxy per class and round.
pub fn render_table1(summary: &[ClassSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>5} {:>9} {:>9} {:>9} {:>14}",
        "class", "round", "avg_rank", "raw", "scaled", "quality_proxy"
    );
    for s in summary {
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>9.3} {:>9} {:>9} {:>14.3}",
            s.class.name(),
            s.round,
            s.mean_rank,
            opt(s.mean_raw_promotion),
            opt(s.mean_scaled_promotion),
            s.mean_quality_proxy
        );
    }
    out
}

/// One JSON record per class and round, for plotting elsewhere.
pub fn render_series(summary: &[ClassSummary]) -> String {
    let mut out = String::new();
    for s in summary {
        out.push_str(&serde_json::to_string(s).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn render_offline_table(report: &OfflineReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>6} {:>9} {:>9} {:>9} {:>14}",
        "arm", "cells", "avg_rank", "raw", "scaled", "quality_proxy"
    );
    for s in &report.summary {
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>9.3} {:>9.3} {:>9.3} {:>14.3}",
            s.arm, s.cells, s.mean_rank, s.mean_raw, s.mean_scaled, s.mean_quality_proxy
        );
    }
    let _ = writeln!(out, "skipped cells: {}", report.skipped.len());
    if !report.comparisons.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:>9} {:>9} {:>9} {:>12}",
            "a", "b", "mean_a", "mean_b", "p", "p_bonferroni"
        );
        for c in &report.comparisons {
            let _ = writeln!(
                out,
                "{:<10} {:<10} {:>9.3} {:>9.3} {:>9.5} {:>12.5}",
                c.a, c.b, c.mean_a, c.mean_b, c.p_value, c.p_bonferroni
            );
        }
    }
    out
}

/// Feature weights of a pair model, one line per feature.
pub fn render_weights(model: &PairModel) -> String {
    let width = PAIR_FEATURE_NAMES
        .iter()
        .map(|n| n.len())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (name, w) in PAIR_FEATURE_NAMES.iter().zip(model.weights) {
        let _ = writeln!(out, "{name:<width$}  {w:>10.4}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{PlayerMetrics, RoundMetrics};

    fn result() -> CompetitionResult {
        let pm = |player: &str, kind, rank, raw: Option<i64>| PlayerMetrics {
            player: player.into(),
            kind,
            doc_id: format!("{player}@r1"),
            rank,
            raw_promotion: raw,
            scaled_promotion: raw.map(|r| r as f64 / 2.0),
            quality_proxy: 1.0,
            changed: true,
        };
        CompetitionResult {
            query_id: "q".into(),
            rankings: vec![],
            rounds: vec![
                RoundMetrics {
                    round: 1,
                    players: vec![
                        pm("a", StrategyKind::Bot, 2, None),
                        pm("b", StrategyKind::Static, 1, None),
                    ],
                },
                RoundMetrics {
                    round: 2,
                    players: vec![
                        pm("a", StrategyKind::Bot, 1, Some(1)),
                        pm("b", StrategyKind::Static, 2, None),
                    ],
                },
            ],
            audits: vec![],
        }
    }

    #[test]
    fn first_round_renders_na() {
        let table = render_table1(&summarize(&[result()]));
        let line = table
            .lines()
            .find(|l| l.starts_with("bot") && l.contains(" 1 "))
            .unwrap();
        assert!(line.contains("NA"));
        let line = table
            .lines()
            .find(|l| l.starts_with("bot") && l.contains(" 2 "))
            .unwrap();
        assert!(line.contains("1.000"));
    }

    #[test]
    fn rendering_is_stable() {
        let s = summarize(&[result(), result()]);
        assert_eq!(
            render_table1(&s),
            render_table1(&summarize(&[result(), result()]))
        );
        assert_eq!(render_series(&s).lines().count(), 4);
    }

    #[test]
    fn weights_list_all_features() {
        let w = render_weights(&PairModel::zero());
        for name in PAIR_FEATURE_NAMES {
            assert!(w.contains(name));
        }
        assert_eq!(w.lines().count(), 15);
    }
}
