//! Text primitives shared by the engine and the bot.
//!
//! Everything here is a pure function of its inputs: tokenization, sentence
//! segmentation, sparse TF.IDF vectors, averaged word embeddings and cosine
//! similarity.

mod embed;
mod stats;
mod vector;

pub use embed::{embed_document, embed_text, EmbeddingStore, OovFallback};
pub use stats::{tfidf_vector, CorpusStats, CorpusStatsBuilder};
pub use vector::{DenseVector, TermVector};

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Bundled English stopword list, one term per line.
pub const ENGLISH_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Lowercases `text` and splits it into terms. Any character that is not
/// alphanumeric acts as a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Splits `text` into sentences.
///
/// A sentence ends at a run of `.`, `!` or `?` that is followed by whitespace
/// or the end of the text. Each passage keeps its original bytes (trimmed).
/// Fragments without any terms are dropped, so joining the passages yields the
/// same term sequence as the input. There is no abbreviation handling: `"Mr. X"`
/// splits after `"Mr."`.
pub fn segment_passages(text: &str) -> Result<Vec<String>> {
    let mut passages = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminal(c) {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, next)) = chars.peek() {
            if !is_terminal(next) {
                break;
            }
            end = j + next.len_utf8();
            chars.next();
        }
        let at_boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
        if at_boundary {
            push_passage(&mut passages, &text[start..end]);
            start = end;
        }
    }
    push_passage(&mut passages, &text[start..]);
    if passages.is_empty() {
        return Err(Error::NoPassages);
    }
    Ok(passages)
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn push_passage(out: &mut Vec<String>, raw: &str) {
    let trimmed = raw.trim();
    if trimmed.chars().any(char::is_alphanumeric) {
        out.push(trimmed.to_string());
    }
}

/// Parses a stopword list: one term per line, blank lines and surrounding
/// whitespace ignored, terms lowercased.
pub fn parse_stopwords(list: &str) -> HashSet<String> {
    list.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn english_stopwords() -> HashSet<String> {
    parse_stopwords(ENGLISH_STOPWORDS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        assert_eq!(
            tokenize("Hoof Cracks, horses."),
            ["hoof", "cracks", "horses"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b\tc"), ["a", "b", "c"]);
    }

    #[test]
    fn segments_on_terminal_punctuation() {
        assert_eq!(
            segment_passages("A b. C d! E?").unwrap(),
            ["A b.", "C d!", "E?"]
        );
        assert_eq!(
            segment_passages("no terminal punctuation").unwrap(),
            ["no terminal punctuation"]
        );
    }

    #[test]
    fn abbreviations_split() {
        assert_eq!(
            segment_passages("Mr. X arrived.").unwrap(),
            ["Mr.", "X arrived."]
        );
    }

    #[test]
    fn inner_punctuation_does_not_split() {
        let p = segment_passages("Version 2.5 is out... Really?! Yes").unwrap();
        assert_eq!(p, ["Version 2.5 is out...", "Really?!", "Yes"]);
    }

    #[test]
    fn empty_text_has_no_passages() {
        assert!(matches!(segment_passages(""), Err(Error::NoPassages)));
        assert!(matches!(
            segment_passages("  \n\t "),
            Err(Error::NoPassages)
        ));
        assert!(matches!(segment_passages("?! ..."), Err(Error::NoPassages)));
    }

    #[test]
    fn stopword_list_parsing() {
        let s = parse_stopwords("The\n\n  and \nof");
        assert_eq!(s.len(), 3);
        assert!(s.contains("the") && s.contains("and"));
        assert!(english_stopwords().contains("the"));
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,80}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn segmentation_preserves_terms(text in "[a-zA-Z .!?,]{0,120}") {
            let expected = tokenize(&text);
            match segment_passages(&text) {
                Ok(passages) => {
                    let joined: Vec<String> =
                        passages.iter().flat_map(|p| tokenize(p)).collect();
                    prop_assert_eq!(joined, expected);
                }
                Err(_) => prop_assert!(expected.is_empty()),
            }
        }
    }
}
