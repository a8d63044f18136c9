use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{tokenize, DenseVector};
use crate::error::{Error, Result};

/// What to do with out-of-vocabulary terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovFallback {
    /// Skip unknown terms.
    #[default]
    Strict,
    /// Use a unit vector seeded by the term string.
    Hashed,
}

/// Pre-built word vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: HashMap<String, DenseVector>,
    fallback: OovFallback,
}

impl EmbeddingStore {
    pub fn new(dimension: usize, fallback: OovFallback) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            vectors: HashMap::new(),
            fallback,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn fallback(&self) -> OovFallback {
        self.fallback
    }

    pub fn set_fallback(&mut self, fallback: OovFallback) {
        self.fallback = fallback;
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, term: impl Into<String>, vector: DenseVector) -> Result<()> {
        if vector.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                left: self.dimension,
                right: vector.dimension(),
            });
        }
        self.vectors.insert(term.into(), vector);
        Ok(())
    }

    pub fn get(&self, term: &str) -> Option<&DenseVector> {
        self.vectors.get(term)
    }

    /// Vector for `term`, applying the OOV fallback. `None` means "skip".
    pub fn lookup(&self, term: &str) -> Option<DenseVector> {
        match self.vectors.get(term) {
            Some(v) => Some(v.clone()),
            None => match self.fallback {
                OovFallback::Strict => None,
                OovFallback::Hashed => Some(hashed_unit_vector(term, self.dimension)),
            },
        }
    }

    /// Reads the plain-text word-vector format: `term v1 ... vD` per line,
    /// with an optional `count dimension` header line.
    pub fn load<R: BufRead>(reader: R, fallback: OovFallback) -> Result<Self> {
        let mut store: Option<EmbeddingStore> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                let dimension: usize = fields[1].parse().unwrap_or(0);
                store = Some(EmbeddingStore::new(dimension, fallback).map_err(|_| {
                    Error::EmbeddingFormat {
                        line: lineno,
                        reason: "header dimension must be positive".into(),
                    }
                })?);
                continue;
            }
            if fields.len() < 2 {
                return Err(Error::EmbeddingFormat {
                    line: lineno,
                    reason: "expected a term followed by components".into(),
                });
            }
            let components = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::EmbeddingFormat {
                    line: lineno,
                    reason: e.to_string(),
                })?;
            if components.iter().any(|x| !x.is_finite()) {
                return Err(Error::EmbeddingFormat {
                    line: lineno,
                    reason: "non-finite component".into(),
                });
            }
            let store = match &mut store {
                Some(s) => s,
                None => store.insert(EmbeddingStore::new(components.len(), fallback)?),
            };
            let dim = components.len();
            store
                .insert(fields[0], DenseVector::new(components))
                .map_err(|_| Error::EmbeddingFormat {
                    line: lineno,
                    reason: format!("expected {} components, got {dim}", store.dimension),
                })?;
        }
        store.ok_or(Error::EmbeddingFormat {
            line: 0,
            reason: "no vectors".into(),
        })
    }

    /// Writes the store with a header line, terms sorted.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.vectors.len(), self.dimension)?;
        let mut terms: Vec<&String> = self.vectors.keys().collect();
        terms.sort();
        for t in terms {
            write!(out, "{t}")?;
            for x in self.vectors[t].as_slice() {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// A reproducible pseudo-random unit vector derived from `term`.
pub(crate) fn hashed_unit_vector(term: &str, dimension: usize) -> DenseVector {
    let digest = Sha256::digest(term.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    loop {
        let v: Vec<f64> = (0..dimension)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return DenseVector::new(v.into_iter().map(|x| x / norm).collect());
        }
    }
}

/// Mean of the term vectors of `text`. Text with no usable terms maps to
/// the zero vector.
pub fn embed_text(text: &str, store: &EmbeddingStore) -> DenseVector {
    let mut acc = DenseVector::zeros(store.dimension());
    let mut n = 0usize;
    for term in tokenize(text) {
        if let Some(v) = store.lookup(&term) {
            acc.add_scaled(&v, 1.0);
            n += 1;
        }
    }
    if n == 0 {
        return acc;
    }
    acc.scaled(1.0 / n as f64)
}

/// Mean of the per-passage embeddings (not the mean over all terms).
pub fn embed_document<S: AsRef<str>>(
    passages: &[S],
    store: &EmbeddingStore,
) -> Result<DenseVector> {
    if passages.is_empty() {
        return Err(Error::NoPassages);
    }
    let vectors: Vec<DenseVector> = passages
        .iter()
        .map(|p| embed_text(p.as_ref(), store))
        .collect();
    DenseVector::mean(vectors.iter(), store.dimension())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(2, OovFallback::Strict).unwrap();
        s.insert("a", DenseVector::new(vec![1.0, 0.0])).unwrap();
        s.insert("b", DenseVector::new(vec![0.0, 1.0])).unwrap();
        s
    }

    #[test]
    fn single_term_embeds_to_its_vector() {
        assert_eq!(embed_text("A", &axes()).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn text_embedding_is_term_mean() {
        assert_eq!(embed_text("a b", &axes()).as_slice(), &[0.5, 0.5]);
        assert_eq!(embed_text("b a", &axes()), embed_text("a b", &axes()));
    }

    #[test]
    fn strict_mode_skips_oov() {
        let s = axes();
        assert_eq!(embed_text("a zzz", &s).as_slice(), &[1.0, 0.0]);
        assert_eq!(embed_text("zzz yyy", &s).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn hashed_mode_is_deterministic_unit() {
        let mut s = axes();
        s.set_fallback(OovFallback::Hashed);
        let v1 = embed_text("farrier", &s);
        let v2 = embed_text("farrier", &s);
        assert_eq!(v1, v2);
        assert!((v1.norm() - 1.0).abs() < 1e-12);
        assert_ne!(embed_text("hoof", &s), v1);
    }

    #[test]
    fn document_embedding_averages_passages() {
        let s = axes();
        assert_eq!(embed_document(&["a"], &s).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(
            embed_document(&["a", "b"], &s).unwrap().as_slice(),
            &[0.5, 0.5]
        );
        assert!(embed_document::<&str>(&[], &s).is_err());
    }

    #[test]
    fn passage_mean_differs_from_term_mean() {
        // passages "a a a" -> (1,0) and "b" -> (0,1): passage mean (0.5, 0.5),
        // term mean over a,a,a,b is (0.75, 0.25)
        let s = axes();
        let by_passage = embed_document(&["a a a.", "b."], &s).unwrap();
        let by_term = embed_text("a a a. b.", &s);
        assert_eq!(by_passage.as_slice(), &[0.5, 0.5]);
        assert_eq!(by_term.as_slice(), &[0.75, 0.25]);
    }

    #[test]
    fn loads_with_and_without_header() {
        let with = "2 3\nfoo 1 2 3\nbar 0.5 0 -1\n";
        let s = EmbeddingStore::load(with.as_bytes(), OovFallback::Strict).unwrap();
        assert_eq!(s.dimension(), 3);
        assert_eq!(s.get("bar").unwrap().as_slice(), &[0.5, 0.0, -1.0]);

        let without = "foo 1 2\nbar 3 4\n";
        let s = EmbeddingStore::load(without.as_bytes(), OovFallback::Strict).unwrap();
        assert_eq!(s.dimension(), 2);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn load_rejects_ragged_rows() {
        let bad = "foo 1 2\nbar 3\n";
        let err = EmbeddingStore::load(bad.as_bytes(), OovFallback::Strict).unwrap_err();
        assert!(matches!(err, Error::EmbeddingFormat { line: 2, .. }));
        let nan = "foo NaN 1\n";
        assert!(EmbeddingStore::load(nan.as_bytes(), OovFallback::Strict).is_err());
    }

    #[test]
    fn write_then_load_is_identity() {
        let mut s = EmbeddingStore::new(2, OovFallback::Strict).unwrap();
        s.insert("x", DenseVector::new(vec![0.1, -1e-17])).unwrap();
        s.insert("y", DenseVector::new(vec![1.0 / 3.0, 2.0]))
            .unwrap();
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        let back = EmbeddingStore::load(buf.as_slice(), OovFallback::Strict).unwrap();
        assert_eq!(back.get("x"), s.get("x"));
        assert_eq!(back.get("y"), s.get("y"));
    }
}
