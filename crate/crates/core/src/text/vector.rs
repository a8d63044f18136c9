use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse non-negative term weights. Zero weights are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermVector {
    entries: BTreeMap<String, f64>,
}

impl TermVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from `(term, weight)` pairs, summing repeated terms and
    /// dropping non-positive totals.
    pub fn from_weights<I, S>(weights: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (term, w) in weights {
            *entries.entry(term.into()).or_insert(0.0) += w;
        }
        entries.retain(|_, w| *w > 0.0);
        Self { entries }
    }

    pub fn get(&self, term: &str) -> f64 {
        self.entries.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(t, &w)| (t.as_str(), w))
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TermVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .filter_map(|(t, w)| large.entries.get(t).map(|v| w * v))
            .sum()
    }

    /// Cosine similarity; 0 when either vector is empty.
    pub fn cosine(&self, other: &TermVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 0.0;
        }
        (self.dot(other) / denom).clamp(-1.0, 1.0)
    }

    pub fn scaled(&self, factor: f64) -> TermVector {
        TermVector::from_weights(self.iter().map(|(t, w)| (t.to_string(), w * factor)))
    }

    /// Weighted sum `Σ weight_i · vector_i`.
    pub fn weighted_sum<'a, I>(parts: I) -> TermVector
    where
        I: IntoIterator<Item = (f64, &'a TermVector)>,
    {
        let mut entries: BTreeMap<String, f64> = BTreeMap::new();
        for (weight, v) in parts {
            for (t, w) in v.iter() {
                *entries.entry(t.to_string()).or_insert(0.0) += weight * w;
            }
        }
        entries.retain(|_, w| *w > 0.0);
        TermVector { entries }
    }

    /// Arithmetic mean; empty input gives the empty vector.
    pub fn mean<'a, I>(vectors: I) -> TermVector
    where
        I: IntoIterator<Item = &'a TermVector>,
    {
        let all: Vec<&TermVector> = vectors.into_iter().collect();
        if all.is_empty() {
            return TermVector::new();
        }
        let w = 1.0 / all.len() as f64;
        TermVector::weighted_sum(all.into_iter().map(|v| (w, v)))
    }
}

/// Dense real vector of a fixed embedding dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn zeros(dimension: usize) -> Self {
        Self(vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    /// Cosine similarity; 0 when either norm is 0.
    pub fn cosine(&self, other: &DenseVector) -> Result<f64> {
        let dot = self.dot(other)?;
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok((dot / denom).clamp(-1.0, 1.0))
    }

    pub fn scaled(&self, factor: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|x| x * factor).collect())
    }

    pub(crate) fn add_scaled(&mut self, other: &DenseVector, factor: f64) {
        debug_assert_eq!(self.dimension(), other.dimension());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    /// Arithmetic mean of equal-length vectors.
    pub fn mean<'a, I>(vectors: I, dimension: usize) -> Result<DenseVector>
    where
        I: IntoIterator<Item = &'a DenseVector>,
    {
        let mut acc = DenseVector::zeros(dimension);
        let mut n = 0usize;
        for v in vectors {
            acc.check_dim(v)?;
            acc.add_scaled(v, 1.0);
            n += 1;
        }
        if n > 0 {
            let inv = 1.0 / n as f64;
            acc.0.iter_mut().for_each(|x| *x *= inv);
        }
        Ok(acc)
    }

    fn check_dim(&self, other: &DenseVector) -> Result<()> {
        if self.dimension() != other.dimension() {
            return Err(Error::DimensionMismatch {
                left: self.dimension(),
                right: other.dimension(),
            });
        }
        Ok(())
    }
}
