use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Two-tailed paired permutation test by random sign flips of `a − b`.
///
/// Returns `(k + 1) / (n_perm + 1)` where `k` counts flipped samples whose
/// absolute mean difference reaches the observed one.
pub fn permutation_test(a: &[f64], b: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::UnpairedSamples(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let observed = (diffs.iter().sum::<f64>() / n).abs();
    // guard against summation-order noise making exact ties look smaller
    let threshold = observed - 1e-12 * (1.0 + observed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        let s: f64 = diffs
            .iter()
            .map(|&d| if rng.gen::<bool>() { d } else { -d })
            .sum();
        if (s / n).abs() >= threshold {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (n_perm + 1) as f64)
}

/// Bonferroni-adjusted p-value for `m` comparisons.
pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m.max(1) as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_one() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(permutation_test(&a, &a, 1000, 1).unwrap(), 1.0);
    }

    #[test]
    fn all_positive_differences() {
        let a = [1.0; 10];
        let b = [0.0; 10];
        let p = permutation_test(&a, &b, 100_000, 7).unwrap();
        assert!((p - 2.0 / 1024.0).abs() < 0.01);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            permutation_test(&[], &[], 10, 0),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            permutation_test(&[1.0], &[], 10, 0),
            Err(Error::UnpairedSamples(1, 0))
        ));
    }

    #[test]
    fn bonferroni_caps_at_one() {
        assert_eq!(bonferroni(0.01, 3), 0.03);
        assert_eq!(bonferroni(0.5, 3), 1.0);
    }
}
