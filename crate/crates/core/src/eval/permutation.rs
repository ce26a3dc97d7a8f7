use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Two-sided paired sign-flip permutation test on the mean difference of
/// two 0/1 correctness vectors. Returns `(k + 1) / (permutations + 1)` where
/// `k` counts permutations at least as extreme as the observed difference.
///
/// With 0/1 flags every non-zero difference is `±1`, so a random sign flip
/// of the differences is a sum of `m` fair `±1` coins; it is drawn 64 coins
/// at a time with a popcount.
pub fn paired_permutation_test(a: &[bool], b: &[bool], permutations: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "correctness vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if permutations == 0 {
        return Err(Error::InvalidArgument("permutations must be positive".into()));
    }
    let observed: i64 = a.iter().zip(b).map(|(&x, &y)| x as i64 - y as i64).sum::<i64>().abs();
    let m = a.iter().zip(b).filter(|(x, y)| x != y).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (words, rest) = (m / 64, m % 64);
    let mut extreme = 0usize;
    for _ in 0..permutations {
        let mut plus = 0u32;
        for _ in 0..words {
            plus += rng.random::<u64>().count_ones();
        }
        if rest > 0 {
            plus += (rng.random::<u64>() & ((1u64 << rest) - 1)).count_ones();
        }
        let sum = 2 * plus as i64 - m as i64;
        if sum.abs() >= observed {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (permutations + 1) as f64)
}
