//! Greedy binary codes with minimum Hamming distance `⌈S/2⌉`.
//!
//! A word `v ∈ {±1}^S` is stored as an integer whose bit `S−1−i` is set iff
//! `v_i = −1`, so increasing integers enumerate `{±1}^S` lexicographically
//! with `+1` before `−1`. The greedy code in that order (the lexicode) is
//! linear, which lets the search add a whole coset per accepted word.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::RngSeed;

pub type SignVector = Vec<i8>;

/// Codewords required of `gv_code(s)`: `⌈exp(S/8)⌉`.
pub fn required_size(s: usize) -> usize {
    (s as f64 / 8.0).exp().ceil() as usize
}

/// Minimum pairwise distance enforced: `⌈S/2⌉`.
pub fn min_distance(s: usize) -> u32 {
    s.div_ceil(2) as u32
}

/// Plotkin bound on the size of a length-`S` code with distance `⌈S/2⌉`.
pub fn plotkin_bound(s: usize) -> usize {
    let d = min_distance(s) as usize;
    if 2 * d == s {
        2 * s
    } else {
        2 * (d / (2 * d - s))
    }
}

/// Lexicographic greedy code, as integers in increasing order.
pub fn lexicode_words(s: usize) -> Result<Vec<u64>> {
    if !(8..=64).contains(&s) {
        return Err(Error::InvalidParameter(format!("code length {s} outside [8, 64]")));
    }
    let d = min_distance(s);
    let bound = plotkin_bound(s);
    let mut code = vec![0u64];
    for k in 0..s {
        if 2 * code.len() > bound {
            break;
        }
        // Words in [2^k, 2^{k+1}) are 2^k + y with y < 2^k; the distance to
        // any earlier word c is 1 + wt(y ⊕ c).
        if let Some(y) = smallest_far_word(&code, k, d.saturating_sub(1)) {
            let x = (1u64 << k) | y;
            let coset: Vec<u64> = code.iter().map(|c| c ^ x).collect();
            code.extend(coset);
        }
    }
    code.sort_unstable();
    Ok(code)
}

/// Smallest `y < 2^bits` with `wt(y ⊕ c) ≥ need` for every `c`, by
/// depth-first assignment from the top bit with zero tried first.
fn smallest_far_word(code: &[u64], bits: usize, need: u32) -> Option<u64> {
    fn search(code: &[u64], bit: usize, prefix: u64, dist: &mut [u32], need: u32) -> Option<u64> {
        if bit == 0 {
            return dist.iter().all(|&d| d >= need).then_some(prefix);
        }
        let b = bit - 1;
        for choice in [0u64, 1u64] {
            let mut feasible = true;
            for (c, d) in code.iter().zip(dist.iter_mut()) {
                *d += (((c >> b) & 1) ^ choice) as u32;
                if *d + b as u32 >= need {
                    continue;
                }
                feasible = false;
            }
            if feasible {
                if let Some(y) = search(code, b, prefix | (choice << b), dist, need) {
                    return Some(y);
                }
            }
            for (c, d) in code.iter().zip(dist.iter_mut()) {
                *d -= (((c >> b) & 1) ^ choice) as u32;
            }
        }
        None
    }
    let mut dist = vec![0u32; code.len()];
    search(code, bits, 0, &mut dist, need)
}

pub fn word_to_signs(word: u64, s: usize) -> SignVector {
    (0..s)
        .map(|i| if (word >> (s - 1 - i)) & 1 == 1 { -1 } else { 1 })
        .collect()
}

pub fn hamming(u: &[i8], v: &[i8]) -> usize {
    u.iter().zip(v).filter(|(a, b)| a != b).count()
}

fn checked(words: Vec<u64>, s: usize) -> Result<Vec<SignVector>> {
    let needed = required_size(s);
    if words.len() < needed {
        return Err(Error::CodeTooSmall { kept: words.len(), needed });
    }
    Ok(words.into_iter().map(|w| word_to_signs(w, s)).collect())
}

/// Greedy code over `{±1}^S` in lexicographic order (all-`+1` first) with
/// pairwise Hamming distance `≥ ⌈S/2⌉`. Fails with
/// [`Error::CodeTooSmall`] when fewer than `⌈exp(S/8)⌉` words survive.
pub fn gv_code(s: usize) -> Result<Vec<SignVector>> {
    if (8..=64).contains(&s) && plotkin_bound(s) < required_size(s) {
        return Err(Error::CodeTooSmall { kept: plotkin_bound(s), needed: required_size(s) });
    }
    checked(lexicode_words(s)?, s)
}

/// Seeded variant: the lexicode under a random coordinate permutation and
/// sign flip, listed in the permuted order. Distances and size are those of
/// [`gv_code`].
pub fn gv_code_seeded(s: usize, seed: RngSeed) -> Result<Vec<SignVector>> {
    if (8..=64).contains(&s) && plotkin_bound(s) < required_size(s) {
        return Err(Error::CodeTooSmall { kept: plotkin_bound(s), needed: required_size(s) });
    }
    let words = lexicode_words(s)?;
    let mut rng = seed.rng();
    let mut perm: Vec<usize> = (0..s).collect();
    perm.shuffle(&mut rng);
    let mask: u64 = rng.random::<u64>() & if s == 64 { u64::MAX } else { (1u64 << s) - 1 };
    let mut mapped: Vec<u64> = words
        .into_iter()
        .map(|w| {
            let flipped = w ^ mask;
            perm.iter()
                .enumerate()
                .fold(0u64, |acc, (to, &from)| acc | (((flipped >> from) & 1) << to))
        })
        .collect();
    mapped.sort_unstable();
    checked(mapped, s)
}

/// Plain greedy scan over all `2^S` words; only practical for small `S`.
pub fn naive_greedy_words(s: usize) -> Vec<u64> {
    let d = min_distance(s);
    let mut kept: Vec<u64> = Vec::new();
    for x in 0..(1u64 << s) {
        if kept.iter().all(|&c| (c ^ x).count_ones() >= d) {
            kept.push(x);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_greedy() {
        for s in 8..=16 {
            assert_eq!(lexicode_words(s).unwrap(), naive_greedy_words(s), "S = {s}");
        }
    }

    #[test]
    fn plotkin_values() {
        assert_eq!(plotkin_bound(8), 16);
        assert_eq!(plotkin_bound(9), 10);
        assert_eq!(plotkin_bound(40), 80);
        for s in 8..=16 {
            assert!(naive_greedy_words(s).len() <= plotkin_bound(s));
        }
    }

    #[test]
    fn all_plus_first() {
        let code = gv_code(8).unwrap();
        assert!(code[0].iter().all(|&x| x == 1));
        assert!(code.len() >= 3);
    }

    #[test]
    fn too_long_for_the_distance() {
        assert!(matches!(gv_code(40), Err(Error::CodeTooSmall { .. })));
        assert!(gv_code(7).is_err());
    }

    #[test]
    fn seeded_code_keeps_distances() {
        let code = gv_code_seeded(16, RngSeed(3)).unwrap();
        assert_eq!(code.len(), gv_code(16).unwrap().len());
        for i in 0..code.len() {
            for j in i + 1..code.len() {
                assert!(hamming(&code[i], &code[j]) >= 8);
            }
        }
    }
}
