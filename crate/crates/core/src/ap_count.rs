//! Exact counts of ordered triples `(a, b, c)` with `a + b ≡ 2c (mod q)`.
//!
//! Two independent algorithms are provided: a pair enumeration that tests
//! the midpoint of every ordered pair, and a sumset histogram
//! `N(t) = #{(a, b) : a + b ≡ t}` read off at `t = 2c`.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::ntt;
use crate::zq::ResidueSet;

/// Sets larger than this switch the histogram to the transform path.
pub const DIRECT_HISTOGRAM_LIMIT: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApCountReport {
    pub q: u64,
    pub size: u64,
    pub total: u64,
    pub trivial: u64,
    pub nontrivial: u64,
    /// `total / q^2` in lowest terms.
    pub mu_num: u64,
    pub mu_den: u64,
}

impl ApCountReport {
    pub fn new(q: u64, size: u64, total: u64) -> Self {
        let den = q * q;
        let g = total.gcd(&den).max(1);
        ApCountReport {
            q,
            size,
            total,
            trivial: size,
            nontrivial: total - size,
            mu_num: total / g,
            mu_den: den / g,
        }
    }

    pub fn mu(&self) -> f64 {
        self.total as f64 / (self.q as f64 * self.q as f64)
    }

    /// Nontrivial progressions with `{a, b}` unordered.
    pub fn unordered_nontrivial(&self) -> u64 {
        self.nontrivial / 2
    }
}

#[inline]
pub(crate) fn midpoint(a: u64, b: u64, q: u64) -> u64 {
    let s = (a + b) % q;
    if s % 2 == 0 {
        s / 2
    } else {
        (s + q) / 2
    }
}

pub fn count_3aps_naive(set: &ResidueSet) -> ApCountReport {
    let q = set.modulus();
    let mut total = 0u64;
    for a in set.iter() {
        for b in set.iter() {
            if set.contains(midpoint(a, b, q)) {
                total += 1;
            }
        }
    }
    ApCountReport::new(q, set.len() as u64, total)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HistogramStrategy {
    /// Direct accumulation up to [`DIRECT_HISTOGRAM_LIMIT`] elements, transform above.
    #[default]
    Auto,
    Direct,
    Transform,
}

pub fn count_3aps_convolution(set: &ResidueSet) -> ApCountReport {
    count_3aps_convolution_with(set, HistogramStrategy::Auto)
}

pub fn count_3aps_convolution_with(set: &ResidueSet, strategy: HistogramStrategy) -> ApCountReport {
    let q = set.modulus();
    let weights: Vec<(u64, u64)> = set.iter().map(|x| (x, 1)).collect();
    let total = weighted_count(&weights, q, strategy);
    ApCountReport::new(q, set.len() as u64, total as u64)
}

/// Counts `sum_c w(c) * #{(a, b) : a + b ≡ 2c (mod m)}` weighted by `w(a) w(b)`,
/// for a sparse weight vector of `(residue, weight)` pairs. `m` must be odd.
pub fn weighted_count(weights: &[(u64, u64)], m: u64, strategy: HistogramStrategy) -> u128 {
    debug_assert!(m % 2 == 1);
    if weights.is_empty() {
        return 0;
    }
    let hist = sumset_histogram(weights, m, strategy);
    weights
        .iter()
        .map(|&(c, w)| w as u128 * hist[((2 * c) % m) as usize] as u128)
        .sum()
}

/// Cyclic histogram `N(t) = sum_{a + b ≡ t} w(a) w(b)` of length `m`.
pub fn sumset_histogram(weights: &[(u64, u64)], m: u64, strategy: HistogramStrategy) -> Vec<u64> {
    let use_transform = match strategy {
        HistogramStrategy::Auto => weights.len() > DIRECT_HISTOGRAM_LIMIT,
        HistogramStrategy::Direct => false,
        HistogramStrategy::Transform => true,
    };
    let mut hist = vec![0u64; m as usize];
    if !use_transform {
        for &(a, wa) in weights {
            for &(b, wb) in weights {
                let t = (a + b) % m;
                hist[t as usize] += wa * wb;
            }
        }
        return hist;
    }
    let mut dense = vec![0u64; m as usize];
    let mut mass = 0u128;
    for &(a, w) in weights {
        dense[(a % m) as usize] += w;
        mass += w as u128;
    }
    // every linear coefficient is at most mass^2, which must stay below the NTT prime
    assert!(
        mass * mass < ntt::P as u128,
        "weight mass too large for exact transform"
    );
    let linear = ntt::convolve(&dense, &dense);
    for (t, v) in linear.into_iter().enumerate() {
        hist[t % m as usize] += v;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zq::{affine_apply, random_set, AffineMap};
    use proptest::prelude::*;

    fn set(q: u64, xs: &[u64]) -> ResidueSet {
        ResidueSet::new(q, xs.iter().copied()).unwrap()
    }

    /// All q^3 triples checked literally; independent of both counters.
    fn triple_oracle(s: &ResidueSet) -> u64 {
        let q = s.modulus();
        let mut n = 0;
        for a in s.iter() {
            for b in s.iter() {
                for c in s.iter() {
                    if (a + b) % q == (2 * c) % q {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn naive_examples() {
        let full = ResidueSet::full(101).unwrap();
        assert_eq!(count_3aps_naive(&full).total, 10_201);
        let r = count_3aps_naive(&set(7, &[4]));
        assert_eq!((r.total, r.trivial, r.nontrivial), (1, 1, 0));
        let r = count_3aps_naive(&set(7, &[1, 2, 3]));
        assert_eq!(triple_oracle(&set(7, &[1, 2, 3])), 5);
        assert_eq!((r.total, r.trivial, r.nontrivial), (5, 3, 2));
        assert_eq!(r.unordered_nontrivial(), 1);
        assert_eq!((r.mu_num, r.mu_den), (5, 49));
    }

    #[test]
    fn convolution_examples() {
        assert_eq!(
            count_3aps_convolution(&ResidueSet::empty(7).unwrap()).total,
            0
        );
        let s = set(7, &[0, 1, 2]);
        assert_eq!(count_3aps_convolution(&s), count_3aps_naive(&s));
        let t = set(41, &[1, 2, 4, 5, 11, 12, 14, 15]);
        assert_eq!(count_3aps_convolution(&t), count_3aps_naive(&t));
        assert_eq!(count_3aps_naive(&t).total, triple_oracle(&t));
    }

    #[test]
    fn full_set_mu_is_one() {
        let r = count_3aps_convolution(&ResidueSet::full(13).unwrap());
        assert_eq!((r.mu_num, r.mu_den), (1, 1));
        assert_eq!(r.mu(), 1.0);
        let r = count_3aps_naive(&ResidueSet::empty(13).unwrap());
        assert_eq!((r.mu_num, r.mu_den, r.total), (0, 1, 0));
    }

    #[test]
    fn json_shape() {
        let r = count_3aps_naive(&set(7, &[1, 2, 3]));
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"q":7,"size":3,"total":5,"trivial":3,"nontrivial":2,"mu_num":5,"mu_den":49}"#
        );
    }

    #[test]
    fn transform_path_matches_direct() {
        for (q, m, seed) in [(3, 2, 1), (101, 40, 2), (1009, 333, 3), (4099, 2000, 4)] {
            let s = random_set(q, m, seed).unwrap();
            let direct = count_3aps_convolution_with(&s, HistogramStrategy::Direct);
            let transform = count_3aps_convolution_with(&s, HistogramStrategy::Transform);
            assert_eq!(direct, transform);
            assert_eq!(direct, count_3aps_naive(&s));
        }
    }

    #[test]
    fn auto_switches_above_limit() {
        let q = 40_009;
        let s = random_set(q, DIRECT_HISTOGRAM_LIMIT as u64 + 5, 11).unwrap();
        assert_eq!(count_3aps_convolution(&s), count_3aps_naive(&s));
    }

    fn arb_set() -> impl Strategy<Value = ResidueSet> {
        prop::sample::select(vec![3u64, 5, 7, 11, 13, 61, 127, 401])
            .prop_flat_map(|q| {
                (
                    Just(q),
                    prop::collection::btree_set(0..q, 0..=(q as usize).min(60)),
                )
            })
            .prop_map(|(q, xs)| ResidueSet::new(q, xs).unwrap())
    }

    proptest! {
        #[test]
        fn counters_agree_and_trivial_law(s in arb_set()) {
            let naive = count_3aps_naive(&s);
            prop_assert_eq!(naive, count_3aps_convolution(&s));
            prop_assert_eq!(naive.trivial, s.len() as u64);
            prop_assert!(naive.total >= naive.trivial);
            prop_assert_eq!(naive.nontrivial % 2, 0);
            prop_assert!(naive.mu() <= 1.0);
        }

        #[test]
        fn affine_invariance(s in arb_set(), scale in 1i64..500, offset in 0i64..500) {
            prop_assume!(scale % s.modulus() as i64 != 0);
            let m = AffineMap::new(scale, offset, s.modulus()).unwrap();
            let image = affine_apply(&s, &m).unwrap();
            prop_assert_eq!(count_3aps_naive(&image), count_3aps_naive(&s));
        }
    }
}
