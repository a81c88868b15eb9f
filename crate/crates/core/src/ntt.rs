//! Exact integer convolution via a number-theoretic transform over the prime
//! `P = 2^64 - 2^32 + 1`.
//!
//! Convolution of non-negative inputs is exact as long as every output
//! coefficient is below `P`; callers check that bound.

use crate::prime::{mul_mod, pow_mod};

pub const P: u64 = 0xFFFF_FFFF_0000_0001;
const GENERATOR: u64 = 7;
const TWO_ADICITY: u32 = 32;

#[inline]
fn add(a: u64, b: u64) -> u64 {
    let (s, carry) = a.overflowing_add(b);
    if carry || s >= P {
        s.wrapping_sub(P)
    } else {
        s
    }
}

#[inline]
fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a.wrapping_sub(b).wrapping_add(P)
    }
}

fn transform(values: &mut [u64], inverse: bool) {
    let n = values.len();
    assert!(n.is_power_of_two() && n.trailing_zeros() <= TWO_ADICITY);
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            values.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let mut w_len = pow_mod(GENERATOR, (P - 1) / len as u64, P);
        if inverse {
            w_len = pow_mod(w_len, P - 2, P);
        }
        for chunk in values.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(len / 2);
            let mut w = 1u64;
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let t = mul_mod(*b, w, P);
                *b = sub(*a, t);
                *a = add(*a, t);
                w = mul_mod(w, w_len, P);
            }
        }
        len <<= 1;
    }
    if inverse {
        let n_inv = pow_mod(n as u64, P - 2, P);
        for v in values.iter_mut() {
            *v = mul_mod(*v, n_inv, P);
        }
    }
}

/// Linear convolution `c[k] = sum_{i+j=k} a[i] b[j]`, reduced modulo `P`.
pub fn convolve(a: &[u64], b: &[u64]) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut fa = vec![0u64; n];
    let mut fb = vec![0u64; n];
    fa[..a.len()]
        .iter_mut()
        .zip(a)
        .for_each(|(d, &s)| *d = s % P);
    fb[..b.len()]
        .iter_mut()
        .zip(b)
        .for_each(|(d, &s)| *d = s % P);
    transform(&mut fa, false);
    transform(&mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = mul_mod(*x, *y, P);
    }
    transform(&mut fa, true);
    fa.truncate(out_len);
    fa
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schoolbook(a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut out = vec![0u128; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x as u128 * y as u128;
            }
        }
        out.into_iter().map(|v| (v % P as u128) as u64).collect()
    }

    #[test]
    fn root_has_full_order() {
        let w = pow_mod(GENERATOR, (P - 1) >> TWO_ADICITY, P);
        assert_eq!(pow_mod(w, 1 << TWO_ADICITY, P), 1);
        assert_ne!(pow_mod(w, 1 << (TWO_ADICITY - 1), P), 1);
    }

    #[test]
    fn small_cases() {
        assert_eq!(convolve(&[1, 1], &[1, 1]), vec![1, 2, 1]);
        assert_eq!(convolve(&[3], &[5, 7]), vec![15, 21]);
        assert!(convolve(&[], &[1]).is_empty());
    }

    proptest! {
        #[test]
        fn matches_schoolbook(a in prop::collection::vec(0u64..1_000_000, 1..70),
                              b in prop::collection::vec(0u64..1_000_000, 1..70)) {
            prop_assert_eq!(convolve(&a, &b), schoolbook(&a, &b));
        }
    }
}
