//! Deterministic primality for 64-bit integers and prime scans.

use crate::error::{Error, Result};

/// These twelve bases make Miller-Rabin exact for every n < 3.3 * 10^24.
const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime in `[lo, hi]`, if any.
pub fn first_prime_in(lo: u64, hi: u64) -> Option<u64> {
    (lo..=hi).find(|&n| is_prime(n))
}

/// All primes in `[lo, hi]`, ascending.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&n| is_prime(n)).collect()
}

/// Smallest prime in `[x, x + floor(x^theta)]`, or `None` when the interval
/// holds no prime. A missing prime is an ordinary outcome for small `x`.
pub fn find_prime_in_interval(x: u64, theta: f64) -> Result<Option<u64>> {
    if x < 2 {
        return Err(Error::InvalidArgument(format!("x must be >= 2, got {x}")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    let width = (x as f64).powf(theta).floor();
    if width >= u64::MAX as f64 {
        return Err(Error::Range(format!("x^theta overflows for x = {x}")));
    }
    let hi = x
        .checked_add(width as u64)
        .ok_or_else(|| Error::Range(format!("interval end x + x^theta overflows for x = {x}")))?;
    Ok(first_prime_in(x, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn agrees_with_trial_division() {
        for n in 0..20_000u64 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
    }

    #[test]
    fn large_known_values() {
        assert!(is_prime((1u64 << 61) - 1));
        assert!(is_prime(18_446_744_073_709_551_557)); // largest 64-bit prime
        assert!(!is_prime(u64::MAX));
        // strong pseudoprime to bases 2..=37 would need > 3.3e24
        assert!(!is_prime(3_215_031_751)); // spsp(2,3,5,7)
        assert!(!is_prime(341_550_071_728_321)); // spsp to bases 2..=17
        assert!(!is_prime(4_294_967_297)); // F5
    }

    #[test]
    fn interval_examples() {
        assert_eq!(find_prime_in_interval(100, 0.53).unwrap(), Some(101));
        // floor(24^0.1) = 1 and both 24 and 25 are composite
        assert_eq!(24f64.powf(0.1).floor(), 1.0);
        assert_eq!(find_prime_in_interval(24, 0.1).unwrap(), None);
        assert_eq!(find_prime_in_interval(2, 1.0).unwrap(), Some(2));
    }

    #[test]
    fn interval_errors() {
        assert!(find_prime_in_interval(1, 0.5).is_err());
        assert!(find_prime_in_interval(10, 0.0).is_err());
        assert!(matches!(
            find_prime_in_interval(u64::MAX - 3, 1.0),
            Err(Error::Range(_))
        ));
    }
}
