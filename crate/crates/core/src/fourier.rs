//! Exponential sums `f_S(t) = sum_{s in S} e(st)` with `e(u) = exp(2 pi i u)`.
//!
//! Coefficient tables are indexed by the symmetric range `|a| < q/2`. The
//! floating-point path is a cross-check; exact counts always come from
//! [`crate::ap_count`].

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::ap_count::count_3aps_convolution;
use crate::error::{Error, Result};
use crate::zq::{reduce, ResidueSet};

/// Moduli below this use direct `O(q |S|)` summation.
pub const DIRECT_DFT_LIMIT: u64 = 1 << 12;

pub const PARSEVAL_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn e(u: f64) -> Complex64 {
    let (s, c) = (TAU * u).sin_cos();
    Complex64::new(c, s)
}

/// `e(k/m)` for `k in 0..m`.
fn root_table(m: u64) -> Vec<Complex64> {
    (0..m).map(|k| e(k as f64 / m as f64)).collect()
}

/// `sum_{v in values} e(v * a / m)` with the phase reduced exactly modulo `m`.
pub fn phase_sum(values: &[u64], a: i64, m: u64) -> Complex64 {
    let a = reduce(a, m) as u128;
    values
        .iter()
        .map(|&v| e(((v as u128 * a) % m as u128) as f64 / m as f64))
        .sum()
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    q: u64,
    set_size: u64,
    /// Entry `i` holds `f_S(a/q)` for `a = i - (q-1)/2`.
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn set_size(&self) -> u64 {
        self.set_size
    }

    fn half(&self) -> i64 {
        ((self.q - 1) / 2) as i64
    }

    /// `f_S(a/q)` for any integer `a`.
    pub fn get(&self, a: i64) -> Complex64 {
        let c = crate::zq::centered(reduce(a, self.q), self.q);
        self.coefficients[(c + self.half()) as usize]
    }

    /// `(a, f_S(a/q))` over `-(q-1)/2 ..= (q-1)/2`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let h = self.half();
        self.coefficients
            .iter()
            .enumerate()
            .map(move |(i, &z)| (i as i64 - h, z))
    }

    /// `|sum_a |f(a/q)|^2 - q|S|| / (q|S|)`; zero for the empty set.
    pub fn parseval_residual(&self) -> f64 {
        let expected = self.q as f64 * self.set_size as f64;
        let energy: f64 = self.coefficients.iter().map(|z| z.norm_sqr()).sum();
        if expected == 0.0 {
            energy
        } else {
            (energy - expected).abs() / expected
        }
    }

    /// `max_a |f(-a/q) - conj f(a/q)|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let h = self.half();
        (0..=h)
            .map(|a| (self.get(-a) - self.get(a).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `a,re,im,abs`, one row per frequency.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,re,im,abs\n");
        for (a, z) in self.iter() {
            writeln!(out, "{a},{},{},{}", z.re, z.im, z.norm()).unwrap();
        }
        out
    }
}

pub fn dft(set: &ResidueSet) -> Spectrum {
    let q = set.modulus();
    let standard: Vec<Complex64> = if q < DIRECT_DFT_LIMIT {
        let roots = root_table(q);
        let elements = set.elements();
        (0..q)
            .into_par_iter()
            .map(|a| {
                elements
                    .iter()
                    .map(|&s| roots[((s * a) % q) as usize])
                    .sum::<Complex64>()
            })
            .collect()
    } else {
        let mut buf = vec![Complex64::new(0.0, 0.0); q as usize];
        for s in set.iter() {
            buf[s as usize] = Complex64::new(1.0, 0.0);
        }
        // the unnormalized inverse transform carries the e(+st) sign convention
        FftPlanner::new()
            .plan_fft_inverse(q as usize)
            .process(&mut buf);
        buf
    };
    let h = ((q - 1) / 2) as i64;
    let coefficients = (-h..=h).map(|a| standard[reduce(a, q) as usize]).collect();
    Spectrum {
        q,
        set_size: set.len() as u64,
        coefficients,
    }
}

/// `f_S(u)` by direct summation for a real frequency `u`.
pub fn eval_at_real(set: &ResidueSet, u: f64) -> Complex64 {
    set.iter().map(|s| e((s as f64 * u).rem_euclid(1.0))).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeSpectrum {
    pub q: u64,
    pub set_size: u64,
    pub epsilon: f64,
    /// Sorted ascending in the symmetric range; contains 0 whenever `|S| > 0`
    /// and `epsilon < 1`.
    pub frequencies: Vec<i64>,
}

impl LargeSpectrum {
    /// `1/(rho eps^2) + 1`, the Parseval cap on `frequencies.len()`.
    pub fn cardinality_bound(&self) -> f64 {
        let rho = self.set_size as f64 / self.q as f64;
        1.0 / (rho * self.epsilon * self.epsilon) + 1.0
    }

    /// The large frequencies in `(0, q/2)`.
    pub fn positive(&self) -> Vec<u64> {
        self.frequencies
            .iter()
            .filter(|&&a| a > 0)
            .map(|&a| a as u64)
            .collect()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = i64> + '_ {
        self.frequencies.iter().copied().filter(|&a| a != 0)
    }
}

pub fn large_spectrum(set: &ResidueSet, epsilon: f64) -> Result<LargeSpectrum> {
    if set.is_empty() {
        return Err(Error::EmptySet(
            "large spectrum threshold eps|S| is undefined",
        ));
    }
    large_spectrum_of(&dft(set), epsilon)
}

pub fn large_spectrum_of(spectrum: &Spectrum, epsilon: f64) -> Result<LargeSpectrum> {
    if spectrum.set_size == 0 {
        return Err(Error::EmptySet(
            "large spectrum threshold eps|S| is undefined",
        ));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let threshold = epsilon * spectrum.set_size as f64;
    let frequencies: Vec<i64> = spectrum
        .iter()
        .filter(|(_, z)| z.norm() > threshold)
        .map(|(a, _)| a)
        .collect();
    let large = LargeSpectrum {
        q: spectrum.q,
        set_size: spectrum.set_size,
        epsilon,
        frequencies,
    };
    assert!(
        large.frequencies.len() as f64 <= large.cardinality_bound(),
        "Parseval cap violated: {} frequencies, cap {}",
        large.frequencies.len(),
        large.cardinality_bound()
    );
    Ok(large)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierIdentity {
    pub q: u64,
    /// `(1/q) sum_{|a|<q/2} f(a/q)^2 f(-2a/q)`.
    pub value_re: f64,
    pub value_im: f64,
    pub exact_total: u64,
    pub residual: f64,
}

impl FourierIdentity {
    pub fn tolerance(&self) -> f64 {
        1e-6 * self.q as f64 * self.q as f64
    }

    pub fn passes(&self) -> bool {
        self.residual < self.tolerance() && self.value_im.abs() < self.tolerance()
    }
}

pub fn fourier_count_identity(set: &ResidueSet) -> FourierIdentity {
    fourier_count_identity_of(set, &dft(set))
}

pub fn fourier_count_identity_of(set: &ResidueSet, spectrum: &Spectrum) -> FourierIdentity {
    let q = set.modulus();
    let sum: Complex64 = spectrum
        .iter()
        .map(|(a, f)| f * f * spectrum.get(-2 * a))
        .sum();
    let value = sum / q as f64;
    let exact_total = count_3aps_convolution(set).total;
    FourierIdentity {
        q,
        value_re: value.re,
        value_im: value.im,
        exact_total,
        residual: (value.re - exact_total as f64).abs(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub bound: f64,
    pub ok: bool,
}

/// `|sum_{j=N+1}^{N+H} e(jt)|` against `min(H, 1/(2|t|))`.
pub fn dirichlet_bound_check(n: i64, h: u64, t: f64) -> Result<BoundCheck> {
    if h == 0 {
        return Err(Error::InvalidArgument("H must be at least 1".into()));
    }
    if !(-0.5..=0.5).contains(&t) {
        return Err(Error::Range(format!("t = {t} is outside [-1/2, 1/2]")));
    }
    // e((N+1)t) factors out with unit modulus
    let _ = n;
    let lhs = (0..h)
        .map(|i| e((i as f64 * t).rem_euclid(1.0)))
        .sum::<Complex64>()
        .norm();
    let bound = if t == 0.0 {
        h as f64
    } else {
        (h as f64).min(1.0 / (2.0 * t.abs()))
    };
    Ok(BoundCheck {
        lhs,
        bound,
        ok: lhs <= bound + 1e-12,
    })
}

/// Short exponential sum of `W` over the window `[N+1, N+H]` at frequency
/// `a/q`, against `2|W|(eps H/(rho q))^{1/3}`. `ok` is reported only.
pub fn short_sum_check(
    w: &ResidueSet,
    a: i64,
    n: u64,
    h: u64,
    epsilon: f64,
    rho: f64,
) -> Result<BoundCheck> {
    let q = w.modulus();
    if n.checked_add(h).is_none_or(|end| end > q - 1) {
        return Err(Error::Range(format!(
            "window [{}, {}] is not inside [0, {}]",
            n + 1,
            n.saturating_add(h),
            q - 1
        )));
    }
    let window: Vec<u64> = w.iter().filter(|&s| s > n && s <= n + h).collect();
    let lhs = phase_sum(&window, a, q).norm();
    let bound = 2.0 * w.len() as f64 * (epsilon * h as f64 / (rho * q as f64)).cbrt();
    Ok(BoundCheck {
        lhs,
        bound,
        ok: lhs <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zq::random_set;
    use proptest::prelude::*;

    fn set(q: u64, xs: &[u64]) -> ResidueSet {
        ResidueSet::new(q, xs.iter().copied()).unwrap()
    }

    #[test]
    fn full_and_singleton() {
        let sp = dft(&ResidueSet::full(101).unwrap());
        assert!((sp.get(0).re - 101.0).abs() < 1e-9);
        for a in 1..=50 {
            assert!(sp.get(a).norm() < 1e-9, "a = {a}");
        }
        let sp = dft(&set(101, &[0]));
        for (_, z) in sp.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetric_indexing() {
        let s = set(7, &[1, 3]);
        let sp = dft(&s);
        let got: Vec<i64> = sp.iter().map(|(a, _)| a).collect();
        assert_eq!(got, vec![-3, -2, -1, 0, 1, 2, 3]);
        for a in -10..10 {
            let direct = e(a as f64 / 7.0) + e(3.0 * a as f64 / 7.0);
            assert!((sp.get(a) - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn both_dft_paths_agree() {
        // 4099 is prime and above the direct limit
        let s = random_set(4099, 700, 9).unwrap();
        let fast = dft(&s);
        let roots = root_table(4099);
        for a in [-2049i64, -1000, -1, 0, 1, 17, 2049] {
            let direct: Complex64 = s
                .iter()
                .map(|x| roots[((x * reduce(a, 4099)) % 4099) as usize])
                .sum();
            assert!((fast.get(a) - direct).norm() < 1e-8 * 700.0);
        }
        assert!(fast.parseval_residual() < PARSEVAL_TOLERANCE);
        assert!(fast.conjugate_symmetry_defect() < 1e-9);
    }

    #[test]
    fn eval_at_real_examples() {
        let s = random_set(211, 50, 3).unwrap();
        assert!((eval_at_real(&s, 0.0) - Complex64::new(50.0, 0.0)).norm() < 1e-12);
        let sp = dft(&s);
        for a in [-105i64, -7, 1, 100] {
            let z = eval_at_real(&s, a as f64 / 211.0);
            assert!((z - sp.get(a)).norm() <= 1e-9 * 50.0);
        }
        assert!(eval_at_real(&set(7, &[0, 1]), 0.5).norm() < 1e-15);
    }

    #[test]
    fn large_spectrum_examples() {
        let full = large_spectrum(&ResidueSet::full(101).unwrap(), 0.5).unwrap();
        assert_eq!(full.frequencies, vec![0]);

        let ap = ResidueSet::new(101, (0..20).map(|i| (i * 7) % 101)).unwrap();
        let l = large_spectrum(&ap, 1.0 - 1e-9).unwrap();
        assert_eq!(l.frequencies, vec![0]);

        let s = random_set(1009, 100, 5).unwrap();
        let l = large_spectrum(&s, 0.3).unwrap();
        let rho: f64 = 100.0 / 1009.0;
        assert!(l.frequencies.len() as f64 <= (1.0 / (rho * 0.09)).floor() + 1.0);
        let sp = dft(&s);
        for (a, z) in sp.iter() {
            assert_eq!(l.frequencies.contains(&a), z.norm() > 30.0);
        }
    }

    #[test]
    fn large_spectrum_errors() {
        assert!(matches!(
            large_spectrum(&ResidueSet::empty(7).unwrap(), 0.5),
            Err(Error::EmptySet(_))
        ));
        assert!(large_spectrum(&set(7, &[1]), 0.0).is_err());
        assert!(large_spectrum(&set(7, &[1]), 1.5).is_err());
    }

    #[test]
    fn identity_examples() {
        let r = fourier_count_identity(&ResidueSet::empty(7).unwrap());
        assert_eq!(r.exact_total, 0);
        assert!(r.value_re.abs() < 1e-12);
        let r = fourier_count_identity(&set(7, &[1, 2, 3]));
        assert_eq!(r.exact_total, 5);
        assert!(r.residual < 1e-9 && r.passes());
        let r = fourier_count_identity(&ResidueSet::full(101).unwrap());
        assert!((r.value_re - 10_201.0).abs() < 1e-6);
    }

    #[test]
    fn dirichlet_examples() {
        for h in 1..40 {
            let c = dirichlet_bound_check(5, h, 0.5).unwrap();
            assert_eq!(c.bound, 1.0);
            assert!(c.ok);
        }
        let c = dirichlet_bound_check(0, 10, 1e-9).unwrap();
        assert!((c.lhs - 10.0).abs() < 1e-6 && c.ok);
        let c = dirichlet_bound_check(0, 10, 0.0).unwrap();
        assert_eq!((c.lhs, c.bound), (10.0, 10.0));
        assert!(dirichlet_bound_check(0, 0, 0.1).is_err());
        assert!(dirichlet_bound_check(0, 3, 0.6).is_err());
    }

    #[test]
    fn short_sum_examples() {
        let w = set(101, &[1, 2, 50, 90]);
        let c = short_sum_check(&w, 3, 10, 20, 0.1, 0.1).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.ok);
        let c = short_sum_check(&w, 0, 0, 60, 0.1, 0.1).unwrap();
        assert!((c.lhs - 3.0).abs() < 1e-12);
        let c = short_sum_check(&w, 7, 0, 100, 0.25, 0.04).unwrap();
        let direct: Complex64 = w
            .iter()
            .filter(|&s| s >= 1)
            .map(|s| e((7 * s) as f64 / 101.0))
            .sum();
        assert!((c.lhs - direct.norm()).abs() < 1e-12);
        assert!(matches!(
            short_sum_check(&w, 1, 50, 51, 0.1, 0.1),
            Err(Error::Range(_))
        ));
    }

    proptest! {
        #[test]
        fn parseval_and_symmetry(qi in 0usize..5, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let q = [3u64, 13, 257, 1021, 4111][qi];
            let m = (frac * q as f64) as u64;
            let s = random_set(q, m, seed).unwrap();
            let sp = dft(&s);
            prop_assert!(sp.parseval_residual() < PARSEVAL_TOLERANCE);
            prop_assert!(sp.conjugate_symmetry_defect() <= 1e-12 * (1.0 + m as f64) * (q as f64).log2().max(1.0));
            prop_assert!((sp.get(0).re - m as f64).abs() < 1e-9 * (1.0 + m as f64));
        }

        #[test]
        fn dirichlet_always_ok(n in -1_000_000i64..1_000_000, h in 1u64..2000, t in -0.5f64..=0.5) {
            let c = dirichlet_bound_check(n, h, t).unwrap();
            // independent direct sum including the N offset
            let direct: Complex64 = (n + 1..=n + h as i64)
                .map(|j| e((j as f64 * t).rem_euclid(1.0)))
                .sum();
            prop_assert!((direct.norm() - c.lhs).abs() < 1e-6);
            prop_assert!(c.ok, "lhs {} bound {}", c.lhs, c.bound);
        }
    }
}
