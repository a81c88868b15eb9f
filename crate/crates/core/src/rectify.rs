//! Dilation search that pulls the large spectrum of `S` towards 0, and the
//! normal form `W(k, v) = (4v)^{-1} hS + k` with its spectral certificate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{dft, large_spectrum_of, LargeSpectrum};
use crate::zq::{affine_apply, centered, mod_inverse, AffineMap, ResidueSet};

/// A dilation pair with `h * j ≡ 1 (mod q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dilation {
    pub j: u64,
    pub h: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationSearch {
    pub q: u64,
    pub epsilon: f64,
    /// Density `|S|/q` used in the exponent.
    pub rho: f64,
    /// Large-spectrum frequencies in `(0, q/2)`.
    pub positive_frequencies: Vec<u64>,
    /// `q^{1 - rho eps^2}`.
    pub radius: f64,
    /// `(q^{rho eps^2} + 1)^t < q`, which guarantees a witness exists.
    pub pigeonhole_holds: bool,
    /// `radius >= q/2`: every `j` is admissible and success means nothing.
    pub vacuous: bool,
    pub dilation: Option<Dilation>,
    /// Frequencies of the witness landing exactly on the radius.
    pub equality_cases: usize,
}

fn radius(q: u64, rho: f64, epsilon: f64) -> f64 {
    (q as f64).powf(1.0 - rho * epsilon * epsilon)
}

/// Scans `j = 1..q-1` for the smallest `j` with every `j a_i` within the
/// radius (least absolute residue, non-strict).
pub fn find_rectifying_dilation(set: &ResidueSet, epsilon: f64) -> Result<DilationSearch> {
    let large = crate::fourier::large_spectrum(set, epsilon)?;
    Ok(search_with_spectrum(set, &large))
}

pub(crate) fn search_with_spectrum(set: &ResidueSet, large: &LargeSpectrum) -> DilationSearch {
    let q = set.modulus();
    let rho = set.density();
    let epsilon = large.epsilon;
    let freqs = large.positive();
    let r = radius(q, rho, epsilon);
    let dilation = scan_dilations(q, &freqs, r);
    let equality_cases = dilation.map_or(0, |d| {
        freqs
            .iter()
            .filter(|&&a| least_abs_product(d.j, a, q) as f64 == r)
            .count()
    });
    DilationSearch {
        q,
        epsilon,
        rho,
        pigeonhole_holds: pigeonhole_condition(q, freqs.len(), rho * epsilon * epsilon),
        positive_frequencies: freqs,
        radius: r,
        vacuous: r >= q as f64 / 2.0,
        dilation,
        equality_cases,
    }
}

#[inline]
fn least_abs_product(j: u64, a: u64, q: u64) -> u64 {
    centered(((j as u128 * a as u128) % q as u128) as u64, q).unsigned_abs()
}

/// `(q^x + 1)^t < q`, evaluated in logarithms.
pub fn pigeonhole_condition(q: u64, t: usize, x: f64) -> bool {
    t as f64 * ((q as f64).powf(x) + 1.0).ln() < (q as f64).ln()
}

/// Smallest `j in [1, q-1]` with `|j a| <= radius` (least absolute residue)
/// for every listed frequency. The scan runs in parallel; the reduction keeps
/// the smallest witness.
pub fn scan_dilations(q: u64, frequencies: &[u64], radius: f64) -> Option<Dilation> {
    (1..q)
        .into_par_iter()
        .find_first(|&j| {
            frequencies
                .iter()
                .all(|&a| least_abs_product(j, a, q) as f64 <= radius)
        })
        .map(|j| Dilation {
            j,
            h: mod_inverse(j as i64, q).expect("j in [1, q-1]"),
        })
}

/// `W(k, v) = (4v)^{-1} S' + k (mod q)`.
pub fn build_w(s_prime: &ResidueSet, k: i64, v: u64) -> Result<ResidueSet> {
    let q = s_prime.modulus();
    if v == 0 || (4 * v as u128) % q as u128 == 0 {
        return Err(Error::InvalidArgument(format!(
            "v = {v}: 4v must be a unit modulo {q}"
        )));
    }
    let scale = mod_inverse(((4 * v as u128) % q as u128) as i64, q)?;
    affine_apply(s_prime, &AffineMap::new(scale as i64, k, q)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub a: i64,
    pub abs_f: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralCertificate {
    pub q: u64,
    pub epsilon: f64,
    pub rho: f64,
    pub v: u64,
    /// `q^{1 - rho eps^2}`.
    pub freq_bound: f64,
    /// Nonzero large frequencies of `W` that were checked.
    pub checked: Vec<i64>,
    pub violators: Vec<Violation>,
    pub equality_cases: usize,
    pub vacuous: bool,
    pub verified: bool,
}

/// Checks that every nonzero large frequency `a` of `W` has
/// `|a| <= 4v q^{1 - rho eps^2}` and `4v | a`.
pub fn spectral_certificate(
    w: &ResidueSet,
    epsilon: f64,
    rho: f64,
    v: u64,
) -> Result<SpectralCertificate> {
    let q = w.modulus();
    if v == 0 {
        return Err(Error::InvalidArgument("v must be at least 1".into()));
    }
    let freq_bound = radius(q, rho, epsilon);
    let vacuous = freq_bound >= q as f64 / 2.0;
    let spectrum = dft(w);
    let checked: Vec<i64> = if w.is_empty() {
        Vec::new()
    } else {
        large_spectrum_of(&spectrum, epsilon)?.nonzero().collect()
    };
    let limit = 4.0 * v as f64 * freq_bound;
    let step = 4 * v as i64;
    let mut violators = Vec::new();
    let mut equality_cases = 0;
    for &a in &checked {
        let mag = a.unsigned_abs() as f64;
        let mut reasons = Vec::new();
        if mag > limit {
            reasons.push(format!(
                "|a| = {} exceeds 4v q^(1-rho eps^2) = {limit:.3}",
                a.abs()
            ));
        } else if mag == limit {
            equality_cases += 1;
        }
        if a % step != 0 {
            reasons.push(format!("{a} is not divisible by 4v = {step}"));
        }
        if !reasons.is_empty() {
            violators.push(Violation {
                a,
                abs_f: spectrum.get(a).norm(),
                reason: reasons.join("; "),
            });
        }
    }
    Ok(SpectralCertificate {
        q,
        epsilon,
        rho,
        v,
        freq_bound,
        verified: violators.is_empty() && !vacuous,
        checked,
        violators,
        equality_cases,
        vacuous,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectificationCertificate {
    pub q: u64,
    pub h: u64,
    pub j: u64,
    pub v: u64,
    pub k: i64,
    pub epsilon: f64,
    pub rho: f64,
    pub freq_bound: f64,
    pub pigeonhole_holds: bool,
    pub search_equality_cases: usize,
    pub vacuous: bool,
    pub verified: bool,
    pub checked: Vec<i64>,
    pub violators: Vec<Violation>,
}

impl RectificationCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Full rectification: dilation search on `S`, `S' = hS`, `W = W(k, v)`, and
/// the certificate on `W`. Fails when no admissible dilation exists.
pub fn rectify(
    set: &ResidueSet,
    epsilon: f64,
    v: u64,
    k: i64,
) -> Result<(RectificationCertificate, ResidueSet)> {
    let search = find_rectifying_dilation(set, epsilon)?;
    let Some(d) = search.dilation else {
        return Err(Error::Precondition(format!(
            "no dilation localizes the large spectrum (pigeonhole condition {})",
            if search.pigeonhole_holds {
                "holds"
            } else {
                "fails"
            }
        )));
    };
    let s_prime = affine_apply(set, &AffineMap::new(d.h as i64, 0, set.modulus())?)?;
    let w = build_w(&s_prime, k, v)?;
    let cert = spectral_certificate(&w, epsilon, search.rho, v)?;
    Ok((
        RectificationCertificate {
            q: set.modulus(),
            h: d.h,
            j: d.j,
            v,
            k,
            epsilon,
            rho: search.rho,
            freq_bound: cert.freq_bound,
            pigeonhole_holds: search.pigeonhole_holds,
            search_equality_cases: search.equality_cases,
            vacuous: cert.vacuous,
            verified: cert.verified,
            checked: cert.checked,
            violators: cert.violators,
        },
        w,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap_count::count_3aps_naive;
    use crate::fourier::large_spectrum;

    fn set(q: u64, xs: &[u64]) -> ResidueSet {
        ResidueSet::new(q, xs.iter().copied()).unwrap()
    }

    /// Every `j` tested directly, independent of the parallel scan.
    fn scan_oracle(s: &ResidueSet, eps: f64) -> Option<u64> {
        let q = s.modulus();
        let freqs = large_spectrum(s, eps).unwrap().positive();
        let r = (q as f64).powf(1.0 - s.density() * eps * eps);
        (1..q).find(|&j| {
            freqs.iter().all(|&a| {
                let b = (j * a) % q;
                (b.min(q - b) as f64) <= r
            })
        })
    }

    #[test]
    fn no_large_frequencies_gives_identity() {
        let s = ResidueSet::full(101).unwrap();
        let r = find_rectifying_dilation(&s, 0.5).unwrap();
        assert!(r.positive_frequencies.is_empty());
        assert_eq!(r.dilation, Some(Dilation { j: 1, h: 1 }));
    }

    #[test]
    fn dilated_progression_is_rectified() {
        let q = 1009;
        let s = ResidueSet::new(q, (0..300u64).map(|i| (i * 37) % q)).unwrap();
        let r = find_rectifying_dilation(&s, 0.5).unwrap();
        assert!(!r.positive_frequencies.is_empty());
        let d = r.dilation.unwrap();
        assert_eq!(Some(d.j), scan_oracle(&s, 0.5));
        assert_eq!((d.h as u128 * d.j as u128) % q as u128, 1);
        // S' = hS has its large spectrum inside the radius
        let s_prime = affine_apply(&s, &AffineMap::new(d.h as i64, 0, q).unwrap()).unwrap();
        for a in large_spectrum(&s_prime, 0.5).unwrap().nonzero() {
            assert!((a.abs() as f64) <= r.radius, "a = {a}");
        }
    }

    #[test]
    fn no_admissible_dilation_when_pigeonhole_fails() {
        // every nonzero residue up to q/2 listed: any j permutes them, so the
        // maximum least residue is always 50 > 30
        let q = 101;
        let freqs: Vec<u64> = (1..=50).collect();
        assert_eq!(scan_dilations(q, &freqs, 30.0), None);
        assert!(!pigeonhole_condition(q, freqs.len(), 0.1));
        let exhaustive = (1..q).find(|&j| {
            freqs.iter().all(|&a| {
                let b = (j * a) % q;
                b.min(q - b) <= 30
            })
        });
        assert_eq!(exhaustive, None);
        assert_eq!(
            scan_dilations(q, &freqs, 50.0),
            Some(Dilation { j: 1, h: 1 })
        );
    }

    #[test]
    fn scan_matches_exhaustive_oracle() {
        let q = 97;
        for freqs in [
            vec![3u64],
            vec![5, 11],
            vec![2, 30, 41],
            vec![7, 19, 33, 46],
        ] {
            for r in [2.0, 5.5, 9.0, 20.0] {
                let exhaustive = (1..q).find(|&j| {
                    freqs.iter().all(|&a| {
                        let b = (j * a) % q;
                        (b.min(q - b) as f64) <= r
                    })
                });
                assert_eq!(scan_dilations(q, &freqs, r).map(|d| d.j), exhaustive);
            }
        }
    }

    #[test]
    fn build_w_examples() {
        // 4^-1 = 10 mod 13
        let w = build_w(&set(13, &[0, 4, 8]), 0, 1).unwrap();
        assert_eq!(w.elements(), &[0, 1, 2]);
        // 4v = 14 ≡ 1 mod 13 at v = ... (4v)^-1 ≡ 1 needs 4v ≡ 1: v = 10
        let s = set(13, &[2, 5, 11]);
        assert_eq!(build_w(&s, 0, 10).unwrap(), s);
        assert_eq!(build_w(&s, 3, 7).unwrap().len(), 3);
        assert!(build_w(&s, 0, 0).is_err());
        assert!(build_w(&set(11, &[1]), 0, 11).is_err());
    }

    #[test]
    fn build_w_preserves_counts() {
        let s = crate::zq::random_set(211, 40, 8).unwrap();
        for (k, v) in [(0, 1), (-5, 2), (100, 13)] {
            let w = build_w(&s, k, v).unwrap();
            assert_eq!(count_3aps_naive(&w), count_3aps_naive(&s));
        }
    }

    #[test]
    fn certificate_examples() {
        let full = ResidueSet::full(1009).unwrap();
        let c = spectral_certificate(&full, 0.5, 0.9, 1).unwrap();
        assert!(c.checked.is_empty() && c.verified && !c.vacuous);

        let s = ResidueSet::interval(1009, 0, 400).unwrap();
        let (cert, w) = rectify(&s, 0.6, 1, 0).unwrap();
        assert!(cert.verified, "{cert:?}");
        assert_eq!(count_3aps_naive(&w), count_3aps_naive(&s));

        let noisy = crate::zq::random_set(1009, 400, 1).unwrap();
        let c = spectral_certificate(&noisy, 0.05, 400.0 / 1009.0, 1).unwrap();
        assert!(!c.verified && !c.violators.is_empty());
    }

    #[test]
    fn vacuous_when_radius_exceeds_half() {
        let s = crate::zq::random_set(101, 10, 3).unwrap();
        let r = find_rectifying_dilation(&s, 0.1).unwrap();
        assert!(r.vacuous);
        let c = spectral_certificate(&s, 0.1, s.density(), 1).unwrap();
        assert!(c.vacuous && !c.verified);
    }
}
