//! Progression-free subsets of `{1..x}`, their embedding into `Z/qZ`, exact
//! extremal sizes for small `n`, and the density sequence used to pick `rho`.
//!
//! The sphere construction writes `n < x` in base `2D + 1` with every digit in
//! `0..=D`. Adding two such numbers never carries, so `u + w = 2v` forces the
//! digit vectors to satisfy the same relation, and three distinct points of a
//! sphere cannot be collinear that way. With `D = 1` the sphere restriction is
//! unnecessary: `{0, 1}` digits in base 3 are already progression-free.

use serde::{Deserialize, Serialize};

use crate::ap_count::count_3aps_convolution;
use crate::error::{Error, Result};
use crate::zq::{check_modulus, ResidueSet};

/// `2 sqrt(2 ln 2)`, the classical constant in `x / exp(C sqrt(ln x))`.
pub const BEHREND_C: f64 = 2.354_820_045_030_949_3;

/// Default ceiling on `n` for the exact extremal search.
pub const DEFAULT_APFREE_BUDGET: u64 = 40;
/// Bit-mask representation limit of the exact search.
pub const APFREE_HARD_LIMIT: u64 = 63;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehrendSet {
    pub x: u64,
    /// Number of base-`base` digits.
    pub dimension: u32,
    pub base: u64,
    /// Squared digit norm of the sphere, or `None` for the `{0,1}`-digit set.
    pub radius_sq: Option<u64>,
    /// Ascending, inside `[1, x]`.
    pub elements: Vec<u64>,
}

/// `exp(C sqrt(ln x))`.
pub fn behrend_l(x: f64, c: f64) -> f64 {
    (c * x.ln().max(0.0).sqrt()).exp()
}

impl BehrendSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `|B| >= x exp(-C sqrt(ln x))`.
    pub fn meets_size_bound(&self, c: f64) -> bool {
        self.elements.len() as f64 >= self.x as f64 / behrend_l(self.x as f64, c)
    }
}

fn digits_needed(x: u64, base: u64) -> u32 {
    let mut d = 0;
    let mut reach = 1u128;
    while reach < x as u128 {
        reach *= base as u128;
        d += 1;
    }
    d.max(1)
}

/// Numbers in `[0, x)` whose base-`base` digits (length `dim`) are all
/// `<= max_digit`, visited with their squared digit norm.
fn for_each_small_digit_number(
    x: u64,
    base: u64,
    dim: u32,
    max_digit: u64,
    f: &mut impl FnMut(u64, u64),
) {
    #[allow(clippy::too_many_arguments)]
    fn go(
        pos: u32,
        value: u64,
        norm: u64,
        place: u64,
        x: u64,
        base: u64,
        max_digit: u64,
        f: &mut impl FnMut(u64, u64),
    ) {
        if value >= x {
            return;
        }
        if pos == 0 {
            f(value, norm);
            return;
        }
        for digit in 0..=max_digit {
            let v = value as u128 + digit as u128 * place as u128;
            if v >= x as u128 {
                break;
            }
            go(
                pos - 1,
                v as u64,
                norm + digit * digit,
                place / base.max(1),
                x,
                base,
                max_digit,
                f,
            );
        }
    }
    let top_place = (base as u128).pow(dim - 1);
    if top_place > u64::MAX as u128 {
        return;
    }
    go(dim, 0, 0, top_place as u64, x, base, max_digit, f);
}

fn better(candidate: &[u64], best: &[u64]) -> bool {
    candidate.len() > best.len() || (candidate.len() == best.len() && candidate < best)
}

/// Largest set found over the `{0,1}`-digit construction and the sphere
/// construction for every dimension, a few digit bounds near the optimum,
/// and every radius. Ties keep the lexicographically least element list.
pub fn behrend_set(x: u64) -> Result<BehrendSet> {
    if x < 2 {
        return Err(Error::InvalidArgument(format!("x must be >= 2, got {x}")));
    }
    let ternary_dim = digits_needed(x, 3);
    let mut elements = Vec::new();
    for_each_small_digit_number(x, 3, ternary_dim, 1, &mut |n, _| elements.push(n + 1));
    elements.sort_unstable();
    let mut best = BehrendSet {
        x,
        dimension: ternary_dim,
        base: 3,
        radius_sq: None,
        elements,
    };

    let max_dim = 64 - x.leading_zeros();
    for dim in 2..=max_dim {
        let root = (x as f64).powf(1.0 / dim as f64);
        let d_min = (((root - 1.0) / 2.0).ceil() as u64).max(1);
        for max_digit in d_min..d_min + 3 {
            let base = 2 * max_digit + 1;
            if (base as u128).pow(dim - 1) >= x as u128 {
                // leading digit would always be zero; covered by a lower dimension
                continue;
            }
            let mut by_norm: std::collections::BTreeMap<u64, Vec<u64>> = Default::default();
            for_each_small_digit_number(x, base, dim, max_digit, &mut |n, norm| {
                by_norm.entry(norm).or_default().push(n + 1)
            });
            for (norm, mut shell) in by_norm {
                shell.sort_unstable();
                if better(&shell, &best.elements) {
                    best = BehrendSet {
                        x,
                        dimension: dim,
                        base,
                        radius_sq: Some(norm),
                        elements: shell,
                    };
                }
            }
        }
    }
    Ok(best)
}

/// True iff no `u != w` in `set` have an integer midpoint `(u + w)/2` in `set`.
pub fn verify_ap_free(set: &[u64]) -> bool {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for (i, &u) in sorted.iter().enumerate() {
        for &w in &sorted[i + 1..] {
            if (u + w) % 2 == 0 && sorted.binary_search(&((u + w) / 2)).is_ok() {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSet {
    pub t: ResidueSet,
    /// Replication count `K`; copies are `s + 2kx` for `0 <= k <= K`.
    pub k: u64,
    /// `floor(q / 4x)`, kept to document the off-by-one against `k`.
    pub k_unclamped: u64,
    pub source: BehrendSet,
    pub density: f64,
    /// `1 / (4 L(x))`.
    pub target_density: f64,
    /// `|B| K^2`.
    pub count_bound: u64,
    /// `q^2 / (x + 1)`.
    pub corollary_bound: f64,
}

impl EmbeddedSet {
    /// Exact ordered nontrivial 3-AP count of `T` modulo `q`.
    pub fn nontrivial(&self) -> u64 {
        count_3aps_convolution(&self.t).nontrivial
    }
}

/// `T = {s + 2kx : s in B, 0 <= k <= K}` with `K` the largest value keeping
/// `max T <= (q-1)/2`, so integer and modular progressions in `T` coincide.
pub fn embed_mod_q(b: &BehrendSet, q: u64, c: f64) -> Result<EmbeddedSet> {
    check_modulus(q)?;
    let x = b.x;
    if q <= 4 * x {
        return Err(Error::Range(format!("need q > 4x, got q = {q}, x = {x}")));
    }
    let half = (q - 1) / 2;
    let k = (half - x) / (2 * x);
    let t = ResidueSet::new(
        q,
        (0..=k).flat_map(|kk| b.elements.iter().map(move |&s| s + 2 * kk * x)),
    )?;
    debug_assert!(t.elements().last().is_none_or(|&m| m <= half));
    Ok(EmbeddedSet {
        density: t.density(),
        target_density: 1.0 / (4.0 * behrend_l(x as f64, c)),
        count_bound: b.elements.len() as u64 * k * k,
        corollary_bound: (q as f64) * (q as f64) / (x as f64 + 1.0),
        k_unclamped: q / (4 * x),
        k,
        t,
        source: b.clone(),
    })
}

fn check_apfree_budget(n: u64, budget: u64) -> Result<()> {
    if n > budget.min(APFREE_HARD_LIMIT) {
        return Err(Error::Budget {
            what: "exact progression-free search over {1..n}",
            needed: n as u128,
            budget: budget.min(APFREE_HARD_LIMIT) as u128,
        });
    }
    Ok(())
}

/// `nu[m]` and a witness bit-mask for every `m <= n`, computed once up to the hard limit.
fn apfree_table(n: u64) -> &'static [(u32, u64)] {
    static TABLE: std::sync::OnceLock<Vec<(u32, u64)>> = std::sync::OnceLock::new();
    &TABLE.get_or_init(|| build_apfree_table(APFREE_HARD_LIMIT))[..=n as usize]
}

/// `nu[m]` and a witness bit-mask (bit `i` = element `i`) for every `m <= n`.
fn build_apfree_table(n: u64) -> Vec<(u32, u64)> {
    let n = n as usize;
    let mut table = vec![(0u32, 0u64); n + 1];
    for m in 1..=n {
        let (prev, prev_mask) = table[m - 1];
        let target = prev + 1;
        // a set of size nu(m-1)+1 inside {1..m} must contain m
        let found = extend_down(m - 1, 1u64 << m, 1, target, &table);
        table[m] = match found {
            Some(mask) => (target, mask),
            None => (prev, prev_mask),
        };
    }
    table
}

/// Depth-first completion to `target` elements, deciding `i, i-1, ..., 1`
/// (include before exclude) and pruning with the exact optimum on `{1..i}`.
fn extend_down(
    i: usize,
    chosen: u64,
    count: u32,
    target: u32,
    table: &[(u32, u64)],
) -> Option<u64> {
    if count == target {
        return Some(chosen);
    }
    if i == 0 || count + table[i].0 < target {
        return None;
    }
    // i is below every chosen element, so any progression through it starts at i
    let blocked =
        (1..=(63 - i) / 2).any(|d| (chosen >> d) & (chosen >> (2 * d)) & (1u64 << i) != 0);
    if !blocked {
        if let Some(found) = extend_down(i - 1, chosen | (1u64 << i), count + 1, target, table) {
            return Some(found);
        }
    }
    extend_down(i - 1, chosen, count, target, table)
}

fn mask_to_vec(mask: u64) -> Vec<u64> {
    (1..64).filter(|&i| mask & (1u64 << i) != 0).collect()
}

/// Exact maximum size of a progression-free subset of `{1..n}`.
pub fn max_apfree_size(n: u64, budget: u64) -> Result<u64> {
    Ok(max_apfree_set(n, budget)?.len() as u64)
}

/// A maximum progression-free subset of `{1..n}`, ascending.
pub fn max_apfree_set(n: u64, budget: u64) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    check_apfree_budget(n, budget)?;
    Ok(mask_to_vec(apfree_table(n)[n as usize].1))
}

/// `nu(1), ..., nu(n)`.
pub fn max_apfree_sizes(n: u64, budget: u64) -> Result<Vec<u64>> {
    check_apfree_budget(n, budget)?;
    Ok(apfree_table(n)
        .iter()
        .skip(1)
        .map(|&(v, _)| v as u64)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HBound {
    pub rho: f64,
    /// Least `M` with `nu(m) < rho m` for every `m in [M, certified_up_to]`.
    pub m: u64,
    pub certified_up_to: u64,
}

/// Finite-range surrogate for `h(rho)`; `None` when `nu(m_max) >= rho m_max`.
pub fn h_of_rho(rho: f64, m_max: u64) -> Result<Option<HBound>> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must lie in (0, 1], got {rho}"
        )));
    }
    let sizes = max_apfree_sizes(m_max, APFREE_HARD_LIMIT)?;
    let mut least = None;
    for m in (1..=m_max).rev() {
        if (sizes[m as usize - 1] as f64) < rho * m as f64 {
            least = Some(m);
        } else {
            break;
        }
    }
    Ok(least.map(|m| HBound {
        rho,
        m,
        certified_up_to: m_max,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSequence {
    pub k: f64,
    pub c: f64,
    pub terms: Vec<f64>,
    /// Set when a term underflowed and the sequence was cut short.
    pub truncated: bool,
}

/// `x_1 = exp(-2 C^2 ln k)`, `x_{n+1} = x_n (1 - C^2 ln k / |ln x_n|)`.
pub fn rho_sequence(k: f64, c: f64, n_max: usize) -> Result<RhoSequence> {
    if k.is_nan() || k <= 1.0 || c.is_nan() || c <= 0.0 || n_max == 0 {
        return Err(Error::InvalidArgument(format!(
            "need k > 1, C > 0, n_max >= 1 (got k = {k}, C = {c}, n_max = {n_max})"
        )));
    }
    let step = c * c * k.ln();
    let mut terms = Vec::with_capacity(n_max);
    let mut truncated = false;
    let mut x = (-2.0 * step).exp();
    while terms.len() < n_max {
        if !x.is_normal() {
            truncated = true;
            break;
        }
        terms.push(x);
        x *= 1.0 - step / x.ln().abs();
    }
    Ok(RhoSequence {
        k,
        c,
        terms,
        truncated,
    })
}
