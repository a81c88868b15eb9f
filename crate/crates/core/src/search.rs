//! Minimum nontrivial 3-AP counts over `m`-subsets of `Z/qZ`: exhaustive
//! search, swap-neighbourhood local search and annealing, the Varnavides
//! double-counting audit, and the `r_q / r_n` ratio table.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ap_count::{count_3aps_convolution, midpoint, ApCountReport};
use crate::behrend::{h_of_rho, max_apfree_sizes, APFREE_HARD_LIMIT};
use crate::error::{Error, Result};
use crate::prime::primes_in;
use crate::zq::{check_modulus, derive_seed, rng_from_seed, ResidueSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Exhaustive,
    Local,
    Anneal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimality {
    Proven,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub set: ResidueSet,
    pub report: ApCountReport,
    pub method: SearchMethod,
    pub iterations: u64,
    pub seed: Option<u64>,
    pub optimality: Optimality,
}

/// `m = ceil(rho q)`, with a small slack so `0.3 * 10` stays 3.
pub fn cardinality_for(rho: f64, q: u64) -> u64 {
    ((rho * q as f64) - 1e-9).ceil().max(0.0) as u64
}

/// Exact `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Membership plus running total, updated in `O(|S|)` per insertion or removal.
#[derive(Clone, Debug)]
pub(crate) struct Tracker {
    q: u64,
    member: Vec<bool>,
    elems: Vec<u64>,
    pos: Vec<usize>,
    total: u64,
}

impl Tracker {
    pub(crate) fn new(q: u64) -> Self {
        Tracker {
            q,
            member: vec![false; q as usize],
            elems: Vec::new(),
            pos: vec![usize::MAX; q as usize],
            total: 0,
        }
    }

    pub(crate) fn from_set(set: &ResidueSet) -> Self {
        let mut t = Tracker::new(set.modulus());
        for x in set.iter() {
            t.insert(x);
        }
        t
    }

    pub(crate) fn total(&self) -> u64 {
        self.total
    }

    pub(crate) fn nontrivial(&self) -> u64 {
        self.total - self.elems.len() as u64
    }

    pub(crate) fn contains(&self, x: u64) -> bool {
        self.member[x as usize]
    }

    /// Ordered triples of `A ∪ {x}` using `x` at least once, where
    /// `A = S \ {skip}` and `x ∉ A`: `x` as midpoint, or as one endpoint.
    fn through(&self, x: u64, skip: Option<u64>) -> u64 {
        let q = self.q;
        let has = |y: u64| self.member[y as usize] && Some(y) != skip;
        let mut as_mid = 0u64;
        let mut as_end = 0u64;
        for &a in &self.elems {
            if Some(a) == skip {
                continue;
            }
            if has((2 * x + q - a) % q) {
                as_mid += 1;
            }
            if has((2 * a + q - x) % q) {
                as_end += 1;
            }
        }
        1 + as_mid + 2 * as_end
    }

    pub(crate) fn insert(&mut self, x: u64) {
        debug_assert!(!self.contains(x));
        self.total += self.through(x, None);
        self.member[x as usize] = true;
        self.pos[x as usize] = self.elems.len();
        self.elems.push(x);
    }

    pub(crate) fn remove(&mut self, x: u64) {
        debug_assert!(self.contains(x));
        let i = self.pos[x as usize];
        self.elems.swap_remove(i);
        if let Some(&moved) = self.elems.get(i) {
            self.pos[moved as usize] = i;
        }
        self.member[x as usize] = false;
        self.pos[x as usize] = usize::MAX;
        self.total -= self.through(x, None);
    }

    /// Change in total count when `out` is replaced by `inn`.
    pub(crate) fn swap_delta(&self, out: u64, inn: u64) -> i64 {
        self.through(inn, Some(out)) as i64 - self.through(out, Some(out)) as i64
    }

    pub(crate) fn to_set(&self) -> ResidueSet {
        ResidueSet::new(self.q, self.elems.iter().copied())
            .expect("tracker holds distinct residues")
    }
}

/// Signed change of the total ordered count when `out` leaves `set` and `inn`
/// enters. Requires `out ∈ set`, `inn ∉ set`.
pub fn delta_count(set: &ResidueSet, out: u64, inn: u64) -> Result<i64> {
    let q = set.modulus();
    if out >= q || !set.contains(out) {
        return Err(Error::InvalidArgument(format!(
            "out element {out} is not in the set"
        )));
    }
    if inn >= q || set.contains(inn) {
        return Err(Error::InvalidArgument(format!(
            "in element {inn} is already in the set or out of range"
        )));
    }
    Ok(Tracker::from_set(set).swap_delta(out, inn))
}

fn finish(
    set: ResidueSet,
    method: SearchMethod,
    iterations: u64,
    seed: Option<u64>,
    optimality: Optimality,
) -> SearchResult {
    let report = count_3aps_convolution(&set);
    SearchResult {
        set,
        report,
        method,
        iterations,
        seed,
        optimality,
    }
}

fn check_cardinality(q: u64, m: u64) -> Result<()> {
    check_modulus(q)?;
    if m > q {
        return Err(Error::Cardinality { m, q });
    }
    Ok(())
}

/// Best `(nontrivial count, elements)` found in one branch.
type Witness = (u64, Vec<u64>);

/// Global minimum of the nontrivial count over all `m`-subsets with the
/// lexicographically least witness.
///
/// Translations and invertible dilations preserve counts and never make a
/// witness lexicographically larger once it is moved to contain `0` and `1`,
/// so only subsets containing both are enumerated. The budget still applies
/// to the full `C(q, m)`.
pub fn exact_min(q: u64, m: u64, budget: u128) -> Result<SearchResult> {
    check_cardinality(q, m)?;
    let needed = binomial(q, m);
    if needed > budget {
        return Err(Error::Budget {
            what: "exhaustive search over C(q, m) subsets",
            needed,
            budget,
        });
    }
    if m < 3 {
        let set = ResidueSet::interval(q, 0, m)?;
        return Ok(finish(
            set,
            SearchMethod::Exhaustive,
            1,
            None,
            Optimality::Proven,
        ));
    }

    // a fixed incumbent keeps the explored node count independent of scheduling
    let bound = if m < q {
        let probe = LocalConfig {
            method: SearchMethod::Local,
            moves: 50 * q,
            restarts: 2,
            ..LocalConfig::default()
        };
        local_search(q, m, 0, &probe)?.report.nontrivial
    } else {
        q * q - q
    };
    let branches: Vec<(u64, Option<Witness>)> = (2..=q - (m - 2))
        .into_par_iter()
        .map(|third| {
            let mut t = Tracker::new(q);
            t.insert(0);
            t.insert(1);
            t.insert(third);
            let mut chosen = vec![0, 1, third];
            let mut best = None;
            let mut nodes = 0u64;
            dfs(
                &mut t,
                &mut chosen,
                third + 1,
                m,
                &mut best,
                bound,
                &mut nodes,
            );
            (nodes, best)
        })
        .collect();

    let iterations = branches.iter().map(|(n, _)| n).sum();
    let (_, witness) = branches
        .into_iter()
        .filter_map(|(_, b)| b)
        .min()
        .expect("some m-subset always exists");
    let set = ResidueSet::new(q, witness)?;
    Ok(finish(
        set,
        SearchMethod::Exhaustive,
        iterations,
        None,
        Optimality::Proven,
    ))
}

fn dfs(
    t: &mut Tracker,
    chosen: &mut Vec<u64>,
    next: u64,
    m: u64,
    best: &mut Option<(u64, Vec<u64>)>,
    bound: u64,
    nodes: &mut u64,
) {
    *nodes += 1;
    let here = t.nontrivial();
    // ties with other branches must survive so the least witness wins the merge
    if here > bound {
        return;
    }
    if matches!(best, Some((b, _)) if here >= *b) {
        return;
    }
    let remaining = m - chosen.len() as u64;
    if remaining == 0 {
        *best = Some((here, chosen.clone()));
        return;
    }
    for x in next..=t.q - remaining {
        t.insert(x);
        chosen.push(x);
        dfs(t, chosen, x + 1, m, best, bound, nodes);
        chosen.pop();
        t.remove(x);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    /// `Local` (descent over non-worsening swaps) or `Anneal`.
    pub method: SearchMethod,
    /// Proposed swaps per restart.
    pub moves: u64,
    pub restarts: u32,
    /// Initial temperature; `None` means `m`.
    pub t0: Option<f64>,
    pub cooling: f64,
    /// Full recount after this many accepted moves (and at the end).
    pub recount_every: u64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            method: SearchMethod::Anneal,
            moves: 4000,
            restarts: 8,
            t0: None,
            cooling: 0.995,
            recount_every: 256,
        }
    }
}

fn recount_check(t: &Tracker) -> Result<()> {
    let recount = count_3aps_convolution(&t.to_set()).total;
    if recount != t.total() {
        return Err(Error::DeltaMismatch {
            running: t.total(),
            recount,
        });
    }
    Ok(())
}

fn run_restart(q: u64, m: u64, seed: u64, config: &LocalConfig) -> Result<(u64, Vec<u64>, u64)> {
    let mut rng = rng_from_seed(seed);
    let start = rand::seq::index::sample(&mut rng, q as usize, m as usize);
    let mut t = Tracker::new(q);
    for x in start.iter() {
        t.insert(x as u64);
    }
    let mut best = (t.nontrivial(), sorted(&t.elems));
    let mut temperature = config.t0.unwrap_or(m as f64);
    let mut accepted = 0u64;
    for _ in 0..config.moves {
        let out = t.elems[rng.random_range(0..t.elems.len())];
        let inn = loop {
            let c = rng.random_range(0..q);
            if !t.contains(c) {
                break c;
            }
        };
        let delta = t.swap_delta(out, inn);
        let accept = match config.method {
            SearchMethod::Anneal => {
                delta <= 0 || rng.random::<f64>() < (-(delta as f64) / temperature).exp()
            }
            _ => delta <= 0,
        };
        temperature *= config.cooling;
        if !accept {
            continue;
        }
        let before = t.total() as i64;
        t.remove(out);
        t.insert(inn);
        debug_assert_eq!(t.total() as i64, before + delta);
        accepted += 1;
        if config.recount_every > 0 && accepted % config.recount_every == 0 {
            recount_check(&t)?;
        }
        let here = t.nontrivial();
        if here <= best.0 {
            let elems = sorted(&t.elems);
            if here < best.0 || elems < best.1 {
                best = (here, elems);
            }
        }
    }
    recount_check(&t)?;
    Ok((best.0, best.1, config.moves))
}

fn sorted(xs: &[u64]) -> Vec<u64> {
    let mut v = xs.to_vec();
    v.sort_unstable();
    v
}

/// Swap-neighbourhood search from `config.restarts` random starts, run in
/// parallel with seeds derived from `seed`. Deterministic per seed.
pub fn local_search(q: u64, m: u64, seed: u64, config: &LocalConfig) -> Result<SearchResult> {
    check_cardinality(q, m)?;
    if config.method == SearchMethod::Exhaustive {
        return Err(Error::InvalidArgument(
            "local_search needs method local or anneal".into(),
        ));
    }
    if !(config.cooling > 0.0 && config.cooling <= 1.0) || config.restarts == 0 {
        return Err(Error::InvalidArgument(
            "cooling must lie in (0, 1] and restarts must be positive".into(),
        ));
    }
    if m == 0 || m == q {
        let set = ResidueSet::interval(q, 0, m)?;
        return Ok(finish(
            set,
            config.method,
            0,
            Some(seed),
            Optimality::Heuristic,
        ));
    }
    let runs: Vec<(u64, Vec<u64>, u64)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(q, m, derive_seed(seed, r as u64), config))
        .collect::<Result<_>>()?;
    let iterations = runs.iter().map(|r| r.2).sum();
    let (_, witness, _) = runs.into_iter().min().expect("restarts > 0");
    let set = ResidueSet::new(q, witness)?;
    Ok(finish(
        set,
        config.method,
        iterations,
        Some(seed),
        Optimality::Heuristic,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarnavidesAudit {
    pub q: u64,
    pub k: u64,
    pub rho: f64,
    pub set_size: u64,
    /// `q (q - 1)`.
    pub progressions: u64,
    /// `sum_h |h ∩ S|`; equals `k |S| (q - 1)`.
    pub hits: u64,
    pub hits_expected: u64,
    pub identity_holds: bool,
    /// `#{h : |h ∩ S| / k >= rho / 2}`.
    pub dense: u64,
    /// Dense progressions whose overlap with `S` holds a nontrivial 3-AP.
    pub dense_with_ap: u64,
    /// `nu(k) < rho k / 2`: every dense progression then holds a 3-AP.
    pub hypothesis_met: bool,
    /// `q^2 mu_q(S)`, the ordered total.
    pub total: u64,
    /// `dense / k^2`.
    pub chain_value: f64,
    /// `total >= dense / k^2`, decided exactly. Guaranteed only under the hypothesis.
    pub chain_holds: bool,
    /// `total >= dense_with_ap / k^2`, which needs no hypothesis.
    pub ap_chain_holds: bool,
    /// Finite-range `h(rho / 2)`, certified up to 63.
    pub h_half_rho: Option<u64>,
    /// `rho / (16 h(rho/2)^2)`.
    pub kappa: Option<f64>,
}

/// Least progression length `k <= 63` for which dense progressions are
/// forced to contain a 3-AP over the whole certified range.
pub fn audit_length(rho: f64) -> Result<Option<u64>> {
    Ok(h_of_rho(rho / 2.0, APFREE_HARD_LIMIT)?.map(|h| h.m.max(3)))
}

fn has_nontrivial_ap(xs: &[u64], q: u64) -> bool {
    xs.iter()
        .enumerate()
        .any(|(i, &u)| xs[i + 1..].iter().any(|&w| xs.contains(&midpoint(u, w, q))))
}

/// Enumerates every `k`-term progression `x, x+d, ..., x+(k-1)d` with
/// `d != 0` and scores its overlap with `S`.
pub fn varnavides_audit(
    set: &ResidueSet,
    rho: f64,
    k: u64,
    budget: u128,
) -> Result<VarnavidesAudit> {
    let q = set.modulus();
    if k < 3 || q <= k {
        return Err(Error::InvalidArgument(format!(
            "need 3 <= k < q, got k = {k}, q = {q}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must lie in (0, 1], got {rho}"
        )));
    }
    let cost = q as u128 * q as u128 * k as u128;
    if cost > budget {
        return Err(Error::Budget {
            what: "progression audit q^2 k",
            needed: cost,
            budget,
        });
    }
    let (hits, dense, dense_with_ap) = (1..q)
        .into_par_iter()
        .map(|d| {
            let mut acc = (0u64, 0u64, 0u64);
            let mut inside = Vec::with_capacity(k as usize);
            for x in 0..q {
                inside.clear();
                let mut y = x;
                for _ in 0..k {
                    if set.contains(y) {
                        inside.push(y);
                    }
                    y = (y + d) % q;
                }
                acc.0 += inside.len() as u64;
                if 2.0 * inside.len() as f64 >= rho * k as f64 {
                    acc.1 += 1;
                    acc.2 += has_nontrivial_ap(&inside, q) as u64;
                }
            }
            acc
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));

    let total = count_3aps_convolution(set).total;
    let hits_expected = k * set.len() as u64 * (q - 1);
    let hypothesis_met = k <= APFREE_HARD_LIMIT
        && (max_apfree_sizes(k, APFREE_HARD_LIMIT)?[k as usize - 1] as f64) < rho * k as f64 / 2.0;
    debug_assert!(!hypothesis_met || dense == dense_with_ap);
    let h_half = h_of_rho(rho / 2.0, APFREE_HARD_LIMIT)?.map(|h| h.m);
    let k2 = (k * k) as u128;
    Ok(VarnavidesAudit {
        q,
        k,
        rho,
        set_size: set.len() as u64,
        progressions: q * (q - 1),
        hits,
        hits_expected,
        identity_holds: hits == hits_expected,
        dense,
        dense_with_ap,
        hypothesis_met,
        total,
        chain_value: dense as f64 / k2 as f64,
        chain_holds: total as u128 * k2 >= dense as u128,
        ap_chain_holds: total as u128 * k2 >= dense_with_ap as u128,
        h_half_rho: h_half,
        kappa: h_half.map(|h| rho / (16.0 * (h * h) as f64)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RqnRow {
    pub q: u64,
    pub m: u64,
    pub min_nontrivial: u64,
    pub witness: Vec<u64>,
    /// `min_nontrivial / q^2`.
    pub r_q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RqnTable {
    pub rho: f64,
    pub rows: Vec<RqnRow>,
    /// `max r_q / min r_q`; absent when the minimum is zero or the window is empty.
    pub ratio: Option<f64>,
    pub zero_minimum: bool,
}

impl RqnTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,m,min_nontrivial,witness\n");
        for r in &self.rows {
            let w: Vec<String> = r.witness.iter().map(u64::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.q,
                r.m,
                r.min_nontrivial,
                w.join(" ")
            ));
        }
        out
    }
}

/// Exact minima at `m = ceil(rho q)` for every prime `q` in `[n_low, n_high]`.
pub fn rqn_ratio(rho: f64, n_low: u64, n_high: u64, budget: u128) -> Result<RqnTable> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must lie in (0, 1], got {rho}"
        )));
    }
    if n_low > n_high {
        return Err(Error::InvalidArgument(format!(
            "empty window [{n_low}, {n_high}]"
        )));
    }
    let mut rows = Vec::new();
    for q in primes_in(n_low.max(3), n_high) {
        let m = cardinality_for(rho, q);
        let res = exact_min(q, m, budget)?;
        rows.push(RqnRow {
            q,
            m,
            min_nontrivial: res.report.nontrivial,
            witness: res.set.elements().to_vec(),
            r_q: res.report.nontrivial as f64 / (q as f64 * q as f64),
        });
    }
    let lo = rows.iter().map(|r| r.r_q).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.r_q).fold(0.0, f64::max);
    let zero_minimum = !rows.is_empty() && lo == 0.0;
    let ratio = if rows.is_empty() || zero_minimum {
        None
    } else {
        Some(hi / lo)
    };
    Ok(RqnTable {
        rho,
        rows,
        ratio,
        zero_minimum,
    })
}
