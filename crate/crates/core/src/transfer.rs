//! Comparison of `mu_q` with `mu_p` for a companion prime `p` just above
//! `q/2`, residue occupancy of normalized sets modulo `p`, the invariance
//! profile `|S ∩ (S + bj)|`, and the end-to-end experiment pipeline.

use std::io::Write;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ap_count::{count_3aps_convolution, weighted_count, HistogramStrategy};
use crate::error::{Error, Result};
use crate::fourier::{eval_at_real, phase_sum};
use crate::prime::{first_prime_in, is_prime};
use crate::rectify::{
    build_w, find_rectifying_dilation, spectral_certificate, RectificationCertificate,
};
use crate::search::{
    binomial, cardinality_for, exact_min, local_search, LocalConfig, SearchResult,
};
use crate::zq::{affine_apply, check_modulus, reduce, shift_intersection, AffineMap, ResidueSet};

/// Profiles longer than this must be streamed.
pub const PROFILE_CAP: u64 = 1_000_000;

fn ratio_string(r: &Ratio<i128>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn ratio_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompanionPrime {
    pub q: u64,
    pub p: u64,
    /// `ceil(q/2)`.
    pub start: u64,
    /// `ceil(q^eta)`.
    pub strict_width: u64,
    /// `ceil(2 ln^2 q)`.
    pub fallback_width: u64,
    /// Width finally scanned from `start`.
    pub searched_width: u64,
    pub eta: f64,
    /// `2p - q`, so `delta = p - q/2` is half of it.
    pub two_delta: u64,
    /// `p - q/2 <= q^eta`.
    pub in_strict_interval: bool,
}

impl CompanionPrime {
    pub fn delta(&self) -> f64 {
        self.two_delta as f64 / 2.0
    }
}

/// Smallest prime in `[ceil(q/2), ceil(q/2) + max(ceil(q^eta), ceil(2 ln^2 q))]`,
/// widening by doubling (never past `q - 1`) until one is found.
pub fn find_companion_prime(q: u64, eta: f64) -> Result<CompanionPrime> {
    if q < 5 || !is_prime(q) {
        return Err(Error::InvalidArgument(format!(
            "q must be a prime >= 5, got {q}"
        )));
    }
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eta must be positive, got {eta}"
        )));
    }
    let qf = q as f64;
    let start = q.div_ceil(2);
    let strict_width = qf.powf(eta).ceil() as u64;
    let fallback_width = (2.0 * qf.ln().powi(2)).ceil() as u64;
    let mut width = strict_width.max(fallback_width).max(1);
    let p = loop {
        let hi = start.saturating_add(width).min(q - 1);
        if let Some(p) = first_prime_in(start, hi) {
            break p;
        }
        // a prime in (q/2, q) always exists for q >= 5
        assert!(hi < q - 1, "no prime in [{start}, {}]", q - 1);
        width *= 2;
    };
    let two_delta = 2 * p - q;
    Ok(CompanionPrime {
        q,
        p,
        start,
        strict_width,
        fallback_width,
        searched_width: width,
        eta,
        two_delta,
        in_strict_interval: two_delta as f64 <= 2.0 * qf.powf(eta),
    })
}

fn check_companion(q: u64, p: u64) -> Result<()> {
    if !(2 * p > q && p < q) {
        return Err(Error::Range(format!(
            "need q/2 < p < q, got p = {p}, q = {q}"
        )));
    }
    if !is_prime(p) {
        return Err(Error::NotPrime { q: p });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferParams {
    pub epsilon: f64,
    pub rho: f64,
    pub v: u64,
    pub k: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub q: u64,
    pub p: u64,
    /// `p - q/2` as a reduced fraction.
    pub delta: String,
    pub size: u64,
    /// Ordered solutions of `x + y ≡ 2z (mod q)` in `W`.
    pub total_q: u64,
    /// Ordered solutions of `x + y ≡ 2z (mod p)` over the integer elements of `W`.
    pub total_p_integers: u128,
    /// Same count over the residue set `W mod p` with repeats collapsed.
    pub total_p_residues: u128,
    pub mu_q: String,
    pub mu_p: String,
    pub mu_p_residues: String,
    /// `(p^3 / q^3) mu_p`.
    pub predicted: String,
    /// `mu_q - predicted`, exact.
    pub residual: String,
    pub mu_q_f64: f64,
    pub predicted_f64: f64,
    pub residual_f64: f64,
    pub params: TransferParams,
}

/// Exact comparison of `mu_q(W)` against `(p^3/q^3) mu_p(W)`.
pub fn mu_transfer_report(
    w: &ResidueSet,
    p: u64,
    params: TransferParams,
) -> Result<TransferReport> {
    let q = w.modulus();
    check_companion(q, p)?;
    let total_q = count_3aps_convolution(w).total;

    let mut mult = vec![0u64; p as usize];
    for x in w.iter() {
        mult[(x % p) as usize] += 1;
    }
    let weights: Vec<(u64, u64)> = (0..p)
        .filter(|&r| mult[r as usize] > 0)
        .map(|r| (r, mult[r as usize]))
        .collect();
    let collapsed: Vec<(u64, u64)> = weights.iter().map(|&(r, _)| (r, 1)).collect();
    let total_p_integers = weighted_count(&weights, p, HistogramStrategy::Auto);
    let total_p_residues = weighted_count(&collapsed, p, HistogramStrategy::Auto);

    let (qi, pi) = (q as i128, p as i128);
    let mu_q = Ratio::new(total_q as i128, qi * qi);
    let mu_p = Ratio::new(total_p_integers as i128, pi * pi);
    let mu_p_res = Ratio::new(total_p_residues as i128, pi * pi);
    let predicted = Ratio::new(pi * total_p_integers as i128, qi * qi * qi);
    let residual = Ratio::new(
        qi * total_q as i128 - pi * total_p_integers as i128,
        qi * qi * qi,
    );
    Ok(TransferReport {
        q,
        p,
        delta: ratio_string(&Ratio::new(2 * pi - qi, 2)),
        size: w.len() as u64,
        total_q,
        total_p_integers,
        total_p_residues,
        mu_q: ratio_string(&mu_q),
        mu_p: ratio_string(&mu_p),
        mu_p_residues: ratio_string(&mu_p_res),
        predicted: ratio_string(&predicted),
        residual: ratio_string(&residual),
        mu_q_f64: ratio_f64(&mu_q),
        predicted_f64: ratio_f64(&predicted),
        residual_f64: ratio_f64(&residual),
        params,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PqSwitch {
    /// `f_W(2b/q)`.
    pub lhs_re: f64,
    pub lhs_im: f64,
    /// `f_W(b/p)` over the integer elements.
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub error: f64,
    /// `delta Q |W| / q`.
    pub budget: f64,
    /// `error / budget`, or 0 when the budget is 0.
    pub ratio: f64,
}

/// Compares `f_W(2b/q)` with `f_W(b/p)`; requires `|2b| < Q` and `Q delta < q/3`.
pub fn pq_switch_check(w: &ResidueSet, b: i64, p: u64, big_q: f64) -> Result<PqSwitch> {
    let q = w.modulus();
    check_companion(q, p)?;
    let delta = p as f64 - q as f64 / 2.0;
    if (2 * b).unsigned_abs() as f64 >= big_q {
        return Err(Error::Range(format!(
            "|2b| = {} is not below Q = {big_q}",
            (2 * b).abs()
        )));
    }
    if big_q * delta >= q as f64 / 3.0 {
        return Err(Error::Range(format!(
            "Q delta = {} is not below q/3",
            big_q * delta
        )));
    }
    let xs = w.elements();
    let lhs = phase_sum(xs, 2 * b, q);
    let rhs = phase_sum(xs, b, p);
    let error = (lhs - rhs).norm();
    let budget = delta * big_q * w.len() as f64 / q as f64;
    Ok(PqSwitch {
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        rhs_re: rhs.re,
        rhs_im: rhs.im,
        error,
        budget,
        ratio: if budget > 0.0 { error / budget } else { 0.0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxPropCheck {
    pub u: f64,
    pub lhs: f64,
    /// `2 pi (eps / rho)^{1/3} |W|`.
    pub bound: f64,
    /// `lhs < bound`; reported, not asserted.
    pub ok: bool,
}

/// `|f_W(u)|` against `2 pi (eps/rho)^{1/3} |W|` for
/// `5 v q^{-rho eps^2} <= |u| <= 1/2`, taking `eps`, `rho`, `v` from the
/// certificate, which must be verified.
pub fn approx_prop_check(
    w: &ResidueSet,
    u: f64,
    cert: Option<&RectificationCertificate>,
) -> Result<ApproxPropCheck> {
    let q = w.modulus();
    let cert =
        cert.ok_or_else(|| Error::Precondition("a rectification certificate is required".into()))?;
    if cert.q != q {
        return Err(Error::ModulusMismatch {
            left: cert.q,
            right: q,
        });
    }
    if !cert.verified {
        return Err(Error::Precondition(
            "the rectification certificate is not verified".into(),
        ));
    }
    let low = 5.0 * cert.v as f64 * (q as f64).powf(-cert.rho * cert.epsilon * cert.epsilon);
    if !(u.abs() >= low && u.abs() <= 0.5) {
        return Err(Error::Precondition(format!(
            "|u| = {} is outside [{low}, 1/2]",
            u.abs()
        )));
    }
    let lhs = eval_at_real(w, u).norm();
    let bound = 2.0 * std::f64::consts::PI * (cert.epsilon / cert.rho).cbrt() * w.len() as f64;
    Ok(ApproxPropCheck {
        u,
        lhs,
        bound,
        ok: lhs < bound || w.is_empty(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub occupied: u64,
    pub singles: u64,
    pub doubles: u64,
}

/// Residues modulo `p` hit by the integer elements of `W`, by multiplicity.
pub fn residue_occupancy(w: &ResidueSet, p: u64) -> Result<Occupancy> {
    check_companion(w.modulus(), p)?;
    // since q < 2p, x and x + p are the only integers in [0, q) sharing a residue
    let q = w.modulus();
    let doubles = w
        .iter()
        .filter(|&x| x < p && x + p < q && w.contains(x + p))
        .count() as u64;
    let singles = w.len() as u64 - 2 * doubles;
    Ok(Occupancy {
        occupied: singles + doubles,
        singles,
        doubles,
    })
}

/// `|W_0 ∩ (W_1 - p)|` with `W_0 = W ∩ [0, p-1]`, `W_1 = W ∩ [p, q-1]`.
pub fn split_intersection(w: &ResidueSet, p: u64) -> Result<u64> {
    let q = w.modulus();
    check_companion(q, p)?;
    let w1: Vec<u64> = w.iter().filter(|&x| x >= p).map(|x| x - p).collect();
    let count = w
        .iter()
        .take_while(|&x| x < p)
        .filter(|x| w1.binary_search(x).is_ok())
        .count() as u64;
    let occ = residue_occupancy(w, p)?;
    assert_eq!(
        count, occ.doubles,
        "split intersection disagrees with residue occupancy"
    );
    Ok(count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceProfile {
    /// Shift base reduced to `[0, q)`.
    pub b: u64,
    pub d: f64,
    /// `values[j] = |S ∩ (S + bj)|` for `0 <= j < ceil(q^d)`.
    pub values: Vec<u64>,
    /// `min_j values[j] / |S|`.
    pub score: f64,
}

impl InvarianceProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,intersection\n");
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{j},{v}\n"));
        }
        out
    }
}

fn profile_len(set: &ResidueSet, b: i64, d: f64) -> Result<(u64, u64)> {
    let q = set.modulus();
    let b = reduce(b, q);
    if b == 0 {
        return Err(Error::InvalidArgument("b must be nonzero modulo q".into()));
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "d must lie in (0, 1), got {d}"
        )));
    }
    if set.is_empty() {
        return Err(Error::EmptySet("invariance profile of an empty set"));
    }
    Ok((b, (q as f64).powf(d).ceil() as u64))
}

fn profile_entry(set: &ResidueSet, b: u64, j: u64) -> u64 {
    let q = set.modulus();
    shift_intersection(set, ((b as u128 * j as u128) % q as u128) as i64)
}

/// In-memory profile; lengths above [`PROFILE_CAP`] need [`write_profile_csv`].
pub fn invariance_profile(set: &ResidueSet, b: i64, d: f64) -> Result<InvarianceProfile> {
    let (b, len) = profile_len(set, b, d)?;
    if len > PROFILE_CAP {
        return Err(Error::Budget {
            what: "in-memory invariance profile length",
            needed: len as u128,
            budget: PROFILE_CAP as u128,
        });
    }
    let values: Vec<u64> = (0..len)
        .into_par_iter()
        .map(|j| profile_entry(set, b, j))
        .collect();
    let min = *values.iter().min().expect("len >= 1");
    Ok(InvarianceProfile {
        b,
        d,
        score: min as f64 / set.len() as f64,
        values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub b: u64,
    pub d: f64,
    pub len: u64,
    pub score: f64,
}

/// Streams `j,intersection` rows to `out` in chunks; no length cap.
pub fn write_profile_csv(
    set: &ResidueSet,
    b: i64,
    d: f64,
    out: &mut impl Write,
) -> Result<ProfileSummary> {
    let (b, len) = profile_len(set, b, d)?;
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(out, "j,intersection").map_err(io)?;
    let mut min = u64::MAX;
    let chunk = 1u64 << 16;
    let mut lo = 0;
    while lo < len {
        let hi = (lo + chunk).min(len);
        let values: Vec<u64> = (lo..hi)
            .into_par_iter()
            .map(|j| profile_entry(set, b, j))
            .collect();
        for (j, v) in (lo..hi).zip(&values) {
            writeln!(out, "{j},{v}").map_err(io)?;
            min = min.min(*v);
        }
        lo = hi;
    }
    Ok(ProfileSummary {
        b,
        d,
        len,
        score: min as f64 / set.len() as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Exhaustive search is used when `C(q, m)` fits; local search otherwise.
    pub search_budget: u128,
    pub local: LocalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            search_budget: 10_000_000,
            local: LocalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub q: u64,
    pub rho: f64,
    pub epsilon: f64,
    pub d: f64,
    pub seed: u64,
    pub m: u64,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectifyStage {
    pub h: u64,
    pub j: u64,
    pub radius: f64,
    pub pigeonhole_holds: bool,
    pub vacuous: bool,
    pub large_frequencies: Vec<u64>,
    pub s_prime: Vec<u64>,
    pub total_before: u64,
    pub total_after: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VRow {
    pub v: u64,
    /// `|W(0,v) ∩ W(-p,v)|`.
    pub intersection: u64,
    pub split_w0: u64,
    pub split_wp: u64,
    pub occupancy_w0: Occupancy,
    pub occupancy_wp: Occupancy,
    pub certificate_verified: bool,
    pub certificate_vacuous: bool,
    pub certificate_violators: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub params: ExperimentParams,
    pub degenerate: bool,
    /// How the shift of the proof maps onto the profile.
    pub orientation: String,
    pub search: SearchResult,
    pub rectify: RectifyStage,
    pub companion: CompanionPrime,
    pub v_loop: Vec<VRow>,
    pub profile: InvarianceProfile,
    pub transfer: TransferReport,
    pub occupancy: Occupancy,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Search, rectification, companion prime, the `v` loop over `W(0,v)` and
/// `W(-p,v)`, and the invariance profile with `b = 4 h^{-1} p`.
pub fn main_theorem_experiment(
    q: u64,
    rho: f64,
    epsilon: f64,
    d: f64,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    check_modulus(q).map_err(|e| e.in_stage("params"))?;
    let bad = |what: String| Error::InvalidArgument(what).in_stage("params");
    if q < 5 {
        return Err(bad(format!("q must be at least 5, got {q}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(bad(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(bad(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(bad(format!("d must lie in (0, 1), got {d}")));
    }
    let m = cardinality_for(rho, q);
    let params = ExperimentParams {
        q,
        rho,
        epsilon,
        d,
        seed,
        m,
        config: config.clone(),
    };
    let mut checks = Vec::new();

    let search = if binomial(q, m) <= config.search_budget {
        exact_min(q, m, config.search_budget)
    } else {
        local_search(q, m, seed, &config.local)
    }
    .map_err(|e| e.in_stage("search"))?;
    let s = search.set.clone();
    let recount = count_3aps_convolution(&s);
    checks.push(check(
        "search_recount",
        recount == search.report,
        format!(
            "reported total {}, recount {}",
            search.report.total, recount.total
        ),
    ));

    let dil = find_rectifying_dilation(&s, epsilon).map_err(|e| e.in_stage("rectify"))?;
    let Some(dilation) = dil.dilation else {
        return Err(Error::Precondition("no rectifying dilation".into()).in_stage("rectify"));
    };
    let s_prime = affine_apply(
        &s,
        &AffineMap::new(dilation.h as i64, 0, q).map_err(|e| e.in_stage("rectify"))?,
    )
    .map_err(|e| e.in_stage("rectify"))?;
    let total_after = count_3aps_convolution(&s_prime).total;
    checks.push(check(
        "affine_count_preserved",
        total_after == recount.total,
        format!("total(S) = {}, total(hS) = {total_after}", recount.total),
    ));
    let rectify = RectifyStage {
        h: dilation.h,
        j: dilation.j,
        radius: dil.radius,
        pigeonhole_holds: dil.pigeonhole_holds,
        vacuous: dil.vacuous,
        large_frequencies: dil.positive_frequencies.clone(),
        s_prime: s_prime.elements().to_vec(),
        total_before: recount.total,
        total_after,
    };

    let eta = s.density() * epsilon * epsilon / 2.0;
    let companion = find_companion_prime(q, eta).map_err(|e| e.in_stage("companion"))?;
    let p = companion.p;

    let v_max = (q as f64).powf(d).ceil() as u64;
    let v_loop: Vec<VRow> = (1..=v_max)
        .into_par_iter()
        .map(|v| -> Result<VRow> {
            let w0 = build_w(&s_prime, 0, v)?;
            let wp = build_w(&s_prime, -(p as i64), v)?;
            let inter = w0.iter().filter(|&x| wp.contains(x)).count() as u64;
            let cert = spectral_certificate(&w0, epsilon, s.density(), v)?;
            Ok(VRow {
                v,
                intersection: inter,
                split_w0: split_intersection(&w0, p)?,
                split_wp: split_intersection(&wp, p)?,
                occupancy_w0: residue_occupancy(&w0, p)?,
                occupancy_wp: residue_occupancy(&wp, p)?,
                certificate_verified: cert.verified,
                certificate_vacuous: cert.vacuous,
                certificate_violators: cert.violators.len(),
            })
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("v_loop"))?;

    let size = s.len() as u64;
    let occupancy_ok = v_loop.iter().all(|r| {
        [r.occupancy_w0, r.occupancy_wp]
            .iter()
            .all(|o| o.singles + 2 * o.doubles == size && o.occupied + o.doubles == size)
    });
    checks.push(check(
        "occupancy_identity",
        occupancy_ok,
        format!("singles + 2 doubles = {size} for every v"),
    ));
    let split_ok = v_loop
        .iter()
        .all(|r| r.split_w0 == r.occupancy_w0.doubles && r.split_wp == r.occupancy_wp.doubles);
    checks.push(check(
        "split_equals_doubles",
        split_ok,
        "split intersection = doubles for every v".into(),
    ));
    let disjoint_ok = v_loop
        .iter()
        .all(|r| r.intersection >= r.split_w0 + r.split_wp);
    checks.push(check(
        "disjointness_inequality",
        disjoint_ok,
        "|W(0,v) ∩ W(-p,v)| >= split(W(0,v)) + split(W(-p,v)) for every v".into(),
    ));

    let b = ((4u128 * dilation.j as u128 * p as u128) % q as u128) as i64;
    let profile = invariance_profile(&s, b, d).map_err(|e| e.in_stage("profile"))?;
    let agree = v_loop
        .iter()
        .filter(|r| (r.v as usize) < profile.values.len())
        .all(|r| profile.values[r.v as usize] == r.intersection);
    checks.push(check(
        "profile_matches_v_loop",
        agree,
        format!(
            "|S ∩ (S + {b} v)| = |W(0,v) ∩ W(-p,v)| for v < {}",
            profile.values.len()
        ),
    ));
    checks.push(check(
        "profile_first_entry",
        profile.values[0] == size,
        format!("values[0] = {}, |S| = {size}", profile.values[0]),
    ));

    let w01 = build_w(&s_prime, 0, 1).map_err(|e| e.in_stage("transfer"))?;
    let transfer = mu_transfer_report(
        &w01,
        p,
        TransferParams {
            epsilon,
            rho: s.density(),
            v: 1,
            k: 0,
        },
    )
    .map_err(|e| e.in_stage("transfer"))?;
    let occupancy = residue_occupancy(&w01, p).map_err(|e| e.in_stage("transfer"))?;

    Ok(ExperimentReport {
        params,
        degenerate: q < 11,
        orientation: format!(
            "b = 4 h^-1 p mod q = {b}, j = v: |S ∩ (S + b v)| = |W(0,v) ∩ W(-p,v)|"
        ),
        search,
        rectify,
        companion,
        v_loop,
        profile,
        transfer,
        occupancy,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rectify::rectify;
    use crate::zq::random_set;
    use proptest::prelude::*;

    fn set(q: u64, xs: &[u64]) -> ResidueSet {
        ResidueSet::new(q, xs.iter().copied()).unwrap()
    }

    #[test]
    fn companion_examples() {
        let c = find_companion_prime(101, 2.0).unwrap();
        assert_eq!((c.start, c.p, c.two_delta), (51, 53, 5));
        assert!(c.in_strict_interval);
        assert_eq!(find_companion_prime(13, 0.1).unwrap().p, 7);
        // 101^0.01 ≈ 1.05 < 2.5 = p - q/2
        assert!(!find_companion_prime(101, 0.01).unwrap().in_strict_interval);
        assert!(find_companion_prime(3, 0.5).is_err());
        for q in crate::prime::primes_in(5, 3000) {
            let c = find_companion_prime(q, 0.05).unwrap();
            assert!(2 * c.p > q && c.p < q && is_prime(c.p));
            assert_eq!(crate::prime::first_prime_in(q.div_ceil(2), c.p), Some(c.p));
        }
    }

    /// Ordered triples of integer representatives, compared modulo `m`.
    fn triples_mod(xs: &[u64], m: u64) -> u128 {
        let mut n = 0;
        for &a in xs {
            for &b in xs {
                for &c in xs {
                    n += ((a + b) % m == (2 * c) % m) as u128;
                }
            }
        }
        n
    }

    #[test]
    fn transfer_examples() {
        let r = mu_transfer_report(
            &ResidueSet::empty(101).unwrap(),
            53,
            TransferParams::default(),
        )
        .unwrap();
        assert_eq!(
            (
                r.total_q,
                r.total_p_integers,
                r.mu_q.as_str(),
                r.residual.as_str()
            ),
            (0, 0, "0/1", "0/1")
        );

        let full = ResidueSet::full(101).unwrap();
        let r = mu_transfer_report(&full, 53, TransferParams::default()).unwrap();
        assert_eq!(r.mu_q, "1/1");
        assert_eq!(r.total_p_integers, triples_mod(full.elements(), 53));
        let residues: Vec<u64> = (0..53).collect();
        assert_eq!(r.total_p_residues, triples_mod(&residues, 53));
        let expect = Ratio::new(
            101i128 * 101 * 101 - 53 * r.total_p_integers as i128,
            101i128 * 101 * 101,
        );
        assert_eq!(r.residual, ratio_string(&expect));
        assert_eq!(r.delta, "5/2");

        assert!(matches!(
            mu_transfer_report(&full, 101, TransferParams::default()),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            mu_transfer_report(&full, 47, TransferParams::default()),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            mu_transfer_report(&full, 51, TransferParams::default()),
            Err(Error::NotPrime { .. })
        ));
    }

    #[test]
    fn transfer_random_against_oracle() {
        for seed in 0..10 {
            let w = random_set(1009, 150, seed).unwrap();
            let r = mu_transfer_report(&w, 509, TransferParams::default()).unwrap();
            assert_eq!(r.total_p_integers, triples_mod(w.elements(), 509));
            assert_eq!(r.total_q as u128, triples_mod(w.elements(), 1009));
        }
    }

    #[test]
    fn pq_switch_examples() {
        let w = random_set(1009, 300, 1).unwrap();
        let r = pq_switch_check(&w, 0, 509, 20.0).unwrap();
        assert!(r.error < 1e-9);
        assert!((r.lhs_re - 300.0).abs() < 1e-9);
        assert!((r.budget - 4.5 * 20.0 * 300.0 / 1009.0).abs() < 1e-12);
        for seed in 0..20 {
            let w = random_set(1009, 200, seed).unwrap();
            for b in -10..=10 {
                let r = pq_switch_check(&w, b, 509, 21.0).unwrap();
                assert!(
                    r.error <= 10.0 * r.budget + 1e-9,
                    "seed {seed}, b {b}: {r:?}"
                );
            }
        }
        assert!(matches!(
            pq_switch_check(&w, 10, 509, 20.0),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            pq_switch_check(&w, 1, 509, 700.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn approx_prop_examples() {
        // rho eps^2 ≈ 0.72 leaves 5 q^{-rho eps^2} ≈ 0.035 below 1/2
        let s = ResidueSet::interval(1009, 0, 900).unwrap();
        let (cert, w) = rectify(&s, 0.9, 1, 0).unwrap();
        assert!(cert.verified);
        let r = approx_prop_check(&w, 0.5, Some(&cert)).unwrap();
        assert!(r.lhs >= 0.0 && r.bound > 0.0);
        let empty = ResidueSet::empty(1009).unwrap();
        let r = approx_prop_check(&empty, 0.5, Some(&cert)).unwrap();
        assert!(r.ok && r.lhs == 0.0);
        assert!(matches!(
            approx_prop_check(&w, 1e-6, Some(&cert)),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            approx_prop_check(&w, 0.5, None),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn occupancy_examples() {
        let q = 101;
        let p = 53;
        let low = set(q, &[0, 5, 17, 52]);
        assert_eq!(
            residue_occupancy(&low, p).unwrap(),
            Occupancy {
                occupied: 4,
                singles: 4,
                doubles: 0
            }
        );
        assert_eq!(split_intersection(&low, p).unwrap(), 0);
        let pair = set(q, &[0, p]);
        assert_eq!(
            residue_occupancy(&pair, p).unwrap(),
            Occupancy {
                occupied: 1,
                singles: 0,
                doubles: 1
            }
        );
        assert_eq!(split_intersection(&set(q, &[3, p + 3]), p).unwrap(), 1);
        assert!(residue_occupancy(&low, 47).is_err());
    }

    #[test]
    fn profile_examples() {
        let s = ResidueSet::interval(1009, 0, 40).unwrap();
        let prof = invariance_profile(&s, 1, 0.5).unwrap();
        assert_eq!(prof.values.len(), 32);
        for (j, &v) in prof.values.iter().enumerate() {
            assert_eq!(v, 40 - j as u64);
        }
        assert_eq!(prof.score, 9.0 / 40.0);
        assert!(matches!(
            invariance_profile(&s, 1009, 0.5),
            Err(Error::InvalidArgument(_))
        ));
        assert!(invariance_profile(&s, 3, 1.0).is_err());

        let mut buf = Vec::new();
        let sum = write_profile_csv(&s, 1, 0.5, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), prof.to_csv());
        assert_eq!((sum.len, sum.score), (32, prof.score));
    }

    #[test]
    fn experiment_reference_run() {
        let config = ExperimentConfig::default();
        let a = main_theorem_experiment(101, 0.3, 0.25, 0.2, 42, &config).unwrap();
        assert!(a.all_checks_pass(), "{:#?}", a.checks);
        assert!(!a.degenerate);
        assert_eq!(a.v_loop.len(), 3);
        let b = main_theorem_experiment(101, 0.3, 0.25, 0.2, 42, &config).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn experiment_small_q_is_degenerate() {
        let r =
            main_theorem_experiment(7, 0.3, 0.25, 0.2, 1, &ExperimentConfig::default()).unwrap();
        assert!(r.degenerate && r.profile.values.len() <= 2);
        assert!(r.all_checks_pass());
        let err = main_theorem_experiment(101, 1.5, 0.25, 0.2, 1, &ExperimentConfig::default())
            .unwrap_err();
        assert!(matches!(
            err,
            Error::Stage {
                stage: "params",
                ..
            }
        ));
    }

    proptest! {
        #[test]
        fn occupancy_identities(q in prop::sample::select(vec![101u64, 211, 1009, 2003]), m in 0u64..100, seed in any::<u64>()) {
            let p = find_companion_prime(q, 0.1).unwrap().p;
            let w = random_set(q, m.min(q), seed).unwrap();
            let occ = residue_occupancy(&w, p).unwrap();
            prop_assert_eq!(occ.singles + 2 * occ.doubles, w.len() as u64);
            prop_assert_eq!(split_intersection(&w, p).unwrap(), occ.doubles);
            let mut hit = std::collections::BTreeMap::new();
            for x in w.iter() {
                *hit.entry(x % p).or_insert(0u64) += 1;
            }
            prop_assert_eq!(occ.occupied, hit.len() as u64);
            prop_assert_eq!(occ.doubles, hit.values().filter(|&&c| c == 2).count() as u64);
        }
    }
}
