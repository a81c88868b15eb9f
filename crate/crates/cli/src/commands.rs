use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use ap3_core::ap_count::{count_3aps_convolution, count_3aps_naive, ApCountReport};
use ap3_core::behrend::{self, BEHREND_C, DEFAULT_APFREE_BUDGET};
use ap3_core::fourier::{dft, large_spectrum_of};
use ap3_core::rectify::rectify as rectify_set;
use ap3_core::search::{self, cardinality_for, LocalConfig, SearchMethod, SearchResult};
use ap3_core::transfer::{self, ExperimentConfig, TransferParams};
use ap3_core::{Error, ResidueSet};

use crate::{Format, Output, Produced};

/// Accepts plain integers and `1e8`-style exact powers.
pub fn parse_budget(s: &str) -> Result<u128, String> {
    if let Ok(v) = s.parse::<u128>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if !(f >= 0.0 && f.is_finite() && f.fract() == 0.0 && f < 3.4e38) {
        return Err(format!("`{s}` is not a nonnegative integer count"));
    }
    Ok(f as u128)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn read_set(path: &Path, q: Option<u64>) -> Result<ResidueSet> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading set file {}", path.display()))?;
    let set =
        ResidueSet::from_json(&text).with_context(|| format!("set file {}", path.display()))?;
    if let Some(q) = q {
        if q != set.modulus() {
            return Err(Error::ModulusMismatch {
                left: q,
                right: set.modulus(),
            })
            .context("--q disagrees with the set file");
        }
    }
    Ok(set)
}

fn produced(primary: String, format: Format, inputs: Vec<PathBuf>, seed: Option<u64>) -> Produced {
    Produced {
        primary,
        ext: match format {
            Format::Json => "json",
            Format::Csv => "csv",
        },
        extra: Vec::new(),
        inputs,
        seed,
    }
}

fn csv_unsupported(command: &str) -> anyhow::Error {
    anyhow!(Error::InvalidArgument(format!(
        "`{command}` has no CSV output; use --format json"
    )))
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Naive,
    Convolution,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct CountArgs {
    /// Set file: {"q": ..., "elements": [...]}.
    #[arg(long)]
    pub set: PathBuf,
    /// Expected modulus; must match the set file.
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long, value_enum, default_value_t = CountMethod::Convolution)]
    pub method: CountMethod,
    #[command(flatten)]
    pub output: Output,
}

const COUNT_CSV_HEADER: &str = "q,size,total,trivial,nontrivial,mu_num,mu_den\n";

fn count_csv(r: &ApCountReport) -> String {
    format!(
        "{COUNT_CSV_HEADER}{},{},{},{},{},{},{}\n",
        r.q, r.size, r.total, r.trivial, r.nontrivial, r.mu_num, r.mu_den
    )
}

pub fn count(a: &CountArgs) -> Result<Produced> {
    let set = read_set(&a.set, a.q)?;
    let report = match a.method {
        CountMethod::Naive => count_3aps_naive(&set),
        CountMethod::Convolution => count_3aps_convolution(&set),
    };
    let text = match a.output.format {
        Format::Json => json(&report)?,
        Format::Csv => count_csv(&report),
    };
    Ok(produced(text, a.output.format, vec![a.set.clone()], None))
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long)]
    pub q: Option<u64>,
    /// Also report the large spectrum |f| > epsilon |S|.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Serialize)]
struct Coefficient {
    a: i64,
    re: f64,
    im: f64,
    abs: f64,
}

#[derive(Serialize)]
struct SpectrumOut {
    q: u64,
    set_size: u64,
    parseval_residual: f64,
    large_spectrum: Option<ap3_core::LargeSpectrum>,
    coefficients: Vec<Coefficient>,
}

pub fn spectrum(a: &SpectrumArgs) -> Result<Produced> {
    let set = read_set(&a.set, a.q)?;
    let sp = dft(&set);
    let large = match a.epsilon {
        Some(eps) if !set.is_empty() => Some(large_spectrum_of(&sp, eps)?),
        Some(_) => return Err(Error::EmptySet("large spectrum of an empty set").into()),
        None => None,
    };
    let text = match a.output.format {
        Format::Csv => sp.to_csv(),
        Format::Json => json(&SpectrumOut {
            q: sp.modulus(),
            set_size: sp.set_size(),
            parseval_residual: sp.parseval_residual(),
            large_spectrum: large,
            coefficients: sp
                .iter()
                .map(|(a, z)| Coefficient {
                    a,
                    re: z.re,
                    im: z.im,
                    abs: z.norm(),
                })
                .collect(),
        })?,
    };
    Ok(produced(text, a.output.format, vec![a.set.clone()], None))
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct RectifyArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1)]
    pub v: u64,
    #[arg(long, default_value_t = 0)]
    pub k: i64,
    #[command(flatten)]
    pub output: Output,
}

pub fn rectify(a: &RectifyArgs) -> Result<Produced> {
    if a.output.format == Format::Csv {
        return Err(csv_unsupported("rectify"));
    }
    let set = read_set(&a.set, a.q)?;
    let (cert, w) = rectify_set(&set, a.epsilon, a.v, a.k)?;
    let mut p = produced(
        cert.to_json() + "\n",
        a.output.format,
        vec![a.set.clone()],
        None,
    );
    p.extra.push(("w.json".into(), w.to_json() + "\n"));
    Ok(p)
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct BehrendArgs {
    /// Build a progression-free subset of {1..x}.
    #[arg(long)]
    pub x: Option<u64>,
    /// Embed the set modulo this prime (needs q > 4x).
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long, default_value_t = BEHREND_C)]
    pub c: f64,
    /// Exact maximum progression-free sizes nu(1..n).
    #[arg(long)]
    pub n: Option<u64>,
    /// Least M with nu(m) < rho m on [M, n].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Largest n accepted by the exact search.
    #[arg(long, default_value_t = DEFAULT_APFREE_BUDGET)]
    pub budget: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Serialize)]
struct Embedding {
    k: u64,
    k_unclamped: u64,
    elements: Vec<u64>,
    density: f64,
    target_density: f64,
    nontrivial: u64,
    count_bound: u64,
    below_count_bound: bool,
    corollary_bound: f64,
}

#[derive(Serialize)]
struct BehrendOut {
    set: Option<behrend::BehrendSet>,
    ap_free: Option<bool>,
    meets_size_bound: Option<bool>,
    embedding: Option<Embedding>,
    nu: Option<Vec<u64>>,
    witness: Option<Vec<u64>>,
    h: Option<behrend::HBound>,
}

pub fn behrend(a: &BehrendArgs) -> Result<Produced> {
    if a.x.is_none() && a.n.is_none() {
        bail!(Error::InvalidArgument(
            "give --x (construction) or --n (exact sizes)".into()
        ));
    }
    let set = a.x.map(behrend::behrend_set).transpose()?;
    let embedding = match (&set, a.q) {
        (Some(b), Some(q)) => {
            let e = behrend::embed_mod_q(b, q, a.c)?;
            let nontrivial = e.nontrivial();
            Some(Embedding {
                k: e.k,
                k_unclamped: e.k_unclamped,
                elements: e.t.elements().to_vec(),
                density: e.density,
                target_density: e.target_density,
                nontrivial,
                count_bound: e.count_bound,
                below_count_bound: e.k == 0 || nontrivial < e.count_bound,
                corollary_bound: e.corollary_bound,
            })
        }
        (None, Some(_)) => bail!(Error::InvalidArgument("--q needs --x".into())),
        _ => None,
    };
    let (nu, witness, h) = match a.n {
        Some(n) => {
            let nu = behrend::max_apfree_sizes(n, a.budget)?;
            let witness = behrend::max_apfree_set(n, a.budget)?;
            let h = match a.rho {
                Some(rho) => behrend::h_of_rho(rho, n)?,
                None => None,
            };
            (Some(nu), Some(witness), h)
        }
        None => (None, None, None),
    };
    let out = BehrendOut {
        ap_free: set.as_ref().map(|b| behrend::verify_ap_free(&b.elements)),
        meets_size_bound: set.as_ref().map(|b| b.meets_size_bound(a.c)),
        set,
        embedding,
        nu,
        witness,
        h,
    };
    let text = match a.output.format {
        Format::Json => json(&out)?,
        Format::Csv => {
            let b = out.set.as_ref().ok_or_else(|| {
                anyhow!(Error::InvalidArgument(
                    "CSV output lists the --x set".into()
                ))
            })?;
            let mut s = String::from("index,element\n");
            for (i, e) in b.elements.iter().enumerate() {
                writeln!(s, "{i},{e}")?;
            }
            s
        }
    };
    Ok(produced(text, a.output.format, Vec::new(), None))
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Exhaustive,
    Local,
    Anneal,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct LocalArgs {
    /// Proposed swaps per restart.
    #[arg(long, default_value_t = LocalConfig::default().moves)]
    pub moves: u64,
    #[arg(long, default_value_t = LocalConfig::default().restarts)]
    pub restarts: u32,
    /// Initial temperature (default m).
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long, default_value_t = LocalConfig::default().cooling)]
    pub cooling: f64,
    /// Full recount after this many accepted moves.
    #[arg(long, default_value_t = LocalConfig::default().recount_every)]
    pub recount_every: u64,
}

impl LocalArgs {
    fn config(&self, method: SearchMethod) -> LocalConfig {
        LocalConfig {
            method,
            moves: self.moves,
            restarts: self.restarts,
            t0: self.t0,
            cooling: self.cooling,
            recount_every: self.recount_every,
        }
    }
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct SearchArgs {
    #[arg(long)]
    pub q: u64,
    /// Cardinality; defaults to ceil(rho q).
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Exhaustive)]
    pub method: MethodArg,
    /// Largest C(q, m) the exhaustive search may enumerate.
    #[arg(long, default_value = "100000000", value_parser = parse_budget)]
    pub budget: u128,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub local: LocalArgs,
    #[command(flatten)]
    pub output: Output,
}

fn cardinality(q: u64, m: Option<u64>, rho: Option<f64>) -> Result<u64> {
    match (m, rho) {
        (Some(m), _) => Ok(m),
        (None, Some(rho)) if rho > 0.0 && rho <= 1.0 => Ok(cardinality_for(rho, q)),
        (None, Some(rho)) => bail!(Error::InvalidArgument(format!(
            "rho must lie in (0, 1], got {rho}"
        ))),
        (None, None) => bail!(Error::InvalidArgument("give --m or --rho".into())),
    }
}

fn search_csv(r: &SearchResult) -> String {
    let w: Vec<String> = r.set.elements().iter().map(u64::to_string).collect();
    format!(
        "q,m,min_nontrivial,witness\n{},{},{},{}\n",
        r.set.modulus(),
        r.set.len(),
        r.report.nontrivial,
        w.join(" ")
    )
}

pub fn search(a: &SearchArgs) -> Result<Produced> {
    let m = cardinality(a.q, a.m, a.rho)?;
    let (result, seed) = match a.method {
        MethodArg::Exhaustive => (search::exact_min(a.q, m, a.budget)?, None),
        MethodArg::Local => (
            search::local_search(a.q, m, a.seed, &a.local.config(SearchMethod::Local))?,
            Some(a.seed),
        ),
        MethodArg::Anneal => (
            search::local_search(a.q, m, a.seed, &a.local.config(SearchMethod::Anneal))?,
            Some(a.seed),
        ),
    };
    let text = match a.output.format {
        Format::Json => json(&result)?,
        Format::Csv => search_csv(&result),
    };
    let mut p = produced(text, a.output.format, Vec::new(), seed);
    p.extra
        .push(("witness.json".into(), result.set.to_json() + "\n"));
    Ok(p)
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct AuditArgs {
    /// Set to audit; without it the exhaustive minimizer at (q, m) is used.
    #[arg(long)]
    pub set: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub rho: f64,
    /// Progression length; defaults to the least length certified to force a 3-AP.
    #[arg(long)]
    pub k: Option<u64>,
    /// Largest q^2 k (and C(q, m) for the minimizer).
    #[arg(long, default_value = "1000000000", value_parser = parse_budget)]
    pub budget: u128,
    #[command(flatten)]
    pub output: Output,
}

pub fn audit(a: &AuditArgs) -> Result<Produced> {
    if a.output.format == Format::Csv {
        return Err(csv_unsupported("audit"));
    }
    let (set, inputs) = match &a.set {
        Some(path) => (read_set(path, a.q)?, vec![path.clone()]),
        None => {
            let q =
                a.q.ok_or_else(|| anyhow!(Error::InvalidArgument("give --set or --q".into())))?;
            let m = cardinality(q, a.m, Some(a.rho))?;
            (search::exact_min(q, m, a.budget)?.set, Vec::new())
        }
    };
    let k = match a.k {
        Some(k) => k,
        None => search::audit_length(a.rho)?.ok_or_else(|| {
            anyhow!(Error::InvalidArgument(
                "no certified progression length for this rho; pass --k".into()
            ))
        })?,
    };
    let report = search::varnavides_audit(&set, a.rho, k, a.budget)?;
    Ok(produced(json(&report)?, a.output.format, inputs, None))
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct TransferArgs {
    /// W as a set file; elements are read as integers in [0, q).
    #[arg(long)]
    pub set: PathBuf,
    /// Companion prime in (q/2, q); found automatically when absent.
    #[arg(long)]
    pub p: Option<u64>,
    /// Width exponent of the preferred prime interval.
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Recorded density parameter; defaults to |W|/q.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub v: u64,
    #[arg(long, default_value_t = 0)]
    pub k: i64,
    /// Frequency for the f(2b/q) vs f(b/p) comparison.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<i64>,
    /// Q in the comparison; defaults to 2|b| + 1.
    #[arg(long)]
    pub bound: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Serialize)]
struct TransferOut {
    companion: Option<transfer::CompanionPrime>,
    report: transfer::TransferReport,
    occupancy: transfer::Occupancy,
    split_intersection: u64,
    pq_switch: Option<transfer::PqSwitch>,
}

pub fn transfer(a: &TransferArgs) -> Result<Produced> {
    if a.output.format == Format::Csv {
        return Err(csv_unsupported("transfer"));
    }
    let w = read_set(&a.set, None)?;
    let (p, companion) = match a.p {
        Some(p) => (p, None),
        None => {
            let c = transfer::find_companion_prime(w.modulus(), a.eta)?;
            (c.p, Some(c))
        }
    };
    let params = TransferParams {
        epsilon: a.epsilon,
        rho: a.rho.unwrap_or(w.density()),
        v: a.v,
        k: a.k,
    };
    let pq_switch = match a.b {
        Some(b) => Some(transfer::pq_switch_check(
            &w,
            b,
            p,
            a.bound.unwrap_or((2 * b.unsigned_abs() + 1) as f64),
        )?),
        None => None,
    };
    let out = TransferOut {
        companion,
        report: transfer::mu_transfer_report(&w, p, params)?,
        occupancy: transfer::residue_occupancy(&w, p)?,
        split_intersection: transfer::split_intersection(&w, p)?,
        pq_switch,
    };
    Ok(produced(
        json(&out)?,
        a.output.format,
        vec![a.set.clone()],
        None,
    ))
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub q: u64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub epsilon: f64,
    /// Profile length exponent: j < ceil(q^d).
    #[arg(long)]
    pub d: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exhaustive search is used when C(q, m) fits this budget.
    #[arg(long, default_value = "10000000", value_parser = parse_budget)]
    pub budget: u128,
    /// Search method when the budget does not cover C(q, m).
    #[arg(long, value_enum, default_value_t = MethodArg::Anneal)]
    pub method: MethodArg,
    #[command(flatten)]
    pub local: LocalArgs,
    #[command(flatten)]
    pub output: Output,
}

pub fn experiment(a: &ExperimentArgs) -> Result<Produced> {
    let method = match a.method {
        MethodArg::Local => SearchMethod::Local,
        _ => SearchMethod::Anneal,
    };
    let config = ExperimentConfig {
        search_budget: if a.method == MethodArg::Exhaustive {
            u128::MAX
        } else {
            a.budget
        },
        local: a.local.config(method),
    };
    let report = transfer::main_theorem_experiment(a.q, a.rho, a.epsilon, a.d, a.seed, &config)?;
    let csv = report.profile.to_csv();
    let mut p = match a.output.format {
        Format::Json => produced(
            report.to_json() + "\n",
            Format::Json,
            Vec::new(),
            Some(a.seed),
        ),
        Format::Csv => produced(csv.clone(), Format::Csv, Vec::new(), Some(a.seed)),
    };
    if a.output.format == Format::Json {
        p.extra.push(("profile.csv".into(), csv));
    }
    if !report.all_checks_pass() {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("warning: failed cross-checks: {}", failed.join(", "));
    }
    Ok(p)
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct RatioArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub n_low: u64,
    #[arg(long)]
    pub n_high: u64,
    #[arg(long, default_value = "100000000", value_parser = parse_budget)]
    pub budget: u128,
    #[command(flatten)]
    pub output: Output,
}

pub fn ratio(a: &RatioArgs) -> Result<Produced> {
    let table = search::rqn_ratio(a.rho, a.n_low, a.n_high, a.budget)?;
    let text = match a.output.format {
        Format::Json => json(&table)?,
        Format::Csv => table.to_csv(),
    };
    Ok(produced(text, a.output.format, Vec::new(), None))
}
