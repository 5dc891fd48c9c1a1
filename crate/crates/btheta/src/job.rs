//! Job execution: range sharding, resumable line-delimited-JSON checkpoints,
//! and machine-readable reports. The coordinator owns the checkpoint file;
//! workers own disjoint shards; merges are associative and applied in shard
//! order, so any shard count and any interrupt/resume split produce the same
//! final report bytes.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{factorize, PrimeSet};
use crate::counters::{
    self, decimal15, scan_even_member_plus_member, scan_odd_prime_plus_member, scan_pairs,
    scan_shifted_primes, scan_tuples, sum_tables, witness_stride, Conjecture, CountReport,
    ExceptionReport, Quantity, ReportValue, Witness,
};
use crate::error::{Error, Result};
use crate::sieve::{
    for_each_member_with, member_bitset, sieve_base_primes, RangeShard, DEFAULT_SEGMENT_WIDTH,
};
use crate::theta::{
    dense_divisor_oracle, is_member, subset_sum_practical_oracle, Rational, Rational128,
    ThetaKind, ThetaSpec,
};

pub const FORMAT_VERSION: u32 = 1;

/// Everything a run needs, validated up front. Serialized canonically to
/// derive the checkpoint fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub command: CommandSpec,
    /// Theta spec in canonical text form.
    pub spec: String,
    pub shards: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandSpec {
    Enumerate { lo: u64, hi: u64 },
    Count { x: u64 },
    SmoothCount { x: u64, y: u64, z: String },
    ShiftedPrimes { h: i64, x: u64 },
    Pairs { h: i64, x: u64 },
    Tuples { offsets: Vec<u64>, x: u64 },
    Margenstern { lo: u64, hi: u64 },
    Melfi { lo: u64, hi: u64 },
    SigmaSum { x: u64, alpha: u32, y: u64, z: String },
    WeightSum { x: u64, l: u64 },
    Density { x: u64 },
    OracleCheck { x: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Plain,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<OutputFormat> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "plain" => Ok(OutputFormat::Plain),
            _ => Err(Error::Parse(format!("unknown output format {s:?}"))),
        }
    }
}

impl JobSpec {
    /// Stable hash of the job inputs; a checkpoint written for one
    /// fingerprint is refused by any other job.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("job spec serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        hex_string(&h.finalize())
    }

    pub fn theta_spec(&self) -> Result<ThetaSpec> {
        self.spec.parse()
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Splits [lo, hi) into at most `shards` disjoint covering pieces whose
/// sizes differ by at most one. Excess shards beyond unit width are dropped.
pub fn plan_shards(lo: u64, hi: u64, shards: u32) -> Result<Vec<RangeShard>> {
    if lo >= hi {
        return Err(Error::Domain(format!("empty shard range [{lo}, {hi})")));
    }
    if shards < 1 {
        return Err(Error::Domain("shard count must be >= 1".into()));
    }
    let span = hi - lo;
    let k = (shards as u64).min(span);
    let base = span / k;
    let extra = span % k;
    let mut out = Vec::with_capacity(k as usize);
    let mut at = lo;
    for i in 0..k {
        let width = base + u64::from(i < extra);
        out.push(RangeShard { lo: at, hi: at + width });
        at += width;
    }
    Ok(out)
}

/// Per-shard partial result. Merges are associative: counts add, exception
/// and witness lists concatenate in shard order, sums add (falling back to
/// decimal when the exact fraction leaves 128 bits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShardResult {
    Count { value: u64 },
    Exceptions { exceptions: Vec<u64>, witnesses: Vec<Witness> },
    RationalSum { num: Option<String>, den: Option<String>, approx: f64 },
    WeightSum { sum: f64, pairs: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedShard {
    pub lo: u64,
    pub hi: u64,
    pub result: ShardResult,
}

/// In-memory form of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub fingerprint: String,
    pub completed: Vec<CompletedShard>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    fingerprint: String,
}

impl Checkpoint {
    pub fn new(fingerprint: String) -> Checkpoint {
        Checkpoint { format_version: FORMAT_VERSION, fingerprint, completed: Vec::new() }
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let f = File::open(path)?;
        let mut lines = BufReader::new(f).lines();
        let header: CheckpointHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::Checkpoint("empty checkpoint file".into())),
        };
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format_version {}",
                header.format_version
            )));
        }
        let mut completed = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            completed.push(serde_json::from_str::<CompletedShard>(&line)?);
        }
        let cp = Checkpoint {
            format_version: header.format_version,
            fingerprint: header.fingerprint,
            completed,
        };
        cp.check_disjoint()?;
        Ok(cp)
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut sorted: Vec<(u64, u64)> = self.completed.iter().map(|s| (s.lo, s.hi)).collect();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Checkpoint(format!(
                    "overlapping shards [{}, {}) and [{}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(())
    }
}

/// Union of two checkpoints for the same job. Fingerprints must match and
/// shard sets must stay disjoint.
pub fn merge_checkpoints(a: &Checkpoint, b: &Checkpoint) -> Result<Checkpoint> {
    if a.fingerprint != b.fingerprint {
        return Err(Error::Checkpoint(format!(
            "fingerprint mismatch: {} vs {}",
            a.fingerprint, b.fingerprint
        )));
    }
    let mut completed = a.completed.clone();
    completed.extend(b.completed.iter().cloned());
    completed.sort_by_key(|s| s.lo);
    let merged = Checkpoint {
        format_version: FORMAT_VERSION,
        fingerprint: a.fingerprint.clone(),
        completed,
    };
    merged.check_disjoint()?;
    Ok(merged)
}

/// Incremental checkpoint writer owned by the coordinator. One JSON line per
/// completed shard, synced to disk immediately, so a crash loses at most the
/// shard in flight.
struct CheckpointWriter {
    file: File,
}

impl CheckpointWriter {
    fn create(path: &Path, fingerprint: &str) -> Result<CheckpointWriter> {
        let mut file = File::create(path)?;
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            fingerprint: fingerprint.to_string(),
        };
        serde_json::to_writer(&mut file, &header)?;
        file.write_all(b"\n")?;
        file.sync_data()?;
        Ok(CheckpointWriter { file })
    }

    fn append(path: &Path) -> Result<CheckpointWriter> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(CheckpointWriter { file })
    }

    fn record(&mut self, shard: &CompletedShard) -> Result<()> {
        serde_json::to_writer(&mut self.file, shard)?;
        self.file.write_all(b"\n")?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Runs the sharded part of a job: loads or creates the checkpoint, executes
/// the pending shards in parallel, records each as it completes, and returns
/// all completed shards in ascending order.
fn run_sharded<W>(
    job: &JobSpec,
    lo: u64,
    hi: u64,
    checkpoint_path: Option<&Path>,
    worker: W,
) -> Result<Vec<CompletedShard>>
where
    W: Fn(RangeShard) -> Result<ShardResult> + Sync,
{
    let plan = plan_shards(lo, hi, job.shards)?;
    let fingerprint = job.fingerprint();

    let mut done: BTreeMap<u64, CompletedShard> = BTreeMap::new();
    let mut writer = match checkpoint_path {
        Some(path) if path.exists() => {
            let cp = Checkpoint::load(path)?;
            if cp.fingerprint != fingerprint {
                return Err(Error::Checkpoint(format!(
                    "checkpoint at {} belongs to a different job (fingerprint {})",
                    path.display(),
                    cp.fingerprint
                )));
            }
            for shard in cp.completed {
                if !plan.iter().any(|p| p.lo == shard.lo && p.hi == shard.hi) {
                    return Err(Error::Checkpoint(format!(
                        "checkpoint shard [{}, {}) is not part of the plan",
                        shard.lo, shard.hi
                    )));
                }
                done.insert(shard.lo, shard);
            }
            Some(CheckpointWriter::append(path)?)
        }
        Some(path) => Some(CheckpointWriter::create(path, &fingerprint)?),
        None => None,
    };

    let pending: Vec<RangeShard> =
        plan.iter().copied().filter(|s| !done.contains_key(&s.lo)).collect();

    // Process in parallel batches; record each batch in shard order so the
    // checkpoint stays human-readable and crash losses stay small.
    let batch = rayon::current_num_threads().max(1);
    for chunk in pending.chunks(batch) {
        let results: Result<Vec<CompletedShard>> = chunk
            .par_iter()
            .map(|&s| {
                let result = worker(s)?;
                Ok(CompletedShard { lo: s.lo, hi: s.hi, result })
            })
            .collect();
        for shard in results? {
            if let Some(w) = writer.as_mut() {
                w.record(&shard)?;
            }
            done.insert(shard.lo, shard);
        }
    }
    Ok(done.into_values().collect())
}

fn merged_count(shards: &[CompletedShard]) -> Result<u64> {
    let mut total = 0u64;
    for s in shards {
        match &s.result {
            ShardResult::Count { value } => total += value,
            other => {
                return Err(Error::Checkpoint(format!(
                    "expected count shard, found {other:?}"
                )))
            }
        }
    }
    Ok(total)
}

fn merged_exceptions(shards: &[CompletedShard]) -> Result<(Vec<u64>, Vec<Witness>)> {
    let mut exceptions = Vec::new();
    let mut witnesses = Vec::new();
    for s in shards {
        match &s.result {
            ShardResult::Exceptions { exceptions: e, witnesses: w } => {
                exceptions.extend_from_slice(e);
                witnesses.extend_from_slice(w);
            }
            other => {
                return Err(Error::Checkpoint(format!(
                    "expected exceptions shard, found {other:?}"
                )))
            }
        }
    }
    Ok((exceptions, witnesses))
}

/// Final report of a run, wrapped with the format version.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Report {
    Count(CountReport),
    Exceptions(ExceptionReport),
    OracleCheck(OracleCheckReport),
    Members { members: Vec<u64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheckReport {
    pub spec: String,
    pub x: u64,
    pub checked: u64,
    pub mismatches: Vec<u64>,
}

/// Ceiling for the dual-oracle sweep; the subset-sum oracle is quadratic-ish
/// and meant for validation ranges only.
pub const ORACLE_CHECK_CAP: u64 = 1_000_000;

/// Runs the production membership test against the independent brute-force
/// oracle for every n <= x. Practical specs check against the divisor
/// subset-sum oracle, dense specs against the consecutive-ratio oracle.
pub fn oracle_check(spec: &ThetaSpec, x: u64) -> Result<OracleCheckReport> {
    if x > ORACLE_CHECK_CAP {
        return Err(Error::Resource(format!("oracle check capped at x <= {ORACLE_CHECK_CAP}")));
    }
    if spec.scale() != Rational::ONE {
        return Err(Error::Domain("oracle check requires scale z = 1".into()));
    }
    let y = match spec.kind() {
        ThetaKind::Practical => None,
        ThetaKind::Dense(y) => Some(y),
        ThetaKind::Affine { .. } => {
            return Err(Error::Domain(
                "no independent oracle exists for custom theta specs".into(),
            ))
        }
    };
    let mismatches: Result<Vec<Vec<u64>>> = plan_shards(1, x + 1, 64.min(x as u32))?
        .par_iter()
        .map(|s| {
            let mut bad = Vec::new();
            for n in s.lo..s.hi {
                let f = factorize(n, None)?;
                let chain = is_member(spec, &f)?.member;
                let oracle = match y {
                    None => subset_sum_practical_oracle(&f)?,
                    Some(y) => dense_divisor_oracle(&f, y)?,
                };
                if chain != oracle {
                    bad.push(n);
                }
            }
            Ok(bad)
        })
        .collect();
    let mismatches: Vec<u64> = mismatches?.into_iter().flatten().collect();
    Ok(OracleCheckReport { spec: spec.to_string(), x, checked: x, mismatches })
}

fn report_params(spec: &ThetaSpec, kv: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("spec".to_string(), spec.to_string());
    for (k, v) in kv {
        m.insert((*k).to_string(), v.clone());
    }
    m
}

/// Executes a job end to end and writes the report. Returns the process exit
/// status: 0 on success, 2 when a conjecture sweep found exceptions.
pub fn run(job: &JobSpec, checkpoint: Option<&Path>, out: &mut dyn Write, format: OutputFormat) -> Result<i32> {
    let spec = job.theta_spec()?;
    if !spec.theta_at_least_n() {
        eprintln!(
            "warning: spec {spec} does not guarantee theta(n) >= n; closure-based results assume it"
        );
    }
    let t0 = Instant::now();
    let mut exit = 0;
    let report = match &job.command {
        CommandSpec::Enumerate { lo, hi } => {
            let members = crate::sieve::members_in_range(&spec, *lo, *hi)?;
            Report::Members { members }
        }
        CommandSpec::Count { x } => {
            let x = *x;
            require(x >= 1, "count needs x >= 1")?;
            let primes = sieve_base_primes(x + 1);
            let shards = run_sharded(job, 1, x + 1, checkpoint, |s| {
                let mut c = 0u64;
                for_each_member_with(&spec, s.lo, s.hi, DEFAULT_SEGMENT_WIDTH, &primes, &mut |_| {
                    c += 1;
                })?;
                Ok(ShardResult::Count { value: c })
            })?;
            Report::Count(CountReport {
                quantity: Quantity::MemberCount,
                params: report_params(&spec, &[("x", x.to_string())]),
                value: ReportValue::Int(merged_count(&shards)?),
                wall_time_ms: t0.elapsed().as_millis() as u64,
            })
        }
        CommandSpec::SmoothCount { x, y, z } => {
            let (x, y) = (*x, *y);
            require(x >= 1 && y >= 1, "smooth-count needs x, y >= 1")?;
            let z: Rational = z.parse()?;
            let scaled = spec.scaled(z)?;
            let primes = sieve_base_primes(x + 1);
            let shards = run_sharded(job, 1, x + 1, checkpoint, |s| {
                let mut c = 0u64;
                for_each_member_with(&scaled, s.lo, s.hi, DEFAULT_SEGMENT_WIDTH, &primes, &mut |m| {
                    if m.pplus <= y {
                        c += 1;
                    }
                })?;
                Ok(ShardResult::Count { value: c })
            })?;
            Report::Count(CountReport {
                quantity: Quantity::BoundedSmooth,
                params: report_params(
                    &spec,
                    &[("x", x.to_string()), ("y", y.to_string()), ("z", z.to_string())],
                ),
                value: ReportValue::Int(merged_count(&shards)?),
                wall_time_ms: t0.elapsed().as_millis() as u64,
            })
        }
        CommandSpec::ShiftedPrimes { h, x } => {
            let (h, x) = (*h, *x);
            require(h != 0 && h.unsigned_abs() < x, "shifted-primes needs 0 < |h| < x")?;
            let members = member_bitset(&spec, counters::shifted_member_limit(h, x))?;
            let primes = PrimeSet::up_to(x);
            let shards = run_sharded(job, 2, x + 1, checkpoint, |s| {
                Ok(ShardResult::Count { value: scan_shifted_primes(&primes, &members, h, s.lo, s.hi) })
            })?;
            Report::Count(CountReport {
                quantity: Quantity::ShiftedPrimes,
                params: report_params(&spec, &[("h", h.to_string()), ("x", x.to_string())]),
                value: ReportValue::Int(merged_count(&shards)?),
                wall_time_ms: t0.elapsed().as_millis() as u64,
            })
        }
        CommandSpec::Pairs { h, x } => {
            let (h, x) = (*h, *x);
            require(h != 0 && x >= 1, "pairs needs h != 0 and x >= 1")?;
            let members = member_bitset(&spec, counters::pair_member_limit(h, x))?;
            let shards = run_sharded(job, 1, x + 1, checkpoint, |s| {
                Ok(ShardResult::Count { value: scan_pairs(&members, h, s.lo, s.hi) })
            })?;
            Report::Count(CountReport {
                quantity: Quantity::Pairs,
                params: report_params(&spec, &[("h", h.to_string()), ("x", x.to_string())]),
                value: ReportValue::Int(merged_count(&shards)?),
                wall_time_ms: t0.elapsed().as_millis() as u64,
            })
        }
        CommandSpec::Tuples { offsets, x } => {
            let x = *x;
            require(!offsets.is_empty(), "tuples needs at least one offset")?;
            require(
                offsets.windows(2).all(|w| w[0] < w[1]),
                "offsets must be strictly increasing",
            )?;
            let members = member_bitset(&spec, x + offsets.last().unwrap())?;
            let shards = run_sharded(job, 1, x + 1, checkpoint, |s| {
                Ok(ShardResult::Count { value: scan_tuples(&members, offsets, s.lo, s.hi) })
            })?;
            let offs: Vec<String> = offsets.iter().map(|o| o.to_string()).collect();
            Report::Count(CountReport {
                quantity: Quantity::Tuples,
                params: report_params(&spec, &[("offsets", offs.join(",")), ("x", x.to_string())]),
                value: ReportValue::Int(merged_count(&shards)?),
                wall_time_ms: t0.elapsed().as_millis() as u64,
            })
        }
        CommandSpec::Margenstern { lo, hi } => {
            let (lo, hi) = (*lo, *hi);
            require(lo >= 3 && lo < hi, "margenstern needs 3 <= lo < hi")?;
            let tables = sum_tables(&ThetaSpec::practical(), hi)?;
            let base = if lo % 2 == 0 { lo + 1 } else { lo };
            let stride = witness_stride(lo, hi);
            let shards = run_sharded(job, lo, hi, checkpoint, |s| {
                let (exceptions, witnesses) =
                    scan_odd_prime_plus_member(&tables, s.lo, s.hi, base, stride);
                Ok(ShardResult::Exceptions { exceptions, witnesses })
            })?;
            let (exceptions, witness_sample) = merged_exceptions(&shards)?;
            if !exceptions.is_empty() {
                exit = 2;
            }
            Report::Exceptions(ExceptionReport {
                conjecture: Conjecture::MargensternOdd,
                lo,
                hi,
                exceptions,
                witness_sample,
            })
        }
        CommandSpec::Melfi { lo, hi } => {
            let (lo, hi) = (*lo, *hi);
            require(lo >= 2 && lo < hi, "melfi needs 2 <= lo < hi")?;
            let tables = sum_tables(&ThetaSpec::practical(), hi)?;
            let base = if lo % 2 == 1 { lo + 1 } else { lo };
            let stride = witness_stride(lo, hi);
            let shards = run_sharded(job, lo, hi, checkpoint, |s| {
                let (exceptions, witnesses) =
                    scan_even_member_plus_member(&tables, s.lo, s.hi, base, stride);
                Ok(ShardResult::Exceptions { exceptions, witnesses })
            })?;
            let (exceptions, witness_sample) = merged_exceptions(&shards)?;
            if !exceptions.is_empty() {
                exit = 2;
            }
            Report::Exceptions(ExceptionReport {
                conjecture: Conjecture::MelfiEven,
                lo,
                hi,
                exceptions,
                witness_sample,
            })
        }
        CommandSpec::SigmaSum { x, alpha, y, z } => {
            let (x, alpha, y) = (*x, *alpha, *y);
            require((1..=3).contains(&alpha), "sigma-sum needs alpha in 1..=3")?;
            require(x >= 1 && y >= 1, "sigma-sum needs x, y >= 1")?;
            let z: Rational = z.parse()?;
            let scaled = spec.scaled(z)?;
            let primes = sieve_base_primes(x + 1);
            let shards = run_sharded(job, 1, x + 1, checkpoint, |s| {
                sigma_sum_shard(&scaled, s, alpha, y, &primes)
            })?;
            let (value, overflowed) = merge_rational_sums(&shards)?;
            let mut params = report_params(
                &spec,
                &[
                    ("x", x.to_string()),
                    ("alpha", alpha.to_string()),
                    ("y", y.to_string()),
                    ("z", z.to_string()),
                ],
            );
            if overflowed {
                params.insert("overflow".into(), "true".into());
            }
            Report::Count(CountReport {
                quantity: Quantity::SigmaRatioSum,
                params,
                value,
                wall_time_ms: t0.elapsed().as_millis() as u64,
            })
        }
        CommandSpec::WeightSum { x, l } => {
            let (x, l) = (*x, *l);
            require(x >= 1 && l >= 1, "weight-sum needs x, L >= 1")?;
            let primes = sieve_base_primes(x + 1);
            let shards = run_sharded(job, 1, x + 1, checkpoint, |s| {
                let mut sum = 0.0f64;
                let mut pairs = 0u64;
                let mut err = None;
                for_each_member_with(&spec, s.lo, s.hi, DEFAULT_SEGMENT_WIDTH, &primes, &mut |m| {
                    if m.pplus <= l || err.is_some() {
                        return;
                    }
                    match factorize(m.n, None) {
                        Ok(f) => {
                            for &(p, _) in f.factors() {
                                if p > l {
                                    sum += (p as f64).ln() / p as f64;
                                    pairs += 1;
                                }
                            }
                        }
                        Err(e) => err = Some(e),
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                Ok(ShardResult::WeightSum { sum, pairs })
            })?;
            let mut sum = 0.0f64;
            let mut pairs = 0u64;
            for s in &shards {
                match &s.result {
                    ShardResult::WeightSum { sum: v, pairs: p } => {
                        sum += v;
                        pairs += p;
                    }
                    other => {
                        return Err(Error::Checkpoint(format!(
                            "expected weight shard, found {other:?}"
                        )))
                    }
                }
            }
            let mut params = report_params(&spec, &[("x", x.to_string()), ("L", l.to_string())]);
            params.insert("contributing_pairs".into(), pairs.to_string());
            Report::Count(CountReport {
                quantity: Quantity::LargePrimeWeight,
                params,
                value: ReportValue::Decimal(decimal15(sum)),
                wall_time_ms: t0.elapsed().as_millis() as u64,
            })
        }
        CommandSpec::Density { x } => Report::Count(counters::density_ratio(&spec, *x)?),
        CommandSpec::OracleCheck { x } => {
            let r = oracle_check(&spec, *x)?;
            if !r.mismatches.is_empty() {
                exit = 2;
            }
            Report::OracleCheck(r)
        }
    };
    write_report(&report, out, format)?;
    Ok(exit)
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg.to_string()))
    }
}

fn sigma_sum_shard(
    scaled: &ThetaSpec,
    s: RangeShard,
    alpha: u32,
    y: u64,
    primes: &[u64],
) -> Result<ShardResult> {
    let mut exact: Option<Rational128> = Some(Rational128::ZERO);
    let mut approx = 0.0f64;
    for_each_member_with(scaled, s.lo, s.hi, DEFAULT_SEGMENT_WIDTH, primes, &mut |m| {
        if m.pplus > y {
            return;
        }
        let term = Rational128::new(m.sigma, m.n as u128).ok().and_then(|r| {
            let mut t = r;
            for _ in 1..alpha {
                t = t.checked_mul(r).ok()?;
            }
            Some(t)
        });
        match (&mut exact, term) {
            (Some(acc), Some(t)) => {
                approx += t.to_f64();
                match acc.checked_add(t) {
                    Ok(v) => *acc = v,
                    Err(_) => exact = None,
                }
            }
            _ => {
                approx += (m.sigma as f64 / m.n as f64).powi(alpha as i32);
                exact = None;
            }
        }
    })?;
    Ok(match exact {
        Some(r) => ShardResult::RationalSum {
            num: Some(r.num().to_string()),
            den: Some(r.den().to_string()),
            approx,
        },
        None => ShardResult::RationalSum { num: None, den: None, approx },
    })
}

fn merge_rational_sums(shards: &[CompletedShard]) -> Result<(ReportValue, bool)> {
    let mut exact: Option<Rational128> = Some(Rational128::ZERO);
    let mut approx = 0.0f64;
    for s in shards {
        match &s.result {
            ShardResult::RationalSum { num, den, approx: a } => {
                approx += a;
                match (&mut exact, num, den) {
                    (Some(acc), Some(n), Some(d)) => {
                        let n: u128 = n
                            .parse()
                            .map_err(|_| Error::Checkpoint("bad rational numerator".into()))?;
                        let d: u128 = d
                            .parse()
                            .map_err(|_| Error::Checkpoint("bad rational denominator".into()))?;
                        match acc.checked_add(Rational128::new(n, d)?) {
                            Ok(v) => *acc = v,
                            Err(_) => exact = None,
                        }
                    }
                    _ => exact = None,
                }
            }
            other => {
                return Err(Error::Checkpoint(format!("expected sum shard, found {other:?}")))
            }
        }
    }
    Ok(match exact {
        Some(r) => (ReportValue::Rational { num: r.num(), den: r.den() }, false),
        None => (ReportValue::Decimal(decimal15(approx)), true),
    })
}

fn write_report(report: &Report, out: &mut dyn Write, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let mut value = serde_json::to_value(report)?;
            if let serde_json::Value::Object(map) = &mut value {
                map.insert("format_version".into(), serde_json::json!(FORMAT_VERSION));
            }
            serde_json::to_writer(&mut *out, &value)?;
            out.write_all(b"\n")?;
        }
        OutputFormat::Csv => match report {
            Report::Count(r) => {
                writeln!(out, "quantity,params,value,wall_time_ms")?;
                writeln!(out, "{}", r.to_csv())?;
            }
            Report::Exceptions(r) => {
                writeln!(out, "conjecture,lo,hi,exception")?;
                if r.exceptions.is_empty() {
                    writeln!(out, "{:?},{},{},", r.conjecture, r.lo, r.hi)?;
                }
                for e in &r.exceptions {
                    writeln!(out, "{:?},{},{},{}", r.conjecture, r.lo, r.hi, e)?;
                }
            }
            Report::OracleCheck(r) => {
                writeln!(out, "spec,x,checked,mismatches")?;
                writeln!(out, "{},{},{},{}", r.spec, r.x, r.checked, r.mismatches.len())?;
            }
            Report::Members { members } => {
                writeln!(out, "member")?;
                for m in members {
                    writeln!(out, "{m}")?;
                }
            }
        },
        OutputFormat::Plain => match report {
            Report::Count(r) => {
                writeln!(out, "{:?} {} = {}", r.quantity, join_params(&r.params), r.value.render())?
            }
            Report::Exceptions(r) => {
                writeln!(
                    out,
                    "{:?} [{}, {}): {} exceptions {:?}",
                    r.conjecture,
                    r.lo,
                    r.hi,
                    r.exceptions.len(),
                    r.exceptions
                )?;
            }
            Report::OracleCheck(r) => writeln!(
                out,
                "oracle-check spec={} x={}: {} mismatches",
                r.spec,
                r.x,
                r.mismatches.len()
            )?,
            Report::Members { members } => {
                for m in members {
                    writeln!(out, "{m}")?;
                }
            }
        },
    }
    Ok(())
}

fn join_params(params: &BTreeMap<String, String>) -> String {
    params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}
