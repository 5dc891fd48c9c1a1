//! Every countable quantity: shifted-prime counts S_h(x), pair counts
//! T_h(x), k-tuple counts, the smoothness-restricted counter B(x,y,z),
//! exhaustive sum-of-two verifications (prime + member for odd numbers,
//! member + member for even numbers), weighted sums, and density ratios.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::arith::{factorize, PrimeSet};
use crate::error::{Error, Result};
use crate::sieve::{
    count_bounded_smooth, count_members, for_each_member, member_bitset, MemberBitset,
};
use crate::theta::{Rational, Rational128, ThetaSpec};

/// Which counted quantity a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    ShiftedPrimes,
    Pairs,
    Tuples,
    BoundedSmooth,
    MemberCount,
    SigmaRatioSum,
    LargePrimeWeight,
    DensityRatio,
}

/// Exact integer, exact fraction, or decimal string (15 significant digits).
#[derive(Debug, Clone, PartialEq)]
pub enum ReportValue {
    Int(u64),
    Rational { num: u128, den: u128 },
    Decimal(String),
}

impl Serialize for ReportValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ReportValue::Int(v) => s.serialize_u64(*v),
            // num/den as strings: they may exceed what JSON numbers carry
            ReportValue::Rational { num, den } => {
                let mut map = s.serialize_map(Some(2))?;
                map.serialize_entry("num", &num.to_string())?;
                map.serialize_entry("den", &den.to_string())?;
                map.end()
            }
            ReportValue::Decimal(d) => s.serialize_str(d),
        }
    }
}

impl ReportValue {
    pub fn as_int(&self) -> Option<u64> {
        match self {
            ReportValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Flat text rendering for CSV and plain output.
    pub fn render(&self) -> String {
        match self {
            ReportValue::Int(v) => v.to_string(),
            ReportValue::Rational { num, den } => format!("{num}/{den}"),
            ReportValue::Decimal(d) => d.clone(),
        }
    }
}

/// Decimal with 15 significant digits, the documented precision for every
/// transcendental output.
pub fn decimal15(v: f64) -> String {
    format!("{v:.14e}")
}

/// A named counted quantity with its parameters, exact value and timing.
#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub quantity: Quantity,
    pub params: BTreeMap<String, String>,
    pub value: ReportValue,
    pub wall_time_ms: u64,
}

impl CountReport {
    fn new(quantity: Quantity, params: BTreeMap<String, String>, value: ReportValue, t0: Instant) -> CountReport {
        CountReport {
            quantity,
            params,
            value,
            wall_time_ms: t0.elapsed().as_millis() as u64,
        }
    }

    /// CSV row: quantity, packed params, value.
    pub fn to_csv(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{:?},{},{},{}",
            self.quantity,
            params.join(";"),
            self.value.render(),
            self.wall_time_ms
        )
    }
}

fn params_from(spec: &ThetaSpec, kv: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("spec".to_string(), spec.to_string());
    for (k, v) in kv {
        m.insert((*k).to_string(), v.clone());
    }
    m
}

/// S_h(x): primes p <= x with p - h >= 1 and p - h in the set. Counts p
/// itself up to x, exactly as defined, not p - h.
pub fn shifted_prime_count(spec: &ThetaSpec, h: i64, x: u64) -> Result<CountReport> {
    let t0 = Instant::now();
    if h == 0 || h.unsigned_abs() >= x {
        return Err(Error::Domain(format!("shifted primes need 0 < |h| < x, got h={h}, x={x}")));
    }
    let member_limit = shifted_member_limit(h, x);
    let members = member_bitset(spec, member_limit)?;
    let primes = PrimeSet::up_to(x);
    let count = scan_shifted_primes(&primes, &members, h, 2, x + 1);
    Ok(CountReport::new(
        Quantity::ShiftedPrimes,
        params_from(spec, &[("h", h.to_string()), ("x", x.to_string())]),
        ReportValue::Int(count),
        t0,
    ))
}

/// Largest member argument the S_h scan can ask for.
pub fn shifted_member_limit(h: i64, x: u64) -> u64 {
    (x as i128 - h as i128).max(1) as u64
}

/// Scan primes p in [lo, hi) for the S_h join. Shardable: results add up.
pub fn scan_shifted_primes(primes: &PrimeSet, members: &MemberBitset, h: i64, lo: u64, hi: u64) -> u64 {
    let mut count = 0u64;
    for p in lo..hi {
        if !primes.contains(p) {
            continue;
        }
        let t = p as i128 - h as i128;
        if t >= 1 && members.contains(t as u64) {
            count += 1;
        }
    }
    count
}

/// T_h(x): n <= x with n and n + h both members. n + h may exceed x; the
/// definition constrains only n.
pub fn pair_count(spec: &ThetaSpec, h: i64, x: u64) -> Result<CountReport> {
    let t0 = Instant::now();
    if h == 0 {
        return Err(Error::Domain("pair count needs h != 0".into()));
    }
    let limit = pair_member_limit(h, x);
    let members = member_bitset(spec, limit)?;
    let count = scan_pairs(&members, h, 1, x + 1);
    Ok(CountReport::new(
        Quantity::Pairs,
        params_from(spec, &[("h", h.to_string()), ("x", x.to_string())]),
        ReportValue::Int(count),
        t0,
    ))
}

pub fn pair_member_limit(h: i64, x: u64) -> u64 {
    if h > 0 {
        x + h as u64
    } else {
        x
    }
}

pub fn scan_pairs(members: &MemberBitset, h: i64, lo: u64, hi: u64) -> u64 {
    let mut count = 0u64;
    for n in lo..hi {
        let m = n as i128 + h as i128;
        if m >= 1 && members.contains(n) && members.contains(m as u64) {
            count += 1;
        }
    }
    count
}

/// k-tuple count: n <= x with n + h_i a member for every offset.
pub fn tuple_count(spec: &ThetaSpec, offsets: &[u64], x: u64) -> Result<CountReport> {
    let t0 = Instant::now();
    if offsets.is_empty() {
        return Err(Error::Domain("tuple count needs at least one offset".into()));
    }
    if !offsets.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Domain("offsets must be strictly increasing".into()));
    }
    let limit = x + offsets.last().unwrap();
    let members = member_bitset(spec, limit)?;
    let count = scan_tuples(&members, offsets, 1, x + 1);
    let offs: Vec<String> = offsets.iter().map(|o| o.to_string()).collect();
    Ok(CountReport::new(
        Quantity::Tuples,
        params_from(spec, &[("offsets", offs.join(",")), ("x", x.to_string())]),
        ReportValue::Int(count),
        t0,
    ))
}

pub fn scan_tuples(members: &MemberBitset, offsets: &[u64], lo: u64, hi: u64) -> u64 {
    let mut count = 0u64;
    for n in lo..hi {
        if offsets.iter().all(|&h| members.contains(n + h)) {
            count += 1;
        }
    }
    count
}

/// Which sum-of-two conjecture a sweep verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conjecture {
    /// Odd n = prime + practical member.
    MargensternOdd,
    /// Even n = member + member.
    MelfiEven,
}

/// One verified representation n = p + m kept for spot audits. For the even
/// case both addends are members and `p` is simply the first one found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub n: u64,
    pub p: u64,
    pub m: u64,
}

/// Outcome of an exhaustive sum-of-two sweep over [lo, hi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionReport {
    pub conjecture: Conjecture,
    pub lo: u64,
    pub hi: u64,
    /// Integers of the right parity with no valid representation.
    pub exceptions: Vec<u64>,
    pub witness_sample: Vec<Witness>,
}

/// Shared lookup tables for the sum-of-two sweeps: a primality bitset, the
/// practical-member bitset, and the ascending member list used as the outer
/// scan order. All immutable, shared freely across shards.
pub struct SumTables {
    pub primes: PrimeSet,
    pub members: MemberBitset,
    pub member_list: Vec<u64>,
}

/// Tables for sweeping sums with addends below `hi`.
pub fn sum_tables(spec: &ThetaSpec, hi: u64) -> Result<SumTables> {
    let members = member_bitset(spec, hi)?;
    let member_list = members.to_vec();
    Ok(SumTables { primes: PrimeSet::up_to(hi), members, member_list })
}

/// Deterministic witness-sampling stride for a sweep over [lo, hi): roughly
/// a thousand witnesses, chosen purely by the value of n so that shard
/// boundaries cannot change the sample.
pub fn witness_stride(lo: u64, hi: u64) -> u64 {
    ((hi.saturating_sub(lo) / 2) / 1000).max(1)
}

/// Scans odd n in [lo, hi) for a representation prime + member, ascending
/// over members. m = 1 is allowed (1 is a member) and p = n - 1 when prime.
/// Witnesses are kept when (n - sample_base)/2 is a multiple of `stride`;
/// the rule depends only on n, so shard boundaries cannot change the sample.
pub fn scan_odd_prime_plus_member(
    tables: &SumTables,
    lo: u64,
    hi: u64,
    sample_base: u64,
    stride: u64,
) -> (Vec<u64>, Vec<Witness>) {
    let mut exceptions = Vec::new();
    let mut witnesses = Vec::new();
    let mut n = if lo % 2 == 0 { lo + 1 } else { lo };
    while n < hi {
        let mut found = None;
        for &m in &tables.member_list {
            if m >= n {
                break;
            }
            if tables.primes.contains(n - m) {
                found = Some(Witness { n, p: n - m, m });
                break;
            }
        }
        match found {
            Some(w) => {
                if (n - sample_base) / 2 % stride == 0 {
                    witnesses.push(w);
                }
            }
            None => exceptions.push(n),
        }
        n += 2;
    }
    (exceptions, witnesses)
}

/// Scans even n in [lo, hi) for a representation member + member.
pub fn scan_even_member_plus_member(
    tables: &SumTables,
    lo: u64,
    hi: u64,
    sample_base: u64,
    stride: u64,
) -> (Vec<u64>, Vec<Witness>) {
    let mut exceptions = Vec::new();
    let mut witnesses = Vec::new();
    let mut n = if lo % 2 == 1 { lo + 1 } else { lo };
    while n < hi {
        let mut found = None;
        for &m in &tables.member_list {
            if m > n - 1 {
                break;
            }
            if tables.members.contains(n - m) {
                found = Some(Witness { n, p: m, m: n - m });
                break;
            }
        }
        match found {
            Some(w) => {
                if (n - sample_base) / 2 % stride == 0 {
                    witnesses.push(w);
                }
            }
            None => exceptions.push(n),
        }
        n += 2;
    }
    (exceptions, witnesses)
}

/// Exhaustive odd-number sweep: every odd n in [lo, hi) must be a prime plus
/// a practical number. Returns the exceptions found (expected: none).
pub fn margenstern_exceptions(lo: u64, hi: u64) -> Result<ExceptionReport> {
    if lo < 3 {
        return Err(Error::Domain("odd sweep starts at 3".into()));
    }
    let tables = sum_tables(&ThetaSpec::practical(), hi)?;
    let base = if lo % 2 == 0 { lo + 1 } else { lo };
    let (exceptions, witness_sample) =
        scan_odd_prime_plus_member(&tables, lo, hi, base, witness_stride(lo, hi));
    Ok(ExceptionReport { conjecture: Conjecture::MargensternOdd, lo, hi, exceptions, witness_sample })
}

/// Exhaustive even-number sweep: every even n in [lo, hi) must be a sum of
/// two practical numbers.
pub fn melfi_exceptions(lo: u64, hi: u64) -> Result<ExceptionReport> {
    if lo < 2 {
        return Err(Error::Domain("even sweep starts at 2".into()));
    }
    let tables = sum_tables(&ThetaSpec::practical(), hi)?;
    let base = if lo % 2 == 1 { lo + 1 } else { lo };
    let (exceptions, witness_sample) =
        scan_even_member_plus_member(&tables, lo, hi, base, witness_stride(lo, hi));
    Ok(ExceptionReport { conjecture: Conjecture::MelfiEven, lo, hi, exceptions, witness_sample })
}

/// Sum of (sigma(n)/n)^alpha over members of the z-scaled set up to x with
/// P+(n) <= y. Exact while the fraction fits 128 bits; on overflow the
/// report falls back to a decimal with an `overflow` flag in the params.
pub fn sigma_ratio_sum(
    spec: &ThetaSpec,
    x: u64,
    alpha: u32,
    y: u64,
    z: Rational,
) -> Result<CountReport> {
    let t0 = Instant::now();
    if !(1..=3).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must be 1..=3, got {alpha}")));
    }
    let scaled = spec.scaled(z)?;
    let mut exact: Option<Rational128> = Some(Rational128::ZERO);
    let mut approx = 0.0f64;
    for_each_member(&scaled, 1, x + 1, &mut |m| {
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
            (Some(acc), Some(t)) => match acc.checked_add(t) {
                Ok(s) => {
                    *acc = s;
                    approx += t.to_f64();
                }
                Err(_) => {
                    approx += t.to_f64();
                    exact = None;
                }
            },
            (_, Some(t)) => approx += t.to_f64(),
            _ => {
                approx += (m.sigma as f64 / m.n as f64).powi(alpha as i32);
                exact = None;
            }
        }
    })?;
    let mut params = params_from(
        spec,
        &[
            ("x", x.to_string()),
            ("alpha", alpha.to_string()),
            ("y", y.to_string()),
            ("z", z.to_string()),
        ],
    );
    let value = match exact {
        Some(r) => ReportValue::Rational { num: r.num(), den: r.den() },
        None => {
            params.insert("overflow".into(), "true".into());
            ReportValue::Decimal(decimal15(approx))
        }
    };
    Ok(CountReport::new(Quantity::SigmaRatioSum, params, value, t0))
}

/// Sum over members n <= x of sum over distinct primes p | n with p > L of
/// log(p)/p. Natural log, 15 significant digits; the number of contributing
/// (n, p) pairs is reported exactly in the params.
pub fn large_prime_weight_sum(spec: &ThetaSpec, x: u64, big_l: u64) -> Result<CountReport> {
    let t0 = Instant::now();
    if big_l < 1 {
        return Err(Error::Domain("L must be >= 1".into()));
    }
    let mut sum = 0.0f64;
    let mut pairs = 0u64;
    let mut err: Option<Error> = None;
    for_each_member(spec, 1, x + 1, &mut |m| {
        if m.pplus <= big_l || err.is_some() {
            return;
        }
        match factorize(m.n, None) {
            Ok(f) => {
                for &(p, _) in f.factors() {
                    if p > big_l {
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
    let mut params = params_from(spec, &[("x", x.to_string()), ("L", big_l.to_string())]);
    params.insert("contributing_pairs".into(), pairs.to_string());
    Ok(CountReport::new(
        Quantity::LargePrimeWeight,
        params,
        ReportValue::Decimal(decimal15(sum)),
        t0,
    ))
}

/// count(x) * ln(x) / x together with the raw count.
pub fn density_ratio(spec: &ThetaSpec, x: u64) -> Result<CountReport> {
    let t0 = Instant::now();
    if x < 3 {
        return Err(Error::Domain("density ratio needs x >= 3".into()));
    }
    let count = count_members(spec, x)?;
    let ratio = count as f64 * (x as f64).ln() / x as f64;
    let mut params = params_from(spec, &[("x", x.to_string())]);
    params.insert("count".into(), count.to_string());
    Ok(CountReport::new(Quantity::DensityRatio, params, ReportValue::Decimal(decimal15(ratio)), t0))
}

/// Plain member count as a report.
pub fn member_count_report(spec: &ThetaSpec, x: u64) -> Result<CountReport> {
    let t0 = Instant::now();
    let count = count_members(spec, x)?;
    Ok(CountReport::new(
        Quantity::MemberCount,
        params_from(spec, &[("x", x.to_string())]),
        ReportValue::Int(count),
        t0,
    ))
}

/// B(x, y, z) as a report.
pub fn bounded_smooth_report(spec: &ThetaSpec, x: u64, y: u64, z: Rational) -> Result<CountReport> {
    let t0 = Instant::now();
    let count = count_bounded_smooth(spec, x, y, z)?;
    Ok(CountReport::new(
        Quantity::BoundedSmooth,
        params_from(spec, &[("x", x.to_string()), ("y", y.to_string()), ("z", z.to_string())]),
        ReportValue::Int(count),
        t0,
    ))
}
