//! Theta oracles and the chain-condition membership test.
//!
//! An integer n >= 2 with ascending factorization p_1^a_1 ... p_k^a_k belongs
//! to the set when every prime satisfies
//! `p_j <= z * theta(p_1^a_1 ... p_{j-1}^a_{j-1})`,
//! with the empty product m_1 = 1; n = 1 always belongs. theta(n) = sigma(n)+1
//! yields the practical numbers, theta(n) = y*n the integers with y-dense
//! divisors. All comparisons are exact rational (integer cross products);
//! floating point never touches a membership decision.

use std::fmt;
use std::str::FromStr;

use crate::arith::{divisors_sorted, sigma_prime_power, Factorization};
use crate::error::{Error, Result};

fn gcd64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd64(b, a % b)
    }
}

fn gcd128(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd128(b, a % b)
    }
}

/// Nonnegative rational with 64-bit numerator and denominator, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Rational> {
        if den == 0 {
            return Err(Error::Domain("rational with zero denominator".into()));
        }
        let g = gcd64(num, den).max(1);
        Ok(Rational { num: num / g, den: den / g })
    }

    pub fn from_int(n: u64) -> Rational {
        Rational { num: n, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn checked_mul(&self, other: Rational) -> Result<Rational> {
        // cross-reduce first so products stay small
        let g1 = gcd64(self.num, other.den).max(1);
        let g2 = gcd64(other.num, self.den).max(1);
        let num = (self.num / g1)
            .checked_mul(other.num / g2)
            .ok_or_else(|| Error::Overflow("rational product numerator".into()))?;
        let den = (self.den / g2)
            .checked_mul(other.den / g1)
            .ok_or_else(|| Error::Overflow("rational product denominator".into()))?;
        Ok(Rational { num, den })
    }

    /// self >= other, exact.
    pub fn ge(&self, other: Rational) -> bool {
        self.num as u128 * other.den as u128 >= other.num as u128 * self.den as u128
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rational> {
        let bad = |_| Error::Parse(format!("invalid rational {s:?}"));
        match s.split_once('/') {
            Some((n, d)) => Rational::new(n.trim().parse().map_err(bad)?, d.trim().parse().map_err(bad)?),
            None => Ok(Rational::from_int(s.trim().parse().map_err(bad)?)),
        }
    }
}

/// Reduced nonnegative rational on 128 bits, used for exact theta values and
/// exact weighted sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational128 {
    num: u128,
    den: u128,
}

impl Rational128 {
    pub const ZERO: Rational128 = Rational128 { num: 0, den: 1 };
    pub const ONE: Rational128 = Rational128 { num: 1, den: 1 };

    pub fn new(num: u128, den: u128) -> Result<Rational128> {
        if den == 0 {
            return Err(Error::Domain("rational with zero denominator".into()));
        }
        let g = gcd128(num, den).max(1);
        Ok(Rational128 { num: num / g, den: den / g })
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    pub fn checked_add(&self, other: Rational128) -> Result<Rational128> {
        let g = gcd128(self.den, other.den).max(1);
        let ov = || Error::Overflow("rational sum exceeds 128 bits".into());
        let lhs = self.num.checked_mul(other.den / g).ok_or_else(ov)?;
        let rhs = other.num.checked_mul(self.den / g).ok_or_else(ov)?;
        let num = lhs.checked_add(rhs).ok_or_else(ov)?;
        let den = (self.den / g).checked_mul(other.den).ok_or_else(ov)?;
        Rational128::new(num, den)
    }

    pub fn checked_mul(&self, other: Rational128) -> Result<Rational128> {
        let g1 = gcd128(self.num, other.den).max(1);
        let g2 = gcd128(other.num, self.den).max(1);
        let ov = || Error::Overflow("rational product exceeds 128 bits".into());
        let num = (self.num / g1).checked_mul(other.num / g2).ok_or_else(ov)?;
        let den = (self.den / g2).checked_mul(other.den / g1).ok_or_else(ov)?;
        Ok(Rational128 { num, den })
    }

    /// self >= other with overflow surfaced rather than wrapped.
    pub fn checked_ge(&self, other: Rational128) -> Result<bool> {
        let ov = || Error::Overflow("rational comparison exceeds 128 bits".into());
        let lhs = self.num.checked_mul(other.den).ok_or_else(ov)?;
        let rhs = other.num.checked_mul(self.den).ok_or_else(ov)?;
        Ok(lhs >= rhs)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl From<Rational> for Rational128 {
    fn from(r: Rational) -> Rational128 {
        Rational128 { num: r.num as u128, den: r.den as u128 }
    }
}

impl fmt::Display for Rational128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Which theta function drives the chain condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaKind {
    /// theta(n) = sigma(n) + 1; the set is the practical numbers.
    Practical,
    /// theta(n) = y * n; the set has y-dense divisors.
    Dense(Rational),
    /// theta(n) = a*sigma(n) + b*n + c with nonnegative rational coefficients.
    Affine { a: Rational, b: Rational, c: Rational },
}

/// A theta oracle together with a scale z >= 1; the set tested is the one
/// with every chain bound multiplied by z.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThetaSpec {
    kind: ThetaKind,
    scale: Rational,
}

impl ThetaSpec {
    pub fn practical() -> ThetaSpec {
        ThetaSpec { kind: ThetaKind::Practical, scale: Rational::ONE }
    }

    /// Requires y >= 2 so that theta(n) >= 2 holds for every n.
    pub fn dense(y: Rational) -> Result<ThetaSpec> {
        if !y.ge(Rational::from_int(2)) {
            return Err(Error::Domain(format!("dense spec needs y >= 2, got {y}")));
        }
        Ok(ThetaSpec { kind: ThetaKind::Dense(y), scale: Rational::ONE })
    }

    /// Requires theta(1) = 2a + b + c >= 2 (sigma(1) = 1).
    pub fn affine(a: Rational, b: Rational, c: Rational) -> Result<ThetaSpec> {
        let theta1 = Rational128::from(a)
            .checked_mul(Rational128::new(2, 1)?)?
            .checked_add(b.into())?
            .checked_add(c.into())?;
        if !theta1.checked_ge(Rational128::new(2, 1)?)? {
            return Err(Error::Domain(format!(
                "affine spec needs theta(1) = 2a+b+c >= 2, got {theta1}"
            )));
        }
        Ok(ThetaSpec { kind: ThetaKind::Affine { a, b, c }, scale: Rational::ONE })
    }

    pub fn kind(&self) -> ThetaKind {
        self.kind
    }

    pub fn scale(&self) -> Rational {
        self.scale
    }

    /// Multiplies the scale by z >= 1; composing scales multiplies exactly.
    pub fn scaled(&self, z: Rational) -> Result<ThetaSpec> {
        if !z.ge(Rational::ONE) {
            return Err(Error::Domain(format!("scale {z} < 1")));
        }
        Ok(ThetaSpec { kind: self.kind, scale: self.scale.checked_mul(z)? })
    }

    /// True when the hypothesis theta(n) >= n is guaranteed for this kind,
    /// which several closure results assume.
    pub fn theta_at_least_n(&self) -> bool {
        match self.kind {
            ThetaKind::Practical => true,
            ThetaKind::Dense(y) => y.ge(Rational::ONE),
            ThetaKind::Affine { a, b, .. } => {
                // a*sigma(n) + b*n >= n whenever a + b >= 1, since sigma >= n
                (a.num as u128 * b.den as u128 + b.num as u128 * a.den as u128)
                    >= a.den as u128 * b.den as u128
            }
        }
    }
}

impl fmt::Display for ThetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ThetaKind::Practical => write!(f, "practical")?,
            ThetaKind::Dense(y) => write!(f, "dense:y={y}")?,
            ThetaKind::Affine { a, b, c } => write!(f, "custom:a={a},b={b},c={c}")?,
        }
        if self.scale != Rational::ONE {
            write!(f, "@z={}", self.scale)?;
        }
        Ok(())
    }
}

impl FromStr for ThetaSpec {
    type Err = Error;

    /// Canonical text form: `practical`, `dense:y=5/2`, `custom:a=1,b=0,c=1`,
    /// each optionally suffixed `@z=3/2`.
    fn from_str(s: &str) -> Result<ThetaSpec> {
        let (body, scale) = match s.split_once("@z=") {
            Some((b, z)) => (b, z.parse::<Rational>()?),
            None => (s, Rational::ONE),
        };
        let spec = if body == "practical" {
            ThetaSpec::practical()
        } else if let Some(y) = body.strip_prefix("dense:y=") {
            ThetaSpec::dense(y.parse()?)?
        } else if let Some(args) = body.strip_prefix("custom:") {
            let mut a = None;
            let mut b = None;
            let mut c = None;
            for kv in args.split(',') {
                match kv.split_once('=') {
                    Some(("a", v)) => a = Some(v.parse()?),
                    Some(("b", v)) => b = Some(v.parse()?),
                    Some(("c", v)) => c = Some(v.parse()?),
                    _ => return Err(Error::Parse(format!("bad custom spec field {kv:?}"))),
                }
            }
            let missing = || Error::Parse("custom spec needs a=, b=, c=".into());
            ThetaSpec::affine(
                a.ok_or_else(missing)?,
                b.ok_or_else(missing)?,
                c.ok_or_else(missing)?,
            )?
        } else {
            return Err(Error::Parse(format!("unknown theta spec {body:?}")));
        };
        spec.scaled(scale)
    }
}

/// Outcome of the chain test: either membership, or the 1-based index of the
/// first prime violating the chain together with the bound it exceeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipVerdict {
    pub member: bool,
    pub fail_index: Option<usize>,
    /// z * theta of the partial product at the failure point.
    pub fail_bound: Option<Rational128>,
}

impl MembershipVerdict {
    fn member() -> MembershipVerdict {
        MembershipVerdict { member: true, fail_index: None, fail_bound: None }
    }
}

/// z * theta(m) for the partial product m with sigma(m) supplied by the
/// caller (so the chain test never refactors m).
fn scaled_theta(spec: &ThetaSpec, m: u64, sigma_m: u128) -> Result<Rational128> {
    let z = Rational128::from(spec.scale());
    let theta = match spec.kind() {
        ThetaKind::Practical => Rational128::new(
            sigma_m
                .checked_add(1)
                .ok_or_else(|| Error::Overflow("sigma + 1".into()))?,
            1,
        )?,
        ThetaKind::Dense(y) => {
            Rational128::from(y).checked_mul(Rational128::new(m as u128, 1)?)?
        }
        ThetaKind::Affine { a, b, c } => Rational128::from(a)
            .checked_mul(Rational128::new(sigma_m, 1)?)?
            .checked_add(Rational128::from(b).checked_mul(Rational128::new(m as u128, 1)?)?)?
            .checked_add(c.into())?,
    };
    z.checked_mul(theta)
}

/// Exact chain-condition check p <= z * theta(m), given sigma(m). Practical
/// and dense kinds compare by integer cross products in u128 (checked, never
/// wrapped); the affine kind goes through the exact rational path.
pub(crate) fn chain_ok(spec: &ThetaSpec, p: u64, m: u64, sigma_m: u128) -> Result<bool> {
    let z = spec.scale();
    let ov = || Error::Overflow("chain comparison exceeds 128 bits".into());
    match spec.kind() {
        ThetaKind::Practical => {
            let lhs = (p as u128).checked_mul(z.den() as u128).ok_or_else(ov)?;
            let rhs = (z.num() as u128)
                .checked_mul(sigma_m.checked_add(1).ok_or_else(ov)?)
                .ok_or_else(ov)?;
            Ok(lhs <= rhs)
        }
        ThetaKind::Dense(y) => {
            let lhs = (p as u128)
                .checked_mul(z.den() as u128)
                .and_then(|v| v.checked_mul(y.den() as u128))
                .ok_or_else(ov)?;
            let rhs = (z.num() as u128)
                .checked_mul(y.num() as u128)
                .and_then(|v| v.checked_mul(m as u128))
                .ok_or_else(ov)?;
            Ok(lhs <= rhs)
        }
        ThetaKind::Affine { .. } => {
            scaled_theta(spec, m, sigma_m)?.checked_ge(Rational128::new(p as u128, 1)?)
        }
    }
}

/// Exact evaluation of z * theta(n) for the spec.
pub fn theta_eval(spec: &ThetaSpec, f: &Factorization) -> Result<Rational128> {
    let mut sigma: u128 = 1;
    for &(p, a) in f.factors() {
        sigma = sigma
            .checked_mul(sigma_prime_power(p, a))
            .ok_or_else(|| Error::Overflow(format!("sigma({})", f.n())))?;
    }
    scaled_theta(spec, f.n(), sigma)
}

/// The chain test itself. Iterates primes ascending, maintaining the partial
/// product and its sigma incrementally, and stops at the first violation.
/// Equality counts as satisfying the condition.
pub fn is_member(spec: &ThetaSpec, f: &Factorization) -> Result<MembershipVerdict> {
    let mut m: u64 = 1;
    let mut sigma: u128 = 1;
    for (j, &(p, a)) in f.factors().iter().enumerate() {
        if !chain_ok(spec, p, m, sigma)? {
            return Ok(MembershipVerdict {
                member: false,
                fail_index: Some(j + 1),
                fail_bound: Some(scaled_theta(spec, m, sigma)?),
            });
        }
        m = m
            .checked_mul(p.pow(a))
            .ok_or_else(|| Error::Overflow("partial product".into()))?;
        sigma = sigma
            .checked_mul(sigma_prime_power(p, a))
            .ok_or_else(|| Error::Overflow("partial sigma".into()))?;
    }
    Ok(MembershipVerdict::member())
}

/// Convenience: membership as a plain bool.
pub fn is_member_bool(spec: &ThetaSpec, f: &Factorization) -> Result<bool> {
    Ok(is_member(spec, f)?.member)
}

/// Documented ceiling for the subset-sum oracle's bitset.
pub const SUBSET_SUM_CAP: u64 = 10_000_000;

/// Independent practicality oracle: reachability bitset over the divisors.
/// True iff every m in [1, n] is a sum of distinct divisors of n. Validation
/// path only; the production test is always the chain condition.
pub fn subset_sum_practical_oracle(f: &Factorization) -> Result<bool> {
    let n = f.n();
    if n > SUBSET_SUM_CAP {
        return Err(Error::Resource(format!(
            "subset-sum oracle capped at n <= {SUBSET_SUM_CAP}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(true);
    }
    let divs = divisors_sorted(f)?;
    let words = (n / 64 + 1) as usize;
    let mut reach = vec![0u64; words];
    reach[0] = 1; // empty sum
    for &d in &divs {
        // every remaining divisor is >= d, so a gap below d can never close
        match first_gap(&reach, n) {
            None => return Ok(true),
            Some(g) if g < d => return Ok(false),
            Some(_) => {}
        }
        shift_or(&mut reach, d, n);
    }
    Ok(first_gap(&reach, n).is_none())
}

/// Smallest value in [1, n] whose bit is unset, if any.
fn first_gap(reach: &[u64], n: u64) -> Option<u64> {
    for (w, &word) in reach.iter().enumerate() {
        let missing = !word;
        if missing != 0 {
            let bit = w as u64 * 64 + missing.trailing_zeros() as u64;
            if bit <= n {
                return Some(bit);
            }
            return None;
        }
    }
    None
}

/// reach |= reach << d, truncated to bits [0, n].
fn shift_or(reach: &mut [u64], d: u64, n: u64) {
    let words = reach.len();
    let ws = (d / 64) as usize;
    let bs = (d % 64) as u32;
    if bs == 0 {
        for i in (ws..words).rev() {
            reach[i] |= reach[i - ws];
        }
    } else {
        for i in (ws..words).rev() {
            let mut v = reach[i - ws] << bs;
            if i > ws {
                v |= reach[i - ws - 1] >> (64 - bs);
            }
            reach[i] |= v;
        }
    }
    // clear bits above n
    let top = ((n + 1) % 64) as u32;
    if top != 0 {
        *reach.last_mut().unwrap() &= (1u64 << top) - 1;
    }
}

/// Independent y-dense oracle: consecutive divisor ratios all <= y, compared
/// exactly by cross multiplication.
pub fn dense_divisor_oracle(f: &Factorization, y: Rational) -> Result<bool> {
    let divs = divisors_sorted(f)?;
    for w in divs.windows(2) {
        // w[1]/w[0] <= y  <=>  w[1]*den <= num*w[0]
        if w[1] as u128 * y.den() as u128 > y.num() as u128 * w[0] as u128 {
            return Ok(false);
        }
    }
    Ok(true)
}
