//! Segmented enumeration of set members over large ranges.
//!
//! Each segment factors every integer at once: sieve primes are peeled off in
//! ascending order, the partial product and its sigma are carried per entry,
//! and the chain condition is applied the moment a prime appears. After all
//! primes up to sqrt(hi) are processed, a nonzero residual is the single
//! remaining large prime and gets the final chain check. The output is
//! identical to factoring every integer on its own and running the
//! membership test, which is exactly what the agreement tests assert.

use rayon::prelude::*;

use crate::arith::{factorize, sieve_primes, sigma_prime_power};
use crate::error::{Error, Result};
use crate::theta::{chain_ok, is_member, ThetaSpec};

/// Half-open interval of integers, the unit of parallel work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RangeShard {
    pub lo: u64,
    pub hi: u64,
}

/// Default segment width: fits the per-segment arrays in cache-friendly
/// chunks while amortizing the prime loop.
pub const DEFAULT_SEGMENT_WIDTH: u64 = 1 << 20;

/// One member as seen by the segment visitor.
#[derive(Debug, Clone, Copy)]
pub struct MemberInfo {
    pub n: u64,
    /// sigma(n), exact.
    pub sigma: u128,
    /// Largest prime factor, P+(1) = 1.
    pub pplus: u64,
}

const ALIVE: u8 = 0;
const DEAD: u8 = 1;
const SLOW: u8 = 2;

fn isqrt(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).map_or(true, |s| s > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).map_or(false, |s| s <= n) {
        r += 1;
    }
    r
}

/// Primes needed to sieve any segment inside [_, hi).
pub fn sieve_base_primes(hi: u64) -> Vec<u64> {
    if hi <= 2 {
        return Vec::new();
    }
    sieve_primes(isqrt(hi - 1))
}

/// Streams the members of the spec's set in [lo, hi) to `visitor`, ascending.
/// `base_primes` must contain every prime up to sqrt(hi - 1).
pub fn for_each_member_with(
    spec: &ThetaSpec,
    lo: u64,
    hi: u64,
    width: u64,
    base_primes: &[u64],
    visitor: &mut dyn FnMut(&MemberInfo),
) -> Result<()> {
    if lo < 1 {
        return Err(Error::Domain("range must start at 1 or above".into()));
    }
    if width < 1 {
        return Err(Error::Domain("segment width must be positive".into()));
    }
    let mut base = lo;
    while base < hi {
        let end = hi.min(base + width);
        process_segment(spec, base, end, base_primes, visitor)?;
        base = end;
    }
    Ok(())
}

/// Convenience wrapper that computes the base primes itself.
pub fn for_each_member(
    spec: &ThetaSpec,
    lo: u64,
    hi: u64,
    visitor: &mut dyn FnMut(&MemberInfo),
) -> Result<()> {
    let primes = sieve_base_primes(hi);
    for_each_member_with(spec, lo, hi, DEFAULT_SEGMENT_WIDTH, &primes, visitor)
}

fn process_segment(
    spec: &ThetaSpec,
    base: u64,
    end: u64,
    primes: &[u64],
    visitor: &mut dyn FnMut(&MemberInfo),
) -> Result<()> {
    let w = (end - base) as usize;
    let mut residual: Vec<u64> = (base..end).collect();
    let mut partial: Vec<u64> = vec![1; w];
    let mut sigma: Vec<u64> = vec![1; w];
    let mut pplus: Vec<u64> = vec![1; w];
    let mut state: Vec<u8> = vec![ALIVE; w];

    for &p in primes {
        if p >= end {
            break;
        }
        let mut idx = base.div_ceil(p) * p;
        // n = p itself has the prime as its large residual; peeling is still
        // correct since the loop below handles alpha from the residual.
        while idx < end {
            let i = (idx - base) as usize;
            if state[i] == ALIVE {
                match chain_ok(spec, p, partial[i], sigma[i] as u128) {
                    Ok(true) => {
                        let mut a = 0u32;
                        while residual[i] % p == 0 {
                            residual[i] /= p;
                            a += 1;
                        }
                        partial[i] *= p.pow(a);
                        let s = sigma[i] as u128 * sigma_prime_power(p, a);
                        match u64::try_from(s) {
                            Ok(v) => sigma[i] = v,
                            Err(_) => state[i] = SLOW,
                        }
                        pplus[i] = p;
                    }
                    Ok(false) => state[i] = DEAD,
                    Err(_) => state[i] = SLOW,
                }
            }
            idx += p;
        }
    }

    for i in 0..w {
        let n = base + i as u64;
        match state[i] {
            DEAD => {}
            SLOW => {
                // fell off the fast path (overflow territory); redo exactly
                let f = factorize(n, None)?;
                if is_member(spec, &f)?.member {
                    let mut s: u128 = 1;
                    for &(p, a) in f.factors() {
                        s = s
                            .checked_mul(sigma_prime_power(p, a))
                            .ok_or_else(|| Error::Overflow(format!("sigma({n})")))?;
                    }
                    visitor(&MemberInfo { n, sigma: s, pplus: f.pplus() });
                }
            }
            _ => {
                let r = residual[i];
                if r > 1 {
                    if chain_ok(spec, r, partial[i], sigma[i] as u128)? {
                        visitor(&MemberInfo {
                            n,
                            sigma: sigma[i] as u128 * (r as u128 + 1),
                            pplus: r,
                        });
                    }
                } else {
                    visitor(&MemberInfo { n, sigma: sigma[i] as u128, pplus: pplus[i] });
                }
            }
        }
    }
    Ok(())
}

/// Members of the set in [lo, hi), collected in ascending order.
pub fn members_in_range(spec: &ThetaSpec, lo: u64, hi: u64) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for_each_member(spec, lo, hi, &mut |m| out.push(m.n))?;
    Ok(out)
}

/// |set members in [1, x]|, computed in parallel over segments.
pub fn count_members(spec: &ThetaSpec, x: u64) -> Result<u64> {
    if x < 1 {
        return Err(Error::Domain("count_members needs x >= 1".into()));
    }
    count_filtered(spec, x, |_| true)
}

/// B(x, y, z): members of the z-scaled set up to x whose largest prime
/// factor is at most y. n = 1 counts since P+(1) = 1.
pub fn count_bounded_smooth(
    spec: &ThetaSpec,
    x: u64,
    y: u64,
    z: crate::theta::Rational,
) -> Result<u64> {
    if x < 1 || y < 1 {
        return Err(Error::Domain("count_bounded_smooth needs x, y >= 1".into()));
    }
    let scaled = spec.scaled(z)?;
    count_filtered(&scaled, x, move |m| m.pplus <= y)
}

fn count_filtered(
    spec: &ThetaSpec,
    x: u64,
    keep: impl Fn(&MemberInfo) -> bool + Sync,
) -> Result<u64> {
    let primes = sieve_base_primes(x + 1);
    let shards = parallel_shards(1, x + 1);
    let counts: Result<Vec<u64>> = shards
        .par_iter()
        .map(|s| {
            let mut c = 0u64;
            for_each_member_with(spec, s.lo, s.hi, DEFAULT_SEGMENT_WIDTH, &primes, &mut |m| {
                if keep(m) {
                    c += 1;
                }
            })?;
            Ok(c)
        })
        .collect();
    Ok(counts?.into_iter().sum())
}

/// Splits [lo, hi) into segment-width shards for data-parallel sieving.
pub fn parallel_shards(lo: u64, hi: u64) -> Vec<RangeShard> {
    let mut shards = Vec::new();
    let mut base = lo;
    while base < hi {
        let end = hi.min(base + DEFAULT_SEGMENT_WIDTH);
        shards.push(RangeShard { lo: base, hi: end });
        base = end;
    }
    shards
}

/// Bit-per-integer membership table over [0, limit]; bit n is set iff n >= 1
/// is a member. Built in parallel on 64-aligned blocks.
pub struct MemberBitset {
    limit: u64,
    words: Vec<u64>,
}

impl MemberBitset {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn contains(&self, n: u64) -> bool {
        n <= self.limit && self.words[(n / 64) as usize] >> (n % 64) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Ascending members as a vector.
    pub fn to_vec(&self) -> Vec<u64> {
        let mut v = Vec::with_capacity(self.count() as usize);
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                v.push(wi as u64 * 64 + bits.trailing_zeros() as u64);
                bits &= bits - 1;
            }
        }
        v
    }
}

/// Builds the membership bitset for 1..=limit.
pub fn member_bitset(spec: &ThetaSpec, limit: u64) -> Result<MemberBitset> {
    if limit < 1 {
        return Err(Error::Domain("member_bitset needs limit >= 1".into()));
    }
    let primes = sieve_base_primes(limit + 1);
    let words = (limit / 64 + 1) as usize;
    // 64-aligned blocks so each worker owns disjoint words
    let block_words = (DEFAULT_SEGMENT_WIDTH / 64) as usize;
    let blocks: Vec<(usize, usize)> = (0..words)
        .step_by(block_words)
        .map(|w0| (w0, words.min(w0 + block_words)))
        .collect();
    let parts: Result<Vec<Vec<u64>>> = blocks
        .par_iter()
        .map(|&(w0, w1)| {
            let mut chunk = vec![0u64; w1 - w0];
            let lo = (w0 as u64 * 64).max(1);
            let hi = (w1 as u64 * 64).min(limit + 1);
            if lo < hi {
                for_each_member_with(spec, lo, hi, DEFAULT_SEGMENT_WIDTH, &primes, &mut |m| {
                    chunk[(m.n / 64) as usize - w0] |= 1 << (m.n % 64);
                })?;
            }
            Ok(chunk)
        })
        .collect();
    let mut out = Vec::with_capacity(words);
    for part in parts? {
        out.extend(part);
    }
    Ok(MemberBitset { limit, words: out })
}
