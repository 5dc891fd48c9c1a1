//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantity (run with `--nocapture` to see them). Expected
//! values marked "oracle" are recomputed here by independent brute force
//! before being asserted against the production path.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use btheta::arith::{build_spf_table, factorize, initial_divisor, is_prime, sieve_primes};
use btheta::counters::{
    margenstern_exceptions, melfi_exceptions, pair_count, shifted_prime_count, tuple_count,
};
use btheta::job::{self, CommandSpec, JobSpec, OutputFormat};
use btheta::sieve::{count_bounded_smooth, count_members, for_each_member, members_in_range};
use btheta::theta::{
    dense_divisor_oracle, is_member, subset_sum_practical_oracle, Rational, ThetaSpec,
};

fn practical() -> ThetaSpec {
    ThetaSpec::practical()
}

fn rat(s: &str) -> Rational {
    s.parse().unwrap()
}

/// Independent practicality check used wherever a criterion demands an
/// oracle-derived expected value: trial-division factorization plus the
/// divisor subset-sum bitset, no shared code path with the sieve.
fn oracle_practical(n: u64) -> bool {
    subset_sum_practical_oracle(&factorize(n, None).unwrap()).unwrap()
}

#[test]
fn criterion_01_stewart_sierpinski_oracle_equivalence() {
    let t0 = Instant::now();
    let mismatches: u64 = (1u64..=100_000)
        .into_par_iter()
        .map(|n| {
            let f = factorize(n, None).unwrap();
            let chain = is_member(&practical(), &f).unwrap().member;
            let oracle = subset_sum_practical_oracle(&f).unwrap();
            u64::from(chain != oracle)
        })
        .sum();
    let secs = t0.elapsed().as_secs_f64();
    assert_eq!(mismatches, 0);
    assert!(secs < 60.0, "sweep took {secs:.1} s, budget 60 s");
    println!(
        "PASS criterion 1: chain test == subset-sum oracle for all n <= 1e5 \
         (0 mismatches, {secs:.1} s)"
    );
}

#[test]
fn criterion_02_tenenbaum_oracle_equivalence() {
    let ys = ["2", "5/2", "3", "11/2"];
    for y_text in ys {
        let y = rat(y_text);
        let spec = ThetaSpec::dense(y).unwrap();
        let mismatches: u64 = (1u64..=100_000)
            .into_par_iter()
            .map(|n| {
                let f = factorize(n, None).unwrap();
                let chain = is_member(&spec, &f).unwrap().member;
                let oracle = dense_divisor_oracle(&f, y).unwrap();
                u64::from(chain != oracle)
            })
            .sum();
        assert_eq!(mismatches, 0, "y = {y_text}");
    }
    println!(
        "PASS criterion 2: chain test == consecutive-ratio oracle for all n <= 1e5, \
         y in {{2, 5/2, 3, 11/2}} (0 mismatches)"
    );
}

#[test]
fn criterion_03_margenstern_sweep_to_1e7() {
    let t0 = Instant::now();
    let report = margenstern_exceptions(3, 10_000_000).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    assert!(report.exceptions.is_empty(), "exceptions: {:?}", report.exceptions);
    assert!(secs < 600.0, "sweep took {secs:.1} s, budget 600 s");
    println!(
        "PASS criterion 3: every odd n in [3, 1e7) is prime + practical \
         (0 exceptions, {secs:.1} s)"
    );
}

#[test]
fn criterion_04_melfi_sweep_to_1e6() {
    let report = melfi_exceptions(2, 1_000_001).unwrap();
    assert!(report.exceptions.is_empty(), "exceptions: {:?}", report.exceptions);
    println!("PASS criterion 4: every even n in [2, 1e6] is practical + practical (0 exceptions)");
}

#[test]
fn criterion_05_density_ratio_band() {
    // exact small count first, re-derived by the oracle
    let oracle_count_30 = (1u64..=30).filter(|&n| oracle_practical(n)).count() as u64;
    assert_eq!(oracle_count_30, 12);
    assert_eq!(count_members(&practical(), 30).unwrap(), 12);

    let mut ratios = Vec::new();
    for x in [10_000_000u64, 100_000_000] {
        let count = count_members(&practical(), x).unwrap();
        let ratio = count as f64 * (x as f64).ln() / x as f64;
        assert!(
            (1.20..=1.47).contains(&ratio),
            "x = {x}: count = {count}, ratio = {ratio:.5} outside [1.20, 1.47]"
        );
        ratios.push((x, count, ratio));
    }
    println!(
        "PASS criterion 5: count(30) = 12; density ratios {} in [1.20, 1.47]",
        ratios
            .iter()
            .map(|(x, c, r)| format!("x=1e{} count={c} ratio={r:.4}", (*x as f64).log10() as u32))
            .collect::<Vec<_>>()
            .join(", ")
    );
}

#[test]
fn criterion_06_growth_bound_sigma_plus_one() {
    let mut violations = 0u64;
    let mut members = 0u64;
    for_each_member(&practical(), 1, 1_000_001, &mut |m| {
        members += 1;
        if m.sigma + 1 < 2 * m.n as u128 {
            violations += 1;
        }
    })
    .unwrap();
    assert_eq!(violations, 0);
    println!(
        "PASS criterion 6: sigma(n) + 1 >= 2n for every practical n <= 1e6 \
         ({members} members, 0 violations)"
    );
}

#[test]
fn criterion_07_multiplicative_closure() {
    let spec = practical();
    let practicals: Vec<u64> = members_in_range(&spec, 1, 10_001).unwrap();
    let primes = sieve_primes(10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0u64;
    while checked < 10_000 {
        let n = practicals[rng.gen_range(0..practicals.len())];
        if n < 2 {
            continue;
        }
        // build k as a product of random primes <= n, keeping nk <= 1e9
        let bound = 1_000_000_000 / n;
        let usable: &[u64] = {
            let end = primes.partition_point(|&p| p <= n);
            &primes[..end]
        };
        let mut k = 1u64;
        for _ in 0..rng.gen_range(0..8) {
            if usable.is_empty() {
                break;
            }
            let p = usable[rng.gen_range(0..usable.len())];
            if k * p <= bound {
                k *= p;
            }
        }
        let nk = n * k;
        let member = is_member(&spec, &factorize(nk, None).unwrap()).unwrap().member;
        assert!(member, "closure violated: n = {n}, k = {k}, nk = {nk}");
        checked += 1;
    }
    println!(
        "PASS criterion 7: n practical and P+(k) <= n imply nk practical \
         ({checked} sampled pairs, 0 violations)"
    );
}

#[test]
fn criterion_08_initial_divisor_closure() {
    let spec = practical();
    let spf = build_spf_table(100_000).unwrap();
    let practicals = members_in_range(&spec, 1, 100_001).unwrap();
    let mut checked = 0u64;
    for &n in &practicals {
        let f = factorize(n, Some(&spf)).unwrap();
        for y in [10u64, 100, n] {
            let d = initial_divisor(&f, y);
            let member = is_member(&spec, &factorize(d, Some(&spf)).unwrap()).unwrap().member;
            assert!(member, "I_{y}({n}) = {d} is not practical");
            checked += 1;
        }
    }
    assert!(checked > 0);
    println!(
        "PASS criterion 8: I_y(n) practical for all practical n <= 1e5, \
         y in {{10, 100, n}} ({checked} checks, 0 violations)"
    );
}

#[test]
fn criterion_09_exact_small_range_equalities() {
    // every expected value re-derived by brute force before asserting the
    // production counters

    // S_1(20): primes p <= 20 with p - 1 practical
    let s1_oracle = (2u64..=20)
        .filter(|&p| is_prime(p) && oracle_practical(p - 1))
        .count() as u64;
    assert_eq!(s1_oracle, 7);
    assert_eq!(
        shifted_prime_count(&practical(), 1, 20).unwrap().value.as_int(),
        Some(7)
    );

    // T_2(30): n <= 30 with n, n+2 practical (n+2 may exceed 30)
    let t2_oracle = (1u64..=30)
        .filter(|&n| oracle_practical(n) && oracle_practical(n + 2))
        .count() as u64;
    assert_eq!(t2_oracle, 7);
    assert_eq!(pair_count(&practical(), 2, 30).unwrap().value.as_int(), Some(7));

    // tuple (0, 2, 4) up to 30
    let tuple_oracle = (1u64..=30)
        .filter(|&n| [0u64, 2, 4].iter().all(|&h| oracle_practical(n + h)))
        .count() as u64;
    assert_eq!(tuple_oracle, 4);
    assert_eq!(
        tuple_count(&practical(), &[0, 2, 4], 30).unwrap().value.as_int(),
        Some(4)
    );

    // B(30, 3, 1): practical n <= 30 with P+(n) <= 3
    let b_oracle = (1u64..=30)
        .filter(|&n| oracle_practical(n) && factorize(n, None).unwrap().pplus() <= 3)
        .count() as u64;
    assert_eq!(b_oracle, 9);
    assert_eq!(count_bounded_smooth(&practical(), 30, 3, rat("1")).unwrap(), 9);

    // B(10, 3, 2): chain test at scale 2, derived by a local reimplementation
    // of the scaled chain over trial-division factorizations
    let scaled_oracle = |n: u64| -> bool {
        let f = factorize(n, None).unwrap();
        let mut sigma: u128 = 1;
        let mut ok = true;
        for &(p, a) in f.factors() {
            if p as u128 > 2 * (sigma + 1) {
                ok = false;
                break;
            }
            let mut s: u128 = 1;
            let mut pw: u128 = 1;
            for _ in 0..a {
                pw *= p as u128;
                s += pw;
            }
            sigma *= s;
        }
        ok
    };
    let b2_oracle = (1u64..=10)
        .filter(|&n| scaled_oracle(n) && factorize(n, None).unwrap().pplus() <= 3)
        .count() as u64;
    assert_eq!(b2_oracle, 7);
    assert_eq!(count_bounded_smooth(&practical(), 10, 3, rat("2")).unwrap(), 7);

    println!(
        "PASS criterion 9: S_1(20)=7, T_2(30)=7, tuple(0,2,4;30)=4, B(30,3,1)=9, \
         B(10,3,2)=7, all oracle-derived and matched"
    );
}

#[test]
fn criterion_10_normalized_ratio_report() {
    let spec = practical();
    let xs = [100_000u64, 1_000_000, 10_000_000];
    let mut s_counts = Vec::new();
    let mut t_counts = Vec::new();
    let mut lines = Vec::new();
    for &x in &xs {
        let s = shifted_prime_count(&spec, 1, x).unwrap().value.as_int().unwrap();
        let t = pair_count(&spec, 2, x).unwrap().value.as_int().unwrap();
        let norm = (x as f64).ln().powi(2) / x as f64;
        lines.push(format!(
            "x=1e{}: S_1={s} (S_1*ln^2x/x = {:.4}), T_2={t} (T_2*ln^2x/x = {:.4})",
            (x as f64).log10() as u32,
            s as f64 * norm,
            t as f64 * norm
        ));
        s_counts.push(s);
        t_counts.push(t);
    }
    // only positivity and monotone growth of raw counts is asserted; the
    // asymptotic constants are not computable at desk scale
    assert!(s_counts.iter().all(|&c| c > 0));
    assert!(t_counts.iter().all(|&c| c > 0));
    assert!(s_counts.windows(2).all(|w| w[0] < w[1]));
    assert!(t_counts.windows(2).all(|w| w[0] < w[1]));
    for h in [2i64, 4, 6, 28] {
        assert_eq!(
            pair_count(&spec, h, 2_000).unwrap().value,
            tuple_count(&spec, &[0, h as u64], 2_000).unwrap().value,
            "h = {h}"
        );
    }
    println!(
        "PASS criterion 10: counts positive and strictly growing; pair == tuple(0,h); {}",
        lines.join("; ")
    );
}

#[test]
fn criterion_11_determinism_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let job = JobSpec {
        command: CommandSpec::Margenstern { lo: 3, hi: 10_000_001 },
        spec: "practical".into(),
        shards: 16,
    };

    let run_json = |cp: Option<&std::path::Path>| -> String {
        let mut buf = Vec::new();
        let exit = job::run(&job, cp, &mut buf, OutputFormat::Json).unwrap();
        assert_eq!(exit, 0);
        String::from_utf8(buf).unwrap()
    };

    // uninterrupted reference run
    let reference = run_json(None);

    // full checkpointed run, then truncate to simulate an interrupt after 6
    // of 16 shards
    let full_path = dir.path().join("full.jsonl");
    let _ = run_json(Some(&full_path));
    let text = std::fs::read_to_string(&full_path).unwrap();
    let partial: Vec<&str> = text.lines().take(7).collect(); // header + 6 shards
    let partial_path = dir.path().join("interrupted.jsonl");
    std::fs::write(&partial_path, partial.join("\n") + "\n").unwrap();

    let resumed = run_json(Some(&partial_path));
    assert_eq!(reference, resumed, "resumed report differs from uninterrupted run");
    println!(
        "PASS criterion 11: interrupted+resumed sharded 1e7 sweep report is \
         byte-identical to the uninterrupted run ({} bytes)",
        reference.len()
    );
}
