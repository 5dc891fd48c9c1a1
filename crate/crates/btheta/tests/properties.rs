//! Property tests for the arithmetic core and the membership test.

use proptest::prelude::*;

use btheta::arith::{arith_profile, divisors_sorted, factorize, is_prime};
use btheta::job::plan_shards;
use btheta::theta::{
    dense_divisor_oracle, is_member, subset_sum_practical_oracle, Rational, ThetaSpec,
};

proptest! {
    #[test]
    fn factorize_roundtrips(n in 1u64..=1_000_000_000_000) {
        let f = factorize(n, None).unwrap();
        let back: u128 = f.factors().iter().map(|&(p, a)| (p as u128).pow(a)).product();
        prop_assert_eq!(back, n as u128);
        for w in f.factors().windows(2) {
            prop_assert!(w[0].0 < w[1].0);
        }
        for &(p, a) in f.factors() {
            prop_assert!(is_prime(p));
            prop_assert!(a >= 1);
        }
    }

    #[test]
    fn omega_identity_and_divisor_sigma(n in 1u64..=100_000) {
        let f = factorize(n, None).unwrap();
        let prof = arith_profile(&f).unwrap();
        prop_assert_eq!(prof.omega_big, prof.omega3 + prof.v2);
        let divs = divisors_sorted(&f).unwrap();
        prop_assert_eq!(prof.sigma, divs.iter().sum::<u64>());
        prop_assert_eq!(*divs.first().unwrap(), 1);
        prop_assert_eq!(*divs.last().unwrap(), n);
    }

    #[test]
    fn chain_equals_subset_sum_oracle(n in 1u64..=300_000) {
        let f = factorize(n, None).unwrap();
        let chain = is_member(&ThetaSpec::practical(), &f).unwrap().member;
        prop_assert_eq!(chain, subset_sum_practical_oracle(&f).unwrap());
    }

    #[test]
    fn chain_equals_ratio_oracle(n in 1u64..=300_000, num in 2u64..=8, extra in 0u64..=1) {
        let y = Rational::new(2 * num + extra, 2).unwrap(); // y >= 2, halves allowed
        let f = factorize(n, None).unwrap();
        let spec = ThetaSpec::dense(y).unwrap();
        prop_assert_eq!(
            is_member(&spec, &f).unwrap().member,
            dense_divisor_oracle(&f, y).unwrap()
        );
    }

    #[test]
    fn membership_monotone_in_scale(n in 1u64..=200_000, zn in 1u64..=6, zd in 1u64..=3) {
        prop_assume!(zn >= zd);
        let z = Rational::new(zn, zd).unwrap();
        let f = factorize(n, None).unwrap();
        let base = ThetaSpec::practical();
        if is_member(&base, &f).unwrap().member {
            let scaled = base.scaled(z).unwrap();
            prop_assert!(is_member(&scaled, &f).unwrap().member);
        }
    }

    #[test]
    fn shard_plans_cover_and_balance(lo in 1u64..=1_000, span in 1u64..=100_000, k in 1u32..=64) {
        let hi = lo + span;
        let plan = plan_shards(lo, hi, k).unwrap();
        prop_assert_eq!(plan.first().unwrap().lo, lo);
        prop_assert_eq!(plan.last().unwrap().hi, hi);
        for w in plan.windows(2) {
            prop_assert_eq!(w[0].hi, w[1].lo);
        }
        let sizes: Vec<u64> = plan.iter().map(|s| s.hi - s.lo).collect();
        let min = *sizes.iter().min().unwrap();
        let max = *sizes.iter().max().unwrap();
        prop_assert!(max - min <= 1);
    }
}
