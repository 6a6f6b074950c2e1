use num_complex::Complex64;
use proptest::prelude::*;

use tracesum_core::amplifier::AmplifierFamily;
use tracesum_core::bilinear::{BilinearInstance, BILINEAR_TOL};
use tracesum_core::charsums::{ramanujan_sum, ramanujan_sum_direct};
use tracesum_core::modarith::{crt_combine, crt_split, inverse_mod, Modulus};
use tracesum_core::periodic::PeriodicFunction;
use tracesum_core::tracefn::{kloosterman, kloosterman_complex};

const PRIMES: [u64; 6] = [5, 7, 11, 31, 101, 211];

fn values(q: u64) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| Complex64::new(a, b)), q as usize)
}

fn function() -> impl Strategy<Value = PeriodicFunction> {
    prop::sample::select(PRIMES.to_vec())
        .prop_flat_map(values)
        .prop_map(|v| {
            let q = v.len() as u64;
            PeriodicFunction::new(Modulus::new(q).unwrap(), v).unwrap()
        })
}

fn triple() -> impl Strategy<Value = (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>)> {
    prop::sample::select(PRIMES.to_vec()).prop_flat_map(|q| (values(q), values(q), values(q)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_round_trip(k in function()) {
        prop_assert!(k.round_trip_defect() <= 1e-9 * k.l2_norm_sq().sqrt().max(1e-300));
    }

    #[test]
    fn plancherel(k in function()) {
        prop_assert!(k.plancherel_defect() <= 1e-9 * k.l2_norm_sq().max(1e-300));
    }

    #[test]
    fn sup_norm_of_transform_is_at_most_sqrt_q_sup(k in function()) {
        let q = k.q() as f64;
        prop_assert!(k.sup_norm_dft() <= q.sqrt() * k.sup_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn correlation_transform_formula(k in function()) {
        let l = k.correlation_l().unwrap();
        let q = k.q();
        let khat = k.dft_values();
        for h in 0..q {
            let expect = if h == 0 { khat[0].norm_sqr() } else { khat[inverse_mod(h as i64, q).unwrap() as usize].norm_sqr() };
            prop_assert!((l.dft_values()[h as usize] - expect).norm() <= 1e-9 * k.l2_norm_sq());
        }
    }

    #[test]
    fn detector_identity(k in function()) {
        prop_assert!(AmplifierFamily::new(k).unwrap().verify_detector().is_ok());
    }

    #[test]
    fn bilinear_ratio_at_most_one((a, b, kv) in triple()) {
        let q = kv.len() as u64;
        let k = PeriodicFunction::new(Modulus::new(q).unwrap(), kv).unwrap();
        let inst = BilinearInstance::new(a, b, k).unwrap();
        prop_assert!(inst.bound_ratio().unwrap() <= 1.0 + BILINEAR_TOL);
    }

    #[test]
    fn kloosterman_is_real_and_twisted_multiplicative(n in -50i64..50, i in 0usize..4, j in 0usize..4) {
        let small = [3u64, 4, 5, 7];
        let (m1, m2) = (small[i], small[j] + 8);
        prop_assume!(tracesum_core::modarith::gcd(m1, m2) == 1);
        let whole = Modulus::new(m1 * m2).unwrap();
        let direct = kloosterman(n, &whole);
        prop_assert!((direct - kloosterman_complex(n, &whole)).norm() < 1e-9);
        let inv2 = inverse_mod(m2 as i64, m1).unwrap() as i64;
        let inv1 = inverse_mod(m1 as i64, m2).unwrap() as i64;
        let split = kloosterman(n * inv2 * inv2, &Modulus::new(m1).unwrap())
            * kloosterman(n * inv1 * inv1, &Modulus::new(m2).unwrap());
        prop_assert!((direct - split).norm() < 1e-9);
    }

    #[test]
    fn ramanujan_sum_closed_form(n in -100i64..100, m in 1u64..200) {
        let m = Modulus::new(m).unwrap();
        prop_assert!((ramanujan_sum_direct(n, &m) - Complex64::new(ramanujan_sum(n, &m) as f64, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn crt_round_trip(x in 0u64..10_000, i in 0usize..4) {
        let m = [12u64, 210, 1001, 9999][i];
        let m = Modulus::new(m).unwrap();
        let x = x % m.value();
        prop_assert_eq!(crt_combine(&crt_split(x as i64, &m)), Some((x, m.value())));
    }
}
