use convoy_core::qseries::qpoch_finite;
use convoy_core::{BigInt, BigRational, LaurentPoly, Scalar};
use proptest::prelude::*;

fn laurent() -> impl Strategy<Value = LaurentPoly> {
    proptest::collection::vec((-6i64..7, -50i64..51), 0..8).prop_map(|terms| {
        let mut p = LaurentPoly::zero();
        for (d, c) in terms {
            p.add_term(d, BigInt::from(c));
        }
        p
    })
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

proptest! {
    #[test]
    fn display_parse_round_trip(p in laurent()) {
        let back: LaurentPoly = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn evaluation_is_a_ring_map(a in laurent(), b in laurent(), n in 1i64..9, d in 1i64..9) {
        let q = rat(n, d);
        prop_assert_eq!((&a * &b).eval(&q), a.eval(&q) * b.eval(&q));
        prop_assert_eq!((&a + &b).eval(&q), a.eval(&q) + b.eval(&q));
        prop_assert_eq!(&a - &a, LaurentPoly::zero());
    }

    #[test]
    fn shift_multiplies_by_power(p in laurent(), k in -5i64..6, n in 1i64..9) {
        let q = rat(n, 3);
        let lhs = p.shift(k).eval(&q);
        let rhs = p.eval(&q) * LaurentPoly::monomial(k, BigInt::from(1)).eval(&q);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn qpoch_recurrence(an in -9i64..10, qn in 0i64..10, n in 0usize..12) {
        let a = rat(an, 7);
        let q = rat(qn, 10);
        let step = qpoch_finite(&a, &q, n) * (rat(1, 1) - a.clone() * q.powi(n as i64));
        prop_assert_eq!(qpoch_finite(&a, &q, n + 1), step);
    }

    #[test]
    fn qpoch_float_tracks_exact(an in -9i64..10, qn in 0i64..10, n in 0usize..30) {
        let exact = qpoch_finite(&rat(an, 7), &rat(qn, 10), n);
        let float = qpoch_finite(&(an as f64 / 7.0), &(qn as f64 / 10.0), n);
        let e = exact.to_f64();
        prop_assert!((float - e).abs() <= 1e-12 * e.abs().max(1.0));
    }
}
