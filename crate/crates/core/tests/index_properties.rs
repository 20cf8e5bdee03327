use lp_dolbeault::index::{
    a_index, breakpoints, c_index, dbar_weight, holder_conjugate, nu_interval, pullback_exponent, Rational,
};
use lp_dolbeault::{Exponent, IndexBundle};
use proptest::prelude::*;

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        9 => (1i64..400, 1i64..40).prop_filter_map("p >= 1", |(n, d)| Exponent::ratio(n, d).ok()),
        1 => Just(Exponent::Infinite),
    ]
}

fn degree_and_dim() -> impl Strategy<Value = (u32, u32)> {
    (2u32..=6).prop_flat_map(|d| (1..=d, Just(d)))
}

/// Direct reading of the definition: largest `m` with `|z|^s L^p ⊂ |z|^m L^1` in one
/// variable, via Hölder on `|z|^{s−m}` against `L^{p'}`.
fn scan(p: Exponent, s: Rational) -> i64 {
    let integrable = |m: i64| {
        let gap = s - Rational::from_integer(m);
        match p {
            Exponent::Infinite => gap > Rational::from_integer(-2),
            Exponent::Finite(v) if v == Rational::from_integer(1) => gap >= Rational::from_integer(0),
            Exponent::Finite(v) => gap * v / (v - Rational::from_integer(1)) > Rational::from_integer(-2),
        }
    };
    (s.floor().to_integer() - 5..=s.ceil().to_integer() + 5)
        .filter(|&m| integrable(m))
        .max()
        .unwrap()
}

proptest! {
    #[test]
    fn a_and_c_differ_exactly_at_jumps(p in exponent(), (q, d) in degree_and_dim()) {
        let (a, c) = (a_index(p, q, d).unwrap(), c_index(p, q, d).unwrap());
        prop_assert!(a <= c && c <= a + 1);
        let jump = !matches!(p, Exponent::Finite(v) if v == Rational::from_integer(1))
            && p.divide(2 * d as i64).is_integer();
        prop_assert_eq!(a == c, !jump);
    }

    #[test]
    fn degree_shift((p, (q, d)) in (exponent(), (2u32..=6).prop_flat_map(|d| (1..d, Just(d))))) {
        prop_assert_eq!(a_index(p, q + 1, d).unwrap(), a_index(p, q, d).unwrap() + 1);
        prop_assert_eq!(c_index(p, q + 1, d).unwrap(), c_index(p, q, d).unwrap() + 1);
    }

    #[test]
    fn monotone_in_p(p in exponent(), r in exponent(), (q, d) in degree_and_dim()) {
        let (lo, hi) = if p <= r { (p, r) } else { (r, p) };
        prop_assert!(a_index(lo, q, d).unwrap() <= a_index(hi, q, d).unwrap());
        prop_assert!(c_index(lo, q, d).unwrap() <= c_index(hi, q, d).unwrap());
    }

    #[test]
    fn weight_of_pullback_is_a(p in exponent(), (q, d) in degree_and_dim()) {
        let s = pullback_exponent(p, q, d).unwrap();
        prop_assert_eq!(dbar_weight(p, s), a_index(p, q, d).unwrap());
    }

    #[test]
    fn weight_matches_holder_scan(p in exponent(), n in -60i64..60, den in 1i64..12) {
        let s = Rational::new(n, den);
        prop_assert_eq!(dbar_weight(p, s), scan(p, s));
        prop_assert_eq!(dbar_weight(p, s + Rational::from_integer(1)), dbar_weight(p, s) + 1);
    }

    #[test]
    fn nu_shift_lands_on_c(p in exponent(), (q, d) in degree_and_dim()) {
        let bundle = IndexBundle::new(p, q, d).unwrap();
        let nu = nu_interval(p, q, d).unwrap();
        prop_assert!(nu.contains(nu.midpoint()));
        prop_assert_eq!(dbar_weight(p, bundle.shifted_exponent()), bundle.c);
    }

    #[test]
    fn conjugate_is_an_involution(p in exponent()) {
        prop_assert_eq!(holder_conjugate(holder_conjugate(p)), p);
    }
}

#[test]
fn constant_between_breakpoints() {
    for d in 2..=5u32 {
        for q in 1..=d {
            let mut cuts = breakpoints(q, d).unwrap();
            cuts.push(Rational::from_integer(100));
            for w in cuts.windows(2) {
                let samples: Vec<(i64, i64)> = [1, 2, 3]
                    .iter()
                    .map(|&k| {
                        let p = Exponent::Finite(w[0] + (w[1] - w[0]) * Rational::new(k, 4));
                        (a_index(p, q, d).unwrap(), c_index(p, q, d).unwrap())
                    })
                    .collect();
                assert!(samples.windows(2).all(|s| s[0] == s[1]), "q = {q}, d = {d}, {w:?}");
            }
        }
    }
}

#[test]
fn command_line_examples() {
    let p43: Exponent = "4/3".parse().unwrap();
    assert_eq!((a_index(p43, 1, 2).unwrap(), c_index(p43, 1, 2).unwrap()), (-2, -1));
    assert_eq!(
        (a_index(Exponent::Infinite, 1, 2).unwrap(), c_index(Exponent::Infinite, 1, 2).unwrap()),
        (1, 2)
    );
    assert!("0.5".parse::<Exponent>().is_err());
}
