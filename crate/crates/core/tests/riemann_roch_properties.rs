use lp_dolbeault::riemann_roch::{h0, h1, obstruction_sum, vanishing_threshold};
use lp_dolbeault::{CurveData, DimTable, RiemannRochError};
use proptest::prelude::*;

/// Sections of a degree-`m` bundle on the projective line: monomials of degree `m` in two variables.
fn line_sections(m: i64) -> i64 {
    (0..=m.max(-1)).count() as i64
}

/// Sections on an elliptic curve: `1, x, y, x², xy, ...` with pole order at most `m` at
/// the origin, for the bundle `O(m·O)`; degree-0 counted as the trivial bundle.
fn elliptic_sections(m: i64) -> i64 {
    match m {
        m if m < 0 => 0,
        0 => 1,
        // pole orders 0, 2, 3, ..., m are attained; 1 is not
        m => (0..=m).filter(|&k| k != 1).count() as i64,
    }
}

fn sections(genus: u32, m: i64) -> i64 {
    if genus == 0 {
        line_sections(m)
    } else {
        elliptic_sections(m)
    }
}

proptest! {
    #[test]
    fn riemann_roch_and_duality(genus in 0u32..=1, e in 1u32..=4, mu in -10i64..=10) {
        let curve = CurveData::new(genus, e).unwrap();
        let deg = curve.degree(mu);
        let (a, b) = (h0(curve, mu).unwrap() as i64, h1(curve, mu).unwrap() as i64);
        prop_assert_eq!(a, sections(genus, deg));
        prop_assert_eq!(a - b, deg + 1 - genus as i64);
        prop_assert_eq!(b, sections(genus, 2 * genus as i64 - 2 - deg));
        if deg > 2 * genus as i64 - 2 { prop_assert_eq!(b, 0); }
        if deg < 0 { prop_assert_eq!(a, 0); }
    }

    #[test]
    fn obstruction_sum_telescopes(genus in 0u32..=1, e in 1u32..=4, mu in -10i64..=10) {
        let curve = CurveData::new(genus, e).unwrap();
        let step = obstruction_sum(curve, mu).unwrap() - obstruction_sum(curve, mu + 1).unwrap();
        let expected = if mu < vanishing_threshold(curve).unwrap() { h1(curve, mu).unwrap() } else { 0 };
        prop_assert_eq!(step, expected);
    }
}

#[test]
fn higher_genus_needs_a_table() {
    let curve = CurveData::new(2, 1).unwrap();
    assert!(matches!(h0(curve, 0), Err(RiemannRochError::UnsupportedGenus(2))));
}

#[test]
fn computed_tables_satisfy_riemann_roch() {
    for genus in 0..=1 {
        let table = DimTable::computed(CurveData::new(genus, 2).unwrap(), -6, 6).unwrap();
        assert!(table.riemann_roch_violations().is_empty());
    }
}

#[test]
fn user_table_violations_are_reported() {
    let text = r#"{"genus": 2, "bundle_degree": 1, "h1_zero_from": 1,
        "entries": {"0": {"h0": 1, "h1": 2}, "-1": {"h0": 0, "h1": 1}}}"#;
    let table = DimTable::from_json(text).unwrap();
    assert_eq!(table.riemann_roch_violations(), vec![-1]);
    assert_eq!(table.obstruction_sum(0).unwrap(), 2);
}
