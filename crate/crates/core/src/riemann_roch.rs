//! Dimensions of `H^0` and `H^1` of the twists `N^{-μ}` on the exceptional curve.
//!
//! Genus 0 and 1 are computed exactly from the degree alone. Higher genus has
//! no canonical answer from the degree (it depends on the curve and the
//! bundle), so it is only available through a user-supplied [`DimTable`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RiemannRochError {
    #[error("genus {0} is not supported in exact mode; supply a dimension table")]
    UnsupportedGenus(u32),
    #[error("bundle degree must be at least 1, got {0}")]
    InvalidBundleDegree(u32),
    #[error("dimension table has no entry for mu = {0}")]
    MissingEntry(i64),
    #[error("dimension table does not declare h1_zero_from")]
    NoVanishingTail,
    #[error("invalid dimension table: {0}")]
    InvalidTable(String),
}

/// A compact curve `X` together with `e = -deg(N|_X)`, so `deg N^{-μ} = e·μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveData {
    pub genus: u32,
    pub bundle_degree: u32,
}

impl CurveData {
    pub fn new(genus: u32, bundle_degree: u32) -> Result<Self, RiemannRochError> {
        if bundle_degree == 0 {
            return Err(RiemannRochError::InvalidBundleDegree(bundle_degree));
        }
        Ok(CurveData {
            genus,
            bundle_degree,
        })
    }

    pub fn rational(bundle_degree: u32) -> Self {
        CurveData {
            genus: 0,
            bundle_degree,
        }
    }

    pub fn elliptic(bundle_degree: u32) -> Self {
        CurveData {
            genus: 1,
            bundle_degree,
        }
    }

    /// `deg N^{-μ}`.
    pub fn degree(&self, mu: i64) -> i64 {
        self.bundle_degree as i64 * mu
    }

    /// Riemann–Roch right-hand side `deg + 1 - g`.
    pub fn euler_characteristic(&self, mu: i64) -> i64 {
        self.degree(mu) + 1 - self.genus as i64
    }

    fn exact(&self) -> Result<(), RiemannRochError> {
        if self.bundle_degree == 0 {
            return Err(RiemannRochError::InvalidBundleDegree(0));
        }
        if self.genus > 1 {
            return Err(RiemannRochError::UnsupportedGenus(self.genus));
        }
        Ok(())
    }
}

/// `dim H^0(X, O(N^{-μ}))` for genus 0 or 1.
pub fn h0(curve: CurveData, mu: i64) -> Result<u64, RiemannRochError> {
    curve.exact()?;
    let deg = curve.degree(mu);
    Ok(match curve.genus {
        0 => (deg + 1).max(0) as u64,
        _ => match deg {
            d if d < 0 => 0,
            0 => 1,
            d => d as u64,
        },
    })
}

/// `dim H^1(X, O(N^{-μ}))` from Riemann–Roch.
pub fn h1(curve: CurveData, mu: i64) -> Result<u64, RiemannRochError> {
    let h0 = h0(curve, mu)? as i64;
    let h1 = h0 - curve.euler_characteristic(mu);
    debug_assert!(h1 >= 0);
    Ok(h1 as u64)
}

/// Least `μ0 >= 0` past which every `H^1` vanishes: `floor((2g-2)/e) + 1`, clamped.
pub fn vanishing_threshold(curve: CurveData) -> Result<i64, RiemannRochError> {
    curve.exact()?;
    Ok(curve_vanishing_bound(curve))
}

fn curve_vanishing_bound(curve: CurveData) -> i64 {
    let canonical = 2 * curve.genus as i64 - 2;
    (num_integer::Integer::div_floor(&canonical, &(curve.bundle_degree as i64)) + 1).max(0)
}

/// `Σ_{μ >= from} dim H^1(X, O(N^{-μ}))`.
pub fn obstruction_sum(curve: CurveData, from_mu: i64) -> Result<u64, RiemannRochError> {
    let stop = vanishing_threshold(curve)?;
    (from_mu..stop).map(|mu| h1(curve, mu)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimEntry {
    pub h0: u64,
    pub h1: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimSource {
    Computed,
    #[default]
    UserSupplied,
}

/// Map `μ ↦ (h0, h1)`.
///
/// For surfaces and higher-dimensional exceptional sets the `h1` column holds
/// `dim H^q(X, O(N^{-μ}))` for the degree `q` being reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimTable {
    pub genus: u32,
    pub bundle_degree: u32,
    pub entries: BTreeMap<i64, DimEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1_zero_from: Option<i64>,
    #[serde(default, skip_serializing)]
    pub source: DimSource,
}

impl DimTable {
    /// Exact table on `μ ∈ [from, to]`.
    pub fn computed(curve: CurveData, from: i64, to: i64) -> Result<Self, RiemannRochError> {
        let entries = (from..=to)
            .map(|mu| Ok((mu, DimEntry { h0: h0(curve, mu)?, h1: h1(curve, mu)? })))
            .collect::<Result<_, RiemannRochError>>()?;
        Ok(DimTable {
            genus: curve.genus,
            bundle_degree: curve.bundle_degree,
            entries,
            h1_zero_from: Some(vanishing_threshold(curve)?),
            source: DimSource::Computed,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, RiemannRochError> {
        let mut table: DimTable = serde_json::from_str(text)
            .map_err(|e| RiemannRochError::InvalidTable(e.to_string()))?;
        if table.bundle_degree == 0 {
            return Err(RiemannRochError::InvalidBundleDegree(0));
        }
        table.source = DimSource::UserSupplied;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RiemannRochError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RiemannRochError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn curve(&self) -> CurveData {
        CurveData {
            genus: self.genus,
            bundle_degree: self.bundle_degree,
        }
    }

    /// Declared vanishing bound. For user tables this is the bound the table
    /// asserts, not the least zero observed in the listed entries.
    pub fn vanishing_threshold(&self) -> Result<i64, RiemannRochError> {
        self.h1_zero_from
            .map(|mu| mu.max(0))
            .ok_or(RiemannRochError::NoVanishingTail)
    }

    pub fn h1(&self, mu: i64) -> Result<u64, RiemannRochError> {
        if let Some(entry) = self.entries.get(&mu) {
            return Ok(entry.h1);
        }
        match self.h1_zero_from {
            Some(zero_from) if mu >= zero_from => Ok(0),
            _ => Err(RiemannRochError::MissingEntry(mu)),
        }
    }

    pub fn obstruction_sum(&self, from_mu: i64) -> Result<u64, RiemannRochError> {
        let zero_from = self.h1_zero_from.ok_or(RiemannRochError::NoVanishingTail)?;
        (from_mu..zero_from).map(|mu| self.h1(mu)).sum()
    }

    /// Entries violating `h0 - h1 = e·μ + 1 - g`.
    pub fn riemann_roch_violations(&self) -> Vec<i64> {
        let curve = self.curve();
        self.entries
            .iter()
            .filter(|(&mu, e)| e.h0 as i64 - e.h1 as i64 != curve.euler_characteristic(mu))
            .map(|(&mu, _)| mu)
            .collect()
    }
}

/// Where `dim H^q(X, O(N^{-μ}))` comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimensionData {
    Curve(CurveData),
    Table(DimTable),
}

impl DimensionData {
    pub fn h1(&self, mu: i64) -> Result<u64, RiemannRochError> {
        match self {
            DimensionData::Curve(curve) => h1(*curve, mu),
            DimensionData::Table(table) => table.h1(mu),
        }
    }

    pub fn obstruction_sum(&self, from_mu: i64) -> Result<u64, RiemannRochError> {
        match self {
            DimensionData::Curve(curve) => obstruction_sum(*curve, from_mu),
            DimensionData::Table(table) => table.obstruction_sum(from_mu),
        }
    }

    pub fn vanishing_threshold(&self) -> Result<i64, RiemannRochError> {
        match self {
            DimensionData::Curve(curve) => vanishing_threshold(*curve),
            DimensionData::Table(table) => table.vanishing_threshold(),
        }
    }

    pub fn genus(&self) -> u32 {
        match self {
            DimensionData::Curve(curve) => curve.genus,
            DimensionData::Table(table) => table.genus,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P1: CurveData = CurveData {
        genus: 0,
        bundle_degree: 1,
    };
    const ELLIPTIC: CurveData = CurveData {
        genus: 1,
        bundle_degree: 1,
    };

    fn genus_two_table() -> DimTable {
        DimTable::from_json(
            r#"{"genus": 2, "bundle_degree": 1,
                "entries": {"-1": {"h0": 0, "h1": 2}, "0": {"h0": 1, "h1": 2},
                            "1": {"h0": 0, "h1": 0}, "2": {"h0": 1, "h1": 0}},
                "h1_zero_from": 3}"#,
        )
        .unwrap()
    }

    #[test]
    fn h0_examples() {
        assert_eq!(h0(P1, 2).unwrap(), 3);
        assert_eq!(h0(ELLIPTIC, 0).unwrap(), 1);
        assert_eq!(h0(P1, -1).unwrap(), 0);
        assert_eq!(h0(CurveData::elliptic(2), 1).unwrap(), 2);
    }

    #[test]
    fn h1_examples() {
        assert_eq!(h1(P1, -2).unwrap(), 1);
        assert_eq!(h1(ELLIPTIC, -3).unwrap(), 3);
        assert_eq!(h1(ELLIPTIC, 0).unwrap(), 1);
        assert_eq!(h1(P1, 5).unwrap(), 0);
    }

    #[test]
    fn vanishing_threshold_examples() {
        assert_eq!(vanishing_threshold(P1).unwrap(), 0);
        assert_eq!(vanishing_threshold(ELLIPTIC).unwrap(), 1);
        assert_eq!(genus_two_table().vanishing_threshold().unwrap(), 3);
    }

    #[test]
    fn obstruction_sum_examples() {
        assert_eq!(obstruction_sum(P1, -2).unwrap(), 1);
        assert_eq!(obstruction_sum(ELLIPTIC, -2).unwrap(), 4);
        assert_eq!(obstruction_sum(ELLIPTIC, 1).unwrap(), 0);
    }

    #[test]
    fn exact_mode_refuses_higher_genus() {
        let curve = CurveData::new(2, 1).unwrap();
        assert_eq!(h0(curve, 0), Err(RiemannRochError::UnsupportedGenus(2)));
        assert_eq!(h1(curve, 0), Err(RiemannRochError::UnsupportedGenus(2)));
        assert_eq!(
            CurveData::new(0, 0),
            Err(RiemannRochError::InvalidBundleDegree(0))
        );
    }

    #[test]
    fn user_table_lookups() {
        let table = genus_two_table();
        assert_eq!(table.source, DimSource::UserSupplied);
        assert_eq!(table.h1(0).unwrap(), 2);
        assert_eq!(table.h1(7).unwrap(), 0);
        assert_eq!(table.h1(-2), Err(RiemannRochError::MissingEntry(-2)));
        assert_eq!(table.obstruction_sum(0).unwrap(), 2);
        assert_eq!(table.obstruction_sum(-1).unwrap(), 4);
        assert!(table.riemann_roch_violations().is_empty());
    }

    #[test]
    fn table_without_tail_cannot_sum() {
        let table = DimTable::from_json(
            r#"{"genus": 3, "bundle_degree": 1, "entries": {"0": {"h0": 1, "h1": 3}}}"#,
        )
        .unwrap();
        assert_eq!(table.vanishing_threshold(), Err(RiemannRochError::NoVanishingTail));
        assert_eq!(table.obstruction_sum(0), Err(RiemannRochError::NoVanishingTail));
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(DimTable::from_json(r#"{"genus": 1}"#).is_err());
        assert!(DimTable::from_json(
            r#"{"genus": 1, "bundle_degree": 1, "entries": {"0": {"h0": -1, "h1": 0}}}"#
        )
        .is_err());
        assert!(DimTable::from_json(
            r#"{"genus": 1, "bundle_degree": 1, "entries": {"0": {"h0": 1.5, "h1": 0}}}"#
        )
        .is_err());
    }

    #[test]
    fn computed_table_round_trips_through_json() {
        let table = DimTable::computed(ELLIPTIC, -3, 3).unwrap();
        let text = serde_json::to_string(&table).unwrap();
        let back = DimTable::from_json(&text).unwrap();
        assert_eq!(back.entries, table.entries);
        assert_eq!(back.h1_zero_from, Some(1));
    }
}
