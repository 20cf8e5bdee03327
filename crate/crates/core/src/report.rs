//! Lower/upper bounds for `dim H^q_{(p)}(D*, O)` and the per-exponent band tables.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::index::{self, Exponent, IndexError, Rational};
use crate::riemann_roch::{self, CurveData, DimensionData, RiemannRochError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Dimensions(#[from] RiemannRochError),
    #[error("no dimension data for H^{q} with d = {d}; supply a dimension table")]
    MissingDimensionData { q: u32, d: u32 },
    #[error("projective-space check needs 1 <= q <= k, got k = {k}, q = {q}")]
    InvalidProjectiveCheck { k: u32, q: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandStatus {
    ExactZero,
    ExactN,
    Interval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohomologyBand {
    pub p: Exponent,
    pub q: u32,
    pub d: u32,
    pub lower: u64,
    pub upper: u64,
    pub status: BandStatus,
}

impl CohomologyBand {
    fn from_bounds(p: Exponent, q: u32, d: u32, lower: u64, upper: u64) -> Self {
        debug_assert!(lower <= upper);
        let status = match (lower, upper) {
            (0, 0) => BandStatus::ExactZero,
            (l, u) if l == u => BandStatus::ExactN,
            _ => BandStatus::Interval,
        };
        CohomologyBand {
            p,
            q,
            d,
            lower,
            upper,
            status,
        }
    }

    /// Table notation: `=n`, `≤n` when the lower bound is zero, `∈{l,...,u}` otherwise.
    pub fn notation(&self) -> String {
        bounds_notation(self.lower, self.upper)
    }
}

fn bounds_notation(lower: u64, upper: u64) -> String {
    if lower == upper {
        format!("={lower}")
    } else if lower == 0 {
        format!("≤{upper}")
    } else if upper - lower <= 5 {
        let values: Vec<String> = (lower..=upper).map(|v| v.to_string()).collect();
        format!("∈{{{}}}", values.join(","))
    } else {
        format!("∈{{{lower}..{upper}}}")
    }
}

/// True iff `1 <= q <= d - 2`, where the group vanishes for every `p`.
pub fn low_degree_vanishing(d: u32, q: u32) -> Result<bool, ReportError> {
    index::check_degree(q, d)?;
    Ok(q + 2 <= d)
}

fn obstruction_from(
    dims: &DimensionData,
    d: u32,
    q: u32,
    from_mu: i64,
) -> Result<u64, ReportError> {
    match dims {
        // Curve cohomology vanishes above degree one.
        DimensionData::Curve(_) | DimensionData::Table(_) if d == 2 && q == 2 => Ok(0),
        DimensionData::Curve(_) if d == 2 => Ok(dims.obstruction_sum(from_mu)?),
        DimensionData::Curve(_) => Err(ReportError::MissingDimensionData { q, d }),
        DimensionData::Table(table) => Ok(table.obstruction_sum(from_mu)?),
    }
}

pub fn band(
    dims: &DimensionData,
    d: u32,
    q: u32,
    p: Exponent,
) -> Result<CohomologyBand, ReportError> {
    if low_degree_vanishing(d, q)? {
        return Ok(CohomologyBand::from_bounds(p, q, d, 0, 0));
    }
    let a = index::a_index(p, q, d)?;
    let c = index::c_index(p, q, d)?;
    let upper = obstruction_from(dims, d, q, a)?;
    let lower = obstruction_from(dims, d, q, c)?;
    Ok(CohomologyBand::from_bounds(p, q, d, lower, upper))
}

/// One end of a band-table row range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeEnd {
    pub p: Exponent,
    pub inclusive: bool,
}

/// Range of exponents covered by one row. `None` means the range reaches the
/// end of `[1, ∞]` on that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExponentRange {
    pub low: Option<RangeEnd>,
    pub high: Option<RangeEnd>,
}

impl ExponentRange {
    fn point(p: Exponent) -> Self {
        let end = Some(RangeEnd { p, inclusive: true });
        ExponentRange { low: end, high: end }
    }

    pub fn as_point(&self) -> Option<Exponent> {
        match (self.low, self.high) {
            (Some(l), Some(h)) if l == h && l.inclusive => Some(l.p),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        if let Some(p) = self.as_point() {
            return format!("p = {p}");
        }
        let below = |end: RangeEnd| if end.inclusive { "≤" } else { "<" };
        match (self.low, self.high) {
            (None, None) => "all p".to_string(),
            (Some(l), None) => format!("p {} {}", if l.inclusive { "≥" } else { ">" }, l.p),
            (None, Some(h)) => format!("p {} {}", below(h), h.p),
            (Some(l), Some(h)) => format!("{} {} p {} {}", l.p, below(l), below(h), h.p),
        }
    }

    pub fn to_json(&self) -> Value {
        if let Some(p) = self.as_point() {
            return Value::String(p.to_string());
        }
        let mut map = serde_json::Map::new();
        if let Some(l) = self.low {
            map.insert(
                if l.inclusive { "ge" } else { "gt" }.into(),
                Value::String(l.p.to_string()),
            );
        }
        if let Some(h) = self.high {
            map.insert(
                if h.inclusive { "le" } else { "lt" }.into(),
                Value::String(h.p.to_string()),
            );
        }
        Value::Object(map)
    }

    pub fn contains(&self, p: Exponent) -> bool {
        let above = self.low.is_none_or(|l| if l.inclusive { p >= l.p } else { p > l.p });
        let below = self.high.is_none_or(|h| if h.inclusive { p <= h.p } else { p < h.p });
        above && below
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandRow {
    pub range: ExponentRange,
    /// Exponent at which the band was evaluated.
    pub sample: Exponent,
    pub band: CohomologyBand,
}

impl BandRow {
    pub fn to_json(&self) -> Value {
        json!({
            "p": self.range.to_json(),
            "lower": self.band.lower,
            "upper": self.band.upper,
            "status": self.band.status,
        })
    }
}

/// Rows ordered by decreasing `p`: one per breakpoint and per open interval
/// between breakpoints, with adjacent identical bands merged.
pub fn band_table(dims: &DimensionData, d: u32, q: u32) -> Result<Vec<BandRow>, ReportError> {
    let points = index::breakpoints(q, d)?;
    let two = Rational::from_integer(2);

    // (range, sample) pieces in increasing p, covering [1, ∞].
    let mut pieces: Vec<(ExponentRange, Exponent)> = Vec::new();
    for (i, &bp) in points.iter().enumerate() {
        let here = Exponent::Finite(bp);
        pieces.push((ExponentRange::point(here), here));
        let (sample, high) = match points.get(i + 1) {
            Some(&next) => (
                Exponent::Finite((bp + next) / two),
                Some(RangeEnd {
                    p: Exponent::Finite(next),
                    inclusive: false,
                }),
            ),
            None => (
                Exponent::Finite(bp + Rational::from_integer(1)),
                Some(RangeEnd {
                    p: Exponent::Infinite,
                    inclusive: false,
                }),
            ),
        };
        let range = ExponentRange {
            low: Some(RangeEnd {
                p: here,
                inclusive: false,
            }),
            high,
        };
        pieces.push((range, sample));
    }
    pieces.push((ExponentRange::point(Exponent::Infinite), Exponent::Infinite));

    let mut rows: Vec<BandRow> = Vec::new();
    for (range, sample) in pieces {
        let band = band(dims, d, q, sample)?;
        match rows.last_mut() {
            Some(last) if (last.band.lower, last.band.upper) == (band.lower, band.upper) => {
                last.range.high = range.high;
            }
            _ => rows.push(BandRow {
                range,
                sample,
                band,
            }),
        }
    }

    // Bounds at the ends of [1, ∞] are implicit.
    for row in &mut rows {
        if row.range.as_point().is_some() {
            continue;
        }
        if row.range.low == Some(RangeEnd { p: Exponent::Finite(Rational::from_integer(1)), inclusive: true }) {
            row.range.low = None;
        }
        if matches!(row.range.high, Some(RangeEnd { p: Exponent::Infinite, .. })) {
            row.range.high = None;
        }
    }
    rows.reverse();
    Ok(rows)
}

pub fn render_markdown(rows: &[BandRow]) -> String {
    let mut out = String::from("| p | lower | upper | dim |\n| --- | --- | --- | --- |\n");
    for row in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            row.range.label(),
            row.band.lower,
            row.band.upper,
            row.band.notation()
        );
    }
    out
}

pub fn render_csv(rows: &[BandRow]) -> String {
    let mut out = String::from("p,lower,upper,status,dim\n");
    for row in rows {
        let status = serde_json::to_value(row.band.status).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.range.label(),
            row.band.lower,
            row.band.upper,
            status.as_str().unwrap_or_default(),
            row.band.notation()
        );
    }
    out
}

pub fn render_json(rows: &[BandRow]) -> String {
    let rows: Vec<Value> = rows.iter().map(BandRow::to_json).collect();
    let mut text = serde_json::to_string_pretty(&rows).unwrap_or_default();
    text.push('\n');
    text
}

/// `H^1_{(2)}(D*, O) = 0`, decided from the lower bound at `p = 2` (`d = 2`, `q = 1`).
pub fn cp1_criterion(dims: &DimensionData) -> Result<bool, ReportError> {
    Ok(band(dims, 2, 1, Exponent::Finite(Rational::from_integer(2)))?.lower == 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ProjectiveVanishing {
    /// `h1 = 0` confirmed by Riemann–Roch for every `μ` in `[from_mu, through_mu]`,
    /// and beyond `through_mu` the degree exceeds `2g - 2`.
    Verified {
        from_mu: i64,
        through_mu: i64,
        /// `h1` at `from_mu - 1`, just outside the claimed range.
        h1_below_range: u64,
    },
    /// Claimed vanishing from `from_mu` on, recorded without verification.
    Recorded { from_mu: i64 },
}

/// Vanishing of `H^q(CP^k, O(N^{-μ}))` for `μ >= q - 2k`; checkable by Riemann–Roch
/// only for `k = 1`.
pub fn cpk_vanishing_check(k: u32, q: u32) -> Result<ProjectiveVanishing, ReportError> {
    if k == 0 || q == 0 || q > k {
        return Err(ReportError::InvalidProjectiveCheck { k, q });
    }
    let from_mu = q as i64 - 2 * k as i64;
    if k > 1 {
        return Ok(ProjectiveVanishing::Recorded { from_mu });
    }
    let line = CurveData::rational(1);
    let through_mu = riemann_roch::vanishing_threshold(line)? + 32;
    for mu in from_mu..=through_mu {
        let h1 = riemann_roch::h1(line, mu)?;
        if h1 != 0 {
            // Nonvanishing here would be a counterexample; report it rather than panic.
            return Ok(ProjectiveVanishing::Recorded { from_mu });
        }
    }
    Ok(ProjectiveVanishing::Verified {
        from_mu,
        through_mu,
        h1_below_range: riemann_roch::h1(line, from_mu - 1)?,
    })
}
