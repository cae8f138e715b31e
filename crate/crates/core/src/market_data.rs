//! Price series ingestion: CSV loading, gap interpolation, alignment, splits.
//!
//! Input files carry one `date` column (ISO-8601) plus one price column per
//! commodity. Empty cells are gaps. Prices are converted to natural logs at
//! load time; everything downstream works on log prices.

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// A single commodity's log-price history, possibly with gaps.
///
/// This is the shape data has straight off disk: the calendar is the file's
/// date column, and a `None` cell marks a date where this commodity did not
/// trade. [`interpolate_gaps`] turns it into a gap-free [`PriceSeries`].
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub commodity_id: String,
    pub dates: Vec<NaiveDate>,
    pub log_prices: Vec<Option<f64>>,
}

impl RawSeries {
    /// Index of the first present observation, if any.
    fn first_present(&self) -> Option<usize> {
        self.log_prices.iter().position(Option::is_some)
    }

    /// Index of the last present observation, if any.
    fn last_present(&self) -> Option<usize> {
        self.log_prices.iter().rposition(Option::is_some)
    }
}

/// A gap-free log-price history on a strictly increasing calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub commodity_id: String,
    pub dates: Vec<NaiveDate>,
    pub log_prices: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series, enforcing the type's invariants: at least two
    /// observations, strictly increasing dates, equal-length vectors, and
    /// finite log prices.
    pub fn new(
        commodity_id: impl Into<String>,
        dates: Vec<NaiveDate>,
        log_prices: Vec<f64>,
    ) -> Result<Self> {
        let commodity_id = commodity_id.into();
        if dates.len() != log_prices.len() {
            return Err(Error::Misaligned(format!(
                "series '{commodity_id}': {} dates vs {} prices",
                dates.len(),
                log_prices.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::TooShort(format!(
                "series '{commodity_id}' has {} observations; need at least 2",
                dates.len()
            )));
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::NonIncreasingDates { row: i + 2 });
            }
        }
        if let Some(i) = log_prices.iter().position(|v| !v.is_finite()) {
            return Err(Error::ConstraintViolation(format!(
                "series '{commodity_id}': non-finite log price at index {i}"
            )));
        }
        Ok(Self {
            commodity_id,
            dates,
            log_prices,
        })
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    /// True when the series holds no observations (unreachable for values
    /// built through [`PriceSeries::new`], which requires two).
    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Copies out the sub-series over `range` without re-validating length,
    /// so single-observation views are representable internally.
    pub(crate) fn slice_unchecked(&self, range: std::ops::Range<usize>) -> PriceSeries {
        PriceSeries {
            commodity_id: self.commodity_id.clone(),
            dates: self.dates[range.clone()].to_vec(),
            log_prices: self.log_prices[range].to_vec(),
        }
    }
}

/// An aligned pair of series plus the train/test boundary.
///
/// Indices `0..split_index` are the training segment, `split_index..len` the
/// testing segment.
#[derive(Debug, Clone)]
pub struct PairDataset {
    pub series_a: PriceSeries,
    pub series_b: PriceSeries,
    pub split_index: usize,
}

impl PairDataset {
    /// Builds a dataset, enforcing identical calendars and
    /// `0 < split_index < len`.
    pub fn new(series_a: PriceSeries, series_b: PriceSeries, split_index: usize) -> Result<Self> {
        if series_a.dates != series_b.dates {
            return Err(Error::Misaligned(format!(
                "'{}' and '{}' do not share a calendar",
                series_a.commodity_id, series_b.commodity_id
            )));
        }
        let len = series_a.len();
        if split_index == 0 || split_index >= len {
            return Err(Error::InvalidConfig(format!(
                "split index {split_index} outside 1..{len}"
            )));
        }
        Ok(Self {
            series_a,
            series_b,
            split_index,
        })
    }

    /// Total number of observations.
    pub fn len(&self) -> usize {
        self.series_a.len()
    }

    /// True when the pair holds no observations (not constructible via
    /// [`PairDataset::new`]).
    pub fn is_empty(&self) -> bool {
        self.series_a.is_empty()
    }

    /// The training segments of both series.
    pub fn training(&self) -> (PriceSeries, PriceSeries) {
        (
            self.series_a.slice_unchecked(0..self.split_index),
            self.series_b.slice_unchecked(0..self.split_index),
        )
    }

    /// The testing segments of both series. May be a single observation.
    pub fn testing(&self) -> (PriceSeries, PriceSeries) {
        (
            self.series_a.slice_unchecked(self.split_index..self.len()),
            self.series_b.slice_unchecked(self.split_index..self.len()),
        )
    }
}

/// Loads a market CSV: header `date,<name>,...`, ISO-8601 dates, strictly
/// positive prices, empty cells for gaps.
///
/// Prices are converted to natural logs; gaps survive as `None` for
/// [`interpolate_gaps`] to fill. Errors name the offending 1-based data row.
pub fn load_csv(path: &str) -> Result<Vec<RawSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_string(),
            detail: e.to_string(),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Io {
            path: path.to_string(),
            detail: e.to_string(),
        })?
        .clone();
    let mut columns = headers.iter();
    match columns.next() {
        Some(first) if first.eq_ignore_ascii_case("date") => {}
        _ => {
            return Err(Error::Parse {
                row: 0,
                column: "date".to_string(),
                detail: "first header column must be 'date'".to_string(),
            })
        }
    }
    let names: Vec<String> = columns.map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::TooShort(format!(
            "{path}: no commodity columns after 'date'"
        )));
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            detail: e.to_string(),
        })?;
        if record.len() != names.len() + 1 {
            return Err(Error::Parse {
                row,
                column: String::new(),
                detail: format!(
                    "expected {} fields, found {}",
                    names.len() + 1,
                    record.len()
                ),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            column: "date".to_string(),
            detail: e.to_string(),
        })?;
        if let Some(last) = dates.last() {
            if date <= *last {
                return Err(Error::NonIncreasingDates { row });
            }
        }
        dates.push(date);
        for (j, field) in record.iter().skip(1).enumerate() {
            if field.is_empty() {
                cells[j].push(None);
                continue;
            }
            let price: f64 = field.parse().map_err(|e: std::num::ParseFloatError| {
                Error::Parse {
                    row,
                    column: names[j].clone(),
                    detail: e.to_string(),
                }
            })?;
            if !(price > 0.0) || !price.is_finite() {
                return Err(Error::NonPositivePrice {
                    row,
                    column: names[j].clone(),
                    value: price,
                });
            }
            cells[j].push(Some(price.ln()));
        }
    }

    if dates.len() < 2 {
        return Err(Error::TooShort(format!(
            "{path}: {} data rows; need at least 2",
            dates.len()
        )));
    }

    Ok(names
        .into_iter()
        .zip(cells)
        .map(|(commodity_id, log_prices)| RawSeries {
            commodity_id,
            dates: dates.clone(),
            log_prices,
        })
        .collect())
}

/// Fills interior gaps by linear interpolation on log prices, weighting by
/// row index (one trading day = one step).
///
/// A gap at either boundary is an error: extrapolation would fabricate data.
pub fn interpolate_gaps(raw: &RawSeries) -> Result<PriceSeries> {
    let n = raw.log_prices.len();
    if n < 2 {
        return Err(Error::TooShort(format!(
            "series '{}' has {} observations; need at least 2",
            raw.commodity_id, n
        )));
    }
    if raw.log_prices[0].is_none() {
        return Err(Error::BoundaryGap {
            series: raw.commodity_id.clone(),
            end: "start",
        });
    }
    if raw.log_prices[n - 1].is_none() {
        return Err(Error::BoundaryGap {
            series: raw.commodity_id.clone(),
            end: "end",
        });
    }

    let mut filled = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        match raw.log_prices[i] {
            Some(v) => {
                filled.push(v);
                i += 1;
            }
            None => {
                // Invariant: i > 0 and some later cell is present, because the
                // boundary checks above passed.
                let left = i - 1;
                let mut right = i + 1;
                while raw.log_prices[right].is_none() {
                    right += 1;
                }
                let lo = filled[left];
                let hi = raw.log_prices[right].unwrap();
                let span = (right - left) as f64;
                for k in i..right {
                    let w = (k - left) as f64 / span;
                    filled.push(lo + w * (hi - lo));
                }
                i = right;
            }
        }
    }

    PriceSeries::new(raw.commodity_id.clone(), raw.dates.clone(), filled)
}

/// Aligns a universe of raw series onto one shared calendar and fills gaps.
///
/// The shared calendar is the input date column restricted to the span where
/// every series has its first and last observation present (the intersection
/// of the per-series spans). Trimming that way means no series needs boundary
/// extrapolation; interior gaps are then interpolated per series.
pub fn align_universe(raw: &[RawSeries]) -> Result<Vec<PriceSeries>> {
    if raw.is_empty() {
        return Err(Error::TooShort("no series to align".to_string()));
    }
    for s in raw {
        if s.dates.len() != s.log_prices.len() {
            return Err(Error::Misaligned(format!(
                "series '{}': {} dates vs {} cells",
                s.commodity_id,
                s.dates.len(),
                s.log_prices.len()
            )));
        }
        if !s.dates.iter().eq(raw[0].dates.iter()) {
            return Err(Error::Misaligned(format!(
                "series '{}' is not on the shared calendar",
                s.commodity_id
            )));
        }
    }

    let mut start = 0usize;
    let mut end = raw[0].dates.len();
    for s in raw {
        let first = s.first_present().ok_or_else(|| {
            Error::TooShort(format!("series '{}' has no observations", s.commodity_id))
        })?;
        let last = s.last_present().expect("first_present implies last_present");
        start = start.max(first);
        end = end.min(last + 1);
    }
    if end <= start || end - start < 2 {
        return Err(Error::TooShort(format!(
            "aligned span has {} rows; need at least 2",
            end.saturating_sub(start)
        )));
    }

    raw.iter()
        .map(|s| {
            let trimmed = RawSeries {
                commodity_id: s.commodity_id.clone(),
                dates: s.dates[start..end].to_vec(),
                log_prices: s.log_prices[start..end].to_vec(),
            };
            interpolate_gaps(&trimmed)
        })
        .collect()
}

/// Splits an aligned pair at `floor(train_fraction * len)`.
///
/// `train_fraction` must lie strictly inside (0, 1) and the implied index must
/// leave at least one observation on each side.
pub fn split(series_a: PriceSeries, series_b: PriceSeries, train_fraction: f64) -> Result<PairDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let index = (train_fraction * series_a.len() as f64).floor() as usize;
    PairDataset::new(series_a, series_b, index)
}

/// Splits an aligned pair at an explicit index (command-line override path).
pub fn split_at(series_a: PriceSeries, series_b: PriceSeries, index: usize) -> Result<PairDataset> {
    PairDataset::new(series_a, series_b, index)
}

/// Where to put the train/test boundary of an aligned pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    /// Boundary at `floor(fraction * len)`; the fraction must lie in (0, 1).
    Fraction(f64),
    /// Boundary at an explicit element index.
    Index(usize),
}

impl SplitSpec {
    /// Applies the boundary rule to two aligned series.
    pub fn apply(&self, series_a: PriceSeries, series_b: PriceSeries) -> Result<PairDataset> {
        match *self {
            SplitSpec::Fraction(fraction) => split(series_a, series_b, fraction),
            SplitSpec::Index(index) => split_at(series_a, series_b, index),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = date("2010-01-01");
        (0..n)
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect()
    }

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_csv_parses_prices_to_logs_and_keeps_gaps() {
        let f = write_csv("date,gold,tin\n2010-01-01,100.0,\n2010-01-04,110.0,2.5\n");
        let series = load_csv(f.path().to_str().unwrap()).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].commodity_id, "gold");
        assert_abs_diff_eq!(series[0].log_prices[0].unwrap(), 100.0f64.ln());
        assert_eq!(series[1].log_prices[0], None);
        assert_abs_diff_eq!(series[1].log_prices[1].unwrap(), 2.5f64.ln());
    }

    #[test]
    fn load_csv_rejects_single_row() {
        let f = write_csv("date,gold\n2010-01-01,100.0\n");
        assert!(matches!(
            load_csv(f.path().to_str().unwrap()),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn load_csv_rejects_malformed_date_with_row_number() {
        let f = write_csv("date,gold\n2010-01-01,100.0\nnot-a-date,101.0\n");
        match load_csv(f.path().to_str().unwrap()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "date");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_rejects_non_positive_price() {
        let f = write_csv("date,gold\n2010-01-01,100.0\n2010-01-02,-3.0\n");
        match load_csv(f.path().to_str().unwrap()) {
            Err(Error::NonPositivePrice { row, column, value }) => {
                assert_eq!((row, column.as_str()), (2, "gold"));
                assert_eq!(value, -3.0);
            }
            other => panic!("expected non-positive price error, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_rejects_duplicate_dates() {
        let f = write_csv("date,gold\n2010-01-01,100.0\n2010-01-01,101.0\n");
        assert!(matches!(
            load_csv(f.path().to_str().unwrap()),
            Err(Error::NonIncreasingDates { row: 2 })
        ));
    }

    #[test]
    fn load_csv_requires_date_header() {
        let f = write_csv("timestamp,gold\n2010-01-01,100.0\n2010-01-02,101.0\n");
        assert!(load_csv(f.path().to_str().unwrap()).is_err());
    }

    #[test]
    fn interpolate_fills_interior_gap_linearly() {
        let raw = RawSeries {
            commodity_id: "x".to_string(),
            dates: dates(4),
            log_prices: vec![Some(0.0), None, None, Some(3.0)],
        };
        let filled = interpolate_gaps(&raw).unwrap();
        assert_eq!(filled.log_prices, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn interpolate_rejects_boundary_gaps() {
        let head = RawSeries {
            commodity_id: "x".to_string(),
            dates: dates(3),
            log_prices: vec![None, Some(1.0), Some(2.0)],
        };
        assert!(matches!(
            interpolate_gaps(&head),
            Err(Error::BoundaryGap { end: "start", .. })
        ));
        let tail = RawSeries {
            commodity_id: "x".to_string(),
            dates: dates(3),
            log_prices: vec![Some(1.0), Some(2.0), None],
        };
        assert!(matches!(
            interpolate_gaps(&tail),
            Err(Error::BoundaryGap { end: "end", .. })
        ));
    }

    #[test]
    fn interpolate_is_identity_on_complete_series() {
        let raw = RawSeries {
            commodity_id: "x".to_string(),
            dates: dates(3),
            log_prices: vec![Some(1.0), Some(4.0), Some(2.0)],
        };
        let filled = interpolate_gaps(&raw).unwrap();
        assert_eq!(filled.log_prices, vec![1.0, 4.0, 2.0]);
    }

    #[test]
    fn align_trims_to_common_span_then_fills() {
        let d = dates(6);
        let a = RawSeries {
            commodity_id: "a".to_string(),
            dates: d.clone(),
            log_prices: vec![None, Some(1.0), Some(2.0), None, Some(4.0), Some(5.0)],
        };
        let b = RawSeries {
            commodity_id: "b".to_string(),
            dates: d.clone(),
            log_prices: vec![Some(9.0), Some(8.0), Some(7.0), Some(6.0), Some(5.0), None],
        };
        let aligned = align_universe(&[a, b]).unwrap();
        // Common span is rows 1..=4: a starts at row 1, b ends at row 4.
        assert_eq!(aligned[0].dates, d[1..5].to_vec());
        assert_eq!(aligned[0].log_prices, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(aligned[1].log_prices, vec![8.0, 7.0, 6.0, 5.0]);
    }

    #[test]
    fn align_rejects_all_empty_column() {
        let d = dates(3);
        let a = RawSeries {
            commodity_id: "a".to_string(),
            dates: d.clone(),
            log_prices: vec![Some(1.0), Some(2.0), Some(3.0)],
        };
        let empty = RawSeries {
            commodity_id: "b".to_string(),
            dates: d,
            log_prices: vec![None, None, None],
        };
        assert!(matches!(
            align_universe(&[a, empty]),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn split_uses_floor_of_fraction() {
        let d = dates(10);
        let make = |id: &str| {
            PriceSeries::new(id, d.clone(), (0..10).map(|i| i as f64).collect()).unwrap()
        };
        let ds = split(make("a"), make("b"), 0.5).unwrap();
        assert_eq!(ds.split_index, 5);
        assert_eq!(ds.training().0.len(), 5);
        assert_eq!(ds.testing().0.len(), 5);

        let d3 = dates(3);
        let make3 = |id: &str| PriceSeries::new(id, d3.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        let ds3 = split(make3("a"), make3("b"), 0.8).unwrap();
        assert_eq!(ds3.split_index, 2);
        assert_eq!(ds3.testing().0.len(), 1);
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let d = dates(4);
        let make = |id: &str| {
            PriceSeries::new(id, d.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap()
        };
        assert!(split(make("a"), make("b"), 0.0).is_err());
        assert!(split(make("a"), make("b"), 1.0).is_err());
        // floor(0.1 * 4) = 0 leaves an empty training side.
        assert!(split(make("a"), make("b"), 0.1).is_err());
    }

    #[test]
    fn pair_dataset_requires_shared_calendar() {
        let a = PriceSeries::new("a", dates(3), vec![1.0, 2.0, 3.0]).unwrap();
        let mut other = dates(3);
        other[2] = date("2011-01-01");
        let b = PriceSeries::new("b", other, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            PairDataset::new(a, b, 1),
            Err(Error::Misaligned(_))
        ));
    }

    #[test]
    fn price_series_rejects_short_and_non_finite() {
        assert!(PriceSeries::new("x", dates(1), vec![1.0]).is_err());
        assert!(PriceSeries::new("x", dates(2), vec![1.0, f64::NAN]).is_err());
    }
}
