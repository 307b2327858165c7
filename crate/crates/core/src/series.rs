//! Monthly mean-MME/day series per drug family and class, and the
//! per-class summary tables built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geoclass::{ClassCode, ClassifiedRecord};
use crate::ingest::DrugFamily;
use crate::stats::{self, MeanCI};

/// A calendar month. Index 0 is 2014-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonthKey {
    pub year: i32,
    pub month: u32,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidArgument(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn from_date(date: NaiveDate) -> Self {
        Self { year: date.year(), month: date.month() }
    }

    pub fn index(&self) -> i32 {
        (self.year - 2014) * 12 + (self.month as i32 - 1)
    }

    pub fn from_index(index: i32) -> Self {
        Self { year: 2014 + index.div_euclid(12), month: index.rem_euclid(12) as u32 + 1 }
    }

    pub fn offset(&self, months: i32) -> Self {
        Self::from_index(self.index() + months)
    }

    /// The month the opioid prescribing law took effect, 2018-05.
    pub fn default_policy() -> Self {
        Self { year: 2018, month: 5 }
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid month '{s}', expected YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse::<i32>().map_err(|_| bad())?;
        let month = m.parse::<u32>().map_err(|_| bad())?;
        MonthKey::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for MonthKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Which records a series covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeriesGroup {
    Overall,
    Class(ClassCode),
}

impl SeriesGroup {
    fn contains(&self, c: &ClassifiedRecord) -> bool {
        match self {
            SeriesGroup::Overall => true,
            SeriesGroup::Class(code) => c.class == *code,
        }
    }
}

impl fmt::Display for SeriesGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesGroup::Overall => f.write_str("overall"),
            SeriesGroup::Class(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for SeriesGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("overall") {
            Ok(SeriesGroup::Overall)
        } else {
            s.parse().map(SeriesGroup::Class)
        }
    }
}

impl Serialize for SeriesGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SeriesGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Overall,
    Class,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub month: MonthKey,
    /// Mean record-level MME/day; `None` for a month without records.
    pub mean_mme_day: Option<f64>,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSeries {
    pub family: DrugFamily,
    pub group: SeriesGroup,
    pub points: Vec<SeriesPoint>,
    pub policy_month: MonthKey,
}

impl ClassSeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn months(&self) -> Vec<MonthKey> {
        self.points.iter().map(|p| p.month).collect()
    }

    /// Observed monthly means, skipping empty months.
    pub fn observed(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.mean_mme_day).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.points.iter().filter(|p| p.mean_mme_day.is_none()).count()
    }

    /// Values with empty months filled by linear interpolation between the
    /// nearest observed months (held constant beyond the first or last one).
    /// Returns the values and the number of filled months.
    pub fn interpolated(&self) -> Result<(Vec<f64>, usize)> {
        let known: Vec<(usize, f64)> =
            self.points.iter().enumerate().filter_map(|(i, p)| p.mean_mme_day.map(|v| (i, v))).collect();
        if known.is_empty() {
            return Err(Error::InsufficientData { what: "interpolation (observed months)", needed: 1, got: 0 });
        }
        let mut out = Vec::with_capacity(self.points.len());
        let mut k = 0;
        for i in 0..self.points.len() {
            while k + 1 < known.len() && known[k + 1].0 <= i {
                k += 1;
            }
            let (i0, v0) = known[k];
            let v = if i <= i0 {
                v0
            } else if k + 1 < known.len() {
                let (i1, v1) = known[k + 1];
                v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64
            } else {
                v0
            };
            out.push(v);
        }
        Ok((out, self.points.len() - known.len()))
    }
}

fn accumulate<'a>(
    records: impl Iterator<Item = &'a ClassifiedRecord>,
    first: MonthKey,
    last: MonthKey,
) -> Vec<SeriesPoint> {
    let n = (last.index() - first.index() + 1).max(0) as usize;
    let mut sums = vec![(0.0f64, 0usize); n];
    for c in records {
        let i = MonthKey::from_date(c.record.fill_date).index() - first.index();
        if i >= 0 && (i as usize) < n {
            let s = &mut sums[i as usize];
            s.0 += c.mme_day;
            s.1 += 1;
        }
    }
    sums.iter()
        .enumerate()
        .map(|(i, &(sum, count))| SeriesPoint {
            month: first.offset(i as i32),
            mean_mme_day: (count > 0).then(|| sum / count as f64),
            n_records: count,
        })
        .collect()
}

/// First and last month holding records of `family`.
pub fn month_range(records: &[ClassifiedRecord], family: DrugFamily) -> Option<(MonthKey, MonthKey)> {
    let months = records
        .iter()
        .filter(|c| c.record.drug_family == family)
        .map(|c| MonthKey::from_date(c.record.fill_date));
    let mut range: Option<(MonthKey, MonthKey)> = None;
    for m in months {
        range = Some(match range {
            None => (m, m),
            Some((a, b)) => (a.min(m), b.max(m)),
        });
    }
    range
}

/// Monthly series for one family over the family's full month range. With
/// [`GroupBy::Class`] all sixteen classes are returned, in code order, even
/// when a class has no records.
pub fn aggregate_monthly(
    records: &[ClassifiedRecord],
    group_by: GroupBy,
    family: DrugFamily,
    policy_month: MonthKey,
) -> Vec<ClassSeries> {
    let Some((first, last)) = month_range(records, family) else {
        return Vec::new();
    };
    let groups: Vec<SeriesGroup> = match group_by {
        GroupBy::Overall => vec![SeriesGroup::Overall],
        GroupBy::Class => ClassCode::all().map(SeriesGroup::Class).collect(),
    };
    groups
        .into_iter()
        .map(|group| ClassSeries {
            family,
            group,
            points: accumulate(
                records.iter().filter(|c| c.record.drug_family == family && group.contains(c)),
                first,
                last,
            ),
            policy_month,
        })
        .collect()
}

/// The overall series followed by the sixteen class series for every family
/// present, ordered by (family, group).
pub fn aggregate_all(records: &[ClassifiedRecord], policy_month: MonthKey) -> Vec<ClassSeries> {
    let mut out = Vec::new();
    for family in DrugFamily::ALL {
        out.extend(aggregate_monthly(records, GroupBy::Overall, family, policy_month));
        out.extend(aggregate_monthly(records, GroupBy::Class, family, policy_month));
    }
    out
}

/// Points strictly before `policy_month`, and the rest.
pub fn split_pre_post(series: &ClassSeries, policy_month: MonthKey) -> (ClassSeries, ClassSeries) {
    let (pre, post): (Vec<SeriesPoint>, Vec<SeriesPoint>) =
        series.points.iter().partition(|p| p.month < policy_month);
    let with = |points| ClassSeries { points, policy_month, ..series.clone() };
    (with(pre), with(post))
}

/// Per-class summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummaryRow {
    pub class_code: ClassCode,
    pub n_records: usize,
    /// Months with at least one record.
    pub n_months: usize,
    pub mean_days_supply: f64,
    pub sd_days_supply: f64,
    pub mean_mme: f64,
    pub sd_mme: f64,
    /// Mean of the monthly mean MME/day values with a t-based 95% interval;
    /// `None` with fewer than two months of data.
    pub mme_day: Option<MeanCI>,
    pub pct_of_mme: f64,
    pub pct_of_records: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], f64::NAN),
        _ => (stats::mean(values), stats::std_dev(values)),
    }
}

/// Per-class summary for one family, in class code order.
pub fn summarize_classes(records: &[ClassifiedRecord], family: DrugFamily) -> Vec<ClassSummaryRow> {
    let fam: Vec<&ClassifiedRecord> = records.iter().filter(|c| c.record.drug_family == family).collect();
    let total_mme = fam.iter().fold(0.0, |acc, c| acc + c.record.mme_total);
    let total_n = fam.len();
    let by_class = aggregate_monthly(records, GroupBy::Class, family, MonthKey::default_policy());
    let mut grouped: BTreeMap<ClassCode, Vec<&ClassifiedRecord>> = BTreeMap::new();
    for c in &fam {
        grouped.entry(c.class).or_default().push(c);
    }
    ClassCode::all()
        .map(|code| {
            let rows = grouped.get(&code).map(Vec::as_slice).unwrap_or(&[]);
            let days: Vec<f64> = rows.iter().map(|c| c.record.days_supply as f64).collect();
            let mme: Vec<f64> = rows.iter().map(|c| c.record.mme_total).collect();
            let (mean_days_supply, sd_days_supply) = mean_sd(&days);
            let (mean_mme, sd_mme) = mean_sd(&mme);
            let monthly = by_class
                .iter()
                .find(|s| s.group == SeriesGroup::Class(code))
                .map(ClassSeries::observed)
                .unwrap_or_default();
            let class_mme = mme.iter().fold(0.0, |acc, v| acc + v);
            ClassSummaryRow {
                class_code: code,
                n_records: rows.len(),
                n_months: monthly.len(),
                mean_days_supply,
                sd_days_supply,
                mean_mme,
                sd_mme,
                mme_day: stats::mean_ci(&monthly, 0.95).ok(),
                pct_of_mme: if total_mme > 0.0 { 100.0 * class_mme / total_mme } else { 0.0 },
                pct_of_records: if total_n > 0 { 100.0 * rows.len() as f64 / total_n as f64 } else { 0.0 },
            }
        })
        .collect()
}

/// Pre and post policy windows for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrePostCell {
    pub group: SeriesGroup,
    pub pre: Option<MeanCI>,
    pub post: Option<MeanCI>,
    /// `100 · (pre − post) / pre` of the window means.
    pub pct_change: Option<f64>,
}

/// Distance × disparity grid: `cells[distance_level][disparity]` plus the overall row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrePostTable {
    pub family: DrugFamily,
    pub policy_month: MonthKey,
    pub cells: Vec<Vec<PrePostCell>>,
    pub overall: PrePostCell,
}

impl PrePostTable {
    pub fn cell(&self, code: ClassCode) -> &PrePostCell {
        &self.cells[code.distance_level as usize][code.disparity as usize]
    }
}

fn pre_post_cell(series: &ClassSeries, policy_month: MonthKey) -> PrePostCell {
    let (pre, post) = split_pre_post(series, policy_month);
    let pre = stats::mean_ci(&pre.observed(), 0.95).ok();
    let post = stats::mean_ci(&post.observed(), 0.95).ok();
    let pct_change = match (&pre, &post) {
        (Some(a), Some(b)) => stats::pct_change(a.mean, b.mean).ok(),
        _ => None,
    };
    PrePostCell { group: series.group, pre, post, pct_change }
}

pub fn pre_post_table(records: &[ClassifiedRecord], family: DrugFamily, policy_month: MonthKey) -> PrePostTable {
    let by_class = aggregate_monthly(records, GroupBy::Class, family, policy_month);
    let mut cells: Vec<Vec<PrePostCell>> = (0..4)
        .map(|d| {
            crate::geoclass::DisparityLabel::ALL
                .iter()
                .map(|&l| {
                    let group = SeriesGroup::Class(ClassCode { distance_level: d, disparity: l });
                    PrePostCell { group, pre: None, post: None, pct_change: None }
                })
                .collect()
        })
        .collect();
    for s in &by_class {
        if let SeriesGroup::Class(code) = s.group {
            cells[code.distance_level as usize][code.disparity as usize] = pre_post_cell(s, policy_month);
        }
    }
    let overall = aggregate_monthly(records, GroupBy::Overall, family, policy_month)
        .first()
        .map(|s| pre_post_cell(s, policy_month))
        .unwrap_or(PrePostCell { group: SeriesGroup::Overall, pre: None, post: None, pct_change: None });
    PrePostTable { family, policy_month, cells, overall }
}

pub const SERIES_COLUMNS: [&str; 5] = ["month_index", "year", "month", "mean_mme_day", "n_records"];

/// One row per month; an empty month leaves `mean_mme_day` blank.
pub fn write_series_csv<W: Write>(series: &ClassSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SERIES_COLUMNS)?;
    for p in &series.points {
        w.write_record([
            p.month.index().to_string(),
            p.month.year.to_string(),
            p.month.month.to_string(),
            p.mean_mme_day.map(|v| v.to_string()).unwrap_or_default(),
            p.n_records.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a series written by [`write_series_csv`]. Months must be consecutive.
pub fn read_series_csv<R: Read>(reader: R, family: DrugFamily, group: SeriesGroup, policy_month: MonthKey) -> Result<ClassSeries> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != SERIES_COLUMNS {
        return Err(Error::Header(format!("expected {}, got {}", SERIES_COLUMNS.join(","), header.join(","))));
    }
    let mut points: Vec<SeriesPoint> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |what: &str| Error::Contract(format!("line {line}: bad {what}"));
        let year: i32 = row[1].trim().parse().map_err(|_| bad("year"))?;
        let month: u32 = row[2].trim().parse().map_err(|_| bad("month"))?;
        let key = MonthKey::new(year, month).map_err(|_| bad("month"))?;
        let mean = match row[3].trim() {
            "" => None,
            v => Some(v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad("mean_mme_day"))?),
        };
        let n_records: usize = row[4].trim().parse().map_err(|_| bad("n_records"))?;
        if let Some(prev) = points.last() {
            if key != prev.month.offset(1) {
                return Err(Error::Contract(format!("line {line}: month {key} does not follow {}", prev.month)));
            }
        }
        points.push(SeriesPoint { month: key, mean_mme_day: mean, n_records });
    }
    Ok(ClassSeries { family, group, points, policy_month })
}

#[cfg(test)]
mod tests {

    #[test]
    fn series_csv_round_trip() {
        let start = MonthKey { year: 2014, month: 11 };
        let points = (0..5)
            .map(|i| SeriesPoint { month: start.offset(i), mean_mme_day: if i == 2 { None } else { Some(40.0 + i as f64 / 3.0) }, n_records: (i as usize) * 3 })
            .collect();
        let s = ClassSeries { family: DrugFamily::Opioid, group: "21".parse().unwrap(), points, policy_month: MonthKey::default_policy() };
        let mut buf = Vec::new();
        write_series_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("month_index,year,month,mean_mme_day,n_records\n10,2014,11,"));
        assert!(text.contains("\n12,2015,1,,6\n"));
        let back = read_series_csv(&buf[..], s.family, s.group, s.policy_month).unwrap();
        assert_eq!(back, s);
        let gap = text.replace("12,2015,1,,6\n", "");
        assert!(read_series_csv(gap.as_bytes(), s.family, s.group, s.policy_month).is_err());
    }
    use super::*;
    use crate::geoclass::{classify_one, DisparityLabel, Thresholds};
    use crate::ingest::{GeoPoint, PrescriptionRecord};
    use proptest::prelude::*;

    fn rec(date: &str, mme_total: f64, days: u32, lon_offset: f64) -> ClassifiedRecord {
        let r = PrescriptionRecord {
            record_id: format!("{date}-{mme_total}"),
            fill_date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            patient: GeoPoint { lat: 34.0, lon: -81.0 },
            prescriber: GeoPoint { lat: 34.0, lon: -81.0 + lon_offset },
            dispenser: GeoPoint { lat: 34.0, lon: -81.0 },
            mme_total,
            days_supply: days,
            drug_family: DrugFamily::Opioid,
        };
        classify_one(&r, &Thresholds::default()).unwrap()
    }

    #[test]
    fn month_key_index() {
        assert_eq!(MonthKey::new(2014, 1).unwrap().index(), 0);
        assert_eq!(MonthKey::new(2018, 5).unwrap().index(), 52);
        assert_eq!(MonthKey::from_index(52), MonthKey::default_policy());
        assert_eq!(MonthKey::from_index(-1), MonthKey::new(2013, 12).unwrap());
        assert_eq!("2021-11".parse::<MonthKey>().unwrap().index(), 94);
        assert!("2018-5".parse::<MonthKey>().is_err());
        assert!("2018-13".parse::<MonthKey>().is_err());
        assert!("May 2018".parse::<MonthKey>().is_err());
    }

    #[test]
    fn monthly_mean_example() {
        let recs = vec![rec("2014-01-03", 300.0, 10, 0.0), rec("2014-01-09", 600.0, 10, 0.0), rec("2014-01-30", 900.0, 10, 0.0)];
        let s = aggregate_monthly(&recs, GroupBy::Overall, DrugFamily::Opioid, MonthKey::default_policy());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].points.len(), 1);
        assert!((s[0].points[0].mean_mme_day.unwrap() - 60.0).abs() < 1e-12);
        assert_eq!(s[0].points[0].n_records, 3);
    }

    #[test]
    fn gap_month_is_missing() {
        let recs = vec![rec("2014-01-03", 300.0, 10, 0.0), rec("2014-03-09", 600.0, 10, 0.0)];
        let s = &aggregate_monthly(&recs, GroupBy::Overall, DrugFamily::Opioid, MonthKey::default_policy())[0];
        assert_eq!(s.points.len(), 3);
        assert_eq!(s.points[1].mean_mme_day, None);
        assert_eq!(s.points[1].n_records, 0);
        let (filled, n) = s.interpolated().unwrap();
        assert_eq!(n, 1);
        assert!((filled[1] - 45.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_holds_ends() {
        let mk = |v: Option<f64>, i| SeriesPoint { month: MonthKey::from_index(i), mean_mme_day: v, n_records: 0 };
        let s = ClassSeries {
            family: DrugFamily::Opioid,
            group: SeriesGroup::Overall,
            points: vec![mk(None, 0), mk(Some(2.0), 1), mk(None, 2), mk(None, 3), mk(Some(8.0), 4), mk(None, 5)],
            policy_month: MonthKey::default_policy(),
        };
        let (v, n) = s.interpolated().unwrap();
        assert_eq!(v, vec![2.0, 2.0, 4.0, 6.0, 8.0, 8.0]);
        assert_eq!(n, 4);
    }

    #[test]
    fn split_boundaries() {
        let recs = vec![rec("2018-04-30", 300.0, 10, 0.0), rec("2018-05-01", 600.0, 10, 0.0)];
        let s = &aggregate_monthly(&recs, GroupBy::Overall, DrugFamily::Opioid, MonthKey::default_policy())[0];
        let (pre, post) = split_pre_post(s, MonthKey::default_policy());
        assert_eq!(pre.months(), vec![MonthKey::new(2018, 4).unwrap()]);
        assert_eq!(post.months(), vec![MonthKey::new(2018, 5).unwrap()]);
    }

    #[test]
    fn single_class_shares() {
        let recs: Vec<_> = (1..=9).map(|d| rec(&format!("2015-0{d}-01"), 100.0 * d as f64, 5, 0.0)).collect();
        let rows = summarize_classes(&recs, DrugFamily::Opioid);
        assert_eq!(rows.len(), 16);
        // three coincident stakeholders: level 0, no isolated party
        let r00 = &rows[3];
        assert_eq!(r00.class_code.to_string(), "03");
        assert_eq!(r00.pct_of_mme, 100.0);
        assert_eq!(r00.pct_of_records, 100.0);
        assert_eq!(r00.n_months, 9);
        let ci = r00.mme_day.unwrap();
        assert!(ci.lo <= ci.mean && ci.mean <= ci.hi);
        assert!(rows.iter().filter(|r| r.class_code != r00.class_code).all(|r| r.n_records == 0 && r.mme_day.is_none() && r.pct_of_mme.to_bits() == 0));
    }

    #[test]
    fn grid_has_sixteen_cells() {
        let recs = vec![rec("2018-01-01", 300.0, 10, 0.0), rec("2018-02-01", 360.0, 10, 0.0)];
        let t = pre_post_table(&recs, DrugFamily::Opioid, MonthKey::default_policy());
        assert_eq!(t.cells.iter().map(Vec::len).sum::<usize>(), 16);
        let c = t.cell(ClassCode { distance_level: 0, disparity: DisparityLabel::Otherwise });
        assert_eq!(c.group.to_string(), "03");
        assert!(c.pre.is_some());
        assert!(c.post.is_none());
        assert!(c.pct_change.is_none());
    }

    #[test]
    fn symmetric_windows_give_identical_cells() {
        let mut recs = Vec::new();
        for (i, m) in ["2018-01", "2018-02", "2018-03", "2018-04"].iter().enumerate() {
            recs.push(rec(&format!("{m}-10"), 100.0 + 37.0 * i as f64, 4, 0.0));
        }
        for (i, m) in ["2018-05", "2018-06", "2018-07", "2018-08"].iter().enumerate() {
            recs.push(rec(&format!("{m}-10"), 100.0 + 37.0 * i as f64, 4, 0.0));
        }
        let t = pre_post_table(&recs, DrugFamily::Opioid, MonthKey::default_policy());
        assert_eq!(t.overall.pre, t.overall.post);
        assert_eq!(t.overall.pct_change, Some(0.0));
    }

    fn arb_records() -> impl Strategy<Value = Vec<ClassifiedRecord>> {
        prop::collection::vec((0u32..30, 1u32..28, 1.0f64..3000.0, 1u32..60, 0usize..3), 1..60).prop_map(|v| {
            v.into_iter()
                .map(|(m, d, mme, days, geo)| {
                    let key = MonthKey::from_index(m as i32);
                    let date = format!("{key}-{d:02}");
                    rec(&date, mme, days, [0.0, 2.0, 6.0][geo])
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn class_counts_sum_to_overall(recs in arb_records()) {
            let all = aggregate_all(&recs, MonthKey::default_policy());
            let overall = &all[0];
            prop_assert_eq!(overall.group, SeriesGroup::Overall);
            for (i, p) in overall.points.iter().enumerate() {
                let sum: usize = all[1..17].iter().map(|s| s.points[i].n_records).sum();
                prop_assert_eq!(sum, p.n_records);
            }
        }

        #[test]
        fn permutation_invariant_and_bounded(recs in arb_records(), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = recs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = aggregate_all(&recs, MonthKey::default_policy());
            let b = aggregate_all(&shuffled, MonthKey::default_policy());
            for (sa, sb) in a.iter().zip(&b) {
                for (pa, pb) in sa.points.iter().zip(&sb.points) {
                    prop_assert_eq!(pa.n_records, pb.n_records);
                    match (pa.mean_mme_day, pb.mean_mme_day) {
                        (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0)),
                        (None, None) => {}
                        _ => prop_assert!(false),
                    }
                }
            }
            for s in &a {
                for p in &s.points {
                    if let Some(m) = p.mean_mme_day {
                        let vals: Vec<f64> = recs.iter()
                            .filter(|c| MonthKey::from_date(c.record.fill_date) == p.month)
                            .filter(|c| s.group == SeriesGroup::Overall || SeriesGroup::Class(c.class) == s.group)
                            .map(|c| c.mme_day)
                            .collect();
                        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(lo - 1e-9 <= m && m <= hi + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn split_is_a_partition(recs in arb_records(), cut in 0i32..30) {
            let s = &aggregate_all(&recs, MonthKey::default_policy())[0];
            let (pre, post) = split_pre_post(s, MonthKey::from_index(cut));
            let mut joined = pre.points.clone();
            joined.extend(post.points.iter().cloned());
            prop_assert_eq!(joined, s.points.clone());
        }

        #[test]
        fn shares_sum_to_100(recs in arb_records()) {
            let rows = summarize_classes(&recs, DrugFamily::Opioid);
            let mme: f64 = rows.iter().map(|r| r.pct_of_mme).sum();
            let n: f64 = rows.iter().map(|r| r.pct_of_records).sum();
            prop_assert!((mme - 100.0).abs() < 0.01);
            prop_assert!((n - 100.0).abs() < 0.01);
        }
    }
}
