//! Transaction CSV parsing, exclusion filters and the filter audit report.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact column names of the transaction CSV, in write order.
pub const COLUMNS: [&str; 11] = [
    "record_id",
    "fill_date",
    "patient_lat",
    "patient_lon",
    "prescriber_lat",
    "prescriber_lon",
    "dispenser_lat",
    "dispenser_lon",
    "mme_total",
    "days_supply",
    "drug_family",
];

/// Records with total MME above this are treated as data-entry anomalies.
pub const DEFAULT_MME_CAP: f64 = 1e5;

pub fn default_cutoff() -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date")
}

/// A location in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = Self { lat, lon };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::InvalidArgument(format!("coordinates out of range: ({lat}, {lon})")))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrugFamily {
    Opioid,
    Benzodiazepine,
}

impl DrugFamily {
    pub const ALL: [DrugFamily; 2] = [DrugFamily::Opioid, DrugFamily::Benzodiazepine];

    pub fn as_str(&self) -> &'static str {
        match self {
            DrugFamily::Opioid => "opioid",
            DrugFamily::Benzodiazepine => "benzodiazepine",
        }
    }
}

impl fmt::Display for DrugFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DrugFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opioid" => Ok(DrugFamily::Opioid),
            "benzodiazepine" => Ok(DrugFamily::Benzodiazepine),
            other => Err(Error::InvalidArgument(format!("unknown drug_family '{other}'"))),
        }
    }
}

/// One dispensing transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescriptionRecord {
    pub record_id: String,
    pub fill_date: NaiveDate,
    pub patient: GeoPoint,
    pub prescriber: GeoPoint,
    pub dispenser: GeoPoint,
    /// Total morphine milligram equivalents for the prescription.
    pub mme_total: f64,
    pub days_supply: u32,
    pub drug_family: DrugFamily,
}

impl PrescriptionRecord {
    fn coordinates_valid(&self) -> bool {
        self.patient.is_valid() && self.prescriber.is_valid() && self.dispenser.is_valid()
    }
}

/// Daily dose: total MME divided by days supply.
pub fn mme_per_day(record: &PrescriptionRecord) -> Result<f64> {
    if record.days_supply == 0 {
        return Err(Error::Contract(format!(
            "record {} has days_supply = 0",
            record.record_id
        )));
    }
    Ok(record.mme_total / f64::from(record.days_supply))
}

/// A row the parser could not turn into a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<PrescriptionRecord>,
    pub errors: Vec<RowError>,
}

/// Parse a transaction CSV. Row-level problems are collected in
/// [`ParseOutcome::errors`]; only a bad header is fatal.
pub fn parse_csv<R: Read>(reader: R) -> Result<ParseOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let index = column_index(&header)?;

    let mut out = ParseOutcome::default();
    let mut raw = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut raw) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.errors.push(RowError { line, reason: e.to_string() });
                continue;
            }
        }
        let line = raw.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&raw, &index) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.errors.push(RowError { line, reason }),
        }
    }
    Ok(out)
}

fn column_index(header: &csv::StringRecord) -> Result<[usize; 11]> {
    column_index_with_extra(header, &[]).map(|(index, _)| index)
}

/// Positions of the schema columns plus the `extra` columns a derived file
/// may carry. Anything else is an error.
pub(crate) fn column_index_with_extra(header: &csv::StringRecord, extra: &[&str]) -> Result<([usize; 11], Vec<usize>)> {
    let mut index = [usize::MAX; 11];
    let mut extra_index = vec![usize::MAX; extra.len()];
    for (pos, name) in header.iter().enumerate() {
        let name = name.trim();
        if let Some(i) = COLUMNS.iter().position(|c| *c == name) {
            if index[i] != usize::MAX {
                return Err(Error::Header(format!("duplicate column '{name}'")));
            }
            index[i] = pos;
        } else if let Some(i) = extra.iter().position(|c| *c == name) {
            if extra_index[i] != usize::MAX {
                return Err(Error::Header(format!("duplicate column '{name}'")));
            }
            extra_index[i] = pos;
        } else {
            return Err(Error::Header(format!("unknown column '{name}'")));
        }
    }
    if let Some(i) = extra_index.iter().position(|&i| i == usize::MAX) {
        return Err(Error::Header(format!("missing column '{}'", extra[i])));
    }
    let missing: Vec<&str> = COLUMNS
        .iter()
        .zip(index.iter())
        .filter(|(_, &i)| i == usize::MAX)
        .map(|(c, _)| *c)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Header(format!("missing columns: {}", missing.join(", "))));
    }
    Ok((index, extra_index))
}

pub(crate) fn parse_row(raw: &csv::StringRecord, index: &[usize; 11]) -> std::result::Result<PrescriptionRecord, String> {
    let field = |i: usize| -> std::result::Result<&str, String> {
        let v = raw.get(index[i]).map(str::trim).unwrap_or("");
        if v.is_empty() {
            Err(format!("missing {}", COLUMNS[i]))
        } else {
            Ok(v)
        }
    };
    let real = |i: usize| -> std::result::Result<f64, String> {
        let v = field(i)?;
        v.parse::<f64>().map_err(|_| format!("invalid {}: '{v}'", COLUMNS[i]))
    };

    let record_id = field(0)?.to_string();
    let date_str = field(1)?;
    let fill_date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d")
        .map_err(|_| format!("invalid fill_date: '{date_str}'"))?;
    let patient = GeoPoint { lat: real(2)?, lon: real(3)? };
    let prescriber = GeoPoint { lat: real(4)?, lon: real(5)? };
    let dispenser = GeoPoint { lat: real(6)?, lon: real(7)? };
    let mme_total = real(8)?;
    if !mme_total.is_finite() || mme_total < 0.0 {
        return Err(format!("invalid mme_total: '{}'", field(8)?));
    }
    let days_str = field(9)?;
    let days_supply = days_str
        .parse::<u32>()
        .map_err(|_| format!("invalid days_supply: '{days_str}'"))?;
    let drug_family = field(10)?.parse::<DrugFamily>().map_err(|e| e.to_string())?;

    Ok(PrescriptionRecord {
        record_id,
        fill_date,
        patient,
        prescriber,
        dispenser,
        mme_total,
        days_supply,
        drug_family,
    })
}

/// Write records using the exact ingest schema. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(records: &[PrescriptionRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COLUMNS)?;
    for r in records {
        wtr.write_record(record_fields(r))?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn record_fields(r: &PrescriptionRecord) -> [String; 11] {
    [
        r.record_id.clone(),
        r.fill_date.format("%Y-%m-%d").to_string(),
        r.patient.lat.to_string(),
        r.patient.lon.to_string(),
        r.prescriber.lat.to_string(),
        r.prescriber.lon.to_string(),
        r.dispenser.lat.to_string(),
        r.dispenser.lon.to_string(),
        r.mme_total.to_string(),
        r.days_supply.to_string(),
        r.drug_family.to_string(),
    ]
}

/// Exclusion reasons, in the order they are tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Pre2014,
    MmeExceedsCap,
    MissingOrZeroDaysSupply,
    InvalidCoordinates,
    MalformedRow,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub pre_2014: usize,
    pub mme_exceeds_cap: usize,
    pub missing_or_zero_days_supply: usize,
    pub invalid_coordinates: usize,
    pub malformed_row: usize,
}

impl ExclusionCounts {
    pub fn total(&self) -> usize {
        self.pre_2014
            + self.mme_exceeds_cap
            + self.missing_or_zero_days_supply
            + self.invalid_coordinates
            + self.malformed_row
    }

    fn bump(&mut self, reason: ExclusionReason) {
        match reason {
            ExclusionReason::Pre2014 => self.pre_2014 += 1,
            ExclusionReason::MmeExceedsCap => self.mme_exceeds_cap += 1,
            ExclusionReason::MissingOrZeroDaysSupply => self.missing_or_zero_days_supply += 1,
            ExclusionReason::InvalidCoordinates => self.invalid_coordinates += 1,
            ExclusionReason::MalformedRow => self.malformed_row += 1,
        }
    }
}

/// Audit trail of the cleaning step. `total_in == total_kept + excluded.total()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total_in: usize,
    pub total_kept: usize,
    pub excluded: ExclusionCounts,
}

impl FilterReport {
    /// Fold parser rejections into the report so the conservation identity
    /// covers the whole input file.
    pub fn with_malformed_rows(mut self, n: usize) -> Self {
        self.total_in += n;
        self.excluded.malformed_row += n;
        self
    }

    pub fn is_conserved(&self) -> bool {
        self.total_in == self.total_kept + self.excluded.total()
    }
}

/// First failing filter for a record, if any.
pub fn exclusion_reason(r: &PrescriptionRecord, cap: f64, cutoff: NaiveDate) -> Option<ExclusionReason> {
    if r.fill_date < cutoff {
        Some(ExclusionReason::Pre2014)
    } else if !(r.mme_total <= cap) {
        Some(ExclusionReason::MmeExceedsCap)
    } else if r.days_supply == 0 {
        Some(ExclusionReason::MissingOrZeroDaysSupply)
    } else if !r.coordinates_valid() {
        Some(ExclusionReason::InvalidCoordinates)
    } else {
        None
    }
}

/// Apply the exclusion filters. Retained records are returned unchanged and
/// in input order.
pub fn clean(records: &[PrescriptionRecord], cap: f64, cutoff: NaiveDate) -> (Vec<PrescriptionRecord>, FilterReport) {
    let mut report = FilterReport { total_in: records.len(), ..Default::default() };
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        match exclusion_reason(r, cap, cutoff) {
            Some(reason) => report.excluded.bump(reason),
            None => kept.push(r.clone()),
        }
    }
    report.total_kept = kept.len();
    (kept, report)
}

/// Parse and clean in one step, counting malformed rows in the report.
pub fn ingest<R: Read>(
    reader: R,
    cap: f64,
    cutoff: NaiveDate,
) -> Result<(Vec<PrescriptionRecord>, FilterReport, Vec<RowError>)> {
    let parsed = parse_csv(reader)?;
    let (kept, report) = clean(&parsed.records, cap, cutoff);
    let report = report.with_malformed_rows(parsed.errors.len());
    Ok((kept, report, parsed.errors))
}
