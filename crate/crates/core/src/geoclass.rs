//! Stakeholder triangle geometry, the 16-way distance × disparity class code
//! and CDC daily-dose risk tiers.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{column_index_with_extra, mme_per_day, parse_row, record_fields, GeoPoint, PrescriptionRecord, COLUMNS};

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

/// Upper edges of distance levels 0, 1 and 2 (inclusive). Anything larger is level 3.
pub const DISTANCE_BOUNDS: [f64; 3] = [250.0, 500.0, 1000.0];

/// Great-circle distance in miles.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin()
}

/// Pairwise distances between the three stakeholders, in miles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleGeometry {
    /// patient ↔ prescriber
    pub d_pp: f64,
    /// patient ↔ dispenser
    pub d_pd: f64,
    /// prescriber ↔ dispenser
    pub d_rd: f64,
    /// Closed loop patient → prescriber → dispenser → patient.
    pub pi_total: f64,
}

impl TriangleGeometry {
    pub fn from_edges(d_pp: f64, d_pd: f64, d_rd: f64) -> Self {
        Self { d_pp, d_pd, d_rd, pi_total: d_pp + d_rd + d_pd }
    }
}

pub fn geometry(record: &PrescriptionRecord) -> TriangleGeometry {
    TriangleGeometry::from_edges(
        haversine(record.patient, record.prescriber),
        haversine(record.patient, record.dispenser),
        haversine(record.prescriber, record.dispenser),
    )
}

pub fn distance_level(pi_total: f64) -> Result<u8> {
    if !(pi_total >= 0.0) {
        return Err(Error::Contract(format!("total distance must be non-negative, got {pi_total}")));
    }
    Ok(DISTANCE_BOUNDS.iter().position(|&b| pi_total <= b).unwrap_or(3) as u8)
}

/// Which stakeholder sits far from the other two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisparityLabel {
    PatientIsolated = 0,
    PrescriberIsolated = 1,
    DispenserIsolated = 2,
    Otherwise = 3,
}

impl DisparityLabel {
    pub const ALL: [DisparityLabel; 4] = [
        DisparityLabel::PatientIsolated,
        DisparityLabel::PrescriberIsolated,
        DisparityLabel::DispenserIsolated,
        DisparityLabel::Otherwise,
    ];

    pub fn digit(self) -> u8 {
        self as u8
    }

    pub fn from_digit(d: u8) -> Option<Self> {
        Self::ALL.get(d as usize).copied()
    }

    pub fn describe(self) -> &'static str {
        match self {
            DisparityLabel::PatientIsolated => "Patient isolated",
            DisparityLabel::PrescriberIsolated => "Prescriber isolated",
            DisparityLabel::DispenserIsolated => "Dispenser isolated",
            DisparityLabel::Otherwise => "Otherwise",
        }
    }
}

/// Isolation rule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Two stakeholders are "together" when their distance is at most this.
    pub near_miles: f64,
    /// An isolated stakeholder must be this many times farther than the
    /// shortest edge (and farther than `near_miles`).
    pub isolation_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { near_miles: 50.0, isolation_ratio: 3.0 }
    }
}

/// Label the triangle. The shortest edge names the pair that belongs
/// together; the remaining vertex is isolated when the pair is near and both
/// of its own edges are long. Ties on the shortest edge prefer patient, then
/// prescriber, then dispenser as the candidate.
pub fn disparity(g: &TriangleGeometry, t: &Thresholds) -> DisparityLabel {
    // (edge opposite the candidate, candidate, the candidate's two edges)
    let candidates = [
        (g.d_rd, DisparityLabel::PatientIsolated, g.d_pp, g.d_pd),
        (g.d_pd, DisparityLabel::PrescriberIsolated, g.d_pp, g.d_rd),
        (g.d_pp, DisparityLabel::DispenserIsolated, g.d_pd, g.d_rd),
    ];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.0 < best.0 {
            best = *c;
        }
    }
    let (e_min, label, a, b) = best;
    let far = t.near_miles.max(t.isolation_ratio * e_min);
    if e_min <= t.near_miles && a > far && b > far {
        label
    } else {
        DisparityLabel::Otherwise
    }
}

/// Two-digit class: distance level then disparity digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassCode {
    pub distance_level: u8,
    pub disparity: DisparityLabel,
}

impl ClassCode {
    pub fn new(distance_level: u8, disparity: DisparityLabel) -> Result<Self> {
        if distance_level > 3 {
            return Err(Error::InvalidArgument(format!("distance level {distance_level} out of range")));
        }
        Ok(Self { distance_level, disparity })
    }

    /// All sixteen codes, "00" through "33".
    pub fn all() -> impl Iterator<Item = ClassCode> {
        (0u8..4).flat_map(|d| DisparityLabel::ALL.into_iter().map(move |l| ClassCode { distance_level: d, disparity: l }))
    }

    /// Position in [`ClassCode::all`].
    pub fn index(&self) -> usize {
        self.distance_level as usize * 4 + self.disparity as usize
    }

    pub fn code(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ClassCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.distance_level, self.disparity.digit())
    }
}

impl FromStr for ClassCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let b = s.as_bytes();
        let bad = || Error::InvalidArgument(format!("invalid class code '{s}'"));
        if b.len() != 2 || !b[0].is_ascii_digit() || !b[1].is_ascii_digit() {
            return Err(bad());
        }
        let disparity = DisparityLabel::from_digit(b[1] - b'0').ok_or_else(bad)?;
        ClassCode::new(b[0] - b'0', disparity).map_err(|_| bad())
    }
}

impl Serialize for ClassCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn class_from_geometry(g: &TriangleGeometry, t: &Thresholds) -> ClassCode {
    ClassCode {
        // pi_total is a sum of haversine distances, never negative
        distance_level: distance_level(g.pi_total).unwrap_or(3),
        disparity: disparity(g, t),
    }
}

pub fn class_code(record: &PrescriptionRecord, t: &Thresholds) -> ClassCode {
    class_from_geometry(&geometry(record), t)
}

/// CDC daily-dose tier with its overdose hazard ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskLevel {
    pub level: u8,
    pub hazard_ratio: f64,
}

pub const HAZARD_RATIOS: [f64; 4] = [1.0, 1.44, 3.73, 8.87];

/// Tiers are [0, 20), [20, 50), [50, 100) and [100, ∞) MME/day.
pub fn risk_level(mme_day: f64) -> RiskLevel {
    let level = if mme_day < 20.0 {
        1
    } else if mme_day < 50.0 {
        2
    } else if mme_day < 100.0 {
        3
    } else {
        4
    };
    RiskLevel { level, hazard_ratio: HAZARD_RATIOS[level as usize - 1] }
}

/// A cleaned record with its derived geometry and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedRecord {
    pub record: PrescriptionRecord,
    pub geometry: TriangleGeometry,
    pub class: ClassCode,
    pub mme_day: f64,
    pub risk: RiskLevel,
}

pub fn classify_one(record: &PrescriptionRecord, t: &Thresholds) -> Result<ClassifiedRecord> {
    let g = geometry(record);
    let mme_day = mme_per_day(record)?;
    Ok(ClassifiedRecord {
        record: record.clone(),
        geometry: g,
        class: class_from_geometry(&g, t),
        mme_day,
        risk: risk_level(mme_day),
    })
}

/// Classify cleaned records. Order is preserved.
pub fn classify(records: &[PrescriptionRecord], t: &Thresholds) -> Result<Vec<ClassifiedRecord>> {
    use rayon::prelude::*;
    records.par_iter().map(|r| classify_one(r, t)).collect()
}

/// Columns appended to the ingest schema in a classified file.
pub const CLASSIFIED_EXTRA_COLUMNS: [&str; 6] = ["d_pp", "d_pd", "d_rd", "pi_total", "class_code", "risk_level"];

pub fn write_classified_csv<W: Write>(records: &[ClassifiedRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COLUMNS.iter().chain(CLASSIFIED_EXTRA_COLUMNS.iter()))?;
    for c in records {
        let mut row: Vec<String> = record_fields(&c.record).into();
        row.extend([
            c.geometry.d_pp.to_string(),
            c.geometry.d_pd.to_string(),
            c.geometry.d_rd.to_string(),
            c.geometry.pi_total.to_string(),
            c.class.to_string(),
            c.risk.level.to_string(),
        ]);
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read a file written by [`write_classified_csv`]. The stored class codes
/// and distances are kept; any malformed row is an error.
pub fn read_classified_csv<R: Read>(reader: R) -> Result<Vec<ClassifiedRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let (index, extra) = column_index_with_extra(&header, &CLASSIFIED_EXTRA_COLUMNS)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::Contract(format!("classified file line {line}: {reason}"));
        let record = parse_row(&row, &index).map_err(bad)?;
        let get = |i: usize| row.get(extra[i]).map(str::trim).unwrap_or("");
        let real = |i: usize| {
            get(i)
                .parse::<f64>()
                .map_err(|_| bad(format!("invalid {}: '{}'", CLASSIFIED_EXTRA_COLUMNS[i], get(i))))
        };
        let geometry = TriangleGeometry { d_pp: real(0)?, d_pd: real(1)?, d_rd: real(2)?, pi_total: real(3)? };
        let class: ClassCode = get(4).parse().map_err(|e: Error| bad(e.to_string()))?;
        let mme_day = mme_per_day(&record).map_err(|e| bad(e.to_string()))?;
        out.push(ClassifiedRecord { record, geometry, class, mme_day, risk: risk_level(mme_day) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    /// Spherical law of cosines, independent of the haversine form.
    fn cosine_law(a: GeoPoint, b: GeoPoint) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
        EARTH_RADIUS_MILES * c.acos()
    }

    #[test]
    fn haversine_identity_and_antipode() {
        let a = pt(33.9, -81.0);
        assert_eq!(haversine(a, a), 0.0);
        let d = haversine(pt(0.0, 0.0), pt(0.0, 180.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_MILES).abs() < 1e-9);
    }

    #[test]
    fn haversine_matches_cosine_law() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = pt(rng.random_range(-89.0..89.0), rng.random_range(-180.0..180.0));
            let b = pt(rng.random_range(-89.0..89.0), rng.random_range(-180.0..180.0));
            assert!((haversine(a, b) - cosine_law(a, b)).abs() < 1e-3);
        }
    }

    #[test]
    fn degenerate_and_collapsed_triangles() {
        let p = pt(34.0, -81.0);
        let rec = |pat, pre, dis| PrescriptionRecord {
            record_id: "g".into(),
            fill_date: chrono::NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
            patient: pat,
            prescriber: pre,
            dispenser: dis,
            mme_total: 10.0,
            days_supply: 1,
            drug_family: crate::ingest::DrugFamily::Opioid,
        };
        let g = geometry(&rec(p, p, p));
        assert_eq!((g.d_pp, g.d_pd, g.d_rd, g.pi_total), (0.0, 0.0, 0.0, 0.0));

        // move the dispenser due north by exactly 100 miles
        let dlat = (100.0 / EARTH_RADIUS_MILES).to_degrees();
        let g = geometry(&rec(p, p, pt(34.0 + dlat, -81.0)));
        assert_eq!(g.d_pp, 0.0);
        assert!((g.d_pd - 100.0).abs() < 1e-9);
        assert!((g.d_rd - 100.0).abs() < 1e-9);
        assert!((g.pi_total - 200.0).abs() < 1e-9);
    }

    #[test]
    fn distance_level_boundaries() {
        assert_eq!(distance_level(0.0).unwrap(), 0);
        assert_eq!(distance_level(250.0).unwrap(), 0);
        assert_eq!(distance_level(250.0001).unwrap(), 1);
        assert_eq!(distance_level(500.0).unwrap(), 1);
        assert_eq!(distance_level(600.0).unwrap(), 2);
        assert_eq!(distance_level(1000.0).unwrap(), 2);
        assert_eq!(distance_level(1000.0001).unwrap(), 3);
        assert!(distance_level(-1.0).is_err());
        assert!(distance_level(f64::NAN).is_err());
    }

    #[test]
    fn disparity_examples() {
        let t = Thresholds::default();
        // prescriber and dispenser 5 miles apart, patient ~200 from both
        let g = TriangleGeometry::from_edges(200.0, 202.0, 5.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::PatientIsolated);
        let g = TriangleGeometry::from_edges(8.0, 10.0, 6.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::Otherwise);
        let g = TriangleGeometry::from_edges(300.0, 4.0, 301.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::PrescriberIsolated);
        let g = TriangleGeometry::from_edges(0.0, 120.0, 120.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::DispenserIsolated);
        // shortest edge too long to call anyone "together"
        let g = TriangleGeometry::from_edges(400.0, 380.0, 390.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::Otherwise);
        // near pair but the third stakeholder is not far enough
        let g = TriangleGeometry::from_edges(30.0, 35.0, 20.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::Otherwise);
        // ratio binds: e_min = 40, incident edges must exceed 120
        let g = TriangleGeometry::from_edges(110.0, 115.0, 40.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::Otherwise);
    }

    #[test]
    fn disparity_tie_break() {
        let t = Thresholds::default();
        // all-zero triangle: candidate patient, but no edge is far
        let g = TriangleGeometry::from_edges(0.0, 0.0, 0.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::Otherwise);
        // d_rd == d_pd == 1 tie; patient wins as candidate
        let g = TriangleGeometry::from_edges(100.0, 1.0, 1.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::Otherwise);
        let g = TriangleGeometry::from_edges(100.0, 100.0, 100.0);
        assert_eq!(disparity(&g, &t), DisparityLabel::Otherwise);
    }

    /// Written from the rule statement without sharing code with `disparity`.
    fn disparity_oracle(g: &TriangleGeometry, near: f64, ratio: f64) -> DisparityLabel {
        let e_min = g.d_pp.min(g.d_pd).min(g.d_rd);
        let isolated = |x: f64, y: f64| e_min <= near && x > near.max(ratio * e_min) && y > near.max(ratio * e_min);
        if g.d_rd == e_min {
            if isolated(g.d_pp, g.d_pd) { DisparityLabel::PatientIsolated } else { DisparityLabel::Otherwise }
        } else if g.d_pd == e_min {
            if isolated(g.d_pp, g.d_rd) { DisparityLabel::PrescriberIsolated } else { DisparityLabel::Otherwise }
        } else if isolated(g.d_pd, g.d_rd) {
            DisparityLabel::DispenserIsolated
        } else {
            DisparityLabel::Otherwise
        }
    }

    #[test]
    fn disparity_agrees_with_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let t = Thresholds::default();
        let mut seen = [0usize; 4];
        for _ in 0..1000 {
            // mix of small and large edges so every label occurs
            let mut e = || if rng.random_bool(0.4) { rng.random_range(0.0..60.0) } else { rng.random_range(0.0..600.0) };
            let g = TriangleGeometry::from_edges(e(), e(), e());
            let got = disparity(&g, &t);
            assert_eq!(got, disparity_oracle(&g, 50.0, 3.0), "{g:?}");
            seen[got as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 0), "{seen:?}");
    }

    #[test]
    fn table_codes() {
        let code = |pi: f64, l| ClassCode { distance_level: distance_level(pi).unwrap(), disparity: l };
        assert_eq!(code(100.0, DisparityLabel::PatientIsolated).to_string(), "00");
        assert_eq!(code(600.0, DisparityLabel::DispenserIsolated).to_string(), "22");
        assert_eq!(code(1200.0, DisparityLabel::Otherwise).to_string(), "33");
        let all: Vec<String> = ClassCode::all().map(|c| c.to_string()).collect();
        assert_eq!(all.len(), 16);
        assert_eq!(all[0], "00");
        assert_eq!(all[15], "33");
        for (i, c) in ClassCode::all().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(c.to_string().parse::<ClassCode>().unwrap(), c);
        }
        assert!("34".parse::<ClassCode>().is_err());
        assert!("40".parse::<ClassCode>().is_err());
        assert!("0".parse::<ClassCode>().is_err());
    }

    #[test]
    fn risk_levels() {
        let r = risk_level(45.0);
        assert_eq!((r.level, r.hazard_ratio), (2, 1.44));
        let r = risk_level(120.0);
        assert_eq!((r.level, r.hazard_ratio), (4, 8.87));
        let r = risk_level(0.0);
        assert_eq!((r.level, r.hazard_ratio), (1, 1.0));
        assert_eq!(risk_level(19.999).level, 1);
        assert_eq!(risk_level(20.0).level, 2);
        assert_eq!(risk_level(50.0).level, 3);
        assert_eq!(risk_level(99.5).level, 3);
        assert_eq!(risk_level(100.0).hazard_ratio, 8.87);
        assert_eq!(risk_level(75.0).hazard_ratio, 3.73);
    }

    proptest! {
        #[test]
        fn haversine_symmetric(a in (-90.0f64..=90.0, -180.0f64..=180.0), b in (-90.0f64..=90.0, -180.0f64..=180.0)) {
            let (a, b) = (pt(a.0, a.1), pt(b.0, b.1));
            prop_assert_eq!(haversine(a, b), haversine(b, a));
            prop_assert!(haversine(a, b) >= 0.0);
        }

        #[test]
        fn triangle_inequality(a in (-60.0f64..60.0, -180.0f64..180.0), b in (-60.0f64..60.0, -180.0f64..180.0), c in (-60.0f64..60.0, -180.0f64..180.0)) {
            let (a, b, c) = (pt(a.0, a.1), pt(b.0, b.1), pt(c.0, c.1));
            let (ab, ac, bc) = (haversine(a, b), haversine(a, c), haversine(b, c));
            prop_assert!(ab <= ac + bc + 1e-6);
            prop_assert!(ac <= ab + bc + 1e-6);
            prop_assert!(bc <= ab + ac + 1e-6);
        }

        #[test]
        fn moving_away_never_shrinks_pi(lat in 20.0f64..40.0, lon in -100.0f64..-70.0, step in 0.0f64..5.0, extra in 0.0f64..5.0) {
            // dispenser walks due north, away from patient and prescriber at the same latitude
            let p = pt(lat, lon);
            let r = pt(lat, lon + 0.5);
            let near = pt(lat + step, lon + 0.25);
            let far = pt(lat + step + extra, lon + 0.25);
            let pi = |d| haversine(p, r) + haversine(r, d) + haversine(d, p);
            prop_assert!(pi(far) + 1e-9 >= pi(near));
        }

        #[test]
        fn levels_monotone(x in 0.0f64..3000.0, dx in 0.0f64..500.0) {
            prop_assert!(distance_level(x).unwrap() <= distance_level(x + dx).unwrap());
            prop_assert!(risk_level(x / 10.0).level <= risk_level((x + dx) / 10.0).level);
        }
    }
}
