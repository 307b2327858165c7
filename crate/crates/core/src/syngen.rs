//! Seeded synthetic prescription records with known class membership and a
//! known policy effect, used to exercise the full pipeline.
//!
//! Each family has a monthly MME/day level per class:
//! `scale · target + trend · m + amplitude · sin(2π(month − 1)/12) + shock_m`,
//! multiplied by the class's post-policy multiplier from the policy month on.
//! Record-level MME/day is a normal truncated at zero whose mean is that
//! level; days supply is a normal truncated at half a day, rounded.
//! Stakeholder coordinates are built on the sphere so the classifier
//! recovers the intended class exactly.

use std::f64::consts::PI;
use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geoclass::{ClassCode, DisparityLabel, EARTH_RADIUS_MILES};
use crate::ingest::{self, DrugFamily, GeoPoint, PrescriptionRecord};
use crate::series::MonthKey;
use crate::stats::dist::{normal_pdf, normal_quantile, normal_sf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class_code: ClassCode,
    /// Relative frequency of the class; normalized over the family.
    pub record_share: f64,
    pub mean_days: f64,
    pub sd_days: f64,
    pub mean_mme: f64,
    pub sd_mme: f64,
    /// Mean MME/day before the policy, before family scaling.
    pub target_mme_day: f64,
    pub post_policy_multiplier: f64,
}

impl ClassProfile {
    /// Coefficient of variation used for record-level MME/day.
    pub fn mme_cv(&self) -> f64 {
        if self.mean_mme > 0.0 {
            self.sd_mme / self.mean_mme
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub family: DrugFamily,
    /// Fraction of all records belonging to this family.
    pub record_share: f64,
    /// Rescale class targets so the share-weighted pre-policy mean equals this.
    pub pre_policy_mean: Option<f64>,
    pub profiles: Vec<ClassProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub start_month: MonthKey,
    pub end_month: MonthKey,
    pub policy_month: MonthKey,
    /// MME/day change per month.
    pub trend_per_month: f64,
    /// Amplitude of the 12-month cycle in MME/day.
    pub seasonal_amplitude: f64,
    /// SD of the month-level shock shared by a family's classes.
    pub noise_sd: f64,
    /// Center of the area stakeholders are placed around.
    pub base_point: GeoPoint,
    /// Half-width in degrees of the box the patient is drawn from.
    pub base_spread_deg: f64,
    pub families: Vec<FamilyConfig>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        default_config()
    }
}

/// Baseline class rows: code, days mean/sd, MME mean/sd, MME/day mean, share of MME (%).
const BASELINE: [(&str, f64, f64, f64, f64, f64, f64); 16] = [
    ("00", 14.89, 4.87, 802.32, 310.46, 48.88, 12.05),
    ("01", 15.05, 5.09, 771.95, 292.38, 46.90, 35.76),
    ("02", 16.04, 4.91, 809.49, 304.97, 48.66, 3.87),
    ("03", 15.4, 5.15, 800.95, 302.02, 47.96, 40.65),
    ("10", 8.84, 3.74, 478.36, 362.17, 44.00, 0.19),
    ("11", 14.89, 5.95, 815.39, 395.73, 47.51, 1.29),
    ("12", 19.37, 7.62, 1064.53, 994.58, 55.26, 0.08),
    ("13", 14.06, 5.20, 770.80, 357.95, 49.08, 1.66),
    ("20", 7.56, 3.38, 309.30, 219.66, 37.84, 0.16),
    ("21", 13.42, 6.25, 704.96, 411.89, 46.40, 0.80),
    ("22", 18.93, 6.97, 1110.24, 746.99, 91.71, 0.07),
    ("23", 12.69, 5.09, 721.36, 384.68, 52.46, 1.17),
    ("30", 7.66, 3.15, 322.93, 230.59, 37.78, 0.19),
    ("31", 12.69, 5.03, 723.15, 1336.44, 47.50, 1.22),
    ("32", 20.06, 7.51, 1374.09, 1153.52, 96.50, 0.14),
    ("33", 12.81, 4.67, 761.86, 375.38, 56.00, 1.87),
];

/// Overall opioid MME/day before and after the policy.
pub const OPIOID_PRE_MEAN: f64 = 53.68;
pub const OPIOID_POST_MEAN: f64 = 51.09;

/// The sixteen baseline profiles with a common post-policy multiplier.
pub fn baseline_profiles(multiplier: f64) -> Vec<ClassProfile> {
    let total: f64 = BASELINE.iter().map(|r| r.6).sum();
    BASELINE
        .iter()
        .map(|&(code, md, sdd, mm, sdm, target, share)| ClassProfile {
            class_code: code.parse().expect("baseline codes are valid"),
            record_share: share / total,
            mean_days: md,
            sd_days: sdd,
            mean_mme: mm,
            sd_mme: sdm,
            target_mme_day: target,
            post_policy_multiplier: multiplier,
        })
        .collect()
}

/// Default scenario: 2014-01..2021-11, policy 2018-05, opioid level scaled
/// to 53.68 before the policy and 51.09 after it, benzodiazepines unaffected.
pub fn default_config() -> ScenarioConfig {
    ScenarioConfig {
        start_month: MonthKey { year: 2014, month: 1 },
        end_month: MonthKey { year: 2021, month: 11 },
        policy_month: MonthKey::default_policy(),
        trend_per_month: 0.0,
        seasonal_amplitude: 1.0,
        noise_sd: 0.5,
        base_point: GeoPoint { lat: 33.8, lon: -80.9 },
        base_spread_deg: 1.0,
        families: vec![
            FamilyConfig {
                family: DrugFamily::Opioid,
                record_share: 0.5,
                pre_policy_mean: Some(OPIOID_PRE_MEAN),
                profiles: baseline_profiles(OPIOID_POST_MEAN / OPIOID_PRE_MEAN),
            },
            FamilyConfig {
                family: DrugFamily::Benzodiazepine,
                record_share: 0.5,
                pre_policy_mean: None,
                profiles: baseline_profiles(1.0),
            },
        ],
        seed: 42,
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.end_month < self.start_month {
            return bad(format!("end month {} precedes start month {}", self.end_month, self.start_month));
        }
        if self.policy_month < self.start_month || self.policy_month > self.end_month {
            return bad(format!("policy month {} outside {}..{}", self.policy_month, self.start_month, self.end_month));
        }
        if !(self.noise_sd >= 0.0) || !self.seasonal_amplitude.is_finite() || !self.trend_per_month.is_finite() {
            return bad("noise_sd must be >= 0 and trend/amplitude finite".into());
        }
        if !self.base_point.is_valid() || !(0.0..=10.0).contains(&self.base_spread_deg) {
            return bad("base point invalid or spread outside [0, 10] degrees".into());
        }
        if self.families.is_empty() {
            return bad("no families configured".into());
        }
        for f in &self.families {
            if !(f.record_share >= 0.0) {
                return bad(format!("{}: negative record share", f.family));
            }
            if f.profiles.is_empty() {
                return bad(format!("{}: no class profiles", f.family));
            }
            let mut seen = std::collections::HashSet::new();
            for p in &f.profiles {
                if !seen.insert(p.class_code) {
                    return bad(format!("{}: class {} listed twice", f.family, p.class_code));
                }
                let vals = [p.record_share, p.mean_days, p.sd_days, p.mean_mme, p.sd_mme, p.target_mme_day];
                if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || p.mean_days < 1.0 {
                    return bad(format!("{} class {}: shares, means and SDs must be >= 0 (mean days >= 1)", f.family, p.class_code));
                }
                if !(p.post_policy_multiplier.is_finite() && p.post_policy_multiplier >= 0.0) {
                    return bad(format!("{} class {}: invalid multiplier", f.family, p.class_code));
                }
            }
            if f.profiles.iter().map(|p| p.record_share).sum::<f64>() <= 0.0 {
                return bad(format!("{}: class shares sum to zero", f.family));
            }
            if f.pre_policy_mean.is_some_and(|m| !(m > 0.0)) {
                return bad(format!("{}: pre_policy_mean must be positive", f.family));
            }
        }
        if self.families.iter().map(|f| f.record_share).sum::<f64>() <= 0.0 {
            return bad("family shares sum to zero".into());
        }
        Ok(())
    }

    pub fn n_months(&self) -> usize {
        (self.end_month.index() - self.start_month.index() + 1) as usize
    }

    pub fn family(&self, family: DrugFamily) -> Option<&FamilyConfig> {
        self.families.iter().find(|f| f.family == family)
    }
}

impl FamilyConfig {
    /// Factor applied to every class target.
    pub fn scale(&self) -> f64 {
        match self.pre_policy_mean {
            Some(m) => {
                let total: f64 = self.profiles.iter().map(|p| p.record_share).sum();
                let weighted: f64 = self.profiles.iter().map(|p| p.record_share * p.target_mme_day).sum::<f64>() / total;
                if weighted > 0.0 {
                    m / weighted
                } else {
                    1.0
                }
            }
            None => 1.0,
        }
    }
}

/// Mean of N(loc, sd²) truncated below at `lo`.
fn truncated_mean(loc: f64, sd: f64, lo: f64) -> f64 {
    if sd == 0.0 {
        return loc.max(lo);
    }
    let a = (lo - loc) / sd;
    let q = normal_sf(a);
    // inverse Mills ratio φ(a)/Q(a), asymptotic form deep in the tail
    let mills = if q > 1e-290 { normal_pdf(a) / q } else { a + 1.0 / a - 2.0 / (a * a * a) };
    loc + sd * mills
}

/// Location whose truncation at `lo` has mean `target`.
fn solve_location(target: f64, sd: f64, lo: f64) -> f64 {
    if sd == 0.0 || target <= lo {
        return target;
    }
    let (mut a, mut b) = (lo - 60.0 * sd, target);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if truncated_mean(mid, sd, lo) < target {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-12 * target.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Draw from N(loc, sd²) truncated below at `lo` by inverting the upper tail.
fn sample_truncated<R: Rng>(rng: &mut R, loc: f64, sd: f64, lo: f64) -> f64 {
    if sd == 0.0 {
        return loc.max(lo);
    }
    let a = (lo - loc) / sd;
    let u: f64 = rng.random();
    let q = (1.0 - u) * normal_sf(a);
    let z = -normal_quantile(q.max(f64::MIN_POSITIVE));
    (loc + sd * z).max(lo)
}

/// Point at `distance` miles from `from` along `bearing` radians.
fn destination(from: GeoPoint, bearing: f64, distance: f64) -> GeoPoint {
    let d = distance / EARTH_RADIUS_MILES;
    let (lat1, lon1) = (from.lat.to_radians(), from.lon.to_radians());
    let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * bearing.cos()).asin();
    let lon2 = lon1 + (bearing.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
    let mut lon = lon2.to_degrees();
    while lon > 180.0 {
        lon -= 360.0;
    }
    while lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint { lat: lat2.to_degrees(), lon }
}

/// Edge lengths (d_pp, d_pd, d_rd) well inside the region of `code`.
fn triangle_edges<R: Rng>(rng: &mut R, code: ClassCode) -> (f64, f64, f64) {
    let pi_range = match code.distance_level {
        0 => (180.0, 240.0),
        1 => (270.0, 480.0),
        2 => (520.0, 980.0),
        _ => (1050.0, 1800.0),
    };
    if code.disparity == DisparityLabel::Otherwise {
        if code.distance_level == 0 {
            // everyone within 45 miles: the shortest edge is near but no one is far
            let a: f64 = rng.random_range(10.0..40.0);
            let b: f64 = rng.random_range(10.0..40.0);
            let c = rng.random_range((a - b).abs() + 2.0..(a + b - 2.0).min(45.0));
            return (a, b, c);
        }
        // roughly equilateral with every edge beyond the near threshold
        let total = rng.random_range(pi_range.0..pi_range.1);
        let w: [f64; 3] = [rng.random_range(0.9..1.1), rng.random_range(0.9..1.1), rng.random_range(0.9..1.1)];
        let s: f64 = w.iter().sum();
        return (total * w[0] / s, total * w[1] / s, total * w[2] / s);
    }
    let total = rng.random_range(pi_range.0..pi_range.1);
    let near = rng.random_range(1.0..20.0);
    let half = (total - near) / 2.0;
    let delta = rng.random_range(-0.4..0.4) * near;
    let (a, b) = (half + delta, half - delta);
    match code.disparity {
        // near pair is prescriber–dispenser
        DisparityLabel::PatientIsolated => (a, b, near),
        // near pair is patient–dispenser
        DisparityLabel::PrescriberIsolated => (a, near, b),
        // near pair is patient–prescriber
        DisparityLabel::DispenserIsolated => (near, a, b),
        DisparityLabel::Otherwise => unreachable!(),
    }
}

/// Place patient, prescriber and dispenser with the given pairwise distances.
fn place<R: Rng>(rng: &mut R, base: GeoPoint, spread: f64, edges: (f64, f64, f64)) -> (GeoPoint, GeoPoint, GeoPoint) {
    let (d_pp, d_pd, d_rd) = edges;
    let patient = GeoPoint {
        lat: base.lat + if spread > 0.0 { rng.random_range(-spread..spread) } else { 0.0 },
        lon: base.lon + if spread > 0.0 { rng.random_range(-spread..spread) } else { 0.0 },
    };
    let bearing = rng.random_range(0.0..2.0 * PI);
    let prescriber = destination(patient, bearing, d_pp);
    let (x, y, z) = (d_pp / EARTH_RADIUS_MILES, d_pd / EARTH_RADIUS_MILES, d_rd / EARTH_RADIUS_MILES);
    let cos_angle = ((z.cos() - x.cos() * y.cos()) / (x.sin() * y.sin())).clamp(-1.0, 1.0);
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let dispenser = destination(patient, bearing + side * cos_angle.acos(), d_pd);
    (patient, prescriber, dispenser)
}

fn days_in_month(m: MonthKey) -> u32 {
    let next = m.offset(1);
    let first = NaiveDate::from_ymd_opt(m.year, m.month, 1).expect("valid month");
    let first_next = NaiveDate::from_ymd_opt(next.year, next.month, 1).expect("valid month");
    (first_next - first).num_days() as u32
}

/// Generate about `n_records` records; the monthly count per family is
/// Poisson with mean `n_records · family share / months`.
pub fn generate(config: &ScenarioConfig, n_records: usize, seed: u64) -> Result<Vec<PrescriptionRecord>> {
    Ok(generate_labeled(config, n_records, seed)?.into_iter().map(|(r, _)| r).collect())
}

/// Like [`generate`], with the class each record was built for.
pub fn generate_labeled(config: &ScenarioConfig, n_records: usize, seed: u64) -> Result<Vec<(PrescriptionRecord, ClassCode)>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let months = config.n_months();
    let family_total: f64 = config.families.iter().map(|f| f.record_share).sum();
    let shock = Normal::new(0.0, config.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = Vec::with_capacity(n_records + n_records / 10);

    for fam in &config.families {
        let scale = fam.scale();
        let share_total: f64 = fam.profiles.iter().map(|p| p.record_share).sum();
        let cumulative: Vec<f64> = fam
            .profiles
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p.record_share / share_total;
                Some(*acc)
            })
            .collect();
        // days location does not depend on the month
        let day_locs: Vec<f64> = fam.profiles.iter().map(|p| solve_location(p.mean_days, p.sd_days, 0.5)).collect();
        let rate = n_records as f64 * fam.record_share / family_total / months as f64;
        let prefix = match fam.family {
            DrugFamily::Opioid => 'O',
            DrugFamily::Benzodiazepine => 'B',
        };
        let mut seq = 0usize;

        for i in 0..months {
            let month = config.start_month.offset(i as i32);
            let post = month >= config.policy_month;
            let common = config.trend_per_month * i as f64
                + config.seasonal_amplitude * (2.0 * PI * (month.month as f64 - 1.0) / 12.0).sin()
                + shock.sample(&mut rng);
            let count = if rate > 0.0 {
                Poisson::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng) as usize
            } else {
                0
            };
            // per-class MME/day location for this month, solved lazily
            let mut locs: Vec<Option<(f64, f64)>> = vec![None; fam.profiles.len()];
            let n_days = days_in_month(month);
            for _ in 0..count {
                let u: f64 = rng.random();
                let k = cumulative.iter().position(|c| u < *c).unwrap_or(fam.profiles.len() - 1);
                let p = &fam.profiles[k];
                let (loc, sd) = *locs[k].get_or_insert_with(|| {
                    let mut level = scale * p.target_mme_day + common;
                    if post {
                        level *= p.post_policy_multiplier;
                    }
                    let level = level.max(1e-6);
                    let sd = p.mme_cv() * level;
                    (solve_location(level, sd, 0.0), sd)
                });
                let mme_day = sample_truncated(&mut rng, loc, sd, 0.0);
                let days = sample_truncated(&mut rng, day_locs[k], p.sd_days, 0.5).round().max(1.0) as u32;
                let day = rng.random_range(1..=n_days);
                let edges = triangle_edges(&mut rng, p.class_code);
                let (patient, prescriber, dispenser) = place(&mut rng, config.base_point, config.base_spread_deg, edges);
                seq += 1;
                out.push((PrescriptionRecord {
                    record_id: format!("{prefix}{seq:08}"),
                    fill_date: NaiveDate::from_ymd_opt(month.year, month.month, day).expect("valid day"),
                    patient,
                    prescriber,
                    dispenser,
                    mme_total: mme_day * days as f64,
                    days_supply: days,
                    drug_family: fam.family,
                }, p.class_code));
            }
        }
    }
    Ok(out)
}

/// Write records in the ingest schema.
pub fn write_csv<W: Write>(records: &[PrescriptionRecord], writer: W) -> Result<()> {
    ingest::write_csv(records, writer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoclass::{class_code, geometry, Thresholds};

    #[test]
    fn default_profiles() {
        let c = default_config();
        let opioid = c.family(DrugFamily::Opioid).unwrap();
        let benzo = c.family(DrugFamily::Benzodiazepine).unwrap();
        let p32 = opioid.profiles.iter().find(|p| p.class_code.to_string() == "32").unwrap();
        assert_eq!(p32.mean_mme, 1374.09);
        assert_eq!(p32.sd_mme, 1153.52);
        assert_eq!(p32.mean_days, 20.06);
        let p00 = &opioid.profiles[0];
        assert_eq!((p00.mean_days, p00.sd_days, p00.mean_mme, p00.sd_mme), (14.89, 4.87, 802.32, 310.46));
        assert!(benzo.profiles.iter().all(|p| p.post_policy_multiplier == 1.0));
        for f in &c.families {
            let s: f64 = f.profiles.iter().map(|p| p.record_share).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        // the scaled share-weighted level reproduces the pre-policy mean
        let scale = opioid.scale();
        let level: f64 = opioid.profiles.iter().map(|p| p.record_share * p.target_mme_day * scale).sum();
        assert!((level - OPIOID_PRE_MEAN).abs() < 1e-9);
        assert!((level * opioid.profiles[0].post_policy_multiplier - OPIOID_POST_MEAN).abs() < 1e-9);
        c.validate().unwrap();
    }

    #[test]
    fn truncated_location_solves_mean() {
        for (target, sd, lo) in [(14.89, 4.87, 0.5), (7.56, 3.38, 0.5), (47.5, 47.5 * 1.848, 0.0), (5.0, 0.0, 0.0)] {
            let loc = solve_location(target, sd, lo);
            assert!((truncated_mean(loc, sd, lo) - target).abs() < 1e-8, "{target} {sd}");
        }
    }

    #[test]
    fn truncated_sampler_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (target, sd) = (47.5, 47.5 * 1.848);
        let loc = solve_location(target, sd, 0.0);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| sample_truncated(&mut rng, loc, sd, 0.0)).sum::<f64>() / n as f64;
        assert!((m / target - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn placed_triangles_have_requested_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for code in ClassCode::all() {
            for _ in 0..50 {
                let e = triangle_edges(&mut rng, code);
                let (p, r, d) = place(&mut rng, GeoPoint { lat: 33.8, lon: -80.9 }, 1.0, e);
                let rec = PrescriptionRecord {
                    record_id: "x".into(),
                    fill_date: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
                    patient: p,
                    prescriber: r,
                    dispenser: d,
                    mme_total: 10.0,
                    days_supply: 1,
                    drug_family: DrugFamily::Opioid,
                };
                let g = geometry(&rec);
                assert!((g.d_pp - e.0).abs() < 1e-6 && (g.d_pd - e.1).abs() < 1e-6 && (g.d_rd - e.2).abs() < 1e-6);
                assert_eq!(class_code(&rec, &Thresholds::default()), code);
            }
        }
    }

    #[test]
    fn edge_draws_stay_inside_their_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = Thresholds::default();
        for code in ClassCode::all() {
            for _ in 0..20_000 {
                let (a, b, c) = triangle_edges(&mut rng, code);
                let g = crate::geoclass::TriangleGeometry::from_edges(a, b, c);
                assert_eq!(crate::geoclass::class_from_geometry(&g, &t), code, "{g:?}");
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let c = default_config();
        let a = generate(&c, 2000, 7).unwrap();
        let b = generate(&c, 2000, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&c, 2000, 8).unwrap());
        assert!((a.len() as f64 - 2000.0).abs() < 200.0);
        assert!(a.iter().all(|r| r.days_supply >= 1 && r.mme_total >= 0.0));
    }

    #[test]
    fn empty_output_writes_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), ingest::COLUMNS.join(","));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = default_config();
        c.policy_month = MonthKey { year: 2030, month: 1 };
        assert!(c.validate().is_err());
        let mut c = default_config();
        c.families[0].profiles[3].sd_days = -1.0;
        assert!(c.validate().is_err());
        let mut c = default_config();
        let dup = c.families[0].profiles[0].clone();
        c.families[0].profiles[1] = dup;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = default_config();
        let s = serde_json::to_string(&c).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        // missing fields fall back to the defaults
        let partial: ScenarioConfig = serde_json::from_str(r#"{"noise_sd": 0.25}"#).unwrap();
        assert_eq!(partial.noise_sd, 0.25);
        assert_eq!(partial.families, c.families);
    }
}
