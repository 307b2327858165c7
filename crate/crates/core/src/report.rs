//! Markdown and CSV renderings of the class summary, the pre/post grid, the
//! ARIMAX coefficient table and per-series plot data.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::arima::ArimaOrders;
use crate::error::Result;
use crate::geoclass::{ClassCode, DisparityLabel};
use crate::ingest::DrugFamily;
use crate::intervention::{BatchEntry, ItsResult};
use crate::series::{ClassSummaryRow, MonthKey, PrePostCell, PrePostTable, SeriesGroup};
use crate::stats::MeanCI;

/// `p<0.001` below a thousandth, three decimals otherwise.
pub fn format_p(p: f64) -> String {
    if p.is_nan() {
        "NA".into()
    } else if p < 0.001 {
        "p<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

/// Stars in parentheses, empty when not significant.
pub fn format_stars(stars: &str) -> String {
    if stars.is_empty() {
        String::new()
    } else {
        format!("({stars})")
    }
}

fn fmt2(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.2}")
    } else {
        "NA".into()
    }
}

fn fmt_ci(ci: &Option<MeanCI>) -> String {
    match ci {
        Some(c) => format!("{} ({}, {})", fmt2(c.mean), fmt2(c.lo), fmt2(c.hi)),
        None => "NA".into(),
    }
}

/// `D(1)`, `D(1,1)`, `D(1,12)` style label for the differencing applied.
pub fn differencing_label(orders: &ArimaOrders) -> Option<String> {
    let mut lags: Vec<String> = vec!["1".to_string(); orders.d];
    lags.extend(std::iter::repeat_n(orders.season.to_string(), orders.seasonal_d));
    if lags.is_empty() {
        None
    } else {
        Some(format!("D({})", lags.join(",")))
    }
}

/// Event names as shown in the coefficient table; the inverse trend carries
/// the differencing it received.
pub fn coefficient_label(name: &str, is_event: bool, orders: &ArimaOrders) -> String {
    if is_event && name.starts_with("Inverse Trend") {
        if let Some(d) = differencing_label(orders) {
            return format!("{name} {d}");
        }
    }
    name.to_string()
}

fn group_label(group: SeriesGroup) -> String {
    match group {
        SeriesGroup::Overall => "Overall".into(),
        SeriesGroup::Class(c) => c.to_string(),
    }
}

fn csv_opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| v.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------- class summary

pub fn class_summary_markdown(family: DrugFamily, rows: &[ClassSummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### Class summary ({family})\n");
    let _ = writeln!(
        s,
        "| Class | Records | Days supply mean (SD) | MME mean (SD) | MME/day mean (95% CI) | % of MME | % of records |"
    );
    let _ = writeln!(s, "|---|---:|---|---|---|---:|---:|");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} ({}) | {} ({}) | {} | {} | {} |",
            r.class_code,
            r.n_records,
            fmt2(r.mean_days_supply),
            fmt2(r.sd_days_supply),
            fmt2(r.mean_mme),
            fmt2(r.sd_mme),
            fmt_ci(&r.mme_day),
            fmt2(r.pct_of_mme),
            fmt2(r.pct_of_records)
        );
    }
    s
}

pub fn class_summary_csv<W: Write>(rows: &[ClassSummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "class_code",
        "n_records",
        "n_months",
        "mean_days_supply",
        "sd_days_supply",
        "mean_mme",
        "sd_mme",
        "mme_day_mean",
        "mme_day_lo",
        "mme_day_hi",
        "pct_of_mme",
        "pct_of_records",
    ])?;
    for r in rows {
        let ci = r.mme_day;
        w.write_record([
            r.class_code.to_string(),
            r.n_records.to_string(),
            r.n_months.to_string(),
            r.mean_days_supply.to_string(),
            r.sd_days_supply.to_string(),
            r.mean_mme.to_string(),
            r.sd_mme.to_string(),
            csv_opt(ci.map(|c| c.mean)),
            csv_opt(ci.map(|c| c.lo)),
            csv_opt(ci.map(|c| c.hi)),
            r.pct_of_mme.to_string(),
            r.pct_of_records.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- pre/post grid

const DISTANCE_HEADERS: [&str; 4] = ["0X: π ≤ 250", "1X: 250 < π ≤ 500", "2X: 500 < π ≤ 1000", "3X: π > 1000"];

fn disparity_header(d: DisparityLabel) -> &'static str {
    match d {
        DisparityLabel::PatientIsolated => "X0: Patient isolated",
        DisparityLabel::PrescriberIsolated => "X1: Prescriber isolated",
        DisparityLabel::DispenserIsolated => "X2: Dispenser isolated",
        DisparityLabel::Otherwise => "X3: Otherwise",
    }
}

fn pre_post_text(c: &PrePostCell) -> String {
    let change = c.pct_change.map(|p| format!(" [{}%]", fmt2(-p))).unwrap_or_default();
    format!("{} → {}{}", fmt_ci(&c.pre), fmt_ci(&c.post), change)
}

/// Disparity rows by distance columns; each cell reads
/// `pre (lo, hi) → post (lo, hi) [change %]`.
pub fn pre_post_markdown(table: &PrePostTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### MME/day before and after {} ({})\n", table.policy_month, table.family);
    let _ = writeln!(s, "| Disparity \\ Distance | {} |", DISTANCE_HEADERS.join(" | "));
    let _ = writeln!(s, "|---|---|---|---|---|");
    for d in DisparityLabel::ALL {
        let cells: Vec<String> = (0..4).map(|l| pre_post_text(&table.cells[l][d as usize])).collect();
        let _ = writeln!(s, "| {} | {} |", disparity_header(d), cells.join(" | "));
    }
    let _ = writeln!(s, "\nOverall: {}", pre_post_text(&table.overall));
    s
}

pub fn pre_post_csv<W: Write>(table: &PrePostTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "pre_mean", "pre_lo", "pre_hi", "pre_months", "post_mean", "post_lo", "post_hi", "post_months", "pct_change"])?;
    let mut write = |c: &PrePostCell| -> Result<()> {
        let f = |ci: &Option<MeanCI>| {
            [csv_opt(ci.map(|v| v.mean)), csv_opt(ci.map(|v| v.lo)), csv_opt(ci.map(|v| v.hi)), ci.map(|v| v.n.to_string()).unwrap_or_default()]
        };
        let mut rec = vec![c.group.to_string()];
        rec.extend(f(&c.pre));
        rec.extend(f(&c.post));
        rec.push(csv_opt(c.pct_change));
        w.write_record(rec)?;
        Ok(())
    };
    write(&table.overall)?;
    for code in ClassCode::all() {
        write(table.cell(code))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- coefficient table

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub class: String,
    pub model: String,
    pub coefficient: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub significance: String,
}

/// Every term of the final ARIMAX model, for series that kept at least one
/// significant event input.
pub fn coefficient_rows(results: &[&ItsResult]) -> Vec<CoefficientRow> {
    let mut out = Vec::new();
    for r in results.iter().filter(|r| r.has_significant_event()) {
        let orders = &r.arimax_fit.orders;
        for c in &r.coefficients {
            out.push(CoefficientRow {
                class: group_label(r.group),
                model: orders.to_string(),
                coefficient: coefficient_label(&c.name, c.is_event, orders),
                estimate: c.estimate,
                std_error: c.std_error,
                p_value: c.p_value,
                significance: format_stars(&c.stars),
            });
        }
    }
    out
}

pub fn coefficient_markdown(family: DrugFamily, rows: &[CoefficientRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### ARIMAX policy-effect models ({family})\n");
    if rows.is_empty() {
        let _ = writeln!(s, "No series has a significant event coefficient.");
        return s;
    }
    let _ = writeln!(s, "| Class | Model | Coefficient | Estimate | Standard Error | P value | Significance |");
    let _ = writeln!(s, "|---|---|---|---:|---:|---|---|");
    let mut last = None;
    for r in rows {
        // class and model only on the first row of each block
        let first = last != Some((&r.class, &r.model));
        last = Some((&r.class, &r.model));
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            if first { r.class.as_str() } else { "" },
            if first { r.model.as_str() } else { "" },
            r.coefficient,
            fmt2(r.estimate),
            fmt2(r.std_error),
            format_p(r.p_value),
            r.significance
        );
    }
    s
}

pub fn coefficient_csv<W: Write>(rows: &[CoefficientRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["Class", "Model", "Coefficient", "Estimate", "Standard Error", "P value", "Significance"])?;
    for r in rows {
        w.write_record([
            r.class.clone(),
            r.model.clone(),
            r.coefficient.clone(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            format_p(r.p_value),
            r.significance.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Forecast-vs-actual summary and failures for a batch of one family.
pub fn mismatch_markdown(family: DrugFamily, entries: &[&BatchEntry]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### Post-policy forecast mismatch ({family})\n");
    let _ = writeln!(s, "| Class | Pre-policy model | Post months | Outside interval | Mean actual − forecast | Retained events |");
    let _ = writeln!(s, "|---|---|---:|---:|---:|---|");
    let mut failures = Vec::new();
    for e in entries {
        match &e.result {
            Ok(r) => {
                let outside = r.mismatch.iter().filter(|m| m.outside_interval).count();
                let diff = r.mismatch.iter().fold(0.0, |a, m| a + m.difference) / r.mismatch.len().max(1) as f64;
                let events: Vec<&str> = r.event_coefficients().map(|c| c.name.as_str()).collect();
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    group_label(r.group),
                    r.pre_fit.orders,
                    r.mismatch.len(),
                    outside,
                    fmt2(diff),
                    if events.is_empty() { "none".to_string() } else { events.join(", ") }
                );
            }
            Err(msg) => failures.push(format!("- {}: {msg}", group_label(e.group))),
        }
    }
    if !failures.is_empty() {
        let _ = writeln!(s, "\nSeries that could not be analysed:\n\n{}", failures.join("\n"));
    }
    s
}

// ---------------------------------------------------------------- plot data

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub month: MonthKey,
    pub actual: f64,
    pub fitted: Option<f64>,
    pub forecast: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub policy_flag: u8,
}

/// One row per month: pre-policy fitted values, post-policy forecast and
/// its interval.
pub fn plot_rows(r: &ItsResult) -> Vec<PlotRow> {
    let fitted = r.pre_fit.fitted_values();
    let n_pre = fitted.len();
    r.months
        .iter()
        .zip(&r.values)
        .enumerate()
        .map(|(i, (&month, &actual))| {
            let post = i >= n_pre;
            let j = i.wrapping_sub(n_pre);
            PlotRow {
                month,
                actual,
                fitted: if post { None } else { fitted[i] },
                forecast: if post { r.post_forecast.point.get(j).copied() } else { None },
                lo: if post { r.post_forecast.lower.get(j).copied() } else { None },
                hi: if post { r.post_forecast.upper.get(j).copied() } else { None },
                policy_flag: u8::from(month >= r.policy_month),
            }
        })
        .collect()
}

pub fn plot_csv<W: Write>(r: &ItsResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["month", "actual", "fitted", "forecast", "lo", "hi", "policy_flag"])?;
    for p in plot_rows(r) {
        w.write_record([
            p.month.to_string(),
            p.actual.to_string(),
            csv_opt(p.fitted),
            csv_opt(p.forecast),
            csv_opt(p.lo),
            csv_opt(p.hi),
            p.policy_flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// File stem for a series' plot data, e.g. `opioid_overall`, `opioid_03`.
pub fn plot_file_stem(family: DrugFamily, group: SeriesGroup) -> String {
    format!("{family}_{group}")
}
