//! Interrupted time-series analysis with ARIMAX event inputs.
//!
//! Each series goes through three steps: an automatic ARIMA fit on the
//! pre-policy window, a forecast of the post-policy window compared with
//! what was observed, and a regression-with-ARIMA-errors fit on the whole
//! series with event inputs at the policy month. Events that are not
//! significant are removed one at a time, largest p-value first.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arima::{
    auto_fit_with, fit_regression, near_unit_root, forecast, ArimaFit, ArimaOrders, AutoOptions, CoefficientKind, FitOptions,
    Forecast, Regressor,
};
use crate::error::{Error, Result};
use crate::ingest::DrugFamily;
use crate::series::{ClassSeries, MonthKey, SeriesGroup};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    LevelShift,
    Ramp,
    InverseTrend,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [EventKind::LevelShift, EventKind::Ramp, EventKind::InverseTrend];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::LevelShift => "level_shift",
            EventKind::Ramp => "ramp",
            EventKind::InverseTrend => "inverse_trend",
        }
    }

    /// Display name used for coefficients.
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::LevelShift => "Level Shift",
            EventKind::Ramp => "Ramp",
            EventKind::InverseTrend => "Inverse Trend",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "level_shift" => Ok(EventKind::LevelShift),
            "ramp" => Ok(EventKind::Ramp),
            "inverse_trend" => Ok(EventKind::InverseTrend),
            other => Err(Error::InvalidArgument(format!(
                "unknown event '{other}' (expected level_shift, ramp or inverse_trend)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventInput {
    pub kind: EventKind,
    pub onset: MonthKey,
}

fn event_values(kind: EventKind, onset: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            if t < onset {
                0.0
            } else {
                match kind {
                    EventKind::LevelShift => 1.0,
                    EventKind::Ramp => (t - onset) as f64,
                    EventKind::InverseTrend => 1.0 / (t - onset + 1) as f64,
                }
            }
        })
        .collect()
}

/// The input series for `kind` starting at index `onset`.
pub fn event_regressor(kind: EventKind, onset: usize, n: usize) -> Result<Vec<f64>> {
    if onset >= n {
        return Err(Error::InvalidArgument(format!("event onset {onset} outside a series of length {n}")));
    }
    Ok(event_values(kind, onset, n))
}

/// Coefficient names: the kind's label, with the onset month appended when
/// several events share a kind.
fn event_names(events: &[EventInput]) -> Vec<String> {
    events
        .iter()
        .map(|e| {
            if events.iter().filter(|o| o.kind == e.kind).count() > 1 {
                format!("{} {}", e.kind.label(), e.onset)
            } else {
                e.kind.label().to_string()
            }
        })
        .collect()
}

/// Regression with ARIMA errors on event inputs. `start` is the month of
/// `y[0]`. An event whose onset lies past the end of the series gives an
/// all-zero input and is rejected.
pub fn fit_arimax(
    y: &[f64],
    start: MonthKey,
    orders: &ArimaOrders,
    events: &[EventInput],
    include_constant: Option<bool>,
) -> Result<ArimaFit> {
    let n = y.len();
    let names = event_names(events);
    let regressors = events
        .iter()
        .zip(names)
        .map(|(e, name)| {
            let offset = e.onset.index() - start.index();
            if offset < 0 {
                return Err(Error::InvalidArgument(format!("event onset {} precedes the series start {start}", e.onset)));
            }
            let onset = (offset as usize).min(n);
            Ok(Regressor { name, values: event_values(e.kind, onset, n) })
        })
        .collect::<Result<Vec<_>>>()?;
    fit_regression(y, orders, &regressors, &FitOptions { include_constant, ..Default::default() })
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItsCoefficient {
    pub name: String,
    pub is_event: bool,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub stars: String,
}

/// A post-policy month compared with the pre-policy forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub month: MonthKey,
    pub actual: f64,
    pub predicted: f64,
    pub lower: f64,
    pub upper: f64,
    /// actual − predicted
    pub difference: f64,
    pub outside_interval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedEvent {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItsResult {
    pub family: DrugFamily,
    pub group: SeriesGroup,
    pub policy_month: MonthKey,
    pub months: Vec<MonthKey>,
    /// Series after filling empty months.
    pub values: Vec<f64>,
    pub n_interpolated: usize,
    pub pre_fit: ArimaFit,
    pub post_forecast: Forecast,
    pub mismatch: Vec<Mismatch>,
    /// Final model on the full series with the retained events.
    pub arimax_fit: ArimaFit,
    pub coefficients: Vec<ItsCoefficient>,
    pub dropped_events: Vec<DroppedEvent>,
    pub pre_mean: f64,
    pub post_mean: f64,
    pub pct_change: Option<f64>,
    pub alpha: f64,
}

impl ItsResult {
    pub fn event_coefficients(&self) -> impl Iterator<Item = &ItsCoefficient> {
        self.coefficients.iter().filter(|c| c.is_event)
    }

    pub fn has_significant_event(&self) -> bool {
        self.event_coefficients().any(|c| c.p_value < self.alpha)
    }

    /// Fitted values for the pre-policy window followed by forecasts for the
    /// post-policy window. `None` where differencing leaves no prediction.
    pub fn fitted_or_forecast(&self) -> Vec<Option<f64>> {
        let mut out = self.pre_fit.fitted_values();
        out.extend(self.post_forecast.point.iter().map(|v| Some(*v)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItsOptions {
    pub policy_month: MonthKey,
    pub events: Vec<EventKind>,
    /// Optional second onset for the same event kinds (law announcement).
    pub announcement_month: Option<MonthKey>,
    pub alpha: f64,
    pub interval_level: f64,
    pub min_pre_months: usize,
    pub min_post_months: usize,
    pub auto: AutoOptions,
}

impl Default for ItsOptions {
    fn default() -> Self {
        Self {
            policy_month: MonthKey::default_policy(),
            events: EventKind::ALL.to_vec(),
            announcement_month: None,
            alpha: 0.05,
            interval_level: 0.95,
            min_pre_months: 36,
            min_post_months: 12,
            auto: AutoOptions::default(),
        }
    }
}

impl ItsOptions {
    fn event_inputs(&self) -> Vec<EventInput> {
        let mut out: Vec<EventInput> = self.events.iter().map(|&kind| EventInput { kind, onset: self.policy_month }).collect();
        if let Some(a) = self.announcement_month {
            out.extend(self.events.iter().map(|&kind| EventInput { kind, onset: a }));
        }
        out
    }
}

/// Fit with events, dropping inputs until every remaining one is significant
/// or none are left. Collinear pairs lose their second member.
fn eliminate(
    y: &[f64],
    start: MonthKey,
    orders: &ArimaOrders,
    include_constant: bool,
    mut events: Vec<EventInput>,
    alpha: f64,
) -> Result<(ArimaFit, Vec<EventInput>, Vec<DroppedEvent>)> {
    let mut dropped = Vec::new();
    loop {
        let names = event_names(&events);
        let position = |name: &str| names.iter().position(|n| n == name);
        match fit_arimax(y, start, orders, &events, Some(include_constant)) {
            Ok(fit) if near_unit_root(&fit) => {
                return Err(Error::InvalidParams(format!("{orders} with events reaches the unit circle")));
            }
            Ok(fit) => {
                let worst = fit
                    .coefficients
                    .iter()
                    .filter(|c| c.kind == CoefficientKind::Regressor)
                    .map(|c| (c.name.clone(), if c.p_value.is_nan() { 1.0 } else { c.p_value }))
                    .fold(None::<(String, f64)>, |acc, (n, p)| match acc {
                        Some((_, bp)) if bp >= p => acc,
                        _ => Some((n, p)),
                    });
                match worst {
                    Some((name, p)) if p >= alpha => {
                        let i = position(&name).expect("coefficient names come from events");
                        events.remove(i);
                        dropped.push(DroppedEvent { name, reason: format!("p = {p:.4} >= {alpha}") });
                    }
                    _ => return Ok((fit, events, dropped)),
                }
            }
            Err(Error::CollinearRegressors(a, b)) => {
                let victim = if b == "constant" { a.clone() } else { b.clone() };
                let i = position(&victim).ok_or_else(|| Error::CollinearRegressors(a.clone(), b.clone()))?;
                events.remove(i);
                dropped.push(DroppedEvent { name: victim, reason: format!("collinear: {a} and {b}") });
            }
            Err(Error::ZeroVarianceRegressor(a)) => {
                let i = position(&a).ok_or_else(|| Error::ZeroVarianceRegressor(a.clone()))?;
                events.remove(i);
                dropped.push(DroppedEvent { name: a, reason: "no variation after differencing".into() });
            }
            Err(e) => return Err(e),
        }
    }
}

/// Run the three-step analysis on one monthly series.
pub fn its_analysis(series: &ClassSeries, opts: &ItsOptions) -> Result<ItsResult> {
    if series.is_empty() {
        return Err(Error::InsufficientData { what: "ITS series", needed: opts.min_pre_months + opts.min_post_months, got: 0 });
    }
    let (values, n_interpolated) = series.interpolated()?;
    if n_interpolated > 0 {
        log::info!("{} {}: interpolated {n_interpolated} empty months", series.family, series.group);
    }
    let months = series.months();
    let start = months[0];
    let split = months.iter().position(|m| *m >= opts.policy_month).unwrap_or(months.len());
    let n_post = months.len() - split;
    if split < opts.min_pre_months {
        return Err(Error::InsufficientData { what: "pre-policy months", needed: opts.min_pre_months, got: split });
    }
    if n_post < opts.min_post_months {
        return Err(Error::InsufficientData { what: "post-policy months", needed: opts.min_post_months, got: n_post });
    }

    let pre = &values[..split];
    let auto = auto_fit_with(pre, &opts.auto)?;
    let pre_fit = auto.fit;
    let post_forecast = forecast(&pre_fit, n_post, opts.interval_level)?;
    let mismatch = (0..n_post)
        .map(|i| {
            let actual = values[split + i];
            let (predicted, lower, upper) = (post_forecast.point[i], post_forecast.lower[i], post_forecast.upper[i]);
            Mismatch {
                month: months[split + i],
                actual,
                predicted,
                lower,
                upper,
                difference: actual - predicted,
                outside_interval: actual < lower || actual > upper,
            }
        })
        .collect();

    // The pre-policy model first; if its fit on the full series runs onto the
    // unit circle, the next pre-policy candidates by BIC.
    let mut fallbacks: Vec<_> = auto
        .candidates
        .iter()
        .filter(|c| c.error.is_none() && !(c.orders == pre_fit.orders && c.include_constant == pre_fit.include_constant))
        .filter_map(|c| c.bic.map(|b| (b, c.orders, c.include_constant)))
        .collect();
    fallbacks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut first_err = None;
    let mut chosen = None;
    for (orders, constant) in std::iter::once((pre_fit.orders, pre_fit.include_constant))
        .chain(fallbacks.into_iter().map(|(_, o, c)| (o, c)))
    {
        match eliminate(&values, start, &orders, constant, opts.event_inputs(), opts.alpha) {
            Ok(r) => {
                if orders != pre_fit.orders {
                    log::warn!("{} {}: {} is degenerate on the full series; events fitted with {orders}", series.family, series.group, pre_fit.orders);
                }
                chosen = Some(r);
                break;
            }
            Err(e @ Error::InvalidParams(_)) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    let (arimax_fit, _, dropped_events) = match chosen {
        Some(r) => r,
        None => return Err(first_err.expect("at least one model was tried")),
    };
    let coefficients = arimax_fit
        .coefficients
        .iter()
        .map(|c| ItsCoefficient {
            name: c.name.clone(),
            is_event: c.kind == CoefficientKind::Regressor,
            estimate: c.estimate,
            std_error: c.std_error,
            p_value: c.p_value,
            stars: significance_stars(c.p_value).to_string(),
        })
        .collect();

    let pre_obs: Vec<f64> = series.points[..split].iter().filter_map(|p| p.mean_mme_day).collect();
    let post_obs: Vec<f64> = series.points[split..].iter().filter_map(|p| p.mean_mme_day).collect();
    let pre_mean = stats::mean(&pre_obs);
    let post_mean = stats::mean(&post_obs);
    Ok(ItsResult {
        family: series.family,
        group: series.group,
        policy_month: opts.policy_month,
        months,
        values,
        n_interpolated,
        pre_fit,
        post_forecast,
        mismatch,
        arimax_fit,
        coefficients,
        dropped_events,
        pre_mean,
        post_mean,
        pct_change: stats::pct_change(pre_mean, post_mean).ok(),
        alpha: opts.alpha,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchEntry {
    pub family: DrugFamily,
    pub group: SeriesGroup,
    pub result: std::result::Result<ItsResult, String>,
}

/// Analyse every series, in (family, group) order. A failing series is
/// recorded and the rest still run.
pub fn its_batch(series: &[ClassSeries], opts: &ItsOptions) -> Vec<BatchEntry> {
    let mut ordered: Vec<&ClassSeries> = series.iter().collect();
    ordered.sort_by_key(|s| (s.family, s.group));
    ordered
        .par_iter()
        .map(|s| {
            let result = its_analysis(s, opts).map_err(|e| {
                log::warn!("{} {}: {e}", s.family, s.group);
                e.to_string()
            });
            BatchEntry { family: s.family, group: s.group, result }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::{simulate, ArimaParams};
    use crate::series::SeriesPoint;

    fn series_from(values: &[f64], start: MonthKey) -> ClassSeries {
        ClassSeries {
            family: DrugFamily::Opioid,
            group: SeriesGroup::Overall,
            points: values
                .iter()
                .enumerate()
                .map(|(i, v)| SeriesPoint { month: start.offset(i as i32), mean_mme_day: Some(*v), n_records: 10 })
                .collect(),
            policy_month: MonthKey::default_policy(),
        }
    }

    #[test]
    fn regressor_definitions() {
        assert_eq!(event_regressor(EventKind::LevelShift, 3, 6).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(event_regressor(EventKind::Ramp, 3, 6).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
        assert_eq!(event_regressor(EventKind::InverseTrend, 3, 6).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 0.5, 1.0 / 3.0]);
        assert!(event_regressor(EventKind::Ramp, 6, 6).is_err());
        assert_eq!(event_regressor(EventKind::Ramp, 2, 5).unwrap(), event_regressor(EventKind::Ramp, 2, 5).unwrap());
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.004), "**");
        assert_eq!(significance_stars(0.04), "*");
        assert_eq!(significance_stars(0.05), "");
        assert_eq!(significance_stars(0.0009), "***");
        assert_eq!(significance_stars(f64::NAN), "");
    }

    #[test]
    fn level_shift_recovered() {
        let o = ArimaOrders::new(0, 0, 0);
        let mut y = simulate(&o, &ArimaParams::zeros(&o, 1.0), 200, 12).unwrap();
        let start = MonthKey::from_index(0);
        let onset = start.offset(100);
        y[100..].iter_mut().for_each(|v| *v += 5.0);
        let f = fit_arimax(&y, start, &o, &[EventInput { kind: EventKind::LevelShift, onset }], None).unwrap();
        let c = f.coefficient("Level Shift").unwrap();
        assert!((4.0..=6.0).contains(&c.estimate), "{c:?}");
        assert!(c.p_value < 0.001);
    }

    #[test]
    fn degenerate_events_rejected() {
        let o = ArimaOrders::new(0, 0, 0);
        let y = simulate(&o, &ArimaParams::zeros(&o, 1.0), 40, 2).unwrap();
        let start = MonthKey::from_index(0);
        let past_end = EventInput { kind: EventKind::LevelShift, onset: start.offset(40) };
        assert!(matches!(fit_arimax(&y, start, &o, &[past_end], None), Err(Error::ZeroVarianceRegressor(_))));
        let e = EventInput { kind: EventKind::Ramp, onset: start.offset(20) };
        let twice = [e, EventInput { onset: start.offset(20), ..e }];
        match fit_arimax(&y, start, &o, &twice, None) {
            Err(Error::CollinearRegressors(a, b)) => {
                assert!(a.starts_with("Ramp") && b.starts_with("Ramp"));
            }
            other => panic!("expected collinearity, got {other:?}"),
        }
    }

    #[test]
    fn adding_an_event_never_raises_css() {
        let o = ArimaOrders::new(1, 0, 0);
        let p = ArimaParams { c: 10.0, phi: vec![0.4], ..ArimaParams::zeros(&o, 1.0) };
        let y = simulate(&o, &p, 96, 5).unwrap();
        let start = MonthKey::from_index(0);
        let base = fit_arimax(&y, start, &o, &[], None).unwrap();
        let with = fit_arimax(&y, start, &o, &[EventInput { kind: EventKind::Ramp, onset: start.offset(52) }], None).unwrap();
        assert!(with.css <= base.css * (1.0 + 1e-8));
    }

    #[test]
    fn flat_series_has_no_mismatch() {
        let s = series_from(&vec![50.0; 95], MonthKey::from_index(0));
        let r = its_analysis(&s, &ItsOptions::default()).unwrap();
        assert_eq!(r.mismatch.len(), 95 - 52);
        assert!(r.mismatch.iter().all(|m| !m.outside_interval && m.difference.abs() < 1e-9));
        assert!(!r.has_significant_event());
        assert_eq!(r.pct_change, Some(0.0));
    }

    #[test]
    fn window_lengths_enforced() {
        let s = series_from(&vec![1.0; 50], MonthKey::new(2016, 1).unwrap());
        assert!(matches!(its_analysis(&s, &ItsOptions::default()), Err(Error::InsufficientData { .. })));
        let s = series_from(&vec![1.0; 60], MonthKey::from_index(0));
        assert!(matches!(its_analysis(&s, &ItsOptions::default()), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn pre_fit_ignores_post_data() {
        let o = ArimaOrders::new(1, 0, 0);
        let p = ArimaParams { c: 20.0, phi: vec![0.5], ..ArimaParams::zeros(&o, 1.0) };
        let y = simulate(&o, &p, 95, 8).unwrap();
        let mut sentinel = y.clone();
        sentinel[52..].iter_mut().for_each(|v| *v = 1e6);
        let opts = ItsOptions::default();
        let a = its_analysis(&series_from(&y, MonthKey::from_index(0)), &opts).unwrap();
        let b = its_analysis(&series_from(&sentinel, MonthKey::from_index(0)), &opts).unwrap();
        assert_eq!(a.pre_fit.params, b.pre_fit.params);
        assert_eq!(a.pre_fit.orders, b.pre_fit.orders);
    }

    #[test]
    fn batch_is_ordered_and_survives_failures() {
        let good = series_from(&vec![5.0; 95], MonthKey::from_index(0));
        let mut short = series_from(&[1.0; 10], MonthKey::from_index(0));
        short.family = DrugFamily::Benzodiazepine;
        let mut class = good.clone();
        class.group = "21".parse().unwrap();
        let out = its_batch(&[short, class, good], &ItsOptions::default());
        let keys: Vec<String> = out.iter().map(|e| format!("{} {}", e.family, e.group)).collect();
        assert_eq!(keys, vec!["opioid overall", "opioid 21", "benzodiazepine overall"]);
        assert!(out[0].result.is_ok() && out[1].result.is_ok());
        assert!(out[2].result.is_err());
    }
}
