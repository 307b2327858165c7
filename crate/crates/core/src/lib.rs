//! Prescription-transaction analytics: geospatial classification of
//! patient/prescriber/dispenser triangles, monthly MME/day series, classical
//! inference, and ARIMA/ARIMAX interrupted time-series analysis.
//!
//! The typical flow is
//! [`syngen::generate`] or [`ingest::parse_csv`] → [`ingest::clean`] →
//! [`geoclass::classify`] → [`series::aggregate_monthly`] →
//! [`intervention::its_batch`], with [`report`] rendering the tables.

pub mod arima;
pub mod error;
pub mod geoclass;
pub mod ingest;
pub mod intervention;
mod linalg;
mod optimize;
pub mod report;
pub mod series;
pub mod stats;
pub mod syngen;

pub use error::{Error, Result};
pub use geoclass::{ClassCode, ClassifiedRecord, DisparityLabel, RiskLevel, Thresholds, TriangleGeometry};
pub use ingest::{DrugFamily, FilterReport, GeoPoint, PrescriptionRecord};
pub use series::{ClassSeries, MonthKey, SeriesGroup};
pub use arima::{ArimaFit, ArimaOrders, ArimaParams, Forecast};
pub use intervention::{EventInput, EventKind, ItsResult};
