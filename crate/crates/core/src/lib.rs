//! Real-time metal price forecasting engine.
//!
//! The pipeline: ingest first-release data vintages ([`vintage`]), fill the
//! ragged edge with univariate nowcasts ([`nowcast`]), run a zoo of direct
//! multi-horizon forecasting models over rolling windows ([`models`],
//! [`factors`], [`model_free`]), then evaluate and pool the forecasts with
//! Diebold-Mariano tests, the model confidence set, and MCS-screened
//! averaging ([`evaluation`], [`pooling`]). [`backtest`] orchestrates a full
//! run from a config file and emits report tables; [`synth`] generates a
//! synthetic dataset so everything is testable without proprietary data.

pub mod backtest;
pub mod dates;
pub mod error;
pub mod evaluation;
pub mod factors;
pub mod model_free;
pub mod models;
pub mod nowcast;
pub mod pooling;
pub mod rng;
pub mod series;
pub mod stats;
pub mod synth;
pub mod vintage;

pub use dates::YearMonth;
pub use error::{Error, Result};
pub use series::MonthlySeries;
pub use vintage::{Metal, RealTimePanel};
