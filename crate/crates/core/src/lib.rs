#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Pre-averaging estimators of integrated covariance from noisy,
//! non-synchronous high-frequency prices, with feasible inference, a
//! simulation laboratory and a tick-cleaning pipeline.

pub mod error;
pub mod estimators;
pub mod inference;
pub mod ingest;
pub mod io;
pub mod preavg;
pub mod sync;
mod quadrature;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use preavg::{finite_sample_constants, AsymptoticConstants, FiniteSampleConstants, WeightScheme};
pub use types::{
    log_returns, resolve_kn, CovEstimate, EstimateWarning, NoiseCovEstimate, PreAvgConfig,
    ResolvedWindow, SyncScheme, SyncedPanel, TickSeries,
};
