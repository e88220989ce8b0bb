//! Scenario harness for fluxon condensates.
//!
//! A scenario is a JSON document ([`config::ScenarioConfig`]) naming a
//! profile, condensate indices, a space-time grid and a mode.  Running it
//! ([`scenario::run_scenario`]) writes CSV tables, optional SVG heatmaps and a
//! `summary.json` with error statistics, failures and acceptance checks.
//!
//! ```text
//! spectrum   -> spectrum.csv
//! exact      -> exact.csv
//! asymptotic -> asymptotic.csv, states.csv
//! compare    -> exact.csv, asymptotic.csv, states.csv, comparison.csv
//! whitham    -> states.csv, whitham.csv
//! heatmap    -> exact.csv, heatmap_N<n>.svg
//! ```

// Range checks are written `!(lo < x && x < hi)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod scenario;

pub use compare::{compare, ComparisonRecord, TableRow};
pub use config::{Mode, ScenarioConfig};
pub use error::{HarnessError, Result};
pub use scenario::{run_scenario, RunSummary, RunTables};
