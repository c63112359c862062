//! Experiment runner for the sinpinn toolkit: single runs, σ/λ sweeps,
//! proposition tables and reports.

pub mod config;
pub mod props;
pub mod report;
pub mod runner;
pub mod summary;
pub mod svg;
pub mod sweep;
