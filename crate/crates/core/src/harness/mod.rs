//! Experiment harness: configuration, data, ensembles, audits and reports.

pub mod audit;
pub mod config;
pub mod data;
pub mod ensemble;
pub mod experiment;
pub mod report;
