//! Evaluation harness: dataset loading, scoring, report rendering and the
//! `timetom` command line.

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod report;
