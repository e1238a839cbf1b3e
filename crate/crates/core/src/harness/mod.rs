//! Experiment orchestration and validation against simulation.

pub mod config;
pub mod empirical;
pub mod experiment;
pub mod io;
pub mod oracle;
pub mod validate;

pub use empirical::{
    empirical_tail, empirical_tails, kde_density, wilson, KdeEstimate, TailEstimate,
};
pub use validate::{
    containment_report, tail_checks, BoundSet, CheckRecord, Observed, Provenance, SlackPolicy,
    ValidationReport, Verdict,
};
