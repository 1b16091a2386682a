//! Budgeted active learning on streaming wearable-sensor data.
//!
//! Instances live in a proximity graph whose labeled nodes spread their
//! labels to unlabeled neighbours. Learners query an oracle for the most
//! uncertain (highest-entropy) instances, either from a pool
//! ([`offline`]) or one arrival at a time against an informativeness
//! threshold ([`streaming`]).

pub mod config;
pub mod error;
pub mod evaluation;
pub mod label;
pub mod offline;
pub mod oracle;
pub mod pipeline;
pub mod proximity;
pub mod selection;
pub mod streaming;

pub use error::{OracleError, PalsError, Result};
pub use label::{Instance, InstanceId, Label, LabelDistribution};
