//! Tropical field theory by recursion: coefficient tables, exact Hepp
//! oracles, polynomial-time sampling of metric Feynman graphs and Monte
//! Carlo estimators built on top of them.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod alias;
pub mod dimension;
pub mod error;
pub mod graph;
pub mod hepp;
pub mod montecarlo;
pub mod sampler;
pub mod series;
pub mod symanzik;
pub mod tables;

pub use dimension::{parse_rational, Dimension, Rational};
pub use error::{Error, Result};
pub use graph::{Graph, MetricAssignment};
pub use tables::CoefficientTables;

/// Plain Hepp recursion, or the positive variant that zeroes every 1PI
/// piece with ω ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plain,
    Positive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Plain => "plain",
            Mode::Positive => "positive",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "positive" => Ok(Mode::Positive),
            _ => Err(Error::Parse(format!("unknown mode {s:?}, expected plain or positive"))),
        }
    }
}
