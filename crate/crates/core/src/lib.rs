//! Man/zone pass-coverage annotation for cornerbacks from player tracking data.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`ingest`] parses tracking CSV into validated [`ingest::Play`]s anchored on
//!    the `ball_snap` and `pass_forward` events.
//! 2. [`features`] turns each (play, cornerback) pair into an 11-feature x
//!    5-window movement summary.
//! 3. [`gmm`] fits full-covariance Gaussian mixtures by EM and produces soft
//!    memberships.
//! 4. [`eval`] scores clusterings with leave-one-week-out cross-validated
//!    adjusted Rand index, selects the component count, ranks feature influence
//!    and names the two clusters MAN and ZONE.
//! 5. [`report`] builds per-window coverage timelines, grouped man/zone
//!    proportions and membership histograms.
//!
//! [`synth`] generates labelled tracking data with planted man-like and
//! zone-like defenders so the unsupervised pipeline can be checked end to end.

pub mod eval;
pub mod features;
pub mod gmm;
mod ids;
pub mod ingest;
pub mod report;
pub mod rng;
pub mod synth;

pub use ids::Id;
pub use nalgebra;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Shortest text that parses back to `v` exactly; exponent notation for
/// magnitudes below 1e-4 or at least 1e16 keeps cells short.
pub(crate) fn format_float(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-4..1e16).contains(&v.abs()) { format!("{v:e}") } else { v.to_string() }
}

/// Coverage type of one cornerback on one play.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Coverage {
    Man,
    Zone,
}

impl Coverage {
    pub fn as_str(self) -> &'static str {
        match self {
            Coverage::Man => "MAN",
            Coverage::Zone => "ZONE",
        }
    }
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Coverage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MAN" => Ok(Coverage::Man),
            "ZONE" => Ok(Coverage::Zone),
            other => Err(format!("unknown coverage label {other:?}")),
        }
    }
}
