//! Power quantities and decibel conversions.
//!
//! All powers are spectral densities per MHz; since both the primary and the
//! secondary systems are expressed per MHz no bandwidth correction is applied.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Converts a decibel quantity to its linear ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear ratio to decibels. Zero maps to `-inf`.
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Natural-log standard deviation of a log-normal variable given in dB.
#[inline]
pub fn sigma_db_to_ln(sigma_db: f64) -> f64 {
    sigma_db * std::f64::consts::LN_10 / 10.0
}

/// Power spectral density in dBm/MHz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(pub f64);

impl PowerDbm {
    pub fn new(dbm: f64) -> Self {
        Self(dbm)
    }

    /// Builds a power from milliwatts.
    pub fn from_mw(mw: f64) -> Self {
        Self(linear_to_db(mw))
    }

    pub fn dbm(self) -> f64 {
        self.0
    }

    pub fn to_mw(self) -> f64 {
        db_to_linear(self.0)
    }

    /// Adds a gain (or a loss, when negative) expressed in dB.
    pub fn offset_db(self, db: f64) -> Self {
        Self(self.0 + db)
    }
}

impl fmt::Display for PowerDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dBm/MHz", self.0)
    }
}
