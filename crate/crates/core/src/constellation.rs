//! One- and two-sided ASK energy codebooks.
//!
//! A codebook stores the distinct symbol energies in increasing order. For a
//! one-sided constellation every level is one symbol (`x_m = √E_m`); for a
//! two-sided constellation each level is used twice, once with each sign,
//! laid out as `−√E_{M/2}, …, −√E_1, √E_1, …, √E_{M/2}`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Whether the constellation uses only nonnegative amplitudes or both signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    One,
    Two,
}

impl Side {
    /// Number of distinct energy levels for a constellation of size `m`.
    pub fn levels(self, m: usize) -> usize {
        match self {
            Side::One => m,
            Side::Two => m / 2,
        }
    }

    fn check_size(self, m: usize) -> Result<()> {
        let ok = match self {
            Side::One => m >= 2,
            Side::Two => m >= 2 && m.is_multiple_of(2),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid constellation size M={m} for {self}-sided ASK"
            )))
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::One => "one",
            Side::Two => "two",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(Side::One),
            "two" | "2" => Ok(Side::Two),
            _ => Err(Error::InvalidParameter(format!("unknown side '{s}'"))),
        }
    }
}

/// An ASK energy codebook with equiprobable symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    side: Side,
    m: usize,
    energies: Vec<f64>,
}

impl Codebook {
    /// Builds a codebook from strictly increasing, nonnegative energies.
    pub fn new(side: Side, m: usize, energies: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("M must be positive".into()));
        }
        if side == Side::Two && !m.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "two-sided ASK needs an even M (got {m})"
            )));
        }
        if energies.len() != side.levels(m) {
            return Err(Error::InvalidParameter(format!(
                "{side}-sided M={m} needs {} energies, got {}",
                side.levels(m),
                energies.len()
            )));
        }
        if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidParameter(
                "energies must be finite and nonnegative".into(),
            ));
        }
        if energies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "energies must be strictly increasing".into(),
            ));
        }
        Ok(Codebook { side, m, energies })
    }

    /// The equispaced-amplitude baseline: one-sided `E_m = 4(m−1)²`,
    /// two-sided `E_m = 4m²`.
    pub fn traditional(side: Side, m: usize) -> Result<Self> {
        side.check_size(m)?;
        let energies = match side {
            Side::One => (0..m).map(|i| 4.0 * (i * i) as f64).collect(),
            Side::Two => (1..=m / 2).map(|i| 4.0 * (i * i) as f64).collect(),
        };
        Codebook::new(side, m, energies)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Constellation size `M` (number of symbols).
    pub fn size(&self) -> usize {
        self.m
    }

    /// Number of distinct levels.
    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `(1/M) Σ x_m²` over all `M` symbols.
    pub fn average_energy(&self) -> f64 {
        let total: f64 = self.energies.iter().sum();
        match self.side {
            Side::One => total / self.m as f64,
            Side::Two => 2.0 * total / self.m as f64,
        }
    }

    /// Transmit amplitudes in symbol-index order.
    pub fn symbols(&self) -> Vec<f64> {
        let amps = self.energies.iter().map(|e| e.sqrt());
        match self.side {
            Side::One => amps.collect(),
            Side::Two => {
                let pos: Vec<f64> = amps.collect();
                pos.iter().rev().map(|a| -a).chain(pos.iter().copied()).collect()
            }
        }
    }

    /// Energy level (0-based) and sign of symbol `index` (0-based).
    pub fn symbol_level(&self, index: usize) -> (usize, bool) {
        symbol_level(self.side, self.levels(), index)
    }
}

/// Level (0-based) and sign (`true` = positive) of a symbol index under the
/// layout described in the module docs.
pub fn symbol_level(side: Side, levels: usize, index: usize) -> (usize, bool) {
    match side {
        Side::One => (index, true),
        Side::Two if index < levels => (levels - 1 - index, false),
        Side::Two => (index - levels, true),
    }
}

/// Inverse of [`symbol_level`] for two-sided constellations.
pub fn symbol_index(side: Side, levels: usize, level: usize, positive: bool) -> usize {
    match side {
        Side::One => level,
        Side::Two if positive => levels + level,
        Side::Two => levels - 1 - level,
    }
}

/// The average-energy budget 𝓒 for an `M`-point constellation, i.e. the
/// average energy of the traditional constellation of the same size.
pub fn energy_cap(side: Side, m: usize) -> Result<f64> {
    side.check_size(m)?;
    // integer numerator, so the result is the correctly rounded quotient
    let numerator = match side {
        Side::One => 2 * (m - 1) * (2 * m - 1),
        Side::Two => (m + 1) * (m + 2),
    };
    Ok(numerator as f64 / 3.0)
}
