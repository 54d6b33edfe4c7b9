//! Energy-detector receiver: normalized statistic, decision regions and
//! decoding.
//!
//! Decisions are made on `T = y_r²/(σ_h⁴(α²+β))`. Level `m` is decoded when
//! `T` falls in `(b_{m−1}, b_m]` with `b_0 = −∞` and `b_𝓜 = +∞`; a statistic
//! exactly on a cut point goes to the left region.

use crate::channel::ChannelStats;
use crate::constellation::{symbol_index, Codebook, Side};
use crate::error::{Error, Result};
use crate::rate::RateModel;

/// Intervals of the normalized statistic assigned to each energy level.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRegions {
    boundaries: Vec<f64>,
    centers: Vec<f64>,
}

impl DecisionRegions {
    /// Regions `(r(E_m) − d_{l,m}, r(E_m) + d_{r,m})` with `r(E) = E + σ̃_n²`.
    ///
    /// `deviations[m] = (d_l, d_r)`. The left deviation of the first level and
    /// the right deviation of the last are ignored (those edges extend to
    /// infinity). Adjacent intervals must share their edge.
    pub fn from_design(
        energies: &[f64],
        deviations: &[(f64, f64)],
        noise_tilde_sq: f64,
    ) -> Result<Self> {
        if energies.is_empty() || energies.len() != deviations.len() {
            return Err(Error::Regions(format!(
                "{} energies but {} deviation pairs",
                energies.len(),
                deviations.len()
            )));
        }
        let centers: Vec<f64> = energies.iter().map(|e| e + noise_tilde_sq).collect();
        let mut boundaries = Vec::with_capacity(energies.len() - 1);
        for m in 0..energies.len() - 1 {
            let (_, dr) = deviations[m];
            let (dl, _) = deviations[m + 1];
            if dr < 0.0 || dl < 0.0 {
                return Err(Error::Regions("negative deviation".into()));
            }
            let right = centers[m] + dr;
            let left = centers[m + 1] - dl;
            if (right - left).abs() > 1e-9 * right.abs().max(1.0) {
                return Err(Error::Regions(format!(
                    "levels {} and {} leave a {} between {right} and {left}",
                    m + 1,
                    m + 2,
                    if right < left { "gap" } else { "overlap" }
                )));
            }
            boundaries.push(right);
        }
        DecisionRegions::from_boundaries(centers, boundaries)
    }

    /// Cuts halfway between consecutive centers `E_m + σ̃_n²`.
    pub fn midpoint(energies: &[f64], noise_tilde_sq: f64) -> Result<Self> {
        let centers: Vec<f64> = energies.iter().map(|e| e + noise_tilde_sq).collect();
        let boundaries = centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        DecisionRegions::from_boundaries(centers, boundaries)
    }

    /// Regions from explicit cut points; each center must lie strictly inside
    /// its region.
    pub fn from_boundaries(centers: Vec<f64>, boundaries: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || boundaries.len() + 1 != centers.len() {
            return Err(Error::Regions(format!(
                "{} levels need {} cut points, got {}",
                centers.len(),
                centers.len().saturating_sub(1),
                boundaries.len()
            )));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::Regions("cut points must be finite".into()));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Regions("cut points must be strictly increasing".into()));
        }
        for (m, &c) in centers.iter().enumerate() {
            let lo = if m == 0 { f64::NEG_INFINITY } else { boundaries[m - 1] };
            let hi = boundaries.get(m).copied().unwrap_or(f64::INFINITY);
            if !(c > lo && c < hi) {
                return Err(Error::Regions(format!(
                    "center {c} of level {} lies outside ({lo}, {hi})",
                    m + 1
                )));
            }
        }
        Ok(DecisionRegions { boundaries, centers })
    }

    pub fn levels(&self) -> usize {
        self.centers.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// `(lo, hi)` of every region, with infinite outer edges.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        (0..self.levels())
            .map(|m| {
                let lo = if m == 0 { f64::NEG_INFINITY } else { self.boundaries[m - 1] };
                let hi = self.boundaries.get(m).copied().unwrap_or(f64::INFINITY);
                (lo, hi)
            })
            .collect()
    }

    /// `(d_l, d_r)` per level, measured from the centers; outer edges are `∞`.
    pub fn deviations(&self) -> Vec<(f64, f64)> {
        self.intervals()
            .iter()
            .zip(&self.centers)
            .map(|(&(lo, hi), &c)| (c - lo, hi - c))
            .collect()
    }

    /// Level (0-based) whose region contains `stat`.
    pub fn decode(&self, stat: f64) -> usize {
        self.boundaries.partition_point(|&b| b < stat)
    }
}

/// `y_r² / (σ_h⁴(α²+β))`.
pub fn normalized_statistic(y_r: f64, stats: &ChannelStats) -> f64 {
    y_r * y_r / stats.second_moment()
}

/// Level (0-based) decoded from a normalized statistic.
pub fn decode_one_sided(stat: f64, regions: &DecisionRegions) -> usize {
    regions.decode(stat)
}

/// Symbol index (0-based, layout of [`Codebook::symbols`]) decoded from the
/// received sample: the level comes from the statistic, the sign from `y_r`
/// (zero counts as positive).
pub fn decode_two_sided(y_r: f64, regions: &DecisionRegions, stats: &ChannelStats) -> usize {
    let level = regions.decode(normalized_statistic(y_r, stats));
    symbol_index(Side::Two, regions.levels(), level, y_r >= 0.0)
}

/// Chernoff bound `(1/𝓜) Σ_m (e^{−I_r(d_{r,m})} + e^{−I_l(d_{l,m})})`, clipped
/// to 1.
///
/// Rates are evaluated at the codebook energies and the region deviations;
/// unbounded edges contribute nothing.
pub fn ser_upper_bound(codebook: &Codebook, regions: &DecisionRegions, model: &RateModel) -> Result<f64> {
    if codebook.levels() != regions.levels() {
        return Err(Error::Regions(format!(
            "codebook has {} levels, regions have {}",
            codebook.levels(),
            regions.levels()
        )));
    }
    let mut total = 0.0;
    for (&e, (dl, dr)) in codebook.energies().iter().zip(regions.deviations()) {
        if dr.is_finite() {
            total += (-model.rate_right(e, dr)).exp();
        }
        if dl.is_finite() {
            total += (-model.rate_left(e, dl)).exp();
        }
    }
    Ok((total / codebook.levels() as f64).min(1.0))
}

/// Smallest boundary rate `min_m min(I_l(d_{l,m}), I_r(d_{r,m}))` over finite
/// edges; `+∞` if every edge is unbounded.
pub fn region_exponent(codebook: &Codebook, regions: &DecisionRegions, model: &RateModel) -> f64 {
    codebook
        .energies()
        .iter()
        .zip(regions.deviations())
        .flat_map(|(&e, (dl, dr))| {
            [
                dl.is_finite().then(|| model.rate_left(e, dl)),
                dr.is_finite().then(|| model.rate_right(e, dr)),
            ]
        })
        .flatten()
        .fold(f64::INFINITY, f64::min)
}
