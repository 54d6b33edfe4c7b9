//! Error-exponent-equalizing constellation design.
//!
//! Designs are built in scaled units `Ẽ = E/𝓒`, where `𝓒` is the energy
//! budget, so that the average-energy constraint reads `(1/𝓜) Σ Ẽ_m ≤ 1`.
//! For a target exponent `t` the greedy construction places each level as
//! low as possible while every decision boundary keeps a rate of exactly
//! `t`. Bisection on `t` then finds the largest exponent that fits the
//! budget, and the result is scaled back up by `𝓒`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::channel::ChannelStats;
use crate::constellation::{energy_cap, Codebook, Side};
use crate::detector::DecisionRegions;
use crate::error::{Error, Result};
use crate::rate::{BoundaryRates, CoefficientMode, RateModel, SVarCoefficients};
use crate::roots::first_crossing;

/// Largest scaled energy searched before a target exponent is declared
/// infeasible.
pub const SCALED_ENERGY_CAP: f64 = 1e3;
const ROOT_REL_TOL: f64 = 1e-12;

/// Which rate functions drive the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignCase {
    /// Exact rate functions of the Gaussian gain model.
    Exact,
    /// Quadratic rates `d²/(2 s(E))` from the first four moments.
    FourthMoment,
}

impl fmt::Display for DesignCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignCase::Exact => "exact",
            DesignCase::FourthMoment => "fourth_moment",
        })
    }
}

impl FromStr for DesignCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "1" => Ok(DesignCase::Exact),
            "fourth_moment" | "fourth-moment" | "2" => Ok(DesignCase::FourthMoment),
            _ => Err(Error::InvalidParameter(format!("unknown case '{s}'"))),
        }
    }
}

/// Noise term used by the rate functions in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScaling {
    /// Scaled rates use the operating `σ̃_n²` unchanged.
    #[default]
    Operating,
    /// Scaled rates use `σ̃_n²/𝓒`, the noise of the scaled statistic.
    Rescaled,
}

/// Rate functions in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaledRates {
    Exact(RateModel),
    FourthMoment(SVarCoefficients),
}

impl ScaledRates {
    /// Quadratic estimate of the deviation with rate `t`, used to size the
    /// first bracket step.
    fn deviation_guess(&self, energy: f64, t: f64) -> f64 {
        let s = match self {
            ScaledRates::Exact(m) => m.variance(energy),
            ScaledRates::FourthMoment(c) => c.eval(energy),
        };
        (2.0 * t * s).sqrt()
    }
}

impl BoundaryRates for ScaledRates {
    fn left(&self, energy: f64, d: f64) -> f64 {
        match self {
            ScaledRates::Exact(m) => m.rate_left(energy, d),
            ScaledRates::FourthMoment(c) => c.left(energy, d),
        }
    }

    fn right(&self, energy: f64, d: f64) -> f64 {
        match self {
            ScaledRates::Exact(m) => m.rate_right(energy, d),
            ScaledRates::FourthMoment(c) => c.right(energy, d),
        }
    }
}

/// One level of a scaled design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledLevel {
    pub energy: f64,
    pub d_left: f64,
    pub d_right: f64,
}

/// Output of the greedy construction for a fixed exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDesign {
    pub side: Side,
    pub m: usize,
    pub t: f64,
    pub levels: Vec<ScaledLevel>,
}

impl ScaledDesign {
    /// `S = (1/𝓜) Σ Ẽ_m`.
    pub fn average(&self) -> f64 {
        self.levels.iter().map(|l| l.energy).sum::<f64>() / self.levels.len() as f64
    }

    /// Boundary deviations that carry an exponent: every finite one except
    /// the fixed zero left deviation of a one-sided first level.
    pub fn boundaries(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        let skip_first_left = self.side == Side::One;
        self.levels.iter().enumerate().flat_map(move |(m, l)| {
            let left = (!(m == 0 && skip_first_left) && l.d_left.is_finite())
                .then_some((l.energy, l.d_left, true));
            let right = l.d_right.is_finite().then_some((l.energy, l.d_right, false));
            [left, right].into_iter().flatten()
        })
    }
}

/// Greedy construction of a scaled constellation whose boundary rates all
/// equal `t`.
///
/// Returns [`Error::Infeasible`] when a level cannot be placed below
/// [`SCALED_ENERGY_CAP`].
pub fn design_for_exponent(t: f64, side: Side, m: usize, rates: &ScaledRates) -> Result<ScaledDesign> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent must be positive (got {t})")));
    }
    let levels = side.levels(m);
    if levels == 0 {
        return Err(Error::InvalidParameter(format!("no levels for M={m}")));
    }
    let levels = match rates {
        ScaledRates::Exact(_) => greedy_exact(t, side, levels, rates)?,
        ScaledRates::FourthMoment(c) => greedy_quadratic(t, side, levels, c)?,
    };
    Ok(ScaledDesign { side, m, t, levels })
}

fn infeasible(t: f64, level: usize, what: &str) -> Error {
    Error::Infeasible {
        exponent: t,
        reason: format!("{what} of level {level} exceeds scaled energy {SCALED_ENERGY_CAP}"),
    }
}

fn greedy_exact(t: f64, side: Side, levels: usize, rates: &ScaledRates) -> Result<Vec<ScaledLevel>> {
    let mut out: Vec<ScaledLevel> = Vec::with_capacity(levels);
    // Right edge of the previous region; a two-sided design starts from a
    // virtual level at zero energy with no right deviation.
    let mut edge = 0.0;
    for m in 0..levels {
        let (energy, d_left) = if m == 0 && side == Side::One {
            (0.0, 0.0)
        } else {
            let step = 0.5 * rates.deviation_guess(edge, t).max(1e-12);
            let e = first_crossing(
                |e| rates.left(e, e - edge) - t,
                edge,
                step,
                SCALED_ENERGY_CAP,
                ROOT_REL_TOL,
            )?
            .ok_or_else(|| infeasible(t, m + 1, "energy"))?;
            (e, e - edge)
        };
        let d_right = if m + 1 == levels {
            f64::INFINITY
        } else {
            let step = 0.5 * rates.deviation_guess(energy, t).max(1e-12);
            let d = first_crossing(
                |d| rates.right(energy, d) - t,
                0.0,
                step,
                SCALED_ENERGY_CAP,
                ROOT_REL_TOL,
            )?
            .ok_or_else(|| infeasible(t, m + 1, "right deviation"))?;
            edge = energy + d;
            d
        };
        out.push(ScaledLevel { energy, d_left, d_right });
    }
    Ok(out)
}

fn greedy_quadratic(t: f64, side: Side, levels: usize, coeffs: &SVarCoefficients) -> Result<Vec<ScaledLevel>> {
    let dev = |e: f64| (2.0 * t * coeffs.eval(e)).sqrt();
    let mut out: Vec<ScaledLevel> = Vec::with_capacity(levels);
    let mut prev = 0.0;
    for m in 0..levels {
        let energy = if m == 0 && side == Side::One {
            0.0
        } else {
            let step = 0.5 * (dev(prev) + dev(prev)).max(1e-12);
            first_crossing(
                |e| (e - prev) - (dev(e) + dev(prev)),
                prev,
                step,
                SCALED_ENERGY_CAP,
                ROOT_REL_TOL,
            )?
            .ok_or_else(|| infeasible(t, m + 1, "energy"))?
        };
        let d_left = if m == 0 && side == Side::One { 0.0 } else { dev(energy) };
        let d_right = if m + 1 == levels { f64::INFINITY } else { dev(energy) };
        out.push(ScaledLevel { energy, d_left, d_right });
        prev = energy;
    }
    Ok(out)
}

/// Smallest boundary rate of a scaled design, `+∞` if it has no finite
/// boundary.
pub fn achieved_exponent(design: &ScaledDesign, rates: &ScaledRates) -> f64 {
    design
        .boundaries()
        .map(|(e, d, left)| if left { rates.left(e, d) } else { rates.right(e, d) })
        .fold(f64::INFINITY, f64::min)
}

/// Everything the optimizer needs about the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub side: Side,
    pub m: usize,
    pub case: DesignCase,
    /// Rate model at the operating noise level.
    pub model: RateModel,
    /// `E[f̃⁴]` used by the fourth-moment case.
    pub fourth_moment: f64,
}

impl Problem {
    pub fn new(side: Side, m: usize, case: DesignCase, stats: &ChannelStats, sigma_n_sq: f64) -> Result<Self> {
        Ok(Problem {
            side,
            m,
            case,
            model: RateModel::from_stats(stats, sigma_n_sq)?,
            fourth_moment: stats.fourth_moment_normalized,
        })
    }

    pub fn cap(&self) -> Result<f64> {
        energy_cap(self.side, self.m)
    }

    pub fn scaled_rates(&self, opts: &OptimizeOptions) -> Result<ScaledRates> {
        let model = match opts.scaling {
            NoiseScaling::Operating => self.model,
            NoiseScaling::Rescaled => self.model.with_noise(self.model.noise_tilde_sq / self.cap()?)?,
        };
        Ok(match self.case {
            DesignCase::Exact => ScaledRates::Exact(model),
            DesignCase::FourthMoment => {
                ScaledRates::FourthMoment(model.s_var_coefficients(self.fourth_moment, opts.coefficients)?)
            }
        })
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Stop once the exponent bracket is narrower than this.
    pub eps_t: f64,
    /// ... and the scaled average energy is within this of 1.
    pub eps_s: f64,
    pub max_iterations: usize,
    pub scaling: NoiseScaling,
    pub coefficients: CoefficientMode,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            eps_t: 1e-8,
            eps_s: 1e-6,
            max_iterations: 200,
            scaling: NoiseScaling::Operating,
            coefficients: CoefficientMode::Derived,
        }
    }
}

/// An optimized constellation in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub codebook: Codebook,
    pub regions: DecisionRegions,
    /// Equalized exponent `t*` of the scaled design.
    pub exponent: f64,
    pub case: DesignCase,
    pub scaled: ScaledDesign,
    /// Exponent evaluations used by the bisection, including the bracket
    /// search.
    pub iterations: usize,
    pub cap: f64,
    pub noise_tilde_sq: f64,
}

/// Largest exponent whose greedy design meets the average-energy budget.
pub fn optimize(problem: &Problem, opts: &OptimizeOptions) -> Result<Design> {
    if !(opts.eps_t > 0.0 && opts.eps_s > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    let cap = problem.cap()?;
    let rates = problem.scaled_rates(opts)?;
    let (side, m) = (problem.side, problem.m);

    let eval = |t: f64| -> Result<Option<ScaledDesign>> {
        match design_for_exponent(t, side, m, &rates) {
            Ok(d) if d.average() < 1.0 => Ok(Some(d)),
            Ok(_) | Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let no_convergence = || Error::NoConvergence {
        what: "exponent bisection",
        iterations: opts.max_iterations,
    };

    // t_high starts at 1 and doubles until the design no longer fits.
    let mut iterations = 1;
    let mut t_low = 0.0;
    let mut low: Option<ScaledDesign> = None;
    let mut t_high = 1.0;
    while let Some(d) = eval(t_high)? {
        t_low = t_high;
        low = Some(d);
        t_high *= 2.0;
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(no_convergence());
        }
    }

    loop {
        if let Some(d) = &low {
            if t_high - t_low < opts.eps_t && (d.average() - 1.0).abs() < opts.eps_s {
                break;
            }
        }
        let t = 0.5 * (t_low + t_high);
        if iterations >= opts.max_iterations || t <= t_low || t >= t_high {
            return Err(no_convergence());
        }
        iterations += 1;
        match eval(t)? {
            Some(d) => {
                t_low = t;
                low = Some(d);
            }
            None => t_high = t,
        }
    }
    let scaled = low.expect("loop exits with a design");
    scale_up(problem, scaled, cap, iterations)
}

fn scale_up(problem: &Problem, scaled: ScaledDesign, cap: f64, iterations: usize) -> Result<Design> {
    let noise = problem.model.noise_tilde_sq;
    let energies: Vec<f64> = scaled.levels.iter().map(|l| cap * l.energy).collect();
    let deviations: Vec<(f64, f64)> = scaled
        .levels
        .iter()
        .map(|l| (cap * l.d_left, cap * l.d_right))
        .collect();
    let regions = DecisionRegions::from_design(&energies, &deviations, noise)?;
    let codebook = Codebook::new(problem.side, problem.m, energies)?;
    Ok(Design {
        codebook,
        regions,
        exponent: scaled.t,
        case: problem.case,
        scaled,
        iterations,
        cap,
        noise_tilde_sq: noise,
    })
}
