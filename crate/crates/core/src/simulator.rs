//! Monte Carlo symbol-error-rate estimation and SNR sweeps.
//!
//! Trials are split into fixed-size blocks. Block `b` draws from a ChaCha8
//! stream seeded with the run seed and positioned on stream `b`, so results
//! depend only on the seed and trial count, never on how blocks are spread
//! across workers. Trial `i` sends symbol `i mod M`, which gives every
//! symbol the same number of trials up to one.
//!
//! When several constellations are simulated together they see the same
//! channel and noise draws (common random numbers), which makes their SER
//! difference much less noisy than independent runs would.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::channel::{compute_stats, estimate_fourth_moment, ChannelConfig, ChannelStats, ExactGain};
use crate::constellation::{energy_cap, Codebook, Side};
use crate::designer::{optimize, Design, DesignCase, OptimizeOptions, Problem};
use crate::detector::{region_exponent, ser_upper_bound, DecisionRegions};
use crate::error::{Error, Result};
use crate::format::{fmt_f17, ConstellationFile, Meta};
use crate::rate::RateModel;

/// Trials per random-number block.
pub const BLOCK_TRIALS: u64 = 8192;

/// Cells with fewer errors than this are flagged as low confidence.
pub const LOW_CONFIDENCE_ERRORS: u64 = 10;

/// Composite-gain model used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    /// Sum of exact Rician magnitude products.
    #[default]
    Exact,
    /// Gaussian approximation `N(μ_f, σ_f²)`.
    Gauss,
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelModel::Exact => "exact",
            ChannelModel::Gauss => "gauss",
        })
    }
}

impl FromStr for ChannelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ChannelModel::Exact),
            "gauss" | "gaussian" => Ok(ChannelModel::Gauss),
            _ => Err(Error::InvalidParameter(format!("unknown channel model '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub channel_model: ChannelModel,
    /// Average SNR `Γ_av` in dB.
    pub snr_db: f64,
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trials: 1_000_000,
            seed: 1,
            channel_model: ChannelModel::Exact,
            snr_db: 20.0,
            workers: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be positive".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidParameter(format!("bad SNR {}", self.snr_db)));
        }
        Ok(())
    }
}

/// Simulated symbol error rate with its normal-approximation standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerEstimate {
    pub ser: f64,
    pub stderr: f64,
    pub errors: u64,
    pub trials: u64,
}

impl SerEstimate {
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        let ser = errors as f64 / trials as f64;
        SerEstimate {
            ser,
            stderr: (ser * (1.0 - ser) / trials as f64).sqrt(),
            errors,
            trials,
        }
    }

    pub fn low_confidence(&self) -> bool {
        self.errors < LOW_CONFIDENCE_ERRORS
    }
}

/// `σ_n² = (2β+α²) σ_h⁴ E_av / Γ_av` with `Γ_av = 10^{snr_db/10}`.
pub fn noise_variance_for_snr(snr_db: f64, e_av: f64, stats: &ChannelStats) -> Result<f64> {
    if !(e_av > 0.0 && e_av.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "average energy must be positive (got {e_av})"
        )));
    }
    Ok(stats.snr_gain() * e_av / 10f64.powf(snr_db / 10.0))
}

/// SNR in dB for a given noise variance; inverse of [`noise_variance_for_snr`].
pub fn snr_db_for_noise(sigma_n_sq: f64, e_av: f64, stats: &ChannelStats) -> f64 {
    10.0 * (stats.snr_gain() * e_av / sigma_n_sq).log10()
}

/// SER of one constellation at `cfg.snr_db`, with the noise set from the
/// energy budget of its size.
pub fn ser_monte_carlo(
    codebook: &Codebook,
    regions: &DecisionRegions,
    cfg: &SimConfig,
    channel: &ChannelConfig,
) -> Result<SerEstimate> {
    let stats = compute_stats(channel)?;
    let cap = energy_cap(codebook.side(), codebook.size())?;
    let sigma_n_sq = noise_variance_for_snr(cfg.snr_db, cap, &stats)?;
    Ok(ser_monte_carlo_many(&[(codebook, regions)], sigma_n_sq, cfg, channel)?[0])
}

/// Precomputed per-symbol data for one constellation.
struct Scheme<'a> {
    regions: &'a DecisionRegions,
    amplitudes: Vec<f64>,
    symbol_levels: Vec<(usize, bool)>,
}

/// SERs of several same-size constellations under common random numbers at
/// noise variance `sigma_n_sq` (`cfg.snr_db` is not used).
pub fn ser_monte_carlo_many(
    schemes: &[(&Codebook, &DecisionRegions)],
    sigma_n_sq: f64,
    cfg: &SimConfig,
    channel: &ChannelConfig,
) -> Result<Vec<SerEstimate>> {
    cfg.validate()?;
    if !(sigma_n_sq >= 0.0 && sigma_n_sq.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad noise variance {sigma_n_sq}")));
    }
    let Some((first, _)) = schemes.first() else {
        return Ok(Vec::new());
    };
    let (side, m) = (first.side(), first.size());
    let mut prepared = Vec::with_capacity(schemes.len());
    for (cb, regions) in schemes {
        if cb.side() != side || cb.size() != m {
            return Err(Error::InvalidParameter(
                "schemes simulated together must share side and M".into(),
            ));
        }
        if regions.levels() != cb.levels() {
            return Err(Error::Regions(format!(
                "{} regions for a codebook with {} levels",
                regions.levels(),
                cb.levels()
            )));
        }
        prepared.push(Scheme {
            regions,
            amplitudes: cb.symbols(),
            symbol_levels: (0..m).map(|i| cb.symbol_level(i)).collect(),
        });
    }

    let stats = compute_stats(channel)?;
    let gain = GainSampler::new(cfg.channel_model, channel, &stats)?;
    let norm = 1.0 / stats.second_moment();
    let sigma_n = sigma_n_sq.sqrt();
    let blocks = cfg.trials.div_ceil(BLOCK_TRIALS);

    let run_block = |block: u64| -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(block);
        let start = block * BLOCK_TRIALS;
        let end = (start + BLOCK_TRIALS).min(cfg.trials);
        let mut errors = vec![0u64; prepared.len()];
        for trial in start..end {
            let symbol = (trial % m as u64) as usize;
            let g = gain.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            let noise = sigma_n * z;
            for (count, s) in errors.iter_mut().zip(&prepared) {
                let y = g * s.amplitudes[symbol] + noise;
                let level = s.regions.decode(y * y * norm);
                let (sent, positive) = s.symbol_levels[symbol];
                let wrong = level != sent || (side == Side::Two && (y >= 0.0) != positive);
                *count += u64::from(wrong);
            }
        }
        errors
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start workers: {e}")))?;
    let totals = pool.install(|| {
        (0..blocks)
            .into_par_iter()
            .map(run_block)
            .reduce(
                || vec![0u64; prepared.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    });
    Ok(totals
        .into_iter()
        .map(|e| SerEstimate::from_counts(e, cfg.trials))
        .collect())
}

enum GainSampler {
    Exact(ExactGain),
    Gauss { mean: f64, sd: f64 },
}

impl GainSampler {
    fn new(model: ChannelModel, channel: &ChannelConfig, stats: &ChannelStats) -> Result<Self> {
        Ok(match model {
            ChannelModel::Exact => GainSampler::Exact(ExactGain::new(channel)?),
            ChannelModel::Gauss => GainSampler::Gauss {
                mean: stats.mu_f,
                sd: stats.sigma_f_sq.sqrt(),
            },
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            GainSampler::Exact(g) => g.sample(rng),
            GainSampler::Gauss { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
        }
    }
}

/// Constellation family simulated in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SchemeKind {
    /// Equispaced amplitudes with midpoint regions.
    #[serde(rename = "trad")]
    Traditional,
    /// Optimized design.
    #[serde(rename = "opt")]
    Optimal,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Traditional => "trad",
            SchemeKind::Optimal => "opt",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trad" | "traditional" => Ok(SchemeKind::Traditional),
            "opt" | "optimal" => Ok(SchemeKind::Optimal),
            _ => Err(Error::InvalidParameter(format!("unknown scheme '{s}'"))),
        }
    }
}

/// Where the fourth moment for the fourth-moment case comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FourthMoment {
    /// Gaussian-approximation value from the channel statistics.
    #[default]
    Gaussian,
    /// Monte Carlo estimate over this many exact channel draws.
    MonteCarlo { draws: usize },
}

/// Channel statistics for design, with the fourth moment taken from
/// `source`. Monte Carlo estimates use a stream reserved for this purpose,
/// so they never overlap the SER trials of the same seed.
pub fn design_stats(channel: &ChannelConfig, source: FourthMoment, seed: u64) -> Result<ChannelStats> {
    let stats = compute_stats(channel)?;
    Ok(match source {
        FourthMoment::Gaussian => stats,
        FourthMoment::MonteCarlo { draws } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX);
            stats.with_fourth_moment(estimate_fourth_moment(channel, draws, &mut rng)?)
        }
    })
}

/// Everything needed to run a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub side: Side,
    pub m: usize,
    pub case: DesignCase,
    pub snr_grid: Vec<f64>,
    pub n_list: Vec<u32>,
    pub k1: f64,
    pub k2: f64,
    pub sigma_h_sq: f64,
    pub schemes: Vec<SchemeKind>,
    /// Trial count, seed, channel model and workers; `snr_db` is ignored.
    pub sim: SimConfig,
    pub optimize: OptimizeOptions,
    pub fourth_moment: FourthMoment,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub n: u32,
    pub m: usize,
    pub side: Side,
    pub case: DesignCase,
    pub scheme: SchemeKind,
    pub estimate: Option<SerEstimate>,
    pub bound: f64,
    pub exponent: f64,
    pub seed: u64,
    pub trials: u64,
    /// Why the cell failed, if it did.
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn ser(&self) -> f64 {
        self.estimate.map_or(f64::NAN, |e| e.ser)
    }

    pub fn stderr(&self) -> f64 {
        self.estimate.map_or(f64::NAN, |e| e.stderr)
    }
}

pub const CSV_HEADER: &str = "snr_db,N,M,side,case,scheme,ser,stderr,bound,exponent,seed,trials";

/// Rows plus the constellations that produced them.
#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// `(file name, contents)` snapshots of every simulated constellation.
    pub snapshots: Vec<(String, ConstellationFile)>,
}

impl SweepOutput {
    pub fn failed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.failure.is_some()).count()
    }

    /// Writes the CSV: `#` comment lines, the header, one line per row, then
    /// comment lines for failed and low-confidence rows.
    pub fn write_csv<W: Write>(&self, out: &mut W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f17(r.snr_db),
                r.n,
                r.m,
                r.side,
                r.case,
                r.scheme,
                fmt_f17(r.ser()),
                fmt_f17(r.stderr()),
                fmt_f17(r.bound),
                fmt_f17(r.exponent),
                r.seed,
                r.trials
            )?;
        }
        for r in &self.rows {
            let cell = format!("snr_db={} N={} scheme={}", fmt_f17(r.snr_db), r.n, r.scheme);
            if let Some(f) = &r.failure {
                writeln!(out, "# failed: {cell}: {f}")?;
            } else if r.estimate.is_some_and(|e| e.low_confidence()) {
                writeln!(out, "# low-confidence (<{LOW_CONFIDENCE_ERRORS} errors): {cell}")?;
            }
        }
        Ok(())
    }
}

/// Snapshot file name for a sweep cell.
pub fn snapshot_name(side: Side, m: usize, n: u32, snr_db: f64, scheme: SchemeKind) -> String {
    format!("const_{side}{m}_N{n}_snr{}_{scheme}.json", fmt_f17(snr_db))
}

/// Traditional and optimal constellations for one sweep cell.
pub struct Cell {
    pub stats: ChannelStats,
    pub sigma_n_sq: f64,
    pub model: RateModel,
    pub traditional: (Codebook, DecisionRegions),
    pub optimal: Result<Design>,
}

/// Builds both constellations for one `(N, SNR)` point. The noise variance
/// comes from the energy budget so both schemes see the same SNR.
pub fn build_cell(spec: &SweepSpec, n: u32, snr_db: f64) -> Result<Cell> {
    let channel = ChannelConfig::new(n, spec.k1, spec.k2, spec.sigma_h_sq)?;
    let stats = design_stats(&channel, spec.fourth_moment, spec.sim.seed)?;
    let cap = energy_cap(spec.side, spec.m)?;
    let sigma_n_sq = noise_variance_for_snr(snr_db, cap, &stats)?;
    let model = RateModel::from_stats(&stats, sigma_n_sq)?;
    let trad = Codebook::traditional(spec.side, spec.m)?;
    let trad_regions = DecisionRegions::midpoint(trad.energies(), model.noise_tilde_sq)?;
    let optimal = Problem::new(spec.side, spec.m, spec.case, &stats, sigma_n_sq)
        .and_then(|p| optimize(&p, &spec.optimize));
    Ok(Cell {
        stats,
        sigma_n_sq,
        model,
        traditional: (trad, trad_regions),
        optimal,
    })
}

/// Runs every `(N, SNR)` cell: designs the optimal constellation at that
/// SNR, simulates the requested schemes on common random numbers and
/// evaluates the Chernoff bound of each.
pub fn sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    if spec.snr_grid.is_empty() || spec.n_list.is_empty() || spec.schemes.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one SNR, one N and one scheme".into(),
        ));
    }
    spec.sim.validate()?;
    let mut out = SweepOutput::default();
    for &n in &spec.n_list {
        for &snr_db in &spec.snr_grid {
            run_cell(spec, n, snr_db, &mut out)?;
        }
    }
    Ok(out)
}

fn run_cell(spec: &SweepSpec, n: u32, snr_db: f64, out: &mut SweepOutput) -> Result<()> {
    let row = |scheme, estimate, bound, exponent, failure| SweepRow {
        snr_db,
        n,
        m: spec.m,
        side: spec.side,
        case: spec.case,
        scheme,
        estimate,
        bound,
        exponent,
        seed: spec.sim.seed,
        trials: spec.sim.trials,
        failure,
    };
    let cell = match build_cell(spec, n, snr_db) {
        Ok(c) => c,
        Err(e) if e.is_numerical() => {
            for &s in &spec.schemes {
                out.rows.push(row(s, None, f64::NAN, f64::NAN, Some(e.to_string())));
            }
            return Ok(());
        }
        Err(e) => return Err(e),
    };

    let mut simulated: Vec<(SchemeKind, &Codebook, &DecisionRegions)> = Vec::new();
    let mut failures: Vec<(SchemeKind, String)> = Vec::new();
    for &s in &spec.schemes {
        match s {
            SchemeKind::Traditional => simulated.push((s, &cell.traditional.0, &cell.traditional.1)),
            SchemeKind::Optimal => match &cell.optimal {
                Ok(d) => simulated.push((s, &d.codebook, &d.regions)),
                Err(e) if e.is_numerical() => failures.push((s, e.to_string())),
                Err(e) => return Err(Error::InvalidParameter(e.to_string())),
            },
        }
    }

    let channel = ChannelConfig::new(n, spec.k1, spec.k2, spec.sigma_h_sq)?;
    let pairs: Vec<(&Codebook, &DecisionRegions)> = simulated.iter().map(|&(_, c, r)| (c, r)).collect();
    let estimates = ser_monte_carlo_many(&pairs, cell.sigma_n_sq, &spec.sim, &channel)?;

    for &s in &spec.schemes {
        if let Some((_, f)) = failures.iter().find(|(k, _)| *k == s) {
            out.rows.push(row(s, None, f64::NAN, f64::NAN, Some(f.clone())));
            continue;
        }
        let i = simulated.iter().position(|(k, _, _)| *k == s).expect("scheme simulated");
        let (_, cb, regions) = simulated[i];
        let bound = ser_upper_bound(cb, regions, &cell.model)?;
        let exponent = region_exponent(cb, regions, &cell.model);
        out.rows.push(row(s, Some(estimates[i]), bound, exponent, None));

        let meta = Meta {
            snr_db: Some(snr_db),
            n: Some(n),
            k1: Some(spec.k1),
            k2: Some(spec.k2),
            exponent: Some(exponent),
            case: (s == SchemeKind::Optimal).then_some(spec.case),
            noise_tilde_sq: Some(cell.model.noise_tilde_sq),
            scheme: Some(s.to_string()),
        };
        let file = match (&cell.optimal, s) {
            (Ok(d), SchemeKind::Optimal) => ConstellationFile::from_design(d, meta),
            _ => ConstellationFile {
                codebook: cb.clone(),
                regions: Some(regions.clone()),
                meta,
            },
        };
        out.snapshots
            .push((snapshot_name(spec.side, spec.m, n, snr_db, s), file));
    }
    Ok(())
}

/// Smallest grid SNR from which the optimal scheme's SER stays strictly
/// below the traditional one at every larger grid point. Rows must come
/// from a single `(N, M, side, case)` series.
pub fn crossover_snr(rows: &[SweepRow]) -> Option<f64> {
    let mut grid: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let find = |snr: f64, kind: SchemeKind| {
        rows.iter()
            .find(|r| r.snr_db == snr && r.scheme == kind)
            .map(SweepRow::ser)
    };
    let wins: Vec<bool> = grid
        .iter()
        .map(|&snr| match (find(snr, SchemeKind::Optimal), find(snr, SchemeKind::Traditional)) {
            (Some(o), Some(t)) => o < t,
            _ => false,
        })
        .collect();
    let first_of_final_run = wins.iter().rposition(|w| !w).map_or(0, |i| i + 1);
    grid.get(first_of_final_run).copied()
}
