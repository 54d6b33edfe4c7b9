use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{
    config_lines, parse_snr_grid, Command, CompareArgs, MomentsArgs, OptimizeArgs, SimArgs, SimulateArgs, SweepArgs,
    EXIT_NUMERICAL, EXIT_OK, EXIT_PARTIAL,
};
use crate::channel::{compute_stats, ChannelConfig, ExactGain};
use crate::constellation::energy_cap;
use crate::designer::{optimize, Problem};
use crate::detector::{region_exponent, ser_upper_bound, DecisionRegions};
use crate::error::{Error, Result};
use crate::format::{fmt_f17, ConstellationFile, Meta};
use crate::rate::{BoundaryRates, RateModel};
use crate::simulator::{
    build_cell, crossover_snr, design_stats, noise_variance_for_snr, ser_monte_carlo_many, snapshot_name, sweep,
    SchemeKind, SimConfig, SweepOutput, SweepRow, SweepSpec,
};

/// Relative tolerances of `moments --validate` on the mean and variance.
const VALIDATE_MEAN_TOL: f64 = 0.01;
const VALIDATE_VAR_TOL: f64 = 0.03;

pub(super) fn dispatch(command: Command, config: Option<&str>) -> Result<i32> {
    match command {
        Command::Moments(a) => moments(&a, config),
        Command::Optimize(a) => optimize_cmd(&a, config),
        Command::Simulate(a) => simulate(&a, config),
        Command::Sweep(a) => sweep_cmd(&a, config),
        Command::CompareConstellations(a) => compare(&a, config),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn header(out: &mut dyn Write, lines: &[String]) -> Result<()> {
    for l in lines {
        writeln!(out, "# {l}")?;
    }
    Ok(())
}

fn sim_config(sim: &SimArgs, snr_db: f64) -> SimConfig {
    SimConfig {
        trials: sim.trials,
        seed: sim.seed,
        channel_model: sim.channel_model,
        snr_db,
        workers: sim.workers,
    }
}

fn moments(a: &MomentsArgs, config: Option<&str>) -> Result<i32> {
    let channel = ChannelConfig::new(a.n, a.channel.k1, a.channel.k2, a.channel.sigma_h_sq)?;
    let stats = compute_stats(&channel)?;
    let e_av = energy_cap(a.modulation.side, a.modulation.m)?;
    let sigma_n_sq = noise_variance_for_snr(a.snr, e_av, &stats)?;
    let model = RateModel::from_stats(&stats, sigma_n_sq)?;

    let mut out = sink(None)?;
    header(&mut out, &config_lines("moments", a, config))?;
    let rows = [
        ("alpha", stats.alpha),
        ("beta", stats.beta),
        ("mu_f", stats.mu_f),
        ("sigma_f_sq", stats.sigma_f_sq),
        ("mu_tilde_sq", model.mu_tilde_sq),
        ("sigma_tilde_sq", model.sigma_tilde_sq),
        ("fourth_moment", stats.fourth_moment_normalized),
        ("E_av", e_av),
        ("sigma_n_sq", sigma_n_sq),
        ("noise_tilde_sq", model.noise_tilde_sq),
    ];
    for (k, v) in rows {
        writeln!(out, "{k} = {}", fmt_f17(v))?;
    }
    if !a.validate {
        return Ok(EXIT_OK);
    }

    let gain = ExactGain::new(&channel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let norm = 1.0 / stats.second_moment();
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for _ in 0..a.trials {
        let f = gain.sample(&mut rng);
        let c = f - stats.mu_f;
        let q = f * f * norm;
        s1 += c;
        s2 += c * c;
        s4 += q * q;
    }
    let n = a.trials as f64;
    let mean = stats.mu_f + s1 / n;
    let var = s2 / n - (s1 / n).powi(2);
    let fourth = s4 / n;
    let rel = |est: f64, exact: f64| (est - exact).abs() / exact.abs();
    let (r_mean, r_var, r_fourth) = (
        rel(mean, stats.mu_f),
        rel(var, stats.sigma_f_sq),
        rel(fourth, stats.fourth_moment_normalized),
    );
    let checks = [
        ("mc_mu_f", mean),
        ("rel_err_mu_f", r_mean),
        ("mc_sigma_f_sq", var),
        ("rel_err_sigma_f_sq", r_var),
        ("mc_fourth_moment", fourth),
        ("rel_err_fourth_moment", r_fourth),
    ];
    for (k, v) in checks {
        writeln!(out, "{k} = {}", fmt_f17(v))?;
    }
    let pass = r_mean < VALIDATE_MEAN_TOL && r_var < VALIDATE_VAR_TOL;
    writeln!(
        out,
        "validation = {} (mean within {VALIDATE_MEAN_TOL}, variance within {VALIDATE_VAR_TOL})",
        if pass { "pass" } else { "fail" }
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_NUMERICAL })
}

fn optimize_cmd(a: &OptimizeArgs, config: Option<&str>) -> Result<i32> {
    let (side, m) = (a.modulation.side, a.modulation.m);
    let channel = ChannelConfig::new(a.n, a.channel.k1, a.channel.k2, a.channel.sigma_h_sq)?;
    let stats = design_stats(&channel, a.optimizer.fourth_moment(), a.seed)?;
    let cap = energy_cap(side, m)?;
    let sigma_n_sq = noise_variance_for_snr(a.snr, cap, &stats)?;
    let problem = Problem::new(side, m, a.optimizer.case, &stats, sigma_n_sq)?;
    let opts = a.optimizer.options();
    let design = optimize(&problem, &opts)?;
    let rates = problem.scaled_rates(&opts)?;

    let path = a
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(snapshot_name(side, m, a.n, a.snr, SchemeKind::Optimal)));
    let meta = Meta {
        snr_db: Some(a.snr),
        n: Some(a.n),
        k1: Some(a.channel.k1),
        k2: Some(a.channel.k2),
        scheme: Some(SchemeKind::Optimal.to_string()),
        ..Meta::default()
    };
    ConstellationFile::from_design(&design, meta).write(&path)?;

    let mut out = sink(None)?;
    header(&mut out, &config_lines("optimize", a, config))?;
    writeln!(out, "output = {}", path.display())?;
    writeln!(out, "case = {}", design.case)?;
    writeln!(out, "exponent = {}", fmt_f17(design.exponent))?;
    writeln!(out, "iterations = {}", design.iterations)?;
    writeln!(out, "average_energy = {}", fmt_f17(design.codebook.average_energy()))?;
    writeln!(out, "energy_cap = {}", fmt_f17(cap))?;
    writeln!(out, "scaled_average = {}", fmt_f17(design.scaled.average()))?;
    for (i, ((&e, (lo, hi)), l)) in design
        .codebook
        .energies()
        .iter()
        .zip(design.regions.intervals())
        .zip(&design.scaled.levels)
        .enumerate()
    {
        writeln!(
            out,
            "level {}: energy = {} amplitude = {} region = ({}, {}] scaled_energy = {}",
            i + 1,
            fmt_f17(e),
            fmt_f17(e.sqrt()),
            fmt_f17(lo),
            fmt_f17(hi),
            fmt_f17(l.energy)
        )?;
    }
    let mut worst: f64 = 0.0;
    for (e, d, left) in design.scaled.boundaries() {
        let rate = if left { rates.left(e, d) } else { rates.right(e, d) };
        worst = worst.max((rate - design.exponent).abs());
        writeln!(
            out,
            "audit: scaled_energy = {} {} deviation = {} rate = {}",
            fmt_f17(e),
            if left { "left" } else { "right" },
            fmt_f17(d),
            fmt_f17(rate)
        )?;
    }
    writeln!(out, "audit: max |rate - exponent| = {}", fmt_f17(worst))?;
    Ok(EXIT_OK)
}

fn sweep_spec(
    a_mod: &super::ModulationArgs,
    a_chan: &super::ChannelArgs,
    opt: &super::OptimizerArgs,
    sim: &SimArgs,
    n_list: Vec<u32>,
    snr_grid: Vec<f64>,
    schemes: Vec<SchemeKind>,
) -> SweepSpec {
    SweepSpec {
        side: a_mod.side,
        m: a_mod.m,
        case: opt.case,
        snr_grid,
        n_list,
        k1: a_chan.k1,
        k2: a_chan.k2,
        sigma_h_sq: a_chan.sigma_h_sq,
        schemes,
        sim: sim_config(sim, 0.0),
        optimize: opt.options(),
        fourth_moment: opt.fourth_moment(),
    }
}

fn sweep_exit(out: &SweepOutput) -> i32 {
    match out.failed_cells() {
        0 => EXIT_OK,
        f if f == out.rows.len() => EXIT_NUMERICAL,
        _ => EXIT_PARTIAL,
    }
}

fn write_snapshots(out: &SweepOutput, dir: Option<&Path>) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        for (name, file) in &out.snapshots {
            file.write(&dir.join(name))?;
        }
    }
    Ok(())
}

fn sweep_cmd(a: &SweepArgs, config: Option<&str>) -> Result<i32> {
    let grid = parse_snr_grid(&a.snr)?;
    let spec = sweep_spec(
        &a.modulation,
        &a.channel,
        &a.optimizer,
        &a.sim,
        a.n.clone(),
        grid,
        a.schemes.clone(),
    );
    let result = sweep(&spec)?;
    write_snapshots(&result, a.snapshots.as_deref())?;
    let mut out = sink(a.output.as_deref())?;
    result.write_csv(&mut out, &config_lines("sweep", a, config))?;
    if a.crossover {
        for &n in &a.n {
            let rows: Vec<SweepRow> = result.rows.iter().filter(|r| r.n == n).cloned().collect();
            let c = crossover_snr(&rows).map_or_else(|| "none".to_string(), fmt_f17);
            writeln!(out, "# crossover N={n} snr_db={c}")?;
        }
    }
    out.flush()?;
    Ok(sweep_exit(&result))
}

fn simulate(a: &SimulateArgs, config: Option<&str>) -> Result<i32> {
    let Some(input) = &a.input else {
        let spec = sweep_spec(
            &a.modulation,
            &a.channel,
            &a.optimizer,
            &a.sim,
            vec![a.n],
            vec![a.snr],
            a.schemes.clone(),
        );
        let result = sweep(&spec)?;
        let mut out = sink(a.output.as_deref())?;
        result.write_csv(&mut out, &config_lines("simulate", a, config))?;
        out.flush()?;
        return Ok(sweep_exit(&result));
    };

    let file = ConstellationFile::read(input)?;
    let cb = &file.codebook;
    let channel = ChannelConfig::new(a.n, a.channel.k1, a.channel.k2, a.channel.sigma_h_sq)?;
    let stats = compute_stats(&channel)?;
    let cap = energy_cap(cb.side(), cb.size())?;
    let sigma_n_sq = noise_variance_for_snr(a.snr, cap, &stats)?;
    let model = RateModel::from_stats(&stats, sigma_n_sq)?;
    let regions = match &file.regions {
        Some(r) => r.clone(),
        None => DecisionRegions::midpoint(cb.energies(), model.noise_tilde_sq)?,
    };
    let est = ser_monte_carlo_many(&[(cb, &regions)], sigma_n_sq, &sim_config(&a.sim, a.snr), &channel)?[0];
    let scheme = match (&file.meta.scheme, file.meta.case) {
        (Some(s), _) => s.parse()?,
        (None, Some(_)) => SchemeKind::Optimal,
        (None, None) => SchemeKind::Traditional,
    };
    let row = SweepRow {
        snr_db: a.snr,
        n: a.n,
        m: cb.size(),
        side: cb.side(),
        case: file.meta.case.unwrap_or(a.optimizer.case),
        scheme,
        estimate: Some(est),
        bound: ser_upper_bound(cb, &regions, &model)?,
        exponent: region_exponent(cb, &regions, &model),
        seed: a.sim.seed,
        trials: a.sim.trials,
        failure: None,
    };
    let result = SweepOutput {
        rows: vec![row],
        snapshots: Vec::new(),
    };
    let mut out = sink(a.output.as_deref())?;
    result.write_csv(&mut out, &config_lines("simulate", a, config))?;
    out.flush()?;
    Ok(EXIT_OK)
}

pub const COMPARE_HEADER: &str = "side,M,N,snr_db,case,scheme,level,energy,amplitude,region_lo,region_hi,exponent";

fn compare(a: &CompareArgs, config: Option<&str>) -> Result<i32> {
    let grid = parse_snr_grid(&a.snr)?;
    let mut out = sink(a.output.as_deref())?;
    header(&mut out, &config_lines("compare-constellations", a, config))?;
    writeln!(out, "{COMPARE_HEADER}")?;
    let (mut cells, mut failed) = (0usize, 0usize);
    let mut notes = Vec::new();
    for &m in &a.m {
        for &n in &a.n {
            for &snr in &grid {
                let sim = SimArgs {
                    trials: 1,
                    seed: a.seed,
                    channel_model: Default::default(),
                    workers: 1,
                };
                let modulation = super::ModulationArgs { side: a.side, m };
                let spec = sweep_spec(&modulation, &a.channel, &a.optimizer, &sim, vec![n], vec![snr], vec![]);
                let cell = build_cell(&spec, n, snr)?;
                cells += 1;
                let mut tables = vec![(SchemeKind::Traditional, cell.traditional.0.clone(), cell.traditional.1.clone())];
                match &cell.optimal {
                    Ok(d) => tables.push((SchemeKind::Optimal, d.codebook.clone(), d.regions.clone())),
                    Err(e) if e.is_numerical() => {
                        failed += 1;
                        notes.push(format!("failed: M={m} N={n} snr_db={}: {e}", fmt_f17(snr)));
                    }
                    Err(e) => return Err(Error::InvalidParameter(e.to_string())),
                }
                for (scheme, cb, regions) in &tables {
                    let exponent = region_exponent(cb, regions, &cell.model);
                    let case = if *scheme == SchemeKind::Optimal { a.optimizer.case.to_string() } else { String::new() };
                    for (level, (&e, (lo, hi))) in cb.energies().iter().zip(regions.intervals()).enumerate() {
                        writeln!(
                            out,
                            "{},{m},{n},{},{case},{scheme},{},{},{},{},{},{}",
                            a.side,
                            fmt_f17(snr),
                            level + 1,
                            fmt_f17(e),
                            fmt_f17(e.sqrt()),
                            fmt_f17(lo),
                            fmt_f17(hi),
                            fmt_f17(exponent)
                        )?;
                    }
                }
            }
        }
    }
    for note in notes {
        writeln!(out, "# {note}")?;
    }
    out.flush()?;
    Ok(match failed {
        0 => EXIT_OK,
        f if f == cells => EXIT_NUMERICAL,
        _ => EXIT_PARTIAL,
    })
}
