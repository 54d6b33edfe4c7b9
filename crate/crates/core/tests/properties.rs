use num_rational::Ratio;
use proptest::prelude::*;

use ris_ask::channel::{compute_stats, ChannelConfig};
use ris_ask::constellation::{energy_cap, Codebook, Side};
use ris_ask::designer::{design_for_exponent, optimize, DesignCase, OptimizeOptions, Problem, ScaledRates};
use ris_ask::detector::{ser_upper_bound, DecisionRegions};
use ris_ask::rate::{BoundaryRates, RateModel};
use ris_ask::simulator::{
    noise_variance_for_snr, ser_monte_carlo, ser_monte_carlo_many, sweep, ChannelModel, FourthMoment, SchemeKind,
    SimConfig, SweepSpec,
};

fn side_strategy() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::One), Just(Side::Two)]
}

fn case_strategy() -> impl Strategy<Value = DesignCase> {
    prop_oneof![Just(DesignCase::Exact), Just(DesignCase::FourthMoment)]
}

fn problem(side: Side, m: usize, case: DesignCase, n: u32, snr_db: f64) -> Problem {
    let stats = compute_stats(&ChannelConfig::rayleigh(n)).unwrap();
    let sigma_n_sq = noise_variance_for_snr(snr_db, energy_cap(side, m).unwrap(), &stats).unwrap();
    Problem::new(side, m, case, &stats, sigma_n_sq).unwrap()
}

#[test]
fn traditional_average_equals_cap_in_rationals() {
    for m in [2usize, 4, 8, 16] {
        let one = Codebook::traditional(Side::One, m).unwrap();
        let sum: Ratio<i64> = one.energies().iter().map(|&e| Ratio::from_integer(e as i64)).sum();
        let mi = m as i64;
        let cap = Ratio::new(2 * (mi - 1) * (2 * mi - 1), 3);
        assert_eq!(sum / mi, cap, "one-sided M={m}");

        let two = Codebook::traditional(Side::Two, m).unwrap();
        let sum: Ratio<i64> = two.energies().iter().map(|&e| Ratio::from_integer(e as i64)).sum();
        assert_eq!(sum / (mi / 2), Ratio::new((mi + 1) * (mi + 2), 3), "two-sided M={m}");
    }
    for (side, m, cap) in [(Side::One, 4, 14.0), (Side::One, 8, 70.0), (Side::Two, 4, 10.0), (Side::Two, 8, 30.0)] {
        assert_eq!(energy_cap(side, m).unwrap(), cap);
        assert_eq!(Codebook::traditional(side, m).unwrap().average_energy(), cap);
    }
}

#[test]
fn chernoff_bound_covers_gauss_simulation() {
    let spec = SweepSpec {
        side: Side::One,
        m: 4,
        case: DesignCase::Exact,
        snr_grid: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
        n_list: vec![128],
        k1: 0.0,
        k2: 0.0,
        sigma_h_sq: 1.0,
        schemes: vec![SchemeKind::Traditional, SchemeKind::Optimal],
        sim: SimConfig {
            trials: 100_000,
            seed: 11,
            channel_model: ChannelModel::Gauss,
            snr_db: 0.0,
            workers: 2,
        },
        optimize: OptimizeOptions::default(),
        fourth_moment: FourthMoment::Gaussian,
    };
    let out = sweep(&spec).unwrap();
    assert_eq!(out.rows.len(), 12);
    for r in &out.rows {
        assert!(r.bound >= r.ser() - 3.0 * r.stderr(), "{r:?}");
    }
}

#[test]
fn exact_and_gauss_channels_agree_for_large_n() {
    let cb = Codebook::traditional(Side::One, 4).unwrap();
    for n in [128, 256] {
        for snr in [10.0, 20.0] {
            let channel = ChannelConfig::rayleigh(n);
            let stats = compute_stats(&channel).unwrap();
            let sigma = noise_variance_for_snr(snr, 14.0, &stats).unwrap();
            let regions = DecisionRegions::midpoint(cb.energies(), sigma / stats.second_moment()).unwrap();
            let cfg = |model| SimConfig {
                trials: 200_000,
                seed: 5,
                channel_model: model,
                snr_db: snr,
                workers: 2,
            };
            let e = ser_monte_carlo(&cb, &regions, &cfg(ChannelModel::Exact), &channel).unwrap();
            let g = ser_monte_carlo(&cb, &regions, &cfg(ChannelModel::Gauss), &channel).unwrap();
            let tol = 3.0 * (e.stderr.powi(2) + g.stderr.powi(2)).sqrt() + 0.1 * e.ser.max(g.ser);
            assert!((e.ser - g.ser).abs() < tol, "N={n} snr={snr}: {} vs {}", e.ser, g.ser);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_linear_in_n(n in 1u32..5000, k1 in 0.0f64..10.0, k2 in 0.0f64..10.0) {
        let a = compute_stats(&ChannelConfig::new(n, k1, k2, 1.0).unwrap()).unwrap();
        let b = compute_stats(&ChannelConfig::new(2 * n, k1, k2, 1.0).unwrap()).unwrap();
        prop_assert!((b.alpha / a.alpha - 2.0).abs() < 1e-14);
        prop_assert!((b.beta / a.beta - 2.0).abs() < 1e-14);
    }

    #[test]
    fn variance_positive_and_fourth_moment_bounded(n in 1u32..2000, k1 in 0.0f64..50.0, k2 in 0.0f64..50.0) {
        let s = compute_stats(&ChannelConfig::new(n, k1, k2, 1.0).unwrap()).unwrap();
        prop_assert!(s.beta > 0.0);
        prop_assert!((s.mu_tilde_sq() + s.sigma_tilde_sq() - 1.0).abs() < 1e-12);
        prop_assert!(s.fourth_moment_normalized >= 1.0 && s.fourth_moment_normalized <= 3.0);
    }

    #[test]
    fn rates_nonnegative_convex_and_decreasing_in_energy(
        mu in 0.05f64..0.999,
        noise in 1e-4f64..5.0,
        e1 in 0.0f64..50.0,
        de in 0.01f64..50.0,
        d1 in 0.0f64..3.0,
        gap in 0.01f64..3.0,
    ) {
        let model = RateModel::new(mu, 1.0 - mu, noise).unwrap();
        let (d3, dm) = (d1 + 2.0 * gap, d1 + gap);
        for e in [e1, e1 + de] {
            let right = |d| model.rate_right(e, d);
            prop_assert!(right(d1) >= 0.0);
            prop_assert!(right(dm) <= 0.5 * (right(d1) + right(d3)) + 1e-9 * right(d3).max(1.0));
            let left = |d| model.rate_left(e, d);
            let (l1, lm, l3) = (left(d1), left(dm), left(d3));
            prop_assert!(l1 >= 0.0);
            if l3.is_finite() {
                prop_assert!(lm <= 0.5 * (l1 + l3) + 1e-9 * l3.max(1.0));
            }
        }
        let tol = |x: f64| 1e-9 * x.abs().max(1.0);
        let (r_lo, r_hi) = (model.rate_right(e1, dm), model.rate_right(e1 + de, dm));
        prop_assert!(r_hi <= r_lo + tol(r_lo));
        let (l_lo, l_hi) = (model.rate_left(e1, dm), model.rate_left(e1 + de, dm));
        prop_assert!(l_hi <= l_lo + tol(l_hi) || l_lo.is_infinite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimal_designs_equalize_and_fill_budget(
        side in side_strategy(),
        half_m in 1usize..5,
        case in case_strategy(),
        n in prop_oneof![Just(64u32), Just(128), Just(256)],
        snr in 10.0f64..50.0,
    ) {
        let m = 2 * half_m;
        let p = problem(side, m, case, n, snr);
        let opts = OptimizeOptions::default();
        let design = optimize(&p, &opts).unwrap();
        let s = design.scaled.average();
        prop_assert!((1.0 - 1e-6..=1.0).contains(&s), "S = {s}");
        let rates = p.scaled_rates(&opts).unwrap();
        for (e, d, left) in design.scaled.boundaries() {
            let r = if left { rates.left(e, d) } else { rates.right(e, d) };
            prop_assert!((r - design.exponent).abs() < 1e-6, "rate {r} vs {}", design.exponent);
        }
        // regions tile the line and keep each center inside
        let intervals = design.regions.intervals();
        prop_assert_eq!(intervals[0].0, f64::NEG_INFINITY);
        prop_assert_eq!(intervals[intervals.len() - 1].1, f64::INFINITY);
        for w in intervals.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        for (&c, &e) in design.regions.centers().iter().zip(design.codebook.energies()) {
            prop_assert!((c - (e + p.model.noise_tilde_sq)).abs() < 1e-12 * c.max(1.0));
        }
        prop_assert!(design.codebook.average_energy() <= design.cap * (1.0 + 1e-12));
    }

    #[test]
    fn scaled_average_nondecreasing_in_exponent(
        side in side_strategy(),
        half_m in 1usize..5,
        case in case_strategy(),
        snr in 0.0f64..50.0,
        t1 in 0.001f64..5.0,
        dt in 0.0f64..5.0,
    ) {
        let p = problem(side, 2 * half_m, case, 128, snr);
        let rates: ScaledRates = p.scaled_rates(&OptimizeOptions::default()).unwrap();
        let a = design_for_exponent(t1, side, 2 * half_m, &rates);
        let b = design_for_exponent(t1 + dt, side, 2 * half_m, &rates);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(a.average() <= b.average() * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn counts_independent_of_workers(seed in any::<u64>(), trials in 1u64..40_000, workers in 2usize..5) {
        let cb = Codebook::traditional(Side::Two, 4).unwrap();
        let channel = ChannelConfig::new(16, 1.0, 0.5, 1.0).unwrap();
        let stats = compute_stats(&channel).unwrap();
        let sigma = noise_variance_for_snr(15.0, 10.0, &stats).unwrap();
        let regions = DecisionRegions::midpoint(cb.energies(), sigma / stats.second_moment()).unwrap();
        let base = SimConfig { trials, seed, channel_model: ChannelModel::Exact, snr_db: 15.0, workers: 1 };
        let one = ser_monte_carlo_many(&[(&cb, &regions)], sigma, &base, &channel).unwrap();
        let many = ser_monte_carlo_many(&[(&cb, &regions)], sigma, &SimConfig { workers, ..base }, &channel).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn symbols_are_stratified(trials in 1u64..30_000, log_m in 1u32..4, seed in any::<u64>()) {
        let m = 1usize << log_m;
        let cb = Codebook::traditional(Side::One, m).unwrap();
        // every cut sits below any statistic, so only the top symbol decodes correctly
        let centers: Vec<f64> = (0..m).map(|i| -(m as f64) + i as f64 + 0.5).collect();
        let cuts: Vec<f64> = (1..m).map(|i| -(m as f64) + i as f64).collect();
        let regions = DecisionRegions::from_boundaries(centers, cuts).unwrap();
        let cfg = SimConfig { trials, seed, channel_model: ChannelModel::Gauss, snr_db: 10.0, workers: 1 };
        let est = ser_monte_carlo(&cb, &regions, &cfg, &ChannelConfig::rayleigh(64)).unwrap();
        let top_symbol_trials = trials / m as u64;
        prop_assert_eq!(est.errors, trials - top_symbol_trials);
    }
}

#[test]
fn bound_is_a_probability() {
    let p = problem(Side::One, 4, DesignCase::Exact, 128, 20.0);
    let d = optimize(&p, &OptimizeOptions::default()).unwrap();
    let b = ser_upper_bound(&d.codebook, &d.regions, &p.model).unwrap();
    assert!(b > 0.0 && b <= 1.0);
}
