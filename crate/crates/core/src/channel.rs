//! Composite RIS channel gain.
//!
//! With ideal RIS phases the received real part is `f·x + n_r`, where
//! `f = Σ_n |h_{1,n}||h_{2,n}|` sums the magnitude products of the two
//! Rician hops. For large `N` the gain is close to Gaussian with mean
//! `α σ_h²` and variance `β σ_h⁴`; [`compute_stats`] evaluates those moments
//! and the samplers draw either exact gains or the Gaussian surrogate.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Physical parameters of the two RIS hops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Number of RIS elements.
    pub n: u32,
    /// Rician factor of the transmitter-RIS hop.
    pub k1: f64,
    /// Rician factor of the RIS-receiver hop.
    pub k2: f64,
    /// Scattered power per element coefficient.
    pub sigma_h_sq: f64,
}

impl ChannelConfig {
    pub fn new(n: u32, k1: f64, k2: f64, sigma_h_sq: f64) -> Result<Self> {
        let cfg = ChannelConfig {
            n,
            k1,
            k2,
            sigma_h_sq,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rayleigh hops (`K1 = K2 = 0`) with unit scattered power.
    pub fn rayleigh(n: u32) -> Self {
        ChannelConfig {
            n,
            k1: 0.0,
            k2: 0.0,
            sigma_h_sq: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if !(self.k1 >= 0.0 && self.k1.is_finite()) || !(self.k2 >= 0.0 && self.k2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Rician factors must be finite and nonnegative (K1={}, K2={})",
                self.k1, self.k2
            )));
        }
        if !(self.sigma_h_sq > 0.0 && self.sigma_h_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_h^2 must be positive (got {})",
                self.sigma_h_sq
            )));
        }
        Ok(())
    }
}

/// Moments of the composite gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub alpha: f64,
    pub beta: f64,
    /// Mean of the composite gain, `α σ_h²`.
    pub mu_f: f64,
    /// Variance of the composite gain, `β σ_h⁴`.
    pub sigma_f_sq: f64,
    /// `E[f̃⁴]` of the gain normalized to unit second moment.
    pub fourth_moment_normalized: f64,
    pub sigma_h_sq: f64,
}

impl ChannelStats {
    /// `E[f²] = σ_h⁴ (α² + β)`, the energy-detector normalization.
    pub fn second_moment(&self) -> f64 {
        self.sigma_h_sq * self.sigma_h_sq * (self.alpha * self.alpha + self.beta)
    }

    /// `(2β + α²) σ_h⁴`, the factor relating symbol energy to SNR.
    pub fn snr_gain(&self) -> f64 {
        self.sigma_h_sq * self.sigma_h_sq * (2.0 * self.beta + self.alpha * self.alpha)
    }

    /// Squared mean of the unit-second-moment gain, `α²/(α²+β)`.
    pub fn mu_tilde_sq(&self) -> f64 {
        let a2 = self.alpha * self.alpha;
        a2 / (a2 + self.beta)
    }

    /// Variance of the unit-second-moment gain, `β/(α²+β)`.
    pub fn sigma_tilde_sq(&self) -> f64 {
        self.beta / (self.alpha * self.alpha + self.beta)
    }

    /// Replaces the fourth moment, e.g. with a Monte Carlo estimate from
    /// [`estimate_fourth_moment`].
    pub fn with_fourth_moment(mut self, fourth_moment_normalized: f64) -> Self {
        self.fourth_moment_normalized = fourth_moment_normalized;
        self
    }
}

/// `L_{1/2}(x)` for `x ≤ 0`, via
/// `L_{1/2}(x) = e^{x/2}[(1−x) I₀(−x/2) − x I₁(−x/2)]`.
pub fn laguerre_half(x: f64) -> Result<f64> {
    if !(x <= 0.0) {
        return Err(Error::Domain(format!(
            "laguerre_half is only evaluated on x <= 0 (got {x})"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let z = -0.5 * x;
    // e^{x/2} I_ν(z) = e^{-z} I_ν(z)
    Ok((1.0 - x) * bessel::i0e(z) - x * bessel::i1e(z))
}

/// Evaluates the composite-gain moments for a channel configuration.
pub fn compute_stats(cfg: &ChannelConfig) -> Result<ChannelStats> {
    cfg.validate()?;
    let n = f64::from(cfg.n);
    let l1 = laguerre_half(-cfg.k1)?;
    let l2 = laguerre_half(-cfg.k2)?;
    let alpha = n * PI / 4.0 * l1 * l2;
    let beta = n * ((1.0 + cfg.k1) * (1.0 + cfg.k2) - PI * PI / 16.0 * (l1 * l2).powi(2));
    let a2 = alpha * alpha;
    let mu2 = a2 / (a2 + beta);
    let var = beta / (a2 + beta);
    let fourth = mu2 * mu2 + 6.0 * mu2 * var + 3.0 * var * var;
    let sh2 = cfg.sigma_h_sq;
    Ok(ChannelStats {
        alpha,
        beta,
        mu_f: alpha * sh2,
        sigma_f_sq: beta * sh2 * sh2,
        fourth_moment_normalized: fourth,
        sigma_h_sq: sh2,
    })
}

/// Sampler for the exact composite gain `Σ_n |h_{1,n}||h_{2,n}|`.
///
/// Channel means are taken real and positive; only magnitudes enter the gain.
#[derive(Debug, Clone, Copy)]
pub struct ExactGain {
    n: u32,
    mu1: f64,
    mu2: f64,
    /// Per-component standard deviation, `σ_h/√2`.
    s: f64,
    sigma_h_sq: f64,
    rayleigh: bool,
}

impl ExactGain {
    pub fn new(cfg: &ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ExactGain {
            n: cfg.n,
            mu1: (cfg.k1 * cfg.sigma_h_sq).sqrt(),
            mu2: (cfg.k2 * cfg.sigma_h_sq).sqrt(),
            s: (0.5 * cfg.sigma_h_sq).sqrt(),
            sigma_h_sq: cfg.sigma_h_sq,
            rayleigh: cfg.k1 == 0.0 && cfg.k2 == 0.0,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.rayleigh {
            // |h|² ~ σ_h² Exp(1), so |h1||h2| = σ_h² sqrt(e1 e2).
            let mut acc = 0.0;
            for _ in 0..self.n {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                acc += (e1 * e2).sqrt();
            }
            acc * self.sigma_h_sq
        } else {
            let mut acc = 0.0;
            for _ in 0..self.n {
                let a = self.magnitude(self.mu1, rng);
                let b = self.magnitude(self.mu2, rng);
                acc += a * b;
            }
            acc
        }
    }

    fn magnitude<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64 {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        (mu + self.s * re).hypot(self.s * im)
    }
}

/// One exact draw of the composite gain. Prefer [`ExactGain`] in loops.
pub fn sample_exact_gain<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Result<f64> {
    Ok(ExactGain::new(cfg)?.sample(rng))
}

/// One draw from the Gaussian approximation `N(μ_f, σ_f²)`. Can be negative.
pub fn sample_gauss_gain<R: Rng + ?Sized>(stats: &ChannelStats, rng: &mut R) -> f64 {
    if stats.sigma_f_sq == 0.0 {
        return stats.mu_f;
    }
    let z: f64 = StandardNormal.sample(rng);
    stats.mu_f + stats.sigma_f_sq.sqrt() * z
}

/// Monte Carlo estimate of `E[f̃⁴]` for the exact channel, normalized by
/// the analytic second moment.
pub fn estimate_fourth_moment<R: Rng + ?Sized>(
    cfg: &ChannelConfig,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be positive".into()));
    }
    let stats = compute_stats(cfg)?;
    let sampler = ExactGain::new(cfg)?;
    let norm = stats.second_moment();
    let mut acc = 0.0;
    for _ in 0..draws {
        let f = sampler.sample(rng);
        let f2 = f * f / norm;
        acc += f2 * f2;
    }
    Ok(acc / draws as f64)
}

mod bessel {
    //! Exponentially scaled modified Bessel functions of orders 0 and 1.

    /// Below this the power series is used; its terms are all positive so
    /// there is no cancellation. Above it the asymptotic series error is
    /// below `e^{-2z}`.
    const SERIES_LIMIT: f64 = 30.0;

    pub(super) fn i0e(z: f64) -> f64 {
        scaled(0, z)
    }

    pub(super) fn i1e(z: f64) -> f64 {
        scaled(1, z)
    }

    fn scaled(order: u32, z: f64) -> f64 {
        debug_assert!(z >= 0.0);
        if z <= SERIES_LIMIT {
            series(order, z) * (-z).exp()
        } else {
            asymptotic(order, z)
        }
    }

    fn series(order: u32, z: f64) -> f64 {
        let nu = f64::from(order);
        let q = 0.25 * z * z;
        let mut term = if order == 0 { 1.0 } else { 0.5 * z };
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * (k + nu));
            sum += term;
            if term <= 1e-17 * sum {
                return sum;
            }
        }
    }

    fn asymptotic(order: u32, z: f64) -> f64 {
        let mu = 4.0 * f64::from(order * order);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let odd = f64::from(2 * k - 1);
            let next = -term * (mu - odd * odd) / (f64::from(k) * 8.0 * z);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * z).sqrt()
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `L_{1/2}(x) = ₁F₁(−1/2; 1; x) = Σ_k (−1/2)_k x^k / (k!)²`, truncated.
    fn laguerre_series(x: f64, terms: usize) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..terms {
            let k = k as f64;
            term *= (k - 0.5) * x / ((k + 1.0) * (k + 1.0));
            sum += term;
        }
        sum
    }

    /// `L_{1/2}(−K) = E|h| / (σ_h Γ(3/2))` for `h ~ CN(√K σ_h, σ_h²)`.
    /// The expectation is integrated in polar coordinates: trapezoid over
    /// the angle (periodic, spectrally accurate) and composite Simpson over
    /// the radius.
    fn laguerre_quadrature(k: f64) -> f64 {
        let mu = k.sqrt();
        let s2: f64 = 0.5;
        let r_max = mu + 40.0 * s2.sqrt();
        let nr = 20_000;
        let nphi = 256;
        let angular = |r: f64| -> f64 {
            let mut acc = 0.0;
            for j in 0..nphi {
                let phi = 2.0 * PI * j as f64 / nphi as f64;
                // shift the exponent so large arguments do not overflow
                acc += ((r * mu * phi.cos() - r * mu) / s2).exp();
            }
            acc / nphi as f64 * (-(r - mu).powi(2) / (2.0 * s2)).exp()
        };
        let integrand = |r: f64| r * r * angular(r) / s2;
        let h = r_max / nr as f64;
        let mut acc = integrand(0.0) + integrand(r_max);
        for i in 1..nr {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(i as f64 * h);
        }
        let mean_abs = acc * h / 3.0;
        mean_abs / (PI.sqrt() / 2.0)
    }

    #[test]
    fn laguerre_half_at_zero_is_one() {
        assert_eq!(laguerre_half(0.0).unwrap(), 1.0);
    }

    #[test]
    fn laguerre_half_matches_series() {
        for x in [-0.1, -0.5, -1.0, -2.0, -3.0] {
            let oracle = laguerre_series(x, 50);
            let got = laguerre_half(x).unwrap();
            assert!(
                ((got - oracle) / oracle).abs() < 1e-10,
                "x={x}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn laguerre_half_matches_quadrature() {
        for k in [1.0, 10.0] {
            let oracle = laguerre_quadrature(k);
            let got = laguerre_half(-k).unwrap();
            assert!(((got - oracle) / oracle).abs() < 1e-8, "K={k}: {got} vs {oracle}");
        }
    }

    #[test]
    fn laguerre_half_large_argument_tracks_sqrt_growth() {
        // L_{1/2}(−K) ~ 2 sqrt(K/π) (1 + 1/(4K) + ...) for large K
        let k = 1e4;
        let got = laguerre_half(-k).unwrap();
        let approx = 2.0 * (k / PI).sqrt() * (1.0 + 1.0 / (4.0 * k));
        assert!(((got - approx) / approx).abs() < 1e-7);
    }

    #[test]
    fn laguerre_half_rejects_positive_argument() {
        assert!(matches!(laguerre_half(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn rayleigh_closed_forms() {
        let s = compute_stats(&ChannelConfig::rayleigh(64)).unwrap();
        assert!((s.alpha - 16.0 * PI).abs() < 1e-12);
        assert!((s.beta - 4.0 * (16.0 - PI * PI)).abs() < 1e-12);
        assert!((s.beta - 24.5216).abs() < 1e-4);

        let s1 = compute_stats(&ChannelConfig::rayleigh(1)).unwrap();
        assert!((s1.mu_f - PI / 4.0).abs() < 1e-15);
        assert!((s1.sigma_f_sq - (16.0 - PI * PI) / 16.0).abs() < 1e-15);
    }

    #[test]
    fn moments_scale_with_sigma_h() {
        let s = compute_stats(&ChannelConfig::new(16, 1.0, 2.0, 2.5).unwrap()).unwrap();
        assert!((s.mu_f - s.alpha * 2.5).abs() < 1e-12);
        assert!((s.sigma_f_sq - s.beta * 6.25).abs() < 1e-12);
    }

    #[test]
    fn alpha_beta_linear_in_n() {
        for (k1, k2) in [(0.0, 0.0), (1.0, 2.0), (5.0, 0.5)] {
            let a = compute_stats(&ChannelConfig::new(37, k1, k2, 1.0).unwrap()).unwrap();
            let b = compute_stats(&ChannelConfig::new(74, k1, k2, 1.0).unwrap()).unwrap();
            assert!((b.alpha / a.alpha - 2.0).abs() < 1e-14);
            assert!((b.beta / a.beta - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_positive_on_grid() {
        let ks = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];
        for &k1 in &ks {
            for &k2 in &ks {
                let s = compute_stats(&ChannelConfig::new(1, k1, k2, 1.0).unwrap()).unwrap();
                assert!(s.beta > 0.0 && s.alpha > 0.0, "K=({k1},{k2}) beta={}", s.beta);
                assert!((1.0..=3.0).contains(&s.fourth_moment_normalized));
                assert!((s.mu_tilde_sq() + s.sigma_tilde_sq() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(ChannelConfig::new(0, 0.0, 0.0, 1.0).is_err());
        assert!(ChannelConfig::new(4, -1.0, 0.0, 1.0).is_err());
        assert!(ChannelConfig::new(4, 0.0, 0.0, 0.0).is_err());
        assert!(ChannelConfig::new(4, 0.0, f64::NAN, 1.0).is_err());
    }

    fn sample_moments(cfg: &ChannelConfig, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = ExactGain::new(cfg).unwrap();
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let f = sampler.sample(&mut rng);
            assert!(f > 0.0);
            s1 += f;
            s2 += f * f;
        }
        let mean = s1 / draws as f64;
        (mean, s2 / draws as f64 - mean * mean)
    }

    #[test]
    fn exact_sampler_single_element_mean() {
        let (mean, _) = sample_moments(&ChannelConfig::rayleigh(1), 1_000_000, 1);
        assert!((mean / (PI / 4.0) - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn exact_sampler_rayleigh_variance() {
        let cfg = ChannelConfig::rayleigh(256);
        let (_, var) = sample_moments(&cfg, 200_000, 2);
        let expected = 256.0 * (16.0 - PI * PI) / 16.0;
        assert!((var / expected - 1.0).abs() < 0.02, "var {var} vs {expected}");
    }

    #[test]
    fn exact_sampler_rician_moments() {
        let cfg = ChannelConfig::new(128, 1.0, 2.0, 1.0).unwrap();
        let stats = compute_stats(&cfg).unwrap();
        let (mean, var) = sample_moments(&cfg, 200_000, 3);
        assert!((mean / stats.mu_f - 1.0).abs() < 0.005, "mean {mean} vs {}", stats.mu_f);
        assert!((var / stats.sigma_f_sq - 1.0).abs() < 0.02, "var {var} vs {}", stats.sigma_f_sq);
    }

    #[test]
    fn gauss_sampler_degenerate_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut stats = compute_stats(&ChannelConfig::rayleigh(8)).unwrap();
        stats.sigma_f_sq = 0.0;
        assert_eq!(sample_gauss_gain(&stats, &mut rng), stats.mu_f);

        let stats = compute_stats(&ChannelConfig::rayleigh(8)).unwrap();
        let draws = 1_000_000;
        let mean = (0..draws).map(|_| sample_gauss_gain(&stats, &mut rng)).sum::<f64>() / draws as f64;
        let se = (stats.sigma_f_sq / draws as f64).sqrt();
        assert!((mean - stats.mu_f).abs() < 3.0 * se);
    }

    #[test]
    fn gaussian_approximation_ks_distance() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let cfg = ChannelConfig::rayleigh(256);
        let stats = compute_stats(&cfg).unwrap();
        let sampler = ExactGain::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let normal = Normal::new(stats.mu_f, stats.sigma_f_sq.sqrt()).unwrap();
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = normal.cdf(x);
                (c - i as f64 / n as f64).abs().max((c - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn fourth_moment_gaussian_value_close_to_exact_estimate() {
        let cfg = ChannelConfig::rayleigh(128);
        let stats = compute_stats(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let est = estimate_fourth_moment(&cfg, 100_000, &mut rng).unwrap();
        assert!((est - stats.fourth_moment_normalized).abs() < 5e-3, "{est}");
    }
}
