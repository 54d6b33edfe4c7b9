//! Large-deviation rate functions of the centered energy statistic.
//!
//! For a symbol of energy `E` the normalized detector statistic is
//! `T = (f̃ √E + ñ)²` with `f̃` the unit-second-moment channel gain and
//! `ñ ~ N(0, σ̃_n²)`. Its centered version `u = T − (E + σ̃_n²)` has left and
//! right rate functions
//!
//! ```text
//! I_l(d) = sup_{θ≥0} θd − log M(−θ),   I_r(d) = sup_{θ≥0} θd − log M(θ)
//! ```
//!
//! Under the Gaussian model of the gain, `f̃ √E + ñ` is Gaussian and `T` is a
//! scaled noncentral chi-square with one degree of freedom, so `log M` has a
//! closed form. The supremum is found numerically by [`legendre`].

use crate::channel::ChannelStats;
use crate::error::{Error, Result};

/// Parameters of the normalized statistic under the Gaussian gain model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    /// `α²/(α²+β)`.
    pub mu_tilde_sq: f64,
    /// `β/(α²+β)`.
    pub sigma_tilde_sq: f64,
    /// Normalized noise variance `σ̃_n² = σ_n²/(σ_h⁴(α²+β))`.
    pub noise_tilde_sq: f64,
}

impl RateModel {
    pub fn new(mu_tilde_sq: f64, sigma_tilde_sq: f64, noise_tilde_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu_tilde_sq) || !(0.0..=1.0).contains(&sigma_tilde_sq) {
            return Err(Error::InvalidParameter(format!(
                "normalized moments must lie in [0,1] (got {mu_tilde_sq}, {sigma_tilde_sq})"
            )));
        }
        if (mu_tilde_sq + sigma_tilde_sq - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "normalized gain must have unit second moment (got {})",
                mu_tilde_sq + sigma_tilde_sq
            )));
        }
        if !(noise_tilde_sq > 0.0 && noise_tilde_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "normalized noise variance must be positive (got {noise_tilde_sq})"
            )));
        }
        Ok(RateModel {
            mu_tilde_sq,
            sigma_tilde_sq,
            noise_tilde_sq,
        })
    }

    /// Model for a channel with physical noise variance `σ_n²`.
    pub fn from_stats(stats: &ChannelStats, sigma_n_sq: f64) -> Result<Self> {
        RateModel::new(
            stats.mu_tilde_sq(),
            stats.sigma_tilde_sq(),
            sigma_n_sq / stats.second_moment(),
        )
    }

    pub fn with_noise(&self, noise_tilde_sq: f64) -> Result<Self> {
        RateModel::new(self.mu_tilde_sq, self.sigma_tilde_sq, noise_tilde_sq)
    }

    /// Receiver constellation point `r(E) = E + σ̃_n²`.
    pub fn center(&self, energy: f64) -> f64 {
        energy + self.noise_tilde_sq
    }

    fn statistic(&self, energy: f64) -> NoncentralSquare {
        NoncentralSquare {
            mean_sq: self.mu_tilde_sq * energy,
            var: self.sigma_tilde_sq * energy + self.noise_tilde_sq,
        }
    }

    /// Largest `θ` for which `M(θ)` is finite (exclusive).
    pub fn theta_max(&self, energy: f64) -> f64 {
        0.5 / self.statistic(energy).var
    }

    pub fn log_mgf(&self, energy: f64, theta: f64) -> Result<f64> {
        let stat = self.statistic(energy);
        if theta >= 0.5 / stat.var {
            return Err(Error::Domain(format!(
                "MGF diverges at theta={theta} (theta_max={})",
                0.5 / stat.var
            )));
        }
        Ok(stat.eval(theta).value)
    }

    /// `M(θ) = E[e^{θu}]`.
    pub fn mgf(&self, energy: f64, theta: f64) -> Result<f64> {
        self.log_mgf(energy, theta).map(f64::exp)
    }

    /// `E[u²]` under this model.
    pub fn variance(&self, energy: f64) -> f64 {
        self.statistic(energy).variance()
    }

    /// Right rate function `I_r(d)`; zero for `d ≤ 0`.
    pub fn rate_right(&self, energy: f64, d: f64) -> f64 {
        let stat = self.statistic(energy);
        legendre::sup(&stat, legendre::Tail::Right, d)
    }

    /// Left rate function `I_l(d)`; `+∞` once `d` reaches the support edge
    /// `E + σ̃_n²` (the statistic cannot go negative).
    pub fn rate_left(&self, energy: f64, d: f64) -> f64 {
        let stat = self.statistic(energy);
        legendre::sup(&stat, legendre::Tail::Left, d)
    }

    /// Coefficients of `s(E) = E[u²] = a1 E² + a2 E + a3`.
    pub fn s_var_coefficients(
        &self,
        fourth_moment_normalized: f64,
        mode: CoefficientMode,
    ) -> Result<SVarCoefficients> {
        if !(fourth_moment_normalized >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fourth moment of a unit-second-moment gain must be >= 1 (got {fourth_moment_normalized})"
            )));
        }
        let n2 = self.noise_tilde_sq;
        let (a2, a3) = match mode {
            CoefficientMode::Derived => (4.0 * n2, 2.0 * n2 * n2),
            CoefficientMode::Published => (2.0 * n2, n2 * n2),
        };
        Ok(SVarCoefficients {
            a1: fourth_moment_normalized - 1.0,
            a2,
            a3,
        })
    }

    /// `s(E)` evaluated directly.
    pub fn s_var(
        &self,
        fourth_moment_normalized: f64,
        energy: f64,
        mode: CoefficientMode,
    ) -> Result<f64> {
        Ok(self
            .s_var_coefficients(fourth_moment_normalized, mode)?
            .eval(energy))
    }
}

/// Which linear and constant coefficients to use in `s(E)`.
///
/// `Derived` expands `Var((f̃√E + ñ)²)` directly and gives `4σ̃_n² E + 2σ̃_n⁴`;
/// `Published` keeps the published `2σ̃_n² E + σ̃_n⁴` for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientMode {
    #[default]
    Derived,
    Published,
}

/// `s(E) = a1 E² + a2 E + a3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SVarCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl SVarCoefficients {
    pub fn eval(&self, energy: f64) -> f64 {
        (self.a1 * energy + self.a2) * energy + self.a3
    }
}

/// Quadratic approximation `d²/(2 s(E))` of both rate functions.
pub fn rate_approx(coeffs: &SVarCoefficients, energy: f64, d: f64) -> f64 {
    d * d / (2.0 * coeffs.eval(energy))
}

/// Left/right rate evaluator used by the constellation designer.
pub trait BoundaryRates {
    fn left(&self, energy: f64, d: f64) -> f64;
    fn right(&self, energy: f64, d: f64) -> f64;
}

impl BoundaryRates for RateModel {
    fn left(&self, energy: f64, d: f64) -> f64 {
        self.rate_left(energy, d)
    }
    fn right(&self, energy: f64, d: f64) -> f64 {
        self.rate_right(energy, d)
    }
}

impl BoundaryRates for SVarCoefficients {
    fn left(&self, energy: f64, d: f64) -> f64 {
        rate_approx(self, energy, d.max(0.0))
    }
    fn right(&self, energy: f64, d: f64) -> f64 {
        rate_approx(self, energy, d.max(0.0))
    }
}

/// Cumulant generating function `Λ(θ) = log E[e^{θu}]` of a centered
/// variable, with its first two derivatives.
pub trait Cumulant {
    fn eval(&self, theta: f64) -> CumulantValue;
    /// Supremum of the domain of `Λ` (exclusive); may be `+∞`.
    fn theta_max(&self) -> f64;
    /// Infimum of the domain of `Λ` (exclusive); may be `−∞`.
    fn theta_min(&self) -> f64;
    /// Essential infimum of `u` (nonpositive, possibly `−∞`).
    fn lower_support(&self) -> f64;
    /// Essential supremum of `u` (nonnegative, possibly `+∞`).
    fn upper_support(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct CumulantValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// `u = v² − E[v²]` for `v ~ N(m, s²)`, parameterized by `m²` and `s²`.
#[derive(Debug, Clone, Copy)]
struct NoncentralSquare {
    mean_sq: f64,
    var: f64,
}

impl NoncentralSquare {
    fn variance(&self) -> f64 {
        2.0 * self.var * self.var + 4.0 * self.mean_sq * self.var
    }
}

impl Cumulant for NoncentralSquare {
    fn eval(&self, theta: f64) -> CumulantValue {
        // With x = 2θs², w = 1 − x:
        //   Λ  = −½(log(1−x) + x) + 2θ² s² m² / w
        //   Λ' = s² x / w + m² x (2 − x) / w²
        //   Λ''= 2 s⁴ / w² + 4 s² m² / w³
        // The linear terms cancel analytically, which keeps small-θ values
        // accurate.
        let (m2, s2) = (self.mean_sq, self.var);
        let x = 2.0 * theta * s2;
        let w = 1.0 - x;
        if w <= 0.0 {
            return CumulantValue {
                value: f64::INFINITY,
                d1: f64::INFINITY,
                d2: f64::INFINITY,
            };
        }
        CumulantValue {
            value: -0.5 * ((-x).ln_1p() + x) + 2.0 * theta * theta * s2 * m2 / w,
            d1: s2 * x / w + m2 * x * (2.0 - x) / (w * w),
            d2: 2.0 * s2 * s2 / (w * w) + 4.0 * s2 * m2 / (w * w * w),
        }
    }

    fn theta_max(&self) -> f64 {
        0.5 / self.var
    }

    fn theta_min(&self) -> f64 {
        f64::NEG_INFINITY
    }

    fn lower_support(&self) -> f64 {
        -(self.mean_sq + self.var)
    }

    fn upper_support(&self) -> f64 {
        f64::INFINITY
    }
}

/// Cumulant generating function of an empirical sample, for validating the
/// Gaussian model against exact channel draws.
#[derive(Debug, Clone)]
pub struct EmpiricalCumulant {
    centered: Vec<f64>,
    min: f64,
    max: f64,
}

impl EmpiricalCumulant {
    /// Centers the samples at their mean.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(
                "empirical cumulant needs at least two samples".into(),
            ));
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
        let min = centered.iter().copied().fold(f64::INFINITY, f64::min);
        let max = centered.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(EmpiricalCumulant { centered, min, max })
    }

    pub fn rate_right(&self, d: f64) -> f64 {
        legendre::sup(self, legendre::Tail::Right, d)
    }

    pub fn rate_left(&self, d: f64) -> f64 {
        legendre::sup(self, legendre::Tail::Left, d)
    }
}

impl Cumulant for EmpiricalCumulant {
    fn eval(&self, theta: f64) -> CumulantValue {
        let shift = if theta >= 0.0 { theta * self.max } else { theta * self.min };
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &u in &self.centered {
            let w = (theta * u - shift).exp();
            s0 += w;
            s1 += w * u;
            s2 += w * u * u;
        }
        let mean = s1 / s0;
        CumulantValue {
            value: shift + (s0 / self.centered.len() as f64).ln(),
            d1: mean,
            d2: (s2 / s0 - mean * mean).max(0.0),
        }
    }

    fn theta_max(&self) -> f64 {
        f64::INFINITY
    }

    fn theta_min(&self) -> f64 {
        f64::NEG_INFINITY
    }

    fn lower_support(&self) -> f64 {
        self.min
    }

    fn upper_support(&self) -> f64 {
        self.max
    }
}

pub mod legendre {
    //! One-sided Legendre transform `sup_{θ≥0} θd − K(θ)` of a convex
    //! cumulant with `K(0) = K'(0) = 0`.
    //!
    //! The objective is concave, so the maximizer solves `K'(θ) = d`. That
    //! root is bracketed (expanding the upper end when the domain is
    //! unbounded) and refined with Newton steps, falling back to bisection
    //! whenever a step leaves the bracket. If Newton stalls, golden-section
    //! search on the objective finishes the job.

    use super::Cumulant;

    const MAX_NEWTON: usize = 200;
    const THETA_TOL: f64 = 1e-12;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Tail {
        /// `sup θd − Λ(θ)`
        Right,
        /// `sup θd − Λ(−θ)`
        Left,
    }

    struct Oriented<'a, C: Cumulant + ?Sized> {
        inner: &'a C,
        tail: Tail,
    }

    impl<C: Cumulant + ?Sized> Oriented<'_, C> {
        fn eval(&self, theta: f64) -> (f64, f64, f64) {
            match self.tail {
                Tail::Right => {
                    let v = self.inner.eval(theta);
                    (v.value, v.d1, v.d2)
                }
                Tail::Left => {
                    let v = self.inner.eval(-theta);
                    (v.value, -v.d1, v.d2)
                }
            }
        }

        fn theta_limit(&self) -> f64 {
            match self.tail {
                Tail::Right => self.inner.theta_max(),
                Tail::Left => -self.inner.theta_min(),
            }
        }

        fn support_edge(&self) -> f64 {
            match self.tail {
                Tail::Right => self.inner.upper_support(),
                Tail::Left => -self.inner.lower_support(),
            }
        }

        fn objective(&self, theta: f64, d: f64) -> f64 {
            theta * d - self.eval(theta).0
        }
    }

    /// `sup_{θ≥0} θd − K(θ)` where `K` is the cumulant oriented for `tail`.
    /// Returns 0 for `d ≤ 0` and `+∞` for deviations at or beyond the support.
    pub fn sup<C: Cumulant + ?Sized>(cumulant: &C, tail: Tail, d: f64) -> f64 {
        if d.is_nan() {
            return f64::NAN;
        }
        if d <= 0.0 {
            return 0.0;
        }
        let k = Oriented {
            inner: cumulant,
            tail,
        };
        if d >= k.support_edge() {
            return f64::INFINITY;
        }

        let limit = k.theta_limit();
        let (mut lo, mut hi) = (0.0, limit);
        let mut theta;
        if limit.is_finite() {
            theta = 0.5 * limit;
        } else {
            // expand until K'(hi) ≥ d
            let curvature = k.eval(0.0).2;
            let mut probe = if curvature > 0.0 { d / curvature } else { 1.0 };
            loop {
                let slope = k.eval(probe).1;
                if slope >= d {
                    hi = probe;
                    break;
                }
                lo = probe;
                probe *= 2.0;
                if !probe.is_finite() {
                    return f64::INFINITY;
                }
            }
            theta = hi;
        }

        for _ in 0..MAX_NEWTON {
            let (_, d1, d2) = k.eval(theta);
            let g = d1 - d;
            if g == 0.0 {
                return k.objective(theta, d).max(0.0);
            }
            if g < 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            let mut next = theta - g / d2;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - theta).abs();
            theta = next;
            if step <= THETA_TOL * theta.max(1.0) || hi - lo <= THETA_TOL * hi.max(1.0) {
                return k.objective(theta, d).max(0.0);
            }
        }

        let hi = if hi.is_finite() && hi < limit {
            hi
        } else {
            lo + 0.999 * (limit - lo)
        };
        let theta = golden_section_max(|t| k.objective(t, d), lo, hi, THETA_TOL);
        k.objective(theta, d).max(0.0)
    }

    /// Maximizer of a unimodal function on `[a, b]`.
    pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut dd = a + inv_phi * (b - a);
        let mut fc = f(c);
        let mut fd = f(dd);
        for _ in 0..500 {
            if (b - a).abs() <= tol * b.abs().max(1.0) {
                break;
            }
            if fc > fd {
                b = dd;
                dd = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = dd;
                fc = fd;
                dd = a + inv_phi * (b - a);
                fd = f(dd);
            }
        }
        0.5 * (a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{compute_stats, ChannelConfig};

    fn model_128(noise: f64) -> RateModel {
        let stats = compute_stats(&ChannelConfig::rayleigh(128)).unwrap();
        RateModel::new(stats.mu_tilde_sq(), stats.sigma_tilde_sq(), noise).unwrap()
    }

    /// Closed-form maximizer: the stationarity condition is a quadratic in
    /// `w = 1 ∓ 2θs²`.
    fn closed_form(model: &RateModel, e: f64, d: f64, left: bool) -> f64 {
        let m2 = model.mu_tilde_sq * e;
        let s2 = model.sigma_tilde_sq * e + model.noise_tilde_sq;
        let c = e + model.noise_tilde_sq;
        let a = if left { c - d } else { c + d };
        if a <= 0.0 {
            return f64::INFINITY;
        }
        let w = (s2 + (s2 * s2 + 4.0 * a * m2).sqrt()) / (2.0 * a);
        let theta = if left { (w - 1.0) / (2.0 * s2) } else { (1.0 - w) / (2.0 * s2) };
        let signed = if left { -theta } else { theta };
        let log_m = -signed * c - 0.5 * w.ln() + signed * m2 / w;
        theta * d - log_m
    }

    /// Dense grid maximization of `θd − log M(±θ)`.
    fn grid_sup(model: &RateModel, e: f64, d: f64, left: bool, theta_hi: f64, points: usize) -> f64 {
        (1..points)
            .map(|i| theta_hi * i as f64 / points as f64)
            .map(|t| {
                let signed = if left { -t } else { t };
                t * d - model.log_mgf(e, signed).unwrap()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn mgf_at_origin_is_one() {
        let m = model_128(0.3);
        for e in [0.0, 1.0, 10.0] {
            assert!((m.mgf(e, 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mgf_central_chi_square() {
        let m = RateModel::new(1.0, 0.0, 1.0).unwrap();
        for theta in [-3.0f64, -0.5, 0.1, 0.3, 0.49] {
            let expected = (-theta).exp() * (1.0 - 2.0 * theta).powf(-0.5);
            let got = m.mgf(0.0, theta).unwrap();
            assert!(((got - expected) / expected).abs() < 1e-13, "{theta}");
        }
        assert!(m.mgf(0.0, 0.5).is_err());
    }

    #[test]
    fn mgf_matches_closed_form_expression() {
        let m = model_128(0.2);
        let e = 4.0;
        let m2 = m.mu_tilde_sq * e;
        let s2 = m.sigma_tilde_sq * e + m.noise_tilde_sq;
        for frac in [-1.0, -0.3, 0.1, 0.4, 0.9] {
            let theta = frac * m.theta_max(e);
            let w = 1.0 - 2.0 * theta * s2;
            let expected = (-theta * (e + m.noise_tilde_sq)).exp() * w.powf(-0.5) * (theta * m2 / w).exp();
            let got = m.mgf(e, theta).unwrap();
            assert!(((got - expected) / expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rates_vanish_at_zero() {
        let m = model_128(0.2);
        for e in [0.0, 2.0, 30.0] {
            assert_eq!(m.rate_right(e, 0.0), 0.0);
            assert_eq!(m.rate_left(e, 0.0), 0.0);
        }
    }

    #[test]
    fn rates_match_closed_form() {
        for noise in [1e-4, 0.14, 3.0] {
            let m = model_128(noise);
            for e in [0.0, 0.5, 4.0, 36.0] {
                let c = e + noise;
                for frac in [1e-3, 0.05, 0.3, 0.9, 0.999, 2.0, 10.0] {
                    let d = frac * c;
                    let right = m.rate_right(e, d);
                    let oracle = closed_form(&m, e, d, false);
                    assert!((right - oracle).abs() <= 1e-10 * oracle.max(1.0), "right e={e} d={d}: {right} vs {oracle}");
                    if frac < 1.0 {
                        let left = m.rate_left(e, d);
                        let oracle = closed_form(&m, e, d, true);
                        assert!((left - oracle).abs() <= 1e-10 * oracle.max(1.0), "left e={e} d={d}: {left} vs {oracle}");
                    }
                }
            }
        }
    }

    #[test]
    fn right_rate_central_chi_square_grid_oracle() {
        // E = 0, σ̃_n² = 1: sup_θ 2θ + θ + ½ log(1 − 2θ)
        let m = RateModel::new(1.0, 0.0, 1.0).unwrap();
        let points = 1_000_000;
        let oracle = (1..points)
            .map(|i| 0.5 * i as f64 / points as f64)
            .map(|t| 3.0 * t + 0.5 * (1.0 - 2.0 * t).ln())
            .fold(0.0, f64::max);
        let got = m.rate_right(0.0, 2.0);
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
        // analytic: θ* = 1/3, value 1 − ½ log 3
        assert!((got - (1.0 - 0.5 * 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn left_rate_support_edge() {
        let m = model_128(0.5);
        let e = 2.0;
        let edge = e + 0.5;
        assert_eq!(m.rate_left(e, edge), f64::INFINITY);
        assert_eq!(m.rate_left(e, 2.0 * edge), f64::INFINITY);
        // approaching the edge the grid oracle with θ up to 1e6 keeps growing
        let near = m.rate_left(e, edge * (1.0 - 1e-6));
        let grid = grid_sup(&m, e, edge * (1.0 - 1e-6), true, 1e6, 200_000);
        assert!(near.is_finite() && near > 5.0);
        assert!(grid <= near + 1e-9 && grid > near - 0.5, "{grid} vs {near}");
        let grid_edge = grid_sup(&m, e, edge, true, 1e6, 200_000);
        assert!(grid_edge > near, "grid at the edge keeps increasing with θ");
    }

    #[test]
    fn small_deviation_limit() {
        for noise in [0.01, 0.14, 2.0] {
            let m = model_128(noise);
            let e = 4.0;
            let s = m.variance(e);
            let d = 1e-3;
            let target = 1.0 / (2.0 * s);
            assert!((m.rate_right(e, d) / (d * d) / target - 1.0).abs() < 0.01);
            assert!((m.rate_left(e, d) / (d * d) / target - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn variance_matches_derived_s_var() {
        let stats = compute_stats(&ChannelConfig::rayleigh(128)).unwrap();
        let m = model_128(0.3);
        for e in [0.0, 1.0, 4.0, 36.0] {
            let s = m.s_var(stats.fourth_moment_normalized, e, CoefficientMode::Derived).unwrap();
            assert!((s - m.variance(e)).abs() < 1e-12 * s.max(1.0));
        }
    }

    #[test]
    fn s_var_special_values() {
        let stats = compute_stats(&ChannelConfig::rayleigh(128)).unwrap();
        let m = model_128(0.3);
        let s0 = m.s_var(stats.fourth_moment_normalized, 0.0, CoefficientMode::Derived).unwrap();
        assert!((s0 - 2.0 * 0.09).abs() < 1e-15);
        let c = m.s_var_coefficients(stats.fourth_moment_normalized, CoefficientMode::Derived).unwrap();
        let (mu2, s2) = (stats.mu_tilde_sq(), stats.sigma_tilde_sq());
        assert!((c.a1 - (4.0 * mu2 * s2 + 2.0 * s2 * s2)).abs() < 1e-14);
        let p = m.s_var_coefficients(stats.fourth_moment_normalized, CoefficientMode::Published).unwrap();
        assert!((p.a2 - 0.6).abs() < 1e-15 && (p.a3 - 0.09).abs() < 1e-15);
        assert!(m.s_var_coefficients(0.5, CoefficientMode::Derived).is_err());
    }

    #[test]
    fn rate_approx_arithmetic() {
        let c = SVarCoefficients { a1: 0.5, a2: 0.5, a3: 0.0 };
        assert!((c.eval(4.0) - 10.0).abs() < 1e-15);
        assert!((rate_approx(&c, 4.0, 1.0) - 0.05).abs() < 1e-15);
        assert_eq!(rate_approx(&c, 4.0, 0.0), 0.0);
    }

    #[test]
    fn rate_approx_agrees_with_exact_for_small_d() {
        let stats = compute_stats(&ChannelConfig::rayleigh(128)).unwrap();
        let m = model_128(0.14);
        let c = m.s_var_coefficients(stats.fourth_moment_normalized, CoefficientMode::Derived).unwrap();
        for e in [0.0, 4.0, 36.0] {
            let d = 0.05 * c.eval(e).sqrt();
            let exact = m.rate_right(e, d);
            let approx = rate_approx(&c, e, d);
            assert!((approx / exact - 1.0).abs() < 0.05, "e={e}: {approx} vs {exact}");
        }
    }

    #[test]
    fn convex_and_monotone_in_d() {
        let m = model_128(0.14);
        for e in [0.0, 1.0, 8.0] {
            let ds: Vec<f64> = (1..40).map(|i| 0.05 * i as f64).collect();
            for tail in [false, true] {
                let r: Vec<f64> = ds
                    .iter()
                    .map(|&d| if tail { m.rate_left(e, d) } else { m.rate_right(e, d) })
                    .collect();
                for w in r.windows(3) {
                    if w[2].is_finite() {
                        assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-12);
                        assert!(w[1] >= w[0]);
                    }
                }
            }
        }
    }

    #[test]
    fn decreasing_in_energy() {
        let m = model_128(0.14);
        for d in [0.05, 0.3, 1.0] {
            let mut prev_r = f64::INFINITY;
            let mut prev_l = f64::INFINITY;
            for i in 0..20 {
                let e = 0.5 * i as f64;
                let r = m.rate_right(e, d);
                let l = m.rate_left(e, d);
                assert!(r <= prev_r + 1e-12, "right e={e} d={d}");
                assert!(l <= prev_l + 1e-12, "left e={e} d={d}");
                prev_r = r;
                prev_l = l;
            }
        }
    }

    #[test]
    fn empirical_cumulant_tracks_model() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::{Distribution, Normal};
        let m = model_128(0.14);
        let e = 4.0;
        let v = Normal::new((m.mu_tilde_sq * e).sqrt(), (m.sigma_tilde_sq * e + m.noise_tilde_sq).sqrt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..200_000).map(|_| v.sample(&mut rng).powi(2)).collect();
        let emp = EmpiricalCumulant::from_samples(&samples).unwrap();
        let s = m.variance(e).sqrt();
        for d in [0.2 * s, 0.5 * s] {
            let a = emp.rate_right(d);
            let b = m.rate_right(e, d);
            assert!((a / b - 1.0).abs() < 0.05, "right {a} vs {b}");
            let a = emp.rate_left(d);
            let b = m.rate_left(e, d);
            assert!((a / b - 1.0).abs() < 0.05, "left {a} vs {b}");
        }
    }

    #[test]
    fn golden_section_finds_peak() {
        let x = legendre::golden_section_max(|x| -(x - 1.3) * (x - 1.3), 0.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-9);
    }

    #[test]
    fn model_validation() {
        assert!(RateModel::new(0.5, 0.4, 1.0).is_err());
        assert!(RateModel::new(0.5, 0.5, 0.0).is_err());
        assert!(RateModel::new(0.5, 0.5, 0.1).is_ok());
    }
}
