//! Exponential-power (EP), skew-exponential-power (SEP) and Gaussian
//! distributions on the reduced-quote scale.
//!
//! The EP density with location `mu`, scale `sigma` and shape `alpha` is
//!
//! ```text
//! f_EP(x) = exp(-|z|^alpha / alpha) / (c sigma),   z = (x - mu) / sigma,
//! c = 2 alpha^(1/alpha - 1) Gamma(1/alpha)
//! ```
//!
//! and the SEP density skews it with an Azzalini factor,
//! `f_SEP(x) = 2 Phi(w) f_EP(x)` where `w = sign(z) |z|^(alpha/2) lambda sqrt(2/alpha)`.
//! Dealer quotes are SEP, client reservation values are Gaussian.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use libm::lgamma as ln_gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible shape exponent; smaller values give fatter tails.
pub const ALPHA_MAX: f64 = 2.0;
/// Floor applied to the shape exponent by the optimizer transforms.
pub const ALPHA_MIN_FIT: f64 = 1e-3;
/// Bound on |lambda| so the odd-moment series converges in bounded time.
pub const LAMBDA_MAX: f64 = 50.0;

const LN_2: f64 = std::f64::consts::LN_2;

/// Parameters of a skew exponential power distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SepParams {
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl SepParams {
    pub fn new(alpha: f64, lambda: f64, mu: f64, sigma: f64) -> Result<Self> {
        let p = SepParams {
            alpha,
            lambda,
            mu,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_shape(self.alpha)?;
        if !(self.lambda.is_finite() && self.lambda.abs() <= LAMBDA_MAX) {
            return Err(Error::domain("lambda", self.lambda, "must satisfy |lambda| <= 50"));
        }
        if !self.mu.is_finite() {
            return Err(Error::domain("mu", self.mu, "must be finite"));
        }
        check_scale("sigma", self.sigma)
    }

    /// Law of `-X` when `X` follows `self`.
    pub fn reflected(&self) -> Self {
        SepParams {
            mu: -self.mu,
            lambda: -self.lambda,
            ..*self
        }
    }

    pub fn with_location(&self, mu: f64) -> Self {
        SepParams { mu, ..*self }
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.mu + self.sigma * sep_moment(1, self)?)
    }

    pub fn std_dev(&self) -> Result<f64> {
        let m1 = sep_moment(1, self)?;
        let m2 = sep_moment(2, self)?;
        Ok(self.sigma * (m2 - m1 * m1).max(0.0).sqrt())
    }
}

/// Gaussian law of the client's reservation value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientParams {
    pub nu: f64,
    pub tau: f64,
}

impl ClientParams {
    pub fn new(nu: f64, tau: f64) -> Result<Self> {
        let c = ClientParams { nu, tau };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nu.is_finite() {
            return Err(Error::domain("nu", self.nu, "must be finite"));
        }
        check_scale("tau", self.tau)
    }

    pub fn reflected(&self) -> Self {
        ClientParams {
            nu: -self.nu,
            tau: self.tau,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        std_normal_pdf((x - self.nu) / self.tau) / self.tau
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.nu) / self.tau)
    }

    /// `1 - cdf(x)`, accurate in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        std_normal_sf((x - self.nu) / self.tau)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        self.nu + self.tau * e
    }
}

fn check_shape(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= ALPHA_MAX {
        Ok(())
    } else {
        Err(Error::domain("alpha", alpha, "must lie in (0, 2]"))
    }
}

fn check_scale(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "must be positive and finite"))
    }
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `ln c` for the EP normaliser `c = 2 alpha^(1/alpha - 1) Gamma(1/alpha)`.
fn ep_log_norm(alpha: f64) -> f64 {
    LN_2 + (1.0 / alpha - 1.0) * alpha.ln() + ln_gamma(1.0 / alpha)
}

pub fn ep_pdf(x: f64, mu: f64, sigma: f64, alpha: f64) -> Result<f64> {
    check_shape(alpha)?;
    check_scale("sigma", sigma)?;
    let z = (x - mu) / sigma;
    Ok((-z.abs().powf(alpha) / alpha - ep_log_norm(alpha)).exp() / sigma)
}

pub fn sep_pdf(x: f64, p: &SepParams) -> Result<f64> {
    Ok(Sep::new(*p)?.pdf(x))
}

pub fn gaussian_pdf(x: f64, c: &ClientParams) -> Result<f64> {
    c.validate()?;
    Ok(c.pdf(x))
}

pub fn gaussian_cdf(x: f64, c: &ClientParams) -> Result<f64> {
    c.validate()?;
    Ok(c.cdf(x))
}

/// A validated SEP law with its normaliser cached, for hot loops.
#[derive(Debug, Clone, Copy)]
pub struct Sep {
    params: SepParams,
    log_c: f64,
    skew: f64,
}

impl Sep {
    pub fn new(params: SepParams) -> Result<Self> {
        params.validate()?;
        Ok(Sep {
            params,
            log_c: ep_log_norm(params.alpha),
            skew: params.lambda * (2.0 / params.alpha).sqrt(),
        })
    }

    pub fn params(&self) -> &SepParams {
        &self.params
    }

    /// Azzalini argument `w(z)`.
    #[inline]
    fn w(&self, z: f64) -> f64 {
        z.signum() * z.abs().powf(0.5 * self.params.alpha) * self.skew
    }

    /// Density of the standardised variable `(X - mu) / sigma`.
    #[inline]
    pub fn std_pdf(&self, z: f64) -> f64 {
        let a = self.params.alpha;
        let ep = (-z.abs().powf(a) / a - self.log_c).exp();
        if self.skew == 0.0 || z == 0.0 {
            ep
        } else {
            2.0 * std_normal_cdf(self.w(z)) * ep
        }
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        self.std_pdf((x - self.params.mu) / self.params.sigma) / self.params.sigma
    }

    pub fn sampler(&self) -> SepSampler {
        SepSampler {
            sep: *self,
            gamma: Gamma::new(1.0 / self.params.alpha, 1.0).expect("shape validated"),
        }
    }
}

/// Exact SEP sampler.
///
/// `|Z|^alpha / alpha` is Gamma(1/alpha, 1) under the EP law; a draw with a
/// random sign is EP. Keeping `z` with probability `Phi(w(z))` and returning
/// `-z` otherwise yields the Azzalini-skewed law, because `w` is odd.
#[derive(Debug, Clone)]
pub struct SepSampler {
    sep: Sep,
    gamma: Gamma<f64>,
}

impl SepSampler {
    pub fn sample_std<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.sep.params.alpha;
        let g = self.gamma.sample(rng);
        let r = (a * g).powf(1.0 / a);
        let z = if rng.random::<bool>() { r } else { -r };
        if self.sep.skew == 0.0 {
            return z;
        }
        let u: f64 = rng.random();
        if u < std_normal_cdf(self.sep.w(z)) {
            z
        } else {
            -z
        }
    }
}

impl Distribution<f64> for SepSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = &self.sep.params;
        p.mu + p.sigma * self.sample_std(rng)
    }
}

/// `count` i.i.d. SEP draws from a ChaCha8 stream seeded with `seed`.
pub fn sep_sample(p: &SepParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = Sep::new(*p)?.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sampler.sample(&mut rng)).collect())
}

/// Relative size below which the odd-moment series is truncated.
const SERIES_TOL: f64 = 1e-12;

/// Standardised moment `E[((X - mu) / sigma)^m]` for `m` in 1..=4.
///
/// Even orders use `E[Z^2k] = alpha^(2k/alpha) Gamma((2k+1)/alpha) / Gamma(1/alpha)`.
/// Odd orders `2k+1` use the hypergeometric-type series
///
/// ```text
/// 2 alpha^((2k+1)/alpha) lambda / (sqrt(pi) Gamma(1/alpha) (1+lambda^2)^(s+1/2))
///   * sum_n Gamma(s+n+1/2) / (2n+1)!! * (2 lambda^2 / (1+lambda^2))^n,   s = 2(k+1)/alpha
/// ```
pub fn sep_moment(m: u32, p: &SepParams) -> Result<f64> {
    p.validate()?;
    let a = p.alpha;
    let lg1 = ln_gamma(1.0 / a);
    match m {
        2 | 4 => {
            let k = (m / 2) as f64;
            Ok((2.0 * k / a * a.ln() + ln_gamma((2.0 * k + 1.0) / a) - lg1).exp())
        }
        1 | 3 => {
            let lam = p.lambda;
            if lam == 0.0 {
                return Ok(0.0);
            }
            let k = ((m - 1) / 2) as f64;
            let s = 2.0 * (k + 1.0) / a;
            let l2 = lam * lam;
            let r = 2.0 * l2 / (1.0 + l2);
            // term_n / Gamma(s + 1/2), built by its ratio recurrence
            let mut term = 1.0;
            let mut sum = 1.0;
            let mut n = 0.0;
            while term > SERIES_TOL * sum {
                term *= (s + n + 0.5) / (2.0 * n + 3.0) * r;
                sum += term;
                n += 1.0;
                if n > 1e8 {
                    break;
                }
            }
            let log_pref = LN_2 + (2.0 * k + 1.0) / a * a.ln() - 0.5 * PI.ln() - lg1 - (s + 0.5) * (1.0 + l2).ln()
                + ln_gamma(s + 0.5);
            Ok(lam.signum() * (log_pref + (lam.abs() * sum).ln()).exp())
        }
        _ => Err(Error::domain("m", m as f64, "moment order must be 1..=4")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    fn sep(a: f64, l: f64, m: f64, s: f64) -> SepParams {
        SepParams::new(a, l, m, s).unwrap()
    }

    #[test]
    fn ep_reduces_to_normal_and_laplace() {
        assert!((ep_pdf(0.0, 0.0, 1.0, 2.0).unwrap() - INV_SQRT_2PI).abs() < 1e-14);
        assert!((ep_pdf(0.0, 0.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        for x in [-3.0, -0.4, 0.7, 2.5] {
            let a = ep_pdf(1.0 + x, 1.0, 2.0, 0.6).unwrap();
            let b = ep_pdf(1.0 - x, 1.0, 2.0, 0.6).unwrap();
            assert!((a - b).abs() < 1e-15 * a);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(ep_pdf(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(ep_pdf(0.0, 0.0, 1.0, 2.5).is_err());
        assert!(ep_pdf(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(SepParams::new(1.0, 60.0, 0.0, 1.0).is_err());
        assert!(ClientParams::new(0.0, -1.0).is_err());
        assert!(gaussian_cdf(0.0, &ClientParams { nu: 0.0, tau: 0.0 }).is_err());
        assert!(sep_moment(5, &sep(1.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn sep_special_cases() {
        assert!((sep_pdf(0.0, &sep(2.0, 0.0, 0.0, 1.0)).unwrap() - INV_SQRT_2PI).abs() < 1e-14);
        let p = sep(0.735, 0.179, 0.424, 0.906);
        let at_mu = sep_pdf(p.mu, &p).unwrap();
        let ep = ep_pdf(p.mu, p.mu, p.sigma, p.alpha).unwrap();
        assert!((at_mu - ep).abs() < 1e-15);
        for x in [-4.0, -1.0, 0.0, 0.3, 2.0, 9.0] {
            let q = sep(0.7, 0.0, 0.2, 1.3);
            assert_eq!(sep_pdf(x, &q).unwrap(), ep_pdf(x, 0.2, 1.3, 0.7).unwrap());
        }
    }

    #[test]
    fn reflection_pointwise() {
        let p = sep(0.665, -0.103, -0.418, 0.794);
        let q = SepParams { lambda: -p.lambda, ..p };
        for d in [0.01, 0.3, 1.0, 4.0, 20.0] {
            let a = sep_pdf(p.mu + d, &p).unwrap();
            let b = sep_pdf(p.mu - d, &q).unwrap();
            assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
        }
    }

    #[test]
    fn gaussian_examples() {
        let c = ClientParams::new(1.72, 1.92).unwrap();
        assert_eq!(gaussian_cdf(1.72, &c).unwrap(), 0.5);
        assert!((gaussian_cdf(1.72 + 1.92, &c).unwrap() - 0.841_344_746_068_542_9).abs() < 1e-12);
        let s = ClientParams::new(0.0, 1.0).unwrap();
        assert!((gaussian_pdf(0.0, &s).unwrap() - INV_SQRT_2PI).abs() < 1e-15);
        assert!((c.sf(5.0) + c.cdf(5.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments_closed_forms() {
        assert!((sep_moment(2, &sep(2.0, 0.0, 0.0, 1.0)).unwrap() - 1.0).abs() < 1e-13);
        assert_eq!(sep_moment(1, &sep(0.8, 0.0, 0.0, 1.0)).unwrap(), 0.0);
        // Laplace-type alpha = 1: E[Z^2] = Gamma(3) = 2, E[Z^4] = Gamma(5) = 24.
        assert!((sep_moment(2, &sep(1.0, 0.3, 0.0, 1.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((sep_moment(4, &sep(1.0, 0.3, 0.0, 1.0)).unwrap() - 24.0).abs() < 1e-10);
        // alpha = 0.5: alpha^(2/alpha) Gamma(3/alpha) / Gamma(1/alpha) = 0.0625 * 120 = 7.5
        assert!((sep_moment(2, &sep(0.5, 0.0, 0.0, 1.0)).unwrap() - 7.5).abs() < 1e-11);
    }

    #[test]
    fn skew_normal_odd_moments() {
        // alpha = 2 is the skew-normal law, whose odd moments are known in closed form.
        for lam in [-2.0, -0.4, 0.179, 1.5, 6.0] {
            let d = lam / (1.0f64 + lam * lam).sqrt();
            let m1 = (2.0 / PI).sqrt() * d;
            let m3 = (2.0 / PI).sqrt() * d * (3.0 - d * d);
            let p = sep(2.0, lam, 0.0, 1.0);
            // the series stops at a relative term size of 1e-12, so the
            // truncated tail is that times 1 / (1 - ratio)
            assert!((sep_moment(1, &p).unwrap() - m1).abs() < 1e-9, "lam={lam}");
            assert!((sep_moment(3, &p).unwrap() - m3).abs() < 1e-9, "lam={lam}");
        }
    }

    #[test]
    fn odd_moment_sign_follows_lambda() {
        for lam in [0.01, 0.5, 3.0, 50.0] {
            let p = sep(0.6, lam, 0.0, 1.0);
            assert!(sep_moment(1, &p).unwrap() > 0.0);
            assert!(sep_moment(3, &p).unwrap() > 0.0);
            assert!(sep_moment(1, &p.reflected()).unwrap() < 0.0);
        }
    }

    #[test]
    fn sampler_is_deterministic_and_standard_normal_at_alpha_two() {
        let p = sep(2.0, 0.0, 0.0, 1.0);
        let a = sep_sample(&p, 1000, 9).unwrap();
        assert_eq!(a, sep_sample(&p, 1000, 9).unwrap());
        assert!(sep_sample(&p, 0, 1).unwrap().is_empty());

        let n = 1_000_000;
        let xs = sep_sample(&p, n, 42).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (1.0 / n as f64).sqrt();
        let se_var = (2.0 / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se_mean, "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * se_var, "var {var}");
    }

    #[test]
    fn positive_lambda_gives_positive_sample_skewness() {
        let xs = sep_sample(&sep(1.2, 0.8, 0.0, 1.0), 200_000, 3).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        assert!(m3 / m2.powf(1.5) > 0.0);
    }
}
