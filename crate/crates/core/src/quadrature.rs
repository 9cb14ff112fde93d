//! Cumulative distribution and censoring integrals for the RFQ likelihood.
//!
//! The SEP cdf is built once per `(alpha, lambda)` on the standardised scale
//! with a power-tanh map of power `2 / alpha`. With that power both `|z|^alpha`
//! and the skewing argument `w(z)` become polynomial in `atanh(u)`, so the
//! cusp at the location and the stretched-exponential tails are both smooth
//! in the computational variable.

use std::sync::Arc;

use log::{debug, warn};

use crate::cheb::{integrate, integrate_many, ChebApprox, ChebBundle, ChebOptions, DomainMap};
use crate::error::{Error, Result};
use crate::sep::{ClientParams, Sep, SepParams};

/// Excess beyond `[0, 1]` above which clamping is reported as a warning.
const CLAMP_WARN: f64 = 1e-7;

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if (0.0..=1.0).contains(&v) {
        return v;
    }
    let excess = if v < 0.0 { -v } else { v - 1.0 };
    if excess > CLAMP_WARN {
        warn!("probability {v} clamped to [0, 1]");
    }
    v.clamp(0.0, 1.0)
}

/// `z = sign(a) * (s * |a|)^(2 / alpha)` with `s = 2 sqrt(alpha)`, so that
/// the EP exponent is `(s a)^2 / alpha` and decays by `e^-36` at `|a| = 3`.
fn standard_map(center: f64, sigma: f64, alpha: f64, stretch: f64) -> Result<DomainMap> {
    let power = 2.0 / alpha;
    let s = (2.0 * alpha.sqrt()).max(stretch);
    let scale = sigma * (power * s.ln()).exp();
    if !(scale.is_normal() && scale.is_finite()) {
        return Err(Error::Tolerance {
            tol: 0.0,
            detail: format!("alpha = {alpha} leaves no representable quadrature scale"),
        });
    }
    Ok(DomainMap::power_tanh(center, scale, power))
}

/// Cdf, survival function and density of a SEP law backed by a Chebyshev
/// antiderivative of the standardised density.
#[derive(Debug, Clone)]
pub struct SepCdf {
    sep: Sep,
    std: Arc<ChebApprox>,
}

impl SepCdf {
    pub fn params(&self) -> &SepParams {
        self.sep.params()
    }

    /// The same shape with a different location; shares the approximation.
    pub fn with_location(&self, mu: f64) -> SepCdf {
        SepCdf {
            sep: Sep::new(self.sep.params().with_location(mu)).expect("location is unconstrained"),
            std: Arc::clone(&self.std),
        }
    }

    #[inline]
    fn z(&self, x: f64) -> f64 {
        let p = self.sep.params();
        (x - p.mu) / p.sigma
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        clamp_unit(self.std.eval(self.z(x)))
    }

    #[inline]
    pub fn sf(&self, x: f64) -> f64 {
        clamp_unit(self.std.eval_upper(self.z(x)))
    }

    /// `(F(x), 1 - F(x))`, each accurate in its own tail.
    #[inline]
    pub fn cdf_sf(&self, x: f64) -> (f64, f64) {
        let (lo, up) = self.std.eval_both(self.z(x));
        (clamp_unit(lo), clamp_unit(up))
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        self.sep.pdf(x)
    }

    /// Total mass of the approximation (1 up to quadrature error).
    pub fn total_mass(&self) -> f64 {
        self.std.limit()
    }

    /// The standardised antiderivative.
    pub fn standard(&self) -> &ChebApprox {
        &self.std
    }
}

pub fn build_cdf(p: &SepParams) -> Result<SepCdf> {
    build_cdf_with(p, &ChebOptions::default())
}

pub fn build_cdf_with(p: &SepParams, opts: &ChebOptions) -> Result<SepCdf> {
    let sep = Sep::new(*p)?;
    let std_sep = Sep::new(SepParams {
        mu: 0.0,
        sigma: 1.0,
        ..*p
    })?;
    let map = standard_map(0.0, 1.0, p.alpha, 0.0)?;
    let std = integrate(|z| std_sep.std_pdf(z), map, opts)?;
    let mass = std.limit();
    if (mass - 1.0).abs() > 1e-9 {
        debug!("sep cdf for {p:?} has total mass {mass}");
    }
    Ok(SepCdf {
        sep,
        std: Arc::new(std),
    })
}

/// Map for integrands mixing a SEP at `mu` with a Gaussian client law.
fn joint_map(dealer: &SepParams, client: &ClientParams) -> Result<DomainMap> {
    let reach = (client.nu - dealer.mu).abs() + 8.0 * client.tau;
    // put the client's far tail at |atanh u| <= 3
    let stretch = (reach / dealer.sigma).powf(0.5 * dealer.alpha) / 3.0;
    standard_map(dealer.mu, dealer.sigma, dealer.alpha, stretch)
}

/// The censoring integrals for one (dealer, client) pair, `y` in reduced units:
///
/// * `I_k(y) = int_{-inf}^y (1 - F)^k g`, `k = 1..=kmax`,
/// * `D_k(y) = int_{-inf}^y (1 - (1 - F)^k) g`, `k = 1..=kmax`,
/// * `K(y)  = int_{-inf}^y (1 - G) f`.
///
/// `I_k + D_k = G` identically; both are kept so that neither has to be
/// recovered by cancellation.
#[derive(Debug, Clone)]
pub struct SurvivalIntegrals {
    dealer: SepCdf,
    client: ClientParams,
    kmax: usize,
    bundle: ChebBundle,
}

impl SurvivalIntegrals {
    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn dealer(&self) -> &SepCdf {
        &self.dealer
    }

    pub fn client(&self) -> &ClientParams {
        &self.client
    }

    /// `I_k(y)`; `I_0` is the client cdf.
    pub fn power(&self, k: usize, y: f64) -> f64 {
        assert!(k <= self.kmax, "power {k} beyond kmax {}", self.kmax);
        if k == 0 {
            self.client.cdf(y)
        } else {
            self.bundle.eval(k - 1, y).max(0.0)
        }
    }

    /// `I_k(+inf) = E[(1 - F(V))^k]`.
    pub fn power_limit(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.bundle.limit(k - 1)
        }
    }

    /// `D_k(y)`; `D_0` is zero.
    pub fn complement(&self, k: usize, y: f64) -> f64 {
        assert!(k <= self.kmax, "power {k} beyond kmax {}", self.kmax);
        if k == 0 {
            0.0
        } else {
            self.bundle.eval(self.kmax + k - 1, y).max(0.0)
        }
    }

    /// `K(y)`.
    pub fn covered(&self, y: f64) -> f64 {
        self.bundle.eval(2 * self.kmax, y).max(0.0)
    }

    /// Writes `I_1(y) ..= I_m(y)` into `out[..m]`.
    #[inline]
    pub fn powers_into(&self, y: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.kmax);
        self.bundle.eval_range(y, 0, out);
        out.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    /// Writes `D_1(y) ..= D_m(y)` into `out[..m]`.
    #[inline]
    pub fn complements_into(&self, y: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.kmax);
        self.bundle.eval_range(y, self.kmax, out);
        out.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    pub fn panel_count(&self) -> usize {
        self.bundle.panel_count()
    }
}

pub fn build_survival_integrals(dealer: &SepCdf, client: &ClientParams, kmax: usize) -> Result<SurvivalIntegrals> {
    build_survival_integrals_with(dealer, client, kmax, &ChebOptions::default())
}

pub fn build_survival_integrals_with(
    dealer: &SepCdf,
    client: &ClientParams,
    kmax: usize,
    opts: &ChebOptions,
) -> Result<SurvivalIntegrals> {
    client.validate()?;
    if kmax == 0 {
        return Err(Error::Spec("survival integrals need kmax >= 1".into()));
    }
    let map = joint_map(dealer.params(), client)?;
    let m = 2 * kmax + 1;
    let bundle = integrate_many(
        m,
        |x, out| {
            let g = client.pdf(x);
            let (cdf, sf) = dealer.cdf_sf(x);
            let mut pw = 1.0;
            for k in 0..kmax {
                pw *= sf;
                out[k] = pw * g;
                // 1 - (1-F)^k without cancellation in the left tail
                let comp = if cdf < 0.5 {
                    -(((k + 1) as f64) * (-cdf).ln_1p()).exp_m1()
                } else {
                    1.0 - pw
                };
                out[kmax + k] = comp * g;
            }
            out[2 * kmax] = client.sf(x) * dealer.pdf(x);
        },
        map,
        opts,
    )?;
    Ok(SurvivalIntegrals {
        dealer: dealer.clone(),
        client: *client,
        kmax,
        bundle,
    })
}

/// `y -> int_{-inf}^y (1 - F(v))^k g(v) dv` as a standalone approximation.
pub fn build_survival_power_integral(p: &SepParams, c: &ClientParams, k: usize) -> Result<ChebApprox> {
    if k > 5 {
        return Err(Error::Spec(format!("survival power {k} exceeds 5")));
    }
    c.validate()?;
    let cdf = build_cdf(p)?;
    let map = joint_map(p, c)?;
    let opts = ChebOptions::default();
    if k == 0 {
        return integrate(|x| c.pdf(x), map, &opts);
    }
    integrate(|x| cdf.sf(x).powi(k as i32) * c.pdf(x), map, &opts)
}
