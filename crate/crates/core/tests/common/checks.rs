//! Oracle comparisons shared by the core tests and the acceptance run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfqcal_core::quadrature::{build_cdf, build_survival_integrals};

use super::oracle::{gk, gk_lower_split, CdfReference};
use super::{normal_cdf, normal_pdf, random_laws, sep_density};

/// `sets` random law pairs, the first 60% with alpha in [0.3, 0.8]: the
/// library cdf, survival powers `I_k`, their complements `D_k` and the
/// covered integral `K`, each against nested Gauss–Kronrod. Returns the
/// worst absolute deviation, or the first one above `tol`.
pub fn quadrature_against_reference(sets: usize, seed: u64, tol: f64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut check = |err: f64, what: String| {
        worst = worst.max(err);
        if err < tol {
            Ok(())
        } else {
            Err(format!("{what} off by {err:e}"))
        }
    };
    for set in 0..sets {
        let range = if set * 5 < sets * 3 { (0.3, 0.8) } else { (0.8, 2.0) };
        let (p, c) = random_laws(&mut rng, range);
        let f = |x: f64| sep_density(x, p.alpha, p.lambda, p.mu, p.sigma);
        let mut reference = CdfReference::new(f, p.mu, 1e-12);
        let mut cdf_ref = |x: f64| reference.cdf(x);
        let g = |x: f64| normal_pdf(x, c.nu, c.tau);

        let cdf = build_cdf(&p).map_err(|e| e.to_string())?;
        for t in [-8.0, -2.0, -0.5, 0.0, 0.3, 1.5, 6.0] {
            let x = p.mu + t * p.sigma;
            check((cdf.cdf(x) - cdf_ref(x)).abs(), format!("set {set} {p:?}: F({x})"))?;
        }

        let ints = build_survival_integrals(&cdf, &c, 5).map_err(|e| e.to_string())?;
        for t in [-1.5, 0.0, 1.0] {
            let y = c.nu + t * c.tau;
            for k in 1..=5 {
                let reference = gk(
                    |v| (1.0 - cdf_ref(v)).powi(k as i32) * g(v),
                    c.nu - 12.0 * c.tau,
                    y,
                    1e-11,
                );
                check((ints.power(k, y) - reference).abs(), format!("set {set}: I_{k}({y})"))?;
                let gy = normal_cdf((y - c.nu) / c.tau);
                check(
                    (ints.complement(k, y) - (gy - reference)).abs(),
                    format!("set {set}: D_{k}({y})"),
                )?;
            }
            let reference = gk_lower_split(|v| (1.0 - normal_cdf((v - c.nu) / c.tau)) * f(v), p.mu, y, 1e-12);
            check((ints.covered(y) - reference).abs(), format!("set {set}: K({y})"))?;
        }
    }
    Ok(worst)
}
