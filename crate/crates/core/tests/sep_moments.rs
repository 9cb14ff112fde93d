mod common;

use common::oracle::{gk, gk_lower, gk_upper};
use common::{random_laws, sep_density, BUY_PER_N, POOLED, SELL_PER_N};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfqcal_core::quadrature::build_cdf;
use rfqcal_core::sep::{sep_moment, sep_sample, SepParams};

/// Raw standardised moment by direct integration of the density.
fn integrated_moment(m: i32, p: &SepParams) -> f64 {
    let f = |z: f64| z.powi(m) * sep_density(z, p.alpha, p.lambda, 0.0, 1.0);
    gk_lower(f, 0.0, 1e-13) + gk_upper(f, 0.0, 1e-13)
}

#[test]
fn closed_form_moments_match_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..30 {
        let (p, _) = random_laws(&mut rng, (0.3, 2.0));
        for m in 1..=4 {
            let a = sep_moment(m, &p).unwrap();
            let b = integrated_moment(m as i32, &p);
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{p:?} m={m}: {a} vs {b}");
        }
    }
}

/// The published tables print mean and standard deviation next to the
/// fitted SEP parameters; recompute them from the parameters.
#[test]
fn published_mean_and_sd_are_reproduced() {
    let rows = BUY_PER_N.iter().chain(SELL_PER_N.iter()).chain(POOLED.iter());
    for row in rows {
        let p = SepParams::new(row[0], row[1], row[2], row[3]).unwrap();
        let mean = p.mean().unwrap();
        let sd = p.std_dev().unwrap();
        // three significant figures in print, plus rounding of the inputs
        assert!(
            (mean - row[4]).abs() <= 0.01 * row[4].abs().max(0.5),
            "{row:?}: mean {mean}"
        );
        assert!((sd - row[5]).abs() <= 0.01 * row[5], "{row:?}: sd {sd}");
    }
}

#[test]
fn sample_moments_within_four_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for set in 0..8 {
        let (p, _) = random_laws(&mut rng, (0.4, 2.0));
        let n = 200_000;
        let xs = sep_sample(&p, n, 100 + set).unwrap();
        let z: Vec<f64> = xs.iter().map(|x| (x - p.mu) / p.sigma).collect();
        for m in 1..=2 {
            let target = sep_moment(m, &p).unwrap();
            let mean = z.iter().map(|v| v.powi(m as i32)).sum::<f64>() / n as f64;
            let var = sep_moment(2 * m, &p).unwrap() - target * target;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - target).abs() < 4.0 * se,
                "{p:?} m={m}: {mean} vs {target} (se {se})"
            );
        }
    }
}

#[test]
fn sample_passes_kolmogorov_smirnov() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for set in 0..6 {
        let (p, _) = random_laws(&mut rng, (0.3, 2.0));
        let n = 50_000;
        let mut xs = sep_sample(&p, n, 200 + set).unwrap();
        xs.sort_by(f64::total_cmp);
        let cdf = build_cdf(&p).unwrap();
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf.cdf(x);
                (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        // 0.1% critical value of the asymptotic Kolmogorov law
        let crit = 1.95 / (n as f64).sqrt();
        assert!(d < crit, "{p:?}: D = {d}");
    }
}

#[test]
fn sampler_is_reproducible() {
    let p = SepParams::new(0.7, 0.3, 0.1, 1.2).unwrap();
    assert_eq!(sep_sample(&p, 1000, 5).unwrap(), sep_sample(&p, 1000, 5).unwrap());
    assert_ne!(sep_sample(&p, 1000, 5).unwrap(), sep_sample(&p, 1000, 6).unwrap());
    let mass = gk(|x| sep_density(x, 0.7, 0.3, 0.1, 1.2), -400.0, 400.0, 1e-12);
    assert!((mass - 1.0).abs() < 1e-9);
}
