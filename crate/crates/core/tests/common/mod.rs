#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use rand::Rng;
use rfqcal_core::model::SideParams;
use rfqcal_core::sep::{ClientParams, SepParams};

/// SEP density written out from scratch (not through the library).
pub fn sep_density(x: f64, a: f64, l: f64, mu: f64, s: f64) -> f64 {
    let z = (x - mu) / s;
    let c = 2.0 * a.powf(1.0 / a - 1.0) * libm::lgamma(1.0 / a).exp();
    let ep = (-z.abs().powf(a) / a).exp() / (c * s);
    let w = z.signum() * z.abs().powf(a / 2.0) * l * (2.0 / a).sqrt();
    2.0 * normal_cdf(w) * ep
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64, m: f64, s: f64) -> f64 {
    let z = (x - m) / s;
    (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Random dealer/client laws spanning the fitted range and beyond.
pub fn random_laws(rng: &mut impl Rng, alpha: (f64, f64)) -> (SepParams, ClientParams) {
    let sep = SepParams::new(
        rng.random_range(alpha.0..alpha.1),
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.3..3.0),
    )
    .unwrap();
    let client = ClientParams::new(rng.random_range(-3.0..3.0), rng.random_range(0.5..4.0)).unwrap();
    (sep, client)
}

pub fn random_side_params(rng: &mut impl Rng, p: f64) -> SideParams {
    let (d, c) = random_laws(rng, (0.3, 2.0));
    SideParams::new(d, c, p)
}

/// The buy-side rows of the published per-n table: (alpha, lambda, mu,
/// sigma, mean, sd, p, nu, tau).
pub const BUY_PER_N: [[f64; 9]; 5] = [
    [0.778, 0.597, 0.208, 1.33, 1.36, 1.96, 1.00, 0.890, 4.60],
    [0.795, 0.470, 0.285, 1.17, 1.14, 1.77, 0.655, 1.65, 2.71],
    [0.722, 0.247, 0.440, 1.01, 0.933, 1.78, 0.498, 1.79, 2.28],
    [0.713, 0.129, 0.480, 0.888, 0.720, 1.62, 0.417, 2.19, 2.53],
    [0.738, 0.141, 0.409, 0.840, 0.647, 1.49, 0.351, 1.64, 1.65],
];

pub const SELL_PER_N: [[f64; 9]; 5] = [
    [0.599, -0.350, -0.264, 1.16, -1.18, 2.39, 0.998, -1.24, 7.35],
    [0.660, -0.368, -0.249, 1.03, -1.01, 1.90, 0.695, -1.91, 2.81],
    [0.647, -0.132, -0.445, 0.865, -0.712, 1.74, 0.522, -1.98, 2.09],
    [0.671, -0.0881, -0.418, 0.796, -0.577, 1.55, 0.437, -2.04, 1.89],
    [0.681, -0.0676, -0.409, 0.719, -0.518, 1.38, 0.373, -1.72, 1.44],
];

/// Pooled rows: buy then sell.
pub const POOLED: [[f64; 9]; 2] = [
    [0.735, 0.179, 0.424, 0.906, 0.748, 1.60, 0.400, 1.72, 1.92],
    [0.665, -0.103, -0.418, 0.794, -0.605, 1.56, 0.424, -1.80, 1.68],
];

pub fn row_params(row: &[f64; 9]) -> SideParams {
    SideParams::new(
        SepParams::new(row[0], row[1], row[2], row[3]).unwrap(),
        ClientParams::new(row[7], row[8]).unwrap(),
        row[6],
    )
}
