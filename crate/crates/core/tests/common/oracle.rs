//! Reference integration used to check the Chebyshev machinery: adaptive
//! Gauss–Kronrod 7/15 with interval bisection, plus infinite-range
//! substitutions. Deliberately shares no code with the library.

#![allow(dead_code)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate, error estimate and the integral of `|f|` (which sets
/// the roundoff floor).
fn kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for i in 0..7 {
        let dx = h * XGK[i];
        let (l, r) = (f(c - dx), f(c + dx));
        k += WGK[i] * (l + r);
        abs += WGK[i] * (l.abs() + r.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * (l + r);
        }
    }
    (k * h, ((k - g) * h).abs(), abs * h.abs())
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn gk(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut total = 0.0;
    let mut comp = 0.0;
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, err, abs) = kronrod(&mut f, lo, hi);
        let floor = 50.0 * f64::EPSILON * abs;
        if err <= t.max(floor).max(1e-300) || depth >= 60 || hi - lo <= 1e-14 * (1.0 + lo.abs()) {
            // Kahan
            let y = v - comp;
            let s = total + y;
            comp = (s - total) - y;
            total = s;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t, depth + 1));
            stack.push((mid, hi, 0.5 * t, depth + 1));
        }
    }
    total
}

/// Integral over `(-inf, b]`, via `x = b - (1 - t) / t`.
pub fn gk_lower(mut f: impl FnMut(f64) -> f64, b: f64, tol: f64) -> f64 {
    gk(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let s = (1.0 - t) / t;
            let v = f(b - s) / (t * t);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integral over `[a, inf)`.
pub fn gk_upper(mut f: impl FnMut(f64) -> f64, a: f64, tol: f64) -> f64 {
    gk_lower(|x| f(-x), -a, tol)
}

/// Integral over `(-inf, b]` with a kink at `c` (split there when `c < b`).
pub fn gk_lower_split(mut f: impl FnMut(f64) -> f64, c: f64, b: f64, tol: f64) -> f64 {
    if b <= c {
        gk_lower(f, b, tol)
    } else {
        gk_lower(&mut f, c, 0.5 * tol) + gk(&mut f, c, b, 0.5 * tol)
    }
}

/// Reference cdf for nested integrals: each value is the nearest value
/// already computed plus a short Gauss–Kronrod integral of the density.
pub struct CdfReference<F: Fn(f64) -> f64> {
    f: F,
    known: Vec<(f64, f64)>,
    tol: f64,
}

impl<F: Fn(f64) -> f64> CdfReference<F> {
    /// `f` has its only kink at `anchor`.
    pub fn new(f: F, anchor: f64, tol: f64) -> Self {
        let at = gk_lower(&f, anchor, tol);
        CdfReference {
            f,
            known: vec![(anchor, at)],
            tol,
        }
    }

    pub fn cdf(&mut self, x: f64) -> f64 {
        let i = self.known.partition_point(|(k, _)| *k < x);
        if i < self.known.len() && self.known[i].0 == x {
            return self.known[i].1;
        }
        let below = i.checked_sub(1).map(|j| self.known[j]);
        let above = self.known.get(i).copied();
        let (x0, v0) = match (below, above) {
            (Some(b), Some(a)) => {
                if x - b.0 <= a.0 - x {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!(),
        };
        let v = if x >= x0 {
            v0 + gk(&self.f, x0, x, self.tol)
        } else {
            v0 - gk(&self.f, x, x0, self.tol)
        };
        self.known.insert(i, (x, v));
        v
    }
}
