//! Powell's derivative-free direction-set maximisation.
//!
//! Searches run in an unconstrained space; each coordinate is mapped onto
//! its legal region by a [`Transform`]. Line maximisation brackets the
//! optimum by golden expansion and refines it with Brent's parabolic method.

use std::cell::Cell;

use log::{debug, trace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Per-coordinate bijection from the search space onto the model space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// `(0, inf)` via `exp`.
    Positive,
    /// `(lo, hi)` via a scaled logistic.
    Interval {
        lo: f64,
        hi: f64,
    },
}

impl Transform {
    #[inline]
    pub fn to_model(&self, t: f64) -> f64 {
        match *self {
            Transform::Identity => t,
            Transform::Positive => t.exp(),
            Transform::Interval { lo, hi } => {
                let s = if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                };
                lo + (hi - lo) * s
            }
        }
    }

    #[inline]
    pub fn to_search(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::Positive => x.ln(),
            Transform::Interval { lo, hi } => {
                let s = (x - lo) / (hi - lo);
                (s / (1.0 - s)).ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative objective improvement over one full cycle.
    pub f_rel: f64,
    /// Largest coordinate move over one cycle, in search space.
    pub x_abs: f64,
    /// Cycles in a row with objective below `f_rel` that also count as
    /// converged, for objectives that are flat along some direction.
    pub stall_cycles: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            f_rel: 1e-9,
            x_abs: 1e-7,
            stall_cycles: 3,
        }
    }
}

/// A maximisation problem over a constrained box.
pub struct FitProblem<'a> {
    /// Objective in model space; non-finite values are treated as `-inf`.
    pub objective: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub transforms: Vec<Transform>,
    /// Starting point in model space.
    pub initial: Vec<f64>,
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    /// Initial line-search step in search space.
    pub initial_step: f64,
}

impl<'a> FitProblem<'a> {
    pub fn new(objective: &'a (dyn Fn(&[f64]) -> f64 + Sync), transforms: Vec<Transform>, initial: Vec<f64>) -> Self {
        assert_eq!(transforms.len(), initial.len());
        FitProblem {
            objective,
            transforms,
            initial,
            tolerances: Tolerances::default(),
            max_iterations: 200,
            initial_step: 0.3,
        }
    }

    pub fn to_model(&self, t: &[f64]) -> Vec<f64> {
        t.iter().zip(&self.transforms).map(|(v, tr)| tr.to_model(*v)).collect()
    }

    pub fn to_search(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.transforms).map(|(v, tr)| tr.to_search(*v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowellResult {
    /// Best point, model space.
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

#[inline]
fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Maximises `phi(s)` along a line from `s = 0`, where `phi(0) = f0`.
///
/// Returns `(step, value)` with `value >= f0`; the step is zero when no
/// improvement is found within the bracketing budget.
pub fn line_search(mut phi: impl FnMut(f64) -> f64, f0: f64, initial_step: f64) -> (f64, f64) {
    // minimise h = -phi
    let mut h = |s: f64| finite_or_inf(-phi(s));
    let fa0 = finite_or_inf(-f0);
    let mut step = initial_step.abs().max(1e-12);
    let mut first = None;
    for _ in 0..12 {
        let fp = h(step);
        if fp < fa0 {
            first = Some((step, fp));
            break;
        }
        let fm = h(-step);
        if fm < fa0 {
            first = Some((-step, fm));
            break;
        }
        if fp.is_finite() && fm.is_finite() {
            let (s, v) = brent(&mut h, -step, 0.0, step, fa0);
            return if v < fa0 { (s, -v) } else { (0.0, f0) };
        }
        step *= 0.1;
    }
    let Some((mut b, mut fb)) = first else {
        return (0.0, f0);
    };
    let mut a = 0.0;
    for _ in 0..60 {
        let c = b + GOLD * (b - a);
        let fc = h(c);
        if fc >= fb {
            let (s, v) = brent(&mut h, a, b, c, fb);
            return if v < fb { (s, -v) } else { (b, -fb) };
        }
        a = b;
        b = c;
        fb = fc;
    }
    (b, -fb)
}

/// Brent minimisation on a bracket with `h(b) = fb` below both ends.
fn brent(h: &mut impl FnMut(f64) -> f64, a: f64, b: f64, c: f64, fb: f64) -> (f64, f64) {
    // below sqrt(eps) the parabola only fits rounding noise
    const TOL: f64 = 1.5e-8;
    const ZEPS: f64 = 1e-12;
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..100 {
        let xm = 0.5 * (lo + hi);
        let tol1 = TOL * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (lo - x) || p >= q * (hi - x)) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = h(u);
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Classic Powell with the largest-gain direction discarded and a reset to
/// the coordinate basis every `5 * dim` cycles.
pub fn powell_maximize(problem: &FitProblem) -> PowellResult {
    let dim = problem.initial.len();
    let evals = Cell::new(0usize);
    let g = |t: &[f64]| {
        evals.set(evals.get() + 1);
        let v = (problem.objective)(&problem.to_model(t));
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut x = problem.to_search(&problem.initial);
    let mut fx = g(&x);
    let unit = |i: usize| {
        let mut d = vec![0.0; dim];
        d[i] = 1.0;
        d
    };
    let mut dirs: Vec<Vec<f64>> = (0..dim).map(unit).collect();
    let mut steps = vec![problem.initial_step; dim];
    let tol = problem.tolerances;
    let mut converged = false;
    let mut stalled = 0;
    let mut iterations = 0;
    let mut trial = vec![0.0; dim];

    while iterations < problem.max_iterations && dim > 0 {
        iterations += 1;
        if iterations % (5 * dim) == 0 {
            dirs = (0..dim).map(unit).collect();
            steps = vec![problem.initial_step; dim];
        }
        let x_start = x.clone();
        let f_start = fx;
        let mut big_gain = 0.0;
        let mut ibig = 0;
        for i in 0..dim {
            let dir = &dirs[i];
            let (s, fnew) = line_search(
                |s| {
                    for k in 0..dim {
                        trial[k] = x[k] + s * dir[k];
                    }
                    g(&trial)
                },
                fx,
                steps[i],
            );
            if s != 0.0 {
                for k in 0..dim {
                    x[k] += s * dir[k];
                }
                steps[i] = s.abs().clamp(1e-6, 2.0);
            } else {
                steps[i] = (steps[i] * 0.5).max(1e-6);
            }
            if fnew - fx > big_gain {
                big_gain = fnew - fx;
                ibig = i;
            }
            fx = fnew.max(fx);
        }
        let gain = fx - f_start;
        let dx = x.iter().zip(&x_start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let f_small = 2.0 * gain <= tol.f_rel * (fx.abs() + f_start.abs()) + 1e-300;
        trace!("powell cycle {iterations}: f = {fx}, gain = {gain:e}, dx = {dx:e}");
        if f_small && dx < tol.x_abs {
            converged = true;
            break;
        }
        stalled = if f_small { stalled + 1 } else { 0 };
        if stalled >= tol.stall_cycles {
            debug!("powell stopped on a flat objective after {iterations} cycles (dx = {dx:e})");
            converged = true;
            break;
        }

        // extrapolated direction test, written for minimising -f
        let new_dir: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let norm = new_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let xe: Vec<f64> = x.iter().zip(&new_dir).map(|(a, d)| a + d).collect();
        let fe = g(&xe);
        let (f0m, fnm, fem) = (-f_start, -fx, -fe);
        if fem < f0m {
            let t = 2.0 * (f0m - 2.0 * fnm + fem) * (f0m - fnm - big_gain).powi(2) - big_gain * (f0m - fem).powi(2);
            if t < 0.0 {
                let unit_dir: Vec<f64> = new_dir.iter().map(|v| v / norm).collect();
                let (s, fnew) = line_search(
                    |s| {
                        for k in 0..dim {
                            trial[k] = x[k] + s * unit_dir[k];
                        }
                        g(&trial)
                    },
                    fx,
                    norm,
                );
                if s != 0.0 {
                    for k in 0..dim {
                        x[k] += s * unit_dir[k];
                    }
                    fx = fnew.max(fx);
                }
                dirs[ibig] = dirs[dim - 1].clone();
                steps[ibig] = steps[dim - 1];
                dirs[dim - 1] = unit_dir;
                steps[dim - 1] = norm.clamp(1e-6, 2.0);
            }
        }
    }
    PowellResult {
        x: problem.to_model(&x),
        value: fx,
        iterations,
        evaluations: evals.get(),
        converged,
        restarts_used: 0,
    }
}

/// Best of `starts` Powell runs: the given start, then starts jittered by
/// `N(0, jitter^2)` in search space. Deterministic in `seed`.
pub fn multistart(problem: &FitProblem, starts: usize, seed: u64) -> PowellResult {
    multistart_with_jitter(problem, starts, seed, 0.5)
}

pub fn multistart_with_jitter(problem: &FitProblem, starts: usize, seed: u64, jitter: f64) -> PowellResult {
    assert!(starts >= 1, "multistart needs at least one start");
    let mut best = powell_maximize(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, jitter).expect("jitter is finite");
    let base = problem.to_search(&problem.initial);
    let mut evaluations = best.evaluations;
    for r in 1..starts {
        let t: Vec<f64> = base.iter().map(|b| b + normal.sample(&mut rng)).collect();
        let run = powell_maximize(&FitProblem {
            objective: problem.objective,
            transforms: problem.transforms.clone(),
            initial: problem.to_model(&t),
            tolerances: problem.tolerances,
            max_iterations: problem.max_iterations,
            initial_step: problem.initial_step,
        });
        debug!("multistart run {r}: {}", run.value);
        evaluations += run.evaluations;
        if run.value > best.value {
            best = run;
        }
    }
    best.evaluations = evaluations;
    best.restarts_used = starts - 1;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_search_on_parabola() {
        let (s, v) = line_search(|t| -(t - 3.0) * (t - 3.0), -9.0, 0.3);
        assert!((s - 3.0).abs() < 1e-8, "{s}");
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn line_search_flat_returns_zero() {
        assert_eq!(line_search(|_| 1.0, 1.0, 0.3), (0.0, 1.0));
    }

    #[test]
    fn line_search_improves_multimodal() {
        let f = |t: f64| (5.0 * t).sin() + 0.1 * t;
        let f0 = f(0.0);
        let (s, v) = line_search(f, f0, 0.3);
        assert!(v >= f0);
        assert!((f(s) - v).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl() {
        let c = [1.5, -2.0, 0.25, 4.0];
        let obj = |x: &[f64]| -x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let p = FitProblem::new(&obj, vec![Transform::Identity; 4], vec![0.0; 4]);
        let r = powell_maximize(&p);
        assert!(r.converged);
        for (a, b) in r.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn rosenbrock() {
        let obj = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let p = FitProblem::new(&obj, vec![Transform::Identity; 2], vec![-1.2, 1.0]);
        let r = powell_maximize(&p);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn transforms_round_trip() {
        let ts = [
            (Transform::Positive, 0.37),
            (Transform::Interval { lo: 1e-3, hi: 2.0 }, 0.735),
            (
                Transform::Interval {
                    lo: 1e-4,
                    hi: 1.0 - 1e-4,
                },
                0.4,
            ),
        ];
        for (t, x) in ts {
            assert!((t.to_model(t.to_search(x)) - x).abs() < 1e-12);
        }
        let t = Transform::Interval { lo: 1e-3, hi: 2.0 };
        assert!(t.to_model(-800.0) >= 1e-3 && t.to_model(800.0) <= 2.0);
    }

    #[test]
    fn single_start_equals_plain_powell() {
        let obj = |x: &[f64]| -(x[0] - 1.0).powi(2) - (x[1] + 0.5).powi(2);
        let p = FitProblem::new(&obj, vec![Transform::Identity; 2], vec![3.0, 3.0]);
        let a = powell_maximize(&p);
        let b = multistart(&p, 1, 99);
        assert_eq!(a.x, b.x);
        assert_eq!(a.value, b.value);
    }
}
