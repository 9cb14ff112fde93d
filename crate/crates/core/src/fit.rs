//! Maximum-likelihood fitting of the market model.

use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{CellModel, NeumaierSum};
use crate::model::{CellSpec, ModelSpec, OtherRule, Pooling, SideParams, Variant};
use crate::optim::{multistart, FitProblem, Tolerances, Transform};
use crate::record::{reduce, Case, Covariate, ReducedRecord, RfqRecord, Side};
use crate::sep::{ClientParams, SepParams, ALPHA_MAX, ALPHA_MIN_FIT};

/// Margin keeping the answer probability off 0 and 1.
pub const P_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub variant: Variant,
    pub pooling: Pooling,
    pub other_rule: OtherRule,
    pub covariates: Vec<Covariate>,
    /// Sides to fit; sides without records are skipped.
    pub sides: Vec<Side>,
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerances: Tolerances,
}

impl FitOptions {
    pub fn new(variant: Variant, pooling: Pooling) -> Self {
        FitOptions {
            variant,
            pooling,
            other_rule: OtherRule::NotCovered,
            covariates: Vec::new(),
            sides: Side::ALL.to_vec(),
            starts: 1,
            seed: 0,
            max_iterations: 200,
            tolerances: Tolerances::default(),
        }
    }

    fn template(&self) -> ModelSpec {
        ModelSpec {
            variant: self.variant,
            pooling: self.pooling,
            other_rule: self.other_rule,
            covariates: self.covariates.clone(),
            cells: Vec::new(),
        }
    }
}

/// Outcome of fitting one parameter cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFit {
    pub side: Side,
    pub n: Option<usize>,
    pub params: SideParams,
    pub loglik: f64,
    pub records: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelSpec,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    pub seed: u64,
    pub cells: Vec<CellFit>,
}

/// Layout of the search vector of one cell:
/// `[alpha, lambda, mu, sigma, nu, tau, (p), beta.., gamma..]`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    variant: Variant,
    ncov: usize,
}

impl Layout {
    #[cfg(test)]
    fn dim(&self) -> usize {
        6 + usize::from(self.variant == Variant::Partial) + 2 * self.ncov
    }

    fn transforms(&self) -> Vec<Transform> {
        let mut t = vec![
            Transform::Interval {
                lo: ALPHA_MIN_FIT,
                hi: ALPHA_MAX,
            },
            Transform::Identity,
            Transform::Identity,
            Transform::Positive,
            Transform::Identity,
            Transform::Positive,
        ];
        if self.variant == Variant::Partial {
            t.push(Transform::Interval {
                lo: P_EPS,
                hi: 1.0 - P_EPS,
            });
        }
        t.extend(std::iter::repeat_n(Transform::Identity, 2 * self.ncov));
        t
    }

    fn pack(&self, s: &SideParams) -> Vec<f64> {
        let d = &s.dealer;
        let mut x = vec![d.alpha, d.lambda, d.mu, d.sigma, s.client.nu, s.client.tau];
        if self.variant == Variant::Partial {
            x.push(s.p.clamp(P_EPS, 1.0 - P_EPS));
        }
        x.extend(&s.beta);
        x.extend(&s.gamma);
        x
    }

    fn unpack(&self, x: &[f64]) -> SideParams {
        let (p, rest) = match self.variant {
            Variant::Partial => (x[6], &x[7..]),
            Variant::Full => (1.0, &x[6..]),
        };
        SideParams {
            dealer: SepParams {
                alpha: x[0],
                lambda: x[1],
                mu: x[2],
                sigma: x[3],
            },
            client: ClientParams { nu: x[4], tau: x[5] },
            p,
            beta: rest[..self.ncov].to_vec(),
            gamma: rest[self.ncov..].to_vec(),
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Moment-matching start: dealer location and scale from the median and MAD
/// of the reduced quotes of done records (of all records if none is done).
pub fn initial_params(records: &[ReducedRecord], side: Side, variant: Variant, ncov: usize) -> SideParams {
    let done = |r: &&ReducedRecord| matches!(r.case, Case::DoneCover | Case::DoneNoCover | Case::Tied);
    let mut ys: Vec<f64> = records.iter().filter(done).map(|r| r.y).collect();
    if ys.is_empty() {
        ys = records.iter().map(|r| r.y).collect();
    }
    let (mu, sigma) = if ys.is_empty() {
        (0.0, 1.0)
    } else {
        let m = median(&mut ys);
        let mut dev: Vec<f64> = ys.iter().map(|y| (y - m).abs()).collect();
        let mad = 1.4826 * median(&mut dev);
        (m, if mad.is_finite() && mad > 1e-3 { mad } else { 1.0 })
    };
    SideParams {
        dealer: SepParams {
            alpha: 1.0,
            lambda: 0.0,
            mu,
            sigma,
        },
        client: ClientParams {
            nu: side.sign(),
            tau: 2.0,
        },
        p: if variant == Variant::Partial { 0.5 } else { 1.0 },
        beta: vec![0.0; ncov],
        gamma: vec![0.0; ncov],
    }
}

/// Log-likelihood of one cell's records, `-inf` for illegal parameters.
fn cell_loglik(template: &ModelSpec, side: Side, params: &SideParams, kmax: usize, records: &[ReducedRecord]) -> f64 {
    match CellModel::new(template, side, params, kmax) {
        Ok(mut m) => match m.prepare(records) {
            Ok(()) => m.loglik_sum(records).value,
            Err(_) => f64::NEG_INFINITY,
        },
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Fits one cell from a given start.
pub fn fit_cell(
    template: &ModelSpec,
    side: Side,
    n: Option<usize>,
    records: &[ReducedRecord],
    start: &SideParams,
    options: &FitOptions,
) -> Result<CellFit> {
    if records.is_empty() {
        return Err(Error::Spec(format!("no {side} records to fit")));
    }
    let layout = Layout {
        variant: template.variant,
        ncov: template.covariates.len(),
    };
    let kmax = records.iter().map(|r| r.n).max().expect("non-empty");
    let objective = |x: &[f64]| cell_loglik(template, side, &layout.unpack(x), kmax, records);
    let initial = layout.pack(start);
    if !objective(&initial).is_finite() {
        let mut m = CellModel::new(template, side, &layout.unpack(&initial), kmax)?;
        m.prepare(records)?;
        let s = m.loglik_sum(records);
        return Err(Error::ZeroLikelihood {
            count: s.zero_count,
            first: s.first_zero.unwrap_or(0),
        });
    }
    let mut problem = FitProblem::new(&objective, layout.transforms(), initial);
    problem.tolerances = options.tolerances;
    problem.max_iterations = options.max_iterations;
    let run = multistart(&problem, options.starts, options.seed);
    let params = layout.unpack(&run.x);
    if !run.converged {
        warn!("{side} cell {n:?} did not converge in {} cycles", run.iterations);
    }
    info!(
        "{side} cell {n:?}: loglik {:.6} after {} cycles, {} evaluations",
        run.value, run.iterations, run.evaluations
    );
    Ok(CellFit {
        side,
        n,
        params,
        loglik: run.value,
        records: records.len(),
        iterations: run.iterations,
        evaluations: run.evaluations,
        converged: run.converged,
        restarts_used: run.restarts_used,
    })
}

/// Fits every (side, cell) of `dataset` requested by `options`.
pub fn fit_model(dataset: &[RfqRecord], options: &FitOptions) -> Result<FitResult> {
    let template = options.template();
    template.validate()?;
    let mut groups: BTreeMap<(Side, Option<usize>), Vec<ReducedRecord>> = BTreeMap::new();
    for r in dataset {
        if !options.sides.contains(&r.side) {
            continue;
        }
        let red = reduce(r)?;
        let n = match options.pooling {
            Pooling::Pooled => None,
            Pooling::PerN => Some(red.n),
        };
        groups.entry((red.side, n)).or_default().push(red);
    }
    if groups.is_empty() {
        return Err(Error::Spec("no records for the requested sides".into()));
    }
    let ncov = template.covariates.len();
    let mut cells = Vec::new();
    let mut total = NeumaierSum::default();
    for ((side, n), records) in &groups {
        let start = initial_params(records, *side, options.variant, ncov);
        let fit = fit_cell(&template, *side, *n, records, &start, options)?;
        total.add(fit.loglik);
        cells.push(fit);
    }
    let params = ModelSpec {
        cells: cells
            .iter()
            .map(|c| CellSpec {
                side: c.side,
                n: c.n,
                params: c.params.clone(),
            })
            .collect(),
        ..template
    };
    Ok(FitResult {
        params,
        loglik: total.value(),
        iterations: cells.iter().map(|c| c.iterations).max().unwrap_or(0),
        converged: cells.iter().all(|c| c.converged),
        restarts_used: cells.iter().map(|c| c.restarts_used).sum(),
        seed: options.seed,
        cells,
    })
}
