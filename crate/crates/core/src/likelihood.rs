//! Censored likelihood of RFQ outcomes.
//!
//! Every case is written for buy orders, where a lower quote wins. Sell
//! records are evaluated by reflecting quotes and parameters (location, skew,
//! client mean and covariate coefficients change sign), so a single code path
//! serves both sides.
//!
//! With `j` competitors answering, `F`/`f` the competitor quote law and
//! `G`/`g` the client law, the per-count likelihoods are
//!
//! ```text
//! done, cover c     j f(c) (1-F(c))^(j-1) (1-G(y))
//! done, no cover    (1-F(y))^j (1-G(y))
//! tied              j (1-F(y))^(j-1) f(y) (1-G(y))
//! covered           j (1-F(y))^(j-1) int_{-inf}^y (1-G) f
//! other             int_{-inf}^y (1-(1-F)^j) g + (1-(1-F(y))^j)(1-G(y))
//! not traded        int_{-inf}^y (1-F)^j g
//! ```
//!
//! and the partial-participation model mixes them over `j ~ Binomial(n, p)`.

use std::collections::BTreeMap;

use log::debug;
use rayon::prelude::*;

use crate::cheb::ChebOptions;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, OtherRule, SideParams, Variant};
use crate::quadrature::{build_cdf_with, build_survival_integrals_with, SepCdf, SurvivalIntegrals};
use crate::record::{reduce, Case, ReducedRecord, RfqRecord, Side, COVARIATE_COUNT, MAX_OTHER_DEALERS};
use crate::sep::ClientParams;

/// Likelihood values below this are floored before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

const CHUNK: usize = 2048;

/// `ln v`, flooring tiny positive values; zero or negative gives `-inf`.
#[inline]
pub fn ln_floor(v: f64) -> f64 {
    if v > 0.0 {
        v.max(PROB_FLOOR).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `P(j competitors answer)`, `j = 0..=n`.
pub fn answer_weights(n: usize, p: f64, variant: Variant) -> [f64; MAX_OTHER_DEALERS + 1] {
    assert!(n <= MAX_OTHER_DEALERS);
    let mut w = [0.0; MAX_OTHER_DEALERS + 1];
    match variant {
        Variant::Full => w[n] = 1.0,
        Variant::Partial => {
            let mut binom = 1.0;
            for (j, wj) in w.iter_mut().enumerate().take(n + 1) {
                if j > 0 {
                    binom = binom * (n + 1 - j) as f64 / j as f64;
                }
                *wj = binom * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
            }
        }
    }
    w
}

/// `1 - (1 - F)^j` without cancellation when `F` is small.
#[inline]
fn one_minus_pow(cdf: f64, sf: f64, j: usize) -> f64 {
    if cdf < 0.5 {
        -((j as f64) * (-cdf).ln_1p()).exp_m1()
    } else {
        1.0 - sf.powi(j as i32)
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum of per-record log-likelihoods with a tally of impossible records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikSum {
    pub value: f64,
    pub zero_count: usize,
    pub first_zero: Option<usize>,
}

/// Outcome probabilities for one quote and dealer count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbabilities {
    /// Reference dealer wins.
    pub done: f64,
    /// Reference dealer wins and at least one competitor answered.
    pub done_answered: f64,
    /// A competitor wins and the reference dealer is second best.
    pub covered: f64,
    /// A competitor wins and the reference dealer is not second best.
    pub other: f64,
    /// A competitor wins.
    pub traded_away: f64,
    pub not_traded: f64,
}

struct Shifted {
    key: (u64, u64),
    integrals: SurvivalIntegrals,
}

/// Likelihood of one parameter cell, ready to evaluate many records.
///
/// Holds the dealer cdf and one set of censoring integrals per covariate
/// pattern; everything is immutable once prepared, so evaluation is shared
/// freely across threads.
pub struct CellModel {
    side: Side,
    variant: Variant,
    other_rule: OtherRule,
    p: f64,
    cov_idx: Vec<usize>,
    /// buy-oriented coefficients
    beta: Vec<f64>,
    gamma: Vec<f64>,
    /// buy-oriented laws at zero covariate shift
    dealer: SepCdf,
    client: ClientParams,
    kmax: usize,
    opts: ChebOptions,
    shifted: Vec<Shifted>,
}

impl CellModel {
    /// `params` are in the orientation of `side`; `kmax` bounds the dealer
    /// counts that will be evaluated.
    pub fn new(spec: &ModelSpec, side: Side, params: &SideParams, kmax: usize) -> Result<Self> {
        Self::with_options(spec, side, params, kmax, ChebOptions::default())
    }

    pub fn with_options(
        spec: &ModelSpec,
        side: Side,
        params: &SideParams,
        kmax: usize,
        opts: ChebOptions,
    ) -> Result<Self> {
        params.validate(spec.variant, spec.covariates.len())?;
        if !(1..=MAX_OTHER_DEALERS).contains(&kmax) {
            return Err(Error::Spec(format!("kmax = {kmax} out of range")));
        }
        let buy = match side {
            Side::Buy => params.clone(),
            Side::Sell => params.reflected(),
        };
        let dealer = build_cdf_with(&buy.dealer, &opts)?;
        let mut model = CellModel {
            side,
            variant: spec.variant,
            other_rule: spec.other_rule,
            p: params.p,
            cov_idx: spec.covariates.iter().map(|c| c.index()).collect(),
            beta: buy.beta,
            gamma: buy.gamma,
            dealer,
            client: buy.client,
            kmax,
            opts,
            shifted: Vec::new(),
        };
        model.prepare_pattern(&[0.0; COVARIATE_COUNT])?;
        Ok(model)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Builds the integrals for every covariate pattern in `records`.
    pub fn prepare(&mut self, records: &[ReducedRecord]) -> Result<()> {
        let mut pending: Vec<[f64; COVARIATE_COUNT]> = Vec::new();
        for r in records {
            let key = self.key(&r.z);
            if !self.shifted.iter().any(|s| s.key == key) && !pending.iter().any(|z| self.key(z) == key) {
                pending.push(r.z);
            }
        }
        for z in pending {
            self.prepare_pattern(&z)?;
        }
        Ok(())
    }

    fn prepare_pattern(&mut self, z: &[f64; COVARIATE_COUNT]) -> Result<()> {
        let key = self.key(z);
        if self.shifted.iter().any(|s| s.key == key) {
            return Ok(());
        }
        let integrals = self.build(z)?;
        self.shifted.push(Shifted { key, integrals });
        Ok(())
    }

    /// Buy-oriented location shifts `(z'beta, z'gamma)`.
    fn shifts(&self, z: &[f64; COVARIATE_COUNT]) -> (f64, f64) {
        let mut db = 0.0;
        let mut dg = 0.0;
        for (k, &i) in self.cov_idx.iter().enumerate() {
            db += z[i] * self.beta[k];
            dg += z[i] * self.gamma[k];
        }
        (db, dg)
    }

    fn key(&self, z: &[f64; COVARIATE_COUNT]) -> (u64, u64) {
        let (db, dg) = self.shifts(z);
        // +0.0 and -0.0 describe the same pattern
        ((db + 0.0).to_bits(), (dg + 0.0).to_bits())
    }

    fn build(&self, z: &[f64; COVARIATE_COUNT]) -> Result<SurvivalIntegrals> {
        let (db, dg) = self.shifts(z);
        let dealer = self.dealer.with_location(self.dealer.params().mu - db);
        let client = ClientParams {
            nu: self.client.nu - dg,
            tau: self.client.tau,
        };
        build_survival_integrals_with(&dealer, &client, self.kmax, &self.opts)
    }

    /// Runs `f` with the integrals for pattern `z`, building them if needed.
    fn with_integrals<T>(&self, z: &[f64; COVARIATE_COUNT], f: impl FnOnce(&SurvivalIntegrals) -> T) -> Result<T> {
        let key = self.key(z);
        match self.shifted.iter().find(|s| s.key == key) {
            Some(s) => Ok(f(&s.integrals)),
            None => {
                debug!("building integrals for unprepared covariate pattern {z:?}");
                Ok(f(&self.build(z)?))
            }
        }
    }

    /// The integrals for covariate pattern `z`, buy-oriented.
    pub fn integrals(&self, z: &[f64; COVARIATE_COUNT]) -> Result<SurvivalIntegrals> {
        self.with_integrals(z, |s| s.clone())
    }

    fn weights(&self, n: usize) -> [f64; MAX_OTHER_DEALERS + 1] {
        answer_weights(n, self.p, self.variant)
    }

    /// Likelihood of a case with quote `y`, cover `c` (reduced, in the
    /// orientation of this cell's side) and `n` other dealers.
    pub fn case_likelihood(&self, case: Case, y: f64, c: f64, n: usize, z: &[f64; COVARIATE_COUNT]) -> f64 {
        self.mixed(case, y, c, &self.weights(n), n, z)
    }

    /// Full-participation likelihood with exactly `j` answering competitors.
    pub fn full_term(&self, case: Case, y: f64, c: f64, j: usize, z: &[f64; COVARIATE_COUNT]) -> f64 {
        self.mixed(case, y, c, &answer_weights(j, 1.0, Variant::Full), j, z)
    }

    fn mixed(
        &self,
        case: Case,
        y: f64,
        c: f64,
        w: &[f64; MAX_OTHER_DEALERS + 1],
        n: usize,
        z: &[f64; COVARIATE_COUNT],
    ) -> f64 {
        assert!(n <= self.kmax, "n = {n} exceeds kmax = {}", self.kmax);
        let s = self.side.sign();
        self.with_integrals(z, |ints| buy_case(ints, self.other_rule, case, s * y, s * c, w, n))
            .unwrap_or(0.0)
    }

    /// Log-likelihood of one reduced record of this cell's side.
    pub fn loglik(&self, r: &ReducedRecord) -> f64 {
        debug_assert_eq!(r.side, self.side);
        ln_floor(self.case_likelihood(r.case, r.y, r.cover, r.n, &r.z))
    }

    /// Parallel, order-independent sum of [`CellModel::loglik`].
    pub fn loglik_sum(&self, records: &[ReducedRecord]) -> LoglikSum {
        let parts: Vec<(NeumaierSum, usize, Option<usize>)> = records
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut acc = NeumaierSum::default();
                let mut zeros = 0;
                let mut first = None;
                for (i, r) in chunk.iter().enumerate() {
                    let l = self.loglik(r);
                    if l == f64::NEG_INFINITY {
                        zeros += 1;
                        first.get_or_insert(ci * CHUNK + i);
                    } else {
                        acc.add(l);
                    }
                }
                (acc, zeros, first)
            })
            .collect();
        let mut total = NeumaierSum::default();
        let mut zero_count = 0;
        let mut first_zero = None;
        for (acc, zeros, first) in parts {
            total.add(acc.sum);
            total.add(acc.comp);
            zero_count += zeros;
            if first_zero.is_none() {
                first_zero = first;
            }
        }
        LoglikSum {
            value: if zero_count > 0 {
                f64::NEG_INFINITY
            } else {
                total.value()
            },
            zero_count,
            first_zero,
        }
    }

    /// Probabilities of the observable outcomes for quote `y` (orientation of
    /// this cell's side) and `n` other dealers.
    pub fn outcome_probabilities(&self, y: f64, n: usize, z: &[f64; COVARIATE_COUNT]) -> OutcomeProbabilities {
        assert!(n <= self.kmax);
        let w = self.weights(n);
        let yb = self.side.sign() * y;
        self.with_integrals(z, |s| {
            let d = s.dealer();
            let (cdf, sf) = d.cdf_sf(yb);
            let gs = s.client().sf(yb);
            let k = s.covered(yb);
            let mut dk = [0.0; MAX_OTHER_DEALERS];
            let mut ik = [0.0; MAX_OTHER_DEALERS];
            s.complements_into(yb, &mut dk[..n]);
            s.powers_into(yb, &mut ik[..n]);
            let mut out = OutcomeProbabilities {
                done: w[0] * gs,
                done_answered: 0.0,
                covered: 0.0,
                other: 0.0,
                traded_away: 0.0,
                not_traded: w[0] * s.client().cdf(yb),
            };
            for j in 1..=n {
                let sj = sf.powi(j as i32);
                let cov = j as f64 * sf.powi(j as i32 - 1) * k;
                let ta = dk[j - 1] + one_minus_pow(cdf, sf, j) * gs;
                out.done_answered += w[j] * sj * gs;
                out.covered += w[j] * cov;
                out.traded_away += w[j] * ta;
                out.other += w[j] * (ta - cov).max(0.0);
                out.not_traded += w[j] * ik[j - 1];
            }
            out.done += out.done_answered;
            out
        })
        .expect("integrals for a validated cell")
    }

    /// The covered likelihood with `j` competitors in its rewritten form,
    /// `j (1-F)^(j-1) (1 - (1-F)(1-G) - int_{-inf}^y (1-F) g)`.
    pub fn covered_rewritten(&self, y: f64, j: usize, z: &[f64; COVARIATE_COUNT]) -> f64 {
        let yb = self.side.sign() * y;
        self.with_integrals(z, |s| {
            let (_, sf) = s.dealer().cdf_sf(yb);
            let gs = s.client().sf(yb);
            j as f64 * sf.powi(j as i32 - 1) * (1.0 - sf * gs - s.power(1, yb))
        })
        .expect("integrals for a validated cell")
    }
}

/// Buy-oriented case likelihood mixed over answer counts with weights `w`.
fn buy_case(
    s: &SurvivalIntegrals,
    rule: OtherRule,
    case: Case,
    y: f64,
    c: f64,
    w: &[f64; MAX_OTHER_DEALERS + 1],
    n: usize,
) -> f64 {
    let d = s.dealer();
    let g = s.client();
    match case {
        Case::DoneCover => {
            let (_, sc) = d.cdf_sf(c);
            let fc = d.pdf(c);
            let mut acc = 0.0;
            for j in 1..=n {
                acc += w[j] * j as f64 * sc.powi(j as i32 - 1);
            }
            acc * fc * g.sf(y)
        }
        Case::DoneNoCover => {
            let sf = d.sf(y);
            let mut acc = 0.0;
            for (j, wj) in w.iter().enumerate().take(n + 1) {
                acc += wj * sf.powi(j as i32);
            }
            acc * g.sf(y)
        }
        Case::Tied => {
            let sf = d.sf(y);
            let mut acc = 0.0;
            for j in 1..=n {
                acc += w[j] * j as f64 * sf.powi(j as i32 - 1);
            }
            acc * d.pdf(y) * g.sf(y)
        }
        Case::Covered => {
            let sf = d.sf(y);
            let mut acc = 0.0;
            for j in 1..=n {
                acc += w[j] * j as f64 * sf.powi(j as i32 - 1);
            }
            acc * s.covered(y)
        }
        Case::Other => {
            let (cdf, sf) = d.cdf_sf(y);
            let gs = g.sf(y);
            let mut dk = [0.0; MAX_OTHER_DEALERS];
            s.complements_into(y, &mut dk[..n]);
            let k = match rule {
                OtherRule::TradedAway => 0.0,
                OtherRule::NotCovered => s.covered(y),
            };
            let mut acc = 0.0;
            for j in 1..=n {
                let mut term = dk[j - 1] + one_minus_pow(cdf, sf, j) * gs;
                if rule == OtherRule::NotCovered {
                    term = (term - j as f64 * sf.powi(j as i32 - 1) * k).max(0.0);
                }
                acc += w[j] * term;
            }
            acc
        }
        Case::NotTraded => {
            let mut ik = [0.0; MAX_OTHER_DEALERS];
            s.powers_into(y, &mut ik[..n]);
            let mut acc = w[0] * g.cdf(y);
            for j in 1..=n {
                acc += w[j] * ik[j - 1];
            }
            acc
        }
    }
}

/// Sum of record log-likelihoods under `spec`.
///
/// Fails with [`Error::ZeroLikelihood`] if any record is impossible under
/// the parameters, and with [`Error::Spec`] if a record has no parameter cell.
pub fn total_loglik(dataset: &[RfqRecord], spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    let mut groups: BTreeMap<(Side, Option<usize>), Vec<(usize, ReducedRecord)>> = BTreeMap::new();
    for (i, r) in dataset.iter().enumerate() {
        let red = reduce(r)?;
        let cell_n = spec
            .cells
            .iter()
            .find(|c| c.side == red.side && c.n == Some(red.n))
            .map(|_| Some(red.n))
            .or_else(|| {
                spec.cells
                    .iter()
                    .find(|c| c.side == red.side && c.n.is_none())
                    .map(|_| None)
            })
            .ok_or_else(|| Error::Spec(format!("no parameters for {} records with n = {}", red.side, red.n)))?;
        groups.entry((red.side, cell_n)).or_default().push((i, red));
    }
    let mut total = NeumaierSum::default();
    let mut zero_count = 0;
    let mut first_zero: Option<usize> = None;
    for ((side, n), members) in groups {
        let params = spec
            .cell(side, n.unwrap_or(members[0].1.n))
            .expect("cell resolved above");
        let kmax = members.iter().map(|(_, r)| r.n).max().unwrap_or(1);
        let records: Vec<ReducedRecord> = members.iter().map(|(_, r)| *r).collect();
        let mut model = CellModel::new(spec, side, params, kmax)?;
        model.prepare(&records)?;
        let sum = model.loglik_sum(&records);
        if sum.zero_count > 0 {
            zero_count += sum.zero_count;
            let idx = members[sum.first_zero.expect("zero seen")].0;
            first_zero = Some(first_zero.map_or(idx, |f| f.min(idx)));
        } else {
            total.add(sum.value);
        }
    }
    if zero_count > 0 {
        return Err(Error::ZeroLikelihood {
            count: zero_count,
            first: first_zero.expect("zero seen"),
        });
    }
    Ok(total.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SideParams;
    use crate::sep::SepParams;

    fn table6_buy(p: f64) -> SideParams {
        SideParams::new(
            SepParams::new(0.735, 0.179, 0.424, 0.906).unwrap(),
            ClientParams::new(1.72, 1.92).unwrap(),
            p,
        )
    }

    fn model(variant: Variant, side: Side, p: f64) -> CellModel {
        let params = match side {
            Side::Buy => table6_buy(p),
            Side::Sell => table6_buy(p).reflected(),
        };
        let params = if variant == Variant::Full {
            SideParams { p: 1.0, ..params }
        } else {
            params
        };
        let spec = ModelSpec::pooled(variant, side, params.clone());
        CellModel::new(&spec, side, &params, 5).unwrap()
    }

    const Z0: [f64; COVARIATE_COUNT] = [0.0; COVARIATE_COUNT];

    #[test]
    fn weights_are_binomial() {
        let w = answer_weights(2, 0.4, Variant::Partial);
        assert!((w[0] - 0.36).abs() < 1e-15 && (w[1] - 0.48).abs() < 1e-15 && (w[2] - 0.16).abs() < 1e-15);
        assert_eq!(answer_weights(3, 0.2, Variant::Full)[3], 1.0);
        let w = answer_weights(5, 1.0, Variant::Partial);
        assert_eq!(w[5], 1.0);
        assert_eq!(w[..5].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn done_nocover_at_both_medians_is_a_quarter() {
        // symmetric laws with a common median at 0
        let params = SideParams::new(
            SepParams::new(1.3, 0.0, 0.0, 1.0).unwrap(),
            ClientParams::new(0.0, 2.0).unwrap(),
            1.0,
        );
        let spec = ModelSpec::pooled(Variant::Full, Side::Buy, params.clone());
        let m = CellModel::new(&spec, Side::Buy, &params, 1).unwrap();
        let l = m.case_likelihood(Case::DoneNoCover, 0.0, f64::NAN, 1, &Z0);
        assert!((l - 0.25).abs() < 1e-12);
    }

    #[test]
    fn partition_sums_to_one() {
        for variant in [Variant::Full, Variant::Partial] {
            for side in Side::ALL {
                let m = model(variant, side, 0.4);
                for y in [-4.0, -0.5, 0.0, 0.7, 2.0, 6.0] {
                    for n in 1..=5 {
                        let o = m.outcome_probabilities(y, n, &Z0);
                        let total = o.done + o.traded_away + o.not_traded;
                        assert!((total - 1.0).abs() < 1e-10, "{variant:?} {side:?} y={y} n={n} {total}");
                        let nc = m.case_likelihood(Case::DoneNoCover, y, f64::NAN, n, &Z0);
                        assert!((nc - o.done).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn covered_forms_agree() {
        let m = model(Variant::Full, Side::Buy, 1.0);
        for y in [-3.0, -0.2, 0.5, 1.5, 4.0] {
            for j in 1..=5 {
                let a = m.full_term(Case::Covered, y, f64::NAN, j, &Z0);
                let b = m.covered_rewritten(y, j, &Z0);
                assert!((a - b).abs() < 1e-12, "y={y} j={j} {a} {b}");
            }
        }
    }

    #[test]
    fn sell_is_reflected_buy() {
        let buy = model(Variant::Partial, Side::Buy, 0.4);
        let sell = model(Variant::Partial, Side::Sell, 0.4);
        for case in Case::ALL {
            for y in [-1.0, 0.3, 2.0] {
                let c = y + 0.8;
                let a = buy.case_likelihood(case, y, c, 3, &Z0);
                let b = sell.case_likelihood(case, -y, -c, 3, &Z0);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{case:?}");
            }
        }
    }

    #[test]
    fn zero_answer_probability_reduces_to_client_survival() {
        let m = model(Variant::Partial, Side::Buy, 0.0);
        let params = table6_buy(0.0);
        for y in [-1.0, 0.0, 2.5] {
            let l = m.case_likelihood(Case::DoneNoCover, y, f64::NAN, 4, &Z0);
            assert!((l - params.client.sf(y)).abs() < 1e-15);
        }
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut s = NeumaierSum::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }
}
