//! Generative RFQ mechanism.
//!
//! Each RFQ draws its side, the number `n` of other requested dealers, the
//! covariate flags, the reference quote `Y`, the answer flags `A_k`, the
//! competitor quotes `W_k` and the client's reservation value `V`, all on the
//! reduced scale, then applies the trading rule: a trade happens iff the best
//! answered price beats `V`, and goes to the best price, ties broken uniformly.
//!
//! Records are produced in chunks of [`SIM_CHUNK`], each driven by its own
//! ChaCha8 stream `(seed, chunk index)`, so the output does not depend on the
//! number of threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Variant};
use crate::record::{Case, Outcome, RfqRecord, Side, SubOutcome, COVARIATE_COUNT, MAX_OTHER_DEALERS};
use crate::sep::{Sep, SepSampler};

/// Records per independently seeded stream.
pub const SIM_CHUNK: usize = 4096;

/// How the reference dealer's reduced quote is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceRule {
    /// From the same law as the competitors' quotes.
    SameAsCompetitors,
    /// Always the given reduced quote (in the side's own orientation).
    Fixed(f64),
}

/// Generator of the market context, which only serves to exercise the
/// reduction from prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketContext {
    /// `cbbt_mid` is log-uniform on this range.
    pub mid_range: (f64, f64),
    /// `cbbt_half_spread` is uniform on this range.
    pub half_spread_range: (f64, f64),
}

impl Default for MarketContext {
    fn default() -> Self {
        MarketContext {
            mid_range: (50.0, 150.0),
            half_spread_range: (0.05, 0.5),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub truth: ModelSpec,
    /// `P(n = k + 1)`.
    pub n_distribution: [f64; MAX_OTHER_DEALERS],
    pub buy_prob: f64,
    pub record_count: usize,
    /// Probability that an existing cover price is recorded.
    pub cover_record_prob: f64,
    pub market: MarketContext,
    /// Independent Bernoulli probability of each covariate flag.
    pub covariate_probs: [f64; COVARIATE_COUNT],
    pub reference: ReferenceRule,
    /// Optional price grid on the reduced scale; quotes are rounded to it,
    /// which makes exact ties (and "tied" outcomes) possible.
    pub tick: Option<f64>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(truth: ModelSpec, record_count: usize, seed: u64) -> Self {
        SimConfig {
            truth,
            n_distribution: [0.2; MAX_OTHER_DEALERS],
            buy_prob: 1.0,
            record_count,
            cover_record_prob: 1.0,
            market: MarketContext::default(),
            covariate_probs: [0.0; COVARIATE_COUNT],
            reference: ReferenceRule::SameAsCompetitors,
            tick: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        let total: f64 = self.n_distribution.iter().sum();
        if self.n_distribution.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "n distribution must be a probability vector (sums to {total})"
            )));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} is not a probability")))
            }
        };
        unit("buy_prob", self.buy_prob)?;
        unit("cover_record_prob", self.cover_record_prob)?;
        for p in self.covariate_probs {
            unit("covariate probability", p)?;
        }
        let (lo, hi) = self.market.mid_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config("mid range must be positive and ordered".into()));
        }
        let (lo, hi) = self.market.half_spread_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config("half-spread range must be positive and ordered".into()));
        }
        if let Some(t) = self.tick {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tick {t} must be positive")));
            }
        }
        for side in Side::ALL {
            let used = match side {
                Side::Buy => self.buy_prob > 0.0,
                Side::Sell => self.buy_prob < 1.0,
            };
            for (k, &pn) in self.n_distribution.iter().enumerate() {
                if used && pn > 0.0 && self.truth.cell(side, k + 1).is_none() {
                    return Err(Error::Config(format!(
                        "no true parameters for {side} with n = {}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Latent draws behind one record, reduced scale, side's own orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraw {
    pub y: f64,
    pub v: f64,
    /// Quotes of all `n` requested competitors, answered or not.
    pub w: Vec<f64>,
    pub answered: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub records: Vec<RfqRecord>,
    pub latent: Vec<LatentDraw>,
}

/// Samplers for one (side, n) cell.
struct CellDraw {
    dealer: SepSampler,
    nu: f64,
    tau: f64,
    p: f64,
    beta: [f64; COVARIATE_COUNT],
    gamma: [f64; COVARIATE_COUNT],
}

struct Prepared<'a> {
    config: &'a SimConfig,
    /// indexed by [side][n - 1]
    cells: [Vec<Option<CellDraw>>; 2],
}

impl<'a> Prepared<'a> {
    fn new(config: &'a SimConfig) -> Result<Self> {
        config.validate()?;
        let spec = &config.truth;
        let mut cells: [Vec<Option<CellDraw>>; 2] = [Vec::new(), Vec::new()];
        for (si, side) in Side::ALL.into_iter().enumerate() {
            for n in 1..=MAX_OTHER_DEALERS {
                let cell = match spec.cell(side, n) {
                    None => None,
                    Some(params) => {
                        let mut beta = [0.0; COVARIATE_COUNT];
                        let mut gamma = [0.0; COVARIATE_COUNT];
                        for (k, c) in spec.covariates.iter().enumerate() {
                            beta[c.index()] = params.beta[k];
                            gamma[c.index()] = params.gamma[k];
                        }
                        Some(CellDraw {
                            dealer: Sep::new(params.dealer)?.sampler(),
                            nu: params.client.nu,
                            tau: params.client.tau,
                            p: match spec.variant {
                                Variant::Full => 1.0,
                                Variant::Partial => params.p,
                            },
                            beta,
                            gamma,
                        })
                    }
                };
                cells[si].push(cell);
            }
        }
        Ok(Prepared { config, cells })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (RfqRecord, LatentDraw) {
        let cfg = self.config;
        let side = if rng.random::<f64>() < cfg.buy_prob {
            Side::Buy
        } else {
            Side::Sell
        };
        let n = categorical(&cfg.n_distribution, rng) + 1;
        let mut z = [0.0; COVARIATE_COUNT];
        for (zi, &p) in z.iter_mut().zip(&cfg.covariate_probs) {
            if p > 0.0 && rng.random::<f64>() < p {
                *zi = 1.0;
            }
        }
        let cell = self.cells[side as usize][n - 1]
            .as_ref()
            .expect("validated config has every used cell");
        let dshift: f64 = z.iter().zip(&cell.beta).map(|(a, b)| a * b).sum();
        let cshift: f64 = z.iter().zip(&cell.gamma).map(|(a, b)| a * b).sum();
        let round = |x: f64| match cfg.tick {
            Some(t) => (x / t).round() * t,
            None => x,
        };

        let y = round(match cfg.reference {
            ReferenceRule::SameAsCompetitors => cell.dealer.sample(rng) - dshift,
            ReferenceRule::Fixed(y) => y,
        });
        let mut w = Vec::with_capacity(n);
        let mut answered = Vec::with_capacity(n);
        for _ in 0..n {
            answered.push(cell.p >= 1.0 || rng.random::<f64>() < cell.p);
            w.push(round(cell.dealer.sample(rng) - dshift));
        }
        let e: f64 = rng.sample(StandardNormal);
        let v = cell.nu - cshift + cell.tau * e;

        // compare in buy orientation: lower is better for the client
        let s = side.sign();
        let (yb, vb) = (s * y, s * v);
        let mut best = f64::INFINITY;
        let mut below = 0usize;
        let mut equal = 0usize;
        for (&wk, &ak) in w.iter().zip(&answered) {
            if !ak {
                continue;
            }
            let wb = s * wk;
            best = best.min(wb);
            if wb < yb {
                below += 1;
            } else if wb == yb {
                equal += 1;
            }
        }
        let answers = answered.iter().filter(|a| **a).count();

        let mut cover = None;
        let (outcome, sub) = if yb.min(best) > vb {
            (Outcome::NotTraded, SubOutcome::NotApplicable)
        } else if below > 0 {
            let sub = if below == 1 && equal == 0 {
                SubOutcome::Covered
            } else {
                SubOutcome::Other
            };
            (Outcome::TradedAway, sub)
        } else if equal > 0 && rng.random_range(0..=equal) > 0 {
            (Outcome::TradedAway, SubOutcome::Tied)
        } else {
            // a tied win reveals a cover equal to the quote, which is not recorded
            if answers > 0 && equal == 0 && rng.random::<f64>() < cfg.cover_record_prob {
                cover = Some(s * best);
            }
            (Outcome::Done, SubOutcome::NotApplicable)
        };

        let (mlo, mhi) = cfg.market.mid_range;
        let mid = (mlo.ln() + rng.random::<f64>() * (mhi / mlo).ln()).exp();
        let (hlo, hhi) = cfg.market.half_spread_range;
        let half = hlo + rng.random::<f64>() * (hhi - hlo);
        let y_quote = mid + half * y;
        let cover = cover
            .map(|c| mid + half * c)
            // rounding to prices must not break the strict ordering
            .filter(|&c| s * (c - y_quote) > 0.0);
        let record = RfqRecord {
            side,
            outcome,
            sub_outcome: sub,
            y_quote,
            cover,
            n_other: n,
            cbbt_mid: mid,
            cbbt_half_spread: half,
            covariates: z,
        };
        (record, LatentDraw { y, v, w, answered })
    }
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// One RFQ drawn with the caller's generator.
pub fn simulate_rfq<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<(RfqRecord, LatentDraw)> {
    Ok(Prepared::new(config)?.draw(rng))
}

/// `record_count` i.i.d. RFQs; deterministic in `config.seed`.
pub fn simulate_dataset(config: &SimConfig) -> Result<SimOutput> {
    let prepared = Prepared::new(config)?;
    let chunks = config.record_count.div_ceil(SIM_CHUNK);
    let parts: Vec<Vec<(RfqRecord, LatentDraw)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(config.seed, c);
            let len = SIM_CHUNK.min(config.record_count - c * SIM_CHUNK);
            (0..len).map(|_| prepared.draw(&mut rng)).collect()
        })
        .collect();
    let mut out = SimOutput {
        records: Vec::with_capacity(config.record_count),
        latent: Vec::with_capacity(config.record_count),
    };
    for part in parts {
        for (r, l) in part {
            out.records.push(r);
            out.latent.push(l);
        }
    }
    Ok(out)
}

/// Streams outcome counts of `count` simulated RFQs without keeping them.
/// Tallies are by (side, n) and [`OutcomeColumn`].
pub fn simulate_counts(config: &SimConfig) -> Result<OutcomeTable> {
    let prepared = Prepared::new(config)?;
    let chunks = config.record_count.div_ceil(SIM_CHUNK);
    let tables: Vec<OutcomeTable> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(config.seed, c);
            let len = SIM_CHUNK.min(config.record_count - c * SIM_CHUNK);
            let mut t = OutcomeTable::default();
            for _ in 0..len {
                t.add(&prepared.draw(&mut rng).0);
            }
            t
        })
        .collect();
    let mut total = OutcomeTable::default();
    for t in tables {
        total.merge(&t);
    }
    Ok(total)
}

/// Columns of the outcome breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeColumn {
    Done,
    Tied,
    Covered,
    Other,
    NotTraded,
}

impl OutcomeColumn {
    pub const ALL: [OutcomeColumn; 5] = [
        OutcomeColumn::Done,
        OutcomeColumn::Tied,
        OutcomeColumn::Covered,
        OutcomeColumn::Other,
        OutcomeColumn::NotTraded,
    ];

    pub fn of(r: &RfqRecord) -> OutcomeColumn {
        match r.case() {
            Case::DoneCover | Case::DoneNoCover => OutcomeColumn::Done,
            Case::Tied => OutcomeColumn::Tied,
            Case::Covered => OutcomeColumn::Covered,
            Case::Other => OutcomeColumn::Other,
            Case::NotTraded => OutcomeColumn::NotTraded,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OutcomeColumn::Done => "done",
            OutcomeColumn::Tied => "tied",
            OutcomeColumn::Covered => "covered",
            OutcomeColumn::Other => "other",
            OutcomeColumn::NotTraded => "not_traded",
        }
    }
}

/// Outcome counts by side and number of other dealers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomeTable {
    counts: BTreeMap<(Side, usize), [u64; 5]>,
}

impl OutcomeTable {
    pub fn add(&mut self, r: &RfqRecord) {
        self.counts.entry((r.side, r.n_other)).or_default()[OutcomeColumn::of(r) as usize] += 1;
    }

    pub fn merge(&mut self, other: &OutcomeTable) {
        for (k, v) in &other.counts {
            let row = self.counts.entry(*k).or_default();
            for (a, b) in row.iter_mut().zip(v) {
                *a += b;
            }
        }
    }

    pub fn count(&self, side: Side, n: usize, col: OutcomeColumn) -> u64 {
        self.counts.get(&(side, n)).map_or(0, |row| row[col as usize])
    }

    pub fn row_total(&self, side: Side, n: usize) -> u64 {
        self.counts.get(&(side, n)).map_or(0, |row| row.iter().sum())
    }

    pub fn share(&self, side: Side, n: usize, col: OutcomeColumn) -> f64 {
        let total = self.row_total(side, n);
        if total == 0 {
            0.0
        } else {
            self.count(side, n, col) as f64 / total as f64
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|r| r.iter()).sum()
    }

    pub fn sides(&self) -> Vec<Side> {
        let mut s: Vec<Side> = self.counts.keys().map(|k| k.0).collect();
        s.dedup();
        s
    }

    /// Text table per side: one row per n, a total row and a total column.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for side in self.sides() {
            let _ = writeln!(out, "{side} RFQs by number of other requested dealers and outcome");
            let _ = write!(out, "{:>4}", "n");
            for c in OutcomeColumn::ALL {
                let _ = write!(out, " {:>11}", c.label());
            }
            let _ = writeln!(out, " {:>11}", "total");
            let mut col_totals = [0u64; 5];
            for n in 1..=MAX_OTHER_DEALERS {
                let Some(row) = self.counts.get(&(side, n)) else {
                    continue;
                };
                let _ = write!(out, "{n:>4}");
                for (i, v) in row.iter().enumerate() {
                    col_totals[i] += v;
                    let _ = write!(out, " {v:>11}");
                }
                let _ = writeln!(out, " {:>11}", row.iter().sum::<u64>());
            }
            let _ = write!(out, "{:>4}", "all");
            for v in col_totals {
                let _ = write!(out, " {v:>11}");
            }
            let _ = writeln!(out, " {:>11}", col_totals.iter().sum::<u64>());
        }
        out
    }
}

/// Outcome counts and shares per (side, n, outcome) cell.
pub fn outcome_frequencies(records: &[RfqRecord]) -> OutcomeTable {
    let mut t = OutcomeTable::default();
    for r in records {
        t.add(r);
    }
    t
}
