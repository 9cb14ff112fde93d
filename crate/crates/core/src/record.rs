//! Observed RFQ records and their reduction to the dimensionless quote scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of dealers requested besides the reference dealer.
pub const MAX_OTHER_DEALERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Buy, Side::Sell];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }

    /// `+1` for buy, `-1` for sell: the reflection applied to sell quotes.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Done,
    TradedAway,
    NotTraded,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Done => "done",
            Outcome::TradedAway => "traded_away",
            Outcome::NotTraded => "not_traded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubOutcome {
    Tied,
    Covered,
    Other,
    NotApplicable,
}

impl SubOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            SubOutcome::Tied => "tied",
            SubOutcome::Covered => "covered",
            SubOutcome::Other => "other",
            SubOutcome::NotApplicable => "na",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    HighYield,
    Subordinated,
    LowNotional,
    HighNotional,
}

pub const COVARIATE_COUNT: usize = 4;

impl Covariate {
    pub const ALL: [Covariate; COVARIATE_COUNT] = [
        Covariate::HighYield,
        Covariate::Subordinated,
        Covariate::LowNotional,
        Covariate::HighNotional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Covariate::HighYield => "high_yield",
            Covariate::Subordinated => "subordinated",
            Covariate::LowNotional => "low_notional",
            Covariate::HighNotional => "high_notional",
        }
    }

    /// Position of the flag in [`RfqRecord::covariates`].
    pub fn index(self) -> usize {
        self as usize
    }
}

macro_rules! impl_text {
    ($t:ty, $what:literal, [$($v:expr),+]) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let s = s.trim();
                [$($v),+]
                    .into_iter()
                    .find(|v: &$t| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::InvalidRecord(format!(concat!("unknown ", $what, " {:?}"), s)))
            }
        }
    };
}

impl_text!(Side, "side", [Side::Buy, Side::Sell]);
impl_text!(
    Outcome,
    "outcome",
    [Outcome::Done, Outcome::TradedAway, Outcome::NotTraded]
);
impl_text!(
    SubOutcome,
    "sub_outcome",
    [
        SubOutcome::Tied,
        SubOutcome::Covered,
        SubOutcome::Other,
        SubOutcome::NotApplicable
    ]
);
impl_text!(
    Covariate,
    "covariate",
    [
        Covariate::HighYield,
        Covariate::Subordinated,
        Covariate::LowNotional,
        Covariate::HighNotional
    ]
);

/// One RFQ as seen by the reference dealer, in price units.
#[derive(Debug, Clone, PartialEq)]
pub struct RfqRecord {
    pub side: Side,
    pub outcome: Outcome,
    pub sub_outcome: SubOutcome,
    pub y_quote: f64,
    pub cover: Option<f64>,
    /// Dealers requested besides the reference dealer.
    pub n_other: usize,
    pub cbbt_mid: f64,
    pub cbbt_half_spread: f64,
    /// Flags indexed by [`Covariate::index`].
    pub covariates: [f64; COVARIATE_COUNT],
}

/// Likelihood case of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    DoneCover,
    DoneNoCover,
    Tied,
    Covered,
    Other,
    NotTraded,
}

impl Case {
    pub const ALL: [Case; 6] = [
        Case::DoneCover,
        Case::DoneNoCover,
        Case::Tied,
        Case::Covered,
        Case::Other,
        Case::NotTraded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Case::DoneCover => "done_cover",
            Case::DoneNoCover => "done_nocover",
            Case::Tied => "tied",
            Case::Covered => "covered",
            Case::Other => "other",
            Case::NotTraded => "not_traded",
        }
    }
}

impl RfqRecord {
    /// Checks the record invariants; the error names the first violation.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidRecord(why.to_string()));
        if !(1..=MAX_OTHER_DEALERS).contains(&self.n_other) {
            return bad("n out of range");
        }
        if !(self.cbbt_half_spread.is_finite() && self.cbbt_half_spread > 0.0) {
            return bad("non-positive half-spread");
        }
        if !(self.y_quote.is_finite() && self.cbbt_mid.is_finite()) {
            return bad("non-finite price");
        }
        if self.covariates.iter().any(|z| !z.is_finite()) {
            return bad("non-finite covariate");
        }
        let traded_away = self.outcome == Outcome::TradedAway;
        if traded_away == (self.sub_outcome == SubOutcome::NotApplicable) {
            return bad("sub_outcome inconsistent with outcome");
        }
        if let Some(c) = self.cover {
            if !c.is_finite() {
                return bad("non-finite cover");
            }
            if self.outcome != Outcome::Done {
                return bad("cover on a record that is not done");
            }
            if c == self.y_quote {
                return bad("cover ties the quote on a done record");
            }
            match self.side {
                Side::Buy if c < self.y_quote => return bad("cover below quote on buy"),
                Side::Sell if c > self.y_quote => return bad("cover above quote on sell"),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn case(&self) -> Case {
        match (self.outcome, self.sub_outcome, self.cover) {
            (Outcome::Done, _, Some(_)) => Case::DoneCover,
            (Outcome::Done, _, None) => Case::DoneNoCover,
            (Outcome::TradedAway, SubOutcome::Tied, _) => Case::Tied,
            (Outcome::TradedAway, SubOutcome::Covered, _) => Case::Covered,
            (Outcome::TradedAway, _, _) => Case::Other,
            (Outcome::NotTraded, _, _) => Case::NotTraded,
        }
    }
}

/// A record on the reduced scale `(price - mid) / half_spread`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedRecord {
    pub side: Side,
    pub case: Case,
    pub y: f64,
    /// Reduced cover; `NaN` unless the case is [`Case::DoneCover`].
    pub cover: f64,
    pub n: usize,
    pub z: [f64; COVARIATE_COUNT],
}

pub fn reduce(r: &RfqRecord) -> Result<ReducedRecord> {
    r.validate()?;
    let scale = |v: f64| (v - r.cbbt_mid) / r.cbbt_half_spread;
    Ok(ReducedRecord {
        side: r.side,
        case: r.case(),
        y: scale(r.y_quote),
        cover: r.cover.map_or(f64::NAN, scale),
        n: r.n_other,
        z: r.covariates,
    })
}
