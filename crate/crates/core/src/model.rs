//! Model variants and parameter sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Covariate, Side, MAX_OTHER_DEALERS};
use crate::sep::{ClientParams, SepParams};

/// Whether every requested dealer answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Partial,
}

/// One parameter set per side, or one per side and dealer count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    Pooled,
    PerN,
}

/// Likelihood used for "other traded away" records.
///
/// `TradedAway` is the probability that some competitor wins, treating the
/// label as a missing value. `NotCovered` subtracts the covered event, which
/// is exact when "other" means "traded away and not second best" -- the
/// labelling the simulator uses, hence the default. Data where covered
/// trades may also be reported as "other" (say with a single competitor)
/// need `TradedAway`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OtherRule {
    TradedAway,
    #[default]
    NotCovered,
}

macro_rules! impl_text {
    ($t:ty, $what:literal, [$(($v:path, $s:literal)),+]) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($v => $s,)+
                }
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($s => Ok($v),)+
                    other => Err(Error::Config(format!(concat!("unknown ", $what, " {:?}"), other))),
                }
            }
        }
    };
}

impl_text!(
    Variant,
    "model",
    [(Variant::Full, "full"), (Variant::Partial, "partial")]
);
impl_text!(
    Pooling,
    "pooling",
    [(Pooling::Pooled, "pooled"), (Pooling::PerN, "per-n")]
);
impl_text!(
    OtherRule,
    "other rule",
    [
        (OtherRule::TradedAway, "traded-away"),
        (OtherRule::NotCovered, "not-covered")
    ]
);

/// Parameters of one side (and dealer count, when not pooled), in that
/// side's own orientation: sell-side values are reported un-reflected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideParams {
    pub dealer: SepParams,
    pub client: ClientParams,
    /// Probability that a requested competitor answers.
    pub p: f64,
    /// Dealer covariate coefficients, aligned with [`ModelSpec::covariates`].
    #[serde(default)]
    pub beta: Vec<f64>,
    /// Client covariate coefficients, aligned with [`ModelSpec::covariates`].
    #[serde(default)]
    pub gamma: Vec<f64>,
}

impl SideParams {
    pub fn new(dealer: SepParams, client: ClientParams, p: f64) -> Self {
        SideParams {
            dealer,
            client,
            p,
            beta: Vec::new(),
            gamma: Vec::new(),
        }
    }

    pub fn with_covariates(mut self, beta: Vec<f64>, gamma: Vec<f64>) -> Self {
        self.beta = beta;
        self.gamma = gamma;
        self
    }

    /// The mirror image used to evaluate a sell law with buy-side formulas.
    pub fn reflected(&self) -> SideParams {
        SideParams {
            dealer: self.dealer.reflected(),
            client: self.client.reflected(),
            p: self.p,
            beta: self.beta.iter().map(|b| -b).collect(),
            gamma: self.gamma.iter().map(|g| -g).collect(),
        }
    }

    pub fn validate(&self, variant: Variant, ncov: usize) -> Result<()> {
        self.dealer.validate()?;
        self.client.validate()?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::domain("p", self.p, "must lie in [0, 1]"));
        }
        if variant == Variant::Full && self.p != 1.0 {
            return Err(Error::domain(
                "p",
                self.p,
                "is fixed at 1 in the full-participation model",
            ));
        }
        if self.beta.len() != ncov || self.gamma.len() != ncov {
            return Err(Error::Spec(format!(
                "{} covariates but {} beta and {} gamma coefficients",
                ncov,
                self.beta.len(),
                self.gamma.len()
            )));
        }
        if self.beta.iter().chain(&self.gamma).any(|c| !c.is_finite()) {
            return Err(Error::Spec("non-finite covariate coefficient".into()));
        }
        Ok(())
    }
}

/// Parameters of one fit cell: a side, and a dealer count unless pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub side: Side,
    pub n: Option<usize>,
    pub params: SideParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub pooling: Pooling,
    pub other_rule: OtherRule,
    #[serde(default)]
    pub covariates: Vec<Covariate>,
    pub cells: Vec<CellSpec>,
}

impl ModelSpec {
    /// A pooled model with a single side.
    pub fn pooled(variant: Variant, side: Side, params: SideParams) -> Self {
        ModelSpec {
            variant,
            pooling: Pooling::Pooled,
            other_rule: OtherRule::NotCovered,
            covariates: Vec::new(),
            cells: vec![CellSpec { side, n: None, params }],
        }
    }

    pub fn with_covariates(mut self, covariates: Vec<Covariate>) -> Self {
        self.covariates = covariates;
        self
    }

    pub fn with_other_rule(mut self, rule: OtherRule) -> Self {
        self.other_rule = rule;
        self
    }

    /// Parameters governing records of `side` with `n` other dealers.
    pub fn cell(&self, side: Side, n: usize) -> Option<&SideParams> {
        self.cells
            .iter()
            .find(|c| c.side == side && c.n == Some(n))
            .or_else(|| self.cells.iter().find(|c| c.side == side && c.n.is_none()))
            .map(|c| &c.params)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        for c in &self.cells {
            c.params.validate(self.variant, self.covariates.len())?;
            match (self.pooling, c.n) {
                (Pooling::Pooled, Some(_)) => return Err(Error::Spec("pooled model with a per-n cell".into())),
                (Pooling::PerN, None) => return Err(Error::Spec("per-n model with a pooled cell".into())),
                (_, Some(n)) if !(1..=MAX_OTHER_DEALERS).contains(&n) => {
                    return Err(Error::Spec(format!("cell for n = {n} out of range")))
                }
                _ => {}
            }
            if seen.contains(&(c.side, c.n)) {
                return Err(Error::Spec(format!("duplicate cell {} {:?}", c.side, c.n)));
            }
            seen.push((c.side, c.n));
        }
        let mut covs = self.covariates.clone();
        covs.sort();
        covs.dedup();
        if covs.len() != self.covariates.len() {
            return Err(Error::Spec("repeated covariate".into()));
        }
        Ok(())
    }
}
