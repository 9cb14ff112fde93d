//! Best-competitor-price densities and hit-ratio curves of a fitted model.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{answer_weights, CellModel};
use crate::model::ModelSpec;
use crate::record::{Side, COVARIATE_COUNT, MAX_OTHER_DEALERS};

/// Default evaluation grid: 801 points on `[-8, 8]`.
pub fn default_grid() -> Vec<f64> {
    linear_grid(-8.0, 8.0, 801)
}

pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { hi } else { lo + i as f64 * h })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticsRequest {
    pub side: Side,
    pub n: usize,
    pub params: ModelSpec,
    /// Reduced quotes, in the orientation of `side`.
    pub grid: Vec<f64>,
    /// Covariate values; zero gives the baseline laws.
    pub z: [f64; COVARIATE_COUNT],
}

impl AnalyticsRequest {
    pub fn new(side: Side, n: usize, params: ModelSpec) -> Self {
        AnalyticsRequest {
            side,
            n,
            params,
            grid: default_grid(),
            z: [0.0; COVARIATE_COUNT],
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_OTHER_DEALERS).contains(&self.n) {
            return Err(Error::Spec(format!("n = {} out of range", self.n)));
        }
        if self.grid.iter().any(|d| !d.is_finite()) {
            return Err(Error::Spec("non-finite grid point".into()));
        }
        if self.grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Spec("grid is not sorted".into()));
        }
        self.params.validate()?;
        self.cell().map(|_| ())
    }

    fn cell(&self) -> Result<CellModel> {
        let params = self
            .params
            .cell(self.side, self.n)
            .ok_or_else(|| Error::Spec(format!("no parameters for {} with n = {}", self.side, self.n)))?;
        CellModel::new(&self.params, self.side, params, self.n)
    }
}

/// Density of the best answered competitor quote (lowest for buy, highest
/// for sell) given that at least one competitor answers.
pub fn best_price_density(req: &AnalyticsRequest) -> Result<Vec<f64>> {
    req.validate()?;
    let params = req.params.cell(req.side, req.n).expect("validated");
    let w = answer_weights(req.n, params.p, req.params.variant);
    let answered = 1.0 - w[0];
    if !(answered > 0.0) {
        return Err(Error::domain("p", params.p, "no competitor ever answers"));
    }
    let model = req.cell()?;
    let ints = model.integrals(&req.z)?;
    let dealer = ints.dealer();
    let s = req.side.sign();
    Ok(req
        .grid
        .iter()
        .map(|&d| {
            let x = s * d;
            let f = dealer.pdf(x);
            let sf = dealer.sf(x);
            let mut acc = 0.0;
            for j in 1..=req.n {
                acc += w[j] * j as f64 * sf.powi(j as i32 - 1);
            }
            (acc * f / answered).max(0.0)
        })
        .collect())
}

/// Probability that the reference dealer trades at reduced quote `delta`,
/// given that the RFQ trades.
pub fn hit_ratio(req: &AnalyticsRequest) -> Result<Vec<f64>> {
    req.validate()?;
    let model = req.cell()?;
    Ok(req
        .grid
        .iter()
        .map(|&d| {
            let o = model.outcome_probabilities(d, req.n, &req.z);
            let traded = 1.0 - o.not_traded;
            if traded > 0.0 {
                (o.done / traded).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    BestPriceDensity,
    HitRatio,
}

impl CurveKind {
    pub const ALL: [CurveKind; 2] = [CurveKind::BestPriceDensity, CurveKind::HitRatio];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::BestPriceDensity => "best_price_density",
            CurveKind::HitRatio => "hit_ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub side: Side,
    pub n: usize,
    pub kind: CurveKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn curve(req: &AnalyticsRequest, kind: CurveKind) -> Result<Curve> {
    let values = match kind {
        CurveKind::BestPriceDensity => best_price_density(req)?,
        CurveKind::HitRatio => hit_ratio(req)?,
    };
    Ok(Curve {
        side: req.side,
        n: req.n,
        kind,
        grid: req.grid.clone(),
        values,
    })
}

pub const CURVE_COLUMNS: [&str; 5] = ["delta", "value", "n", "side", "curve_kind"];

/// Writes curves as CSV with columns [`CURVE_COLUMNS`]. Numbers use the
/// shortest round-trip representation, so output is byte-reproducible.
pub fn export_curves(curves: &[Curve], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e| Error::csv(path, e);
    w.write_record(CURVE_COLUMNS).map_err(csv_err)?;
    for c in curves {
        let n = c.n.to_string();
        for (d, v) in c.grid.iter().zip(&c.values) {
            w.write_record([&d.to_string(), &v.to_string(), &n, c.side.as_str(), c.kind.as_str()])
                .map_err(csv_err)?;
        }
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::CellModel;
    use crate::model::{SideParams, Variant};
    use crate::quadrature::build_cdf;
    use crate::record::Case;
    use crate::sep::{sep_pdf, ClientParams, SepParams};

    fn spec(variant: Variant, p: f64) -> ModelSpec {
        ModelSpec::pooled(
            variant,
            Side::Buy,
            SideParams::new(
                SepParams::new(0.735, 0.179, 0.424, 0.906).unwrap(),
                ClientParams::new(1.72, 1.92).unwrap(),
                p,
            ),
        )
    }

    fn sell_mirror(spec: &ModelSpec) -> ModelSpec {
        let mut m = spec.clone();
        for c in &mut m.cells {
            c.side = Side::Sell;
            c.params = c.params.reflected();
        }
        m
    }

    #[test]
    fn single_competitor_density_is_the_quote_density() {
        let req = AnalyticsRequest::new(Side::Buy, 1, spec(Variant::Partial, 0.4));
        let d = best_price_density(&req).unwrap();
        let p = &req.params.cells[0].params.dealer;
        for (x, v) in req.grid.iter().zip(&d) {
            let f = sep_pdf(*x, p).unwrap();
            assert!((v - f).abs() <= 1e-12 * f.max(1e-300) + 1e-300, "{x}: {v} vs {f}");
        }
    }

    #[test]
    fn full_participation_is_the_minimum_order_statistic() {
        let req = AnalyticsRequest::new(Side::Buy, 4, spec(Variant::Full, 1.0)).with_grid(linear_grid(-3.0, 3.0, 61));
        let d = best_price_density(&req).unwrap();
        let cdf = build_cdf(&req.params.cells[0].params.dealer).unwrap();
        for (x, v) in req.grid.iter().zip(&d) {
            let expect = 4.0 * cdf.pdf(*x) * cdf.sf(*x).powi(3);
            assert!((v - expect).abs() < 1e-14, "{x}");
        }
    }

    #[test]
    fn zero_answer_probability_rejected() {
        let req = AnalyticsRequest::new(Side::Buy, 2, spec(Variant::Partial, 0.0));
        assert!(best_price_density(&req).is_err());
        assert!(hit_ratio(&req).is_ok());
    }

    #[test]
    fn hit_ratio_denominator_matches_not_traded_likelihood() {
        let s = spec(Variant::Partial, 0.4);
        let params = &s.cells[0].params;
        let m = CellModel::new(&s, Side::Buy, params, 3).unwrap();
        let z = [0.0; COVARIATE_COUNT];
        for y in [-2.0, -0.3, 0.0, 0.7, 2.5] {
            let o = m.outcome_probabilities(y, 3, &z);
            let l3 = m.case_likelihood(Case::NotTraded, y, f64::NAN, 3, &z);
            assert!((o.not_traded - l3).abs() < 1e-12);
        }
    }

    #[test]
    fn sell_curves_mirror_buy_curves() {
        let buy = spec(Variant::Partial, 0.4);
        let sell = sell_mirror(&buy);
        for n in [1, 3, 5] {
            let grid = linear_grid(-4.0, 4.0, 41);
            let neg: Vec<f64> = grid.iter().rev().map(|d| -d).collect();
            let rb = AnalyticsRequest::new(Side::Buy, n, buy.clone()).with_grid(grid);
            let rs = AnalyticsRequest::new(Side::Sell, n, sell.clone()).with_grid(neg);
            for kind in CurveKind::ALL {
                let b = curve(&rb, kind).unwrap().values;
                let mut s = curve(&rs, kind).unwrap().values;
                s.reverse();
                for (x, y) in b.iter().zip(&s) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn export_is_reproducible_and_sized() {
        let dir = tempfile::tempdir().unwrap();
        let req = AnalyticsRequest::new(Side::Buy, 2, spec(Variant::Partial, 0.4)).with_grid(linear_grid(-1.0, 1.0, 7));
        let curves: Vec<Curve> = CurveKind::ALL.iter().map(|k| curve(&req, *k).unwrap()).collect();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        export_curves(&curves, &a).unwrap();
        export_curves(&curves, &b).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        assert_eq!(text.lines().count(), 1 + 2 * 7);
        assert_eq!(text.lines().next().unwrap(), "delta,value,n,side,curve_kind");

        let empty = dir.path().join("e.csv");
        let none = AnalyticsRequest::new(Side::Buy, 2, spec(Variant::Partial, 0.4)).with_grid(Vec::new());
        export_curves(&[curve(&none, CurveKind::HitRatio).unwrap()], &empty).unwrap();
        assert_eq!(
            std::fs::read_to_string(&empty).unwrap(),
            "delta,value,n,side,curve_kind\n"
        );
    }

    #[test]
    fn hit_ratio_limits_and_monotonicity() {
        let s = spec(Variant::Partial, 0.4);
        let req = AnalyticsRequest::new(Side::Buy, 3, s.clone()).with_grid(linear_grid(-60.0, 60.0, 241));
        let hr = hit_ratio(&req).unwrap();
        assert!(hr[0] > 1.0 - 1e-6 && *hr.last().unwrap() < 1e-6);
        assert!(hr.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
