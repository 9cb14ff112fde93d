//! Flat-file input and output: RFQ datasets, latent logs, fitted parameters
//! and key-value configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::record::{Covariate, RfqRecord, Side};
use crate::sim::LatentDraw;

pub const DATASET_COLUMNS: [&str; 12] = [
    "side",
    "outcome",
    "sub_outcome",
    "y_quote",
    "cover",
    "n_other",
    "cbbt_mid",
    "cbbt_half_spread",
    "high_yield",
    "subordinated",
    "low_notional",
    "high_notional",
];

const REQUIRED_COLUMNS: usize = 8;

#[derive(Debug, Deserialize)]
struct RawRow {
    side: String,
    outcome: String,
    sub_outcome: String,
    y_quote: Option<f64>,
    cover: Option<f64>,
    n_other: Option<i64>,
    cbbt_mid: Option<f64>,
    cbbt_half_spread: Option<f64>,
    #[serde(default)]
    high_yield: Option<f64>,
    #[serde(default)]
    subordinated: Option<f64>,
    #[serde(default)]
    low_notional: Option<f64>,
    #[serde(default)]
    high_notional: Option<f64>,
}

impl RawRow {
    fn into_record(self) -> Result<RfqRecord> {
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| Error::InvalidRecord(format!("missing {what}")));
        let n = self
            .n_other
            .ok_or_else(|| Error::InvalidRecord("missing n_other".into()))?;
        let record = RfqRecord {
            side: self.side.parse()?,
            outcome: self.outcome.parse()?,
            sub_outcome: self.sub_outcome.parse()?,
            y_quote: need(self.y_quote, "y_quote")?,
            cover: self.cover,
            n_other: usize::try_from(n).map_err(|_| Error::InvalidRecord("n out of range".into()))?,
            cbbt_mid: need(self.cbbt_mid, "cbbt_mid")?,
            cbbt_half_spread: need(self.cbbt_half_spread, "cbbt_half_spread")?,
            covariates: [
                self.high_yield.unwrap_or(0.0),
                self.subordinated.unwrap_or(0.0),
                self.low_notional.unwrap_or(0.0),
                self.high_notional.unwrap_or(0.0),
            ],
        };
        record.validate()?;
        Ok(record)
    }
}

/// A row that failed parsing or validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Line in the file, the header being line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<RfqRecord>,
    pub rejections: Vec<Rejection>,
    /// Covariate columns present in the header.
    pub covariate_columns: Vec<Covariate>,
}

impl Dataset {
    pub fn rejection_report(&self) -> String {
        let mut s = format!("{} records, {} rejected\n", self.records.len(), self.rejections.len());
        for r in &self.rejections {
            let _ = writeln!(s, "  line {}: {}", r.line, r.reason);
        }
        s
    }

    /// Fails unless every covariate in `wanted` has a column.
    pub fn require_covariates(&self, wanted: &[Covariate]) -> Result<()> {
        match wanted.iter().find(|c| !self.covariate_columns.contains(c)) {
            Some(c) => Err(Error::Config(format!("dataset has no {c} column"))),
            None => Ok(()),
        }
    }
}

pub fn ingest(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, path)
}

/// Reads a dataset; rows that do not parse or break a record invariant are
/// collected as rejections instead of failing the whole file.
pub fn ingest_reader(reader: impl Read, path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    for col in &DATASET_COLUMNS[..REQUIRED_COLUMNS] {
        if !headers.iter().any(|h| h == *col) {
            return Err(Error::Config(format!("{}: missing column {col}", path.display())));
        }
    }
    let mut out = Dataset {
        covariate_columns: Covariate::ALL
            .into_iter()
            .filter(|c| headers.iter().any(|h| h == c.as_str()))
            .collect(),
        ..Dataset::default()
    };
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let parsed = row
            .deserialize::<RawRow>(Some(&headers))
            .map_err(|e| Error::InvalidRecord(e.to_string()))
            .and_then(RawRow::into_record);
        match parsed {
            Ok(r) => out.records.push(r),
            Err(Error::InvalidRecord(reason)) => out.rejections.push(Rejection { line, reason }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Writes records with every column; floats use their shortest round-trip
/// form so that ingesting the file gives back identical records.
pub fn write_dataset(records: &[RfqRecord], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let csv_err = |e| Error::csv(path, e);
    w.write_record(DATASET_COLUMNS).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.side.as_str().to_string(),
            r.outcome.as_str().to_string(),
            r.sub_outcome.as_str().to_string(),
            r.y_quote.to_string(),
            r.cover.map(|c| c.to_string()).unwrap_or_default(),
            r.n_other.to_string(),
            r.cbbt_mid.to_string(),
            r.cbbt_half_spread.to_string(),
        ];
        row.extend(r.covariates.iter().map(|z| z.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w, path)
}

/// Latent draws, one line per record: `y, v`, then the competitor quotes
/// and answer flags (empty past the record's `n`).
pub fn write_latent(latent: &[LatentDraw], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let csv_err = |e| Error::csv(path, e);
    let mut header = vec!["record".to_string(), "y".into(), "v".into()];
    header.extend((1..=5).map(|k| format!("w{k}")));
    header.extend((1..=5).map(|k| format!("answered{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, d) in latent.iter().enumerate() {
        let mut row = vec![i.to_string(), d.y.to_string(), d.v.to_string()];
        row.extend((0..5).map(|k| d.w.get(k).map(|v| v.to_string()).unwrap_or_default()));
        row.extend((0..5).map(|k| d.answered.get(k).map(|a| u8::from(*a).to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w, path)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key}", i + 1)));
        }
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_values(&text)
}

pub fn write_fit_json(fit: &FitResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, fit).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_fit_json(path: &Path) -> Result<FitResult> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })
}

/// Aligned parameter table, one row per fitted cell, with the dealer law's
/// mean and standard deviation next to its parameters.
pub fn render_fit_table(fit: &FitResult) -> String {
    let spec = &fit.params;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "model {} | pooling {} | other rule {} | seed {} | loglik {:.6} | converged {}",
        spec.variant, spec.pooling, spec.other_rule, fit.seed, fit.loglik, fit.converged
    );
    let mut head = format!(
        "{:<5} {:>3} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "side", "n", "alpha", "lambda", "mu", "sigma", "mean", "sd", "p", "nu", "tau"
    );
    for c in &spec.covariates {
        let _ = write!(
            head,
            " {:>12} {:>12}",
            format!("beta_{}", short(*c)),
            format!("gamma_{}", short(*c))
        );
    }
    let _ = write!(head, " {:>8} {:>14} {:>6} {:>5}", "records", "loglik", "cycles", "conv");
    let _ = writeln!(s, "{head}");
    for c in &fit.cells {
        let p = &c.params;
        let d = &p.dealer;
        let mean = d.mean().unwrap_or(f64::NAN);
        let sd = d.std_dev().unwrap_or(f64::NAN);
        let n = c.n.map_or("all".to_string(), |n| n.to_string());
        let mut row = format!(
            "{:<5} {:>3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            c.side.as_str(),
            n,
            d.alpha,
            d.lambda,
            d.mu,
            d.sigma,
            mean,
            sd,
            p.p,
            p.client.nu,
            p.client.tau
        );
        for (b, g) in p.beta.iter().zip(&p.gamma) {
            let _ = write!(row, " {b:>12.3} {g:>12.3}");
        }
        let _ = write!(
            row,
            " {:>8} {:>14.3} {:>6} {:>5}",
            c.records,
            c.loglik,
            c.iterations,
            if c.converged { "yes" } else { "no" }
        );
        let _ = writeln!(s, "{row}");
    }
    s
}

fn short(c: Covariate) -> &'static str {
    match c {
        Covariate::HighYield => "hy",
        Covariate::Subordinated => "sub",
        Covariate::LowNotional => "lown",
        Covariate::HighNotional => "highn",
    }
}

/// Parses a comma-separated covariate list; empty means none.
pub fn parse_covariates(s: &str) -> Result<Vec<Covariate>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("unknown covariate {t:?}"))))
        .collect()
}

/// Sides selected by `buy`, `sell` or `both`.
pub fn parse_sides(s: &str) -> Result<Vec<Side>> {
    match s.trim() {
        "both" => Ok(Side::ALL.to_vec()),
        t => t
            .parse::<Side>()
            .map(|side| vec![side])
            .map_err(|_| Error::Config(format!("unknown side {t:?}"))),
    }
}
