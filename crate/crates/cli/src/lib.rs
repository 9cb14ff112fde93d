//! Command implementations behind the `rfqcal` binary.
//!
//! Every command takes a [`RunConfig`], assembled from an optional flat
//! `key = value` file with command-line flags layered on top, and returns the
//! process exit code.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use rfqcal_core::analytics::{curve, export_curves, linear_grid, AnalyticsRequest, CurveKind};
use rfqcal_core::fit::{fit_model, FitOptions};
use rfqcal_core::io::{
    ingest, parse_covariates, parse_key_values, parse_sides, read_fit_json, read_key_values, render_fit_table,
    write_dataset, write_fit_json, write_latent,
};
use rfqcal_core::model::{CellSpec, ModelSpec, OtherRule, Pooling, SideParams, Variant};
use rfqcal_core::record::{Covariate, Side, COVARIATE_COUNT, MAX_OTHER_DEALERS};
use rfqcal_core::sep::{ClientParams, SepParams};
use rfqcal_core::sim::{outcome_frequencies, simulate_dataset, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rfqcal", version, about = "Calibrate, simulate and analyse RFQ markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic RFQ dataset from generating parameters.
    Simulate,
    /// Fit model parameters to a dataset by maximum likelihood.
    Fit,
    /// Export best-price densities and hit-ratio curves of a fit.
    Analyze,
    /// Check a dataset and print its outcome summary.
    Validate,
}

/// Flags shared by every command; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset CSV (input of fit/validate, output of simulate).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output directory (fit, analyze).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// full or partial.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// pooled or per-n.
    #[arg(long, global = true)]
    pub pooling: Option<String>,
    /// buy, sell or both.
    #[arg(long, global = true)]
    pub side: Option<String>,
    /// Comma-separated covariates, e.g. high_yield,subordinated.
    #[arg(long, global = true)]
    pub covariates: Option<String>,
    /// Likelihood of "other traded away" records: not-covered or traded-away.
    #[arg(long, global = true)]
    pub other_rule: Option<String>,
    /// Fitted parameters JSON read by analyze.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Number of records to simulate.
    #[arg(long, global = true)]
    pub records: Option<usize>,
}

const PARAM_NAMES: [&str; 7] = ["alpha", "lambda", "mu", "sigma", "p", "nu", "tau"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub pooling: Pooling,
    pub other_rule: OtherRule,
    pub sides: Vec<Side>,
    pub covariates: Vec<Covariate>,
    pub seed: u64,
    pub starts: usize,
    pub max_iterations: usize,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub latent: Option<PathBuf>,
    pub records: usize,
    pub n_mix: [f64; MAX_OTHER_DEALERS],
    pub buy_share: Option<f64>,
    pub cover_prob: f64,
    pub covariate_probs: [f64; COVARIATE_COUNT],
    pub tick: Option<f64>,
    pub grid: (f64, f64, usize),
    /// Generating parameters for `simulate`: `side.name` and per-n
    /// overrides `side.nK.name`, with `name` one of alpha, lambda, mu,
    /// sigma, p, nu, tau, beta.<covariate>, gamma.<covariate>.
    pub truth: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::Partial,
            pooling: Pooling::Pooled,
            other_rule: OtherRule::default(),
            sides: Side::ALL.to_vec(),
            covariates: Vec::new(),
            seed: 1,
            starts: 1,
            max_iterations: 200,
            data: None,
            out: None,
            params: None,
            latent: None,
            records: 10_000,
            n_mix: [0.2; MAX_OTHER_DEALERS],
            buy_share: None,
            cover_prob: 0.0,
            covariate_probs: [0.0; COVARIATE_COUNT],
            tick: None,
            grid: (-8.0, 8.0, 801),
            truth: BTreeMap::new(),
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| anyhow!(rfqcal_core::Error::Config(format!("{key}: cannot parse {v:?}"))))
}

fn number_list<const N: usize>(key: &str, v: &str) -> Result<[f64; N]> {
    let vals: Vec<f64> = v.split(',').map(|t| number(key, t)).collect::<Result<_>>()?;
    vals.try_into().map_err(|_| {
        anyhow!(rfqcal_core::Error::Config(format!(
            "{key}: expected {N} comma-separated values"
        )))
    })
}

fn config_err(msg: String) -> anyhow::Error {
    anyhow!(rfqcal_core::Error::Config(msg))
}

/// The dealer count of a per-n key segment such as `n3`.
fn n_segment(part: &str) -> Option<usize> {
    let digits = part.strip_prefix('n')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn truth_key_ok(key: &str) -> bool {
    let mut parts: Vec<&str> = key.split('.').collect();
    if parts.len() < 2 || parts[0].parse::<Side>().is_err() {
        return false;
    }
    parts.remove(0);
    if let Some(k) = n_segment(parts[0]) {
        if !(1..=MAX_OTHER_DEALERS).contains(&k) {
            return false;
        }
        parts.remove(0);
    }
    match parts.as_slice() {
        [name] => PARAM_NAMES.contains(name),
        ["beta" | "gamma", cov] => cov.parse::<Covariate>().is_ok(),
        _ => false,
    }
}

impl RunConfig {
    /// Config file values, then flags on top.
    pub fn load(flags: &Flags) -> Result<RunConfig> {
        let kv = match &flags.config {
            Some(path) => read_key_values(path)?,
            None => BTreeMap::new(),
        };
        Self::from_parts(&kv, flags)
    }

    pub fn from_text(text: &str, flags: &Flags) -> Result<RunConfig> {
        Self::from_parts(&parse_key_values(text)?, flags)
    }

    pub fn from_parts(kv: &BTreeMap<String, String>, flags: &Flags) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        for (k, v) in kv {
            match k.as_str() {
                "model" => c.variant = v.parse()?,
                "pooling" => c.pooling = v.parse()?,
                "side" => c.sides = parse_sides(v)?,
                "covariates" => c.covariates = parse_covariates(v)?,
                "other_rule" => c.other_rule = v.parse()?,
                "seed" => c.seed = number(k, v)?,
                "starts" => c.starts = number(k, v)?,
                "max_iterations" => c.max_iterations = number(k, v)?,
                "data" => c.data = Some(v.into()),
                "out" => c.out = Some(v.into()),
                "params" => c.params = Some(v.into()),
                "latent" => c.latent = Some(v.into()),
                "records" => c.records = number(k, v)?,
                "n_mix" => c.n_mix = number_list(k, v)?,
                "buy_share" => c.buy_share = Some(number(k, v)?),
                "cover_prob" => c.cover_prob = number(k, v)?,
                "covariate_probs" => c.covariate_probs = number_list(k, v)?,
                "tick" => c.tick = Some(number(k, v)?),
                "grid_min" => c.grid.0 = number(k, v)?,
                "grid_max" => c.grid.1 = number(k, v)?,
                "grid_points" => c.grid.2 = number(k, v)?,
                _ if truth_key_ok(k) => {
                    c.truth.insert(k.clone(), number(k, v)?);
                }
                _ => return Err(config_err(format!("unknown config key {k:?}"))),
            }
        }
        if let Some(v) = &flags.model {
            c.variant = v.parse()?;
        }
        if let Some(v) = &flags.pooling {
            c.pooling = v.parse()?;
        }
        if let Some(v) = &flags.side {
            c.sides = parse_sides(v)?;
        }
        if let Some(v) = &flags.covariates {
            c.covariates = parse_covariates(v)?;
        }
        if let Some(v) = &flags.other_rule {
            c.other_rule = v.parse()?;
        }
        if let Some(v) = flags.seed {
            c.seed = v;
        }
        if let Some(v) = &flags.data {
            c.data = Some(v.clone());
        }
        if let Some(v) = &flags.out {
            c.out = Some(v.clone());
        }
        if let Some(v) = &flags.params {
            c.params = Some(v.clone());
        }
        if let Some(v) = flags.records {
            c.records = v;
        }
        if c.starts == 0 {
            return Err(config_err("starts must be at least 1".into()));
        }
        Ok(c)
    }

    fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| config_err("no dataset given (--data)".into()))
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| config_err("no output directory given (--out)".into()))
    }

    fn truth_value(&self, side: Side, n: Option<usize>, name: &str) -> Option<f64> {
        n.and_then(|n| self.truth.get(&format!("{side}.n{n}.{name}")))
            .or_else(|| self.truth.get(&format!("{side}.{name}")))
            .copied()
    }

    fn truth_params(&self, side: Side, n: Option<usize>) -> Result<SideParams> {
        let get = |name: &str| {
            self.truth_value(side, n, name)
                .ok_or_else(|| config_err(format!("missing generating parameter {side}.{name}")))
        };
        let coef = |kind: &str, cov: Covariate| self.truth_value(side, n, &format!("{kind}.{cov}")).unwrap_or(0.0);
        Ok(SideParams::new(
            SepParams::new(get("alpha")?, get("lambda")?, get("mu")?, get("sigma")?)?,
            ClientParams::new(get("nu")?, get("tau")?)?,
            get("p")?,
        )
        .with_covariates(
            self.covariates.iter().map(|c| coef("beta", *c)).collect(),
            self.covariates.iter().map(|c| coef("gamma", *c)).collect(),
        ))
    }

    /// Generating model assembled from the `side.*` keys. Per-n keys switch
    /// to one cell per dealer count.
    pub fn truth_spec(&self) -> Result<ModelSpec> {
        for key in self.truth.keys() {
            let mut parts = key.split('.').skip(1).filter(|p| n_segment(p).is_none());
            if let (Some("beta" | "gamma"), Some(cov)) = (parts.next(), parts.next()) {
                let cov: Covariate = cov.parse()?;
                if !self.covariates.contains(&cov) {
                    return Err(config_err(format!("{key} given but {cov} is not among the covariates")));
                }
            }
        }
        let sides: Vec<Side> = self
            .sides
            .iter()
            .copied()
            .filter(|s| self.truth.keys().any(|k| k.starts_with(&format!("{s}."))))
            .collect();
        if sides.is_empty() {
            return Err(config_err("no generating parameters (buy.alpha = ... etc.)".into()));
        }
        let per_n = self
            .truth
            .keys()
            .any(|k| k.split('.').nth(1).and_then(n_segment).is_some());
        let mut cells = Vec::new();
        for side in sides {
            if per_n {
                for n in 1..=MAX_OTHER_DEALERS {
                    cells.push(CellSpec {
                        side,
                        n: Some(n),
                        params: self.truth_params(side, Some(n))?,
                    });
                }
            } else {
                cells.push(CellSpec {
                    side,
                    n: None,
                    params: self.truth_params(side, None)?,
                });
            }
        }
        let spec = ModelSpec {
            variant: Variant::Partial,
            pooling: if per_n { Pooling::PerN } else { Pooling::Pooled },
            other_rule: self.other_rule,
            covariates: self.covariates.clone(),
            cells,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let truth = self.truth_spec()?;
        let has = |side| truth.cells.iter().any(|c| c.side == side);
        let buy_share = self.buy_share.unwrap_or(match (has(Side::Buy), has(Side::Sell)) {
            (true, false) => 1.0,
            (false, true) => 0.0,
            _ => 0.5,
        });
        let total: f64 = self.n_mix.iter().sum();
        let mut cfg = SimConfig::new(truth, self.records, self.seed);
        cfg.n_distribution = self.n_mix.map(|w| w / total);
        cfg.buy_prob = buy_share;
        cfg.cover_record_prob = self.cover_prob;
        cfg.covariate_probs = self.covariate_probs;
        cfg.tick = self.tick;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fit_options(&self) -> FitOptions {
        let mut o = FitOptions::new(self.variant, self.pooling);
        o.other_rule = self.other_rule;
        o.covariates = self.covariates.clone();
        o.sides = self.sides.clone();
        o.starts = self.starts;
        o.seed = self.seed;
        o.max_iterations = self.max_iterations;
        o
    }
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rfqcal_core::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_INVALID };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_INVALID
}

pub fn run(cli: &Cli) -> Result<i32> {
    let config = RunConfig::load(&cli.flags)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&config),
        Command::Fit => cmd_fit(&config),
        Command::Analyze => cmd_analyze(&config),
        Command::Validate => cmd_validate(&config),
    }
}

/// Writes the simulated dataset to `data` (and latent draws to `latent`).
pub fn cmd_simulate(config: &RunConfig) -> Result<i32> {
    let path = config.data_path()?;
    let sim = config.sim_config()?;
    let out = simulate_dataset(&sim)?;
    write_dataset(&out.records, path)?;
    if let Some(latent) = &config.latent {
        write_latent(&out.latent, latent)?;
    }
    info!("wrote {} records to {}", out.records.len(), path.display());
    print!("{}", outcome_frequencies(&out.records).render());
    Ok(EXIT_OK)
}

/// Fits the dataset and writes `fit.json` and `fit.txt` under `out`.
pub fn cmd_fit(config: &RunConfig) -> Result<i32> {
    let data = ingest(config.data_path()?)?;
    if !data.rejections.is_empty() {
        warn!("{}", data.rejection_report().trim_end());
    }
    data.require_covariates(&config.covariates)?;
    let fit = fit_model(&data.records, &config.fit_options())?;
    let dir = config.out_dir()?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_fit_json(&fit, &dir.join("fit.json"))?;
    let table = render_fit_table(&fit);
    fs::write(dir.join("fit.txt"), &table).with_context(|| format!("writing {}", dir.join("fit.txt").display()))?;
    print!("{table}");
    Ok(if fit.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Writes `curves.csv` under `out` for every fitted side and n = 1..5.
pub fn cmd_analyze(config: &RunConfig) -> Result<i32> {
    let path = match &config.params {
        Some(p) => p.clone(),
        None => config.out_dir()?.join("fit.json"),
    };
    // a missing fit file surfaces as an I/O error (exit code 3)
    let fit = read_fit_json(&path)?;
    let (lo, hi, points) = config.grid;
    let grid = linear_grid(lo, hi, points);
    let mut curves = Vec::new();
    for side in &config.sides {
        for n in 1..=MAX_OTHER_DEALERS {
            if fit.params.cell(*side, n).is_none() {
                continue;
            }
            let req = AnalyticsRequest::new(*side, n, fit.params.clone()).with_grid(grid.clone());
            for kind in CurveKind::ALL {
                match curve(&req, kind) {
                    Ok(c) => curves.push(c),
                    Err(e) if kind == CurveKind::BestPriceDensity => warn!("{side} n={n}: {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    if curves.is_empty() {
        bail!(rfqcal_core::Error::Spec(
            "the fit has no cells for the requested sides".into()
        ));
    }
    let dir = config.out_dir()?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let out = dir.join("curves.csv");
    export_curves(&curves, &out)?;
    info!("wrote {} curves to {}", curves.len(), out.display());
    Ok(EXIT_OK)
}

/// Prints the rejection report and outcome summary; fails on any rejection.
pub fn cmd_validate(config: &RunConfig) -> Result<i32> {
    let data = ingest(config.data_path()?)?;
    print!("{}", data.rejection_report());
    print!("{}", outcome_frequencies(&data.records).render());
    if let Err(e) = data.require_covariates(&config.covariates) {
        println!("{e}");
        return Ok(EXIT_INVALID);
    }
    Ok(if data.rejections.is_empty() {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}
