//! Monte Carlo simulation study: replications, oracle bandwidths, the
//! m1-m4 measures and table emission.
//!
//! Replication `r` of design `(model, n)` draws its sample from the stream
//! `[0, model, n, r]` below the master seed; the samples behind the MISE
//! oracle use the stream `[1, model, n, r]`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{weighted_stats, DensityEstimate, JonesEstimator, Sample};
use crate::kernels::Kernel;
use crate::models::DensityModel;
use crate::numerics::{integrate, Grid};
use crate::seed::{derive_seed, SEED_RULE};
use crate::selectors::{
    h_boot_bose, h_boot_plugin, h_cv, rt_from_stats, BandwidthResult, BiasTarget, BracketPolicy,
    Flag, Method, PilotRule,
};

const STREAM_STUDY: u64 = 0;
const STREAM_MISE: u64 = 1;

pub const DEFAULT_ISE_POINTS: usize = 2049;

/// The selectors a study can run, in table order.
pub const SELECTORS: [Method; 5] = [Method::Rt, Method::Cv, Method::Bopt, Method::BRt, Method::B];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub models: Vec<u32>,
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub selectors: Vec<Method>,
    pub seed: u64,
    /// Samples averaged for the MISE oracle; defaults to `replications`.
    pub mise_replications: Option<usize>,
    pub ise_grid_points: usize,
    pub bracket: BracketPolicy,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
    pub kernel: Kernel,
    pub pilot_kernel: Kernel,
    pub bias_target: BiasTarget,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            models: (1..=6).collect(),
            sizes: vec![50, 100, 200, 500],
            replications: 200,
            selectors: SELECTORS.to_vec(),
            seed: 0,
            mise_replications: None,
            ise_grid_points: DEFAULT_ISE_POINTS,
            bracket: BracketPolicy::default(),
            workers: 0,
            kernel: Kernel::Epanechnikov,
            pilot_kernel: Kernel::Gaussian,
            bias_target: BiasTarget::Debiased,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidArgument("replications must be at least 2".into()));
        }
        if self.mise_replications.is_some_and(|r| r < 2) {
            return Err(Error::InvalidArgument("mise_replications must be at least 2".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 3) {
            return Err(Error::InvalidArgument("sizes must be non-empty and at least 3".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidArgument("no models selected".into()));
        }
        for &m in &self.models {
            DensityModel::get(m)?;
        }
        if let Some(m) = self.selectors.iter().find(|m| !SELECTORS.contains(m)) {
            return Err(Error::InvalidArgument(format!("{m} is not a data-driven selector")));
        }
        if self.ise_grid_points < Grid::MIN_POINTS {
            return Err(Error::InvalidArgument("ise_grid_points too small".into()));
        }
        self.bracket.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `int (f_h - f)^2` on the estimate's grid, which must cover the model support.
pub fn ise(est: &DensityEstimate, model: &DensityModel) -> Result<f64> {
    let (lo, hi) = model.support();
    if !est.grid.covers(lo, hi) {
        return Err(Error::InsufficientCoverage {
            grid_lo: est.grid.lo(),
            grid_hi: est.grid.hi(),
            need_lo: lo,
            need_hi: hi,
        });
    }
    let sq: Vec<f64> = est
        .points()
        .map(|(y, f)| (f - model.pdf(y)).powi(2))
        .collect();
    Ok(integrate(&sq, &est.grid).max(0.0))
}

/// ISE of one sample as a function of `h`, on a grid covering the model
/// support and the data widened by the kernel reach at `h_max`.
#[derive(Debug, Clone)]
pub struct IseEvaluator {
    estimator: JonesEstimator,
    grid: Grid,
    truth: Vec<f64>,
    h_max: f64,
}

impl IseEvaluator {
    pub fn new(sample: &Sample, model: &DensityModel, kernel: Kernel, h_max: f64, points: usize) -> Result<Self> {
        let reach = kernel.effective_radius() * h_max;
        let (lo, hi) = model.support();
        let grid = Grid::new(
            lo.min(sample.min() - reach),
            hi.max(sample.max() + reach),
            points,
        )?;
        let truth = grid.map(|y| model.pdf(y));
        Ok(IseEvaluator {
            estimator: JonesEstimator::new(sample, h_max, kernel)?,
            grid,
            truth,
            h_max,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eval(&self, h: f64) -> Result<f64> {
        if h > self.h_max * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "h = {h} exceeds the evaluator's coverage limit {}",
                self.h_max
            )));
        }
        let est = self.estimator.with_bandwidth(h)?;
        let sq: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.truth)
            .map(|(y, f)| (est.eval(y) - f).powi(2))
            .collect();
        Ok(integrate(&sq, &self.grid).max(0.0))
    }
}

/// Per-sample ISE-optimal bandwidth over `bracket`.
pub fn h_ise_oracle(
    sample: &Sample,
    model: &DensityModel,
    kernel: Kernel,
    bracket: (f64, f64),
    policy: &BracketPolicy,
    points: usize,
) -> Result<BandwidthResult> {
    let ev = IseEvaluator::new(sample, model, kernel, bracket.1, points)?;
    ise_minimum(&ev, bracket, policy)
}

fn ise_minimum(ev: &IseEvaluator, bracket: (f64, f64), policy: &BracketPolicy) -> Result<BandwidthResult> {
    let min = policy.minimize(|h| ev.eval(h).unwrap_or(f64::NAN), bracket)?;
    Ok(BandwidthResult::from_minimum(min, Method::IseOracle, bracket))
}

/// Design-level MISE-optimal bandwidth: the minimiser of the ISE curve
/// averaged over `reps` samples from the oracle stream. The bracket is the
/// policy bracket around the mean rule of thumb of those samples.
pub fn h_mise_oracle(
    model: &DensityModel,
    n: usize,
    kernel: Kernel,
    reps: usize,
    seed: u64,
    policy: &BracketPolicy,
    points: usize,
) -> Result<BandwidthResult> {
    let samples = (0..reps)
        .map(|r| {
            let mut rng = crate::seed::rng_for(seed, &[STREAM_MISE, model.id() as u64, n as u64, r as u64]);
            model.sample_length_biased(n, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rt_sum = 0.0;
    for s in &samples {
        rt_sum += rt_from_stats(&weighted_stats(s), n, kernel)?.0;
    }
    let bracket = policy.bracket(rt_sum / reps as f64);
    let evaluators = samples
        .par_iter()
        .map(|s| IseEvaluator::new(s, model, kernel, bracket.1, points))
        .collect::<Result<Vec<_>>>()?;
    let min = policy.minimize(
        |h| {
            let values: Vec<f64> = evaluators
                .par_iter()
                .map(|ev| ev.eval(h).unwrap_or(f64::NAN))
                .collect();
            values.iter().sum::<f64>() / reps as f64
        },
        bracket,
    )?;
    Ok(BandwidthResult::from_minimum(min, Method::MiseOracle, bracket))
}

/// Outcome of one selector on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorOutcome {
    pub method: Method,
    pub h: Option<f64>,
    pub ise: Option<f64>,
    pub error: Option<String>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub h_ise: Option<f64>,
    pub ise_at_h_ise: Option<f64>,
    pub ise_at_h_mise: Option<f64>,
    pub outcomes: Vec<SelectorOutcome>,
    pub error: Option<String>,
}

fn run_selector(method: Method, sample: &Sample, cfg: &StudyConfig) -> Result<BandwidthResult> {
    let (k, l) = (cfg.kernel, cfg.pilot_kernel);
    match method {
        Method::Rt => crate::selectors::h_rt(sample, k),
        Method::Cv => h_cv(sample, k, None, &cfg.bracket),
        Method::Bopt => h_boot_plugin(sample, l, PilotRule::G0),
        Method::BRt => h_boot_plugin(sample, l, PilotRule::GRt),
        Method::B => h_boot_bose(sample, k, l, None, cfg.bias_target, &cfg.bracket),
        other => Err(Error::InvalidArgument(format!("{other} is not a data-driven selector"))),
    }
}

fn run_replication(
    model: &DensityModel,
    n: usize,
    index: usize,
    cfg: &StudyConfig,
    h_mise: Option<f64>,
) -> Replication {
    let seed = derive_seed(cfg.seed, &[STREAM_STUDY, model.id() as u64, n as u64, index as u64]);
    let mut rep = Replication {
        index,
        seed,
        h_ise: None,
        ise_at_h_ise: None,
        ise_at_h_mise: None,
        outcomes: Vec::new(),
        error: None,
    };
    let result = (|| -> Result<()> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let sample = model.sample_length_biased(n, &mut rng)?;
        let (h_rt, _) = rt_from_stats(&weighted_stats(&sample), n, cfg.kernel)?;
        let bracket = cfg.bracket.bracket(h_rt);

        let mut selected = Vec::new();
        for &method in &cfg.selectors {
            selected.push((method, run_selector(method, &sample, cfg)));
        }
        let h_max = selected
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok().map(|b| b.h))
            .chain(h_mise)
            .fold(bracket.1, f64::max);
        let ev = IseEvaluator::new(&sample, model, cfg.kernel, h_max, cfg.ise_grid_points)?;
        let oracle = ise_minimum(&ev, bracket, &cfg.bracket)?;
        rep.h_ise = Some(oracle.h);
        rep.ise_at_h_ise = Some(ev.eval(oracle.h)?);
        if let Some(h) = h_mise {
            rep.ise_at_h_mise = Some(ev.eval(h)?);
        }
        for (method, r) in selected {
            let outcome = match r.and_then(|b| Ok((ev.eval(b.h)?, b))) {
                Ok((ise, b)) => SelectorOutcome {
                    method,
                    h: Some(b.h),
                    ise: Some(ise),
                    error: None,
                    flags: b.flags.into_iter().collect(),
                },
                Err(e) => SelectorOutcome {
                    method,
                    h: None,
                    ise: None,
                    error: Some(e.key().to_string()),
                    flags: Vec::new(),
                },
            };
            rep.outcomes.push(outcome);
        }
        Ok(())
    })();
    if let Err(e) = result {
        rep.error = Some(e.key().to_string());
    }
    rep
}

/// Table column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Column {
    HIse,
    Selector(Method),
    HMise,
}

impl Column {
    pub const ALL: [Column; 7] = [
        Column::HIse,
        Column::Selector(Method::Rt),
        Column::Selector(Method::Cv),
        Column::Selector(Method::Bopt),
        Column::Selector(Method::BRt),
        Column::Selector(Method::B),
        Column::HMise,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Column::HIse => "h_ISE",
            Column::HMise => "h_MISE",
            Column::Selector(m) => m.label(),
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// m1-m4 (times 100) and their Monte Carlo standard errors (times 100).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub m: [f64; 4],
    pub se: [f64; 4],
}

impl CellStats {
    /// From per-replication ISE values and bandwidth differences.
    pub fn from_values(ise: &[f64], diff: &[f64]) -> Self {
        let r = ise.len() as f64;
        let (m1, m2) = mean_sd(ise);
        let (m3, m4) = mean_sd(diff);
        let scale = 100.0;
        CellStats {
            m: [m1 * scale, m2 * scale, m3 * scale, m4 * scale],
            se: [
                m2 / r.sqrt() * scale,
                m2 / (2.0 * (r - 1.0)).sqrt() * scale,
                m4 / r.sqrt() * scale,
                m4 / (2.0 * (r - 1.0)).sqrt() * scale,
            ],
        }
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub model: u32,
    pub n: usize,
    pub h_mise: Option<f64>,
    pub mean_h_ise: Option<f64>,
    /// Missing columns are incomplete or were not run.
    pub cells: BTreeMap<Column, CellStats>,
    pub flags: Vec<String>,
}

impl DesignReport {
    pub fn cell(&self, column: Column) -> Option<&CellStats> {
        self.cells.get(&column)
    }

    pub fn m1(&self, column: Column) -> Option<f64> {
        self.cell(column).map(|c| c.m[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub seed: u64,
    pub seed_rule: String,
    pub replications: usize,
    pub mise_replications: usize,
    pub kernel: Kernel,
    pub pilot_kernel: Kernel,
    pub bias_target: BiasTarget,
    pub ise_grid_points: usize,
    pub bracket: BracketPolicy,
    pub truncation: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub metadata: Metadata,
    pub designs: Vec<DesignReport>,
    /// Per-replication results in design order; empty after parsing a table.
    pub raw: Vec<(u32, usize, Vec<Replication>)>,
}

impl SimulationReport {
    pub fn design(&self, model: u32, n: usize) -> Option<&DesignReport> {
        self.designs.iter().find(|d| d.model == model && d.n == n)
    }
}

fn aggregate(model: u32, n: usize, h_mise: Option<f64>, reps: &[Replication], cfg: &StudyConfig) -> DesignReport {
    let mut flags = Vec::new();
    let mut cells = BTreeMap::new();
    let failed: Vec<&Replication> = reps.iter().filter(|r| r.h_ise.is_none()).collect();
    if let Some(first) = failed.first() {
        flags.push(format!(
            "replication-failed:{}(first seed {}: {})",
            failed.len(),
            first.seed,
            first.error.as_deref().unwrap_or("unknown")
        ));
    }
    let complete = failed.is_empty();
    let h_ise: Vec<f64> = reps.iter().filter_map(|r| r.h_ise).collect();
    let mean_h_ise = complete.then(|| h_ise.iter().sum::<f64>() / h_ise.len() as f64);

    if complete {
        let ise: Vec<f64> = reps.iter().map(|r| r.ise_at_h_ise.unwrap()).collect();
        cells.insert(Column::HIse, CellStats::from_values(&ise, &vec![0.0; ise.len()]));
        if let Some(hm) = h_mise {
            let ise: Vec<f64> = reps.iter().map(|r| r.ise_at_h_mise.unwrap()).collect();
            let diff: Vec<f64> = h_ise.iter().map(|h| hm - h).collect();
            cells.insert(Column::HMise, CellStats::from_values(&ise, &diff));
        }
    }
    if h_mise.is_none() {
        flags.push("h_MISE:failed".into());
    }

    for &method in &SELECTORS {
        if !cfg.selectors.contains(&method) {
            flags.push(format!("{method}:not-run"));
            continue;
        }
        if !complete {
            flags.push(format!("{method}:incomplete"));
            continue;
        }
        let mut ise = Vec::new();
        let mut diff = Vec::new();
        let mut errors = Vec::new();
        let mut boundary = 0;
        for r in reps {
            let o = r.outcomes.iter().find(|o| o.method == method).expect("selector outcome");
            match (o.h, o.ise) {
                (Some(h), Some(v)) => {
                    ise.push(v);
                    diff.push(h - r.h_ise.unwrap());
                    if o.flags.contains(&Flag::BoundaryMinimum) {
                        boundary += 1;
                    }
                }
                _ => errors.push((r.seed, o.error.clone().unwrap_or_default())),
            }
        }
        if let Some((seed, key)) = errors.first() {
            flags.push(format!("{method}:incomplete:{}(first seed {seed}: {key})", errors.len()));
        } else {
            cells.insert(Column::Selector(method), CellStats::from_values(&ise, &diff));
        }
        if boundary > 0 {
            flags.push(format!("{method}:boundary-minimum:{boundary}"));
        }
    }
    DesignReport {
        model,
        n,
        h_mise,
        mean_h_ise,
        cells,
        flags,
    }
}

/// Runs every `(model, n)` design of `cfg`.
pub fn run_study(cfg: &StudyConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mise_reps = cfg.mise_replications.unwrap_or(cfg.replications);
    let mut designs = Vec::new();
    let mut raw = Vec::new();
    for &model_id in &cfg.models {
        let model = DensityModel::get(model_id)?;
        for &n in &cfg.sizes {
            let h_mise = pool
                .install(|| {
                    h_mise_oracle(model, n, cfg.kernel, mise_reps, cfg.seed, &cfg.bracket, cfg.ise_grid_points)
                })
                .ok()
                .map(|r| r.h);
            let reps: Vec<Replication> = pool.install(|| {
                (0..cfg.replications)
                    .into_par_iter()
                    .map(|i| run_replication(model, n, i, cfg, h_mise))
                    .collect()
            });
            designs.push(aggregate(model_id, n, h_mise, &reps, cfg));
            raw.push((model_id, n, reps));
        }
    }
    Ok(SimulationReport {
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            seed_rule: SEED_RULE.to_string(),
            replications: cfg.replications,
            mise_replications: mise_reps,
            kernel: cfg.kernel,
            pilot_kernel: cfg.pilot_kernel,
            bias_target: cfg.bias_target,
            ise_grid_points: cfg.ise_grid_points,
            bracket: cfg.bracket,
            truncation: format!(
                "normal mixtures on [{:e}, 1 + 4 sd_max]; gamma models on [{:e}, 1 - 1e-8 quantile]",
                crate::models::LOWER_CUTOFF,
                crate::models::LOWER_CUTOFF
            ),
        },
        designs,
        raw,
    })
}

pub const TABLE_HEADER: &str = "model,n,measure,h_ISE,RT,CV,Bopt,B_RT,B,h_MISE,flags";

fn write_grid<W: Write>(out: &mut W, report: &SimulationReport, se: bool) -> Result<()> {
    writeln!(out, "# lbkde simulation report (values x 100{})", if se { ", standard errors" } else { "" })?;
    writeln!(out, "# meta {}", serde_json::to_string(&report.metadata)?)?;
    for d in &report.designs {
        writeln!(
            out,
            "# design model={} n={} h_mise={} mean_h_ise={}",
            d.model,
            d.n,
            opt(d.h_mise),
            opt(d.mean_h_ise)
        )?;
    }
    writeln!(out, "{TABLE_HEADER}")?;
    for d in &report.designs {
        for k in 0..4 {
            write!(out, "{},{},m{}", d.model, d.n, k + 1)?;
            for col in Column::ALL {
                let v = d.cell(col).map(|c| if se { c.se[k] } else { c.m[k] });
                write!(out, ",{}", opt(v))?;
            }
            writeln!(out, ",{}", d.flags.join(";"))?;
        }
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The m1-m4 table as CSV with a metadata header.
pub fn emit_table<W: Write>(report: &SimulationReport, mut out: W) -> Result<()> {
    write_grid(&mut out, report, false)
}

/// Same layout as [`emit_table`], holding the Monte Carlo standard errors.
pub fn emit_standard_errors<W: Write>(report: &SimulationReport, mut out: W) -> Result<()> {
    write_grid(&mut out, report, true)
}

/// One row per replication.
pub fn emit_raw<W: Write>(report: &SimulationReport, mut out: W) -> Result<()> {
    write!(out, "model,n,rep,seed,h_ISE,ISE_h_ISE,ISE_h_MISE")?;
    for m in SELECTORS {
        write!(out, ",h_{m},ISE_{m}")?;
    }
    writeln!(out, ",error")?;
    for (model, n, reps) in &report.raw {
        for r in reps {
            write!(
                out,
                "{model},{n},{},{},{},{},{}",
                r.index,
                r.seed,
                opt(r.h_ise),
                opt(r.ise_at_h_ise),
                opt(r.ise_at_h_mise)
            )?;
            let mut errors: Vec<String> = r.error.iter().cloned().collect();
            for m in SELECTORS {
                match r.outcomes.iter().find(|o| o.method == m) {
                    Some(o) => {
                        write!(out, ",{},{}", opt(o.h), opt(o.ise))?;
                        if let Some(e) = &o.error {
                            errors.push(format!("{m}:{e}"));
                        }
                    }
                    None => write!(out, ",,")?,
                }
            }
            writeln!(out, ",{}", errors.join(";"))?;
        }
    }
    Ok(())
}

/// Parses a table written by [`emit_table`].
pub fn parse_table<R: BufRead>(reader: R) -> Result<SimulationReport> {
    let mut metadata = None;
    let mut designs: Vec<DesignReport> = Vec::new();
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        if let Some(rest) = line.strip_prefix("# meta ") {
            metadata = Some(serde_json::from_str::<Metadata>(rest)?);
        } else if let Some(rest) = line.strip_prefix("# design ") {
            let kv: BTreeMap<&str, &str> = rest.split_whitespace().filter_map(|p| p.split_once('=')).collect();
            let get = |k: &str| kv.get(k).copied().ok_or_else(|| perr(format!("missing {k}")));
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| perr(format!("bad number '{s}'")))
                }
            };
            designs.push(DesignReport {
                model: get("model")?.parse().map_err(|_| perr("bad model".into()))?,
                n: get("n")?.parse().map_err(|_| perr("bad n".into()))?,
                h_mise: num(get("h_mise")?)?,
                mean_h_ise: num(get("mean_h_ise")?)?,
                cells: BTreeMap::new(),
                flags: Vec::new(),
            });
        } else if line.starts_with('#') || line.trim().is_empty() {
            continue;
        } else if line == TABLE_HEADER {
            header_seen = true;
        } else {
            if !header_seen {
                return Err(perr("data row before header".into()));
            }
            let fields: Vec<&str> = line.splitn(11, ',').collect();
            if fields.len() != 11 {
                return Err(perr(format!("expected 11 fields, got {}", fields.len())));
            }
            let model: u32 = fields[0].parse().map_err(|_| perr("bad model".into()))?;
            let n: usize = fields[1].parse().map_err(|_| perr("bad n".into()))?;
            let k: usize = match fields[2] {
                "m1" => 0,
                "m2" => 1,
                "m3" => 2,
                "m4" => 3,
                other => return Err(perr(format!("bad measure '{other}'"))),
            };
            let d = designs
                .iter_mut()
                .find(|d| d.model == model && d.n == n)
                .ok_or_else(|| perr(format!("no design line for model {model} n {n}")))?;
            for (col, field) in Column::ALL.iter().zip(&fields[3..10]) {
                if field.is_empty() {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| perr(format!("bad value '{field}'")))?;
                d.cells
                    .entry(*col)
                    .or_insert(CellStats {
                        m: [f64::NAN; 4],
                        se: [f64::NAN; 4],
                    })
                    .m[k] = v;
            }
            if k == 0 {
                d.flags = if fields[10].is_empty() {
                    Vec::new()
                } else {
                    fields[10].split(';').map(String::from).collect()
                };
            }
        }
    }
    let metadata = metadata.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing '# meta' line".into(),
    })?;
    Ok(SimulationReport {
        metadata,
        designs,
        raw: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::jones_estimate;
    use crate::seed::rng_for;

    #[test]
    fn ise_of_truth_and_of_shifted_truth() {
        let m = DensityModel::get(1).unwrap();
        let grid = Grid::new(-0.5, 2.5, 6001).unwrap();
        let values = grid.map(|y| m.pdf(y));
        let est = DensityEstimate {
            grid,
            values: values.clone(),
            h: 0.1,
            kernel: Kernel::Epanechnikov,
        };
        assert_eq!(ise(&est, m).unwrap(), 0.0);
        let shifted = DensityEstimate {
            values: grid
                .iter()
                .zip(&values)
                .map(|(y, v)| if (0.0..=1.0).contains(&y) { v + 0.1 } else { *v })
                .collect(),
            ..est.clone()
        };
        assert!((ise(&shifted, m).unwrap() - 0.01).abs() < 1e-4);
        let narrow = DensityEstimate {
            grid: Grid::new(0.2, 0.8, 101).unwrap(),
            values: vec![0.0; 101],
            ..est
        };
        assert!(matches!(ise(&narrow, m), Err(Error::InsufficientCoverage { .. })));
    }

    #[test]
    fn evaluator_agrees_with_grid_estimate() {
        let m = DensityModel::get(2).unwrap();
        let s = m.sample_length_biased(80, &mut rng_for(1, &[])).unwrap();
        let ev = IseEvaluator::new(&s, m, Kernel::Epanechnikov, 0.3, 2049).unwrap();
        let est = jones_estimate(&s, 0.05, Kernel::Epanechnikov, ev.grid()).unwrap();
        assert!((ev.eval(0.05).unwrap() - ise(&est, m).unwrap()).abs() < 1e-15);
        assert!(ev.eval(0.4).is_err());
    }

    #[test]
    fn ise_curve_is_u_shaped() {
        let m = DensityModel::get(1).unwrap();
        for seed in 0..5 {
            let s = m.sample_length_biased(100, &mut rng_for(seed, &[9])).unwrap();
            let r = h_ise_oracle(&s, m, Kernel::Epanechnikov, (0.01, 1.0), &BracketPolicy::default(), 2049).unwrap();
            let curve = r.objective_curve.unwrap();
            let lowest = curve.iter().map(|c| c.1).fold(f64::MAX, f64::min);
            assert!(curve[0].1 > lowest && curve[curve.len() - 1].1 > lowest);
            assert!(!r.flags.contains(&Flag::BoundaryMinimum), "seed {seed}");
        }
    }

    fn small_config() -> StudyConfig {
        StudyConfig {
            models: vec![1],
            sizes: vec![30],
            replications: 4,
            selectors: vec![Method::Rt, Method::Cv, Method::Bopt],
            seed: 5,
            ise_grid_points: 513,
            workers: 1,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn table_round_trip() {
        let report = run_study(&small_config()).unwrap();
        let mut buf = Vec::new();
        emit_table(&report, &mut buf).unwrap();
        let parsed = parse_table(buf.as_slice()).unwrap();
        assert_eq!(parsed.metadata, report.metadata);
        for (a, b) in parsed.designs.iter().zip(&report.designs) {
            assert_eq!(a.h_mise, b.h_mise);
            assert_eq!(a.mean_h_ise, b.mean_h_ise);
            assert_eq!(a.flags, b.flags);
            assert_eq!(a.cells.len(), b.cells.len());
            for (col, cell) in &b.cells {
                assert_eq!(a.cells[col].m, cell.m);
            }
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("B:not-run"));
        let h_ise = &report.designs[0].cells[&Column::HIse];
        assert_eq!((h_ise.m[2], h_ise.m[3]), (0.0, 0.0));
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = StudyConfig::from_json(r#"{"models": [2], "sizes": [50], "replications": 3, "seed": 4}"#).unwrap();
        assert_eq!(cfg.selectors.len(), 5);
        assert!(StudyConfig::from_json(r#"{"replications": 1}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"models": [7]}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
