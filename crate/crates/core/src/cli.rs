//! Command line front end.
//!
//! Results go to stdout or to the file named by `--out`; diagnostics go to
//! stderr as `key=value` lines. Exit status is 0 on success, 1 on usage or
//! input errors and 2 on numerical failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimator::{default_grid, jones_estimate, Sample, Weight};
use crate::harness::{emit_raw, emit_standard_errors, emit_table, run_study, StudyConfig};
use crate::io::{read_sample, read_sample_file, write_estimate, write_values};
use crate::kernels::Kernel;
use crate::models::{constants_file, DensityModel};
use crate::seed::rng_for;
use crate::selectors::{
    h_boot_bose, h_boot_plugin, h_cv, h_rt, BandwidthResult, BiasTarget, BracketPolicy, Method, PilotRule,
};

#[derive(Debug, Parser)]
#[command(name = "lbkde", version, about = "Density estimation and bandwidth selection for length-biased data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the density estimate on a grid and write `y,fhat` CSV.
    Estimate(EstimateArgs),
    /// Select a bandwidth and print it.
    Select(SelectArgs),
    /// Draw a length-biased sample from a benchmark model.
    Sample(SampleArgs),
    /// Run the simulation study and write the m1-m4 table.
    Simulate(SimulateArgs),
    /// Print the benchmark model constants as JSON.
    Constants(ConstantsArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Data file, one value per line ("-" for stdin).
    #[arg(long, short)]
    input: PathBuf,
    /// Read this 0-based column of a comma separated file.
    #[arg(long)]
    column: Option<usize>,
    /// Biasing function: length, unit, or power:P.
    #[arg(long, default_value = "length", value_parser = parse_weight)]
    weight: Weight,
}

#[derive(Debug, Args)]
struct SelectorArgs {
    /// Estimation kernel.
    #[arg(long, default_value = "epanechnikov")]
    kernel: Kernel,
    /// Pilot kernel for the bootstrap selectors.
    #[arg(long, default_value = "gaussian")]
    pilot_kernel: Kernel,
    /// Search interval for cv and boot (default: RT/10 to 3 RT).
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    bracket: Option<Vec<f64>>,
    /// In boot, compare against the estimate at the candidate bandwidth.
    #[arg(long)]
    literal_theorem3: bool,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Bandwidth.
    #[arg(long, conflicts_with = "method")]
    h: Option<f64>,
    /// Select the bandwidth with this method instead of giving `--h`.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[command(flatten)]
    selector: SelectorArgs,
    /// Grid points.
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// Output file (default stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// rt, cv, bopt, brt or boot.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[command(flatten)]
    selector: SelectorArgs,
    /// Write the objective curve as `h,score` CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Model id, 1-6.
    #[arg(long)]
    model: u32,
    /// Sample size.
    #[arg(long, short)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: u64,
    /// JSON study configuration; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma separated model ids.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<u32>>,
    /// Comma separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Replications per design.
    #[arg(long)]
    reps: Option<usize>,
    /// Samples for the MISE oracle (default: reps).
    #[arg(long)]
    mise_reps: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Use the printed bootstrap MSE target for B.
    #[arg(long)]
    literal_theorem3: bool,
    /// Table output (default stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Standard error table.
    #[arg(long)]
    se_out: Option<PathBuf>,
    /// Per-replication CSV.
    #[arg(long)]
    raw_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    /// Recompute by quadrature instead of using the bundled values.
    #[arg(long)]
    recompute: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_weight(s: &str) -> std::result::Result<Weight, String> {
    match s {
        "length" => Ok(Weight::Length),
        "unit" => Ok(Weight::Unit),
        _ => match s.strip_prefix("power:").map(str::parse::<f64>) {
            Some(Ok(p)) if p.is_finite() => Ok(Weight::Power(p)),
            _ => Err(format!("expected length, unit or power:P, got '{s}'")),
        },
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    let m: Method = s.parse().map_err(|e: Error| e.to_string())?;
    if crate::harness::SELECTORS.contains(&m) {
        Ok(m)
    } else {
        Err(format!("'{s}' is not a data-driven selector"))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = writeln!(stderr, "error=usage");
            let _ = write!(stderr, "{e}");
            return 1;
        }
    };
    let start = Instant::now();
    let outcome = match cli.command {
        Command::Estimate(a) => estimate(a, stdout, stderr),
        Command::Select(a) => select(a, stdout, stderr),
        Command::Sample(a) => sample(a, stdout),
        Command::Simulate(a) => simulate(a, stdout, stderr),
        Command::Constants(a) => constants(a, stdout),
    };
    match outcome {
        Ok(()) => {
            let _ = writeln!(stderr, "elapsed_s={:.3}", start.elapsed().as_secs_f64());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error={}", e.key());
            let _ = writeln!(stderr, "message={e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load(input: &InputArgs) -> Result<Sample> {
    if input.input == Path::new("-") {
        read_sample(std::io::stdin().lock(), input.column, input.weight)
    } else {
        read_sample_file(&input.input, input.column, input.weight)
    }
}

/// Runs `f` on the named file, or on `stdout` when there is none.
fn with_output(path: Option<&Path>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn run_selector(s: &Sample, method: Method, a: &SelectorArgs) -> Result<BandwidthResult> {
    let bracket = match a.bracket.as_deref() {
        Some(&[lo, hi]) => {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("bracket must satisfy 0 < LO < HI, got {lo} {hi}")));
            }
            Some((lo, hi))
        }
        _ => None,
    };
    if bracket.is_some() && !matches!(method, Method::Cv | Method::B) {
        return Err(Error::InvalidArgument(format!("--bracket does not apply to {method}")));
    }
    if a.literal_theorem3 && method != Method::B {
        return Err(Error::InvalidArgument("--literal-theorem3 only applies to boot".into()));
    }
    let policy = BracketPolicy::default();
    match method {
        Method::Rt => h_rt(s, a.kernel),
        Method::Cv => h_cv(s, a.kernel, bracket, &policy),
        Method::Bopt => h_boot_plugin(s, a.pilot_kernel, PilotRule::G0),
        Method::BRt => h_boot_plugin(s, a.pilot_kernel, PilotRule::GRt),
        Method::B => {
            let target = if a.literal_theorem3 { BiasTarget::Literal } else { BiasTarget::Debiased };
            h_boot_bose(s, a.kernel, a.pilot_kernel, bracket, target, &policy)
        }
        other => Err(Error::InvalidArgument(format!("{other} is not a data-driven selector"))),
    }
}

fn report_selection(r: &BandwidthResult, stderr: &mut dyn Write) -> Result<()> {
    writeln!(stderr, "method={}", r.method)?;
    writeln!(stderr, "h={}", r.h)?;
    if let Some(g) = r.pilot_g {
        writeln!(stderr, "pilot_g={g}")?;
    }
    if let Some((lo, hi)) = r.bracket {
        writeln!(stderr, "bracket={lo},{hi}")?;
    }
    for f in &r.flags {
        writeln!(stderr, "flag={}", serde_json::to_value(f)?.as_str().unwrap_or_default())?;
    }
    Ok(())
}

fn estimate(a: EstimateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let s = load(&a.input)?;
    let h = match (a.h, a.method) {
        (Some(h), _) => h,
        (None, Some(m)) => {
            let r = run_selector(&s, m, &a.selector)?;
            report_selection(&r, stderr)?;
            r.h
        }
        (None, None) => return Err(Error::InvalidArgument("give either --h or --method".into())),
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let grid = default_grid(&s, h, a.selector.kernel, a.grid)?;
    let est = jones_estimate(&s, h, a.selector.kernel, &grid)?;
    writeln!(stderr, "n={}", s.len())?;
    writeln!(stderr, "integral={}", est.integral())?;
    with_output(a.out.as_deref(), stdout, |w| write_estimate(w, &est))
}

fn select(a: SelectArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let s = load(&a.input)?;
    let r = run_selector(&s, a.method, &a.selector)?;
    writeln!(stdout, "{}", r.h)?;
    report_selection(&r, stderr)?;
    if let Some(path) = &a.curve {
        let curve = r
            .objective_curve
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no objective curve", r.method)))?;
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "h,score")?;
        for (h, v) in curve {
            writeln!(w, "{h},{v}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn sample(a: SampleArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = DensityModel::get(a.model)?;
    let s = model.sample_length_biased(a.n, &mut rng_for(a.seed, &[]))?;
    with_output(a.out.as_deref(), stdout, |w| write_values(w, s.values()))
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => StudyConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => StudyConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(m) = a.models {
        cfg.models = m;
    }
    if let Some(s) = a.sizes {
        cfg.sizes = s;
    }
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    if a.mise_reps.is_some() {
        cfg.mise_replications = a.mise_reps;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if a.literal_theorem3 {
        cfg.bias_target = BiasTarget::Literal;
    }
    let start = Instant::now();
    let report = run_study(&cfg)?;
    writeln!(stderr, "designs={}", report.designs.len())?;
    writeln!(stderr, "study_s={:.3}", start.elapsed().as_secs_f64())?;
    with_output(a.out.as_deref(), stdout, |w| emit_table(&report, w))?;
    if let Some(p) = &a.se_out {
        let mut w = BufWriter::new(File::create(p)?);
        emit_standard_errors(&report, &mut w)?;
        w.flush()?;
    }
    if let Some(p) = &a.raw_out {
        let mut w = BufWriter::new(File::create(p)?);
        emit_raw(&report, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn constants(a: ConstantsArgs, stdout: &mut dyn Write) -> Result<()> {
    let file = constants_file(a.recompute);
    with_output(a.out.as_deref(), stdout, |w| {
        serde_json::to_writer_pretty(&mut *w, &file)?;
        writeln!(w)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("lbkde").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn weight_parser() {
        assert_eq!(parse_weight("unit").unwrap(), Weight::Unit);
        assert_eq!(parse_weight("power:0.5").unwrap(), Weight::Power(0.5));
        assert!(parse_weight("power:x").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(call(&["frobnicate"]).0, 1);
        assert_eq!(call(&["sample", "--model", "1", "-n", "10"]).0, 1);
        let (code, _, err) = call(&["select", "--method", "h_mise", "--input", "x"]);
        assert_eq!(code, 1);
        assert!(err.contains("error=usage"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("simulate"));
    }
}
