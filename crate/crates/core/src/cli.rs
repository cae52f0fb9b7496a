//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! Failures are reported on standard error as `error[Kind]: message`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::experiments::{
    self, coverage, data_io, CovariateLaw, CoverageConfig, CsvSchema, ExperimentConfig, GeneratorSpec, ModelKind,
    Strictness,
};
use crate::model::Family;
use crate::optprob::{self, HMode, NormVector};
use crate::pipeline::{self, PipelineOptions, PipelineResult};
use crate::sampling::{RngSeed, Scheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "optsub", version, about = "Optimal subsampling for M-estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model on every row.
    FitFull(FitFullArgs),
    /// Two-stage subsample estimate.
    SubsampleFit(SubsampleArgs),
    /// Optimal probabilities for a vector of norms.
    Plan(PlanArgs),
    /// Monte Carlo MSE comparison of subsampling methods.
    MseExperiment(MseArgs),
    /// Truncation counts g for OLS leverage-type norms.
    GTable(GTableArgs),
    /// Coverage of nominal 95% intervals under exact optimal plans.
    Coverage(CoverageArgs),
}

/// Data source: a CSV file, or a synthetic dataset when `--data` is absent.
#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    response: String,
    /// Column with binomial trial counts.
    #[arg(long)]
    trials: Option<String>,
    /// Skip malformed rows instead of failing.
    #[arg(long)]
    lenient: bool,
    /// ols, logistic, poisson, binomial or gamma. Defaults to the generator's model.
    #[arg(long)]
    family: Option<Family>,
    /// Generator model: linear or logistic.
    #[arg(long, default_value = "logistic")]
    model: ModelKind,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 9)]
    covariates: usize,
    /// normal, lognormal or tν (e.g. t3).
    #[arg(long, default_value = "normal")]
    law: CovariateLaw,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<(Family, Dataset)> {
        match &self.data {
            Some(path) => {
                let schema = CsvSchema {
                    response: self.response.clone(),
                    covariates: None,
                    trials: self.trials.clone(),
                };
                let strict = if self.lenient { Strictness::Lenient } else { Strictness::Strict };
                let report = data_io::load_csv(path, &schema, strict)?;
                if report.rejected > 0 {
                    eprintln!("loaded {} rows, rejected {}", report.rows, report.rejected);
                }
                let fam = self.family.unwrap_or(self.model.family());
                fam.validate(&report.dataset)?;
                Ok((fam, report.dataset))
            }
            None => {
                let spec = GeneratorSpec::new(self.model, self.n, self.covariates, self.law);
                let data = experiments::generate(&spec, RngSeed::new(seed, experiments::mse::DATA_STREAM))?;
                Ok((self.model.family(), data))
            }
        }
    }
}

#[derive(Debug, Args)]
struct FitFullArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SubsampleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// with_replacement or poisson.
    #[arg(long, default_value = "poisson")]
    scheme: Scheme,
    #[arg(long)]
    s0: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 5.0)]
    b: f64,
    /// quantile or infinity.
    #[arg(long, default_value = "quantile")]
    h_mode: HMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    scheme: Scheme,
    /// Expected subsample size (Poisson) or number of draws.
    #[arg(long)]
    s: usize,
    /// Comma-separated nonnegative norms.
    #[arg(long, value_delimiter = ',', required = true)]
    norms: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Write the plan as CSV (`index,pi`).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MseArgs {
    /// Flat key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    covariates: Option<usize>,
    #[arg(long)]
    law: Option<CovariateLaw>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    ratios: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    s0_fraction: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Fill the `seconds` column with wall-clock times.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl MseArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = self.model {
            cfg.model = m;
            cfg.apply_model_defaults(self.covariates.is_some(), false);
        }
        let mut set = |key: &str, v: Option<String>| -> Result<()> {
            match v {
                Some(v) => cfg.set(key, &v),
                None => Ok(()),
            }
        };
        set("n", self.n.map(|v| v.to_string()))?;
        set("covariates", self.covariates.map(|v| v.to_string()))?;
        set("law", self.law.map(|v| v.name()))?;
        set("data", self.data.as_ref().map(|p| p.display().to_string()))?;
        set("response", self.response.clone())?;
        set("methods", self.methods.clone())?;
        set("ratios", self.ratios.clone())?;
        set("alpha", self.alpha.map(|v| v.to_string()))?;
        set("s0_fraction", self.s0_fraction.map(|v| v.to_string()))?;
        set("b", self.b.map(|v| v.to_string()))?;
        set("replicates", self.replicates.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("threads", self.threads.map(|v| v.to_string()))?;
        set("output", self.output.as_ref().map(|p| p.display().to_string()))?;
        if self.timing {
            cfg.timing = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct GTableArgs {
    #[arg(long, value_delimiter = ',', default_value = "normal,t5,t4,t3,t2,t1")]
    laws: Vec<CovariateLaw>,
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.03,0.05,0.1,0.2,0.5")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    covariates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    #[arg(long, default_value = "linear")]
    model: ModelKind,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    covariates: usize,
    #[arg(long, default_value = "normal")]
    law: CovariateLaw,
    #[arg(long, default_value = "with_replacement")]
    scheme: Scheme,
    /// Standardise with this scheme's variance instead.
    #[arg(long)]
    variance_scheme: Option<Scheme>,
    #[arg(long, default_value_t = 500)]
    s: usize,
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fit_full(args: &FitFullArgs) -> Result<()> {
    let (fam, data) = args.data.load(args.seed)?;
    let report = pipeline::fit_full(fam, &data)?;
    let mut out = sink(args.output.as_deref())?;
    writeln!(out, "coefficient,theta")?;
    for (name, v) in data.schema().covariates.iter().zip(&report.theta) {
        writeln!(out, "{name},{v}")?;
    }
    out.flush()?;
    Ok(())
}

fn subsample_fit(args: &SubsampleArgs) -> Result<()> {
    let (fam, data) = args.data.load(args.seed)?;
    let opts = PipelineOptions::new(args.s0, args.s)
        .alpha(args.alpha)
        .b(args.b)
        .h_mode(args.h_mode);
    let res = pipeline::run(fam, &data, args.scheme, &opts, RngSeed::new(args.seed, 0))?;
    let mut out = sink(args.output.as_deref())?;
    writeln!(out, "{}", PipelineResult::csv_header(res.dim()))?;
    writeln!(out, "{}", res.csv_row())?;
    out.flush()?;
    Ok(())
}

fn plan(args: &PlanArgs) -> Result<()> {
    let t = NormVector::new(args.norms.clone())?;
    let plan = optprob::optimal_plan(&t, args.scheme, args.s)?;
    let plan = optprob::defensive_mix(&plan, args.alpha)?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "scheme={}", plan.scheme)?;
    if let Some(th) = plan.threshold {
        writeln!(out, "g={}", th.g)?;
        writeln!(out, "H={}", th.h)?;
    }
    let pi: Vec<String> = plan.pi.iter().map(|p| p.to_string()).collect();
    writeln!(out, "pi={}", pi.join(","))?;
    out.flush()?;
    if let Some(path) = &args.output {
        let mut f = sink(Some(path))?;
        plan.write_csv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn mse_experiment(args: &MseArgs) -> Result<()> {
    let cfg = args.config()?;
    let table = experiments::monte_carlo_mse(&cfg)?;
    let mut out = sink(cfg.output.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn g_table(args: &GTableArgs) -> Result<()> {
    let table = experiments::g_table(&args.laws, &args.ratios, args.n, args.covariates, args.seed)?;
    let mut out = sink(args.output.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn coverage(args: &CoverageArgs) -> Result<()> {
    let cfg = CoverageConfig {
        generator: GeneratorSpec::new(args.model, args.n, args.covariates, args.law),
        scheme: args.scheme,
        variance_scheme: args.variance_scheme,
        s: args.s,
        replicates: args.replicates,
        seed: args.seed,
    };
    let report = coverage::coverage_check(&cfg)?;
    let mut out = sink(args.output.as_deref())?;
    report.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        e if e.is_data_error() || matches!(e, Error::Domain { .. }) => EXIT_DATA,
        _ => EXIT_NUMERIC,
    }
}

/// Parses `args` (program name first) and runs the verb.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::FitFull(a) => fit_full(a),
        Command::SubsampleFit(a) => subsample_fit(a),
        Command::Plan(a) => plan(a),
        Command::MseExperiment(a) => mse_experiment(a),
        Command::GTable(a) => g_table(a),
        Command::Coverage(a) => coverage(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            exit_code(&e)
        }
    }
}
