//! Argument parsing and the five subcommands.
//!
//! Every flag can also come from a TOML file given with `--config`, whose
//! keys are the long flag names. Flags win over the file, which wins over
//! the built-in defaults.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use okd_core::montecarlo::{Estimator, SimConfig};
use okd_core::optimize::{best_thresholds, optimize_fixed_decoding};
use okd_core::{
    from_db, infokey, to_db, Decoding, HardDecoder, KeyRateResult, ModePair, OperatingPoint,
    OptimizationBudget, ScenarioParams, TruncationPolicy,
};

use crate::config::Config;
use crate::sweep::{run_sweep, write_panels, DecodingKind, SweepSpec};
use crate::validate::{default_shards, parallel_estimate, Comparison};
use crate::waveform;

pub const DEFAULT_NBAR_E: f64 = 10.0;
pub const DEFAULT_DISTORTION: f64 = 1e-6;
pub const DEFAULT_TAU_RATIO: f64 = 1.0;
pub const DEFAULT_N_B: f64 = 0.0;
pub const DEFAULT_SLOTS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_STEPS: usize = 81;
pub const DEFAULT_DB_MIN: f64 = -40.0;
pub const DEFAULT_DB_MAX: f64 = 0.0;
/// Cap applied to Poisson supports when the tail budget is overridden.
const HARD_CAP: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "okd",
    version,
    about = "Secure key rates of IM/DD optical key distribution against a temporal-mode demultiplexing eavesdropper"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rate at one operating point, optimised unless fixed by flags.
    Keyrate(PointCommand),
    /// Optimised key rates over a distortion range, one CSV per panel.
    Sweep(SweepCommand),
    /// The full panel grid: both pulse-width ratios and four noise levels.
    Figure3(Figure3Command),
    /// Cross-checks the analytic values against a seeded simulation.
    McValidate(McCommand),
    /// Overlap, distortion and complement mode of a waveform file.
    Modes(ModesCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecodingChoice {
    Soft,
    Hard,
    Both,
}

impl DecodingChoice {
    fn kinds(self) -> Vec<DecodingKind> {
        match self {
            Self::Soft => vec![DecodingKind::Soft],
            Self::Hard => vec![DecodingKind::Hard],
            Self::Both => vec![DecodingKind::Soft, DecodingKind::Hard],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorChoice {
    PlugIn,
    MillerMadow,
}

impl From<EstimatorChoice> for Estimator {
    fn from(e: EstimatorChoice) -> Self {
        match e {
            EstimatorChoice::PlugIn => Estimator::PlugIn,
            EstimatorChoice::MillerMadow => Estimator::MillerMadow,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file whose keys mirror the long flag names.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Probability mass each Poisson support may leave out.
    #[arg(long, value_name = "FLOAT")]
    pub tail_epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PointArgs {
    /// Mean photon number per pulse captured by Eve.
    #[arg(long, value_name = "FLOAT")]
    pub nbar_e: Option<f64>,
    /// Modulation depth; omit to optimise.
    #[arg(long, value_name = "FLOAT")]
    pub delta_e: Option<f64>,
    /// Symbol shape distortion in [0, 1].
    #[arg(long, value_name = "FLOAT", conflicts_with = "distortion_db")]
    pub distortion: Option<f64>,
    /// Distortion as 10 log10(D), at most 0.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    pub distortion_db: Option<f64>,
    /// Bob's transmission relative to Eve's.
    #[arg(long, value_name = "FLOAT")]
    pub tau_ratio: Option<f64>,
    /// Mean background count at Bob's detector.
    #[arg(long, value_name = "FLOAT")]
    pub n_b: Option<f64>,
    #[arg(long, value_enum)]
    pub decoding: Option<DecodingChoice>,
    /// Hard-decoding thresholds; omit both to optimise.
    #[arg(long, value_name = "INT")]
    pub k0: Option<u64>,
    #[arg(long, value_name = "INT")]
    pub k1: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct PointCommand {
    #[command(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepCommand {
    /// Signal strengths, comma separated.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub nbar_e: Vec<f64>,
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub tau_ratio: Vec<f64>,
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub n_b: Vec<f64>,
    #[arg(long, value_enum)]
    pub decoding: Option<DecodingChoice>,
    /// Lowest distortion in dB.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    pub db_min: Option<f64>,
    /// Highest distortion in dB.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    pub db_max: Option<f64>,
    /// Distortion grid points, both ends included.
    #[arg(long, value_name = "INT")]
    pub steps: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct Figure3Command {
    /// Distortion grid points over [-40, 0] dB.
    #[arg(long, value_name = "INT")]
    pub steps: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct McCommand {
    #[command(flatten)]
    pub point: PointArgs,
    #[arg(long, value_name = "INT")]
    pub slots: Option<u64>,
    #[arg(long, value_name = "UINT64")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorChoice>,
    /// Negative control: simulate with the other decoding than the analytic
    /// side, which must be reported as a failure.
    #[arg(long)]
    pub self_test: bool,
    /// Also write every slot as CSV `q_A,k_B,k_Eu,k_Ev`.
    #[arg(long, value_name = "PATH")]
    pub dump_records: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ModesCommand {
    /// Waveform CSV `t,re_u0,im_u0,re_u1,im_u1`.
    #[arg(value_name = "FILE", required_unless_present = "generate")]
    pub input: Option<PathBuf>,
    /// Write offset Gaussians to this file first and analyse it.
    #[arg(long, value_name = "PATH", conflicts_with = "input")]
    pub generate: Option<PathBuf>,
    /// Centre separation of the generated pulses.
    #[arg(long, value_name = "FLOAT", default_value_t = 0.5, allow_negative_numbers = true)]
    pub offset: f64,
    /// Intensity standard deviation of the generated pulses.
    #[arg(long, value_name = "FLOAT", default_value_t = 1.0)]
    pub sigma: f64,
    /// Grid points of the generated file.
    #[arg(long, value_name = "INT", default_value_t = 4001)]
    pub points: usize,
    /// Directory for the complement mode CSV.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Outcome of a command that completed: what to print and the exit code.
pub struct Outcome {
    pub report: String,
    pub success: bool,
}

impl Outcome {
    fn ok(report: String) -> Self {
        Self { report, success: true }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Keyrate(c) => cmd_keyrate(&c),
        Command::Sweep(c) => cmd_sweep(&c),
        Command::Figure3(c) => cmd_figure3(&c),
        Command::McValidate(c) => cmd_mc_validate(&c),
        Command::Modes(c) => cmd_modes(&c),
    }
}

fn load_config(common: &CommonArgs) -> Result<Config> {
    match &common.config {
        Some(path) => Ok(Config::load(path)?),
        None => Ok(Config::default()),
    }
}

fn policy(common: &CommonArgs, cfg: &Config) -> Result<TruncationPolicy> {
    match common.tail_epsilon.or(cfg.tail_epsilon) {
        None => Ok(TruncationPolicy::default()),
        Some(eps) => TruncationPolicy::new(eps, HARD_CAP).map_err(|e| anyhow!("--tail-epsilon: {e}")),
    }
}

fn parse_choice<T: ValueEnum>(key: &str, value: &Option<String>) -> Result<Option<T>> {
    value
        .as_deref()
        .map(|s| T::from_str(s, true).map_err(|_| anyhow!("--{key}: invalid value `{s}`")))
        .transpose()
}

fn single(key: &str, v: &Option<crate::config::OneOrMany<f64>>) -> Result<Option<f64>> {
    v.as_ref()
        .map(|v| v.single().ok_or_else(|| anyhow!("--{key}: expected a single value")))
        .transpose()
}

/// Names the flag behind a core validation error.
fn flag_error(e: okd_core::Error) -> anyhow::Error {
    use okd_core::Error as E;
    match e {
        E::InvalidParameter { name, reason } => anyhow!("--{}: {reason}", name.replace('_', "-")),
        E::DistortionOutOfRange => anyhow!("--distortion: {e}"),
        E::NegativePulseEnergy => anyhow!("--delta-e: {e} (at most sqrt(nbar_e))"),
        E::InvalidThresholds { .. } => anyhow!("--k0/--k1: {e}"),
        E::InsufficientSlots { .. } => anyhow!("--slots: {e}"),
        e => anyhow!(e),
    }
}

/// Flags merged with the config file and defaults.
#[derive(Debug, Clone)]
struct Point {
    point: OperatingPoint,
    delta_e: Option<f64>,
    decoding: DecodingChoice,
    decoder: Option<HardDecoder>,
}

fn resolve_point(a: &PointArgs, cfg: &Config) -> Result<Point> {
    let nbar_e = a.nbar_e.or(single("nbar-e", &cfg.nbar_e)?).unwrap_or(DEFAULT_NBAR_E);
    let tau_ratio = a.tau_ratio.or(single("tau-ratio", &cfg.tau_ratio)?).unwrap_or(DEFAULT_TAU_RATIO);
    let n_b = a.n_b.or(single("n-b", &cfg.n_b)?).unwrap_or(DEFAULT_N_B);
    let distortion = match (a.distortion, a.distortion_db) {
        (Some(d), _) => d,
        (None, Some(db)) => distortion_from_db(db)?,
        (None, None) => match (cfg.distortion, cfg.distortion_db) {
            (Some(_), Some(_)) => bail!("--distortion and --distortion-db are mutually exclusive"),
            (Some(d), None) => d,
            (None, Some(db)) => distortion_from_db(db)?,
            (None, None) => DEFAULT_DISTORTION,
        },
    };
    let point = OperatingPoint::new(nbar_e, distortion, tau_ratio, n_b).map_err(flag_error)?;
    let delta_e = a.delta_e.or(cfg.delta_e);
    if let Some(d) = delta_e {
        ScenarioParams::from_operating_point(point, d).map_err(flag_error)?;
    }
    let decoding = match a.decoding {
        Some(d) => d,
        None => parse_choice("decoding", &cfg.decoding)?.unwrap_or(DecodingChoice::Soft),
    };
    let decoder = match (a.k0.or(cfg.k0), a.k1.or(cfg.k1)) {
        (None, None) => None,
        (Some(k0), Some(k1)) => Some(HardDecoder::new(k0, k1).map_err(flag_error)?),
        (Some(_), None) => bail!("--k1: required together with --k0"),
        (None, Some(_)) => bail!("--k0: required together with --k1"),
    };
    if decoder.is_some() && decoding == DecodingChoice::Soft {
        bail!("--k0/--k1: thresholds need --decoding hard or both");
    }
    Ok(Point {
        point,
        delta_e,
        decoding,
        decoder,
    })
}

fn distortion_from_db(db: f64) -> Result<f64> {
    if !(db <= 0.0) {
        bail!("--distortion-db: must be a number <= 0");
    }
    Ok(from_db(db))
}

/// Optimises whatever the point leaves free.
fn evaluate(
    p: &Point,
    kind: DecodingKind,
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
) -> Result<(ScenarioParams, KeyRateResult)> {
    let fixed = match kind {
        DecodingKind::Soft => Some(Decoding::Soft),
        DecodingKind::Hard => p.decoder.map(Decoding::Hard),
    };
    let r = match (p.delta_e, fixed) {
        (Some(d), Some(dec)) => {
            let params = ScenarioParams::from_operating_point(p.point, d)?;
            (params, infokey::key_rate(&params, &dec, policy)?)
        }
        (Some(d), None) => {
            let params = ScenarioParams::from_operating_point(p.point, d)?;
            (params, best_thresholds(&params, budget, policy, None)?)
        }
        (None, Some(dec)) => {
            let o = optimize_fixed_decoding(&p.point, &dec, budget, policy)?;
            (o.params, o.result)
        }
        (None, None) => {
            let o = kind.optimize(&p.point, budget, policy)?;
            (o.params, o.result)
        }
    };
    Ok(r)
}

fn describe_point(p: &OperatingPoint) -> String {
    format!(
        "nbar_e={} distortion={:e} ({:.4} dB) tau_ratio={} n_b={}",
        p.nbar_e(),
        p.distortion(),
        to_db(p.distortion()),
        p.tau_ratio(),
        p.n_b()
    )
}

fn cmd_keyrate(c: &PointCommand) -> Result<Outcome> {
    let cfg = load_config(&c.common)?;
    let policy = policy(&c.common, &cfg)?;
    let p = resolve_point(&c.point, &cfg)?;
    let budget = OptimizationBudget::default();
    let mut out = format!("operating point: {}\n", describe_point(&p.point));
    for kind in p.decoding.kinds() {
        let (params, r) = evaluate(&p, kind, &budget, &policy)?;
        let e = params.energies();
        let how = if p.delta_e.is_some() { "fixed" } else { "optimised" };
        writeln!(out, "[{kind}]")?;
        writeln!(out, "  n_E0      {}", e.n_e0)?;
        writeln!(out, "  n_E1      {}", e.n_e1)?;
        writeln!(out, "  delta_e   {} ({how})", params.delta_e())?;
        if let Some(d) = r.decoding.decoder() {
            let how = if p.decoder.is_some() { "fixed" } else { "optimised" };
            writeln!(out, "  k0, k1    {}, {} ({how})", d.k0(), d.k1())?;
        }
        writeln!(out, "  I(A;B)    {}", r.i_ab)?;
        writeln!(out, "  I(B;E)    {}", r.i_be)?;
        writeln!(out, "  K         {} bits/slot", r.key_rate)?;
    }
    Ok(Outcome::ok(out))
}

fn list(flag: &[f64], cfg: &Option<crate::config::OneOrMany<f64>>, default: &[f64]) -> Vec<f64> {
    if !flag.is_empty() {
        flag.to_vec()
    } else if let Some(v) = cfg {
        v.to_vec()
    } else {
        default.to_vec()
    }
}

fn cmd_sweep(c: &SweepCommand) -> Result<Outcome> {
    let cfg = load_config(&c.common)?;
    let policy = policy(&c.common, &cfg)?;
    let decoding = match c.decoding {
        Some(d) => d,
        None => parse_choice("decoding", &cfg.decoding)?.unwrap_or(DecodingChoice::Both),
    };
    let spec = SweepSpec {
        distortion_db_range: (
            c.db_min.or(cfg.db_min).unwrap_or(DEFAULT_DB_MIN),
            c.db_max.or(cfg.db_max).unwrap_or(DEFAULT_DB_MAX),
            c.steps.or(cfg.steps).unwrap_or(DEFAULT_STEPS),
        ),
        nbar_e: list(&c.nbar_e, &cfg.nbar_e, &[DEFAULT_NBAR_E]),
        tau_ratio: list(&c.tau_ratio, &cfg.tau_ratio, &[DEFAULT_TAU_RATIO]),
        n_b: list(&c.n_b, &cfg.n_b, &[DEFAULT_N_B]),
        decodings: decoding.kinds(),
    };
    let out = c.out.clone().or(cfg.out).unwrap_or_else(|| PathBuf::from("sweep"));
    sweep_to_files(&spec, &policy, &out, "sweep")
}

fn cmd_figure3(c: &Figure3Command) -> Result<Outcome> {
    let cfg = load_config(&c.common)?;
    let policy = policy(&c.common, &cfg)?;
    let spec = SweepSpec::figure3(c.steps.or(cfg.steps).unwrap_or(DEFAULT_STEPS));
    let out = c.out.clone().or(cfg.out).unwrap_or_else(|| PathBuf::from("figure3"));
    sweep_to_files(&spec, &policy, &out, "figure3")
}

fn sweep_to_files(spec: &SweepSpec, policy: &TruncationPolicy, dir: &Path, prefix: &str) -> Result<Outcome> {
    for (flag, values) in [("nbar-e", &spec.nbar_e), ("tau-ratio", &spec.tau_ratio), ("n-b", &spec.n_b)] {
        if values.is_empty() {
            bail!("--{flag}: needs at least one value");
        }
    }
    let panels = run_sweep(spec, &OptimizationBudget::default(), policy)?;
    let paths = write_panels(&panels, dir, prefix)?;
    let mut out = String::new();
    for p in paths {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(Outcome::ok(out))
}

fn cmd_mc_validate(c: &McCommand) -> Result<Outcome> {
    let cfg = load_config(&c.common)?;
    let policy = policy(&c.common, &cfg)?;
    let p = resolve_point(&c.point, &cfg)?;
    let slots = c.slots.or(cfg.slots).unwrap_or(DEFAULT_SLOTS);
    let seed = c.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let estimator: Estimator = match c.estimator {
        Some(e) => e,
        None => parse_choice("estimator", &cfg.estimator)?.unwrap_or(EstimatorChoice::PlugIn),
    }
    .into();
    let budget = OptimizationBudget::default();

    let mut out = format!("operating point: {}\nslots={slots} seed={seed} estimator={estimator:?}\n", describe_point(&p.point));
    let mut all_passed = true;
    for kind in p.decoding.kinds() {
        let (params, analytic) = evaluate(&p, kind, &budget, &policy)?;
        let simulated = if c.self_test {
            match analytic.decoding {
                Decoding::Hard(_) => Decoding::Soft,
                Decoding::Soft => best_thresholds(&params, &budget, &policy, None)?.decoding,
            }
        } else {
            analytic.decoding
        };
        let sim = SimConfig::new(params, slots, seed, simulated).map_err(flag_error)?;
        if let Some(path) = &c.dump_records {
            let path = if p.decoding == DecodingChoice::Both {
                path.with_extension(format!("{kind}.csv"))
            } else {
                path.clone()
            };
            let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
            crate::records::write_records(BufWriter::new(file), crate::validate::records(&sim))?;
            writeln!(out, "records written to {}", path.display())?;
        }
        let estimate = parallel_estimate(&sim, default_shards(), estimator).map_err(flag_error)?;
        let cmp = Comparison::new(analytic, estimate);
        all_passed &= cmp.passed();
        writeln!(out, "[{kind}] delta_e={}", params.delta_e())?;
        if let Some(d) = analytic.decoding.decoder() {
            writeln!(out, "  thresholds k0={} k1={}", d.k0(), d.k1())?;
        }
        if c.self_test {
            writeln!(out, "  simulated with mismatched decoding: {}", describe_decoding(&simulated))?;
        }
        out += &cmp.report();
    }
    let success = if c.self_test {
        writeln!(
            out,
            "self-test: {}",
            if all_passed { "mismatch NOT detected" } else { "mismatch detected as expected" }
        )?;
        !all_passed
    } else {
        all_passed
    };
    Ok(Outcome { report: out, success })
}

fn describe_decoding(d: &Decoding) -> String {
    match d {
        Decoding::Soft => "soft".into(),
        Decoding::Hard(h) => format!("hard (k0={}, k1={})", h.k0(), h.k1()),
    }
}

fn cmd_modes(c: &ModesCommand) -> Result<Outcome> {
    let mut out = String::new();
    let (input, pair) = match (&c.generate, &c.input) {
        (Some(path), _) => {
            waveform::generate_gaussian_file(path, c.offset, c.sigma, c.points)
                .with_context(|| format!("generating {}", path.display()))?;
            let closed = 1.0 - (-c.offset * c.offset / (4.0 * c.sigma * c.sigma)).exp();
            writeln!(out, "generated {} (offset {}, sigma {}, {} points)", path.display(), c.offset, c.sigma, c.points)?;
            writeln!(out, "closed-form distortion {closed:e}")?;
            (path.clone(), waveform::load_pair(path).with_context(|| path.display().to_string())?)
        }
        (None, Some(path)) => (path.clone(), waveform::load_pair(path).with_context(|| path.display().to_string())?),
        (None, None) => bail!("a waveform FILE or --generate is required"),
    };
    report_modes(&pair, &mut out)?;
    let v = match pair.complement_mode() {
        Ok(v) => v,
        Err(e) => {
            // The measurements are still worth showing.
            print!("{out}");
            bail!("no complement mode written: {e}");
        }
    };
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("waveform");
    let path = dir.join(format!("{stem}_v.csv"));
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    waveform::write_complement(BufWriter::new(file), &v)?;
    writeln!(out, "complement mode written to {}", path.display())?;
    Ok(Outcome::ok(out))
}

fn report_modes(pair: &ModePair, out: &mut String) -> Result<()> {
    let c = pair.overlap();
    let d = pair.distortion();
    writeln!(out, "overlap     {} {:+}i (|.| = {})", c.re, c.im, c.norm())?;
    writeln!(out, "distortion  {d:e} ({} dB)", to_db(d))?;
    Ok(())
}
