//! Scenario runner for crlab: invariant reports, flow runs, fillability experiments, embedded
//! checks and the self-test suite.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use crlab_core::CrError;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};

pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

const AFTER_HELP: &str = "\
Geometry strings: name[:key=value,...][@dims]
  t3-roto:n=2@32          rototranslation torus, θ = cos(nz)dx + sin(nz)dy
  nil-invariant:beta=0.1*exp(i*x)@64x64
                          Reeb-invariant deformation on the Heisenberg nilmanifold
  heis-flat:points=16,order=6
                          flat Heisenberg group on scattered points
  s3-homogeneous          round sphere in a left-invariant frame
Hypersurfaces (--gamma, or --geometry for invariants):
  sphere | ellipsoid:a1=1,a2=2 | perturbed:eps=0.01,mode=cubic|quartic

Settings come from defaults, then --config FILE (a JSON object with the same keys as the
flags, tolerances nested under \"tolerances\"), then flags. CRLAB_OUT sets the output
directory unless --out is given; CRLAB_THREADS sets the worker thread count.

Exit status: 0 success, 1 usage or runtime error, 2 selftest tolerance failure, 3 aborted flow.";

#[derive(Parser, Debug)]
#[command(name = "crlab", version, about = "Numerical lab for 3D CR and pseudohermitian geometry", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curvature, torsion and Cartan tensor of a catalog geometry.
    Invariants(InvariantsArgs),
    /// Run a torsion, Cartan, gauge-fixed or coupled-torsion flow and record diagnostics.
    Flow(FlowArgs),
    /// Solve fillability certificates along a flow and measure the ambient integrability.
    Fill(FillArgs),
    /// Pointwise checks on a real hypersurface in C².
    Embed(EmbedArgs),
    /// Run the acceptance criteria.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Serialize, Default)]
pub struct Common {
    /// JSON settings file; flags override its values.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory [default: CRLAB_OUT or crlab-out].
    #[arg(long, value_name = "DIR")]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Override one tolerance, e.g. --tol abort_residual=1e-4 (repeatable).
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tolerance)]
    #[serde(skip)]
    pub tol: Vec<(String, f64)>,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("tolerance {k}: {v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Args, Debug, Serialize)]
pub struct InvariantsArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    /// Grid resolution per axis (power of two, 8..=128).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub res: Option<usize>,
    /// Sample count for hypersurfaces.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct FlowArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub res: Option<usize>,
    /// torsion | cartan | gauge-fixed | coupled-torsion
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    /// Time step [default: largest step under the stability guard dividing t_end].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Write β and λ every N steps.
    #[arg(long, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct FillArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub res: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    /// torsion | cartan | gauge-fixed [default: the flow kind]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slices: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Required margin min |Re u|.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Write each slice's certificate u.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub snapshots: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    /// lemma62 | chi | tangency
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// one, z1, z2, z1bar, z1z2, z1sq, z1barsq, z1z2bar, absz1sq, random-quadratic:seed=N
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    /// exact | difference
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub differentiation: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct SelftestArgs {
    /// Run only these criteria, e.g. --criteria 1,4,8.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Why a run did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Aborted(String),
    Tolerance(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Runtime(_) => EXIT_USAGE,
            Self::Tolerance(_) => EXIT_TOLERANCE,
            Self::Aborted(_) => EXIT_ABORTED,
        }
    }
}

impl From<CrError> for Failure {
    fn from(e: CrError) -> Self {
        match e {
            CrError::Catalog(_) | CrError::Expr(_) | CrError::StepGuard { .. } => Self::Usage(e.to_string()),
            CrError::FlowAborted { .. } => Self::Aborted(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

/// Versioned JSON summary written for every run.
#[derive(Serialize)]
pub struct Summary<'a, S: Serialize, R: Serialize> {
    pub schema: u32,
    pub command: &'a str,
    pub version: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub tolerances: Value,
    pub config: &'a S,
    pub result: R,
}

impl<'a, S: Serialize, R: Serialize> Summary<'a, S, R> {
    pub fn new(command: &'a str, config: &'a S, result: R) -> Self {
        let v = serde_json::to_value(config).expect("settings serialize");
        Summary {
            schema: SCHEMA,
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config::config_hash(config),
            seed: v.get("seed").and_then(Value::as_u64).unwrap_or(0),
            tolerances: v.get("tolerances").cloned().unwrap_or(Value::Null),
            config,
            result,
        }
    }
}

/// Output directory and its writer.
pub struct Output {
    pub dir: PathBuf,
}

impl Output {
    pub fn create(dir: PathBuf) -> Result<Self, Failure> {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write `<command>.json` and echo it on stdout.
    pub fn summary<S: Serialize, R: Serialize>(&self, s: &Summary<'_, S, R>) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(s).map_err(|e| Failure::Runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(self.path(&format!("{}.json", s.command)), &text)?;
        print!("{text}");
        Ok(())
    }
}

fn output_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("CRLAB_OUT").filter(|v| !v.is_empty()).map(PathBuf::from))
        .or(file)
        .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUT))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("CRLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::Usage(format!("CRLAB_THREADS must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load<S: serde::de::DeserializeOwned>(name: &str, args: &impl Serialize, common: &Common) -> Result<(S, PathBuf), Failure> {
    let file = match &common.config {
        Some(p) => config::read_config(Path::new(p), name)?,
        None => Default::default(),
    };
    let flags = serde_json::to_value(args).map_err(|e| Failure::Usage(e.to_string()))?;
    let settings = config::merge(file.settings, flags, &common.tol)?;
    Ok((settings, output_dir(common.out.clone(), file.out)))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Invariants(a) => {
            let (mut s, out): (config::InvariantsSettings, _) = load("invariants", &a, &a.common)?;
            s.geometry = config::with_resolution(&s.geometry, s.res.take())?;
            s.validate()?;
            commands::invariants(&s, &Output::create(out)?)
        }
        Command::Flow(a) => {
            let (mut s, out): (config::FlowSettings, _) = load("flow", &a, &a.common)?;
            s.geometry = config::with_resolution(&s.geometry, s.res.take())?;
            s.validate()?;
            commands::flow(&s, &Output::create(out)?)
        }
        Command::Fill(a) => {
            let (mut s, out): (config::FillSettings, _) = load("fill", &a, &a.common)?;
            s.geometry = config::with_resolution(&s.geometry, s.res.take())?;
            s.finalize();
            s.validate()?;
            commands::fill(&s, &Output::create(out)?)
        }
        Command::Embed(a) => {
            let (mut s, out): (config::EmbedSettings, _) = load("embed", &a, &a.common)?;
            s.finalize();
            s.validate()?;
            commands::embed(&s, &Output::create(out)?)
        }
        Command::Selftest(a) => {
            let (s, out): (config::SelftestSettings, _) = load("selftest", &a, &a.common)?;
            s.validate()?;
            commands::selftest(&s, &Output::create(out)?)
        }
    }
}

/// Parse `argv` (program name first), run the subcommand and return the exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}\n\nRun with --help for usage."),
                Failure::Runtime(m) | Failure::Aborted(m) | Failure::Tolerance(m) => eprintln!("error: {m}"),
            }
            f.exit_code()
        }
    }
}
