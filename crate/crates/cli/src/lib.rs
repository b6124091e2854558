//! Command-line front end. Every subcommand merges flags over an optional TOML file,
//! records the resolved configuration in its JSON output and exits with
//! 0 (all verifications passed), 1 (a verification failed or could not finish) or
//! 2 (usage or configuration error).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hyperbarrier::checks::{run_criterion, CheckConfig, CriterionReport};
use hyperbarrier::io::{json_bytes, write_atomic};
use hyperbarrier::pde_lab::{DomainSpec, NonlinearitySpec};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "hyperbarrier", version, about = "Barrier, boundary and Dirichlet-problem experiments on hyperbolic space")]
pub struct Cli {
    /// TOML file with top-level `out-dir`, `formats` and one table per subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out/<subcommand>].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Artifact formats to write [default: csv,json,svg].
    #[arg(long, global = true, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decaying barrier profile and its decay certificate.
    Ode(OdeOpts),
    /// Finite-difference verification of a barrier supersolution and the cone axioms.
    Barrier(BarrierOpts),
    /// Visual metric against sin(θ/2) and the base-point change band.
    Visual(VisualOpts),
    /// Box-counting dimension of a boundary set.
    Dim(DimOpts),
    /// Scooping construction and the distance identity for its final set.
    Scoop(ScoopOpts),
    /// Cap cover to cone family, budget and superposed supersolution.
    Cover(CoverOpts),
    /// Finite-difference experiments on the Poincaré disk.
    Pde(PdeOpts),
    /// The full acceptance battery.
    AllChecks(AllChecksOpts),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ode(_) => "ode",
            Command::Barrier(_) => "barrier",
            Command::Visual(_) => "visual",
            Command::Dim(_) => "dim",
            Command::Scoop(_) => "scoop",
            Command::Cover(_) => "cover",
            Command::Pde(_) => "pde",
            Command::AllChecks(_) => "all-checks",
        }
    }
}

/// Declares an options struct whose fields are all optional, usable both as clap
/// arguments and as a TOML table, with `merge` preferring flags over the file.
macro_rules! options {
    ($(#[$sm:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty,)* }) => {
        $(#[$sm])*
        #[derive(Args, Debug, Clone, Default, Deserialize)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name {
            $($(#[$fm])* pub $field: Option<$ty>,)*
        }

        impl $name {
            fn merge(self, file: Option<Self>) -> Self {
                let file = file.unwrap_or_default();
                $name { $($field: self.$field.or(file.$field),)* }
            }
        }
    };
}

options!(OdeOpts {
    #[arg(long)] n: usize,
    #[arg(long)] kappa: f64,
    #[arg(long)] lambda: f64,
    /// Start of the backward integration [default: automatic].
    #[arg(long)] horizon: f64,
    #[arg(long)] grid_step: f64,
    /// Also run the ODE acceptance criteria.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] acceptance: bool,
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    Hyperplane,
    Sphere,
    Horosphere,
    Equidistant,
}

options!(BarrierOpts {
    #[arg(long)] n: usize,
    #[arg(long)] kappa: f64,
    #[arg(long)] lambda: f64,
    #[arg(long)] surface: SurfaceKind,
    /// Sphere radius, equidistant offset or horosphere level.
    #[arg(long)] surface_param: f64,
    #[arg(long)] samples: usize,
    #[arg(long)] seed: u64,
    #[arg(long)] tol: f64,
    #[arg(long)] step: f64,
    /// Samples lie at distance t0 + 0.01 ..= d_max from the surface.
    #[arg(long)] d_max: f64,
    /// Cone half-angle for the axiom check.
    #[arg(long)] theta: f64,
    /// Barrier offset c.
    #[arg(long)] offset: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] acceptance: bool,
});

options!(VisualOpts {
    #[arg(long)] kappa: f64,
    /// Pairs form an m × m grid of base angles and separations.
    #[arg(long)] grid: usize,
    #[arg(long)] ray_t: f64,
    #[arg(long)] tol: f64,
    /// Distance of the second base point from the origin.
    #[arg(long)] basepoint_shift: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] acceptance: bool,
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    Finite,
    Circle,
    Cantor,
}

options!(DimOpts {
    #[arg(long)] set: SetKind,
    #[arg(long)] depth: u32,
    #[arg(long)] eps_hi: f64,
    #[arg(long)] eps_lo: f64,
    #[arg(long)] scales: usize,
    /// Repeat the estimate from a base point this far away (0 disables).
    #[arg(long)] basepoint_shift: f64,
    /// Expected dimension; fails when the estimate is further than `expect-tol`.
    #[arg(long)] expect: f64,
    #[arg(long)] expect_tol: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] acceptance: bool,
});

options!(ScoopOpts {
    #[arg(long)] kappa: f64,
    #[arg(long)] r0: f64,
    #[arg(long)] epsilon: f64,
    #[arg(long)] generations: usize,
    #[arg(long)] seam_resolution: f64,
    /// Times t ∈ [r0, r0 + t_span] for the distance identity.
    #[arg(long)] t_span: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] acceptance: bool,
});

options!(CoverOpts {
    /// Polar angles of the cap centers.
    #[arg(long, value_delimiter = ',')] angles: Vec<f64>,
    /// Visual radius shared by all caps.
    #[arg(long)] cap_radius: f64,
    #[arg(long)] lambda: f64,
    #[arg(long)] offset: f64,
    #[arg(long)] amplitude: f64,
    /// Value u(o) to compare the budget against.
    #[arg(long)] threshold: f64,
    /// Largest admissible cap radius [default: sin(θ0/2) of the model axioms].
    #[arg(long)] max_cap_radius: f64,
    #[arg(long)] samples: usize,
    #[arg(long)] seed: u64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] acceptance: bool,
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Eigen,
    Solve,
    Trend,
    DeltaR2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityKind {
    Linear,
    AllenCahn,
    Tanh,
    Arctan,
    Rational,
}

options!(PdeOpts {
    #[arg(long)] experiment: Experiment,
    #[arg(long)] spacing: f64,
    #[arg(long)] kappa: f64,
    #[arg(long)] clip: f64,
    /// Geodesic disk of this radius; other domains come from the `domain` table.
    #[arg(long)] disk: f64,
    #[arg(skip)] domain: DomainSpec,
    #[arg(long)] nonlinearity: NonlinearityKind,
    /// Slope of the linear nonlinearity.
    #[arg(long)] lambda: f64,
    /// Constant initial guess for Newton.
    #[arg(long, allow_hyphen_values = true)] init: f64,
    #[arg(long)] tol: f64,
    /// Truncation radii for the trend experiment.
    #[arg(long, value_delimiter = ',')] radii: Vec<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] acceptance: bool,
});

options!(AllChecksOpts {
    #[arg(long)] pde_spacing: f64,
    #[arg(long)] generations: usize,
    #[arg(long)] seed: u64,
    /// Criterion ids to run [default: all].
    #[arg(long, value_delimiter = ',')] only: Vec<u8>,
});

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct ConfigFile {
    out_dir: Option<PathBuf>,
    formats: Option<Vec<Format>>,
    ode: Option<OdeOpts>,
    barrier: Option<BarrierOpts>,
    visual: Option<VisualOpts>,
    dim: Option<DimOpts>,
    scoop: Option<ScoopOpts>,
    cover: Option<CoverOpts>,
    pde: Option<PdeOpts>,
    all_checks: Option<AllChecksOpts>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<hyperbarrier::Error> for Failure {
    fn from(e: hyperbarrier::Error) -> Self {
        match e {
            hyperbarrier::Error::InvalidParameter(_) | hyperbarrier::Error::Precondition(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

/// Where and what to write.
pub struct Output {
    dir: PathBuf,
    formats: Vec<Format>,
    written: Vec<PathBuf>,
}

impl Output {
    fn write(&mut self, format: Format, name: &str, bytes: &[u8]) -> Outcome<()> {
        if !self.formats.contains(&format) {
            return Ok(());
        }
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, bytes: hyperbarrier::Result<Vec<u8>>) -> Outcome<()> {
        let bytes = bytes?;
        self.write(Format::Csv, name, &bytes)
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Outcome<()> {
        self.write(Format::Json, name, &json_bytes(value)?)
    }

    pub fn svg(&mut self, name: &str, text: String) -> Outcome<()> {
        self.write(Format::Svg, name, text.as_bytes())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Result of one subcommand: its JSON report and whether every verification passed.
pub struct Report {
    pub passed: bool,
    pub summary: String,
}

/// Runs the acceptance criteria with ids `ids` and returns them with their joint status.
pub fn acceptance(ids: &[u8], cfg: &CheckConfig) -> Outcome<(Vec<CriterionReport>, bool)> {
    let reports = ids.iter().map(|&id| run_criterion(id, cfg)).collect::<hyperbarrier::Result<Vec<_>>>()?;
    for r in &reports {
        eprintln!("{}", r.summary_line());
    }
    let passed = reports.iter().all(|r| r.passed);
    Ok((reports, passed))
}

fn load_config(path: &Path) -> Outcome<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("reading {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Outcome<Report> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let name = cli.command.name();
    let dir = cli.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("out").join(name));
    let formats = cli.formats.or(file.formats).unwrap_or_else(|| vec![Format::Csv, Format::Json, Format::Svg]);
    let mut out = Output { dir, formats, written: Vec::new() };
    let report = match cli.command {
        Command::Ode(o) => commands::ode(o.merge(file.ode), &mut out)?,
        Command::Barrier(o) => commands::barrier(o.merge(file.barrier), &mut out)?,
        Command::Visual(o) => commands::visual(o.merge(file.visual), &mut out)?,
        Command::Dim(o) => commands::dim(o.merge(file.dim), &mut out)?,
        Command::Scoop(o) => commands::scoop(o.merge(file.scoop), &mut out)?,
        Command::Cover(o) => commands::cover(o.merge(file.cover), &mut out)?,
        Command::Pde(o) => commands::pde(o.merge(file.pde), &mut out)?,
        Command::AllChecks(o) => commands::all_checks(o.merge(file.all_checks), &mut out)?,
    };
    for p in &out.written {
        eprintln!("wrote {}", p.display());
    }
    Ok(report)
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(r) => {
            println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.summary);
            if r.passed {
                0
            } else {
                1
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("failed: {m}");
            1
        }
    }
}

/// Nonlinearity from the flag pair, `Linear` taking its slope from `lambda`.
pub fn nonlinearity(kind: NonlinearityKind, lambda: f64) -> NonlinearitySpec {
    match kind {
        NonlinearityKind::Linear => NonlinearitySpec::Linear { lambda },
        NonlinearityKind::AllenCahn => NonlinearitySpec::AllenCahn,
        NonlinearityKind::Tanh => NonlinearitySpec::Tanh,
        NonlinearityKind::Arctan => NonlinearitySpec::Arctan,
        NonlinearityKind::Rational => NonlinearitySpec::Rational,
    }
}
