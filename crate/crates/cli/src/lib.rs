//! Command-line front-end: `distance`, `gallery` and `psgrid`.

pub mod mtx;
mod report;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neardefect::certify::{certify, sigma_min_grid, CertifyError, CertifyTolerances};
use neardefect::gallery::{GalleryKind, GallerySpec, DEFAULT_EMBEDDED_BLOCK, DEFAULT_KAHAN_TARGET};
use neardefect::implicit::{
    initialize, newton_solve, InitStrategy, NewtonSettings, ProblemInstance,
};
use neardefect::linalg::ComplexMatrix;
use num_complex::Complex64;

pub use report::{sci, OutputFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NEWTON: i32 = 2;
pub const EXIT_CERTIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "neardefect",
    version,
    about = "Distance to the nearest defective matrix"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Newton's method from z0 and certify the defective matrix it finds.
    Distance(DistanceArgs),
    /// Write a test matrix in Matrix Market format.
    Gallery(GalleryArgs),
    /// Sample σ_min(A − zI) on a rectangular grid and write CSV.
    Psgrid(PsgridArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Kahan,
    Grcar,
    EmbeddedKahan,
}

#[derive(Debug, Args)]
pub struct GalleryParams {
    /// Matrix dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Leading Kahan block size for `embedded-kahan`.
    #[arg(long, default_value_t = DEFAULT_EMBEDDED_BLOCK)]
    pub block: usize,
    /// Value of s^(n-1) for `kahan`.
    #[arg(long, default_value_t = DEFAULT_KAHAN_TARGET)]
    pub target: f64,
}

#[derive(Debug, Args)]
pub struct MatrixSource {
    /// Matrix Market input file.
    #[arg(long, conflicts_with = "gallery")]
    pub input: Option<PathBuf>,
    /// Built-in test matrix.
    #[arg(long, value_enum)]
    pub gallery: Option<Kind>,
    #[command(flatten)]
    pub params: GalleryParams,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    /// Starting point as RE,IM.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub z0: String,
    /// Starting ε: a number, or `auto` for σ_min(A − z0 I).
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub eps0: String,
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub maxit: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Output file; standard output when omitted.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GalleryArgs {
    #[arg(value_enum)]
    pub kind: Kind,
    #[command(flatten)]
    pub params: GalleryParams,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PsgridArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    /// Real-axis window as LO,HI.
    #[arg(long, allow_hyphen_values = true)]
    pub re: String,
    /// Imaginary-axis window as LO,HI.
    #[arg(long, allow_hyphen_values = true)]
    pub im: String,
    /// Samples per axis as NRE,NIM.
    #[arg(long, default_value = "51,51")]
    pub samples: String,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

/// A failure with its exit status; the message goes to standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn parse_pair<T: std::str::FromStr>(flag: &str, text: &str) -> Result<(T, T), Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(usage(format!("--{flag}: cannot parse `{text}`"))),
        },
        _ => Err(usage(format!(
            "--{flag}: expected two comma-separated values, got `{text}`"
        ))),
    }
}

fn gallery_spec(kind: Kind, params: &GalleryParams) -> Result<GallerySpec, Failure> {
    let n = params
        .n
        .ok_or_else(|| usage("--n is required with a gallery matrix"))?;
    let kind = match kind {
        Kind::Kahan => GalleryKind::Kahan {
            target: params.target,
        },
        Kind::Grcar => GalleryKind::Grcar,
        Kind::EmbeddedKahan => GalleryKind::EmbeddedKahan {
            block: params.block,
        },
    };
    Ok(GallerySpec { kind, n })
}

fn load_matrix(source: &MatrixSource) -> Result<ComplexMatrix, Failure> {
    match (&source.input, source.gallery) {
        (Some(path), None) => mtx::read_matrix_market(path).map_err(|e| match e {
            mtx::MtxError::Io { .. } => usage(e.to_string()),
            _ => usage(format!("{}: {e}", path.display())),
        }),
        (None, Some(kind)) => gallery_spec(kind, &source.params)?
            .build()
            .map_err(|e| usage(e.to_string())),
        _ => Err(usage("exactly one of --input or --gallery is required")),
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => fs::File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn io_failure(e: io::Error) -> Failure {
    usage(format!("write failed: {e}"))
}

pub fn cmd_distance(args: &DistanceArgs) -> Result<(), Failure> {
    if !(args.tol > 0.0) {
        return Err(usage(format!("--tol must be positive, got {}", args.tol)));
    }
    if args.maxit == 0 {
        return Err(usage("--maxit must be at least 1"));
    }
    let (re, im): (f64, f64) = parse_pair("z0", &args.z0)?;
    let strategy = match args.eps0.trim() {
        "auto" => InitStrategy::Svd,
        text => InitStrategy::SvdWithEpsilon(
            text.parse()
                .map_err(|_| usage(format!("--eps0: expected a number or `auto`, got `{text}`")))?,
        ),
    };
    let a = load_matrix(&args.source)?;
    let problem = ProblemInstance::new(a.clone()).map_err(|e| usage(e.to_string()))?;
    let start = initialize(&problem, Complex64::new(re, im), &strategy)
        .map_err(|e| usage(e.to_string()))?;
    let settings = NewtonSettings {
        tol: args.tol,
        max_iter: args.maxit,
        ..NewtonSettings::default()
    };
    let mut out = open_output(&args.output)?;

    let outcome = match newton_solve(&problem, &settings, &start) {
        Ok(o) => o,
        Err(e) => {
            if let Some(records) = e.records() {
                report::write_table(&mut out, args.format, records).map_err(io_failure)?;
                out.flush().map_err(io_failure)?;
            }
            return Err(Failure {
                code: EXIT_NEWTON,
                message: format!("Newton iteration failed: {e}"),
            });
        }
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let (cert, failure) = match certify(&a, &outcome.state, &CertifyTolerances::default()) {
        Ok(c) => (c, None),
        Err(CertifyError::CertificationFailed {
            quantity,
            value,
            bound,
            certificate,
        }) => (
            *certificate,
            Some(Failure {
                code: EXIT_CERTIFY,
                message: format!(
                    "certification failed: {quantity} = {value:.3e} exceeds {bound:.3e}"
                ),
            }),
        ),
        Err(e) => {
            return Err(Failure {
                code: EXIT_CERTIFY,
                message: format!("certification failed: {e}"),
            })
        }
    };
    report::write_run(
        &mut out,
        args.format,
        &outcome.records,
        &cert,
        failure.is_none(),
    )
    .map_err(io_failure)?;
    out.flush().map_err(io_failure)?;
    failure.map_or(Ok(()), Err)
}

pub fn cmd_gallery(args: &GalleryArgs) -> Result<(), Failure> {
    let a = gallery_spec(args.kind, &args.params)?
        .build()
        .map_err(|e| usage(e.to_string()))?;
    match &args.output {
        Some(path) => mtx::write_matrix_market(path, &a).map_err(|e| usage(e.to_string())),
        None => {
            let mut out = io::stdout().lock();
            mtx::write_matrix_market_to(&mut out, &a).map_err(io_failure)?;
            out.flush().map_err(io_failure)
        }
    }
}

pub fn cmd_psgrid(args: &PsgridArgs) -> Result<(), Failure> {
    let re: (f64, f64) = parse_pair("re", &args.re)?;
    let im: (f64, f64) = parse_pair("im", &args.im)?;
    let counts: (usize, usize) = parse_pair("samples", &args.samples)?;
    if !(re.0 < re.1 && im.0 < im.1) {
        return Err(usage("--re and --im need LO < HI"));
    }
    let a = load_matrix(&args.source)?;
    let grid = sigma_min_grid(&a, re, im, counts).map_err(|e| usage(e.to_string()))?;
    let mut out = open_output(&args.output)?;
    grid.write_csv(&mut out).map_err(io_failure)?;
    out.flush().map_err(io_failure)
}

/// Parses arguments, runs the command, and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Distance(a) => cmd_distance(a),
        Command::Gallery(a) => cmd_gallery(a),
        Command::Psgrid(a) => cmd_psgrid(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
