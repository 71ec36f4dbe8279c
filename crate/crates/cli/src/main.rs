//! `fiberspec` command-line driver.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
    Core(fiberspec::Error),
}

impl From<fiberspec::Error> for CliError {
    fn from(e: fiberspec::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(s) | CliError::Io(s) => f.write_str(s),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    /// 2 input error, 3 resource cap, 4 numerical failure.
    pub fn exit_code(&self) -> u8 {
        use fiberspec::Error as E;
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Core(E::SizeTooLarge { .. }) => 3,
            CliError::Core(
                E::InvalidModel(_)
                | E::InvalidArgument(_)
                | E::SizeTooSmall { .. }
                | E::UnsupportedModel(_)
                | E::NotRankOne(_)
                | E::NotOnUnitCircle(_),
            ) => 2,
            CliError::Core(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "fiberspec", version, about = "Spectra of translation-covariant Lindbladians on Z")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    /// Model file in the JSON schema of `fiberspec::model`.
    #[arg(long, conflicts_with = "builtin")]
    pub model: Option<PathBuf>,
    /// Builtin model, e.g. `dephasing` or `non_normal(delta=0.0,l=1)`.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Dissipation strength for builtins.
    #[arg(long = "G")]
    pub g: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Bc {
    Periodic,
    Free,
}

impl From<Bc> for fiberspec::model::Boundary {
    fn from(b: Bc) -> Self {
        match b {
            Bc::Periodic => Self::Periodic,
            Bc::Free => Self::Free,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Infinite-volume spectrum: NHE symbol curves and the jump curve.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 256)]
        qpoints: usize,
        #[arg(long, default_value_t = 256)]
        thetapoints: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Spectrum of an n-site chain, optionally with a random potential.
    Finite {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Bc::Periodic)]
        bc: Bc,
        /// Half-width of the uniform potential; no potential when absent.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap on the dense dimension n^2.
        #[arg(long, default_value_t = fiberspec::finite::DEFAULT_DENSE_CAP)]
        cap: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Hausdorff distance between two spectrum CSV files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Also write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form spectrum of a builtin model.
    ClosedForm {
        #[arg(long)]
        builtin: String,
        #[arg(long = "G")]
        g: f64,
        /// Sample spacing for CSV output.
        #[arg(long, default_value_t = 1e-3)]
        spacing: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Smallest singular value of (A - z) on a grid, A a finite fiber or the full generator.
    Pseudospectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Bc::Periodic)]
        bc: Bc,
        /// Use the periodic fiber at q = 2 pi k / n instead of the full generator.
        #[arg(long)]
        fiber_k: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        re_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        re_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        im_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        im_max: Option<f64>,
        #[arg(long, default_value_t = 60)]
        nx: usize,
        #[arg(long, default_value_t = 60)]
        ny: usize,
        #[arg(long, default_value_t = fiberspec::finite::DEFAULT_DENSE_CAP)]
        cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit of the dephasing gap against system size.
    GapScaling {
        #[arg(long = "G", default_value_t = 2.0)]
        g: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![50usize, 100, 200, 400])]
        sizes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Residual of the fiber decomposition of the periodic generator.
    Equivalence {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 6, 7])]
        n: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Samples of <rho, L rho> for the disordered dephasing chain.
    Range {
        #[arg(long = "G", default_value_t = 2.0)]
        g: f64,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Containment of disordered spectra in the widened numerical range.
    Containment {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 64)]
        directions: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("LINDBLAD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Input(format!("LINDBLAD_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    use commands as c;
    match cli.command {
        Command::Spectrum {
            model,
            qpoints,
            thetapoints,
            out,
            format,
        } => c::spectrum(&model, qpoints, thetapoints, &out, format),
        Command::Finite {
            model,
            n,
            bc,
            lambda,
            seed,
            cap,
            out,
            format,
        } => c::finite(&model, n, bc, lambda, seed, cap, &out, format),
        Command::Compare { a, b, out } => c::compare(&a, &b, out.as_deref()),
        Command::ClosedForm {
            builtin,
            g,
            spacing,
            out,
            format,
        } => c::closed_form(&builtin, g, spacing, &out, format),
        Command::Pseudospectrum {
            model,
            n,
            bc,
            fiber_k,
            re_min,
            re_max,
            im_min,
            im_max,
            nx,
            ny,
            cap,
            out,
        } => c::pseudospectrum(
            &model,
            n,
            bc,
            fiber_k,
            [re_min, re_max, im_min, im_max],
            (nx, ny),
            cap,
            &out,
        ),
        Command::GapScaling { g, sizes, out } => c::gap_scaling(g, &sizes, &out),
        Command::Equivalence { model, n, out } => c::equivalence(&model, &n, &out),
        Command::Range {
            g,
            n,
            lambda,
            seed,
            samples,
            out,
        } => c::range(g, n, lambda, seed, samples, &out),
        Command::Containment {
            model,
            n,
            lambda,
            seeds,
            directions,
            out,
        } => c::containment(&model, n, lambda, &seeds, directions, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
