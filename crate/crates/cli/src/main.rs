use std::fs::OpenOptions;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tropsamp::hepp::{ensemble_sum_oracle, hepp_with_mode};
use tropsamp::montecarlo::{estimate_beta_prim_with, estimate_residual, EstimateReport, RunSpec};
use tropsamp::sampler::Sampler;
use tropsamp::series::solve_gamma_tr;
use tropsamp::{CoefficientTables, Dimension, Graph, Mode};

#[derive(Parser, Debug)]
#[command(name = "tropsamp", version, about = "Tropical Feynman integrals by recursion and exact sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the Z/B coefficient tables and write them to a file.
    Tables(TablesArgs),
    /// Draw metric graphs from the tropical measure, one per line.
    Sample(SampleArgs),
    /// Estimate the φ³ n-point coefficient at loop order L.
    EstimatePhi3(Phi3Args),
    /// Estimate the primitive φ⁴ β-function and its Hepp version.
    EstimateBetaPrim(BetaArgs),
    /// Exact ensemble sum Z(L,n), or the Hepp bound of one graph.
    Oracle(OracleArgs),
    /// Truncated series solution of the loop equation.
    Series(SeriesArgs),
}

#[derive(Args, Debug)]
struct Sector {
    /// Vertex valence.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Spacetime dimension, decimal or p/q.
    #[arg(long, default_value = "3")]
    dim: Dimension,
    #[arg(long, value_enum, default_value_t = ModeArg::Plain)]
    mode: ModeArg,
    #[arg(long)]
    loops: usize,
    /// Number of legs; defaults to k.
    #[arg(long)]
    legs: Option<usize>,
}

impl Sector {
    fn legs(&self) -> usize {
        self.legs.unwrap_or(self.k)
    }

    fn tables(&self, file: Option<&Path>) -> Result<CoefficientTables> {
        let (d, mode) = (self.dim.value(), self.mode.into());
        let t = match file {
            Some(path) => CoefficientTables::load_expecting(path, self.k, d, mode)
                .with_context(|| format!("loading {}", path.display()))?,
            None => CoefficientTables::build_for_sector(self.k, d, mode, self.loops, self.legs())?,
        };
        if !t.contains(self.loops, self.legs()) {
            bail!("tables do not cover sector (L={}, n={})", self.loops, self.legs());
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Plain,
    Positive,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Plain => Mode::Plain,
            ModeArg::Positive => Mode::Positive,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct TablesArgs {
    #[command(flatten)]
    sector: Sector,
    /// Output file; defaults to tables-k<k>-d<D>-<mode>-L<loops>.json.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    sector: Sector,
    #[arg(long, default_value_t = 10)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Draw beaded graphs instead of 1PI graphs.
    #[arg(long)]
    beaded: bool,
    /// Rescale coordinates so that the largest is 1.
    #[arg(long)]
    projective: bool,
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "TROPSAMP_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Append the report to this file instead of printing it.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Report a wall time of zero so that repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct Phi3Args {
    #[arg(long)]
    loops: usize,
    #[arg(long, default_value_t = 3)]
    legs: usize,
    #[arg(long, default_value = "3")]
    dim: Dimension,
    #[arg(long, default_value_t = 1.0)]
    mass_ratio: f64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct BetaArgs {
    #[arg(long)]
    loops: usize,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value = "3")]
    dim: Dimension,
    #[arg(long, value_enum, default_value_t = ModeArg::Plain)]
    mode: ModeArg,
    #[arg(long, required_unless_present = "graph")]
    loops: Option<usize>,
    #[arg(long)]
    legs: Option<usize>,
    /// Evaluate the Hepp bound of this graph instead, e.g. "V=2 E=0:1,0:1 LEGS= SPECIAL=none".
    #[arg(long, conflicts_with_all = ["loops", "legs"])]
    graph: Option<Graph>,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    /// Smallest and largest active coupling λ_k.
    #[arg(long, default_value_t = 3)]
    k_min: usize,
    #[arg(long, default_value_t = 3)]
    k_max: usize,
    #[arg(long, default_value = "3")]
    dim: Dimension,
    #[arg(long)]
    loops: usize,
    /// Legs kept at the top loop order.
    #[arg(long, default_value_t = 2)]
    phi_max: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Tables(a) => tables(a),
        Command::Sample(a) => sample(a),
        Command::EstimatePhi3(a) => {
            let sector = Sector {
                k: 3,
                dim: a.dim.clone(),
                mode: ModeArg::Plain,
                loops: a.loops,
                legs: Some(a.legs),
            };
            let t = sector.tables(a.run.tables.as_deref())?;
            let report = estimate_residual(&t, a.loops, a.legs, a.mass_ratio, &run_spec(&a.run)?)?;
            emit(report, &a.run)
        }
        Command::EstimateBetaPrim(a) => {
            let sector = Sector {
                k: 4,
                dim: Dimension::from_integer(4),
                mode: ModeArg::Positive,
                loops: a.loops,
                legs: Some(4),
            };
            let t = sector.tables(a.run.tables.as_deref())?;
            let report = estimate_beta_prim_with(&t, a.loops, &run_spec(&a.run)?)?;
            emit(report, &a.run)
        }
        Command::Oracle(a) => {
            let d = a.dim.exact();
            let value = match (&a.graph, a.loops) {
                (Some(g), _) => hepp_with_mode(g, d, a.mode.into())?,
                (None, Some(loops)) => {
                    ensemble_sum_oracle(a.k, d, loops, a.legs.unwrap_or(a.k), a.mode.into())?
                }
                (None, None) => bail!("either --loops or --graph is required"),
            };
            println!("{value}");
            Ok(())
        }
        Command::Series(a) => {
            let s = solve_gamma_tr(a.k_min, a.k_max, a.dim.exact(), a.loops, a.phi_max)?;
            let mut out = io::stdout().lock();
            for line in s.to_lines() {
                writeln!(out, "{line}")?;
            }
            Ok(())
        }
    }
}

fn tables(a: TablesArgs) -> Result<()> {
    let s = &a.sector;
    let t = s.tables(None)?;
    let path = a.output.unwrap_or_else(|| {
        PathBuf::from(format!("tables-k{}-d{}-{}-L{}.json", s.k, s.dim.value(), t.mode(), s.loops))
    });
    t.save(&path).with_context(|| format!("writing {}", path.display()))?;
    eprintln!(
        "wrote {} (L ≤ {}, n + 2L ≤ {})",
        path.display(),
        t.l_max(),
        t.n_max()
    );
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    let s = &a.sector;
    let t = s.tables(a.tables.as_deref())?;
    let sampler = Sampler::new(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut out: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for _ in 0..a.samples {
        let mut x = if a.beaded {
            sampler.sample_beaded(s.loops, s.legs(), &mut rng)?
        } else {
            sampler.sample_one_pi(s.loops, s.legs(), &mut rng)?
        };
        if a.projective && !x.coords.is_empty() {
            x = x.to_projective()?;
        }
        writeln!(out, "{}", x.to_line())?;
    }
    out.flush()?;
    Ok(())
}

fn run_spec(a: &RunArgs) -> Result<RunSpec> {
    if a.workers == 0 {
        bail!("--workers must be at least 1");
    }
    Ok(RunSpec::new(a.samples, a.seed, a.workers))
}

fn emit(mut report: EstimateReport, a: &RunArgs) -> Result<()> {
    if a.no_timing {
        report.wall_time_s = 0.0;
    }
    let record = match a.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv_row(),
    };
    match &a.output {
        None => {
            let mut out = io::stdout().lock();
            if matches!(a.format, Format::Csv) {
                writeln!(out, "{}", EstimateReport::csv_header())?;
            }
            writeln!(out, "{record}")?;
        }
        Some(path) => {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .with_context(|| format!("opening {}", path.display()))?;
            if matches!(a.format, Format::Csv) && f.metadata()?.len() == 0 {
                writeln!(f, "{}", EstimateReport::csv_header())?;
            }
            writeln!(f, "{record}")?;
        }
    }
    Ok(())
}
