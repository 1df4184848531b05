use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sofcma::analysis::{hinf_norm, hinf_norm_grid, FrequencyGrid, DEFAULT_HINF_REL_TOL};
use sofcma::io::{format_f64, load_problem, parse_gain_inline, parse_gain_json};
use sofcma::{
    close_loop, solve_with_progress, unflatten_gain, Error, FitnessConfig, ObjectiveKind,
    PenaltyMode, PlantRealization, SolverConfig,
};
use sofcma_cli::{run_campaign, write_campaign, CampaignSpec, Format};

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sofcma",
    version,
    about = "Memetic CMA-ES for static output feedback synthesis"
)]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true, env = "SOFCMA_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver once and print the best gain.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the full run result as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print one line per generation to stderr.
        #[arg(long)]
        progress: bool,
    },
    /// Run a multi-seed campaign and write per-run rows plus summaries.
    Bench {
        /// Problem file; repeat for several problems.
        #[arg(long, required = true)]
        problem: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Base seed; run i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Compare the bisection and dense-grid H-infinity norms of a closed loop.
    Oracle {
        #[arg(long)]
        problem: PathBuf,
        /// Inline gain, rows separated by ';' (e.g. "-1, -2"). Defaults to zero.
        #[arg(long, conflicts_with = "gain_file", allow_hyphen_values = true)]
        gain: Option<String>,
        /// Gain file `{ "rows": .., "cols": .., "data": [..] }`.
        #[arg(long)]
        gain_file: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_HINF_REL_TOL)]
        rel_tol: f64,
    },
    /// Parse and validate a problem file.
    Validate {
        #[arg(long)]
        problem: PathBuf,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Hinf)]
    objective: ObjectiveArg,
    /// Global evaluation budget.
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// Inner iterations of each local refinement.
    #[arg(long, default_value_t = 10)]
    local_iters: usize,
    /// Gain-norm penalty weight.
    #[arg(long, default_value_t = 1e-10)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Guided)]
    penalty_mode: PenaltyArg,
    #[arg(long)]
    no_local_search: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Hinf,
    Sa,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    Strict,
    Guided,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            objective: match self.objective {
                ObjectiveArg::Hinf => ObjectiveKind::HinfNorm,
                ObjectiveArg::Sa => ObjectiveKind::SpectralAbscissa,
            },
            t_max: self.budget,
            t_s: self.local_iters,
            seed,
            local_search_enabled: !self.no_local_search,
            fitness: FitnessConfig {
                beta: self.beta,
                penalty_mode: match self.penalty_mode {
                    PenaltyArg::Strict => PenaltyMode::Strict,
                    PenaltyArg::Guided => PenaltyMode::Guided,
                },
                ..FitnessConfig::default()
            },
            ..SolverConfig::default()
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unstable { .. } => EXIT_UNSTABLE,
            Error::EigenFailure(_)
            | Error::SingularResolvent { .. }
            | Error::BracketFailure { .. } => EXIT_FAILURE,
            _ => EXIT_INPUT,
        };
        Failure::new(code, e.to_string())
    }
}

fn load(path: &Path) -> Result<PlantRealization, Failure> {
    load_problem(path).map_err(|e| match e {
        Error::Io { .. } => Failure::new(EXIT_INPUT, e.to_string()),
        other => Failure::new(EXIT_INPUT, format!("{}: {other}", path.display())),
    })
}

fn print_gain(plant: &PlantRealization, alpha: &[f64]) -> Result<(), Failure> {
    let gain = unflatten_gain(alpha, &plant.dims)?;
    let f = gain.matrix();
    println!("gain ({}x{}):", f.nrows(), f.ncols());
    for r in 0..f.nrows() {
        let row: Vec<String> = (0..f.ncols()).map(|c| format_f64(f[(r, c)])).collect();
        println!("  [{}]", row.join(", "));
    }
    Ok(())
}

fn cmd_solve(
    problem: &Path,
    seed: u64,
    solver: &SolverArgs,
    out: Option<&Path>,
    progress: bool,
) -> Result<(), Failure> {
    let plant = load(problem)?;
    let config = solver.config(seed);
    let mut log = |g: &sofcma::GenerationRecord| {
        if progress {
            eprintln!(
                "gen {:>5}  evals {:>7}  best {}  sigma {:.3e}  feasible {:.2}{}",
                g.generation,
                g.evaluations,
                format_f64(g.best_fitness),
                g.sigma,
                g.feasible_fraction,
                if g.reset { "  reset" } else { "" }
            );
        }
    };
    let result = solve_with_progress(&plant, &config, &mut log)?;
    let label = match config.objective {
        ObjectiveKind::HinfNorm => "hinf_norm",
        ObjectiveKind::SpectralAbscissa => "spectral_abscissa",
    };
    println!("problem: {}", plant.name);
    println!("feasible: {}", result.feasible);
    println!("{label}: {}", format_f64(result.best_objective));
    println!("fitness: {}", format_f64(result.best_fitness));
    println!(
        "evaluations: {} global, {} local",
        result.global_evals, result.local_evals
    );
    print_gain(&plant, &result.best_alpha)?;
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&result)
            .map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| {
            Failure::new(
                EXIT_FAILURE,
                format!("cannot write {}: {e}", path.display()),
            )
        })?;
    }
    Ok(())
}

fn cmd_bench(
    problems: &[PathBuf],
    runs: usize,
    seed: u64,
    solver: &SolverArgs,
    out: &Path,
    format: FormatArg,
) -> Result<(), Failure> {
    if runs == 0 {
        return Err(Failure::new(EXIT_INPUT, "--runs must be at least 1"));
    }
    let spec = CampaignSpec {
        problems: problems.to_vec(),
        runs,
        base_seed: seed,
        config: solver.config(seed),
    };
    let campaign = run_campaign(&spec);
    for e in &campaign.errors {
        eprintln!("warning: {e}");
    }
    let format = match format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let written = write_campaign(&campaign, out, format)
        .map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    for s in &campaign.summaries {
        println!(
            "{}: {}/{} feasible, best {}, median {}, worst {}",
            s.problem,
            s.successes,
            s.runs,
            format_f64(s.best),
            format_f64(s.median),
            format_f64(s.worst)
        );
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_oracle(
    problem: &Path,
    gain: Option<&str>,
    gain_file: Option<&Path>,
    rel_tol: f64,
) -> Result<(), Failure> {
    let plant = load(problem)?;
    let gain = match (gain, gain_file) {
        (Some(text), _) => parse_gain_inline(text)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
            parse_gain_json(&text)
                .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?
        }
        (None, None) => sofcma::GainMatrix::zeros(&plant.dims),
    };
    let cl = close_loop(&plant, &gain)?;
    let h = hinf_norm(&cl, rel_tol)?;
    let g = hinf_norm_grid(&cl, &FrequencyGrid::default())?;
    println!("hinf_norm: {}", format_f64(h.value));
    println!("peak_frequency: {}", format_f64(h.peak_frequency));
    println!("hinf_norm_grid: {}", format_f64(g));
    println!("difference: {}", format_f64(h.value - g));
    Ok(())
}

fn cmd_validate(problem: &Path) -> Result<(), Failure> {
    let plant = load(problem)?;
    let d = plant.dims;
    println!("n_x={} n_u={} n_y={}", d.n_x, d.n_u, d.n_y);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let result = match &cli.command {
        Command::Solve {
            problem,
            seed,
            solver,
            out,
            progress,
        } => cmd_solve(problem, *seed, solver, out.as_deref(), *progress),
        Command::Bench {
            problem,
            runs,
            seed,
            solver,
            out,
            format,
        } => cmd_bench(problem, *runs, *seed, solver, out, *format),
        Command::Oracle {
            problem,
            gain,
            gain_file,
            rel_tol,
        } => cmd_oracle(problem, gain.as_deref(), gain_file.as_deref(), *rel_tol),
        Command::Validate { problem } => cmd_validate(problem),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
