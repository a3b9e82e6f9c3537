use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use combctl::config::{ExperimentConfig, ExperimentKind, ModeChoice, SetChoice};
use combctl::experiments;
use combctl::fixtures::{self, FixtureKind, FixtureParams};
use combctl::validate::validate_text;
use combcore::error::Error;

/// Experiment runner for controlled quantum operations, combs and
/// controllization.
#[derive(Parser)]
#[command(name = "combctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write a machine-readable report.
    Run(RunArgs),
    /// Validate a channel or comb file and print the residual chain.
    Validate { path: PathBuf },
    /// Emit a seeded fixture object.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct RunArgs {
    /// exact-controllization | scaling | coefficients | switch-compare | comb-audit
    #[arg(long)]
    experiment: Option<String>,
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report output path (stdout when omitted). Scaling/coefficients also
    /// write `<out>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// pauli | clifford
    #[arg(long)]
    set: Option<String>,
    /// average | sampled
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Pauli-mixture weights for switch-compare.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    cases: Option<usize>,
}

#[derive(Args)]
struct FixtureArgs {
    /// haar-unitary | random-cptp | antisym-state | pauli-set |
    /// clifford-set | identity-comb | neutralization-comb
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    d_out: usize,
    #[arg(long, default_value_t = 4)]
    kraus: usize,
    #[arg(long, default_value_t = 1)]
    slots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prepare a seeded pure state instead of the maximally mixed one.
    #[arg(long, default_value_t = false)]
    pure_state: bool,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Format(_) | Error::Json(_) | Error::Io(_) | Error::Parameter(_) => 2,
        _ => 1,
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("COMBCTL_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Validate { path } => validate_command(&path),
        Command::Fixture(args) => fixture_command(args),
    }
}

fn run_command(args: RunArgs) -> ExitCode {
    let mut cfg = match &args.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Err(e) = apply_overrides(&mut cfg, &args) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }

    let started = Instant::now();
    let output = match experiments::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    eprintln!("completed in {} ms", started.elapsed().as_millis());

    let json = output.report.to_json();
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if let Some((_, csv)) = &output.csv {
                let mut csv_path = path.clone();
                csv_path.set_extension("csv");
                if let Err(e) = std::fs::write(&csv_path, csv) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            print!("{}", output.report.summary());
        }
        None => {
            print!("{json}");
            eprint!("{}", output.report.summary());
        }
    }

    if output.report.all_pass {
        ExitCode::SUCCESS
    } else {
        if let Some(row) = output.report.first_failure() {
            eprintln!("failing case: {} {}", row.key, row.detail);
        }
        ExitCode::from(1)
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<(), Error> {
    if let Some(e) = &args.experiment {
        cfg.experiment = Some(ExperimentKind::parse(e)?);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(set) = &args.set {
        cfg.set = match set.as_str() {
            "pauli" => SetChoice::Pauli,
            "clifford" => SetChoice::Clifford,
            other => return Err(Error::Parameter(format!("unknown set '{other}'"))),
        };
    }
    if let Some(mode) = &args.mode {
        cfg.mode = match mode.as_str() {
            "average" => ModeChoice::Average,
            "sampled" => ModeChoice::Sampled,
            other => return Err(Error::Parameter(format!("unknown mode '{other}'"))),
        };
    }
    if let Some(t) = args.t {
        cfg.t = t;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(n_list) = &args.n_list {
        cfg.n_list = n_list.clone();
    }
    if let Some(dims) = &args.dims {
        cfg.dims = dims.clone();
    }
    if let Some(alpha) = &args.alpha {
        if alpha.len() != 4 {
            return Err(Error::Parameter("alpha needs exactly 4 components".into()));
        }
        cfg.alpha = Some([alpha[0], alpha[1], alpha[2], alpha[3]]);
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(cases) = args.cases {
        cfg.cases = cases;
    }
    Ok(())
}

fn validate_command(path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match validate_text(&text) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.pass {
                println!("verdict: PASS");
                ExitCode::SUCCESS
            } else {
                println!("verdict: FAIL");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn fixture_command(args: FixtureArgs) -> ExitCode {
    let kind = match FixtureKind::parse(&args.kind) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let params = FixtureParams {
        d: args.d,
        d_out: args.d_out,
        kraus: args.kraus,
        slots: args.slots,
        seed: args.seed,
        pure_state: args.pure_state,
    };
    match fixtures::emit(kind, &params) {
        Ok(text) => {
            if let Err(e) = std::fs::write(&args.out, text) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            println!("wrote {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
