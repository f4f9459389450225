use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use redblue::sampling::{exhaustive_traces, sample_traces, SamplingConfig};
use redblue::scoring::{HoeffdingParams, NoisyParams};
use redblue::{
    parse_traces, to_dot, Algorithm, EventLog, Flags, Instrumentation, LearnedModel, Learner, OutputBehavior,
    Parameters, StyleOptions, Symbol, TraceKind, TransitionBehavior,
};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<redblue::Error> for CliError {
    fn from(e: redblue::Error) -> Self {
        match e {
            redblue::Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "redblue", version, about = "Passive automata learning by red-blue state merging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn an automaton from a trace file.
    Learn(LearnArgs),
    /// Sample traces from a reference model.
    Generate(GenerateArgs),
    /// Render a model as Graphviz DOT.
    Visualize(VisualizeArgs),
}

#[derive(Args)]
struct Shared {
    /// Input file.
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write a DOT rendering of the result.
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the instrumentation event log as JSON lines.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Auto,
    IoTraces,
    Abbadingo,
    Observations,
}

impl Format {
    fn kind(self) -> Option<TraceKind> {
        match self {
            Format::Auto => None,
            Format::IoTraces => Some(TraceKind::IoTraces),
            Format::Abbadingo => Some(TraceKind::LabeledWords),
            Format::Observations => Some(TraceKind::Observations),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Moore,
    Mealy,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransitionArg {
    Deterministic,
    Nondeterministic,
    Stochastic,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    shared: Shared,
    /// rpni, edsm, alergia, ioalergia, ioalergia-partition, ioalergia-edsm or noisy.
    #[arg(long, default_value = "rpni")]
    algorithm: String,
    #[arg(long, value_enum)]
    output_behavior: Option<OutputArg>,
    #[arg(long, value_enum)]
    transition_behavior: Option<TransitionArg>,
    /// Hoeffding bound parameter.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Estimated per-step mislabelling rate.
    #[arg(long, default_value_t = 0.01)]
    error_rate: f64,
    /// Significance threshold of the noise test.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Inputs whose occurrence parity must agree between merged states.
    #[arg(long, value_delimiter = ',')]
    parity_inputs: Vec<String>,
    #[arg(long)]
    min_blue: bool,
    #[arg(long)]
    depth_first: bool,
    #[arg(long)]
    compat_on_pta: Option<bool>,
    #[arg(long)]
    compat_on_futures: Option<bool>,
    /// Emit the internal frequency automaton instead of a converted model.
    #[arg(long)]
    no_convert: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 10)]
    min_len: usize,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    /// Probability of replacing an output by a different one.
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    /// Emit every trace up to this length instead of sampling.
    #[arg(long)]
    exhaustive: Option<usize>,
}

#[derive(Args)]
struct VisualizeArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    show_counts: bool,
    #[arg(long)]
    hide_probabilities: bool,
    /// States filled red.
    #[arg(long, value_delimiter = ',')]
    red: Vec<u32>,
    /// States filled light blue.
    #[arg(long, value_delimiter = ',')]
    blue: Vec<u32>,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(e.to_string())),
    }
}

fn read_model(path: &Path) -> CliResult<LearnedModel> {
    Ok(LearnedModel::from_json(&read(path)?)?)
}

fn with_newline(mut text: String) -> String {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    text
}

fn learn(args: LearnArgs) -> CliResult<()> {
    let algorithm: Algorithm = args.algorithm.parse()?;
    let data = parse_traces(&read(&args.shared.input)?, args.shared.format.kind())?;
    let params = Parameters {
        hoeffding: HoeffdingParams::new(args.epsilon)?,
        noisy: NoisyParams::new(args.error_rate, args.threshold)?,
        parity_inputs: args.parity_inputs.iter().map(|s| Symbol::new(s)).collect(),
    };
    let flags = Flags {
        min_blue: args.min_blue,
        depth_first: args.depth_first,
        compat_on_pta: args.compat_on_pta,
        compat_on_futures: args.compat_on_futures,
    };
    let output = args.output_behavior.map(|o| match o {
        OutputArg::Moore => OutputBehavior::Moore,
        OutputArg::Mealy => OutputBehavior::Mealy,
    });
    let transition = args.transition_behavior.map(|t| match t {
        TransitionArg::Deterministic => TransitionBehavior::Deterministic,
        TransitionArg::Nondeterministic => TransitionBehavior::Nondeterministic,
        TransitionArg::Stochastic => TransitionBehavior::Stochastic,
    });
    let mut learner = Learner::new(algorithm, &data, output, transition, params, flags)?;

    let started = Instant::now();
    let mut log = EventLog::new();
    let instrumentation = args.shared.events.as_ref().map(|_| &mut log as &mut dyn Instrumentation);
    let outcome = learner.run(&data, instrumentation)?;
    let wall = started.elapsed();

    let model = if args.no_convert {
        Learner::unconverted(&outcome)
    } else {
        outcome.model.clone()
    };
    write(args.shared.output.as_deref(), &with_newline(model.to_json()))?;
    if let Some(dot) = &args.shared.dot {
        write(Some(dot), &to_dot(&model, &StyleOptions::default()))?;
    }
    if let Some(events) = &args.shared.events {
        write(Some(events), &log.to_json_lines())?;
    }

    let stats = &outcome.stats;
    eprintln!("algorithm: {algorithm}");
    eprintln!("behavior: {}", learner.behavior());
    eprintln!("traces: {}", data.len());
    eprintln!("symbols: {}", data.symbol_count());
    eprintln!("pta states: {}", stats.pta_size);
    eprintln!("final states: {}", model.size());
    eprintln!("merges: {}", stats.merges);
    eprintln!("promotions: {}", stats.promotions);
    eprintln!("iterations: {}", stats.iterations);
    eprintln!("wall time: {:.3}s", wall.as_secs_f64());
    Ok(())
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let model = read_model(&args.shared.input)?;
    let traces = match args.exhaustive {
        Some(len) => exhaustive_traces(&model, len),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.shared.seed);
            let config = SamplingConfig::new(args.count, args.min_len, args.max_len).with_noise(args.noise_rate);
            sample_traces(&model, config, &mut rng)?
        }
    };
    write(args.shared.output.as_deref(), &traces.to_text())
}

fn visualize(args: VisualizeArgs) -> CliResult<()> {
    let model = read_model(&args.shared.input)?;
    let style = StyleOptions {
        show_counts: args.show_counts,
        hide_probabilities: args.hide_probabilities,
        ..StyleOptions::red_blue(args.red, args.blue)
    };
    let dot = to_dot(&model, &style);
    let target = args.shared.dot.as_deref().or(args.shared.output.as_deref());
    write(target, &dot)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Learn(a) => learn(a),
        Command::Generate(a) => generate(a),
        Command::Visualize(a) => visualize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
