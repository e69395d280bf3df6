//! Command-line surface of the `timetom` binary.

use std::io::{Read, Write};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use timetom_core::event::{annotate_timeline, RawStory, ScenarioKind, TemporalStory};
use timetom_core::generator::{generate, generate_corpus, GenParams, LabeledInstance};
use timetom_core::parser::{parse_any, QuestionParser};
use timetom_core::perception::{build_tbsc, compress_self_world};
use timetom_core::solver::BeliefSolver;
use timetom_pipeline::{
    run_pipeline, ModelBackend, PipelineMode, PipelinePolicy, RemoteBackend, RemoteConfig, StubBackend,
};

use crate::dataset::{load_dataset, records_from_instance, DatasetFormat};
use crate::eval::{aggregate_scores, run_records, Method};
use crate::report::{emit_report, ReportFormat};

#[derive(Debug, Parser)]
#[command(name = "timetom", version, about = "Temporal belief tracking and theory-of-mind evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Stub)]
    pub backend: BackendKind,
    /// Pipeline mode: zero_shot, zero_shot_timeline, timetom_full,
    /// solver_as_prompt, solver_as_feedback or symbolic_only.
    #[arg(long, global = true, default_value = "timetom_full")]
    pub policy: String,
    /// Report format: json, csv or markdown.
    #[arg(long, global = true, default_value = "markdown")]
    pub format: String,
    #[arg(long, global = true, default_value_t = 4)]
    pub parallelism: usize,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Args)]
pub struct StoryInput {
    /// Story file, one sentence or utterance per line, with or without
    /// `tN:` prefixes. `-` reads standard input.
    pub file: PathBuf,
    /// Treat the input as a dialogue.
    #[arg(long)]
    pub dialogue: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prefix each line with its time point.
    Annotate(StoryInput),
    /// Print the event log as JSON lines.
    Parse(StoryInput),
    /// Print the events a character perceives.
    Tbsc {
        #[command(flatten)]
        input: StoryInput,
        #[arg(long)]
        character: String,
        /// Print only the thing-state events.
        #[arg(long)]
        compress: bool,
    },
    /// Answer a question with the symbolic solver.
    Solve {
        #[command(flatten)]
        input: StoryInput,
        #[arg(long)]
        question: String,
    },
    /// Generate a labelled corpus as JSON lines.
    Gen(GenArgs),
    /// Evaluate a method on a dataset or on a generated corpus.
    Eval(EvalArgs),
    /// Run the prompt pipeline on one question and print the trace.
    Pipeline {
        #[command(flatten)]
        input: StoryInput,
        #[arg(long)]
        question: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, short, default_value_t = 10)]
    pub n: usize,
    #[arg(long)]
    pub dialogue: bool,
    /// With none of the size flags, each instance draws its own sizes.
    #[arg(long)]
    pub characters: Option<usize>,
    #[arg(long)]
    pub locations: Option<usize>,
    #[arg(long)]
    pub containers: Option<usize>,
    #[arg(long)]
    pub moves: Option<usize>,
    #[arg(long)]
    pub exit_reenter: Option<usize>,
    #[arg(long)]
    pub tells: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Dataset file; without one a corpus is generated from `--seed`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// generated, tomi_jsonl or fantom_jsonl.
    #[arg(long, default_value = "generated")]
    pub data_format: String,
    /// Size of the generated corpus.
    #[arg(long, short, default_value_t = 50)]
    pub n: usize,
    #[arg(long)]
    pub dialogue: bool,
    /// Score the reality-answering baseline instead of the pipeline.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub no_compression: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Per-record results as JSON lines.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

fn read_input(path: &PathBuf) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
    }
}

fn kind(input: &StoryInput) -> ScenarioKind {
    if input.dialogue {
        ScenarioKind::Dialogue
    } else {
        ScenarioKind::Reading
    }
}

/// Timed story from a file that may or may not already carry `tN:` prefixes.
fn timeline(input: &StoryInput) -> Result<TemporalStory> {
    let text = read_input(&input.file)?;
    if let Ok(ts) = TemporalStory::parse_text(&text, kind(input)) {
        return Ok(ts);
    }
    Ok(annotate_timeline(&RawStory::from_text(&text, kind(input)))?)
}

fn policy(global: &GlobalArgs) -> Result<PipelinePolicy> {
    let mode = PipelineMode::from_name(&global.policy).ok_or_else(|| anyhow!("unknown policy {}", global.policy))?;
    Ok(PipelinePolicy::new(mode))
}

fn backend(global: &GlobalArgs) -> Result<Box<dyn ModelBackend>> {
    Ok(match global.backend {
        BackendKind::Stub => Box::new(StubBackend::new()),
        BackendKind::Remote => {
            let mut config = RemoteConfig::from_env()?;
            config.verbose = global.verbose;
            Box::new(RemoteBackend::new(config))
        }
    })
}

fn gen_params(args: &GenArgs) -> Option<GenParams> {
    let any = [args.characters, args.locations, args.containers, args.moves, args.exit_reenter, args.tells]
        .iter()
        .any(Option::is_some);
    any.then(|| {
        let d = GenParams::default();
        GenParams {
            n_characters: args.characters.unwrap_or(d.n_characters),
            n_locations: args.locations.unwrap_or(d.n_locations),
            n_containers: args.containers.unwrap_or(d.n_containers),
            n_moves: args.moves.unwrap_or(d.n_moves),
            n_exit_reenter: args.exit_reenter.unwrap_or(d.n_exit_reenter),
            n_tells: args.tells.unwrap_or(d.n_tells),
            dialogue_mode: args.dialogue,
            seed: 0,
        }
    })
}

fn corpus(seed: u64, args: &GenArgs) -> Result<Vec<LabeledInstance>> {
    match gen_params(args) {
        Some(p) => {
            p.validate()?;
            (0..args.n as u64).map(|i| Ok(generate(&GenParams { seed: seed.wrapping_add(i), ..p })?)).collect()
        }
        None => Ok(generate_corpus(seed, args.n, args.dialogue)?),
    }
}

fn write_out(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

/// Runs one parsed command line, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let global = &cli.global;
    match &cli.command {
        Command::Annotate(input) => {
            let raw = RawStory::from_text(&read_input(&input.file)?, kind(input));
            writeln!(out, "{}", annotate_timeline(&raw)?.to_text())?;
        }
        Command::Parse(input) => {
            out.write_all(parse_any(&timeline(input)?)?.to_jsonl().as_bytes())?;
        }
        Command::Tbsc { input, character, compress } => {
            let ts = timeline(input)?;
            let chain = build_tbsc(&parse_any(&ts)?, character)?;
            let text = if *compress { compress_self_world(&chain).0.dump(Some(&ts)) } else { chain.dump(Some(&ts)) };
            writeln!(out, "{text}")?;
        }
        Command::Solve { input, question } => {
            let ts = timeline(input)?;
            let log = parse_any(&ts)?;
            let q = QuestionParser::new(&log).with_transcript(&ts).parse(question)?;
            let answer = BeliefSolver::new(&log).solve(&q)?;
            writeln!(out, "{}", answer.value)?;
            for line in &answer.trace {
                writeln!(out, "  {line}")?;
            }
        }
        Command::Gen(args) => {
            let text: String = corpus(global.seed, args)?.iter().map(|i| i.to_json_line() + "\n").collect();
            write_out(out, args.out.as_ref(), &text)?;
        }
        Command::Eval(args) => {
            let records = match &args.data {
                Some(path) => {
                    let format = DatasetFormat::from_name(&args.data_format)
                        .ok_or_else(|| anyhow!("unknown dataset format {}", args.data_format))?;
                    load_dataset(path, format)?
                }
                None => generate_corpus(global.seed, args.n, args.dialogue)?
                    .iter()
                    .flat_map(records_from_instance)
                    .collect(),
            };
            let method = if args.baseline {
                Method::RealityBaseline
            } else {
                let mut p = policy(global)?;
                p.compression_for_first_order = !args.no_compression;
                Method::Pipeline(p)
            };
            let backend = backend(global)?;
            let results = run_records(&records, &method, backend.as_ref(), global.parallelism);
            if let Some(path) = &args.results {
                let lines: String =
                    results.iter().map(|r| serde_json::to_string(r).expect("result serializes") + "\n").collect();
                std::fs::write(path, lines).with_context(|| format!("cannot write {}", path.display()))?;
            }
            let report = aggregate_scores(method.name(), &results)?;
            let format =
                ReportFormat::from_name(&global.format).ok_or_else(|| anyhow!("unknown format {}", global.format))?;
            write_out(out, args.out.as_ref(), &emit_report(&report, format))?;
        }
        Command::Pipeline { input, question } => {
            let ts = timeline(input)?;
            let log = parse_any(&ts)?;
            let q = QuestionParser::new(&log).with_transcript(&ts).parse(question)?;
            let raw = timetom_core::event::strip_timeline(&ts);
            let backend = backend(global)?;
            let answer = run_pipeline(backend.as_ref(), &raw, &q, &policy(global)?)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&answer)?)?;
        }
    }
    Ok(())
}

/// Parses `args` (without the program name) and runs the command.
pub fn run_args<I, S>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("timetom")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv)?;
    if cli.global.parallelism == 0 {
        bail!("--parallelism must be at least 1");
    }
    run(&cli, out)
}
