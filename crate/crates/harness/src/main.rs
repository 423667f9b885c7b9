use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use synmark::dataset::{dataset_stats, load_dataset, TaskRecord};
use synmark::env::Environment;
use synmark::pipeline::{run_pipeline, PipelineConfig};
use synmark::report::{fresh_run_dir, summary_rows, write_run};
use synmark::settings::Settings;
use synmark::sweep::{sweep, write_composites_csv, write_sweep_csv, SweepSpec};
use synmark::HarnessError;
use synmark_core::detect::{detect_entropy_gated, DetectConfig, Detector};
use synmark_core::engine::{generate, SWEET_THRESHOLDS};
use synmark_core::metrics::{category_entropy_means, sweet_selection_table, ScoredSample};
use synmark_core::partition::{seed_from_token, SeedKey};
use synmark_core::rng::SplitMix64;
use synmark_core::syntax::{category_histogram, classify_lexeme};
use synmark_core::token::{TokenId, TokenSequence};
use synmark_core::tokenizer::Tokenizer;

#[derive(Parser)]
#[command(name = "synmark", version, about = "Syntax-aware watermarking for generated code")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct GlobalArgs {
    /// TOML file with default values for any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// `toy` or `remote:<url>`
    #[arg(long, global = true)]
    provider: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// non-syntax, always or entropy
    #[arg(long, global = true)]
    gate: Option<String>,
    #[arg(long, global = true)]
    entropy_threshold: Option<f64>,
    /// 0 disables top-k
    #[arg(long, global = true)]
    top_k: Option<usize>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    seed_key: Option<u64>,
    #[arg(long, global = true)]
    max_tokens: Option<usize>,
    #[arg(long, global = true)]
    z_threshold: Option<f64>,
    /// Profile name (python, cpp, java) or path to a profile JSON
    #[arg(long, global = true)]
    language: Option<String>,
    /// Decode table (JSON) for the vocabulary
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    /// Generations per task
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// pass@k values, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Test execution timeout in seconds
    #[arg(long, global = true)]
    timeout: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify lexemes, or summarize the vocabulary when none are given
    Classify { lexemes: Vec<String> },
    /// Show the green list after a previous token
    PartitionDemo {
        #[arg(long, default_value_t = 0)]
        prev: u32,
        /// Number of green ids to print
        #[arg(long, default_value_t = 20)]
        show: usize,
    },
    /// Generate a completion for a prompt
    Generate {
        #[arg(long)]
        prompt: String,
    },
    /// Detect a watermark in code or token ids
    Detect {
        #[arg(long, conflicts_with_all = ["file", "ids"])]
        text: Option<String>,
        #[arg(long, conflicts_with = "ids")]
        file: Option<PathBuf>,
        /// Comma-separated token ids
        #[arg(long, value_delimiter = ',')]
        ids: Option<Vec<u32>>,
        #[arg(long, value_enum, default_value_t = Method::Stone)]
        method: Method,
        /// Prompt the code continues (entropy method only)
        #[arg(long, default_value = "")]
        prompt: String,
        #[arg(long)]
        trace: bool,
    },
    /// Entropy per token category and entropy-threshold selection statistics
    Entropy,
    /// Run the full pipeline on a dataset
    Evaluate,
    /// Run the pipeline over a gamma x delta grid
    Sweep {
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        /// Weight grid spacing; 0 disables the grid
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Token-length statistics of the reference solutions
    Stats,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Stone,
    Full,
    Entropy,
}

fn settings(global: &GlobalArgs) -> Result<Settings, HarnessError> {
    let mut s = match &global.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = global.$field.clone() { s.$field = v; })*
        };
    }
    set!(provider, seed, workers, out_dir, gamma, delta, gate, entropy_threshold, top_k,
         temperature, seed_key, max_tokens, z_threshold, samples, k);
    if global.dataset.is_some() {
        s.dataset = global.dataset.clone();
    }
    if global.language.is_some() {
        s.language = global.language.clone();
    }
    if global.vocab.is_some() {
        s.vocab = global.vocab.clone();
    }
    if let Some(t) = global.timeout {
        s.timeout_secs = t;
    }
    s.validate()?;
    Ok(s)
}

fn dataset(s: &Settings) -> Result<Vec<TaskRecord>, HarnessError> {
    let path = s
        .dataset
        .as_ref()
        .ok_or_else(|| HarnessError::Validation("--dataset is required".into()))?;
    Ok(load_dataset(path)?)
}

fn language(s: &Settings, tasks: Option<&[TaskRecord]>) -> Result<String, HarnessError> {
    if let Some(l) = &s.language {
        return Ok(l.clone());
    }
    let Some(tasks) = tasks else {
        return Ok("python".into());
    };
    let first = &tasks[0].language;
    if let Some(t) = tasks.iter().find(|t| &t.language != first) {
        return Err(HarnessError::Validation(format!(
            "dataset mixes languages ({first} and {}); pass --language",
            t.language
        )));
    }
    Ok(first.clone())
}

fn pipeline_config(s: &Settings) -> Result<PipelineConfig, HarnessError> {
    Ok(PipelineConfig {
        params: s.params()?,
        samples: s.samples,
        ks: s.k.clone(),
        timeout_secs: s.timeout_secs,
        workers: s.workers,
        seed: s.seed,
        z_threshold: s.z_threshold,
    })
}

fn print_json(value: &impl serde::Serialize) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn encode(env: &Environment, text: &str) -> Result<Vec<TokenId>, HarnessError> {
    env.tokenizer
        .encode(text)
        .map_err(|e| HarnessError::Validation(e.to_string()))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let s = settings(&cli.global)?;
    let runtime = |e: &dyn std::fmt::Display| HarnessError::Runtime(e.to_string());
    let validation = |e: &dyn std::fmt::Display| HarnessError::Validation(e.to_string());
    match cli.command {
        Command::Classify { lexemes } => {
            let env = Environment::build(&s, &language(&s, None)?)?;
            if lexemes.is_empty() {
                let all = TokenSequence::new(
                    (0..env.profile.vocab_size() as u32).map(TokenId).collect(),
                );
                let hist = category_histogram(&env.profile, &all);
                print_json(&json!({
                    "language": env.profile.language(),
                    "vocab_size": env.profile.vocab_size(),
                    "categories": hist,
                }))?;
            } else {
                for l in lexemes {
                    println!("{l:?}\t{}", classify_lexeme(&env.language, &l).name());
                }
            }
        }
        Command::PartitionDemo { prev, show } => {
            let env = Environment::build(&s, &language(&s, None)?)?;
            let config = DetectConfig::new(s.gamma, SeedKey(s.seed_key));
            let mut detector = Detector::new(env.profile.vocab_size(), config).map_err(|e| validation(&e))?;
            let prev = TokenId(prev);
            if prev.index() >= env.profile.vocab_size() {
                return Err(HarnessError::Validation(format!(
                    "token {prev} is outside a vocabulary of size {}",
                    env.profile.vocab_size()
                )));
            }
            let green = detector.green_list_after(prev);
            print_json(&json!({
                "prev": prev,
                "seed": seed_from_token(prev, SeedKey(s.seed_key)),
                "vocab_size": env.profile.vocab_size(),
                "green_count": green.len(),
                "green": green.iter().take(show).map(|t| json!({
                    "id": t,
                    "text": env.profile.decode_token(*t),
                })).collect::<Vec<_>>(),
            }))?;
        }
        Command::Generate { prompt } => {
            let env = Environment::build(&s, &language(&s, None)?)?;
            let prompt = TokenSequence::new(encode(&env, &prompt)?);
            let mut rng = SplitMix64::new(s.seed);
            let record = generate(env.provider.as_ref(), &prompt, &s.params()?, &env.profile, &mut rng)
                .map_err(|e| runtime(&e))?;
            print_json(&json!({
                "text": record.output.source_text,
                "tokens": record.output.tokens,
                "gated_steps": record.gated_steps(),
                "steps": record.steps.len(),
                "status": record.status,
            }))?;
            if !record.is_complete() {
                return Err(HarnessError::Runtime("generation ended early".into()));
            }
        }
        Command::Detect { text, file, ids, method, prompt, trace } => {
            let env = Environment::build(&s, &language(&s, None)?)?;
            let tokens = match (text, file, ids) {
                (Some(t), _, _) => encode(&env, &t)?,
                (_, Some(f), _) => {
                    let code = std::fs::read_to_string(&f).map_err(|e| validation(&format!("{}: {e}", f.display())))?;
                    encode(&env, &code)?
                }
                (_, _, Some(ids)) => ids.into_iter().map(TokenId).collect(),
                _ => return Err(HarnessError::Validation("give --text, --file or --ids".into())),
            };
            let seq = TokenSequence::new(tokens);
            let config = DetectConfig {
                z_threshold: s.z_threshold,
                ..DetectConfig::new(s.gamma, SeedKey(s.seed_key))
            };
            let mut detector = Detector::new(env.profile.vocab_size(), config).map_err(|e| validation(&e))?;
            let mut report = match method {
                Method::Stone => detector.stone(&seq, &env.profile),
                Method::Full => detector.full(&seq),
                Method::Entropy => detect_entropy_gated(
                    &encode(&env, &prompt)?,
                    &seq,
                    env.provider.as_ref(),
                    &s.sampling(),
                    s.entropy_threshold,
                    &config,
                ),
            }
            .map_err(|e| validation(&e))?;
            if !trace {
                report.trace.clear();
            }
            print_json(&report)?;
        }
        Command::Entropy => {
            let tasks = dataset(&s)?;
            let env = Environment::build(&s, &language(&s, Some(&tasks))?)?;
            let samples = tasks
                .iter()
                .map(|t| Ok(ScoredSample::new(encode(&env, &t.prompt)?, encode(&env, &t.reference_solution)?)))
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let sampling = s.sampling();
            let means = category_entropy_means(env.provider.as_ref(), &env.profile, &sampling, &samples)
                .map_err(|e| runtime(&e))?;
            let selection = sweet_selection_table(
                env.provider.as_ref(),
                &env.profile,
                &sampling,
                &samples,
                &SWEET_THRESHOLDS,
            )
            .map_err(|e| runtime(&e))?;
            print_json(&json!({ "entropy_means": means, "selection": selection }))?;
        }
        Command::Evaluate => {
            let tasks = dataset(&s)?;
            let env = Environment::build(&s, &language(&s, Some(&tasks))?)?;
            let output = run_pipeline(&tasks, &env, &pipeline_config(&s)?)?;
            let dir = write_run(&s.out_dir, &output)?;
            for (k, v) in summary_rows(&output.summary) {
                println!("{k:<28}{v}");
            }
            for f in &output.failures {
                eprintln!("task {} failed during {}: {}", f.task_id, f.phase, f.error);
            }
            println!("report written to {}", dir.display());
            if output.results.is_empty() {
                return Err(HarnessError::Runtime("every task failed".into()));
            }
        }
        Command::Sweep { gammas, deltas, grid_step } => {
            let tasks = dataset(&s)?;
            let env = Environment::build(&s, &language(&s, Some(&tasks))?)?;
            let step = grid_step.unwrap_or(s.grid_step);
            let spec = SweepSpec {
                gammas: gammas.unwrap_or_else(|| s.sweep_gammas.clone()),
                deltas: deltas.unwrap_or_else(|| s.sweep_deltas.clone()),
                gate: s.gate()?,
                grid_step: (step > 0.0).then_some(step),
                base: pipeline_config(&s)?,
            };
            let (rows, composites) = sweep(&tasks, &env, &spec)?;
            let dir = fresh_run_dir(&s.out_dir, "sweep")?;
            write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
            write_composites_csv(&dir.join("composites.csv"), &composites)?;
            for r in &rows {
                println!(
                    "gamma={} delta={} pass@1={:?} auroc={:?}",
                    r.gamma, r.delta, r.pass_at_1, r.auroc
                );
            }
            println!("sweep written to {}", dir.display());
        }
        Command::Stats => {
            let tasks = dataset(&s)?;
            let env = Environment::build(&s, &language(&s, Some(&tasks))?)?;
            let stats = dataset_stats(&tasks, &env.tokenizer).map_err(|e| validation(&e))?;
            print_json(&stats)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // SAFETY: restores the default disposition before any output, so a
    // closed pipe ends the process quietly instead of panicking in print.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
