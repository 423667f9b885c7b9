//! Generate, execute, detect and score a dataset.
//!
//! The run has three phases so their costs stay separable: insertion
//! (generation plus test execution), detection, and perplexity scoring.
//! Each phase runs tasks on a bounded worker pool and collects results in
//! dataset order, so the report does not depend on scheduling.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use synmark_core::detect::{detect_entropy_gated, DetectConfig, DetectionReport, Detector};
use synmark_core::engine::{generate, Gate, GenerationStatus, WatermarkParams};
use synmark_core::metrics::{
    auroc, completion_log_probs, imperceptibility, mean_pass_at_k, perplexity_from_log_probs,
    stem, ScorePools, ScoredSample, StemComponents, StemScore, StemWeights,
};
use synmark_core::rng::SplitMix64;
use synmark_core::token::{TokenId, TokenSequence};
use synmark_core::tokenizer::Tokenizer;

use crate::dataset::TaskRecord;
use crate::env::Environment;
use crate::exec::{run_tests, Outcome};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub params: WatermarkParams,
    pub samples: usize,
    pub ks: Vec<usize>,
    pub timeout_secs: f64,
    pub workers: usize,
    pub seed: u64,
    pub z_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub index: usize,
    pub completion: Vec<TokenId>,
    pub text: String,
    pub gated_steps: usize,
    pub outcome: Outcome,
    pub exit_code: Option<i32>,
    pub counted: usize,
    pub green: usize,
    pub z: Option<f64>,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task_id: String,
    pub samples: Vec<SampleResult>,
    pub correct: usize,
    pub human_counted: usize,
    pub human_z: Option<f64>,
    pub ppl_watermarked: Vec<f64>,
    pub ppl_plain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub phase: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTimings {
    pub task_id: String,
    pub insertion_secs: f64,
    pub detection_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtK {
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tasks: usize,
    pub failed_tasks: usize,
    pub samples_per_task: usize,
    pub gate: Gate,
    pub gamma: f64,
    pub delta: f64,
    pub pass_at_k: Vec<PassAtK>,
    pub auroc: Option<f64>,
    pub wm_pool: usize,
    pub human_pool: usize,
    pub wm_excluded: usize,
    pub human_excluded: usize,
    pub mean_wm_z: Option<f64>,
    pub ppl_watermarked: Option<f64>,
    pub ppl_plain: Option<f64>,
    pub empty_completions: usize,
    pub imperceptibility: Option<f64>,
    /// Provider requests made while detecting. Zero for syntax-filtered
    /// and full detection.
    pub detection_provider_calls: u64,
    pub stem: Vec<StemScore>,
}

impl Summary {
    pub fn correctness(&self) -> Option<f64> {
        self.pass_at_k.iter().find(|p| p.k == 1).map(|p| p.value)
    }

    pub fn components(&self) -> Option<StemComponents> {
        Some(StemComponents::new(
            self.correctness()?,
            self.auroc?,
            self.imperceptibility?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub config: PipelineConfig,
    pub results: Vec<RunResult>,
    pub failures: Vec<TaskFailure>,
    pub summary: Summary,
    pub timings: Vec<TaskTimings>,
}

struct Generated {
    task_id: String,
    prompt: Vec<TokenId>,
    reference: Vec<TokenId>,
    samples: Vec<SampleResult>,
    plain: Vec<Vec<TokenId>>,
    insertion_secs: f64,
}

fn plain_params(params: &WatermarkParams) -> WatermarkParams {
    WatermarkParams {
        delta: 0.0,
        ..params.clone()
    }
}

fn insert_task(
    task: &TaskRecord,
    index: usize,
    env: &Environment,
    config: &PipelineConfig,
) -> Result<Generated, String> {
    let prompt = env.tokenizer.encode(&task.prompt).map_err(|e| format!("prompt: {e}"))?;
    let reference = env
        .tokenizer
        .encode(&task.reference_solution)
        .map_err(|e| format!("reference solution: {e}"))?;
    if prompt.is_empty() {
        return Err("prompt tokenizes to nothing".into());
    }
    let task_rng = SplitMix64::new(config.seed).fork(index as u64);
    let plain = plain_params(&config.params);
    let prompt_seq = TokenSequence::new(prompt.clone());
    let timeout = Duration::from_secs_f64(config.timeout_secs);

    let mut samples = Vec::with_capacity(config.samples);
    let mut plain_outputs = Vec::with_capacity(config.samples);
    let mut insertion = Duration::ZERO;
    for i in 0..config.samples {
        let mut rng = task_rng.fork(2 * i as u64);
        let start = Instant::now();
        let record = generate(env.provider.as_ref(), &prompt_seq, &config.params, &env.profile, &mut rng)
            .map_err(|e| e.to_string())?;
        insertion += start.elapsed();
        if let GenerationStatus::Incomplete(reason) = &record.status {
            return Err(format!("generation {i} incomplete: {reason}"));
        }
        let text = record.output.source_text.clone().unwrap_or_default();
        let exec = run_tests(&format!("{}{}", task.prompt, text), task, timeout);
        samples.push(SampleResult {
            index: i,
            gated_steps: record.gated_steps(),
            completion: record.output.tokens,
            text,
            outcome: exec.outcome,
            exit_code: exec.exit_code,
            counted: 0,
            green: 0,
            z: None,
            verdict: false,
        });

        let mut rng = task_rng.fork(2 * i as u64 + 1);
        let record = generate(env.provider.as_ref(), &prompt_seq, &plain, &env.profile, &mut rng)
            .map_err(|e| e.to_string())?;
        if let GenerationStatus::Incomplete(reason) = &record.status {
            return Err(format!("reference generation {i} incomplete: {reason}"));
        }
        plain_outputs.push(record.output.tokens);
    }
    Ok(Generated {
        task_id: task.task_id.clone(),
        prompt,
        reference,
        samples,
        plain: plain_outputs,
        insertion_secs: insertion.as_secs_f64(),
    })
}

fn detect_one(
    detector: &mut Detector,
    prompt: &[TokenId],
    tokens: &[TokenId],
    env: &Environment,
    config: &PipelineConfig,
) -> Result<DetectionReport, String> {
    let seq = TokenSequence::new(tokens.to_vec());
    let result = match config.params.gate {
        Gate::NonSyntax => detector.stone(&seq, &env.profile),
        Gate::Always => detector.full(&seq),
        Gate::EntropyThreshold(h) => detect_entropy_gated(
            prompt,
            &seq,
            env.provider.as_ref(),
            &config.params.sampling,
            h,
            detector.config(),
        ),
    };
    result.map_err(|e| e.to_string())
}

fn detect_task(
    generated: &mut Generated,
    env: &Environment,
    config: &PipelineConfig,
) -> Result<(usize, Option<f64>, f64), String> {
    let start = Instant::now();
    let detect_config = DetectConfig {
        gamma: config.params.gamma,
        key: config.params.key,
        z_threshold: config.z_threshold,
    };
    let mut detector =
        Detector::new(env.profile.vocab_size(), detect_config).map_err(|e| e.to_string())?;
    for s in &mut generated.samples {
        let report = detect_one(&mut detector, &generated.prompt, &s.completion, env, config)?;
        s.counted = report.counted;
        s.green = report.green;
        s.z = report.z;
        s.verdict = report.verdict;
    }
    let human = detect_one(&mut detector, &generated.prompt, &generated.reference, env, config)?;
    Ok((human.counted, human.z, start.elapsed().as_secs_f64()))
}

fn score_task(generated: &Generated, env: &Environment) -> Result<(Vec<f64>, Vec<f64>), String> {
    let ppl = |completion: &Vec<TokenId>| -> Result<Option<f64>, String> {
        if completion.is_empty() {
            return Ok(None);
        }
        let sample = ScoredSample::new(generated.prompt.clone(), completion.clone());
        let lp = completion_log_probs(env.provider.as_ref(), &sample).map_err(|e| e.to_string())?;
        Ok(Some(perplexity_from_log_probs(&lp)))
    };
    let mut wm = Vec::new();
    for s in &generated.samples {
        wm.extend(ppl(&s.completion)?);
    }
    let mut plain = Vec::new();
    for c in &generated.plain {
        plain.extend(ppl(c)?);
    }
    Ok((wm, plain))
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn run_pipeline(
    tasks: &[TaskRecord],
    env: &Environment,
    config: &PipelineConfig,
) -> Result<PipelineOutput, HarnessError> {
    config
        .params
        .validate()
        .map_err(|e| HarnessError::Validation(e.to_string()))?;
    if config.samples == 0 || config.ks.iter().any(|&k| k == 0 || k > config.samples) {
        return Err(HarnessError::Validation(format!(
            "k values {:?} must lie in 1..={}",
            config.ks, config.samples
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;

    let mut failures = Vec::new();
    let fail = |task_id: &str, phase: &str, error: String| TaskFailure {
        task_id: task_id.to_string(),
        phase: phase.to_string(),
        error,
    };

    let inserted: Vec<Result<Generated, String>> = pool.install(|| {
        tasks
            .par_iter()
            .enumerate()
            .map(|(i, t)| insert_task(t, i, env, config))
            .collect()
    });
    let mut generated = Vec::new();
    for (task, r) in tasks.iter().zip(inserted) {
        match r {
            Ok(g) => generated.push(g),
            Err(e) => failures.push(fail(&task.task_id, "insertion", e)),
        }
    }

    let calls_before = env.provider.call_count();
    let detected: Vec<Result<(usize, Option<f64>, f64), String>> = pool.install(|| {
        generated
            .par_iter_mut()
            .map(|g| detect_task(g, env, config))
            .collect()
    });
    let detection_provider_calls = env.provider.call_count() - calls_before;

    let scored: Vec<Result<(Vec<f64>, Vec<f64>), String>> =
        pool.install(|| generated.par_iter().map(|g| score_task(g, env)).collect());

    let mut results = Vec::new();
    let mut timings = Vec::new();
    for ((g, d), s) in generated.into_iter().zip(detected).zip(scored) {
        let (human_counted, human_z, detection_secs) = match d {
            Ok(v) => v,
            Err(e) => {
                failures.push(fail(&g.task_id, "detection", e));
                continue;
            }
        };
        let (ppl_watermarked, ppl_plain) = match s {
            Ok(v) => v,
            Err(e) => {
                failures.push(fail(&g.task_id, "scoring", e));
                continue;
            }
        };
        timings.push(TaskTimings {
            task_id: g.task_id.clone(),
            insertion_secs: g.insertion_secs,
            detection_secs,
        });
        results.push(RunResult {
            correct: g.samples.iter().filter(|s| s.outcome == Outcome::Pass).count(),
            task_id: g.task_id,
            samples: g.samples,
            human_counted,
            human_z,
            ppl_watermarked,
            ppl_plain,
        });
    }
    // failures in dataset order
    let order = |id: &str| tasks.iter().position(|t| t.task_id == id).unwrap_or(usize::MAX);
    failures.sort_by_key(|f| order(&f.task_id));

    let summary = summarize(&results, failures.len(), config, detection_provider_calls)?;
    Ok(PipelineOutput {
        config: config.clone(),
        results,
        failures,
        summary,
        timings,
    })
}

fn summarize(
    results: &[RunResult],
    failed_tasks: usize,
    config: &PipelineConfig,
    detection_provider_calls: u64,
) -> Result<Summary, HarnessError> {
    let counts: Vec<(usize, usize)> = results
        .iter()
        .map(|r| (r.samples.len(), r.correct))
        .collect();
    let pass_at_k = if counts.is_empty() {
        Vec::new()
    } else {
        config
            .ks
            .iter()
            .map(|&k| {
                mean_pass_at_k(&counts, k)
                    .map(|value| PassAtK { k, value })
                    .map_err(|e| HarnessError::Runtime(e.to_string()))
            })
            .collect::<Result<_, _>>()?
    };

    let pools = ScorePools::from_optional(
        results.iter().flat_map(|r| r.samples.iter().map(|s| s.z)),
        results.iter().map(|r| r.human_z),
    )
    .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let auroc = auroc(&pools).ok();

    let wm_ppl: Vec<f64> = results.iter().flat_map(|r| r.ppl_watermarked.iter().copied()).collect();
    let plain_ppl: Vec<f64> = results.iter().flat_map(|r| r.ppl_plain.iter().copied()).collect();
    let total_generations = 2 * results.iter().map(|r| r.samples.len()).sum::<usize>();
    let ppl_watermarked = mean(&wm_ppl);
    let ppl_plain = mean(&plain_ppl);
    let imperceptibility = match (ppl_watermarked, ppl_plain) {
        (Some(w), Some(p)) => imperceptibility(w, p).ok(),
        _ => None,
    };

    let mut summary = Summary {
        tasks: results.len(),
        failed_tasks,
        samples_per_task: config.samples,
        gate: config.params.gate,
        gamma: config.params.gamma,
        delta: config.params.delta,
        pass_at_k,
        auroc,
        wm_pool: pools.wm.len(),
        human_pool: pools.human.len(),
        wm_excluded: pools.excluded_wm,
        human_excluded: pools.excluded_human,
        mean_wm_z: mean(&pools.wm),
        ppl_watermarked,
        ppl_plain,
        empty_completions: total_generations - wm_ppl.len() - plain_ppl.len(),
        imperceptibility,
        detection_provider_calls,
        stem: Vec::new(),
    };
    if let Some(c) = summary.components() {
        summary.stem = StemWeights::reference_settings()
            .iter()
            .map(|&w| stem(c, w))
            .collect();
    }
    Ok(summary)
}
