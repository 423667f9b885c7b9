mod common;

use synmark::pipeline::run_pipeline;
use synmark::report::report_lines;
use synmark::sweep::{sweep, SweepSpec};
use synmark_core::engine::Gate;
use synmark_core::tokenizer::Tokenizer;

#[test]
fn reports_are_byte_identical_across_runs() {
    let tasks = common::demo();
    let config = common::config(2);
    let a = report_lines(&run_pipeline(&tasks, &common::env(), &config).unwrap()).unwrap();
    let b = report_lines(&run_pipeline(&tasks, &common::env(), &config).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn worker_count_does_not_change_the_report() {
    let tasks = common::demo();
    let mut config = common::config(2);
    config.workers = 1;
    let a = report_lines(&run_pipeline(&tasks, &common::env(), &config).unwrap()).unwrap();
    config.workers = 3;
    let mut b = report_lines(&run_pipeline(&tasks, &common::env(), &config).unwrap()).unwrap();
    b = b.replace("\"workers\":3", "\"workers\":1");
    assert_eq!(a, b);
}

#[test]
fn failing_tests_leave_other_axes_untouched() {
    let tasks = common::demo();
    let mut failing = tasks.clone();
    for t in &mut failing {
        t.test_command = "false".into();
    }
    let config = common::config(2);
    let good = run_pipeline(&tasks, &common::env(), &config).unwrap().summary;
    let bad = run_pipeline(&failing, &common::env(), &config).unwrap().summary;
    assert_eq!(bad.correctness(), Some(0.0));
    assert_eq!(good.auroc, bad.auroc);
    assert!(bad.auroc.is_some());
    assert_eq!(good.imperceptibility, bad.imperceptibility);
    assert_eq!(good.mean_wm_z, bad.mean_wm_z);
}

#[test]
fn syntax_filtered_detection_makes_no_model_calls() {
    let out = run_pipeline(&common::demo(), &common::env(), &common::config(2)).unwrap();
    assert_eq!(out.summary.detection_provider_calls, 0);
}

#[test]
fn entropy_gated_detection_calls_once_per_position() {
    let tasks = common::demo();
    let env = common::env();
    let mut config = common::config(2);
    config.params.gate = Gate::EntropyThreshold(0.9);
    let out = run_pipeline(&tasks, &env, &config).unwrap();
    let positions: usize = out
        .results
        .iter()
        .map(|r| {
            let wm: usize = r.samples.iter().map(|s| s.completion.len().saturating_sub(1)).sum();
            let human = env
                .tokenizer
                .encode(&tasks.iter().find(|t| t.task_id == r.task_id).unwrap().reference_solution)
                .unwrap()
                .len();
            wm + human.saturating_sub(1)
        })
        .sum();
    assert_eq!(out.summary.detection_provider_calls, positions as u64);
}

#[test]
fn a_bad_task_does_not_abort_the_run() {
    let mut tasks = common::demo();
    tasks[1].prompt = " def v1 ( \u{00a7} )".into();
    let out = run_pipeline(&tasks, &common::env(), &common::config(2)).unwrap();
    assert_eq!(out.results.len(), 2);
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].task_id, "demo/1");
    assert_eq!(out.failures[0].phase, "insertion");
    assert_eq!(out.summary.failed_tasks, 1);
}

#[test]
fn every_sample_gets_an_outcome() {
    let out = run_pipeline(&common::demo(), &common::env(), &common::config(3)).unwrap();
    for r in &out.results {
        assert_eq!(r.samples.len(), 3);
    }
    assert_eq!(out.summary.stem.len(), 4);
    assert_eq!(out.timings.len(), 3);
}

fn spec(gammas: Vec<f64>, deltas: Vec<f64>) -> SweepSpec {
    SweepSpec {
        gammas,
        deltas,
        gate: Gate::NonSyntax,
        grid_step: Some(0.1),
        base: common::config(2),
    }
}

#[test]
fn single_cell_sweep_matches_direct_run() {
    let tasks = common::demo();
    let env = common::env();
    let (rows, composites) = sweep(&tasks, &env, &spec(vec![0.5], vec![1.0])).unwrap();
    assert_eq!(rows.len(), 1);
    let direct = run_pipeline(&tasks, &env, &common::config(2)).unwrap().summary;
    assert_eq!(rows[0].summary, direct);
    // none of the reference settings lies on the 0.1 lattice
    assert_eq!(composites.len(), 4 + 66);
}

#[test]
fn sweep_grid_shape_and_delta_trend() {
    let tasks = common::demo();
    let env = common::env();
    let (rows, _) = sweep(&tasks, &env, &spec(vec![0.25, 0.5], vec![0.0, 1.0, 3.0])).unwrap();
    assert_eq!(rows.len(), 6);
    for gamma_rows in rows.chunks(3) {
        let aurocs: Vec<f64> = gamma_rows.iter().map(|r| r.auroc.unwrap()).collect();
        assert!(aurocs.windows(2).all(|w| w[1] >= w[0]), "{aurocs:?}");
    }
}
