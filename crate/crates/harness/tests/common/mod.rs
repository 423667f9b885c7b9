use synmark::dataset::{load_dataset, TaskRecord};
use synmark::env::Environment;
use synmark::pipeline::PipelineConfig;
use synmark::settings::Settings;

pub fn demo() -> Vec<TaskRecord> {
    load_dataset(&synmark::demo_dataset_path()).unwrap()
}

pub fn env() -> Environment {
    Environment::build(&Settings::default(), "python").unwrap()
}

pub fn config(samples: usize) -> PipelineConfig {
    let s = Settings {
        samples,
        k: vec![1],
        max_tokens: 64,
        workers: 2,
        ..Settings::default()
    };
    PipelineConfig {
        params: s.params().unwrap(),
        samples,
        ks: s.k.clone(),
        timeout_secs: 10.0,
        workers: s.workers,
        seed: 9,
        z_threshold: 4.0,
    }
}
