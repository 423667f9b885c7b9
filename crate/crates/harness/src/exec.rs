//! Runs a task's test command against a candidate program.
//!
//! Each run gets a fresh temporary directory holding the program and the
//! captured output. The command runs through `sh -c` in its own process
//! group, which is killed as a whole on timeout. There is no further
//! isolation: only run test commands you trust.

use std::fs::File;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::TaskRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Timeout,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    pub outcome: Outcome,
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    /// Set when the command could not be started.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

const CAPTURE_LIMIT: usize = 16 * 1024;

pub fn program_file_name(language: &str) -> &'static str {
    match language {
        "cpp" => "solution.cpp",
        "java" => "Solution.java",
        _ => "solution.py",
    }
}

fn error(message: String) -> ExecResult {
    ExecResult {
        outcome: Outcome::Error,
        exit_code: None,
        stdout: String::new(),
        stderr: String::new(),
        error: Some(message),
    }
}

fn read_capped(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap_or_default();
    let end = bytes.len().min(CAPTURE_LIMIT);
    String::from_utf8_lossy(&bytes[..end]).into_owned()
}

pub fn run_tests(code: &str, task: &TaskRecord, timeout: Duration) -> ExecResult {
    let dir = match tempfile::Builder::new().prefix("synmark-exec-").tempdir() {
        Ok(d) => d,
        Err(e) => return error(format!("cannot create temp dir: {e}")),
    };
    let program = dir.path().join(program_file_name(&task.language));
    if let Err(e) = std::fs::write(&program, code) {
        return error(format!("cannot write program: {e}"));
    }
    let command = task
        .test_command
        .replace("{file}", &program.display().to_string())
        .replace("{dir}", &dir.path().display().to_string());
    let out_path = dir.path().join("stdout.txt");
    let err_path = dir.path().join("stderr.txt");
    let (out, err) = match (File::create(&out_path), File::create(&err_path)) {
        (Ok(o), Ok(e)) => (o, e),
        _ => return error("cannot create output files".into()),
    };

    let mut child = match Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(out)
        .stderr(err)
        .process_group(0)
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return error(format!("cannot spawn test command: {e}")),
    };

    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if start.elapsed() >= timeout => break None,
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return error(format!("cannot wait for test command: {e}")),
        }
    };
    let outcome = match status {
        Some(s) if s.success() => Outcome::Pass,
        Some(_) => Outcome::Fail,
        None => {
            // SAFETY: the child leads its own group (process_group(0)), so
            // this targets only processes it spawned.
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            let _ = child.wait();
            Outcome::Timeout
        }
    };
    ExecResult {
        outcome,
        exit_code: status.and_then(|s| s.code()),
        stdout: read_capped(&out_path),
        stderr: read_capped(&err_path),
        error: None,
    }
}
