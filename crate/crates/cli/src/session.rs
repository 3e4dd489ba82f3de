//! Append-only session log: one JSON object per invocation with the
//! command line, versions, seeds and timings.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

pub struct SessionLog {
    argv: Vec<String>,
    started_unix: u64,
    runs: Vec<Value>,
    elapsed: Option<Duration>,
    error: Option<String>,
}

impl SessionLog {
    pub fn new(argv: Vec<String>) -> Self {
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            argv,
            started_unix,
            runs: Vec::new(),
            elapsed: None,
            error: None,
        }
    }

    pub fn note_run(&mut self, label: &str, n_rep: usize, seed: u64, fingerprint: &str) {
        self.runs.push(json!({
            "label": label,
            "n_rep": n_rep,
            "base_seed": seed,
            "fingerprint": fingerprint,
        }));
    }

    /// Records how many simulations the latest run actually executed.
    pub fn note_executed(&mut self, n: usize, took: Duration) {
        if let Some(Value::Object(run)) = self.runs.last_mut() {
            run.insert("executed".into(), json!(n));
            run.insert("seconds".into(), json!(took.as_secs_f64()));
        }
    }

    pub fn finish(&mut self, elapsed: Duration, error: Option<String>) {
        self.elapsed = Some(elapsed);
        self.error = error;
    }

    pub fn append_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let entry = json!({
            "started_unix": self.started_unix,
            "argv": self.argv,
            "trialsim_version": env!("CARGO_PKG_VERSION"),
            "parallel_threads_available": std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            "os": std::env::consts::OS,
            "arch": std::env::consts::ARCH,
            "runs": self.runs,
            "elapsed_seconds": self.elapsed.map(|d| d.as_secs_f64()),
            "error": self.error,
        });
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{entry}")
    }
}
