//! On-disk simulation batches.
//!
//! A batch file is JSON lines: a header carrying the [`RunManifest`], then
//! one [`TrialResult`] per line in stream-id order. Because simulation `i`
//! always uses stream `i`, a stored batch can serve any request for the same
//! design and seed with `n_rep` up to its size, and it can be extended in
//! place by simulating only the missing ids.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, TrialResult};
use crate::par::simulate_range;
use crate::spec::TrialSpec;

pub const FORMAT_NAME: &str = "trialsim-batch";
pub const FORMAT_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path} was written by format version {found}; this build reads up to {FORMAT_VERSION}")]
    ForwardIncompatible { path: PathBuf, found: u32 },
    #[error("{path} holds a different run ({field}: stored {stored}, requested {requested}); remove it or choose another output path")]
    Mismatch {
        path: PathBuf,
        field: &'static str,
        stored: String,
        requested: String,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// What a batch file was produced from. Wall-clock time is deliberately
/// absent so identical runs give identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub fingerprint: String,
    pub n_rep: usize,
    pub base_seed: u64,
    pub engine_version: String,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    manifest: RunManifest,
}

/// A loaded or freshly simulated batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub manifest: RunManifest,
    pub results: Vec<TrialResult>,
    /// Simulations actually run by this call (zero on a pure load).
    pub n_executed: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a batch file, checking only its format.
pub fn read_batch(path: &Path) -> Result<(RunManifest, Vec<TrialResult>), StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let corrupt = |line: usize, message: String| StoreError::Corrupt {
        path: path.to_path_buf(),
        line,
        message,
    };
    let first = lines
        .next()
        .ok_or_else(|| corrupt(1, "empty file".into()))?
        .map_err(io_err(path))?;
    let value: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| corrupt(1, e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(FORMAT_NAME) {
        return Err(corrupt(1, "not a batch file".into()));
    }
    let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found > FORMAT_VERSION {
        return Err(StoreError::ForwardIncompatible {
            path: path.to_path_buf(),
            found,
        });
    }
    let header: Header = serde_json::from_value(value).map_err(|e| corrupt(1, e.to_string()))?;
    let mut results = Vec::with_capacity(header.manifest.n_rep);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        let r: TrialResult = serde_json::from_str(&line).map_err(|e| corrupt(i + 2, e.to_string()))?;
        results.push(r);
    }
    if results.len() != header.manifest.n_rep {
        return Err(corrupt(
            results.len() + 1,
            format!("header promises {} results, found {}", header.manifest.n_rep, results.len()),
        ));
    }
    Ok((header.manifest, results))
}

/// Writes a batch atomically (temporary file, then rename).
pub fn write_batch(path: &Path, manifest: &RunManifest, results: &[TrialResult]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        let header = Header {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            manifest: manifest.clone(),
        };
        write_line(&mut w, &header).map_err(io_err(&tmp))?;
        for r in results {
            write_line(&mut w, r).map_err(io_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_line<T: Serialize>(w: &mut impl Write, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

fn check(path: &Path, field: &'static str, stored: impl ToString, requested: impl ToString) -> Result<(), StoreError> {
    let (stored, requested) = (stored.to_string(), requested.to_string());
    if stored == requested {
        Ok(())
    } else {
        Err(StoreError::Mismatch {
            path: path.to_path_buf(),
            field,
            stored,
            requested,
        })
    }
}

/// Returns `n_rep` simulations of `spec`, reusing and extending the batch
/// file at `path` when one exists for the same design, seed and engine.
/// A file for a different run is an error, never silently replaced.
pub fn run_batch(
    spec: &TrialSpec,
    n_rep: usize,
    base_seed: u64,
    path: Option<&Path>,
    label: Option<&str>,
) -> Result<Batch, StoreError> {
    let manifest = RunManifest {
        fingerprint: spec.fingerprint(),
        n_rep,
        base_seed,
        engine_version: ENGINE_VERSION.into(),
        label: label.map(str::to_owned),
    };
    let Some(path) = path else {
        let results = simulate_range(spec, base_seed, 0..n_rep as u64)?;
        return Ok(Batch {
            manifest,
            results,
            n_executed: n_rep,
        });
    };

    let mut results = Vec::new();
    if path.exists() {
        let (stored, loaded) = read_batch(path)?;
        check(path, "fingerprint", &stored.fingerprint, &manifest.fingerprint)?;
        check(path, "base_seed", stored.base_seed, base_seed)?;
        check(path, "engine_version", &stored.engine_version, ENGINE_VERSION)?;
        results = loaded;
        if results.len() >= n_rep {
            results.truncate(n_rep);
            return Ok(Batch {
                manifest: RunManifest { label: stored.label, ..manifest },
                results,
                n_executed: 0,
            });
        }
    }
    let have = results.len();
    results.extend(simulate_range(spec, base_seed, have as u64..n_rep as u64)?);
    write_batch(path, &manifest, &results)?;
    Ok(Batch {
        manifest,
        results,
        n_executed: n_rep - have,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::validate_spec;
    use crate::spec::fixtures::{primary_null, seq};

    fn small() -> TrialSpec {
        let mut d = primary_null();
        d.data_looks = seq(100, 400, 100);
        d.randomised_at_looks = d.data_looks.clone();
        d.equivalence_prob = Some(0.9.into());
        d.n_draws = 500;
        validate_spec(&d).unwrap()
    }

    #[test]
    fn load_extend_and_refuse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let spec = small();
        let a = run_batch(&spec, 6, 9, Some(&p), None).unwrap();
        assert_eq!(a.n_executed, 6);
        let b = run_batch(&spec, 4, 9, Some(&p), None).unwrap();
        assert_eq!(b.n_executed, 0);
        assert_eq!(b.results[..], a.results[..4]);
        let c = run_batch(&spec, 10, 9, Some(&p), None).unwrap();
        assert_eq!(c.n_executed, 4);
        assert_eq!(c.results[..6], a.results[..]);

        let fresh = dir.path().join("fresh.jsonl");
        run_batch(&spec, 10, 9, Some(&fresh), None).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&fresh).unwrap());

        assert!(matches!(
            run_batch(&spec, 4, 10, Some(&p), None),
            Err(StoreError::Mismatch { field: "base_seed", .. })
        ));
        let other = spec.with_symmetric_thresholds(0.98).unwrap();
        assert!(matches!(
            run_batch(&other, 4, 9, Some(&p), None),
            Err(StoreError::Mismatch { field: "fingerprint", .. })
        ));
    }

    #[test]
    fn newer_format_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        std::fs::write(&p, r#"{"format":"trialsim-batch","version":99,"manifest":{}}"#).unwrap();
        assert!(matches!(read_batch(&p), Err(StoreError::ForwardIncompatible { found: 99, .. })));
    }
}
