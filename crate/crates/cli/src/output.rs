//! Report files: JSON for structured data, CSV for arrays, all written atomically.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, Options};

/// SHA-256 of the config bytes and of any command-line overrides that change the results.
pub fn fingerprint(config: &[u8], opts: &Options) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config);
    if let Some(n) = opts.grid {
        hasher.update(format!("\0grid={n}").as_bytes());
    }
    if let Some(t) = opts.tol {
        hasher.update(format!("\0tol={t:e}").as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Plain decimal for moderate magnitudes, shortest exponent form otherwise.
pub fn number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn io(context: String) -> impl FnOnce(std::io::Error) -> CliError {
    move |source| CliError::Io { context, source }
}

/// Writes `contents` next to the target under a temporary name, then renames it into place.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).map_err(io(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, &target).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Io { context: format!("renaming to {}", target.display()), source: e }
    })
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(format!("serializing {name}: {e}")))?;
    text.push(b'\n');
    write_atomic(dir, name, &text)
}

/// CSV whose first line is `# config_sha256=<hash>`.
pub fn write_csv(dir: &Path, name: &str, hash: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut buf = format!("# config_sha256={hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(&mut buf);
        let fail = |e: csv::Error| CliError::Config(format!("formatting {name}: {e}"));
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row).map_err(fail)?;
        }
        w.flush().map_err(io(format!("formatting {name}")))?;
    }
    write_atomic(dir, name, &buf)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io(format!("creating {}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.5, -7.55, 1e-7, 3.25e20, 0.1 + 0.2] {
            assert_eq!(number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(number(1e-7), "1e-7");
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path(), "a.csv", "abc", &["x".into()], &[vec!["1".into()]]).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.csv")]);
        assert_eq!(fs::read_to_string(dir.path().join("a.csv")).unwrap(), "# config_sha256=abc\nx\n1\n");
    }
}
