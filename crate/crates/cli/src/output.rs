//! Output handling. Every run owns one output directory; all files are
//! written below it through a temp-file-then-rename sequence so a crashed or
//! interrupted run never leaves a partially written artifact behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::fail::{io_failure, Failure};

/// Name of the resolved-configuration snapshot written at the start of every
/// run.
pub const SNAPSHOT_NAME: &str = "config.resolved.json";

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// Create the output directory (and parents) and snapshot the resolved
    /// configuration into it.
    pub fn create(config: &RunConfig) -> Result<OutDir, Failure> {
        fs::create_dir_all(&config.out).map_err(|e| io_failure("create", &config.out, e))?;
        let out = OutDir {
            root: config.out.clone(),
        };
        out.write_json(SNAPSHOT_NAME, config)?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let target = self.root.join(name);
        write_atomic(&target, bytes)?;
        Ok(target)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, Failure> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::data(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Move `staged` (a directory prepared elsewhere under this output root)
    /// to its final name, replacing any previous version.
    pub fn promote_dir(&self, staged: &Path, name: &str) -> Result<PathBuf, Failure> {
        let target = self.root.join(name);
        if target.exists() {
            fs::remove_dir_all(&target).map_err(|e| io_failure("replace", &target, e))?;
        }
        fs::rename(staged, &target).map_err(|e| io_failure("rename into", &target, e))?;
        Ok(target)
    }
}

/// Write `bytes` to `target` atomically: write a sibling temp file, then
/// rename it over the destination.
pub fn write_atomic(target: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = target.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_failure("create", parent, e))?;
        }
    }
    let mut tmp_name = target.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = target.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| io_failure("write", &tmp, e))?;
    fs::rename(&tmp, target).map_err(|e| io_failure("rename into", target, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve, Overrides};

    #[test]
    fn creates_directory_and_snapshot() {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut config = resolve("stats", None, Overrides::default()).expect("resolve");
        config.out = dir.path().join("nested/run1");
        let out = OutDir::create(&config).expect("create");
        let snapshot = out.path(SNAPSHOT_NAME);
        assert!(snapshot.is_file());
        let text = fs::read_to_string(&snapshot).expect("read snapshot");
        let value: serde_json::Value = serde_json::from_str(&text).expect("valid json");
        assert_eq!(value["command"], "stats");
        assert_eq!(value["seed"], 42);
    }

    #[test]
    fn atomic_write_replaces_existing_content_and_leaves_no_temp() {
        let dir = tempfile::tempdir().expect("tempdir");
        let target = dir.path().join("report.txt");
        write_atomic(&target, b"first").expect("write");
        write_atomic(&target, b"second").expect("rewrite");
        assert_eq!(fs::read_to_string(&target).expect("read"), "second");
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .expect("list")
            .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
            .filter(|name| name.ends_with(".tmp"))
            .collect();
        assert!(
            leftovers.is_empty(),
            "temp files left behind: {leftovers:?}"
        );
    }
}
