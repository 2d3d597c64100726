//! Content-addressed response cache: one JSON file per request
//! fingerprint, written atomically so concurrent runs never observe a
//! half-written record. A warm cache directory is an ordinary fixture —
//! it can be committed and replayed without credentials.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{CompletionRecord, GatewayError};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record_path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    pub fn contains(&self, fingerprint: &str) -> bool {
        self.record_path(fingerprint).is_file()
    }

    /// Fetch a record if present. A missing file is a miss, not an error;
    /// an unreadable or mislabeled record is an error.
    pub fn load(&self, fingerprint: &str) -> Result<Option<CompletionRecord>, GatewayError> {
        let path = self.record_path(fingerprint);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(GatewayError::Io { path, source }),
        };
        let record: CompletionRecord = serde_json::from_str(&text).map_err(|e| {
            GatewayError::Cache(format!("corrupt record {}: {e}", path.display()))
        })?;
        if record.fingerprint != fingerprint {
            return Err(GatewayError::Cache(format!(
                "record {} claims fingerprint {}",
                path.display(),
                record.fingerprint
            )));
        }
        Ok(Some(record))
    }

    /// Persist a record under its fingerprint via write-temp-then-rename.
    pub fn store(&self, record: &CompletionRecord) -> Result<(), GatewayError> {
        fs::create_dir_all(&self.dir).map_err(|source| GatewayError::Io {
            path: self.dir.clone(),
            source,
        })?;
        let mut text =
            serde_json::to_string_pretty(record).expect("record of plain strings serializes");
        text.push('\n');
        let tmp = self.dir.join(format!(
            ".{}.tmp.{}.{}",
            record.fingerprint,
            process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed),
        ));
        fs::write(&tmp, &text).map_err(|source| GatewayError::Io {
            path: tmp.clone(),
            source,
        })?;
        let path = self.record_path(&record.fingerprint);
        fs::rename(&tmp, &path).map_err(|source| GatewayError::Io { path, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(fingerprint: &str) -> CompletionRecord {
        CompletionRecord {
            fingerprint: fingerprint.into(),
            provider_id: "mock".into(),
            model_name: "mock-alpha".into(),
            system_fingerprint: "abc".into(),
            raw_response: "```python\nx = 1\n```".into(),
            extracted_code: "x = 1\n".into(),
            timestamp: "2026-01-01T00:00:00+00:00".into(),
            attempt: 1,
            valid: true,
        }
    }

    #[test]
    fn store_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let original = record("f00d");
        cache.store(&original).unwrap();
        let loaded = cache.load("f00d").unwrap().unwrap();
        assert_eq!(original, loaded);
        assert!(cache.contains("f00d"));
    }

    #[test]
    fn missing_record_is_a_miss_not_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        assert!(cache.load("beef").unwrap().is_none());
    }

    #[test]
    fn corrupt_record_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad0.json"), "{not json").unwrap();
        let cache = ResponseCache::new(dir.path());
        assert!(matches!(
            cache.load("bad0"),
            Err(GatewayError::Cache(_))
        ));
    }

    #[test]
    fn mislabeled_record_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        cache.store(&record("1111")).unwrap();
        fs::rename(
            dir.path().join("1111.json"),
            dir.path().join("2222.json"),
        )
        .unwrap();
        assert!(matches!(
            cache.load("2222"),
            Err(GatewayError::Cache(_))
        ));
    }

    #[test]
    fn store_overwrites_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        cache.store(&record("aaaa")).unwrap();
        let mut updated = record("aaaa");
        updated.raw_response = "second".into();
        cache.store(&updated).unwrap();
        assert_eq!(cache.load("aaaa").unwrap().unwrap().raw_response, "second");
        // no stray temp files left behind
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .contains(".tmp.")
            })
            .collect();
        assert!(leftovers.is_empty());
    }
}
