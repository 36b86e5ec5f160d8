//! Persistent translation cache.
//!
//! On disk the cache is an append-only record file, one entry per line:
//!
//! ```text
//! <source> <target> <sha256 of source text, hex> <escaped translation>
//! ```
//!
//! Appends take an exclusive advisory lock on the file so several processes
//! can share one cache. A key is never rebound to a different value.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use log::warn;
use sha2::{Digest, Sha256};

use crate::corpus::{escape_field, unescape_field, Language};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache {path}:{line}: malformed record")]
    Malformed { path: PathBuf, line: usize },
    #[error("cache key {key} already holds {existing:?}, refusing to overwrite with {new:?}")]
    Conflict {
        key: CacheKey,
        existing: String,
        new: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    pub source: Language,
    pub target: Language,
    /// Hex SHA-256 of the source text.
    pub text_hash: String,
}

impl CacheKey {
    pub fn new(text: &str, source: Language, target: Language) -> Self {
        Self {
            source,
            target,
            text_hash: hex::encode(Sha256::digest(text.as_bytes())),
        }
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}:{}", self.source, self.target, &self.text_hash[..12])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

pub struct TranslationCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<CacheKey, String>>,
    writer: Mutex<Option<File>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Opens (creating if needed) the cache file and loads every record.
    /// A torn final record without a newline is discarded.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io)?;
        file.lock().map_err(io)?;
        let mut contents = String::new();
        let read = file.read_to_string(&mut contents);
        let result = read.map_err(io).and_then(|_| {
            if !contents.is_empty() && !contents.ends_with('\n') {
                let keep = contents.rfind('\n').map_or(0, |i| i + 1);
                warn!("{}: dropping torn trailing record", path.display());
                file.set_len(keep as u64).map_err(io)?;
                contents.truncate(keep);
            }
            parse_records(&contents, path)
        });
        file.unlock().map_err(io)?;
        let entries = result?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Looks up a translation, counting a hit or a miss.
    pub fn get(&self, text: &str, source: Language, target: Language) -> Option<String> {
        let found = self.peek(&CacheKey::new(text, source, target));
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    /// Lookup without touching the counters.
    pub fn peek(&self, key: &CacheKey) -> Option<String> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    /// Stores a translation. Re-storing the same value is a no-op; a
    /// different value for an existing key is an error.
    pub fn put(&self, text: &str, source: Language, target: Language, translation: &str) -> Result<(), CacheError> {
        let key = CacheKey::new(text, source, target);
        let mut writer = self.writer.lock().expect("cache writer lock");
        {
            let entries = self.entries.read().expect("cache lock");
            if let Some(existing) = entries.get(&key) {
                if existing == translation {
                    return Ok(());
                }
                return Err(CacheError::Conflict {
                    key,
                    existing: existing.clone(),
                    new: translation.to_string(),
                });
            }
        }
        if let (Some(file), Some(path)) = (writer.as_mut(), self.path.as_ref()) {
            let line = record_line(&key, translation);
            let io = |source| CacheError::Io {
                path: path.clone(),
                source,
            };
            file.lock().map_err(io)?;
            let written = file.write_all(line.as_bytes()).and_then(|_| file.flush());
            file.unlock().map_err(io)?;
            written.map_err(io)?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .insert(key, translation.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }

    /// Rewrites the file with one record per key, sorted by key.
    pub fn compact(&self) -> Result<(), CacheError> {
        let Some(path) = self.path.as_ref() else {
            return Ok(());
        };
        let io = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        let mut writer = self.writer.lock().expect("cache writer lock");
        let entries = self.entries.read().expect("cache lock");
        let mut keys: Vec<&CacheKey> = entries.keys().collect();
        keys.sort();

        let tmp = path.with_extension("compact.tmp");
        {
            let mut out = BufWriter::new(File::create(&tmp).map_err(io)?);
            for key in keys {
                out.write_all(record_line(key, &entries[key]).as_bytes()).map_err(io)?;
            }
            out.flush().map_err(io)?;
        }
        if let Some(file) = writer.as_ref() {
            file.lock().map_err(io)?;
        }
        let renamed = fs::rename(&tmp, path);
        if let Some(file) = writer.as_ref() {
            file.unlock().map_err(io)?;
        }
        renamed.map_err(io)?;
        *writer = Some(
            OpenOptions::new()
                .read(true)
                .append(true)
                .open(path)
                .map_err(io)?,
        );
        Ok(())
    }
}

fn record_line(key: &CacheKey, translation: &str) -> String {
    format!(
        "{} {} {} {}\n",
        key.source,
        key.target,
        key.text_hash,
        escape_field(translation)
    )
}

fn parse_records(contents: &str, path: &Path) -> Result<HashMap<CacheKey, String>, CacheError> {
    let mut entries: HashMap<CacheKey, String> = HashMap::new();
    for (i, line) in contents.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let malformed = || CacheError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
        };
        let mut parts = line.splitn(4, ' ');
        let (Some(source), Some(target), Some(hash), Some(text)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(malformed());
        };
        let source: Language = source.parse().map_err(|_| malformed())?;
        let target: Language = target.parse().map_err(|_| malformed())?;
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(malformed());
        }
        let key = CacheKey {
            source,
            target,
            text_hash: hash.to_ascii_lowercase(),
        };
        let value = unescape_field(text);
        match entries.get(&key) {
            Some(existing) if *existing != value => {
                return Err(CacheError::Conflict {
                    key,
                    existing: existing.clone(),
                    new: value,
                })
            }
            Some(_) => {}
            None => {
                entries.insert(key, value);
            }
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Language::*;

    #[test]
    fn put_then_get_round_trips() {
        let cache = TranslationCache::in_memory();
        assert_eq!(cache.get("hello", En, Fr), None);
        cache.put("hello", En, Fr, "bonjour\ttab").unwrap();
        assert_eq!(cache.get("hello", En, Fr).as_deref(), Some("bonjour\ttab"));
        assert_eq!(cache.get("hello", En, De), None);
        let stats = cache.stats();
        assert_eq!((stats.hits, stats.misses, stats.entries), (1, 2, 1));
    }

    #[test]
    fn refuses_to_overwrite() {
        let cache = TranslationCache::in_memory();
        cache.put("a", En, Fr, "x").unwrap();
        cache.put("a", En, Fr, "x").unwrap();
        assert!(matches!(cache.put("a", En, Fr, "y"), Err(CacheError::Conflict { .. })));
        assert_eq!(cache.peek(&CacheKey::new("a", En, Fr)).as_deref(), Some("x"));
    }

    #[test]
    fn persists_across_reopen_and_compacts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mt.cache");
        {
            let cache = TranslationCache::open(&path).unwrap();
            cache.put("one", En, Fr, "un").unwrap();
            cache.put("two\nlines", En, De, "zwei\nZeilen").unwrap();
            cache.put("one", En, Fr, "un").unwrap();
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("en fr "));
        assert!(first.ends_with(" un"));

        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("two\nlines", En, De).as_deref(), Some("zwei\nZeilen"));

        // duplicated identical records are legal before compaction
        let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "{first}").unwrap();
        drop(f);
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 3);
        cache.compact().unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
        cache.put("three", En, It, "tre").unwrap();
        let reopened = TranslationCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 3);
    }

    #[test]
    fn torn_tail_is_dropped_and_conflicts_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mt.cache");
        let key = CacheKey::new("x", En, Fr);
        fs::write(&path, format!("en fr {} a\nen fr {} partial", key.text_hash, key.text_hash)).unwrap();
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert!(fs::read_to_string(&path).unwrap().ends_with(" a\n"));
        drop(cache);

        fs::write(&path, format!("en fr {h} a\nen fr {h} b\n", h = key.text_hash)).unwrap();
        assert!(matches!(TranslationCache::open(&path), Err(CacheError::Conflict { .. })));

        fs::write(&path, "en fr nothex a\n").unwrap();
        assert!(matches!(TranslationCache::open(&path), Err(CacheError::Malformed { line: 1, .. })));
    }
}
