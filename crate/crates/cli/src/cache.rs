//! Content-addressed record cache: `dir/ab/abcdef....json`.
//!
//! Entries are written to a unique temporary file and renamed into place,
//! so readers never see a partial entry and same-key writers just replace
//! one complete copy with another.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::record::{input_hash, RunRecord};

pub const CACHE_ENV: &str = "SPLITGAP_CACHE";

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

#[derive(Debug)]
pub enum Lookup {
    Hit(RunRecord),
    Miss,
    /// Unreadable or inconsistent entry; treated as a miss.
    Corrupt(String),
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    /// Directory from the flag, else from `SPLITGAP_CACHE`.
    pub fn from_flag_or_env(flag: Option<&Path>) -> Option<Self> {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .map(Cache::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, hash: &str) -> PathBuf {
        let shard = hash.get(..2).unwrap_or("xx");
        self.dir.join(shard).join(format!("{hash}.json"))
    }

    pub fn lookup(&self, hash: &str) -> Lookup {
        let path = self.entry_path(hash);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Lookup::Miss,
            Err(e) => return Lookup::Corrupt(e.to_string()),
        };
        let record: RunRecord = match serde_json::from_str(text.trim_end()) {
            Ok(r) => r,
            Err(e) => return Lookup::Corrupt(format!("unparsable entry: {e}")),
        };
        if record.hash != hash || input_hash(&record.command, &record.inputs) != hash {
            return Lookup::Corrupt("hash does not match contents".into());
        }
        if !record.outputs.is_object() {
            return Lookup::Corrupt("entry has no outputs".into());
        }
        Lookup::Hit(record)
    }

    pub fn store(&self, record: &RunRecord) -> io::Result<()> {
        let path = self.entry_path(&record.hash);
        let parent = path.parent().expect("entry paths have a shard directory");
        fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(
            ".{}.{}.{}.tmp",
            record.hash,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let stored = RunRecord {
            cached: false,
            ..record.clone()
        };
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(stored.to_json_line().as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result
    }
}
