//! File-backed log plus a content-addressed blob directory.
//!
//! Layout under the data directory:
//!
//! ```text
//! LOCK            exclusive advisory lock held while the backend is open
//! commits.log     "FACMON-LOG <version>" header, then one record per line:
//!                 <sha256 of json, hex> <json>
//! blobs/<hash>    immutable blob bytes
//! ```
//!
//! A record is committed once its full line, newline included, is on disk.
//! A torn final line (checksum mismatch or missing newline) is truncated
//! away on open.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, Read, Seek, SeekFrom, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::backend::{Backend, LogRecord};
use crate::domain::ContentHash;
use crate::error::{Error, Result};

pub const LOG_FORMAT_VERSION: u32 = 1;
const LOG_MAGIC: &str = "FACMON-LOG";
const LOG_FILE: &str = "commits.log";

/// Test hook: makes the next append fail the way a crash would.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Nothing reaches the disk.
    BeforeWrite,
    /// Half the record reaches the disk, then the process "dies".
    TornWrite,
}

pub struct FileBackend {
    dir: PathBuf,
    log: Mutex<LogFile>,
    _lock: File,
}

struct LogFile {
    file: File,
    committed_len: u64,
    fault: Option<Fault>,
    crashed: bool,
}

impl FileBackend {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("blobs"))?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join("LOCK"))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => {
                return Err(Error::DataDirLocked(dir.display().to_string()))
            }
            Err(TryLockError::Error(e)) => return Err(e.into()),
        }

        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(&path)?;
        if file.metadata()?.len() == 0 {
            file.write_all(format!("{LOG_MAGIC} {LOG_FORMAT_VERSION}\n").as_bytes())?;
            file.sync_all()?;
            sync_dir(dir)?;
        }
        let committed_len = file.metadata()?.len();
        Ok(FileBackend {
            dir: dir.to_path_buf(),
            log: Mutex::new(LogFile {
                file,
                committed_len,
                fault: None,
                crashed: false,
            }),
            _lock: lock,
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    #[doc(hidden)]
    pub fn inject_fault(&self, fault: Fault) {
        self.log.lock().unwrap().fault = Some(fault);
    }

    fn blob_path(&self, hash: &ContentHash) -> PathBuf {
        self.dir.join("blobs").join(hash.as_str())
    }
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

fn encode(record: &LogRecord) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(record)?;
    let mut line = hex::encode(Sha256::digest(&json)).into_bytes();
    line.push(b' ');
    line.extend_from_slice(&json);
    line.push(b'\n');
    Ok(line)
}

fn decode(line: &[u8]) -> Option<LogRecord> {
    let (sum, json) = line.split_at(line.iter().position(|b| *b == b' ')?);
    let json = &json[1..];
    if hex::encode(Sha256::digest(json)).as_bytes() != sum {
        return None;
    }
    serde_json::from_slice(json).ok()
}

impl Backend for FileBackend {
    fn name(&self) -> &'static str {
        "file"
    }

    fn load(&self) -> Result<Vec<LogRecord>> {
        let mut log = self.log.lock().unwrap();
        let mut raw = Vec::new();
        log.file.seek(SeekFrom::Start(0))?;
        log.file.read_to_end(&mut raw)?;

        let header_end = raw
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::Corrupt("commit log has no header".into()))?;
        let header = std::str::from_utf8(&raw[..header_end])
            .map_err(|_| Error::Corrupt("commit log header is not text".into()))?;
        match header.split_once(' ') {
            Some((LOG_MAGIC, v)) if v.parse::<u32>() == Ok(LOG_FORMAT_VERSION) => {}
            _ => return Err(Error::Corrupt(format!("unsupported commit log header {header:?}"))),
        }

        let mut records = Vec::new();
        let mut offset = header_end + 1;
        while offset < raw.len() {
            let rest = &raw[offset..];
            let decoded = rest
                .iter()
                .position(|b| *b == b'\n')
                .and_then(|end| decode(&rest[..end]).map(|r| (r, end)));
            match decoded {
                Some((record, end)) => {
                    records.push(record);
                    offset += end + 1;
                }
                None => {
                    // Only the tail may be torn; anything after it means real damage.
                    let remaining_lines = rest.iter().filter(|b| **b == b'\n').count();
                    if remaining_lines > 1 {
                        return Err(Error::Corrupt(format!("damaged record at byte {offset}")));
                    }
                    tracing::warn!(offset, "discarding torn record at end of commit log");
                    log.file.set_len(offset as u64)?;
                    log.file.sync_all()?;
                    break;
                }
            }
        }
        log.committed_len = offset as u64;
        log.file.seek(SeekFrom::End(0))?;
        Ok(records)
    }

    fn append(&self, record: &LogRecord) -> Result<()> {
        let line = encode(record)?;
        let mut log = self.log.lock().unwrap();
        if log.crashed {
            return Err(Error::Io(io::Error::other("backend crashed; reopen the data directory")));
        }
        match log.fault.take() {
            Some(Fault::BeforeWrite) => {
                return Err(Error::Io(io::Error::other("injected fault before write")));
            }
            Some(Fault::TornWrite) => {
                let half = line.len() / 2;
                log.file.seek(SeekFrom::End(0))?;
                log.file.write_all(&line[..half])?;
                log.file.sync_data()?;
                log.crashed = true;
                return Err(Error::Io(io::Error::other("injected torn write")));
            }
            None => {}
        }
        let start = log.committed_len;
        let result = log
            .file
            .seek(SeekFrom::Start(start))
            .and_then(|_| log.file.write_all(&line))
            .and_then(|_| log.file.sync_data());
        if let Err(e) = result {
            // Drop whatever part of the line made it out so the next append starts clean.
            let _ = log.file.set_len(start);
            return Err(e.into());
        }
        log.committed_len = start + line.len() as u64;
        Ok(())
    }

    fn put_blob(&self, hash: &ContentHash, bytes: &[u8]) -> Result<bool> {
        let path = self.blob_path(hash);
        if path.exists() {
            return Ok(false);
        }
        let blobs = self.dir.join("blobs");
        let mut tmp = tempfile_in(&blobs)?;
        tmp.1.write_all(bytes)?;
        tmp.1.sync_all()?;
        fs::rename(&tmp.0, &path)?;
        sync_dir(&blobs)?;
        Ok(true)
    }

    fn get_blob(&self, hash: &ContentHash) -> Result<Option<Vec<u8>>> {
        match fs::read(self.blob_path(hash)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn blob_hashes(&self) -> Result<Vec<ContentHash>> {
        let mut hashes = Vec::new();
        for entry in fs::read_dir(self.dir.join("blobs"))? {
            let name = entry?.file_name();
            if let Ok(hash) = name.to_string_lossy().parse::<ContentHash>() {
                hashes.push(hash);
            }
        }
        hashes.sort();
        Ok(hashes)
    }

    fn health(&self) -> Result<()> {
        let meta = fs::metadata(self.dir.join(LOG_FILE))?;
        if meta.permissions().readonly() {
            return Err(Error::Io(io::Error::other("commit log is read-only")));
        }
        Ok(())
    }
}

fn tempfile_in(dir: &Path) -> io::Result<(PathBuf, File)> {
    let name = format!(".tmp-{}", uuid::Uuid::now_v7());
    let path = dir.join(name);
    let file = OpenOptions::new().write(true).create_new(true).open(&path)?;
    Ok((path, file))
}
