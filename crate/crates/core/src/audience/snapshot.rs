//! Line-delimited snapshot of fetched counts.
//!
//! Line 1 is a header `{"schema","version","study","backend"}`; each later
//! line is one entry tagged by `status` (`"ok"` or `"failed"`). Files are
//! only ever appended to, one flushed line per answer, so an interrupted
//! fetch leaves a valid prefix that a rerun resumes from.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::PopulationSpec;
use crate::error::{Error, Result};

use super::{request_id, AudienceCount, AudienceQuery, CountBackend, CountRequest, CountResponse};

pub const SNAPSHOT_SCHEMA: &str = "assimlab-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    study: String,
    backend: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceRecord {
    pub request_id: String,
    pub population: String,
    pub request: CountRequest,
    pub count: u64,
    pub clamped: bool,
    pub fetched_at_ms: u64,
    pub backend: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub request_id: String,
    pub population: String,
    pub request: CountRequest,
    pub error_kind: String,
    pub message: String,
    pub attempts: u32,
    pub failed_at_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SnapshotEntry {
    Ok(AudienceRecord),
    Failed(FailureRecord),
}

impl SnapshotEntry {
    pub fn request_id(&self) -> &str {
        match self {
            SnapshotEntry::Ok(r) => &r.request_id,
            SnapshotEntry::Failed(r) => &r.request_id,
        }
    }

    fn request(&self) -> &CountRequest {
        match self {
            SnapshotEntry::Ok(r) => &r.request,
            SnapshotEntry::Failed(r) => &r.request,
        }
    }
}

impl From<&AudienceCount> for AudienceRecord {
    fn from(count: &AudienceCount) -> Self {
        AudienceRecord {
            request_id: count.query.request_id.clone(),
            population: count.query.spec.label.clone(),
            request: count.query.request(),
            count: count.count,
            clamped: count.clamped,
            fetched_at_ms: count.fetched_at_ms,
            backend: count.backend.clone(),
        }
    }
}

impl AudienceRecord {
    pub fn to_audience_count(&self) -> AudienceCount {
        let spec = PopulationSpec {
            label: self.population.clone(),
            targeting: self.request.targeting.clone(),
        };
        AudienceCount {
            query: AudienceQuery {
                spec,
                interest: self.request.interest.clone(),
                request_id: self.request_id.clone(),
            },
            count: self.count,
            clamped: self.clamped,
            fetched_at_ms: self.fetched_at_ms,
            backend: self.backend.clone(),
        }
    }
}

/// Append-only record of one study's fetched counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub study: String,
    pub backend: String,
    pub schema_version: u32,
    entries: Vec<SnapshotEntry>,
    answered: HashMap<String, usize>,
}

impl Snapshot {
    pub fn new(study: impl Into<String>, backend: impl Into<String>) -> Self {
        Self {
            study: study.into(),
            backend: backend.into(),
            schema_version: SNAPSHOT_VERSION,
            entries: Vec::new(),
            answered: HashMap::new(),
        }
    }

    pub fn entries(&self) -> &[SnapshotEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: SnapshotEntry) {
        if let SnapshotEntry::Ok(record) = &entry {
            self.answered
                .insert(record.request_id.clone(), self.entries.len());
        }
        self.entries.push(entry);
    }

    /// Latest successful answer for a request id.
    pub fn lookup(&self, request_id: &str) -> Option<&AudienceRecord> {
        self.answered
            .get(request_id)
            .map(|&idx| match &self.entries[idx] {
                SnapshotEntry::Ok(record) => record,
                SnapshotEntry::Failed(_) => unreachable!("index only tracks ok entries"),
            })
    }

    pub fn is_answered(&self, request_id: &str) -> bool {
        self.answered.contains_key(request_id)
    }

    pub fn counts(&self) -> impl Iterator<Item = &AudienceRecord> {
        self.entries.iter().filter_map(|entry| match entry {
            SnapshotEntry::Ok(record) => Some(record),
            SnapshotEntry::Failed(_) => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &FailureRecord> {
        self.entries.iter().filter_map(|entry| match entry {
            SnapshotEntry::Failed(record) if !self.answered.contains_key(&record.request_id) => {
                Some(record)
            }
            _ => None,
        })
    }

    /// Planned queries without a successful answer.
    pub fn missing<'a>(&self, queries: &'a [AudienceQuery]) -> Vec<&'a AudienceQuery> {
        queries
            .iter()
            .filter(|q| !self.is_answered(&q.request_id))
            .collect()
    }

    fn header_line(&self) -> String {
        let header = Header {
            schema: SNAPSHOT_SCHEMA.into(),
            version: self.schema_version,
            study: self.study.clone(),
            backend: self.backend.clone(),
        };
        serde_json::to_string(&header).expect("headers always serialize")
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header_line())?;
        for entry in &self.entries {
            writeln!(out, "{}", serde_json::to_string(entry)?)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("snapshot lines are utf-8")
    }

    /// Parses a snapshot. A final line without a newline is treated as an
    /// interrupted write and ignored.
    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        Ok(Self::read_prefix(input)?.0)
    }

    /// Returns the snapshot plus the byte length of its complete lines.
    fn read_prefix<R: Read>(input: R) -> Result<(Self, u64)> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        let mut consumed = 0u64;
        let mut line_no = 0usize;
        let mut snapshot: Option<Snapshot> = None;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 || !line.ends_with('\n') {
                break;
            }
            line_no += 1;
            let text = line.trim_end_matches('\n');
            match snapshot.as_mut() {
                None => {
                    let header: Header =
                        serde_json::from_str(text).map_err(|e| Error::Snapshot {
                            line: line_no,
                            message: e.to_string(),
                        })?;
                    if header.schema != SNAPSHOT_SCHEMA || header.version != SNAPSHOT_VERSION {
                        return Err(Error::Snapshot {
                            line: line_no,
                            message: format!(
                                "unsupported schema {} v{}",
                                header.schema, header.version
                            ),
                        });
                    }
                    snapshot = Some(Snapshot::new(header.study, header.backend));
                }
                Some(snapshot) => {
                    let entry: SnapshotEntry =
                        serde_json::from_str(text).map_err(|e| Error::Snapshot {
                            line: line_no,
                            message: e.to_string(),
                        })?;
                    if request_id(entry.request()) != entry.request_id() {
                        return Err(Error::Snapshot {
                            line: line_no,
                            message: format!(
                                "request id {} does not match its request",
                                entry.request_id()
                            ),
                        });
                    }
                    snapshot.push(entry);
                }
            }
            consumed += n as u64;
        }
        let snapshot = snapshot.ok_or(Error::Snapshot {
            line: 1,
            message: "missing header".into(),
        })?;
        Ok((snapshot, consumed))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}

/// Destination for fetched entries.
pub trait SnapshotSink {
    fn snapshot(&self) -> &Snapshot;
    fn append(&mut self, entry: SnapshotEntry) -> Result<()>;
}

impl SnapshotSink for Snapshot {
    fn snapshot(&self) -> &Snapshot {
        self
    }

    fn append(&mut self, entry: SnapshotEntry) -> Result<()> {
        self.push(entry);
        Ok(())
    }
}

/// A snapshot backed by an append-only file.
pub struct SnapshotFile {
    path: PathBuf,
    file: File,
    snapshot: Snapshot,
}

impl SnapshotFile {
    /// Opens an existing snapshot for resuming, or starts a new one.
    ///
    /// A trailing partial line from an interrupted write is cut off.
    pub fn open(path: &Path, study: &str, backend: &str) -> Result<Self> {
        if path.exists() && std::fs::metadata(path)?.len() > 0 {
            let mut file = OpenOptions::new().read(true).write(true).open(path)?;
            let (snapshot, complete) = Snapshot::read_prefix(&mut file)?;
            if snapshot.study != study {
                return Err(Error::Snapshot {
                    line: 1,
                    message: format!(
                        "snapshot belongs to study {:?}, not {study:?}",
                        snapshot.study
                    ),
                });
            }
            file.set_len(complete)?;
            file.seek(SeekFrom::End(0))?;
            return Ok(Self {
                path: path.to_path_buf(),
                file,
                snapshot,
            });
        }
        let snapshot = Snapshot::new(study, backend);
        let mut file = File::create(path)?;
        writeln!(file, "{}", snapshot.header_line())?;
        file.flush()?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            snapshot,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn into_snapshot(self) -> Snapshot {
        self.snapshot
    }
}

impl SnapshotSink for SnapshotFile {
    fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    fn append(&mut self, entry: SnapshotEntry) -> Result<()> {
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.snapshot.push(entry);
        Ok(())
    }
}

/// Serves counts recorded in a snapshot.
pub struct SnapshotBackend {
    counts: HashMap<String, CountResponse>,
}

impl SnapshotBackend {
    pub fn new(snapshot: &Snapshot) -> Self {
        let counts = snapshot
            .counts()
            .map(|r| {
                (
                    r.request_id.clone(),
                    CountResponse {
                        count: r.count,
                        clamped: r.clamped,
                    },
                )
            })
            .collect();
        Self { counts }
    }
}

impl CountBackend for SnapshotBackend {
    fn label(&self) -> &str {
        "snapshot"
    }

    fn count(&self, request: &CountRequest) -> Result<CountResponse> {
        let id = request_id(request);
        self.counts
            .get(&id)
            .copied()
            .ok_or(Error::NotInSnapshot { request_id: id })
    }
}
