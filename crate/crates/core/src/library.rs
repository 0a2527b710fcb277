//! Content-addressed library of protocols, processes and environments.
//!
//! Each entry is stored as its canonical JSON document. The version of an
//! entry is the SHA-256 of those bytes, so re-saving identical content yields
//! the same version and a tampered document is detected on load.
//!
//! On disk ([`FsBackend`]):
//!
//! ```text
//! <root>/index.json             canonical JSON array of {kind, id, version, tags}, sorted by (kind, id)
//! <root>/<kind>/<id>.json       canonical JSON document, no trailing newline
//! ```
//!
//! `<kind>` is one of `abstract`, `implemented`, `process`, `environment`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical;
use crate::environment::SocialEnvironment;
use crate::id::Id;
use crate::implementation::ImplementedSocialProtocol;
use crate::process::SocialProcess;
use crate::protocol::AbstractSocialProtocol;
use crate::report::ValidationReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Abstract,
    Implemented,
    Process,
    Environment,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 4] =
        [ArtifactKind::Abstract, ArtifactKind::Implemented, ArtifactKind::Process, ArtifactKind::Environment];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Abstract => "abstract",
            ArtifactKind::Implemented => "implemented",
            ArtifactKind::Process => "process",
            ArtifactKind::Environment => "environment",
        }
    }

    pub fn parse(raw: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == raw)
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A document type the library knows how to validate.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: ArtifactKind;

    fn check(&self) -> ValidationReport;

    fn tags(&self) -> BTreeSet<String> {
        BTreeSet::new()
    }
}

impl Artifact for AbstractSocialProtocol {
    const KIND: ArtifactKind = ArtifactKind::Abstract;

    fn check(&self) -> ValidationReport {
        self.validate()
    }

    fn tags(&self) -> BTreeSet<String> {
        self.tags.clone()
    }
}

impl Artifact for ImplementedSocialProtocol {
    const KIND: ArtifactKind = ArtifactKind::Implemented;

    fn check(&self) -> ValidationReport {
        self.validate()
    }

    fn tags(&self) -> BTreeSet<String> {
        self.abstract_protocol.tags.clone()
    }
}

impl Artifact for SocialProcess {
    const KIND: ArtifactKind = ArtifactKind::Process;

    fn check(&self) -> ValidationReport {
        self.validate()
    }

    fn tags(&self) -> BTreeSet<String> {
        self.protocol.abstract_protocol.tags.clone()
    }
}

impl Artifact for SocialEnvironment {
    const KIND: ArtifactKind = ArtifactKind::Environment;

    fn check(&self) -> ValidationReport {
        self.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub id: Id,
    pub kind: ArtifactKind,
    pub tags: BTreeSet<String>,
    pub version: String,
    pub document: Value,
}

impl LibraryEntry {
    pub fn from_artifact<T: Artifact>(id: Id, artifact: &T) -> Result<Self> {
        let document = serde_json::to_value(artifact).map_err(|e| Error::Malformed(e.to_string()))?;
        let version = canonical::hash_bytes(canonical::canonicalize(&document).as_bytes());
        Ok(Self { id, kind: T::KIND, tags: artifact.tags(), version, document })
    }

    pub fn decode<T: Artifact>(&self) -> Result<T> {
        if self.kind != T::KIND {
            return Err(Error::Malformed(format!("entry {} is {}, not {}", self.id, self.kind, T::KIND)));
        }
        serde_json::from_value(self.document.clone()).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexRecord {
    pub kind: ArtifactKind,
    pub id: Id,
    pub version: String,
    pub tags: BTreeSet<String>,
}

/// Raw persistence underneath a [`Library`].
pub trait Backend: Send + Sync {
    fn write(&self, record: &IndexRecord, document: &[u8]) -> Result<()>;
    fn read(&self, kind: ArtifactKind, id: &Id) -> Result<Option<(IndexRecord, Vec<u8>)>>;
    fn index(&self) -> Result<Vec<IndexRecord>>;
}

type Stored = BTreeMap<(ArtifactKind, Id), (IndexRecord, Vec<u8>)>;

#[derive(Default)]
pub struct MemoryBackend {
    entries: Mutex<Stored>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overwrites stored bytes without touching the index; for tests.
    pub fn tamper(&self, kind: ArtifactKind, id: &Id, bytes: Vec<u8>) {
        if let Some(entry) = self.entries.lock().expect("memory backend").get_mut(&(kind, id.clone())) {
            entry.1 = bytes;
        }
    }
}

impl Backend for MemoryBackend {
    fn write(&self, record: &IndexRecord, document: &[u8]) -> Result<()> {
        self.entries
            .lock()
            .expect("memory backend")
            .insert((record.kind, record.id.clone()), (record.clone(), document.to_vec()));
        Ok(())
    }

    fn read(&self, kind: ArtifactKind, id: &Id) -> Result<Option<(IndexRecord, Vec<u8>)>> {
        Ok(self.entries.lock().expect("memory backend").get(&(kind, id.clone())).cloned())
    }

    fn index(&self) -> Result<Vec<IndexRecord>> {
        Ok(self.entries.lock().expect("memory backend").values().map(|(r, _)| r.clone()).collect())
    }
}

/// Directory of JSON files plus an index file.
pub struct FsBackend {
    root: PathBuf,
    index: Mutex<BTreeMap<(ArtifactKind, Id), IndexRecord>>,
}

fn storage(e: impl fmt::Display) -> Error {
    Error::StorageFailure(e.to_string())
}

impl FsBackend {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(storage)?;
        let index_path = root.join("index.json");
        let mut index = BTreeMap::new();
        if index_path.exists() {
            let raw = fs::read(&index_path).map_err(storage)?;
            let records: Vec<IndexRecord> =
                serde_json::from_slice(&raw).map_err(|e| Error::StorageFailure(format!("index.json: {e}")))?;
            for record in records {
                index.insert((record.kind, record.id.clone()), record);
            }
        }
        Ok(Self { root, index: Mutex::new(index) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn document_path(&self, kind: ArtifactKind, id: &Id) -> PathBuf {
        self.root.join(kind.as_str()).join(format!("{id}.json"))
    }

    fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = path.parent().expect("documents live in a directory");
        fs::create_dir_all(dir).map_err(storage)?;
        let tmp = path.with_extension("json.tmp");
        {
            let mut file = fs::File::create(&tmp).map_err(storage)?;
            file.write_all(bytes).map_err(storage)?;
            file.sync_all().map_err(storage)?;
        }
        fs::rename(&tmp, path).map_err(storage)
    }
}

impl Backend for FsBackend {
    fn write(&self, record: &IndexRecord, document: &[u8]) -> Result<()> {
        let mut index = self.index.lock().expect("fs index");
        Self::write_atomically(&self.document_path(record.kind, &record.id), document)?;
        index.insert((record.kind, record.id.clone()), record.clone());
        let records: Vec<&IndexRecord> = index.values().collect();
        let bytes = canonical::to_canonical_string(&records)?;
        Self::write_atomically(&self.root.join("index.json"), bytes.as_bytes())
    }

    fn read(&self, kind: ArtifactKind, id: &Id) -> Result<Option<(IndexRecord, Vec<u8>)>> {
        let Some(record) = self.index.lock().expect("fs index").get(&(kind, id.clone())).cloned() else {
            return Ok(None);
        };
        let bytes = fs::read(self.document_path(kind, id)).map_err(storage)?;
        Ok(Some((record, bytes)))
    }

    fn index(&self) -> Result<Vec<IndexRecord>> {
        Ok(self.index.lock().expect("fs index").values().cloned().collect())
    }
}

pub struct Library {
    backend: Box<dyn Backend>,
}

impl Library {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self { backend: Box::new(backend) }
    }

    pub fn in_memory() -> Self {
        Self::new(MemoryBackend::new())
    }

    pub fn open_dir(root: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(FsBackend::open(root)?))
    }

    /// Validates and stores an entry; returns its content version.
    pub fn save_artifact(&self, entry: &LibraryEntry) -> Result<String> {
        let report = validate_document(entry.kind, &entry.document);
        if !report.is_valid() {
            return Err(Error::ValidationFailed(report));
        }
        let bytes = canonical::canonicalize(&entry.document);
        let version = canonical::hash_bytes(bytes.as_bytes());
        let record = IndexRecord { kind: entry.kind, id: entry.id.clone(), version: version.clone(), tags: entry.tags.clone() };
        self.backend.write(&record, bytes.as_bytes())?;
        Ok(version)
    }

    pub fn save<T: Artifact>(&self, id: &Id, artifact: &T) -> Result<String> {
        self.save_artifact(&LibraryEntry::from_artifact(id.clone(), artifact)?)
    }

    pub fn load_artifact(&self, kind: ArtifactKind, id: &Id) -> Result<LibraryEntry> {
        let Some((record, bytes)) = self.backend.read(kind, id)? else {
            return Err(Error::not_found(kind.as_str(), id.as_str()));
        };
        if canonical::hash_bytes(&bytes) != record.version {
            return Err(Error::CorruptDocument(format!("{kind}/{id}")));
        }
        let document: Value = serde_json::from_slice(&bytes).map_err(|_| Error::CorruptDocument(format!("{kind}/{id}")))?;
        Ok(LibraryEntry { id: record.id, kind, tags: record.tags, version: record.version, document })
    }

    pub fn load<T: Artifact>(&self, id: &Id) -> Result<T> {
        self.load_artifact(T::KIND, id)?.decode()
    }

    /// Entries whose tags include every query tag, sorted by id (then kind).
    pub fn search_library(&self, kind: Option<ArtifactKind>, tags: &[String]) -> Result<Vec<IndexRecord>> {
        let mut found: Vec<IndexRecord> = self
            .backend
            .index()?
            .into_iter()
            .filter(|r| kind.is_none_or(|k| r.kind == k))
            .filter(|r| tags.iter().all(|t| r.tags.contains(t)))
            .collect();
        found.sort_by(|a, b| a.id.cmp(&b.id).then(a.kind.cmp(&b.kind)));
        Ok(found)
    }
}

/// Decodes `document` as `kind` and runs that kind's validation.
pub fn validate_document(kind: ArtifactKind, document: &Value) -> ValidationReport {
    fn run<T: Artifact>(document: &Value) -> ValidationReport {
        match serde_json::from_value::<T>(document.clone()) {
            Ok(artifact) => artifact.check(),
            Err(e) => {
                let mut report = ValidationReport::new();
                report.push("malformed", Vec::<String>::new(), e.to_string());
                report
            }
        }
    }
    match kind {
        ArtifactKind::Abstract => run::<AbstractSocialProtocol>(document),
        ArtifactKind::Implemented => run::<ImplementedSocialProtocol>(document),
        ArtifactKind::Process => run::<SocialProcess>(document),
        ArtifactKind::Environment => run::<SocialEnvironment>(document),
    }
}
