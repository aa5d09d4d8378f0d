//! On-disk topic store driven by a persistence descriptor.
//!
//! A store directory holds one record file per type (`<type>.rec`), an
//! id → offset table per type (`<type>.idx`), the descriptor it was written
//! with, an optional index snapshot and a `MANIFEST` of file sizes and
//! checksums. All integers are little-endian.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::extract::DateFact;
use crate::index::{DecodeError, IndexSnapshot};
use crate::topicmap::{Association, Directionality, Endpoint, Occurrence, Topic, TopicMap};

const REC_MAGIC: &[u8; 8] = b"CNDREC01";
const IDX_MAGIC: &[u8; 8] = b"CNDIDX01";
const MANIFEST_HEADER: &str = "conditor-store 1";
pub const MANIFEST: &str = "MANIFEST";
pub const DESCRIPTOR_FILE: &str = "descriptor";
pub const INDEX_FILE: &str = "index.bin";

/// Known types and their fields, in record order. The first field is the key.
const SCHEMA: &[(&str, &[&str])] = &[
    (
        "Topic",
        &["id", "base_name", "variants", "instance_of", "shortdesc", "body", "date_facts", "occurrences"],
    ),
    ("DateFact", &["topic", "role", "location", "day", "month", "year"]),
    ("Occurrence", &["topic", "role_spec", "resource_data"]),
    ("Association", &["source", "target", "role", "directionality"]),
    ("UnresolvedRef", &["source", "term"]),
];
const REQUIRED_TYPES: &[&str] = &["Topic", "DateFact", "Occurrence", "Association"];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("descriptor line {line}: {message}")]
    Descriptor { line: usize, message: String },
    #[error("descriptor names unknown fields: {}", .0.join(", "))]
    UnknownFields(Vec<String>),
    #[error("integrity error{}: {message}", .id.map(|i| format!(" in record {i}")).unwrap_or_default())]
    Integrity { id: Option<u64>, message: String },
    #[error("index: {0}")]
    Index(#[from] DecodeError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn integrity(id: Option<u64>, message: impl Into<String>) -> StoreError {
    StoreError::Integrity {
        id,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub persist: bool,
    pub key: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PersistenceDescriptor {
    types: BTreeMap<String, Vec<FieldSpec>>,
}

impl PersistenceDescriptor {
    pub fn default_descriptor() -> Self {
        Self::parse(include_str!("../resources/default.store")).expect("shipped descriptor is valid")
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let mut types: BTreeMap<String, Vec<FieldSpec>> = BTreeMap::new();
        let mut current: Option<String> = None;
        let mut unknown = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| StoreError::Descriptor { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            let words: Vec<&str> = content.split_whitespace().collect();
            match words.as_slice() {
                [] => {}
                ["type", name] => {
                    if types.contains_key(*name) {
                        return Err(err(format!("type {name} declared twice")));
                    }
                    if !SCHEMA.iter().any(|(t, _)| t == name) {
                        return Err(err(format!("unknown type {name}")));
                    }
                    types.insert(name.to_string(), Vec::new());
                    current = Some(name.to_string());
                }
                ["field", name, flags @ ..] => {
                    let Some(ty) = &current else {
                        return Err(err("field outside a type stanza".into()));
                    };
                    let mut spec = FieldSpec {
                        name: name.to_string(),
                        persist: true,
                        key: false,
                    };
                    for flag in flags {
                        match *flag {
                            "persist" => spec.persist = true,
                            "skip" => spec.persist = false,
                            "key" => spec.key = true,
                            other => return Err(err(format!("unknown flag {other}"))),
                        }
                    }
                    let fields = types.get_mut(ty).expect("current type exists");
                    if !schema_fields(ty).contains(name) {
                        unknown.push(format!("{ty}.{name}"));
                        continue;
                    }
                    if fields.iter().any(|f| f.name == *name) {
                        return Err(err(format!("field {ty}.{name} listed twice")));
                    }
                    fields.push(spec);
                }
                _ => return Err(err(format!("cannot parse {content:?}"))),
            }
        }
        if !unknown.is_empty() {
            return Err(StoreError::UnknownFields(unknown));
        }
        let desc = PersistenceDescriptor { types };
        desc.validate()?;
        Ok(desc)
    }

    fn validate(&self) -> Result<(), StoreError> {
        let err = |message: String| StoreError::Descriptor { line: 0, message };
        for ty in REQUIRED_TYPES {
            if !self.types.contains_key(*ty) {
                return Err(err(format!("descriptor does not cover {ty}")));
            }
        }
        for (ty, fields) in &self.types {
            let keys: Vec<&FieldSpec> = fields.iter().filter(|f| f.key).collect();
            let expected = schema_fields(ty)[0];
            match keys.as_slice() {
                [k] if k.name == expected && k.persist => {}
                [k] if k.name == expected => return Err(err(format!("key {ty}.{expected} cannot be skipped"))),
                [k] => return Err(err(format!("key of {ty} must be {expected}, not {}", k.name))),
                _ => return Err(err(format!("{ty} needs exactly one key field, found {}", keys.len()))),
            }
        }
        Ok(())
    }

    /// A copy with one field switched to `skip`.
    pub fn without(&self, ty: &str, field: &str) -> Self {
        let mut out = self.clone();
        if let Some(f) = out.types.get_mut(ty).and_then(|fs| fs.iter_mut().find(|f| f.name == field)) {
            if !f.key {
                f.persist = false;
            }
        }
        out
    }

    pub fn covers(&self, ty: &str) -> bool {
        self.types.contains_key(ty)
    }

    pub fn persists(&self, ty: &str, field: &str) -> bool {
        self.types
            .get(ty)
            .and_then(|fs| fs.iter().find(|f| f.name == field))
            .is_some_and(|f| f.persist)
    }

    /// Every (type, non-key field) pair this descriptor persists.
    pub fn persisted_fields(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (ty, fields) in &self.types {
            for f in fields.iter().filter(|f| f.persist && !f.key) {
                out.push((ty.clone(), f.name.clone()));
            }
        }
        out
    }

    /// Canonical text form; parses back to an equal descriptor.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (ty, fields) in &self.types {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "type {ty}");
            for f in fields {
                let _ = writeln!(
                    out,
                    "field {} {}{}",
                    f.name,
                    if f.persist { "persist" } else { "skip" },
                    if f.key { " key" } else { "" }
                );
            }
        }
        out
    }
}

fn schema_fields(ty: &str) -> &'static [&'static str] {
    SCHEMA.iter().find(|(t, _)| *t == ty).map(|(_, f)| *f).unwrap_or(&[])
}

fn file_stem(ty: &str) -> String {
    ty.to_ascii_lowercase()
}

/// Field-by-field record encoder; fields the descriptor skips are omitted.
struct Enc<'a> {
    desc: &'a PersistenceDescriptor,
    ty: &'a str,
    buf: Vec<u8>,
}

impl Enc<'_> {
    fn on(&self, field: &str) -> bool {
        self.desc.persists(self.ty, field)
    }

    fn u64(&mut self, field: &str, v: u64) {
        if self.on(field) {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn u32(&mut self, field: &str, v: u32) {
        if self.on(field) {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn raw_str(&mut self, s: &str) {
        self.buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn str(&mut self, field: &str, s: &str) {
        if self.on(field) {
            self.raw_str(s);
        }
    }

    fn opt_str(&mut self, field: &str, s: Option<&str>) {
        if self.on(field) {
            match s {
                None => self.buf.push(0),
                Some(s) => {
                    self.buf.push(1);
                    self.raw_str(s);
                }
            }
        }
    }

    fn opt_u8(&mut self, field: &str, v: Option<u8>) {
        if self.on(field) {
            match v {
                None => self.buf.extend_from_slice(&[0, 0]),
                Some(v) => self.buf.extend_from_slice(&[1, v]),
            }
        }
    }

    fn strs(&mut self, field: &str, v: &[String]) {
        if self.on(field) {
            self.buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
            for s in v {
                self.raw_str(s);
            }
        }
    }
}

struct Dec<'a> {
    desc: &'a PersistenceDescriptor,
    ty: &'a str,
    buf: &'a [u8],
    id: u64,
}

impl<'a> Dec<'a> {
    fn on(&self, field: &str) -> bool {
        self.desc.persists(self.ty, field)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        if self.buf.len() < n {
            return Err(integrity(Some(self.id), format!("truncated {} record", self.ty)));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn raw_u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn raw_str(&mut self) -> Result<String, StoreError> {
        let n = self.raw_u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| integrity(Some(self.id), "invalid UTF-8"))
    }

    fn u64(&mut self, field: &str) -> Result<u64, StoreError> {
        if !self.on(field) {
            return Ok(0);
        }
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self, field: &str) -> Result<u32, StoreError> {
        if !self.on(field) {
            return Ok(0);
        }
        self.raw_u32()
    }

    fn str(&mut self, field: &str) -> Result<String, StoreError> {
        if !self.on(field) {
            return Ok(String::new());
        }
        self.raw_str()
    }

    fn tag(&mut self) -> Result<bool, StoreError> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            t => Err(integrity(Some(self.id), format!("bad tag {t}"))),
        }
    }

    fn opt_str(&mut self, field: &str) -> Result<Option<String>, StoreError> {
        if !self.on(field) || !self.tag()? {
            return Ok(None);
        }
        self.raw_str().map(Some)
    }

    fn opt_u8(&mut self, field: &str) -> Result<Option<u8>, StoreError> {
        if !self.on(field) {
            return Ok(None);
        }
        let present = self.tag()?;
        let v = self.take(1)?[0];
        Ok(present.then_some(v))
    }

    fn strs(&mut self, field: &str) -> Result<Vec<String>, StoreError> {
        if !self.on(field) {
            return Ok(Vec::new());
        }
        let n = self.raw_u32()?;
        (0..n).map(|_| self.raw_str()).collect()
    }

    fn finish<T>(self, value: T) -> Result<T, StoreError> {
        if self.buf.is_empty() {
            Ok(value)
        } else {
            Err(integrity(Some(self.id), format!("trailing bytes in {} record", self.ty)))
        }
    }
}

/// Records of one type, grouped by key, ready to be laid out.
struct TypeFile {
    ty: &'static str,
    records: Vec<(u64, Vec<u8>)>,
}

fn encode_map(map: &TopicMap, desc: &PersistenceDescriptor) -> Vec<TypeFile> {
    let enc = |ty: &'static str| Enc { desc, ty, buf: Vec::new() };
    let mut files: Vec<TypeFile> = SCHEMA
        .iter()
        .filter(|(ty, _)| desc.covers(ty))
        .map(|(ty, _)| TypeFile { ty, records: Vec::new() })
        .collect();
    let mut push = |ty: &str, key: u64, buf: Vec<u8>| {
        if let Some(f) = files.iter_mut().find(|f| f.ty == ty) {
            f.records.push((key, buf));
        }
    };
    for t in map.topics.values() {
        let mut e = enc("Topic");
        e.u64("id", t.id);
        e.str("base_name", &t.base_name);
        e.strs("variants", &t.variants);
        e.u64("instance_of", t.instance_of);
        e.str("shortdesc", &t.shortdesc);
        e.str("body", &t.body);
        push("Topic", t.id, e.buf);
        if desc.persists("Topic", "date_facts") {
            for d in &t.date_facts {
                let mut e = enc("DateFact");
                e.u64("topic", t.id);
                e.str("role", &d.role);
                e.opt_str("location", d.location.as_deref());
                e.opt_u8("day", d.day);
                e.opt_u8("month", d.month);
                e.u32("year", d.year);
                push("DateFact", t.id, e.buf);
            }
        }
        if desc.persists("Topic", "occurrences") {
            for o in &t.occurrences {
                let mut e = enc("Occurrence");
                e.u64("topic", t.id);
                e.str("role_spec", &o.role_spec);
                e.str("resource_data", &o.resource_data);
                push("Occurrence", t.id, e.buf);
            }
        }
    }
    let mut assocs: Vec<&Association> = map.associations.iter().collect();
    assocs.sort_by_key(|a| a.source);
    for a in assocs {
        let mut e = enc("Association");
        e.u64("source", a.source);
        if e.on("target") {
            match &a.target {
                Endpoint::Topic(id) => {
                    e.buf.push(0);
                    e.buf.extend_from_slice(&id.to_le_bytes());
                }
                Endpoint::Unresolved(name) => {
                    e.buf.push(1);
                    e.raw_str(name);
                }
            }
        }
        e.str("role", &a.role);
        if e.on("directionality") {
            e.buf.push(match a.directionality {
                Directionality::OneWay => 0,
                Directionality::TwoWay => 1,
            });
        }
        push("Association", a.source, e.buf);
    }
    let mut refs: Vec<&(u64, String)> = map.unresolved_refs.iter().collect();
    refs.sort_by_key(|r| r.0);
    for (source, term) in refs {
        let mut e = enc("UnresolvedRef");
        e.u64("source", *source);
        e.str("term", term);
        push("UnresolvedRef", *source, e.buf);
    }
    files
}

/// Lay out a record file and its id → (offset, count) table.
fn layout(file: &TypeFile) -> (Vec<u8>, Vec<u8>) {
    let mut rec = Vec::new();
    rec.extend_from_slice(REC_MAGIC);
    rec.extend_from_slice(&(file.records.len() as u32).to_le_bytes());
    let mut table: Vec<(u64, u64, u32)> = Vec::new();
    for (key, payload) in &file.records {
        let offset = rec.len() as u64;
        match table.last_mut() {
            Some(entry) if entry.0 == *key => entry.2 += 1,
            _ => table.push((*key, offset, 1)),
        }
        rec.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        rec.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
        rec.extend_from_slice(payload);
    }
    let mut idx = Vec::new();
    idx.extend_from_slice(IDX_MAGIC);
    idx.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (key, offset, count) in table {
        idx.extend_from_slice(&key.to_le_bytes());
        idx.extend_from_slice(&offset.to_le_bytes());
        idx.extend_from_slice(&count.to_le_bytes());
    }
    (rec, idx)
}

/// Write `map` (and optionally an index snapshot) as a store directory at
/// `path`, replacing any previous store there. The new store is assembled in
/// a sibling temporary directory and renamed into place.
pub fn persist(
    map: &TopicMap,
    desc: &PersistenceDescriptor,
    path: &Path,
    index: Option<&IndexSnapshot>,
) -> Result<Store, StoreError> {
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for tf in encode_map(map, desc) {
        let (rec, idx) = layout(&tf);
        files.insert(format!("{}.rec", file_stem(tf.ty)), rec);
        files.insert(format!("{}.idx", file_stem(tf.ty)), idx);
    }
    files.insert(DESCRIPTOR_FILE.to_string(), desc.to_text().into_bytes());
    if let Some(index) = index {
        files.insert(INDEX_FILE.to_string(), index.to_bytes());
    }
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    for (name, bytes) in &files {
        let _ = writeln!(manifest, "file {name} {} {:08x}", bytes.len(), crc32fast::hash(bytes));
    }
    files.insert(MANIFEST.to_string(), manifest.into_bytes());

    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    let name = path
        .file_name()
        .ok_or_else(|| StoreError::Io {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::InvalidInput, "store path has no file name"),
        })?
        .to_string_lossy()
        .into_owned();
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    fs::create_dir(&tmp).map_err(io_err(&tmp))?;
    for (file, bytes) in &files {
        let p = tmp.join(file);
        fs::write(&p, bytes).map_err(io_err(&p))?;
    }
    if path.exists() {
        let old = parent.join(format!(".{name}.old-{}", std::process::id()));
        fs::rename(path, &old).map_err(io_err(path))?;
        fs::rename(&tmp, path).map_err(io_err(path))?;
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    } else {
        fs::rename(&tmp, path).map_err(io_err(path))?;
    }
    Store::from_files(path.to_path_buf(), files)
}

/// An open, immutable view of a store directory.
#[derive(Debug, Clone)]
pub struct Store {
    path: PathBuf,
    descriptor: PersistenceDescriptor,
    records: BTreeMap<String, Vec<u8>>,
    tables: BTreeMap<String, BTreeMap<u64, (u64, u32)>>,
    index: Option<Vec<u8>>,
}

impl Store {
    pub fn open(path: &Path) -> Result<Store, StoreError> {
        let manifest_path = path.join(MANIFEST);
        let manifest = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let mut lines = manifest.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(integrity(None, "unrecognized MANIFEST header"));
        }
        let mut files = BTreeMap::new();
        for line in lines {
            let parts: Vec<&str> = line.split(' ').collect();
            let ["file", name, len, crc] = parts.as_slice() else {
                return Err(integrity(None, format!("bad MANIFEST line {line:?}")));
            };
            if name.contains('/') || name.contains('\\') || name.starts_with('.') {
                return Err(integrity(None, format!("bad file name {name:?}")));
            }
            let p = path.join(name);
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            if len.parse::<usize>().ok() != Some(bytes.len()) {
                return Err(integrity(None, format!("{name}: size differs from MANIFEST")));
            }
            // record files are checked record by record on access
            if !name.ends_with(".rec") && u32::from_str_radix(crc, 16).ok() != Some(crc32fast::hash(&bytes)) {
                return Err(integrity(None, format!("{name}: checksum differs from MANIFEST")));
            }
            files.insert(name.to_string(), bytes);
        }
        Store::from_files(path.to_path_buf(), files)
    }

    fn from_files(path: PathBuf, mut files: BTreeMap<String, Vec<u8>>) -> Result<Store, StoreError> {
        files.remove(MANIFEST);
        let desc_bytes = files
            .remove(DESCRIPTOR_FILE)
            .ok_or_else(|| integrity(None, "descriptor file missing"))?;
        let descriptor = PersistenceDescriptor::parse(
            std::str::from_utf8(&desc_bytes).map_err(|_| integrity(None, "descriptor is not UTF-8"))?,
        )?;
        let index = files.remove(INDEX_FILE);
        let mut records = BTreeMap::new();
        let mut tables = BTreeMap::new();
        for (ty, _) in SCHEMA.iter().filter(|(ty, _)| descriptor.covers(ty)) {
            let stem = file_stem(ty);
            let rec = files
                .remove(&format!("{stem}.rec"))
                .ok_or_else(|| integrity(None, format!("{stem}.rec missing")))?;
            let idx = files
                .remove(&format!("{stem}.idx"))
                .ok_or_else(|| integrity(None, format!("{stem}.idx missing")))?;
            if rec.len() < 12 || &rec[..8] != REC_MAGIC {
                return Err(integrity(None, format!("{stem}.rec: bad header")));
            }
            tables.insert(ty.to_string(), parse_table(&idx, &stem)?);
            records.insert(ty.to_string(), rec);
        }
        Ok(Store {
            path,
            descriptor,
            records,
            tables,
            index,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn descriptor(&self) -> &PersistenceDescriptor {
        &self.descriptor
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.tables.get("Topic").into_iter().flat_map(|t| t.keys().copied())
    }

    pub fn index(&self) -> Result<Option<IndexSnapshot>, StoreError> {
        match &self.index {
            Some(bytes) => Ok(Some(IndexSnapshot::from_bytes(bytes)?)),
            None => Ok(None),
        }
    }

    /// Payloads of all records of `ty` stored under `key`, checksum-verified.
    fn payloads(&self, ty: &str, key: u64) -> Result<Vec<&[u8]>, StoreError> {
        let (Some(table), Some(rec)) = (self.tables.get(ty), self.records.get(ty)) else {
            return Ok(Vec::new());
        };
        let Some(&(offset, count)) = table.get(&key) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::with_capacity(count as usize);
        let mut pos = offset as usize;
        for _ in 0..count {
            let header = rec
                .get(pos..pos + 8)
                .ok_or_else(|| integrity(Some(key), format!("{ty} record past end of file")))?;
            let len = u32::from_le_bytes(header[..4].try_into().unwrap()) as usize;
            let crc = u32::from_le_bytes(header[4..].try_into().unwrap());
            let payload = rec
                .get(pos + 8..pos + 8 + len)
                .ok_or_else(|| integrity(Some(key), format!("{ty} record past end of file")))?;
            if crc32fast::hash(payload) != crc {
                return Err(integrity(Some(key), format!("{ty} record checksum mismatch")));
            }
            out.push(payload);
            pos += 8 + len;
        }
        Ok(out)
    }

    fn dec<'a>(&'a self, ty: &'a str, buf: &'a [u8], id: u64) -> Dec<'a> {
        Dec {
            desc: &self.descriptor,
            ty,
            buf,
            id,
        }
    }

    /// Look a topic up by id. `Ok(None)` means the id is not in the store.
    pub fn get_topic(&self, id: u64) -> Result<Option<Topic>, StoreError> {
        let payloads = self.payloads("Topic", id)?;
        let Some(payload) = payloads.first() else {
            return Ok(None);
        };
        let mut d = self.dec("Topic", payload, id);
        let stored_id = d.u64("id")?;
        if stored_id != id {
            return Err(integrity(Some(id), format!("record holds topic {stored_id}")));
        }
        let base_name = d.str("base_name")?;
        let variants = d.strs("variants")?;
        let instance_of = d.u64("instance_of")?;
        let shortdesc = d.str("shortdesc")?;
        let body = d.str("body")?;
        d.finish(())?;

        let mut date_facts = Vec::new();
        if self.descriptor.persists("Topic", "date_facts") {
            for p in self.payloads("DateFact", id)? {
                let mut d = self.dec("DateFact", p, id);
                d.u64("topic")?;
                let fact = DateFact {
                    role: d.str("role")?,
                    location: d.opt_str("location")?,
                    day: d.opt_u8("day")?,
                    month: d.opt_u8("month")?,
                    year: d.u32("year")?,
                };
                date_facts.push(d.finish(fact)?);
            }
        }
        let mut occurrences = Vec::new();
        if self.descriptor.persists("Topic", "occurrences") {
            for p in self.payloads("Occurrence", id)? {
                let mut d = self.dec("Occurrence", p, id);
                d.u64("topic")?;
                let occ = Occurrence {
                    role_spec: d.str("role_spec")?,
                    resource_data: d.str("resource_data")?,
                };
                occurrences.push(d.finish(occ)?);
            }
        }
        Ok(Some(Topic {
            id,
            base_name,
            variants,
            instance_of,
            shortdesc,
            body,
            date_facts,
            occurrences,
        }))
    }

    /// Associations whose source is `id`.
    pub fn associations_from(&self, id: u64) -> Result<Vec<Association>, StoreError> {
        let mut out = Vec::new();
        for p in self.payloads("Association", id)? {
            let mut d = self.dec("Association", p, id);
            let source = d.u64("source")?;
            let target = if d.on("target") {
                if d.tag()? {
                    Endpoint::Unresolved(d.raw_str()?)
                } else {
                    Endpoint::Topic(u64::from_le_bytes(d.take(8)?.try_into().unwrap()))
                }
            } else {
                Endpoint::Unresolved(String::new())
            };
            let role = d.str("role")?;
            let directionality = if d.on("directionality") {
                if d.tag()? {
                    Directionality::TwoWay
                } else {
                    Directionality::OneWay
                }
            } else {
                Directionality::OneWay
            };
            out.push(d.finish(Association {
                source,
                target,
                role,
                directionality,
            })?);
        }
        Ok(out)
    }

    /// Reconstruct the whole map.
    pub fn load(&self) -> Result<TopicMap, StoreError> {
        let mut map = TopicMap::default();
        for id in self.topic_ids() {
            let topic = self.get_topic(id)?.expect("id comes from the table");
            map.topics.insert(id, topic);
        }
        let sources: BTreeSet<u64> = self.tables.get("Association").into_iter().flat_map(|t| t.keys().copied()).collect();
        for source in sources {
            map.associations.extend(self.associations_from(source)?);
        }
        if let Some(table) = self.tables.get("UnresolvedRef") {
            for &source in table.keys() {
                for p in self.payloads("UnresolvedRef", source)? {
                    let mut d = self.dec("UnresolvedRef", p, source);
                    let s = d.u64("source")?;
                    let term = d.str("term")?;
                    map.unresolved_refs.push(d.finish((s, term))?);
                }
            }
        }
        Ok(map)
    }
}

fn parse_table(idx: &[u8], stem: &str) -> Result<BTreeMap<u64, (u64, u32)>, StoreError> {
    let bad = || integrity(None, format!("{stem}.idx is malformed"));
    if idx.len() < 12 || &idx[..8] != IDX_MAGIC {
        return Err(bad());
    }
    let n = u32::from_le_bytes(idx[8..12].try_into().unwrap()) as usize;
    let body = &idx[12..];
    if body.len() != n * 20 {
        return Err(bad());
    }
    let mut table = BTreeMap::new();
    for chunk in body.chunks_exact(20) {
        let key = u64::from_le_bytes(chunk[..8].try_into().unwrap());
        let offset = u64::from_le_bytes(chunk[8..16].try_into().unwrap());
        let count = u32::from_le_bytes(chunk[16..].try_into().unwrap());
        if table.insert(key, (offset, count)).is_some() {
            return Err(bad());
        }
    }
    Ok(table)
}
