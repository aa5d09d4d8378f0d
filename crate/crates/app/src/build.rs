//! The `build` command: compile a corpus and write all artifacts.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use conditor_core::emit::emit_xtm_dita;
use conditor_core::extract::RuleSet;
use conditor_core::store::{persist, PersistenceDescriptor};
use conditor_core::Lint;

use crate::pipeline::compile;

pub const TOPICMAP_FILE: &str = "topicmap.xml";
pub const STORE_DIR: &str = "store";
pub const LOCK_FILE: &str = "build.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    EntryErrors = 1,
    Fatal = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BuildReport {
    pub topics: usize,
    pub associations: usize,
    pub unresolved: usize,
    pub facts: usize,
    pub entry_errors: usize,
    pub lints: Vec<Lint>,
}

impl BuildReport {
    pub fn status(&self) -> ExitStatus {
        if self.entry_errors > 0 {
            ExitStatus::EntryErrors
        } else {
            ExitStatus::Success
        }
    }
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "topics: {}", self.topics)?;
        writeln!(f, "associations: {}", self.associations)?;
        writeln!(f, "unresolved references: {}", self.unresolved)?;
        writeln!(f, "facts: {}", self.facts)?;
        writeln!(f, "entry errors: {}", self.entry_errors)?;
        writeln!(f, "lints: {}", self.lints.len())?;
        for lint in &self.lints {
            writeln!(f, "  {lint}")?;
        }
        Ok(())
    }
}

pub struct BuildOptions<'a> {
    pub corpus: &'a Path,
    pub rules: Option<&'a Path>,
    pub out: &'a Path,
    pub threads: usize,
}

/// Removes the lock file when the build finishes, successfully or not.
struct BuildLock(PathBuf);

impl BuildLock {
    fn acquire(out: &Path) -> Result<BuildLock> {
        let path = out.join(LOCK_FILE);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .with_context(|| format!("cannot take build lock {} (is another build running?)", path.display()))?;
        Ok(BuildLock(path))
    }
}

impl Drop for BuildLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Any error returned here is fatal (exit status 2); per-entry problems are
/// reported through [`BuildReport::status`].
pub fn cmd_build(opts: &BuildOptions<'_>) -> Result<BuildReport> {
    let corpus = fs::read(opts.corpus).with_context(|| format!("cannot read corpus {}", opts.corpus.display()))?;
    let rules = match opts.rules {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("cannot read rules {}", path.display()))?;
            RuleSet::load_bytes(&bytes).with_context(|| format!("invalid rules file {}", path.display()))?
        }
        None => RuleSet::default_rules(),
    };
    fs::create_dir_all(opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;
    let _lock = BuildLock::acquire(opts.out)?;

    let compiled = compile(&corpus, &rules, opts.threads)?;
    tracing::info!(topics = compiled.map.topics.len(), "corpus compiled");

    let xml_path = opts.out.join(TOPICMAP_FILE);
    let tmp = opts.out.join(format!(".{TOPICMAP_FILE}.tmp"));
    fs::write(&tmp, emit_xtm_dita(&compiled.map)).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, &xml_path).with_context(|| format!("cannot write {}", xml_path.display()))?;

    persist(
        &compiled.map,
        &PersistenceDescriptor::default_descriptor(),
        &opts.out.join(STORE_DIR),
        Some(&compiled.index),
    )?;

    Ok(BuildReport {
        topics: compiled.map.topics.len(),
        associations: compiled.map.associations.len(),
        unresolved: compiled.map.unresolved_refs.len(),
        facts: compiled.fact_count(),
        entry_errors: compiled.entry_errors.len(),
        lints: compiled.lints,
    })
}
