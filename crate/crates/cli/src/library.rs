//! Content-addressed pulse storage, one JSON file per entry.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use phononcp::{CompositePulse, Regime, SystemConfig, TargetPreset};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Hex digits of the SHA-256 digest kept in an id.
pub const ID_LENGTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseLibraryEntry {
    pub id: String,
    pub system: SystemConfig,
    pub target: TargetPreset,
    pub regime: Regime,
    pub pulse: CompositePulse,
    pub loss: f64,
    pub created: DateTime<Utc>,
    /// The configuration the pulse was designed with.
    pub provenance: RunConfig,
}

#[derive(Serialize)]
struct HashedContent<'a> {
    system: &'a SystemConfig,
    target: &'a TargetPreset,
    pulse: &'a CompositePulse,
}

/// Digest of the compact JSON of `(system, target, pulse)`. Floats are
/// written in shortest round-trip form, so a reloaded entry hashes the same.
pub fn content_id(system: &SystemConfig, target: &TargetPreset, pulse: &CompositePulse) -> String {
    let canonical = serde_json::to_vec(&HashedContent {
        system,
        target,
        pulse,
    })
    .expect("pulse content is always serializable");
    let digest = Sha256::digest(&canonical);
    let mut id = hex::encode(digest);
    id.truncate(ID_LENGTH);
    id
}

impl PulseLibraryEntry {
    /// Phases are stored in `[0, 2π)`.
    pub fn new(
        system: SystemConfig,
        target: TargetPreset,
        regime: Regime,
        pulse: &CompositePulse,
        loss: f64,
        provenance: RunConfig,
    ) -> Self {
        let pulse = pulse.canonicalized();
        Self {
            id: content_id(&system, &target, &pulse),
            system,
            target,
            regime,
            pulse,
            loss,
            created: Utc::now(),
            provenance,
        }
    }

    pub fn verify(&self) -> CliResult<()> {
        let expected = content_id(&self.system, &self.target, &self.pulse);
        if expected != self.id {
            return Err(CliError::input(format!(
                "library entry {} does not match its content (hash {expected})",
                self.id
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let entry: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        entry.verify()?;
        Ok(entry)
    }
}

pub struct PulseLibrary {
    dir: PathBuf,
}

impl PulseLibrary {
    pub fn new(output_dir: &Path) -> Self {
        Self {
            dir: output_dir.join("library"),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_of(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes the entry unless one with the same id already exists; returns
    /// its path.
    pub fn store(&self, entry: &PulseLibraryEntry) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let path = self.path_of(&entry.id);
        if !path.exists() {
            let text =
                serde_json::to_string_pretty(entry).map_err(|e| CliError::input(e.to_string()))?;
            std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        }
        Ok(path)
    }

    /// Looks an entry up by full id or unique prefix.
    pub fn find(&self, id: &str) -> CliResult<PulseLibraryEntry> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(CliError::input(format!("`{id}` is not a pulse id")));
        }
        let exact = self.path_of(id);
        if exact.is_file() {
            return PulseLibraryEntry::load(&exact);
        }
        let mut matches = Vec::new();
        if let Ok(entries) = std::fs::read_dir(&self.dir) {
            for entry in entries.flatten() {
                let name = entry.file_name();
                let name = name.to_string_lossy();
                if let Some(stem) = name.strip_suffix(".json") {
                    if stem.starts_with(id) {
                        matches.push(entry.path());
                    }
                }
            }
        }
        match matches.len() {
            0 => Err(CliError::input(format!(
                "unknown pulse id `{id}` in {}",
                self.dir.display()
            ))),
            1 => PulseLibraryEntry::load(&matches[0]),
            n => Err(CliError::input(format!(
                "pulse id prefix `{id}` is ambiguous ({n} entries)"
            ))),
        }
    }
}
