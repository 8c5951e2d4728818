//! JSON-lines dataset manifests. Media paths are stored relative to the
//! manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use avfuse_core::pipeline::ManifestEntry;

use crate::error::{AppError, AppResult, IoContext};

/// A manifest together with the directory its relative paths refer to.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn video_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.video_path)
    }

    pub fn audio_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.audio_path)
    }

    /// Fails listing every entry whose media is missing.
    pub fn check_paths(&self) -> AppResult<()> {
        let dangling: Vec<&str> = self
            .entries
            .iter()
            .filter(|e| !self.video_path(e).is_file() || !self.audio_path(e).is_file())
            .map(|e| e.id.as_str())
            .collect();
        if dangling.is_empty() {
            Ok(())
        } else {
            Err(AppError::validation(format!(
                "{} manifest entries point at missing files: {}",
                dangling.len(),
                dangling.join(", ")
            )))
        }
    }
}

pub fn to_string(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    out
}

pub fn save(entries: &[ManifestEntry], path: &Path) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, to_string(entries)).at(path)
}

/// Parses and validates against `class_names`; duplicate ids are rejected.
pub fn parse(text: &str, path: &Path, class_names: &[&str]) -> AppResult<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line)
            .map_err(|err| AppError::validation(format!("{}:{}: malformed entry: {err}", path.display(), i + 1)))?;
        e.validate(class_names)
            .map_err(|err| AppError::validation(format!("{}:{}: {err}", path.display(), i + 1)))?;
        if !seen.insert(e.id.clone()) {
            return Err(AppError::validation(format!("{}:{}: duplicate id `{}`", path.display(), i + 1, e.id)));
        }
        entries.push(e);
    }
    Ok(entries)
}

/// Loads a manifest and checks that all media exist.
pub fn load(path: &Path, class_names: &[&str]) -> AppResult<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AppError::validation(format!("manifest {} does not exist", path.display()))
        } else {
            AppError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let m = Manifest {
        root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        entries: parse(&text, path, class_names)?,
    };
    m.check_paths()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use avfuse_core::pipeline::{Illumination, Split, CLASS_NAMES};

    fn entry(id: &str, label: usize) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            video_path: format!("videos/{id}.avt"),
            audio_path: format!("audio/{id}.wav"),
            label,
            class_name: CLASS_NAMES[label].into(),
            time_of_day: 600,
            illumination: Illumination::Normal,
            split: Split::Val,
        }
    }

    #[test]
    fn round_trip() {
        let es: Vec<ManifestEntry> = (0..9).map(|l| entry(&format!("c{l}"), l)).collect();
        let text = to_string(&es);
        assert_eq!(parse(&text, Path::new("m"), &CLASS_NAMES).unwrap(), es);
        assert!(text.contains("\"illumination\":\"normal\"") && text.contains("\"split\":\"val\""));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut text = to_string(&[entry("a", 0)]);
        text.push_str("{not json}\n");
        let err = parse(&text, Path::new("m.jsonl"), &CLASS_NAMES).unwrap_err().to_string();
        assert!(err.contains("m.jsonl:2"), "{err}");
        let mut bad = entry("b", 1);
        bad.label = 9;
        let err = parse(&to_string(&[bad]), Path::new("m.jsonl"), &CLASS_NAMES).unwrap_err().to_string();
        assert!(err.contains("m.jsonl:1"), "{err}");
        let dup = to_string(&[entry("a", 0), entry("a", 0)]);
        assert!(parse(&dup, Path::new("m"), &CLASS_NAMES).is_err());
    }

    #[test]
    fn dangling_paths_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        save(&[entry("ghost", 0), entry("spook", 1)], &p).unwrap();
        let err = load(&p, &CLASS_NAMES).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let msg = err.to_string();
        assert!(msg.contains("ghost") && msg.contains("spook"), "{msg}");
    }
}
