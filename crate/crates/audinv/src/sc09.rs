//! Spoken-digit directory loader: `root/<label>/<file>.wav`, optional `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use audinv_core::data::{label_from_name, LabeledDataset, LabeledItem, DIGIT_NAMES, NUM_CLASSES};
use serde::Deserialize;

use crate::wav::load_wav;

/// Optional `manifest.json` in the dataset root pinning the expected file count per class.
#[derive(Debug, Deserialize)]
pub struct DatasetManifest {
    pub counts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub per_class: [usize; NUM_CLASSES],
    pub skipped: usize,
    pub missing_classes: Vec<&'static str>,
}

/// Speaker id from names like `0a2b400e_nohash_0.wav`.
fn speaker_of(file_stem: &str) -> String {
    file_stem.split('_').next().unwrap_or(file_stem).to_string()
}

pub fn load_sc09(root: &Path, length: usize) -> Result<(LabeledDataset, LoadReport)> {
    let mut folders: Vec<(usize, std::path::PathBuf)> = fs::read_dir(root)
        .with_context(|| format!("cannot read dataset directory {}", root.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| label_from_name(&e.file_name().to_string_lossy()).map(|l| (l, e.path())))
        .collect();
    if folders.is_empty() {
        bail!("no classes found in {}", root.display());
    }
    folders.sort();
    let mut report = LoadReport::default();
    let mut items = Vec::new();
    for (label, dir) in &folders {
        let mut files: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        files.sort();
        for path in files {
            match load_wav(&path, length) {
                Ok(clip) => {
                    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    items.push(LabeledItem { clip, label: *label, speaker: speaker_of(&stem) });
                    report.per_class[*label] += 1;
                }
                Err(e) => {
                    log::warn!("skipping {}: {e:#}", path.display());
                    report.skipped += 1;
                }
            }
        }
    }
    report.missing_classes = (0..NUM_CLASSES).filter(|&c| report.per_class[c] == 0).map(|c| DIGIT_NAMES[c]).collect();
    if !report.missing_classes.is_empty() {
        log::warn!("no clips for classes {:?}", report.missing_classes);
    }
    let manifest_path = root.join("manifest.json");
    if manifest_path.exists() {
        let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
            .with_context(|| format!("malformed {}", manifest_path.display()))?;
        for (name, &expected) in &manifest.counts {
            let Some(label) = label_from_name(name) else { bail!("manifest names unknown class {name:?}") };
            let found = report.per_class[label];
            if found != expected {
                bail!("class {name}: manifest expects {expected} clips, found {found}");
            }
        }
    }
    log::info!("loaded {} clips from {} ({} skipped)", items.len(), root.display(), report.skipped);
    let dataset =
        LabeledDataset::new(items, "sc09").with_context(|| format!("no usable clips in {}", root.display()))?;
    Ok((dataset, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use audinv_core::audio::{AudioClip, SAMPLE_RATE};

    #[test]
    fn single_clip_folder() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("three")).unwrap();
        let clip = AudioClip::new(vec![0.25; 8000], SAMPLE_RATE).unwrap();
        crate::wav::save_wav(&dir.path().join("three/abc_nohash_0.wav"), &clip).unwrap();
        fs::write(dir.path().join("three/notes.txt"), "x").unwrap();
        let (data, report) = load_sc09(dir.path(), 16384).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.items[0].label, 3);
        assert_eq!(data.items[0].speaker, "abc");
        assert_eq!(data.items[0].clip.len(), 16384);
        assert!(data.items[0].clip.samples()[8000..].iter().all(|&s| s == 0.0));
        assert_eq!(report.missing_classes.len(), 9);
    }

    #[test]
    fn empty_directory_and_manifest_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_sc09(dir.path(), 100).unwrap_err().to_string();
        assert!(err.contains("no classes found"), "{err}");
        fs::create_dir(dir.path().join("one")).unwrap();
        let clip = AudioClip::new(vec![0.1; 50], SAMPLE_RATE).unwrap();
        crate::wav::save_wav(&dir.path().join("one/a_nohash_0.wav"), &clip).unwrap();
        fs::write(dir.path().join("one/broken.wav"), b"not a wav").unwrap();
        fs::write(dir.path().join("manifest.json"), r#"{"counts": {"one": 2}}"#).unwrap();
        let err = load_sc09(dir.path(), 100).unwrap_err().to_string();
        assert!(err.contains("expects 2"), "{err}");
        fs::write(dir.path().join("manifest.json"), r#"{"counts": {"one": 1}}"#).unwrap();
        let (_, report) = load_sc09(dir.path(), 100).unwrap();
        assert_eq!(report.skipped, 1);
    }
}
