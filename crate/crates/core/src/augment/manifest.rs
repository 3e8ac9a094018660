use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of stored proportions (they are rounded to 3 places).
pub const PROPORTION_SUM_TOLERANCE: f64 = 0.005;
/// Tolerance between a stored proportion and `count / total`.
pub const PROPORTION_TOLERANCE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class: String,
    pub count: usize,
    pub proportion: f64,
    /// Sample paths, relative to the manifest's directory unless absolute.
    /// May be empty for count-only manifests.
    #[serde(default)]
    pub files: Vec<String>,
}

/// Per-class sample counts and files. Serialized as a bare JSON list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetManifest {
    pub entries: Vec<ClassEntry>,
}

impl DatasetManifest {
    /// Count-only manifest with exact proportions.
    pub fn from_counts<S: AsRef<str>>(counts: &[(S, usize)]) -> Self {
        let mut m = DatasetManifest {
            entries: counts
                .iter()
                .map(|(name, count)| ClassEntry {
                    class: name.as_ref().to_string(),
                    count: *count,
                    proportion: 0.0,
                    files: Vec::new(),
                })
                .collect(),
        };
        m.recompute_proportions();
        m
    }

    /// Manifest from per-class file lists.
    pub fn from_files(classes: Vec<(String, Vec<String>)>) -> Self {
        let mut m = DatasetManifest {
            entries: classes
                .into_iter()
                .map(|(class, files)| ClassEntry { class, count: files.len(), proportion: 0.0, files })
                .collect(),
        };
        m.recompute_proportions();
        m
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn class_names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.class.as_str()).collect()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.class == name)
    }

    pub fn recompute_proportions(&mut self) {
        let total = self.total();
        for e in &mut self.entries {
            e.proportion = if total == 0 { 0.0 } else { e.count as f64 / total as f64 };
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.total();
        if total == 0 {
            return Err(Error::contract("manifest is empty"));
        }
        let sum: f64 = self.entries.iter().map(|e| e.proportion).sum();
        if (sum - 1.0).abs() > PROPORTION_SUM_TOLERANCE {
            return Err(Error::contract(format!("proportions sum to {sum}")));
        }
        for e in &self.entries {
            if !(0.0..=1.0).contains(&e.proportion) {
                return Err(Error::contract(format!("class `{}` proportion {}", e.class, e.proportion)));
            }
            let exact = e.count as f64 / total as f64;
            if (e.proportion - exact).abs() > PROPORTION_TOLERANCE {
                return Err(Error::contract(format!(
                    "class `{}` proportion {} but count/total = {exact:.5}",
                    e.class, e.proportion
                )));
            }
            if !e.files.is_empty() && e.files.len() != e.count {
                return Err(Error::contract(format!(
                    "class `{}` lists {} files for count {}",
                    e.class,
                    e.files.len(),
                    e.count
                )));
            }
        }
        Ok(())
    }

    /// `(class index, path)` for every listed file, resolved against `root`.
    pub fn samples(&self, root: &Path) -> Vec<(usize, PathBuf)> {
        self.entries
            .iter()
            .enumerate()
            .flat_map(|(ci, e)| e.files.iter().map(move |f| (ci, resolve(root, f))))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingestion { path: path.to_path_buf(), reason: e.to_string() })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn resolve(root: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Reference class counts of the field-collected leaf set and of the set
/// after selective augmentation, with the proportions as published (3 d.p.).
pub mod presets {
    use super::{ClassEntry, DatasetManifest};

    pub const CLASSES: [&str; 7] = [
        "anthracnose",
        "leaf_blight",
        "blight_disease",
        "wheel_spot",
        "white_star",
        "coal_disease",
        "mechanical_damage",
    ];

    pub const SOURCE_COUNTS: [usize; 7] = [4566, 3018, 1711, 276, 1703, 585, 3204];
    pub const SOURCE_PROPORTIONS: [f64; 7] = [0.303, 0.200, 0.114, 0.018, 0.113, 0.039, 0.213];

    pub const AUGMENTED_COUNTS: [usize; 7] = [7076, 4482, 4022, 1834, 3806, 2038, 4786];
    pub const AUGMENTED_PROPORTIONS: [f64; 7] = [0.252, 0.160, 0.143, 0.065, 0.136, 0.073, 0.171];

    /// Training images in the published 9:1 split of the augmented set.
    pub const AUGMENTED_TRAIN_TOTAL: usize = 25_186;
    pub const AUGMENTED_TEST_TOTAL: usize = 2_858;

    fn build(counts: &[usize; 7], proportions: &[f64; 7]) -> DatasetManifest {
        DatasetManifest {
            entries: CLASSES
                .iter()
                .zip(counts)
                .zip(proportions)
                .map(|((c, &n), &p)| ClassEntry { class: c.to_string(), count: n, proportion: p, files: Vec::new() })
                .collect(),
        }
    }

    pub fn source_manifest() -> DatasetManifest {
        build(&SOURCE_COUNTS, &SOURCE_PROPORTIONS)
    }

    pub fn augmented_manifest() -> DatasetManifest {
        build(&AUGMENTED_COUNTS, &AUGMENTED_PROPORTIONS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_preset_totals() {
        let m = presets::source_manifest();
        assert_eq!(m.total(), 15_063);
        m.validate().unwrap();
    }

    #[test]
    fn augmented_preset_totals() {
        let m = presets::augmented_manifest();
        assert_eq!(m.total(), 28_044);
        assert_eq!(presets::AUGMENTED_TRAIN_TOTAL + presets::AUGMENTED_TEST_TOTAL, 28_044);
        m.validate().unwrap();
        for e in &m.entries {
            assert!((e.proportion - e.count as f64 / 28_044.0).abs() <= 0.001, "{}", e.class);
        }
    }

    #[test]
    fn validation_failures() {
        let mut m = DatasetManifest::from_counts(&[("a", 3), ("b", 1)]);
        m.validate().unwrap();
        m.entries[0].proportion = 0.7;
        assert!(m.validate().is_err());
        let mut m = DatasetManifest::from_counts(&[("a", 3), ("b", 1)]);
        m.entries[0].files = vec!["x.png".into()];
        assert!(m.validate().is_err());
        assert!(DatasetManifest::default().validate().is_err());
    }

    #[test]
    fn json_is_a_list() {
        let m = DatasetManifest::from_files(vec![("a".into(), vec!["a/0.png".into()])]);
        let json = serde_json::to_value(&m).unwrap();
        assert!(json.is_array());
        assert_eq!(json[0]["class"], "a");
        assert_eq!(json[0]["files"][0], "a/0.png");
        let back: DatasetManifest = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
    }
}
