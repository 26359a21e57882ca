//! Line-delimited JSON artifacts and prompt directories.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::PromptMap;
use crate::taxonomy::{BenchmarkItem, EnhancedPrompt, VariantKind};

pub const RESULTS: &str = "results.jsonl";
pub const FAILED: &str = "failed.jsonl";
pub const ANALYSES: &str = "analyses.jsonl";
pub const SKIPPED_DIAGNOSIS: &str = "skipped_diagnosis.jsonl";
pub const GROUPS: &str = "groups.jsonl";
pub const ENHANCEMENTS: &str = "enhancements.jsonl";
pub const SKIPPED_SYNTHESIS: &str = "skipped_synthesis.jsonl";
pub const PROMPTS_DIR: &str = "prompts";
pub const PROMPT_MANIFEST: &str = "manifest.tsv";
pub const BASE_PROMPT_FILE: &str = "base.txt";
pub const POLICY: &str = "policy.tsv";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    write_text(path, &out)
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::InvalidDataset {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Reads a dataset, checking that ids are unique and answers non-empty.
pub fn read_dataset(path: &Path) -> Result<Vec<BenchmarkItem>> {
    let text = read_text(path)?;
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::InvalidDataset {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let item: BenchmarkItem = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if item.answer.trim().is_empty() {
            return Err(bad(format!("item {} has an empty answer", item.id)));
        }
        if !seen.insert(item.id.clone()) {
            return Err(bad(format!("duplicate id {}", item.id)));
        }
        items.push(item);
    }
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(items)
}

/// File-name-safe form of a category label.
pub fn slug(category: &str) -> String {
    let s: String = category
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

/// Writes every prompt as `{slug}_{variant}.txt` plus the base prompt and a
/// manifest mapping categories to files.
pub fn write_prompts(dir: &Path, base: &str, prompts: &PromptMap) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    ensure_dir(dir)?;
    write_text(&dir.join(BASE_PROMPT_FILE), base)?;
    let mut manifest = String::from("category\tvariant\tfile\n");
    let mut used: BTreeMap<String, &str> = BTreeMap::new();
    for ((category, variant), prompt) in prompts {
        let file = format!("{}_{}.txt", slug(category), variant.as_str());
        if let Some(other) = used.insert(file.clone(), category) {
            if other != category {
                return Err(Error::InvalidConfig(format!(
                    "categories {other:?} and {category:?} map to the same file {file}"
                )));
            }
        }
        write_text(&dir.join(&file), prompt.full_text())?;
        manifest.push_str(&format!("{category}\t{}\t{file}\n", variant.as_str()));
    }
    write_text(&dir.join(PROMPT_MANIFEST), &manifest)
}

pub fn read_prompts(dir: &Path) -> Result<PromptMap> {
    let base = read_text(&dir.join(BASE_PROMPT_FILE))?;
    let manifest_path = dir.join(PROMPT_MANIFEST);
    let manifest = read_text(&manifest_path)?;
    let mut prompts = PromptMap::new();
    for (i, line) in manifest.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::InvalidDataset {
                path: manifest_path.clone(),
                line: i + 1,
                reason: "expected 3 columns".into(),
            });
        }
        let variant: VariantKind = cols[1].parse()?;
        let full = read_text(&dir.join(cols[2]))?;
        prompts.insert(
            (cols[0].to_string(), variant),
            EnhancedPrompt::from_full_text(&base, variant, &full)?,
        );
    }
    Ok(prompts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        write_text(
            &p,
            "{\"id\":\"1\",\"question\":\"q\",\"answer\":\"a\",\"category\":\"c\"}\n\n",
        )
        .unwrap();
        assert_eq!(read_dataset(&p).unwrap().len(), 1);

        write_text(&p, "{\"id\":\"1\",\"question\":\"q\",\"answer\":\"a\"}\n{\"id\":\"1\",\"question\":\"q\",\"answer\":\"b\"}\n").unwrap();
        assert!(matches!(
            read_dataset(&p),
            Err(Error::InvalidDataset { line: 2, .. })
        ));

        write_text(&p, "{\"id\":\"1\",\"question\":\"q\",\"answer\":\" \"}\n").unwrap();
        assert!(matches!(
            read_dataset(&p),
            Err(Error::InvalidDataset { line: 1, .. })
        ));

        write_text(&p, "not json\n").unwrap();
        assert!(matches!(
            read_dataset(&p),
            Err(Error::InvalidDataset { line: 1, .. })
        ));

        write_text(&p, "").unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::EmptyDataset)));
    }

    #[test]
    fn prompts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = PromptMap::new();
        m.insert(
            ("high school/physics".into(), VariantKind::Concise),
            EnhancedPrompt::new("Base\n", VariantKind::Concise, "## X\n"),
        );
        m.insert(
            ("math".into(), VariantKind::Specific),
            EnhancedPrompt::new("Base\n", VariantKind::Specific, "## Y\n"),
        );
        write_prompts(dir.path(), "Base\n", &m).unwrap();
        assert!(dir.path().join("high_school_physics_concise.txt").exists());
        assert_eq!(read_prompts(dir.path()).unwrap(), m);
    }
}
