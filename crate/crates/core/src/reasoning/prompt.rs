//! Template registry and prompt assembly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReasoningError;

pub const DEFAULT_TEMPLATE_ID: &str = "geo_reasoning_v1";

const BUILTIN: &[(&str, &str)] = &[(DEFAULT_TEMPLATE_ID, include_str!("../../data/templates/geo_reasoning_v1.txt"))];

/// Rendered in place of `{{answer_format}}`.
pub const ANSWER_FORMAT: &str = "PLACE {COUNTRY, STATE, CITY, STREET}. EXPLANATION.\n\
Leave a field empty when you cannot determine it, for example PLACE {France, , , }.";

const NO_SNIPPETS: &str = "(no external knowledge retrieved)";

/// Named prompt templates. Placeholders are `{{snippets}}` and
/// `{{answer_format}}`; both must appear exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        Self {
            templates: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn insert(&mut self, id: &str, text: String) -> Result<(), ReasoningError> {
        for placeholder in ["{{snippets}}", "{{answer_format}}"] {
            if text.matches(placeholder).count() != 1 {
                return Err(ReasoningError::InvalidTemplate {
                    id: id.to_string(),
                    reason: format!("placeholder {placeholder} must appear exactly once"),
                });
            }
        }
        self.templates.insert(id.to_string(), text);
        Ok(())
    }

    /// Adds every `<id>.txt` in `dir`; files override built-ins of the same id.
    pub fn load_dir(&mut self, dir: &Path) -> Result<(), ReasoningError> {
        let io = |e| ReasoningError::Io {
            path: dir.display().to_string(),
            source: e,
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io)?;
        paths.sort();
        for path in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "txt")) {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let text = std::fs::read_to_string(&path).map_err(|e| ReasoningError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            self.insert(&id, text)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&str, ReasoningError> {
        self.templates
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| ReasoningError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

/// Images for the generator: the thumbnail, then clue crops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePrompt {
    pub thumbnail: PathBuf,
    pub clue_images: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPrompt {
    /// Fully rendered template.
    pub instruction: String,
    pub snippets: Vec<String>,
    pub answer_format_spec: String,
}

fn render_snippets(snippets: &[String]) -> String {
    if snippets.is_empty() {
        return NO_SNIPPETS.to_string();
    }
    snippets
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Keeps the first occurrence of each item.
pub fn dedup_in_order<T: PartialEq + Clone>(items: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for item in items {
        if !out.contains(item) {
            out.push(item.clone());
        }
    }
    out
}

/// Renders the template and pairs it with the images, preserving the
/// given order of clue images and snippets.
pub fn assemble_prompt(
    thumbnail: &Path,
    clue_images: &[PathBuf],
    snippets: &[String],
    registry: &TemplateRegistry,
    template_id: &str,
) -> Result<(ImagePrompt, TextPrompt), ReasoningError> {
    let template = registry.get(template_id)?;
    let instruction = template
        .replace("{{snippets}}", &render_snippets(snippets))
        .replace("{{answer_format}}", ANSWER_FORMAT);
    Ok((
        ImagePrompt {
            thumbnail: thumbnail.to_path_buf(),
            clue_images: clue_images.to_vec(),
        },
        TextPrompt {
            instruction,
            snippets: snippets.to_vec(),
            answer_format_spec: ANSWER_FORMAT.to_string(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_format_has_scaffold() {
        assert!(ANSWER_FORMAT.contains("PLACE {COUNTRY, STATE, CITY, STREET}."));
        let registry = TemplateRegistry::builtin();
        assert!(registry.get(DEFAULT_TEMPLATE_ID).is_ok());
    }

    #[test]
    fn degenerate_retrieval() {
        let registry = TemplateRegistry::builtin();
        let (img, text) = assemble_prompt(Path::new("t.png"), &[], &[], &registry, DEFAULT_TEMPLATE_ID).unwrap();
        assert_eq!(img.thumbnail, Path::new("t.png"));
        assert!(img.clue_images.is_empty());
        assert!(text.snippets.is_empty());
        assert!(text.instruction.contains(ANSWER_FORMAT));
        assert!(text.instruction.contains(NO_SNIPPETS));
        assert!(!text.instruction.contains("{{"));
    }

    #[test]
    fn snippets_in_given_order() {
        let registry = TemplateRegistry::builtin();
        let snippets: Vec<String> = ["Black bollards with white bands.", "Yellow plates.", "Chevrons are red."]
            .map(String::from)
            .to_vec();
        let clues = vec![PathBuf::from("c1.png"), PathBuf::from("c0.png")];
        let (img, text) = assemble_prompt(Path::new("t.png"), &clues, &snippets, &registry, DEFAULT_TEMPLATE_ID).unwrap();
        assert_eq!(img.clue_images, clues);
        assert_eq!(text.snippets, snippets);
        let a = text.instruction.find("1. Black bollards").unwrap();
        let b = text.instruction.find("2. Yellow plates.").unwrap();
        let c = text.instruction.find("3. Chevrons").unwrap();
        assert!(a < b && b < c);
        let (_, again) = assemble_prompt(Path::new("t.png"), &clues, &snippets, &registry, DEFAULT_TEMPLATE_ID).unwrap();
        assert_eq!(again, text);
    }

    #[test]
    fn unknown_and_invalid_templates() {
        let mut registry = TemplateRegistry::builtin();
        assert!(matches!(
            assemble_prompt(Path::new("t"), &[], &[], &registry, "nope"),
            Err(ReasoningError::UnknownTemplate(id)) if id == "nope"
        ));
        assert!(registry.insert("x", "no placeholders".into()).is_err());
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("mine.txt"), "S: {{snippets}} F: {{answer_format}}").unwrap();
        std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        registry.load_dir(dir.path()).unwrap();
        let (_, text) = assemble_prompt(Path::new("t"), &[], &["k".into()], &registry, "mine").unwrap();
        assert_eq!(text.instruction, format!("S: 1. k F: {ANSWER_FORMAT}"));
    }

    #[test]
    fn dedup_keeps_first() {
        assert_eq!(dedup_in_order(&[3, 1, 3, 2, 1]), [3, 1, 2]);
    }
}
