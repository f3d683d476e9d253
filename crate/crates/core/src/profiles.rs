//! Dialect profiles: the background blocks injected into Dialect Agent
//! prompts, plus the registry that loads and validates them.
//!
//! Profiles are stored as JSON Lines, one object per profile, with keys
//! `id`, `display_name`, `phonetics`, `grammar`, `vocabulary` and
//! `cultural_notes`. The registry always contains a synthetic `generic`
//! profile that renders to a bare expert sentence and carries no dialect
//! details; runs use it to measure how much the dialect background itself
//! contributes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved id of the synthetic no-dialect-info profile.
pub const GENERIC_PROFILE_ID: &str = "generic";

/// Exact text `render_profile` produces for the `generic` profile.
pub const GENERIC_PROFILE_TEXT: &str = "You are a linguistics expert in English dialects";

/// Structured linguistic background for one dialect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectProfile {
    pub id: String,
    pub display_name: String,
    #[serde(default)]
    pub phonetics: Vec<String>,
    #[serde(default)]
    pub grammar: Vec<String>,
    #[serde(default)]
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub cultural_notes: Vec<String>,
}

impl DialectProfile {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("profile id is empty".into());
        }
        if self.id.chars().any(char::is_whitespace) {
            return Err(format!("profile id '{}' contains whitespace", self.id));
        }
        if self.display_name.trim().is_empty() {
            return Err(format!("profile '{}' has an empty display_name", self.id));
        }
        let all_empty = self.phonetics.is_empty()
            && self.grammar.is_empty()
            && self.vocabulary.is_empty()
            && self.cultural_notes.is_empty();
        if all_empty {
            return Err(format!(
                "profile '{}' has no bullets in any section",
                self.id
            ));
        }
        for bullet in self
            .phonetics
            .iter()
            .chain(&self.grammar)
            .chain(&self.vocabulary)
            .chain(&self.cultural_notes)
        {
            if bullet.trim().is_empty() {
                return Err(format!("profile '{}' contains an empty bullet", self.id));
            }
        }
        Ok(())
    }
}

fn generic_profile() -> DialectProfile {
    DialectProfile {
        id: GENERIC_PROFILE_ID.to_string(),
        display_name: "English dialects".to_string(),
        phonetics: Vec::new(),
        grammar: Vec::new(),
        vocabulary: Vec::new(),
        cultural_notes: Vec::new(),
    }
}

/// Immutable map of dialect id to profile. Always contains `generic`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileRegistry {
    profiles: BTreeMap<String, DialectProfile>,
}

impl ProfileRegistry {
    /// Builds a registry from concrete profiles, adding the synthetic
    /// `generic` entry. Rejects duplicate ids and the reserved id itself.
    pub fn from_profiles(profiles: Vec<DialectProfile>) -> Result<Self> {
        let mut map = BTreeMap::new();
        map.insert(GENERIC_PROFILE_ID.to_string(), generic_profile());
        for profile in profiles {
            if profile.id == GENERIC_PROFILE_ID {
                return Err(Error::Profile {
                    location: profile.id,
                    message: format!("'{GENERIC_PROFILE_ID}' is reserved for the synthetic profile"),
                });
            }
            profile.validate().map_err(|message| Error::Profile {
                location: profile.id.clone(),
                message,
            })?;
            if map.insert(profile.id.clone(), profile.clone()).is_some() {
                return Err(Error::Profile {
                    location: profile.id,
                    message: "duplicate profile id".into(),
                });
            }
        }
        Ok(ProfileRegistry { profiles: map })
    }

    /// Looks up a profile; unknown ids are an error, never a default.
    pub fn get(&self, id: &str) -> Result<&DialectProfile> {
        self.profiles.get(id).ok_or_else(|| Error::Profile {
            location: id.to_string(),
            message: "unknown dialect id".into(),
        })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.profiles.contains_key(id)
    }

    /// Ids in sorted order, including `generic`.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    /// Concrete (non-generic) profiles in id order.
    pub fn concrete_profiles(&self) -> impl Iterator<Item = &DialectProfile> {
        self.profiles
            .values()
            .filter(|p| p.id != GENERIC_PROFILE_ID)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

/// Loads a JSON Lines profile file into a registry.
pub fn load_profiles(path: impl AsRef<Path>) -> Result<ProfileRegistry> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut profiles = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let profile: DialectProfile =
            serde_json::from_str(&line).map_err(|e| Error::Profile {
                location: format!("{}:{}", path.display(), index + 1),
                message: e.to_string(),
            })?;
        profiles.push(profile);
    }
    ProfileRegistry::from_profiles(profiles)
}

/// Writes the registry's concrete profiles back out as JSON Lines.
/// `load_profiles(write_profiles(registry))` reproduces an equal registry.
pub fn write_profiles(registry: &ProfileRegistry, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for profile in registry.concrete_profiles() {
        serde_json::to_writer(&mut out, profile)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&out)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Renders a profile to the deterministic text block used at the
/// `{dialect_info}` slot: a `Key Features of ...` heading followed by the
/// non-empty bullet sections in fixed order. The `generic` profile renders
/// to [`GENERIC_PROFILE_TEXT`] with no heading.
pub fn render_profile(profile: &DialectProfile) -> String {
    if profile.id == GENERIC_PROFILE_ID {
        return GENERIC_PROFILE_TEXT.to_string();
    }
    let sections: [(&str, &[String]); 4] = [
        ("Phonetics and Pronunciation", &profile.phonetics),
        ("Grammar", &profile.grammar),
        ("Vocabulary", &profile.vocabulary),
        ("Cultural Notes", &profile.cultural_notes),
    ];
    let mut out = format!("Key Features of {}", profile.display_name);
    for (title, bullets) in sections {
        if bullets.is_empty() {
            continue;
        }
        out.push_str("\n\n");
        out.push_str(title);
        out.push(':');
        for bullet in bullets {
            out.push_str("\n- ");
            out.push_str(bullet);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indian() -> DialectProfile {
        DialectProfile {
            id: "indian".into(),
            display_name: "Indian English".into(),
            phonetics: vec![
                "Retroflex consonants influenced by Indian languages.".into(),
                "Variable stress and intonation patterns.".into(),
            ],
            grammar: vec![
                "Use of present continuous for habitual actions (e.g., 'I am knowing').".into(),
            ],
            vocabulary: vec![
                "Incorporation of Hindi, Tamil, Bengali, and other Indian language terms".into(),
            ],
            cultural_notes: vec!["Reflects India's diverse linguistic landscape.".into()],
        }
    }

    #[test]
    fn renders_heading_and_sections_in_order() {
        let text = render_profile(&indian());
        assert!(text.starts_with("Key Features of Indian English\n\n"));
        let phonetics = text.find("Phonetics and Pronunciation:").unwrap();
        let grammar = text.find("Grammar:").unwrap();
        let vocabulary = text.find("Vocabulary:").unwrap();
        let cultural = text.find("Cultural Notes:").unwrap();
        assert!(phonetics < grammar && grammar < vocabulary && vocabulary < cultural);
        assert!(text.contains("- Use of present continuous for habitual actions (e.g., 'I am knowing')."));
    }

    #[test]
    fn rendering_is_deterministic_and_omits_empty_sections() {
        let profile = DialectProfile {
            id: "x".into(),
            display_name: "X English".into(),
            phonetics: vec!["One.".into()],
            grammar: vec![],
            vocabulary: vec![],
            cultural_notes: vec![],
        };
        let a = render_profile(&profile);
        let b = render_profile(&profile);
        assert_eq!(a, b);
        assert_eq!(a, "Key Features of X English\n\nPhonetics and Pronunciation:\n- One.");
        assert!(!a.contains("Grammar:"));
    }

    #[test]
    fn generic_renders_to_exact_ablation_sentence() {
        let registry = ProfileRegistry::from_profiles(vec![]).unwrap();
        let generic = registry.get(GENERIC_PROFILE_ID).unwrap();
        assert_eq!(render_profile(generic), GENERIC_PROFILE_TEXT);
    }

    #[test]
    fn empty_file_yields_registry_with_only_generic() {
        let dir = std::env::temp_dir().join(format!("dialectqa-profiles-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.jsonl");
        fs::write(&path, "").unwrap();
        let registry = load_profiles(&path).unwrap();
        assert_eq!(registry.len(), 1);
        assert!(registry.contains(GENERIC_PROFILE_ID));
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = ProfileRegistry::from_profiles(vec![indian(), indian()]).unwrap_err();
        assert!(err.to_string().contains("duplicate profile id"));
    }

    #[test]
    fn reserved_generic_id_is_rejected() {
        let mut profile = indian();
        profile.id = GENERIC_PROFILE_ID.into();
        let err = ProfileRegistry::from_profiles(vec![profile]).unwrap_err();
        assert!(err.to_string().contains("reserved"));
    }

    #[test]
    fn unknown_id_lookup_is_an_error() {
        let registry = ProfileRegistry::from_profiles(vec![indian()]).unwrap();
        assert!(registry.get("martian").is_err());
    }

    #[test]
    fn whitespace_in_id_is_rejected() {
        let mut profile = indian();
        profile.id = "indian english".into();
        assert!(ProfileRegistry::from_profiles(vec![profile]).is_err());
    }

    #[test]
    fn profile_without_bullets_is_rejected() {
        let profile = DialectProfile {
            id: "empty".into(),
            display_name: "Empty".into(),
            phonetics: vec![],
            grammar: vec![],
            vocabulary: vec![],
            cultural_notes: vec![],
        };
        assert!(ProfileRegistry::from_profiles(vec![profile]).is_err());
    }
}
