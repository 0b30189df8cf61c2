//! Agent profiles, keyword lexicons and session defaults loaded from disk.
//!
//! Built-in copies of the files under `config/` are compiled in; a config
//! directory given at runtime overrides any file it contains.

use std::path::{Path, PathBuf};

use coregulate_core::prompt::{AgentProfile, ProfileError, ProfileSet};
use coregulate_core::{KeywordLexicon, SessionConfig};

const BUILTIN_PROFILES: [(&str, &str); 5] = [
    ("planning", include_str!("../config/agents/planning.json")),
    ("monitoring", include_str!("../config/agents/monitoring.json")),
    ("reflection", include_str!("../config/agents/reflection.json")),
    ("knowledge", include_str!("../config/agents/knowledge.json")),
    ("assistant", include_str!("../config/agents/assistant.json")),
];
const BUILTIN_KEYWORDS: &str = include_str!("../config/keywords.json");

#[derive(Debug, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON in {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Profiles(#[from] ProfileError),
    #[error("invalid session config: {0}")]
    Session(#[from] coregulate_core::session::ConfigError),
    #[error("lexicon file {0} contains no phrases")]
    EmptyLexicon(PathBuf),
}

fn read(path: &Path) -> Result<String, ConfigLoadError> {
    std::fs::read_to_string(path).map_err(|source| ConfigLoadError::Read {
        path: path.to_owned(),
        source,
    })
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T, ConfigLoadError> {
    serde_json::from_str(text).map_err(|source| ConfigLoadError::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Reads `<dir>/<name>` if `dir` is given and the file exists.
fn override_text(dir: Option<&Path>, name: &str) -> Result<Option<(String, PathBuf)>, ConfigLoadError> {
    let Some(dir) = dir else { return Ok(None) };
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some((read(&path)?, path)))
}

/// Loads `agents/<id>.json` for the four specialists and the generic assistant.
pub fn load_profiles(dir: Option<&Path>) -> Result<ProfileSet, ConfigLoadError> {
    let mut profiles = Vec::new();
    for (id, builtin) in BUILTIN_PROFILES {
        let name = format!("agents/{id}.json");
        let profile: AgentProfile = match override_text(dir, &name)? {
            Some((text, path)) => parse(&text, &path)?,
            None => parse(builtin, Path::new(&name))?,
        };
        profiles.push(profile);
    }
    let generic = profiles.pop().expect("assistant profile is last");
    Ok(ProfileSet::new(profiles, generic)?)
}

pub fn load_keywords(dir: Option<&Path>) -> Result<KeywordLexicon, ConfigLoadError> {
    match override_text(dir, "keywords.json")? {
        Some((text, path)) => parse(&text, &path),
        None => parse(BUILTIN_KEYWORDS, Path::new("keywords.json")),
    }
}

/// One phrase per line; blank lines and `#` comments are skipped.
pub fn load_lexicon(path: &Path) -> Result<Vec<String>, ConfigLoadError> {
    let phrases: Vec<String> = read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect();
    if phrases.is_empty() {
        return Err(ConfigLoadError::EmptyLexicon(path.to_owned()));
    }
    Ok(phrases)
}

/// A session config JSON file; missing fields take their defaults.
pub fn load_session_config(path: &Path) -> Result<SessionConfig, ConfigLoadError> {
    parse(&read(path)?, path)
}
