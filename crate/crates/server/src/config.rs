//! Service configuration: one TOML file plus `SHALA_*` environment overrides.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! data_dir = "sessions"
//! demo_models = true
//!
//! [models]
//! segmenter = "models/segmenter.model"
//!
//! [resources]
//! lexicon = "data/lexicon.tsv"
//! ```
//!
//! Relative paths are taken from the directory of the config file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPaths {
    pub segmenter: Option<PathBuf>,
    pub tagger: Option<PathBuf>,
    pub parser: Option<PathBuf>,
    pub compound: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePaths {
    pub lexicon: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub translit: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Train the quick demo models for any task whose model path is unset.
    pub demo_models: bool,
    pub demo_seed: u64,
    pub models: ModelPaths,
    pub resources: ResourcePaths,
    pub chat_rules: Option<PathBuf>,
    pub leaderboard: Option<PathBuf>,
    /// Built web client; a small built-in page is served when unset.
    pub static_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: DEFAULT_LISTEN.into(),
            data_dir: PathBuf::from("sessions"),
            demo_models: false,
            demo_seed: 0,
            models: ModelPaths::default(),
            resources: ResourcePaths::default(),
            chat_rules: None,
            leaderboard: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    File { path: String, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut c: Config = toml::from_str(text).map_err(|e| ConfigError::File {
            path: base.display().to_string(),
            message: e.to_string(),
        })?;
        c.rebase(base);
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        for p in [
            &mut self.models.segmenter,
            &mut self.models.tagger,
            &mut self.models.parser,
            &mut self.models.compound,
            &mut self.resources.lexicon,
            &mut self.resources.rules,
            &mut self.resources.translit,
            &mut self.chat_rules,
            &mut self.leaderboard,
            &mut self.static_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Applies `SHALA_*` variables from `env` on top of the file values.
    pub fn apply_env(&mut self, env: &HashMap<String, String>) -> Result<(), ConfigError> {
        let path = |name: &str| env.get(name).filter(|v| !v.is_empty()).map(PathBuf::from);
        if let Some(v) = env.get("SHALA_LISTEN") {
            self.listen = v.clone();
        }
        if let Some(p) = path("SHALA_DATA_DIR") {
            self.data_dir = p;
        }
        if let Some(v) = env.get("SHALA_DEMO_MODELS") {
            self.demo_models = parse_bool(v).ok_or_else(|| ConfigError::Env {
                name: "SHALA_DEMO_MODELS".into(),
                message: format!("expected true or false, found {v:?}"),
            })?;
        }
        if let Some(v) = env.get("SHALA_DEMO_SEED") {
            self.demo_seed = v.parse().map_err(|_| ConfigError::Env {
                name: "SHALA_DEMO_SEED".into(),
                message: format!("expected an integer, found {v:?}"),
            })?;
        }
        let slots: [(&str, &mut Option<PathBuf>); 10] = [
            ("SHALA_SEGMENTER_MODEL", &mut self.models.segmenter),
            ("SHALA_TAGGER_MODEL", &mut self.models.tagger),
            ("SHALA_PARSER_MODEL", &mut self.models.parser),
            ("SHALA_COMPOUND_MODEL", &mut self.models.compound),
            ("SHALA_LEXICON", &mut self.resources.lexicon),
            ("SHALA_RULES", &mut self.resources.rules),
            ("SHALA_TRANSLIT", &mut self.resources.translit),
            ("SHALA_CHAT_RULES", &mut self.chat_rules),
            ("SHALA_LEADERBOARD", &mut self.leaderboard),
            ("SHALA_STATIC_DIR", &mut self.static_dir),
        ];
        for (name, slot) in slots {
            if let Some(p) = path(name) {
                *slot = Some(p);
            }
        }
        Ok(())
    }

    /// File (if any), then the process environment.
    pub fn resolve(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Config::default(),
        };
        c.apply_env(&std::env::vars().collect())?;
        Ok(c)
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let c = Config::parse("data_dir = \"s\"\n[models]\nparser = \"/abs/p.model\"\ntagger = \"t.model\"\n", Path::new("/etc/shala"))
            .unwrap();
        assert_eq!(c.data_dir, PathBuf::from("/etc/shala/s"));
        assert_eq!(c.models.parser, Some(PathBuf::from("/abs/p.model")));
        assert_eq!(c.models.tagger, Some(PathBuf::from("/etc/shala/t.model")));
        assert_eq!(c.listen, DEFAULT_LISTEN);
    }

    #[test]
    fn env_overrides_file() {
        let mut c = Config::parse("listen = \"0.0.0.0:1\"\n", Path::new(".")).unwrap();
        let env: HashMap<String, String> = [
            ("SHALA_LISTEN", "127.0.0.1:9"),
            ("SHALA_DEMO_MODELS", "yes"),
            ("SHALA_COMPOUND_MODEL", "c.model"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        c.apply_env(&env).unwrap();
        assert_eq!(c.listen, "127.0.0.1:9");
        assert!(c.demo_models);
        assert_eq!(c.models.compound, Some(PathBuf::from("c.model")));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_errors() {
        assert!(Config::parse("lisen = \"x\"\n", Path::new(".")).is_err());
        let mut c = Config::default();
        let env = HashMap::from([("SHALA_DEMO_MODELS".to_string(), "maybe".to_string())]);
        assert!(c.apply_env(&env).is_err());
    }
}
