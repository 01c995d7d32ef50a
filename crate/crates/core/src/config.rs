//! Line-oriented `key|value` configuration files.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::llm::{ProviderConfig, ProviderKind};
use crate::prompt::Budget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// One `key|value` record with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits `text` into records; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str, origin: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('|') else {
            return Err(ConfigError::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("expected `key|value`, found `{line}`"),
            });
        };
        out.push(Entry { key: key.trim().to_string(), value: value.trim().to_string(), line: i + 1 });
    }
    Ok(out)
}

/// Tool settings. Every field has a default so a missing file is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub provider: ProviderConfig,
    pub budget: Budget,
    pub register_suffixes: Vec<String>,
    pub rules: Option<PathBuf>,
    pub annotation_rules: Option<PathBuf>,
    pub rtl_rules: Option<PathBuf>,
    pub preamble: Option<PathBuf>,
    pub engine_cmd: String,
    pub depth: u32,
    pub liveness_depth: u32,
    pub plateau_window: usize,
    pub max_iters: usize,
    pub reduction_advisory: bool,
    pub scripts: Vec<PathBuf>,
    pub engine_script: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            provider: ProviderConfig::mock(),
            budget: Budget::default(),
            register_suffixes: crate::rtl::DEFAULT_REGISTER_SUFFIXES.iter().map(|s| s.to_string()).collect(),
            rules: None,
            annotation_rules: None,
            rtl_rules: None,
            preamble: None,
            engine_cmd: "sby -f".to_string(),
            depth: 20,
            liveness_depth: 16,
            plateau_window: 2,
            max_iters: 10,
            reduction_advisory: false,
            scripts: Vec::new(),
            engine_script: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Config::from_text(&text, &path.display().to_string(), base)
    }

    /// Parses config text; relative paths are resolved against `base`.
    pub fn from_text(text: &str, origin: &str, base: &Path) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let path = |v: &str| base.join(v);
        for Entry { key, value, line } in parse_kv(text, origin)? {
            let v = value.as_str();
            match key.as_str() {
                "provider" => {
                    cfg.provider.kind = match v {
                        "mock" => ProviderKind::Mock,
                        "http" => ProviderKind::Http,
                        _ => return Err(invalid(&key, "expected `mock` or `http`")),
                    }
                }
                "name" => cfg.provider.name = value.clone(),
                "endpoint" => cfg.provider.endpoint = value.clone(),
                "model" => cfg.provider.model = value.clone(),
                "api_key_env" => cfg.provider.api_key_env = value.clone(),
                "usd_per_1k_tokens" => {
                    cfg.provider.usd_per_1k_tokens =
                        v.parse().map_err(|e: crate::llm::UsdParseError| invalid(&key, &e.to_string()))?
                }
                "context_limit" => {
                    let n = number(&key, v)?;
                    cfg.provider.context_limit = n;
                    cfg.budget.context_limit = n;
                }
                "output_reserve" => cfg.budget.output_reserve = number(&key, v)?,
                "timeout" => cfg.provider.timeout_secs = number(&key, v)? as u64,
                "retry_base_ms" => cfg.provider.retry_base_ms = number(&key, v)? as u64,
                "max_retries" => cfg.provider.max_retries = number(&key, v)? as u32,
                "temperature" => {
                    cfg.provider.temperature =
                        Some(v.parse().map_err(|_| invalid(&key, "expected a number"))?)
                }
                "usage_prompt_tokens" => cfg.provider.usage_override.0 = Some(number(&key, v)?),
                "usage_completion_tokens" => cfg.provider.usage_override.1 = Some(number(&key, v)?),
                "register_suffixes" => {
                    cfg.register_suffixes =
                        v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                    if cfg.register_suffixes.is_empty() {
                        return Err(invalid(&key, "suffix list is empty"));
                    }
                }
                "rules" => cfg.rules = Some(path(v)),
                "annotation_rules" => cfg.annotation_rules = Some(path(v)),
                "rtl_rules" => cfg.rtl_rules = Some(path(v)),
                "preamble" => cfg.preamble = Some(path(v)),
                "engine_cmd" => cfg.engine_cmd = value.clone(),
                "engine_script" => cfg.engine_script = Some(path(v)),
                "depth" => cfg.depth = number(&key, v)? as u32,
                "liveness_depth" => cfg.liveness_depth = number(&key, v)? as u32,
                "plateau_window" => cfg.plateau_window = number(&key, v)?.max(1),
                "max_iters" => cfg.max_iters = number(&key, v)?,
                "reduction_advisory" => cfg.reduction_advisory = flag(&key, v)?,
                "script" => cfg.scripts.push(path(v)),
                _ => {
                    return Err(ConfigError::Parse {
                        path: origin.to_string(),
                        line,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        if cfg.budget.output_reserve == 0 || cfg.budget.output_reserve >= cfg.budget.context_limit {
            return Err(invalid("output_reserve", "must be positive and below context_limit"));
        }
        Ok(cfg)
    }
}

fn invalid(key: &str, message: &str) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

fn number(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| invalid(key, "expected a non-negative integer"))
}

fn flag(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, "expected true or false")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_lines() {
        let e = parse_kv("# c\n\nmodel|gpt-4\nrate | 0.03\n", "x").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[1].key.as_str(), e[1].value.as_str(), e[1].line), ("rate", "0.03", 4));
        assert!(matches!(parse_kv("oops", "x"), Err(ConfigError::Parse { line: 1, .. })));
    }

    #[test]
    fn config_fields() {
        let text = "provider|http\nusd_per_1k_tokens|0.03\ncontext_limit|4096\noutput_reserve|1024\nscript|a.txt\nscript|b.txt\n";
        let cfg = Config::from_text(text, "c", Path::new("/base")).unwrap();
        assert_eq!(cfg.provider.kind, ProviderKind::Http);
        assert_eq!(cfg.provider.usd_per_1k_tokens.to_string(), "0.03");
        assert_eq!(cfg.budget, Budget { context_limit: 4096, output_reserve: 1024 });
        assert_eq!(cfg.scripts, [PathBuf::from("/base/a.txt"), PathBuf::from("/base/b.txt")]);
    }

    #[test]
    fn bad_config() {
        assert!(Config::from_text("nope|1", "c", Path::new(".")).is_err());
        assert!(Config::from_text("output_reserve|9000", "c", Path::new(".")).is_err());
        assert!(Config::from_text("depth|x", "c", Path::new(".")).is_err());
    }
}
