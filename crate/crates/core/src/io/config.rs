use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::RunConfig;

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

/// Parses and validates a TOML run config. Relative dataset paths are
/// resolved against `base_dir` when given.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<RunConfig> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        let from_span = e.span().and_then(|span| {
            let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line = text[line_start..].lines().next()?;
            line.split_once('=').map(|(key, _)| key.trim().to_string())
        });
        let field = match backticked(&message) {
            Some(f) if message.starts_with("missing field") => f.to_string(),
            found => from_span.or(found.map(str::to_string)).unwrap_or_else(|| "<document>".into()),
        };
        Error::Config { field, message }
    })?;
    if let Some(base) = base_dir {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut config.images);
        fix(&mut config.labels);
        fix(&mut config.test_images);
        fix(&mut config.test_labels);
        fix(&mut config.csv);
        fix(&mut config.test_csv);
    }
    config.resolve()
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text, path.parent())
}

/// TOML text that parses back to the same resolved config.
pub fn echo_config(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Format(e.to_string()))
}
