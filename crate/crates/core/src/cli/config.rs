//! Flat `key = value` configuration files.
//!
//! Keys are long flag names without the leading dashes (`N`, `snr`,
//! `fourth-moment-draws`; underscores are accepted for dashes). Boolean
//! flags take `true` or `false`. Blank lines and lines starting with `#` are
//! ignored, so the header of any output file can be fed back as a config.
//!
//! Config entries are spliced in right after the subcommand, ahead of the
//! command-line flags, and later occurrences override earlier ones.

use std::path::Path;

use crate::error::{Error, Result};

/// Parses a config file into `(key, value)` pairs.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_start_matches('#').trim();
        if line.is_empty() || raw.trim().starts_with("##") {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            if raw.trim().starts_with('#') {
                continue;
            }
            return Err(Error::InvalidParameter(format!(
                "config line {}: expected key = value",
                i + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            if raw.trim().starts_with('#') {
                continue;
            }
            return Err(Error::InvalidParameter(format!("config line {}: bad key", i + 1)));
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

/// Command-line tokens for config entries; `key = false` is dropped and
/// `key = true` becomes a bare flag.
pub fn to_args(entries: &[(String, String)], flags: &[&str]) -> Vec<String> {
    let mut args = Vec::new();
    for (key, value) in entries {
        if key == "command" || key == "config" {
            continue;
        }
        if flags.contains(&key.as_str()) {
            if value == "true" {
                args.push(format!("--{key}"));
            }
            continue;
        }
        args.push(format!("--{key}={value}"));
    }
    args
}

/// Removes `--config <path>` (or `--config=<path>`) from `args` and splices
/// the file's entries in after the subcommand. Returns the config path.
pub fn splice(args: &mut Vec<String>, subcommands: &[&str], flags: &[&str]) -> Result<Option<String>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--" {
            break;
        }
        if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
        } else if args[i] == "--config" {
            if i + 1 >= args.len() {
                return Err(Error::InvalidParameter("--config needs a path".into()));
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| Error::InvalidParameter(format!("cannot read config {path}: {e}")))?;
    let entries = parse(&text)?;
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.as_str()))
        .ok_or_else(|| Error::InvalidParameter("--config needs a subcommand".into()))?;
    let extra = to_args(&entries, flags);
    args.splice(at + 1..at + 1, extra);
    Ok(Some(path))
}
