//! Flat `key=value` config files merged under command-line flags.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{ArgAction, Command};

/// Config keys that only make sense on the command line.
const NOT_CONFIGURABLE: &[&str] = &["config", "save-config", "help"];

#[derive(Debug)]
pub struct ConfigError(pub String);

/// Subcommand name and `--config` path found in raw `argv`, without
/// running the full parser.
pub fn prescan(cmd: &Command, argv: &[OsString]) -> (Option<(usize, String)>, Option<String>) {
    let names: Vec<&str> = cmd.get_subcommands().map(|s| s.get_name()).collect();
    let mut sub = None;
    let mut config = None;
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy();
        if tok == "--config" {
            config = argv.get(i + 1).map(|v| v.to_string_lossy().into_owned());
            i += 2;
            continue;
        }
        if let Some(v) = tok.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if sub.is_none() && names.contains(&tok.as_ref()) {
            sub = Some((i, tok.into_owned()));
        }
        i += 1;
    }
    (sub, config)
}

fn parse_lines(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("config line {}: expected key=value, got `{line}`", n + 1)))?;
        let key = k.trim().to_string();
        if out.iter().any(|(seen, _)| *seen == key) {
            return Err(ConfigError(format!("config line {}: duplicate key `{key}`", n + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn given_on_command_line(argv: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("--{long}=");
    argv.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&with_value)
    })
}

/// Inserts `--key=value` tokens from the config file right after the
/// subcommand so that later command-line flags take precedence.
pub fn merge(cmd: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let (sub, config) = prescan(cmd, &argv);
    let Some(path) = config else { return Ok(argv) };
    let Some((at, name)) = sub else {
        return Err(ConfigError("--config needs a subcommand".into()));
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|e| ConfigError(format!("cannot read config {path}: {e}")))?;
    let subcmd = cmd.find_subcommand(&name).expect("prescan returned a known subcommand");
    let args: Vec<_> = subcmd.get_arguments().chain(cmd.get_arguments()).collect();

    let mut tokens = Vec::new();
    for (key, value) in parse_lines(&text)? {
        let arg = args
            .iter()
            .find(|a| a.get_long() == Some(key.as_str()) && !NOT_CONFIGURABLE.contains(&key.as_str()))
            .ok_or_else(|| ConfigError(format!("unknown config key `{key}` for `{name}`")))?;
        if given_on_command_line(&argv, &key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => tokens.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => return Err(ConfigError(format!("config key `{key}` takes true or false, got `{value}`"))),
            },
            _ => tokens.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    let mut merged = argv;
    merged.splice(at + 1..at + 1, tokens);
    Ok(merged)
}

/// Effective settings of a parsed subcommand as sorted `key=value` lines,
/// suitable both for hashing and for writing back as a config file.
pub fn effective(sub: &Command, matches: &clap::ArgMatches, skip: &[&str]) -> String {
    let mut lines = Vec::new();
    for arg in sub.get_arguments() {
        let (Some(long), id) = (arg.get_long(), arg.get_id().as_str()) else { continue };
        if skip.contains(&long) || NOT_CONFIGURABLE.contains(&long) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => {
                if matches.get_flag(id) {
                    lines.push(format!("{long}=true"));
                }
            }
            _ => {
                if let Some(mut raw) = matches.get_raw(id) {
                    if let Some(v) = raw.next() {
                        lines.push(format!("{long}={}", v.to_string_lossy()));
                    }
                }
            }
        }
    }
    lines.sort();
    lines.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_skip_comments_and_reject_garbage() {
        let ok = parse_lines("# hi\n\nseed = 3\nx0=1,0\n").unwrap();
        assert_eq!(ok, vec![("seed".into(), "3".into()), ("x0".into(), "1,0".into())]);
        assert!(parse_lines("seed 3").is_err());
        assert!(parse_lines("seed=1\nseed=2").is_err());
    }
}
