//! `--config FILE`: flat `key = value` lines turned into flags. They are
//! inserted ahead of the command-line flags, which therefore win.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};

const SUBCOMMANDS: [&str; 5] = ["two-arm", "two-arm-symmetric", "innovations", "coarsen", "reproduce"];

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Some(path.into());
        }
    }
    None
}

/// Position of the subcommand, if one was given.
fn subcommand_index(args: &[OsString]) -> Option<usize> {
    args.iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map(|i| i + 1)
}

/// Flags for the lines of a config file, plus the `mode` entry if present.
pub fn parse(text: &str) -> Result<(Option<String>, Vec<OsString>)> {
    let mut mode = None;
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", i + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        match (key.as_str(), value) {
            ("mode", v) => mode = Some(v.to_string()),
            (_, "true") => flags.push(format!("--{key}").into()),
            (_, "false") => {}
            (_, v) => flags.push(format!("--{key}={v}").into()),
        }
    }
    Ok((mode, flags))
}

pub fn expand_args(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let (mode, flags) = parse(&text)?;
    let at = match subcommand_index(&args) {
        Some(i) => i + 1,
        None => {
            let Some(mode) = mode else {
                return Ok(args);
            };
            args.insert(1, mode.into());
            2
        }
    };
    args.splice(at..at, flags);
    Ok(args)
}
