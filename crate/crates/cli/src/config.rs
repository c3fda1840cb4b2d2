//! `key=value` config files. Each key names a long flag of the chosen
//! subcommand; the pairs are spliced into the argument list ahead of the
//! user's own flags, so flags given on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::args::Cli;

const GLOBAL_VALUE_FLAGS: [&str; 3] = ["--seed", "--threads", "--config"];

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {line:?}", n + 1);
        };
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Positions just after each subcommand name, outermost first.
fn subcommand_path(args: &[OsString]) -> Vec<(usize, String)> {
    let mut cmd = Cli::command();
    let mut out = Vec::new();
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy().into_owned();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_str()) {
            i += 2;
            continue;
        }
        if s.starts_with('-') {
            i += 1;
            continue;
        }
        match cmd.find_subcommand(&s) {
            Some(sub) => {
                out.push((i + 1, s));
                cmd = sub.clone();
                if !cmd.has_subcommands() {
                    break;
                }
            }
            None => break,
        }
        i += 1;
    }
    out
}

/// Returns `args` with the config file's pairs inserted as flags.
pub fn apply_config_file(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    splice(args, &parse_pairs(&text)?, &path)
}

fn splice(mut args: Vec<OsString>, pairs: &[(String, String)], path: &Path) -> Result<Vec<OsString>> {
    let route = subcommand_path(&args);
    let Some((insert_at, _)) = route.last() else {
        return Ok(args);
    };
    let mut cmd = Cli::command();
    for (_, name) in &route {
        cmd = cmd.find_subcommand(name).expect("found above").clone();
    }
    let root = Cli::command();
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in pairs {
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .with_context(|| format!("{}: unknown key {key:?}", path.display()))?;
        if key == "config" {
            bail!("{}: a config file cannot name another config file", path.display());
        }
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        } else {
            match value.as_str() {
                "true" => injected.push(format!("--{key}").into()),
                "false" => {}
                other => bail!("{}: {key} expects true or false, got {other:?}", path.display()),
            }
        }
    }
    let tail = args.split_off(*insert_at);
    args.extend(injected);
    args.extend(tail);
    Ok(args)
}
