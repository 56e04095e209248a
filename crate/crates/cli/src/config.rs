//! `key=value` config files, spliced into the argument list as long flags.

use std::fs;
use std::path::Path;

use clap::Command;
use skybatch::Error;

/// Parses a config file into `(key, value)` pairs. Blank lines and `#`
/// comments are skipped.
pub fn parse_file(path: &Path) -> Result<Vec<(String, String)>, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key=value, found `{t}`", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", no + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Rewrites `argv` so that entries from `--config <file>` precede the
/// explicit flags of the subcommand; later occurrences win, so the command
/// line overrides the file. Keys must name a long flag of the subcommand.
pub fn inject(argv: Vec<String>, cmd: &Command) -> Result<Vec<String>, Error> {
    let Some(sub_pos) = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(argv);
    };
    let Some(sub) = cmd.find_subcommand(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let mut rest = Vec::new();
    let mut files = Vec::new();
    let mut it = argv[sub_pos + 1..].iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let f = it.next().ok_or_else(|| Error::Config("--config needs a file".into()))?;
            files.push(f.clone());
        } else if let Some(f) = a.strip_prefix("--config=") {
            files.push(f.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    if files.is_empty() {
        return Ok(argv);
    }
    let mut injected = Vec::new();
    for f in &files {
        for (k, v) in parse_file(Path::new(f))? {
            let arg = sub
                .get_arguments()
                .find(|a| a.get_long() == Some(k.as_str()))
                .filter(|a| a.get_id() != "config")
                .ok_or_else(|| Error::Config(format!("{f}: unknown key `{k}` for `{}`", sub.get_name())))?;
            if arg.get_action().takes_values() {
                injected.push(format!("--{k}={v}"));
            } else {
                match v.as_str() {
                    "true" | "1" | "yes" | "on" => injected.push(format!("--{k}")),
                    "false" | "0" | "no" | "off" => {}
                    _ => return Err(Error::Config(format!("{f}: `{k}` expects true or false, found `{v}`"))),
                }
            }
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend(rest);
    Ok(out)
}
