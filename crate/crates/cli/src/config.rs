//! `key = value` config files that expand into long flags.

use std::fs;

/// Parses config text into flag tokens. `flag = true` becomes a bare `--flag`,
/// `flag = false` is dropped.
pub fn parse(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`, got `{raw}`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", n + 1));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Removes `--config PATH` from `args` and splices the file's flags in front of the
/// first flag, so flags given on the command line win.
pub fn expand(mut args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(pos) = args
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(args);
    };
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err("--config needs a path".into());
        }
        let p = args.remove(pos + 1);
        args.remove(pos);
        p
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let flags = parse(&text)?;
    let at = args
        .iter()
        .skip(1)
        .position(|a| a.starts_with('-'))
        .map_or(args.len(), |i| i + 1);
    args.splice(at..at, flags);
    Ok(args)
}
