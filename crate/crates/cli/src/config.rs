//! Config files are expanded into flags placed before the explicit ones, so
//! explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

fn read_document(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config: cannot read {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value = if is_toml {
        let t: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config: {}", one_line(&e.to_string()))))?;
        serde_json::to_value(t).map_err(|e| CliError::Usage(format!("config: {e}")))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config: {e}")))?
    };
    if !value.is_object() {
        return Err(CliError::Usage("config: top level must be a table of flag values".into()));
    }
    Ok(value)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Array(items) => items.iter().map(|i| scalar(key, i)).collect::<Result<Vec<_>, _>>().map(|v| v.join(",")),
        _ => Err(CliError::Usage(format!("config: unsupported value for '{key}'"))),
    }
}

/// Flags equivalent to the document; `command` and `config` keys are skipped.
fn document_flags(doc: &Value) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (key, v) in doc.as_object().into_iter().flatten() {
        if key == "command" || key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            other => {
                out.push(flag.into());
                out.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Returns argv with the config file's flags spliced in after the subcommand.
/// A `command` key supplies the subcommand when argv has none.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let doc = read_document(Path::new(&path))?;
    let flags = document_flags(&doc)?;
    let mut args = args;
    let names: Vec<String> = {
        use clap::CommandFactory;
        crate::Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect()
    };
    let sub = args.iter().skip(1).position(|a| names.iter().any(|n| a.to_str() == Some(n))).map(|i| i + 1);
    match sub {
        Some(i) => {
            args.splice(i + 1..i + 1, flags);
            Ok(args)
        }
        None => {
            let Some(cmd) = doc.get("command").and_then(Value::as_str) else {
                return Err(CliError::Usage("config: no subcommand given".into()));
            };
            // remaining flags move behind the subcommand; --config and
            // --threads are global and parse there too
            let mut out = vec![args[0].clone(), cmd.into()];
            out.extend(flags);
            out.extend(args.drain(1..));
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_from_document() {
        let doc: Value = serde_json::json!({"k": 2.0, "tail_window": 3, "omega": "golden", "ks": [0, 1], "command": "greene"});
        let f: Vec<String> = document_flags(&doc).unwrap().into_iter().map(|s| s.into_string().unwrap()).collect();
        assert!(f.windows(2).any(|w| w == ["--tail-window", "3"]));
        assert!(f.windows(2).any(|w| w == ["--ks", "0,1"]));
        assert!(!f.iter().any(|s| s == "--command"));
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "k = 0.5\nlevels = 4\n").unwrap();
        let args = os(&["twistlab", "--config", p.to_str().unwrap(), "greene", "--k", "1"]);
        let out = expand(args).unwrap();
        let s: Vec<String> = out.into_iter().map(|s| s.into_string().unwrap()).collect();
        let g = s.iter().position(|a| a == "greene").unwrap();
        let cfg_k = s.iter().position(|a| a == "0.5").unwrap();
        let cli_k = s.iter().position(|a| a == "1").unwrap();
        assert!(g < cfg_k && cfg_k < cli_k);
    }
}
