//! Flat key/value run configuration. Keys are long flag names; values are
//! turned into `--key=value` arguments placed before the user's own flags,
//! so flags given on the command line win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgMatches, Command};
use serde_json::{Map, Value};

/// Global flags that take a value, needed to find the subcommand token
/// without a full parse.
const GLOBAL_VALUE_FLAGS: [&str; 4] = ["--seed", "--threads", "--config", "--out-dir"];

pub fn find_config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn subcommand_position(argv: &[OsString], cmd: &Command) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if s.starts_with('-') {
            i += 1;
            continue;
        }
        return cmd.find_subcommand(s.as_ref()).map(|_| i);
    }
    None
}

/// Reads a TOML file, or a JSON manifest written by a previous run (its
/// `invocation.args` object).
pub fn load(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let v: Value = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        let args = v
            .pointer("/invocation/args")
            .or_else(|| v.get("args"))
            .unwrap_or(&v);
        match args {
            Value::Object(m) => Ok(m.clone()),
            _ => bail!("{}: expected a JSON object of settings", path.display()),
        }
    } else {
        let table: toml::Table = toml::from_str(&text)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        let v = serde_json::to_value(table)?;
        match v {
            Value::Object(m) => Ok(m),
            _ => unreachable!(),
        }
    }
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => Ok(items
            .iter()
            .map(|x| scalar(key, x))
            .collect::<Result<Vec<_>>>()?
            .join(",")),
        _ => bail!("config key '{key}': nested tables are not supported"),
    }
}

/// Converts settings into arguments for `sub`, rejecting keys that are not
/// flags of that subcommand or global flags.
pub fn to_args(settings: &Map<String, Value>, root: &Command, sub: &str) -> Result<Vec<OsString>> {
    let subcmd = root
        .find_subcommand(sub)
        .with_context(|| format!("unknown subcommand {sub}"))?;
    let args: Vec<&clap::Arg> = subcmd
        .get_arguments()
        .chain(root.get_arguments().filter(|a| a.is_global_set()))
        .collect();
    let mut out = Vec::new();
    for (key, value) in settings {
        let arg = args
            .iter()
            .find(|a| a.get_long() == Some(key.as_str()) && !matches!(key.as_str(), "config" | "help" | "version"))
            .with_context(|| {
                let mut known: Vec<&str> = args
                    .iter()
                    .filter_map(|a| a.get_long())
                    .filter(|l| !matches!(*l, "config" | "help" | "version"))
                    .collect();
                known.sort_unstable();
                known.dedup();
                format!(
                    "unknown config key '{key}' for '{sub}' (valid keys: {})",
                    known.join(", ")
                )
            })?;
        let takes_value = arg.get_num_args().is_some_and(|r| r.takes_values());
        if takes_value {
            out.push(format!("--{key}={}", scalar(key, value)?).into());
        } else {
            let on = match value {
                Value::Bool(b) => *b,
                Value::String(s) if s == "true" || s == "false" => s == "true",
                _ => bail!("config key '{key}' is a switch and needs true or false"),
            };
            if on {
                out.push(format!("--{key}").into());
            }
        }
    }
    Ok(out)
}

/// Splices config-derived arguments right after the subcommand token.
pub fn merge(argv: Vec<OsString>, root: &Command) -> Result<Vec<OsString>> {
    let Some(path) = find_config_path(&argv) else {
        return Ok(argv);
    };
    let Some(pos) = subcommand_position(&argv, root) else {
        return Ok(argv);
    };
    let sub = argv[pos].to_string_lossy().into_owned();
    let settings = load(Path::new(&path))?;
    let extra = to_args(&settings, root, &sub)?;
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

/// Resolved values of every flag (defaults included) as a flat object that
/// [`load`] accepts back.
pub fn resolved(matches: &ArgMatches, root: &Command, sub: &str) -> Value {
    let mut map = Map::new();
    let Some(subcmd) = root.find_subcommand(sub) else {
        return Value::Object(map);
    };
    let args = subcmd
        .get_arguments()
        .chain(root.get_arguments().filter(|a| a.is_global_set()));
    for arg in args {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if matches!(long, "config" | "help" | "version") {
            continue;
        }
        let Ok(Some(raw)) = matches.try_get_raw(id) else { continue };
        let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let takes_value = arg.get_num_args().is_some_and(|r| r.takes_values());
        let v = if !takes_value {
            Value::Bool(vals.first().is_some_and(|s| s == "true"))
        } else {
            Value::String(vals.join(","))
        };
        map.insert(long.to_string(), v);
    }
    Value::Object(map)
}
