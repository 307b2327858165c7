//! `--args-file`: a JSON object whose keys mirror a subcommand's long flags.
//! Its values are spliced in right after the subcommand name, so anything
//! also given on the command line overrides them.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Find `--args-file PATH` / `--args-file=PATH` in `argv`.
fn find_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--args-file" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--args-file=") {
            return Some(rest.into());
        }
    }
    None
}

/// Flag tokens for one JSON object. Booleans become bare flags (false is
/// skipped), arrays are comma-joined, null is skipped.
pub fn tokens(obj: &serde_json::Map<String, Value>) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| -> Result<String> {
            Ok(match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                other => bail!("args file: unsupported value for '{key}': {other}"),
            })
        };
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let joined = items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(",");
                out.push(flag.into());
                out.push(joined.into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar(v)?.into());
            }
        }
    }
    Ok(out)
}

/// Expand the args file, if any, into `argv`.
pub fn expand(argv: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let Some(path) = find_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).with_context(|| format!("--args-file: cannot read {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("--args-file: {} is not valid JSON", path.display()))?;
    let Value::Object(obj) = value else {
        bail!("--args-file: {} must hold a JSON object", path.display());
    };
    let Some(pos) = argv.iter().position(|a| subcommands.contains(&a.to_string_lossy().as_ref())) else {
        bail!("--args-file needs a subcommand on the command line");
    };
    let mut out = argv[..=pos].to_vec();
    out.extend(tokens(&obj)?);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn token_forms() {
        let v: Value = serde_json::json!({"n": 500, "seed": 7, "dry_run": true, "quiet": false, "events": ["ramp", "level_shift"], "note": null});
        let t = tokens(v.as_object().unwrap()).unwrap();
        let t: Vec<String> = t.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(t, ["--dry-run", "--events", "ramp,level_shift", "--n", "500", "--seed", "7"]);
    }

    #[test]
    fn spliced_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.json");
        std::fs::write(&f, r#"{"seed": 1}"#).unwrap();
        let argv = os(&["rxits", "--threads", "2", "simulate", "--args-file", f.to_str().unwrap(), "--seed", "9"]);
        let out = expand(argv, &["simulate"]).unwrap();
        let out: Vec<String> = out.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(&out[..6], ["rxits", "--threads", "2", "simulate", "--seed", "1"]);
        assert_eq!(out.last().unwrap(), "9");
    }

    #[test]
    fn non_object_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.json");
        std::fs::write(&f, "[1, 2]").unwrap();
        assert!(expand(os(&["rxits", "fit", "--args-file", f.to_str().unwrap()]), &["fit"]).is_err());
    }
}
