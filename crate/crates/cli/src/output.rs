//! File writers. Every artifact carries the run configuration: a `config`
//! field in JSON, a leading `# config:` comment line in CSV.

use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text).map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))
}

/// Pretty JSON object `{"config": ..., <body fields>}` with a trailing newline.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, config: &RunConfig, body: &T) -> Result<(), CliError> {
    let mut value = serde_json::to_value(body).map_err(|e| CliError::Io(format!("{e}")))?;
    let serde_json::Value::Object(fields) = &mut value else {
        return Err(CliError::Io(format!("{name}: body is not a JSON object")));
    };
    let mut map = serde_json::Map::new();
    map.insert("config".into(), serde_json::to_value(config).map_err(|e| CliError::Io(format!("{e}")))?);
    map.append(fields);
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(map)).map_err(|e| CliError::Io(format!("{e}")))?;
    text.push('\n');
    write_text(dir, name, &text)
}

/// CSV with a `# config:` header comment, one row per record and optional
/// trailing comment lines.
pub fn write_csv<T: Serialize>(
    dir: &Path,
    name: &str,
    config: &RunConfig,
    rows: &[T],
    trailer: &[String],
) -> Result<(), CliError> {
    let mut buf = format!("# config: {}\n", config.to_json()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    }
    let mut text = String::from_utf8(buf).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    for line in trailer {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    write_text(dir, name, &text)
}
