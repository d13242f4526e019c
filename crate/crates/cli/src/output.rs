//! Report and CSV emission. The report envelope is a JSON object whose
//! keys serialize in sorted order (serde_json maps are ordered), so two
//! runs of the same config differ only under the single volatile `timing`
//! key — strip it and the files compare byte for byte.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{Map, Value};

use conekit::report::VerificationReport;

use crate::runner::CommandOutput;
use crate::CliError;

/// Assemble the report envelope:
/// certificates / config / details / experiment / pass / seed / timing.
pub fn envelope(
    output: &CommandOutput,
    config_echo: Value,
    experiment_override: Option<&str>,
    elapsed_seconds: f64,
) -> Value {
    let report: &VerificationReport = &output.report;
    let experiment = experiment_override.unwrap_or(&report.experiment);

    let mut timing = Map::new();
    timing.insert("elapsed_seconds".to_string(), Value::from(elapsed_seconds));
    let unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    timing.insert("unix_seconds".to_string(), Value::from(unix));

    let mut root = Map::new();
    root.insert(
        "certificates".to_string(),
        serde_json::to_value(&report.certificates).expect("certificate serialization cannot fail"),
    );
    root.insert("config".to_string(), config_echo);
    root.insert("details".to_string(), Value::Object(output.details.clone()));
    root.insert("experiment".to_string(), Value::from(experiment));
    root.insert("pass".to_string(), Value::from(report.pass()));
    root.insert(
        "seed".to_string(),
        match output.seed {
            Some(s) => Value::from(s),
            None => Value::Null,
        },
    );
    root.insert("timing".to_string(), Value::Object(timing));
    Value::Object(root)
}

/// Write report.json (pretty, trailing newline) and any CSV dumps into the
/// output directory, creating it if needed.
pub fn write_artifacts(
    out_dir: &Path,
    report: &Value,
    csv_files: &[(String, String)],
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| {
        CliError::Io(format!("cannot create output directory {}: {e}", out_dir.display()))
    })?;
    let path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io(format!("report serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    for (name, contents) in csv_files {
        let path = out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
