use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavepacket::verify::{Report, Table};

use crate::commands::Run;
use crate::config::RunConfig;

pub const REPORT_SCHEMA: &str = "wavepacket-report v1";

/// The JSON summary written next to the CSV tables of a run.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub passed: bool,
    pub config: RunConfig,
    pub report: Report,
}

/// `# wavepacket-table v1 <name>` followed by the table as CSV.
pub fn table_csv(t: &Table) -> String {
    format!("# wavepacket-table v1 {}\n{}", t.name, t.to_csv())
}

/// Writes `<stem>-s<seed>-<hash>.json`, one `.<table>.csv` per table and the
/// extras of `run` into `dir`. Returns the written paths.
pub fn write(dir: &Path, config: &RunConfig, run: &Run) -> std::io::Result<Vec<PathBuf>> {
    let base = format!("{}-s{}-{}", run.stem, config.seed, config.hash());
    let envelope = Envelope {
        schema: REPORT_SCHEMA.into(),
        command: run.stem.clone(),
        seed: config.seed,
        config_hash: config.hash(),
        passed: run.report.passed(),
        config: config.echo(),
        report: run.report.clone(),
    };
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut json = serde_json::to_string_pretty(&envelope).expect("reports are plain data");
    json.push('\n');
    files.push((dir.join(format!("{base}.json")), json.into_bytes()));
    for t in &run.report.tables {
        files.push((dir.join(format!("{base}.{}.csv", t.name)), table_csv(t).into_bytes()));
    }
    for (suffix, bytes) in &run.extras {
        files.push((dir.join(format!("{base}.{suffix}")), bytes.clone()));
    }
    fs::create_dir_all(dir)?;
    for (path, bytes) in &files {
        fs::write(path, bytes)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Every report envelope in `dir`, sorted by file name.
pub fn collect(dir: &Path) -> std::io::Result<Vec<(PathBuf, Envelope)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p)?;
        match serde_json::from_str::<Envelope>(&text) {
            Ok(e) if e.schema == REPORT_SCHEMA => out.push((p, e)),
            _ => {}
        }
    }
    Ok(out)
}
