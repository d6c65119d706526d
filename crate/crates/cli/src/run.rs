//! Run orchestration: validate, dispatch to a task, write artifacts and the
//! run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use legalir_core::fingerprint;
use serde::Serialize;

use crate::config::{RunConfig, Task};
use crate::tasks;
use crate::CliError;

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(bytes).map_err(CliError::io(path))?;
    tmp.as_file().sync_all().map_err(CliError::io(path))?;
    // Temp files are created owner-only; outputs are ordinary files.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(CliError::io(path))?;
    }
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// What a task hands back before anything touches the disk.
#[derive(Debug, Default)]
pub struct TaskOutput {
    /// File name (relative to the output directory) and contents.
    pub files: Vec<(String, Vec<u8>)>,
    pub report: serde_json::Value,
    pub markdown: String,
    pub warnings: Vec<String>,
}

impl TaskOutput {
    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub task: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, InputRecord>,
    /// Output file name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub task: Task,
    pub output_dir: PathBuf,
    pub report: serde_json::Value,
    pub markdown: String,
    pub manifest: RunManifest,
}

/// Fingerprint of a file, or of a directory's regular files in name order.
pub fn fingerprint_path(path: &Path) -> Result<String, CliError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(CliError::io(path))?
            .map(|e| e.map(|e| e.path()).map_err(CliError::io(path)))
            .collect::<Result<_, _>>()?;
        entries.retain(|p| p.is_file());
        entries.sort();
        let mut listing = String::new();
        for p in entries {
            let bytes = fs::read(&p).map_err(CliError::io(&p))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            listing.push_str(&format!("{name}\t{}\n", fingerprint(&bytes)));
        }
        Ok(fingerprint(listing.as_bytes()))
    } else {
        let bytes = fs::read(path).map_err(CliError::io(path))?;
        Ok(fingerprint(&bytes))
    }
}

fn input_records(cfg: &RunConfig) -> Result<BTreeMap<String, InputRecord>, CliError> {
    let mut inputs = BTreeMap::new();
    for (key, path) in &cfg.paths {
        inputs.insert(
            key.to_string(),
            InputRecord {
                path: path.display().to_string(),
                sha256: fingerprint_path(path)?,
            },
        );
    }
    for (i, path) in cfg.ensemble_models.iter().enumerate() {
        inputs.insert(
            format!("ensemble_models[{i}]"),
            InputRecord {
                path: path.display().to_string(),
                sha256: fingerprint_path(path)?,
            },
        );
    }
    Ok(inputs)
}

/// Validates `cfg`, runs its task and writes every artifact plus
/// `report.json`, `report.md`, `resolved_config.txt` and `run_manifest.json`
/// into `cfg.output_dir`.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let task = cfg.validate()?;
    let inputs = input_records(cfg)?;
    log::info!("running {task} into {}", cfg.output_dir.display());
    let mut out = tasks::run_task(task, cfg)?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut report_json = serde_json::to_vec_pretty(&out.report).expect("report serializes");
    report_json.push(b'\n');
    out.file(REPORT_JSON, report_json);
    out.file(REPORT_MD, out.markdown.clone().into_bytes());
    out.file(RESOLVED_CONFIG, cfg.to_config_text().into_bytes());

    let mut outputs = BTreeMap::new();
    for (name, bytes) in &out.files {
        write_atomic(&dir.join(name), bytes)?;
        outputs.insert(name.clone(), fingerprint(bytes));
    }
    let mut warnings = cfg.warnings.clone();
    warnings.extend(out.warnings.iter().cloned());
    for w in &out.warnings {
        log::warn!("{w}");
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        task: task.name().to_string(),
        seed: cfg.seed,
        config_hash: cfg.config_hash(),
        config: cfg.entries(),
        inputs,
        outputs,
        warnings,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(&dir.join(MANIFEST_FILE), &bytes)?;
    Ok(RunOutcome {
        task,
        output_dir: dir.clone(),
        report: out.report,
        markdown: out.markdown,
        manifest,
    })
}
