//! Experiment orchestration: configuration, execution and the artifact
//! directory.
//!
//! A run writes its reports into one directory together with
//! `manifest.json`, which lists every artifact with its SHA-256. Each JSON
//! report is wrapped in an envelope carrying the schema version and the
//! config digest; each CSV starts with a `#` line carrying both. Nothing
//! written depends on the wall clock or the thread count.

mod config;
mod experiments;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::averaging::AveragingError;
use crate::dynamics::{DynamicsError, Provenance, Trajectory};
use crate::hill::HillError;
use crate::measures::MeasureError;

pub use config::{
    AveragingConfig, ConvergenceConfig, ExperimentConfig, ExperimentKind, FieldModel, InitialConfig,
    InitialSource, PerturbationConfig, QuasiInvarianceConfig, RunConfig, SpectrumConfig, WeylConfig,
    SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(String),
}

impl LabError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Numerical(_) => 3,
            LabError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<DynamicsError> for LabError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidParams(_) | DynamicsError::InvalidPerturbation(_) => LabError::Config(e.to_string()),
            DynamicsError::Io(_) | DynamicsError::Format(_) => LabError::Io(e.to_string()),
            _ => LabError::Numerical(e.to_string()),
        }
    }
}

impl From<HillError> for LabError {
    fn from(e: HillError) -> Self {
        LabError::Numerical(e.to_string())
    }
}

impl From<MeasureError> for LabError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Io(_) => LabError::Io(e.to_string()),
            MeasureError::InvalidSpec(_) => LabError::Config(e.to_string()),
            _ => LabError::Numerical(e.to_string()),
        }
    }
}

impl From<AveragingError> for LabError {
    fn from(e: AveragingError) -> Self {
        match e {
            AveragingError::InvalidInput(_) => LabError::Config(e.to_string()),
            AveragingError::Io(_) => LabError::Io(e.to_string()),
            AveragingError::Dynamics(d) => d.into(),
            _ => LabError::Numerical(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub out: Option<PathBuf>,
    /// Overwrite a directory holding a run of a different config.
    pub force: bool,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_digest: String,
    pub experiment: String,
    pub seed: u64,
    /// `complete` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub artifacts: Vec<ArtifactEntry>,
}

pub const MANIFEST: &str = "manifest.json";
/// Marker file left next to the partial artifacts of a failed run.
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    config_digest: &'a str,
    experiment: &'a str,
    seed: u64,
    report: &'a T,
}

/// Output directory of a run in progress.
pub struct Artifacts {
    dir: PathBuf,
    digest: String,
    experiment: &'static str,
    seed: u64,
    written: BTreeMap<String, PathBuf>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Artifacts {
    fn new(dir: PathBuf, cfg: &ExperimentConfig) -> Self {
        Self {
            dir,
            digest: cfg.digest(),
            experiment: cfg.experiment.name(),
            seed: cfg.seed,
            written: BTreeMap::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    fn record(&mut self, name: &str) {
        self.written.insert(name.to_string(), self.dir.join(name));
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<(), LabError> {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            config_digest: &self.digest,
            experiment: self.experiment,
            seed: self.seed,
            report,
        };
        let text = serde_json::to_string_pretty(&env).map_err(|e| LabError::Io(e.to_string()))?;
        std::fs::write(self.dir.join(name), text + "\n")?;
        self.record(name);
        Ok(())
    }

    /// Writes `header` and `rows` after the provenance comment line.
    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), LabError> {
        let mut text = format!(
            "# schema_version={SCHEMA_VERSION} config_digest={}\n{header}\n",
            self.digest
        );
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        std::fs::write(self.dir.join(name), text)?;
        self.record(name);
        Ok(())
    }

    /// Saves a trajectory directory stamped with the seed and digest.
    pub fn write_trajectory(&mut self, name: &str, traj: &Trajectory) -> Result<(), LabError> {
        let stamped = traj.clone().with_provenance(Provenance {
            seed: Some(self.seed),
            config_digest: Some(self.digest.clone()),
        });
        stamped.save(&self.dir.join(name))?;
        self.record(&format!("{name}/manifest.json"));
        self.record(&format!("{name}/samples.bin"));
        Ok(())
    }

    fn entries(&self) -> Result<Vec<ArtifactEntry>, LabError> {
        self.written
            .iter()
            .map(|(name, path)| {
                Ok(ArtifactEntry {
                    path: name.clone(),
                    sha256: sha256_hex(&std::fs::read(path)?),
                })
            })
            .collect()
    }
}

/// Output directory used when neither the config nor the caller sets one.
pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from("runs").join(format!("{}-{}", cfg.experiment.name(), &cfg.digest()[..12]))
}

fn prepare_dir(dir: &Path, digest: &str, force: bool) -> Result<(), LabError> {
    let manifest = dir.join(MANIFEST);
    if manifest.exists() && !force {
        let text = std::fs::read_to_string(&manifest)?;
        let previous: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LabError::Io(format!("{}: {e}", manifest.display())))?;
        let old = previous.get("config_digest").and_then(|v| v.as_str()).unwrap_or("");
        if old != digest {
            return Err(LabError::Config(format!(
                "{} holds a run with config digest {old}; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir)?;
    let marker = dir.join(FAILED_MARKER);
    if marker.exists() {
        std::fs::remove_file(marker)?;
    }
    Ok(())
}

fn write_manifest(art: &Artifacts, cfg: &ExperimentConfig, error: Option<&LabError>) -> Result<Manifest, LabError> {
    let mut resolved = cfg.clone();
    resolved.out = None;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_digest: art.digest.clone(),
        experiment: art.experiment.to_string(),
        seed: cfg.seed,
        status: if error.is_some() { "failed" } else { "complete" }.into(),
        error: error.map(|e| e.to_string()),
        config: resolved,
        artifacts: art.entries()?,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| LabError::Io(e.to_string()))?;
    std::fs::write(art.dir.join(MANIFEST), text + "\n")?;
    Ok(manifest)
}

/// Runs the configured experiment and writes its artifacts.
///
/// On a numerical failure the artifacts written so far are kept, the
/// manifest is marked `failed` and a `FAILED` file holds the message.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Manifest, LabError> {
    cfg.validate()?;
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| default_out_dir(cfg));
    prepare_dir(&dir, &cfg.digest(), opts.force)?;
    let mut art = Artifacts::new(dir, cfg);
    log::info!("{} -> {} (digest {})", cfg.experiment.name(), art.dir.display(), &art.digest[..12]);
    let result = match opts.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| LabError::Config(format!("--jobs: {e}")))?;
            pool.install(|| experiments::execute(cfg, &mut art))
        }
        None => experiments::execute(cfg, &mut art),
    };
    match result {
        Ok(()) => write_manifest(&art, cfg, None),
        Err(e) => {
            if matches!(e, LabError::Numerical(_)) {
                std::fs::write(art.dir.join(FAILED_MARKER), format!("{e}\n"))?;
                write_manifest(&art, cfg, Some(&e))?;
            }
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(LabError::Config(String::new()).exit_code(), 2);
        assert_eq!(LabError::Numerical(String::new()).exit_code(), 3);
        assert_eq!(LabError::Io(String::new()).exit_code(), 4);
    }

    #[test]
    fn mismatched_digest_is_refused_unless_forced() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Spectrum);
        cfg.initial.source = InitialSource::Zero;
        cfg.spectrum.gaps = 2;
        let opts = RunOptions {
            out: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        run(&cfg, &opts).unwrap();
        run(&cfg, &opts).unwrap();
        cfg.seed = 5;
        let err = run(&cfg, &opts).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--force"));
        run(&cfg, &RunOptions { force: true, ..opts }).unwrap();
    }
}
