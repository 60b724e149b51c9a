use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{PipelineConfig, Result};

/// FNV-1a over a byte stream; content hashes for resumable stages.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn hash_file(path: &Path) -> Result<u64> {
    Ok(fnv1a64(&std::fs::read(path)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub hash: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunRecord {
    /// One per CLI invocation; `run_id` hashes the resolved config, so
    /// reruns of the same setup share an id.
    Header {
        run_id: u64,
        tool_version: String,
        config_toml: String,
    },
    Stage {
        stage: String,
        pair: String,
        outputs: Vec<OutputRecord>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        note: Option<String>,
    },
}

/// Append-only journal of produced artifacts. A stage consults it to skip
/// pairs whose recorded outputs still verify by hash.
pub struct RunManifest {
    path: PathBuf,
    records: Vec<RunRecord>,
}

impl RunManifest {
    pub fn open(config: &PipelineConfig) -> Result<Self> {
        let path = config.work_dir.join("run_manifest.jsonl");
        let mut records = Vec::new();
        if path.exists() {
            for line in BufReader::new(std::fs::File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { path, records })
    }

    /// Record the invocation header (id derived from the config).
    pub fn begin_run(&mut self, config: &PipelineConfig) -> Result<u64> {
        let config_toml = config.to_toml()?;
        let run_id = fnv1a64(config_toml.as_bytes());
        self.append(RunRecord::Header {
            run_id,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_toml,
        })?;
        Ok(run_id)
    }

    /// True when a stage record exists for this pair and every recorded
    /// output file still matches its hash.
    pub fn outputs_verify(&self, stage: &str, pair: &str) -> bool {
        self.records.iter().rev().any(|r| match r {
            RunRecord::Stage {
                stage: s,
                pair: p,
                outputs,
                ..
            } if s == stage && p == pair => outputs
                .iter()
                .all(|o| hash_file(&o.path).is_ok_and(|h| h == o.hash)),
            _ => false,
        })
    }

    pub fn record_stage(
        &mut self,
        stage: &str,
        pair: &str,
        paths: &[PathBuf],
        note: Option<String>,
    ) -> Result<()> {
        let outputs = paths
            .iter()
            .map(|p| {
                Ok(OutputRecord {
                    path: p.clone(),
                    hash: hash_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.append(RunRecord::Stage {
            stage: stage.to_string(),
            pair: pair.to_string(),
            outputs,
            note,
        })
    }

    fn append(&mut self, record: RunRecord) -> Result<()> {
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        serde_json::to_writer(&mut file, &record)?;
        file.write_all(b"\n")?;
        self.records.push(record);
        Ok(())
    }
}
