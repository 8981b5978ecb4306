//! Run configuration for `spanrel train`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spanrel::encoder::EncoderConfig;
use spanrel::model::HeadConfig;
use spanrel::schema::{builtin_schema, SchemaOverrides, TaskName, TaskSchema};
use spanrel::trainer::TrainerConfig;

/// One task of a run: its BRAT train/dev directories and schema overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub task: TaskName,
    pub train: PathBuf,
    pub dev: PathBuf,
    #[serde(default)]
    pub schema: SchemaOverrides,
}

impl TaskEntry {
    pub fn schema(&self) -> Result<TaskSchema> {
        builtin_schema(self.task)
            .apply(&self.schema)
            .with_context(|| format!("schema overrides for {}", self.task))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds both initialization and training; `--seed` takes precedence,
    /// then this, then `trainer.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub head: HeadConfig,
    pub tasks: Vec<TaskEntry>,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses `path` and resolves every relative path against its
    /// directory. Input paths must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base)?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) -> Result<()> {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if self.tasks.is_empty() {
            bail!("config lists no tasks");
        }
        for t in &mut self.tasks {
            join(&mut t.train);
            join(&mut t.dev);
            for p in [&t.train, &t.dev] {
                if !p.is_dir() {
                    bail!("{} data directory {} does not exist", t.task, p.display());
                }
            }
            t.schema()?;
        }
        if let Some(p) = &mut self.encoder.pretrained_vectors {
            join(p);
            if !p.is_file() {
                bail!("pretrained vectors {} do not exist", p.display());
            }
        }
        if let Some(p) = &mut self.out {
            join(p);
        }
        Ok(())
    }

    pub fn effective_seed(&self, cli: Option<u64>) -> u64 {
        cli.or(self.seed).unwrap_or(self.trainer.seed)
    }

    /// Schema of `task` with the overrides of its entry.
    pub fn schema_for(&self, task: TaskName) -> Result<Option<TaskSchema>> {
        self.tasks.iter().find(|t| t.task == task).map(TaskEntry::schema).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let ok = r#"{"tasks": [{"task": "NER", "train": "a", "dev": "b"}]}"#;
        assert!(RunConfig::from_json(ok).is_ok());
        let top = r#"{"tasks": [], "epochs": 3}"#;
        assert!(RunConfig::from_json(top).is_err());
        let nested = r#"{"tasks": [], "trainer": {"learning_rate": 0.1}}"#;
        assert!(RunConfig::from_json(nested).is_err());
        let schema = r#"{"tasks": [{"task": "NER", "train": "a", "dev": "b", "schema": {"labels": []}}]}"#;
        assert!(RunConfig::from_json(schema).is_err());
    }

    #[test]
    fn paths_resolved_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("data/train")).unwrap();
        std::fs::create_dir_all(dir.path().join("data/dev")).unwrap();
        let mut cfg = RunConfig::from_json(
            r#"{"seed": 4, "out": "run", "tasks": [{"task": "NER", "train": "data/train", "dev": "data/dev"}]}"#,
        )
        .unwrap();
        cfg.resolve(dir.path()).unwrap();
        assert_eq!(cfg.tasks[0].train, dir.path().join("data/train"));
        assert_eq!(cfg.out.as_deref(), Some(dir.path().join("run").as_path()));
        assert_eq!(cfg.effective_seed(None), 4);
        assert_eq!(cfg.effective_seed(Some(9)), 9);

        let mut missing = RunConfig::from_json(r#"{"tasks": [{"task": "NER", "train": "nope", "dev": "data/dev"}]}"#).unwrap();
        assert!(missing.resolve(dir.path()).is_err());
    }
}
