use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, Result};
use crate::probe::ProbeHyper;
use crate::taskgen::{manifest_name, PromptId, TaskId};
use crate::tensorio::{activation_file_name, sidecar_path};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllLayers {
    #[serde(rename = "all")]
    All,
}

/// `"all"` or an explicit list of 0-based post-block layer indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerSelection {
    All(AllLayers),
    List(Vec<usize>),
}

impl LayerSelection {
    pub fn all() -> Self {
        LayerSelection::All(AllLayers::All)
    }
}

impl Default for LayerSelection {
    fn default() -> Self {
        Self::all()
    }
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub tasks: Vec<TaskId>,
    pub prompts: Vec<PromptId>,
    #[serde(default)]
    pub layers: LayerSelection,
    #[serde(default)]
    pub seed: u64,
    /// Directory holding `{task}.{prompt}.jsonl` manifests and ACTV files.
    pub activations: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub hyper: ProbeHyper,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl ExperimentPlan {
    pub fn new(tasks: Vec<TaskId>, prompts: Vec<PromptId>, activations: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            tasks,
            prompts,
            layers: LayerSelection::all(),
            seed: 0,
            activations: activations.into(),
            out: out.into(),
            hyper: ProbeHyper::default(),
            jobs: 1,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| ExperimentError::InvalidPlan(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    /// Checks the fields that need no file system access.
    pub fn check(&self) -> Result<()> {
        self.hyper
            .validate()
            .map_err(|e| ExperimentError::InvalidPlan(e.to_string()))?;
        if self.jobs == 0 {
            return Err(ExperimentError::InvalidPlan("jobs must be at least 1".into()));
        }
        if self.tasks.iter().collect::<BTreeSet<_>>().len() != self.tasks.len() {
            return Err(ExperimentError::InvalidPlan("duplicate task".into()));
        }
        if self.prompts.iter().collect::<BTreeSet<_>>().len() != self.prompts.len() {
            return Err(ExperimentError::InvalidPlan("duplicate prompt".into()));
        }
        if let LayerSelection::List(l) = &self.layers {
            if l.iter().collect::<BTreeSet<_>>().len() != l.len() {
                return Err(ExperimentError::InvalidPlan("duplicate layer".into()));
            }
        }
        Ok(())
    }

    pub fn manifest_path(&self, task: TaskId, prompt: PromptId) -> PathBuf {
        self.activations.join(manifest_name(task, prompt))
    }

    pub fn activation_path(&self, task: TaskId, prompt: PromptId, layer: usize) -> PathBuf {
        self.activations.join(activation_file_name(task.as_str(), prompt.as_str(), layer))
    }

    /// Layers with an activation file for `(task, prompt)`, ascending.
    pub fn available_layers(&self, task: TaskId, prompt: PromptId) -> Result<Vec<usize>> {
        let prefix = format!("{task}.{prompt}.layer");
        let entries = std::fs::read_dir(&self.activations).map_err(|source| ExperimentError::Io {
            path: self.activations.clone(),
            source,
        })?;
        let mut layers: Vec<usize> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix(&prefix)?.strip_suffix(".actv")?.parse().ok()
            })
            .collect();
        layers.sort_unstable();
        Ok(layers)
    }

    /// Explicit layers, or those found for the first (task, prompt) pair.
    pub fn resolve_layers(&self) -> Result<Vec<usize>> {
        match &self.layers {
            LayerSelection::List(l) => {
                let mut l = l.clone();
                l.sort_unstable();
                Ok(l)
            }
            LayerSelection::All(_) => match (self.tasks.first(), self.prompts.first()) {
                (Some(&t), Some(&p)) => {
                    let layers = self.available_layers(t, p)?;
                    if layers.is_empty() {
                        return Err(ExperimentError::MissingInputs(vec![self.activation_path(t, p, 0)]));
                    }
                    Ok(layers)
                }
                _ => Ok(Vec::new()),
            },
        }
    }

    /// Every manifest, activation file and sidecar the given triples need
    /// that is not on disk.
    pub fn missing_inputs(&self, tasks: &[TaskId], prompts: &[PromptId], layers: &[usize]) -> Vec<PathBuf> {
        let mut missing = Vec::new();
        for &t in tasks {
            for &p in prompts {
                let m = self.manifest_path(t, p);
                if !m.is_file() {
                    missing.push(m);
                }
                for &l in layers {
                    let a = self.activation_path(t, p, l);
                    let s = sidecar_path(&a);
                    if !a.is_file() {
                        missing.push(a);
                    }
                    if !s.is_file() {
                        missing.push(s);
                    }
                }
            }
        }
        missing
    }
}
