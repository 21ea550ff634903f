//! Experiment grids over an activation directory.
//!
//! An [`Experiment`] validates a plan up front (every manifest and
//! activation file must exist), then runs independent (task, prompt, layer)
//! jobs on a thread pool of `plan.jobs` workers. Results are reduced in job
//! order, so outputs do not depend on scheduling. Probes are cached under
//! `{out}/probes/` keyed by task, prompt, layer, hyperparameter fingerprint
//! and seed.
//!
//! Probes train on the manifest's train split and are scored on the test
//! split. AUROC is computed on logits.

mod plan;
pub mod plot;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

pub use plan::{AllLayers, ExperimentPlan, LayerSelection};
use plot::{ScatterPanel, Series};

use crate::metrics::{
    self, auroc, cross_task_matrix, polarity_decompose, probe_similarity_heatmap, project_2d, variance_ratio,
    EvalMatrix, EvalSet, Labeled, MetricsError, Projection2d,
};
use crate::probe::{fit_probe, load_probe, ProbeError, ProbeModel};
use crate::taskgen::{read_jsonl, PromptId, Split, TaskId, TaskgenError};
use crate::tensorio::{read_activations, ActivationBatch, TensorIoError};

fn fmt_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| format!("\n  {}", p.display())).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("missing input files:{}", fmt_paths(.0))]
    MissingInputs(Vec<PathBuf>),
    #[error("layer {layer} is not in the plan (available: {available:?})")]
    LayerUnavailable { layer: usize, available: Vec<usize> },
    #[error("example ids differ between {left} and {right}: {detail}")]
    IdMisalignment { left: String, right: String, detail: String },
    #[error("{}: example {id} is not in the manifest", path.display())]
    UnknownExample { path: PathBuf, id: u64 },
    #[error("{}: example {id} has no train/test split", path.display())]
    MissingSplit { path: PathBuf, id: u64 },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Taskgen(#[from] TaskgenError),
    #[error(transparent)]
    TensorIo(#[from] TensorIoError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ExperimentError {
    /// Problems with the plan or its inputs, as opposed to failures while
    /// computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ExperimentError::InvalidPlan(_)
                | ExperimentError::MissingInputs(_)
                | ExperimentError::LayerUnavailable { .. }
                | ExperimentError::IdMisalignment { .. }
                | ExperimentError::UnknownExample { .. }
                | ExperimentError::MissingSplit { .. }
        )
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug)]
struct Manifest {
    path: PathBuf,
    /// id → (label, split), in id order
    entries: BTreeMap<u64, (bool, Split)>,
}

/// One task's activations at one layer with manifest labels and splits.
#[derive(Debug, Clone)]
pub struct TaskLayer {
    pub batch: ActivationBatch,
    pub labels: Vec<bool>,
    pub splits: Vec<Split>,
}

impl TaskLayer {
    pub fn part(&self, split: Split) -> (ActivationBatch, Vec<bool>) {
        let idx: Vec<usize> = (0..self.batch.n).filter(|&i| self.splits[i] == split).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (self.batch.select_rows(&idx), labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub task: TaskId,
    pub prompt: PromptId,
    pub layer: usize,
    pub auroc: f64,
    pub variance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationPoint {
    pub source: TaskId,
    pub target: TaskId,
    pub prompt: PromptId,
    pub layer: usize,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferPoint {
    pub layer: usize,
    pub in_domain: f64,
    pub transfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarityPoint {
    pub prompt: PromptId,
    pub layer: usize,
    pub frac_g: f64,
    pub frac_p: f64,
}

#[derive(Debug, Clone)]
pub struct TaskProjection {
    pub task: TaskId,
    pub prompt: PromptId,
    pub example_ids: Vec<u64>,
    pub labels: Vec<bool>,
    pub projection: Projection2d,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub operation: String,
    pub kind: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportIndex {
    pub plan: ExperimentPlan,
    pub layers: Vec<usize>,
    pub entries: Vec<ReportEntry>,
}

pub struct Experiment {
    plan: ExperimentPlan,
    layers: Vec<usize>,
    manifests: Mutex<HashMap<(TaskId, PromptId), Arc<Manifest>>>,
    pool: rayon::ThreadPool,
}

fn fmt_layer(layer: usize) -> String {
    format!("layer{layer:02}")
}

impl Experiment {
    /// Validates the plan and that every input it references exists.
    pub fn new(plan: ExperimentPlan) -> Result<Self> {
        plan.check()?;
        if !plan.tasks.is_empty() && !plan.prompts.is_empty() && !plan.activations.is_dir() {
            return Err(ExperimentError::MissingInputs(vec![plan.activations.clone()]));
        }
        let layers = plan.resolve_layers()?;
        let missing = plan.missing_inputs(&plan.tasks, &plan.prompts, &layers);
        if !missing.is_empty() {
            return Err(ExperimentError::MissingInputs(missing));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.jobs)
            .build()
            .map_err(|e| ExperimentError::InvalidPlan(e.to_string()))?;
        Ok(Self {
            plan,
            layers,
            manifests: Mutex::new(HashMap::new()),
            pool,
        })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    fn require(&self, tasks: &[TaskId], prompts: &[PromptId], layers: &[usize]) -> Result<()> {
        let missing = self.plan.missing_inputs(tasks, prompts, layers);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::MissingInputs(missing))
        }
    }

    fn require_layer(&self, layer: usize) -> Result<()> {
        if self.layers.contains(&layer) {
            Ok(())
        } else {
            Err(ExperimentError::LayerUnavailable {
                layer,
                available: self.layers.clone(),
            })
        }
    }

    fn manifest(&self, task: TaskId, prompt: PromptId) -> Result<Arc<Manifest>> {
        if let Some(m) = self.manifests.lock().unwrap().get(&(task, prompt)) {
            return Ok(m.clone());
        }
        let path = self.plan.manifest_path(task, prompt);
        let mut entries = BTreeMap::new();
        for s in read_jsonl(&path)? {
            let split = s.split.ok_or(ExperimentError::MissingSplit {
                path: path.clone(),
                id: s.id,
            })?;
            entries.insert(s.id, (s.label, split));
        }
        let m = Arc::new(Manifest { path, entries });
        self.manifests.lock().unwrap().insert((task, prompt), m.clone());
        Ok(m)
    }

    /// Activations joined with manifest labels and splits.
    pub fn load(&self, task: TaskId, prompt: PromptId, layer: usize) -> Result<TaskLayer> {
        let manifest = self.manifest(task, prompt)?;
        let batch = read_activations(&self.plan.activation_path(task, prompt, layer))?;
        let mut labels = Vec::with_capacity(batch.n);
        let mut splits = Vec::with_capacity(batch.n);
        for &id in &batch.example_ids {
            let &(label, split) = manifest.entries.get(&id).ok_or_else(|| ExperimentError::UnknownExample {
                path: manifest.path.clone(),
                id,
            })?;
            labels.push(label);
            splits.push(split);
        }
        Ok(TaskLayer { batch, labels, splits })
    }

    pub fn probe_path(&self, task: TaskId, prompt: PromptId, layer: usize) -> PathBuf {
        self.plan.out.join("probes").join(format!(
            "{task}.{prompt}.{}.{}.s{}.probe.json",
            fmt_layer(layer),
            self.plan.hyper.fingerprint(),
            self.plan.seed
        ))
    }

    /// The cached probe for (task, prompt, layer), training and saving it
    /// on a miss.
    pub fn probe(&self, task: TaskId, prompt: PromptId, layer: usize, data: &TaskLayer) -> Result<ProbeModel> {
        let path = self.probe_path(task, prompt, layer);
        if let Ok(p) = load_probe(&path) {
            let matches = p.task == task.as_str()
                && p.prompt == prompt.as_str()
                && p.layer == layer
                && p.hyper == self.plan.hyper
                && p.seed == self.plan.seed
                && p.dim() == data.batch.d;
            if matches {
                return Ok(p);
            }
        }
        let (train, labels) = data.part(Split::Train);
        let model = fit_probe(&train, &labels, &self.plan.hyper, self.plan.seed)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        self.write_file(&tmp, model.to_json().as_bytes())?;
        std::fs::rename(&tmp, &path).map_err(|source| ExperimentError::Io { path, source })?;
        Ok(model)
    }

    fn run_jobs<J, R, F>(&self, jobs: &[J], f: F) -> Result<Vec<R>>
    where
        J: Sync,
        R: Send,
        F: Fn(&J) -> Result<R> + Sync + Send,
    {
        self.pool.install(|| jobs.par_iter().map(&f).collect())
    }

    fn write_file(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let io = |source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(path, bytes).map_err(io)
    }

    fn write_output(&self, rel: &str, contents: &str) -> Result<PathBuf> {
        let path = self.plan.out.join(rel);
        self.write_file(&path, contents.as_bytes())?;
        Ok(path)
    }

    fn grid(&self, tasks: &[TaskId], prompts: &[PromptId], layers: &[usize]) -> Vec<(TaskId, PromptId, usize)> {
        let mut jobs = Vec::new();
        for &t in tasks {
            for &p in prompts {
                for &l in layers {
                    jobs.push((t, p, l));
                }
            }
        }
        jobs
    }

    fn in_domain(&self, task: TaskId, prompt: PromptId, layer: usize) -> Result<(TaskLayer, ProbeModel, f64)> {
        let data = self.load(task, prompt, layer)?;
        let probe = self.probe(task, prompt, layer, &data)?;
        let (test, labels) = data.part(Split::Test);
        let score = auroc(&probe.logits(&test)?, &labels)?;
        Ok((data, probe, score))
    }

    // ── Operations ──────────────────────────────────────────────────────────

    /// Trains and scores a single probe; returns it with its file and AUROC.
    pub fn train_one(&self, task: TaskId, prompt: PromptId, layer: usize) -> Result<(ProbeModel, PathBuf, f64)> {
        self.require(&[task], &[prompt], &[layer])?;
        let (_, probe, score) = self.in_domain(task, prompt, layer)?;
        Ok((probe, self.probe_path(task, prompt, layer), score))
    }

    /// In-domain test AUROC and variance ratio (train split) for every
    /// (task, prompt, layer). Writes `tables/layer_sweep.csv`,
    /// `tables/variance_ratio.csv`, per-(task, prompt) probe cosine
    /// matrices across layers and one curve plot per prompt.
    pub fn layer_sweep(&self) -> Result<Vec<SweepPoint>> {
        let jobs = self.grid(&self.plan.tasks, &self.plan.prompts, &self.layers);
        let results = self.run_jobs(&jobs, |&(task, prompt, layer)| {
            let (data, probe, score) = self.in_domain(task, prompt, layer)?;
            let (train, labels) = data.part(Split::Train);
            let vr = variance_ratio(&train, &labels)?;
            Ok((
                SweepPoint {
                    task,
                    prompt,
                    layer,
                    auroc: score,
                    variance_ratio: vr.ratio,
                },
                probe,
            ))
        })?;

        let mut csv = String::from("task,prompt,layer,auroc\n");
        let mut vr_csv = String::from("task,prompt,layer,ratio\n");
        for (p, _) in &results {
            let _ = writeln!(csv, "{},{},{},{}", p.task, p.prompt, p.layer, p.auroc);
            let _ = writeln!(vr_csv, "{},{},{},{}", p.task, p.prompt, p.layer, p.variance_ratio);
        }
        self.write_output("tables/layer_sweep.csv", &csv)?;
        self.write_output("tables/variance_ratio.csv", &vr_csv)?;

        for &prompt in &self.plan.prompts {
            let series: Vec<Series> = self
                .plan
                .tasks
                .iter()
                .map(|&t| Series {
                    name: t.to_string(),
                    points: results
                        .iter()
                        .filter(|(p, _)| p.task == t && p.prompt == prompt)
                        .map(|(p, _)| (p.layer as f64, p.auroc))
                        .collect(),
                })
                .collect();
            let svg = plot::line_chart(&format!("In-domain test AUROC ({prompt})"), "layer", "AUROC", &series, Some((0.0, 1.0)));
            self.write_output(&format!("plots/layer_sweep.{prompt}.svg"), &svg)?;
        }

        if self.layers.len() >= 2 {
            for &task in &self.plan.tasks {
                for &prompt in &self.plan.prompts {
                    let probes: Vec<ProbeModel> = results
                        .iter()
                        .filter(|(p, _)| p.task == task && p.prompt == prompt)
                        .map(|(_, m)| m.clone())
                        .collect();
                    let m = probe_similarity_heatmap(&probes)?;
                    self.write_output(&format!("tables/probe_cosine.{task}.{prompt}.csv"), &m.to_csv())?;
                    let svg = plot::heatmap(
                        &format!("Probe cosine across layers ({task}, {prompt})"),
                        &m.row_labels,
                        &m.col_labels,
                        &m.values,
                        (-1.0, 1.0),
                    );
                    self.write_output(&format!("plots/probe_cosine.{task}.{prompt}.svg"), &svg)?;
                }
            }
        }
        Ok(results.into_iter().map(|(p, _)| p).collect())
    }

    /// AUROC of the `source` probe on the test split of every plan task
    /// (the source included) at the same layer and prompt.
    pub fn generalization_sweep(&self, source: TaskId) -> Result<Vec<GeneralizationPoint>> {
        self.require(&[source], &self.plan.prompts, &self.layers)?;
        let jobs = self.grid(&[source], &self.plan.prompts, &self.layers);
        let targets = &self.plan.tasks;
        let results = self.run_jobs(&jobs, |&(source, prompt, layer)| {
            let data = self.load(source, prompt, layer)?;
            let probe = self.probe(source, prompt, layer, &data)?;
            targets
                .iter()
                .map(|&target| {
                    let (test, labels) = if target == source {
                        data.part(Split::Test)
                    } else {
                        self.load(target, prompt, layer)?.part(Split::Test)
                    };
                    Ok(GeneralizationPoint {
                        source,
                        target,
                        prompt,
                        layer,
                        auroc: auroc(&probe.logits(&test)?, &labels)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let points: Vec<GeneralizationPoint> = results.into_iter().flatten().collect();

        let mut csv = String::from("source,target,prompt,layer,auroc\n");
        for p in &points {
            let _ = writeln!(csv, "{},{},{},{},{}", p.source, p.target, p.prompt, p.layer, p.auroc);
        }
        self.write_output(&format!("tables/xgen.{source}.csv"), &csv)?;
        for &prompt in &self.plan.prompts {
            let series: Vec<Series> = targets
                .iter()
                .map(|&t| Series {
                    name: t.to_string(),
                    points: points
                        .iter()
                        .filter(|p| p.target == t && p.prompt == prompt)
                        .map(|p| (p.layer as f64, p.auroc))
                        .collect(),
                })
                .collect();
            let svg = plot::line_chart(
                &format!("Probe trained on {source}, evaluated per task ({prompt})"),
                "layer",
                "AUROC",
                &series,
                Some((0.0, 1.0)),
            );
            self.write_output(&format!("plots/xgen.{source}.{prompt}.svg"), &svg)?;
        }
        Ok(points)
    }

    fn check_alignment(&self, task: TaskId, a: PromptId, b: PromptId) -> Result<()> {
        let (ma, mb) = (self.manifest(task, a)?, self.manifest(task, b)?);
        if ma.entries == mb.entries {
            return Ok(());
        }
        let detail = match ma.entries.keys().find(|id| !mb.entries.contains_key(id)) {
            Some(id) => format!("id {id} only in the first"),
            None => match mb.entries.keys().find(|id| !ma.entries.contains_key(id)) {
                Some(id) => format!("id {id} only in the second"),
                None => "labels or splits differ".into(),
            },
        };
        Err(ExperimentError::IdMisalignment {
            left: ma.path.display().to_string(),
            right: mb.path.display().to_string(),
            detail,
        })
    }

    /// Probe trained on `source`-prompt activations, scored on the test
    /// split under `source` (in-domain) and under `target` (transfer).
    pub fn prompt_transfer(&self, task: TaskId, source: PromptId, target: PromptId) -> Result<Vec<TransferPoint>> {
        self.require(&[task], &[source, target], &self.layers)?;
        self.check_alignment(task, source, target)?;
        let points = self.run_jobs(&self.layers, |&layer| {
            let (_, probe, in_domain) = self.in_domain(task, source, layer)?;
            let tgt = self.load(task, target, layer)?;
            let mut a = self.load(task, source, layer)?.batch.example_ids;
            let mut b = tgt.batch.example_ids.clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(ExperimentError::IdMisalignment {
                    left: self.plan.activation_path(task, source, layer).display().to_string(),
                    right: self.plan.activation_path(task, target, layer).display().to_string(),
                    detail: "activation rows cover different examples".into(),
                });
            }
            let (test, labels) = tgt.part(Split::Test);
            Ok(TransferPoint {
                layer,
                in_domain,
                transfer: auroc(&probe.logits(&test)?, &labels)?,
            })
        })?;

        let mut csv = String::from("task,source_prompt,target_prompt,layer,in_domain,transfer\n");
        for p in &points {
            let _ = writeln!(csv, "{task},{source},{target},{},{},{}", p.layer, p.in_domain, p.transfer);
        }
        let stem = format!("transfer.{task}.{source}-to-{target}");
        self.write_output(&format!("tables/{stem}.csv"), &csv)?;
        let series = [
            Series {
                name: format!("{source} test"),
                points: points.iter().map(|p| (p.layer as f64, p.in_domain)).collect(),
            },
            Series {
                name: format!("{target} test"),
                points: points.iter().map(|p| (p.layer as f64, p.transfer)).collect(),
            },
        ];
        let svg = plot::line_chart(
            &format!("{task} probe trained on {source}"),
            "layer",
            "AUROC",
            &series,
            Some((0.0, 1.0)),
        );
        self.write_output(&format!("plots/{stem}.svg"), &svg)?;
        Ok(points)
    }

    /// K×K cross-task AUROC at `layer`, one matrix per prompt. Rows are the
    /// training task, columns the evaluation task (test split).
    pub fn full_matrix(&self, layer: usize) -> Result<Vec<(PromptId, EvalMatrix)>> {
        self.require_layer(layer)?;
        let jobs: Vec<(PromptId, TaskId)> = self
            .plan
            .prompts
            .iter()
            .flat_map(|&p| self.plan.tasks.iter().map(move |&t| (p, t)))
            .collect();
        let loaded = self.run_jobs(&jobs, |&(prompt, task)| {
            let data = self.load(task, prompt, layer)?;
            let probe = self.probe(task, prompt, layer, &data)?;
            let (test, labels) = data.part(Split::Test);
            Ok((probe, test, labels))
        })?;

        let k = self.plan.tasks.len();
        let mut out = Vec::new();
        for (pi, &prompt) in self.plan.prompts.iter().enumerate() {
            let chunk = &loaded[pi * k..(pi + 1) * k];
            if chunk.is_empty() {
                continue;
            }
            let probes: Vec<ProbeModel> = chunk.iter().map(|c| c.0.clone()).collect();
            let names: Vec<String> = self.plan.tasks.iter().map(|t| t.to_string()).collect();
            let evals: Vec<EvalSet<'_>> = chunk
                .iter()
                .zip(&names)
                .map(|(c, name)| EvalSet {
                    name,
                    batch: &c.1,
                    labels: &c.2,
                })
                .collect();
            let m = cross_task_matrix(&probes, &evals)?;
            let stem = format!("matrix.{prompt}.{}", fmt_layer(layer));
            self.write_output(&format!("tables/{stem}.csv"), &m.to_csv())?;
            let svg = plot::heatmap(
                &format!("Cross-task AUROC, layer {layer} ({prompt})"),
                &m.row_labels,
                &m.col_labels,
                &m.values,
                (0.0, 1.0),
            );
            self.write_output(&format!("plots/{stem}.svg"), &svg)?;
            out.push((prompt, m));
        }
        Ok(out)
    }

    /// frac_G and frac_p per layer from F0 (affirmative) and F1 (negated)
    /// train splits, for each plan prompt.
    pub fn polarity_sweep(&self) -> Result<Vec<PolarityPoint>> {
        self.require(&[TaskId::F0, TaskId::F1], &self.plan.prompts, &self.layers)?;
        let jobs: Vec<(PromptId, usize)> = self
            .plan
            .prompts
            .iter()
            .flat_map(|&p| self.layers.iter().map(move |&l| (p, l)))
            .collect();
        let points = self.run_jobs(&jobs, |&(prompt, layer)| {
            let (aff, aff_labels) = self.load(TaskId::F0, prompt, layer)?.part(Split::Train);
            let (neg, neg_labels) = self.load(TaskId::F1, prompt, layer)?.part(Split::Train);
            let dec = polarity_decompose(
                Labeled {
                    batch: &aff,
                    labels: &aff_labels,
                },
                Labeled {
                    batch: &neg,
                    labels: &neg_labels,
                },
                &self.plan.hyper,
                self.plan.seed,
            )?;
            Ok(PolarityPoint {
                prompt,
                layer,
                frac_g: dec.frac_g,
                frac_p: dec.frac_p,
            })
        })?;

        for &prompt in &self.plan.prompts {
            let rows: Vec<&PolarityPoint> = points.iter().filter(|p| p.prompt == prompt).collect();
            let mut csv = String::from("layer,frac_g,frac_p\n");
            for p in &rows {
                let _ = writeln!(csv, "{},{},{}", p.layer, p.frac_g, p.frac_p);
            }
            self.write_output(&format!("tables/polarity.{prompt}.csv"), &csv)?;
            let series = [
                Series {
                    name: "t_G".into(),
                    points: rows.iter().map(|p| (p.layer as f64, p.frac_g)).collect(),
                },
                Series {
                    name: "t_p".into(),
                    points: rows.iter().map(|p| (p.layer as f64, p.frac_p)).collect(),
                },
            ];
            let svg = plot::line_chart(
                &format!("Truth variance explained ({prompt})"),
                "layer",
                "fraction",
                &series,
                Some((0.0, 1.0)),
            );
            self.write_output(&format!("plots/polarity.{prompt}.svg"), &svg)?;
        }
        Ok(points)
    }

    /// 2D projection of every example of each task at `layer` using the
    /// task's own probe.
    pub fn projection_report(&self, layer: usize) -> Result<Vec<TaskProjection>> {
        self.require_layer(layer)?;
        let jobs: Vec<(PromptId, TaskId)> = self
            .plan
            .prompts
            .iter()
            .flat_map(|&p| self.plan.tasks.iter().map(move |&t| (p, t)))
            .collect();
        let out = self.run_jobs(&jobs, |&(prompt, task)| {
            let data = self.load(task, prompt, layer)?;
            let probe = self.probe(task, prompt, layer, &data)?;
            Ok(TaskProjection {
                task,
                prompt,
                projection: project_2d(&data.batch, &probe)?,
                example_ids: data.batch.example_ids,
                labels: data.labels,
            })
        })?;

        for &prompt in &self.plan.prompts {
            let mut csv = String::from("task,example_id,label,x,y\n");
            let mut panels = Vec::new();
            for tp in out.iter().filter(|t| t.prompt == prompt) {
                for ((id, label), (x, y)) in tp.example_ids.iter().zip(&tp.labels).zip(&tp.projection.points) {
                    let _ = writeln!(csv, "{},{id},{label},{x},{y}", tp.task);
                }
                panels.push(ScatterPanel {
                    title: tp.task.to_string(),
                    points: tp
                        .projection
                        .points
                        .iter()
                        .zip(&tp.labels)
                        .map(|(&(x, y), &l)| (x, y, l))
                        .collect(),
                });
            }
            let stem = format!("projection.{prompt}.{}", fmt_layer(layer));
            self.write_output(&format!("tables/{stem}.csv"), &csv)?;
            let svg = plot::scatter_grid(&format!("Probe direction vs. top residual direction, layer {layer} ({prompt})"), &panels);
            self.write_output(&format!("plots/{stem}.svg"), &svg)?;
        }
        Ok(out)
    }

    /// Writes `{out}/index.json` listing every table and plot under `out`
    /// with a snapshot of the plan.
    pub fn emit_report(&self) -> Result<ReportIndex> {
        emit_report(&self.plan, &self.layers)
    }
}

fn list_dir(out: &Path, sub: &str, ext: &str) -> Result<Vec<ReportEntry>> {
    let dir = out.join(sub);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let read = std::fs::read_dir(&dir).map_err(|source| ExperimentError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut names: Vec<String> = read
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(&format!(".{ext}")))
        .collect();
    names.sort();
    Ok(names
        .into_iter()
        .map(|n| ReportEntry {
            operation: n.split('.').next().unwrap_or_default().to_string(),
            kind: ext.to_string(),
            path: format!("{sub}/{n}"),
        })
        .collect())
}

/// Index of the tables and plots under `plan.out`, written to
/// `{out}/index.json`. Needs no activation files.
pub fn emit_report(plan: &ExperimentPlan, layers: &[usize]) -> Result<ReportIndex> {
    let mut entries = list_dir(&plan.out, "tables", "csv")?;
    entries.extend(list_dir(&plan.out, "plots", "svg")?);
    let index = ReportIndex {
        plan: plan.clone(),
        layers: layers.to_vec(),
        entries,
    };
    let path = plan.out.join("index.json");
    let io = |source| ExperimentError::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(&plan.out).map_err(io)?;
    let mut json = serde_json::to_string_pretty(&index).expect("index serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(io)?;
    Ok(index)
}

/// Re-scores a persisted probe on the test split of its own task, the way
/// the sweep did.
pub fn rescore(plan: &ExperimentPlan, probe_path: &Path) -> Result<f64> {
    let probe = load_probe(probe_path)?;
    let task: TaskId = probe.task.parse()?;
    let prompt: PromptId = probe.prompt.parse()?;
    let mut single = plan.clone();
    single.tasks = vec![task];
    single.prompts = vec![prompt];
    single.layers = LayerSelection::List(vec![probe.layer]);
    let exp = Experiment::new(single)?;
    let (test, labels) = exp.load(task, prompt, probe.layer)?.part(Split::Test);
    Ok(metrics::auroc(&probe.logits(&test)?, &labels)?)
}
