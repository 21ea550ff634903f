//! True/false statement datasets.
//!
//! Factual tasks F0–F5 are generated from a [`KnowledgeBase`] of
//! city → country facts; arithmetic tasks A1–A3 are random integer
//! expressions. Every [`LabeledStatement`] carries enough `meta` for
//! [`oracle_label`] to recompute its label from first principles.

mod arith;
mod factual;
mod kb;
mod oracle;
mod prompt;
mod split;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use arith::{gen_arith, parse_and_eval, ArithExpression, ArithOp};
pub use factual::{gen_exact_k, gen_exact_k1_k2, gen_f0, gen_f1, gen_f2, country_phrase};
pub use kb::KnowledgeBase;
pub use oracle::oracle_label;
pub use prompt::{apply_prompt, PromptTemplate};
pub use split::split_dataset;

/// Free-form metadata attached to a statement. Keys are kept sorted so the
/// JSON rendering is byte-stable.
pub type Meta = BTreeMap<String, serde_json::Value>;

#[derive(Debug, thiserror::Error)]
pub enum TaskgenError {
    #[error("knowledge base: {0}")]
    InvalidKb(String),
    #[error("knowledge base has a single country; false examples need a second one")]
    SingleCountry,
    #[error("knowledge base too small: {0}")]
    KbTooSmall(String),
    #[error("dataset size must be even, got {0}")]
    OddCount(usize),
    #[error("number of arithmetic operators must be 1, 2 or 3, got {0}")]
    InvalidOps(usize),
    #[error("list length must be in 2..=5, got {0}")]
    InvalidListLen(usize),
    #[error("unknown task id `{0}`")]
    UnknownTask(String),
    #[error("unknown prompt template `{0}`")]
    UnknownPrompt(String),
    #[error("statement {id}: missing or malformed meta field `{field}`")]
    MissingMeta { id: u64, field: &'static str },
    #[error("statement {id}: city `{city}` is not in the knowledge base")]
    UnknownCity { id: u64, city: String },
    #[error("cannot parse arithmetic expression `{0}`")]
    Parse(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("{path}: line {line}: {source}")]
    Jsonl {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TaskgenError> = std::result::Result<T, E>;

// ── Task identifiers ────────────────────────────────────────────────────────

/// The task hierarchy. `F4N3` / `F4N4` are the exact-k variants with list
/// lengths 3 and 4 that sit between F3 (2 cities) and F4 (5 cities).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    F0,
    F1,
    F2,
    F3,
    F4,
    F5,
    A1,
    A2,
    A3,
    #[serde(rename = "F4-N3")]
    F4N3,
    #[serde(rename = "F4-N4")]
    F4N4,
}

impl TaskId {
    pub const ALL: [TaskId; 11] = [
        TaskId::F0,
        TaskId::F1,
        TaskId::F2,
        TaskId::F3,
        TaskId::F4,
        TaskId::F5,
        TaskId::A1,
        TaskId::A2,
        TaskId::A3,
        TaskId::F4N3,
        TaskId::F4N4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::F0 => "F0",
            TaskId::F1 => "F1",
            TaskId::F2 => "F2",
            TaskId::F3 => "F3",
            TaskId::F4 => "F4",
            TaskId::F5 => "F5",
            TaskId::A1 => "A1",
            TaskId::A2 => "A2",
            TaskId::A3 => "A3",
            TaskId::F4N3 => "F4-N3",
            TaskId::F4N4 => "F4-N4",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, TaskId::A1 | TaskId::A2 | TaskId::A3)
    }

    /// Dataset size used by default (1,594 for F0–F2, 2,000 for the
    /// counting tasks, 1,000 for arithmetic).
    pub fn default_size(self) -> usize {
        match self {
            TaskId::F0 | TaskId::F1 | TaskId::F2 => 1594,
            TaskId::F3 | TaskId::F4 | TaskId::F5 | TaskId::F4N3 | TaskId::F4N4 => 2000,
            TaskId::A1 | TaskId::A2 | TaskId::A3 => 1000,
        }
    }

    /// List length of the exact-k family, if this task belongs to it.
    pub fn exact_k_len(self) -> Option<usize> {
        match self {
            TaskId::F3 => Some(2),
            TaskId::F4N3 => Some(3),
            TaskId::F4N4 => Some(4),
            TaskId::F4 => Some(5),
            _ => None,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = TaskgenError;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TaskgenError::UnknownTask(s.to_string()))
    }
}

// ── Prompt identifiers ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptId {
    NoPrompt,
    AskCorrect,
    AskTf,
    AskAble,
    AskArith,
    RandomPrompt,
    ReadPrompt,
}

impl PromptId {
    pub const ALL: [PromptId; 7] = [
        PromptId::NoPrompt,
        PromptId::AskCorrect,
        PromptId::AskTf,
        PromptId::AskAble,
        PromptId::AskArith,
        PromptId::RandomPrompt,
        PromptId::ReadPrompt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptId::NoPrompt => "no-prompt",
            PromptId::AskCorrect => "ask-correct",
            PromptId::AskTf => "ask-tf",
            PromptId::AskAble => "ask-able",
            PromptId::AskArith => "ask-arith",
            PromptId::RandomPrompt => "random-prompt",
            PromptId::ReadPrompt => "read-prompt",
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptId {
    type Err = TaskgenError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ask-t/f" {
            return Ok(PromptId::AskTf);
        }
        PromptId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| TaskgenError::UnknownPrompt(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

// ── Statements ──────────────────────────────────────────────────────────────

/// One labelled statement. `text` is the fully rendered prompt; the bare
/// statement is kept in `meta["statement"]`. `split` is `None` until
/// [`split_dataset`] assigns it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStatement {
    pub id: u64,
    pub task: TaskId,
    pub text: String,
    pub label: bool,
    pub prompt: PromptId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub meta: Meta,
}

impl LabeledStatement {
    /// The statement without any prompt template applied.
    pub fn statement(&self) -> &str {
        self.meta
            .get("statement")
            .and_then(|v| v.as_str())
            .unwrap_or(&self.text)
    }
}

/// Intermediate product of the generators: an unordered item before ids
/// are assigned.
pub(crate) struct Draft {
    pub text: String,
    pub label: bool,
    pub meta: Meta,
}

/// Shuffles drafts and assigns sequential ids.
pub(crate) fn finalize(task: TaskId, mut drafts: Vec<Draft>, rng: &mut impl rand::Rng) -> Vec<LabeledStatement> {
    use rand::seq::SliceRandom;
    drafts.shuffle(rng);
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, mut d)| {
            d.meta
                .insert("statement".into(), serde_json::Value::String(d.text.clone()));
            LabeledStatement {
                id: i as u64,
                task,
                text: d.text,
                label: d.label,
                prompt: PromptId::NoPrompt,
                split: None,
                meta: d.meta,
            }
        })
        .collect()
}

pub(crate) fn rng_for(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn require_even(n: usize) -> Result<()> {
    if n.is_multiple_of(2) {
        Ok(())
    } else {
        Err(TaskgenError::OddCount(n))
    }
}

/// Generates the raw (unsplit, unprompted) dataset for any task.
pub fn generate(task: TaskId, kb: &KnowledgeBase, n: usize, seed: u64) -> Result<Vec<LabeledStatement>> {
    let mut ds = match task {
        TaskId::F0 => gen_f0(kb, n, seed)?,
        TaskId::F1 => gen_f1(kb, n, seed)?,
        TaskId::F2 => gen_f2(kb, n, seed)?,
        TaskId::F5 => gen_exact_k1_k2(kb, n, seed)?,
        TaskId::A1 => gen_arith(1, n, seed)?,
        TaskId::A2 => gen_arith(2, n, seed)?,
        TaskId::A3 => gen_arith(3, n, seed)?,
        TaskId::F3 | TaskId::F4 | TaskId::F4N3 | TaskId::F4N4 => {
            let len = task.exact_k_len().expect("exact-k task");
            gen_exact_k(kb, n, len, seed)?
        }
    };
    for s in &mut ds {
        s.task = task;
    }
    Ok(ds)
}

/// Renders every statement of a dataset through `prompt`.
pub fn with_prompt(ds: &[LabeledStatement], prompt: PromptId) -> Vec<LabeledStatement> {
    let template = PromptTemplate::get(prompt);
    ds.iter()
        .map(|s| LabeledStatement {
            text: template.render(s.statement()),
            prompt,
            ..s.clone()
        })
        .collect()
}

/// Generate → split 70/30 → apply prompt. Statements come back in id order
/// with their split set.
pub fn build_dataset(
    task: TaskId,
    kb: &KnowledgeBase,
    n: usize,
    prompt: PromptId,
    seed: u64,
) -> Result<Vec<LabeledStatement>> {
    let raw = generate(task, kb, n, seed)?;
    if raw.is_empty() {
        return Ok(raw);
    }
    let (train, test) = split_dataset(&raw, 0.7, seed)?;
    let mut all: Vec<_> = train.into_iter().chain(test).collect();
    all.sort_by_key(|s| s.id);
    Ok(with_prompt(&all, prompt))
}

/// Manifest file name for a (task, prompt) pair.
pub fn manifest_name(task: TaskId, prompt: PromptId) -> String {
    format!("{task}.{prompt}.jsonl")
}

pub fn write_jsonl(path: &Path, ds: &[LabeledStatement]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in ds {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<LabeledStatement>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|source| TaskgenError::Jsonl {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(s);
    }
    Ok(out)
}
