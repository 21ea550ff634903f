//! Synthetic activation stacks with planted truth and polarity directions.
//!
//! For example i at layer ℓ:
//!
//! ```text
//! h_i(ℓ) = σ·g_i + y_i·s_G(ℓ)·R(ℓ)u_G + p_i·y_i·s_p(ℓ)·R(ℓ)u_p
//! ```
//!
//! with `y_i, p_i ∈ {−1, +1}` (truth, affirmative/negated), `g_i` a
//! standard Gaussian drawn once per example and shared by all layers, and
//! `R(ℓ)` a rotation by θ(ℓ) inside the plane `span(u_G, u_r)`, where `u_r`
//! is orthogonal to both planted directions (so `R(ℓ)u_p = u_p`).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::linalg::{dot, normalized};
use crate::taskgen::{self, manifest_name, LabeledStatement, Meta, PromptId, TaskId};
use crate::tensorio::{self, activation_file_name, ActivationBatch};

const DIRECTION_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    TensorIo(#[from] tensorio::TensorIoError),
    #[error(transparent)]
    Taskgen(#[from] taskgen::TaskgenError),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n: usize,
    pub layers: usize,
    /// u_G
    pub truth_dir: Vec<f64>,
    /// u_p, orthogonal to u_G
    pub polarity_dir: Vec<f64>,
    /// u_r, the second axis of the rotation plane
    pub rotation_partner: Vec<f64>,
    /// s_G(ℓ)
    pub truth_sep: Vec<f64>,
    /// s_p(ℓ)
    pub polarity_sep: Vec<f64>,
    /// θ(ℓ) in radians
    pub rotation: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian_vector(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random unit vectors, mutually orthogonal (Gram–Schmidt).
pub fn random_orthonormal(d: usize, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian_vector(rng, d);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        if let Some(u) = normalized(&v) {
            basis.push(u);
        }
    }
    basis
}

impl SyntheticSpec {
    /// Seeded random directions, no signal, unit noise.
    pub fn new(d: usize, n: usize, layers: usize, seed: u64) -> Self {
        let mut dirs = if d >= 3 {
            random_orthonormal(d, 3, &mut stream(seed, DIRECTION_STREAM))
        } else {
            vec![vec![0.0; d]; 3]
        };
        let rotation_partner = dirs.pop().unwrap();
        let polarity_dir = dirs.pop().unwrap();
        let truth_dir = dirs.pop().unwrap();
        Self {
            d,
            n,
            layers,
            truth_dir,
            polarity_dir,
            rotation_partner,
            truth_sep: vec![0.0; layers],
            polarity_sep: vec![0.0; layers],
            rotation: vec![0.0; layers],
            noise: 1.0,
            seed,
        }
    }

    pub fn with_truth(mut self, schedule: impl IntoIterator<Item = f64>) -> Self {
        self.truth_sep = schedule.into_iter().collect();
        self
    }

    pub fn with_constant_truth(self, s: f64) -> Self {
        let layers = self.layers;
        self.with_truth(std::iter::repeat_n(s, layers))
    }

    pub fn with_polarity(mut self, schedule: impl IntoIterator<Item = f64>) -> Self {
        self.polarity_sep = schedule.into_iter().collect();
        self
    }

    pub fn with_rotation(mut self, schedule: impl IntoIterator<Item = f64>) -> Self {
        self.rotation = schedule.into_iter().collect();
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise = sigma;
        self
    }

    /// Replaces the planted directions; the rotation partner is re-derived
    /// to stay orthogonal to both.
    pub fn with_directions(mut self, truth: Vec<f64>, polarity: Vec<f64>) -> Self {
        let mut partner = self.rotation_partner.clone();
        for b in [&truth, &polarity] {
            if let Some(u) = normalized(b) {
                let c = dot(&partner, &u);
                partner.iter_mut().zip(&u).for_each(|(x, y)| *x -= c * y);
            }
        }
        self.rotation_partner = normalized(&partner).unwrap_or(partner);
        self.truth_dir = truth;
        self.polarity_dir = polarity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.d < 3 {
            return bad(format!("d must be at least 3, got {}", self.d));
        }
        if self.n < 4 {
            return bad(format!("n must be at least 4, got {}", self.n));
        }
        if self.layers == 0 {
            return bad("layers must be positive".into());
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return bad(format!("noise scale must be positive, got {}", self.noise));
        }
        for (name, v) in [
            ("truth_dir", &self.truth_dir),
            ("polarity_dir", &self.polarity_dir),
            ("rotation_partner", &self.rotation_partner),
        ] {
            if v.len() != self.d {
                return bad(format!("{name} has length {}, expected {}", v.len(), self.d));
            }
            if (dot(v, v).sqrt() - 1.0).abs() > 1e-8 {
                return bad(format!("{name} is not a unit vector"));
            }
        }
        if dot(&self.truth_dir, &self.polarity_dir).abs() > 1e-8 {
            return bad("truth and polarity directions are not orthogonal".into());
        }
        if dot(&self.truth_dir, &self.rotation_partner).abs() > 1e-8
            || dot(&self.polarity_dir, &self.rotation_partner).abs() > 1e-8
        {
            return bad("rotation partner is not orthogonal to the planted directions".into());
        }
        for (name, v) in [
            ("truth schedule", &self.truth_sep),
            ("polarity schedule", &self.polarity_sep),
            ("rotation schedule", &self.rotation),
        ] {
            if v.len() != self.layers {
                return bad(format!("{name} has {} entries for {} layers", v.len(), self.layers));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} has a non-finite entry"));
            }
        }
        if self.truth_sep.iter().chain(&self.polarity_sep).any(|&s| s < 0.0) {
            return bad("separations must be non-negative".into());
        }
        Ok(())
    }

    /// R(ℓ)u_G.
    pub fn truth_direction_at(&self, layer: usize) -> Vec<f64> {
        let (s, c) = self.rotation[layer].sin_cos();
        self.truth_dir
            .iter()
            .zip(&self.rotation_partner)
            .map(|(g, r)| c * g + s * r)
            .collect()
    }
}

/// A generated stack: one batch per layer plus per-example truth labels and
/// polarity flags (`true` = affirmative).
#[derive(Debug, Clone)]
pub struct SyntheticStack {
    pub spec: SyntheticSpec,
    pub labels: Vec<bool>,
    pub affirmative: Vec<bool>,
    pub layers: Vec<ActivationBatch>,
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticStack> {
    spec.validate()?;
    let n = spec.n;
    // balanced over (truth, polarity), then shuffled
    let mut cells: Vec<(bool, bool)> = (0..n).map(|i| (i % 2 == 0, (i / 2) % 2 == 0)).collect();
    {
        use rand::seq::SliceRandom;
        cells.shuffle(&mut stream(spec.seed, LABEL_STREAM));
    }
    let labels: Vec<bool> = cells.iter().map(|c| c.0).collect();
    let affirmative: Vec<bool> = cells.iter().map(|c| c.1).collect();

    let mut noise_rng = stream(spec.seed, NOISE_STREAM);
    let noise: Vec<f64> = (0..n * spec.d).map(|_| noise_rng.sample(StandardNormal)).collect();

    let layers = (0..spec.layers)
        .map(|layer| {
            let truth = spec.truth_direction_at(layer);
            let s_g = spec.truth_sep[layer];
            let s_p = spec.polarity_sep[layer];
            let mut data = Vec::with_capacity(n * spec.d);
            for i in 0..n {
                let y = if labels[i] { 1.0 } else { -1.0 };
                let p = if affirmative[i] { 1.0 } else { -1.0 };
                let g = &noise[i * spec.d..(i + 1) * spec.d];
                data.extend((0..spec.d).map(|j| {
                    (spec.noise * g[j] + y * s_g * truth[j] + p * y * s_p * spec.polarity_dir[j]) as f32
                }));
            }
            ActivationBatch {
                layer,
                n,
                d: spec.d,
                data,
                example_ids: (0..n as u64).collect(),
                task: "synthetic".into(),
                prompt: PromptId::NoPrompt.to_string(),
                model: "synthetic".into(),
            }
        })
        .collect();
    Ok(SyntheticStack {
        spec: spec.clone(),
        labels,
        affirmative,
        layers,
    })
}

impl SyntheticStack {
    pub fn indices(&self, affirmative: Option<bool>) -> Vec<usize> {
        (0..self.spec.n)
            .filter(|&i| affirmative.is_none_or(|a| self.affirmative[i] == a))
            .collect()
    }

    /// Rows selected by `idx` at `layer`, with their labels.
    pub fn select(&self, layer: usize, idx: &[usize]) -> (ActivationBatch, Vec<bool>) {
        let batch = self.layers[layer].select_rows(idx);
        (batch, idx.iter().map(|&i| self.labels[i]).collect())
    }

    /// Manifest rows for the examples in `idx`, split 70/30 (stratified by
    /// label) with `seed`.
    pub fn statements(&self, idx: &[usize], task: TaskId, prompt: PromptId, seed: u64) -> Result<Vec<LabeledStatement>> {
        let rows: Vec<LabeledStatement> = idx
            .iter()
            .map(|&i| {
                let text = format!("synthetic example {i}");
                let mut meta = Meta::new();
                meta.insert("synthetic".into(), json!(true));
                meta.insert(
                    "polarity".into(),
                    json!(if self.affirmative[i] { "affirmative" } else { "negated" }),
                );
                meta.insert("statement".into(), json!(text));
                LabeledStatement {
                    id: i as u64,
                    task,
                    text,
                    label: self.labels[i],
                    prompt,
                    split: None,
                    meta,
                }
            })
            .collect();
        let (train, test) = taskgen::split_dataset(&rows, 0.7, seed)?;
        let mut all: Vec<_> = train.into_iter().chain(test).collect();
        all.sort_by_key(|s| s.id);
        Ok(all)
    }

    /// Writes a manifest and one activation file per layer under `root`.
    /// With `negated_task`, negated examples go to that task and
    /// affirmative ones to `task`; otherwise every example goes to `task`.
    pub fn write(&self, root: &Path, task: TaskId, negated_task: Option<TaskId>, prompt: PromptId, seed: u64) -> Result<()> {
        std::fs::create_dir_all(root).map_err(taskgen::TaskgenError::from)?;
        let groups = match negated_task {
            Some(neg) => vec![(task, self.indices(Some(true))), (neg, self.indices(Some(false)))],
            None => vec![(task, self.indices(None))],
        };
        for (t, idx) in groups {
            let manifest = self.statements(&idx, t, prompt, seed)?;
            taskgen::write_jsonl(&root.join(manifest_name(t, prompt)), &manifest)?;
            for layer in 0..self.spec.layers {
                let mut batch = self.layers[layer].select_rows(&idx);
                batch.task = t.to_string();
                batch.prompt = prompt.to_string();
                let path = root.join(activation_file_name(t.as_str(), prompt.as_str(), layer));
                tensorio::write_activations(&batch, &path)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_orthonormal() {
        let spec = SyntheticSpec::new(16, 8, 1, 3);
        spec.validate().unwrap();
        assert!(dot(&spec.truth_dir, &spec.polarity_dir).abs() < 1e-12);
        let moved = spec.clone().with_directions(spec.polarity_dir.clone(), spec.truth_dir.clone());
        moved.validate().unwrap();
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = SyntheticSpec::new(8, 8, 2, 0);
        assert!(base.clone().with_truth([1.0]).validate().is_err());
        assert!(base.clone().with_truth([1.0, -1.0]).validate().is_err());
        assert!(base.clone().with_noise(0.0).validate().is_err());
        assert!(SyntheticSpec::new(2, 8, 2, 0).validate().is_err());
        let mut skew = base.clone();
        skew.polarity_dir = skew.truth_dir.clone();
        assert!(skew.validate().is_err());
        assert!(gen_synthetic(&base.with_polarity([f64::NAN, 0.0])).is_err());
    }

    #[test]
    fn cells_are_balanced_and_generation_is_deterministic() {
        let spec = SyntheticSpec::new(8, 40, 2, 5).with_constant_truth(1.0);
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        assert_eq!(a.layers, b.layers);
        for (y, p) in [(true, true), (true, false), (false, true), (false, false)] {
            let count = (0..40).filter(|&i| a.labels[i] == y && a.affirmative[i] == p).count();
            assert_eq!(count, 10);
        }
    }

    #[test]
    fn class_mean_gap_along_truth_matches_twice_the_separation() {
        let s_g = 1.5;
        let spec = SyntheticSpec::new(16, 2000, 1, 9).with_constant_truth(s_g);
        let stack = gen_synthetic(&spec).unwrap();
        let proj: Vec<f64> = stack.layers[0]
            .rows()
            .map(|r| crate::linalg::dot_f32(r, &spec.truth_dir))
            .collect();
        let mean = |c: bool| {
            let v: Vec<f64> = proj.iter().zip(&stack.labels).filter(|(_, &y)| y == c).map(|(p, _)| *p).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let gap = mean(true) - mean(false);
        let se = (1.0 / 1000.0 + 1.0 / 1000.0f64).sqrt();
        assert!((gap - 2.0 * s_g).abs() < 3.0 * se, "gap {gap}");
    }

    #[test]
    fn rotation_moves_only_the_truth_direction() {
        let spec = SyntheticSpec::new(8, 8, 2, 1).with_rotation([0.0, std::f64::consts::FRAC_PI_2]);
        let r0 = spec.truth_direction_at(0);
        let r1 = spec.truth_direction_at(1);
        assert!(dot(&r0, &r1).abs() < 1e-12);
        assert!(dot(&r1, &spec.polarity_dir).abs() < 1e-12);
        assert!((dot(&r1, &spec.rotation_partner) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn writes_manifests_and_layer_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec::new(6, 20, 3, 2).with_constant_truth(2.0).with_polarity([1.0; 3]);
        let stack = gen_synthetic(&spec).unwrap();
        stack.write(dir.path(), TaskId::F0, Some(TaskId::F1), PromptId::NoPrompt, 2).unwrap();
        for task in ["F0", "F1"] {
            let manifest = taskgen::read_jsonl(&dir.path().join(format!("{task}.no-prompt.jsonl"))).unwrap();
            assert_eq!(manifest.len(), 10);
            for layer in 0..3 {
                let b = tensorio::read_activations(&dir.path().join(activation_file_name(task, "no-prompt", layer))).unwrap();
                assert_eq!((b.n, b.d, b.layer), (10, 6, layer));
                let ids: Vec<u64> = manifest.iter().map(|s| s.id).collect();
                assert_eq!(b.example_ids, ids);
            }
        }
    }
}
