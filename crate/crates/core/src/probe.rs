//! Mean-centred, bias-free logistic probes.
//!
//! A probe at layer ℓ is a pair (w, μ): μ is the mean of the training
//! activations and `p(y = 1 | h) = σ(wᵀ(h − μ))`. Training minimises the
//! mean binary cross-entropy plus `(λ/2)‖w‖²` with full-batch Adam from
//! `w = 0`. Inputs are `f32`; all accumulation is `f64`. The stored w and μ
//! are `f32`, and the training data is centred with the rounded μ, so
//! scores recomputed from a saved probe match training exactly.

use std::path::Path;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::dot;
use crate::tensorio::ActivationBatch;

pub const PROBE_FORMAT: &str = "truthlens-probe";
pub const PROBE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("need at least 2 rows to centre, got {0}")]
    TooFewRows(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in training input")]
    NonFinite,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("training produced a zero or non-finite weight vector")]
    DegenerateWeights,
    #[error("probe file version {found} is not supported (expected {PROBE_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("malformed probe file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ProbeError> = std::result::Result<T, E>;

/// Optimiser settings. Defaults: Adam, lr 1e-3, weight decay 0.1 (coupled
/// L2), 1000 full-batch steps, β = (0.9, 0.999), ε = 1e-8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeHyper {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 0.1,
            steps: 1000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl ProbeHyper {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ProbeError::InvalidHyper(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(ProbeError::InvalidHyper("Adam betas must be below 1".into()));
        }
        if self.steps == 0 {
            return Err(ProbeError::InvalidHyper("steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Short stable hash of the settings, used in probe cache keys.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("hyper serializes");
        Sha256::digest(&json)[..4]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A trained truth direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub w: Vec<f32>,
    pub mu: Vec<f32>,
    pub layer: usize,
    pub task: String,
    pub prompt: String,
    pub hyper: ProbeHyper,
    pub seed: u64,
}

/// Mean-centred training data.
#[derive(Debug, Clone)]
pub struct Centered {
    pub mu: Vec<f32>,
    /// Row-major `n × d`, `h_i − μ` in `f64`.
    pub data: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub layer: usize,
    pub task: String,
    pub prompt: String,
}

impl Centered {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Column means of the centred rows (≈ 0 up to rounding of μ).
    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for row in self.data.chunks_exact(self.d) {
            for (a, x) in m.iter_mut().zip(row) {
                *a += x;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }
}

/// Subtracts the training mean. μ is rounded to `f32` before centring.
pub fn center(batch: &ActivationBatch) -> Result<Centered> {
    if batch.n == 0 || batch.d == 0 {
        return Err(ProbeError::EmptyBatch);
    }
    if batch.n < 2 {
        return Err(ProbeError::TooFewRows(batch.n));
    }
    let mu64 = crate::linalg::column_means(&batch.data, batch.n, batch.d);
    let mu: Vec<f32> = mu64.iter().map(|&m| m as f32).collect();
    let mut data = Vec::with_capacity(batch.n * batch.d);
    for row in batch.rows() {
        data.extend(row.iter().zip(&mu).map(|(&x, &m)| f64::from(x) - f64::from(m)));
    }
    Ok(Centered {
        mu,
        data,
        n: batch.n,
        d: batch.d,
        layer: batch.layer,
        task: batch.task.clone(),
        prompt: batch.prompt.clone(),
    })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularised objective `mean_i[softplus(z_i) − y_i z_i] + (λ/2)‖w‖²`
/// with `z = Xw`, and its gradient `Xᵀ(σ(z) − y)/n + λw`.
pub fn loss_and_grad(w: &[f64], x: &Centered, labels: &[bool], weight_decay: f64) -> (f64, Vec<f64>) {
    let n = x.n as f64;
    let mut grad = vec![0.0; x.d];
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = x.row(i);
        let z = dot(row, w);
        let y = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, xv) in grad.iter_mut().zip(row) {
            *g += r * xv;
        }
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    loss = loss / n + 0.5 * weight_decay * reg;
    for (g, wv) in grad.iter_mut().zip(w) {
        *g = *g / n + weight_decay * wv;
    }
    (loss, grad)
}

fn check_training_input(x: &Centered, labels: &[bool]) -> Result<()> {
    if x.n == 0 {
        return Err(ProbeError::EmptyBatch);
    }
    if labels.len() != x.n {
        return Err(ProbeError::DimensionMismatch {
            expected: x.n,
            found: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == labels.len() {
        return Err(ProbeError::SingleClass);
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(ProbeError::NonFinite);
    }
    Ok(())
}

/// Trains a probe and returns it with the objective value before each
/// step.
pub fn train_probe_traced(
    x: &Centered,
    labels: &[bool],
    hyper: &ProbeHyper,
    seed: u64,
) -> Result<(ProbeModel, Vec<f64>)> {
    hyper.validate()?;
    check_training_input(x, labels)?;

    let mut w = vec![0.0f64; x.d];
    let mut m = vec![0.0f64; x.d];
    let mut v = vec![0.0f64; x.d];
    let mut losses = Vec::with_capacity(hyper.steps);
    let (mut b1_pow, mut b2_pow) = (1.0f64, 1.0f64);
    for _ in 0..hyper.steps {
        let (loss, grad) = loss_and_grad(&w, x, labels, hyper.weight_decay);
        losses.push(loss);
        b1_pow *= hyper.beta1;
        b2_pow *= hyper.beta2;
        for j in 0..x.d {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * grad[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * grad[j] * grad[j];
            let m_hat = m[j] / (1.0 - b1_pow);
            let v_hat = v[j] / (1.0 - b2_pow);
            w[j] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    let w32: Vec<f32> = w.iter().map(|&x| x as f32).collect();
    let norm: f64 = w32.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(ProbeError::DegenerateWeights);
    }
    let model = ProbeModel {
        w: w32,
        mu: x.mu.clone(),
        layer: x.layer,
        task: x.task.clone(),
        prompt: x.prompt.clone(),
        hyper: *hyper,
        seed,
    };
    Ok((model, losses))
}

pub fn train_probe(x: &Centered, labels: &[bool], hyper: &ProbeHyper, seed: u64) -> Result<ProbeModel> {
    train_probe_traced(x, labels, hyper, seed).map(|(m, _)| m)
}

/// Centre then train.
pub fn fit_probe(batch: &ActivationBatch, labels: &[bool], hyper: &ProbeHyper, seed: u64) -> Result<ProbeModel> {
    if labels.len() != batch.n {
        return Err(ProbeError::DimensionMismatch {
            expected: batch.n,
            found: labels.len(),
        });
    }
    train_probe(&center(batch)?, labels, hyper, seed)
}

impl ProbeModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn direction(&self) -> Vec<f64> {
        crate::linalg::to_f64(&self.w)
    }

    /// `wᵀ(h − μ)` for one row, using the stored μ.
    pub fn logit(&self, h: &[f32]) -> f64 {
        h.iter()
            .zip(&self.mu)
            .zip(&self.w)
            .map(|((&x, &m), &w)| (f64::from(x) - f64::from(m)) * f64::from(w))
            .sum()
    }

    /// Logits for every row of a batch. Never re-centres on the batch.
    pub fn logits(&self, batch: &ActivationBatch) -> Result<Vec<f64>> {
        if batch.d != self.dim() {
            return Err(ProbeError::DimensionMismatch {
                expected: self.dim(),
                found: batch.d,
            });
        }
        Ok(batch.rows().map(|h| self.logit(h)).collect())
    }
}

/// `σ(wᵀ(h_i − μ))` for each row.
pub fn score(model: &ProbeModel, batch: &ActivationBatch) -> Result<Vec<f64>> {
    Ok(model.logits(batch)?.into_iter().map(sigmoid).collect())
}

// ── Persistence ─────────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct ProbeFile {
    format: String,
    version: u32,
    task: String,
    prompt: String,
    layer: usize,
    hyper: ProbeHyper,
    seed: u64,
    d: usize,
    /// base64 of little-endian f32
    w: String,
    mu: String,
}

fn encode_f32(v: &[f32]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn decode_f32(s: &str, d: usize, field: &str) -> Result<Vec<f32>> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(s)
        .map_err(|e| ProbeError::Parse(format!("{field}: {e}")))?;
    if bytes.len() != d * 4 {
        return Err(ProbeError::Parse(format!(
            "{field}: {} bytes for dimension {d}",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl ProbeModel {
    pub fn to_json(&self) -> String {
        let file = ProbeFile {
            format: PROBE_FORMAT.into(),
            version: PROBE_VERSION,
            task: self.task.clone(),
            prompt: self.prompt.clone(),
            layer: self.layer,
            hyper: self.hyper,
            seed: self.seed,
            d: self.dim(),
            w: encode_f32(&self.w),
            mu: encode_f32(&self.mu),
        };
        serde_json::to_string_pretty(&file).expect("probe serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(s).map_err(|e| ProbeError::Parse(e.to_string()))?;
        if raw.get("format").and_then(|v| v.as_str()) != Some(PROBE_FORMAT) {
            return Err(ProbeError::Parse("missing probe format tag".into()));
        }
        let version = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ProbeError::Parse("missing version".into()))?;
        if version != u64::from(PROBE_VERSION) {
            return Err(ProbeError::VersionMismatch { found: version as u32 });
        }
        let file: ProbeFile = serde_json::from_value(raw).map_err(|e| ProbeError::Parse(e.to_string()))?;
        Ok(Self {
            w: decode_f32(&file.w, file.d, "w")?,
            mu: decode_f32(&file.mu, file.d, "mu")?,
            layer: file.layer,
            task: file.task,
            prompt: file.prompt,
            hyper: file.hyper,
            seed: file.seed,
        })
    }
}

pub fn save_probe(model: &ProbeModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_json())?;
    Ok(())
}

pub fn load_probe(path: &Path) -> Result<ProbeModel> {
    ProbeModel::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f32]]) -> ActivationBatch {
        let d = rows[0].len();
        ActivationBatch {
            layer: 0,
            n: rows.len(),
            d,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
            example_ids: (0..rows.len() as u64).collect(),
            task: "F0".into(),
            prompt: "no-prompt".into(),
            model: "m".into(),
        }
    }

    fn toy_model(w: Vec<f32>, mu: Vec<f32>) -> ProbeModel {
        ProbeModel {
            w,
            mu,
            layer: 2,
            task: "F0".into(),
            prompt: "no-prompt".into(),
            hyper: ProbeHyper::default(),
            seed: 1,
        }
    }

    #[test]
    fn two_point_centering() {
        let c = center(&batch(&[&[1.0, 1.0], &[3.0, 3.0]])).unwrap();
        assert_eq!(c.mu, vec![2.0, 2.0]);
        assert_eq!(c.data, vec![-1.0, -1.0, 1.0, 1.0]);
        assert!(matches!(center(&batch(&[&[1.0]])), Err(ProbeError::TooFewRows(1))));
    }

    #[test]
    fn centering_centered_data_is_a_no_op() {
        let c = center(&batch(&[&[-1.0, 2.0], &[1.0, -2.0]])).unwrap();
        assert_eq!(c.mu, vec![0.0, 0.0]);
        assert_eq!(c.data, vec![-1.0, 2.0, 1.0, -2.0]);
    }

    #[test]
    fn scoring_uses_the_stored_mean() {
        let m = toy_model(vec![1.0, -2.0], vec![0.5, 0.25]);
        let at_mean = batch(&[&[0.5, 0.25], &[0.5, 0.25]]);
        assert_eq!(score(&m, &at_mean).unwrap(), vec![0.5, 0.5]);
        // orthogonal offset: (2, 1) · (1, -2) = 0
        let ortho = batch(&[&[2.5, 1.25], &[0.5, 0.25]]);
        assert_eq!(score(&m, &ortho).unwrap()[0], 0.5);
        let bad = batch(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        assert!(matches!(score(&m, &bad), Err(ProbeError::DimensionMismatch { expected: 2, found: 3 })));
    }

    #[test]
    fn log_three_logit_gives_three_quarters() {
        let ln3 = 3.0f64.ln();
        assert!((sigmoid(ln3) - 0.75).abs() < 1e-15);
        assert!((sigmoid(-ln3) - 0.25).abs() < 1e-15);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn single_class_and_mismatched_labels_are_rejected() {
        let b = batch(&[&[1.0], &[2.0], &[3.0]]);
        let c = center(&b).unwrap();
        let h = ProbeHyper::default();
        assert!(matches!(train_probe(&c, &[true, true, true], &h, 0), Err(ProbeError::SingleClass)));
        assert!(matches!(
            train_probe(&c, &[true, false], &h, 0),
            Err(ProbeError::DimensionMismatch { .. })
        ));
        let bad = ProbeHyper { steps: 0, ..h };
        assert!(matches!(train_probe(&c, &[true, false, true], &bad, 0), Err(ProbeError::InvalidHyper(_))));
    }

    #[test]
    fn probe_files_round_trip_bitwise() {
        let m = toy_model(vec![0.1, -3.5e-7, f32::MIN_POSITIVE], vec![1.0 / 3.0, 2.0, -7.25]);
        let back = ProbeModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(back.w.iter().zip(&m.w).all(|(a, b)| a.to_bits() == b.to_bits()));
        let cos = crate::metrics::cosine(&back.direction(), &m.direction()).unwrap();
        assert_eq!(cos, 1.0);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.probe.json");
        save_probe(&m, &path).unwrap();
        assert_eq!(load_probe(&path).unwrap(), m);
    }

    #[test]
    fn corrupt_probe_files_are_structured_errors() {
        let m = toy_model(vec![1.0, 2.0], vec![0.0, 0.0]);
        let json = m.to_json();
        assert!(matches!(ProbeModel::from_json("{not json"), Err(ProbeError::Parse(_))));
        let v2 = json.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(ProbeModel::from_json(&v2), Err(ProbeError::VersionMismatch { found: 2 })));
        let short = json.replace("\"d\": 2", "\"d\": 3");
        assert!(matches!(ProbeModel::from_json(&short), Err(ProbeError::Parse(_))));
    }

    #[test]
    fn fingerprint_tracks_hyperparameters() {
        let a = ProbeHyper::default();
        let b = ProbeHyper { steps: 10, ..a };
        assert_eq!(a.fingerprint(), ProbeHyper::default().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 8);
    }
}
