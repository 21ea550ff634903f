//! Evaluation quantities: AUROC, probe cosine similarity, the between/within
//! class variance ratio, the polarity decomposition into t_G / t_p, and 2D
//! projections onto a probe direction plus the top orthogonal principal
//! direction.

use std::fmt::Write as _;

use crate::linalg::{dot, norm, normalized, subset_mean, to_f64};
use crate::probe::{fit_probe, ProbeError, ProbeHyper, ProbeModel};
use crate::tensorio::ActivationBatch;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("both classes must be present")]
    SingleClass,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("non-finite score")]
    NonFinite,
    #[error("zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("each class needs at least {needed} examples")]
    TooFewExamples { needed: usize },
    #[error("inputs disagree on {what}: {left} vs {right}")]
    Mismatch {
        what: &'static str,
        left: String,
        right: String,
    },
    #[error("need at least {0} inputs")]
    TooFewInputs(usize),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

// ── AUROC ───────────────────────────────────────────────────────────────────

/// Area under the ROC curve in Mann–Whitney form: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties
/// counting one half. Computed from midranks in O(n log n).
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricsError::NonFinite);
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 2·rank over positives; doubling keeps midranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank (i + 1 + j) / 2
        let twice_mid = (i + 1 + j) as u128;
        let pos_in_tie = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * pos_in_tie;
        i = j;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    // 2U = 2·Σrank − P(P+1)
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * q) as f64)
}

// ── Cosine ──────────────────────────────────────────────────────────────────

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

// ── Variance ratio ──────────────────────────────────────────────────────────

/// Between- to within-class variance ratio at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRatioResult {
    pub layer: usize,
    /// `+∞` when `degenerate` is set.
    pub ratio: f64,
    pub mu_true: Vec<f64>,
    pub mu_false: Vec<f64>,
    pub mu: Vec<f64>,
    /// Both classes have zero within-class variance.
    pub degenerate: bool,
}

fn check_labels(batch: &ActivationBatch, labels: &[bool]) -> Result<()> {
    if labels.len() != batch.n {
        return Err(MetricsError::LengthMismatch(batch.n, labels.len()));
    }
    Ok(())
}

/// `R = (‖μ₊ − μ‖² + ‖μ₋ − μ‖²) / (Var₊ + Var₋)` where `‖·‖²` is the mean
/// squared difference over dimensions and `Var_c` is the population
/// variance of class c averaged over dimensions.
pub fn variance_ratio(batch: &ActivationBatch, labels: &[bool]) -> Result<VarianceRatioResult> {
    check_labels(batch, labels)?;
    let d = batch.d;
    let (mu_true, n_true) = subset_mean(batch.rows().zip(labels).filter(|(_, &y)| y).map(|(r, _)| r), d);
    let (mu_false, n_false) = subset_mean(batch.rows().zip(labels).filter(|(_, &y)| !y).map(|(r, _)| r), d);
    if n_true < 2 || n_false < 2 {
        return Err(MetricsError::TooFewExamples { needed: 2 });
    }
    let (mu, _) = subset_mean(batch.rows(), d);

    let mean_sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / d as f64;
    let numerator = mean_sq(&mu_true, &mu) + mean_sq(&mu_false, &mu);

    let mut var_true = 0.0;
    let mut var_false = 0.0;
    for (row, &y) in batch.rows().zip(labels) {
        let (center, acc) = if y {
            (&mu_true, &mut var_true)
        } else {
            (&mu_false, &mut var_false)
        };
        *acc += row
            .iter()
            .zip(center)
            .map(|(&x, m)| (f64::from(x) - m).powi(2))
            .sum::<f64>();
    }
    let denominator = var_true / (n_true * d) as f64 + var_false / (n_false * d) as f64;
    let degenerate = denominator == 0.0;
    let ratio = if degenerate { f64::INFINITY } else { numerator / denominator };
    Ok(VarianceRatioResult {
        layer: batch.layer,
        ratio,
        mu_true,
        mu_false,
        mu,
        degenerate,
    })
}

// ── Polarity decomposition ──────────────────────────────────────────────────

/// Truth-related variance explained by the polarity-invariant direction
/// `t_g` (probe trained on affirmative ∪ negated) and the
/// polarity-dependent direction `t_p` (probe trained on affirmative only).
#[derive(Debug, Clone, PartialEq)]
pub struct PolarityDecomposition {
    pub layer: usize,
    pub t_g: Vec<f64>,
    pub t_p: Vec<f64>,
    pub frac_g: f64,
    pub frac_p: f64,
}

/// A batch with its labels.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub batch: &'a ActivationBatch,
    pub labels: &'a [bool],
}

fn concat(a: &ActivationBatch, b: &ActivationBatch) -> ActivationBatch {
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    let mut ids = a.example_ids.clone();
    ids.extend_from_slice(&b.example_ids);
    ActivationBatch {
        layer: a.layer,
        n: a.n + b.n,
        d: a.d,
        data,
        example_ids: ids,
        task: format!("{}+{}", a.task, b.task),
        prompt: a.prompt.clone(),
        model: a.model.clone(),
    }
}

/// Class means of each dataset, centred on that dataset's mean, then
/// centred on their own average. These are the "truth-related" vectors whose
/// spread the directions are asked to explain.
pub fn truth_mean_vectors(sets: &[Labeled<'_>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(2 * sets.len());
    for s in sets {
        check_labels(s.batch, s.labels)?;
        let d = s.batch.d;
        let (m, _) = subset_mean(s.batch.rows(), d);
        for class in [true, false] {
            let (mc, count) = subset_mean(
                s.batch.rows().zip(s.labels).filter(|(_, &y)| y == class).map(|(r, _)| r),
                d,
            );
            if count == 0 {
                return Err(MetricsError::SingleClass);
            }
            out.push(mc.iter().zip(&m).map(|(a, b)| a - b).collect());
        }
    }
    let d = out[0].len();
    let mut avg = vec![0.0; d];
    for v in &out {
        avg.iter_mut().zip(v).for_each(|(a, x)| *a += x);
    }
    let k = out.len() as f64;
    avg.iter_mut().for_each(|a| *a /= k);
    for v in &mut out {
        v.iter_mut().zip(&avg).for_each(|(x, a)| *x -= a);
    }
    Ok(out)
}

/// Share of `Σ‖δ‖²` captured by projecting the δ vectors onto the unit
/// vector `t`. Lies in [0, 1].
pub fn explained_fraction(deltas: &[Vec<f64>], t: &[f64]) -> f64 {
    let total: f64 = deltas.iter().map(|v| dot(v, v)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let along: f64 = deltas.iter().map(|v| dot(v, t).powi(2)).sum();
    (along / total).clamp(0.0, 1.0)
}

pub fn polarity_decompose(
    aff: Labeled<'_>,
    neg: Labeled<'_>,
    hyper: &ProbeHyper,
    seed: u64,
) -> Result<PolarityDecomposition> {
    if aff.batch.layer != neg.batch.layer {
        return Err(MetricsError::Mismatch {
            what: "layer",
            left: aff.batch.layer.to_string(),
            right: neg.batch.layer.to_string(),
        });
    }
    if aff.batch.d != neg.batch.d {
        return Err(MetricsError::DimensionMismatch {
            expected: aff.batch.d,
            found: neg.batch.d,
        });
    }
    check_labels(aff.batch, aff.labels)?;
    check_labels(neg.batch, neg.labels)?;

    let p_probe = fit_probe(aff.batch, aff.labels, hyper, seed)?;
    let union = concat(aff.batch, neg.batch);
    let union_labels: Vec<bool> = aff.labels.iter().chain(neg.labels).copied().collect();
    let g_probe = fit_probe(&union, &union_labels, hyper, seed)?;

    let t_p = normalized(&p_probe.direction()).ok_or(MetricsError::ZeroVector)?;
    let t_g = normalized(&g_probe.direction()).ok_or(MetricsError::ZeroVector)?;
    let deltas = truth_mean_vectors(&[aff, neg])?;
    Ok(PolarityDecomposition {
        layer: aff.batch.layer,
        frac_g: explained_fraction(&deltas, &t_g),
        frac_p: explained_fraction(&deltas, &t_p),
        t_g,
        t_p,
    })
}

// ── 2D projection ───────────────────────────────────────────────────────────

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 1000;

/// Result of a power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub vector: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Top eigenvector of `RᵀR / n` for the row-major `n × d` matrix `rows`,
/// kept orthogonal to every vector in `deflate` (unit vectors). Returns
/// `None` when the rows carry no variance outside `deflate`.
pub fn power_iteration(rows: &[f64], d: usize, deflate: &[&[f64]], tol: f64, max_iter: usize) -> Option<PowerIteration> {
    let n = rows.len() / d;
    let project_out = |v: &mut Vec<f64>| {
        for u in deflate {
            let c = dot(v, u);
            v.iter_mut().zip(*u).for_each(|(x, y)| *x -= c * y);
        }
    };
    let apply = |v: &[f64]| {
        let mut out = vec![0.0; d];
        for row in rows.chunks_exact(d) {
            let c = dot(row, v);
            out.iter_mut().zip(row).for_each(|(o, x)| *o += c * x);
        }
        out.iter_mut().for_each(|o| *o /= n as f64);
        out
    };

    // Start from the largest row, which lies in the row space.
    let start = rows
        .chunks_exact(d)
        .max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))?
        .to_vec();
    let mut v = start;
    project_out(&mut v);
    let mut v = normalized(&v)?;
    let scale = rows.chunks_exact(d).map(|r| dot(r, r)).fold(0.0, f64::max);
    let mut eigenvalue = 0.0;
    for it in 1..=max_iter {
        let mut next = apply(&v);
        project_out(&mut next);
        eigenvalue = dot(&next, &v);
        if norm(&next) <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        let mut next = normalized(&next)?;
        if dot(&next, &v) < 0.0 {
            next.iter_mut().for_each(|x| *x = -*x);
        }
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        v = next;
        if delta < tol {
            return Some(PowerIteration {
                vector: v,
                eigenvalue,
                iterations: it,
                converged: true,
            });
        }
    }
    Some(PowerIteration {
        vector: v,
        eigenvalue,
        iterations: max_iter,
        converged: false,
    })
}

/// Points in the plane spanned by the probe direction ŵ and the top
/// principal direction v̂ of the residuals orthogonal to ŵ.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection2d {
    pub points: Vec<(f64, f64)>,
    pub w_hat: Vec<f64>,
    /// `None` when the residuals vanish; all `y` are then 0.
    pub v_hat: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl Projection2d {
    pub fn is_degenerate(&self) -> bool {
        self.v_hat.is_none()
    }
}

/// `x_i = ŵ·(h_i − μ)`, `y_i = v̂·r_i` with `r_i = (h_i − μ) − x_i ŵ`. v̂
/// maximises the variance of the (pooled, mean-centred) residuals.
pub fn project_2d(batch: &ActivationBatch, model: &ProbeModel) -> Result<Projection2d> {
    let logits = model.logits(batch)?;
    let w = model.direction();
    let w_norm = norm(&w);
    let w_hat = normalized(&w).ok_or(MetricsError::ZeroVector)?;
    let mu = to_f64(&model.mu);
    let d = batch.d;

    let xs: Vec<f64> = logits.iter().map(|z| z / w_norm).collect();
    let mut residuals = Vec::with_capacity(batch.n * d);
    for (row, &x) in batch.rows().zip(&xs) {
        residuals.extend(
            row.iter()
                .zip(&mu)
                .zip(&w_hat)
                .map(|((&h, m), u)| f64::from(h) - m - x * u),
        );
    }
    let mean: Vec<f64> = {
        let mut m = vec![0.0; d];
        for r in residuals.chunks_exact(d) {
            m.iter_mut().zip(r).for_each(|(a, x)| *a += x);
        }
        m.iter_mut().for_each(|a| *a /= batch.n as f64);
        m
    };
    let centered: Vec<f64> = residuals
        .chunks_exact(d)
        .flat_map(|r| r.iter().zip(&mean).map(|(x, m)| x - m))
        .collect();

    let power = power_iteration(&centered, d, &[&w_hat], POWER_TOL, POWER_MAX_ITER);
    let (ys, v_hat, converged, iterations) = match power {
        Some(p) => {
            let ys = residuals.chunks_exact(d).map(|r| dot(r, &p.vector)).collect();
            (ys, Some(p.vector), p.converged, p.iterations)
        }
        None => (vec![0.0; batch.n], None, true, 0),
    };
    Ok(Projection2d {
        points: xs.into_iter().zip(ys).collect(),
        w_hat,
        v_hat,
        converged,
        iterations,
    })
}

// ── Matrices ────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Rows: training task, columns: evaluation task; AUROC values.
    TaskAuroc,
    /// Rows and columns: layers; cosine values.
    LayerCosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMatrix {
    pub kind: MatrixKind,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl EvalMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row][col]
    }

    /// CSV with a header row of column labels and the row label first.
    pub fn to_csv(&self) -> String {
        let corner = match self.kind {
            MatrixKind::TaskAuroc => "train\\eval",
            MatrixKind::LayerCosine => "layer",
        };
        let mut s = String::new();
        s.push_str(corner);
        for c in &self.col_labels {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            s.push_str(label);
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// One column of a cross-task matrix.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub name: &'a str,
    pub batch: &'a ActivationBatch,
    pub labels: &'a [bool],
}

/// Entry (i, j) is the AUROC of probe i on evaluation set j. All inputs
/// must share one layer and prompt.
pub fn cross_task_matrix(probes: &[ProbeModel], evals: &[EvalSet<'_>]) -> Result<EvalMatrix> {
    if probes.is_empty() || evals.is_empty() {
        return Err(MetricsError::TooFewInputs(1));
    }
    let layer = probes[0].layer;
    let prompt = &probes[0].prompt;
    for p in probes {
        if p.layer != layer || &p.prompt != prompt {
            return Err(MetricsError::Mismatch {
                what: "probe layer/prompt",
                left: format!("{layer}/{prompt}"),
                right: format!("{}/{}", p.layer, p.prompt),
            });
        }
    }
    for e in evals {
        if e.batch.layer != layer || &e.batch.prompt != prompt {
            return Err(MetricsError::Mismatch {
                what: "evaluation layer/prompt",
                left: format!("{layer}/{prompt}"),
                right: format!("{}/{}", e.batch.layer, e.batch.prompt),
            });
        }
    }
    let mut values = Vec::with_capacity(probes.len());
    for p in probes {
        let row = evals
            .iter()
            .map(|e| auroc(&p.logits(e.batch)?, e.labels))
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    Ok(EvalMatrix {
        kind: MatrixKind::TaskAuroc,
        row_labels: probes.iter().map(|p| p.task.clone()).collect(),
        col_labels: evals.iter().map(|e| e.name.to_string()).collect(),
        values,
    })
}

/// Pairwise cosine similarity of probe directions (one per layer).
pub fn probe_similarity_heatmap(probes: &[ProbeModel]) -> Result<EvalMatrix> {
    if probes.len() < 2 {
        return Err(MetricsError::TooFewInputs(2));
    }
    let dirs: Vec<Vec<f64>> = probes.iter().map(ProbeModel::direction).collect();
    let k = dirs.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let c = cosine(&dirs[i], &dirs[j])?;
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    let labels: Vec<String> = probes.iter().map(|p| p.layer.to_string()).collect();
    Ok(EvalMatrix {
        kind: MatrixKind::LayerCosine,
        row_labels: labels.clone(),
        col_labels: labels,
        values,
    })
}
