//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use truthlens::experiments::{Experiment, ExperimentPlan, LayerSelection};
use truthlens::linalg::{dot, normalized};
use truthlens::metrics::{auroc, cosine, polarity_decompose, project_2d, variance_ratio, Labeled};
use truthlens::probe::{center, fit_probe, loss_and_grad};
use truthlens::synthgen::{gen_synthetic, random_orthonormal, SyntheticSpec, SyntheticStack};
use truthlens::taskgen::{self, build_dataset, oracle_label, write_jsonl, KnowledgeBase};
use truthlens::{ActivationBatch, PromptId, ProbeHyper, Split, TaskId};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

// ── shared helpers ──────────────────────────────────────────────────────────

fn batch(data: Vec<f32>, n: usize, d: usize) -> ActivationBatch {
    ActivationBatch {
        layer: 0,
        n,
        d,
        data,
        example_ids: (0..n as u64).collect(),
        task: "F0".into(),
        prompt: "no-prompt".into(),
        model: "fixture".into(),
    }
}

/// Train/test indices of `idx` from the stack's own manifest split.
fn split_indices(stack: &SyntheticStack, idx: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let rows = stack
        .statements(idx, TaskId::F0, PromptId::NoPrompt, seed)
        .expect("statements");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in rows {
        match s.split {
            Some(Split::Train) => train.push(s.id as usize),
            _ => test.push(s.id as usize),
        }
    }
    (train, test)
}

/// Independent evaluator for `+ - * /` with parentheses; division must be
/// exact.
fn eval_expr(src: &str) -> Result<i128, String> {
    fn tokens(src: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut num = String::new();
        for c in src.chars() {
            if c.is_ascii_digit() {
                num.push(c);
                continue;
            }
            if !num.is_empty() {
                out.push(std::mem::take(&mut num));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
        if !num.is_empty() {
            out.push(num);
        }
        out
    }
    fn expr(t: &[String], i: &mut usize) -> Result<i128, String> {
        let mut v = term(t, i)?;
        while *i < t.len() && (t[*i] == "+" || t[*i] == "-") {
            let op = t[*i].clone();
            *i += 1;
            let r = term(t, i)?;
            v = if op == "+" { v + r } else { v - r };
        }
        Ok(v)
    }
    fn term(t: &[String], i: &mut usize) -> Result<i128, String> {
        let mut v = atom(t, i)?;
        while *i < t.len() && (t[*i] == "*" || t[*i] == "/") {
            let op = t[*i].clone();
            *i += 1;
            let r = atom(t, i)?;
            if op == "*" {
                v *= r;
            } else {
                if r == 0 || v % r != 0 {
                    return Err(format!("inexact division {v} / {r}"));
                }
                v /= r;
            }
        }
        Ok(v)
    }
    fn atom(t: &[String], i: &mut usize) -> Result<i128, String> {
        let tok = t.get(*i).ok_or("unexpected end")?.clone();
        *i += 1;
        if tok == "(" {
            let v = expr(t, i)?;
            if t.get(*i).map(String::as_str) != Some(")") {
                return Err("unbalanced parentheses".into());
            }
            *i += 1;
            Ok(v)
        } else {
            tok.parse().map_err(|_| format!("bad token {tok}"))
        }
    }
    let t = tokens(src);
    let mut i = 0;
    let v = expr(&t, &mut i)?;
    if i != t.len() {
        return Err(format!("trailing input in {src}"));
    }
    Ok(v)
}

fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

// ── criteria ────────────────────────────────────────────────────────────────

fn dataset_integrity() -> Outcome {
    let kb = KnowledgeBase::bundled();
    let start = Instant::now();
    let mut items = 0usize;
    for task in TaskId::ALL {
        for seed in 0..5u64 {
            let ds = taskgen::generate(task, &kb, task.default_size(), seed).map_err(|e| format!("{task} seed {seed}: {e}"))?;
            let pos = ds.iter().filter(|s| s.label).count() as i64;
            let neg = ds.len() as i64 - pos;
            if (pos - neg).abs() > 1 {
                return Err(format!("{task} seed {seed}: {pos} true vs {neg} false"));
            }
            for s in &ds {
                let oracle = oracle_label(s, &kb).map_err(|e| format!("{task} id {}: {e}", s.id))?;
                if oracle != s.label {
                    return Err(format!("{task} seed {seed} id {}: oracle {oracle}, stored {}", s.id, s.label));
                }
                if task.is_arithmetic() {
                    let expr = s.meta["expression"].as_str().ok_or("missing expression")?;
                    let stated = i128::from(s.meta["stated"].as_i64().ok_or("missing stated value")?);
                    let value = eval_expr(expr).map_err(|e| format!("{task} id {}: {e}", s.id))?;
                    let offset = stated - value;
                    let ok = if s.label { offset == 0 } else { (1..=10).contains(&offset.abs()) };
                    if !ok {
                        return Err(format!("{task} id {}: offset {offset} for label {}", s.id, s.label));
                    }
                }
            }
            items += ds.len();
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        format!("{items} items over 11 tasks x 5 seeds in {:.1}s", elapsed.as_secs_f64()),
        format!("runtime {:.1}s exceeds 30s", elapsed.as_secs_f64()),
    )
}

fn auroc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut with_ties = 0;
    for k in 0..1000 {
        let n = rng.random_range(2..=50);
        // every fourth instance draws continuous scores, the rest coarse levels with ties
        let scores: Vec<f64> = if k % 4 == 0 {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        } else {
            let levels = rng.random_range(1..=12);
            (0..n).map(|_| f64::from(rng.random_range(0..levels)) * 0.25).collect()
        };
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
        let fast = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        let slow = pairwise_auroc(&scores, &labels);
        if fast != slow {
            return Err(format!("instance {k}: {fast} vs pairwise {slow}"));
        }
    }
    check(
        with_ties > 0,
        format!("1000/1000 exact matches ({with_ties} with ties)"),
        "no instance exercised ties".into(),
    )
}

fn probe_recovery() -> Outcome {
    let mut worst_auc = f64::INFINITY;
    let mut worst_cos = f64::INFINITY;
    let mut slowest = Duration::ZERO;
    for seed in 0..10u64 {
        let spec = SyntheticSpec::new(64, 1000, 1, seed).with_constant_truth(4.0).with_noise(1.0);
        let stack = gen_synthetic(&spec).map_err(|e| e.to_string())?;
        let (train, test) = split_indices(&stack, &stack.indices(None), seed);
        let (xb, xl) = stack.select(0, &train);
        let (tb, tl) = stack.select(0, &test);
        let start = Instant::now();
        let probe = fit_probe(&xb, &xl, &ProbeHyper::default(), seed).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        let auc = auroc(&probe.logits(&tb).map_err(|e| e.to_string())?, &tl).map_err(|e| e.to_string())?;
        let cos = cosine(&probe.direction(), &spec.truth_dir).map_err(|e| e.to_string())?.abs();
        worst_auc = worst_auc.min(auc);
        worst_cos = worst_cos.min(cos);
    }
    let summary = format!(
        "min test AUROC {worst_auc:.4}, min |cos| {worst_cos:.4}, slowest fit {:.2}s over 10 seeds",
        slowest.as_secs_f64()
    );
    check(
        worst_auc >= 0.99 && worst_cos >= 0.95 && slowest < Duration::from_secs(10),
        summary.clone(),
        summary,
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, d) = (40, 8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let data: Vec<f32> = (0..n * d).map(|_| rng.sample::<f32, _>(StandardNormal) * 2.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let x = center(&batch(data, n, d)).map_err(|e| e.to_string())?;
        let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, analytic) = loss_and_grad(&w, &x, &labels, 0.1);
        let h = 1e-5;
        let numeric: Vec<f64> = (0..d)
            .map(|j| {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[j] += h;
                minus[j] -= h;
                (loss_and_grad(&plus, &x, &labels, 0.1).0 - loss_and_grad(&minus, &x, &labels, 0.1).0) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = dot(&analytic, &analytic).sqrt().max(dot(&numeric, &numeric).sqrt()).max(1e-12);
        worst = worst.max(diff / scale);
    }
    check(
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over 20 points"),
        format!("max relative error {worst:.2e} > 1e-4"),
    )
}

fn negation_inversion() -> Outcome {
    let spec = SyntheticSpec::new(64, 2000, 1, 11)
        .with_constant_truth(1.0)
        .with_polarity([4.0]);
    let stack = gen_synthetic(&spec).map_err(|e| e.to_string())?;
    let (aff_train, _) = split_indices(&stack, &stack.indices(Some(true)), 11);
    let (xb, xl) = stack.select(0, &aff_train);
    let probe = fit_probe(&xb, &xl, &ProbeHyper::default(), 11).map_err(|e| e.to_string())?;
    let (nb, nl) = stack.select(0, &stack.indices(Some(false)));
    let auc = auroc(&probe.logits(&nb).map_err(|e| e.to_string())?, &nl).map_err(|e| e.to_string())?;
    check(
        auc <= 0.05,
        format!("affirmative probe on negated set: AUROC {auc:.4}"),
        format!("AUROC {auc:.4} > 0.05"),
    )
}

fn polarity_fractions() -> Outcome {
    let layers = 20;
    let s_g: Vec<f64> = (0..layers).map(|l| 0.25 * l as f64).collect();
    let s_p: Vec<f64> = (0..layers).map(|l| 0.25 * (24 - l) as f64).collect();
    let spec = SyntheticSpec::new(64, 2000, layers, 21)
        .with_truth(s_g.clone())
        .with_polarity(s_p.clone());
    let stack = gen_synthetic(&spec).map_err(|e| e.to_string())?;
    let aff = stack.indices(Some(true));
    let neg = stack.indices(Some(false));
    let mut worst = 0.0f64;
    let mut gaps = Vec::with_capacity(layers);
    for l in 0..layers {
        let (ab, al) = stack.select(l, &aff);
        let (nb, nl) = stack.select(l, &neg);
        let dec = polarity_decompose(
            Labeled { batch: &ab, labels: &al },
            Labeled { batch: &nb, labels: &nl },
            &ProbeHyper::default(),
            21,
        )
        .map_err(|e| e.to_string())?;
        let (g2, p2) = (s_g[l].powi(2), s_p[l].powi(2));
        let frac_g = g2 / (g2 + p2);
        let frac_p = 0.5 + (g2 - p2).powi(2) / (2.0 * (g2 + p2).powi(2));
        worst = worst.max((dec.frac_g - frac_g).abs()).max((dec.frac_p - frac_p).abs());
        gaps.push(dec.frac_g - dec.frac_p);
    }
    // first sign change of frac_G - frac_p, linearly interpolated
    let found = (1..layers)
        .find(|&l| gaps[l - 1] < 0.0 && gaps[l] >= 0.0)
        .map(|l| (l - 1) as f64 + gaps[l - 1] / (gaps[l - 1] - gaps[l]));
    // analytic curves meet where s_G = s_p
    let planted = 12.0;
    let Some(found) = found else {
        return Err(format!("no crossover found (max fraction error {worst:.3})"));
    };
    let summary = format!("max fraction error {worst:.4}; crossover at layer {found:.2}, planted {planted}");
    check(worst <= 0.05 && (found - planted).abs() <= 1.0, summary.clone(), summary)
}

fn variance_ratio_checks() -> Outcome {
    let hand = batch(vec![1.0, 3.0, -1.0, -3.0], 4, 1);
    let r = variance_ratio(&hand, &[true, true, false, false]).map_err(|e| e.to_string())?;
    if (r.ratio - 4.0).abs() > 1e-9 {
        return Err(format!("hand example gives R = {}", r.ratio));
    }
    let layers = 15;
    let peak = 7;
    let schedule: Vec<f64> = (0..layers)
        .map(|l| (3.0 - 0.3 * (l as f64 - peak as f64).abs()).max(0.0))
        .collect();
    let spec = SyntheticSpec::new(32, 1000, layers, 31).with_truth(schedule);
    let stack = gen_synthetic(&spec).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = stack
        .layers
        .iter()
        .map(|b| variance_ratio(b, &stack.labels).map(|r| r.ratio))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let argmax = (0..layers).max_by(|&a, &b| ratios[a].total_cmp(&ratios[b])).unwrap();
    check(
        argmax == peak,
        format!("hand example R = {}; argmax layer {argmax} (planted {peak})", r.ratio),
        format!("argmax layer {argmax}, planted {peak}"),
    )
}

fn projection_checks() -> Outcome {
    let mut worst_orth = 0.0f64;
    let mut worst_cos = f64::INFINITY;
    for (k, d) in [6usize, 9, 12, 16, 16].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
        let n = 400;
        let dirs = random_orthonormal(d, 2, &mut rng);
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % 2 == 0;
            let z: f64 = rng.sample(StandardNormal);
            let sign = if y { 1.0 } else { -1.0 };
            for (a, b) in dirs[0].iter().zip(&dirs[1]) {
                let g: f64 = rng.sample(StandardNormal);
                data.push((g + sign * 2.0 * a + 3.0 * z * b) as f32);
            }
            labels.push(y);
        }
        let b = batch(data, n, d);
        let probe = fit_probe(&b, &labels, &ProbeHyper::default(), 0).map_err(|e| e.to_string())?;
        let proj = project_2d(&b, &probe).map_err(|e| e.to_string())?;
        let v = proj.v_hat.clone().ok_or("no residual direction")?;
        worst_orth = worst_orth.max(dot(&v, &proj.w_hat).abs());

        // dense oracle on the residual covariance
        let w_hat = normalized(&probe.direction()).ok_or("zero probe")?;
        let mu: Vec<f64> = probe.mu.iter().map(|&m| f64::from(m)).collect();
        let mut residuals = DMatrix::<f64>::zeros(n, d);
        for i in 0..n {
            let c: Vec<f64> = (0..d).map(|j| f64::from(b.data[i * d + j]) - mu[j]).collect();
            let x = dot(&c, &w_hat);
            for j in 0..d {
                residuals[(i, j)] = c[j] - x * w_hat[j];
            }
        }
        for j in 0..d {
            let m = residuals.column(j).mean();
            residuals.column_mut(j).add_scalar_mut(-m);
        }
        let cov = residuals.transpose() * &residuals / n as f64;
        let eig = SymmetricEigen::new(cov);
        let top = (0..d).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let oracle: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        worst_cos = worst_cos.min(cosine(&oracle, &v).map_err(|e| e.to_string())?.abs());
    }
    let summary = format!("max |v.w| {worst_orth:.2e}; min |cos(v, dense oracle)| {worst_cos:.6}");
    check(worst_orth <= 1e-6 && worst_cos >= 0.999, summary.clone(), summary)
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn pipeline(root: &Path, jobs: usize) -> Result<(), String> {
    let e = |x: &dyn std::fmt::Display| x.to_string();
    let kb = KnowledgeBase::bundled();
    let data = root.join("data");
    std::fs::create_dir_all(&data).map_err(|x| e(&x))?;
    for task in [TaskId::F0, TaskId::F1, TaskId::F3, TaskId::A1] {
        for prompt in [PromptId::NoPrompt, PromptId::AskCorrect] {
            let ds = build_dataset(task, &kb, 200, prompt, 5).map_err(|x| e(&x))?;
            write_jsonl(&data.join(taskgen::manifest_name(task, prompt)), &ds).map_err(|x| e(&x))?;
        }
    }
    let acts = root.join("activations");
    let layers = 6;
    let base = SyntheticSpec::new(16, 240, layers, 5)
        .with_truth((0..layers).map(|l| 0.5 * l as f64))
        .with_polarity((0..layers).map(|l| 0.5 * (layers - l) as f64));
    gen_synthetic(&base)
        .and_then(|s| s.write(&acts, TaskId::F0, Some(TaskId::F1), PromptId::NoPrompt, 5))
        .map_err(|x| e(&x))?;
    gen_synthetic(&base.clone().with_rotation(vec![0.4; layers]))
        .and_then(|s| s.write(&acts, TaskId::F0, Some(TaskId::F1), PromptId::AskCorrect, 5))
        .map_err(|x| e(&x))?;

    let mut plan = ExperimentPlan::new(vec![TaskId::F0, TaskId::F1], vec![PromptId::NoPrompt, PromptId::AskCorrect], &acts, root.join("out"));
    plan.seed = 5;
    plan.jobs = jobs;
    plan.hyper.steps = 300;
    let exp = Experiment::new(plan).map_err(|x| e(&x))?;
    exp.layer_sweep().map_err(|x| e(&x))?;
    exp.generalization_sweep(TaskId::F0).map_err(|x| e(&x))?;
    exp.full_matrix(3).map_err(|x| e(&x))?;
    exp.polarity_sweep().map_err(|x| e(&x))?;
    exp.projection_report(4).map_err(|x| e(&x))?;
    exp.prompt_transfer(TaskId::F0, PromptId::NoPrompt, PromptId::AskCorrect)
        .map_err(|x| e(&x))?;
    exp.emit_report().map_err(|x| e(&x))?;
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path(), 1)?;
    pipeline(b.path(), 4)?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let index = Path::new("out/index.json");
    let keys_a: Vec<_> = sa.keys().collect();
    let keys_b: Vec<_> = sb.keys().collect();
    if keys_a != keys_b {
        return Err("the two runs produced different file sets".into());
    }
    let mut counts = BTreeMap::new();
    for (path, bytes) in &sa {
        if path == index {
            continue;
        }
        if &sb[path] != bytes {
            return Err(format!("{} differs between runs", path.display()));
        }
        let name = path.to_string_lossy();
        let kind = if name.ends_with(".probe.json") {
            "probe"
        } else {
            path.extension().and_then(|e| e.to_str()).unwrap_or("other")
        };
        *counts.entry(kind.to_string()).or_insert(0) += 1;
    }
    let needed = ["jsonl", "probe", "csv"];
    let summary = needed
        .iter()
        .map(|k| format!("{} {k}", counts.get(*k).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        needed.iter().all(|k| counts.get(*k).copied().unwrap_or(0) > 0),
        format!("byte-identical across runs with 1 and 4 workers: {summary}"),
        format!("missing artifact kinds: {summary}"),
    )
}

fn layer_sweep_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let layers = 20;
    let spec = SyntheticSpec::new(64, 1000, layers, 10).with_truth((0..layers).map(|l| if l >= 10 { 4.0 } else { 0.0 }));
    gen_synthetic(&spec)
        .and_then(|s| s.write(dir.path(), TaskId::F0, None, PromptId::NoPrompt, 10))
        .map_err(|e| e.to_string())?;
    let mut plan = ExperimentPlan::new(vec![TaskId::F0], vec![PromptId::NoPrompt], dir.path(), dir.path().join("out"));
    plan.seed = 10;
    plan.layers = LayerSelection::all();
    plan.jobs = 4;
    let points = Experiment::new(plan)
        .and_then(|e| e.layer_sweep())
        .map_err(|e| e.to_string())?;
    if points.len() != layers {
        return Err(format!("expected {layers} points, got {}", points.len()));
    }
    let before = points.iter().filter(|p| p.layer < 10).map(|p| p.auroc).fold(f64::NEG_INFINITY, f64::max);
    let after = points.iter().filter(|p| p.layer >= 10).map(|p| p.auroc).fold(f64::INFINITY, f64::min);
    let summary = format!("max AUROC below layer 10: {before:.4}; min from layer 10: {after:.4}");
    check(before <= 0.6 && after >= 0.99, summary.clone(), summary)
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("dataset integrity", dataset_integrity),
        ("AUROC pairwise oracle", auroc_oracle),
        ("probe recovery", probe_recovery),
        ("gradient check", gradient_check),
        ("negation inversion", negation_inversion),
        ("polarity decomposition", polarity_fractions),
        ("variance ratio", variance_ratio_checks),
        ("2D projection", projection_checks),
        ("determinism", determinism),
        ("layer sweep shape", layer_sweep_shape),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
