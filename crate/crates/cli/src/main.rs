use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use truthlens::experiments::{self, Experiment, ExperimentError, ExperimentPlan, LayerSelection};
use truthlens::synthgen::{gen_synthetic, SynthError, SyntheticSpec};
use truthlens::taskgen::{build_dataset, manifest_name, write_jsonl, KnowledgeBase};
use truthlens::{PromptId, ProbeHyper, TaskId, TaskgenError};

const LAYER_NOTE: &str = "Layer indices are 0-based positions of post-block residual outputs \
(layer 0 is the output of the first transformer block), matching the extractor's file numbering.";

#[derive(Parser, Debug)]
#[command(name = "truthlens", version, about = "Linear truth-direction probing experiments", after_help = LAYER_NOTE)]
struct Cli {
    /// Random seed for generation, splits and probe training
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (the TRUTHLENS_OUT environment variable takes precedence)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory with {task}.{prompt}.jsonl manifests and .actv activation files
    #[arg(long, global = true)]
    activations: Option<PathBuf>,
    /// City/country CSV (header `city,country`); defaults to the bundled table
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Worker threads for experiment jobs
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct PlanArgs {
    /// JSON experiment plan; flags given on the command line override its fields
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Comma-separated task ids; default: every task with a manifest under the first prompt
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<TaskId>,
    /// Comma-separated prompt ids [default: no-prompt]
    #[arg(long, value_delimiter = ',')]
    prompts: Vec<PromptId>,
    /// Comma-separated 0-based layer indices, or "all" for every layer on disk
    #[arg(long)]
    layers: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate labelled statement datasets as JSONL manifests under --out
    Gen {
        /// Comma-separated task ids, or "all"
        #[arg(long, value_delimiter = ',', required = true)]
        task: Vec<String>,
        /// Statements per task [default: the task's reference size]
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated prompt templates
        #[arg(long, value_delimiter = ',', default_value = "no-prompt")]
        prompt: Vec<PromptId>,
    },
    /// Write a synthetic activation stack with planted directions under --activations
    Synth(SynthArgs),
    /// Train one probe on the train split and report its test AUROC
    Train {
        #[arg(long)]
        task: TaskId,
        #[arg(long, default_value = "no-prompt")]
        prompt: PromptId,
        /// 0-based post-block layer index
        #[arg(long)]
        layer: usize,
    },
    /// In-domain AUROC, variance ratio and probe similarity across layers
    Sweep(PlanArgs),
    /// Probe trained on one task evaluated on every plan task, per layer
    Xgen {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        source: TaskId,
    },
    /// Cross-task AUROC matrix at one layer, one per prompt
    Matrix {
        #[command(flatten)]
        plan: PlanArgs,
        /// 0-based post-block layer index
        #[arg(long)]
        layer: usize,
    },
    /// Probe trained under one prompt, evaluated under another
    Transfer {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        task: TaskId,
        #[arg(long)]
        source_prompt: PromptId,
        #[arg(long)]
        target_prompt: PromptId,
    },
    /// Variance explained by polarity-invariant and polarity-dependent directions (F0 vs F1)
    Polarity(PlanArgs),
    /// 2D projections onto the probe direction and the top residual direction
    Project {
        #[command(flatten)]
        plan: PlanArgs,
        /// 0-based post-block layer index
        #[arg(long)]
        layer: usize,
    },
    /// Rebuild {out}/index.json from the tables and plots on disk
    Report(PlanArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Activation width
    #[arg(long, default_value_t = 64)]
    d: usize,
    /// Examples (split evenly over truth x polarity)
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Number of layers
    #[arg(long, default_value_t = 20)]
    layers: usize,
    /// Truth separation per layer: "const:V", "step:L:V", "linear:A:B" (A + B*layer) or a comma list
    #[arg(long, default_value = "const:4")]
    truth: String,
    /// Polarity separation per layer, same syntax as --truth
    #[arg(long, default_value = "const:0")]
    polarity: String,
    /// Rotation angle (radians) of the truth direction per layer, same syntax
    #[arg(long, default_value = "const:0")]
    rotation: String,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Seed for the planted directions [default: --seed]
    #[arg(long)]
    direction_seed: Option<u64>,
    /// Task id the examples are filed under
    #[arg(long, default_value = "F0")]
    task: TaskId,
    /// If set, negated examples are filed under this task and affirmative ones under --task
    #[arg(long)]
    negated_task: Option<TaskId>,
    #[arg(long, default_value = "no-prompt")]
    prompt: PromptId,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let flag = match &e {
            ExperimentError::InvalidPlan(_) => "--plan: ",
            ExperimentError::MissingInputs(_) | ExperimentError::UnknownExample { .. } | ExperimentError::MissingSplit { .. } => {
                "--activations: "
            }
            ExperimentError::LayerUnavailable { .. } => "--layer: ",
            ExperimentError::IdMisalignment { .. } => "--target-prompt: ",
            _ => "",
        };
        if e.is_validation() {
            CliError::Validation(format!("{flag}{e}"))
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

struct Globals {
    seed: u64,
    out: PathBuf,
    activations: PathBuf,
    kb: Option<PathBuf>,
    jobs: Option<usize>,
    explicit_seed: bool,
    explicit_out: bool,
    explicit_activations: bool,
}

impl Globals {
    fn from_cli(cli: &Cli) -> Self {
        let env_out = std::env::var_os("TRUTHLENS_OUT").filter(|v| !v.is_empty()).map(PathBuf::from);
        Self {
            seed: cli.seed.unwrap_or(0),
            explicit_seed: cli.seed.is_some(),
            explicit_out: env_out.is_some() || cli.out.is_some(),
            out: env_out.or_else(|| cli.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            explicit_activations: cli.activations.is_some(),
            activations: cli.activations.clone().unwrap_or_else(|| PathBuf::from("activations")),
            kb: cli.kb.clone(),
            jobs: cli.jobs.map(|j| j as usize),
        }
    }

    fn kb(&self) -> Result<KnowledgeBase, CliError> {
        match &self.kb {
            Some(p) => KnowledgeBase::from_csv(p).map_err(|e| CliError::Validation(format!("--kb: {e}"))),
            None => Ok(KnowledgeBase::bundled()),
        }
    }
}

fn parse_layers(s: &str) -> Result<LayerSelection, CliError> {
    if s.trim() == "all" {
        return Ok(LayerSelection::all());
    }
    s.split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map(LayerSelection::List)
        .map_err(|_| CliError::Validation(format!("--layers: expected \"all\" or a comma list of layer indices, got {s:?}")))
}

/// Tasks that have a manifest for `prompt` under `root`, in canonical order.
fn discover_tasks(root: &Path, prompt: PromptId) -> Vec<TaskId> {
    TaskId::ALL
        .into_iter()
        .filter(|&t| root.join(manifest_name(t, prompt)).is_file())
        .collect()
}

fn build_plan(g: &Globals, args: &PlanArgs) -> Result<ExperimentPlan, CliError> {
    let mut plan = match &args.plan {
        Some(path) => {
            let mut p = ExperimentPlan::load(path).map_err(|e| CliError::Validation(format!("--plan: {e}")))?;
            if g.explicit_seed {
                p.seed = g.seed;
            }
            if g.explicit_out {
                p.out = g.out.clone();
            }
            if g.explicit_activations {
                p.activations = g.activations.clone();
            }
            p
        }
        None => {
            let mut p = ExperimentPlan::new(Vec::new(), vec![PromptId::NoPrompt], &g.activations, &g.out);
            p.seed = g.seed;
            p.hyper = ProbeHyper::default();
            p
        }
    };
    if !args.prompts.is_empty() {
        plan.prompts = args.prompts.clone();
    }
    if !args.tasks.is_empty() {
        plan.tasks = args.tasks.clone();
    } else if args.plan.is_none() {
        plan.tasks = plan
            .prompts
            .first()
            .map(|&p| discover_tasks(&plan.activations, p))
            .unwrap_or_default();
    }
    if let Some(l) = &args.layers {
        plan.layers = parse_layers(l)?;
    }
    if let Some(j) = g.jobs {
        plan.jobs = j;
    }
    Ok(plan)
}

fn parse_schedule(flag: &str, s: &str, layers: usize) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Validation(format!("--{flag}: cannot parse schedule {s:?}"));
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let v = match parts.as_slice() {
        ["const", v] => vec![num(v)?; layers],
        ["step", at, v] => {
            let at: usize = at.trim().parse().map_err(|_| bad())?;
            let v = num(v)?;
            (0..layers).map(|l| if l >= at { v } else { 0.0 }).collect()
        }
        ["linear", a, b] => {
            let (a, b) = (num(a)?, num(b)?);
            (0..layers).map(|l| a + b * l as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if v.len() != layers {
        return Err(CliError::Validation(format!(
            "--{flag}: schedule has {} entries for {layers} layers",
            v.len()
        )));
    }
    Ok(v)
}

fn cmd_gen(g: &Globals, tasks: &[String], n: Option<usize>, prompts: &[PromptId]) -> Result<(), CliError> {
    let kb = g.kb()?;
    let tasks: Vec<TaskId> = if tasks.len() == 1 && tasks[0].eq_ignore_ascii_case("all") {
        TaskId::ALL.to_vec()
    } else {
        tasks
            .iter()
            .map(|t| t.parse().map_err(|e: TaskgenError| CliError::Validation(format!("--task: {e}"))))
            .collect::<Result<_, _>>()?
    };
    std::fs::create_dir_all(&g.out).map_err(runtime)?;
    for task in tasks {
        for &prompt in prompts {
            let size = n.unwrap_or_else(|| task.default_size());
            let ds = build_dataset(task, &kb, size, prompt, g.seed).map_err(|e| match e {
                TaskgenError::Io(_) | TaskgenError::Json(_) => runtime(e),
                other => CliError::Validation(format!("--n: {other}")),
            })?;
            let path = g.out.join(manifest_name(task, prompt));
            write_jsonl(&path, &ds).map_err(runtime)?;
            let pos = ds.iter().filter(|s| s.label).count();
            println!("{}\t{} statements ({} true, {} false)", path.display(), ds.len(), pos, ds.len() - pos);
        }
    }
    Ok(())
}

fn cmd_synth(g: &Globals, a: &SynthArgs) -> Result<(), CliError> {
    let truth = parse_schedule("truth", &a.truth, a.layers)?;
    let polarity = parse_schedule("polarity", &a.polarity, a.layers)?;
    let rotation = parse_schedule("rotation", &a.rotation, a.layers)?;
    let mut spec = SyntheticSpec::new(a.d, a.n, a.layers, g.seed)
        .with_truth(truth)
        .with_polarity(polarity)
        .with_rotation(rotation)
        .with_noise(a.noise);
    if let Some(ds) = a.direction_seed {
        let dirs = SyntheticSpec::new(a.d, a.n, a.layers, ds);
        spec = spec.with_directions(dirs.truth_dir, dirs.polarity_dir);
    }
    let stack = gen_synthetic(&spec).map_err(|e| match e {
        SynthError::InvalidSpec(m) => CliError::Validation(format!("synth: {m}")),
        other => runtime(other),
    })?;
    stack
        .write(&g.activations, a.task, a.negated_task, a.prompt, g.seed)
        .map_err(runtime)?;
    println!(
        "{}\t{} examples x {} layers (d = {})",
        g.activations.display(),
        a.n,
        a.layers,
        a.d
    );
    Ok(())
}

fn finish(exp: &Experiment) -> Result<(), CliError> {
    let index = exp.emit_report()?;
    println!("{}\t{} entries", exp.plan().out.join("index.json").display(), index.entries.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = Globals::from_cli(&cli);
    match &cli.command {
        Command::Gen { task, n, prompt } => cmd_gen(&g, task, *n, prompt),
        Command::Synth(a) => cmd_synth(&g, a),
        Command::Train { task, prompt, layer } => {
            let mut plan = ExperimentPlan::new(vec![*task], vec![*prompt], &g.activations, &g.out);
            plan.seed = g.seed;
            plan.layers = LayerSelection::List(vec![*layer]);
            plan.jobs = g.jobs.unwrap_or(1);
            let exp = Experiment::new(plan)?;
            let (_, path, score) = exp.train_one(*task, *prompt, *layer)?;
            println!("{}\ttest AUROC {score:.4}", path.display());
            Ok(())
        }
        Command::Sweep(p) => {
            let exp = Experiment::new(build_plan(&g, p)?)?;
            for r in exp.layer_sweep()? {
                println!("{}\t{}\tlayer {:>2}\tAUROC {:.4}\tR {:.4}", r.task, r.prompt, r.layer, r.auroc, r.variance_ratio);
            }
            finish(&exp)
        }
        Command::Xgen { plan, source } => {
            let exp = Experiment::new(build_plan(&g, plan)?)?;
            for r in exp.generalization_sweep(*source)? {
                println!("{}->{}\t{}\tlayer {:>2}\tAUROC {:.4}", r.source, r.target, r.prompt, r.layer, r.auroc);
            }
            finish(&exp)
        }
        Command::Matrix { plan, layer } => {
            let exp = Experiment::new(build_plan(&g, plan)?)?;
            for (prompt, m) in exp.full_matrix(*layer)? {
                println!("# {prompt}, layer {layer}\n{}", m.to_csv());
            }
            finish(&exp)
        }
        Command::Transfer {
            plan,
            task,
            source_prompt,
            target_prompt,
        } => {
            let mut p = build_plan(&g, plan)?;
            if plan.tasks.is_empty() {
                p.tasks = vec![*task];
            }
            if plan.prompts.is_empty() {
                p.prompts = vec![*source_prompt];
            }
            let exp = Experiment::new(p)?;
            for r in exp.prompt_transfer(*task, *source_prompt, *target_prompt)? {
                println!("layer {:>2}\tin-domain {:.4}\ttransfer {:.4}", r.layer, r.in_domain, r.transfer);
            }
            finish(&exp)
        }
        Command::Polarity(p) => {
            let mut plan = build_plan(&g, p)?;
            if p.tasks.is_empty() && p.plan.is_none() {
                plan.tasks = vec![TaskId::F0, TaskId::F1];
            }
            let exp = Experiment::new(plan)?;
            for r in exp.polarity_sweep()? {
                println!("{}\tlayer {:>2}\tfrac_G {:.4}\tfrac_p {:.4}", r.prompt, r.layer, r.frac_g, r.frac_p);
            }
            finish(&exp)
        }
        Command::Project { plan, layer } => {
            let exp = Experiment::new(build_plan(&g, plan)?)?;
            for t in exp.projection_report(*layer)? {
                println!("{}\t{}\t{} points", t.task, t.prompt, t.projection.points.len());
            }
            finish(&exp)
        }
        Command::Report(p) => {
            let plan = build_plan(&g, p)?;
            plan.check()?;
            let layers = plan.resolve_layers().unwrap_or_default();
            let index = experiments::emit_report(&plan, &layers)?;
            println!("{}\t{} entries", plan.out.join("index.json").display(), index.entries.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(parse_schedule("truth", "const:2", 3).unwrap(), vec![2.0; 3]);
        assert_eq!(parse_schedule("truth", "step:2:4", 4).unwrap(), vec![0.0, 0.0, 4.0, 4.0]);
        assert_eq!(parse_schedule("truth", "linear:1:0.5", 3).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_schedule("truth", "1,2", 2).unwrap(), vec![1.0, 2.0]);
        assert!(parse_schedule("truth", "1,2", 3).is_err());
        assert!(parse_schedule("truth", "wobble:1", 3).is_err());
    }

    #[test]
    fn layer_lists() {
        assert_eq!(parse_layers("all").unwrap(), LayerSelection::all());
        assert_eq!(parse_layers("3, 1").unwrap(), LayerSelection::List(vec![3, 1]));
        assert!(parse_layers("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn discovers_tasks_with_a_manifest_for_the_prompt() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("F1.no-prompt.jsonl"), "").unwrap();
        std::fs::write(dir.path().join("F0.ask-correct.jsonl"), "").unwrap();
        assert_eq!(discover_tasks(dir.path(), PromptId::NoPrompt), vec![TaskId::F1]);
    }
}
