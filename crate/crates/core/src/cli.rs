//! The `actionkb` command line.
//!
//! Every failure prints one line `error[CODE]: message` on stderr and exits
//! nonzero. Commands that write artifacts also write a `manifest.json`
//! listing each artifact with its SHA-256 digest.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::action_kb::{
    distill_stage_one, distill_stage_two, load_kb, ActionKnowledge, DistillError, KbDocument, KbError,
};
use crate::env::{starter, Scenario, ScenarioError, ScenarioPack};
use crate::jsonl::{write_jsonl, JsonlError};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::prompt::PromptTemplate;
use crate::report::{build_report, load_corpus, ReportError};
use crate::runtime::{
    run_batch, BatchError, BatchMetrics, Enforcement, EpisodeConfig, KbSet, PolicyClient, PolicyError, ScriptedPolicy,
};
use crate::self_learning::{
    self_learning_loop, summary_table, CommandTuneHook, DefaultPolicyFactory, LoopConfig, PolicyFactory,
    SelfLearnError, TuneError, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS, DEFAULT_TAU,
};
use crate::validator::{compute_rates, validate_trajectory};

#[derive(Debug, Parser)]
#[command(name = "actionkb", version, about = "Action knowledge tooling for language agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate, render or draft action knowledge files.
    Kb {
        #[command(subcommand)]
        action: KbCommand,
    },
    /// Run episodes and write trajectories plus metrics.
    Run(RunArgs),
    /// Validate every trajectory in a JSON Lines file.
    ValidateFile(ValidateFileArgs),
    /// Run the self-learning loop from a config file.
    Selflearn(SelflearnArgs),
    /// Rate tables, per-task results and violation exemplars.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    Validate {
        file: PathBuf,
    },
    Render {
        file: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Distill(DistillArgs),
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    #[arg(long)]
    pub policy: String,
    /// Task description, or `@path` to read it from a file.
    #[arg(long)]
    pub task: String,
    /// Reviewed draft; runs the rules-only second stage.
    #[arg(long)]
    pub refined: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    /// KB files; defaults to the bundled set.
    #[arg(long = "kb")]
    pub kb: Vec<PathBuf>,
    /// Scenario file, or `starter:qa`, `starter:household`, `starter:all`.
    #[arg(long)]
    pub scenarios: String,
    /// `scripted:<path>`, `http:<url>[#model]`, or `gold`.
    #[arg(long)]
    pub policy: String,
    #[arg(long, default_value = "off")]
    pub enforcement: Enforcement,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub retries: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateFileArgs {
    pub file: PathBuf,
    #[arg(long = "kb")]
    pub kb: Vec<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelflearnArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tune_cmd: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long = "kb")]
    pub kb: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub max_exemplars: usize,
}

/// Self-learning config file. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelflearnConfig {
    pub train: String,
    pub test: String,
    pub base_policy: String,
    #[serde(default)]
    pub policies_dir: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub kb: Vec<PathBuf>,
    #[serde(default)]
    pub tune_cmd: Option<String>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub enforcement: Enforcement,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}
fn default_retries() -> usize {
    3
}
fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message.replace('\n', " "))
    }
}

impl From<KbError> for CliError {
    fn from(e: KbError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Io { .. } => "IO_ERROR",
            ScenarioError::Malformed { .. } => "MALFORMED_SCENARIOS",
            ScenarioError::InvalidWorld { .. } => "INVALID_WORLD",
            ScenarioError::DuplicateTask(_) => "DUPLICATE_TASK",
        };
        Self::new(code, e.to_string())
    }
}

impl From<BatchError> for CliError {
    fn from(e: BatchError) -> Self {
        let code = match e {
            BatchError::EmptyInput => "EMPTY_INPUT",
            BatchError::MissingKb { .. } => "MISSING_KB",
            BatchError::Config(_) => "INVALID_CONFIG",
            BatchError::Pool(_) => "POOL_ERROR",
        };
        Self::new(code, e.to_string())
    }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        let code = match e {
            JsonlError::Io { .. } => "IO_ERROR",
            JsonlError::Parse { .. } => "MALFORMED_TRAJECTORY",
        };
        Self::new(code, e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<SelfLearnError> for CliError {
    fn from(e: SelfLearnError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<DistillError> for CliError {
    fn from(e: DistillError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        Self::new("POLICY_UNAVAILABLE", e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("IO_ERROR", format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("values serialize") + "\n"
}

/// Bundled KBs when `paths` is empty, otherwise exactly the given files.
pub fn load_kbs(paths: &[PathBuf]) -> Result<KbSet, CliError> {
    if paths.is_empty() {
        return Ok(KbSet::shipped());
    }
    let mut set = KbSet::new();
    for p in paths {
        set.insert(load_kb(p)?);
    }
    Ok(set)
}

/// A scenario file path, or one of the bundled packs.
pub fn load_scenarios(spec: &str) -> Result<Vec<Scenario>, CliError> {
    match spec {
        "starter:qa" => Ok(starter::qa().scenarios),
        "starter:household" => Ok(starter::household().scenarios),
        "starter:all" => {
            let mut s = starter::qa().scenarios;
            s.extend(starter::household().scenarios);
            Ok(s)
        }
        path => Ok(ScenarioPack::load(path)?.scenarios),
    }
}

fn open_run_policy(spec: &str, scenarios: &[Scenario], kbs: &KbSet) -> Result<Box<dyn PolicyClient>, CliError> {
    if spec == "gold" {
        let pairs = scenarios.iter().filter_map(|s| kbs.get(s.kb_id()).map(|kb| (s, kb)));
        let p =
            ScriptedPolicy::from_gold("gold", pairs).map_err(|e| CliError::new("BAD_GOLD_SCRIPT", e.to_string()))?;
        return Ok(Box::new(p));
    }
    if !spec.starts_with("scripted:") && !spec.starts_with("http:") {
        return Err(CliError::new(
            "USAGE",
            format!("policy `{spec}` must be scripted:<path>, http:<url>[#model] or gold"),
        ));
    }
    Ok(DefaultPolicyFactory::new().open(spec)?)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

fn resolve_scenarios(base: &Path, spec: &str) -> String {
    if spec.starts_with("starter:") {
        spec.to_string()
    } else {
        resolve(base, Path::new(spec)).display().to_string()
    }
}

fn cmd_kb_validate(file: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let kb = load_kb(file)?;
    let terminals = kb.terminals().len();
    let _ = writeln!(
        out,
        "{} actions, {} terminal{}, reachable: yes",
        kb.actions().len(),
        terminals,
        if terminals == 1 { "" } else { "s" }
    );
    Ok(())
}

fn cmd_kb_render(file: &Path, dest: Option<&Path>, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let kb = load_kb(file)?;
    let text = PromptTemplate::from_kb(&kb)
        .render_skeleton()
        .map_err(|e| CliError::new("MISSING_SEGMENT", e.to_string()))?;
    match dest {
        None => {
            let _ = out.write_all(text.as_bytes());
        }
        Some(path) => {
            write_file(path, &text)?;
            let mut m = RunManifest::start("kb render", argv.to_vec(), serde_json::json!({ "kb": file }), None);
            m.input(file)?;
            m.output(path)?;
            let mut manifest_path = path.as_os_str().to_owned();
            manifest_path.push(".manifest.json");
            m.finish(Path::new(&manifest_path))?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_kb_distill(args: &DistillArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let task = match args.task.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| io_error(Path::new(path), e))?,
        None => args.task.clone(),
    };
    let policy = DefaultPolicyFactory::new().open(&args.policy)?;
    create_dir(&args.out)?;
    let mut m = RunManifest::start(
        "kb distill",
        argv.to_vec(),
        serde_json::json!({ "policy": args.policy, "refined": args.refined }),
        None,
    );
    match &args.refined {
        None => {
            let draft = distill_stage_one(policy.as_ref(), &task, &args.out)?;
            m.output(&draft.draft_path)?;
            m.output(&draft.review_path)?;
            let blocking = draft.checklist.blocking().count();
            let _ = writeln!(
                out,
                "draft: {} ({} actions, {} blocking review items)\nreview: {}",
                draft.draft_path.display(),
                draft.document.actions.len(),
                blocking,
                draft.review_path.display()
            );
        }
        Some(refined_path) => {
            let text = fs::read_to_string(refined_path).map_err(|e| io_error(refined_path, e))?;
            let refined: KbDocument = serde_json::from_str(&text)
                .map_err(|e| CliError::new("MALFORMED_DOCUMENT", format!("{}: {e}", refined_path.display())))?;
            m.input(refined_path)?;
            let (doc, checklist) = distill_stage_two(policy.as_ref(), &task, &refined, &args.out)?;
            let final_path = args.out.join("final.kb.json");
            m.output(&final_path)?;
            m.output(&args.out.join("final.review.md"))?;
            m.finish(&args.out.join(MANIFEST_FILE))?;
            ActionKnowledge::from_document(doc)?;
            let _ = writeln!(
                out,
                "final: {} ({} review items, loads cleanly)",
                final_path.display(),
                checklist.items.len()
            );
            return Ok(());
        }
    }
    m.finish(&args.out.join(MANIFEST_FILE))?;
    Ok(())
}

fn rate_line(m: &BatchMetrics) -> String {
    let mut line = format!(
        "{} episodes, {} completed, {} failed, success {:.2}%, mean reward {:.4}",
        m.episodes,
        m.completed,
        m.failed,
        100.0 * m.success_rate,
        m.mean_reward
    );
    if let Some(r) = &m.rates {
        line.push_str(&format!(
            ", invalid {:.2}%, misordered {:.2}%, rejections {}",
            100.0 * r.invalid_rate,
            100.0 * r.misordered_rate,
            m.rejections
        ));
    }
    line
}

fn cmd_run(args: &RunArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let kbs = load_kbs(&args.kb)?;
    let scenarios = load_scenarios(&args.scenarios)?;
    let policy = open_run_policy(&args.policy, &scenarios, &kbs)?;
    let mut config = EpisodeConfig::default().with_enforcement(args.enforcement);
    config.max_steps = args.max_steps;
    config.max_retries = args.retries;
    config.sampling.seed = args.seed;
    create_dir(&args.out)?;
    let mut m = RunManifest::start(
        "run",
        argv.to_vec(),
        serde_json::to_value(args).expect("args serialize"),
        args.seed,
    );
    for kb in &args.kb {
        m.input(kb)?;
    }
    if !args.scenarios.starts_with("starter:") {
        m.input(Path::new(&args.scenarios))?;
    }
    if let Some(p) = args.policy.strip_prefix("scripted:") {
        m.input(Path::new(p))?;
    }
    info!(episodes = scenarios.len(), policy = %args.policy, "running batch");
    let result = run_batch(&scenarios, &kbs, policy.as_ref(), &config, args.parallelism)?;
    let traj_path = args.out.join("trajectories.jsonl");
    let metrics_path = args.out.join("metrics.json");
    write_jsonl(&traj_path, &result.entries)?;
    write_file(&metrics_path, &pretty(&result.metrics))?;
    m.output(&traj_path)?;
    m.output(&metrics_path)?;
    m.finish(&args.out.join(MANIFEST_FILE))?;
    let _ = writeln!(out, "{}", rate_line(&result.metrics));
    Ok(())
}

fn cmd_validate_file(args: &ValidateFileArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let kbs = load_kbs(&args.kb)?;
    let corpus = load_corpus(&args.file)?;
    if corpus.trajectories.is_empty() {
        return Err(CliError::new(
            "EMPTY_INPUT",
            format!("{} holds no trajectories", args.file.display()),
        ));
    }
    let mut reports = Vec::new();
    for t in &corpus.trajectories {
        let kb = kbs
            .get(&t.kb_id)
            .ok_or_else(|| CliError::new("MISSING_KB", format!("task {} needs KB {}", t.task_id, t.kb_id)))?;
        let r = validate_trajectory(kb, t);
        match r.first_violation() {
            None => {
                let _ = writeln!(out, "{}: clean", t.task_id);
            }
            Some(v) => {
                let flags: Vec<&str> = v.flags.iter().map(|f| f.as_str()).collect();
                let _ = writeln!(out, "{}: step {}: {}", t.task_id, v.index + 1, flags.join(", "));
            }
        }
        reports.push(r);
    }
    let rates = compute_rates(&reports).map_err(|e| CliError::new("EMPTY_INPUT", e.to_string()))?;
    let _ = writeln!(
        out,
        "{} trajectories, {} actions, invalid {:.2}%, misordered {:.2}%, path mismatch {:.2}%, parse errors {}",
        rates.trajectories,
        rates.actions,
        100.0 * rates.invalid_rate,
        100.0 * rates.misordered_rate,
        100.0 * rates.path_mismatch_rate,
        rates.parse_errors
    );
    Ok(())
}

fn cmd_selflearn(args: &SelflearnArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_error(&args.config, e))?;
    let mut cfg: SelflearnConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::new("INVALID_CONFIG", format!("{}: {e}", args.config.display())))?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        base
    };

    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(t) = args.tau {
        cfg.tau = t;
    }
    if let Some(n) = args.max_iterations {
        cfg.max_iterations = n;
    }
    if let Some(p) = args.parallelism {
        cfg.parallelism = p;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let hook = match (&args.tune_cmd, &cfg.tune_cmd) {
        (Some(cmd), _) => CommandTuneHook::new(cmd),
        (None, Some(cmd)) => CommandTuneHook::new_in(cmd, Some(&base)),
        (None, None) => Err(TuneError::Missing("no tune command configured".into())),
    }
    .map_err(|e| CliError::new("TUNE_HOOK_MISSING", e.to_string()))?;

    let out_dir = match (&args.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => resolve(&base, o),
        (None, None) => return Err(CliError::new("USAGE", "no output directory; pass --out")),
    };
    let kb_paths: Vec<PathBuf> = cfg.kb.iter().map(|p| resolve(&base, p)).collect();
    let kbs = load_kbs(&kb_paths)?;
    let train = load_scenarios(&resolve_scenarios(&base, &cfg.train))?;
    let test = load_scenarios(&resolve_scenarios(&base, &cfg.test))?;

    let mut factory = DefaultPolicyFactory::new();
    if let Some(d) = &cfg.policies_dir {
        factory = factory.with_scripts_dir(resolve(&base, d));
    }
    if let Some(url) = &cfg.endpoint {
        factory = factory.with_endpoint(url.clone());
    }

    let mut loop_cfg = LoopConfig::new(train, test, cfg.base_policy.clone(), &out_dir);
    loop_cfg.epsilon = cfg.epsilon;
    loop_cfg.tau = cfg.tau;
    loop_cfg.max_iterations = cfg.max_iterations;
    loop_cfg.parallelism = cfg.parallelism;
    loop_cfg.episode = EpisodeConfig::default().with_enforcement(cfg.enforcement);
    loop_cfg.episode.max_steps = cfg.max_steps;
    loop_cfg.episode.max_retries = cfg.retries;
    loop_cfg.episode.sampling.seed = cfg.seed;

    let mut m = RunManifest::start(
        "selflearn",
        argv.to_vec(),
        serde_json::to_value(&cfg).expect("config serializes"),
        cfg.seed,
    );
    m.input(&args.config)?;
    let outcome = self_learning_loop(&loop_cfg, &kbs, &factory, &hook)?;
    for r in &outcome.records {
        let dir = out_dir.join("iterations").join(r.index.to_string());
        for name in ["trajectories.jsonl", "dataset.jsonl", "report.json"] {
            m.output(&dir.join(name))?;
        }
    }
    m.output(&out_dir.join("summary.json"))?;
    let table = summary_table(&outcome);
    let table_path = out_dir.join("summary.txt");
    write_file(&table_path, &table)?;
    m.output(&table_path)?;
    m.finish(&out_dir.join(MANIFEST_FILE))?;
    let _ = out.write_all(table.as_bytes());
    Ok(())
}

fn cmd_report(args: &ReportArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let kbs = load_kbs(&args.kb)?;
    let corpora = args.files.iter().map(load_corpus).collect::<Result<Vec<_>, _>>()?;
    let report = build_report(&corpora, &kbs, args.max_exemplars)?;
    let text = report.to_text();
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let json_path = dir.join("report.json");
        let text_path = dir.join("report.txt");
        write_file(&json_path, &pretty(&report))?;
        write_file(&text_path, &text)?;
        let mut m = RunManifest::start(
            "report",
            argv.to_vec(),
            serde_json::json!({ "files": args.files, "kb": args.kb }),
            None,
        );
        for f in &args.files {
            m.input(f)?;
        }
        m.output(&json_path)?;
        m.output(&text_path)?;
        m.finish(&dir.join(MANIFEST_FILE))?;
    }
    let _ = out.write_all(text.as_bytes());
    Ok(())
}

/// Execute a parsed command.
pub fn execute(cli: &Cli, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Kb { action } => match action {
            KbCommand::Validate { file } => cmd_kb_validate(file, out),
            KbCommand::Render { file, out: dest } => cmd_kb_render(file, dest.as_deref(), argv, out),
            KbCommand::Distill(a) => cmd_kb_distill(a, argv, out),
        },
        Command::Run(a) => cmd_run(a, argv, out),
        Command::ValidateFile(a) => cmd_validate_file(a, out),
        Command::Selflearn(a) => cmd_selflearn(a, argv, out),
        Command::Report(a) => cmd_report(a, argv, out),
    }
}

/// Parse `args` (program name first) and run; returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(err, "{}", CliError::new("USAGE", first));
            return 2;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, &argv, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            1
        }
    }
}

/// Entry point for the binary: real process arguments and streams.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
