use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use dialogue_forge::analyzer::{self, AnalysisConfig, AnalysisReport};
use dialogue_forge::pack::DomainPack;
use dialogue_forge::registry::{Registry, REGISTRY_ENV};
use dialogue_forge::run::{RunConfig, CORPUS_FILE};
use dialogue_forge::service::{router, AppState};
use dialogue_forge::session::{read_corpus, run_episodes, write_corpus};
use dialogue_forge::DialogueLog;

#[derive(Parser)]
#[command(name = "dialogue-forge", version, about = "Simulate, analyze and debug rule-based dialogue systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run simulated episodes and write corpus.jsonl.
    Simulate(Box<SimulateArgs>),
    /// Write report.html and report.json for a corpus.
    Analyze(AnalyzeArgs),
    /// Compare corpora simulated from the same seeds.
    Compare(CompareArgs),
    /// Serve the interactive debugging API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON run config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pack: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long = "seed")]
    base_seed: Option<u64>,
    #[arg(long)]
    max_turns: Option<usize>,
    #[arg(long = "out")]
    output_dir: Option<PathBuf>,
    /// Parallel episode workers (output order is unaffected).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// System NLU: pattern or none.
    #[arg(long)]
    nlu: Option<String>,
    /// System tracker: rule.
    #[arg(long)]
    dst: Option<String>,
    /// System policy: rule.
    #[arg(long)]
    policy: Option<String>,
    /// System NLG: template or none.
    #[arg(long)]
    nlg: Option<String>,
    #[arg(long)]
    domain_confusion: Option<f64>,
    #[arg(long)]
    slot_confusion: Option<f64>,
    #[arg(long)]
    drop_rate: Option<f64>,
    /// Slot the system policy never answers (repeatable).
    #[arg(long = "withhold")]
    withheld_slots: Vec<String>,
    #[arg(long)]
    user_domain_confusion: Option<f64>,
    #[arg(long)]
    user_slot_confusion: Option<f64>,
    #[arg(long)]
    user_drop_rate: Option<f64>,
    #[arg(long)]
    max_acts_per_turn: Option<usize>,
    #[arg(long)]
    min_domains: Option<usize>,
    #[arg(long)]
    max_domains: Option<usize>,
    #[arg(long)]
    min_constraints: Option<usize>,
    #[arg(long)]
    max_constraints: Option<usize>,
    #[arg(long)]
    min_requests: Option<usize>,
    #[arg(long)]
    max_requests: Option<usize>,
    #[arg(long)]
    dependency_probability: Option<f64>,
    /// Restrict goals to this domain (repeatable).
    #[arg(long = "goal-domain")]
    goal_domains: Vec<String>,
    /// Slot requested in every sub-goal that has it (repeatable).
    #[arg(long = "force-request")]
    forced_requests: Vec<String>,
    #[arg(long)]
    reward_per_turn: Option<f64>,
    #[arg(long)]
    success_factor: Option<f64>,
    #[arg(long)]
    failure_factor: Option<f64>,
}

impl SimulateArgs {
    fn overrides(&self) -> Vec<(&'static str, Value)> {
        let mut out = Vec::new();
        let mut put = |pointer: &'static str, value: Option<Value>| {
            if let Some(v) = value {
                out.push((pointer, v));
            }
        };
        let list = |v: &Vec<String>| (!v.is_empty()).then(|| json!(v));
        put("/pack", self.pack.as_ref().map(|p| json!(p)));
        put("/episodes", self.episodes.map(|v| json!(v)));
        put("/base_seed", self.base_seed.map(|v| json!(v)));
        put("/max_turns", self.max_turns.map(|v| json!(v)));
        put("/output_dir", self.output_dir.as_ref().map(|p| json!(p)));
        put("/system/nlu", self.nlu.as_ref().map(|v| json!(v)));
        put("/system/dst", self.dst.as_ref().map(|v| json!(v)));
        put("/system/policy", self.policy.as_ref().map(|v| json!(v)));
        put("/system/nlg", self.nlg.as_ref().map(|v| json!(v)));
        put("/system/noise/domain_confusion_rate", self.domain_confusion.map(|v| json!(v)));
        put("/system/noise/slot_confusion_rate", self.slot_confusion.map(|v| json!(v)));
        put("/system/noise/drop_rate", self.drop_rate.map(|v| json!(v)));
        put("/system/withheld_slots", list(&self.withheld_slots));
        put("/user/noise/domain_confusion_rate", self.user_domain_confusion.map(|v| json!(v)));
        put("/user/noise/slot_confusion_rate", self.user_slot_confusion.map(|v| json!(v)));
        put("/user/noise/drop_rate", self.user_drop_rate.map(|v| json!(v)));
        put("/user/max_acts_per_turn", self.max_acts_per_turn.map(|v| json!(v)));
        put("/user/goal/min_domains", self.min_domains.map(|v| json!(v)));
        put("/user/goal/max_domains", self.max_domains.map(|v| json!(v)));
        put("/user/goal/min_constraints", self.min_constraints.map(|v| json!(v)));
        put("/user/goal/max_constraints", self.max_constraints.map(|v| json!(v)));
        put("/user/goal/min_requests", self.min_requests.map(|v| json!(v)));
        put("/user/goal/max_requests", self.max_requests.map(|v| json!(v)));
        put("/user/goal/dependency_probability", self.dependency_probability.map(|v| json!(v)));
        put("/user/goal/domains", list(&self.goal_domains));
        put("/user/goal/forced_requests", list(&self.forced_requests));
        put("/reward/per_turn", self.reward_per_turn.map(|v| json!(v)));
        put("/reward/success_factor", self.success_factor.map(|v| json!(v)));
        put("/reward/failure_factor", self.failure_factor.map(|v| json!(v)));
        out
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    corpus: PathBuf,
    /// Pack the corpus was simulated with; the bundled pack when absent.
    #[arg(long)]
    pack: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = AnalysisConfig::default().loop_window)]
    loop_window: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Two or more corpora; the first is the baseline.
    #[arg(required = true, num_args = 2..)]
    corpora: Vec<PathBuf>,
    /// One label per corpus, in order; the paths when absent.
    #[arg(long = "label")]
    labels: Vec<String>,
    #[arg(long)]
    pack: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = AnalysisConfig::default().loop_window)]
    loop_window: usize,
}

#[derive(Args)]
struct ServeArgs {
    /// Registry file; the built-in registry when absent.
    #[arg(long, env = REGISTRY_ENV)]
    registry: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory of built UI assets to serve alongside the API.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

/// Bad input (exit 1) versus a failure while doing the work (exit 2).
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(*args),
        Command::Analyze(args) => analyze(args),
        Command::Compare(args) => compare(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// Joins the error chain, skipping causes a parent message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    if args.workers == 0 {
        return Err(invalid(anyhow::anyhow!("--workers must be at least 1")));
    }
    let config = RunConfig::layered(args.config.as_deref(), &args.overrides()).map_err(invalid)?;
    let pack = config.validate().map_err(invalid)?;
    let corpus = run_episodes(pack.clone(), &config.simulation(), config.episodes as usize, config.base_seed, args.workers)
        .map_err(invalid)?;
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))
        .map_err(runtime)?;
    let path = config.output_dir.join(CORPUS_FILE);
    write_corpus(&path, &corpus).map_err(runtime)?;
    let report = analyzer::analyze(&corpus, &pack.database, &AnalysisConfig::default()).map_err(runtime)?;
    println!(
        "success_rate={:.3} inform_f1={:.3} avg_turns={:.2} episodes={} corpus={}",
        report.overall.success_rate,
        report.overall.inform_f1,
        report.overall.avg_turns,
        corpus.len(),
        path.display()
    );
    Ok(())
}

fn load_pack(path: Option<&Path>) -> Result<Arc<DomainPack>, Failure> {
    match path {
        Some(dir) => DomainPack::load(dir)
            .map(Arc::new)
            .with_context(|| format!("pack {}", dir.display()))
            .map_err(invalid),
        None => Ok(DomainPack::bundled().shared()),
    }
}

fn load_corpus(path: &Path) -> Result<Vec<DialogueLog>, Failure> {
    read_corpus(path).map_err(|e| match e {
        dialogue_forge::session::CorpusError::Io { .. } => runtime(e),
        _ => invalid(e),
    })
}

fn write_outputs(out: &Path, stem: &str, json: &impl serde::Serialize, html: &str) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(runtime)?;
    let mut text = serde_json::to_string_pretty(json).map_err(runtime)?;
    text.push('\n');
    for (ext, body) in [("json", text.as_str()), ("html", html)] {
        let path = out.join(format!("{stem}.{ext}"));
        fs::write(&path, body)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn analysis(corpus_path: &Path, pack: &DomainPack, loop_window: usize) -> Result<AnalysisReport, Failure> {
    if loop_window == 0 {
        return Err(invalid(anyhow::anyhow!("--loop-window must be at least 1")));
    }
    let corpus = load_corpus(corpus_path)?;
    analyzer::analyze(&corpus, &pack.database, &AnalysisConfig { loop_window })
        .with_context(|| format!("analyzing {}", corpus_path.display()))
        .map_err(invalid)
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let pack = load_pack(args.pack.as_deref())?;
    let report = analysis(&args.corpus, &pack, args.loop_window)?;
    write_outputs(&args.out, "report", &report, &analyzer::render_report(&report))
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let pack = load_pack(args.pack.as_deref())?;
    let labels = if args.labels.is_empty() {
        args.corpora.iter().map(|p| p.display().to_string()).collect()
    } else {
        args.labels.clone()
    };
    let reports = args
        .corpora
        .iter()
        .map(|p| analysis(p, &pack, args.loop_window))
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = analyzer::compare(&reports, &labels).map_err(invalid)?;
    write_outputs(&args.out, "comparison", &comparison, &analyzer::render_comparison(&comparison))
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let registry = match &args.registry {
        Some(path) => Registry::load(path)
            .with_context(|| format!("registry {}", path.display()))
            .map_err(invalid)?,
        None => Registry::builtin(),
    };
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad address {}:{}", args.host, args.port))
        .map_err(invalid)?;
    let runtime_ = tokio::runtime::Runtime::new().map_err(runtime)?;
    runtime_.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))
            .map_err(runtime)?;
        let local = listener.local_addr().map_err(runtime)?;
        println!("listening on http://{local}");
        let app = router(AppState::new(registry), args.ui_dir);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}
