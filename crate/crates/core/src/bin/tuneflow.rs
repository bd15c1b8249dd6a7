use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tuneflow::augment::ImageBuffer;
use tuneflow::ensemble::{
    ensemble_accuracy, ensemble_size_curve, read_labels, read_predictions, write_curve_csv, write_labels,
    write_predictions,
};
use tuneflow::executor::worker::{serve, serve_tcp, WorkerOptions};
use tuneflow::executor::{ExternalExecutor, Transport};
use tuneflow::hyperspace::TrialConfig;
use tuneflow::orchestrator::{
    final_train, parse_steps, read_log, render_report, replay, run_ablation, run_campaign, AblationStep,
    CampaignConfig, EventLog, ExecutorKind, FinalSettings,
};
use tuneflow::seed::{stream_rng, Stream};
use tuneflow::tta::{aggregate_predictions, materialize_view, plan_views, PredictionVector};

#[derive(Parser)]
#[command(name = "tuneflow", version, about = "Hyperparameter search and ensembling for image classifiers")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Campaign config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Output directory for logs and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hyperparameter search.
    Tune,
    /// Train the ensemble members with the best configuration.
    Train {
        /// Best configuration as JSON; defaults to <out>/best.json, then the event log.
        #[arg(long)]
        best: Option<PathBuf>,
    },
    /// Score images with 30-view TTA through a worker.
    Predict {
        #[arg(long, num_args = 1.., required = true)]
        images: Vec<PathBuf>,
        /// Scoring worker address, `host:port`.
        #[arg(long, conflicts_with = "scorer_cmd")]
        scorer: Option<String>,
        /// Scoring worker command line, run once per image.
        #[arg(long)]
        scorer_cmd: Option<String>,
    },
    /// Accuracy against ensemble size.
    EnsembleEval {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Comma-separated sizes or a range like `1-20`; defaults to every size.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
    /// Evaluate pipeline additions cumulatively.
    Ablation {
        /// Comma-separated steps; all five in order when omitted.
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        best: Option<PathBuf>,
    },
    /// Summarize an event log.
    Report {
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Serve the synthetic worker protocol on stdin/stdout or a TCP port.
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long, value_delimiter = ',')]
        fail_trials: Vec<u32>,
        #[arg(long, default_value_t = 0)]
        epoch_delay_ms: u64,
    },
}

fn load_config(g: &Global) -> Result<CampaignConfig> {
    let mut config = match &g.config {
        Some(path) => CampaignConfig::load(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    if let Some(p) = g.parallelism {
        config.parallelism = p;
    }
    if let Some(out) = &g.out {
        config.paths.out_dir = out.clone();
        config.paths.event_log = None;
    }
    config.validate()?;
    Ok(config)
}

fn out_file(config: &CampaignConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&config.paths.out_dir)
        .with_context(|| format!("creating {}", config.paths.out_dir.display()))?;
    Ok(config.paths.out_dir.join(name))
}

fn load_best(config: &CampaignConfig, explicit: Option<&Path>) -> Result<Option<TrialConfig>> {
    let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| config.paths.out_dir.join("best.json"));
    if path.exists() {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?));
    }
    if explicit.is_some() {
        bail!("{} not found", path.display());
    }
    let log = config.event_log_path();
    if log.exists() {
        return Ok(replay(&read_log(&log)?)?.best_config());
    }
    Ok(None)
}

fn tune(config: &CampaignConfig) -> Result<()> {
    let executor = config.build_executor()?;
    let mut log = EventLog::create(config.event_log_path())?;
    let out = run_campaign(&config.settings(), executor.as_ref(), &mut log)?;
    let best_path = out_file(config, "best.json")?;
    fs::write(&best_path, serde_json::to_string_pretty(&out.best_config)?)?;
    println!(
        "best trial {} metric {:.4} at epoch {} ({} epochs trained)",
        out.best.trial_id, out.best.metric, out.best.resource, out.epochs_used
    );
    println!("{}", serde_json::to_string(&out.best_config)?);
    println!("event log: {}", config.event_log_path().display());
    Ok(())
}

fn train(config: &CampaignConfig, best: Option<&Path>) -> Result<()> {
    let best = load_best(config, best)?.context("no best configuration; run `tune` first or pass --best")?;
    let executor = config.build_executor()?;
    let outcome = final_train(&best, &FinalSettings::from(config), executor.as_ref())?;
    for m in &outcome.members {
        println!("member {:>2} seed {:>20} epochs {:>4} metric {:.4}", m.index, m.seed, m.epochs, m.final_metric);
    }
    for (k, e) in &outcome.failures {
        eprintln!("member {k} failed: {e}");
    }
    let preds = outcome.predictions();
    if !preds.is_empty() {
        let path = out_file(config, "predictions.jsonl")?;
        write_predictions(BufWriter::new(File::create(&path)?), &preds)?;
        println!("predictions: {}", path.display());
    }
    if config.executor.kind == ExecutorKind::Logistic {
        let labels = config.blob_data().test_labels();
        write_labels(BufWriter::new(File::create(out_file(config, "labels.jsonl")?)?), &labels)?;
        println!("ensemble of {} test accuracy {:.4}", preds.len(), ensemble_accuracy(&preds, &labels)?);
    }
    Ok(())
}

fn scorer_transport(config: &CampaignConfig, scorer: Option<String>, scorer_cmd: Option<String>) -> Result<Transport> {
    if let Some(address) = scorer {
        return Ok(Transport::Tcp { address });
    }
    if let Some(cmd) = scorer_cmd {
        let mut parts = cmd.split_whitespace().map(String::from);
        let program = parts.next().context("empty --scorer-cmd")?;
        return Ok(Transport::Command { program: program.into(), args: parts.collect() });
    }
    config.executor.transport.clone().context("pass --scorer or --scorer-cmd, or configure [executor.transport]")
}

fn predict(config: &CampaignConfig, images: &[PathBuf], transport: Transport) -> Result<()> {
    let scorer = ExternalExecutor::new(transport).with_epoch_timeout(Duration::from_secs(config.executor.epoch_timeout_secs));
    let mut results = BufWriter::new(File::create(out_file(config, "tta_predictions.jsonl")?)?);
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    for (request_id, path) in images.iter().enumerate() {
        let image = ImageBuffer::open(path).with_context(|| format!("reading {}", path.display()))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| request_id.to_string());
        let dir = out_file(config, "views")?.join(format!("{request_id:04}-{stem}"));
        fs::create_dir_all(&dir)?;
        let mut paths = Vec::new();
        for (i, spec) in plan_views(image.height(), image.width()).iter().enumerate() {
            let view_path = dir.join(format!("view-{i:02}.png"));
            materialize_view(&image, spec)?.save_png(&view_path)?;
            paths.push(view_path.to_string_lossy().into_owned());
        }
        let logits = scorer.score(request_id as u64, paths)?;
        let views: Vec<PredictionVector> = logits.into_iter().map(PredictionVector::logits).collect();
        let probs = aggregate_predictions(&views)?;
        let line = serde_json::json!({ "path": path, "probs": probs.values });
        writeln!(stdout, "{line}")?;
        writeln!(results, "{line}")?;
    }
    Ok(())
}

fn parse_sizes(spec: Option<&str>, models: usize) -> Result<Vec<usize>> {
    let Some(spec) = spec else { return Ok((1..=models).collect()) };
    if let Some((a, b)) = spec.split_once('-') {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse::<usize>().map_err(Into::into)).collect()
}

fn ensemble_eval(
    config: &CampaignConfig,
    predictions: Option<PathBuf>,
    labels: Option<PathBuf>,
    sizes: Option<&str>,
    repeats: usize,
) -> Result<()> {
    let pred_path = predictions.unwrap_or_else(|| config.paths.out_dir.join("predictions.jsonl"));
    let label_path = labels.unwrap_or_else(|| config.paths.out_dir.join("labels.jsonl"));
    let models = read_predictions(BufReader::new(File::open(&pred_path).with_context(|| format!("{}", pred_path.display()))?))?;
    let labels = read_labels(BufReader::new(File::open(&label_path).with_context(|| format!("{}", label_path.display()))?))?;
    let sizes = parse_sizes(sizes, models.len())?;
    let mut rng = stream_rng(config.seed, Stream::EnsembleMember, u64::MAX);
    let curve = ensemble_size_curve(&models, &labels, &sizes, repeats, &mut rng)?;
    let path = out_file(config, "curve.csv")?;
    write_curve_csv(BufWriter::new(File::create(&path)?), &curve)?;
    write_curve_csv(io::stdout().lock(), &curve)?;
    eprintln!("curve: {}", path.display());
    Ok(())
}

fn ablation(config: &CampaignConfig, steps: Option<&str>, best: Option<&Path>) -> Result<()> {
    let steps = match steps {
        Some(s) => parse_steps(s)?,
        None => AblationStep::ALL.to_vec(),
    };
    let trial = load_best(config, best)?.unwrap_or(TrialConfig::TUNED);
    let rows = run_ablation(config, &trial, &steps)?;
    let mut csv = String::from("step,metric\n");
    for r in &rows {
        println!("{:<16} {:.4}", r.step, r.metric);
        csv.push_str(&format!("{},{}\n", r.step, r.metric));
    }
    fs::write(out_file(config, "ablation.csv")?, csv)?;
    Ok(())
}

fn report(config: &CampaignConfig, log: Option<PathBuf>, curve: Option<PathBuf>) -> Result<()> {
    let log = log.unwrap_or_else(|| config.event_log_path());
    let events = if log.exists() { read_log(&log)? } else { Vec::new() };
    let curve = curve.or_else(|| Some(config.paths.out_dir.join("curve.csv")).filter(|p| p.exists()));
    let csv = curve.map(fs::read_to_string).transpose()?;
    print!("{}", render_report(&events, csv.as_deref())?);
    Ok(())
}

fn worker(listen: Option<String>, fail_trials: Vec<u32>, delay_ms: u64) -> Result<()> {
    let opts = WorkerOptions { fail_trials: fail_trials.into_iter().collect(), epoch_delay: Duration::from_millis(delay_ms) };
    match listen {
        Some(addr) => {
            let listener = TcpListener::bind(&addr)?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(listener, opts)?;
        }
        None => serve(io::stdin().lock(), io::stdout().lock(), &opts)?,
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Command::Worker { listen, fail_trials, epoch_delay_ms } = cli.command {
        return worker(listen, fail_trials, epoch_delay_ms);
    }
    let config = load_config(&cli.global)?;
    match cli.command {
        Command::Tune => tune(&config),
        Command::Train { best } => train(&config, best.as_deref()),
        Command::Predict { images, scorer, scorer_cmd } => {
            let transport = scorer_transport(&config, scorer, scorer_cmd)?;
            predict(&config, &images, transport)
        }
        Command::EnsembleEval { predictions, labels, sizes, repeats } => {
            ensemble_eval(&config, predictions, labels, sizes.as_deref(), repeats)
        }
        Command::Ablation { steps, best } => ablation(&config, steps.as_deref(), best.as_deref()),
        Command::Report { log, curve } => report(&config, log, curve),
        Command::Worker { .. } => unreachable!(),
    }
}
