use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use dermacen_core::evaluation::{run_evaluation, EvalError, ScoringConfig, Weights};
use dermacen_core::features::assess_lesion;
use dermacen_core::imaging::RasterImage;
use dermacen_core::orchestrator::{MockProvider, ProviderSet, RetryPolicy};
use dermacen_core::segmentation::GrabCutParams;
use dermacen_core::service::{serve, ServiceConfig};

#[derive(Parser)]
#[command(name = "engine", version, about = "Dermatology image workflow engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a corpus and write the capability report as JSON.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Service config supplying providers, weights and scoring options.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mock fixture directory; defaults to `<corpus>/mock`.
        #[arg(long, conflicts_with = "config")]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        w_context: Option<f64>,
        #[arg(long)]
        w_entities: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Segment one image and print its features and technical report.
    Features {
        #[arg(long)]
        image: PathBuf,
        /// Also write the plot PNGs here.
        #[arg(long)]
        plots: Option<PathBuf>,
        /// Print JSON instead of the report text.
        #[arg(long)]
        json: bool,
    },
}

type CliResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Serve { config } => run_serve(&config),
        Command::Eval { corpus, reviews, out, config, fixtures, w_context, w_entities, workers } => {
            run_eval(&corpus, &reviews, &out, config.as_deref(), fixtures, (w_context, w_entities), workers)
        }
        Command::Features { image, plots, json } => run_features(&image, plots.as_deref(), json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_serve(path: &Path) -> CliResult {
    let config = ServiceConfig::load(path)?;
    tokio::runtime::Runtime::new()?.block_on(serve(config))
}

fn run_eval(
    corpus: &Path,
    reviews: &Path,
    out: &Path,
    config: Option<&Path>,
    fixtures: Option<PathBuf>,
    (w_context, w_entities): (Option<f64>, Option<f64>),
    workers: Option<usize>,
) -> CliResult {
    let (providers, mut weights, mut scoring) = match config {
        Some(path) => {
            let c = ServiceConfig::load(path)?;
            (c.build_providers()?, c.weights, c.scoring)
        }
        None => {
            let dir = fixtures.unwrap_or_else(|| corpus.join("mock"));
            let mock = MockProvider::from_dir(&dir)?;
            (ProviderSet::from_mock(Arc::new(mock), RetryPolicy::default()), Weights::default(), ScoringConfig::default())
        }
    };
    weights.w_context = w_context.unwrap_or(weights.w_context);
    weights.w_entities = w_entities.unwrap_or(weights.w_entities);
    scoring.workers = workers.unwrap_or(scoring.workers);

    let progress = |done: usize, total: usize| {
        if done == total || done % 10 == 0 {
            eprintln!("scored {done}/{total}");
        }
    };
    let outcome = run_evaluation(corpus, reviews, &providers, &weights, &scoring, &progress).map_err(|e| match e {
        EvalError::Corpus(issues) => {
            let lines: Vec<_> = issues.iter().map(|i| format!("  {}: {}", i.file, i.message)).collect();
            format!("corpus has {} problem(s):\n{}", issues.len(), lines.join("\n")).into()
        }
        other => Box::<dyn std::error::Error + Send + Sync>::from(other.to_string()),
    })?;
    for e in &outcome.review_errors {
        eprintln!("reviews line {}: {}", e.line, e.message);
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, serde_json::to_vec_pretty(&outcome)?)?;
    print!("{}", outcome.table);
    Ok(())
}

fn run_features(path: &Path, plots: Option<&Path>, json: bool) -> CliResult {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let image = RasterImage::decode(&bytes)?;
    let assessment = assess_lesion(&image, &GrabCutParams::default())?;
    let report = &assessment.report;
    if let Some(dir) = plots {
        std::fs::create_dir_all(dir)?;
        for plot in &report.plots {
            std::fs::write(dir.join(&plot.name), &plot.bytes)?;
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(report)?);
    } else {
        println!("{}", report.text);
    }
    Ok(())
}
