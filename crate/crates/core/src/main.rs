use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_sparql::executor::{execute, ExecutionConfig};
use hybrid_sparql::experiment::answer_facts;
use hybrid_sparql::gateway::{
    load_replay, CrowdGateway, HttpGateway, NullGateway, ReplayGateway, SimCrowdConfig, SimGateway,
    DEFAULT_HTTP_TIMEOUT,
};
use hybrid_sparql::kb::{parse_field_term, CrowdKb, KbSelection};
use hybrid_sparql::metrics::{score, GoldStandard};
use hybrid_sparql::microtask::{AggregationPolicy, FamiliarityScale};
use hybrid_sparql::quality::{AggregationFn, QualityModel};
use hybrid_sparql::report::{profile_jsonl, profile_tsv, Format, RunReport};
use hybrid_sparql::{parse_ntriples, parse_query, Dataset, Term};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

/// Exit status when the crowd did not answer in time.
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hybrid-sparql",
    version,
    about = "Hybrid human/machine SPARQL engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print completeness figures for (subject, predicate) pairs.
    Profile {
        data: PathBuf,
        /// Only instances of this class.
        #[arg(long)]
        class: Option<String>,
        /// Only this predicate.
        #[arg(long)]
        predicate: Option<String>,
        #[arg(long, default_value = "median")]
        agg: AggregationFn,
        /// Crowd knowledge used for the comp_kb_plus column.
        #[arg(long)]
        kb_in: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Run a query, crowdsourcing likely-missing values.
    Run {
        data: PathBuf,
        query: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long, value_enum, default_value_t = CrowdMode::Off)]
        crowd: CrowdMode,
        /// Address for `--crowd http`.
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Run a query and serve its questions to workers over HTTP.
    Serve {
        data: PathBuf,
        query: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CrowdMode {
    Off,
    Sim,
    Replay,
    Http,
}

#[derive(Args)]
struct RunOpts {
    #[arg(long, default_value_t = 0.02)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value = "median")]
    agg: AggregationFn,
    /// Knowledge-base sets counted by the completeness gate.
    #[arg(long, default_value = "plus")]
    gate_sets: KbSelection,
    /// Judgments required per question.
    #[arg(long, default_value_t = 3)]
    judgments: usize,
    #[arg(long, default_value_t = 4)]
    questions_per_task: usize,
    /// How raw familiarity scores are normalized: affine ((raw-1)/6) or ratio (raw/7).
    #[arg(long, default_value = "affine")]
    familiarity_scale: FamiliarityScale,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds to wait for the crowd (default: 600 over HTTP, unbounded otherwise).
    #[arg(long)]
    timeout: Option<f64>,
    /// Gold standard for precision/recall of crowd answers.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    kb_in: Option<PathBuf>,
    #[arg(long)]
    kb_out: Option<PathBuf>,
    /// Graph the simulated crowd answers from (default: the data file).
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Recorded answers for `--crowd replay`.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    error_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    not_sure_rate: f64,
    #[arg(long, default_value = "text")]
    format: Format,
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_ntriples(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_kb(path: Option<&Path>) -> Result<CrowdKb> {
    match path {
        Some(p) => CrowdKb::load_from_path(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(CrowdKb::new()),
    }
}

fn parse_iri(text: &str) -> Result<Term> {
    parse_field_term(text).map_err(|e| anyhow::anyhow!("{e}"))
}

fn profile(
    data: &Path,
    class: Option<&str>,
    predicate: Option<&str>,
    agg: AggregationFn,
    kb_in: Option<&Path>,
    format: Format,
) -> Result<()> {
    let d = load_dataset(data)?;
    let kb = load_kb(kb_in)?;
    let class = class.map(parse_iri).transpose()?;
    let predicate = predicate.map(parse_iri).transpose()?;
    let model = QualityModel::new(&d, agg);
    let rows = model.profile(&kb, class.as_ref(), predicate.as_ref());
    let class_am = match (&class, &predicate) {
        (Some(c), Some(p)) => Some((c, p, model.aggregated_multiplicity(c, p))),
        _ => None,
    };
    match format {
        Format::Text => {
            if let Some((c, p, am)) = class_am {
                println!("# aggregated multiplicity ({agg}) of {c} over {p}: {am}");
            }
            print!("{}", profile_tsv(&rows));
        }
        Format::Jsonl => {
            if let Some((c, p, am)) = class_am {
                let line = serde_json::json!({
                    "class": c.to_string(),
                    "predicate": p.to_string(),
                    "aggregation": agg.to_string(),
                    "am": am,
                });
                println!("{line}");
            }
            print!("{}", profile_jsonl(&rows));
        }
    }
    Ok(())
}

fn run(
    data: &Path,
    query: &Path,
    opts: &RunOpts,
    crowd: CrowdMode,
    bind: &str,
) -> Result<ExitCode> {
    let d = load_dataset(data)?;
    let text =
        std::fs::read_to_string(query).with_context(|| format!("reading {}", query.display()))?;
    let q = parse_query(&text).with_context(|| format!("parsing {}", query.display()))?;
    let mut kb = load_kb(opts.kb_in.as_deref())?;
    let gold = opts
        .gold
        .as_ref()
        .map(|p| GoldStandard::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    if opts.judgments == 0 {
        bail!("--judgments must be at least 1");
    }
    let policy = AggregationPolicy {
        quota: opts.judgments,
        familiarity: opts.familiarity_scale,
    };
    let timeout = match opts.timeout {
        Some(secs) if secs.is_finite() && secs >= 0.0 => Some(Duration::from_secs_f64(secs)),
        Some(secs) => bail!("invalid --timeout {secs}"),
        None if crowd == CrowdMode::Http => Some(DEFAULT_HTTP_TIMEOUT),
        None => None,
    };
    let cfg = ExecutionConfig {
        tau: opts.tau,
        alpha: opts.alpha,
        aggregation: opts.agg,
        kb_sets_for_gate: opts.gate_sets,
        crowd_enabled: crowd != CrowdMode::Off,
        questions_per_task: opts.questions_per_task,
        timeout,
    };

    let mut gateway: Box<dyn CrowdGateway> = match crowd {
        CrowdMode::Off => Box::new(NullGateway::new()),
        CrowdMode::Sim => {
            let oracle = match &opts.oracle {
                Some(p) => load_dataset(p)?,
                None => d.clone(),
            };
            let mut sim = SimCrowdConfig::new(Arc::new(oracle), opts.seed);
            sim.error_rate = opts.error_rate;
            sim.not_sure_rate = opts.not_sure_rate;
            sim.judgments_per_question = opts.judgments;
            sim.validate().map_err(anyhow::Error::msg)?;
            Box::new(SimGateway::new(sim, policy))
        }
        CrowdMode::Replay => {
            let Some(path) = &opts.replay else {
                bail!("--crowd replay needs --replay FILE");
            };
            let records =
                load_replay(path).with_context(|| format!("loading {}", path.display()))?;
            Box::new(ReplayGateway::new(records, opts.judgments))
        }
        CrowdMode::Http => {
            let gw = HttpGateway::bind(bind, policy).with_context(|| format!("binding {bind}"))?;
            eprintln!("serving tasks on http://{}", gw.local_addr());
            Box::new(gw)
        }
    };

    let exec = execute(&q, &d, &mut kb, &cfg, gateway.as_mut())?;
    drop(gateway);
    let metrics = gold
        .as_ref()
        .map(|g| score(&answer_facts(&exec.answers), g));
    print!("{}", RunReport::new(&exec, metrics).render(opts.format));
    if let Some(path) = &opts.kb_out {
        kb.save_to_path(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if exec.timed_out {
        eprintln!(
            "timed out with {} question(s) unanswered",
            exec.unanswered.len()
        );
        return Ok(ExitCode::from(EXIT_TIMEOUT));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Profile {
            data,
            class,
            predicate,
            agg,
            kb_in,
            format,
        } => profile(
            data,
            class.as_deref(),
            predicate.as_deref(),
            *agg,
            kb_in.as_deref(),
            *format,
        )
        .map(|()| ExitCode::SUCCESS),
        Command::Run {
            data,
            query,
            opts,
            crowd,
            bind,
        } => run(data, query, opts, *crowd, bind),
        Command::Serve {
            data,
            query,
            opts,
            bind,
        } => run(data, query, opts, CrowdMode::Http, bind),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
