//! `weave` command-line pipeline:
//! ingest → align → stats → bitext → filter → sample → instruct → metrics.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod config;

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use weave::align::{self, AlignPolicy};
use weave::ingest::{self, DomainIndex, IngestOptions, ParseMode, TalkSet};
use weave::instruct::{self, MixSpec};
use weave::metrics::{self, embx, Measure, SvccaOptions};
use weave::quality::{self, QualityPolicy};
use weave::sampler::{self, LanguagePreset, PrecountedTokens, SampleContext, SampleSpec};
use weave::stats::StatsReport;

use crate::config::Config;

#[derive(Debug, Parser)]
#[command(name = "weave", version, about = "Multi-way parallel corpus pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set sample.degree=6`. Repeatable; later wins.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for every sampling step (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `paths.out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap (overrides `jobs`).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate transcripts and write them back normalised.
    Ingest,
    /// Align transcripts into multi-way tuples.
    Align,
    /// Parallelism, tuple-size and domain statistics.
    Stats,
    /// Extract (and cap) bitext for `quality.pair`.
    Bitext,
    /// Join quality scores and keep pairs above `quality.threshold`.
    Filter,
    /// Draw a token-budgeted pretraining dataset (or a size sweep).
    Sample,
    /// Generate instruction-tuning examples.
    Instruct,
    /// Cross-lingual alignment metrics over EMBX embedding files.
    Metrics,
}

/// Failure split by exit code.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<weave::Error>() {
            Some(w) if !w.is_data_error() => Failure::Usage(e),
            _ => Failure::Data(e),
        }
    }
}

impl From<weave::Error> for Failure {
    fn from(e: weave::Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

fn usage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

struct Outputs {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir,
            inputs: Vec::new(),
        })
    }

    fn input(&mut self, path: &Path) {
        if let Ok(p) = path.canonicalize() {
            self.inputs.push(p);
        }
    }

    fn write_at(&self, path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> weave::Result<()>) -> Result<()> {
        if let Ok(p) = path.canonicalize() {
            if self.inputs.contains(&p) {
                return Err(
                    weave::Error::Config(format!("refusing to overwrite input file {}", path.display())).into(),
                );
            }
        }
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        body(&mut w)?;
        w.flush()?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> weave::Result<()>) -> Result<()> {
        self.write_at(&self.dir.join(name), body)
    }
}

fn load_talks(cfg: &Config, out: &mut Outputs) -> Result<TalkSet> {
    let path = cfg.transcripts()?;
    out.input(path);
    let opts = IngestOptions {
        mode: if cfg.ingest.strict {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        },
        overlap_slack_ms: cfg.ingest.overlap_slack_ms,
    };
    let parsed = ingest::parse_transcripts(open(path)?, &opts)?;
    if !parsed.rejected.is_empty() {
        log::warn!("{} transcript records rejected", parsed.rejected.len());
    }
    Ok(parsed.talks)
}

fn load_domains(cfg: &Config, out: &mut Outputs) -> Result<Option<DomainIndex>> {
    match cfg.paths.transcripts {
        Some(_) => Ok(Some(load_talks(cfg, out)?.domain_index())),
        None => Ok(None),
    }
}

fn load_corpus(cfg: &Config, out: &mut Outputs) -> Result<Vec<weave::AlignedTuple>> {
    let path = cfg.aligned();
    out.input(&path);
    let corpus = align::read_corpus(open(&path)?).with_context(|| format!("reading {}", path.display()))?;
    Ok(corpus)
}

fn cmd_ingest(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let path = cfg.transcripts()?.to_path_buf();
    out.input(&path);
    let opts = IngestOptions {
        mode: if cfg.ingest.strict {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        },
        overlap_slack_ms: cfg.ingest.overlap_slack_ms,
    };
    let parsed = ingest::parse_transcripts(open(&path)?, &opts)?;
    out.write("transcripts.jsonl", |w| parsed.talks.write_jsonl(w))?;
    out.write("ingest_report.jsonl", |w| {
        for r in &parsed.rejected {
            serde_json::to_writer(&mut *w, &serde_json::json!({"line": r.line, "reason": r.reason}))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    eprintln!(
        "ingest: {} talks, {} languages, {} rejected",
        parsed.talks.len(),
        parsed.talks.languages().len(),
        parsed.rejected.len()
    );
    Ok(())
}

fn cmd_align(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let talks = load_talks(cfg, out)?;
    let policy = AlignPolicy {
        iou_threshold: cfg.align.iou_threshold,
        exact_match_fast_path: cfg.align.exact_match_fast_path,
        min_degree: cfg.align.min_degree,
    };
    let corpus = align::align_talkset(&talks, &policy)?;
    out.write_at(&cfg.aligned(), |w| align::write_corpus(&corpus, w))?;
    eprintln!("align: {} tuples from {} talks", corpus.len(), talks.talk_ids().len());
    Ok(())
}

fn cmd_stats(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let corpus = load_corpus(cfg, out)?;
    let talks = match cfg.paths.transcripts {
        Some(_) => Some(load_talks(cfg, out)?),
        None => None,
    };
    let report = StatsReport::build(&corpus, talks.as_ref());
    out.write("stats.txt", |w| report.write_text(w))?;
    out.write("parallelism.csv", |w| report.write_parallelism_csv(w))?;
    out.write("domains.csv", |w| report.write_domain_csv(w))?;
    Ok(())
}

fn cmd_bitext(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let seed = cfg.seed()?;
    let (src, tgt) = cfg.pair()?;
    let corpus = load_corpus(cfg, out)?;
    let policy = QualityPolicy {
        sample_cap: cfg.quality.sample_cap,
        threshold: cfg.quality.threshold,
        seed,
    };
    let pairs = quality::extract_bitext(&corpus, (&src, &tgt), &policy)?;
    out.write(&format!("bitext.{src}-{tgt}.tsv"), |w| quality::write_tsv(&pairs, w))?;
    out.write(&format!("bitext.{src}-{tgt}.meta.jsonl"), |w| {
        quality::write_meta(&pairs, w)
    })?;
    eprintln!("bitext: {} {src}-{tgt} pairs", pairs.len());
    Ok(())
}

fn cmd_filter(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let (src, tgt) = cfg.pair()?;
    let meta = cfg
        .paths
        .bitext
        .clone()
        .unwrap_or_else(|| out.dir.join(format!("bitext.{src}-{tgt}.meta.jsonl")));
    let scores = cfg
        .paths
        .scores
        .clone()
        .ok_or_else(|| anyhow!("missing required field `paths.scores`"))?;
    out.input(&meta);
    out.input(&scores);

    let pairs = quality::read_meta(open(&meta)?)?;
    let join = quality::attach_scores(pairs, open(&scores)?)?;
    if !join.unscored.is_empty() || !join.unknown_keys.is_empty() {
        eprintln!(
            "filter: {} pairs without a score, {} score rows without a pair",
            join.unscored.len(),
            join.unknown_keys.len()
        );
    }
    let scored: Vec<_> = join.pairs.into_iter().filter(|p| p.score.is_some()).collect();
    let kept = quality::filter_by_threshold(&scored, cfg.quality.threshold)?;
    out.write(&format!("filtered.{src}-{tgt}.tsv"), |w| quality::write_tsv(&kept, w))?;
    out.write(&format!("filtered.{src}-{tgt}.meta.jsonl"), |w| {
        quality::write_meta(&kept, w)
    })?;
    eprintln!("filter: kept {} of {} scored pairs", kept.len(), scored.len());
    Ok(())
}

fn cmd_sample(cfg: &Config, out: &mut Outputs) -> std::result::Result<(), Failure> {
    let seed = usage(cfg.seed())?;
    let s = &cfg.sample;
    let mut language_set: Option<BTreeSet<String>> = s.language_set.as_ref().map(|l| l.iter().cloned().collect());
    if let Some(preset) = &cfg.paths.preset {
        let preset = LanguagePreset::load(preset).with_context(|| format!("loading preset {}", preset.display()))?;
        if language_set.is_some() {
            return Err(Failure::Usage(anyhow!(
                "set either `sample.language_set` or `paths.preset`, not both"
            )));
        }
        language_set = Some(preset.language_set());
    }
    let budgets: Vec<u64> = match (&s.budgets, s.token_budget) {
        (Some(b), _) => b.clone(),
        (None, Some(b)) => vec![b],
        (None, None) => return Err(Failure::Usage(anyhow!("missing required field `sample.token_budget`"))),
    };
    let spec = SampleSpec {
        token_budget: budgets.first().copied().unwrap_or(1),
        degree: s.degree,
        language_set,
        include_english: s.include_english,
        domains: s.domains.as_ref().map(|d| d.iter().cloned().collect()),
        seed,
        tokenizer: s.tokenizer.clone(),
        allow_repeat: s.allow_repeat,
    };
    let corpus = load_corpus(cfg, out)?;
    let domains = if spec.domains.is_some() {
        load_domains(cfg, out)?
    } else {
        None
    };
    let counts = match &cfg.paths.token_counts {
        Some(p) => {
            out.input(p);
            Some(PrecountedTokens::read_jsonl(open(p)?)?)
        }
        None => None,
    };
    let ctx = SampleContext {
        domains: domains.as_ref(),
        token_counts: counts.as_ref(),
    };

    if s.budgets.is_some() {
        let sets = sampler::size_sweep(&corpus, &budgets, &spec, &ctx)?;
        for ds in &sets {
            let b = ds.spec.token_budget;
            out.write(&format!("pretrain.{b}.txt"), |w| ds.write_text(w))?;
            out.write(&format!("pretrain.{b}.manifest.jsonl"), |w| ds.write_manifest(w))?;
            eprintln!(
                "sample: budget {b}: {} examples, {} tokens",
                ds.examples.len(),
                ds.total_tokens
            );
        }
    } else {
        let ds = sampler::sample_pretrain(&corpus, &spec, &ctx)?;
        out.write("pretrain.txt", |w| ds.write_text(w))?;
        out.write("pretrain.manifest.jsonl", |w| ds.write_manifest(w))?;
        eprintln!("sample: {} examples, {} tokens", ds.examples.len(), ds.total_tokens);
    }
    Ok(())
}

fn cmd_instruct(cfg: &Config, out: &mut Outputs) -> std::result::Result<(), Failure> {
    let seed = usage(cfg.seed())?;
    let spec = MixSpec {
        tasks: cfg.instruct.tasks.clone(),
        ratios: cfg.instruct.ratios.clone(),
        example_budget: cfg.instruct.example_budget,
        seed,
        options: cfg.instruct.options.clone(),
    };
    let corpus = load_corpus(cfg, out)?;
    let domains = load_domains(cfg, out)?;
    let examples = instruct::mix_tasks(&corpus, domains.as_ref(), &spec)?;
    out.write("instruct.jsonl", |w| instruct::write_jsonl(&examples, w))?;
    eprintln!("instruct: {} examples", examples.len());
    Ok(())
}

fn embedding_files(cfg: &Config) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in &cfg.paths.embeddings {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "embx"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("missing required field `paths.embeddings`");
    }
    Ok(files)
}

fn cmd_metrics(cfg: &Config, out: &mut Outputs) -> std::result::Result<(), Failure> {
    let measures: Vec<Measure> = cfg
        .metrics
        .measures
        .iter()
        .map(|m| m.parse())
        .collect::<weave::Result<_>>()?;
    let files = usage(embedding_files(cfg))?;
    let mut mats = Vec::new();
    for f in &files {
        out.input(f);
        mats.push(embx::read_file(f)?);
    }
    let opts = SvccaOptions {
        variance_keep: cfg.metrics.variance_keep,
        ridge: cfg.metrics.ridge,
    };
    let report = metrics::pairwise_report(&mats, &measures, &opts)?;
    out.write("metrics.csv", |w| report.write_long_csv(w))?;
    for m in &report.measures {
        let name = m.name().replace('@', "");
        out.write(&format!("heatmap.{name}.csv"), |w| report.write_square_csv(*m, w))?;
    }
    eprintln!(
        "metrics: {} languages, {} pairs",
        report.languages.len(),
        report.pairs.len()
    );
    Ok(())
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let mut overrides = cli.common.overrides.clone();
    let cwd = std::env::current_dir().map_err(|e| Failure::Data(e.into()))?;
    if let Some(seed) = cli.common.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(jobs) = cli.common.jobs {
        overrides.push(format!("jobs={jobs}"));
    }
    if let Some(out) = &cli.common.out {
        let abs = cwd.join(out);
        overrides.push(format!(
            "paths.out_dir={}",
            serde_json::to_string(&abs).map_err(|e| Failure::Usage(e.into()))?
        ));
    }
    let cfg = usage(Config::load(cli.common.config.as_deref(), &overrides))?;

    if let Some(jobs) = cfg.jobs {
        usage(
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build_global()
                .map_err(Into::into),
        )?;
    }

    let mut out = Outputs::new(cfg.out_dir()).map_err(Failure::Data)?;
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg, &mut out)?,
        Command::Align => cmd_align(&cfg, &mut out)?,
        Command::Stats => cmd_stats(&cfg, &mut out)?,
        Command::Bitext => {
            usage(cfg.seed())?;
            usage(cfg.pair())?;
            cmd_bitext(&cfg, &mut out)?
        }
        Command::Filter => {
            usage(cfg.pair())?;
            cmd_filter(&cfg, &mut out)?
        }
        Command::Sample => cmd_sample(&cfg, &mut out)?,
        Command::Instruct => cmd_instruct(&cfg, &mut out)?,
        Command::Metrics => cmd_metrics(&cfg, &mut out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WEAVE_LOG", "warn"))
        .format_timestamp(None)
        .init();

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
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
