use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use propmatch_core::corpus::SentenceRef;
use propmatch_core::filter::{FilterKind, PropositionQuery};
use propmatch_core::models::TrainConfig;
use propmatch_core::pipeline::{
    read_frame_annotations, read_frame_queries, read_ratings_csv, read_recall_fixture, write_ratings_csv, RatingRecord,
    RerankerKind,
};
use propmatch_core::tree_edit::SearchConfig;
use propmatch_service::config::Config;
use propmatch_service::ops::{self, App, MatchParams, MatchResponse, TrainRequest};
use propmatch_service::parser::ParserHook;
use propmatch_service::server::{self, AppState};
use propmatch_service::store::ProjectStore;

#[derive(Parser)]
#[command(name = "propmatch", version, about = "Find sentences that express a proposition")]
struct Cli {
    /// Configuration file [default: <store>/config.toml when present]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Project store directory [default: ./propmatch-store]
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Word-vector file to fall back on when none are registered
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Parse raw text with this command (sentences on stdin, CoNLL-U on stdout)
    #[arg(long, global = true, conflicts_with = "parser_url")]
    parser_command: Option<String>,
    /// Parse raw text by POSTing it to this URL
    #[arg(long, global = true)]
    parser_url: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register a corpus from JSONL documents
    Ingest {
        #[arg(long)]
        docs: PathBuf,
        /// CoNLL-U parses with `# sent_id = docid:position`
        #[arg(long)]
        parses: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
    },
    /// Register a word-vector file
    Embed {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long, default_value = "default")]
        name: String,
    },
    /// Fit and store tf-idf statistics for a corpus
    FitTfidf {
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Train an entailment reranker on labeled sentence pairs
    Train(TrainArgs),
    /// Rank corpus sentences against a query
    Match {
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Quarterly counts of a query's top matches, as CSV
    Measure {
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Recall at n on a fixture of single-document instances
    EvalRecall {
        #[arg(long)]
        fixture: PathBuf,
        /// Comma-separated cut-offs
        #[arg(long, default_value = "1,2,5")]
        n: String,
        #[command(flatten)]
        pipeline: RankArgs,
    },
    /// Frame precision at n over a registered corpus
    EvalPrecision {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value = "1,5,10")]
        n: String,
        #[command(flatten)]
        pipeline: RankArgs,
    },
    /// Record, list and score human ratings
    #[command(subcommand)]
    Ratings(RatingsCommand),
    /// Run the HTTP service
    Serve {
        #[arg(long)]
        bind: Option<String>,
        /// Refuse reranked results when parses are missing
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = true)]
struct QueryArgs {
    /// Query text; with --query-id it is also registered under that id
    #[arg(long)]
    query: Option<String>,
    /// Registered query id
    #[arg(long)]
    query_id: Option<String>,
}

#[derive(Args)]
struct RankArgs {
    /// Corpus id [default: latest registered]
    #[arg(long)]
    corpus: Option<String>,
    /// Fast-filter width
    #[arg(long)]
    k: Option<usize>,
    /// averaging | tfidf
    #[arg(long)]
    filter: Option<FilterKind>,
    /// none | lr | lstm
    #[arg(long)]
    rerank: Option<RerankerKind>,
    /// Reranker model name [default: latest of the requested kind]
    #[arg(long)]
    model: Option<String>,
    /// Registered word vectors [default: latest]
    #[arg(long)]
    vectors: Option<String>,
}

impl RankArgs {
    fn params(&self) -> MatchParams {
        MatchParams {
            corpus: self.corpus.clone(),
            k: self.k,
            n: None,
            filter: self.filter,
            rerank: self.rerank,
            model: self.model.clone(),
            embeddings: self.vectors.clone(),
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    rank: RankArgs,
    /// Number of results
    #[arg(long)]
    n: Option<usize>,
    /// Fail instead of falling back to fast scores for unparsed sentences
    #[arg(long)]
    strict: bool,
}

impl PipelineArgs {
    fn params(&self) -> MatchParams {
        MatchParams {
            n: self.n,
            ..self.rank.params()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    kind: RerankerKind,
    #[arg(long)]
    name: String,
    /// SNLI-style JSONL
    #[arg(long)]
    pairs: PathBuf,
    /// CoNLL-U with `# sent_id = pairID:premise` / `pairID:hypothesis`
    #[arg(long)]
    parses: PathBuf,
    #[arg(long)]
    vectors: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beam_width: Option<usize>,
}

#[derive(Subcommand)]
enum RatingsCommand {
    Add {
        #[arg(long)]
        rater: String,
        #[arg(long)]
        query: String,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        position: usize,
        #[arg(long)]
        score: u8,
    },
    /// Append ratings from a `rater,query,doc,position,score` CSV
    Import { file: PathBuf },
    /// Write all ratings as CSV
    Export { file: Option<PathBuf> },
    /// Krippendorff's alpha (interval metric)
    Alpha {
        #[arg(long)]
        query: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let default_store = cli.store.clone().unwrap_or_else(|| PathBuf::from("propmatch-store"));
    let mut config = match &cli.config {
        Some(path) => Config::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let path = default_store.join("config.toml");
            if path.exists() {
                Config::load(&path).with_context(|| format!("reading {}", path.display()))?
            } else {
                Config::default()
            }
        }
    };
    if cli.store.is_some() || config.store.is_none() {
        config.store = Some(default_store);
    }
    if let Some(e) = &cli.embeddings {
        config.embeddings = Some(e.clone());
    }
    if let Some(c) = &cli.parser_command {
        config.parser = ParserHook::command(c.clone());
    }
    if let Some(u) = &cli.parser_url {
        config.parser = ParserHook::http(u.clone());
    }
    Ok(config)
}

fn resolve_query(app: &App, q: &QueryArgs) -> anyhow::Result<PropositionQuery> {
    Ok(match (&q.query, &q.query_id) {
        (Some(text), Some(id)) => app.register_query(Some(id.clone()), text.clone())?,
        (Some(text), None) => app.make_query(Some("query".into()), text.clone())?,
        (None, Some(id)) => app.store.query(id)?,
        (None, None) => unreachable!("clap requires one of them"),
    })
}

fn fmt_score(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn print_table(resp: &MatchResponse, out: &mut impl Write) -> io::Result<()> {
    writeln!(
        out,
        "{:>4}  {:>7}  {:>7}  {:<20}  {:<10}  sentence",
        "rank", "fast", "rerank", "doc", "date"
    )?;
    let pad = " ".repeat(4 + 2 + 7 + 2 + 7 + 2 + 20 + 2 + 10 + 2);
    for m in &resp.matches {
        if let Some(b) = &m.before {
            writeln!(out, "{pad}  {b}")?;
        }
        let flag = if m.unparsed { "*" } else { " " };
        writeln!(
            out,
            "{:>4}  {:>7}  {:>7}{flag} {:<20}  {:<10}  {}",
            m.rank,
            fmt_score(Some(m.fast_score)),
            fmt_score(m.rerank_score),
            format!("{}:{}", m.doc, m.position),
            m.date.map_or_else(|| "-".into(), |d| d.to_string()),
            m.sentence
        )?;
        if let Some(a) = &m.after {
            writeln!(out, "{pad}  {a}")?;
        }
    }
    if resp.matches.iter().any(|m| m.unparsed) {
        writeln!(out, "* no parse; ranked by fast score")?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    let store_path = config.store.clone().expect("set above");
    let store = ProjectStore::open(&store_path).with_context(|| format!("opening store {}", store_path.display()))?;
    let app = App::new(store, config);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Ingest { docs, parses, id } => {
            let records = ops::read_document_records(&docs)?;
            let parses = parses.map(|p| ops::parse_conllu_file(&p)).transpose()?;
            let e = app.ingest(id.as_deref(), records, parses)?;
            writeln!(
                out,
                "corpus {}: {} documents, {} sentences, {} parsed",
                e.id, e.documents, e.sentences, e.parsed
            )?;
        }
        Command::Embed { vectors, name } => {
            let e = app.store.add_embeddings(&name, &vectors)?;
            writeln!(out, "embeddings {}: {} words, dimension {}", e.name, e.words, e.dim)?;
        }
        Command::FitTfidf { corpus } => {
            let id = match corpus.or_else(|| app.store.latest_corpus()) {
                Some(id) => id,
                None => bail!("no corpus registered"),
            };
            let m = app.store.fit_tfidf(&id)?;
            writeln!(
                out,
                "tf-idf for {id}: {} sentences, {} words",
                m.n_sentences(),
                m.vocab_len()
            )?;
        }
        Command::Train(t) => {
            let d = TrainConfig::default();
            let req = TrainRequest {
                kind: t.kind,
                name: t.name,
                pairs: t.pairs,
                parses: t.parses,
                embeddings: t.vectors,
                train: TrainConfig {
                    epochs: t.epochs.unwrap_or(d.epochs),
                    learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
                    batch_size: t.batch_size.unwrap_or(d.batch_size),
                    hidden_dim: t.hidden.unwrap_or(d.hidden_dim),
                    l2: t.l2.unwrap_or(d.l2),
                    seed: t.seed.unwrap_or(d.seed),
                    ..d
                },
                search: t
                    .beam_width
                    .map_or_else(SearchConfig::default, SearchConfig::with_beam_width),
            };
            let o = app.train(&req)?;
            for w in &o.warnings {
                eprintln!("warning: {w:?}");
            }
            for (i, l) in o.epoch_losses.iter().enumerate() {
                writeln!(out, "epoch {:>3}  loss {l:.6}", i + 1)?;
            }
            writeln!(
                out,
                "model {} ({:?}) trained on {} pairs",
                o.model.name, o.model.kind, o.examples
            )?;
        }
        Command::Match {
            query,
            pipeline,
            format,
        } => {
            let q = resolve_query(&app, &query)?;
            let strict = pipeline.strict || app.config.server.strict;
            let resp = app.run_match(&q, &pipeline.params(), strict)?;
            match format {
                Format::Table => print_table(&resp, &mut out)?,
                Format::Json => writeln!(out, "{}", serde_json::to_string(&resp)?)?,
            }
        }
        Command::Measure {
            query,
            pipeline,
            format,
        } => {
            let q = resolve_query(&app, &query)?;
            let strict = pipeline.strict || app.config.server.strict;
            let resp = app.run_measure(&q, &pipeline.params(), strict)?;
            match format {
                Format::Table => {
                    resp.series.write_csv(&mut out)?;
                    if resp.series.undated_matches > 0 {
                        eprintln!("{} matches have no date", resp.series.undated_matches);
                    }
                }
                Format::Json => writeln!(out, "{}", serde_json::to_string(&resp)?)?,
            }
        }
        Command::EvalRecall { fixture, n, pipeline } => {
            let ns = ops::parse_ns(&n)?;
            let file = File::open(&fixture).with_context(|| format!("opening {}", fixture.display()))?;
            let instances = read_recall_fixture(BufReader::new(file))?;
            writeln!(out, "n\trecall")?;
            for (n, r) in app.eval_recall(&instances, &ns, &pipeline.params())? {
                writeln!(out, "{n}\t{r:.4}")?;
            }
        }
        Command::EvalPrecision {
            queries,
            annotations,
            n,
            pipeline,
        } => {
            let ns = ops::parse_ns(&n)?;
            let qs = read_frame_queries(BufReader::new(File::open(&queries)?))?;
            let ann = read_frame_annotations(BufReader::new(File::open(&annotations)?))?;
            writeln!(out, "n\tquery\tprecision")?;
            for (n, report) in app.eval_precision(&qs, &ann, &ns, &pipeline.params())? {
                for (q, p) in &report.per_query {
                    writeln!(out, "{n}\t{q}\t{p:.4}")?;
                }
                writeln!(out, "{n}\tmacro\t{:.4}", report.macro_average)?;
            }
        }
        Command::Ratings(cmd) => match cmd {
            RatingsCommand::Add {
                rater,
                query,
                doc,
                position,
                score,
            } => {
                app.store.query(&query)?;
                let r = RatingRecord::new(rater, query, SentenceRef::new(doc, position), score)?;
                app.store.append_ratings(&[r])?;
            }
            RatingsCommand::Import { file } => {
                let rs = read_ratings_csv(File::open(&file).with_context(|| format!("opening {}", file.display()))?)?;
                app.store.append_ratings(&rs)?;
                writeln!(out, "{} ratings recorded", rs.len())?;
            }
            RatingsCommand::Export { file } => {
                let rs: Vec<RatingRecord> = app.store.ratings()?.into_iter().map(|s| s.rating).collect();
                match file {
                    Some(f) => write_ratings_csv(&rs, File::create(f)?)?,
                    None => write_ratings_csv(&rs, &mut out)?,
                }
            }
            RatingsCommand::Alpha { query } => {
                writeln!(out, "{}", app.alpha(query.as_deref())?)?;
            }
        },
        Command::Serve { bind, strict } => {
            let mut app = app;
            app.config.server.strict |= strict;
            let bind = bind.unwrap_or_else(|| app.config.server.bind.clone());
            let state = AppState::new(Arc::new(app));
            tokio::runtime::Runtime::new()?.block_on(server::serve(state, &bind))?;
        }
    }
    Ok(())
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
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
