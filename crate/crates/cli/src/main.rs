//! `depsearch`: build indexes, run searches and start the HTTP service.
//!
//! Exit status is 0 on success, 1 on any runtime error and 2 on usage
//! errors. Every flag can also be set through a `DEPSEARCH_*` variable.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use depsearch_core::conllu::{Block, ConlluReader, IngestOptions, TagColumn};
use depsearch_core::corpus::SentenceGraph;
use depsearch_core::engine::{Engine, QueryFailure};
use depsearch_core::export::write_tsv;
use depsearch_core::index::{IndexArtifact, IndexBuilder};
use depsearch_core::matcher::CaptureBinding;
use depsearch_core::provider::{FixtureProvider, HttpProvider, ParseProvider};
use depsearch_server::{AppState, Config};

#[derive(Parser)]
#[command(name = "depsearch", version, about = "Syntactic search by example")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from CoNLL-U files.
    Index(IndexArgs),
    /// Run one query against an index.
    Search(SearchArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TagCol {
    Upos,
    Xpos,
}

impl From<TagCol> for TagColumn {
    fn from(c: TagCol) -> Self {
        match c {
            TagCol::Upos => TagColumn::Upos,
            TagCol::Xpos => TagColumn::Xpos,
        }
    }
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long, required = true, num_args = 1.., env = "DEPSEARCH_INPUT", value_delimiter = ',')]
    input: Vec<PathBuf>,
    #[arg(long, env = "DEPSEARCH_OUTPUT")]
    output: PathBuf,
    /// CoNLL-U column read as the tag.
    #[arg(long, value_enum, default_value = "xpos", env = "DEPSEARCH_TAG_COLUMN")]
    tag_column: TagCol,
}

#[derive(Args)]
#[group(id = "parser", required = true, multiple = false)]
struct ParserArgs {
    /// Directory of CoNLL-U files with parses of query sentences.
    #[arg(long, env = "DEPSEARCH_PARSES", group = "parser")]
    parses: Option<PathBuf>,
    /// Parser endpoint; receives one word per line, returns CoNLL-U.
    #[arg(long, env = "DEPSEARCH_PARSER_URL", group = "parser")]
    parser_url: Option<String>,
}

#[derive(Args)]
struct ParserOptions {
    #[command(flatten)]
    source: ParserArgs,
    #[arg(long, default_value_t = 5000, env = "DEPSEARCH_PARSER_TIMEOUT_MS")]
    parser_timeout_ms: u64,
    /// Tag column of the parses; should match the index.
    #[arg(long, value_enum, default_value = "xpos", env = "DEPSEARCH_TAG_COLUMN")]
    tag_column: TagCol,
}

impl ParserOptions {
    fn provider(&self) -> Result<Arc<dyn ParseProvider>> {
        let options = IngestOptions {
            tag_column: self.tag_column.into(),
            ..IngestOptions::default()
        };
        if let Some(dir) = &self.source.parses {
            let fixtures = FixtureProvider::from_dir(dir, &options)
                .with_context(|| format!("loading parses from {}", dir.display()))?;
            return Ok(Arc::new(fixtures));
        }
        let url = self.source.parser_url.clone().expect("clap enforces one parser source");
        let timeout = Duration::from_millis(self.parser_timeout_ms);
        Ok(Arc::new(HttpProvider::new(url, timeout).with_options(options)))
    }
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, env = "DEPSEARCH_INDEX")]
    index: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    limit: Option<u64>,
    /// Print the same TSV as the export endpoint.
    #[arg(long)]
    tsv: bool,
    #[command(flatten)]
    parser: ParserOptions,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "DEPSEARCH_INDEX")]
    index: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080", env = "DEPSEARCH_LISTEN")]
    listen: String,
    #[arg(long, default_value_t = 50, env = "DEPSEARCH_DEFAULT_PAGE_SIZE")]
    default_page_size: usize,
    #[arg(long, default_value_t = 500, env = "DEPSEARCH_MAX_PAGE_SIZE")]
    max_page_size: usize,
    #[arg(long, env = "DEPSEARCH_MAX_EXPORT_ROWS")]
    max_export_rows: Option<usize>,
    /// Concurrent requests to the parser.
    #[arg(long, default_value_t = 8, env = "DEPSEARCH_PARSER_SLOTS")]
    parser_slots: usize,
    /// Origin allowed by CORS; any origin when unset.
    #[arg(long, env = "DEPSEARCH_CORS_ORIGIN")]
    cors_origin: Option<String>,
    #[command(flatten)]
    parser: ParserOptions,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEPSEARCH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(args) => index(args),
        Command::Search(args) => search(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn index(args: IndexArgs) -> Result<()> {
    let options = IngestOptions {
        tag_column: args.tag_column.into(),
        ..IngestOptions::default()
    };
    let mut builder = IndexBuilder::new();
    let mut tokens = 0usize;
    let mut skipped = 0usize;
    for path in &args.input {
        let file = File::open(path).with_context(|| format!("{}", path.display()))?;
        for block in ConlluReader::new(BufReader::new(file), options.clone()) {
            match block.with_context(|| format!("{}", path.display()))? {
                Block::Sentence(s) => {
                    tokens += s.len();
                    builder
                        .add_sentence(&s)
                        .with_context(|| format!("{}", path.display()))?;
                }
                Block::Skipped(s) => {
                    skipped += 1;
                    eprintln!(
                        "warning: {}:{}: skipped sentence {}: {}",
                        path.display(),
                        s.line,
                        s.sentence_id,
                        s.reason
                    );
                }
            }
        }
    }
    builder
        .finish_to_file(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    let artifact = IndexArtifact::open(&args.output)?;
    println!("sentences\t{}", artifact.len());
    println!("tokens\t{tokens}");
    println!("features\t{}", artifact.feature_count());
    println!("skipped\t{skipped}");
    Ok(())
}

fn open_index(path: &Path) -> Result<IndexArtifact> {
    IndexArtifact::open(path).with_context(|| format!("opening index {}", path.display()))
}

/// Message for a failed query, with a caret under the offending spot.
fn describe(query: &str, e: &QueryFailure) -> String {
    let mut msg = format!("{}: {e}", e.kind());
    if let Some(pos) = e.position() {
        let col = query.chars().take(pos).count();
        msg.push_str(&format!("\n  {query}\n  {}^", " ".repeat(col)));
    }
    msg
}

fn search(args: SearchArgs) -> Result<()> {
    let index = open_index(&args.index)?;
    let engine = Engine::new(Arc::new(index), args.parser.provider()?);
    let graph = match engine.compile(&args.query) {
        Ok(g) => g,
        Err(e) => bail!(describe(&args.query, &e)),
    };
    let limit = args.limit.map(|l| l as usize);
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut stream = engine.stream(&graph);
    let rows = if args.tsv {
        write_tsv(&mut out, &graph, stream.by_ref(), limit)?
    } else {
        let mut rows = 0;
        while rows < limit.unwrap_or(usize::MAX) {
            let Some((ord, m)) = stream.next_located() else {
                break;
            };
            let sentence = engine.index().sentence(ord)?;
            writeln!(out, "{}\t{}", m.sentence_id, highlight(&sentence, &m.captures))?;
            rows += 1;
        }
        rows
    };
    out.flush()?;
    if rows == 0 {
        eprintln!("no matches");
    }
    if stream.truncated_sentences() > 0 {
        eprintln!(
            "note: {} sentences had more matches than the per-sentence cap",
            stream.truncated_sentences()
        );
    }
    Ok(())
}

/// Sentence text with each capture written as `[text]{name}`.
fn highlight(sentence: &SentenceGraph, captures: &[CaptureBinding]) -> String {
    let mut out = String::new();
    let n = sentence.len();
    for (i, t) in sentence.tokens().iter().enumerate() {
        let mut opening: Vec<&CaptureBinding> =
            captures.iter().filter(|c| c.span.start == i).collect();
        opening.sort_by_key(|c| std::cmp::Reverse(c.span.end));
        for _ in &opening {
            out.push('[');
        }
        out.push_str(&t.word);
        let mut closing: Vec<&CaptureBinding> =
            captures.iter().filter(|c| c.span.end == i + 1).collect();
        closing.sort_by_key(|c| std::cmp::Reverse(c.span.start));
        for c in closing {
            out.push_str(&format!("]{{{}}}", c.name));
        }
        if t.space_after && i + 1 < n {
            out.push(' ');
        }
    }
    out
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = Config {
        default_page_size: args.default_page_size,
        max_page_size: args.max_page_size,
        max_export_rows: args.max_export_rows,
        provider_slots: args.parser_slots,
        cors_origin: args.cors_origin.clone(),
    };
    if config.default_page_size == 0 || config.default_page_size > config.max_page_size {
        bail!("--default-page-size must be between 1 and --max-page-size");
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .with_context(|| format!("cannot listen on {}", args.listen))?;
        let state = AppState::loading(config);
        eprintln!("listening on {}", listener.local_addr()?);
        let server = tokio::spawn(depsearch_server::serve(listener, state.clone()));

        let loaded = tokio::task::spawn_blocking(move || -> Result<Engine> {
            let index = open_index(&args.index)?;
            Ok(Engine::new(Arc::new(index), args.parser.provider()?))
        })
        .await??;
        eprintln!("index loaded: {} sentences", loaded.index().len());
        state.install(loaded);
        server.await??;
        Ok(())
    })
}
