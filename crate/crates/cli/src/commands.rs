use std::fs;
use std::io::{self, Write};
use std::path::Path;

use labrag::chunking::{chunk_corpus, write_chunks_jsonl, Chunk, ChunkingConfig};
use labrag::config::{GeneratorSpec, JudgeSpec, ProviderSpec};
use labrag::corpus::{load_corpus, load_qa, Corpus, QaPair};
use labrag::embedding::HttpEmbedderConfig;
use labrag::engine::{Engine, QueryRequest, QueryResponse};
use labrag::evaluation::{
    evaluate_bundle, overall_table, run_grid, topk_table, EvaluationReport, ExperimentConfig, Grid,
    TopKMode,
};
use labrag::exec::Execution;
use labrag::generation::HttpGeneratorConfig;
use labrag::index::{load_index, save_index, IndexBundle, Manifest};
use labrag::retrieval::{RetrievalConfig, Strategy};
use labrag_service::EngineConfig;

use crate::args::{
    ChunkArgs, ChunkFlags, ChunkStrategy, Command, EvalArgs, GeneratorFlags, GeneratorKind, IndexArgs,
    IngestArgs, JudgeKind, ProviderFlags, ProviderKind, QueryArgs, RetrievalFlags, ServeArgs,
};
use crate::failure::Failure;

const BUNDLED_GRID: &str = include_str!("../../../configs/experiment_grid.toml");
const HISTOGRAM_BOUNDS: [usize; 5] = [64, 128, 256, 512, 1024];

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Chunk(a) => chunk(a),
        Command::Index(a) => index(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}

fn read_corpus(path: &Path) -> Result<Corpus, Failure> {
    load_corpus(path).map_err(|e| Failure::corpus(path, e))
}

fn read_qa(path: &Path, corpus: &Corpus) -> Result<Vec<QaPair>, Failure> {
    load_qa(path, corpus).map_err(|e| Failure::corpus(path, e))
}

fn write_failure(e: io::Error) -> Failure {
    Failure::Infra(format!("cannot write output: {e}"))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

fn chunking_config(strategy: ChunkStrategy, sizes: &ChunkFlags) -> Result<ChunkingConfig, Failure> {
    let config = match strategy {
        ChunkStrategy::Recursive => ChunkingConfig::recursive(sizes.target, sizes.overlap),
        ChunkStrategy::Semantic => ChunkingConfig::Semantic {
            min_chunk_tokens: sizes.min_chunk,
            breakpoint_percentile: sizes.percentile,
        },
    };
    config.validate().map_err(|e| Failure::User(e.to_string()))?;
    Ok(config)
}

fn provider_given(flags: &ProviderFlags) -> bool {
    flags.provider.is_some()
        || flags.provider_url.is_some()
        || flags.provider_model.is_some()
        || flags.dimension.is_some()
}

/// Resolves provider flags on top of `base`. Returns `None` when neither is set.
fn provider_spec(flags: &ProviderFlags, base: Option<&ProviderSpec>) -> Result<Option<ProviderSpec>, Failure> {
    if !provider_given(flags) {
        return Ok(base.cloned());
    }
    let kind = flags.provider.unwrap_or(match (base, &flags.provider_url) {
        (Some(ProviderSpec::Http(_)), _) | (None, Some(_)) => ProviderKind::Http,
        _ => ProviderKind::Hash,
    });
    let spec = match kind {
        ProviderKind::Hash => {
            let (dimension, seed) = match base {
                Some(ProviderSpec::Hash { dimension, seed }) => (*dimension, *seed),
                _ => (384, 0),
            };
            ProviderSpec::Hash {
                dimension: flags.dimension.unwrap_or(dimension),
                seed,
            }
        }
        ProviderKind::Http => {
            let mut cfg = match base {
                Some(ProviderSpec::Http(cfg)) => cfg.clone(),
                _ => HttpEmbedderConfig::new("", "", 384),
            };
            if let Some(url) = &flags.provider_url {
                cfg.base_url = url.clone();
            }
            if let Some(model) = &flags.provider_model {
                cfg.model = model.clone();
            }
            if let Some(d) = flags.dimension {
                cfg.dimension = d;
            }
            if cfg.base_url.is_empty() || cfg.model.is_empty() {
                return Err(Failure::User(
                    "an http provider needs --provider-url and --provider-model".into(),
                ));
            }
            ProviderSpec::Http(cfg)
        }
    };
    Ok(Some(spec))
}

fn generator_spec(flags: &GeneratorFlags) -> Result<Option<GeneratorSpec>, Failure> {
    let kind = flags
        .generator
        .or_else(|| flags.generator_url.as_ref().map(|_| GeneratorKind::Http));
    match (kind, &flags.generator_url) {
        (None, _) => Ok(None),
        (Some(GeneratorKind::Stub), _) => Ok(Some(GeneratorSpec::Stub)),
        (Some(GeneratorKind::Http), Some(url)) => Ok(Some(GeneratorSpec::Http(HttpGeneratorConfig::new(url.clone())))),
        (Some(GeneratorKind::Http), None) => Err(Failure::User("an http generator needs --generator-url".into())),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, Failure> {
    s.parse().map_err(|e: labrag::retrieval::UnknownStrategy| Failure::User(e.to_string()))
}

/// Applies retrieval flags on top of `base`. Giving one fusion weight sets
/// the other to its complement.
fn retrieval_config(flags: &RetrievalFlags, mut base: RetrievalConfig) -> Result<RetrievalConfig, Failure> {
    if let Some(s) = &flags.strategy {
        base.strategy = parse_strategy(s)?;
    }
    if let Some(k) = flags.k {
        base.k = k;
    }
    if let Some(t) = flags.threshold {
        base.rerank_threshold = t;
    }
    match (flags.dense_weight, flags.sparse_weight) {
        (Some(d), Some(s)) => {
            base.dense_weight = d;
            base.sparse_weight = s;
        }
        (Some(d), None) => {
            base.dense_weight = d;
            base.sparse_weight = 1.0 - d;
        }
        (None, Some(s)) => {
            base.dense_weight = 1.0 - s;
            base.sparse_weight = s;
        }
        (None, None) => {}
    }
    base.validate().map_err(|e| Failure::User(e.to_string()))?;
    Ok(base)
}

fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let corpus = read_corpus(&args.corpus)?;
    let qa = args.qa.as_deref().map(|p| read_qa(p, &corpus)).transpose()?;
    let mut categories = std::collections::BTreeMap::<&str, usize>::new();
    for d in corpus.documents() {
        *categories.entry(d.category.as_str()).or_default() += 1;
    }
    let tokens: usize = corpus
        .documents()
        .iter()
        .map(|d| labrag::chunking::count_tokens(&d.text))
        .sum();
    if args.json {
        let body = serde_json::json!({
            "documents": corpus.len(),
            "tokens": tokens,
            "categories": categories,
            "qa_pairs": qa.as_ref().map(Vec::len),
        });
        println!("{}", to_json(&body));
        return Ok(());
    }
    println!("documents: {}", corpus.len());
    println!("tokens: {tokens}");
    for (category, n) in &categories {
        let name = if category.is_empty() { "(none)" } else { category };
        println!("  {name}: {n}");
    }
    if let Some(qa) = qa {
        println!("qa pairs: {}", qa.len());
    }
    Ok(())
}

fn chunk(args: ChunkArgs) -> Result<(), Failure> {
    let corpus = read_corpus(&args.corpus)?;
    let config = chunking_config(args.strategy, &args.sizes)?;
    let provider = match config {
        ChunkingConfig::Semantic { .. } => Some(provider_spec(&args.provider, None)?.unwrap_or_default().build()),
        ChunkingConfig::Recursive { .. } => None,
    };
    let chunks = chunk_corpus(&corpus, &config, provider.as_deref(), Execution::default())?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Failure::User(format!("{}: {e}", path.display())))?;
            write_chunks_jsonl(&chunks, io::BufWriter::new(file)).map_err(write_failure)?;
            eprintln!("{} chunks written to {}", chunks.len(), path.display());
        }
        None => write_chunks_jsonl(&chunks, io::stdout().lock()).map_err(write_failure)?,
    }
    Ok(())
}

fn histogram(chunks: &[Chunk]) -> String {
    let mut counts = [0usize; HISTOGRAM_BOUNDS.len() + 1];
    for c in chunks {
        let slot = HISTOGRAM_BOUNDS
            .iter()
            .position(|&b| c.token_count <= b)
            .unwrap_or(HISTOGRAM_BOUNDS.len());
        counts[slot] += 1;
    }
    let widest = counts.iter().copied().max().unwrap_or(0).max(1);
    let mut out = String::new();
    let mut lower = 0;
    for (i, n) in counts.iter().enumerate() {
        let label = match HISTOGRAM_BOUNDS.get(i) {
            Some(&upper) => format!("{lower:>5}-{upper:<5}"),
            None => format!("{:>5}+     ", lower),
        };
        if let Some(&upper) = HISTOGRAM_BOUNDS.get(i) {
            lower = upper + 1;
        }
        let bar = "#".repeat((n * 40).div_ceil(widest));
        let line = format!("  {label} {n:>6} {bar}");
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn index(args: IndexArgs) -> Result<(), Failure> {
    let corpus = read_corpus(&args.corpus)?;
    let config = chunking_config(args.strategy, &args.sizes)?;
    let spec = provider_spec(&args.provider, None)?.unwrap_or_default();
    let bundle = IndexBundle::build(corpus, &config, &spec, Execution::default())?;
    let manifest = save_index(&bundle, &args.out)?;
    if args.json {
        println!("{}", to_json(&manifest));
        return Ok(());
    }
    print_index_summary(&bundle, &manifest, &args.out);
    Ok(())
}

fn print_index_summary(bundle: &IndexBundle, manifest: &Manifest, dir: &Path) {
    let chunks = bundle.chunks();
    let mut sizes: Vec<usize> = chunks.iter().map(|c| c.token_count).collect();
    sizes.sort_unstable();
    println!("index written to {}", dir.display());
    println!("documents: {}", manifest.num_docs);
    println!("chunks: {}", manifest.num_chunks);
    match &manifest.chunking {
        Some(ChunkingConfig::Recursive {
            target_tokens,
            overlap_tokens,
        }) => println!("chunking: recursive target={target_tokens} overlap={overlap_tokens}"),
        Some(ChunkingConfig::Semantic {
            min_chunk_tokens,
            breakpoint_percentile,
        }) => println!("chunking: semantic min_chunk={min_chunk_tokens} percentile={breakpoint_percentile}"),
        None => {}
    }
    println!("provider: {} (dimension {})", manifest.provider, manifest.dimension);
    if let (Some(min), Some(max)) = (sizes.first(), sizes.last()) {
        println!("tokens per chunk: min {min}, median {}, max {max}", sizes[sizes.len() / 2]);
    }
    print!("{}", histogram(chunks));
}

fn query(args: QueryArgs) -> Result<(), Failure> {
    let provider = provider_spec(&args.provider, None)?;
    let generator = generator_spec(&args.generator)?.unwrap_or_default();
    let defaults = retrieval_config(
        &RetrievalFlags {
            strategy: None,
            k: None,
            ..args.retrieval.clone()
        },
        RetrievalConfig::default(),
    )?;
    let (engine, _) = Engine::open(&args.index, provider.as_ref(), &generator, defaults)?;
    let mut request = QueryRequest::new(args.question);
    request.strategy = args.retrieval.strategy.as_deref().map(parse_strategy).transpose()?;
    request.k = args.retrieval.k;
    request.generate = args.generate;
    let response = engine.query(&request)?;
    let mut out = io::stdout().lock();
    if args.json {
        writeln!(out, "{}", to_json(&response)).map_err(write_failure)?;
    } else {
        print_response(&mut out, &response).map_err(write_failure)?;
    }
    Ok(())
}

fn print_response(out: &mut impl Write, response: &QueryResponse) -> io::Result<()> {
    if let Some(answer) = &response.answer {
        writeln!(out, "answer: {answer}")?;
        writeln!(out)?;
    }
    if response.chunks.is_empty() {
        match response.strategy {
            Strategy::Rerank => writeln!(out, "no context above threshold")?,
            _ => writeln!(out, "no context retrieved")?,
        }
        return Ok(());
    }
    writeln!(out, "sources ({}, k={}):", response.strategy, response.k)?;
    for c in &response.chunks {
        writeln!(out)?;
        let title = if c.title.is_empty() { c.doc_id.as_str() } else { c.title.as_str() };
        writeln!(out, "[{}] {} ({}) score={:.4}", c.rank, c.chunk_id, title, c.score)?;
        for line in c.text.lines() {
            if line.trim().is_empty() {
                writeln!(out)?;
            } else {
                writeln!(out, "    {line}")?;
            }
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    if args.ks.is_empty() || args.ks.contains(&0) {
        return Err(Failure::User("--ks needs positive cutoffs".into()));
    }
    let loaded = match &args.index {
        Some(dir) => Some(load_index(dir)?.0),
        None => None,
    };
    let corpus = match (&loaded, &args.corpus) {
        (Some(bundle), _) => bundle.corpus.clone(),
        (None, Some(path)) => read_corpus(path)?,
        (None, None) => return Err(Failure::User("--index or --corpus is required".into())),
    };
    let qa = read_qa(&args.qa, &corpus)?;
    let generator = generator_spec(&args.generator)?;
    let judge = match args.judge {
        JudgeKind::Containment => None,
        JudgeKind::Llm => Some(JudgeSpec::Llm {
            generator: match &generator {
                Some(GeneratorSpec::Http(cfg)) => GeneratorSpec::Http(cfg.clone()),
                _ => return Err(Failure::User("--judge llm needs an http generator".into())),
            },
        }),
    };
    let topk_mode = if args.span_topk { TopKMode::Span } else { TopKMode::Token };

    let reports = match &args.grid {
        Some(path) => {
            if args.retrieval.strategy.is_some() {
                return Err(Failure::User("--strategy cannot be combined with --grid".into()));
            }
            let text = if path.is_empty() {
                BUNDLED_GRID.to_string()
            } else {
                fs::read_to_string(path).map_err(|e| Failure::User(format!("{path}: {e}")))?
            };
            let mut grid = Grid::parse(&text)?;
            if args.provider.provider == Some(ProviderKind::Hash) {
                grid = grid.with_hash_embedders(args.provider.dimension.unwrap_or(384));
            } else if provider_given(&args.provider) {
                return Err(Failure::User("grid runs only accept --provider hash as an override".into()));
            }
            let mut configs = grid.configs()?;
            for c in &mut configs {
                c.ks = args.ks.clone();
                c.topk_mode = topk_mode;
                c.retrieval = retrieval_config(&args.retrieval, c.retrieval.clone())?;
                if let Some(g) = &generator {
                    c.generator = g.clone();
                }
                if let Some(j) = &judge {
                    c.judge = j.clone();
                }
            }
            run_grid(&corpus, &qa, &configs, exec, args.timings)?
        }
        None => {
            let retrieval = retrieval_config(&args.retrieval, RetrievalConfig::default())?;
            let (bundle, chunking, base_provider) = match loaded {
                Some(bundle) => {
                    let chunking = bundle
                        .chunking
                        .clone()
                        .unwrap_or_else(|| ChunkingConfig::recursive(256, 64));
                    let spec = bundle.provider_spec.clone();
                    (Some(bundle), chunking, spec)
                }
                None => (None, chunking_config(args.chunking, &args.sizes)?, None),
            };
            let spec = provider_spec(&args.provider, base_provider.as_ref())?.unwrap_or_default();
            let mut config = ExperimentConfig::deterministic(args.id.clone(), chunking, retrieval);
            config.embedding = spec.clone();
            config.ks = args.ks.clone();
            config.topk_mode = topk_mode;
            if let Some(g) = &generator {
                config.generator = g.clone();
            }
            if let Some(j) = &judge {
                config.judge = j.clone();
            }
            let start = std::time::Instant::now();
            let provider = spec.build();
            let bundle = match bundle {
                Some(b) => b,
                None => IndexBundle::build_with(corpus, &config.chunking, provider.as_ref(), Some(spec), exec)?,
            };
            let mut report = evaluate_bundle(&bundle, provider.as_ref(), &qa, &config, exec)?;
            if args.timings {
                report.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            vec![report]
        }
    };

    fs::create_dir_all(&args.out).map_err(|e| Failure::User(format!("{}: {e}", args.out.display())))?;
    for report in &reports {
        report.write_to(&args.out)?;
    }
    print_reports(&reports, args.json).map_err(write_failure)?;
    all_retrieval_failed(&reports)
}

fn print_reports(reports: &[EvaluationReport], json: bool) -> io::Result<()> {
    let mut out = io::stdout().lock();
    if json {
        let body: Vec<&EvaluationReport> = reports.iter().collect();
        return writeln!(out, "{}", to_json(&body));
    }
    write!(out, "{}", overall_table(reports))?;
    for report in reports {
        writeln!(out)?;
        writeln!(out, "{} top-k", report.experiment_id)?;
        write!(out, "{}", topk_table(report))?;
        if report.aggregates.rows_with_notes > 0 {
            writeln!(out, "{} questions with notes", report.aggregates.rows_with_notes)?;
        }
    }
    Ok(())
}

/// A run where no question could be retrieved for points at the provider.
fn all_retrieval_failed(reports: &[EvaluationReport]) -> Result<(), Failure> {
    for report in reports {
        let failed = report
            .rows
            .iter()
            .all(|r| r.notes.iter().any(|n| n.starts_with("retrieval:")));
        if failed {
            let first = report.rows[0]
                .notes
                .iter()
                .find(|n| n.starts_with("retrieval:"))
                .cloned()
                .unwrap_or_default();
            return Err(Failure::Infra(format!(
                "{}: every question failed at retrieval ({first})",
                report.experiment_id
            )));
        }
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(path) => EngineConfig::from_file(path).map_err(|e| Failure::User(e.to_string()))?,
        None => EngineConfig::default(),
    };
    config
        .apply_env(std::env::vars())
        .map_err(|e| Failure::User(e.to_string()))?;
    if let Some(index) = args.index {
        config.index = Some(index);
    }
    if let Some(corpus) = args.corpus {
        config.corpus = Some(corpus);
    }
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    if let Some(dir) = args.static_dir {
        config.static_dir = Some(dir);
    }
    config.retrieval = retrieval_config(&args.retrieval, config.retrieval.clone())?;
    config.embedding = provider_spec(&args.provider, config.embedding.as_ref())?;
    if let Some(g) = generator_spec(&args.generator)? {
        config.generator = g;
    }
    let engine = labrag_service::load_engine(&config)?;
    if engine.is_none() {
        eprintln!("no index configured; /api/query will answer 503 until one is provided");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Infra(format!("cannot start runtime: {e}")))?;
    eprintln!("listening on {}", config.listen);
    runtime.block_on(labrag_service::serve(config, engine))?;
    Ok(())
}
