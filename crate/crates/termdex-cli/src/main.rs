//! Batch frontend for the termdex engine: build keyword indexes from
//! annotation manifests, inspect the scored stages, query a saved
//! index, and score retrieval runs.
//!
//! Exit codes: 0 success, 1 bad invocation or invalid input/config,
//! 2 runtime failure inside an accepted pipeline.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use termdex::collocation::{extract_compound_terms, write_compounds_csv, CompoundTerm};
use termdex::corpus::{corpus_fingerprint, load_corpus, Corpus};
use termdex::evaluation::{evaluate, load_qrels, load_run, write_pr_csv};
use termdex::indexer::{
    index_comments, keyword_report, load_index, search, PipelineConfig, SearchOptions,
};
use termdex::preprocess::{preprocess_document, Document};
use termdex::stemmer::load_ruleset;
use termdex::thesaurus::parse_thesaurus;
use termdex::weighting::{compute_stats, select_simple_terms, write_terms_csv, TermCandidate};
use termdex::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(
    name = "termdex",
    version,
    about = "Terminology extraction and image indexing over annotation corpora",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    /// Results never depend on this value.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a keyword index from an annotation manifest
    Index(IndexArgs),
    /// Print the scored stages: simple-term table and compound table
    Terms(TermsArgs),
    /// Query a saved index
    Search(SearchArgs),
    /// Score a retrieval run against relevance judgments
    Eval(EvalArgs),
    /// Stem words with a suffix-stripping rule file
    Stem(StemArgs),
    /// Parse a SKOS thesaurus and report its size
    #[command(name = "thesaurus-check")]
    ThesaurusCheck(ThesaurusCheckArgs),
}

/// Pipeline configuration shared by `index` and `terms`. A --config
/// file sets the baseline; every flag here overrides its field.
#[derive(Args)]
struct PipelineFlags {
    /// JSON pipeline configuration file; all other flags override it
    #[arg(long, env = "TERMDEX_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,

    /// Stopword list, one word per line; repeat to merge several lists
    /// (replaces any lists named in --config)
    #[arg(long = "stopwords", value_name = "FILE")]
    stopwords: Vec<PathBuf>,

    /// Suffix-stripping rule file
    #[arg(long = "stemmer-rules", value_name = "FILE")]
    stemmer_rules: Option<PathBuf>,

    /// Split-token repair map applied after tokenization
    #[arg(long = "repair-map", value_name = "FILE")]
    repair_map: Option<PathBuf>,

    /// SKOS RDF/XML thesaurus used to verify candidate keywords
    #[arg(long, value_name = "FILE")]
    thesaurus: Option<PathBuf>,

    /// Keep a simple term when its average tf.idf strictly exceeds
    /// this [default: 0.125]
    #[arg(long, value_name = "X")]
    tfidf_threshold: Option<f64>,

    /// Grow a compound when the extension's mutual information
    /// strictly exceeds this [default: 0.15]
    #[arg(long, value_name = "X")]
    mi_threshold: Option<f64>,

    /// Logarithm base for mutual information [default: 10]
    #[arg(long, value_name = "B")]
    mi_log_base: Option<f64>,

    /// Longest compound to grow, in tokens [default: 4]
    #[arg(long, value_name = "N")]
    max_compound_len: Option<usize>,

    /// Adjacency window for collocation counting; 1 means strictly
    /// consecutive tokens [default: 1]
    #[arg(long, value_name = "N")]
    window: Option<usize>,

    /// Shortest token kept by cleaning, in characters [default: 2]
    #[arg(long, value_name = "N")]
    min_token_length: Option<usize>,

    /// Keep purely numeric tokens instead of dropping them
    #[arg(long)]
    keep_numeric_tokens: bool,
}

impl PipelineFlags {
    fn into_config(self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => load_config_file(path)?,
            None => PipelineConfig::default(),
        };
        if !self.stopwords.is_empty() {
            config.stopwords_paths = self.stopwords;
        }
        if self.stemmer_rules.is_some() {
            config.stemmer_path = self.stemmer_rules;
        }
        if self.repair_map.is_some() {
            config.repair_path = self.repair_map;
        }
        if self.thesaurus.is_some() {
            config.thesaurus_path = self.thesaurus;
        }
        if let Some(x) = self.tfidf_threshold {
            config.params.tfidf_threshold = x;
        }
        if let Some(x) = self.mi_threshold {
            config.params.mi_threshold = x;
        }
        if let Some(b) = self.mi_log_base {
            config.params.mi_log_base = b;
        }
        if let Some(n) = self.max_compound_len {
            config.params.max_compound_len = n;
        }
        if let Some(n) = self.window {
            config.params.window = n;
        }
        if let Some(n) = self.min_token_length {
            config.cleaning.min_token_length = n;
        }
        if self.keep_numeric_tokens {
            config.cleaning.drop_numeric_tokens = false;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Relative paths in a config file mean "next to the file", so they
/// survive being invoked from any working directory.
fn load_config_file(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::ReadFile {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config: PipelineConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&p);
        }
    };
    config.stopwords_paths.iter_mut().for_each(rebase);
    if let Some(p) = config.stemmer_path.as_mut() {
        rebase(p);
    }
    if let Some(p) = config.repair_path.as_mut() {
        rebase(p);
    }
    if let Some(p) = config.thesaurus_path.as_mut() {
        rebase(p);
    }
    Ok(config)
}

#[derive(Args)]
struct IndexArgs {
    /// Corpus manifest (JSON) listing images and their annotations
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    /// Where to write the index; omit to only print the keyword report
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct TermsArgs {
    /// Corpus manifest (JSON) listing images and their annotations
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    /// Output format for both tables
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,

    /// Write the simple-term table here instead of stdout
    #[arg(long, value_name = "FILE")]
    out_terms: Option<PathBuf>,

    /// Write the compound table here instead of stdout
    #[arg(long, value_name = "FILE")]
    out_compounds: Option<PathBuf>,

    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SearchArgs {
    /// Index file produced by `termdex index --out`
    #[arg(long, value_name = "FILE")]
    index: PathBuf,

    /// Optional manifest to check the index is not stale
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Return at most this many images
    #[arg(long, value_name = "N")]
    limit: Option<usize>,

    /// Output format
    #[arg(long, value_enum, default_value = "text")]
    format: SearchFormat,

    /// Free-text query; several words form one query
    #[arg(required = true, value_name = "WORD")]
    query: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchFormat {
    Text,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    /// Ranked retrieval run: query_id, image_id, rank, score
    #[arg(long, value_name = "FILE")]
    run: PathBuf,

    /// Relevance judgments: query_id, image_id, 0 or 1
    #[arg(long, value_name = "FILE")]
    qrels: PathBuf,

    /// Also print one AP line per query before the MAP line
    #[arg(long)]
    per_query: bool,

    /// Write the precision/recall curve CSV here
    #[arg(long, value_name = "FILE")]
    curve_out: Option<PathBuf>,
}

#[derive(Args)]
struct StemArgs {
    /// Suffix-stripping rule file
    #[arg(long, value_name = "FILE")]
    rules: PathBuf,

    /// Show which rule fired in each phase
    #[arg(long)]
    trace: bool,

    /// Words to stem, one output line each
    #[arg(required = true, value_name = "WORD")]
    words: Vec<String>,
}

#[derive(Args)]
struct ThesaurusCheckArgs {
    /// SKOS RDF/XML file to parse
    #[arg(value_name = "FILE")]
    path: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Some(jobs) = cli.jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
        if let Err(e) = pool {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err.class() {
                ErrorClass::Usage => ExitCode::from(1),
                ErrorClass::Runtime => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Index(args) => cmd_index(args),
        Command::Terms(args) => cmd_terms(args),
        Command::Search(args) => cmd_search(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Stem(args) => cmd_stem(args),
        Command::ThesaurusCheck(args) => cmd_thesaurus_check(args),
    }
}

fn create_file(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::WriteFile {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    let config = args.pipeline.into_config()?;
    let corpus = load_corpus(&args.manifest)?;
    let index = index_comments(&corpus, &config)?;

    let names: BTreeMap<String, String> = corpus
        .images
        .iter()
        .filter_map(|(id, meta)| meta.name.clone().map(|n| (id.clone(), n)))
        .collect();
    print!("{}", keyword_report(&index, &names));

    if let Some(out) = &args.out {
        index.save(out)?;
        eprintln!(
            "wrote index ({} images, {} keywords) to {}",
            index.per_image.len(),
            index.inverted.len(),
            out.display()
        );
    }
    Ok(())
}

/// The two scored stages without thesaurus verification, so operators
/// can see what the thresholds do before concepts filter the output.
fn run_scored_stages(
    corpus: &Corpus,
    config: &PipelineConfig,
) -> Result<(Vec<TermCandidate>, Vec<CompoundTerm>)> {
    if corpus.is_empty() {
        return Err(Error::Pipeline(
            "empty corpus: the manifest lists no annotations".into(),
        ));
    }
    let (cleaning, ruleset) = config.resolve_text_stages()?;
    let documents: Vec<Document> = corpus
        .annotations
        .iter()
        .map(|a| preprocess_document(a, &cleaning, &ruleset))
        .collect();
    if documents.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::Pipeline(
            "no content tokens left after cleaning".into(),
        ));
    }
    let stats = compute_stats(&documents)?;
    let candidates = select_simple_terms(&documents, &stats, config.params.tfidf_threshold);
    let compounds = extract_compound_terms(
        &candidates,
        &documents,
        config.params.mi_threshold,
        config.params.mi_log_base,
        config.params.max_compound_len,
        config.params.window,
    );
    Ok((candidates, compounds))
}

fn cmd_terms(args: TermsArgs) -> Result<()> {
    let config = args.pipeline.into_config()?;
    let corpus = load_corpus(&args.manifest)?;
    let (candidates, compounds) = run_scored_stages(&corpus, &config)?;

    match args.format {
        TableFormat::Csv => {
            let stdout = std::io::stdout();
            match &args.out_terms {
                Some(path) => write_terms_csv(create_file(path)?, &candidates)?,
                None => write_terms_csv(stdout.lock(), &candidates)?,
            }
            if args.out_terms.is_none() && args.out_compounds.is_none() {
                println!();
            }
            match &args.out_compounds {
                Some(path) => write_compounds_csv(create_file(path)?, &compounds)?,
                None => write_compounds_csv(stdout.lock(), &compounds)?,
            }
        }
        TableFormat::Json => {
            let dump = |value: &serde_json::Value, out: Option<&PathBuf>| -> Result<()> {
                let text = serde_json::to_string_pretty(value)
                    .expect("term tables always serialize");
                match out {
                    Some(path) => {
                        let mut file = create_file(path)?;
                        writeln!(file, "{text}").map_err(|source| Error::WriteFile {
                            path: path.clone(),
                            source,
                        })
                    }
                    None => {
                        println!("{text}");
                        Ok(())
                    }
                }
            };
            if args.out_terms.is_none() && args.out_compounds.is_none() {
                dump(
                    &serde_json::json!({ "terms": candidates, "compounds": compounds }),
                    None,
                )?;
            } else {
                dump(&serde_json::json!(candidates), args.out_terms.as_ref())?;
                dump(&serde_json::json!(compounds), args.out_compounds.as_ref())?;
            }
        }
    }
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let index = load_index(&args.index)?;
    if let Some(manifest) = &args.manifest {
        let corpus = load_corpus(manifest)?;
        if corpus_fingerprint(&corpus) != index.corpus_fingerprint {
            eprintln!(
                "warning: the corpus no longer matches this index's fingerprint; \
                 results may be stale, re-run `termdex index`"
            );
        }
    }

    let query = args.query.join(" ");
    let hits = search(&index, &query, &SearchOptions { limit: args.limit });
    match args.format {
        SearchFormat::Text => {
            if hits.is_empty() {
                println!("no matches");
                return Ok(());
            }
            for (i, hit) in hits.iter().enumerate() {
                println!(
                    "{}. {}  keywords={}  score={:.4}",
                    i + 1,
                    hit.image_id,
                    hit.match_count(),
                    hit.score
                );
                for keyword in &hit.matched_keywords {
                    println!("     {keyword}");
                }
            }
        }
        SearchFormat::Json => {
            let text =
                serde_json::to_string_pretty(&hits).expect("hits always serialize");
            println!("{text}");
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let run = load_run(&args.run)?;
    let qrels = load_qrels(&args.qrels)?;
    let report = evaluate(&run, &qrels)?;

    for query in &report.missing_queries {
        eprintln!("warning: query {query} has judgments but no ranking; it scores 0");
    }
    if args.per_query {
        for (query, ap) in &report.per_query {
            println!("AP {query} {ap:.4}");
        }
    }
    println!("MAP {:.4}", report.map);

    if let Some(path) = &args.curve_out {
        write_pr_csv(create_file(path)?, &run, &qrels)?;
        eprintln!("wrote precision/recall curves to {}", path.display());
    }
    Ok(())
}

fn cmd_stem(args: StemArgs) -> Result<()> {
    let ruleset = load_ruleset(&args.rules)?;
    for word in &args.words {
        // Rule files assume cleaned tokens, which are lowercase.
        let token = word.trim().to_lowercase();
        if token.is_empty() {
            return Err(Error::Validation("cannot stem an empty word".into()));
        }
        if args.trace {
            println!("{token}");
            for step in ruleset.trace(&token) {
                match &step.rule {
                    Some((suffix, repl)) if repl.is_empty() => {
                        println!("  phase {}: -{suffix} => {}", step.phase, step.output)
                    }
                    Some((suffix, repl)) => println!(
                        "  phase {}: -{suffix} +{repl} => {}",
                        step.phase, step.output
                    ),
                    None => println!("  phase {}: (no rule) => {}", step.phase, step.output),
                }
            }
        } else {
            println!("{}", ruleset.stem(&token));
        }
    }
    Ok(())
}

fn cmd_thesaurus_check(args: ThesaurusCheckArgs) -> Result<()> {
    let thesaurus = parse_thesaurus(&args.path)?;
    if thesaurus.skipped_concepts > 0 {
        eprintln!(
            "warning: {} concept record(s) skipped for missing an id or preferred label",
            thesaurus.skipped_concepts
        );
    }
    println!(
        "{} concepts, {} labels, {} skipped",
        thesaurus.concept_count(),
        thesaurus.label_count(),
        thesaurus.skipped_concepts
    );
    Ok(())
}
