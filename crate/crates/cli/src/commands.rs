use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};

use episodic_core::augment::{
    ingest_raw, load_segments, run_pipeline, write_provenance, AugmentError, BiographySegment,
};
use episodic_core::config::{creation_time, AppConfig, LlmConfig};
use episodic_core::eval::{emit_report, parse_queries, run_comparison, ReportFormat};
use episodic_core::fixture;
use episodic_core::memory::{load_store, save_store, IngestOptions, MemoryStore, StoreMetadata};
use episodic_core::persona::{
    ChatSession, PersonaError, PersonaMode, PersonaProfile, StoreKind, Stores,
};
use episodic_core::ranking::{retrieve, RetrievalExplanation, RetrievalParams};
use episodic_service::{AppState, ServiceOptions};

use crate::{Cli, Command, Failure, FormatArg, RetrievalArgs};

type Outcome<T = ()> = Result<T, Failure>;

fn user(e: impl Into<anyhow::Error>) -> Failure {
    Failure::User(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

fn augment_failure(e: AugmentError) -> Failure {
    match e {
        AugmentError::EmptyCorpus | AugmentError::InvalidSegment { .. } | AugmentError::Io(_) => {
            user(e)
        }
        other => internal(other),
    }
}

fn persona_failure(e: PersonaError) -> Failure {
    match e {
        PersonaError::Llm(_) => internal(e),
        PersonaError::Retrieval(ref r) if r.code().starts_with("provider") => internal(e),
        other => user(other),
    }
}

fn load_config(cli: &Cli) -> Outcome<AppConfig> {
    let mut config = match &cli.config {
        Some(path) => AppConfig::load(path).map_err(user)?,
        None => AppConfig::default(),
    };
    if let Some(script) = &cli.stub {
        config.llm = LlmConfig::Stub {
            script: Some(script.clone()),
            reply: None,
        };
    }
    Ok(config)
}

/// `fixture`, `fixture-raw`, or a store file.
fn open_store(spec: &str) -> Outcome<MemoryStore> {
    match spec {
        fixture::STORE_ID => Ok(fixture::augmented_store()),
        fixture::RAW_STORE_ID => Ok(fixture::raw_store()),
        path => load_store(path)
            .with_context(|| format!("loading store {path}"))
            .map_err(user),
    }
}

fn load_profile(path: Option<&Path>, config: &AppConfig) -> Outcome<PersonaProfile> {
    let Some(path) = path else {
        return Ok(config.profile());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading profile {}", path.display()))
        .map_err(user)?;
    let profile: PersonaProfile = serde_json::from_str(&text)
        .with_context(|| format!("parsing profile {}", path.display()))
        .map_err(user)?;
    profile.validate().map_err(user)?;
    Ok(profile)
}

fn params(config: &AppConfig, args: &RetrievalArgs) -> Outcome<RetrievalParams> {
    let mut p = config.retrieval.clone();
    if let Some(n) = args.max_entries {
        p.max_entries = n;
    }
    if let Some(t) = args.threshold {
        p.similarity_threshold = t;
    }
    if let Some(e) = args.expansion {
        p.expansion = e.into();
    }
    p.factor_toggles.use_emotional &= !args.no_emotional;
    p.factor_toggles.use_spatial &= !args.no_spatial;
    p.factor_toggles.use_temporal &= !args.no_temporal;
    p.factor_toggles.use_relevance |= args.relevance;
    p.validate().map_err(user)?;
    Ok(p)
}

fn read_corpus(path: &Path) -> Outcome<Vec<BiographySegment>> {
    let segments = load_segments(path).map_err(|e| match e {
        AugmentError::Io(io) => user(anyhow!(io).context(format!("reading {}", path.display()))),
        other => augment_failure(other),
    })?;
    if segments.is_empty() {
        return Err(augment_failure(AugmentError::EmptyCorpus));
    }
    Ok(segments)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(user)
}

fn print_json(value: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("output serializes")
    );
}

pub fn run(cli: Cli) -> Outcome {
    let config = load_config(&cli)?;
    let json = cli.json;
    match cli.command {
        Command::Augment {
            corpus,
            out,
            provenance,
        } => augment(&config, &corpus, &out, provenance.as_deref(), json),
        Command::IngestRaw { corpus, out } => ingest(&config, &corpus, &out, json),
        Command::Query {
            store,
            text,
            retrieval,
        } => query(&config, &store, &text, &retrieval, json),
        Command::Chat {
            mode,
            store,
            profile,
            transcript,
            retrieval,
        } => chat(
            &config,
            mode.into(),
            store.as_deref(),
            profile.as_deref(),
            transcript.as_deref(),
            &retrieval,
            json,
        ),
        Command::Eval {
            queries,
            mode_matrix: _,
            store,
            raw_store,
            profile,
            format,
            timings,
            out,
            retrieval,
        } => {
            let format = match format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Markdown if json && out.is_none() => ReportFormat::Json,
                FormatArg::Markdown => ReportFormat::Markdown,
            };
            eval(
                &config,
                EvalArgs {
                    queries: &queries,
                    store: &store,
                    raw_store: &raw_store,
                    profile: profile.as_deref(),
                    format,
                    timings,
                    out: out.as_deref(),
                    retrieval: &retrieval,
                },
                json,
            )
        }
        Command::Serve {
            port,
            host,
            store_dir,
            no_fixture,
        } => serve(config, &host, port, store_dir, !no_fixture, json),
    }
}

fn metadata(source: &Path, stub: bool) -> StoreMetadata {
    StoreMetadata {
        created_at: creation_time(stub),
        source: source
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| source.display().to_string()),
    }
}

fn augment(
    config: &AppConfig,
    corpus: &Path,
    out: &Path,
    provenance: Option<&Path>,
    json: bool,
) -> Outcome {
    let segments = read_corpus(corpus)?;
    let llm = config.chat_provider().map_err(user)?;
    let embedder = config.embedder().map_err(user)?;
    let pipeline = config
        .pipeline_config(metadata(corpus, config.uses_stub()))
        .map_err(user)?;
    let output = run_pipeline(&segments, &*llm, &*embedder, &pipeline).map_err(augment_failure)?;
    save_store(&output.store, out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(user)?;
    if let Some(path) = provenance {
        let mut buf = Vec::new();
        write_provenance(&output.provenance, &mut buf).map_err(internal)?;
        std::fs::write(path, buf)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(user)?;
    }
    if json {
        print_json(&serde_json::json!({
            "out": out,
            "segments": segments.len(),
            "records": output.store.len(),
            "failures": output.failures,
        }));
    } else {
        println!(
            "{} records from {} segments written to {}",
            output.store.len(),
            segments.len(),
            out.display()
        );
        for f in &output.failures {
            println!("  dropped: {f}");
        }
    }
    Ok(())
}

fn ingest(config: &AppConfig, corpus: &Path, out: &Path, json: bool) -> Outcome {
    let segments = read_corpus(corpus)?;
    let embedder = config.embedder().map_err(user)?;
    let store = ingest_raw(
        &segments,
        &*embedder,
        IngestOptions {
            k: config.k,
            dimension: Some(embedder.dimension()),
            metadata: metadata(corpus, config.uses_stub()),
        },
    )
    .map_err(augment_failure)?;
    save_store(&store, out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(user)?;
    if json {
        print_json(&serde_json::json!({ "out": out, "records": store.len() }));
    } else {
        println!("{} raw records written to {}", store.len(), out.display());
    }
    Ok(())
}

fn print_explanation(ex: &RetrievalExplanation) {
    if ex.no_entry_point {
        println!("no memory meets the similarity threshold");
        return;
    }
    println!(
        "{:>4}  {:<28} {:>8} {:>8} {:>6} {:>6} {:>6} {:>6}",
        "rank", "id", "score", "cosine", "emo", "place", "time", "rel"
    );
    for c in &ex.candidates {
        println!(
            "{:>4}  {:<28} {:>8.4} {:>8.4} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            c.rank,
            c.record_id,
            c.compound_score,
            c.cosine,
            c.emotional_factor,
            c.spatial_factor,
            c.temporal_factor,
            c.relevance_factor
        );
    }
}

fn query(config: &AppConfig, store: &str, text: &str, args: &RetrievalArgs, json: bool) -> Outcome {
    let params = params(config, args)?;
    let store = open_store(store)?;
    let embedder = config.embedder().map_err(user)?;
    let ex = retrieve(text, &store, &params, &*embedder).map_err(|e| {
        if e.code().starts_with("provider") || e.code() == "bad_response" {
            internal(e)
        } else {
            user(e)
        }
    })?;
    if json {
        print_json(&ex);
    } else {
        print_explanation(&ex);
    }
    Ok(())
}

fn chat(
    config: &AppConfig,
    mode: PersonaMode,
    store: Option<&str>,
    profile: Option<&Path>,
    transcript: Option<&Path>,
    args: &RetrievalArgs,
    json: bool,
) -> Outcome {
    let profile = load_profile(profile, config)?;
    let params = params(config, args)?;
    let loaded = match mode.store_kind() {
        None => None,
        Some(kind) => {
            let default = match kind {
                StoreKind::Raw => fixture::RAW_STORE_ID,
                StoreKind::Augmented => fixture::STORE_ID,
            };
            Some((kind, open_store(store.unwrap_or(default))?))
        }
    };
    let stores = match &loaded {
        Some((StoreKind::Raw, s)) => Stores {
            raw: Some(s),
            augmented: None,
        },
        Some((StoreKind::Augmented, s)) => Stores {
            raw: None,
            augmented: Some(s),
        },
        None => Stores::default(),
    };
    let llm = config.chat_provider().map_err(user)?;
    let embedder = config.embedder().map_err(user)?;
    let mut session = ChatSession::new("cli", profile, mode, params).map_err(persona_failure)?;

    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let mut failed_turns = 0;
    for line in stdin.lock().lines() {
        let line = line.map_err(internal)?;
        let text = line.trim();
        match text {
            "" => continue,
            ":quit" | ":exit" => break,
            ":explain" => {
                match session.explain_last() {
                    Ok(ex) if json => {
                        println!("{}", serde_json::to_string(ex).expect("serializes"))
                    }
                    Ok(ex) => print_explanation(ex),
                    Err(e) => eprintln!("{e}"),
                }
                continue;
            }
            _ => {}
        }
        match session.answer(text, stores, &*llm, &*embedder) {
            Ok(answer) if json => println!(
                "{}",
                serde_json::json!({
                    "text": answer.text,
                    "no_entry_point": answer.no_entry_point,
                    "included_scene_ids": answer.context.included_scene_ids,
                    "explanation": answer.explanation,
                })
            ),
            Ok(answer) => {
                println!("{}: {}", session.profile.name, answer.text);
                if answer.no_entry_point {
                    println!("  (no memory met the similarity threshold)");
                }
            }
            Err(e) => {
                failed_turns += 1;
                eprintln!("turn failed, nothing recorded: {e}");
            }
        }
        stdout.flush().map_err(internal)?;
    }
    if let Some(path) = transcript {
        write_file(path, &session.transcript_json())?;
    }
    if failed_turns > 0 {
        return Err(internal(anyhow!("{failed_turns} turn(s) failed")));
    }
    Ok(())
}

struct EvalArgs<'a> {
    queries: &'a Path,
    store: &'a str,
    raw_store: &'a str,
    profile: Option<&'a Path>,
    format: ReportFormat,
    timings: bool,
    out: Option<&'a Path>,
    retrieval: &'a RetrievalArgs,
}

fn eval(config: &AppConfig, args: EvalArgs<'_>, json: bool) -> Outcome {
    let text = std::fs::read_to_string(args.queries)
        .with_context(|| format!("reading {}", args.queries.display()))
        .map_err(user)?;
    let queries = parse_queries(&text);
    if queries.is_empty() {
        return Err(user(anyhow!("{} has no queries", args.queries.display())));
    }
    let params = params(config, args.retrieval)?;
    let profile = load_profile(args.profile, config)?;
    let augmented = open_store(args.store)?;
    let raw = open_store(args.raw_store)?;
    let llm = config.chat_provider().map_err(user)?;
    let embedder = config.embedder().map_err(user)?;
    let stores = Stores {
        raw: Some(&raw),
        augmented: Some(&augmented),
    };
    let report = run_comparison(&queries, stores, &*llm, &*embedder, &profile, &params)
        .map_err(persona_failure)?;
    let rendered = emit_report(&report, args.format, args.timings);
    match args.out {
        Some(path) => {
            write_file(path, &rendered)?;
            let errors = report.rows.iter().filter(|r| r.error.is_some()).count();
            if json {
                print_json(&serde_json::json!({
                    "out": path,
                    "rows": report.rows.len(),
                    "errors": errors,
                }));
            } else {
                println!(
                    "{} rows ({} with errors) written to {}",
                    report.rows.len(),
                    errors,
                    path.display()
                );
            }
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn serve(
    config: AppConfig,
    host: &str,
    port: u16,
    store_dir: Option<PathBuf>,
    preload_fixture: bool,
    json: bool,
) -> Outcome {
    let state = AppState::new(ServiceOptions {
        config,
        store_dir,
        preload_fixture,
        created_at: None,
    })
    .map_err(user)?;
    let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))
            .map_err(user)?;
        let addr = listener.local_addr().map_err(internal)?;
        if json {
            println!(
                "{}",
                serde_json::json!({ "listening": format!("http://{addr}") })
            );
        } else {
            println!("listening on http://{addr}");
        }
        tracing::info!(%addr, "serving");
        tokio::select! {
            served = episodic_service::serve(listener, Arc::new(state)) => served.map_err(internal),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}
