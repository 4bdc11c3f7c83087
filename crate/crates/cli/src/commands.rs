// SPDX-License-Identifier: MIT OR Apache-2.0

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use tokio::task::JoinSet;
use tracing::warn;

use lancet_client::LancetClient;
use lancet_core::config::RunConfig;
use lancet_core::mining::{ChatRequest, EditTask};
use lancet_core::store::{
    load_dictionary, read_dataset, read_matrix, save_dictionary, write_atomic_json, write_dataset,
    write_matrix, ConceptDataset,
};
use lancet_core::wire::{
    BuildDictionaryRequest, DecomposeRequest, ReportRequest, SweepRequest, TransplantRequest,
    VecAddRequest,
};
use lancet_core::{
    null_concept, ConceptDictionary, ConceptVector, Decomposition, DenseMatrix, EditRequest, Error,
    LatentSpaceTag, ReadMethod, NULL_CONCEPT,
};
use lancet_service::AppState;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::output::Rendered;

pub struct Ctx {
    pub cfg: RunConfig,
    pub dry_run: bool,
    pub strict: bool,
    server: Option<String>,
    client: Option<LancetClient>,
}

impl Ctx {
    pub fn new(cfg: RunConfig, global: &Global) -> Self {
        Self {
            cfg,
            dry_run: global.dry_run,
            strict: global.strict,
            server: global.server.clone(),
            client: None,
        }
    }

    /// Client for `--server`, or for a service started in this process.
    async fn client(&mut self) -> CliResult<LancetClient> {
        if let Some(c) = &self.client {
            return Ok(c.clone());
        }
        let base = match &self.server {
            Some(url) => url.clone(),
            None => {
                let state = AppState::from_config(&self.cfg)?;
                let (addr, _task) = lancet_service::spawn(SocketAddr::from(([127, 0, 0, 1], 0)), state)
                    .await
                    .map_err(|e| Error::Transport(format!("cannot start the local service: {e}")))?;
                format!("http://{addr}")
            }
        };
        let client = LancetClient::new(base)?;
        self.client = Some(client.clone());
        Ok(client)
    }

    fn emit(&self, r: &Rendered) -> CliResult<()> {
        let stdout = std::io::stdout();
        r.write(self.cfg.output, stdout.lock())
            .map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })?;
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::SchemaViolation(format!("{}: {e}", path.display())).into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    Ok(write_atomic_json(path, value)?)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn required(path: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    path.or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("no {what} given on the command line or in the config")))
}

/// File-name-safe rendering of a concept name.
fn file_stem(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "concept".into()
    } else {
        s
    }
}

fn would_send(requests: &[ChatRequest]) -> Rendered {
    Rendered::new(json!({ "dry_run": true, "requests": requests }), &["index", "model", "has_image", "prompt"])
        .rows(requests.iter().enumerate().map(|(i, r)| {
            [
                i.to_string(),
                r.model.clone(),
                r.has_image().to_string(),
                r.prompt_text().to_string(),
            ]
        }))
}

pub async fn concepts(ctx: &mut Ctx, cmd: ConceptsCommand) -> CliResult<()> {
    match cmd {
        ConceptsCommand::Parse(args) => {
            let task: EditTask = read_json(&args.task)?;
            let reply = ctx.client().await?.parse_concepts(&task, ctx.dry_run).await?;
            if ctx.dry_run {
                return ctx.emit(&would_send(&reply.would_send));
            }
            let list = reply.result.ok_or_else(|| Error::MalformedResponse("reply has no concept list".into()))?;
            if let Some(out) = &args.out {
                write_json(out, &list)?;
            }
            let r = Rendered::new(&list, &["index", "concept"])
                .rows(list.concepts.iter().enumerate().map(|(i, c)| [i.to_string(), c.clone()]));
            ctx.emit(&r)
        }
        ConceptsCommand::Rewrite(args) => {
            let task: EditTask = read_json(&args.task)?;
            let reply = ctx.client().await?.rewrite_task(&task, ctx.dry_run).await?;
            if ctx.dry_run {
                return ctx.emit(&would_send(&reply.would_send));
            }
            let task = reply.result.ok_or_else(|| Error::MalformedResponse("reply has no task".into()))?;
            if let Some(out) = &args.out {
                write_json(out, &task)?;
            }
            ctx.emit(&Rendered::fields(&task))
        }
    }
}

/// A JSON list, a `{"concepts": [...]}` object, or one name per line.
fn read_concept_names(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Names {
        List(Vec<String>),
        Object { concepts: Vec<String> },
    }
    let names = match serde_json::from_str::<Names>(&text) {
        Ok(Names::List(v)) | Ok(Names::Object { concepts: v }) => v,
        Err(_) if !text.trim_start().starts_with(['[', '{']) => text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        Err(e) => return Err(Error::SchemaViolation(format!("{}: {e}", path.display())).into()),
    };
    if names.is_empty() {
        return Err(Error::EmptyInput("concept list").into());
    }
    Ok(names)
}

pub async fn stimuli(ctx: &mut Ctx, cmd: StimuliCommand) -> CliResult<()> {
    let StimuliCommand::Gen(args) = cmd;
    let names = read_concept_names(&args.concepts)?;
    let out = if ctx.dry_run {
        None
    } else {
        Some(required(args.out, &ctx.cfg.paths.dataset, "dataset output path")?)
    };
    let reply = ctx.client().await?.stimuli(&names, ctx.dry_run).await?;
    if ctx.dry_run {
        return ctx.emit(&would_send(&reply.would_send));
    }
    let dataset = reply.result.ok_or_else(|| Error::MalformedResponse("reply has no dataset".into()))?;
    let out = out.expect("set unless dry run");
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_dataset(&dataset, &out)?;
    let r = Rendered::new(
        json!({
            "dataset": out,
            "concepts": dataset.records.len(),
            "stimuli": dataset.stimulus_count(),
        }),
        &["concept", "stimuli"],
    )
    .rows(dataset.records.iter().map(|c| [c.name.clone(), c.stimuli.len().to_string()]));
    ctx.emit(&r)
}

fn load_dataset(ctx: &Ctx, path: Option<PathBuf>) -> CliResult<ConceptDataset> {
    let path = required(path, &ctx.cfg.paths.dataset, "dataset")?;
    Ok(read_dataset(path)?)
}

pub async fn embed(ctx: &mut Ctx, args: EmbedArgs) -> CliResult<()> {
    let dataset = load_dataset(ctx, args.dataset)?;
    if ctx.dry_run {
        let plan: Vec<_> = dataset
            .records
            .iter()
            .map(|c| json!({ "concept": c.name, "texts": c.stimuli }))
            .collect();
        let r = Rendered::new(
            json!({
                "dry_run": true,
                "encoder": ctx.cfg.embedding.encoder,
                "model": ctx.cfg.embedding.client.model_name,
                "requests": plan,
            }),
            &["concept", "texts"],
        )
        .rows(dataset.records.iter().map(|c| [c.name.clone(), c.stimuli.len().to_string()]));
        return ctx.emit(&r);
    }
    let out_dir = required(args.out_dir, &ctx.cfg.paths.matrices_dir, "matrices directory")?;
    create_dir(&out_dir)?;
    let client = ctx.client().await?;
    let mut jobs = JoinSet::new();
    for (i, c) in dataset.records.iter().enumerate() {
        let client = client.clone();
        let texts = c.stimuli.clone();
        jobs.spawn(async move { (i, client.embed(&texts).await) });
    }
    let mut replies = vec![None; dataset.records.len()];
    while let Some(joined) = jobs.join_next().await {
        let (i, reply) = joined.map_err(|e| Error::Transport(format!("embedding task failed: {e}")))?;
        replies[i] = Some(reply?);
    }
    let mut rows = Vec::new();
    let mut model = String::new();
    for (i, (c, reply)) in dataset.records.iter().zip(replies).enumerate() {
        let reply = reply.expect("every job joined");
        let m = DenseMatrix::try_from(&reply.matrix)?;
        let path = out_dir.join(format!("{i:03}_{}.clan", file_stem(&c.name)));
        write_matrix(&m, &path)?;
        rows.push(json!({
            "concept": c.name,
            "rows": m.rows(),
            "cols": m.cols(),
            "file": path,
        }));
        model = reply.model;
    }
    let table: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r["concept"].as_str().unwrap_or_default().to_string(),
                r["rows"].to_string(),
                r["cols"].to_string(),
                r["file"].as_str().unwrap_or_default().to_string(),
            ]
        })
        .collect();
    let r = Rendered::new(json!({ "model": model, "matrices": rows }), &["concept", "rows", "cols", "file"])
        .rows(table);
    ctx.emit(&r)
}

pub async fn dict(ctx: &mut Ctx, cmd: DictCommand) -> CliResult<()> {
    let DictCommand::Build(args) = cmd;
    no_dry_run(ctx)?;
    let dataset = load_dataset(ctx, args.dataset)?;
    let req = BuildDictionaryRequest {
        dataset,
        method: ctx.cfg.read_method,
        normalize: ctx.cfg.normalize,
        space: ctx.cfg.space,
        order: args.order,
        include_null: args.null,
    };
    let reply = ctx.client().await?.build_dictionary(&req).await?;
    let dict = ConceptDictionary::try_from(&reply.dictionary)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let manifest = save_dictionary(&dict, &args.out)?;
    let r = Rendered::new(
        json!({
            "id": reply.id,
            "manifest": args.out,
            "matrix_file": manifest.matrix_file,
            "concepts": dict.names(),
            "dim": dict.dim(),
            "method": req.method,
            "normalized": dict.is_normalized(),
        }),
        &["index", "concept", "read_method"],
    )
    .rows(
        dict.names()
            .iter()
            .zip(dict.read_methods())
            .enumerate()
            .map(|(i, (n, m))| [i.to_string(), n.clone(), m.to_string()]),
    );
    ctx.emit(&r)
}

fn no_dry_run(ctx: &Ctx) -> CliResult<()> {
    if ctx.dry_run {
        return Err(CliError::Usage(
            "--dry-run applies to the concepts, stimuli and embed commands".into(),
        ));
    }
    Ok(())
}

/// Loads a dictionary from disk and registers it with the service.
async fn registered(ctx: &mut Ctx, manifest: &Path) -> CliResult<(ConceptDictionary, String)> {
    let dict = load_dictionary(manifest)?;
    let reg = ctx.client().await?.register_dictionary(&dict).await?;
    Ok((dict, reg.id))
}

pub async fn decompose(ctx: &mut Ctx, args: DecomposeArgs) -> CliResult<()> {
    no_dry_run(ctx)?;
    let (dict, id) = registered(ctx, &args.dict).await?;
    let source = read_matrix(&args.source)?.into_vec();
    let req = DecomposeRequest {
        dictionary_id: id,
        source,
        solver: ctx.cfg.solver,
        report_k: Some(ctx.cfg.report_k),
    };
    let reply = ctx.client().await?.decompose(&req).await?;
    eprintln!("solve time: {:.6} s", reply.solve_seconds);
    let dec = &reply.decomposition;
    if let Some(out) = &args.out {
        write_json(out, dec)?;
    }
    let weights: Vec<_> = dec
        .names
        .iter()
        .zip(&dec.weights)
        .map(|(n, w)| json!({ "concept": n, "weight": w }))
        .collect();
    let r = Rendered::new(
        json!({
            "dictionary_id": dec.dictionary_id,
            "concepts": dict.len(),
            "weights": weights,
            "residual_norm": reply.residual_norm,
            "converged": dec.stats.converged,
            "sweeps_used": dec.stats.sweeps_used,
            "objective": dec.stats.objective,
            "lambda": dec.stats.lambda,
            "rho": dec.stats.rho,
            "solve_seconds": reply.solve_seconds,
            "report": reply.report,
            "out": args.out,
        }),
        &["concept", "weight"],
    )
    .rows(dec.names.iter().zip(&dec.weights).map(|(n, w)| [n.clone(), w.to_string()]));
    ctx.emit(&r)?;
    if ctx.strict && !dec.stats.converged {
        return Err(CliError::NotConverged {
            sweeps: dec.stats.sweeps_used,
        });
    }
    Ok(())
}

fn vector_from_file(path: &Path, name: &str, space: LatentSpaceTag) -> CliResult<ConceptVector> {
    Ok(ConceptVector {
        name: name.to_string(),
        vector: read_matrix(path)?.into_vec(),
        read_method: ReadMethod::Avg,
        space,
    })
}

/// A named concept from `dict`, else from the dictionary at `fallback`.
fn lookup_concept(dict: &ConceptDictionary, fallback: Option<&Path>, name: &str) -> CliResult<ConceptVector> {
    if let Some(j) = dict.index_of(name) {
        return Ok(dict.concept_vector(j));
    }
    if let Some(path) = fallback {
        let other = load_dictionary(path)?;
        if let Some(j) = other.index_of(name) {
            return Ok(other.concept_vector(j));
        }
    }
    Err(Error::UnknownConcept(name.to_string()).into())
}

fn edit_request(dict: &ConceptDictionary, kind: Kind, source: &str, t: &TargetArgs) -> CliResult<EditRequest> {
    let space = dict.space();
    if kind == Kind::Remove {
        let null = match (&t.null_vector, dict.index_of(NULL_CONCEPT)) {
            (Some(path), _) => null_concept(space, &read_matrix(path)?.into_vec())?,
            (None, Some(j)) => dict.concept_vector(j),
            (None, None) => {
                warn!("no null-concept vector available; removing toward the zero vector");
                null_concept(space, &vec![0.0; dict.dim()])?
            }
        };
        return Ok(EditRequest::remove(source, null));
    }
    let name = t
        .target_concept
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("--target-concept is required for {kind:?} edits")))?;
    let target = match &t.target_vector {
        Some(path) => vector_from_file(path, name, space)?,
        None => {
            // prefer the dedicated target dictionary over a same-named atom
            let from_target = t
                .target_dict
                .as_deref()
                .map(load_dictionary)
                .transpose()?
                .and_then(|d| d.index_of(name).map(|j| d.concept_vector(j)));
            match from_target {
                Some(v) => v,
                None => lookup_concept(dict, None, name)?,
            }
        }
    };
    Ok(match kind {
        Kind::Replace => EditRequest::replace(source, target),
        Kind::Add => EditRequest::add(source, target),
        Kind::Remove => unreachable!("handled above"),
    })
}

fn latent_matrix(space: LatentSpaceTag, v: Vec<f32>) -> CliResult<DenseMatrix> {
    Ok(DenseMatrix::new(space.seq_len, space.token_dim, v)?)
}

pub async fn edit(ctx: &mut Ctx, args: EditArgs) -> CliResult<()> {
    no_dry_run(ctx)?;
    let (dict, id) = registered(ctx, &args.dict).await?;
    let decomposition: Decomposition = read_json(&args.decomp)?;
    let edit = edit_request(&dict, args.kind, &args.source_concept, &args.target)?;
    let req = TransplantRequest {
        dictionary_id: id,
        decomposition,
        edit,
    };
    let out = ctx.client().await?.transplant(&req).await?;
    if let Some(w) = &out.warning {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_matrix(&latent_matrix(dict.space(), out.vector)?, &args.out)?;
    ctx.emit(&Rendered::fields(json!({
        "kind": req.edit.kind,
        "source_concept": req.edit.source_concept,
        "target_concept": req.edit.target_concept,
        "source_weight": out.source_weight,
        "warning": out.warning,
        "out": args.out,
    })))
}

pub async fn sweep(ctx: &mut Ctx, args: SweepArgs) -> CliResult<()> {
    no_dry_run(ctx)?;
    let (dict, id) = registered(ctx, &args.dict).await?;
    let decomposition: Decomposition = read_json(&args.decomp)?;
    let edit = edit_request(&dict, args.kind, &args.source_concept, &args.target)?;
    let req = SweepRequest {
        dictionary_id: id,
        decomposition,
        edit,
        grid: args.grid,
    };
    let reply = ctx.client().await?.sweep(&req).await?;
    create_dir(&args.out_dir)?;
    let mut files = Vec::new();
    for (i, v) in reply.vectors.into_iter().enumerate() {
        let path = args.out_dir.join(format!("sweep_{i:03}.clan"));
        write_matrix(&latent_matrix(dict.space(), v)?, &path)?;
        files.push(path);
    }
    let r = Rendered::new(
        json!({
            "source_concept": req.edit.source_concept,
            "target_concept": req.edit.target_concept,
            "grid": reply.grid,
            "files": files,
        }),
        &["index", "strength", "file"],
    )
    .rows(
        reply
            .grid
            .iter()
            .zip(&files)
            .enumerate()
            .map(|(i, (a, f))| [i.to_string(), a.to_string(), f.display().to_string()]),
    );
    ctx.emit(&r)
}

pub async fn report(ctx: &mut Ctx, args: ReportArgs) -> CliResult<()> {
    no_dry_run(ctx)?;
    let dec: Decomposition = read_json(&args.decomp)?;
    let req = ReportRequest {
        names: dec.names,
        weights: dec.weights,
        k: ctx.cfg.report_k,
    };
    let report = ctx.client().await?.report(&req).await?;
    let r = Rendered::new(&report, &["rank", "concept", "coefficient", "magnitude"]).rows(
        report.entries.iter().enumerate().map(|(i, e)| {
            [
                (i + 1).to_string(),
                e.concept.clone(),
                e.coefficient.to_string(),
                e.magnitude.to_string(),
            ]
        }),
    );
    ctx.emit(&r)
}

pub async fn vec_add(ctx: &mut Ctx, args: VecAddArgs) -> CliResult<()> {
    no_dry_run(ctx)?;
    let dict = load_dictionary(&args.dict)?;
    let source = read_matrix(&args.source)?;
    let (rows, cols) = (source.rows(), source.cols());
    let toward = lookup_concept(&dict, args.target_dict.as_deref(), &args.toward)?;
    let away_from = lookup_concept(&dict, args.target_dict.as_deref(), &args.away_from)?;
    let req = VecAddRequest {
        source: source.into_vec(),
        toward,
        away_from,
        strength: args.strength,
    };
    let reply = ctx.client().await?.vec_add(&req).await?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_matrix(&DenseMatrix::new(rows, cols, reply.vector)?, &args.out)?;
    ctx.emit(&Rendered::fields(json!({
        "toward": args.toward,
        "away_from": args.away_from,
        "strength": args.strength,
        "out": args.out,
    })))
}

pub async fn serve(ctx: &mut Ctx, args: ServeArgs) -> CliResult<()> {
    no_dry_run(ctx)?;
    let state = AppState::from_config(&ctx.cfg)?;
    let listener = tokio::net::TcpListener::bind(args.bind)
        .await
        .map_err(|e| Error::Transport(format!("cannot bind {}: {e}", args.bind)))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::Transport(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    lancet_service::serve(listener, state)
        .await
        .map_err(|e| Error::Transport(format!("service stopped: {e}")).into())
}
