// SPDX-License-Identifier: MIT OR Apache-2.0

use std::time::Instant;

use axum::extract::{FromRequest, Path, Request, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::task::JoinSet;

use lancet_core::mining::EditTask;
use lancet_core::store::ConceptDataset;
use lancet_core::wire::{
    BuildDictionaryRequest, DecomposeReply, DecomposeRequest, DictionaryReply, EmbedReply,
    EmbedRequest, Health, ParseReply, RegisteredDictionary, ReportRequest, RewriteReply,
    StimuliReply, StimuliRequest, SweepReply, SweepRequest, TaskRequest, TransplantRequest,
    VecAddRequest, VectorReply, WireDictionary, WireMatrix,
};
use lancet_core::{
    assemble, decompose, null_concept, rep_read, strength_sweep, top_k_report, transplant,
    vec_add, CoefficientReport, ConceptDictionary, ConceptVector, Error, LatentSpaceTag,
    TransplantOutput,
};

use crate::api_error::ApiError;
use crate::state::AppState;

type ApiResult<T> = Result<Json<T>, ApiError>;

/// JSON body whose parse failures come back as an [`ApiError`].
struct Body<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(rejection) => Err(ApiError::bad_request(rejection.body_text())),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/concepts/parse", post(parse_concepts))
        .route("/v1/concepts/rewrite", post(rewrite_task))
        .route("/v1/stimuli", post(stimuli))
        .route("/v1/embed", post(embed))
        .route("/v1/dictionaries/build", post(build_dictionary))
        .route("/v1/dictionaries", axum::routing::put(put_dictionary))
        .route("/v1/dictionaries/{id}", get(get_dictionary))
        .route("/v1/decompose", post(decompose_source))
        .route("/v1/transplant", post(transplant_edit))
        .route("/v1/sweep", post(sweep))
        .route("/v1/report", post(report))
        .route("/v1/vec_add", post(vec_add_baseline))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> lancet_core::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

fn lookup(state: &AppState, id: &str) -> Result<std::sync::Arc<ConceptDictionary>, ApiError> {
    state.dictionary(id).ok_or_else(|| ApiError::unknown_dictionary(id))
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        dictionaries: state.dictionary_count(),
        embedding_model: state.embedder().model_name().to_string(),
    })
}

fn check_task(task: &EditTask) -> Result<(), ApiError> {
    task.validate()?;
    if task.resolved_source().is_none() {
        return Err(Error::Precondition(
            "task names no source concept, explicitly or in brackets".into(),
        )
        .into());
    }
    Ok(())
}

async fn parse_concepts(
    State(state): State<AppState>,
    Body(req): Body<TaskRequest>,
) -> ApiResult<ParseReply> {
    check_task(&req.task)?;
    if req.dry_run {
        return Ok(Json(ParseReply {
            result: None,
            would_send: vec![state.vlm().parse_request(&req.task)?],
        }));
    }
    let list = state.vlm().parse_concepts(&req.task).await?;
    Ok(Json(ParseReply {
        result: Some(list),
        would_send: Vec::new(),
    }))
}

async fn rewrite_task(
    State(state): State<AppState>,
    Body(req): Body<TaskRequest>,
) -> ApiResult<RewriteReply> {
    req.task.validate()?;
    if req.dry_run {
        return Ok(Json(RewriteReply {
            result: None,
            would_send: vec![state.vlm().rewrite_request(&req.task)?],
        }));
    }
    let task = state.vlm().rewrite_for_insertion(&req.task).await?;
    Ok(Json(RewriteReply {
        result: Some(task),
        would_send: Vec::new(),
    }))
}

async fn stimuli(
    State(state): State<AppState>,
    Body(req): Body<StimuliRequest>,
) -> ApiResult<StimuliReply> {
    if req.concepts.is_empty() {
        return Err(Error::EmptyInput("no concepts to synthesize stimuli for").into());
    }
    if req.dry_run {
        let would_send = req
            .concepts
            .iter()
            .map(|c| state.llm().stimuli_request(c))
            .collect::<lancet_core::Result<_>>()?;
        return Ok(Json(StimuliReply {
            result: None,
            would_send,
        }));
    }
    let sets = state.llm().synthesize_many(&req.concepts).await?;
    let records = sets
        .into_iter()
        .map(|s| s.into_concept())
        .collect::<lancet_core::Result<Vec<_>>>()?;
    Ok(Json(StimuliReply {
        result: Some(ConceptDataset::new(records)?),
        would_send: Vec::new(),
    }))
}

async fn embed(State(state): State<AppState>, Body(req): Body<EmbedRequest>) -> ApiResult<EmbedReply> {
    let matrix = state.embedder().embed_texts(&req.texts).await?;
    Ok(Json(EmbedReply {
        model: state.embedder().model_name().to_string(),
        matrix: WireMatrix::from(&matrix),
        encoder_requests: state.embedder().request_count(),
    }))
}

async fn build_dictionary(
    State(state): State<AppState>,
    Body(req): Body<BuildDictionaryRequest>,
) -> ApiResult<DictionaryReply> {
    req.dataset.validate()?;
    let order: Vec<String> = match &req.order {
        Some(names) => names.clone(),
        None => req.dataset.records.iter().map(|c| c.name.clone()).collect(),
    };
    let mut jobs = JoinSet::new();
    for (i, name) in order.iter().enumerate() {
        let concept = req
            .dataset
            .get(name)
            .ok_or_else(|| Error::UnknownConcept(name.clone()))?;
        let texts = concept.stimuli.clone();
        let embedder = state.embedder().clone();
        jobs.spawn(async move { (i, embedder.embed_texts(&texts).await) });
    }
    let mut matrices = vec![None; order.len()];
    while let Some(joined) = jobs.join_next().await {
        let (i, m) = joined.map_err(|e| ApiError::internal(format!("embedding task failed: {e}")))?;
        matrices[i] = Some(m?);
    }
    let matrices: Vec<_> = matrices.into_iter().map(|m| m.expect("every job joined")).collect();
    let width = matrices.first().map_or(0, |m| m.cols());
    let space = req
        .space
        .or(state.space())
        .unwrap_or_else(|| LatentSpaceTag::score(width));
    let null_row = if req.include_null {
        let m = state.embedder().embed_texts(&[String::new()]).await?;
        Some(m.row(0).to_vec())
    } else {
        None
    };
    let (method, normalize) = (req.method, req.normalize);
    let dict = blocking(move || {
        let mut vectors: Vec<ConceptVector> = order
            .iter()
            .zip(&matrices)
            .map(|(name, m)| rep_read(m, method, name, space))
            .collect::<lancet_core::Result<_>>()?;
        if let Some(row) = null_row {
            vectors.push(null_concept(space, &row)?);
        }
        assemble(&vectors, normalize)
    })
    .await?;
    let (id, dict) = state.register(dict);
    Ok(Json(DictionaryReply {
        id,
        dictionary: WireDictionary::from(dict.as_ref()),
    }))
}

async fn put_dictionary(
    State(state): State<AppState>,
    Body(wire): Body<WireDictionary>,
) -> ApiResult<RegisteredDictionary> {
    let dict = ConceptDictionary::try_from(&wire)?;
    let (id, dict) = state.register(dict);
    Ok(Json(RegisteredDictionary {
        id,
        concepts: dict.len(),
        dim: dict.dim(),
    }))
}

async fn get_dictionary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<WireDictionary> {
    let dict = lookup(&state, &id)?;
    Ok(Json(WireDictionary::from(dict.as_ref())))
}

async fn decompose_source(
    State(state): State<AppState>,
    Body(req): Body<DecomposeRequest>,
) -> ApiResult<DecomposeReply> {
    let dict = lookup(&state, &req.dictionary_id)?;
    let reply = blocking(move || {
        let started = Instant::now();
        let decomposition = decompose(&req.source, &dict, &req.solver)?;
        let solve_seconds = started.elapsed().as_secs_f64();
        // the embedded report never asks for more entries than there are atoms
        let report = req
            .report_k
            .map(|k| decomposition.report(k.min(dict.len())))
            .transpose()?;
        Ok(DecomposeReply {
            residual_norm: decomposition.residual_norm(),
            decomposition,
            report,
            solve_seconds,
        })
    })
    .await?;
    Ok(Json(reply))
}

async fn transplant_edit(
    State(state): State<AppState>,
    Body(req): Body<TransplantRequest>,
) -> ApiResult<TransplantOutput> {
    let dict = lookup(&state, &req.dictionary_id)?;
    let out = blocking(move || transplant(&req.decomposition, &dict, &req.edit)).await?;
    Ok(Json(out))
}

async fn sweep(State(state): State<AppState>, Body(req): Body<SweepRequest>) -> ApiResult<SweepReply> {
    let dict = lookup(&state, &req.dictionary_id)?;
    let reply = blocking(move || {
        let vectors = strength_sweep(&req.decomposition, &dict, &req.edit, &req.grid)?;
        Ok(SweepReply {
            grid: req.grid,
            vectors,
        })
    })
    .await?;
    Ok(Json(reply))
}

async fn report(Body(req): Body<ReportRequest>) -> ApiResult<CoefficientReport> {
    Ok(Json(top_k_report(&req.names, &req.weights, req.k)?))
}

async fn vec_add_baseline(Body(req): Body<VecAddRequest>) -> ApiResult<VectorReply> {
    let vector = vec_add(&req.source, &req.toward, &req.away_from, req.strength)?;
    Ok(Json(VectorReply { vector }))
}
