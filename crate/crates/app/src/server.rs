//! JSON HTTP API over an immutable [`QueryService`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use conditor_core::index::DEFAULT_K;
use conditor_core::topicmap::Endpoint;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::graph::graph_export;
use crate::query::QueryService;

pub const DEFAULT_GRAPH_DEPTH: usize = 2;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

#[derive(Deserialize)]
struct SearchParams {
    q: Option<String>,
    k: Option<String>,
}

#[derive(Deserialize)]
struct GraphParams {
    root: Option<String>,
    depth: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DateFactJson {
    role: String,
    location: Option<String>,
    day: Option<u8>,
    month: Option<u8>,
    year: u32,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OccurrenceJson {
    role_spec: String,
    resource_data: String,
}

#[derive(Serialize)]
struct AssociationJson {
    source: u64,
    target: Option<u64>,
    role: String,
    direction: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TopicJson {
    id: u64,
    base_name: String,
    variants: Vec<String>,
    instance_of: u64,
    shortdesc: String,
    body: String,
    date_facts: Vec<DateFactJson>,
    occurrences: Vec<OccurrenceJson>,
    associations: Vec<AssociationJson>,
}

fn parse_positive(name: &str, value: Option<&str>, default: usize, allow_zero: bool) -> Result<usize, ApiError> {
    match value {
        None => Ok(default),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 || allow_zero => Ok(n),
            _ => Err(ApiError::bad_request(format!("invalid {name}: {v:?}"))),
        },
    }
}

async fn search(State(svc): State<Arc<QueryService>>, Query(p): Query<SearchParams>) -> Result<Response, ApiError> {
    let q = p.q.as_deref().filter(|q| !q.trim().is_empty()).ok_or_else(|| ApiError::bad_request("missing q"))?;
    let k = parse_positive("k", p.k.as_deref(), DEFAULT_K, false)?;
    let hits = svc.search(q, k).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(hits).into_response())
}

async fn topic(State(svc): State<Arc<QueryService>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id: u64 = id.parse().map_err(|_| ApiError::bad_request(format!("invalid topic id {id:?}")))?;
    let t = svc.map.topics.get(&id).ok_or_else(|| ApiError::not_found(format!("topic {id} not found")))?;
    let body = TopicJson {
        id: t.id,
        base_name: t.base_name.clone(),
        variants: t.variants.clone(),
        instance_of: t.instance_of,
        shortdesc: t.shortdesc.clone(),
        body: t.body.clone(),
        date_facts: t
            .date_facts
            .iter()
            .map(|d| DateFactJson {
                role: d.role.clone(),
                location: d.location.clone(),
                day: d.day,
                month: d.month,
                year: d.year,
            })
            .collect(),
        occurrences: t
            .occurrences
            .iter()
            .map(|o| OccurrenceJson {
                role_spec: o.role_spec.clone(),
                resource_data: o.resource_data.clone(),
            })
            .collect(),
        associations: svc
            .map
            .adjacent(id)
            .map(|a| AssociationJson {
                source: a.source,
                target: match a.target {
                    Endpoint::Topic(t) => Some(t),
                    Endpoint::Unresolved(_) => None,
                },
                role: a.role.clone(),
                direction: a.directionality.as_str().to_string(),
            })
            .collect(),
    };
    Ok(Json(body).into_response())
}

async fn graph(State(svc): State<Arc<QueryService>>, Query(p): Query<GraphParams>) -> Result<Response, ApiError> {
    let root = p.root.as_deref().ok_or_else(|| ApiError::bad_request("missing root"))?;
    let root: u64 = root.parse().map_err(|_| ApiError::bad_request(format!("invalid root {root:?}")))?;
    let depth = parse_positive("depth", p.depth.as_deref(), DEFAULT_GRAPH_DEPTH, true)?;
    let export = graph_export(&svc.map, root, depth).ok_or_else(|| ApiError::not_found(format!("topic {root} not found")))?;
    Ok(Json(export).into_response())
}

pub fn router(svc: Arc<QueryService>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/search", get(search))
        .route("/api/topic/{id}", get(topic))
        .route("/api/graph", get(graph))
        .with_state(svc);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Bind and serve until the process is stopped. The bound address is printed
/// on stdout once listening, so port 0 can be used.
pub async fn serve(svc: QueryService, addr: SocketAddr, static_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    println!("listening on http://{local}");
    tracing::info!(%local, "serving");
    axum::serve(listener, router(Arc::new(svc), static_dir)).await?;
    Ok(())
}
