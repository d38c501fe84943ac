//! JSON-over-HTTP surface for the wizard UI.

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use pipegen_core::registry::{ParameterRow, RegistryElement};
use pipegen_core::{AnalysisType, Category, StepId, TagContext};
use serde::Deserialize;
use serde_json::json;

use crate::service::{ProjectService, ServiceError};

pub fn router(service: ProjectService) -> Router {
    Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project).delete(delete_project))
        .route("/projects/{id}/steps/{step_id}", put(update_step))
        .route("/projects/{id}/reorder", post(reorder))
        .route("/projects/{id}/script", get(script))
        .route("/registry/elements", get(list_elements))
        .route("/registry/elements/{id}", get(element_detail))
        .route("/steps", get(steps))
        .with_state(service)
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, body) = match self.0 {
            ServiceError::NotFound(_) => (
                StatusCode::NOT_FOUND,
                json!({ "error": "not_found", "message": message }),
            ),
            ServiceError::RevisionConflict { current } => (
                StatusCode::CONFLICT,
                json!({ "error": "revision_conflict", "message": message, "current_revision": current }),
            ),
            ServiceError::ValidationFailed(report) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "validation_failed", "message": message, "report": report }),
            ),
            ServiceError::PathSyntax(e) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": "path_syntax", "message": message, "key": e.key, "offset": e.offset }),
            ),
            ServiceError::BadRequest(_) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": "bad_request", "message": message }),
            ),
            ServiceError::NoScript(_) => (
                StatusCode::CONFLICT,
                json!({ "error": "no_script", "message": message }),
            ),
            ServiceError::Store(e) => {
                tracing::error!(error = %e, "store failure");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    json!({ "error": "store", "message": message }),
                )
            }
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(ServiceError::BadRequest(message.into()))
}

#[derive(Deserialize)]
struct CreateBody {
    name: String,
    analysis_type: AnalysisType,
}

async fn create_project(
    State(s): State<ProjectService>,
    Json(body): Json<CreateBody>,
) -> ApiResult<Response> {
    let project = s.create(&body.name, body.analysis_type)?;
    Ok((StatusCode::CREATED, Json(project)).into_response())
}

async fn list_projects(State(s): State<ProjectService>) -> ApiResult<Response> {
    Ok(Json(s.list()?).into_response())
}

async fn get_project(
    State(s): State<ProjectService>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    Ok(Json(s.get(&id)?).into_response())
}

async fn delete_project(
    State(s): State<ProjectService>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    s.delete(&id)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

#[derive(Deserialize)]
struct StepBody {
    revision: u64,
    /// `[[key, value], ...]`, in submission order.
    #[serde(default)]
    pairs: Vec<(String, String)>,
}

async fn update_step(
    State(s): State<ProjectService>,
    Path((id, step_id)): Path<(String, String)>,
    Json(body): Json<StepBody>,
) -> ApiResult<Response> {
    let step: StepId = step_id
        .parse()
        .map_err(|e: pipegen_core::steps::UnknownStep| bad_request(e.to_string()))?;
    let result =
        tokio::task::spawn_blocking(move || s.update(&id, body.revision, step, &body.pairs))
            .await
            .expect("update task panicked")?;
    Ok(Json(result).into_response())
}

#[derive(Deserialize)]
struct ReorderBody {
    revision: u64,
    from: usize,
    to: usize,
}

async fn reorder(
    State(s): State<ProjectService>,
    Path(id): Path<String>,
    Json(body): Json<ReorderBody>,
) -> ApiResult<Response> {
    let result =
        tokio::task::spawn_blocking(move || s.reorder(&id, body.revision, body.from, body.to))
            .await
            .expect("reorder task panicked")?;
    Ok(Json(result).into_response())
}

fn download_name(project_name: &str) -> String {
    let stem: String = project_name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() {
        "pipeline.py".into()
    } else {
        format!("{stem}.py")
    }
}

async fn script(State(s): State<ProjectService>, Path(id): Path<String>) -> ApiResult<Response> {
    let (project, text) = s.script(&id)?;
    let disposition = format!("attachment; filename=\"{}\"", download_name(&project.name));
    Ok((
        [
            (
                header::CONTENT_TYPE,
                "text/x-python; charset=utf-8".to_string(),
            ),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        text,
    )
        .into_response())
}

#[derive(Deserialize)]
struct ElementQuery {
    category: Option<String>,
    /// Comma-separated context tags; without it every element is listed.
    tags: Option<String>,
}

async fn list_elements(
    State(s): State<ProjectService>,
    Query(q): Query<ElementQuery>,
) -> ApiResult<Response> {
    let reg = &s.engine().registry;
    let categories = match q.category.as_deref().filter(|c| !c.is_empty()) {
        Some(c) => {
            vec![Category::parse(c).ok_or_else(|| bad_request(format!("unknown category `{c}`")))?]
        }
        None => Category::ALL.to_vec(),
    };
    let mut out: Vec<&RegistryElement> = Vec::new();
    for category in categories {
        match &q.tags {
            Some(tags) => {
                let ctx: TagContext = tags
                    .split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .collect();
                out.extend(reg.query_elements(category, &ctx));
            }
            None => out.extend(reg.elements_in(category)),
        }
    }
    Ok(Json(out).into_response())
}

async fn element_detail(
    State(s): State<ProjectService>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let reg = &s.engine().registry;
    let element = reg
        .element(&id)
        .ok_or_else(|| ApiError(ServiceError::NotFound(id.clone())))?;
    let parameters: &[ParameterRow] = reg.parameters(&id);
    Ok(Json(json!({ "element": element, "parameters": parameters })).into_response())
}

async fn steps(State(s): State<ProjectService>) -> Json<pipegen_core::Steps> {
    Json(s.engine().steps.clone())
}
