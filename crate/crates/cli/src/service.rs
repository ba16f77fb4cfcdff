//! Annotation service: serves the current posterior and query, accepts
//! same/different answers and resamples in the background.
//!
//! Handlers only read the session or enqueue work. A single writer task runs
//! the sampling jobs one at a time and is the only code that replaces the
//! posterior.

use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use jpt_core::analysis::{align_to, hypothesis_from_tracks, Hypothesis};
use jpt_core::bed::{plan_designs, same_object_frequency, sample_posterior, write_rounds, BedConfig, MiEstimate, Posterior, RoundRecord};
use jpt_core::model::Provenance;
use jpt_core::sampler::thin;
use jpt_core::{Annotation, Design, ObsRef, Scene};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::mpsc;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bed: BedConfig,
    /// Reliability attached to human answers.
    pub human_reliability: f64,
    /// Designs kept per round for `?rank=` (skip) requests.
    pub ranked_designs: usize,
    /// Sample polylines returned per object.
    pub polylines: usize,
    /// Frames on each side of a query observation in its context window.
    pub context: usize,
}

impl ServiceConfig {
    pub fn new(bed: BedConfig) -> Self {
        Self {
            human_reliability: bed.reliability,
            bed,
            ranked_designs: 20,
            polylines: 50,
            context: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobStatus {
    pub id: usize,
    /// Round whose posterior the job produces.
    pub round: usize,
    pub state: JobState,
    pub elapsed_ms: Option<u64>,
    pub error: Option<String>,
}

struct Current {
    posterior: Posterior,
    designs: Vec<(Design, Option<MiEstimate>)>,
}

#[derive(Default)]
struct Session {
    annotations: Vec<Annotation>,
    rounds: Vec<RoundRecord>,
    current: Option<Current>,
    jobs: Vec<JobStatus>,
    pending: Option<usize>,
}

struct Job {
    id: usize,
    annotations: Vec<Annotation>,
    mi: Option<f64>,
}

pub struct AppState {
    scene: Scene,
    truth: Option<Hypothesis>,
    config: ServiceConfig,
    session: RwLock<Session>,
    jobs: mpsc::UnboundedSender<Job>,
}

/// Receiving end of the job queue; run it with [`Writer::run`].
pub struct Writer {
    state: Arc<AppState>,
    rx: mpsc::UnboundedReceiver<Job>,
}

impl AppState {
    pub fn new(scene: Scene, truth: Option<Hypothesis>, config: ServiceConfig) -> anyhow::Result<(Arc<Self>, Writer)> {
        config.bed.validate()?;
        if !(config.human_reliability > 0.5 && config.human_reliability <= 1.0) {
            anyhow::bail!(jpt_core::Error::Parameter("annotation reliability must lie in (0.5, 1]".into()));
        }
        let (tx, rx) = mpsc::unbounded_channel();
        let state = Arc::new(Self {
            scene,
            truth,
            config,
            session: RwLock::new(Session::default()),
            jobs: tx,
        });
        Ok((Arc::clone(&state), Writer { state, rx }))
    }

    /// Queues the initial, annotation-free sampling job. Returns its id.
    pub fn start(&self) -> usize {
        let mut s = self.session.write().unwrap();
        self.enqueue(&mut s, Vec::new(), None)
    }

    fn enqueue(&self, s: &mut Session, annotations: Vec<Annotation>, mi: Option<f64>) -> usize {
        let id = s.jobs.len();
        s.jobs.push(JobStatus {
            id,
            round: annotations.len(),
            state: JobState::Queued,
            elapsed_ms: None,
            error: None,
        });
        s.pending = Some(id);
        // the receiver lives as long as the writer; a closed queue leaves the job queued
        let _ = self.jobs.send(Job { id, annotations, mi });
        id
    }
}

impl Writer {
    pub async fn run(mut self) {
        while let Some(job) = self.rx.recv().await {
            let started = Instant::now();
            self.state.session.write().unwrap().jobs[job.id].state = JobState::Running;
            let state = Arc::clone(&self.state);
            let annotations = job.annotations.clone();
            let result = tokio::task::spawn_blocking(move || compute(&state, &annotations)).await;
            let mut s = self.state.session.write().unwrap();
            let status = &mut s.jobs[job.id];
            status.elapsed_ms = Some(started.elapsed().as_millis() as u64);
            match result.map_err(|e| e.to_string()).and_then(|r| r.map_err(|e| e.to_string())) {
                Ok(current) => {
                    status.state = JobState::Done;
                    let last = job.annotations.last();
                    s.rounds.push(RoundRecord {
                        round: current.posterior.round,
                        planner: self.state.config.bed.planner,
                        mi: job.mi,
                        design: last.map(|a| a.design),
                        answer: last.map(|a| a.same),
                        uncertainty: current.posterior.summary.mean_sd,
                        distance: current.posterior.distance,
                    });
                    s.annotations = job.annotations;
                    s.current = Some(current);
                }
                Err(e) => {
                    status.state = JobState::Failed;
                    status.error = Some(e);
                }
            }
            s.pending = None;
        }
    }
}

fn compute(state: &AppState, annotations: &[Annotation]) -> jpt_core::Result<Current> {
    let bed = &state.config.bed;
    let posterior = sample_posterior(&state.scene, bed, annotations, annotations.len(), state.truth.as_ref())?;
    let designs = plan_designs(&state.scene, bed, &posterior, state.config.ranked_designs)?;
    Ok(Current { posterior, designs })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", get(session))
        .route("/api/posterior", get(posterior))
        .route("/api/query", get(query))
        .route("/api/answer", post(answer))
        .route("/api/job/{id}", get(job))
        .route("/api/rounds", get(rounds))
        .with_state(state)
}

fn error(status: StatusCode, kind: &str, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": kind, "message": message.into() }))).into_response()
}

fn not_ready() -> Response {
    error(StatusCode::CONFLICT, "not_ready", "no posterior is available yet")
}

/// Observation reference on the wire: `t` is 1-based as in the CSV files.
/// Extra fields are ignored so a query's design can be posted back as is.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct WireRef {
    pub t: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WireDesign {
    pub first: WireRef,
    pub second: WireRef,
}

impl From<ObsRef> for WireRef {
    fn from(r: ObsRef) -> Self {
        Self { t: r.t + 1, n: r.n }
    }
}

impl From<Design> for WireDesign {
    fn from(d: Design) -> Self {
        Self {
            first: d.first.into(),
            second: d.second.into(),
        }
    }
}

fn obs_json(scene: &Scene, r: ObsRef) -> Value {
    json!({ "t": r.t + 1, "n": r.n, "y": scene.obs.get(r).as_slice() })
}

async fn session(State(st): State<Arc<AppState>>) -> Json<Value> {
    let s = st.session.read().unwrap();
    let trace: Vec<f64> = s.rounds.iter().map(|r| r.uncertainty).collect();
    Json(json!({
        "horizon": st.scene.horizon(),
        "dims": st.scene.obs.dim(),
        "observations": st.scene.obs.total(),
        "rounds_completed": s.rounds.len().saturating_sub(1),
        "uncertainty": trace.last(),
        "uncertainty_trace": trace,
        "planner": st.config.bed.planner,
        "reliability": st.config.human_reliability,
        "busy": s.pending.is_some(),
        "job": s.pending,
    }))
}

async fn posterior(State(st): State<Arc<AppState>>) -> Response {
    let s = st.session.read().unwrap();
    let Some(cur) = &s.current else {
        return not_ready();
    };
    let p = &cur.posterior;
    let h = &st.scene.model.params().observation;
    let stlc = &st.config.bed.stlc;
    let objects: Vec<Value> = p
        .summary
        .objects
        .iter()
        .enumerate()
        .map(|(i, b)| {
            json!({
                "id": i + 1,
                "times": b.times.iter().map(|t| t + 1).collect::<Vec<_>>(),
                "mean": b.mean,
                "sd": b.sd,
            })
        })
        .collect();
    let reference = p.samples.get(p.summary.reference).map(|r| hypothesis_from_tracks(&r.tracks, h));
    let mut polylines = Vec::new();
    if let Some(reference) = &reference {
        for sample in thin(&p.samples, st.config.polylines) {
            let hyp = hypothesis_from_tracks(&sample.tracks, h);
            let Ok(map) = align_to(reference, &hyp, stlc) else {
                continue;
            };
            for (obj, j) in map.iter().enumerate() {
                if let Some(tr) = j.and_then(|j| hyp.get(j)) {
                    polylines.push(json!({
                        "object": obj + 1,
                        "times": tr.times.iter().map(|t| t + 1).collect::<Vec<_>>(),
                        "points": tr.points.iter().map(|x| x.as_slice().to_vec()).collect::<Vec<_>>(),
                    }));
                }
            }
        }
    }
    let answered: Vec<Value> = s
        .annotations
        .iter()
        .map(|a| {
            json!({
                "design": WireDesign::from(a.design),
                "answer": if a.same { "same" } else { "different" },
                "same_frequency": same_object_frequency(&p.samples, &a.design),
            })
        })
        .collect();
    Json(json!({
        "round": p.round,
        "samples": p.samples.len(),
        "uncertainty": p.summary.mean_sd,
        "distance": p.distance,
        "objects": objects,
        "polylines": polylines,
        "answered": answered,
    }))
    .into_response()
}

#[derive(Debug, Deserialize)]
struct QueryParams {
    #[serde(default)]
    rank: usize,
}

async fn query(State(st): State<Arc<AppState>>, Query(QueryParams { rank }): Query<QueryParams>) -> Response {
    let s = st.session.read().unwrap();
    let Some(cur) = &s.current else {
        return not_ready();
    };
    if s.pending.is_some() {
        return error(StatusCode::CONFLICT, "busy", "a sampling job is in progress");
    }
    let Some((design, mi)) = cur.designs.get(rank) else {
        return error(StatusCode::NOT_FOUND, "no_design", format!("no design at rank {rank}"));
    };
    let window = |r: ObsRef| -> Vec<Value> {
        let lo = r.t.saturating_sub(st.config.context);
        let hi = (r.t + st.config.context).min(st.scene.horizon() - 1);
        (lo..=hi)
            .flat_map(|t| (0..st.scene.obs.count(t)).map(move |n| ObsRef::new(t, n)))
            .map(|o| obs_json(&st.scene, o))
            .collect()
    };
    Json(json!({
        "round": cur.posterior.round,
        "rank": rank,
        "design": {
            "first": obs_json(&st.scene, design.first),
            "second": obs_json(&st.scene, design.second),
        },
        "mi": mi.map(|e| e.value),
        "mi_std_error": mi.map(|e| e.std_error),
        "same_frequency": same_object_frequency(&cur.posterior.samples, design),
        "context": { "first": window(design.first), "second": window(design.second) },
    }))
    .into_response()
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Same,
    Different,
}

#[derive(Debug, Deserialize)]
pub struct AnswerBody {
    pub design: WireDesign,
    pub answer: AnswerKind,
}

fn to_design(scene: &Scene, d: &WireDesign) -> Option<Design> {
    let conv = |r: WireRef| {
        let o = ObsRef::new(r.t.checked_sub(1)?, r.n);
        scene.obs.contains(o).then_some(o)
    };
    let (a, b) = (conv(d.first)?, conv(d.second)?);
    (a != b).then(|| Design::new(a, b))
}

async fn answer(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let body: AnswerBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, "malformed", e.to_string()),
    };
    let Some(design) = to_design(&st.scene, &body.design) else {
        return error(StatusCode::BAD_REQUEST, "malformed", "design must name two distinct existing observations");
    };
    let mut s = st.session.write().unwrap();
    if s.pending.is_some() {
        return error(StatusCode::CONFLICT, "busy", "a sampling job is in progress");
    }
    let Some(cur) = &s.current else {
        return not_ready();
    };
    let Some((_, mi)) = cur.designs.iter().find(|(d, _)| *d == design) else {
        return error(StatusCode::CONFLICT, "stale_design", "design is not among the current queries");
    };
    let mi = mi.map(|e| e.value);
    let mut annotations = s.annotations.clone();
    annotations.push(Annotation {
        design,
        same: body.answer == AnswerKind::Same,
        reliability: st.config.human_reliability,
        provenance: Provenance::Human,
        round: annotations.len() + 1,
    });
    let id = st.enqueue(&mut s, annotations, mi);
    (StatusCode::ACCEPTED, Json(json!({ "job": id }))).into_response()
}

async fn job(State(st): State<Arc<AppState>>, Path(id): Path<usize>) -> Response {
    let s = st.session.read().unwrap();
    match s.jobs.get(id) {
        Some(j) => Json(j.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown_job", format!("no job {id}")),
    }
}

async fn rounds(State(st): State<Arc<AppState>>) -> Response {
    let s = st.session.read().unwrap();
    let mut buf = Vec::new();
    if let Err(e) = write_rounds(&mut buf, &s.rounds) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, e.kind(), e.to_string());
    }
    ([(header::CONTENT_TYPE, "text/csv")], buf).into_response()
}

/// Binds `addr`, starts the writer and the initial sampling job, and serves
/// until ctrl-c.
pub async fn serve(state: Arc<AppState>, writer: Writer, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tokio::spawn(writer.run());
    state.start();
    eprintln!("{}", json!({ "listening": listener.local_addr()?.to_string() }));
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
