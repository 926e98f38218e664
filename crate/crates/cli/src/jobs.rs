//! Asynchronous query jobs. Request handlers read the store directly; every
//! mutation goes through one writer task.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot};

use vidsift_core::ingest::Archive;
use vidsift_core::search::{run_query, Algorithm, Query, ResultDocument, SearchParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub archive: String,
    pub algorithm: Algorithm,
    pub state: JobState,
    pub query: Query,
    /// Present exactly when `state` is `done`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct JobRequest {
    pub archive_id: String,
    pub archive: Arc<Archive>,
    pub query: Query,
    pub algorithm: Algorithm,
    pub params: SearchParams,
}

enum Msg {
    Submit(Box<JobRequest>, oneshot::Sender<String>),
    Started(String),
    Finished(String, Result<ResultDocument, String>),
}

#[derive(Clone)]
pub struct JobStore {
    records: Arc<RwLock<BTreeMap<String, JobRecord>>>,
    tx: mpsc::UnboundedSender<Msg>,
}

impl JobStore {
    /// Spawns the writer task; call from inside a Tokio runtime.
    pub fn start() -> JobStore {
        let records = Arc::new(RwLock::new(BTreeMap::new()));
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(writer(records.clone(), rx, tx.clone()));
        JobStore { records, tx }
    }

    /// Queues a job and returns its id once the writer has recorded it.
    pub async fn submit(&self, request: JobRequest) -> Option<String> {
        let (reply, id) = oneshot::channel();
        self.tx.send(Msg::Submit(Box::new(request), reply)).ok()?;
        id.await.ok()
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.records.read().ok()?.get(id).cloned()
    }
}

async fn writer(
    records: Arc<RwLock<BTreeMap<String, JobRecord>>>,
    mut rx: mpsc::UnboundedReceiver<Msg>,
    tx: mpsc::UnboundedSender<Msg>,
) {
    let mut next = 1u64;
    while let Some(msg) = rx.recv().await {
        match msg {
            Msg::Submit(req, reply) => {
                let id = format!("job-{next}");
                next += 1;
                let record = JobRecord {
                    id: id.clone(),
                    archive: req.archive_id.clone(),
                    algorithm: req.algorithm,
                    state: JobState::Queued,
                    query: req.query.clone(),
                    result: None,
                    error: None,
                };
                records.write().unwrap().insert(id.clone(), record);
                let _ = reply.send(id.clone());
                tokio::spawn(execute(id, *req, tx.clone()));
            }
            Msg::Started(id) => {
                if let Some(r) = records.write().unwrap().get_mut(&id) {
                    r.state = JobState::Running;
                }
            }
            Msg::Finished(id, outcome) => {
                if let Some(r) = records.write().unwrap().get_mut(&id) {
                    match outcome {
                        Ok(result) => {
                            r.state = JobState::Done;
                            r.result = Some(result);
                        }
                        Err(e) => {
                            r.state = JobState::Failed;
                            r.error = Some(e);
                        }
                    }
                }
            }
        }
    }
}

async fn execute(id: String, req: JobRequest, tx: mpsc::UnboundedSender<Msg>) {
    let _ = tx.send(Msg::Started(id.clone()));
    let outcome = tokio::task::spawn_blocking(move || {
        run_query(&req.query, &req.archive.index, &req.params, req.algorithm)
            .map(|o| o.result)
            .map_err(|e| e.to_string())
    })
    .await
    .unwrap_or_else(|e| Err(format!("job panicked: {e}")));
    log::info!("{id} finished: {}", if outcome.is_ok() { "done" } else { "failed" });
    let _ = tx.send(Msg::Finished(id, outcome));
}
