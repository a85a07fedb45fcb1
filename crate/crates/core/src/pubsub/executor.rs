use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam_channel::RecvTimeoutError;
use thiserror::Error;

use super::{CallbackContext, Graph};
use crate::tracer::EventType;

/// When [`Graph::run_executor`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCondition {
    /// No registered producers remain and every queue is empty.
    Drained,
    /// Drained, or the timeout elapsed, whichever comes first.
    DrainedOrTimeout(Duration),
    Timeout(Duration),
    /// This many callbacks have been invoked during the run.
    MessageCount(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutorStats {
    pub callbacks_invoked: u64,
    pub messages_dropped: u64,
    pub wall_time: Duration,
    pub workers: usize,
    pub failed: bool,
    pub timed_out: bool,
}

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("callback of node {node:?} failed: {message}")]
    CallbackPanic {
        node: String,
        message: String,
        stats: ExecutorStats,
    },
}

impl ExecutorError {
    pub fn stats(&self) -> &ExecutorStats {
        match self {
            ExecutorError::CallbackPanic { stats, .. } => stats,
        }
    }
}

const POLL: Duration = Duration::from_micros(100);
const WORKER_WAIT: Duration = Duration::from_millis(2);

pub(super) fn run(graph: &Graph, until: StopCondition) -> Result<ExecutorStats, ExecutorError> {
    let shared = &*graph.shared;
    let _exclusive = shared.run_lock.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let callbacks_at_start = shared.callbacks.load(Ordering::Relaxed);
    let dropped_at_start = shared.dropped.load(Ordering::Relaxed);
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<(String, String)>> = Mutex::new(None);
    let mut timed_out = false;

    std::thread::scope(|scope| {
        for i in 0..shared.workers {
            let stop = &stop;
            let failure = &failure;
            std::thread::Builder::new()
                .name(format!("executor-{i}"))
                .spawn_scoped(scope, move || worker_loop(graph, stop, failure))
                .expect("spawn executor worker");
        }

        loop {
            if failure.lock().unwrap().is_some() {
                break;
            }
            let drained = shared.producers.load(Ordering::Acquire) == 0
                && shared.outstanding.load(Ordering::Acquire) == 0;
            let elapsed = start.elapsed();
            let done = match until {
                StopCondition::Drained => drained,
                StopCondition::DrainedOrTimeout(limit) => {
                    timed_out = !drained && elapsed >= limit;
                    drained || timed_out
                }
                StopCondition::Timeout(limit) => elapsed >= limit,
                StopCondition::MessageCount(n) => {
                    shared.callbacks.load(Ordering::Relaxed) - callbacks_at_start >= n
                }
            };
            if done {
                break;
            }
            std::thread::sleep(POLL);
        }
        stop.store(true, Ordering::Release);
    });

    let stats = ExecutorStats {
        callbacks_invoked: shared.callbacks.load(Ordering::Relaxed) - callbacks_at_start,
        messages_dropped: shared.dropped.load(Ordering::Relaxed) - dropped_at_start,
        wall_time: start.elapsed(),
        workers: shared.workers,
        failed: false,
        timed_out,
    };
    match failure.into_inner().unwrap() {
        Some((node, message)) => Err(ExecutorError::CallbackPanic {
            node,
            message,
            stats: ExecutorStats {
                failed: true,
                ..stats
            },
        }),
        None => Ok(stats),
    }
}

fn worker_loop(graph: &Graph, stop: &AtomicBool, failure: &Mutex<Option<(String, String)>>) {
    let shared = &*graph.shared;
    while !stop.load(Ordering::Acquire) {
        let node_idx = match shared.ready_rx.recv_timeout(WORKER_WAIT) {
            Ok(n) => n,
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => return,
        };
        if let Err(message) = invoke_one(graph, node_idx) {
            let mut slot = failure.lock().unwrap();
            if slot.is_none() {
                *slot = Some((shared.nodes[node_idx].name.clone(), message));
            }
            stop.store(true, Ordering::Release);
        }
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_owned()
    }
}

/// Run the callback for the oldest message queued at `node_idx`.
fn invoke_one(graph: &Graph, node_idx: usize) -> Result<(), String> {
    let shared = &*graph.shared;
    let node = &shared.nodes[node_idx];
    let next = {
        let mut inbox = node.inbox.lock().unwrap();
        match inbox.queue.pop_front() {
            Some((sub, env)) => {
                inbox.queued_per_sub[shared.subs[sub].local] -= 1;
                Some((sub, env))
            }
            None => {
                inbox.scheduled = false;
                None
            }
        }
    };
    let Some((sub_idx, envelope)) = next else {
        return Ok(());
    };
    let sub = &shared.subs[sub_idx];

    if let Some(t) = &shared.tracer {
        t.emit(EventType::CallbackStart, envelope.id, node.hash);
    }
    let outcome = {
        let mut callback = node.callback.lock().unwrap_or_else(|e| e.into_inner());
        let mut ctx = CallbackContext {
            graph,
            node: node_idx,
        };
        panic::catch_unwind(AssertUnwindSafe(|| {
            callback.on_message(&mut ctx, sub.topic, &envelope)
        }))
    };
    if let Some(t) = &shared.tracer {
        t.emit(EventType::CallbackEnd, envelope.id, node.hash);
    }
    sub.delivered.fetch_add(1, Ordering::Relaxed);
    shared.callbacks.fetch_add(1, Ordering::Relaxed);

    {
        let mut inbox = node.inbox.lock().unwrap();
        if inbox.queue.is_empty() {
            inbox.scheduled = false;
        } else {
            let _ = shared.ready_tx.send(node_idx);
        }
    }
    shared.outstanding.fetch_sub(1, Ordering::AcqRel);

    match outcome {
        Ok(Ok(())) => Ok(()),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(panic_message(p)),
    }
}
