//! Plan scheduling: run every step once, dependencies first.
//!
//! The scheduler keeps a ready set — steps whose dependencies are all
//! complete — and executes it in waves of up to `workers` steps. With one
//! worker (the default) execution is strictly sequential in plan order, which
//! keeps offline runs byte-reproducible; more workers fan a wave out over
//! scoped threads. Events are recorded wave-by-wave in plan order either
//! way, so the log never depends on thread timing.

use super::clock::Clock;
use super::events::{EventSink, ExecEvent};
use super::{run_with_retry, RetryPolicy};
use crate::providers::{ChatRequest, ModelPool};
use crate::query::{ExecutionPlan, PlanError, PlanStep, StepAction};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// What one executed step left behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step_id: String,
    pub action: StepAction,
    pub content: String,
    /// Label of the model that produced the content; `None` for fallbacks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub attempts: u32,
    pub fallback: bool,
    pub started_ms: u64,
    pub finished_ms: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("saving step result failed: {0}")]
    Sink(String),
    #[error("scheduler wedged: steps {0:?} can never become ready")]
    Deadlock(Vec<String>),
    #[error("runner returned a result for {got:?} while running {want:?}")]
    MisroutedResult { want: String, got: String },
}

/// Persists step results as they complete (the per-step save in the session
/// loop). Must tolerate calls from worker threads.
pub trait ResultSink: Sync {
    fn save(&self, result: &StepResult) -> Result<(), String>;
}

/// Keeps nothing.
#[derive(Debug, Default)]
pub struct NullResultSink;

impl ResultSink for NullResultSink {
    fn save(&self, _result: &StepResult) -> Result<(), String> {
        Ok(())
    }
}

/// Executes one step given its completed dependencies.
pub trait StepRunner: Sync {
    fn run(&self, step: &PlanStep, completed: &BTreeMap<String, StepResult>) -> Result<StepResult, ExecError>;
}

/// Run a whole plan. Returns one result per step, keyed by step id.
///
/// The plan is validated first, so scheduling cannot wedge on a cycle; the
/// deadlock arm below is defense in depth. Workers are clamped to at least
/// one.
pub fn run_plan(
    plan: &ExecutionPlan,
    runner: &dyn StepRunner,
    workers: usize,
    clock: &dyn Clock,
    events: &dyn EventSink,
    results: &dyn ResultSink,
) -> Result<BTreeMap<String, StepResult>, ExecError> {
    plan.validate()?;
    let workers = workers.max(1);
    let mut completed: BTreeMap<String, StepResult> = BTreeMap::new();
    let mut remaining: Vec<&PlanStep> = plan.steps.iter().collect();

    while !remaining.is_empty() {
        let ready: Vec<&PlanStep> = remaining
            .iter()
            .copied()
            .filter(|s| s.depends_on.iter().all(|d| completed.contains_key(d)))
            .collect();
        if ready.is_empty() {
            return Err(ExecError::Deadlock(remaining.iter().map(|s| s.id.clone()).collect()));
        }
        let wave: Vec<&PlanStep> = ready.into_iter().take(workers).collect();

        for step in &wave {
            events.record(ExecEvent::StepStart { step_id: step.id.clone(), at_ms: clock.now_ms() });
        }

        let outcomes: Vec<Result<StepResult, ExecError>> = if wave.len() == 1 {
            vec![runner.run(wave[0], &completed)]
        } else {
            let completed_ref = &completed;
            std::thread::scope(|scope| {
                let handles: Vec<_> =
                    wave.iter().map(|step| scope.spawn(move || runner.run(step, completed_ref))).collect();
                handles.into_iter().map(|h| h.join().expect("step worker panicked")).collect()
            })
        };

        for (step, outcome) in wave.iter().zip(outcomes) {
            let result = outcome?;
            if result.step_id != step.id {
                return Err(ExecError::MisroutedResult { want: step.id.clone(), got: result.step_id });
            }
            results.save(&result).map_err(ExecError::Sink)?;
            events.record(ExecEvent::StepCompleted {
                step_id: step.id.clone(),
                attempts: result.attempts,
                at_ms: clock.now_ms(),
            });
            completed.insert(step.id.clone(), result);
            remaining.retain(|s| s.id != step.id);
        }
    }
    Ok(completed)
}

/// The production runner: each step becomes one retried provider call with a
/// prompt assembled from the session context and the step's dependency
/// results.
pub struct ModelStepRunner {
    pub pool: Arc<ModelPool>,
    pub policy: RetryPolicy,
    pub clock: Arc<dyn Clock>,
    pub events: Arc<dyn EventSink>,
    /// The normalized user query.
    pub query: String,
    /// Extracted parameters, pre-serialized for prompting.
    pub parameters_json: String,
    /// Reasoning-phase design summary carried into every prompt.
    pub design_summary: String,
    /// Implementation language for code generation.
    pub language: String,
}

/// Longest dependency excerpt quoted into a prompt.
const DEP_EXCERPT_CHARS: usize = 4000;

fn clip(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

impl ModelStepRunner {
    fn system_text(&self, action: StepAction) -> String {
        let body = match action {
            StepAction::AnalyzeComplexity => {
                "Assess the computational profile of the requested stream pipeline: expected \
                 throughput, state size, windowing cost, and the hardest constraint to satisfy."
                    .to_string()
            }
            StepAction::GatherRequirements => {
                "List the explicit requirements stated in the request, then the implied ones a \
                 production deployment would add. Flag anything underspecified.".to_string()
            }
            StepAction::Design => {
                "Lay out the pipeline architecture: operators in order, parallelism, state and \
                 its backend, windowing, and the failure-handling path.".to_string()
            }
            StepAction::GeneratePipeline => format!(
                "Write the complete, runnable {} implementation of the designed pipeline. Put \
                 every file in its own fenced code block and start each block with a comment \
                 naming the file's main class or purpose.",
                self.language
            ),
            StepAction::DeployInstructions => {
                "Write the build, submit, and operations instructions for the generated \
                 pipeline: commands, configuration, and what to monitor.".to_string()
            }
            StepAction::SynthesizeResponse => {
                "Assemble the final answer for the user from the step results: what was built, \
                 how it addresses every requirement, and how to run it.".to_string()
            }
        };
        format!("You are completing the '{action}' step of a stream-pipeline session.\n{body}")
    }

    fn user_text(&self, step: &PlanStep, completed: &BTreeMap<String, StepResult>) -> String {
        let mut text = format!("Request: {}\n\nExtracted parameters:\n{}\n", self.query, self.parameters_json);
        if !self.design_summary.is_empty() {
            text.push_str(&format!("\nDesign summary:\n{}\n", self.design_summary));
        }
        for dep in &step.depends_on {
            if let Some(result) = completed.get(dep) {
                text.push_str(&format!("\nResult of step '{dep}':\n{}\n", clip(&result.content, DEP_EXCERPT_CHARS)));
            }
        }
        text
    }
}

impl StepRunner for ModelStepRunner {
    fn run(&self, step: &PlanStep, completed: &BTreeMap<String, StepResult>) -> Result<StepResult, ExecError> {
        let started_ms = self.clock.now_ms();
        let request = ChatRequest::new(self.system_text(step.action), self.user_text(step, completed));
        let outcome = run_with_retry(
            &self.pool,
            step.action.capability(),
            &request,
            &self.policy,
            self.clock.as_ref(),
            self.events.as_ref(),
            &step.id,
        );
        Ok(StepResult {
            step_id: step.id.clone(),
            action: step.action,
            content: outcome.response.content,
            model: outcome.model,
            attempts: outcome.attempts,
            fallback: outcome.fallback,
            started_ms,
            finished_ms: self.clock.now_ms(),
        })
    }
}
