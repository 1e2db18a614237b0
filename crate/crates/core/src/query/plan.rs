//! Execution plans: the step DAG a session works through.
//!
//! Each intent maps to a fixed plan shape. A full design request runs the
//! whole six-step ladder; lighter intents get reduced plans that skip the
//! stages they don't need. Every plan ends in a `synthesize_response` step
//! with no dependents, so there is always a single final deliverable.

use super::intent::Intent;
use crate::providers::Capability;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// The kinds of work a step can ask of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    AnalyzeComplexity,
    GatherRequirements,
    Design,
    GeneratePipeline,
    DeployInstructions,
    SynthesizeResponse,
}

impl StepAction {
    pub fn name(&self) -> &'static str {
        match self {
            StepAction::AnalyzeComplexity => "analyze_complexity",
            StepAction::GatherRequirements => "gather_requirements",
            StepAction::Design => "design",
            StepAction::GeneratePipeline => "generate_pipeline",
            StepAction::DeployInstructions => "deploy_instructions",
            StepAction::SynthesizeResponse => "synthesize_response",
        }
    }

    /// Which model capability the step prefers. Code generation wants a
    /// codegen-capable model; architectural steps want a planner; the rest
    /// run fine on anything.
    pub fn capability(&self) -> Capability {
        match self {
            StepAction::GeneratePipeline => Capability::Codegen,
            StepAction::AnalyzeComplexity | StepAction::Design => Capability::Planning,
            _ => Capability::General,
        }
    }

    /// Whether the step's output is expected to contain code blocks.
    pub fn produces_code(&self) -> bool {
        matches!(self, StepAction::GeneratePipeline)
    }
}

impl fmt::Display for StepAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub id: String,
    pub action: StepAction,
    pub description: String,
    /// Ids of steps whose results this step needs as input.
    pub depends_on: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub intent: Intent,
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("duplicate step id {0:?}")]
    DuplicateId(String),
    #[error("step {step:?} depends on unknown step {dep:?}")]
    UnknownDependency { step: String, dep: String },
    #[error("plan has a dependency cycle")]
    Cycle,
    #[error("plan must end in a synthesize_response step with no dependents")]
    NoTerminalSynthesis,
}

impl ExecutionPlan {
    /// Structural checks: unique ids, resolvable dependencies, no cycles,
    /// and a terminal `synthesize_response` step.
    pub fn validate(&self) -> Result<(), PlanError> {
        let mut ids = BTreeSet::new();
        for s in &self.steps {
            if !ids.insert(s.id.as_str()) {
                return Err(PlanError::DuplicateId(s.id.clone()));
            }
        }
        let mut dependents: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &self.steps {
            for d in &s.depends_on {
                if !ids.contains(d.as_str()) {
                    return Err(PlanError::UnknownDependency { step: s.id.clone(), dep: d.clone() });
                }
                *dependents.entry(d.as_str()).or_default() += 1;
            }
        }

        // Kahn's algorithm: if a full topological order exists there is no
        // cycle.
        let mut indegree: BTreeMap<&str, usize> = self.steps.iter().map(|s| (s.id.as_str(), s.depends_on.len())).collect();
        let mut ready: Vec<&str> =
            indegree.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
        let mut seen = 0usize;
        while let Some(id) = ready.pop() {
            seen += 1;
            for s in &self.steps {
                if s.depends_on.iter().any(|d| d == id) {
                    let entry = indegree.get_mut(s.id.as_str()).expect("step is indexed");
                    *entry -= 1;
                    if *entry == 0 {
                        ready.push(s.id.as_str());
                    }
                }
            }
        }
        if seen != self.steps.len() {
            return Err(PlanError::Cycle);
        }

        let has_terminal_synthesis = self.steps.iter().any(|s| {
            s.action == StepAction::SynthesizeResponse && dependents.get(s.id.as_str()).copied().unwrap_or(0) == 0
        });
        if !has_terminal_synthesis {
            return Err(PlanError::NoTerminalSynthesis);
        }
        Ok(())
    }

    pub fn step(&self, id: &str) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn step(id: &str, action: StepAction, description: &str, depends_on: &[&str]) -> PlanStep {
    PlanStep {
        id: id.to_string(),
        action,
        description: description.to_string(),
        depends_on: depends_on.iter().map(|s| s.to_string()).collect(),
    }
}

/// Build the plan shape for an intent. Shapes are fixed per intent; the
/// query's parameters flow into prompts later, not into the plan structure.
pub fn plan_for(intent: Intent) -> ExecutionPlan {
    let steps = match intent {
        Intent::PipelineDesign => vec![
            step("analyze_complexity", StepAction::AnalyzeComplexity, "Assess the computational profile of the requested pipeline", &[]),
            step("gather_requirements", StepAction::GatherRequirements, "Formalize the stated and implied requirements", &["analyze_complexity"]),
            step("design", StepAction::Design, "Lay out operators, state, and fault-tolerance structure", &["gather_requirements"]),
            step("generate_pipeline", StepAction::GeneratePipeline, "Produce the implementation code", &["design"]),
            step("deploy_instructions", StepAction::DeployInstructions, "Describe how to build, submit, and operate the job", &["generate_pipeline"]),
            step("synthesize_response", StepAction::SynthesizeResponse, "Assemble the final answer from all step results", &["deploy_instructions"]),
        ],
        Intent::Explanation => vec![
            step("gather_requirements", StepAction::GatherRequirements, "Pin down what exactly needs explaining", &[]),
            step("synthesize_response", StepAction::SynthesizeResponse, "Write the explanation", &["gather_requirements"]),
        ],
        Intent::Deployment => vec![
            step("gather_requirements", StepAction::GatherRequirements, "Collect the deployment target and constraints", &[]),
            step("deploy_instructions", StepAction::DeployInstructions, "Produce the deployment procedure", &["gather_requirements"]),
            step("synthesize_response", StepAction::SynthesizeResponse, "Assemble the final answer", &["deploy_instructions"]),
        ],
        Intent::Optimization => vec![
            step("analyze_complexity", StepAction::AnalyzeComplexity, "Profile the current pipeline's bottlenecks", &[]),
            step("design", StepAction::Design, "Propose the tuning changes", &["analyze_complexity"]),
            step("synthesize_response", StepAction::SynthesizeResponse, "Assemble the final answer", &["design"]),
        ],
        Intent::Other => vec![
            step("gather_requirements", StepAction::GatherRequirements, "Work out what is being asked", &[]),
            step("synthesize_response", StepAction::SynthesizeResponse, "Answer as best as possible", &["gather_requirements"]),
        ],
    };
    ExecutionPlan { intent, steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_intent_produces_a_valid_plan() {
        for intent in Intent::ALL {
            let plan = plan_for(intent);
            plan.validate().unwrap_or_else(|e| panic!("{intent}: {e}"));
            assert!(!plan.is_empty());
            // The last step is always the terminal synthesis.
            assert_eq!(plan.steps.last().unwrap().action, StepAction::SynthesizeResponse);
        }
    }

    #[test]
    fn design_plan_is_the_full_six_step_ladder() {
        let plan = plan_for(Intent::PipelineDesign);
        let actions: Vec<_> = plan.steps.iter().map(|s| s.action).collect();
        assert_eq!(
            actions,
            vec![
                StepAction::AnalyzeComplexity,
                StepAction::GatherRequirements,
                StepAction::Design,
                StepAction::GeneratePipeline,
                StepAction::DeployInstructions,
                StepAction::SynthesizeResponse,
            ]
        );
        // Strictly linear: each step depends on exactly the previous one.
        for pair in plan.steps.windows(2) {
            assert_eq!(pair[1].depends_on, vec![pair[0].id.clone()]);
        }
        assert!(plan.steps[0].depends_on.is_empty());
    }

    #[test]
    fn reduced_plans_have_the_expected_sizes() {
        assert_eq!(plan_for(Intent::Explanation).len(), 2);
        assert_eq!(plan_for(Intent::Deployment).len(), 3);
        assert_eq!(plan_for(Intent::Optimization).len(), 3);
        assert_eq!(plan_for(Intent::Other).len(), 2);
    }

    #[test]
    fn validation_rejects_duplicate_ids() {
        let plan = ExecutionPlan {
            intent: Intent::Other,
            steps: vec![
                step("a", StepAction::GatherRequirements, "", &[]),
                step("a", StepAction::SynthesizeResponse, "", &[]),
            ],
        };
        assert_eq!(plan.validate(), Err(PlanError::DuplicateId("a".into())));
    }

    #[test]
    fn validation_rejects_unknown_dependencies() {
        let plan = ExecutionPlan {
            intent: Intent::Other,
            steps: vec![step("a", StepAction::SynthesizeResponse, "", &["ghost"])],
        };
        assert_eq!(
            plan.validate(),
            Err(PlanError::UnknownDependency { step: "a".into(), dep: "ghost".into() })
        );
    }

    #[test]
    fn validation_rejects_cycles() {
        let plan = ExecutionPlan {
            intent: Intent::Other,
            steps: vec![
                step("a", StepAction::GatherRequirements, "", &["b"]),
                step("b", StepAction::Design, "", &["a"]),
                step("c", StepAction::SynthesizeResponse, "", &[]),
            ],
        };
        assert_eq!(plan.validate(), Err(PlanError::Cycle));
    }

    #[test]
    fn validation_requires_a_terminal_synthesis() {
        // synthesize_response exists but something depends on it.
        let plan = ExecutionPlan {
            intent: Intent::Other,
            steps: vec![
                step("s", StepAction::SynthesizeResponse, "", &[]),
                step("after", StepAction::Design, "", &["s"]),
            ],
        };
        assert_eq!(plan.validate(), Err(PlanError::NoTerminalSynthesis));
        // No synthesis at all.
        let plan = ExecutionPlan {
            intent: Intent::Other,
            steps: vec![step("only", StepAction::Design, "", &[])],
        };
        assert_eq!(plan.validate(), Err(PlanError::NoTerminalSynthesis));
    }

    #[test]
    fn capability_mapping_routes_codegen_and_planning() {
        assert_eq!(StepAction::GeneratePipeline.capability(), Capability::Codegen);
        assert_eq!(StepAction::Design.capability(), Capability::Planning);
        assert_eq!(StepAction::AnalyzeComplexity.capability(), Capability::Planning);
        assert_eq!(StepAction::SynthesizeResponse.capability(), Capability::General);
        assert!(StepAction::GeneratePipeline.produces_code());
        assert!(!StepAction::Design.produces_code());
    }
}
