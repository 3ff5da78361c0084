//! Serial-arm morphology optimization.
//!
//! A candidate robot is a base origin, a sequence of revolute joint types and
//! the link lengths that follow them. Candidates are scored on two objectives
//! (summed IK position error and scaled gravity-compensation torque over a set
//! of target points) and explored by a multi-objective TPE sampler that is
//! periodically interleaved with designs proposed by a language model.

pub mod chain_kinematics;
pub mod design_space;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod llm_sampler;
pub mod motpe_sampler;
pub mod orchestrator;
pub mod pareto_metrics;

pub use chain_kinematics::{GravityModel, IkConfig, IkSolution, JointState, JOINT_LIMIT};
pub use design_space::{Bounds, DesignParams, JointType, SpaceConfig, Violation};
pub use error::{Error, Result};
pub use evaluation::{evaluate, EvalConfig, EvaluationReport, ObjectiveValues, TargetSet};
pub use llm_sampler::{BackendError, LlmBackend, PromptVariant};
pub use motpe_sampler::{Source, TpeConfig, TrialRecord};
pub use orchestrator::{Mode, RunConfig, RunResult};
pub use pareto_metrics::{FrontPoint, ParetoArchive, RefPoint};
