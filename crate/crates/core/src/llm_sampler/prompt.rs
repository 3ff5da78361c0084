use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain_kinematics::JOINT_LIMIT;
use crate::design_space::{Bounds, DesignParams, SpaceConfig};
use crate::evaluation::{EvaluationReport, TargetSet};

const PROPOSAL_TEMPLATE: &str = include_str!("../../templates/proposal.txt");
const ANALYSIS_TEMPLATE: &str = include_str!("../../templates/analysis.txt");
const REFORMAT_TEMPLATE: &str = include_str!("../../templates/reformat.txt");

pub const SYSTEM_PROMPT: &str =
    "You are a careful assistant for robot design optimization. Follow the requested output format exactly.";

/// LLM− gives only the generic step-by-step instruction; LLM+ adds the
/// per-parameter analysis block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptVariant {
    #[serde(rename = "llm-minus")]
    LlmMinus,
    #[serde(rename = "llm-plus")]
    LlmPlus,
}

#[derive(Clone, Debug)]
pub struct PromptContext<'a> {
    pub targets: &'a TargetSet,
    pub space: &'a SpaceConfig,
    pub alpha: f64,
    pub pareto_feedback: Vec<&'a EvaluationReport>,
    pub random_feedback: Vec<&'a EvaluationReport>,
    pub variant: PromptVariant,
}

/// The parameter-analysis instructions added in the LLM+ variant.
pub fn analysis_block() -> &'static str {
    ANALYSIS_TEMPLATE
}

fn range(b: Bounds) -> String {
    format!("[{}, {}]", b.lo, b.hi)
}

fn list(values: &[f64], precision: usize) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.precision$}")).collect();
    format!("[{}]", items.join(", "))
}

fn design_lines(p: &DesignParams, out: &mut String) {
    let joints: Vec<String> = p.joints.iter().map(|j| j.letter().to_string()).collect();
    let _ = writeln!(out, "ORIGIN: {}", list(&p.origin, 4));
    let _ = writeln!(out, "JOINTS: [{}]", joints.join(", "));
    let _ = writeln!(out, "LINKS: {}", list(&p.lengths, 4));
}

fn feedback_block(title: &str, r: &EvaluationReport, out: &mut String) {
    let _ = writeln!(out, "### {title}");
    design_lines(&r.params, out);
    let _ = writeln!(out, "E_EACH:");
    for (i, d) in r.per_target.iter().enumerate() {
        let _ = writeln!(
            out,
            "  target {}: E_pos={:.4}, E_torque={:.4}, P_ik={}, tau_ik={}",
            i + 1,
            d.e_pos,
            d.e_torque,
            list(&d.reached, 4),
            list(&d.torque, 4)
        );
    }
    let _ = writeln!(
        out,
        "E_ALL: E_pos={:.4}, E_torque={:.4}",
        r.objectives.e_pos, r.objectives.e_torque
    );
    out.push('\n');
}

fn target_lines(t: &TargetSet) -> String {
    t.points
        .iter()
        .enumerate()
        .map(|(i, p)| format!("P_ref_{} = [{}, {}, {}]", i + 1, p[0], p[1], p[2]))
        .collect::<Vec<_>>()
        .join("\n")
}

/// First-call prompt: problem statement, targets, one feedback block per
/// report, and the step-by-step instruction.
pub fn build_prompt(ctx: &PromptContext<'_>) -> String {
    let s = ctx.space;
    let mut feedback = String::new();
    for (k, r) in ctx.pareto_feedback.iter().enumerate() {
        feedback_block(&format!("Pareto-optimal design {}", k + 1), r, &mut feedback);
    }
    for (k, r) in ctx.random_feedback.iter().enumerate() {
        feedback_block(&format!("Sampled design {}", k + 1), r, &mut feedback);
    }
    if feedback.is_empty() {
        feedback.push_str("(none yet)\n\n");
    }
    let analysis = match ctx.variant {
        PromptVariant::LlmPlus => ANALYSIS_TEMPLATE,
        PromptVariant::LlmMinus => "",
    };
    PROPOSAL_TEMPLATE
        .replace("$DOF", &s.dof.to_string())
        .replace("$ORIGIN_X", &range(s.origin_bounds[0]))
        .replace("$ORIGIN_Y", &range(s.origin_bounds[1]))
        .replace("$ORIGIN_Z", &range(s.origin_bounds[2]))
        .replace("$LINK_RANGE", &range(s.length_bounds))
        .replace("$JOINT_LIMIT", &JOINT_LIMIT.to_string())
        .replace("$ALPHA", &ctx.alpha.to_string())
        .replace("$TARGET", &target_lines(ctx.targets))
        .replace("$FEEDBACK\n", &feedback)
        .replace("$ANALYSIS\n", analysis)
}

/// Second-call prompt asking for the design as three bracketed lists.
pub fn build_reformat_prompt(answer: &str, dof: usize) -> String {
    REFORMAT_TEMPLATE
        .replace("$DOF", &dof.to_string())
        .replace("$ANSWER", answer.trim())
}
