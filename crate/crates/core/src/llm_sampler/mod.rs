//! Language-model design proposals.
//!
//! A proposal takes two backend calls: the first sends the problem statement,
//! target points and feedback on earlier designs; the second asks the model to
//! restate its answer as three bracketed lists, which are then parsed and
//! clamped into the design space.

mod backend;
mod parse;
mod prompt;

pub use backend::{
    design_script, write_script, BackendConfig, BackendError, ChatMessage, DecodingSettings,
    HeuristicBackend, HttpBackend, LlmBackend, ScriptEntry, ScriptedBackend, DEFAULT_TOKEN_ENV,
};
pub use parse::parse_design;
pub use prompt::{build_prompt, build_reformat_prompt, analysis_block, PromptContext, PromptVariant, SYSTEM_PROMPT};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design_space::DesignParams;
use crate::pareto_metrics::FrontPoint;

/// Which of the two calls a transcript record belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallKind {
    Proposal,
    Reformat,
}

/// One backend call: what was sent and what came back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub call: CallKind,
    pub backend: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "lowercase")]
pub enum ProposalFailure {
    Transport(String),
    Parse(String),
}

impl std::fmt::Display for ProposalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProposalFailure::Transport(r) => write!(f, "transport: {r}"),
            ProposalFailure::Parse(r) => write!(f, "parse: {r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerOutcome {
    pub params: Result<DesignParams, ProposalFailure>,
    pub transcript: Vec<TranscriptRecord>,
}

fn call(
    backend: &mut dyn LlmBackend,
    kind: CallKind,
    user: String,
    settings: &DecodingSettings,
    transcript: &mut Vec<TranscriptRecord>,
) -> Result<String, ProposalFailure> {
    let messages = vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(user)];
    let result = backend.send(&messages, settings);
    let mut record = TranscriptRecord {
        call: kind,
        backend: backend.label().to_string(),
        messages,
        response: None,
        error: None,
    };
    let out = match result {
        Ok(text) => {
            record.response = Some(text.clone());
            Ok(text)
        }
        Err(e) => {
            record.error = Some(e.to_string());
            Err(ProposalFailure::Transport(e.to_string()))
        }
    };
    transcript.push(record);
    out
}

/// Runs the two-call protocol. Never fails outright: transport and parse
/// problems come back as a failure outcome alongside the transcript.
pub fn propose(
    backend: &mut dyn LlmBackend,
    ctx: &PromptContext<'_>,
    settings: &DecodingSettings,
) -> SamplerOutcome {
    let mut transcript = Vec::with_capacity(2);
    let params = (|| {
        let answer = call(backend, CallKind::Proposal, build_prompt(ctx), settings, &mut transcript)?;
        let restated = call(
            backend,
            CallKind::Reformat,
            build_reformat_prompt(&answer, ctx.space.dof),
            settings,
            &mut transcript,
        )?;
        parse_design(&restated, ctx.space).map_err(ProposalFailure::Parse)
    })();
    SamplerOutcome { params, transcript }
}

/// Indices of the feedback designs: up to `n_pareto` drawn from the archive
/// and `n_random` from all trials, each without replacement. The two draws are
/// independent and may overlap.
pub fn select_feedback<R: Rng + ?Sized>(
    n_trials: usize,
    archive: &[FrontPoint],
    rng: &mut R,
    n_pareto: usize,
    n_random: usize,
) -> (Vec<usize>, Vec<usize>) {
    let pareto = if archive.len() <= n_pareto {
        archive.iter().map(|p| p.trial_id).collect()
    } else {
        index::sample(rng, archive.len(), n_pareto)
            .into_iter()
            .map(|i| archive[i].trial_id)
            .collect()
    };
    let random = if n_trials <= n_random {
        (0..n_trials).collect()
    } else {
        index::sample(rng, n_trials, n_random).into_vec()
    };
    (pareto, random)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{JointType, SpaceConfig};
    use crate::evaluation::{ObjectiveValues, TargetSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn targets() -> TargetSet {
        TargetSet::new("t", vec![[0.2, 0.0, 0.3], [-0.2, 0.0, 0.3]]).unwrap()
    }

    fn ctx<'a>(t: &'a TargetSet, s: &'a SpaceConfig) -> PromptContext<'a> {
        PromptContext {
            targets: t,
            space: s,
            alpha: 40.0,
            pareto_feedback: vec![],
            random_feedback: vec![],
            variant: PromptVariant::LlmPlus,
        }
    }

    #[test]
    fn scripted_ypr_p_proposal() {
        let (t, s) = (targets(), SpaceConfig::default());
        let mut b = ScriptedBackend::new(vec![
            ScriptEntry::Response("Step 1 ... Step 3: origin at zero.".into()),
            ScriptEntry::Response("[0.0, 0.0, 0.0] [Y, P, R, P] [0.25, 0.2, 0.2, 0.15]".into()),
        ]);
        let out = propose(&mut b, &ctx(&t, &s), &DecodingSettings::default());
        let p = out.params.unwrap();
        assert_eq!(p.origin, [0.0, 0.0, 0.0]);
        assert_eq!(
            p.joints,
            vec![JointType::Yaw, JointType::Pitch, JointType::Roll, JointType::Pitch]
        );
        assert_eq!(p.lengths, vec![0.25, 0.2, 0.2, 0.15]);
        assert_eq!(out.transcript.len(), 2);
        assert_eq!(out.transcript[1].call, CallKind::Reformat);
        assert!(out.transcript[1].messages[1].content.contains("Step 3: origin at zero."));
    }

    #[test]
    fn overlong_links_are_clamped() {
        let (t, s) = (targets(), SpaceConfig::default());
        let mut b = ScriptedBackend::new(vec![
            ScriptEntry::Response("ok".into()),
            ScriptEntry::Response("[0, 0, 0] [Y, P, R, P] [0.5, 0.2, 0.2, 0.15]".into()),
        ]);
        let p = propose(&mut b, &ctx(&t, &s), &DecodingSettings::default())
            .params
            .unwrap();
        assert_eq!(p.lengths[0], 0.3);
        assert!(p.validate(&s).is_empty());
    }

    #[test]
    fn prose_without_brackets_fails_to_parse() {
        let (t, s) = (targets(), SpaceConfig::default());
        let mut b = ScriptedBackend::new(vec![
            ScriptEntry::Response("ok".into()),
            ScriptEntry::Response("I would use a long arm placed at the origin.".into()),
        ]);
        let out = propose(&mut b, &ctx(&t, &s), &DecodingSettings::default());
        assert!(matches!(out.params, Err(ProposalFailure::Parse(_))));
        assert_eq!(out.transcript.len(), 2);
    }

    #[test]
    fn transport_failure_is_recorded() {
        let (t, s) = (targets(), SpaceConfig::default());
        let mut b = ScriptedBackend::new(vec![ScriptEntry::Error("timeout".into())]);
        let out = propose(&mut b, &ctx(&t, &s), &DecodingSettings::default());
        assert!(matches!(out.params, Err(ProposalFailure::Transport(_))));
        assert_eq!(out.transcript.len(), 1);
        assert!(out.transcript[0].error.is_some());
    }

    #[test]
    fn heuristic_backend_yields_valid_design() {
        let (t, s) = (targets(), SpaceConfig::default());
        let mut b = HeuristicBackend::new(&s);
        let p = propose(&mut b, &ctx(&t, &s), &DecodingSettings::default())
            .params
            .unwrap();
        assert!(p.validate(&s).is_empty());
    }

    fn archive(n: usize) -> Vec<FrontPoint> {
        (0..n)
            .map(|i| FrontPoint::new(i * 3, ObjectiveValues::new(i as f64, -(i as f64))))
            .collect()
    }

    #[test]
    fn feedback_truncates_small_archive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, r) = select_feedback(20, &archive(3), &mut rng, 5, 5);
        assert_eq!(p, vec![0, 3, 6]);
        assert_eq!(r.len(), 5);
    }

    #[test]
    fn feedback_draws_distinct_and_replays() {
        let a = archive(40);
        let (p1, r1) = select_feedback(200, &a, &mut ChaCha8Rng::seed_from_u64(9), 5, 5);
        let (p2, r2) = select_feedback(200, &a, &mut ChaCha8Rng::seed_from_u64(9), 5, 5);
        assert_eq!((&p1, &r1), (&p2, &r2));
        let mut r = r1.clone();
        r.sort_unstable();
        r.dedup();
        assert_eq!(r.len(), 5);
        let mut p = p1.clone();
        p.sort_unstable();
        p.dedup();
        assert_eq!(p.len(), 5);
        assert!(p1.iter().all(|id| id % 3 == 0));
    }
}
