//! Hybrid sampling schedule, trial ledger and hypervolume curves.
//!
//! A run draws `n_init` uniform warmup designs, then performs `n_total`
//! iterations. In the LLM modes iteration `t` goes to the language model when
//! `(t − 1) mod n_step == 0` and to the TPE sampler otherwise. Warmup trials
//! feed the archive and the samplers but are not on the iteration axis.

use std::fs;
use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design_space::{DesignParams, SpaceConfig};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalConfig, EvaluationReport, ObjectiveValues, TargetDiagnostics, TargetSet};
use crate::llm_sampler::{
    propose, select_feedback, BackendConfig, LlmBackend, ProposalFailure, PromptContext,
    PromptVariant, TranscriptRecord,
};
use crate::motpe_sampler::{suggest, Source, TpeConfig, TrialRecord};
use crate::pareto_metrics::{FrontPoint, ParetoArchive, RefPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "bbo")]
    Bbo,
    #[serde(rename = "bbo-llm-minus")]
    BboLlmMinus,
    #[serde(rename = "bbo-llm-plus")]
    BboLlmPlus,
}

impl Mode {
    pub fn prompt_variant(self) -> Option<PromptVariant> {
        match self {
            Mode::Bbo => None,
            Mode::BboLlmMinus => Some(PromptVariant::LlmMinus),
            Mode::BboLlmPlus => Some(PromptVariant::LlmPlus),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bbo" => Ok(Mode::Bbo),
            "bbo-llm-minus" => Ok(Mode::BboLlmMinus),
            "bbo-llm-plus" => Ok(Mode::BboLlmPlus),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected bbo, bbo-llm-minus or bbo-llm-plus)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Bbo => "bbo",
            Mode::BboLlmMinus => "bbo-llm-minus",
            Mode::BboLlmPlus => "bbo-llm-plus",
        })
    }
}

/// Sampler responsible for post-warmup iteration `t` (1-based).
pub fn source_for_iteration(t: usize, mode: Mode, n_step: usize) -> Source {
    debug_assert!(t >= 1 && n_step >= 1);
    match mode {
        Mode::Bbo => Source::Bbo,
        _ if (t - 1).is_multiple_of(n_step) => Source::Llm,
        _ => Source::Bbo,
    }
}

/// Number of LLM slots in `n_total` iterations.
pub fn scheduled_llm_slots(mode: Mode, n_total: usize, n_step: usize) -> usize {
    (1..=n_total)
        .filter(|&t| source_for_iteration(t, mode, n_step) == Source::Llm)
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub targets: TargetSet,
    pub space: SpaceConfig,
    pub mode: Mode,
    pub n_init: usize,
    pub n_step: usize,
    pub n_total: usize,
    pub n_pareto: usize,
    pub n_random: usize,
    pub eval: EvalConfig,
    pub reference: RefPoint,
    pub tpe: TpeConfig,
    pub backend: BackendConfig,
    pub seed: u64,
}

impl RunConfig {
    /// The standard setup: D=4, N_init=10, N_step=10, N_total=200,
    /// N_pareto=N_random=5.
    pub fn standard(targets: TargetSet, mode: Mode, seed: u64) -> Self {
        Self {
            targets,
            space: SpaceConfig::default(),
            mode,
            n_init: 10,
            n_step: 10,
            n_total: 200,
            n_pareto: 5,
            n_random: 5,
            eval: EvalConfig::default(),
            reference: RefPoint::default(),
            tpe: TpeConfig::default(),
            backend: BackendConfig::default(),
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.targets.check()?;
        self.space.check()?;
        self.eval.check()?;
        self.tpe.check()?;
        if self.n_step == 0 || self.n_total == 0 {
            return Err(Error::Config("n_step and n_total must be at least 1".into()));
        }
        if !self.reference.0.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("reference point must be finite".into()));
        }
        Ok(())
    }

    fn tpe_config(&self) -> TpeConfig {
        TpeConfig {
            reference: self.reference,
            ..self.tpe
        }
    }
}

/// Backend calls made for one LLM slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotTranscript {
    pub seed: u64,
    pub iteration: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposed: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<ProposalFailure>,
    pub records: Vec<TranscriptRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// 0 for warmup trials, otherwise the 1-based iteration.
    pub iteration: usize,
    pub trial: TrialRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub config: RunConfig,
    pub ledger: Vec<LedgerEntry>,
    /// Hypervolume of the cumulative archive after each post-warmup iteration.
    pub hv_curve: Vec<f64>,
    pub archive: Vec<FrontPoint>,
    pub transcripts: Vec<SlotTranscript>,
}

impl RunResult {
    pub fn final_hypervolume(&self) -> f64 {
        self.hv_curve.last().copied().unwrap_or(0.0)
    }

    pub fn trials(&self) -> Vec<&TrialRecord> {
        self.ledger.iter().map(|e| &e.trial).collect()
    }
}

/// Runs one seeded experiment, building the backend from `config.backend`
/// when the mode needs one.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    config.check()?;
    if config.mode == Mode::Bbo {
        return run_with_backend(config, None);
    }
    let mut backend = config.backend.build(&config.space)?;
    run_with_backend(config, Some(backend.as_mut()))
}

fn feedback_rng_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

pub fn run_with_backend(
    config: &RunConfig,
    mut backend: Option<&mut (dyn LlmBackend + Send)>,
) -> Result<RunResult> {
    config.check()?;
    let variant = config.mode.prompt_variant();
    if variant.is_some() && backend.is_none() {
        return Err(Error::Config(format!("mode {} needs an LLM backend", config.mode)));
    }
    let tpe = config.tpe_config();
    let settings = config.backend.decoding();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut feedback_rng = ChaCha8Rng::seed_from_u64(feedback_rng_seed(config.seed));

    let mut trials: Vec<TrialRecord> = Vec::with_capacity(config.n_init + config.n_total);
    let mut ledger = Vec::with_capacity(config.n_init + config.n_total);
    let mut archive = ParetoArchive::new();
    let mut hv_curve = Vec::with_capacity(config.n_total);
    let mut transcripts = Vec::new();

    let mut record = |params: DesignParams,
                      source: Source,
                      fallback: bool,
                      iteration: usize,
                      trials: &mut Vec<TrialRecord>,
                      archive: &mut ParetoArchive|
     -> Result<()> {
        let report = evaluate(&params, &config.targets, &config.eval)?;
        let id = trials.len();
        let trial = TrialRecord {
            id,
            source,
            fallback,
            objectives: report.objectives,
            params,
            report,
        };
        archive.insert(FrontPoint::new(id, trial.objectives));
        ledger.push(LedgerEntry {
            iteration,
            trial: trial.clone(),
        });
        trials.push(trial);
        Ok(())
    };

    for _ in 0..config.n_init {
        let p = DesignParams::random_sample(&mut rng, &config.space);
        record(p, Source::Random, false, 0, &mut trials, &mut archive)?;
    }

    for t in 1..=config.n_total {
        let (params, source, fallback) = match (source_for_iteration(t, config.mode, config.n_step), variant) {
            (Source::Llm, Some(variant)) => {
                let backend = backend.as_deref_mut().expect("checked above");
                let members = archive.members();
                let (pi, ri) = select_feedback(
                    trials.len(),
                    &members,
                    &mut feedback_rng,
                    config.n_pareto,
                    config.n_random,
                );
                let ctx = PromptContext {
                    targets: &config.targets,
                    space: &config.space,
                    alpha: config.eval.alpha,
                    pareto_feedback: pi.iter().map(|&i| &trials[i].report).collect(),
                    random_feedback: ri.iter().map(|&i| &trials[i].report).collect(),
                    variant,
                };
                let outcome = propose(backend, &ctx, &settings);
                let proposed = outcome.params.as_ref().ok().map(DesignParams::to_vector);
                let checked = outcome.params.clone().and_then(|p| {
                    p.ensure_valid(&config.space)
                        .map(|_| p)
                        .map_err(|e| ProposalFailure::Parse(e.to_string()))
                });
                transcripts.push(SlotTranscript {
                    seed: config.seed,
                    iteration: t,
                    proposed,
                    failure: checked.as_ref().err().cloned(),
                    records: outcome.transcript,
                });
                match checked {
                    Ok(p) => (p, Source::Llm, false),
                    Err(_) => (suggest(&mut rng, &trials, &tpe, &config.space), Source::Bbo, true),
                }
            }
            _ => (suggest(&mut rng, &trials, &tpe, &config.space), Source::Bbo, false),
        };
        record(params, source, fallback, t, &mut trials, &mut archive)?;
        hv_curve.push(archive.hypervolume(config.reference));
    }

    Ok(RunResult {
        config: config.clone(),
        ledger,
        hv_curve,
        archive: archive.members(),
        transcripts,
    })
}

/// Runs the same configuration once per seed, concurrently.
pub fn run_seeds(base: &RunConfig, seeds: &[u64]) -> Result<Vec<RunResult>> {
    let configs: Vec<RunConfig> = seeds
        .iter()
        .map(|&seed| RunConfig {
            seed,
            ..base.clone()
        })
        .collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    })
}

/// Pointwise mean and population standard deviation of hypervolume curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvAggregate {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub final_values: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
    /// Mean curve averaged over all iterations.
    pub e_hv: f64,
    /// Pointwise standard deviation averaged over all iterations.
    pub sigma_hv: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<HvAggregate> {
    let Some(first) = curves.first() else {
        return Err(Error::Config("no curves to aggregate".into()));
    };
    let len = first.len();
    if len == 0 || curves.iter().any(|c| c.len() != len) {
        return Err(Error::Config("hypervolume curves differ in length or are empty".into()));
    }
    let (mean, std): (Vec<f64>, Vec<f64>) = (0..len)
        .map(|t| mean_std(&curves.iter().map(|c| c[t]).collect::<Vec<_>>()))
        .unzip();
    let final_values: Vec<f64> = curves.iter().map(|c| c[len - 1]).collect();
    let (final_mean, final_std) = mean_std(&final_values);
    Ok(HvAggregate {
        e_hv: mean.iter().sum::<f64>() / len as f64,
        sigma_hv: std.iter().sum::<f64>() / len as f64,
        mean,
        std,
        final_values,
        final_mean,
        final_std,
    })
}

/// Aggregates runs that share every setting except the seed.
pub fn aggregate_runs(results: &[RunResult]) -> Result<HvAggregate> {
    if let Some(first) = results.first() {
        let key = |c: &RunConfig| RunConfig { seed: 0, ..c.clone() };
        let base = key(&first.config);
        if results.iter().any(|r| key(&r.config) != base) {
            return Err(Error::Config("runs differ in more than their seed".into()));
        }
    }
    aggregate_curves(&results.iter().map(|r| r.hv_curve.clone()).collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------
// Ledger persistence

/// One line of the ledger file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerLine {
    pub id: usize,
    pub iteration: usize,
    pub source: Source,
    pub fallback: bool,
    /// `[O(3), M(D) codes, L(D)]`.
    pub params: Vec<f64>,
    pub objectives: ObjectiveValues,
    pub per_target: Vec<TargetDiagnostics>,
}

impl From<&LedgerEntry> for LedgerLine {
    fn from(e: &LedgerEntry) -> Self {
        Self {
            id: e.trial.id,
            iteration: e.iteration,
            source: e.trial.source,
            fallback: e.trial.fallback,
            params: e.trial.params.to_vector(),
            objectives: e.trial.objectives,
            per_target: e.trial.report.per_target.clone(),
        }
    }
}

impl LedgerLine {
    pub fn to_entry(&self) -> Result<LedgerEntry> {
        if self.params.len() < 5 || self.params.len().is_multiple_of(2) {
            return Err(Error::Parse(format!(
                "parameter vector of length {} is not 2D+3",
                self.params.len()
            )));
        }
        let space = SpaceConfig::with_dof((self.params.len() - 3) / 2);
        let params = DesignParams::from_vector(&self.params, &space)?;
        Ok(LedgerEntry {
            iteration: self.iteration,
            trial: TrialRecord {
                id: self.id,
                source: self.source,
                fallback: self.fallback,
                params: params.clone(),
                objectives: self.objectives,
                report: EvaluationReport {
                    objectives: self.objectives,
                    per_target: self.per_target.clone(),
                    params,
                },
            },
        })
    }
}

pub fn write_ledger(path: impl AsRef<Path>, ledger: &[LedgerEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for e in ledger {
        let line = serde_json::to_string(&LedgerLine::from(e))
            .map_err(|e| Error::Parse(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a ledger file; malformed lines are reported with their 1-based number.
pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<LedgerLine>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LedgerLine = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(parsed);
    }
    Ok(out)
}

/// Rebuilds the archive and hypervolume curve from ledger lines alone.
pub fn replay_ledger(lines: &[LedgerLine], reference: RefPoint) -> (Vec<FrontPoint>, Vec<f64>) {
    let mut archive = ParetoArchive::new();
    let mut curve = Vec::new();
    for l in lines {
        archive.insert(FrontPoint::new(l.id, l.objectives));
        if l.iteration > 0 {
            curve.push(archive.hypervolume(reference));
        }
    }
    (archive.members(), curve)
}

pub fn write_curve_csv(path: impl AsRef<Path>, curve: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["iteration", "hypervolume"]).map_err(csv_err)?;
    for (t, v) in curve.iter().enumerate() {
        w.write_record([(t + 1).to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    r.records()
        .enumerate()
        .map(|(n, rec)| {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            rec.get(1)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("{} row {}: bad value", path.display(), n + 2)))
        })
        .collect()
}

pub fn write_aggregate_csv(path: impl AsRef<Path>, agg: &HvAggregate) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["iteration", "mean", "std"]).map_err(csv_err)?;
    for (t, (m, s)) in agg.mean.iter().zip(&agg.std).enumerate() {
        w.write_record([(t + 1).to_string(), m.to_string(), s.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Table with one curve per column followed by a mean and standard deviation
/// column pair for each named group of curves.
pub fn curves_table_csv(
    names: &[String],
    curves: &[Vec<f64>],
    groups: &[(String, HvAggregate)],
) -> Result<String> {
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    let len = curves.first().map_or(0, Vec::len);
    if curves.iter().any(|c| c.len() != len) || groups.iter().any(|(_, g)| g.mean.len() != len) {
        return Err(Error::Config("curves differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string()];
    header.extend(names.iter().cloned());
    for (g, _) in groups {
        header.push(format!("{g}:mean"));
        header.push(format!("{g}:std"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..len {
        let mut row = vec![(t + 1).to_string()];
        row.extend(curves.iter().map(|c| c[t].to_string()));
        for (_, agg) in groups {
            row.push(agg.mean[t].to_string());
            row.push(agg.std[t].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Files written for one seeded run.
pub struct RunPaths {
    pub dir: PathBuf,
    pub ledger: PathBuf,
    pub curve: PathBuf,
    pub transcripts: PathBuf,
}

impl RunPaths {
    pub fn new(out_dir: &Path, seed: u64) -> Self {
        let dir = out_dir.join(format!("seed-{seed}"));
        Self {
            ledger: dir.join("ledger.jsonl"),
            curve: dir.join("hv.csv"),
            transcripts: dir.join("transcripts"),
            dir,
        }
    }
}

/// Writes the ledger, curve and one transcript file per LLM slot.
pub fn write_run_artifacts(out_dir: &Path, result: &RunResult) -> Result<RunPaths> {
    let paths = RunPaths::new(out_dir, result.config.seed);
    fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    write_ledger(&paths.ledger, &result.ledger)?;
    write_curve_csv(&paths.curve, &result.hv_curve)?;
    if !result.transcripts.is_empty() {
        fs::create_dir_all(&paths.transcripts).map_err(|e| Error::io(&paths.transcripts, e))?;
        for slot in &result.transcripts {
            let path = paths.transcripts.join(format!("iter-{:04}.json", slot.iteration));
            let mut text =
                serde_json::to_string_pretty(slot).map_err(|e| Error::Parse(e.to_string()))?;
            text.push('\n');
            let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(paths)
}
