//! Command-line front end: evaluate a design, run experiments, export URDF,
//! rebuild reports from ledgers and turn a ledger's front into a mock script.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use robodesign_core::experiment::Experiment;
use robodesign_core::llm_sampler::{design_script, write_script, BackendConfig};
use robodesign_core::orchestrator::{
    aggregate_curves, aggregate_runs, curves_table_csv, read_curve_csv, read_ledger,
    replay_ledger, run_seeds, scheduled_llm_slots, write_aggregate_csv, write_run_artifacts,
    LedgerLine,
};
use robodesign_core::{evaluate, DesignParams, EvalConfig, Mode, RefPoint, RunResult, Source, SpaceConfig, TargetSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// A failure tagged with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn message(&self) -> String {
        let (Failure::Input(e) | Failure::Runtime(e)) = self;
        format!("{e:#}")
    }
}

trait OrFailure<T> {
    fn input(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFailure<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "robodesign", version, about = "Serial-arm morphology optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one design against a target set and print the report as JSON.
    Evaluate {
        #[command(flatten)]
        design: DesignInput,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, default_value_t = 40.0)]
        alpha: f64,
    },
    /// Run an experiment file for each of its seeds.
    Run(RunArgs),
    /// Write the URDF description of a design.
    Urdf {
        #[command(flatten)]
        design: DesignInput,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute archives and hypervolume curves from ledgers.
    Report {
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
        /// Reference point as `x,y`.
        #[arg(long = "ref", value_parser = parse_ref, default_value = "5,5")]
        reference: RefPoint,
        /// Write the curve table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Turn the Pareto front of a ledger into a scripted mock-backend file.
    Script {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct DesignInput {
    /// TOML file with `origin`, `joints` and `lengths`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Flat vector `O(3), joint codes (0=R, 1=P, 2=Y), L(D)`, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub vector: Option<String>,
    /// Joint count used to read `--vector`.
    #[arg(long, default_value_t = 4, requires = "vector")]
    pub dof: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Mock,
    Http,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub experiment: PathBuf,
    /// Comma-separated seeds overriding the file.
    #[arg(long, value_delimiter = ',')]
    pub seed: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub n_step: Option<usize>,
    /// `mock` keeps a mock backend from the file (or uses the built-in
    /// heuristic one); `http` requires the file to configure a live endpoint.
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

fn parse_ref(s: &str) -> Result<RefPoint, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b] if a.is_finite() && b.is_finite() => Ok(RefPoint([*a, *b])),
        _ => Err("expected two finite numbers `x,y`".into()),
    }
}

fn load_design(input: &DesignInput) -> Result<(DesignParams, SpaceConfig), Failure> {
    let params = match (&input.params, &input.vector) {
        (Some(path), _) => DesignParams::load(path).input()?,
        (None, Some(text)) => {
            let values = text
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| anyhow!("vector entry '{}': {e}", x.trim()))
                })
                .collect::<anyhow::Result<Vec<f64>>>()
                .input()?;
            DesignParams::from_vector(&values, &SpaceConfig::with_dof(input.dof)).input()?
        }
        (None, None) => return Err(Failure::Input(anyhow!("either --params or --vector is required"))),
    };
    let space = SpaceConfig::with_dof(params.dof());
    params.ensure_valid(&space).input()?;
    Ok((params, space))
}

fn to_json<T: serde::Serialize + ?Sized>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).runtime()?;
    s.push('\n');
    Ok(s)
}

fn cmd_evaluate(design: &DesignInput, targets: &Path, alpha: f64, out: &mut dyn Write) -> Result<(), Failure> {
    let (params, _) = load_design(design)?;
    let targets = TargetSet::load(targets).input()?;
    let cfg = EvalConfig {
        alpha,
        ..EvalConfig::default()
    };
    cfg.check().input()?;
    let report = evaluate(&params, &targets, &cfg).runtime()?;
    out.write_all(to_json(&report)?.as_bytes()).runtime()
}

fn cmd_urdf(design: &DesignInput, dest: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let (params, space) = load_design(design)?;
    let xml = params.emit_urdf(&space).input()?;
    match dest {
        Some(path) => fs::write(path, xml)
            .with_context(|| format!("writing {}", path.display()))
            .runtime(),
        None => out.write_all(xml.as_bytes()).runtime(),
    }
}

fn apply_overrides(exp: &mut Experiment, args: &RunArgs) -> Result<(), Failure> {
    let f = &mut exp.file;
    if let Some(seeds) = &args.seed {
        f.seeds = seeds.clone();
    }
    if let Some(mode) = args.mode {
        f.mode = mode;
    }
    if let Some(n) = args.n_step {
        f.n_step = n;
    }
    if let Some(out) = &args.out {
        f.out = out.clone();
    }
    match args.backend {
        Some(BackendChoice::Mock) if !f.backend.is_mock() => f.backend = BackendConfig::MockHeuristic,
        Some(BackendChoice::Http) if f.backend.is_mock() => {
            return Err(Failure::Input(anyhow!(
                "--backend http needs a [backend] table with kind = \"http\" in the experiment file"
            )))
        }
        _ => {}
    }
    exp.check().input()
}

fn front_json(result: &RunResult) -> serde_json::Value {
    let rows: Vec<_> = result
        .archive
        .iter()
        .map(|p| {
            let t = &result.ledger[p.trial_id].trial;
            json!({
                "trial": t.id,
                "source": t.source,
                "e_pos": t.objectives.e_pos,
                "e_torque": t.objectives.e_torque,
                "joints": t.params.joint_string(),
                "params": t.params.to_vector(),
            })
        })
        .collect();
    json!(rows)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut exp = Experiment::load(&args.experiment).input()?;
    apply_overrides(&mut exp, args)?;
    let f = &exp.file;
    let base = exp.run_config(f.seeds[0]);
    if base.mode != Mode::Bbo {
        // Surface missing tokens or unreadable scripts as input errors before any work starts.
        base.backend.build(&base.space).input()?;
    }
    fs::create_dir_all(&f.out)
        .with_context(|| format!("creating output directory {}", f.out.display()))
        .runtime()?;

    let results = run_seeds(&base, &f.seeds).runtime()?;
    for r in &results {
        write_run_artifacts(&f.out, r).runtime()?;
    }
    let agg = aggregate_runs(&results).runtime()?;
    write_aggregate_csv(f.out.join("hv_summary.csv"), &agg).runtime()?;

    let slots = scheduled_llm_slots(base.mode, base.n_total, base.n_step);
    let per_seed: Vec<_> = results
        .iter()
        .zip(&agg.final_values)
        .map(|(r, hv)| {
            let count = |pred: &dyn Fn(&robodesign_core::TrialRecord) -> bool| {
                r.ledger.iter().filter(|e| pred(&e.trial)).count()
            };
            json!({
                "seed": r.config.seed,
                "final_hv": hv,
                "trials": r.ledger.len(),
                "llm_accepted": count(&|t| t.source == Source::Llm),
                "llm_fallbacks": count(&|t| t.fallback),
                "front": front_json(r),
            })
        })
        .collect();
    let summary = json!({
        "name": f.name,
        "mode": base.mode,
        "targets": base.targets.name,
        "n_init": base.n_init,
        "n_step": base.n_step,
        "n_total": base.n_total,
        "reference": base.reference,
        "scheduled_llm_slots": slots,
        "final_hv_mean": agg.final_mean,
        "final_hv_std": agg.final_std,
        "e_hv": agg.e_hv,
        "sigma_hv": agg.sigma_hv,
        "seeds": per_seed,
    });
    fs::write(f.out.join("summary.json"), to_json(&summary)?)
        .with_context(|| format!("writing summary in {}", f.out.display()))
        .runtime()?;

    let mut text = format!(
        "{} ({}, {} seeds, {} trials each)\n",
        f.name,
        base.mode,
        f.seeds.len(),
        base.n_init + base.n_total
    );
    for (r, hv) in results.iter().zip(&agg.final_values) {
        text.push_str(&format!("  seed {:>4}: final E_hv {:.4}\n", r.config.seed, hv));
    }
    text.push_str(&format!(
        "  final E_hv mean {:.4} std {:.4}; time-averaged E_hv {:.4} sigma {:.4}\n  artifacts in {}\n",
        agg.final_mean,
        agg.final_std,
        agg.e_hv,
        agg.sigma_hv,
        f.out.display()
    ));
    out.write_all(text.as_bytes()).runtime()
}

/// Ledgers written by `run` live in `<out>/seed-<s>/ledger.jsonl`; curves are
/// grouped by `<out>`. Any other ledger forms a group of its own.
fn experiment_key(ledger: &Path) -> String {
    let parent = ledger.parent();
    match parent.and_then(|p| p.file_name()).and_then(|n| n.to_str()) {
        Some(name) if name.starts_with("seed-") => parent
            .and_then(Path::parent)
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        _ => ledger.display().to_string(),
    }
}

fn cmd_report(
    ledgers: &[PathBuf],
    reference: RefPoint,
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let mut names = Vec::new();
    let mut curves = Vec::new();
    let mut fronts = Vec::new();
    for path in ledgers {
        let lines: Vec<LedgerLine> = read_ledger(path).input()?;
        let (front, curve) = replay_ledger(&lines, reference);
        let stored = path.with_file_name("hv.csv");
        if stored.exists() && reference == RefPoint::default() {
            let saved = read_curve_csv(&stored).input()?;
            if saved != curve {
                return Err(Failure::Runtime(anyhow!(
                    "{}: recomputed curve differs from {}",
                    path.display(),
                    stored.display()
                )));
            }
        }
        names.push(path.display().to_string());
        curves.push(curve);
        fronts.push((path, front, lines));
    }
    if curves.iter().any(|c| c.len() != curves[0].len()) {
        return Err(Failure::Input(anyhow!("ledgers must have the same number of iterations")));
    }
    let mut groups: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (path, curve) in ledgers.iter().zip(&curves) {
        let key = experiment_key(path);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(curve.clone()),
            None => groups.push((key, vec![curve.clone()])),
        }
    }
    let groups: Vec<_> = groups
        .into_iter()
        .map(|(k, members)| aggregate_curves(&members).map(|a| (k, a)))
        .collect::<Result<_, _>>()
        .input()?;
    let table = curves_table_csv(&names, &curves, &groups).runtime()?;
    match csv {
        Some(p) => fs::write(p, &table)
            .with_context(|| format!("writing {}", p.display()))
            .runtime()?,
        None => out.write_all(table.as_bytes()).runtime()?,
    }

    let mut text = String::from("\nledger,trial,source,e_pos,e_torque,joints\n");
    for (path, front, lines) in &fronts {
        for p in front {
            let l = lines
                .iter()
                .find(|l| l.id == p.trial_id)
                .expect("front ids come from the ledger");
            let joints: Vec<String> = l.params[3..3 + (l.params.len() - 3) / 2]
                .iter()
                .map(|&c| {
                    robodesign_core::JointType::from_code(c)
                        .map(|j| j.letter().to_string())
                        .unwrap_or_else(|_| "?".into())
                })
                .collect();
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                path.display(),
                l.id,
                l.source,
                l.objectives.e_pos,
                l.objectives.e_torque,
                joints.join("-")
            ));
        }
    }
    text.push('\n');
    for (key, agg) in &groups {
        text.push_str(&format!(
            "{key}: {} ledgers, final E_hv mean {} std {}; time-averaged E_hv {} sigma {}\n",
            agg.final_values.len(),
            agg.final_mean,
            agg.final_std,
            agg.e_hv,
            agg.sigma_hv
        ));
    }
    out.write_all(text.as_bytes()).runtime()
}

fn cmd_script(ledger: &Path, dest: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let lines = read_ledger(ledger).input()?;
    if lines.is_empty() {
        return Err(Failure::Input(anyhow!("{}: ledger is empty", ledger.display())));
    }
    let (front, _) = replay_ledger(&lines, RefPoint::default());
    let mut entries = Vec::with_capacity(2 * front.len());
    for p in &front {
        let entry = lines[..]
            .iter()
            .find(|l| l.id == p.trial_id)
            .expect("front ids come from the ledger")
            .to_entry()
            .input()?;
        let note = format!(
            "Archived design {} reached E_pos={:.4}, E_torque={:.4}.",
            p.trial_id, p.objectives.e_pos, p.objectives.e_torque
        );
        entries.extend(design_script(&entry.trial.params, &note));
    }
    write_script(dest, &entries).runtime()?;
    writeln!(out, "wrote {} designs to {}", front.len(), dest.display()).runtime()
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Evaluate {
            design,
            targets,
            alpha,
        } => cmd_evaluate(design, targets, *alpha, out),
        Command::Run(args) => cmd_run(args, out),
        Command::Urdf { design, out: dest } => cmd_urdf(design, dest.as_deref(), out),
        Command::Report {
            ledgers,
            reference,
            csv,
        } => cmd_report(ledgers, *reference, csv.as_deref(), out),
        Command::Script { ledger, out: dest } => cmd_script(ledger, dest, out),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to `err`.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}
