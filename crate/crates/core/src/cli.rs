//! The `tulving` command line.
//!
//! Exit statuses: 0 success, 1 domain failure, 2 usage or environment failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{reduce_by_encoding, render_report, tabulate};
use crate::exec::Execution;
use crate::lexicon::Lexicon;
use crate::protocol::{
    run_experiment, AssignmentSource, PromptTemplates, ProtocolError, RunConfig, RunOutput, TrialRecord,
};
use crate::stimuli::{load_stimulus_set, validate_stimuli, StimulusSet};
use crate::subjects::{
    EndpointConfig, EndpointFactory, LatentTraceParams, ReplayFactory, SimulatedFactory, SimulatedProfile,
    SubjectFactory,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_DICT: &str = "data/cmudict.dict";
const DEFAULT_STIMULI: &str = "data/stimuli.json";
const DEFAULT_OUT: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "tulving", version, about = "Dual-cued-recall memory tests for chat language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Rhyme lookups in the pronouncing dictionary
    Lexicon(LexiconArgs),
    /// Check a stimulus file against the dictionary
    Validate(ValidateArgs),
    /// Run an experiment and write trials, manifest and transcripts
    Run(RunArgs),
    /// Tabulate trials and write the signature table and trace matrices
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    #[arg(long, default_value = DEFAULT_DICT)]
    pub dict: PathBuf,
    #[command(subcommand)]
    pub action: LexiconAction,
}

#[derive(Debug, Subcommand)]
pub enum LexiconAction {
    /// List words rhyming with WORD
    Rhymes {
        word: String,
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
    /// Print whether two words rhyme
    Check { a: String, b: String },
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value = DEFAULT_STIMULI)]
    pub stimuli: PathBuf,
    #[arg(long, default_value = DEFAULT_DICT)]
    pub dict: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Simulated,
    Endpoint,
    Replay,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON project config; command-line flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub stimuli: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub subject: Option<SubjectKind>,
    /// Latent probabilities XY,Xy,xY,xy (X associative, Y rhyming) for both encodings
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub p_assoc: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub p_rhyme: Option<Vec<f64>>,
    /// Simulated subject: a successful probe makes the other cue succeed too
    #[arg(long)]
    pub reencode: bool,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Run directory whose transcripts are replayed
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory containing trials.jsonl
    #[arg(long, default_value = DEFAULT_OUT)]
    pub run: PathBuf,
    /// Trials file; defaults to <run>/trials.jsonl
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Output directory; defaults to <run>/report
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Subject selection in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SubjectConfig {
    Simulated {
        #[serde(default)]
        p: Option<[f64; 4]>,
        #[serde(default)]
        p_assoc: Option<[f64; 4]>,
        #[serde(default)]
        p_rhyme: Option<[f64; 4]>,
        #[serde(default)]
        reencode_on_success: bool,
    },
    Endpoint(EndpointConfig),
    Replay {
        dir: PathBuf,
    },
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub stimuli: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub subject: Option<SubjectConfig>,
    #[serde(default)]
    pub repetitions: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn domain(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DOMAIN, message: message.into() }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Lexicon(a) => cmd_lexicon(&a, out),
        Command::Validate(a) => cmd_validate(&a, out),
        Command::Run(a) => cmd_run(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_lexicon(path: &Path) -> Result<Lexicon, Failure> {
    let parsed = Lexicon::load(path).map_err(|e| Failure::usage(e.to_string()))?;
    if !parsed.warnings.is_empty() {
        log::warn!("{} malformed dictionary lines skipped", parsed.warnings.len());
    }
    Ok(parsed.lexicon)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_stimuli(path: &Path) -> Result<StimulusSet, Failure> {
    load_stimulus_set(&read_text(path)?).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
}

fn cmd_lexicon(args: &LexiconArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let lex = load_lexicon(&args.dict)?;
    match &args.action {
        LexiconAction::Rhymes { word, limit } => {
            let words = lex.find_rhymes(word, *limit).map_err(|e| Failure::domain(e.to_string()))?;
            for w in words {
                let _ = writeln!(out, "{w}");
            }
        }
        LexiconAction::Check { a, b } => {
            let verdict = lex.rhymes(a, b).map_err(|e| Failure::domain(e.to_string()))?;
            let _ = writeln!(out, "{verdict}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let set = load_stimuli(&args.stimuli)?;
    let lex = load_lexicon(&args.dict)?;
    let report = validate_stimuli(&set, &lex);
    let _ = writeln!(out, "{report}");
    Ok(if report.passed() { EXIT_OK } else { EXIT_DOMAIN })
}

fn params(cells: &[f64], reencode: bool) -> Result<LatentTraceParams, Failure> {
    let cells: [f64; 4] = cells.try_into().map_err(|_| Failure::usage("latent probabilities need exactly 4 values"))?;
    LatentTraceParams::new(cells, reencode).map_err(Failure::usage)
}

/// Merges the optional config file with command-line flags.
pub fn resolve_config(args: &RunArgs) -> Result<ProjectConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str::<ProjectConfig>(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ProjectConfig::default(),
    };
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value.clone() {
                cfg.$field = Some(v);
            }
        };
    }
    set!(stimuli, args.stimuli);
    set!(templates, args.templates);
    set!(repetitions, args.reps);
    set!(batch_size, args.batch_size);
    set!(parallelism, args.parallelism);
    set!(seed, args.seed);
    set!(out, args.out);

    let to4 = |v: &Option<Vec<f64>>| -> Result<Option<[f64; 4]>, String> {
        v.as_ref()
            .map(|v| v.as_slice().try_into().map_err(|_| "latent probabilities need 4 values".to_string()))
            .transpose()
    };
    let kind = args.subject.or(match &cfg.subject {
        Some(SubjectConfig::Simulated { .. }) => Some(SubjectKind::Simulated),
        Some(SubjectConfig::Endpoint(_)) => Some(SubjectKind::Endpoint),
        Some(SubjectConfig::Replay { .. }) => Some(SubjectKind::Replay),
        None => None,
    });
    cfg.subject = match kind {
        None => return Err("no subject selected (use --subject or a config file)".into()),
        Some(SubjectKind::Simulated) => {
            let (mut p, mut p_assoc, mut p_rhyme, mut reencode) = match cfg.subject.take() {
                Some(SubjectConfig::Simulated { p, p_assoc, p_rhyme, reencode_on_success }) => {
                    (p, p_assoc, p_rhyme, reencode_on_success)
                }
                _ => (None, None, None, false),
            };
            if let Some(v) = to4(&args.p)? {
                p = Some(v);
            }
            if let Some(v) = to4(&args.p_assoc)? {
                p_assoc = Some(v);
            }
            if let Some(v) = to4(&args.p_rhyme)? {
                p_rhyme = Some(v);
            }
            reencode |= args.reencode;
            Some(SubjectConfig::Simulated { p, p_assoc, p_rhyme, reencode_on_success: reencode })
        }
        Some(SubjectKind::Endpoint) => {
            let mut e = match cfg.subject.take() {
                Some(SubjectConfig::Endpoint(e)) => e,
                _ => EndpointConfig::new("", ""),
            };
            if let Some(v) = &args.base_url {
                e.base_url = v.clone();
            }
            if let Some(v) = &args.model {
                e.model = v.clone();
            }
            if let Some(v) = args.temperature {
                e.temperature = v;
            }
            if let Some(v) = args.max_retries {
                e.max_retries = v;
            }
            if let Some(v) = args.timeout_secs {
                e.timeout_secs = v;
            }
            if e.base_url.is_empty() {
                e.base_url = "https://api.openai.com/v1".into();
            }
            Some(SubjectConfig::Endpoint(e))
        }
        Some(SubjectKind::Replay) => {
            let dir = match (&args.replay_dir, cfg.subject.take()) {
                (Some(d), _) => d.clone(),
                (None, Some(SubjectConfig::Replay { dir })) => dir,
                _ => return Err("replay subject needs --replay-dir".into()),
            };
            Some(SubjectConfig::Replay { dir })
        }
    };
    Ok(cfg)
}

fn build_factory(
    subject: &SubjectConfig,
    set: &StimulusSet,
    templates: &PromptTemplates,
    seed: u64,
) -> Result<Box<dyn SubjectFactory>, Failure> {
    Ok(match subject {
        SubjectConfig::Simulated { p, p_assoc, p_rhyme, reencode_on_success } => {
            let base = p.or(*p_assoc).or(*p_rhyme).ok_or_else(|| Failure::usage("simulated subject needs --p"))?;
            let profile = SimulatedProfile {
                associative: params(&p_assoc.unwrap_or(base), *reencode_on_success)?,
                rhyming: params(&p_rhyme.unwrap_or(base), *reencode_on_success)?,
            };
            let factory = SimulatedFactory::new(profile, Arc::new(set.clone()), templates.clone(), seed)
                .map_err(|e| Failure::usage(e.to_string()))?;
            Box::new(factory)
        }
        SubjectConfig::Endpoint(e) => {
            let cfg = e.clone().with_env_key();
            cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
            Box::new(EndpointFactory { cfg })
        }
        SubjectConfig::Replay { dir } => {
            if !dir.is_dir() {
                return Err(Failure::usage(format!("replay directory {} not found", dir.display())));
            }
            Box::new(ReplayFactory { run_dir: dir.clone() })
        }
    })
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = resolve_config(args).map_err(Failure::usage)?;
    let stimuli_path = cfg.stimuli.clone().unwrap_or_else(|| DEFAULT_STIMULI.into());
    let set = load_stimulus_set(&read_text(&stimuli_path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", stimuli_path.display())))?;
    let templates = match &cfg.templates {
        Some(p) => {
            PromptTemplates::from_json(&read_text(p)?).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
        }
        None => PromptTemplates::default(),
    };
    let subject = cfg.subject.clone().expect("resolve_config always selects a subject");
    let seed = cfg.seed.unwrap_or(0);
    let batch_size = cfg.batch_size.unwrap_or(4);
    if batch_size == 0 || set.len() % batch_size != 0 {
        return Err(Failure::usage(format!("batch size {batch_size} does not divide {} items", set.len())));
    }
    if cfg.parallelism == Some(0) {
        return Err(Failure::usage("parallelism must be at least 1"));
    }
    let parallelism = match (&subject, cfg.parallelism) {
        (_, Some(n)) => Some(n),
        (SubjectConfig::Endpoint(_), None) => Some(1),
        _ => None,
    };
    let factory = build_factory(&subject, &set, &templates, seed)?;
    let run_cfg = RunConfig {
        repetitions: cfg.repetitions.unwrap_or(25),
        seed,
        batch_size,
        execution: Execution::from_limit(parallelism),
        assignment: AssignmentSource::Rotating,
    };
    let out_dir = cfg.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());

    let (output, code) = match run_experiment(&set, factory.as_ref(), &templates, &run_cfg) {
        Ok(o) => (o, EXIT_OK),
        Err(ProtocolError::Aborted { invalid, total, output }) => {
            log::error!("run aborted: {invalid} of {total} batches failed");
            (*output, EXIT_DOMAIN)
        }
        Err(e) => return Err(Failure::usage(e.to_string())),
    };
    let resolved = ProjectConfig {
        stimuli: Some(stimuli_path),
        repetitions: Some(run_cfg.repetitions),
        seed: Some(seed),
        batch_size: Some(batch_size),
        ..cfg
    };
    write_run(&out_dir, &output, &set, &templates, &resolved)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", out_dir.display())))?;

    let m = &output.manifest;
    let _ = writeln!(
        out,
        "run {}: {} trials ({} valid) in {} sessions, {} failed batches -> {}",
        m.run_id,
        m.trials,
        m.valid_trials,
        m.sessions,
        m.invalid_batches.len(),
        out_dir.display()
    );
    if code != EXIT_OK {
        return Err(Failure::domain(format!("aborted: {} of {} batches failed", m.invalid_batches.len(), m.sessions)));
    }
    Ok(code)
}

/// Writes trials.jsonl, manifest.json, transcripts/ and copies of the inputs.
pub fn write_run(
    dir: &Path,
    output: &RunOutput,
    set: &StimulusSet,
    templates: &PromptTemplates,
    cfg: &ProjectConfig,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir.join("transcripts"))?;
    std::fs::write(dir.join("trials.jsonl"), TrialRecord::to_jsonl(&output.trials))?;
    let manifest = serde_json::to_string_pretty(&output.manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), manifest)?;
    for (key, t) in &output.transcripts {
        t.save(key.transcript_path(dir))?;
    }
    std::fs::write(dir.join("stimuli.json"), set.to_json())?;
    std::fs::write(dir.join("templates.json"), templates.to_json())?;
    let config = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(dir.join("config.json"), config)
}

fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let trials_path = args.trials.clone().unwrap_or_else(|| args.run.join("trials.jsonl"));
    let trials = TrialRecord::parse_jsonl(&read_text(&trials_path)?)
        .map_err(|e| Failure::domain(format!("{}: {e}", trials_path.display())))?;
    let table = tabulate(&trials).map_err(|e| Failure::domain(e.to_string()))?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.run.join("report"));
    let (report, code) = match reduce_by_encoding(&table) {
        Ok(traces) => (render_report(&traces.named(), Some(&table)), EXIT_OK),
        Err(e) => {
            let mut r = render_report(&[], Some(&table));
            r.text.push_str(&format!("\nreduction failed: {e}\n"));
            (r, EXIT_DOMAIN)
        }
    };
    report.write_to(&out_dir).map_err(|e| Failure::usage(format!("cannot write {}: {e}", out_dir.display())))?;
    let _ = write!(out, "{}", report.text);
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> RunArgs {
        let mut full = vec!["tulving", "run"];
        full.extend_from_slice(list);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Run(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"subject":{"kind":"simulated","p":[1,0,0,0]},"repetitions":3,"seed":5}"#).unwrap();
        let cfg = resolve_config(&args(&["--config", path.to_str().unwrap(), "--seed", "9"])).unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.repetitions, Some(3));
        assert!(matches!(cfg.subject, Some(SubjectConfig::Simulated { p: Some([1.0, 0.0, 0.0, 0.0]), .. })));
    }

    #[test]
    fn subject_required() {
        assert!(resolve_config(&args(&[])).is_err());
        assert!(resolve_config(&args(&["--subject", "replay"])).is_err());
    }

    #[test]
    fn endpoint_flags() {
        let cfg = resolve_config(&args(&[
            "--subject",
            "endpoint",
            "--model",
            "mistral-7b-instruct-v0",
            "--base-url",
            "http://localhost:1/v1",
        ]))
        .unwrap();
        match cfg.subject {
            Some(SubjectConfig::Endpoint(e)) => {
                assert_eq!(e.model, "mistral-7b-instruct-v0");
                assert_eq!(e.temperature, 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["tulving", "bogus"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(["tulving", "run", "--p", "0.5,0.5"], &mut o, &mut e), EXIT_USAGE);
    }
}
