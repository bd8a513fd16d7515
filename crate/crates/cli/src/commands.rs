use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairsumm_core::ingest::{
    convert_dialogue, convert_review_corpus, read_corpus, save_corpus, truncate_segments, KeyPolicy, DEFAULT_SEPARATOR,
};
use fairsumm_core::metrics::{auc_exact, bur};
use fairsumm_core::model::{
    normalize_distribution, MatcherConfig, SofMode, SplitMode, DEFAULT_AUC_GRID, DEFAULT_K,
    DEFAULT_SOFTMAX_TEMPERATURE, DEFAULT_TOLERANCE,
};
use fairsumm_core::synth::{generate_mixture, lead_summary, synthetic_pool, unit_counts, MixtureSpec, Pool, PoolSpec};
use fairsumm_core::{AttributeSpec, FairnessConfig, GoldPolicy, Provenance, Sample, SampleMetrics, ValueDistribution};
use fairsumm_harness::sweep::{load_manifest, save_manifest};
use fairsumm_harness::{
    apply_manifest, run_sweep, GenerationConfig, HttpGenerator, PromptTemplate, SweepAxis, TemplateId,
};

use crate::error::{CliError, Result, EXIT_OK, EXIT_VALIDATION};
use crate::pipeline::{aggregate_by_system, evaluate_corpus, Matcher};
use crate::report::{
    sha256_hex, tool_version, write_output, Format, MetricReport, RunConfig, SweepCurve, SweepReport, REPORT_SCHEMA,
    SWEEP_SCHEMA,
};

const DEFAULT_SEGMENT_TOKENS_STR: &str = "1800";

#[derive(Debug, Parser)]
#[command(
    name = "fairsumm",
    version,
    about = "Reference-free fairness evaluation for abstractive summaries"
)]
pub struct Cli {
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every summary in a corpus and write a metric report.
    Evaluate(EvaluateArgs),
    /// BUR as a function of the tolerance τ, plus AUC.
    Sweep(SweepArgs),
    /// Write synthetic source mixtures at a chosen value ratio.
    Synth(SynthArgs),
    /// Request summaries from a chat-completions endpoint.
    Generate(GenerateArgs),
    /// Turn raw review or dialogue text into corpus lines.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatcherKind {
    Rule,
    Scorer,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GoldKind {
    Ratio,
    Equal,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Fractional,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SofArg {
    Underrepresentation,
    Literal,
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// Corpus file, one JSON sample per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "rule")]
    pub matcher: MatcherKind,
    /// Precomputed score file for `--matcher file`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Sidecar launch command for `--matcher scorer`; defaults to $FAIRSUMM_SCORER_CMD.
    #[arg(long)]
    pub scorer_cmd: Option<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// How a k-gram found under several values is counted.
    #[arg(long, value_enum, default_value = "fractional")]
    pub split: SplitArg,
    #[arg(long, default_value_t = DEFAULT_SOFTMAX_TEMPERATURE)]
    pub softmax_temp: f64,
    #[arg(long, value_enum, default_value = "ratio")]
    pub gold: GoldKind,
    /// Comma-separated gold weights for `--gold custom`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_AUC_GRID)]
    pub auc_grid: usize,
    #[arg(long, value_enum, default_value = "underrepresentation")]
    pub sof: SofArg,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Drop unknown keys with a warning instead of rejecting the line.
    #[arg(long)]
    pub lenient_keys: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Explicit τ values; overrides `--tau-grid`.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// τ = i/N for i = 0..=N.
    #[arg(long, default_value_t = 10)]
    pub tau_grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Target value ratio, e.g. `0.2,0.8`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ratio: Vec<f64>,
    /// Units per mixture.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of mixtures.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Pool of `{"text","value"}` lines; a synthetic pool is used when omitted.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value = "gender")]
    pub attribute: String,
    #[arg(long, value_delimiter = ',', default_value = "male,female")]
    pub values: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Corpus written with the generated summaries attached.
    #[arg(long)]
    pub out: PathBuf,
    /// Generation manifest to write, or to read with `--replay`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Rebuild `--out` from an existing manifest without calling the endpoint.
    #[arg(long)]
    pub replay: bool,
    #[arg(long, default_value = "claritin")]
    pub template: String,
    #[arg(long, default_value = "gpt-3.5-turbo")]
    pub model: String,
    /// Full chat-completions URL; $FAIRSUMM_BASE_URL overrides the default.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, value_delimiter = ',', group = "axis")]
    pub temperatures: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', group = "axis")]
    pub sentences: Option<Vec<u32>>,
    /// `on`, `off` or both, comma-separated.
    #[arg(long, value_delimiter = ',', group = "axis")]
    pub instruction: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 512)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long)]
    pub lenient_keys: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    #[command(subcommand)]
    pub kind: ConvertKind,
}

#[derive(Debug, Clone, Subcommand)]
pub enum ConvertKind {
    /// Delimiter-joined reviews with one label per line in a separate file.
    Reviews {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        attribute: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = DEFAULT_SEPARATOR)]
        separator: String,
        #[command(flatten)]
        common: ConvertCommon,
    },
    /// `SPEAKER : text` transcripts, one turn per line.
    Dialogue {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        id: String,
        #[command(flatten)]
        common: ConvertCommon,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ConvertCommon {
    #[arg(long)]
    pub out: PathBuf,
    /// Split long sources into segments of at most this many tokens (1800 when given bare).
    #[arg(long, num_args = 0..=1, default_missing_value = DEFAULT_SEGMENT_TOKENS_STR)]
    pub segment_tokens: Option<usize>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::error::EXIT_IO } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Convert(args) => cmd_convert(&args),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn key_policy(lenient: bool) -> KeyPolicy {
    if lenient {
        KeyPolicy::Lenient
    } else {
        KeyPolicy::Strict
    }
}

struct Loaded {
    samples: Vec<Sample>,
    warnings: Vec<String>,
    sha256: String,
}

fn load(path: &Path, lenient: bool) -> Result<Loaded> {
    let bytes = read_bytes(path)?;
    let corpus = read_corpus(&bytes[..], key_policy(lenient))?;
    Ok(Loaded {
        samples: corpus.samples,
        warnings: corpus
            .warnings
            .iter()
            .map(|w| format!("line {}: {}", w.line, w.message))
            .collect(),
        sha256: sha256_hex(&bytes),
    })
}

/// Turns metric flags into a validated fairness config.
pub fn fairness_config(args: &MetricArgs) -> Result<FairnessConfig> {
    let matcher = match args.matcher {
        MatcherKind::Rule => MatcherConfig::Rule {
            k: args.k,
            split: match args.split {
                SplitArg::Fractional => SplitMode::Fractional,
                SplitArg::Full => SplitMode::Full,
            },
        },
        MatcherKind::Scorer => MatcherConfig::Scorer {
            name: "sidecar".into(),
            softmax_temperature: args.softmax_temp,
        },
        MatcherKind::File => {
            let path = args
                .scores
                .as_ref()
                .ok_or_else(|| CliError::Config("--matcher file needs --scores".into()))?;
            MatcherConfig::File {
                path: path.display().to_string(),
                softmax_temperature: args.softmax_temp,
            }
        }
    };
    let gold_policy = match (args.gold, &args.weights) {
        (GoldKind::Ratio, None) => GoldPolicy::Ratio,
        (GoldKind::Equal, None) => GoldPolicy::Equal,
        (GoldKind::Custom, Some(w)) => GoldPolicy::Custom { weights: w.clone() },
        (GoldKind::Custom, None) => return Err(CliError::Config("--gold custom needs --weights".into())),
        (_, Some(_)) => return Err(CliError::Config("--weights only applies to --gold custom".into())),
    };
    let config = FairnessConfig {
        gold_policy,
        tolerance: args.tau,
        matcher,
        auc_grid_size: args.auc_grid,
        sof_mode: match args.sof {
            SofArg::Underrepresentation => SofMode::Underrepresentation,
            SofArg::Literal => SofMode::Literal,
        },
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

struct Evaluated {
    run: RunConfig,
    loaded: Loaded,
    samples: Vec<SampleMetrics>,
    failures: Vec<crate::pipeline::Failure>,
}

fn evaluate_common(args: &MetricArgs, subcommand: &str, format: Format, out: Option<&Path>) -> Result<Evaluated> {
    let mut fairness = fairness_config(args)?;
    let loaded = load(&args.input, args.lenient_keys)?;
    let matcher = Matcher::from_config(&fairness.matcher, args.scorer_cmd.as_deref())?;
    fairness.matcher = matcher.resolved_config(&fairness.matcher);
    let evaluation = evaluate_corpus(&loaded.samples, &fairness, &matcher, args.workers)?;
    for f in &evaluation.failures {
        log::warn!("{} / {}: {}", f.sample_id, f.system, f.reason);
    }
    let run = RunConfig {
        subcommand: subcommand.to_string(),
        input: args.input.display().to_string(),
        fairness,
        lenient_keys: args.lenient_keys,
        format,
        out: out.map(|p| p.display().to_string()),
        taus: None,
    };
    Ok(Evaluated {
        run,
        loaded,
        samples: evaluation.samples,
        failures: evaluation.failures,
    })
}

pub fn build_report(args: &EvaluateArgs) -> Result<MetricReport> {
    let e = evaluate_common(&args.metric, "evaluate", args.format, args.out.as_deref())?;
    let systems = aggregate_by_system(&e.samples, &e.run.fairness)?;
    Ok(MetricReport {
        schema: REPORT_SCHEMA.to_string(),
        tool_version: tool_version(),
        run: e.run,
        input_sha256: e.loaded.sha256,
        systems,
        samples: e.samples,
        failures: e.failures,
        warnings: e.loaded.warnings,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let report = build_report(args)?;
    write_output(args.out.as_deref(), &report.render(args.format)?)?;
    if report.samples.is_empty() {
        eprintln!("error: no summary could be evaluated");
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}

pub fn tau_list(args: &SweepArgs) -> Result<Vec<f64>> {
    let taus = match &args.taus {
        Some(t) => t.clone(),
        None => {
            if args.tau_grid == 0 {
                return Err(CliError::Config("--tau-grid must be at least 1".into()));
            }
            (0..=args.tau_grid).map(|i| i as f64 / args.tau_grid as f64).collect()
        }
    };
    if taus.is_empty() {
        return Err(CliError::Config("no τ values given".into()));
    }
    if let Some(t) = taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CliError::Config(format!("τ = {t} outside [0, 1]")));
    }
    Ok(taus)
}

fn distribution(weights: &[f64], provenance: Provenance) -> Result<ValueDistribution> {
    Ok(ValueDistribution::new(weights.to_vec(), provenance)?)
}

pub fn build_sweep(args: &SweepArgs) -> Result<SweepReport> {
    let taus = tau_list(args)?;
    let mut e = evaluate_common(&args.metric, "sweep", args.format, args.out.as_deref())?;
    e.run.taus = Some(taus.clone());
    let systems = aggregate_by_system(&e.samples, &e.run.fairness)?;

    let mut curves = Vec::new();
    for system in &systems {
        let members: Vec<&SampleMetrics> = e.samples.iter().filter(|m| m.system == system.system).collect();
        let n = members.len() as f64;
        let pairs = members
            .iter()
            .map(|m| {
                Ok((
                    distribution(&m.target, Provenance::Target)?,
                    distribution(&m.gold, Provenance::Gold)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bur_pct = Vec::with_capacity(taus.len());
        for &tau in &taus {
            let mut unfair = 0u32;
            for (y, g) in &pairs {
                unfair += u32::from(bur(y, g, tau)?.indicator());
            }
            bur_pct.push(f64::from(unfair) / n * 100.0);
        }
        let mut exact = 0.0;
        for (y, g) in &pairs {
            exact += auc_exact(y, g)?;
        }
        curves.push(SweepCurve {
            system: system.system.clone(),
            n_samples: members.len(),
            bur_pct,
            auc_pct: system.dataset.auc_pct,
            auc_exact_pct: exact / n * 100.0,
        });
    }
    Ok(SweepReport {
        schema: SWEEP_SCHEMA.to_string(),
        tool_version: tool_version(),
        run: e.run,
        input_sha256: e.loaded.sha256,
        taus,
        curves,
        failures: e.failures,
        warnings: e.loaded.warnings,
    })
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let report = build_sweep(args)?;
    write_output(args.out.as_deref(), &report.render(args.format)?)?;
    if report.curves.is_empty() {
        eprintln!("error: no summary could be evaluated");
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}

/// Mixture samples as written by `synth`, without touching the filesystem.
pub fn synth_samples(args: &SynthArgs) -> Result<Vec<Sample>> {
    if args.count == 0 || args.n == 0 {
        return Err(CliError::Config("--n and --count must be positive".into()));
    }
    let pool = match &args.pool {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
            Pool::load(path, &args.attribute, Some(args.values.clone()))?
        }
        None => {
            let attribute = AttributeSpec::new(args.attribute.clone(), args.values.clone())?;
            let base = PoolSpec::default();
            let per_value = if base.units_per_value.len() == attribute.arity() {
                base.units_per_value.iter().map(|&u| u.max(args.n)).collect()
            } else {
                vec![200.max(args.n); attribute.arity()]
            };
            synthetic_pool(
                attribute,
                &PoolSpec {
                    units_per_value: per_value,
                    seed: args.seed,
                    ..base
                },
            )?
        }
    };
    let ratio = normalize_distribution(&args.ratio, Provenance::Source)?;
    if ratio.len() != pool.attribute.arity() {
        return Err(CliError::Config(format!(
            "--ratio has {} entries but the attribute has {} values",
            ratio.len(),
            pool.attribute.arity()
        )));
    }
    (0..args.count)
        .map(|i| {
            let spec = MixtureSpec {
                ratio: ratio.clone(),
                n_units: args.n,
                seed: args.seed.wrapping_add(i as u64),
            };
            let sample = generate_mixture(&format!("mix-{i}"), &spec, &pool)?;
            let summary = lead_summary(&sample, "lead");
            Ok(sample.with_summary(summary))
        })
        .collect()
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let samples = synth_samples(args)?;
    save_corpus(&samples, &args.out).map_err(|e| match e {
        fairsumm_core::Error::Io(io) => CliError::io(&args.out, io),
        other => other.into(),
    })?;
    for s in &samples {
        let counts: Vec<String> = s
            .attribute
            .values
            .iter()
            .zip(unit_counts(s))
            .map(|(v, c)| format!("{v}={c}"))
            .collect();
        println!("{}\t{}", s.id, counts.join("\t"));
    }
    Ok(EXIT_OK)
}

fn sweep_axis(args: &GenerateArgs) -> Result<SweepAxis> {
    match (&args.temperatures, &args.sentences, &args.instruction) {
        (Some(t), None, None) => Ok(SweepAxis::Temperature(t.clone())),
        (None, Some(n), None) => Ok(SweepAxis::Sentences(n.clone())),
        (None, None, Some(flags)) => flags
            .iter()
            .map(|f| match f.as_str() {
                "on" => Ok(true),
                "off" => Ok(false),
                other => Err(CliError::Config(format!("--instruction takes on/off, got {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SweepAxis::Instruction),
        (None, None, None) => Ok(SweepAxis::Temperature(vec![args.temperature])),
        _ => Err(CliError::Config(
            "choose one of --temperatures, --sentences, --instruction".into(),
        )),
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<i32> {
    let loaded = load(&args.input, args.lenient_keys)?;
    let manifest = if args.replay {
        load_manifest(&args.manifest).map_err(|e| match e {
            fairsumm_harness::HarnessError::Io(io) => CliError::io(&args.manifest, io),
            other => other.into(),
        })?
    } else {
        let template_id: TemplateId = args
            .template
            .parse()
            .map_err(|e: fairsumm_harness::HarnessError| CliError::Config(e.to_string()))?;
        let mut config = GenerationConfig {
            model: args.model.clone(),
            temperature: args.temperature,
            max_tokens: args.max_tokens,
            timeout_secs: args.timeout,
            retries: args.retries,
            concurrency: args.concurrency,
            ..Default::default()
        }
        .with_env();
        if let Some(endpoint) = &args.endpoint {
            config.endpoint = endpoint.clone();
        }
        let generator = HttpGenerator::new(config.clone())?;
        let manifest = run_sweep(
            &loaded.samples,
            &PromptTemplate::new(template_id),
            &sweep_axis(args)?,
            &config,
            &generator,
        )?;
        save_manifest(&args.manifest, &manifest).map_err(|e| match e {
            fairsumm_harness::HarnessError::Io(io) => CliError::io(&args.manifest, io),
            other => other.into(),
        })?;
        manifest
    };
    let samples = apply_manifest(&loaded.samples, &manifest);
    save_corpus(&samples, &args.out).map_err(|e| match e {
        fairsumm_core::Error::Io(io) => CliError::io(&args.out, io),
        other => other.into(),
    })?;
    let failed = manifest.iter().filter(|r| r.failed()).count();
    let excluded = manifest.iter().filter(|r| r.excluded && !r.failed()).count();
    println!(
        "{} generations, {excluded} empty (excluded), {failed} failed",
        manifest.len()
    );
    Ok(EXIT_OK)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn cmd_convert(args: &ConvertArgs) -> Result<i32> {
    let (sample, common) = match &args.kind {
        ConvertKind::Reviews {
            raw,
            labels,
            id,
            attribute,
            values,
            separator,
            common,
        } => {
            let attribute = AttributeSpec::new(attribute.clone(), values.clone())?;
            let text = read_text(raw)?;
            let labels: Vec<String> = read_text(labels)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            let sample =
                convert_review_corpus(id, &attribute, text.trim_end_matches(['\n', '\r']), &labels, separator)?;
            (sample, common)
        }
        ConvertKind::Dialogue { raw, id, common } => (convert_dialogue(id, &read_text(raw)?)?, common),
    };
    let samples = match common.segment_tokens {
        Some(budget) => {
            let segments = truncate_segments(&sample, budget)?;
            for w in &segments.warnings {
                log::warn!("{w}");
            }
            segments.samples
        }
        None => vec![sample],
    };
    let report = fairsumm_core::model::validate_corpus(&samples);
    for (sample, r) in samples.iter().zip(&report) {
        for w in r.warnings() {
            log::warn!("{}: {w}", sample.id);
        }
        if r.has_errors() {
            return Err(CliError::Invalid(format!(
                "{}: {}",
                sample.id,
                r.errors().collect::<Vec<_>>().join("; ")
            )));
        }
    }
    save_corpus(&samples, &common.out).map_err(|e| match e {
        fairsumm_core::Error::Io(io) => CliError::io(&common.out, io),
        other => other.into(),
    })?;
    println!("{} sample(s) written to {}", samples.len(), common.out.display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fairsumm_core::ingest::DEFAULT_SEGMENT_TOKENS;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("fairsumm").chain(args.iter().copied()))
            .unwrap()
            .command
    }

    #[test]
    fn segment_default_matches_core() {
        assert_eq!(
            DEFAULT_SEGMENT_TOKENS_STR.parse::<usize>().unwrap(),
            DEFAULT_SEGMENT_TOKENS
        );
        let Command::Convert(c) = parse(&[
            "convert",
            "dialogue",
            "--raw",
            "r",
            "--id",
            "d",
            "--out",
            "o",
            "--segment-tokens",
        ]) else {
            panic!()
        };
        let ConvertKind::Dialogue { common, .. } = c.kind else {
            panic!()
        };
        assert_eq!(common.segment_tokens, Some(DEFAULT_SEGMENT_TOKENS));
    }

    #[test]
    fn metric_flags_to_config() {
        let Command::Evaluate(e) = parse(&[
            "evaluate",
            "--input",
            "c.jsonl",
            "--gold",
            "custom",
            "--weights",
            "1,3",
            "--tau",
            "0.5",
            "--k",
            "2",
        ]) else {
            panic!()
        };
        let c = fairness_config(&e.metric).unwrap();
        assert_eq!(
            c.gold_policy,
            GoldPolicy::Custom {
                weights: vec![1.0, 3.0]
            }
        );
        assert_eq!(c.tolerance, 0.5);
        assert_eq!(
            c.matcher,
            MatcherConfig::Rule {
                k: 2,
                split: SplitMode::Fractional
            }
        );
    }

    #[test]
    fn inconsistent_flags_are_config_errors() {
        for args in [
            &["evaluate", "--input", "c", "--gold", "custom"][..],
            &["evaluate", "--input", "c", "--weights", "1,2"],
            &["evaluate", "--input", "c", "--matcher", "file"],
            &["evaluate", "--input", "c", "--tau", "1.5"],
            &["evaluate", "--input", "c", "--auc-grid", "0"],
        ] {
            let Command::Evaluate(e) = parse(args) else { panic!() };
            let err = fairness_config(&e.metric).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::EXIT_IO, "{args:?}");
        }
    }

    #[test]
    fn tau_grid() {
        let Command::Sweep(s) = parse(&["sweep", "--input", "c"]) else {
            panic!()
        };
        let taus = tau_list(&s).unwrap();
        assert_eq!(taus.len(), 11);
        assert_eq!(taus[3], 0.3);
        let Command::Sweep(s) = parse(&["sweep", "--input", "c", "--taus", "0.8"]) else {
            panic!()
        };
        assert_eq!(tau_list(&s).unwrap(), vec![0.8]);
    }
}
