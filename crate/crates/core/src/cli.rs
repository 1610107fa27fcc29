//! The `svb` command line.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for data errors and 4
//! for numerical errors. Failures print one line to stderr:
//!
//! ```text
//! error<TAB>kind<TAB>code<TAB>message
//! ```
//!
//! where `kind` is `usage`, `data` or `numerical` and `code` names the error.

use std::collections::{HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aam::{aam_grad, aam_loss, AamConfig, LabeledBatch};
use crate::calibration::{apply_calibration, fit_calibration};
use crate::error::{Error, ErrorClass};
use crate::formats::{self, MetricsRecord, ScoreFile};
use crate::hpm::{
    plan_pass_broad, BalancedPlanner, PlannerConfig, PlannerMode, UtteranceInventory,
};
use crate::lid::{adapt_english_mean, classify, train_gb, CovarianceKind, ENGLISH_MEAN_WEIGHT};
use crate::math::{Domain, Embedding, Language};
use crate::metrics::{eer, min_dcf, DcfParams};
use crate::prototypes::{similarity_matrix, PrototypeMatrix};
use crate::scores::fuse;
use crate::snorm::{
    estimate_alpha, into_score_set, score_trials, Cohort, ScoreMode, ScoringSetup, DEFAULT_TOP_N,
};
use crate::synth::{generate_corpus, CorpusSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "svb", version, about = "Speaker verification backend toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (embeddings, prototypes, trials, enrollment)
    Synth(SynthArgs),
    /// Plan hard-prototype-mining batch manifests
    PlanBatches(PlanArgs),
    /// Evaluate the AAM-softmax loss and spot-check its gradient
    AamCheck(AamArgs),
    /// Train the Gaussian-backend language detector on prototypes
    LidTrain(LidTrainArgs),
    /// Detect FARSI vs ENGLISH for embeddings
    LidClassify(LidClassifyArgs),
    /// Estimate the cross-language offset alpha on prototypes
    Alpha(AlphaArgs),
    /// Score trials (raw cosine, adaptive s-norm, language-dependent s-norm)
    Score(ScoreArgs),
    /// Fit an affine calibration on labeled scores and optionally apply it
    Calibrate(CalibrateArgs),
    /// Weighted-average fusion of several score files
    Fuse(FuseArgs),
    /// Compute EER and minDCF of a labeled score file
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory; created if missing
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2020)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Norm of the Farsi and English language centers
    #[arg(long, default_value_t = 1.0)]
    language_center: f64,
    /// Distance between the two language centers
    #[arg(long, default_value_t = 0.6)]
    shift: f64,
    /// Maximum pull of a speaker towards its domain center is twice this
    #[arg(long, default_value_t = 0.3)]
    domain_offset: f64,
    #[arg(long, default_value_t = 0.7)]
    concentration: f64,
    /// Probability that an evaluation test utterance is English
    #[arg(long, default_value_t = 0.5)]
    english_fraction: f64,
    /// Write embeddings in the binary SVEB format instead of text
    #[arg(long)]
    binary: bool,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    prototypes: PathBuf,
    /// Embeddings providing the utterance ids of every prototype speaker
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// broad or balanced
    #[arg(long, default_value = "broad")]
    mode: PlannerMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    passes: u64,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 16)]
    anchors: usize,
    /// Speakers per anchor group, the anchor included
    #[arg(long, default_value_t = 8)]
    imposters: usize,
    #[arg(long, default_value_t = 1)]
    utts_per_speaker: usize,
    /// Target domain of balanced mode
    #[arg(long, default_value = "DEEPMINE")]
    target_domain: Domain,
    /// Restrict imposters to the anchor's domain
    #[arg(long)]
    restrict_domain: bool,
    /// Tag recorded with the similarity matrix
    #[arg(long, default_value_t = 0)]
    epoch_tag: u64,
}

#[derive(Debug, Args)]
struct AamArgs {
    #[arg(long)]
    prototypes: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    margin: f64,
    #[arg(long, default_value_t = 30.0)]
    scale: f64,
    /// Use at most this many embeddings of prototype speakers
    #[arg(long, default_value_t = 256)]
    max_utts: usize,
    /// Number of randomly chosen gradient components checked by finite differences
    #[arg(long, default_value_t = 20)]
    fd_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct LidTrainArgs {
    #[arg(long)]
    prototypes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// full or diagonal
    #[arg(long, default_value = "full")]
    covariance: CovarianceKind,
    /// English mean = w * mu_USA + (1 - w) * mu_FA
    #[arg(long, default_value_t = ENGLISH_MEAN_WEIGHT)]
    english_weight: f64,
    /// ENGLISH is decided when llr > threshold
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct LidClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only classify the test utterances of this trial list
    #[arg(long)]
    trials: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlphaArgs {
    #[arg(long)]
    prototypes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    top_n: usize,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    trials: PathBuf,
    #[arg(long)]
    enroll: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// raw, snorm or snorm-lid
    #[arg(long, default_value = "snorm")]
    mode: ScoreMode,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    top_n: usize,
    /// Comma-separated cohort domains; the cohort holds embeddings used
    /// neither for enrollment nor as test utterances [default: all domains]
    #[arg(long, value_delimiter = ',')]
    cohort_domain: Vec<Domain>,
    /// Language decisions; required by snorm-lid
    #[arg(long)]
    lid: Option<PathBuf>,
    /// Alpha file; required by snorm-lid
    #[arg(long)]
    alpha: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Labeled training scores
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    /// Score file to calibrate with the fitted model
    #[arg(long, requires = "apply_out")]
    apply: Option<PathBuf>,
    #[arg(long, requires = "apply")]
    apply_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Score files, comma-separated or repeated
    #[arg(long, value_delimiter = ',', required = true)]
    scores: Vec<PathBuf>,
    /// One positive weight per score file [default: all 1]
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Metrics record file
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    p_target: f64,
    #[arg(long, default_value_t = 1.0)]
    c_miss: f64,
    #[arg(long, default_value_t = 1.0)]
    c_fa: f64,
}

/// Failure of a subcommand.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(e) if is_usage(e) => EXIT_USAGE,
            Failure::Lib(e) => match e.class() {
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            },
        }
    }

    fn line(&self) -> String {
        let (kind, code, msg) = match self {
            Failure::Usage(m) => ("usage", "Usage", m.clone()),
            Failure::Lib(e) => {
                let kind = match self.exit_code() {
                    EXIT_USAGE => "usage",
                    EXIT_NUMERICAL => "numerical",
                    _ => "data",
                };
                (kind, e.code(), e.to_string())
            }
        };
        let msg = msg.replace(['\n', '\t'], " ");
        format!("error\t{kind}\t{code}\t{msg}")
    }
}

/// Errors raised by invalid flag values rather than by input data.
fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::ParamInvalid(_)
            | Error::ConfigInvalid(_)
            | Error::SpecInvalid(_)
            | Error::WeightOutOfRange(_)
            | Error::WeightInvalid(_)
    )
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = e.print();
            } else {
                let msg = e.kind().to_string();
                let detail = e.to_string();
                let first = detail
                    .lines()
                    .next()
                    .unwrap_or("")
                    .trim_start_matches("error: ");
                eprintln!("{}", Failure::Usage(format!("{msg}: {first}")).line());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::PlanBatches(a) => plan_batches(a),
        Command::AamCheck(a) => aam_check(a),
        Command::LidTrain(a) => lid_train(a),
        Command::LidClassify(a) => lid_classify(a),
        Command::Alpha(a) => alpha(a),
        Command::Score(a) => score(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{}", f.line());
            f.exit_code()
        }
    }
}

fn synth(a: SynthArgs) -> CliResult {
    let spec = CorpusSpec {
        dim: a.dim,
        language_center: a.language_center,
        language_shift: a.shift,
        domain_offset: a.domain_offset,
        concentration: a.concentration,
        english_test_fraction: a.english_fraction,
        seed: a.seed,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec)?;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", a.out_dir.display())))?;
    let emb_name = if a.binary {
        "embeddings.sveb"
    } else {
        "embeddings.tsv"
    };
    formats::write_embeddings(&a.out_dir.join(emb_name), &corpus.embeddings, a.binary)?;
    formats::write_prototypes(&a.out_dir.join("prototypes.tsv"), &corpus.prototypes)?;
    formats::write_trials(&a.out_dir.join("trials.tsv"), &corpus.trials)?;
    formats::write_enrollment(&a.out_dir.join("enroll.tsv"), &corpus.enrollment)?;
    println!(
        "embeddings={} speakers={} trials={}",
        corpus.embeddings.len(),
        corpus.prototypes.num_speakers(),
        corpus.trials.len()
    );
    Ok(())
}

fn plan_batches(a: PlanArgs) -> CliResult {
    let protos = formats::read_prototypes(&a.prototypes)?;
    let embeddings = formats::read_embeddings(&a.embeddings)?;
    let inv = UtteranceInventory::from_embeddings(&protos, &embeddings)?;
    let cfg = PlannerConfig {
        batch_size: a.batch_size,
        anchors_per_batch: a.anchors,
        imposters_per_anchor: a.imposters,
        utterances_per_speaker: a.utts_per_speaker,
        mode: a.mode,
        seed: a.seed,
        restrict_imposters_to_anchor_domain: a.restrict_domain,
    };
    cfg.validate()?;
    let sim = similarity_matrix(&protos, a.epoch_tag);
    let passes = match a.mode {
        PlannerMode::Broad => (0..a.passes)
            .map(|p| plan_pass_broad(&cfg, &sim, &inv, p))
            .collect::<Result<Vec<_>, _>>()?,
        PlannerMode::Balanced => {
            let mut planner = BalancedPlanner::new(cfg, inv, a.target_domain)?;
            (0..a.passes)
                .map(|_| planner.plan_pass(&sim))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    formats::write_manifests(&a.out, &passes)?;
    let batches: usize = passes.iter().map(|p| p.batches.len()).sum();
    println!("passes={} batches={batches}", passes.len());
    Ok(())
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn aam_check(a: AamArgs) -> CliResult {
    let cfg = AamConfig::new(a.margin, a.scale)?;
    let protos = formats::read_prototypes(&a.prototypes)?;
    let embeddings = formats::read_embeddings(&a.embeddings)?;
    let (xs, ys): (Vec<Vec<f64>>, Vec<usize>) = embeddings
        .iter()
        .filter_map(|e| protos.index_of(&e.speaker_id).map(|j| (e.vec.clone(), j)))
        .take(a.max_utts)
        .unzip();
    if xs.is_empty() {
        return Err(Failure::Lib(Error::EmptySet));
    }
    let batch = LabeledBatch::new(xs, ys)?;
    let loss = aam_loss(&batch, &protos, &cfg)?;
    let grad = aam_grad(&batch, &protos, &cfg)?;
    let grad_norm = grad
        .embeddings
        .iter()
        .chain(&grad.prototypes)
        .flatten()
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();

    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut max_err = 0.0f64;
    for _ in 0..a.fd_samples {
        let d = protos.dim();
        let k = rng.random_range(0..d);
        let on_embedding = rng.random_bool(0.5);
        let eval_at = |delta: f64| -> crate::Result<f64> {
            if on_embedding {
                let i = (k * 7919) % batch.len();
                let mut e = batch.embeddings.clone();
                e[i][k] += delta;
                aam_loss(&LabeledBatch::new(e, batch.labels.clone())?, &protos, &cfg)
            } else {
                let j = batch.labels[(k * 7919) % batch.len()];
                let mut cols = protos.columns().to_vec();
                cols[j][k] += delta;
                aam_loss(
                    &batch,
                    &PrototypeMatrix::new(cols, protos.speakers().to_vec())?,
                    &cfg,
                )
            }
        };
        let fd = (eval_at(h)? - eval_at(-h)?) / (2.0 * h);
        let analytic = if on_embedding {
            grad.embeddings[(k * 7919) % batch.len()][k]
        } else {
            grad.prototypes[batch.labels[(k * 7919) % batch.len()]][k]
        };
        max_err = max_err.max(relative_error(analytic, fd));
    }
    println!(
        "loss={loss:?} grad_norm={grad_norm:?} fd_samples={} max_rel_err={max_err:?}",
        a.fd_samples
    );
    Ok(())
}

fn lid_train(a: LidTrainArgs) -> CliResult {
    let protos = formats::read_prototypes(&a.prototypes)?;
    let gb = train_gb(&protos, a.covariance)?;
    let gb = adapt_english_mean(&gb, a.english_weight)?.with_threshold(a.threshold);
    formats::write_gb(&a.out, &gb)?;
    Ok(())
}

fn lid_classify(a: LidClassifyArgs) -> CliResult {
    let gb = formats::read_gb(&a.model)?;
    let embeddings = formats::read_embeddings(&a.embeddings)?;
    let wanted: Option<HashSet<String>> = match &a.trials {
        Some(p) => Some(
            formats::read_trials(p)?
                .into_iter()
                .map(|t| t.key.test_id)
                .collect(),
        ),
        None => None,
    };
    let mut decisions = Vec::new();
    for e in &embeddings {
        if wanted.as_ref().is_some_and(|w| !w.contains(&e.utt_id)) {
            continue;
        }
        decisions.push((e.utt_id.clone(), classify(&gb, &e.vec)?));
    }
    if let Some(w) = &wanted {
        let have: HashSet<&str> = decisions.iter().map(|(u, _)| u.as_str()).collect();
        let mut missing: Vec<&String> = w.iter().filter(|u| !have.contains(u.as_str())).collect();
        missing.sort();
        if let Some(u) = missing.first() {
            return Err(Failure::Lib(Error::MissingEmbedding((*u).clone())));
        }
    }
    formats::write_lid(&a.out, &decisions)?;
    let english = decisions
        .iter()
        .filter(|(_, d)| d.language == Language::English)
        .count();
    println!("classified={} english={english}", decisions.len());
    Ok(())
}

fn alpha(a: AlphaArgs) -> CliResult {
    let protos = formats::read_prototypes(&a.prototypes)?;
    let off = estimate_alpha(&protos, a.top_n)?;
    formats::write_alpha(&a.out, &off)?;
    println!("alpha={:?} std_error={:?}", off.alpha, off.std_error);
    Ok(())
}

fn cohort_tag(domains: &[Domain]) -> String {
    if domains.is_empty() {
        "ALL".into()
    } else {
        domains
            .iter()
            .map(|d| d.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

fn score(a: ScoreArgs) -> CliResult {
    if a.mode == ScoreMode::SnormLid {
        if a.lid.is_none() {
            return Err(Failure::Usage("--mode snorm-lid requires --lid".into()));
        }
        if a.alpha.is_none() {
            return Err(Failure::Usage("--mode snorm-lid requires --alpha".into()));
        }
    }
    let trials = formats::read_trials(&a.trials)?;
    let enrollment = formats::read_enrollment(&a.enroll)?;
    let embeddings = formats::read_embeddings(&a.embeddings)?;

    let mut used: HashSet<&str> = trials.iter().map(|t| t.key.test_id.as_str()).collect();
    for (_, utts) in &enrollment {
        used.extend(utts.iter().map(String::as_str));
    }
    let cohort = if a.mode == ScoreMode::Raw {
        None
    } else {
        let domains = a.cohort_domain.clone();
        Some(Cohort::from_embeddings(
            cohort_tag(&domains),
            &embeddings,
            |e| {
                !used.contains(e.utt_id.as_str())
                    && (domains.is_empty() || domains.contains(&e.domain))
            },
        )?)
    };
    let lid: Option<HashMap<String, Language>> = match &a.lid {
        Some(p) => Some(
            formats::read_lid(p)?
                .into_iter()
                .map(|(u, d)| (u, d.language))
                .collect(),
        ),
        None => None,
    };
    let offset = match &a.alpha {
        Some(p) => Some(formats::read_alpha(p)?),
        None => None,
    };

    let setup = ScoringSetup {
        mode: a.mode,
        top_n: a.top_n,
        cohort: cohort.as_ref(),
        offset: offset.as_ref(),
        lid: lid.as_ref(),
    };
    let emb_map: HashMap<String, Embedding> = embeddings
        .into_iter()
        .map(|e| (e.utt_id.clone(), e))
        .collect();
    let enroll_map: HashMap<String, Vec<String>> = enrollment.into_iter().collect();
    let scored = score_trials(&trials, &enroll_map, &emb_map, &setup)?;
    formats::write_scores(
        &a.out,
        &ScoreFile {
            scores: into_score_set(scored)?,
            calibrated: None,
        },
    )?;
    Ok(())
}

fn file_tag(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().replace(char::is_whitespace, "_"))
        .filter(|s| !s.is_empty() && !s.starts_with('#'))
        .unwrap_or_else(|| "scores".into())
}

fn calibrate(a: CalibrateArgs) -> CliResult {
    let train = formats::read_scores(&a.train)?;
    let model = fit_calibration(&train.scores, file_tag(&a.train))?;
    formats::write_calibration(&a.model_out, &model)?;
    println!("a={:?} b={:?}", model.a, model.b);
    if let (Some(input), Some(output)) = (&a.apply, &a.apply_out) {
        let scores = formats::read_scores(input)?;
        formats::write_scores(
            output,
            &ScoreFile {
                scores: apply_calibration(&model, &scores.scores),
                calibrated: Some(model.trained_on.clone()),
            },
        )?;
    }
    Ok(())
}

fn fuse_cmd(a: FuseArgs) -> CliResult {
    let weights = if a.weights.is_empty() {
        vec![1.0; a.scores.len()]
    } else {
        a.weights.clone()
    };
    if weights.len() != a.scores.len() {
        return Err(Failure::Usage(format!(
            "{} weights given for {} score files",
            weights.len(),
            a.scores.len()
        )));
    }
    let mut sets = Vec::with_capacity(a.scores.len());
    for p in &a.scores {
        let f = formats::read_scores(p)?;
        if f.calibrated.is_none() {
            log::warn!("{} is not calibrated; fusing raw scores", p.display());
        }
        sets.push(f.scores);
    }
    let fused = fuse(&sets, &weights)?;
    formats::write_scores(
        &a.out,
        &ScoreFile {
            scores: fused,
            calibrated: None,
        },
    )?;
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let params = DcfParams {
        p_target: a.p_target,
        c_miss: a.c_miss,
        c_fa: a.c_fa,
    };
    params.validate()?;
    let file = formats::read_scores(&a.scores)?;
    let e = eer(&file.scores)?;
    let dcf = min_dcf(&file.scores, &params)?;
    let (tar, non) = file.scores.split_by_label()?;
    println!("eer={e:?} min_dcf={dcf:?}");
    log::info!(
        "EER {:.2}%  minDCF {:.4}  ({} target / {} nontarget trials)",
        100.0 * e,
        dcf,
        tar.len(),
        non.len()
    );
    if let Some(out) = &a.out {
        formats::write_metrics(
            out,
            &MetricsRecord {
                eer: e,
                min_dcf: dcf,
                p_target: a.p_target,
                c_miss: a.c_miss,
                c_fa: a.c_fa,
                targets: tar.len(),
                nontargets: non.len(),
            },
        )?;
    }
    Ok(())
}
