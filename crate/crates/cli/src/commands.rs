use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use dialseg::corpus::{
    parse_canonical_jsonl, parse_raw_dialog_corpus, write_canonical_jsonl, AnnotatedDialogue, Corpus,
};
use dialseg::metrics::{evaluate, format_table, EvalReport};
use dialseg::pairgen::{generate_triplets, split_triplets, write_triplets_jsonl, GenConfig, GenerationManifest};
use dialseg::report::{
    depth_profiles, read_reports_jsonl, report_depth_variance, segment_dialogues, write_reports_jsonl, SegmentReport,
    SegmentSummary,
};
use dialseg::scorer::{
    load_embedding_table, EmbeddingScorer, ExternalConfig, ExternalScorer, LexicalScorer, ScorerKind, ScorerSpec,
};
use dialseg::segmenter::{random_segment, Segmentation};
use dialseg::synthetic::{generate_corpus, generate_embeddings, SyntheticConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::{open, sha256_file, write_atomic, write_json_atomic};
use crate::{Command, ConvertArgs, EvalArgs, GenPairsArgs, ScorerArgs, SegmentArgs, StatsArgs, SynthArgs};

/// An invalid flag combination only detectable after parsing; exits with 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Segment(a) => segment(a),
        Command::Eval(a) => eval(a),
        Command::GenPairs(a) => gen_pairs(a),
        Command::Stats(a) => stats(a),
        Command::Convert(a) => convert(a),
        Command::Synth(a) => synth(a),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot start worker pool")
}

fn read_corpus(path: &Path) -> Result<Vec<AnnotatedDialogue>> {
    parse_canonical_jsonl(open(path)?).with_context(|| format!("{}", path.display()))
}

#[derive(Debug, Serialize)]
struct BackendConfig {
    timeout_secs: u64,
    max_retries: u32,
    cache_capacity: usize,
    auth: bool,
}

/// Builds the scorer and collects checksums of any files it reads.
fn build_scorer(
    spec: &ScorerSpec,
    args: &ScorerArgs,
    inputs: &mut BTreeMap<String, String>,
) -> Result<(ScorerKind, Option<BackendConfig>)> {
    Ok(match spec {
        ScorerSpec::Lexical => (ScorerKind::Lexical(LexicalScorer), None),
        ScorerSpec::Embedding(path) => {
            let table = load_embedding_table(open(path)?).with_context(|| format!("{}", path.display()))?;
            if table.duplicates() > 0 {
                log::warn!(
                    "{}: {} duplicate tokens, last vector kept",
                    path.display(),
                    table.duplicates()
                );
            }
            inputs.insert(path.display().to_string(), sha256_file(path)?);
            (ScorerKind::Embedding(EmbeddingScorer::new(Arc::new(table))), None)
        }
        ScorerSpec::External(url) => {
            let config = ExternalConfig {
                url: url.clone(),
                timeout: Duration::from_secs(args.timeout_secs),
                max_retries: args.max_retries,
                cache_capacity: args.cache_capacity,
                auth_token: args.token.clone(),
            };
            let backend = BackendConfig {
                timeout_secs: args.timeout_secs,
                max_retries: args.max_retries,
                cache_capacity: args.cache_capacity,
                auth: args.token.is_some(),
            };
            (ScorerKind::External(ExternalScorer::new(config)), Some(backend))
        }
    })
}

#[derive(Debug, Serialize)]
struct SegmentManifest<'a> {
    command: &'static str,
    scorer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    backend: Option<BackendConfig>,
    input: String,
    inputs: BTreeMap<String, String>,
    summary: &'a SegmentSummary,
}

fn segment(a: SegmentArgs) -> Result<()> {
    let mut inputs = BTreeMap::new();
    let corpus = read_corpus(&a.input)?;
    inputs.insert(a.input.display().to_string(), sha256_file(&a.input)?);
    let (scorer, backend) = build_scorer(&a.scorer, &a.backend, &mut inputs)?;
    let dialogues: Vec<_> = corpus.into_iter().map(|d| d.dialogue).collect();
    let reports = pool(a.workers)?.install(|| segment_dialogues(&scorer, &dialogues))?;
    let summary = SegmentSummary::new(scorer.name(), &reports);

    let manifest = SegmentManifest {
        command: "segment",
        scorer: a.scorer.to_string(),
        backend,
        input: a.input.display().to_string(),
        inputs,
        summary: &summary,
    };
    let summary_path = a.summary.unwrap_or_else(|| with_suffix(&a.output, ".summary.json"));
    write_atomic(&a.output, |w| Ok(write_reports_jsonl(&reports, w)?))?;
    write_json_atomic(&summary_path, &summary)?;
    write_json_atomic(&with_suffix(&a.output, ".manifest.json"), &manifest)?;
    eprintln!(
        "segmented {} dialogues ({} unscored), {} boundaries",
        summary.dialogues, summary.unscored, summary.boundaries
    );
    Ok(())
}

/// Accepts segment reports and canonical corpus records alike.
#[derive(Debug, Deserialize)]
struct HypRecord {
    id: String,
    #[serde(default)]
    boundaries: Vec<usize>,
}

fn read_hypotheses(path: &Path) -> Result<HashMap<String, Segmentation>> {
    let mut out = HashMap::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: HypRecord = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}: malformed hypothesis", path.display(), idx + 1))?;
        let seg = Segmentation {
            dialogue_id: r.id.clone(),
            boundaries: r.boundaries.into_iter().collect(),
        };
        if out.insert(r.id.clone(), seg).is_some() {
            bail!("{}: duplicate dialogue id `{}`", path.display(), r.id);
        }
    }
    Ok(out)
}

/// Orders hypotheses like the references; ids must match one to one.
fn align(refs: &[AnnotatedDialogue], mut hyps: HashMap<String, Segmentation>) -> Result<Vec<Segmentation>> {
    let aligned = refs
        .iter()
        .map(|r| {
            hyps.remove(r.id())
                .with_context(|| format!("no hypothesis for dialogue `{}`", r.id()))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = hyps.keys().min() {
        bail!("hypothesis for unknown dialogue `{extra}`");
    }
    Ok(aligned)
}

#[derive(Debug, Serialize)]
struct EvalManifest<'a> {
    command: &'static str,
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backend: Option<BackendConfig>,
    window_size_override: Option<u64>,
    inputs: BTreeMap<String, String>,
    report: &'a EvalReport,
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut inputs = BTreeMap::new();
    let refs = read_corpus(&a.reference)?;
    inputs.insert(a.reference.display().to_string(), sha256_file(&a.reference)?);
    let mut backend = None;
    let mut depths = None;

    let (mode, hyps) = if let Some(path) = &a.hyp {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
        ("hyp".to_string(), align(&refs, read_hypotheses(path)?)?)
    } else if let Some(spec) = &a.scorer {
        let (scorer, b) = build_scorer(spec, &a.backend, &mut inputs)?;
        backend = b;
        let dialogues: Vec<_> = refs.iter().map(|r| r.dialogue.clone()).collect();
        let reports = pool(a.workers)?.install(|| segment_dialogues(&scorer, &dialogues))?;
        depths = Some(depth_profiles(&reports));
        let by_id = reports.iter().map(|r| (r.id.clone(), r.segmentation())).collect();
        (spec.to_string(), align(&refs, by_id)?)
    } else {
        let seed = a.seed.context("--random requires --seed")?;
        let hyps = refs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                random_segment(r.id(), r.dialogue.len(), &mut rng)
            })
            .collect();
        ("random".to_string(), hyps)
    };

    let window = a.window_size.map(|k| k as usize);
    let report = evaluate(&refs, &hyps, window, depths.as_deref())?;
    let label = a.label.clone().unwrap_or_else(|| mode.clone());
    print!("{}", format_table(&[(label, report.clone())]));

    if let Some(out) = &a.output {
        let manifest = EvalManifest {
            command: "eval",
            mode,
            seed: a.seed,
            backend,
            window_size_override: a.window_size,
            inputs,
            report: &report,
        };
        write_json_atomic(out, &report)?;
        write_json_atomic(&with_suffix(out, ".manifest.json"), &manifest)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PairsManifest {
    command: &'static str,
    #[serde(flatten)]
    generation: GenerationManifest,
    inputs: BTreeMap<String, String>,
}

fn load_pairgen_corpus(a: &GenPairsArgs, inputs: &mut BTreeMap<String, String>) -> Result<Corpus> {
    if let Some(path) = &a.input {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
        return Ok(Corpus::from_annotated(stem(path), &a.language, read_corpus(path)?)?);
    }
    let text = a.text.as_ref().expect("clap enforces a source");
    for p in [Some(text), a.acts.as_ref(), a.topics.as_ref()].into_iter().flatten() {
        inputs.insert(p.display().to_string(), sha256_file(p)?);
    }
    let acts = a.acts.as_deref().map(open).transpose()?;
    let topics = a.topics.as_deref().map(open).transpose()?;
    Ok(parse_raw_dialog_corpus(
        &stem(text),
        &a.language,
        open(text)?,
        acts,
        topics,
    )?)
}

fn gen_pairs(a: GenPairsArgs) -> Result<()> {
    let mut inputs = BTreeMap::new();
    let corpus = load_pairgen_corpus(&a, &mut inputs)?;
    let config = GenConfig {
        use_act_flows: !a.no_flows,
        use_topic_constraint: !a.no_topics,
        split_unit: a.split_unit,
        ..GenConfig::new(a.seed)
    };
    let set = pool(a.workers)?.install(|| generate_triplets(&corpus, &config))?;
    let splits = split_triplets(&set, &config)?;
    let manifest = PairsManifest {
        command: "gen-pairs",
        generation: GenerationManifest::new(&corpus, &config, &set, &splits),
        inputs,
    };

    for (name, fold) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        let path = a.out_dir.join(format!("{name}.jsonl"));
        write_atomic(&path, |w| Ok(write_triplets_jsonl(fold, w)?))?;
    }
    write_json_atomic(&a.out_dir.join("manifest.json"), &manifest)?;
    let [train, val, test] = splits.sizes();
    eprintln!(
        "{} triplets ({} ranking pairs), skipped {}; train {train}, val {val}, test {test}",
        set.len(),
        set.ranking_pair_count(),
        set.skipped.total()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct StatsRow {
    label: String,
    file: String,
    sha256: String,
    dialogues: usize,
    scored: usize,
    depth_variance: f64,
}

fn stats(a: StatsArgs) -> Result<()> {
    if !a.labels.is_empty() && a.labels.len() != a.reports.len() {
        return Err(UsageError(format!(
            "{} labels given for {} report files",
            a.labels.len(),
            a.reports.len()
        ))
        .into());
    }
    let mut rows = Vec::with_capacity(a.reports.len());
    for (i, path) in a.reports.iter().enumerate() {
        let reports: Vec<SegmentReport> =
            read_reports_jsonl(open(path)?).with_context(|| format!("{}", path.display()))?;
        let variance =
            report_depth_variance(&reports).with_context(|| format!("{}: no scored dialogues", path.display()))?;
        rows.push(StatsRow {
            label: a.labels.get(i).cloned().unwrap_or_else(|| stem(path)),
            file: path.display().to_string(),
            sha256: sha256_file(path)?,
            dialogues: reports.len(),
            scored: depth_profiles(&reports).len(),
            depth_variance: variance,
        });
    }

    let width = rows
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max("Scorer".len());
    let mut table = String::new();
    let _ = writeln!(table, "{:<width$}  {:>9}  {:>10}", "Scorer", "Dialogues", "Depth var");
    let _ = writeln!(table, "{}", "-".repeat(width + 23));
    for r in &rows {
        let _ = writeln!(
            table,
            "{:<width$}  {:>9}  {:>10.6}",
            r.label, r.dialogues, r.depth_variance
        );
    }
    print!("{table}");
    if let Some(out) = &a.output {
        write_json_atomic(out, &rows)?;
    }
    Ok(())
}

fn convert(a: ConvertArgs) -> Result<()> {
    let acts = a.acts.as_deref().map(open).transpose()?;
    let topics = a.topics.as_deref().map(open).transpose()?;
    let corpus = parse_raw_dialog_corpus(&stem(&a.text), &a.language, open(&a.text)?, acts, topics)?;
    let items: Vec<_> = corpus
        .dialogues()
        .iter()
        .cloned()
        .map(AnnotatedDialogue::unannotated)
        .collect();
    write_atomic(&a.output, |w| Ok(write_canonical_jsonl(&items, w)?))?;
    eprintln!("{} dialogues, {} utterances", corpus.len(), corpus.utterance_count());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        dialogues: a.dialogues,
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    let items = generate_corpus(&config);
    write_atomic(&a.output, |w| Ok(write_canonical_jsonl(&items, w)?))?;
    if let Some(path) = &a.embeddings {
        let table = generate_embeddings(&config);
        write_atomic(path, |w| {
            for (token, vector) in table.iter() {
                w.write_all(token.as_bytes())?;
                for v in vector {
                    write!(w, " {v}")?;
                }
                w.write_all(b"\n")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
