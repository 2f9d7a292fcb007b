use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use phrasealign::constraints::load_lexical_rules;
use phrasealign::phrasetable::parse_word_alignment;
use phrasealign::scorer::{mark_unaligned, train_empty_model, NoOmission, TrainConfig};
use phrasealign::synth::{self, OracleParams};
use phrasealign::{
    add_omission_options, apply_lexical, apply_structural, build_insertion_vocab, collect_options,
    extract_phrase_table, parse_tagged, resolve_lexical, AlignedPair, ConstraintTree, DecoderConfig,
    EmptyPhraseModel, InsertionVocab, LexicalRule, NgramScorer, OmissionModel, OptionConfig, PhraseTable,
    SourceSentence,
};

use crate::bleu::compute_bleu_multi;
use crate::config::ConfigFile;
use crate::error::CliError;
use crate::{BleuArgs, DecodeArgs, ExtractArgs, OracleCheckArgs, TrainEmptyArgs, TrainScorerArgs};

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn check_exists(p: &Path, what: &str) -> Result<(), CliError> {
    if is_stdio(p) || p.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", p.display())))
    }
}

fn require(p: Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    let p = p.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))?;
    check_exists(&p, &format!("--{flag}"))?;
    Ok(p)
}

fn read_lines(p: &Path) -> Result<Vec<String>, CliError> {
    let mut text = String::new();
    if is_stdio(p) {
        io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    }
    Ok(text.lines().map(str::to_owned).collect())
}

fn open(p: &Path) -> Result<BufReader<File>, CliError> {
    File::open(p)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn create(p: &Path) -> Result<Box<dyn Write>, CliError> {
    if is_stdio(p) {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(p).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

/// Attach a file name to a library error.
fn in_file<T>(p: &Path, r: phrasealign::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", p.display())),
        other => other,
    })
}

fn check_same_len(names: &[(&str, usize)]) -> Result<(), CliError> {
    if names.windows(2).any(|w| w[0].1 != w[1].1) {
        let desc: Vec<String> = names.iter().map(|(n, c)| format!("{n} has {c} lines")).collect();
        return Err(CliError::Data(format!("corpus mismatch: {}", desc.join(", "))));
    }
    Ok(())
}

const DECODE_KEYS: &[&str] = &[
    "phrase-table",
    "insertion-vocab",
    "scorer",
    "empty-model",
    "lexical-constraints",
    "occurrences",
    "structured",
    "strip-tags",
    "allow-failures",
    "beam",
    "alpha",
    "max-target-len",
    "max-insertions",
    "max-consecutive-insertions",
    "omission-threshold",
    "options-per-span",
    "max-phrase-len",
    "workers",
];

/// Everything one sentence needs, shared read-only across workers.
struct DecodeContext {
    table: PhraseTable,
    insertions: InsertionVocab,
    scorer: NgramScorer,
    empty: Option<EmptyPhraseModel>,
    rules: Vec<LexicalRule>,
    occurrences: Option<Vec<usize>>,
    structured: bool,
    strip_tags: bool,
    options: OptionConfig,
    decoder: DecoderConfig,
}

impl DecodeContext {
    fn translate(&self, line: &str) -> phrasealign::Result<String> {
        let (source, tree) = if self.structured {
            parse_tagged(line)?
        } else {
            let x = SourceSentence::parse(line)?;
            let n = x.len();
            (x, ConstraintTree::root_only(n))
        };
        let mut lattice = collect_options(&source, &self.table, &self.insertions, &self.options)?;
        let omission: &(dyn OmissionModel + Sync) = match &self.empty {
            Some(m) => {
                add_omission_options(&mut lattice, &source, m, self.decoder.omission_threshold)?;
                m
            }
            None => &NoOmission,
        };
        if self.structured {
            lattice = apply_structural(&lattice, &tree);
        }
        if !self.rules.is_empty() {
            let lexical = resolve_lexical(&source, &self.rules, self.occurrences.as_deref());
            lattice = apply_lexical(&lattice, &lexical)?;
        }
        let d = phrasealign::decode(&source, &lattice, &tree, &self.scorer, omission, &self.decoder)?;
        Ok(d.record(self.strip_tags))
    }
}

pub fn decode_config(a: &DecodeArgs, file: &ConfigFile) -> Result<DecoderConfig, CliError> {
    let d = DecoderConfig::default();
    let cfg = DecoderConfig {
        beam_size: file.pick(a.beam, "beam", d.beam_size)?,
        max_target_len: file.pick_opt(a.max_target_len, "max-target-len")?,
        length_penalty_alpha: file.pick(a.alpha, "alpha", d.length_penalty_alpha)?,
        max_insertions: file.pick_opt(a.max_insertions, "max-insertions")?,
        max_consecutive_insertions: file.pick(
            a.max_consecutive_insertions,
            "max-consecutive-insertions",
            d.max_consecutive_insertions,
        )?,
        omission_threshold: file.pick(a.omission_threshold, "omission-threshold", d.omission_threshold)?,
        options_per_span: file.pick(a.options_per_span, "options-per-span", d.options_per_span)?,
        oracle_cap: d.oracle_cap,
    };
    cfg.validate()?;
    if !(0.0..=1.0).contains(&cfg.omission_threshold) {
        return Err(CliError::Usage("omission threshold must lie in [0, 1]".into()));
    }
    Ok(cfg)
}

pub fn decode(a: &DecodeArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.config.as_deref(), DECODE_KEYS)?;
    let decoder = decode_config(a, &file)?;
    let workers = file.pick(a.workers, "workers", 1usize)?;
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let options = OptionConfig {
        options_per_span: decoder.options_per_span,
        max_source_len: file.pick(a.max_phrase_len, "max-phrase-len", OptionConfig::default().max_source_len)?,
    };
    let occurrences = match &a.occurrences {
        Some(v) => Some(v.clone()),
        None => file
            .get::<String>("occurrences")?
            .map(|s| {
                s.split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| CliError::Usage(format!("config key occurrences: cannot parse {s:?}")))
            })
            .transpose()?,
    };

    check_exists(&a.input, "--input")?;
    let table_path = require(a.phrase_table.clone().or(file.get("phrase-table")?), "phrase-table")?;
    let scorer_path = require(a.scorer.clone().or(file.get("scorer")?), "scorer")?;
    let vocab_path = a.insertion_vocab.clone().or(file.get("insertion-vocab")?);
    let empty_path = a.empty_model.clone().or(file.get("empty-model")?);
    let rules_path = a.lexical_constraints.clone().or(file.get("lexical-constraints")?);
    for (p, flag) in [(&vocab_path, "--insertion-vocab"), (&empty_path, "--empty-model"), (&rules_path, "--lexical-constraints")] {
        if let Some(p) = p {
            check_exists(p, flag)?;
        }
    }

    let ctx = DecodeContext {
        table: in_file(&table_path, PhraseTable::load(open(&table_path)?))?,
        insertions: match &vocab_path {
            Some(p) => in_file(p, InsertionVocab::load(open(p)?))?,
            None => InsertionVocab::new(),
        },
        scorer: in_file(&scorer_path, NgramScorer::load(open(&scorer_path)?))?,
        empty: match &empty_path {
            Some(p) => Some(in_file(p, EmptyPhraseModel::load(open(p)?))?),
            None => None,
        },
        rules: match &rules_path {
            Some(p) => in_file(p, load_lexical_rules(open(p)?))?,
            None => Vec::new(),
        },
        occurrences,
        structured: file.switch(a.structured, "structured")?,
        strip_tags: file.switch(a.strip_tags, "strip-tags")?,
        options,
        decoder,
    };
    let allow_failures = file.switch(a.allow_failures, "allow-failures")?;

    let lines = read_lines(&a.input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let results: Vec<phrasealign::Result<String>> =
        pool.install(|| lines.par_iter().map(|l| ctx.translate(l)).collect());

    let mut out = create(&a.output)?;
    let mut failed = 0;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(record) => writeln!(out, "{record}")?,
            Err(e) => {
                failed += 1;
                eprintln!("line {}: {e}", k + 1);
                writeln!(out, "#FAILED\tline {}: {e}", k + 1)?;
            }
        }
    }
    out.flush()?;
    if failed > 0 && !allow_failures {
        return Err(CliError::SentencesFailed(failed));
    }
    Ok(())
}

fn load_word_alignments(p: &Path, base: usize) -> Result<Vec<Vec<(usize, usize)>>, CliError> {
    read_lines(p)?
        .iter()
        .enumerate()
        .map(|(k, l)| in_file(p, parse_word_alignment(l, base, k + 1)))
        .collect()
}

fn omission_data(
    src: &Path,
    align: &Path,
    base: usize,
) -> Result<Vec<(SourceSentence, phrasealign::scorer::UnalignedIndicator)>, CliError> {
    let sources = read_lines(src)?;
    let aligns = load_word_alignments(align, base)?;
    check_same_len(&[("source", sources.len()), ("alignment", aligns.len())])?;
    sources
        .iter()
        .zip(&aligns)
        .enumerate()
        .map(|(k, (s, al))| {
            let x = in_file(src, SourceSentence::parse(s)).map_err(|e| CliError::Data(format!("line {}: {e}", k + 1)))?;
            let u = in_file(align, mark_unaligned(al, x.len()))
                .map_err(|e| CliError::Data(format!("line {}: {e}", k + 1)))?;
            Ok((x, u))
        })
        .collect()
}

fn check_base(base: usize) -> Result<usize, CliError> {
    if base > 1 {
        return Err(CliError::Usage(format!("--align-base must be 0 or 1, got {base}")));
    }
    Ok(base)
}

pub fn train_empty(a: &TrainEmptyArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(
        a.config.as_deref(),
        &["align-base", "window", "learning-rate", "epochs", "tolerance"],
    )?;
    let d = TrainConfig::default();
    let config = TrainConfig {
        window: file.pick(a.window, "window", d.window)?,
        learning_rate: file.pick(a.learning_rate, "learning-rate", d.learning_rate)?,
        max_epochs: file.pick(a.epochs, "epochs", d.max_epochs)?,
        tolerance: file.pick(a.tolerance, "tolerance", d.tolerance)?,
    };
    let base = check_base(file.pick(a.align_base, "align-base", 0)?)?;
    check_exists(&a.source, "--source")?;
    check_exists(&a.alignment, "--alignment")?;
    if config.max_epochs == 0 {
        eprintln!("warning: zero epochs requested; writing the initial parameters");
    }
    let data = omission_data(&a.source, &a.alignment, base)?;
    let trained = train_empty_model(&data, &config)?;
    let mut out = create(&a.output)?;
    trained.model.write(&mut out)?;
    out.flush()?;
    let epochs = trained.loss_curve.len() - 1;
    println!(
        "final loss {:.6} after {epochs} epoch(s)",
        trained.loss_curve.last().copied().unwrap_or(f64::NAN)
    );
    if let (Some(s), Some(al)) = (&a.eval_source, &a.eval_alignment) {
        let held = omission_data(s, al, base)?;
        println!("held-out accuracy {:.4}", synth::omission_accuracy(&trained.model, &held));
    }
    Ok(())
}

pub fn extract(a: &ExtractArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(
        a.config.as_deref(),
        &["align-base", "threshold", "max-words", "max-phrase-len"],
    )?;
    let base = check_base(file.pick(a.align_base, "align-base", 0)?)?;
    let threshold = file.pick(a.threshold, "threshold", 0.2)?;
    let max_words = file.pick(a.max_words, "max-words", 50usize)?;
    let max_len = file.pick(a.max_phrase_len, "max-phrase-len", OptionConfig::default().max_source_len)?;
    if max_len == 0 {
        return Err(CliError::Usage("--max-phrase-len must be at least 1".into()));
    }
    for (p, flag) in [(&a.source, "--source"), (&a.target, "--target"), (&a.alignment, "--alignment")] {
        check_exists(p, flag)?;
    }
    let src = read_lines(&a.source)?;
    let tgt = read_lines(&a.target)?;
    let aligns = load_word_alignments(&a.alignment, base)?;
    check_same_len(&[("source", src.len()), ("target", tgt.len()), ("alignment", aligns.len())])?;
    let corpus: Vec<AlignedPair> = src
        .iter()
        .zip(&tgt)
        .zip(aligns)
        .map(|((s, t), al)| AlignedPair::new(s, t, al))
        .collect();
    let table = in_file(&a.alignment, extract_phrase_table(&corpus, max_len))?;
    let vocab = in_file(&a.alignment, build_insertion_vocab(&corpus, threshold, max_words))?;
    let mut out = create(&a.phrase_table_out)?;
    table.write(&mut out)?;
    out.flush()?;
    let mut out = create(&a.insertion_vocab_out)?;
    vocab.write(&mut out)?;
    out.flush()?;
    eprintln!("{} phrase pairs, {} insertion words", table.len(), vocab.len());
    Ok(())
}

pub fn train_scorer(a: &TrainScorerArgs) -> Result<(), CliError> {
    check_exists(&a.input, "--input")?;
    let corpus: Vec<Vec<String>> = read_lines(&a.input)?
        .iter()
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect();
    let model = in_file(&a.input, NgramScorer::train(&corpus, a.order, a.k))?;
    let mut out = create(&a.output)?;
    model.write(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn bleu(a: &BleuArgs) -> Result<(), CliError> {
    check_exists(&a.hyp, "--hyp")?;
    for r in &a.refs {
        check_exists(r, "--ref")?;
    }
    let hyps = read_lines(&a.hyp)?;
    let refs: Vec<Vec<String>> = a.refs.iter().map(|r| read_lines(r)).collect::<Result<_, _>>()?;
    for (r, lines) in a.refs.iter().zip(&refs) {
        if lines.len() != hyps.len() {
            return Err(CliError::Data(format!(
                "{} has {} lines but the hypothesis file has {}",
                r.display(),
                lines.len(),
                hyps.len()
            )));
        }
    }
    let per_sentence: Vec<Vec<&str>> = (0..hyps.len())
        .map(|k| refs.iter().map(|r| r[k].as_str()).collect())
        .collect();
    let report = compute_bleu_multi(&hyps, &per_sentence, a.mode)?;
    println!("{report}");
    Ok(())
}

pub fn oracle_check(a: &OracleCheckArgs) -> Result<(), CliError> {
    let s = crate::oracle::run_suite(a.instances, a.seed, &OracleParams::default());
    println!(
        "oracle-check: {} passed, {} failed, {} skipped (oracle too large)",
        s.passed, s.failed, s.too_large
    );
    if !s.failures.is_empty() {
        println!("failing seeds: {:?}", s.failures);
        return Err(CliError::SentencesFailed(s.failed));
    }
    Ok(())
}
