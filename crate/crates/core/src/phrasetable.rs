//! Phrase tables, insertion vocabularies and per-sentence translation options.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::alignment::SourceSentence;
use crate::coverage::CoverageVector;
use crate::error::{Error, Result};
use crate::scorer::OmissionModel;

pub type Phrase = Vec<String>;

/// Word alignment of one sentence pair as 1-based `(source, target)` pairs.
pub type WordAlignment = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTableEntry {
    pub source: Phrase,
    pub target: Phrase,
    pub prob: f64,
}

/// Source phrase -> candidate targets, kept sorted by descending
/// probability and then by target tokens.
#[derive(Debug, Clone, Default)]
pub struct PhraseTable {
    by_source: HashMap<Phrase, Vec<(Phrase, f64)>>,
    max_source_len: usize,
    len: usize,
}

fn rank(a: &(Phrase, f64), b: &(Phrase, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

impl PhraseTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert an entry; a duplicate `(source, target)` keeps the larger
    /// probability.
    pub fn insert(&mut self, entry: PhraseTableEntry) {
        self.max_source_len = self.max_source_len.max(entry.source.len());
        let targets = self.by_source.entry(entry.source).or_default();
        match targets.iter().position(|(t, _)| *t == entry.target) {
            Some(k) => targets[k].1 = targets[k].1.max(entry.prob),
            None => {
                targets.push((entry.target, entry.prob));
                self.len += 1;
            }
        }
        targets.sort_by(rank);
    }

    pub fn lookup(&self, source: &[String]) -> &[(Phrase, f64)] {
        self.by_source.get(source).map_or(&[], Vec::as_slice)
    }

    pub fn prob(&self, source: &[String], target: &[String]) -> Option<f64> {
        self.lookup(source)
            .iter()
            .find(|(t, _)| t.as_slice() == target)
            .map(|&(_, p)| p)
    }

    pub fn max_source_len(&self) -> usize {
        self.max_source_len
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// All entries sorted by source phrase, then table rank.
    pub fn entries(&self) -> Vec<PhraseTableEntry> {
        let mut sources: Vec<&Phrase> = self.by_source.keys().collect();
        sources.sort();
        sources
            .into_iter()
            .flat_map(|s| {
                self.by_source[s].iter().map(move |(t, p)| PhraseTableEntry {
                    source: s.clone(),
                    target: t.clone(),
                    prob: *p,
                })
            })
            .collect()
    }

    /// Read `src ||| tgt ||| prob [||| ...]` lines. Blank lines are skipped.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = Self::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            table.insert(parse_table_line(&line, k + 1)?);
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for e in self.entries() {
            writeln!(out, "{} ||| {} ||| {}", e.source.join(" "), e.target.join(" "), e.prob)?;
        }
        Ok(())
    }
}

fn parse_table_line(line: &str, line_no: usize) -> Result<PhraseTableEntry> {
    let err = |msg: &str| Error::Format {
        line: line_no,
        msg: msg.to_owned(),
    };
    let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
    if fields.len() < 3 {
        return Err(err("expected `source ||| target ||| prob`"));
    }
    let source: Phrase = fields[0].split_whitespace().map(str::to_owned).collect();
    let target: Phrase = fields[1].split_whitespace().map(str::to_owned).collect();
    if source.is_empty() || target.is_empty() {
        return Err(err("empty phrase"));
    }
    let prob: f64 = fields[2]
        .split_whitespace()
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| err("unparseable probability"))?;
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(err("probability outside (0, 1]"));
    }
    Ok(PhraseTableEntry { source, target, prob })
}

/// Parse one line of `i-j` pairs. `base` is 0 or 1; the result is 1-based.
pub fn parse_word_alignment(line: &str, base: usize, line_no: usize) -> Result<WordAlignment> {
    let err = |tok: &str| Error::MalformedCorpus {
        line: line_no,
        msg: format!("bad alignment pair {tok:?}"),
    };
    line.split_whitespace()
        .map(|tok| {
            let (a, b) = tok.split_once('-').ok_or_else(|| err(tok))?;
            let a: usize = a.parse().map_err(|_| err(tok))?;
            let b: usize = b.parse().map_err(|_| err(tok))?;
            if a < base || b < base {
                return Err(err(tok));
            }
            Ok((a + 1 - base, b + 1 - base))
        })
        .collect()
}

/// One word-aligned sentence pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub alignment: WordAlignment,
}

impl AlignedPair {
    pub fn new(source: &str, target: &str, alignment: WordAlignment) -> Self {
        Self {
            source: source.split_whitespace().map(str::to_owned).collect(),
            target: target.split_whitespace().map(str::to_owned).collect(),
            alignment,
        }
    }

    fn check(&self, line_no: usize) -> Result<()> {
        for &(i, j) in &self.alignment {
            if i == 0 || j == 0 || i > self.source.len() || j > self.target.len() {
                return Err(Error::MalformedCorpus {
                    line: line_no,
                    msg: format!("alignment point {i}-{j} out of range"),
                });
            }
        }
        Ok(())
    }

    pub fn transposed(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            alignment: self.alignment.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }
}

/// Phrase pairs of one sentence consistent with its word alignment, as
/// inclusive 1-based `(src_begin, src_end, tgt_begin, tgt_end)` boxes.
/// Unaligned target words at the box edges yield additional pairs.
pub fn consistent_phrase_boxes(pair: &AlignedPair, max_len: usize) -> Vec<(usize, usize, usize, usize)> {
    let (src_len, tgt_len) = (pair.source.len(), pair.target.len());
    let mut tgt_aligned = vec![false; tgt_len + 1];
    for &(_, j) in &pair.alignment {
        tgt_aligned[j] = true;
    }
    let mut boxes = Vec::new();
    for s1 in 1..=src_len {
        for s2 in s1..=(s1 + max_len - 1).min(src_len) {
            let projected = pair
                .alignment
                .iter()
                .filter(|&&(i, _)| s1 <= i && i <= s2)
                .map(|&(_, j)| j);
            let (t1, t2) = match (projected.clone().min(), projected.max()) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            let leaks = pair
                .alignment
                .iter()
                .any(|&(i, j)| t1 <= j && j <= t2 && (i < s1 || i > s2));
            if leaks {
                continue;
            }
            let mut ts = t1;
            loop {
                let mut te = t2;
                while te < ts + max_len {
                    boxes.push((s1, s2, ts, te));
                    te += 1;
                    if te > tgt_len || tgt_aligned[te] {
                        break;
                    }
                }
                if ts == 1 || tgt_aligned[ts - 1] {
                    break;
                }
                ts -= 1;
            }
        }
    }
    boxes
}

/// Extract all consistent phrase pairs up to `max_phrase_len` tokens on each
/// side and estimate `p(t|s)` by relative frequency.
pub fn extract_phrase_table(corpus: &[AlignedPair], max_phrase_len: usize) -> Result<PhraseTable> {
    if max_phrase_len == 0 {
        return Err(Error::InvalidArgument("max_phrase_len must be at least 1".into()));
    }
    let mut pair_counts: HashMap<(Phrase, Phrase), u64> = HashMap::new();
    let mut source_counts: HashMap<Phrase, u64> = HashMap::new();
    for (k, pair) in corpus.iter().enumerate() {
        pair.check(k + 1)?;
        for (s1, s2, t1, t2) in consistent_phrase_boxes(pair, max_phrase_len) {
            let src = pair.source[s1 - 1..s2].to_vec();
            let tgt = pair.target[t1 - 1..t2].to_vec();
            *source_counts.entry(src.clone()).or_default() += 1;
            *pair_counts.entry((src, tgt)).or_default() += 1;
        }
    }
    let mut table = PhraseTable::new();
    for ((source, target), n) in pair_counts {
        let prob = n as f64 / source_counts[&source] as f64;
        table.insert(PhraseTableEntry { source, target, prob });
    }
    Ok(table)
}

/// Target words allowed as insertions, with their estimated probability of
/// being unaligned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InsertionVocab {
    words: BTreeMap<String, f64>,
}

impl InsertionVocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_words<I: IntoIterator<Item = (String, f64)>>(words: I) -> Self {
        Self {
            words: words.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.words.get(word).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.words.iter().map(|(w, &p)| (w.as_str(), p))
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = BTreeMap::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = || Error::Format {
                line: k + 1,
                msg: "expected `word<TAB>prob`".into(),
            };
            let (w, p) = line.split_once('\t').ok_or_else(err)?;
            let p: f64 = p.trim().parse().map_err(|_| err())?;
            if w.trim().is_empty() || !(0.0..=1.0).contains(&p) {
                return Err(err());
            }
            words.insert(w.trim().to_owned(), p);
        }
        Ok(Self { words })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (w, p) in &self.words {
            writeln!(out, "{w}\t{p}")?;
        }
        Ok(())
    }
}

/// Estimate `P(unaligned | w)` for every target word, take the `max_words`
/// most frequent words, and keep those whose estimate exceeds `threshold`.
///
/// Ranking by frequency happens before thresholding, so raising the
/// threshold can only shrink the result.
pub fn build_insertion_vocab(corpus: &[AlignedPair], threshold: f64, max_words: usize) -> Result<InsertionVocab> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut seen: HashMap<&str, (u64, u64)> = HashMap::new();
    for (k, pair) in corpus.iter().enumerate() {
        pair.check(k + 1)?;
        let aligned: HashSet<usize> = pair.alignment.iter().map(|&(_, j)| j).collect();
        for (j, w) in pair.target.iter().enumerate() {
            let e = seen.entry(w.as_str()).or_default();
            e.0 += 1;
            if !aligned.contains(&(j + 1)) {
                e.1 += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, u64, u64)> = seen.into_iter().map(|(w, (n, u))| (w, n, u)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(InsertionVocab {
        words: ranked
            .into_iter()
            .take(max_words)
            .map(|(w, n, u)| (w.to_owned(), u as f64 / n as f64))
            .filter(|&(_, p)| p > threshold)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptionKind {
    Regular,
    Omission,
    Insertion,
}

/// A candidate translation of one source span. Insertions use span `(0, 0)`
/// and an all-zero coverage vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TranslationOption {
    pub span: (usize, usize),
    pub target: Phrase,
    pub kind: OptionKind,
    pub coverage: CoverageVector,
}

impl TranslationOption {
    pub fn regular(src_len: usize, span: (usize, usize), target: Phrase) -> Result<Self> {
        if target.is_empty() || span.0 == 0 {
            return Err(Error::InvalidArgument("regular option needs a source span and target".into()));
        }
        Ok(Self {
            coverage: CoverageVector::from_span(src_len, span.0, span.1)?,
            span,
            target,
            kind: OptionKind::Regular,
        })
    }

    pub fn omission(src_len: usize, pos: usize) -> Result<Self> {
        Ok(Self {
            coverage: CoverageVector::from_span(src_len, pos, pos)?,
            span: (pos, pos),
            target: Vec::new(),
            kind: OptionKind::Omission,
        })
    }

    pub fn insertion(src_len: usize, word: String) -> Result<Self> {
        Ok(Self {
            coverage: CoverageVector::new(src_len)?,
            span: (0, 0),
            target: vec![word],
            kind: OptionKind::Insertion,
        })
    }

    pub fn overlaps(&self, span: (usize, usize)) -> bool {
        self.kind != OptionKind::Insertion && self.span.0 <= span.1 && span.0 <= self.span.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionConfig {
    pub options_per_span: usize,
    pub max_source_len: usize,
}

impl Default for OptionConfig {
    fn default() -> Self {
        Self {
            options_per_span: 20,
            max_source_len: 7,
        }
    }
}

/// Translation options of one sentence grouped by source span. Insertions
/// sit under span `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionLattice {
    src_len: usize,
    groups: BTreeMap<(usize, usize), Vec<TranslationOption>>,
}

impl OptionLattice {
    pub fn new(src_len: usize) -> Self {
        Self {
            src_len,
            groups: BTreeMap::new(),
        }
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn push(&mut self, option: TranslationOption) -> Result<()> {
        if option.coverage.len() != self.src_len || (option.kind != OptionKind::Insertion && option.span.1 > self.src_len) {
            return Err(Error::InvalidArgument(format!(
                "option span {:?} does not fit a sentence of length {}",
                option.span, self.src_len
            )));
        }
        let group = self.groups.entry(option.span).or_default();
        if !group.contains(&option) {
            group.push(option);
        }
        Ok(())
    }

    pub fn retain<F: FnMut(&TranslationOption) -> bool>(&mut self, mut keep: F) {
        for group in self.groups.values_mut() {
            group.retain(&mut keep);
        }
        self.groups.retain(|_, g| !g.is_empty());
    }

    pub fn at(&self, span: (usize, usize)) -> &[TranslationOption] {
        self.groups.get(&span).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TranslationOption> {
        self.groups.values().flatten()
    }

    pub fn groups(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<TranslationOption>)> {
        self.groups.iter()
    }

    pub fn option_count(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Match every source span against the table and add one insertion option
/// per insertion-vocabulary word.
pub fn collect_options(
    source: &SourceSentence,
    table: &PhraseTable,
    insertions: &InsertionVocab,
    config: &OptionConfig,
) -> Result<OptionLattice> {
    let n = source.len();
    let max_len = config.max_source_len.min(table.max_source_len());
    let mut lattice = OptionLattice::new(n);
    for begin in 1..=n {
        for end in begin..(begin + max_len).min(n + 1) {
            for (target, _) in table.lookup(source.span(begin, end)).iter().take(config.options_per_span) {
                lattice.push(TranslationOption::regular(n, (begin, end), target.clone())?)?;
            }
        }
    }
    for (word, _) in insertions.iter() {
        lattice.push(TranslationOption::insertion(n, word.to_owned())?)?;
    }
    Ok(lattice)
}

/// Add an omission option at each position the empty-phrase model scores at
/// or above `threshold`.
pub fn add_omission_options<M: OmissionModel + ?Sized>(
    lattice: &mut OptionLattice,
    source: &SourceSentence,
    model: &M,
    threshold: f64,
) -> Result<()> {
    for i in 1..=source.len() {
        if model.score_omission(source, i)? >= threshold {
            lattice.push(TranslationOption::omission(source.len(), i)?)?;
        }
    }
    Ok(())
}
