//! Constrained decoding over a phrase lattice.
//!
//! Items grow by three rules: Translate applies a translation option,
//! Push places a constraint tag on the stack and emits it, Pop removes a
//! matched open/close pair. Opening tags are pushed together with the first
//! Translate that enters their constraint; closing tags are pushed and popped
//! as soon as the constraint is fully covered.
//!
//! [`decode`] stores items in a matrix indexed by (source words covered,
//! target words generated). Items with the same target length compete for
//! one beam of size `b`. [`brute_force_decode`] enumerates every derivation
//! with the same rules and scoring.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use indexmap::map::Entry;
use indexmap::IndexMap;

use crate::alignment::{AlignmentLink, PhraseAlignment, SourceSentence, TargetSentence};
use crate::constraints::{ConstraintTree, ROOT};
use crate::coverage::CoverageVector;
use crate::error::{Error, Inapplicable, Result};
use crate::phrasetable::{OptionKind, OptionLattice, TranslationOption};
use crate::scorer::{OmissionModel, SequenceScorer};

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub beam_size: usize,
    /// Defaults to `2I + 10`.
    pub max_target_len: Option<usize>,
    pub length_penalty_alpha: f64,
    /// Total insertion links per sentence; defaults to `ceil(I / 2)`.
    pub max_insertions: Option<usize>,
    pub max_consecutive_insertions: usize,
    pub omission_threshold: f64,
    pub options_per_span: usize,
    /// Item budget of [`brute_force_decode`].
    pub oracle_cap: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            beam_size: 10,
            max_target_len: None,
            length_penalty_alpha: 0.6,
            max_insertions: None,
            max_consecutive_insertions: 2,
            omission_threshold: 0.5,
            options_per_span: 20,
            oracle_cap: 2_000_000,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::InvalidArgument("beam size must be at least 1".into()));
        }
        if self.max_target_len == Some(0) {
            return Err(Error::InvalidArgument("max target length must be at least 1".into()));
        }
        if !(self.length_penalty_alpha >= 0.0) {
            return Err(Error::InvalidArgument("length penalty alpha must be >= 0".into()));
        }
        Ok(())
    }

    pub fn resolved_max_target_len(&self, src_len: usize) -> usize {
        self.max_target_len.unwrap_or(2 * src_len + 10)
    }

    pub fn resolved_max_insertions(&self, src_len: usize) -> usize {
        self.max_insertions.unwrap_or(src_len.div_ceil(2))
    }
}

/// `raw_logp / ((5 + n) / 6)^alpha`.
pub fn final_score(raw_logp: f64, word_count: usize, alpha: f64) -> f64 {
    raw_logp / ((5.0 + word_count as f64) / 6.0).powf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StackTag {
    pub node: usize,
    pub close: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OutputToken {
    Word(String),
    Tag { node: usize, close: bool, text: String },
}

impl OutputToken {
    pub fn text(&self) -> &str {
        match self {
            OutputToken::Word(w) => w,
            OutputToken::Tag { text, .. } => text,
        }
    }

    pub fn is_tag(&self) -> bool {
        matches!(self, OutputToken::Tag { .. })
    }
}

fn cmp_text(a: &[OutputToken], b: &[OutputToken]) -> Ordering {
    a.iter().map(OutputToken::text).cmp(b.iter().map(OutputToken::text))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderItem<St> {
    pub coverage: CoverageVector,
    pub tag_stack: Vec<StackTag>,
    pub output: Vec<OutputToken>,
    pub alignment: Vec<AlignmentLink>,
    pub scorer_state: St,
    pub logp: f64,
    pub word_count: usize,
    pub insertions: usize,
    pub consecutive_insertions: usize,
}

impl<St> DecoderItem<St> {
    /// The constraint new source words must belong to, or `None` while a
    /// closing tag awaits its Pop.
    fn current_constraint(&self) -> Option<usize> {
        match self.tag_stack.last() {
            None => Some(ROOT),
            Some(t) if !t.close => Some(t.node),
            Some(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub output: Vec<OutputToken>,
    pub alignment: PhraseAlignment,
    /// Links in the order their Translate steps were applied.
    pub history: Vec<AlignmentLink>,
    /// Length-normalized log probability.
    pub score: f64,
    pub raw_logp: f64,
    pub word_count: usize,
    pub insertions: usize,
}

impl Derivation {
    /// Target tokens with tags in emission order.
    pub fn translation(&self) -> TargetSentence {
        TargetSentence {
            tokens: self.output.iter().map(|t| t.text().to_owned()).collect(),
        }
    }

    /// Target words only; alignment target positions index this sequence.
    pub fn words(&self) -> Vec<String> {
        self.output
            .iter()
            .filter(|t| !t.is_tag())
            .map(|t| t.text().to_owned())
            .collect()
    }

    /// `translation<TAB>alignment<TAB>score` with six decimals.
    pub fn record(&self, strip_tags: bool) -> String {
        let text: Vec<&str> = self
            .output
            .iter()
            .filter(|t| !(strip_tags && t.is_tag()))
            .map(OutputToken::text)
            .collect();
        format!("{}\t{}\t{:.6}", text.join(" "), self.alignment, self.score)
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.record(false))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub items_created: usize,
    pub items_recombined: usize,
    pub items_pruned: usize,
    pub items_expanded: usize,
    pub translate_applications: usize,
    pub push_applications: usize,
    pub pop_applications: usize,
}

#[derive(PartialEq, Eq, Hash)]
struct RecombinationKey<St> {
    coverage: CoverageVector,
    tag_stack: Vec<StackTag>,
    scorer_state: St,
    insertions: usize,
    consecutive_insertions: usize,
}

/// One sentence's search problem: models, options and constraints.
pub struct Decoder<'a, S: SequenceScorer, M: OmissionModel + ?Sized> {
    source: &'a SourceSentence,
    lattice: &'a OptionLattice,
    tree: &'a ConstraintTree,
    scorer: &'a S,
    omission: &'a M,
    alpha: f64,
    beam_size: usize,
    max_len: usize,
    max_insertions: usize,
    max_consecutive: usize,
    oracle_cap: usize,
    forced: Option<&'a [String]>,
}

impl<'a, S: SequenceScorer, M: OmissionModel + ?Sized> Decoder<'a, S, M> {
    pub fn new(
        source: &'a SourceSentence,
        lattice: &'a OptionLattice,
        tree: &'a ConstraintTree,
        scorer: &'a S,
        omission: &'a M,
        config: &DecoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n = source.len();
        if lattice.src_len() != n || tree.node(ROOT).span != (1, n) {
            return Err(Error::InvalidArgument(format!(
                "lattice ({}) or constraint tree ({:?}) does not match sentence length {n}",
                lattice.src_len(),
                tree.node(ROOT).span
            )));
        }
        Ok(Self {
            source,
            lattice,
            tree,
            scorer,
            omission,
            alpha: config.length_penalty_alpha,
            beam_size: config.beam_size,
            max_len: config.resolved_max_target_len(n),
            max_insertions: config.resolved_max_insertions(n),
            max_consecutive: config.max_consecutive_insertions,
            oracle_cap: config.oracle_cap,
            forced: None,
        })
    }

    /// Restrict the search to derivations whose words spell `reference`.
    pub fn force_target(mut self, reference: &'a [String]) -> Self {
        self.max_len = reference.len();
        self.forced = Some(reference);
        self
    }

    pub fn max_target_len(&self) -> usize {
        self.max_len
    }

    pub fn initial_item(&self) -> DecoderItem<S::State> {
        DecoderItem {
            coverage: CoverageVector::new(self.source.len()).expect("non-empty sentence"),
            tag_stack: Vec::new(),
            output: Vec::new(),
            alignment: Vec::new(),
            scorer_state: self.scorer.begin(self.source),
            logp: 0.0,
            word_count: 0,
            insertions: 0,
            consecutive_insertions: 0,
        }
    }

    fn check_translate(&self, item: &DecoderItem<S::State>, option: &TranslationOption) -> std::result::Result<(), Inapplicable> {
        let top = item.current_constraint().ok_or(Inapplicable::StackMismatch)?;
        if option.kind == OptionKind::Insertion {
            if item.insertions >= self.max_insertions || item.consecutive_insertions >= self.max_consecutive {
                return Err(Inapplicable::InsertionLimit);
            }
        } else {
            if !item.coverage.all_uncovered(option.span.0, option.span.1) {
                return Err(Inapplicable::CoverageConflict);
            }
            if self.tree.innermost_of_span(option.span) != Some(top) {
                return Err(Inapplicable::OutsideConstraint);
            }
        }
        if item.word_count + option.target.len() > self.max_len {
            return Err(Inapplicable::TooLong);
        }
        if let Some(reference) = self.forced {
            let at = item.word_count;
            if reference[at..at + option.target.len()] != option.target[..] {
                return Err(Inapplicable::OutsideConstraint);
            }
        }
        Ok(())
    }

    /// Apply a translation option to an item.
    pub fn rule_translate(&self, item: &DecoderItem<S::State>, option: &TranslationOption) -> Result<DecoderItem<S::State>> {
        self.check_translate(item, option).map_err(Error::RuleNotApplicable)?;
        let mut next = item.clone();
        next.coverage = item.coverage.merge(&option.coverage)?;
        let wc = item.word_count;
        match option.kind {
            OptionKind::Omission => {
                let p = self.omission.score_omission(self.source, option.span.0)?;
                next.logp += p.ln();
                next.alignment.push(AlignmentLink::new(option.span.0, option.span.1, 0, 0));
                next.consecutive_insertions = 0;
            }
            OptionKind::Regular | OptionKind::Insertion => {
                for tok in &option.target {
                    let (state, lp) = self.scorer.extend(&next.scorer_state, tok);
                    next.scorer_state = state;
                    next.logp += lp;
                    next.output.push(OutputToken::Word(tok.clone()));
                }
                next.word_count += option.target.len();
                next.alignment.push(AlignmentLink::new(option.span.0, option.span.1, wc + 1, next.word_count));
                if option.kind == OptionKind::Insertion {
                    next.insertions += 1;
                    next.consecutive_insertions += 1;
                } else {
                    next.consecutive_insertions = 0;
                }
            }
        }
        Ok(next)
    }

    /// Push a constraint tag and emit it. An open tag needs its constraint
    /// untouched and nested directly in the current one; a close tag needs
    /// its constraint fully covered and open on top of the stack.
    pub fn rule_push(&self, item: &DecoderItem<S::State>, tag: StackTag) -> Result<DecoderItem<S::State>> {
        let na = |r| Error::RuleNotApplicable(r);
        if tag.node == ROOT || tag.node >= self.tree.nodes().len() {
            return Err(na(Inapplicable::StackMismatch));
        }
        let node = self.tree.node(tag.node);
        let (b, e) = node.span;
        if tag.close {
            if item.tag_stack.last() != Some(&StackTag { node: tag.node, close: false }) {
                return Err(na(Inapplicable::StackMismatch));
            }
            if !item.coverage.all_covered(b, e) {
                return Err(na(Inapplicable::ConstraintIncomplete));
            }
        } else {
            if item.current_constraint() != node.parent {
                return Err(na(Inapplicable::StackMismatch));
            }
            if !item.coverage.all_uncovered(b, e) {
                return Err(na(Inapplicable::ConstraintStarted));
            }
        }
        let mut next = item.clone();
        next.tag_stack.push(tag);
        next.output.push(OutputToken::Tag {
            node: tag.node,
            close: tag.close,
            text: if tag.close { node.close_token.clone() } else { node.open_token.clone() },
        });
        Ok(next)
    }

    /// Pop a matched open/close pair off the top of the stack.
    pub fn rule_pop(&self, item: &DecoderItem<S::State>) -> Result<DecoderItem<S::State>> {
        match item.tag_stack.as_slice() {
            [.., open, close] if !open.close && close.close && open.node == close.node => {
                let mut next = item.clone();
                next.tag_stack.truncate(next.tag_stack.len() - 2);
                Ok(next)
            }
            [] | [_] => Err(Error::RuleNotApplicable(Inapplicable::StackUnderflow)),
            _ => Err(Error::RuleNotApplicable(Inapplicable::StackMismatch)),
        }
    }

    fn is_complete(&self, item: &DecoderItem<S::State>) -> bool {
        item.coverage.is_full()
            && item.tag_stack.is_empty()
            && self.forced.is_none_or(|r| r.len() == item.word_count)
    }

    fn finish(&self, item: &DecoderItem<S::State>) -> Derivation {
        let raw_logp = item.logp + self.scorer.end(&item.scorer_state);
        let mut links = item.alignment.clone();
        links.sort_by_key(|l| (l.is_omission(), l.tgt_begin, l.src_begin));
        Derivation {
            output: item.output.clone(),
            alignment: PhraseAlignment::new(links),
            history: item.alignment.clone(),
            score: final_score(raw_logp, item.word_count, self.alpha),
            raw_logp,
            word_count: item.word_count,
            insertions: item.insertions,
        }
    }

    /// Every item reachable by one Translate, preceded by the open-tag Pushes
    /// it needs and followed by all enabled close-tag Push/Pop pairs.
    fn successors(&self, item: &DecoderItem<S::State>, stats: &mut SearchStats) -> Result<Vec<DecoderItem<S::State>>> {
        let mut out = Vec::new();
        let Some(top) = item.current_constraint() else {
            return Ok(out);
        };
        for option in self.lattice.iter() {
            let mut opened;
            let mut base = item;
            if option.kind != OptionKind::Insertion {
                if !item.coverage.all_uncovered(option.span.0, option.span.1) {
                    continue;
                }
                let Some(node) = self.tree.innermost_of_span(option.span) else {
                    continue;
                };
                let Some(path) = self.tree.path_below(top, node) else {
                    continue;
                };
                if !path.is_empty() {
                    opened = item.clone();
                    let mut ok = true;
                    for n in path {
                        match self.rule_push(&opened, StackTag { node: n, close: false }) {
                            Ok(next) => {
                                stats.push_applications += 1;
                                opened = next;
                            }
                            Err(_) => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    base = &opened;
                }
            }
            if self.check_translate(base, option).is_err() {
                continue;
            }
            let mut next = self.rule_translate(base, option)?;
            stats.translate_applications += 1;
            while let Some(&StackTag { node, close: false }) = next.tag_stack.last() {
                let (b, e) = self.tree.node(node).span;
                if !next.coverage.all_covered(b, e) {
                    break;
                }
                next = self.rule_push(&next, StackTag { node, close: true })?;
                next = self.rule_pop(&next)?;
                stats.push_applications += 1;
                stats.pop_applications += 1;
            }
            out.push(next);
        }
        Ok(out)
    }

    fn no_derivation(&self, best_partial: Option<&CoverageVector>) -> Error {
        Error::NoDerivation {
            uncovered: best_partial.map_or_else(|| (1..=self.source.len()).collect(), |c| c.uncovered_positions()),
        }
    }

    /// Beam search over the coverage-by-length matrix.
    pub fn decode(&self) -> Result<(Derivation, SearchStats)> {
        let (best, stats, partial) = self.search()?;
        best.map(|d| (d, stats)).ok_or_else(|| self.no_derivation(partial.as_ref()))
    }

    /// Like [`Decoder::decode`], but returns the counters even when nothing
    /// completes.
    pub fn decode_all(&self) -> Result<(Option<Derivation>, SearchStats)> {
        self.search().map(|(d, s, _)| (d, s))
    }

    fn search(&self) -> Result<(Option<Derivation>, SearchStats, Option<CoverageVector>)> {
        let n = self.source.len();
        let mut stats = SearchStats::default();
        let mut columns: Vec<Vec<IndexMap<RecombinationKey<S::State>, Ranked<S::State>>>> =
            (0..=self.max_len).map(|_| (0..=n).map(|_| IndexMap::new()).collect()).collect();
        let mut seq = 0usize;
        let mut best: Option<Derivation> = None;
        let mut best_partial: Option<CoverageVector> = None;

        let start = self.initial_item();
        insert(&mut columns, start, &mut seq, &mut stats);

        for j in 0..=self.max_len {
            let mut expanded = 0usize;
            for i in 0..=n {
                let budget = self.beam_size.saturating_sub(expanded);
                prune(&mut columns[j][i..], budget, &mut stats);
                let cell = std::mem::take(&mut columns[j][i]);
                for (_, ranked) in cell {
                    let item = ranked.item;
                    expanded += 1;
                    stats.items_expanded += 1;
                    if best_partial.as_ref().is_none_or(|c| item.coverage.covered_count() > c.covered_count()) {
                        best_partial = Some(item.coverage.clone());
                    }
                    if self.is_complete(&item) {
                        let d = self.finish(&item);
                        if best.as_ref().is_none_or(|b| better_derivation(&d, b)) {
                            best = Some(d);
                        }
                    }
                    for next in self.successors(&item, &mut stats)? {
                        insert(&mut columns, next, &mut seq, &mut stats);
                    }
                }
            }
        }
        Ok((best, stats, best_partial))
    }

    /// Exhaustive depth-first enumeration without pruning or recombination.
    /// Returns the best derivation and the number of items visited.
    pub fn brute_force(&self) -> Result<(Derivation, usize)> {
        let (best, visited, partial) = self.enumerate()?;
        best.map(|d| (d, visited)).ok_or_else(|| self.no_derivation(partial.as_ref()))
    }

    /// Like [`Decoder::brute_force`], but reports the visited count even when
    /// nothing completes.
    pub fn enumerate_all(&self) -> Result<(Option<Derivation>, usize)> {
        self.enumerate().map(|(d, n, _)| (d, n))
    }

    fn enumerate(&self) -> Result<(Option<Derivation>, usize, Option<CoverageVector>)> {
        let mut visited = 0usize;
        let mut best: Option<Derivation> = None;
        let mut best_partial: Option<CoverageVector> = None;
        let mut stats = SearchStats::default();
        let mut stack = vec![self.initial_item()];
        while let Some(item) = stack.pop() {
            visited += 1;
            if visited > self.oracle_cap {
                return Err(Error::OracleTooLarge { cap: self.oracle_cap });
            }
            if best_partial.as_ref().is_none_or(|c| item.coverage.covered_count() > c.covered_count()) {
                best_partial = Some(item.coverage.clone());
            }
            if self.is_complete(&item) {
                let d = self.finish(&item);
                if best.as_ref().is_none_or(|b| better_derivation(&d, b)) {
                    best = Some(d);
                }
            }
            stack.extend(self.successors(&item, &mut stats)?);
        }
        Ok((best, visited, best_partial))
    }
}

/// Higher score, then fewer insertions, then lexicographically smaller
/// output, then finer segmentation.
fn better_derivation(a: &Derivation, b: &Derivation) -> bool {
    b.score
        .total_cmp(&a.score)
        .then(a.insertions.cmp(&b.insertions))
        .then_with(|| cmp_text(&a.output, &b.output))
        .then(b.alignment.len().cmp(&a.alignment.len()))
        == Ordering::Less
}

struct Ranked<St> {
    item: DecoderItem<St>,
    seq: usize,
}

/// Beam order: higher logp, fewer insertions, smaller output, more links,
/// earlier.
fn rank_order<St>(a: &Ranked<St>, b: &Ranked<St>) -> Ordering {
    b.item
        .logp
        .total_cmp(&a.item.logp)
        .then(a.item.insertions.cmp(&b.item.insertions))
        .then_with(|| cmp_text(&a.item.output, &b.item.output))
        .then(b.item.alignment.len().cmp(&a.item.alignment.len()))
        .then(a.seq.cmp(&b.seq))
}

fn insert<St: Clone + Eq + std::hash::Hash>(
    columns: &mut [Vec<IndexMap<RecombinationKey<St>, Ranked<St>>>],
    item: DecoderItem<St>,
    seq: &mut usize,
    stats: &mut SearchStats,
) {
    let cell = &mut columns[item.word_count][item.coverage.covered_count()];
    let key = RecombinationKey {
        coverage: item.coverage.clone(),
        tag_stack: item.tag_stack.clone(),
        scorer_state: item.scorer_state.clone(),
        insertions: item.insertions,
        consecutive_insertions: item.consecutive_insertions,
    };
    stats.items_created += 1;
    *seq += 1;
    let ranked = Ranked { item, seq: *seq };
    match cell.entry(key) {
        Entry::Vacant(v) => {
            v.insert(ranked);
        }
        Entry::Occupied(mut o) => {
            stats.items_recombined += 1;
            let cur = &o.get().item;
            let wins = cur
                .logp
                .total_cmp(&ranked.item.logp)
                .then_with(|| cmp_text(&ranked.item.output, &cur.output))
                .then(cur.alignment.len().cmp(&ranked.item.alignment.len()))
                == Ordering::Less;
            if wins {
                o.insert(ranked);
            }
        }
    }
}

/// Keep the best `budget` items across `cells`.
fn prune<St>(cells: &mut [IndexMap<RecombinationKey<St>, Ranked<St>>], budget: usize, stats: &mut SearchStats) {
    let total: usize = cells.iter().map(IndexMap::len).sum();
    if total <= budget {
        return;
    }
    let mut all: Vec<&Ranked<St>> = cells.iter().flat_map(IndexMap::values).collect();
    all.sort_by(|a, b| rank_order(a, b));
    let keep: HashSet<usize> = all.iter().take(budget).map(|r| r.seq).collect();
    for cell in cells.iter_mut() {
        cell.retain(|_, r| keep.contains(&r.seq));
    }
    stats.items_pruned += total - budget;
}

/// Best constrained derivation under beam search.
pub fn decode<S: SequenceScorer, M: OmissionModel + ?Sized>(
    source: &SourceSentence,
    lattice: &OptionLattice,
    tree: &ConstraintTree,
    scorer: &S,
    omission: &M,
    config: &DecoderConfig,
) -> Result<Derivation> {
    decode_with_stats(source, lattice, tree, scorer, omission, config).map(|(d, _)| d)
}

pub fn decode_with_stats<S: SequenceScorer, M: OmissionModel + ?Sized>(
    source: &SourceSentence,
    lattice: &OptionLattice,
    tree: &ConstraintTree,
    scorer: &S,
    omission: &M,
    config: &DecoderConfig,
) -> Result<(Derivation, SearchStats)> {
    Decoder::new(source, lattice, tree, scorer, omission, config)?.decode()
}

/// Exhaustive oracle; fails with `OracleTooLarge` past `config.oracle_cap`
/// items.
pub fn brute_force_decode<S: SequenceScorer, M: OmissionModel + ?Sized>(
    source: &SourceSentence,
    lattice: &OptionLattice,
    tree: &ConstraintTree,
    scorer: &S,
    omission: &M,
    config: &DecoderConfig,
) -> Result<Derivation> {
    brute_force_decode_counted(source, lattice, tree, scorer, omission, config).map(|(d, _)| d)
}

pub fn brute_force_decode_counted<S: SequenceScorer, M: OmissionModel + ?Sized>(
    source: &SourceSentence,
    lattice: &OptionLattice,
    tree: &ConstraintTree,
    scorer: &S,
    omission: &M,
    config: &DecoderConfig,
) -> Result<(Derivation, usize)> {
    Decoder::new(source, lattice, tree, scorer, omission, config)?.brute_force()
}

/// Highest raw log probability of any derivation producing exactly the words
/// of `reference`, or `None` when the lattice cannot produce it.
pub fn reference_logprob<S: SequenceScorer, M: OmissionModel + ?Sized>(
    source: &SourceSentence,
    lattice: &OptionLattice,
    tree: &ConstraintTree,
    scorer: &S,
    omission: &M,
    config: &DecoderConfig,
    reference: &[String],
) -> Result<Option<f64>> {
    let decoder = Decoder::new(source, lattice, tree, scorer, omission, config)?.force_target(reference);
    match decoder.decode() {
        Ok((d, _)) => Ok(Some(d.raw_logp)),
        Err(Error::NoDerivation { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{apply_structural, parse_tagged};
    use crate::scorer::{FixedOmission, NoOmission, TableScorer};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn regular(n: usize, span: (usize, usize), t: &str) -> TranslationOption {
        TranslationOption::regular(n, span, toks(t)).unwrap()
    }

    #[test]
    fn final_score_arithmetic() {
        assert_eq!(final_score(-3.0, 9, 0.0), -3.0);
        assert_eq!(final_score(-3.0, 1, 0.6), -3.0);
        assert_eq!(final_score(-6.0, 7, 0.6), -6.0 / 2f64.powf(0.6));
    }

    #[test]
    fn two_word_fixture() {
        let x = SourceSentence::parse("a b").unwrap();
        let mut lat = OptionLattice::new(2);
        lat.push(regular(2, (1, 1), "X")).unwrap();
        lat.push(regular(2, (2, 2), "Y")).unwrap();
        lat.push(regular(2, (1, 2), "X Y")).unwrap();
        let mut scorer = TableScorer::new(None, -5.0, -5.0).unwrap();
        scorer.set(&[], "X", -0.1).unwrap();
        scorer.set(&["X"], "Y", -0.1).unwrap();
        scorer.set(&[], "Y", -0.1).unwrap();
        scorer.set(&["Y"], "X", -0.1).unwrap();
        scorer.set_end(&["X", "Y"], -0.1).unwrap();
        let tree = ConstraintTree::root_only(2);
        let cfg = DecoderConfig {
            beam_size: 8,
            ..DecoderConfig::default()
        };
        let d = decode(&x, &lat, &tree, &scorer, &NoOmission, &cfg).unwrap();
        assert_eq!(d.words(), toks("X Y"));
        // both segmentations score the same; the finer one wins the tie.
        assert_eq!(d.alignment.to_string(), "1:1-1:1 2:2-2:2");
        assert!((d.raw_logp - -0.3).abs() < 1e-12);
        let oracle = brute_force_decode(&x, &lat, &tree, &scorer, &NoOmission, &cfg).unwrap();
        assert_eq!(oracle.score, d.score);
        assert!(d.alignment.validate(2, 2).is_ok());
    }

    #[test]
    fn all_omission_derivation() {
        let x = SourceSentence::parse("a b c").unwrap();
        let mut lat = OptionLattice::new(3);
        for i in 1..=3 {
            lat.push(TranslationOption::omission(3, i).unwrap()).unwrap();
        }
        let om = FixedOmission::new(vec![0.9, 0.8, 0.7]);
        let scorer = TableScorer::new(None, -1.0, 0.0).unwrap();
        let d = decode(&x, &lat, &ConstraintTree::root_only(3), &scorer, &om, &DecoderConfig::default()).unwrap();
        assert!(d.words().is_empty());
        assert!(d.alignment.links.iter().all(AlignmentLink::is_omission));
        let expected = 0.9f64.ln() + 0.8f64.ln() + 0.7f64.ln();
        assert!((d.raw_logp - expected).abs() < 1e-12);
        assert!(d.alignment.validate(3, 0).is_ok());
    }

    #[test]
    fn no_options_means_no_derivation() {
        let x = SourceSentence::parse("a b").unwrap();
        let lat = OptionLattice::new(2);
        let tree = ConstraintTree::root_only(2);
        let scorer = TableScorer::new(None, -1.0, -1.0).unwrap();
        match decode(&x, &lat, &tree, &scorer, &NoOmission, &DecoderConfig::default()) {
            Err(Error::NoDerivation { uncovered }) => assert_eq!(uncovered, vec![1, 2]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            brute_force_decode(&x, &lat, &tree, &scorer, &NoOmission, &DecoderConfig::default()),
            Err(Error::NoDerivation { .. })
        ));
    }

    /// The five-link running example with nested tags around the name.
    fn poet() -> (SourceSentence, ConstraintTree, OptionLattice, TableScorer, FixedOmission) {
        let (x, tree) = parse_tagged("<c1> American poet <c2> Edgar Allan Poe </c2> </c1>").unwrap();
        let mut lat = OptionLattice::new(5);
        lat.push(regular(5, (1, 1), "meiguo")).unwrap();
        lat.push(regular(5, (2, 2), "shiren")).unwrap();
        lat.push(regular(5, (4, 5), "ailunpo")).unwrap();
        lat.push(regular(5, (2, 3), "shiren aide")).unwrap();
        lat.push(TranslationOption::omission(5, 3).unwrap()).unwrap();
        lat.push(TranslationOption::insertion(5, "de".into()).unwrap()).unwrap();
        let lat = apply_structural(&lat, &tree);
        let mut scorer = TableScorer::new(None, -4.0, -4.0).unwrap();
        scorer.set(&[], "meiguo", -0.2).unwrap();
        scorer.set(&["meiguo"], "de", -0.3).unwrap();
        scorer.set(&["meiguo", "de"], "shiren", -0.2).unwrap();
        scorer.set(&["meiguo", "de", "shiren"], "ailunpo", -0.4).unwrap();
        scorer.set_end(&["meiguo", "de", "shiren", "ailunpo"], -0.1).unwrap();
        let om = FixedOmission::new(vec![0.01, 0.01, 0.8, 0.01, 0.01]);
        (x, tree, lat, scorer, om)
    }

    #[test]
    fn structured_example_derivation() {
        let (x, tree, lat, scorer, om) = poet();
        // (2,3) crosses the c2 boundary and is filtered out.
        assert!(lat.at((2, 3)).is_empty());
        let cfg = DecoderConfig::default();
        let d = decode(&x, &lat, &tree, &scorer, &om, &cfg).unwrap();
        assert_eq!(
            d.translation().to_string(),
            "<c1> meiguo de shiren <c2> ailunpo </c2> </c1>"
        );
        assert_eq!(d.alignment.to_string(), "1:1-1:1 0:0-2:2 2:2-3:3 4:5-4:4 3:3-0:0");
        let expected = -0.2 - 0.3 - 0.2 - 0.4 + 0.8f64.ln() - 0.1;
        assert!((d.raw_logp - expected).abs() < 1e-12);
        let oracle = brute_force_decode(&x, &lat, &tree, &scorer, &om, &cfg).unwrap();
        assert_eq!((oracle.score, &oracle.output, &oracle.alignment), (d.score, &d.output, &d.alignment));
    }

    #[test]
    fn translate_rule_cases() {
        let (x, tree, lat, scorer, om) = poet();
        let dec = Decoder::new(&x, &lat, &tree, &scorer, &om, &DecoderConfig::default()).unwrap();
        let start = dec.initial_item();
        // American lies in c1, which is not open yet.
        let american = &lat.at((1, 1))[0];
        assert!(matches!(
            dec.rule_translate(&start, american),
            Err(Error::RuleNotApplicable(Inapplicable::OutsideConstraint))
        ));
        let in_c1 = dec.rule_push(&start, StackTag { node: 1, close: false }).unwrap();
        assert_eq!(in_c1.output[0].text(), "<c1>");
        assert_eq!(in_c1.logp, 0.0);
        let item = dec.rule_translate(&in_c1, american).unwrap();
        assert_eq!(item.coverage.bits(), vec![true, false, false, false, false]);
        assert!(matches!(
            dec.rule_translate(&item, american),
            Err(Error::RuleNotApplicable(Inapplicable::CoverageConflict))
        ));

        let ins = &lat.at((0, 0))[0];
        let with_de = dec.rule_translate(&item, ins).unwrap();
        assert_eq!(with_de.coverage, item.coverage);
        assert_eq!(with_de.alignment.last(), Some(&AlignmentLink::new(0, 0, 2, 2)));
        assert!((with_de.logp - (item.logp - 0.3)).abs() < 1e-15);

        let in_c2 = dec.rule_push(&with_de, StackTag { node: 2, close: false }).unwrap();
        let omit = &lat.at((3, 3))[0];
        let omitted = dec.rule_translate(&in_c2, omit).unwrap();
        assert_eq!(omitted.alignment.last(), Some(&AlignmentLink::new(3, 3, 0, 0)));
        assert!((omitted.logp - (in_c2.logp + 0.8f64.ln())).abs() < 1e-15);
        assert_eq!(omitted.word_count, in_c2.word_count);

        // Opening c2 again once Edgar is covered is refused.
        assert!(matches!(
            dec.rule_push(&omitted, StackTag { node: 2, close: false }),
            Err(Error::RuleNotApplicable(_))
        ));
        // Closing c2 early is refused.
        assert!(matches!(
            dec.rule_push(&omitted, StackTag { node: 2, close: true }),
            Err(Error::RuleNotApplicable(Inapplicable::ConstraintIncomplete))
        ));
        let poe = &lat.at((4, 5))[0];
        let full_c2 = dec.rule_translate(&omitted, poe).unwrap();
        assert_eq!(full_c2.alignment.last(), Some(&AlignmentLink::new(4, 5, 3, 3)));
        let closed = dec.rule_push(&full_c2, StackTag { node: 2, close: true }).unwrap();
        assert_eq!(closed.output.last().unwrap().text(), "</c2>");
        let popped = dec.rule_pop(&closed).unwrap();
        assert_eq!(popped.tag_stack, vec![StackTag { node: 1, close: false }]);
    }

    #[test]
    fn pop_rule_cases() {
        let (x, tree, lat, scorer, om) = poet();
        let dec = Decoder::new(&x, &lat, &tree, &scorer, &om, &DecoderConfig::default()).unwrap();
        let mut item = dec.initial_item();
        assert!(matches!(
            dec.rule_pop(&item),
            Err(Error::RuleNotApplicable(Inapplicable::StackUnderflow))
        ));
        item.tag_stack = vec![StackTag { node: 1, close: false }, StackTag { node: 2, close: false }];
        assert!(matches!(
            dec.rule_pop(&item),
            Err(Error::RuleNotApplicable(Inapplicable::StackMismatch))
        ));
        item.tag_stack = vec![StackTag { node: 1, close: false }, StackTag { node: 1, close: true }];
        assert!(dec.rule_pop(&item).unwrap().tag_stack.is_empty());
    }

    #[test]
    fn max_target_len_blocks_translation() {
        let x = SourceSentence::parse("a").unwrap();
        let mut lat = OptionLattice::new(1);
        lat.push(regular(1, (1, 1), "X Y Z")).unwrap();
        let tree = ConstraintTree::root_only(1);
        let scorer = TableScorer::new(None, -1.0, -1.0).unwrap();
        let cfg = DecoderConfig {
            max_target_len: Some(2),
            ..DecoderConfig::default()
        };
        let dec = Decoder::new(&x, &lat, &tree, &scorer, &NoOmission, &cfg).unwrap();
        assert!(matches!(
            dec.rule_translate(&dec.initial_item(), &lat.at((1, 1))[0]),
            Err(Error::RuleNotApplicable(Inapplicable::TooLong))
        ));
        assert!(matches!(dec.decode(), Err(Error::NoDerivation { .. })));
    }

    #[test]
    fn insertion_limits_bound_the_search() {
        let x = SourceSentence::parse("a").unwrap();
        let mut lat = OptionLattice::new(1);
        lat.push(regular(1, (1, 1), "X")).unwrap();
        lat.push(TranslationOption::insertion(1, "the".into()).unwrap()).unwrap();
        let tree = ConstraintTree::root_only(1);
        // insertions are cheap, so the best output uses as many as allowed.
        let scorer = TableScorer::new(None, -0.01, -1.0).unwrap();
        let cfg = DecoderConfig {
            max_insertions: Some(5),
            length_penalty_alpha: 2.0,
            ..DecoderConfig::default()
        };
        let d = decode(&x, &lat, &tree, &scorer, &NoOmission, &cfg).unwrap();
        let longest_run = d
            .alignment
            .links
            .split(|l| !l.is_insertion())
            .map(<[AlignmentLink]>::len)
            .max()
            .unwrap();
        assert!(longest_run <= 2);
        assert!(d.insertions <= 5);
        let oracle = brute_force_decode(&x, &lat, &tree, &scorer, &NoOmission, &cfg).unwrap();
        assert_eq!((oracle.score, &oracle.output), (d.score, &d.output));
    }

    #[test]
    fn forced_decoding_requires_reference_words() {
        let x = SourceSentence::parse("a b").unwrap();
        let mut lat = OptionLattice::new(2);
        lat.push(regular(2, (1, 1), "X")).unwrap();
        lat.push(regular(2, (2, 2), "Y")).unwrap();
        let tree = ConstraintTree::root_only(2);
        let scorer = TableScorer::new(Some(1), -0.5, -0.25).unwrap();
        let cfg = DecoderConfig::default();
        let lp = reference_logprob(&x, &lat, &tree, &scorer, &NoOmission, &cfg, &toks("Y X")).unwrap();
        assert_eq!(lp, Some(-1.25));
        let none = reference_logprob(&x, &lat, &tree, &scorer, &NoOmission, &cfg, &toks("Y Z")).unwrap();
        assert_eq!(none, None);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let x = SourceSentence::parse("a b").unwrap();
        let lat = OptionLattice::new(3);
        let scorer = TableScorer::new(None, -1.0, -1.0).unwrap();
        assert!(Decoder::new(&x, &lat, &ConstraintTree::root_only(2), &scorer, &NoOmission, &DecoderConfig::default()).is_err());
        let bad = DecoderConfig {
            beam_size: 0,
            ..DecoderConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
