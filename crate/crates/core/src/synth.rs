//! Seeded generators for synthetic corpora and decoding instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::SourceSentence;
use crate::decoder::DecoderConfig;
use crate::constraints::{apply_lexical, apply_structural, parse_tagged, ConstraintTree, LexicalConstraint};
use crate::phrasetable::{
    add_omission_options, collect_options, AlignedPair, InsertionVocab, OptionConfig, OptionLattice, PhraseTable,
    PhraseTableEntry,
};
use crate::scorer::{FixedOmission, OmissionModel, TableScorer, UnalignedIndicator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sentences over `w0..w19` and the function word `f`; a position is
/// unaligned exactly when it holds `f`.
pub fn omission_corpus(n: usize, seed: u64) -> Vec<(SourceSentence, UnalignedIndicator)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let len = r.gen_range(3..=8);
            let toks: Vec<String> = (0..len)
                .map(|_| {
                    if r.gen_bool(0.25) {
                        "f".to_owned()
                    } else {
                        format!("w{}", r.gen_range(0..20))
                    }
                })
                .collect();
            let u = UnalignedIndicator(toks.iter().map(|t| t == "f").collect());
            (SourceSentence::new(toks).expect("non-empty"), u)
        })
        .collect()
}

/// Fraction of positions where `p >= 0.5` agrees with the indicator.
pub fn omission_accuracy<M: OmissionModel + ?Sized>(model: &M, data: &[(SourceSentence, UnalignedIndicator)]) -> f64 {
    let mut right = 0usize;
    let mut total = 0usize;
    for (x, u) in data {
        for i in 1..=x.len() {
            let p = model.score_omission(x, i).expect("position in range");
            right += usize::from((p >= 0.5) == u.0[i - 1]);
            total += 1;
        }
    }
    right as f64 / total.max(1) as f64
}

/// A self-contained decoding problem with a deterministic scorer.
#[derive(Debug, Clone)]
pub struct Instance {
    pub source: SourceSentence,
    pub lattice: OptionLattice,
    pub tree: ConstraintTree,
    pub scorer: TableScorer,
    pub omission: FixedOmission,
    pub lexical: Vec<LexicalConstraint>,
    pub config: DecoderConfig,
}

/// Bigram-style table scorer: every (previous word, word) pair and every
/// end transition gets a random log probability.
fn random_scorer(r: &mut ChaCha8Rng, vocab: &[String]) -> TableScorer {
    let mut s = TableScorer::new(Some(1), -3.0, -3.0).expect("valid defaults");
    let mut prevs: Vec<Vec<&str>> = vec![vec![]];
    prevs.extend(vocab.iter().map(|w| vec![w.as_str()]));
    for p in &prevs {
        for w in vocab {
            s.set(p, w, -r.gen_range(0.05..3.0)).expect("negative");
        }
        s.set_end(p, -r.gen_range(0.05..3.0)).expect("negative");
    }
    s
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

fn random_phrase(r: &mut ChaCha8Rng, vocab: &[String], max_len: usize) -> Vec<String> {
    (0..r.gen_range(1..=max_len)).map(|_| vocab.choose(r).expect("vocab").clone()).collect()
}

/// Random phrase table over spans of `source`, at most `max_entries`
/// entries, with a guaranteed single-word entry for each position listed in
/// `must_cover`. Further entries are added until a coin with `stop_prob`
/// comes up heads.
fn random_table(
    r: &mut ChaCha8Rng,
    source: &SourceSentence,
    vocab: &[String],
    max_entries: usize,
    must_cover: &[usize],
    stop_prob: f64,
) -> PhraseTable {
    let mut table = PhraseTable::new();
    let entry = |r: &mut ChaCha8Rng, span: (usize, usize)| PhraseTableEntry {
        source: source.span(span.0, span.1).to_vec(),
        target: random_phrase(r, vocab, 2),
        prob: r.gen_range(0.05..1.0),
    };
    for &i in must_cover {
        table.insert(entry(r, (i, i)));
    }
    let n = source.len();
    while table.len() < max_entries && !r.gen_bool(stop_prob) {
        let b = r.gen_range(1..=n);
        let e = r.gen_range(b..=(b + 2).min(n));
        table.insert(entry(r, (b, e)));
    }
    table
}

/// Parameters for [`oracle_instance`].
#[derive(Debug, Clone, Copy)]
pub struct OracleParams {
    pub max_src_len: usize,
    pub max_entries: usize,
    pub vocab: usize,
    pub max_insertion_words: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            max_src_len: 6,
            max_entries: 12,
            vocab: 10,
            max_insertion_words: 2,
        }
    }
}

/// Unconstrained instance for comparing beam search with exhaustive search.
pub fn oracle_instance(seed: u64, params: &OracleParams) -> Instance {
    let mut r = rng(seed);
    let n = r.gen_range(1..=params.max_src_len);
    let source = SourceSentence::new((0..n).map(|_| format!("s{}", r.gen_range(0..6))).collect()).expect("n >= 1");
    let vocab = words("t", params.vocab);
    let probs: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..1.0)).collect();
    let omission = FixedOmission::new(probs.clone());
    let threshold = 0.5;
    // positions without an omission option get a guaranteed table entry
    // most of the time; the rest may leave the instance unsolvable.
    let must: Vec<usize> = (1..=n).filter(|&i| probs[i - 1] < threshold && r.gen_bool(0.9)).collect();
    // the exhaustive space grows with I! and with every extra target choice,
    // so longer sentences get sparser tables and fewer insertion words.
    let stop = if n >= 5 { 0.5 } else { 0.2 };
    let table = random_table(&mut r, &source, &vocab, params.max_entries.max(must.len()), &must, stop);
    let k = r.gen_range(0..=params.max_insertion_words.min(if n >= 5 { 1 } else { 2 }));
    let insertions = InsertionVocab::from_words(vocab.choose_multiple(&mut r, k).map(|w| (w.clone(), 0.5)));
    let mut lattice =
        collect_options(&source, &table, &insertions, &OptionConfig::default()).expect("consistent lengths");
    add_omission_options(&mut lattice, &source, &omission, threshold).expect("positions in range");
    Instance {
        scorer: random_scorer(&mut r, &vocab),
        tree: ConstraintTree::root_only(n),
        source,
        lattice,
        omission,
        lexical: Vec::new(),
        config: DecoderConfig {
            max_insertions: (n >= 5).then_some(1),
            ..DecoderConfig::default()
        },
    }
}

/// Instance with one to three disjoint lexical constraints whose targets
/// use words the phrase table never produces.
pub fn lexical_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.gen_range(3..=8);
    let source = SourceSentence::new((0..n).map(|_| format!("s{}", r.gen_range(0..5))).collect()).expect("n >= 3");
    let vocab = words("t", 8);
    let must: Vec<usize> = (1..=n).collect();
    let table = random_table(&mut r, &source, &vocab, 16, &must, 0.15);
    let omission = FixedOmission::new((0..n).map(|_| r.gen_range(0.01..1.0)).collect());
    let insertions = InsertionVocab::from_words([(vocab[0].clone(), 0.5)]);
    let mut lattice = collect_options(&source, &table, &insertions, &OptionConfig::default()).expect("lengths");
    add_omission_options(&mut lattice, &source, &omission, 0.5).expect("positions");

    let want = r.gen_range(1..=3usize);
    let mut lexical: Vec<LexicalConstraint> = Vec::new();
    for _ in 0..50 {
        if lexical.len() == want {
            break;
        }
        let b = r.gen_range(1..=n);
        let e = r.gen_range(b..=(b + 1).min(n));
        if lexical.iter().any(|c| b <= c.span.1 && c.span.0 <= e) {
            continue;
        }
        let target = (0..r.gen_range(1..=2)).map(|_| format!("k{}", r.gen_range(0..4))).collect();
        lexical.push(LexicalConstraint { span: (b, e), target });
    }
    lexical.sort_by_key(|c| c.span);
    let lattice = apply_lexical(&lattice, &lexical).expect("disjoint constraints");
    let mut scorer_vocab = vocab.clone();
    scorer_vocab.extend(words("k", 4));
    Instance {
        scorer: random_scorer(&mut r, &scorer_vocab),
        tree: ConstraintTree::root_only(n),
        source,
        lattice,
        omission,
        lexical,
        config: DecoderConfig::default(),
    }
}

/// Random well-nested tag markup over `len` words with depth at most
/// `max_depth`, using canonical `<cN>` names.
pub fn tagged_source(r: &mut ChaCha8Rng, len: usize, max_depth: usize) -> String {
    fn fill(r: &mut ChaCha8Rng, b: usize, e: usize, depth: usize, max_depth: usize, next_id: &mut usize, out: &mut Vec<String>) {
        let mut i = b;
        while i <= e {
            if depth < max_depth && r.gen_bool(0.35) {
                let j = r.gen_range(i..=e.min(i + 3));
                let id = *next_id;
                *next_id += 1;
                out.push(format!("<c{id}>"));
                fill(r, i, j, depth + 1, max_depth, next_id, out);
                out.push(format!("</c{id}>"));
                i = j + 1;
            } else {
                out.push(format!("s{}", r.gen_range(0..5)));
                i += 1;
            }
        }
    }
    let mut out = Vec::new();
    let mut next_id = 1;
    fill(r, 1, len, 0, max_depth, &mut next_id, &mut out);
    out.join(" ")
}

/// Instance with nested structural constraints of depth at most 3. The
/// phrase table includes multi-word entries that cross tag boundaries.
pub fn structural_instance(seed: u64) -> (String, Instance) {
    let mut r = rng(seed);
    let n = r.gen_range(2..=7);
    let tagged = tagged_source(&mut r, n, 3);
    let (source, tree) = parse_tagged(&tagged).expect("generated markup is well formed");
    let vocab = words("t", 8);
    let must: Vec<usize> = (1..=n).collect();
    let table = random_table(&mut r, &source, &vocab, 16, &must, 0.15);
    let omission = FixedOmission::new((0..n).map(|_| r.gen_range(0.01..1.0)).collect());
    let insertions = InsertionVocab::from_words([(vocab[1].clone(), 0.5)]);
    let mut lattice = collect_options(&source, &table, &insertions, &OptionConfig::default()).expect("lengths");
    add_omission_options(&mut lattice, &source, &omission, 0.5).expect("positions");
    let lattice = apply_structural(&lattice, &tree);
    let instance = Instance {
        scorer: random_scorer(&mut r, &vocab),
        source,
        lattice,
        tree,
        omission,
        lexical: Vec::new(),
        config: DecoderConfig::default(),
    };
    (tagged, instance)
}

/// Word-aligned corpus where source `f` is never aligned and target `the`
/// is never aligned but frequent. Content word `aK` translates as `AK`.
/// Returns training pairs plus held-out (source, reference) pairs whose
/// `f`/`the` contexts never occur in training.
pub fn ablation_corpus(n: usize, seed: u64) -> (Vec<AlignedPair>, Vec<(String, String)>) {
    let mut r = rng(seed);
    // training contexts draw from a0..a5; held-out sentences put f and the
    // next to a6..a9, which appear in training only away from f and the.
    let mut train = Vec::new();
    let make = |r: &mut ChaCha8Rng, content: &[usize], function_ok: bool| {
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        let mut align = Vec::new();
        for &c in content {
            if function_ok && r.gen_bool(0.3) {
                src.push("f".to_owned());
            }
            src.push(format!("a{c}"));
            if function_ok && r.gen_bool(0.5) {
                tgt.push("the".to_owned());
            }
            tgt.push(format!("A{c}"));
            align.push((src.len(), tgt.len()));
        }
        (src, tgt, align)
    };
    for k in 0..n {
        let len = r.gen_range(2..=5);
        let (src, tgt, align) = if k % 4 == 0 {
            let content: Vec<usize> = (0..len).map(|_| r.gen_range(6..10)).collect();
            make(&mut r, &content, false)
        } else {
            let content: Vec<usize> = (0..len).map(|_| r.gen_range(0..6)).collect();
            make(&mut r, &content, true)
        };
        train.push(AlignedPair::new(&src.join(" "), &tgt.join(" "), align.into_iter().map(|(i, j)| (i, j)).collect()));
    }
    let mut held = Vec::new();
    for _ in 0..20 {
        let a = r.gen_range(6..10);
        let b = r.gen_range(6..10);
        held.push((format!("a{a} f a{b}"), format!("A{a} the A{b}")));
    }
    (train, held)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = oracle_instance(7, &OracleParams::default());
        let b = oracle_instance(7, &OracleParams::default());
        assert_eq!(a.source, b.source);
        assert_eq!(a.lattice, b.lattice);
        assert_eq!(structural_instance(3).0, structural_instance(3).0);
        assert_eq!(omission_corpus(5, 1), omission_corpus(5, 1));
    }

    #[test]
    fn tagged_sources_respect_depth() {
        let mut r = rng(1);
        for _ in 0..200 {
            let len = r.gen_range(1..=8);
            let s = tagged_source(&mut r, len, 3);
            let (x, tree) = parse_tagged(&s).unwrap();
            assert_eq!(x.len(), len);
            assert!(tree.depth() <= 3);
        }
    }

    #[test]
    fn lexical_constraints_are_disjoint() {
        for seed in 0..100 {
            let inst = lexical_instance(seed);
            assert!((1..=3).contains(&inst.lexical.len()));
            for w in inst.lexical.windows(2) {
                assert!(w[0].span.1 < w[1].span.0);
            }
        }
    }
}
