//! Phrase-alignment translation: phrase-table extraction, empty-phrase
//! modelling, and decoding under lexical and structural constraints with an
//! explicit source/target phrase alignment.
//!
//! Positions are 1-based throughout; position 0 stands for the empty word.

pub mod alignment;
pub mod constraints;
pub mod coverage;
pub mod decoder;
pub mod error;
pub mod phrasetable;
pub mod scorer;
pub mod synth;

pub use alignment::{AlignmentLink, PhraseAlignment, SourceSentence, TargetSentence, ValidationReport, Violation};
pub use constraints::{
    apply_lexical, apply_structural, parse_tagged, resolve_lexical, tokenize_markup, ConstraintTree,
    LexicalConstraint, LexicalRule, MarkupToken,
};
pub use coverage::CoverageVector;
pub use decoder::{
    brute_force_decode, decode, decode_with_stats, final_score, reference_logprob, Decoder, DecoderConfig,
    Derivation, OutputToken, SearchStats,
};
pub use error::{Error, Inapplicable, Result};
pub use phrasetable::{
    add_omission_options, build_insertion_vocab, collect_options, extract_phrase_table, AlignedPair, InsertionVocab,
    OptionConfig, OptionKind, OptionLattice, PhraseTable, TranslationOption,
};
pub use scorer::{EmptyPhraseModel, NgramScorer, OmissionModel, SequenceScorer};
