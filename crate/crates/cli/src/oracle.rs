//! Randomized comparison of beam search against exhaustive search.

use phrasealign::decoder::Decoder;
use phrasealign::synth::{self, Instance, OracleParams};
use phrasealign::{DecoderConfig, Error, SearchStats};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub oracle_score: Option<f64>,
    pub beam_score: Option<f64>,
    pub oracle_items: usize,
    pub beam_size: usize,
    pub stats: SearchStats,
    pub max_target_len: usize,
    pub option_count: usize,
}

impl OracleOutcome {
    pub fn agrees(&self, tolerance: f64) -> bool {
        match (self.oracle_score, self.beam_score) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= tolerance,
            _ => false,
        }
    }

    /// Translate applications stay within `beam * max_target_len * options`.
    pub fn within_work_bound(&self) -> bool {
        self.stats.translate_applications <= self.beam_size * self.max_target_len * self.option_count
    }
}

/// Decode `inst` exhaustively, then with a beam no smaller than the number
/// of items the exhaustive search visited.
pub fn check_instance(inst: &Instance) -> Result<OracleOutcome, Error> {
    let config = &inst.config;
    let exhaustive = Decoder::new(&inst.source, &inst.lattice, &inst.tree, &inst.scorer, &inst.omission, config)?;
    let (oracle, items) = exhaustive.enumerate_all()?;
    let beam_size = items.max(config.beam_size);
    run_beam(inst, beam_size, oracle.map(|d| d.score), items)
}

/// Decode `inst` with a given beam and report its work counters.
pub fn run_beam(
    inst: &Instance,
    beam_size: usize,
    oracle_score: Option<f64>,
    oracle_items: usize,
) -> Result<OracleOutcome, Error> {
    let cfg = DecoderConfig {
        beam_size,
        ..inst.config.clone()
    };
    let dec = Decoder::new(&inst.source, &inst.lattice, &inst.tree, &inst.scorer, &inst.omission, &cfg)?;
    let (best, stats) = dec.decode_all()?;
    let beam_score = best.map(|d| d.score);
    Ok(OracleOutcome {
        oracle_score,
        beam_score,
        oracle_items,
        beam_size,
        stats,
        max_target_len: dec.max_target_len(),
        option_count: inst.lattice.option_count(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuiteSummary {
    pub passed: usize,
    pub failed: usize,
    pub too_large: usize,
    pub failures: Vec<u64>,
}

/// Run `n` seeded instances starting at `seed`.
pub fn run_suite(n: usize, seed: u64, params: &OracleParams) -> SuiteSummary {
    let mut s = SuiteSummary::default();
    for k in 0..n as u64 {
        let inst = synth::oracle_instance(seed + k, params);
        match check_instance(&inst) {
            Ok(o) if o.agrees(1e-9) && o.within_work_bound() => s.passed += 1,
            Err(Error::OracleTooLarge { .. }) => s.too_large += 1,
            _ => {
                s.failed += 1;
                s.failures.push(seed + k);
            }
        }
    }
    s
}
