use phrasealign::decoder::Decoder;
use phrasealign::synth::{self, Instance, OracleParams};
use phrasealign::{
    decode, ConstraintTree, DecoderConfig, Derivation, OmissionModel, OptionKind, OutputToken, SequenceScorer,
};
use proptest::prelude::*;

fn run(inst: &Instance, beam: usize) -> Option<Derivation> {
    let cfg = DecoderConfig {
        beam_size: beam,
        ..inst.config.clone()
    };
    decode(&inst.source, &inst.lattice, &inst.tree, &inst.scorer, &inst.omission, &cfg).ok()
}

/// Recompute the raw log probability by replaying the Translate steps in
/// their original order.
fn replay(inst: &Instance, d: &Derivation) -> f64 {
    let words = d.words();
    let mut state = inst.scorer.begin(&inst.source);
    let mut logp = 0.0;
    for link in &d.history {
        if link.is_omission() {
            logp += inst.omission.score_omission(&inst.source, link.src_begin).unwrap().ln();
        } else {
            for w in &words[link.tgt_begin - 1..link.tgt_end] {
                let (next, lp) = inst.scorer.extend(&state, w);
                state = next;
                logp += lp;
            }
        }
    }
    logp + inst.scorer.end(&state)
}

/// Checks that tags are well nested, mirror the tree exactly, and that every
/// non-inserted word comes from a source span inside each enclosing tag.
fn check_tags(tree: &ConstraintTree, d: &Derivation) -> Result<(), String> {
    let mut stack: Vec<usize> = Vec::new();
    let mut opened = vec![0usize; tree.nodes().len()];
    let mut closed = vec![0usize; tree.nodes().len()];
    let mut word = 0usize;
    for tok in &d.output {
        match tok {
            OutputToken::Tag { node, close: false, text } => {
                let n = tree.node(*node);
                if text != &n.open_token {
                    return Err(format!("open tag text {text} for node {node}"));
                }
                if n.parent != Some(stack.last().copied().unwrap_or(0)) {
                    return Err(format!("node {node} opened outside its parent"));
                }
                opened[*node] += 1;
                stack.push(*node);
            }
            OutputToken::Tag { node, close: true, text } => {
                if stack.pop() != Some(*node) || text != &tree.node(*node).close_token {
                    return Err(format!("close tag {text} does not match the open tag"));
                }
                closed[*node] += 1;
            }
            OutputToken::Word(_) => {
                word += 1;
                let link = d
                    .alignment
                    .links
                    .iter()
                    .find(|l| l.tgt_begin <= word && word <= l.tgt_end)
                    .ok_or(format!("target word {word} unaligned"))?;
                if link.is_insertion() {
                    continue;
                }
                for &n in &stack {
                    if !tree.node(n).contains((link.src_begin, link.src_end)) {
                        return Err(format!("word {word} from {link} escapes node {n}"));
                    }
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err("unclosed tags".into());
    }
    for n in 1..tree.nodes().len() {
        if opened[n] != 1 || closed[n] != 1 {
            return Err(format!("node {n} emitted {}/{} times", opened[n], closed[n]));
        }
    }
    Ok(())
}

#[test]
fn finite_beams_never_beat_exhaustive_search() {
    for seed in 0..40 {
        let inst = synth::oracle_instance(seed, &OracleParams::default());
        let dec = Decoder::new(&inst.source, &inst.lattice, &inst.tree, &inst.scorer, &inst.omission, &inst.config)
            .unwrap();
        let (best, _) = dec.enumerate_all().unwrap();
        for b in [1, 2, 4, 8, 16] {
            match (&best, run(&inst, b)) {
                (Some(o), Some(d)) => assert!(d.score <= o.score + 1e-12, "seed {seed} b {b}"),
                (None, Some(_)) => panic!("seed {seed}: beam found what exhaustive search did not"),
                (_, None) => {}
            }
        }
    }
}

#[test]
fn raw_logp_replays_exactly() {
    let mut checked = 0;
    for seed in 0..150 {
        let mut insts = vec![synth::oracle_instance(seed, &OracleParams::default()), synth::lexical_instance(seed)];
        insts.push(synth::structural_instance(seed).1);
        for inst in &insts {
            if let Some(d) = run(inst, 10) {
                assert_eq!(replay(inst, &d).to_bits(), d.raw_logp.to_bits(), "seed {seed}");
                checked += 1;
            }
        }
    }
    assert!(checked > 300);
}

#[test]
fn tag_stack_discipline() {
    let mut solved = 0;
    for seed in 0..200 {
        let (tagged, inst) = synth::structural_instance(seed);
        let Some(d) = run(&inst, 10) else { continue };
        solved += 1;
        check_tags(&inst.tree, &d).unwrap_or_else(|e| panic!("{tagged}: {e}"));
        let words = d.words().len();
        assert!(d.alignment.validate(inst.source.len(), words).is_ok(), "{tagged}");
    }
    assert!(solved >= 190, "only {solved} structural instances solved");
}

#[test]
fn links_come_from_the_lattice() {
    for seed in 0..100 {
        let inst = synth::lexical_instance(seed);
        let Some(d) = run(&inst, 10) else { continue };
        let words = d.words();
        for l in &d.alignment.links {
            let kind = if l.is_insertion() {
                OptionKind::Insertion
            } else if l.is_omission() {
                OptionKind::Omission
            } else {
                OptionKind::Regular
            };
            let target = if l.is_omission() {
                &[][..]
            } else {
                &words[l.tgt_begin - 1..l.tgt_end]
            };
            assert!(
                inst.lattice
                    .at((l.src_begin, l.src_end))
                    .iter()
                    .any(|o| o.kind == kind && o.target == target),
                "seed {seed}: {l} has no option"
            );
        }
    }
}

#[test]
fn repeated_decoding_is_identical() {
    for seed in 0..30 {
        let (_, inst) = synth::structural_instance(seed);
        let a = run(&inst, 5).map(|d| d.to_string());
        let b = run(&inst, 5).map(|d| d.to_string());
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoded_alignments_partition_both_sides(seed in any::<u64>(), beam in 1usize..12) {
        let inst = synth::oracle_instance(seed, &OracleParams::default());
        if let Some(d) = run(&inst, beam) {
            let report = d.alignment.validate(inst.source.len(), d.words().len());
            prop_assert!(report.is_ok(), "{:?}", report);
            prop_assert!(d.insertions <= inst.config.resolved_max_insertions(inst.source.len()));
            prop_assert!(d.word_count <= inst.config.resolved_max_target_len(inst.source.len()));
        }
    }
}
