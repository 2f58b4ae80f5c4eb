//! Size-preserving augmentation: replace a fraction of a split's intents with
//! gated perturbations, and watch the vocabulary grow with the ratio.

use perturbe::augment::{augment_split, vocab_growth, AugmentPlan, KindSelector};
use perturbe::corpus::{Corpus, Sample};
use perturbe::perturb::{GateVerdict, PerturbationKind, PerturbationRecord};
use perturbe::preprocess::Stopwords;

fn main() -> perturbe::Result<()> {
    let samples: Vec<Sample> = (0..20)
        .map(|i| Sample::new(format!("s{i:02}"), format!("Move {i} into the EAX register"), format!("mov eax, {i}")))
        .collect();
    let train = Corpus::from_samples("train", samples)?;
    let records: Vec<PerturbationRecord> = train
        .iter()
        .enumerate()
        .map(|(i, s)| PerturbationRecord {
            sample_id: s.id.clone(),
            kind: PerturbationKind::SubstConstrained,
            original: s.intent.clone(),
            perturbed: s.intent.replace("Move", ["Shift", "Transfer", "Copy", "Load"][i % 4]),
            changed_positions: vec![0],
            similarity: Some(0.9),
            gate_pass: GateVerdict::Pass,
        })
        .collect();

    let mut variants = Vec::new();
    for p in [0.0, 0.25, 0.5, 1.0] {
        let plan = AugmentPlan::new(p, KindSelector::Substitution, 42)?;
        let augmented = augment_split(&train, &records, &plan)?;
        let changed = augmented.iter().zip(train.iter()).filter(|(a, b)| a.intent != b.intent).count();
        println!("p = {p:<4}  size {}  perturbed {changed}", augmented.len());
        variants.push(augmented);
    }
    println!("distinct content words: {:?}", vocab_growth(&variants, &Stopwords::default_english()));
    Ok(())
}
