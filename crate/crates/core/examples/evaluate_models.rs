//! SYN, SEM and ROB for a toy model, plus the Jensen-Shannon divergence of two
//! corpora. SYN uses GNU `as` when it is installed.

use perturbe::corpus::{Corpus, Sample};
use perturbe::metrics::syntax::{syntactic_accuracy, SyntaxChecker};
use perturbe::metrics::{
    evaluate_cell, exact_match_labels, jsd, report_csv, robust_accuracy, semantic_accuracy, CellInputs, PredictionSet,
};
use perturbe::preprocess::Stopwords;

fn main() -> perturbe::Result<()> {
    let test = Corpus::from_samples(
        "test",
        vec![
            Sample::new("t1", "Clear the EAX register", "xor eax, eax"),
            Sample::new("t2", "Push EBX onto the stack", "push ebx"),
            Sample::new("t3", "Move 11 into AL and make the system call", "mov al, 11\\nint 0x80"),
            Sample::new("t4", "Decrement ECX", "dec ecx"),
        ],
    )?;
    let clean = PredictionSet::from_pairs(
        "toy",
        [("t1", "xor eax, eax"), ("t2", "push ebx"), ("t3", "mov al, 11\\nint 0x80"), ("t4", "inc ecx")],
    );
    let perturbed = PredictionSet::from_pairs(
        "toy",
        [("t1", "xor eax, eax"), ("t2", "push"), ("t3", "mov al, 11\\nint 0x80"), ("t4", "dec ecx")],
    );

    let before = exact_match_labels(&clean, &test)?;
    let after = exact_match_labels(&perturbed, &test)?;
    println!("SEM clean     {:.3}", semantic_accuracy(&before)?);
    println!("SEM perturbed {:.3}", semantic_accuracy(&after)?);
    match robust_accuracy(&before, &after)? {
        Some(rob) => println!("ROB           {rob:.3}"),
        None => println!("ROB           undefined"),
    }

    let checker = SyntaxChecker::gas();
    let syntax = match syntactic_accuracy(&perturbed, &checker) {
        Ok(report) => {
            println!("SYN perturbed {:.3}", report.syn);
            Some(report)
        }
        Err(e) => {
            println!("SYN skipped: {e}");
            None
        }
    };
    let cell = evaluate_cell(
        "toy",
        "substitution",
        0.0,
        1.0,
        &CellInputs {
            test: &test,
            syntax: syntax.as_ref(),
            labels: Some(&after),
            before: Some(&before),
        },
    )?;
    print!("\n{}", report_csv(&[cell]));

    let other = Corpus::from_samples(
        "other",
        vec![Sample::new("o1", "Open the file and print each line", "pass")],
    )?;
    println!("\nJSD(test, test)  = {:.4}", jsd(&test, &test, &Stopwords::default_english())?);
    println!("JSD(test, other) = {:.4}", jsd(&test, &other, &Stopwords::default_english())?);
    Ok(())
}
