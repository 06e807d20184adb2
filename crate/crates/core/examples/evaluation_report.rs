//! Confusion matrices, metric sets and the comparison table.
//!
//! cargo run --example evaluation_report

use swarmformer::eval::{comparison_report, confusion, ConfusionMatrix, EvaluationReport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cm = confusion(&[1, 1, 0, 0, 1, 0], &[1, 0, 0, 1, 1, 0])?;
    println!("counts by (true, predicted): {:?}", cm.counts());

    let report = EvaluationReport::new("example", "test", cm, 0, "")?;
    let m = report.metrics;
    println!("accuracy {:.3}", m.accuracy);
    for (class, c) in m.per_class.iter().enumerate() {
        println!(
            "class {class}: precision {:.3} recall {:.3} f1 {:.3}",
            c.precision.value, c.recall.value, c.f1.value
        );
    }
    println!("macro f1 {:.3}, micro f1 {:.3}", m.macro_avg.f1, m.micro.f1);

    let reports = [
        ("transformer", [[475, 15], [20, 490]]),
        ("forest", [[450, 40], [38, 472]]),
        ("tree", [[398, 92], [100, 410]]),
    ]
    .map(|(name, counts)| EvaluationReport::new(name, "test", ConfusionMatrix::from_counts(counts), 0, "").unwrap());
    let table = comparison_report(&reports);
    print!("{}", table.to_text());

    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    print!("{}", String::from_utf8(csv)?);
    Ok(())
}
