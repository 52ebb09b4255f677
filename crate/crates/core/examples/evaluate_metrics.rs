// Scores parses against ground truth: the oracle extractor (perfect by
// construction) and the heuristic one.

use std::error::Error;
use std::path::PathBuf;

use babylon::extractor::Extractor;
use babylon::ingest::load_structured_csv;
use babylon::metrics::{evaluate_outcomes, fga, Grouping};
use babylon::pipeline::Pipeline;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // four messages, two true groups, three parsed groups
    let truth = Grouping::from_pairs([(1, "A"), (2, "A"), (3, "B"), (4, "B")]);
    let parsed = Grouping::from_pairs([(1, "x"), (2, "x"), (3, "y"), (4, "z")]);
    let (p, r, f) = fga(&parsed, &truth)?;
    println!("toy example: precision {p:.3} recall {r:.3} FGA {f:.3}");

    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    for name in ["Apache", "Service"] {
        let dataset = load_structured_csv(data.join(format!("{name}_2k.log_structured.csv")))?;
        for (label, extractor) in [("oracle", Extractor::oracle(&dataset)?), ("heuristic", Extractor::heuristic())] {
            let mut pipeline = Pipeline::new(extractor);
            let report = pipeline.run_stream(&dataset);
            let metrics = evaluate_outcomes(&report.outcomes, &dataset)?;
            print!("{}", metrics.table(&format!("{name}/{label}")));
            if label == "oracle" {
                assert_eq!((metrics.ga, metrics.pa, metrics.fga, metrics.fta), (1.0, 1.0, 1.0, 1.0));
                assert_eq!((metrics.ggd, metrics.pgd), (0, 0));
            }
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
