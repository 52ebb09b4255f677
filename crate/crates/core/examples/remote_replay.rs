// Replays a recorded remote extraction session from its fixture file, with
// no network access. Two of the recorded answers are unusable, so those lines
// fall back to the heuristic extractor.

use std::error::Error;
use std::fs;
use std::path::PathBuf;

use babylon::extractor::{Extractor, ExtractorConfig};
use babylon::ingest::load_structured_csv;
use babylon::llm::CannedChat;
use babylon::pipeline::{outcomes_to_jsonl, Pipeline};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut dataset = load_structured_csv(data.join("Service_2k.log_structured.csv"))?;
    dataset.records.truncate(50);

    let canned = CannedChat::from_jsonl(data.join("session/service_50.fixtures.jsonl"))?;
    let mut pipeline = Pipeline::new(Extractor::remote(canned, ExtractorConfig::default()));
    let report = pipeline.run_stream(&dataset);

    for d in &report.summary.degradations {
        println!("line {} fell back to the heuristic: {}", d.line_id, d.reason);
    }
    println!(
        "{} lines, {} clusters, {} extractor calls",
        report.summary.records, report.summary.clusters, report.summary.extractor_calls
    );
    let expected = fs::read_to_string(data.join("session/service_50.outcomes.jsonl"))?;
    assert_eq!(outcomes_to_jsonl(&report.outcomes), expected);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
