// Parses half a file, snapshots the parser state to JSON, restores it and
// finishes the file. The result matches an uninterrupted run.

use std::error::Error;
use std::path::PathBuf;

use babylon::extractor::Extractor;
use babylon::ingest::{load_structured_csv, Dataset};
use babylon::parse_core::ParserState;
use babylon::pipeline::{outcomes_to_jsonl, Pipeline};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/Apache_2k.log_structured.csv");
    let dataset = load_structured_csv(path)?;
    let half = dataset.len() / 2;
    let first = Dataset {
        records: dataset.records[..half].to_vec(),
        ..dataset.clone()
    };
    let second = Dataset {
        records: dataset.records[half..].to_vec(),
        ..dataset.clone()
    };

    let mut straight = Pipeline::new(Extractor::heuristic());
    let all = straight.run_stream(&dataset);

    let mut before = Pipeline::new(Extractor::heuristic());
    let head = before.run_stream(&first);
    let json = before.state().to_json()?;
    println!("snapshot after {} lines: {} bytes, {} clusters", half, json.len(), before.state().cluster_count());

    let restored = ParserState::from_json(&json)?;
    assert!(restored.audit().is_empty());
    let mut after = Pipeline::with_state(restored, Extractor::heuristic());
    let tail = after.run_stream(&second);

    let resumed = outcomes_to_jsonl(head.outcomes.iter().chain(&tail.outcomes));
    assert_eq!(resumed, outcomes_to_jsonl(&all.outcomes));
    assert_eq!(after.state().to_json()?, straight.state().to_json()?);
    println!("resumed run matches the uninterrupted one ({} clusters)", after.state().cluster_count());
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
