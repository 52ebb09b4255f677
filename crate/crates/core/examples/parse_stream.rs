// Streams a structured log file through the parser and prints the clusters.
//
// `cargo run --example parse_stream [path/to/X_structured.csv]`

use std::error::Error;
use std::path::PathBuf;

use babylon::extractor::Extractor;
use babylon::ingest::load_structured_csv;
use babylon::pipeline::Pipeline;

fn default_input() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/Service_2k.log_structured.csv")
}

fn parse(path: PathBuf) -> Result<(), Box<dyn Error>> {
    let dataset = load_structured_csv(&path)?;
    let mut pipeline = Pipeline::new(Extractor::heuristic());
    let report = pipeline.run_stream(&dataset);
    let s = &report.summary;
    println!(
        "{}: {} lines -> {} clusters with {} extractor calls ({:?})",
        s.dataset, s.records, s.clusters, s.extractor_calls, s.actions
    );
    let mut clusters: Vec<_> = pipeline.state().clusters().collect();
    clusters.sort_by_key(|c| std::cmp::Reverse(c.member_ids.len()));
    for c in clusters.iter().take(8) {
        println!("{:>6}  {:<5} {}", c.member_ids.len(), c.id.to_string(), c.template.as_str());
    }
    // parsing the same lines again never needs the extractor
    let again = pipeline.run_stream(&dataset);
    assert_eq!(again.summary.extractor_calls, 0);
    assert_eq!(again.summary.actions.strict_matched, dataset.len());
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    parse(default_input())
}

fn main() -> Result<(), Box<dyn Error>> {
    match std::env::args_os().nth(1) {
        Some(path) => parse(path.into()),
        None => run_example(),
    }
}
