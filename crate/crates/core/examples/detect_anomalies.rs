// Builds a vector store from normal logs and labels incoming lines with the
// score-threshold judge. Swap in `LlmJudge` to ask a chat model instead.

use std::error::Error;
use std::fs;
use std::path::PathBuf;

use babylon::ingest::parse_raw_log;
use babylon::rag::{classify, HashedEmbedder, KeywordStub, Label, VectorStore, DEFAULT_TOP_K};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/anomaly");
    let (normal, _) = parse_raw_log(&fs::read(dir.join("normal.log"))?, "normal");
    let (incoming, _) = parse_raw_log(&fs::read(dir.join("incoming.log"))?, "incoming");
    let expected: Vec<String> = fs::read_to_string(dir.join("labels.csv"))?
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap_or_default().to_owned())
        .collect();

    let embedder = HashedEmbedder::new(256);
    let (store, skipped) = VectorStore::build(&embedder, normal.records.iter().map(|r| r.content.as_str()));
    assert!(skipped.is_empty());
    println!("store: {} normal lines, dimension {}", store.len(), store.dim());

    let judge = KeywordStub::default();
    let mut agree = 0;
    for (record, want) in incoming.records.iter().zip(&expected) {
        let verdict = classify(record, &store, &embedder, &judge, DEFAULT_TOP_K)?;
        let got = match verdict.label {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
            Label::Undetermined => "undetermined",
        };
        if got == want {
            agree += 1;
        }
        if verdict.label == Label::Abnormal {
            println!("line {:>2} abnormal: {}", record.line_id, record.content);
        }
    }
    println!("{agree}/{} verdicts match the labels", expected.len());
    assert_eq!(agree, expected.len());
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
