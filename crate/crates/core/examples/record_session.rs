// Records a 50-line remote extraction session as a replayable fixture.
//
// A scripted stand-in for the chat model answers from ground truth, with a
// few deliberate quirks: quoted and backticked answers, one answer that is
// not a template at all, and one transport failure. The last two make the
// extractor exhaust its retries and fall back to the heuristic.
//
// `cargo run --example record_session -- --write` rewrites the files under
// `data/session/`; without `--write` the example checks they are current.

use std::collections::HashMap;
use std::error::Error;
use std::fs;
use std::path::PathBuf;

use babylon::extractor::{Extractor, ExtractorConfig};
use babylon::ingest::{load_structured_csv, Dataset};
use babylon::llm::{ChatRequest, ChatTransport, RecordingChat, TransportError};
use babylon::pipeline::{outcomes_to_jsonl, Pipeline};

const LINES: usize = 50;

struct ScriptedModel {
    truth: HashMap<String, (String, String)>,
}

impl ChatTransport for ScriptedModel {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let prompt = &request.messages.last().expect("prompt has a user message").content;
        let query = prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("Log: "))
            .expect("prompt ends with the query log");
        let (event, template) = &self.truth[query];
        match event.as_str() {
            "E8" => Ok("The worker failed, but I cannot tell which words are variable.".into()),
            "E12" => Err(TransportError::Http("status 503: upstream overloaded".into())),
            "E9" => Ok(format!("Version strings and service names vary.\n\"{template}\"")),
            "E5" => Ok(format!("The address is variable.\n`{template}`")),
            _ => Ok(format!(
                "Numbers, addresses and identifiers are variables.\nTemplate: {template}"
            )),
        }
    }
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn session_dataset() -> Result<Dataset, Box<dyn Error>> {
    let mut ds = load_structured_csv(data_dir().join("Service_2k.log_structured.csv"))?;
    ds.records.truncate(LINES);
    if let Some(t) = ds.truth.as_mut() {
        t.truncate(LINES);
    }
    Ok(ds)
}

/// Fixture JSONL, expected outcomes JSONL, expected summary JSON.
pub fn record() -> Result<(String, String, String), Box<dyn Error>> {
    let ds = session_dataset()?;
    let truth = ds
        .truth
        .as_ref()
        .ok_or("dataset has no truth")?
        .iter()
        .map(|e| (e.content.clone(), (e.event_id.clone(), e.event_template.clone())))
        .collect();
    let recorder = std::sync::Arc::new(RecordingChat::new(ScriptedModel { truth }));
    let mut pipeline = Pipeline::new(Extractor::remote(recorder.clone(), ExtractorConfig::default()));
    let report = pipeline.run_stream(&ds);
    let summary = serde_json::to_string_pretty(&report.summary)? + "\n";
    Ok((recorder.to_jsonl(), outcomes_to_jsonl(&report.outcomes), summary))
}

fn files() -> [PathBuf; 3] {
    let dir = data_dir().join("session");
    [
        dir.join("service_50.fixtures.jsonl"),
        dir.join("service_50.outcomes.jsonl"),
        dir.join("service_50.summary.json"),
    ]
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (fixtures, outcomes, summary) = record()?;
    for (path, fresh) in files().iter().zip([&fixtures, &outcomes, &summary]) {
        let stored = fs::read_to_string(path)?;
        if &stored != fresh {
            return Err(format!("{} is stale; rerun with --write", path.display()).into());
        }
    }
    println!(
        "session fixture is current: {} recorded exchanges, {} outcomes",
        fixtures.lines().count(),
        outcomes.lines().count()
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    if std::env::args().any(|a| a == "--write") {
        let (fixtures, outcomes, summary) = record()?;
        for (path, text) in files().iter().zip([fixtures, outcomes, summary]) {
            fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        return Ok(());
    }
    run_example()
}
