// Turns parse outcomes and anomaly verdicts into an operator report, with a
// narrative written by a (canned) chat model.

use std::error::Error;
use std::path::PathBuf;

use babylon::extractor::Extractor;
use babylon::ingest::load_structured_csv;
use babylon::llm::EchoChat;
use babylon::pipeline::{OutcomeLine, Pipeline};
use babylon::rag::{interpret, AnomalyVerdict, Label, Narrator};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/Apache_2k.log_structured.csv");
    let dataset = load_structured_csv(path)?;
    let mut pipeline = Pipeline::new(Extractor::oracle(&dataset)?);
    let outcomes: Vec<OutcomeLine> = pipeline.run_stream(&dataset).outcomes.iter().map(OutcomeLine::from).collect();

    let verdicts = vec![AnomalyVerdict {
        line_id: 17,
        label: Label::Abnormal,
        explanation: "abnormal: the worker environment keeps entering error state".into(),
        top_score: Some(0.41),
    }];
    let model = EchoChat(
        "mod_jk workers repeatedly enter error state; check workers2.properties and the JK connector.".into(),
    );
    let narrator = Narrator {
        transport: &model,
        model: "gpt-4".into(),
    };
    let report = interpret(&outcomes, Some(&verdicts), Some(&narrator));
    print!("{}", report.render_text());
    assert_eq!(report.clusters, 6);
    assert!(report.narrative.is_some());
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
