// Shows the extraction prompt the remote backend would send for a log line,
// with demonstrations picked from clusters the parser already knows.

use std::error::Error;

use babylon::extractor::{parse_response, Extractor, ExtractorConfig};
use babylon::ingest::LogRecord;
use babylon::llm::EchoChat;
use babylon::pipeline::Pipeline;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut pipeline = Pipeline::new(Extractor::heuristic());
    for (i, line) in [
        "Accepted password for root from 10.0.0.7 port 51234 ssh2",
        "Connection closed by 10.0.0.9 [preauth]",
        "session opened for user root by (uid=0)",
        "Heartbeat from node n4 ok",
    ]
    .iter()
    .enumerate()
    {
        pipeline.process_log(&LogRecord::new(i as u64 + 1, "demo", *line)?)?;
    }

    let cfg = ExtractorConfig {
        k_demonstrations: 2,
        ..ExtractorConfig::default()
    };
    let answer = "The user name and address vary.\nTemplate: `Accepted password for <*> from <*> port <*> ssh2`";
    let remote = Extractor::remote(EchoChat(answer.into()), cfg);
    let query = LogRecord::new(5, "demo", "Accepted password for alice from 10.0.0.8 port 40022 ssh2")?;

    let request = remote.remote_request(&query, pipeline.state());
    for m in &request.messages {
        println!("--- {} ---\n{}", m.role, m.content);
    }
    println!("--- request hash {} ---", request.hash());

    assert_eq!(
        parse_response(answer).as_deref(),
        Some("Accepted password for <*> from <*> port <*> ssh2")
    );
    let extraction = remote.extract(&query, pipeline.state())?;
    println!("template: {}\nsyntax:   {}", extraction.template.as_str(), extraction.syntax);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
