use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::anomaly::{AnomalyVerdict, Label};
use crate::llm::{ChatMessage, ChatRequest, ChatTransport};
use crate::parse_core::ClusterId;
use crate::pipeline::{Action, ActionCounts, OutcomeLine};

const TOP_TEMPLATES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateCount {
    pub cluster_id: ClusterId,
    pub template: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySection {
    pub checked: usize,
    pub abnormal: usize,
    pub undetermined: usize,
    pub anomalies: Vec<AnomalyVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretationReport {
    pub records: usize,
    pub clusters: usize,
    pub actions: ActionCounts,
    pub top_templates: Vec<TemplateCount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomalies: Option<AnomalySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub narrative: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub narrative_note: Option<String>,
}

/// Chat model used to write a free-text summary of the report.
pub struct Narrator<'a> {
    pub transport: &'a dyn ChatTransport,
    pub model: String,
}

pub fn interpret(
    outcomes: &[OutcomeLine],
    verdicts: Option<&[AnomalyVerdict]>,
    narrator: Option<&Narrator<'_>>,
) -> InterpretationReport {
    let mut per_cluster: BTreeMap<ClusterId, (String, usize)> = BTreeMap::new();
    let mut actions = ActionCounts::default();
    for o in outcomes {
        let slot = per_cluster.entry(o.cluster_id).or_default();
        // later outcomes carry the cluster's newest template
        slot.0 = o.template.clone();
        slot.1 += 1;
        match o.action {
            Action::StrictMatched => actions.strict_matched += 1,
            Action::PoolMatched => actions.pool_matched += 1,
            Action::Merged => actions.merged += 1,
            Action::Created => actions.created += 1,
        }
    }
    let mut top: Vec<TemplateCount> = per_cluster
        .iter()
        .map(|(id, (template, count))| TemplateCount {
            cluster_id: *id,
            template: template.clone(),
            count: *count,
        })
        .collect();
    top.sort_by(|a, b| b.count.cmp(&a.count).then(a.cluster_id.cmp(&b.cluster_id)));
    top.truncate(TOP_TEMPLATES);

    let anomalies = verdicts.map(|vs| AnomalySection {
        checked: vs.len(),
        abnormal: vs.iter().filter(|v| v.label == Label::Abnormal).count(),
        undetermined: vs.iter().filter(|v| v.label == Label::Undetermined).count(),
        anomalies: vs.iter().filter(|v| v.label == Label::Abnormal).cloned().collect(),
    });

    let mut report = InterpretationReport {
        records: outcomes.len(),
        clusters: per_cluster.len(),
        actions,
        top_templates: top,
        anomalies,
        narrative: None,
        narrative_note: None,
    };
    if let Some(narrator) = narrator {
        let request = ChatRequest {
            model: narrator.model.clone(),
            temperature: 0.0,
            messages: vec![
                ChatMessage::system(
                    "Summarize these log analysis results for an operator: the main log events, \
                     an explanation of each anomaly, and concrete troubleshooting steps.",
                ),
                ChatMessage::user(report.render_text()),
            ],
        };
        match narrator.transport.complete(&request) {
            Ok(text) => report.narrative = Some(text),
            Err(e) => report.narrative_note = Some(format!("narrative unavailable: {e}")),
        }
    }
    report
}

impl InterpretationReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "== Summary ==");
        let _ = writeln!(out, "records:  {}", self.records);
        let _ = writeln!(out, "clusters: {}", self.clusters);
        let a = &self.actions;
        let _ = writeln!(
            out,
            "actions:  strict_matched={} pool_matched={} merged={} created={}",
            a.strict_matched, a.pool_matched, a.merged, a.created
        );
        let _ = writeln!(out, "\n== Top templates ==");
        for t in &self.top_templates {
            let _ = writeln!(out, "{:>7}  {:<6} {}", t.count, t.cluster_id.to_string(), t.template);
        }
        if let Some(section) = &self.anomalies {
            let _ = writeln!(out, "\n== Anomalies ==");
            let _ = writeln!(
                out,
                "checked: {}  abnormal: {}  undetermined: {}",
                section.checked, section.abnormal, section.undetermined
            );
            for v in &section.anomalies {
                let score = v.top_score.map_or("n/a".to_owned(), |s| format!("{s:.4}"));
                let _ = writeln!(out, "- line {} (best match {}): {}", v.line_id, score, v.explanation);
            }
        }
        if let Some(narrative) = &self.narrative {
            let _ = writeln!(out, "\n== Narrative ==\n{narrative}");
        }
        if let Some(note) = &self.narrative_note {
            let _ = writeln!(out, "\n({note})");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
