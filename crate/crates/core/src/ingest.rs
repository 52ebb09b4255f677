//! Loading raw log files and loghub-style structured CSVs.
//!
//! Content is never rewritten: tokens are the maximal runs of non-whitespace
//! characters, with no lowercasing and no variable masking.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const REQUIRED_COLUMNS: [&str; 4] = ["LineId", "Content", "EventId", "EventTemplate"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("log content is blank")]
    EmptyContent,
    #[error("missing required column `{0}`")]
    Schema(String),
    #[error("row {line}: {message}")]
    Row { line: u64, message: String },
    #[error("dataset `{0}` has no ground truth")]
    MissingTruth(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Splits `content` on runs of whitespace.
pub fn tokenize(content: &str) -> Result<Vec<String>, IngestError> {
    let tokens: Vec<String> = content.split_whitespace().map(str::to_owned).collect();
    if tokens.is_empty() {
        return Err(IngestError::EmptyContent);
    }
    Ok(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub line_id: u64,
    pub source: String,
    pub content: String,
    pub tokens: Vec<String>,
}

impl LogRecord {
    pub fn new(
        line_id: u64,
        source: impl Into<String>,
        content: impl Into<String>,
    ) -> Result<Self, IngestError> {
        let content = content.into();
        let tokens = tokenize(&content)?;
        Ok(LogRecord {
            line_id,
            source: source.into(),
            content,
            tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub line_id: u64,
    pub content: String,
    pub event_id: String,
    pub event_template: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<LogRecord>,
    pub truth: Option<Vec<GroundTruthEntry>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ground-truth template for `line_id`, if this dataset carries truth.
    pub fn truth_template(&self, line_id: u64) -> Option<&str> {
        let truth = self.truth.as_ref()?;
        // line ids are contiguous from 1, so index directly and fall back to a scan
        let idx = usize::try_from(line_id).ok()?.checked_sub(1)?;
        match truth.get(idx) {
            Some(entry) if entry.line_id == line_id => Some(entry.event_template.as_str()),
            _ => truth
                .iter()
                .find(|e| e.line_id == line_id)
                .map(|e| e.event_template.as_str()),
        }
    }

    /// Number of distinct ground-truth templates.
    pub fn distinct_templates(&self) -> Option<usize> {
        let truth = self.truth.as_ref()?;
        Some(
            truth
                .iter()
                .map(|e| e.event_template.as_str())
                .collect::<HashSet<_>>()
                .len(),
        )
    }
}

/// Summary of a raw log load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub skipped_blank: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn dataset_name(path: &Path) -> String {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    match file.find(".log") {
        Some(idx) => file[..idx].trim_end_matches("_2k").to_owned(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(file),
    }
}

/// Loads a loghub `*_structured.csv` file. Extra columns are ignored.
pub fn load_structured_csv(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_structured_csv(&bytes, &dataset_name(path))
}

pub fn parse_structured_csv(bytes: &[u8], name: &str) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Row {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| IngestError::Schema(name.to_owned()))?;
    }
    let [id_col, content_col, event_col, template_col] = columns;

    let mut records = Vec::new();
    let mut truth = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |idx: usize| row.get(idx).unwrap_or_default();
        let line_id: u64 = field(id_col).trim().parse().map_err(|_| IngestError::Row {
            line,
            message: format!("LineId `{}` is not a positive integer", field(id_col)),
        })?;
        let expected = records.len() as u64 + 1;
        if line_id != expected {
            return Err(IngestError::Row {
                line,
                message: format!("LineId {line_id} out of sequence, expected {expected}"),
            });
        }
        let content = field(content_col).to_owned();
        let record = LogRecord::new(line_id, name, content.clone()).map_err(|e| IngestError::Row {
            line,
            message: e.to_string(),
        })?;
        records.push(record);
        truth.push(GroundTruthEntry {
            line_id,
            content,
            event_id: field(event_col).to_owned(),
            event_template: field(template_col).to_owned(),
        });
    }
    Ok(Dataset {
        name: name.to_owned(),
        records,
        truth: Some(truth),
    })
}

/// Writes truth back out in the structured CSV layout.
pub fn write_structured_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let truth = dataset
        .truth
        .as_ref()
        .ok_or_else(|| IngestError::MissingTruth(dataset.name.clone()))?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| IngestError::Row {
        line: 0,
        message: e.to_string(),
    };
    writer.write_record(REQUIRED_COLUMNS).map_err(row_err)?;
    for entry in truth {
        writer
            .write_record([
                entry.line_id.to_string().as_str(),
                &entry.content,
                &entry.event_id,
                &entry.event_template,
            ])
            .map_err(row_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| IngestError::Row {
        line: 0,
        message: e.to_string(),
    })?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Loads a plain log file, one message per line. Invalid UTF-8 is replaced.
pub fn load_raw_log(
    path: impl AsRef<Path>,
    source: &str,
) -> Result<(Dataset, LoadReport), IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(parse_raw_log(&bytes, source))
}

pub fn parse_raw_log(bytes: &[u8], source: &str) -> (Dataset, LoadReport) {
    let text = String::from_utf8_lossy(bytes);
    let mut report = LoadReport::default();
    let mut records = Vec::new();
    for line in text.lines() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        match LogRecord::new(records.len() as u64 + 1, source, line) {
            Ok(record) => records.push(record),
            Err(_) => report.skipped_blank += 1,
        }
    }
    let dataset = Dataset {
        name: source.to_owned(),
        records,
        truth: None,
    };
    (dataset, report)
}

/// Picks `n` (content, template) pairs from the leading `fraction` of a
/// dataset for use as in-context demonstrations.
///
/// Candidates are deduplicated by template, ordered by token length, and
/// chosen at evenly spaced ranks so the selection is reproducible.
pub fn sample_icl_pairs(
    dataset: &Dataset,
    n: usize,
    fraction: f64,
) -> Result<Vec<(String, String)>, IngestError> {
    let truth = dataset
        .truth
        .as_ref()
        .ok_or_else(|| IngestError::MissingTruth(dataset.name.clone()))?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(IngestError::InvalidArgument(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    if n == 0 {
        return Err(IngestError::InvalidArgument("n must be at least 1".into()));
    }
    let prefix = ((truth.len() as f64) * fraction).floor() as usize;
    let mut seen = HashSet::new();
    let mut candidates: Vec<(usize, &GroundTruthEntry)> = truth[..prefix]
        .iter()
        .filter(|e| seen.insert(e.event_template.as_str()))
        .map(|e| (e.content.split_whitespace().count(), e))
        .collect();
    candidates.sort_by_key(|(len, _)| *len);

    let m = candidates.len();
    let picks: Vec<usize> = if m <= n {
        (0..m).collect()
    } else {
        (0..n).map(|i| i * m / n).collect()
    };
    Ok(picks
        .into_iter()
        .map(|i| {
            let entry = candidates[i].1;
            (entry.content.clone(), entry.event_template.clone())
        })
        .collect())
}
