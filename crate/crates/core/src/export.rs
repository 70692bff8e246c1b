//! CSV export of ranked backlogs and metric tables.
//!
//! The dialect is RFC 4180: UTF-8, CRLF line endings, fields quoted only when
//! they contain a comma, a double quote, CR or LF, with quotes doubled.

use serde::{Deserialize, Serialize};

use crate::domain::{PrioritizationTechnique, SessionRecord};

pub const BACKLOG_HEADER: [&str; 9] = [
    "rank",
    "story_id",
    "epic",
    "title",
    "description",
    "acceptance_criteria",
    "technique",
    "score",
    "justification",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ExportError {
    #[error("no {technique} backlog yet")]
    NotReady { technique: PrioritizationTechnique },
    #[error("unknown session {id}")]
    UnknownSession { id: String },
}

pub struct CsvWriter {
    inner: csv::Writer<Vec<u8>>,
}

impl Default for CsvWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl CsvWriter {
    pub fn new() -> Self {
        let inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        Self { inner }
    }

    pub fn record<I, T>(&mut self, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        // writing into a Vec cannot fail
        self.inner
            .write_record(fields)
            .expect("in-memory csv write");
    }

    pub fn finish(self) -> String {
        let bytes = self.inner.into_inner().expect("in-memory csv flush");
        String::from_utf8(bytes).expect("csv input was utf-8")
    }
}

/// Score with at most four decimals and no trailing zeros.
pub fn format_score(score: f64) -> String {
    if !score.is_finite() {
        return String::new();
    }
    let s = format!("{score:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn backlog_csv(
    session: &SessionRecord,
    technique: PrioritizationTechnique,
) -> Result<String, ExportError> {
    let backlog = session
        .backlog(technique)
        .ok_or(ExportError::NotReady { technique })?;
    let mut entries: Vec<_> = backlog.entries.iter().collect();
    entries.sort_by(|a, b| {
        a.rank
            .cmp(&b.rank)
            .then_with(|| a.story_id.cmp(&b.story_id))
    });
    let mut w = CsvWriter::new();
    w.record(BACKLOG_HEADER);
    for entry in entries {
        let story = session.story(&entry.story_id);
        let rank = entry.rank.to_string();
        let score = format_score(entry.score);
        let (epic, title, description, criteria) = match story {
            Some(s) => (
                s.epic.clone(),
                s.title.clone(),
                s.description(),
                s.acceptance_criteria.join("; "),
            ),
            None => Default::default(),
        };
        w.record([
            rank.as_str(),
            entry.story_id.as_str(),
            &epic,
            &title,
            &description,
            &criteria,
            technique.label(),
            &score,
            &entry.justification,
        ]);
    }
    Ok(w.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_rules() {
        let mut w = CsvWriter::new();
        w.record(["a", "b,c", "say \"hi\"", "line\nbreak", ""]);
        assert_eq!(
            w.finish(),
            "a,\"b,c\",\"say \"\"hi\"\"\",\"line\nbreak\",\r\n"
        );
    }

    #[test]
    fn score_format() {
        assert_eq!(format_score(40.0), "40");
        assert_eq!(format_score(4.0), "4");
        assert_eq!(format_score(0.123456), "0.1235");
        assert_eq!(format_score(33.5), "33.5");
        assert_eq!(format_score(-0.00001), "0");
    }
}
