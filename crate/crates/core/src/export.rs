//! Tab-separated export of match results.
//!
//! Columns are `sentence_id`, `sentence_text`, then `<name>_text`,
//! `<name>_start`, `<name>_end` for each capture in query order. Offsets
//! are token indices; `end` is exclusive. Rows end with `\n`, and tabs or
//! line breaks inside a cell become single spaces.

use std::io::{self, Write};

use crate::builder::QueryGraph;
use crate::matcher::MatchResult;

pub fn clean_cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn tsv_header(graph: &QueryGraph) -> String {
    let mut cols = vec!["sentence_id".to_string(), "sentence_text".to_string()];
    for name in graph.capture_names() {
        for suffix in ["text", "start", "end"] {
            cols.push(clean_cell(&format!("{name}_{suffix}")));
        }
    }
    cols.join("\t")
}

pub fn tsv_row(result: &MatchResult) -> String {
    let mut cols = vec![clean_cell(&result.sentence_id), clean_cell(&result.text)];
    for c in &result.captures {
        cols.push(clean_cell(&c.text));
        cols.push(c.span.start.to_string());
        cols.push(c.span.end.to_string());
    }
    cols.join("\t")
}

/// Writes the header and up to `limit` rows; returns the row count.
pub fn write_tsv<W: Write>(
    out: &mut W,
    graph: &QueryGraph,
    results: impl IntoIterator<Item = MatchResult>,
    limit: Option<usize>,
) -> io::Result<usize> {
    writeln!(out, "{}", tsv_header(graph))?;
    let mut rows = 0;
    for r in results.into_iter().take(limit.unwrap_or(usize::MAX)) {
        writeln!(out, "{}", tsv_row(&r))?;
        rows += 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{QueryEdge, QueryNode};
    use crate::constraint::TokenConstraint;
    use crate::corpus::Span;
    use crate::matcher::CaptureBinding;

    fn graph() -> QueryGraph {
        QueryGraph::new(
            vec![
                QueryNode::capture(0, "who", TokenConstraint::any()),
                QueryNode::connector(1),
                QueryNode::capture(2, "what", TokenConstraint::any()),
            ],
            vec![QueryEdge::new(1, 0, "nsubj"), QueryEdge::new(1, 2, "dobj")],
        )
        .unwrap()
    }

    #[test]
    fn header_follows_capture_order() {
        assert_eq!(
            tsv_header(&graph()),
            "sentence_id\tsentence_text\twho_text\twho_start\twho_end\twhat_text\twhat_start\twhat_end"
        );
    }

    #[test]
    fn cells_are_cleaned() {
        let r = MatchResult {
            sentence_id: "s1".into(),
            text: "a\tb\nc".into(),
            captures: vec![CaptureBinding {
                name: "who".into(),
                token: 0,
                span: Span::new(0, 2),
                text: "x\ty".into(),
            }],
        };
        assert_eq!(tsv_row(&r), "s1\ta b c\tx y\t0\t2");
    }

    #[test]
    fn header_only_when_empty() {
        let mut out = Vec::new();
        assert_eq!(write_tsv(&mut out, &graph(), Vec::new(), None).unwrap(), 0);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.ends_with('\n'));
    }
}
